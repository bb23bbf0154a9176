use crate::compiler::{CompiledGame, CompiledLevel};

use super::state::{Action, GameState, Status};
use super::{init_state, step, InitError, TurnOutcome};

/// Interactive play of one game: current state plus unbounded undo history.
#[derive(Debug, Clone)]
pub struct PlaySession<'g> {
    game: &'g CompiledGame,
    state: GameState,
    initial: GameState,
    history: Vec<(u128, GameState)>,
    moves: usize,
    seed: u64,
}

impl<'g> PlaySession<'g> {
    pub fn new(game: &'g CompiledGame, level_index: usize) -> Result<Self, InitError> {
        Self::with_seed(game, level_index, 0)
    }

    /// `seed` drives random rules on every level of the session.
    pub fn with_seed(game: &'g CompiledGame, level_index: usize, seed: u64) -> Result<Self, InitError> {
        let mut state = init_state(game, level_index)?;
        state.rng_seed = seed;
        Ok(Self {
            game,
            initial: state.clone(),
            state,
            history: Vec::new(),
            moves: 0,
            seed,
        })
    }

    pub fn game(&self) -> &'g CompiledGame {
        self.game
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn level_index(&self) -> usize {
        self.state.level_index
    }

    /// Turns taken on this level that changed something, net of undos.
    pub fn moves(&self) -> usize {
        self.moves
    }

    pub fn is_won(&self) -> bool {
        self.state.status == Status::Won
    }

    pub fn apply(&mut self, action: Action) -> TurnOutcome {
        let outcome = step(self.game, &self.state, action);
        if outcome.changed {
            let previous = std::mem::replace(&mut self.state, outcome.state.clone());
            self.history.push((super::hash_state(&previous), previous));
            self.moves += 1;
        }
        outcome
    }

    pub fn undo(&mut self) -> bool {
        match self.history.pop() {
            Some((_, previous)) => {
                self.state = previous;
                self.moves = self.moves.saturating_sub(1);
                true
            }
            None => false,
        }
    }

    /// Returns to the level's checkpoint, or its start. Undoable.
    pub fn restart(&mut self) {
        let mut target = self.initial.clone();
        if let Some(saved) = &self.state.checkpoint {
            target.cells = saved.clone();
            target.checkpoint = Some(saved.clone());
        }
        if target != self.state {
            let previous = std::mem::replace(&mut self.state, target);
            self.history.push((super::hash_state(&previous), previous));
        }
    }

    /// Moves to the next grid level, returning the messages passed on the way,
    /// or `None` when this was the last level.
    pub fn next_level(&mut self) -> Option<Vec<String>> {
        let mut messages = Vec::new();
        for (index, level) in self.game.levels.iter().enumerate().skip(self.state.level_index + 1) {
            match level {
                CompiledLevel::Message(text) => messages.push(text.clone()),
                CompiledLevel::Grid(_) => {
                    let mut state = init_state(self.game, index).ok()?;
                    state.rng_seed = self.seed;
                    self.initial = state.clone();
                    self.state = state;
                    self.history.clear();
                    self.moves = 0;
                    return Some(messages);
                }
            }
        }
        None
    }
}
