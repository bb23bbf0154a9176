//! Turn-by-turn simulation of compiled games.

mod movement;
mod rules;
mod session;
mod state;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use xxhash_rust::xxh3::xxh3_128;

use crate::compiler::{CompiledGame, CompiledLevel, Motion, ObjectSet};
use crate::grammar::Quantifier;
use crate::diagnostic::{codes, Diagnostic};

pub use movement::resolve_movement;
pub use rules::RULE_APPLICATION_CAP;
pub use session::PlaySession;
pub use state::{actions_from_letters, actions_to_letters, Action, GameState, Status};

/// `again` repetitions allowed per turn.
pub const AGAIN_CAP: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnEvent {
    Won,
    Cancelled,
    Message(String),
    CheckpointSet,
    Restarted,
    AgainRan(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnOutcome {
    pub state: GameState,
    /// Whether the grid or status differs from before the turn.
    pub changed: bool,
    pub events: Vec<TurnEvent>,
    /// Set when a runtime cap tripped; the turn is then cancelled.
    pub error: Option<Diagnostic>,
}

impl TurnOutcome {
    pub fn won(&self) -> bool {
        self.events.contains(&TurnEvent::Won)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InitError {
    #[error("level {index} does not exist (the game has {count} levels)")]
    OutOfRange { index: usize, count: usize },
    #[error("level {0} is a message, not a playable grid")]
    MessageLevel(usize),
    #[error("{0}")]
    Runtime(Diagnostic),
}

/// The level's grid as authored, with empty motions.
fn level_state(game: &CompiledGame, level_index: usize) -> Result<GameState, InitError> {
    let level = game.levels.get(level_index).ok_or(InitError::OutOfRange {
        index: level_index,
        count: game.levels.len(),
    })?;
    let CompiledLevel::Grid(grid) = level else {
        return Err(InitError::MessageLevel(level_index));
    };
    let cells: Vec<u16> = grid.slots.iter().map(|s| s.map_or(0, |id| id + 1)).collect();
    Ok(GameState {
        width: grid.width,
        height: grid.height,
        layer_count: game.layer_count,
        motions: vec![0; cells.len()],
        cells,
        level_index,
        checkpoint: None,
        rng_seed: 0,
        status: Status::InProgress,
    })
}

pub fn init_state(game: &CompiledGame, level_index: usize) -> Result<GameState, InitError> {
    let state = level_state(game, level_index)?;
    if !game.flags.run_rules_on_level_start {
        return Ok(state);
    }
    let outcome = play_turn(game, &state, None);
    match outcome.error {
        Some(d) => Err(InitError::Runtime(d)),
        None => Ok(outcome.state),
    }
}

/// Plays one turn. A finished level absorbs every input unchanged.
pub fn step(game: &CompiledGame, state: &GameState, action: Action) -> TurnOutcome {
    if state.status == Status::Won || (action == Action::Act && game.flags.noaction) {
        return TurnOutcome {
            state: state.clone(),
            changed: false,
            events: Vec::new(),
            error: None,
        };
    }
    play_turn(game, state, Some(action.motion()))
}

fn cancelled(before: &GameState, error: Diagnostic) -> TurnOutcome {
    TurnOutcome {
        state: before.clone(),
        changed: false,
        events: vec![TurnEvent::Cancelled],
        error: Some(error),
    }
}

fn play_turn(game: &CompiledGame, before: &GameState, input: Option<Motion>) -> TurnOutcome {
    let mut state = before.clone();
    let mut events = Vec::new();
    let mut input = input;
    let mut agains = 0;
    loop {
        let pre = state.clone();
        let mut commands = rules::Commands::default();
        if let Err(e) = run_phases(game, &mut state, input, &mut commands) {
            return cancelled(before, e);
        }
        events.extend(commands.messages.drain(..).map(TurnEvent::Message));
        if commands.cancel {
            state = pre;
            events.push(TurnEvent::Cancelled);
            break;
        }
        if commands.restart {
            let mut fresh = level_state(game, state.level_index).expect("state comes from a grid level");
            if let Some(saved) = &state.checkpoint {
                fresh.cells = saved.clone();
                fresh.checkpoint = Some(saved.clone());
            }
            fresh.rng_seed = state.rng_seed;
            state = fresh;
            events.push(TurnEvent::Restarted);
            break;
        }
        if commands.checkpoint {
            state.checkpoint = Some(state.cells.clone());
            events.push(TurnEvent::CheckpointSet);
        }
        if commands.win || check_win(game, &state) {
            state.status = Status::Won;
            events.push(TurnEvent::Won);
            break;
        }
        if !commands.again || state.cells == pre.cells {
            break;
        }
        agains += 1;
        if agains > AGAIN_CAP {
            return cancelled(
                before,
                Diagnostic::runtime(
                    codes::RULE_LOOP_DETECTED,
                    format!("'again' repeated more than {AGAIN_CAP} times in one turn"),
                ),
            );
        }
        input = None;
    }
    if agains > 0 {
        events.push(TurnEvent::AgainRan(agains));
    }
    let changed = state.cells != before.cells || state.status != before.status;
    TurnOutcome {
        state,
        changed,
        events,
        error: None,
    }
}

fn run_phases(
    game: &CompiledGame,
    state: &mut GameState,
    input: Option<Motion>,
    commands: &mut rules::Commands,
) -> Result<(), Diagnostic> {
    if let Some(motion) = input {
        for slot in 0..state.cells.len() {
            let v = state.cells[slot];
            if v != 0 && game.player.contains(v - 1) {
                state.motions[slot] = motion as u8;
            }
        }
    }
    rules::run_rules(game, state, false, commands)?;
    resolve_movement(state);
    rules::run_rules(game, state, true, commands)?;
    Ok(())
}

/// True iff every win condition holds. A game without win conditions is
/// never won.
pub fn check_win(game: &CompiledGame, state: &GameState) -> bool {
    if game.win_conditions.is_empty() {
        return false;
    }
    let holds = |cell: &[u16], set: &ObjectSet| cell.iter().any(|&v| v != 0 && set.contains(v - 1));
    let cells = || state.cells.chunks_exact(state.layer_count.max(1));
    game.win_conditions.iter().all(|wc| {
        let mut witnesses = cells().filter(|c| holds(c, &wc.subject));
        let on_target = |c: &[u16]| wc.target.as_ref().is_none_or(|t| holds(c, t));
        match wc.quantifier {
            Quantifier::All => witnesses.all(on_target),
            Quantifier::Some => witnesses.any(on_target),
            Quantifier::No => !witnesses.any(on_target),
        }
    })
}

/// 128-bit digest of the grid and status. Motions are not included; they
/// are always empty between turns.
pub fn hash_state(state: &GameState) -> u128 {
    let mut bytes = Vec::with_capacity(13 + state.cells.len() * 2);
    for dim in [state.width, state.height, state.layer_count] {
        bytes.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for v in &state.cells {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes.push(state.status as u8);
    xxh3_128(&bytes)
}

/// Re-encodes the grid with the game's level glyphs; `?` marks cells no
/// glyph describes.
pub fn render_rows(game: &CompiledGame, state: &GameState) -> Vec<String> {
    (0..state.height)
        .map(|r| {
            (0..state.width)
                .map(|c| {
                    let objects: Vec<_> = state.objects_in(state.cell_index(r, c)).collect();
                    game.glyph_for(&objects).unwrap_or('?')
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests;
