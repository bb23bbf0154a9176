//! Breadth-first playtesting of levels.

use std::collections::{HashSet, VecDeque};
use std::hash::{BuildHasherDefault, Hasher};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_128;

use crate::compiler::{CompiledGame, CompiledLevel};
use crate::engine::{init_state, step, Action, GameState, InitError, Status};

pub const DEFAULT_NODE_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Unique states to expand before giving up.
    pub node_budget: u64,
    /// Optional wall-clock limit per level. Results are only reproducible
    /// when this is unset.
    pub per_level_time_budget: Option<Duration>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            node_budget: DEFAULT_NODE_BUDGET,
            per_level_time_budget: None,
        }
    }
}

impl SolverConfig {
    pub fn with_budget(node_budget: u64) -> Self {
        Self {
            node_budget: node_budget.max(1),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Solved,
    Exhausted,
    BudgetExceeded,
    Nondeterministic,
    EngineError,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Solved => "solved",
            SolveStatus::Exhausted => "exhausted",
            SolveStatus::BudgetExceeded => "budget_exceeded",
            SolveStatus::Nondeterministic => "nondeterministic",
            SolveStatus::EngineError => "engine_error",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Winning inputs as letters (`U`, `D`, `L`, `R`, `X`); empty unless solved.
    #[serde(with = "letters")]
    pub solution: Vec<Action>,
    pub solution_length: usize,
    /// Unique states expanded.
    pub nodes_explored: u64,
    /// Unique states generated, including the start state.
    pub enqueued: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl SolveResult {
    fn unsolved(status: SolveStatus, nodes_explored: u64, enqueued: u64) -> Self {
        Self {
            status,
            solution: Vec::new(),
            solution_length: 0,
            nodes_explored,
            enqueued,
            detail: None,
        }
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn is_solved(&self) -> bool {
        self.status == SolveStatus::Solved
    }
}

mod letters {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::engine::{actions_from_letters, actions_to_letters, Action};

    pub fn serialize<S: Serializer>(actions: &[Action], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&actions_to_letters(actions))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Action>, D::Error> {
        let text = String::deserialize(d)?;
        actions_from_letters(&text)
            .map_err(|c| serde::de::Error::custom(format!("invalid action letter '{c}'")))
    }
}

/// A queued state without its motions (always empty between turns), with
/// slots narrowed to bytes when every object id fits.
enum Packed {
    Narrow(Box<[u8]>),
    Wide(Box<[u16]>),
}

struct Frontier {
    cells: Packed,
    checkpoint: Option<Box<[u16]>>,
    node: u32,
}

/// Keys are already uniform 128-bit digests; fold them instead of
/// hashing again.
#[derive(Default)]
struct KeyHasher(u64);

impl Hasher for KeyHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for chunk in bytes.chunks(8) {
            let mut word = [0u8; 8];
            word[..chunk.len()].copy_from_slice(chunk);
            self.0 ^= u64::from_le_bytes(word);
        }
    }

    fn write_u128(&mut self, v: u128) {
        self.0 ^= v as u64 ^ (v >> 64) as u64;
    }
}

type Visited = HashSet<u128, BuildHasherDefault<KeyHasher>>;

/// Serializes the grid and status of `state` into `scratch` and digests it.
/// Dimensions are fixed within a level, so they are left out.
fn state_key(state: &GameState, narrow: bool, scratch: &mut Vec<u8>) -> u128 {
    scratch.clear();
    if narrow {
        scratch.extend(state.cells.iter().map(|&v| v as u8));
    } else {
        scratch.extend(state.cells.iter().flat_map(|v| v.to_le_bytes()));
    }
    scratch.push(state.status as u8);
    xxh3_128(scratch)
}

impl Frontier {
    /// `scratch` holds the bytes from [`state_key`] for this state.
    fn pack(state: GameState, node: u32, narrow: bool, scratch: &[u8]) -> Self {
        let cells = if narrow {
            Packed::Narrow(scratch[..state.cells.len()].into())
        } else {
            Packed::Wide(state.cells.into_boxed_slice())
        };
        Self {
            cells,
            checkpoint: state.checkpoint.map(Vec::into_boxed_slice),
            node,
        }
    }

    fn unpack(self, template: &GameState) -> (GameState, u32) {
        let mut state = template.clone();
        match self.cells {
            Packed::Narrow(b) => {
                for (dst, src) in state.cells.iter_mut().zip(b.iter()) {
                    *dst = *src as u16;
                }
            }
            Packed::Wide(w) => state.cells.copy_from_slice(&w),
        }
        state.checkpoint = self.checkpoint.map(Vec::from);
        (state, self.node)
    }
}

/// Searches level `level_index` breadth-first, so any solution found is
/// as short as possible.
pub fn bfs_solve(game: &CompiledGame, level_index: usize, config: &SolverConfig) -> SolveResult {
    if game.has_random_rules() {
        return SolveResult::unsolved(SolveStatus::Nondeterministic, 0, 0)
            .with_detail("the game has random rules, so turns are not repeatable");
    }
    let root = match init_state(game, level_index) {
        Ok(s) => s,
        Err(InitError::Runtime(d)) => {
            return SolveResult::unsolved(SolveStatus::EngineError, 0, 0).with_detail(d.to_string())
        }
        Err(e) => return SolveResult::unsolved(SolveStatus::EngineError, 0, 0).with_detail(e.to_string()),
    };
    let budget = config.node_budget.max(1);
    let started = Instant::now();

    // parent index and the action leading here; the root's parent is itself.
    let mut arena: Vec<(u32, Action)> = vec![(0, Action::Up)];
    let narrow = game.objects.len() < u8::MAX as usize;
    let mut scratch = Vec::new();
    let mut visited = Visited::default();
    visited.insert(state_key(&root, narrow, &mut scratch));
    let template = GameState {
        checkpoint: None,
        ..root.clone()
    };
    let mut queue = VecDeque::from([Frontier::pack(root, 0, narrow, &scratch)]);
    let mut nodes = 0u64;
    let mut enqueued = 1u64;

    let path = |arena: &[(u32, Action)], mut idx: u32| {
        let mut actions = Vec::new();
        while idx != 0 {
            let (parent, action) = arena[idx as usize];
            actions.push(action);
            idx = parent;
        }
        actions.reverse();
        actions
    };
    let solved = |solution: Vec<Action>, nodes, enqueued| SolveResult {
        status: SolveStatus::Solved,
        solution_length: solution.len(),
        solution,
        nodes_explored: nodes,
        enqueued,
        detail: None,
    };

    while let Some(entry) = queue.pop_front() {
        let (state, idx) = entry.unpack(&template);
        nodes += 1;
        if state.status == Status::Won {
            return solved(path(&arena, idx), nodes, enqueued);
        }
        for action in Action::ALL {
            let outcome = step(game, &state, action);
            if let Some(d) = outcome.error {
                return SolveResult::unsolved(SolveStatus::EngineError, nodes, enqueued).with_detail(d.to_string());
            }
            if !outcome.changed || !visited.insert(state_key(&outcome.state, narrow, &mut scratch)) {
                continue;
            }
            let child = arena.len() as u32;
            arena.push((idx, action));
            enqueued += 1;
            if outcome.state.status == Status::Won {
                return solved(path(&arena, child), nodes, enqueued);
            }
            queue.push_back(Frontier::pack(outcome.state, child, narrow, &scratch));
        }
        if queue.is_empty() {
            break;
        }
        if nodes >= budget {
            return SolveResult::unsolved(SolveStatus::BudgetExceeded, nodes, enqueued);
        }
        if config.per_level_time_budget.is_some_and(|limit| started.elapsed() >= limit) {
            return SolveResult::unsolved(SolveStatus::BudgetExceeded, nodes, enqueued)
                .with_detail("time budget exceeded");
        }
    }
    SolveResult::unsolved(SolveStatus::Exhausted, nodes, enqueued)
}

/// Per-level entry of [`solve_all_levels`]; message levels are kept as
/// markers so indices line up with the source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevelReport {
    Message { level_index: usize },
    Grid { level_index: usize, result: SolveResult },
}

impl LevelReport {
    pub fn result(&self) -> Option<&SolveResult> {
        match self {
            LevelReport::Grid { result, .. } => Some(result),
            LevelReport::Message { .. } => None,
        }
    }

    pub fn level_index(&self) -> usize {
        match self {
            LevelReport::Grid { level_index, .. } | LevelReport::Message { level_index } => *level_index,
        }
    }
}

/// Solves every grid level with its own budget.
pub fn solve_all_levels(game: &CompiledGame, config: &SolverConfig) -> Vec<LevelReport> {
    game.levels
        .iter()
        .enumerate()
        .map(|(level_index, level)| match level {
            CompiledLevel::Message(_) => LevelReport::Message { level_index },
            CompiledLevel::Grid(_) => LevelReport::Grid {
                level_index,
                result: bfs_solve(game, level_index, config),
            },
        })
        .collect()
}

#[cfg(test)]
mod tests;
