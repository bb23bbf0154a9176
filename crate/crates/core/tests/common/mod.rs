//! Fixture loading and reference searches shared by the integration tests.
//!
//! The searches here deliberately avoid the solver: they key on whole
//! `GameState` values instead of state hashes and walk the game with plain
//! recursion.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use psforge_core::compiler::CompiledLevel;
use psforge_core::engine::Status;
use psforge_core::{compile, init_state, parse_game, step, Action, CompiledGame, GameState, SourceText};

/// Resolves from any crate in the workspace, so other test targets can
/// include this module by path.
pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

/// `.txt` files in a fixture subdirectory, sorted.
pub fn fixture_files(sub: &str) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(fixtures().join(sub))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    files.sort();
    files
}

pub fn read(path: &Path) -> SourceText {
    SourceText::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn compile_text(source: &SourceText) -> CompiledGame {
    let parsed = parse_game(source);
    let spec = parsed
        .spec
        .unwrap_or_else(|| panic!("{} does not parse: {:?}", source.origin, parsed.diagnostics));
    let result = compile(&spec);
    result
        .game
        .unwrap_or_else(|| panic!("{} does not compile: {:?}", source.origin, result.diagnostics))
}

pub fn game(name: &str) -> CompiledGame {
    compile_text(&read(&fixtures().join("games").join(format!("{name}.txt"))))
}

pub fn grid_levels(game: &CompiledGame) -> Vec<usize> {
    game.levels
        .iter()
        .enumerate()
        .filter(|(_, l)| matches!(l, CompiledLevel::Grid(_)))
        .map(|(i, _)| i)
        .collect()
}

/// Successor states that differ from `state`. Turns that hit a runtime
/// error count as dead ends.
fn successors(game: &CompiledGame, state: &GameState) -> Vec<GameState> {
    Action::ALL
        .iter()
        .map(|&a| step(game, state, a))
        .filter(|o| o.changed && o.error.is_none())
        .map(|o| o.state)
        .collect()
}

fn won(state: &GameState) -> bool {
    state.status == Status::Won
}

/// Length of the shortest winning input sequence no longer than
/// `max_depth`, found by iterative deepening. The memo records, per state,
/// the largest remaining depth already searched from it.
pub fn iddfs_length(game: &CompiledGame, level: usize, max_depth: usize) -> Option<usize> {
    let root = init_state(game, level).expect("grid level");
    if won(&root) {
        return Some(0);
    }
    fn dfs(
        game: &CompiledGame,
        state: &GameState,
        remaining: usize,
        memo: &mut HashMap<GameState, usize>,
    ) -> bool {
        if remaining == 0 {
            return false;
        }
        for next in successors(game, state) {
            if won(&next) {
                return true;
            }
            let left = remaining - 1;
            if memo.get(&next).is_some_and(|&seen| seen >= left) {
                continue;
            }
            memo.insert(next.clone(), left);
            if dfs(game, &next, left, memo) {
                return true;
            }
        }
        false
    }
    (1..=max_depth).find(|&depth| {
        let mut memo = HashMap::from([(root.clone(), depth)]);
        dfs(game, &root, depth, &mut memo)
    })
}

pub struct Reachable {
    pub states: usize,
    pub any_won: bool,
    /// True when enumeration stopped at the cap.
    pub capped: bool,
}

/// Enumerates states reachable from the level start, not expanding won
/// states, up to `cap` distinct states.
pub fn reachable(game: &CompiledGame, level: usize, cap: usize) -> Reachable {
    let root = init_state(game, level).expect("grid level");
    let mut seen = HashSet::from([root.clone()]);
    let mut stack = vec![root];
    let mut any_won = false;
    while let Some(state) = stack.pop() {
        if won(&state) {
            any_won = true;
            continue;
        }
        for next in successors(game, &state) {
            if seen.len() >= cap {
                return Reachable {
                    states: seen.len(),
                    any_won,
                    capped: true,
                };
            }
            if seen.insert(next.clone()) {
                stack.push(next);
            }
        }
    }
    Reachable {
        states: seen.len(),
        any_won,
        capped: false,
    }
}

/// Fixtures with every grid level solvable, and their shortest solution
/// lengths per grid level as found by [`iddfs_length`].
pub const MICRO_GAMES: [(&str, &[usize]); 14] = [
    ("corridor", &[4]),
    ("micro_sokoban", &[4, 9, 13]),
    ("long_push", &[13]),
    ("short_push", &[4]),
    ("chain_push", &[4]),
    ("pull", &[6]),
    ("demolition", &[5, 10]),
    ("twins", &[5, 9]),
    ("gate", &[9]),
    ("coins", &[13]),
    ("lever", &[9]),
    ("portal", &[5]),
    ("mixed_pair", &[4, 13]),
    ("long_pair", &[13, 15]),
];
