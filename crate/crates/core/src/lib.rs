//! Parsing, compiling, simulating and solving PuzzleScript games, plus the
//! generate-and-evaluate loop used to study language-model game design.

pub mod compiler;
pub mod corpus;
pub mod diagnostic;
pub mod engine;
pub mod grammar;
pub mod metrics;
pub mod orchestrator;
pub mod solver;
pub mod source;

#[cfg(test)]
mod testutil;

pub use compiler::{compile, CompileResult, CompiledGame};
pub use corpus::{load_corpus, sample_fewshot, Corpus, FewshotSample};
pub use diagnostic::{Diagnostic, Phase, Severity};
pub use engine::{init_state, step, Action, GameState, TurnOutcome};
pub use grammar::{parse_game, print_game, repair_source, GameSpec, ParseResult};
pub use metrics::{evaluate_game, EvalThresholds, GameEvalReport, SummaryTable};
pub use orchestrator::{run_trial, TrialConfig, TrialOutcome, TrialRecord};
pub use solver::{bfs_solve, solve_all_levels, SolveResult, SolveStatus, SolverConfig};
pub use source::SourceText;
