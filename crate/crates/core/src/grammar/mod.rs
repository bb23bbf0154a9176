//! PuzzleScript grammar: parsing, repair and canonical printing.

pub mod ast;
mod lexer;
pub mod parser;
pub mod printer;
pub mod repair;

pub use ast::*;
pub use parser::{parse_game, syntax_error_count, ParseResult};
pub use printer::{print_game, print_rule};
pub use repair::{repair_source, RepairOutcome};
