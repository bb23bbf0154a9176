//! Benchmark workloads, built from the core test fixtures.

use psforge_core::{compile, parse_game, CompiledGame, SourceText};

pub const SOKOBAN_12X12: &str = include_str!("../../core/tests/fixtures/games/sokoban_12x12.txt");
pub const MICRO_SOKOBAN: &str = include_str!("../../core/tests/fixtures/games/micro_sokoban.txt");
pub const DEPOT: &str = include_str!("../../core/tests/fixtures/corpus/depot.txt");
pub const ORCHARD: &str = include_str!("../../core/tests/fixtures/corpus/orchard.txt");

pub fn source(text: &str, origin: &str) -> SourceText {
    SourceText::new(text, origin)
}

pub fn compiled(text: &str) -> CompiledGame {
    let parsed = parse_game(&source(text, "bench"));
    let spec = parsed.spec.expect("bench fixture parses");
    compile(&spec).game.expect("bench fixture compiles")
}
