//! Builders for small games used across unit tests.

use crate::compiler::{compile, CompiledGame};
use crate::grammar::parse_game;
use crate::source::SourceText;

/// Assembles a complete program. `objects` are `name color` pairs;
/// `legend` and `layers` are one entry per line.
pub fn source(objects: &[&str], legend: &[&str], layers: &[&str], rules: &str, wins: &str, levels: &str) -> String {
    let mut s = String::from("title Test\n\n========\nOBJECTS\n========\n\n");
    for o in objects {
        let (name, color) = o.split_once(' ').unwrap_or((o, "black"));
        s.push_str(&format!("{name}\n{color}\n\n"));
    }
    s.push_str("=======\nLEGEND\n=======\n\n");
    for l in legend {
        s.push_str(l);
        s.push('\n');
    }
    s.push_str("\n================\nCOLLISIONLAYERS\n================\n\n");
    for l in layers {
        s.push_str(l);
        s.push('\n');
    }
    s.push_str(&format!(
        "\n======\nRULES\n======\n\n{rules}\n\n==============\nWINCONDITIONS\n==============\n\n{wins}\n\n=======\nLEVELS\n=======\n\n{levels}\n"
    ));
    s
}

pub fn compile_source(src: &str) -> CompiledGame {
    let parsed = parse_game(&SourceText::new(src, "test"));
    let spec = parsed
        .spec
        .unwrap_or_else(|| panic!("parse failed: {:?}\n{src}", parsed.diagnostics));
    let result = compile(&spec);
    result
        .game
        .unwrap_or_else(|| panic!("compile failed: {:?}\n{src}", result.diagnostics))
}

/// A Sokoban-like game: walls, one pushable crate type, targets.
pub fn sokoban(rules: &str, levels: &str) -> CompiledGame {
    compile_source(&source(
        &["Background black", "Wall grey", "Player blue", "Crate orange", "Target red"],
        &[". = Background", "# = Wall", "P = Player", "* = Crate", "O = Target", "@ = Crate and Target"],
        &["Background", "Target", "Player, Wall, Crate"],
        rules,
        "all Target on Crate",
        levels,
    ))
}

pub const PUSH: &str = "[ > Player | Crate ] -> [ > Player | > Crate ]";
