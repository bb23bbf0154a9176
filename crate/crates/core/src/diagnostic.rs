//! Positioned diagnostics shared by the parser, the compiler and the engine.
//!
//! The text form `line:col [CODE] message` is fed back into generation
//! prompts, so codes are part of the public contract and never renamed.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Syntax,
    Semantic,
    Runtime,
}

/// Stable diagnostic codes.
pub mod codes {
    // syntax
    pub const UNCLOSED_COMMENT: &str = "UNCLOSED_COMMENT";
    pub const MISSING_SECTION_DELIMITER: &str = "MISSING_SECTION_DELIMITER";
    pub const MISSING_SECTION_HEADER: &str = "MISSING_SECTION_HEADER";
    pub const MISSING_SECTION: &str = "MISSING_SECTION";
    pub const DUPLICATE_SECTION: &str = "DUPLICATE_SECTION";
    pub const SECTION_ORDER: &str = "SECTION_ORDER";
    pub const UNKNOWN_PRELUDE_KEY: &str = "UNKNOWN_PRELUDE_KEY";
    pub const MISSING_PRELUDE_VALUE: &str = "MISSING_PRELUDE_VALUE";
    pub const INVALID_OBJECT_NAME: &str = "INVALID_OBJECT_NAME";
    pub const INVALID_COLOR: &str = "INVALID_COLOR";
    pub const MISSING_COLORS: &str = "MISSING_COLORS";
    pub const TOO_MANY_COLORS: &str = "TOO_MANY_COLORS";
    pub const SPRITE_SHAPE: &str = "SPRITE_SHAPE";
    pub const PALETTE_INDEX: &str = "PALETTE_INDEX";
    pub const MALFORMED_LEGEND: &str = "MALFORMED_LEGEND";
    pub const MIXED_LEGEND_OPERATORS: &str = "MIXED_LEGEND_OPERATORS";
    pub const MALFORMED_LAYER: &str = "MALFORMED_LAYER";
    pub const MALFORMED_RULE: &str = "MALFORMED_RULE";
    pub const MALFORMED_WIN_CONDITION: &str = "MALFORMED_WIN_CONDITION";
    pub const MALFORMED_LEVEL_ROW: &str = "MALFORMED_LEVEL_ROW";
    pub const RAGGED_LEVEL: &str = "RAGGED_LEVEL";
    pub const RULE_ARITY_MISMATCH: &str = "RULE_ARITY_MISMATCH";

    // semantic
    pub const UNDEFINED_OBJECT: &str = "UNDEFINED_OBJECT";
    pub const DUPLICATE_DEFINITION: &str = "DUPLICATE_DEFINITION";
    pub const OBJECT_IN_NO_LAYER: &str = "OBJECT_IN_NO_LAYER";
    pub const OBJECT_IN_MANY_LAYERS: &str = "OBJECT_IN_MANY_LAYERS";
    pub const OBJECT_LAYER_CONFLICT: &str = "OBJECT_LAYER_CONFLICT";
    pub const NO_PLAYER_DEFINED: &str = "NO_PLAYER_DEFINED";
    pub const UNKNOWN_GLYPH_IN_LEVEL: &str = "UNKNOWN_GLYPH_IN_LEVEL";
    pub const AMBIGUOUS_GLYPH_IN_LEVEL: &str = "AMBIGUOUS_GLYPH_IN_LEVEL";
    pub const AMBIGUOUS_RHS_PROPERTY: &str = "AMBIGUOUS_RHS_PROPERTY";
    pub const UNSUPPORTED_FEATURE: &str = "UNSUPPORTED_FEATURE";
    pub const EMPTY_LEVELS: &str = "EMPTY_LEVELS";
    pub const UNUSED_OBJECT: &str = "UNUSED_OBJECT";
    pub const NO_WIN_CONDITION: &str = "NO_WIN_CONDITION";
    pub const BACKGROUND_NOT_IN_LAYER: &str = "BACKGROUND_NOT_IN_LAYER";
    pub const IGNORED_PRELUDE_KEY: &str = "IGNORED_PRELUDE_KEY";

    // runtime
    pub const RULE_LOOP_DETECTED: &str = "RULE_LOOP_DETECTED";
    pub const NONDETERMINISTIC_GAME: &str = "NONDETERMINISTIC_GAME";
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub phase: Phase,
    /// 1-based.
    pub line: usize,
    /// 1-based, counted in characters.
    pub column: usize,
    pub code: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(
        severity: Severity,
        phase: Phase,
        line: usize,
        column: usize,
        code: &str,
        message: impl Into<String>,
    ) -> Self {
        Self {
            severity,
            phase,
            line: line.max(1),
            column: column.max(1),
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn syntax(line: usize, column: usize, code: &str, message: impl Into<String>) -> Self {
        Self::new(Severity::Error, Phase::Syntax, line, column, code, message)
    }

    pub fn semantic(line: usize, column: usize, code: &str, message: impl Into<String>) -> Self {
        Self::new(Severity::Error, Phase::Semantic, line, column, code, message)
    }

    pub fn warning(
        phase: Phase,
        line: usize,
        column: usize,
        code: &str,
        message: impl Into<String>,
    ) -> Self {
        Self::new(Severity::Warning, phase, line, column, code, message)
    }

    pub fn runtime(code: &str, message: impl Into<String>) -> Self {
        Self::new(Severity::Error, Phase::Runtime, 1, 1, code, message)
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "",
            Severity::Warning => "warning: ",
        };
        write!(f, "{}:{} [{}] {}{}", self.line, self.column, self.code, tag, self.message)
    }
}

/// Renders diagnostics one per line in the stable text format.
pub fn render(diagnostics: &[Diagnostic]) -> String {
    let mut out = String::new();
    for d in diagnostics {
        out.push_str(&d.to_string());
        out.push('\n');
    }
    out
}

pub fn error_count(diagnostics: &[Diagnostic]) -> usize {
    diagnostics.iter().filter(|d| d.is_error()).count()
}

pub(crate) fn sort(diagnostics: &mut [Diagnostic]) {
    diagnostics.sort_by(|a, b| (a.line, a.column).cmp(&(b.line, b.column)));
}
