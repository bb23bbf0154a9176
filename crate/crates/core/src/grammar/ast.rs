//! Syntax tree of a single PuzzleScript program.
//!
//! Every node carries the [`Pos`] it was parsed from. Positions never take
//! part in equality, so two trees compare equal when they describe the same
//! program regardless of layout, comments or blank lines.

use std::fmt;

use serde::{Deserialize, Serialize};

/// 1-based source position. Always compares equal to any other `Pos`.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl Pos {
    pub fn new(line: usize, column: usize) -> Self {
        Self { line, column }
    }
}

impl PartialEq for Pos {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Pos {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Section {
    Objects,
    Legend,
    Sounds,
    CollisionLayers,
    Rules,
    WinConditions,
    Levels,
}

impl Section {
    /// Canonical order.
    pub const ALL: [Section; 7] = [
        Section::Objects,
        Section::Legend,
        Section::Sounds,
        Section::CollisionLayers,
        Section::Rules,
        Section::WinConditions,
        Section::Levels,
    ];

    pub fn header(self) -> &'static str {
        match self {
            Section::Objects => "OBJECTS",
            Section::Legend => "LEGEND",
            Section::Sounds => "SOUNDS",
            Section::CollisionLayers => "COLLISIONLAYERS",
            Section::Rules => "RULES",
            Section::WinConditions => "WINCONDITIONS",
            Section::Levels => "LEVELS",
        }
    }

    pub fn from_header(word: &str) -> Option<Section> {
        Section::ALL
            .into_iter()
            .find(|s| s.header().eq_ignore_ascii_case(word))
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GameSpec {
    pub prelude: Vec<PreludeEntry>,
    pub objects: Vec<ObjectDef>,
    pub legend: Vec<LegendEntry>,
    /// Retained verbatim, never interpreted.
    pub sounds: Vec<String>,
    pub collision_layers: Vec<LayerDef>,
    pub rules: Vec<RuleEntry>,
    pub win_conditions: Vec<WinCondition>,
    pub levels: Vec<LevelEntry>,
}

impl GameSpec {
    pub fn prelude_value(&self, key: &str) -> Option<&str> {
        self.prelude
            .iter()
            .find(|p| p.key == key)
            .map(|p| p.value.as_str())
    }

    pub fn has_prelude_flag(&self, key: &str) -> bool {
        self.prelude.iter().any(|p| p.key == key)
    }

    pub fn rule_defs(&self) -> impl Iterator<Item = &RuleDef> {
        self.rules.iter().filter_map(|r| match r {
            RuleEntry::Rule(rule) => Some(rule),
            RuleEntry::LoopMarker { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreludeEntry {
    /// Lowercased.
    pub key: String,
    /// Empty for bare flags.
    pub value: String,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectDef {
    pub name: String,
    /// Optional single-character level glyph given after the name.
    pub glyph: Option<String>,
    pub colors: Vec<String>,
    pub sprite: Sprite,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sprite {
    Solid,
    /// 5×5; `None` is transparent, `Some(i)` indexes the color list.
    Pixels(Vec<Vec<Option<u8>>>),
}

pub const SPRITE_SIZE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LegendKind {
    Alias,
    /// `and`: all members share the cell.
    Aggregate,
    /// `or`: any one member.
    Property,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub glyph: String,
    pub kind: LegendKind,
    pub members: Vec<String>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerDef {
    pub members: Vec<String>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleEntry {
    Rule(RuleDef),
    /// `startloop` / `endloop`; parsed so the compiler can reject it.
    LoopMarker { start: bool, pos: Pos },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DirectionConstraint {
    None,
    Up,
    Down,
    Left,
    Right,
    Horizontal,
    Vertical,
}

impl DirectionConstraint {
    pub fn keyword(self) -> Option<&'static str> {
        match self {
            DirectionConstraint::None => None,
            DirectionConstraint::Up => Some("up"),
            DirectionConstraint::Down => Some("down"),
            DirectionConstraint::Left => Some("left"),
            DirectionConstraint::Right => Some("right"),
            DirectionConstraint::Horizontal => Some("horizontal"),
            DirectionConstraint::Vertical => Some("vertical"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleDef {
    /// Line began with `+`.
    pub grouped: bool,
    pub late: bool,
    pub random: bool,
    pub rigid: bool,
    pub direction: DirectionConstraint,
    pub lhs: Vec<BracketPattern>,
    pub rhs: Vec<BracketPattern>,
    pub commands: Vec<Command>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BracketPattern {
    pub items: Vec<BracketItem>,
    pub pos: Pos,
}

impl BracketPattern {
    pub fn ellipsis_positions(&self) -> Vec<usize> {
        self.items
            .iter()
            .enumerate()
            .filter(|(_, item)| matches!(item, BracketItem::Ellipsis))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn cells(&self) -> impl Iterator<Item = &CellPattern> {
        self.items.iter().filter_map(|item| match item {
            BracketItem::Cell(cell) => Some(cell),
            BracketItem::Ellipsis => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BracketItem {
    Cell(CellPattern),
    Ellipsis,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CellPattern {
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub negated: bool,
    pub motion: MotionWord,
    pub entity: String,
    pub pos: Pos,
}

/// Movement qualifier written in front of an entity inside a rule cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MotionWord {
    None,
    /// `>`
    Forward,
    /// `<`
    Backward,
    /// `^`
    Ccw,
    /// `v`
    Cw,
    Up,
    Down,
    Left,
    Right,
    Moving,
    Stationary,
    Action,
    RandomDir,
    /// `random` spawn qualifier.
    Random,
    Horizontal,
    Vertical,
    Perpendicular,
    Parallel,
    Orthogonal,
}

impl MotionWord {
    pub fn parse(word: &str) -> Option<MotionWord> {
        Some(match word.to_ascii_lowercase().as_str() {
            ">" => MotionWord::Forward,
            "<" => MotionWord::Backward,
            "^" => MotionWord::Ccw,
            "v" => MotionWord::Cw,
            "up" => MotionWord::Up,
            "down" => MotionWord::Down,
            "left" => MotionWord::Left,
            "right" => MotionWord::Right,
            "moving" => MotionWord::Moving,
            "stationary" => MotionWord::Stationary,
            "action" => MotionWord::Action,
            "randomdir" => MotionWord::RandomDir,
            "random" => MotionWord::Random,
            "horizontal" => MotionWord::Horizontal,
            "vertical" => MotionWord::Vertical,
            "perpendicular" => MotionWord::Perpendicular,
            "parallel" => MotionWord::Parallel,
            "orthogonal" => MotionWord::Orthogonal,
            _ => return None,
        })
    }

    pub fn keyword(self) -> Option<&'static str> {
        Some(match self {
            MotionWord::None => return None,
            MotionWord::Forward => ">",
            MotionWord::Backward => "<",
            MotionWord::Ccw => "^",
            MotionWord::Cw => "v",
            MotionWord::Up => "up",
            MotionWord::Down => "down",
            MotionWord::Left => "left",
            MotionWord::Right => "right",
            MotionWord::Moving => "moving",
            MotionWord::Stationary => "stationary",
            MotionWord::Action => "action",
            MotionWord::RandomDir => "randomdir",
            MotionWord::Random => "random",
            MotionWord::Horizontal => "horizontal",
            MotionWord::Vertical => "vertical",
            MotionWord::Perpendicular => "perpendicular",
            MotionWord::Parallel => "parallel",
            MotionWord::Orthogonal => "orthogonal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Command {
    Cancel,
    Win,
    Again,
    Checkpoint,
    Restart,
    Message(String),
    /// Sound effects are parsed and ignored.
    Sfx(String),
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Cancel => f.write_str("cancel"),
            Command::Win => f.write_str("win"),
            Command::Again => f.write_str("again"),
            Command::Checkpoint => f.write_str("checkpoint"),
            Command::Restart => f.write_str("restart"),
            Command::Message(text) => write!(f, "message {text}"),
            Command::Sfx(name) => f.write_str(name),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quantifier {
    All,
    Some,
    No,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinCondition {
    pub quantifier: Quantifier,
    pub subject: String,
    pub on_target: Option<String>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevelEntry {
    Grid { rows: Vec<String>, pos: Pos },
    Message { text: String, pos: Pos },
}

impl LevelEntry {
    pub fn is_grid(&self) -> bool {
        matches!(self, LevelEntry::Grid { .. })
    }
}
