use serde::{Deserialize, Serialize};

use crate::grammar::{Command, Quantifier, Sprite};

pub type ObjectId = u16;

/// Absolute direction on the grid. Variant order is the rule expansion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    /// (row delta, column delta)
    pub fn delta(self) -> (isize, isize) {
        match self {
            Direction::Up => (-1, 0),
            Direction::Down => (1, 0),
            Direction::Left => (0, -1),
            Direction::Right => (0, 1),
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
        }
    }

    /// `^` relative to this direction.
    pub fn ccw(self) -> Direction {
        match self {
            Direction::Right => Direction::Up,
            Direction::Up => Direction::Left,
            Direction::Left => Direction::Down,
            Direction::Down => Direction::Right,
        }
    }

    /// `v` relative to this direction.
    pub fn cw(self) -> Direction {
        self.ccw().opposite()
    }
}

/// Pending movement of one object. Stored as a byte in game states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Motion {
    None = 0,
    Up = 1,
    Down = 2,
    Left = 3,
    Right = 4,
    Action = 5,
}

impl Motion {
    pub fn from_byte(b: u8) -> Motion {
        match b {
            1 => Motion::Up,
            2 => Motion::Down,
            3 => Motion::Left,
            4 => Motion::Right,
            5 => Motion::Action,
            _ => Motion::None,
        }
    }

    pub fn direction(self) -> Option<Direction> {
        match self {
            Motion::Up => Some(Direction::Up),
            Motion::Down => Some(Direction::Down),
            Motion::Left => Some(Direction::Left),
            Motion::Right => Some(Direction::Right),
            _ => None,
        }
    }
}

impl From<Direction> for Motion {
    fn from(d: Direction) -> Motion {
        match d {
            Direction::Up => Motion::Up,
            Direction::Down => Motion::Down,
            Direction::Left => Motion::Left,
            Direction::Right => Motion::Right,
        }
    }
}

/// Small bitset over object ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ObjectSet {
    bits: Vec<u64>,
}

impl ObjectSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(id: ObjectId) -> Self {
        let mut s = Self::new();
        s.insert(id);
        s
    }

    pub fn insert(&mut self, id: ObjectId) {
        let (w, b) = (id as usize / 64, id as usize % 64);
        if self.bits.len() <= w {
            self.bits.resize(w + 1, 0);
        }
        self.bits[w] |= 1 << b;
    }

    #[inline]
    pub fn contains(&self, id: ObjectId) -> bool {
        let (w, b) = (id as usize / 64, id as usize % 64);
        self.bits.get(w).is_some_and(|word| word & (1 << b) != 0)
    }

    pub fn extend(&mut self, other: &ObjectSet) {
        for id in other.iter() {
            self.insert(id);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|w| *w == 0)
    }

    pub fn len(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = ObjectId> + '_ {
        self.bits.iter().enumerate().flat_map(|(w, word)| {
            (0..64).filter(move |b| word & (1u64 << b) != 0).map(move |b| (w * 64 + b) as ObjectId)
        })
    }
}

impl FromIterator<ObjectId> for ObjectSet {
    fn from_iter<I: IntoIterator<Item = ObjectId>>(iter: I) -> Self {
        let mut s = ObjectSet::new();
        for id in iter {
            s.insert(id);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompiledObject {
    pub id: ObjectId,
    pub name: String,
    pub layer: usize,
    pub colors: Vec<String>,
    pub sprite: Sprite,
    /// Single-character glyph used when drawing and re-encoding levels.
    pub glyph: Option<char>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MotionReq {
    /// No qualifier: any motion, including none.
    Any,
    Stationary,
    Moving,
    Is(Motion),
}

impl MotionReq {
    #[inline]
    pub fn accepts(self, motion: u8) -> bool {
        match self {
            MotionReq::Any => true,
            MotionReq::Stationary => motion == Motion::None as u8,
            MotionReq::Moving => motion != Motion::None as u8,
            MotionReq::Is(m) => motion == m as u8,
        }
    }
}

/// One atom of a cell pattern after entity resolution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matcher {
    pub negated: bool,
    pub motion: MotionReq,
    pub objects: ObjectSet,
    /// Layers any member of `objects` can occupy, ascending.
    pub layers: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MotionOp {
    Keep,
    Clear,
    Set(Motion),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewriteStep {
    /// Remove the object bound by positive matcher `matcher`.
    Remove { matcher: usize },
    /// Change the motion of the object bound by `matcher`.
    SetMotion { matcher: usize, op: MotionOp },
    /// Remove every object of the set (`no X` on the right-hand side).
    RemoveAll { objects: ObjectSet, layers: Vec<usize> },
    /// Place an object, evicting whatever occupies its layer.
    Create { object: ObjectId, layer: usize, motion: Motion },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompiledCell {
    pub matchers: Vec<Matcher>,
    /// Steps in application order: removals, motion changes, creations.
    pub rewrite: Vec<RewriteStep>,
}

/// A bracket split at its ellipses; consecutive cells within a segment are
/// adjacent, segments are separated by a gap of any length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompiledBracket {
    pub segments: Vec<Vec<CompiledCell>>,
}

impl CompiledBracket {
    pub fn cell_count(&self) -> usize {
        self.segments.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompiledRule {
    pub source_index: usize,
    pub line: usize,
    pub direction: Direction,
    pub late: bool,
    pub random: bool,
    pub brackets: Vec<CompiledBracket>,
    /// False when the right-hand side is empty (commands only).
    pub rewrites: bool,
    pub commands: Vec<Command>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompiledWin {
    pub quantifier: Quantifier,
    pub subject: ObjectSet,
    pub target: Option<ObjectSet>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelGrid {
    pub width: usize,
    pub height: usize,
    /// `width * height * layer_count` slots, row-major by cell then layer.
    pub slots: Vec<Option<ObjectId>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompiledLevel {
    Grid(LevelGrid),
    Message(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GameFlags {
    pub title: Option<String>,
    pub author: Option<String>,
    pub run_rules_on_level_start: bool,
    pub norepeat_action: bool,
    pub noaction: bool,
}

/// A semantically checked, executable game.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompiledGame {
    pub objects: Vec<CompiledObject>,
    pub layer_count: usize,
    pub layers: Vec<Vec<ObjectId>>,
    pub player: ObjectSet,
    /// Object filled into every cell whose background layer is empty.
    pub background: ObjectId,
    pub background_set: ObjectSet,
    pub rules: Vec<CompiledRule>,
    pub win_conditions: Vec<CompiledWin>,
    pub levels: Vec<CompiledLevel>,
    pub flags: GameFlags,
    /// Level glyphs and the object sets they place, for re-encoding.
    pub glyphs: Vec<(char, Vec<ObjectId>)>,
}

impl CompiledGame {
    pub fn object(&self, id: ObjectId) -> &CompiledObject {
        &self.objects[id as usize]
    }

    pub fn has_random_rules(&self) -> bool {
        self.rules.iter().any(|r| r.random)
    }

    pub fn grid_level_indices(&self) -> Vec<usize> {
        self.levels
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, CompiledLevel::Grid(_)))
            .map(|(i, _)| i)
            .collect()
    }

    /// The glyph whose object set equals `objects`, ignoring background
    /// objects the glyph does not mention.
    pub fn glyph_for(&self, objects: &[ObjectId]) -> Option<char> {
        let mut cell: Vec<ObjectId> = objects.to_vec();
        cell.sort_unstable();
        let exact = self.glyphs.iter().find(|(_, set)| *set == cell);
        if let Some((g, _)) = exact {
            return Some(*g);
        }
        let without_bg: Vec<ObjectId> = cell
            .iter()
            .copied()
            .filter(|id| !self.background_set.contains(*id))
            .collect();
        self.glyphs
            .iter()
            .find(|(_, set)| {
                let set_without_bg: Vec<ObjectId> = set
                    .iter()
                    .copied()
                    .filter(|id| !self.background_set.contains(*id))
                    .collect();
                set_without_bg == without_bg
                    && set.iter().all(|id| cell.contains(id))
            })
            .map(|(g, _)| *g)
    }
}
