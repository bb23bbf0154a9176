use serde::{Deserialize, Serialize};

use crate::compiler::{Direction, Motion, ObjectId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    InProgress,
    Won,
}

/// One player input. Variant order is the solver's expansion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Act,
}

impl Action {
    pub const ALL: [Action; 5] = [Action::Up, Action::Down, Action::Left, Action::Right, Action::Act];

    pub fn motion(self) -> Motion {
        match self {
            Action::Up => Motion::Up,
            Action::Down => Motion::Down,
            Action::Left => Motion::Left,
            Action::Right => Motion::Right,
            Action::Act => Motion::Action,
        }
    }

    /// Single-letter code used in recorded move files.
    pub fn letter(self) -> char {
        match self {
            Action::Up => 'U',
            Action::Down => 'D',
            Action::Left => 'L',
            Action::Right => 'R',
            Action::Act => 'X',
        }
    }

    pub fn from_letter(c: char) -> Option<Action> {
        match c.to_ascii_uppercase() {
            'U' => Some(Action::Up),
            'D' => Some(Action::Down),
            'L' => Some(Action::Left),
            'R' => Some(Action::Right),
            'X' => Some(Action::Act),
            _ => None,
        }
    }
}

/// Renders actions as a compact letter string, e.g. `RRUL`.
pub fn actions_to_letters(actions: &[Action]) -> String {
    actions.iter().map(|a| a.letter()).collect()
}

/// Parses a letter string, ignoring whitespace. Returns the offending
/// character on failure.
pub fn actions_from_letters(text: &str) -> Result<Vec<Action>, char> {
    text.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| Action::from_letter(c).ok_or(c))
        .collect()
}

/// Snapshot of a level in play.
///
/// Slots are laid out cell-major: slot `cell * layer_count + layer`, with
/// cells numbered row by row. A slot value of 0 is empty, otherwise it is
/// the object id plus one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameState {
    pub width: usize,
    pub height: usize,
    pub layer_count: usize,
    pub cells: Vec<u16>,
    pub motions: Vec<u8>,
    pub level_index: usize,
    pub checkpoint: Option<Vec<u16>>,
    pub rng_seed: u64,
    pub status: Status,
}

impl GameState {
    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn slot(&self, cell: usize, layer: usize) -> usize {
        cell * self.layer_count + layer
    }

    #[inline]
    pub fn object_at(&self, cell: usize, layer: usize) -> Option<ObjectId> {
        match self.cells[self.slot(cell, layer)] {
            0 => None,
            v => Some(v - 1),
        }
    }

    pub fn objects_in(&self, cell: usize) -> impl Iterator<Item = ObjectId> + '_ {
        let base = cell * self.layer_count;
        self.cells[base..base + self.layer_count]
            .iter()
            .filter(|v| **v != 0)
            .map(|v| v - 1)
    }

    pub fn cell_index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    /// The adjacent cell in `dir`, or `None` at the edge of the grid.
    #[inline]
    pub fn neighbor(&self, cell: usize, dir: Direction) -> Option<usize> {
        let (row, col) = (cell / self.width, cell % self.width);
        match dir {
            Direction::Up if row > 0 => Some(cell - self.width),
            Direction::Down if row + 1 < self.height => Some(cell + self.width),
            Direction::Left if col > 0 => Some(cell - 1),
            Direction::Right if col + 1 < self.width => Some(cell + 1),
            _ => None,
        }
    }

    /// Number of cells holding `object`.
    pub fn count(&self, object: ObjectId) -> usize {
        self.cells.iter().filter(|v| **v == object + 1).count()
    }

    pub fn positions_of(&self, object: ObjectId) -> Vec<(usize, usize)> {
        (0..self.cell_count())
            .filter(|&c| self.objects_in(c).any(|o| o == object))
            .map(|c| (c / self.width, c % self.width))
            .collect()
    }
}
