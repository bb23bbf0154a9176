//! Rule matching and rewriting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::compiler::{
    CompiledBracket, CompiledCell, CompiledGame, CompiledRule, Direction, Matcher, Motion, MotionOp, MotionReq,
    RewriteStep,
};
use crate::diagnostic::{codes, Diagnostic};
use crate::grammar::Command;

use super::state::GameState;

/// Rule applications allowed per phase before the turn is abandoned.
pub const RULE_APPLICATION_CAP: usize = 10_000;

/// Commands raised by rules during one turn.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub(crate) struct Commands {
    pub cancel: bool,
    pub win: bool,
    pub again: bool,
    pub checkpoint: bool,
    pub restart: bool,
    pub messages: Vec<String>,
}

impl Commands {
    fn queue(&mut self, commands: &[Command]) {
        for c in commands {
            match c {
                Command::Cancel => self.cancel = true,
                Command::Win => self.win = true,
                Command::Again => self.again = true,
                Command::Checkpoint => self.checkpoint = true,
                Command::Restart => self.restart = true,
                Command::Message(text) => {
                    if !self.messages.contains(text) {
                        self.messages.push(text.clone());
                    }
                }
                Command::Sfx(_) => {}
            }
        }
    }
}

#[inline]
fn matcher_slot(state: &GameState, cell: usize, m: &Matcher) -> Option<usize> {
    m.layers.iter().map(|&l| state.slot(cell, l)).find(|&s| {
        let v = state.cells[s];
        v != 0 && m.objects.contains(v - 1) && m.motion.accepts(state.motions[s])
    })
}

#[inline]
fn cell_matches(state: &GameState, cell: usize, pattern: &CompiledCell) -> bool {
    pattern
        .matchers
        .iter()
        .all(|m| matcher_slot(state, cell, m).is_some() != m.negated)
}

fn segment_at(state: &GameState, start: usize, dir: Direction, segment: &[CompiledCell], out: &mut Vec<usize>) -> bool {
    let mark = out.len();
    let mut cell = start;
    for (k, pattern) in segment.iter().enumerate() {
        if k > 0 {
            match state.neighbor(cell, dir) {
                Some(next) => cell = next,
                None => {
                    out.truncate(mark);
                    return false;
                }
            }
        }
        if !cell_matches(state, cell, pattern) {
            out.truncate(mark);
            return false;
        }
        out.push(cell);
    }
    true
}

/// Matches `bracket` starting at `start`, pushing the matched cells (in
/// pattern order) onto `out`. Each ellipsis takes the shortest gap that lets
/// the following segment match.
fn bracket_at(state: &GameState, bracket: &CompiledBracket, dir: Direction, start: usize, out: &mut Vec<usize>) -> bool {
    let mark = out.len();
    let mut next_start = Some(start);
    for (k, segment) in bracket.segments.iter().enumerate() {
        let mut candidate = next_start;
        let found = loop {
            let Some(cell) = candidate else { break false };
            if segment_at(state, cell, dir, segment, out) {
                break true;
            }
            if k == 0 {
                break false;
            }
            candidate = state.neighbor(cell, dir);
        };
        if !found {
            out.truncate(mark);
            return false;
        }
        next_start = state.neighbor(*out.last().unwrap(), dir);
    }
    true
}

/// All matches of a bracket, as a flat list of cell indices with stride
/// `bracket.cell_count()`.
fn bracket_matches(state: &GameState, bracket: &CompiledBracket, dir: Direction) -> Vec<usize> {
    let first = &bracket.segments[0][0];
    let mut out = Vec::new();
    for start in 0..state.cell_count() {
        if cell_matches(state, start, first) {
            bracket_at(state, bracket, dir, start, &mut out);
        }
    }
    out
}

fn write_slot(state: &mut GameState, slot: usize, value: u16, motion: u8) -> bool {
    if state.cells[slot] == value && state.motions[slot] == motion {
        return false;
    }
    state.cells[slot] = value;
    state.motions[slot] = motion;
    true
}

fn rewrite_cell(state: &mut GameState, cell: usize, pattern: &CompiledCell) -> bool {
    let bindings: Vec<Option<usize>> = pattern
        .matchers
        .iter()
        .map(|m| if m.negated { None } else { matcher_slot(state, cell, m) })
        .collect();
    let mut changed = false;
    for step in &pattern.rewrite {
        match step {
            RewriteStep::Remove { matcher } => {
                if let Some(slot) = bindings[*matcher] {
                    changed |= write_slot(state, slot, 0, 0);
                }
            }
            RewriteStep::SetMotion { matcher, op } => {
                if let Some(slot) = bindings[*matcher] {
                    if state.cells[slot] != 0 {
                        let motion = match op {
                            MotionOp::Keep => state.motions[slot],
                            MotionOp::Clear => Motion::None as u8,
                            MotionOp::Set(m) => *m as u8,
                        };
                        changed |= write_slot(state, slot, state.cells[slot], motion);
                    }
                }
            }
            RewriteStep::RemoveAll { objects, layers } => {
                for &layer in layers {
                    let slot = state.slot(cell, layer);
                    let v = state.cells[slot];
                    if v != 0 && objects.contains(v - 1) {
                        changed |= write_slot(state, slot, 0, 0);
                    }
                }
            }
            RewriteStep::Create { object, layer, motion } => {
                let slot = state.slot(cell, *layer);
                let value = object + 1;
                // Re-creating an object that is already there keeps its motion.
                if state.cells[slot] == value && *motion == Motion::None {
                    continue;
                }
                changed |= write_slot(state, slot, value, *motion as u8);
            }
        }
    }
    changed
}

fn rewrite_match(state: &mut GameState, rule: &CompiledRule, combination: &[&[usize]]) -> bool {
    let mut changed = false;
    for (bracket, cells) in rule.brackets.iter().zip(combination) {
        let patterns = bracket.segments.iter().flatten();
        for (pattern, &cell) in patterns.zip(cells.iter()) {
            changed |= rewrite_cell(state, cell, pattern);
        }
    }
    changed
}

/// Every combination of bracket matches, first bracket varying slowest.
fn combinations<'a>(rule: &CompiledRule, matches: &'a [Vec<usize>]) -> Vec<Vec<&'a [usize]>> {
    let chunked: Vec<Vec<&[usize]>> = rule
        .brackets
        .iter()
        .zip(matches)
        .map(|(b, m)| m.chunks(b.cell_count()).collect())
        .collect();
    let mut out: Vec<Vec<&[usize]>> = vec![Vec::new()];
    for options in &chunked {
        let mut next = Vec::with_capacity(out.len() * options.len());
        for prefix in &out {
            for option in options {
                let mut combo = prefix.clone();
                combo.push(*option);
                next.push(combo);
            }
        }
        out = next;
    }
    out
}

/// Returns per-bracket matches, or `None` if some bracket has none.
fn rule_matches(state: &GameState, rule: &CompiledRule) -> Option<Vec<Vec<usize>>> {
    let mut all = Vec::with_capacity(rule.brackets.len());
    for bracket in &rule.brackets {
        let m = bracket_matches(state, bracket, rule.direction);
        if m.is_empty() {
            return None;
        }
        all.push(m);
    }
    Some(all)
}

/// Applies the first match of `rule` that changes the state. Commands are
/// queued whenever the rule matches at all.
fn apply_rule(state: &mut GameState, rule: &CompiledRule, moving: &[usize], commands: &mut Commands) -> bool {
    if rule.brackets.len() == 1 {
        return apply_single(state, rule, moving, commands);
    }
    let Some(matches) = rule_matches(state, rule) else {
        return false;
    };
    commands.queue(&rule.commands);
    if !rule.rewrites {
        return false;
    }
    combinations(rule, &matches)
        .iter()
        .any(|combo| rewrite_match(state, rule, combo))
}

/// Cells that can start a match of `first`, in row-major order. When the
/// pattern needs a particular motion only cells carrying it are visited.
/// `moving` lists the slots with a motion, ascending.
fn candidate_starts(state: &GameState, first: &CompiledCell, moving: &[usize]) -> Vec<usize> {
    let needed = first.matchers.iter().find_map(|m| match m.motion {
        MotionReq::Is(motion) if !m.negated => Some(motion as u8),
        _ => None,
    });
    match needed {
        None => (0..state.cell_count()).collect(),
        Some(motion) => {
            let mut starts: Vec<usize> = Vec::new();
            for &slot in moving {
                if state.motions[slot] == motion {
                    let cell = slot / state.layer_count;
                    if starts.last() != Some(&cell) {
                        starts.push(cell);
                    }
                }
            }
            starts
        }
    }
}

fn moving_slots(state: &GameState, out: &mut Vec<usize>) {
    out.clear();
    out.extend(state.motions.iter().enumerate().filter(|(_, &m)| m != 0).map(|(slot, _)| slot));
}

/// Single-bracket rules are rewritten during the scan; a rewrite that
/// changes nothing leaves later matches valid.
fn apply_single(state: &mut GameState, rule: &CompiledRule, moving: &[usize], commands: &mut Commands) -> bool {
    let bracket = &rule.brackets[0];
    let first = &bracket.segments[0][0];
    let mut cells = Vec::new();
    let mut queued = false;
    for start in candidate_starts(state, first, moving) {
        if !cell_matches(state, start, first) {
            continue;
        }
        cells.clear();
        if !bracket_at(state, bracket, rule.direction, start, &mut cells) {
            continue;
        }
        if !queued {
            commands.queue(&rule.commands);
            queued = true;
        }
        if !rule.rewrites {
            return false;
        }
        if rewrite_match(state, rule, &[&cells]) {
            return true;
        }
    }
    false
}

/// Picks one state-changing match uniformly among all direction variants of
/// a random rule.
fn apply_random_group(state: &mut GameState, group: &[&CompiledRule], commands: &mut Commands) -> bool {
    let mut candidates: Vec<GameState> = Vec::new();
    for rule in group {
        let Some(matches) = rule_matches(state, rule) else {
            continue;
        };
        commands.queue(&rule.commands);
        if !rule.rewrites {
            continue;
        }
        for combo in combinations(rule, &matches) {
            let mut trial = state.clone();
            if rewrite_match(&mut trial, rule, &combo) {
                candidates.push(trial);
            }
        }
    }
    if candidates.is_empty() {
        return false;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(state.rng_seed);
    let pick = rng.gen_range(0..candidates.len());
    let next_seed: u64 = rng.gen();
    *state = candidates.swap_remove(pick);
    state.rng_seed = next_seed;
    true
}

/// Runs the early (`late == false`) or late rules to a fixpoint, restarting
/// from the first rule after every state-changing application.
pub(crate) fn run_rules(
    game: &CompiledGame,
    state: &mut GameState,
    late: bool,
    commands: &mut Commands,
) -> Result<(), Diagnostic> {
    let rules: Vec<&CompiledRule> = game.rules.iter().filter(|r| r.late == late).collect();
    if rules.is_empty() {
        return Ok(());
    }
    let mut applications = 0usize;
    let mut moving = Vec::new();
    'restart: loop {
        moving_slots(state, &mut moving);
        let mut i = 0;
        while i < rules.len() {
            let rule = rules[i];
            let (applied, next) = if rule.random {
                let end = rules[i..]
                    .iter()
                    .position(|r| r.source_index != rule.source_index)
                    .map_or(rules.len(), |p| i + p);
                (apply_random_group(state, &rules[i..end], commands), end)
            } else {
                (apply_rule(state, rule, &moving, commands), i + 1)
            };
            if applied {
                applications += 1;
                if applications > RULE_APPLICATION_CAP {
                    return Err(Diagnostic::runtime(
                        codes::RULE_LOOP_DETECTED,
                        format!(
                            "rules applied more than {RULE_APPLICATION_CAP} times in one phase (last was the rule on line {})",
                            rule.line
                        ),
                    ));
                }
                continue 'restart;
            }
            i = next;
        }
        return Ok(());
    }
}
