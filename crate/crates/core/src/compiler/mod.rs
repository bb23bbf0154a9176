//! Semantic analysis: turns a [`GameSpec`] into an executable
//! [`CompiledGame`] or a list of positioned diagnostics.

mod rules;
mod symbols;
mod types;

use serde::{Deserialize, Serialize};

use crate::diagnostic::{self, codes, Diagnostic, Phase};
use crate::grammar::{GameSpec, LevelEntry, Pos, Quantifier, RuleEntry};

pub use rules::{directions_for, expand_rule};
pub use symbols::{Entity, EntityKind, SymbolTable};
pub use types::*;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileResult {
    /// Present iff there are no errors; warnings never block compilation.
    pub game: Option<CompiledGame>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Keys that change play in other engines but have no effect here.
const IGNORED_PRELUDE: &[&str] = &[
    "again_interval",
    "key_repeat_interval",
    "noundo",
    "norestart",
    "flickscreen",
    "zoomscreen",
    "throttle_movement",
];

const UNSUPPORTED_PRELUDE: &[&str] = &["realtime_interval", "require_player_movement", "case_sensitive"];

pub fn compile(spec: &GameSpec) -> CompileResult {
    let mut diags = Vec::new();
    let game = compile_inner(spec, &mut diags);
    diagnostic::sort(&mut diags);
    let has_errors = diags.iter().any(Diagnostic::is_error);
    CompileResult {
        game: if has_errors { None } else { game },
        diagnostics: diags,
    }
}

fn first_pos(spec: &GameSpec) -> (usize, usize) {
    spec.objects
        .first()
        .map(|o| (o.pos.line, o.pos.column))
        .unwrap_or((1, 1))
}

fn compile_inner(spec: &GameSpec, diags: &mut Vec<Diagnostic>) -> Option<CompiledGame> {
    let mut flags = GameFlags {
        title: spec.prelude_value("title").map(str::to_string),
        author: spec.prelude_value("author").map(str::to_string),
        ..Default::default()
    };
    for p in &spec.prelude {
        match p.key.as_str() {
            "run_rules_on_level_start" => flags.run_rules_on_level_start = true,
            "norepeat_action" => flags.norepeat_action = true,
            "noaction" => flags.noaction = true,
            "title" | "author" => {}
            k if UNSUPPORTED_PRELUDE.contains(&k) => diags.push(Diagnostic::semantic(
                p.pos.line,
                p.pos.column,
                codes::UNSUPPORTED_FEATURE,
                format!("'{k}' is not supported"),
            )),
            k if IGNORED_PRELUDE.contains(&k) => {
                diags.push(Diagnostic::warning(
                    Phase::Semantic,
                    p.pos.line,
                    p.pos.column,
                    codes::IGNORED_PRELUDE_KEY,
                    format!("'{k}' has no effect here and is ignored"),
                ))
            }
            _ => {}
        }
    }

    let mut symbols = SymbolTable::build(spec, diags);
    let object_count = spec.objects.len();

    // Collision layers.
    let mut layers: Vec<Vec<ObjectId>> = Vec::new();
    for layer in &spec.collision_layers {
        let mut members = Vec::new();
        for name in &layer.members {
            match symbols.get(name) {
                None => diags.push(Diagnostic::semantic(
                    layer.pos.line,
                    layer.pos.column,
                    codes::UNDEFINED_OBJECT,
                    format!("collision layer refers to undefined '{name}'"),
                )),
                Some(entity) => {
                    for id in entity.objects.clone() {
                        if let Some(prev) = symbols.object_layers[id as usize] {
                            if prev != layers.len() {
                                diags.push(Diagnostic::semantic(
                                    layer.pos.line,
                                    layer.pos.column,
                                    codes::OBJECT_IN_MANY_LAYERS,
                                    format!("'{}' appears in more than one collision layer", spec.objects[id as usize].name),
                                ));
                            }
                            continue;
                        }
                        symbols.object_layers[id as usize] = Some(layers.len());
                        members.push(id);
                    }
                }
            }
        }
        layers.push(members);
    }

    // Background.
    let (bl, bc) = first_pos(spec);
    let background_entity = symbols.get("background").cloned();
    let background_ids: Vec<ObjectId> = match &background_entity {
        None => {
            diags.push(Diagnostic::semantic(
                bl,
                bc,
                codes::UNDEFINED_OBJECT,
                "an object called Background is required",
            ));
            Vec::new()
        }
        Some(e) if e.kind == EntityKind::Aggregate => {
            diags.push(Diagnostic::semantic(
                bl,
                bc,
                codes::UNSUPPORTED_FEATURE,
                "Background cannot be an 'and' combination",
            ));
            Vec::new()
        }
        Some(e) => e.objects.clone(),
    };
    let unlayered_bg: Vec<ObjectId> = background_ids
        .iter()
        .copied()
        .filter(|&id| symbols.object_layers[id as usize].is_none())
        .collect();
    if !unlayered_bg.is_empty() {
        for layer in symbols.object_layers.iter_mut().flatten() {
            *layer += 1;
        }
        for &id in &unlayered_bg {
            symbols.object_layers[id as usize] = Some(0);
            let obj = &spec.objects[id as usize];
            diags.push(Diagnostic::warning(
                Phase::Semantic,
                obj.pos.line,
                obj.pos.column,
                codes::BACKGROUND_NOT_IN_LAYER,
                format!("'{}' is in no collision layer; placed in a new bottom layer", obj.name),
            ));
        }
        layers.insert(0, unlayered_bg.clone());
    }
    for (id, obj) in spec.objects.iter().enumerate() {
        if symbols.object_layers[id].is_none() {
            diags.push(Diagnostic::semantic(
                obj.pos.line,
                obj.pos.column,
                codes::OBJECT_IN_NO_LAYER,
                format!("'{}' is not in any collision layer", obj.name),
            ));
        }
    }

    // Player.
    let player = match symbols.get("player") {
        None => {
            diags.push(Diagnostic::semantic(bl, bc, codes::NO_PLAYER_DEFINED, "no object called Player is defined"));
            ObjectSet::new()
        }
        Some(e) if e.kind == EntityKind::Aggregate => {
            diags.push(Diagnostic::semantic(
                bl,
                bc,
                codes::UNSUPPORTED_FEATURE,
                "Player cannot be an 'and' combination",
            ));
            ObjectSet::new()
        }
        Some(e) => e.set(),
    };

    let mut used = ObjectSet::new();
    used.extend(&player);
    background_ids.iter().for_each(|&id| used.insert(id));

    // Rules.
    let mut compiled_rules = Vec::new();
    for (index, entry) in spec.rules.iter().enumerate() {
        match entry {
            RuleEntry::LoopMarker { pos, .. } => diags.push(Diagnostic::semantic(
                pos.line,
                pos.column,
                codes::UNSUPPORTED_FEATURE,
                "startloop/endloop are not supported",
            )),
            RuleEntry::Rule(rule) => {
                for bracket in rule.lhs.iter().chain(&rule.rhs) {
                    for cell in bracket.cells() {
                        for atom in &cell.atoms {
                            if let Some(e) = symbols.get(&atom.entity) {
                                e.objects.iter().for_each(|&id| used.insert(id));
                            }
                        }
                    }
                }
                match expand_rule(rule, index, &symbols) {
                    Ok(variants) => compiled_rules.extend(variants),
                    Err(mut e) => diags.append(&mut e),
                }
            }
        }
    }

    // Win conditions.
    let mut win_conditions = Vec::new();
    for wc in &spec.win_conditions {
        if wc.quantifier == Quantifier::All && wc.on_target.is_none() {
            diags.push(Diagnostic::semantic(
                wc.pos.line,
                wc.pos.column,
                codes::UNSUPPORTED_FEATURE,
                "'all X' needs 'on Y'",
            ));
            continue;
        }
        let subject = win_entity(&symbols, &wc.subject, wc.pos, diags);
        let target = match &wc.on_target {
            None => Some(None),
            Some(name) => win_entity(&symbols, name, wc.pos, diags).map(Some),
        };
        let (Some(subject), Some(target)) = (subject, target) else {
            continue;
        };
        used.extend(&subject);
        if let Some(t) = &target {
            used.extend(t);
        }
        win_conditions.push(CompiledWin {
            quantifier: wc.quantifier,
            subject,
            target,
            line: wc.pos.line,
        });
    }
    if spec.win_conditions.is_empty() {
        let line = spec.levels.first().map(level_pos).map(|p| p.0).unwrap_or(bl);
        diags.push(Diagnostic::warning(
            Phase::Semantic,
            line,
            1,
            codes::NO_WIN_CONDITION,
            "the game has no win conditions, so no level can be won",
        ));
    }

    // Level glyphs: single-character names that place objects, in their
    // authored case.
    let mut glyphs: Vec<(char, Vec<ObjectId>)> = Vec::new();
    let authored = spec
        .objects
        .iter()
        .flat_map(|o| std::iter::once(o.name.as_str()).chain(o.glyph.as_deref()))
        .chain(spec.legend.iter().map(|l| l.glyph.as_str()));
    for name in authored {
        let mut chars = name.chars();
        let (Some(ch), None) = (chars.next(), chars.next()) else {
            continue;
        };
        let Some(entity) = symbols.get(name) else {
            continue;
        };
        if entity.kind == EntityKind::Property || glyphs.iter().any(|(g, _)| g.eq_ignore_ascii_case(&ch)) {
            continue;
        }
        let mut ids = entity.objects.clone();
        ids.sort_unstable();
        ids.dedup();
        glyphs.push((ch, ids));
    }
    let layer_count = layers.len();
    let background = background_ids.first().copied().unwrap_or(0);
    let background_layer = symbols
        .object_layers
        .get(background as usize)
        .copied()
        .flatten();

    let mut levels = Vec::new();
    for level in &spec.levels {
        match level {
            LevelEntry::Message { text, .. } => levels.push(CompiledLevel::Message(text.clone())),
            LevelEntry::Grid { rows, pos } => {
                let height = rows.len();
                let width = rows.iter().map(|r| r.chars().count()).max().unwrap_or(0);
                let mut slots = vec![None; width * height * layer_count];
                for (r, row) in rows.iter().enumerate() {
                    for (c, ch) in row.chars().enumerate() {
                        let line = pos.line + r;
                        let column = pos.column + c;
                        let key = ch.to_lowercase().to_string();
                        let Some(entity) = symbols.get(&key) else {
                            diags.push(Diagnostic::semantic(
                                line,
                                column,
                                codes::UNKNOWN_GLYPH_IN_LEVEL,
                                format!("'{ch}' is not defined in the legend"),
                            ));
                            continue;
                        };
                        if entity.kind == EntityKind::Property {
                            diags.push(Diagnostic::semantic(
                                line,
                                column,
                                codes::AMBIGUOUS_GLYPH_IN_LEVEL,
                                format!("'{ch}' could be several objects and cannot be placed in a level"),
                            ));
                            continue;
                        }
                        let cell = r * width + c;
                        for id in entity.objects.clone() {
                            used.insert(id);
                            let Some(layer) = symbols.object_layers[id as usize] else {
                                continue;
                            };
                            let slot = &mut slots[cell * layer_count + layer];
                            if slot.is_some() && *slot != Some(id) {
                                diags.push(Diagnostic::semantic(
                                    line,
                                    column,
                                    codes::OBJECT_LAYER_CONFLICT,
                                    format!("'{ch}' places two objects in the same collision layer"),
                                ));
                            }
                            *slot = Some(id);
                        }
                    }
                }
                if let Some(bg_layer) = background_layer {
                    for cell in 0..width * height {
                        let slot = &mut slots[cell * layer_count + bg_layer];
                        if slot.is_none() {
                            *slot = Some(background);
                        }
                    }
                }
                levels.push(CompiledLevel::Grid(LevelGrid { width, height, slots }));
            }
        }
    }
    if !levels.iter().any(|l| matches!(l, CompiledLevel::Grid(_))) {
        let (line, col) = spec.levels.first().map(level_pos).unwrap_or((bl, bc));
        diags.push(Diagnostic::warning(
            Phase::Semantic,
            line,
            col,
            codes::EMPTY_LEVELS,
            "the game has no playable levels",
        ));
    }

    for (id, obj) in spec.objects.iter().enumerate() {
        if !used.contains(id as ObjectId) {
            diags.push(Diagnostic::warning(
                Phase::Semantic,
                obj.pos.line,
                obj.pos.column,
                codes::UNUSED_OBJECT,
                format!("'{}' is never used", obj.name),
            ));
        }
    }

    if diags.iter().any(Diagnostic::is_error) || object_count == 0 {
        return None;
    }

    let objects = spec
        .objects
        .iter()
        .enumerate()
        .map(|(id, obj)| {
            let id = id as ObjectId;
            let glyph = obj
                .glyph
                .as_ref()
                .and_then(|g| g.chars().next())
                .or_else(|| glyphs.iter().find(|(_, ids)| ids == &[id]).map(|(g, _)| *g))
                .or_else(|| obj.name.chars().next());
            CompiledObject {
                id,
                name: obj.name.clone(),
                layer: symbols.object_layers[id as usize].unwrap_or(0),
                colors: obj.colors.clone(),
                sprite: obj.sprite.clone(),
                glyph,
            }
        })
        .collect();

    Some(CompiledGame {
        objects,
        layer_count,
        layers,
        player,
        background,
        background_set: background_ids.iter().copied().collect(),
        rules: compiled_rules,
        win_conditions,
        levels,
        flags,
        glyphs,
    })
}

fn win_entity(symbols: &SymbolTable, name: &str, pos: Pos, diags: &mut Vec<Diagnostic>) -> Option<ObjectSet> {
    match symbols.get(name) {
        None => {
            diags.push(Diagnostic::semantic(
                pos.line,
                pos.column,
                codes::UNDEFINED_OBJECT,
                format!("win condition refers to undefined '{name}'"),
            ));
            None
        }
        Some(e) if e.kind == EntityKind::Aggregate => {
            diags.push(Diagnostic::semantic(
                pos.line,
                pos.column,
                codes::UNSUPPORTED_FEATURE,
                format!("'{name}' combines objects with 'and' and cannot be used in win conditions"),
            ));
            None
        }
        Some(e) => Some(e.set()),
    }
}

fn level_pos(level: &LevelEntry) -> (usize, usize) {
    match level {
        LevelEntry::Grid { pos, .. } | LevelEntry::Message { pos, .. } => (pos.line, pos.column),
    }
}
