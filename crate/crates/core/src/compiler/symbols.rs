//! Name resolution for objects and legend entries.

use std::collections::HashMap;

use crate::diagnostic::{codes, Diagnostic};
use crate::grammar::{GameSpec, LegendKind, Pos};

use super::types::{ObjectId, ObjectSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntityKind {
    Object,
    Property,
    Aggregate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub kind: EntityKind,
    /// Member objects in definition order, without duplicates.
    pub objects: Vec<ObjectId>,
}

impl Entity {
    pub fn set(&self) -> ObjectSet {
        self.objects.iter().copied().collect()
    }
}

/// Resolved legend: every object name, legend key and object glyph, keyed
/// case-insensitively.
#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    entities: HashMap<String, Entity>,
    pub object_layers: Vec<Option<usize>>,
}

impl SymbolTable {
    pub fn get(&self, name: &str) -> Option<&Entity> {
        self.entities.get(&name.to_lowercase())
    }

    pub fn names(&self) -> impl Iterator<Item = (&String, &Entity)> {
        self.entities.iter()
    }

    /// Layers occupied by any of `objects`, ascending.
    pub fn layers_of(&self, objects: &[ObjectId]) -> Vec<usize> {
        let mut layers: Vec<usize> = objects
            .iter()
            .filter_map(|&id| self.object_layers.get(id as usize).copied().flatten())
            .collect();
        layers.sort_unstable();
        layers.dedup();
        layers
    }

    pub(crate) fn build(spec: &GameSpec, diagnostics: &mut Vec<Diagnostic>) -> SymbolTable {
        let mut table = SymbolTable::default();
        let dup = |pos: Pos, name: &str| {
            Diagnostic::semantic(
                pos.line,
                pos.column,
                codes::DUPLICATE_DEFINITION,
                format!("'{name}' is defined more than once"),
            )
        };

        for (i, obj) in spec.objects.iter().enumerate() {
            let key = obj.name.to_lowercase();
            if table.entities.contains_key(&key) {
                diagnostics.push(dup(obj.pos, &obj.name));
                continue;
            }
            table.entities.insert(
                key,
                Entity {
                    kind: EntityKind::Object,
                    objects: vec![i as ObjectId],
                },
            );
        }
        for (i, obj) in spec.objects.iter().enumerate() {
            if let Some(glyph) = &obj.glyph {
                let key = glyph.to_lowercase();
                if table.entities.contains_key(&key) {
                    diagnostics.push(dup(obj.pos, glyph));
                    continue;
                }
                table.entities.insert(
                    key,
                    Entity {
                        kind: EntityKind::Object,
                        objects: vec![i as ObjectId],
                    },
                );
            }
        }

        // Legend entries may reference entries defined later, so resolve
        // to a fixpoint.
        let mut pending: Vec<usize> = Vec::new();
        for (i, entry) in spec.legend.iter().enumerate() {
            let key = entry.glyph.to_lowercase();
            if table.entities.contains_key(&key)
                || spec.legend[..i]
                    .iter()
                    .any(|e| e.glyph.eq_ignore_ascii_case(&entry.glyph))
            {
                diagnostics.push(dup(entry.pos, &entry.glyph));
                continue;
            }
            pending.push(i);
        }
        loop {
            let mut progressed = false;
            pending.retain(|&i| {
                let entry = &spec.legend[i];
                let members: Option<Vec<&Entity>> =
                    entry.members.iter().map(|m| table.get(m)).collect();
                let Some(members) = members else {
                    return true;
                };
                let mut objects: Vec<ObjectId> = Vec::new();
                let mut push = |ids: &[ObjectId]| {
                    for id in ids {
                        if !objects.contains(id) {
                            objects.push(*id);
                        }
                    }
                };
                let kind = match entry.kind {
                    LegendKind::Alias => {
                        push(&members[0].objects);
                        members[0].kind
                    }
                    LegendKind::Property => {
                        if members.iter().any(|m| m.kind == EntityKind::Aggregate) {
                            diagnostics.push(Diagnostic::semantic(
                                entry.pos.line,
                                entry.pos.column,
                                codes::UNSUPPORTED_FEATURE,
                                format!("property '{}' cannot contain an 'and' combination", entry.glyph),
                            ));
                        }
                        for m in &members {
                            push(&m.objects);
                        }
                        EntityKind::Property
                    }
                    LegendKind::Aggregate => {
                        if members.iter().any(|m| m.kind == EntityKind::Property) {
                            diagnostics.push(Diagnostic::semantic(
                                entry.pos.line,
                                entry.pos.column,
                                codes::UNSUPPORTED_FEATURE,
                                format!("'{}' combines an 'or' property with 'and'", entry.glyph),
                            ));
                        }
                        for m in &members {
                            push(&m.objects);
                        }
                        EntityKind::Aggregate
                    }
                };
                table
                    .entities
                    .insert(entry.glyph.to_lowercase(), Entity { kind, objects });
                progressed = true;
                false
            });
            if !progressed {
                break;
            }
        }
        for &i in &pending {
            let entry = &spec.legend[i];
            for m in &entry.members {
                let defined = table.get(m).is_some()
                    || pending.iter().any(|&j| spec.legend[j].glyph.eq_ignore_ascii_case(m));
                if !defined {
                    diagnostics.push(Diagnostic::semantic(
                        entry.pos.line,
                        entry.pos.column,
                        codes::UNDEFINED_OBJECT,
                        format!("legend entry '{}' refers to undefined '{m}'", entry.glyph),
                    ));
                }
            }
            if entry.members.iter().all(|m| {
                table.get(m).is_some()
                    || pending.iter().any(|&j| spec.legend[j].glyph.eq_ignore_ascii_case(m))
            }) {
                diagnostics.push(Diagnostic::semantic(
                    entry.pos.line,
                    entry.pos.column,
                    codes::UNDEFINED_OBJECT,
                    format!("legend entry '{}' is defined in terms of itself", entry.glyph),
                ));
            }
        }
        table.object_layers = vec![None; spec.objects.len()];
        table
    }
}
