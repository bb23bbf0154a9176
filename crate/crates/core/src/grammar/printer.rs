//! Canonical source printer. Sections come out in canonical order, keywords
//! lowercased, identifiers as written.

use std::fmt::Write;

use crate::source::SourceText;

use super::ast::*;

pub fn print_game(spec: &GameSpec) -> SourceText {
    SourceText::new(print_to_string(spec), "printed")
}

fn header(out: &mut String, section: Section) {
    let bar = "=".repeat(section.header().len().max(8));
    let _ = writeln!(out, "{bar}\n{}\n{bar}\n", section.header());
}

pub fn print_to_string(spec: &GameSpec) -> String {
    let mut out = String::new();
    for p in &spec.prelude {
        if p.value.is_empty() {
            let _ = writeln!(out, "{}", p.key);
        } else {
            let _ = writeln!(out, "{} {}", p.key, p.value);
        }
    }
    if !spec.prelude.is_empty() {
        out.push('\n');
    }

    header(&mut out, Section::Objects);
    for obj in &spec.objects {
        match &obj.glyph {
            Some(g) => {
                let _ = writeln!(out, "{} {g}", obj.name);
            }
            None => {
                let _ = writeln!(out, "{}", obj.name);
            }
        }
        let _ = writeln!(out, "{}", obj.colors.join(" "));
        if let Sprite::Pixels(rows) = &obj.sprite {
            for row in rows {
                let line: String = row
                    .iter()
                    .map(|c| match c {
                        Some(d) => char::from(b'0' + d),
                        None => '.',
                    })
                    .collect();
                let _ = writeln!(out, "{line}");
            }
        }
        out.push('\n');
    }

    header(&mut out, Section::Legend);
    for entry in &spec.legend {
        let joiner = match entry.kind {
            LegendKind::Alias | LegendKind::Aggregate => " and ",
            LegendKind::Property => " or ",
        };
        let _ = writeln!(out, "{} = {}", entry.glyph, entry.members.join(joiner));
    }
    out.push('\n');

    header(&mut out, Section::Sounds);
    for line in &spec.sounds {
        let _ = writeln!(out, "{line}");
    }
    out.push('\n');

    header(&mut out, Section::CollisionLayers);
    for layer in &spec.collision_layers {
        let _ = writeln!(out, "{}", layer.members.join(", "));
    }
    out.push('\n');

    header(&mut out, Section::Rules);
    for entry in &spec.rules {
        match entry {
            RuleEntry::Rule(rule) => {
                let _ = writeln!(out, "{}", print_rule(rule));
            }
            RuleEntry::LoopMarker { start, .. } => {
                let _ = writeln!(out, "{}", if *start { "startloop" } else { "endloop" });
            }
        }
    }
    out.push('\n');

    header(&mut out, Section::WinConditions);
    for wc in &spec.win_conditions {
        let q = match wc.quantifier {
            Quantifier::All => "all",
            Quantifier::Some => "some",
            Quantifier::No => "no",
        };
        match &wc.on_target {
            Some(t) => {
                let _ = writeln!(out, "{q} {} on {t}", wc.subject);
            }
            None => {
                let _ = writeln!(out, "{q} {}", wc.subject);
            }
        }
    }
    out.push('\n');

    header(&mut out, Section::Levels);
    for level in &spec.levels {
        match level {
            LevelEntry::Grid { rows, .. } => {
                for row in rows {
                    let _ = writeln!(out, "{row}");
                }
            }
            LevelEntry::Message { text, .. } => {
                let _ = writeln!(out, "message {text}");
            }
        }
        out.push('\n');
    }
    out
}

pub fn print_rule(rule: &RuleDef) -> String {
    let mut parts: Vec<String> = Vec::new();
    if rule.grouped {
        parts.push("+".into());
    }
    if rule.late {
        parts.push("late".into());
    }
    if rule.random {
        parts.push("random".into());
    }
    if rule.rigid {
        parts.push("rigid".into());
    }
    if let Some(d) = rule.direction.keyword() {
        parts.push(d.into());
    }
    let brackets = |side: &[BracketPattern]| -> String {
        side.iter().map(print_bracket).collect::<Vec<_>>().join(" ")
    };
    parts.push(brackets(&rule.lhs));
    parts.push("->".into());
    if !rule.rhs.is_empty() {
        parts.push(brackets(&rule.rhs));
    }
    for c in &rule.commands {
        parts.push(c.to_string());
    }
    parts.join(" ")
}

fn print_bracket(b: &BracketPattern) -> String {
    let items: Vec<String> = b
        .items
        .iter()
        .map(|item| match item {
            BracketItem::Ellipsis => "...".to_string(),
            BracketItem::Cell(cell) => cell
                .atoms
                .iter()
                .map(|a| {
                    let mut s = String::new();
                    if a.negated {
                        s.push_str("no ");
                    }
                    if let Some(m) = a.motion.keyword() {
                        s.push_str(m);
                        s.push(' ');
                    }
                    s.push_str(&a.entity);
                    s
                })
                .collect::<Vec<_>>()
                .join(" "),
        })
        .map(|s| if s.is_empty() { " ".to_string() } else { format!(" {s} ") })
        .collect();
    format!("[{}]", items.join("|"))
}
