//! Bounded, deterministic source repairs.
//!
//! The catalog is closed: fenced-block extraction, missing `========`
//! delimiters, missing section headers that are implied by position,
//! trailing prose after the levels, and ragged level rows. A repair is kept
//! only when it strictly lowers the syntax-error count, and repairs are
//! applied until none helps, so repairing twice is the same as once.

use serde::{Deserialize, Serialize};

use crate::diagnostic::Diagnostic;
use crate::source::SourceText;

use super::ast::{LegendKind, Section};
use super::lexer::strip_comments;
use super::parser::{parse_detailed, syntax_error_count, Detailed};

const DELIMITER: &str = "========";
const MAX_ROUNDS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairOutcome {
    pub repaired: SourceText,
    /// Empty iff `repaired` equals the input.
    pub repairs: Vec<String>,
}

type Candidate = (String, Vec<String>);

pub fn repair_source(source: &SourceText, diagnostics: &[Diagnostic]) -> RepairOutcome {
    let unchanged = || RepairOutcome {
        repaired: source.clone(),
        repairs: Vec::new(),
    };
    if syntax_error_count(diagnostics) == 0 {
        return unchanged();
    }

    let mut current = source.content().to_string();
    let mut detailed = parse_detailed(&current);
    let mut errors = syntax_error_count(&detailed.diagnostics);
    let mut repairs = Vec::new();

    let catalog: [fn(&str, &Detailed) -> Option<Candidate>; 5] = [
        extract_fence,
        insert_delimiters,
        insert_headers,
        strip_trailing_prose,
        pad_ragged_levels,
    ];

    'rounds: for _ in 0..MAX_ROUNDS {
        if errors == 0 {
            break;
        }
        for item in catalog {
            let Some((candidate, notes)) = item(&current, &detailed) else {
                continue;
            };
            if candidate == current {
                continue;
            }
            let next = parse_detailed(&candidate);
            let next_errors = syntax_error_count(&next.diagnostics);
            if next_errors < errors {
                current = candidate;
                detailed = next;
                errors = next_errors;
                repairs.extend(notes);
                continue 'rounds;
            }
        }
        break;
    }

    if repairs.is_empty() {
        return unchanged();
    }
    RepairOutcome {
        repaired: SourceText::new(current, source.origin.clone()),
        repairs,
    }
}

fn split_lines(text: &str) -> Vec<String> {
    text.split('\n').map(str::to_string).collect()
}

fn join_lines(lines: &[String]) -> String {
    lines.join("\n")
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

/// (1) Keep only the contents of the single fenced block.
fn extract_fence(text: &str, _: &Detailed) -> Option<Candidate> {
    let lines = split_lines(text);
    let fences: Vec<usize> = (0..lines.len()).filter(|&i| is_fence(&lines[i])).collect();
    if fences.len() != 2 {
        return None;
    }
    let mut body = lines[fences[0] + 1..fences[1]].join("\n");
    body.push('\n');
    Some((body, vec!["extracted the contents of the fenced code block".to_string()]))
}

/// (2) Surround section headers with `========` lines where missing.
fn insert_delimiters(text: &str, detailed: &Detailed) -> Option<Candidate> {
    let lines = split_lines(text);
    let broken: Vec<_> = detailed
        .layout
        .headers
        .iter()
        .filter(|h| !h.delimiter_before || !h.delimiter_after)
        .collect();
    if broken.is_empty() {
        return None;
    }
    let mut out = Vec::with_capacity(lines.len() + broken.len() * 2);
    let mut notes = Vec::new();
    let mut k = 0;
    for (i, line) in lines.iter().enumerate() {
        match broken.get(k) {
            Some(h) if h.line == i => {
                if !h.delimiter_before {
                    out.push(DELIMITER.to_string());
                }
                out.push(line.clone());
                if !h.delimiter_after {
                    out.push(DELIMITER.to_string());
                }
                notes.push(format!(
                    "inserted '{DELIMITER}' delimiters around the {} header (line {})",
                    h.section.header(),
                    i + 1
                ));
                k += 1;
            }
            _ => out.push(line.clone()),
        }
    }
    Some((join_lines(&out), notes))
}

/// (3) Insert a header into a headerless delimiter block when exactly one
/// absent section fits between its neighbours.
fn insert_headers(text: &str, detailed: &Detailed) -> Option<Candidate> {
    let lines = split_lines(text);
    let present: Vec<Section> = detailed.layout.headers.iter().map(|h| h.section).collect();
    let mut inserts: Vec<(usize, Section, bool)> = Vec::new();
    for block in &detailed.layout.stray_blocks {
        let lo = block.prev.map(|s| s.index() + 1).unwrap_or(0);
        let hi = block.next.map(|s| s.index()).unwrap_or(Section::ALL.len());
        if lo >= hi {
            continue;
        }
        let candidates: Vec<Section> = Section::ALL[lo..hi]
            .iter()
            .copied()
            .filter(|s| !present.contains(s) && !inserts.iter().any(|(_, t, _)| t == s))
            .collect();
        if let [section] = candidates[..] {
            // Between the first two delimiters, or after a lone one.
            let two = block.delimiters.len() >= 2;
            inserts.push((block.delimiters[0], section, two));
        }
    }
    if inserts.is_empty() {
        return None;
    }
    let mut out = Vec::with_capacity(lines.len() + inserts.len() * 2);
    let mut notes = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        out.push(line.clone());
        if let Some((_, section, two)) = inserts.iter().find(|(at, _, _)| *at == i) {
            out.push(section.header().to_string());
            if !two {
                out.push(DELIMITER.to_string());
            }
            notes.push(format!(
                "inserted the missing {} header after line {}",
                section.header(),
                i + 1
            ));
        }
    }
    Some((join_lines(&out), notes))
}

fn is_row(line: &str) -> bool {
    let t = line.trim();
    !t.is_empty() && !t.contains(char::is_whitespace)
}

/// (4) Drop everything from the first prose line after the levels, unless a
/// level-shaped block follows it.
fn strip_trailing_prose(text: &str, detailed: &Detailed) -> Option<Candidate> {
    let start = detailed.layout.trailing_prose?;
    let lines = split_lines(text);
    let mut diags = Vec::new();
    let stripped = split_lines(&strip_comments(text, &mut diags));
    let mut run: Vec<usize> = Vec::new();
    for line in stripped.iter().skip(start + 1).chain(std::iter::once(&String::new())) {
        if is_row(line) {
            run.push(line.trim().chars().count());
            continue;
        }
        if run.len() >= 2 && run.iter().all(|&w| w == run[0]) {
            return None;
        }
        run.clear();
    }
    let mut out = lines[..start].to_vec();
    while out.last().is_some_and(|l| l.trim().is_empty()) {
        out.pop();
    }
    out.push(String::new());
    Some((
        join_lines(&out),
        vec![format!("removed trailing prose after the levels (from line {})", start + 1)],
    ))
}

/// (5) Pad short level rows with the level's most common background glyph.
fn pad_ragged_levels(text: &str, detailed: &Detailed) -> Option<Candidate> {
    if detailed.layout.ragged_grids.is_empty() {
        return None;
    }
    let mut background_glyphs: Vec<String> = detailed
        .spec
        .legend
        .iter()
        .filter(|e| {
            e.kind == LegendKind::Alias
                && e.glyph.chars().count() == 1
                && e.members[0].eq_ignore_ascii_case("background")
        })
        .map(|e| e.glyph.to_lowercase())
        .collect();
    for obj in &detailed.spec.objects {
        if obj.name.eq_ignore_ascii_case("background") {
            if let Some(g) = &obj.glyph {
                background_glyphs.push(g.to_lowercase());
            }
        }
    }
    if background_glyphs.is_empty() {
        return None;
    }

    let mut lines = split_lines(text);
    let mut diags = Vec::new();
    let stripped = split_lines(&strip_comments(text, &mut diags));
    let mut notes = Vec::new();
    for grid in &detailed.layout.ragged_grids {
        let rows: Vec<&str> = grid.iter().map(|&i| stripped[i].trim()).collect();
        let width = rows.iter().map(|r| r.chars().count()).max().unwrap_or(0);
        let glyph = background_glyphs
            .iter()
            .max_by_key(|g| {
                let count: usize = rows
                    .iter()
                    .map(|r| r.to_lowercase().matches(g.as_str()).count())
                    .sum();
                // Ties go to the earliest legend entry.
                (count, std::cmp::Reverse(background_glyphs.iter().position(|x| x == *g)))
            })
            .expect("nonempty");
        let glyph_char = rows
            .iter()
            .flat_map(|r| r.chars())
            .find(|c| c.to_lowercase().to_string() == *glyph)
            .unwrap_or_else(|| glyph.chars().next().unwrap());
        for &i in grid {
            let row = stripped[i].trim_end();
            let have = row.trim_start().chars().count();
            if have >= width {
                continue;
            }
            let end_char = row.chars().count();
            let byte_end = lines[i]
                .char_indices()
                .nth(end_char)
                .map(|(b, _)| b)
                .unwrap_or(lines[i].len());
            let pad: String = std::iter::repeat(glyph_char).take(width - have).collect();
            lines[i].insert_str(byte_end, &pad);
        }
        notes.push(format!(
            "padded ragged rows of the level at line {} with '{glyph_char}'",
            grid[0] + 1
        ));
    }
    Some((join_lines(&lines), notes))
}
