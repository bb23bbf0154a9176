//! Recursive-descent parser for PuzzleScript.
//!
//! Grammar (line oriented; `( ... )` comments are removed first, `NL` is a
//! line break, keywords are case-insensitive):
//!
//! ```text
//! program     := prelude section*
//! prelude     := (KEY VALUE? NL | NL)*
//! section     := DELIM+ HEADER NL DELIM+ body
//! DELIM       := '='+ NL
//! HEADER      := OBJECTS | LEGEND | SOUNDS | COLLISIONLAYERS | RULES
//!              | WINCONDITIONS | LEVELS
//! objects     := (NAME GLYPH? NL COLOR+ NL sprite? blank*)*
//! sprite      := SPRITE_ROW{5}            (5 chars from ".0123456789")
//! legend      := (GLYPH '=' NAME ((and NAME)+ | (or NAME)+)? NL)*
//! sounds      := (ANY NL)*
//! layers      := (NAME (','? NAME)* NL)*
//! rules       := (rule NL | startloop NL | endloop NL)*
//! rule        := '+'? prefix* bracket+ '->' bracket* command*
//! prefix      := late | random | rigid | up | down | left | right
//!              | horizontal | vertical | orthogonal
//! bracket     := '[' item ('|' item)* ']'
//! item        := '...' | atom*
//! atom        := no? motion? NAME
//! motion      := '>' | '<' | '^' | v | up | down | left | right | moving
//!              | stationary | action | randomdir | random | horizontal
//!              | vertical | perpendicular | parallel | orthogonal
//! command     := cancel | win | again | checkpoint | restart
//!              | message TEXT | sfx[0-9]+
//! winconds    := ((all | some | any | no) NAME (on NAME)? NL)*
//! levels      := (ROW NL | message TEXT NL | NL)*
//! ```
//!
//! Parsing is total: malformed input never aborts, it accumulates
//! diagnostics and keeps going.

use crate::diagnostic::{self, codes, Diagnostic, Phase, Severity};
use crate::source::SourceText;

use super::ast::*;
use super::lexer::{strip_comments, tokenize_rule, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseResult {
    /// Present iff there are no syntax errors.
    pub spec: Option<GameSpec>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseResult {
    pub fn syntax_errors(&self) -> usize {
        syntax_error_count(&self.diagnostics)
    }
}

pub fn syntax_error_count(diagnostics: &[Diagnostic]) -> usize {
    diagnostics
        .iter()
        .filter(|d| d.severity == Severity::Error && d.phase == Phase::Syntax)
        .count()
}

pub fn parse_game(source: &SourceText) -> ParseResult {
    let parsed = parse_detailed(source.content());
    let spec = (syntax_error_count(&parsed.diagnostics) == 0).then_some(parsed.spec);
    ParseResult {
        spec,
        diagnostics: parsed.diagnostics,
    }
}

/// Full parser output, including the layout facts the repair pass needs.
#[derive(Debug, Clone)]
pub(crate) struct Detailed {
    pub spec: GameSpec,
    pub diagnostics: Vec<Diagnostic>,
    pub layout: Layout,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Layout {
    pub headers: Vec<HeaderInfo>,
    pub stray_blocks: Vec<StrayBlock>,
    /// Line index (0-based) of the first malformed row of a trailing LEVELS
    /// section.
    pub trailing_prose: Option<usize>,
    pub ragged_grids: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub(crate) struct HeaderInfo {
    pub section: Section,
    pub line: usize,
    pub delimiter_before: bool,
    pub delimiter_after: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct StrayBlock {
    /// 0-based indices of the delimiter lines in the block.
    pub delimiters: Vec<usize>,
    pub prev: Option<Section>,
    pub next: Option<Section>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LineClass {
    Blank,
    Delimiter,
    Header(Section),
    Other,
}

fn classify(line: &str) -> LineClass {
    let t = line.trim();
    if t.is_empty() {
        LineClass::Blank
    } else if t.len() >= 2 && t.chars().all(|c| c == '=') {
        LineClass::Delimiter
    } else if let Some(section) = Section::from_header(t) {
        LineClass::Header(section)
    } else {
        LineClass::Other
    }
}

/// Column (1-based, in chars) of the first non-whitespace character.
fn indent_col(line: &str) -> usize {
    line.chars().take_while(|c| c.is_whitespace()).count() + 1
}

pub(crate) fn parse_detailed(text: &str) -> Detailed {
    let mut diagnostics = Vec::new();
    let stripped = strip_comments(text, &mut diagnostics);
    let lines: Vec<&str> = stripped.split('\n').collect();
    let classes: Vec<LineClass> = lines.iter().map(|l| classify(l)).collect();

    let prev_nonblank = |i: usize| (0..i).rev().find(|&j| classes[j] != LineClass::Blank);
    let next_nonblank = |i: usize| (i + 1..lines.len()).find(|&j| classes[j] != LineClass::Blank);

    let mut layout = Layout::default();
    for (i, class) in classes.iter().enumerate() {
        if let LineClass::Header(section) = *class {
            let before = prev_nonblank(i).map(|j| classes[j]) == Some(LineClass::Delimiter);
            let after = next_nonblank(i).map(|j| classes[j]) == Some(LineClass::Delimiter);
            if !before || !after {
                let which = match (before, after) {
                    (false, false) => "before and after",
                    (false, true) => "before",
                    _ => "after",
                };
                diagnostics.push(Diagnostic::syntax(
                    i + 1,
                    indent_col(lines[i]),
                    codes::MISSING_SECTION_DELIMITER,
                    format!(
                        "section header {} is missing its '========' line {which}",
                        section.header()
                    ),
                ));
            }
            layout.headers.push(HeaderInfo {
                section,
                line: i,
                delimiter_before: before,
                delimiter_after: after,
            });
        }
    }

    // Each header owns the delimiter line directly above and below it; any
    // other delimiter lines form stray blocks.
    let mut owned = vec![false; lines.len()];
    for h in &layout.headers {
        if h.delimiter_before {
            owned[prev_nonblank(h.line).unwrap()] = true;
        }
        if h.delimiter_after {
            owned[next_nonblank(h.line).unwrap()] = true;
        }
    }
    let stray = |k: usize| classes[k] == LineClass::Delimiter && !owned[k];
    let mut stray_starts = std::collections::BTreeSet::new();
    let mut i = 0;
    while i < lines.len() {
        if !stray(i) {
            i += 1;
            continue;
        }
        let mut block = vec![i];
        while let Some(k) = next_nonblank(*block.last().unwrap()) {
            if stray(k) {
                block.push(k);
            } else {
                break;
            }
        }
        let first = block[0];
        let last = *block.last().unwrap();
        let prev = layout
            .headers
            .iter()
            .rev()
            .find(|h| h.line < first)
            .map(|h| h.section);
        let next = layout.headers.iter().find(|h| h.line > last).map(|h| h.section);
        diagnostics.push(Diagnostic::syntax(
            first + 1,
            indent_col(lines[first]),
            codes::MISSING_SECTION_HEADER,
            "section delimiter is not followed by a section header",
        ));
        stray_starts.insert(first);
        layout.stray_blocks.push(StrayBlock {
            delimiters: block,
            prev,
            next,
        });
        i = last + 1;
    }

    let mut parser = Parser {
        spec: GameSpec::default(),
        diagnostics,
    };

    // Split into section bodies.
    #[derive(Clone, Copy, PartialEq)]
    enum Current {
        Prelude,
        In(Section),
        Unknown,
    }
    let mut seen: Vec<Section> = Vec::new();
    let mut bodies: Vec<(Current, Vec<(usize, &str)>)> = vec![(Current::Prelude, Vec::new())];
    for (i, line) in lines.iter().enumerate() {
        match classes[i] {
            LineClass::Header(section) => {
                if seen.contains(&section) {
                    parser.diagnostics.push(Diagnostic::syntax(
                        i + 1,
                        indent_col(line),
                        codes::DUPLICATE_SECTION,
                        format!("section {} appears more than once", section.header()),
                    ));
                } else if seen.last().is_some_and(|&s| s > section) {
                    parser.diagnostics.push(Diagnostic::warning(
                        Phase::Syntax,
                        i + 1,
                        indent_col(line),
                        codes::SECTION_ORDER,
                        format!("section {} is out of the usual order", section.header()),
                    ));
                }
                if !seen.contains(&section) {
                    seen.push(section);
                }
                bodies.push((Current::In(section), Vec::new()));
            }
            LineClass::Delimiter => {
                if stray_starts.contains(&i) {
                    bodies.push((Current::Unknown, Vec::new()));
                }
            }
            _ => bodies.last_mut().unwrap().1.push((i + 1, *line)),
        }
    }

    let last_section = seen.iter().copied().max_by_key(|s| {
        layout
            .headers
            .iter()
            .rev()
            .find(|h| h.section == *s)
            .map(|h| h.line)
    });
    for (which, body) in &bodies {
        match which {
            Current::Prelude => parser.prelude(body),
            Current::Unknown => {}
            Current::In(section) => match section {
                Section::Objects => parser.objects(body),
                Section::Legend => parser.legend(body),
                Section::Sounds => parser.sounds(body),
                Section::CollisionLayers => parser.layers(body),
                Section::Rules => parser.rules(body),
                Section::WinConditions => parser.win_conditions(body),
                Section::Levels => {
                    let trailing = parser.levels(body, &mut layout);
                    if last_section == Some(Section::Levels) && matches!(bodies.last(), Some((Current::In(Section::Levels), _))) {
                        layout.trailing_prose = trailing;
                    }
                }
            },
        }
    }

    let end = end_position(&lines);
    for required in [Section::Objects, Section::Levels] {
        if !seen.contains(&required) {
            parser.diagnostics.push(Diagnostic::syntax(
                end.0,
                end.1,
                codes::MISSING_SECTION,
                format!("required section {} is missing", required.header()),
            ));
        }
    }

    let mut diagnostics = parser.diagnostics;
    diagnostic::sort(&mut diagnostics);
    Detailed {
        spec: parser.spec,
        diagnostics,
        layout,
    }
}

fn end_position(lines: &[&str]) -> (usize, usize) {
    let n = lines.len().max(1);
    let last = lines.last().map(|l| l.chars().count()).unwrap_or(0);
    (n, last + 1)
}

const PRELUDE_WITH_VALUE: &[&str] = &[
    "title",
    "author",
    "homepage",
    "background_color",
    "text_color",
    "again_interval",
    "key_repeat_interval",
    "realtime_interval",
    "color_palette",
    "youtube",
    "flickscreen",
    "zoomscreen",
    "sprite_size",
];

const PRELUDE_FLAGS: &[&str] = &[
    "run_rules_on_level_start",
    "norepeat_action",
    "noaction",
    "noundo",
    "norestart",
    "require_player_movement",
    "scanline",
    "throttle_movement",
    "verbose_logging",
    "debug",
    "case_sensitive",
    "level_select",
];

pub(crate) fn is_known_prelude_key(key: &str) -> bool {
    PRELUDE_WITH_VALUE.contains(&key) || PRELUDE_FLAGS.contains(&key)
}

const NAMED_COLORS: &[&str] = &[
    "black",
    "white",
    "grey",
    "darkgrey",
    "lightgrey",
    "gray",
    "darkgray",
    "lightgray",
    "red",
    "darkred",
    "lightred",
    "brown",
    "darkbrown",
    "lightbrown",
    "orange",
    "yellow",
    "green",
    "darkgreen",
    "lightgreen",
    "blue",
    "lightblue",
    "darkblue",
    "purple",
    "pink",
    "transparent",
];

pub fn is_color(token: &str) -> bool {
    if let Some(hex) = token.strip_prefix('#') {
        (hex.len() == 3 || hex.len() == 6) && hex.chars().all(|c| c.is_ascii_hexdigit())
    } else {
        NAMED_COLORS.contains(&token.to_ascii_lowercase().as_str())
    }
}

fn is_sprite_row(line: &str) -> bool {
    let t = line.trim();
    !t.is_empty() && t.chars().all(|c| c == '.' || c.is_ascii_digit())
}

fn is_identifier(word: &str) -> bool {
    !word.is_empty()
        && !word
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, '[' | ']' | '|' | '=' | ','))
}

struct Parser {
    spec: GameSpec,
    diagnostics: Vec<Diagnostic>,
}

impl Parser {
    fn error(&mut self, line: usize, column: usize, code: &str, message: impl Into<String>) {
        self.diagnostics
            .push(Diagnostic::syntax(line, column, code, message));
    }

    fn prelude(&mut self, body: &[(usize, &str)]) {
        for &(line_no, line) in body {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let col = indent_col(line);
            let (key, value) = match t.split_once(char::is_whitespace) {
                Some((k, v)) => (k.to_ascii_lowercase(), v.trim().to_string()),
                None => (t.to_ascii_lowercase(), String::new()),
            };
            if !is_known_prelude_key(&key) {
                self.error(
                    line_no,
                    col,
                    codes::UNKNOWN_PRELUDE_KEY,
                    format!("unrecognized line before the first section: '{t}'"),
                );
                continue;
            }
            if PRELUDE_WITH_VALUE.contains(&key.as_str()) && value.is_empty() {
                self.error(
                    line_no,
                    col,
                    codes::MISSING_PRELUDE_VALUE,
                    format!("'{key}' needs a value"),
                );
                continue;
            }
            self.spec.prelude.push(PreludeEntry {
                key,
                value,
                pos: Pos::new(line_no, col),
            });
        }
    }

    fn objects(&mut self, body: &[(usize, &str)]) {
        struct Pending {
            def: ObjectDef,
            has_colors: bool,
            rows: Vec<(usize, usize, String)>,
        }
        let mut pending: Option<Pending> = None;

        let finish = |p: Pending, parser: &mut Parser| {
            let Pending {
                mut def,
                has_colors,
                rows,
            } = p;
            if !has_colors {
                parser.error(
                    def.pos.line,
                    def.pos.column,
                    codes::MISSING_COLORS,
                    format!("object {} has no color line", def.name),
                );
            }
            if !rows.is_empty() {
                let shape_ok = rows.len() == SPRITE_SIZE
                    && rows.iter().all(|(_, _, r)| r.chars().count() == SPRITE_SIZE);
                if !shape_ok {
                    let (l, c, _) = &rows[0];
                    parser.error(
                        *l,
                        *c,
                        codes::SPRITE_SHAPE,
                        format!("sprite of {} must be 5 rows of 5 characters", def.name),
                    );
                }
                let mut grid = Vec::new();
                let mut palette_reported = false;
                for (l, c, row) in &rows {
                    let mut cells = Vec::new();
                    for (k, ch) in row.chars().enumerate() {
                        let cell = ch.to_digit(10).map(|d| d as u8);
                        if let Some(d) = cell {
                            if d as usize >= def.colors.len() && has_colors && !palette_reported {
                                palette_reported = true;
                                parser.error(
                                    *l,
                                    c + k,
                                    codes::PALETTE_INDEX,
                                    format!(
                                        "sprite of {} uses color {d} but only {} colors are listed",
                                        def.name,
                                        def.colors.len()
                                    ),
                                );
                            }
                        }
                        cells.push(cell);
                    }
                    grid.push(cells);
                }
                def.sprite = Sprite::Pixels(grid);
            }
            parser.spec.objects.push(def);
        };

        for &(line_no, line) in body {
            let t = line.trim();
            let col = indent_col(line);
            if t.is_empty() {
                if let Some(p) = pending.take() {
                    finish(p, self);
                }
                continue;
            }
            match pending.as_mut() {
                Some(p) if !p.has_colors => {
                    let words: Vec<&str> = t.split_whitespace().collect();
                    let mut ok = true;
                    for w in &words {
                        if !is_color(w) {
                            ok = false;
                            self.error(
                                line_no,
                                col,
                                codes::INVALID_COLOR,
                                format!("'{w}' is not a color (object {})", p.def.name),
                            );
                            break;
                        }
                    }
                    if words.len() > 10 {
                        self.error(
                            line_no,
                            col,
                            codes::TOO_MANY_COLORS,
                            format!("object {} lists more than 10 colors", p.def.name),
                        );
                    }
                    if ok {
                        p.def.colors = words.iter().map(|w| w.to_string()).collect();
                    }
                    p.has_colors = true;
                }
                Some(p) if is_sprite_row(t) => {
                    p.rows.push((line_no, col, t.to_string()));
                }
                _ => {
                    if let Some(p) = pending.take() {
                        finish(p, self);
                    }
                    let words: Vec<&str> = t.split_whitespace().collect();
                    let valid = words.len() <= 2
                        && is_identifier(words[0])
                        && words.get(1).map_or(true, |g| g.chars().count() == 1);
                    if !valid {
                        self.error(
                            line_no,
                            col,
                            codes::INVALID_OBJECT_NAME,
                            format!("expected an object name, found '{t}'"),
                        );
                    }
                    pending = Some(Pending {
                        def: ObjectDef {
                            name: words[0].to_string(),
                            glyph: words.get(1).map(|g| g.to_string()),
                            colors: Vec::new(),
                            sprite: Sprite::Solid,
                            pos: Pos::new(line_no, col),
                        },
                        has_colors: false,
                        rows: Vec::new(),
                    });
                }
            }
        }
        if let Some(p) = pending.take() {
            finish(p, self);
        }
    }

    fn legend(&mut self, body: &[(usize, &str)]) {
        for &(line_no, line) in body {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let col = indent_col(line);
            let Some((lhs, rhs)) = t.split_once('=') else {
                self.error(
                    line_no,
                    col,
                    codes::MALFORMED_LEGEND,
                    format!("expected 'glyph = name', found '{t}'"),
                );
                continue;
            };
            let glyph = lhs.trim();
            let words: Vec<&str> = rhs.split_whitespace().collect();
            if glyph.is_empty() || glyph.contains(char::is_whitespace) || !is_identifier(glyph) {
                self.error(
                    line_no,
                    col,
                    codes::MALFORMED_LEGEND,
                    format!("legend key '{glyph}' must be a single glyph or name"),
                );
                continue;
            }
            if words.is_empty() || words.len() % 2 == 0 {
                self.error(
                    line_no,
                    col,
                    codes::MALFORMED_LEGEND,
                    format!("legend entry for '{glyph}' is incomplete"),
                );
                continue;
            }
            let members: Vec<String> = words.iter().step_by(2).map(|w| w.to_string()).collect();
            let ops: Vec<String> = words
                .iter()
                .skip(1)
                .step_by(2)
                .map(|w| w.to_ascii_lowercase())
                .collect();
            if members.iter().any(|m| !is_identifier(m)) || ops.iter().any(|o| o != "and" && o != "or") {
                self.error(
                    line_no,
                    col,
                    codes::MALFORMED_LEGEND,
                    format!("legend entry for '{glyph}' must join names with 'and' or 'or'"),
                );
                continue;
            }
            let kind = if ops.is_empty() {
                LegendKind::Alias
            } else if ops.iter().all(|o| o == "and") {
                LegendKind::Aggregate
            } else if ops.iter().all(|o| o == "or") {
                LegendKind::Property
            } else {
                self.error(
                    line_no,
                    col,
                    codes::MIXED_LEGEND_OPERATORS,
                    format!("legend entry for '{glyph}' mixes 'and' with 'or'"),
                );
                continue;
            };
            self.spec.legend.push(LegendEntry {
                glyph: glyph.to_string(),
                kind,
                members,
                pos: Pos::new(line_no, col),
            });
        }
    }

    fn sounds(&mut self, body: &[(usize, &str)]) {
        for &(_, line) in body {
            let t = line.trim();
            if !t.is_empty() {
                self.spec.sounds.push(t.to_string());
            }
        }
    }

    fn layers(&mut self, body: &[(usize, &str)]) {
        for &(line_no, line) in body {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let members: Vec<String> = t
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|w| !w.is_empty())
                .map(str::to_string)
                .collect();
            if members.iter().any(|m| !is_identifier(m)) {
                self.error(
                    line_no,
                    indent_col(line),
                    codes::MALFORMED_LAYER,
                    format!("collision layer line '{t}' must list object names"),
                );
                continue;
            }
            self.spec.collision_layers.push(LayerDef {
                members,
                pos: Pos::new(line_no, indent_col(line)),
            });
        }
    }

    fn rules(&mut self, body: &[(usize, &str)]) {
        for &(line_no, line) in body {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let col = indent_col(line);
            match t.to_ascii_lowercase().as_str() {
                "startloop" | "endloop" => {
                    self.spec.rules.push(RuleEntry::LoopMarker {
                        start: t.eq_ignore_ascii_case("startloop"),
                        pos: Pos::new(line_no, col),
                    });
                    continue;
                }
                _ => {}
            }
            match parse_rule(line, line_no) {
                Ok(rule) => self.spec.rules.push(RuleEntry::Rule(rule)),
                Err(d) => self.diagnostics.push(d),
            }
        }
    }

    fn win_conditions(&mut self, body: &[(usize, &str)]) {
        for &(line_no, line) in body {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let col = indent_col(line);
            let words: Vec<&str> = t.split_whitespace().collect();
            let quantifier = match words[0].to_ascii_lowercase().as_str() {
                "all" => Some(Quantifier::All),
                "some" | "any" => Some(Quantifier::Some),
                "no" => Some(Quantifier::No),
                _ => None,
            };
            let shape_ok = match words.len() {
                2 => true,
                4 => words[2].eq_ignore_ascii_case("on"),
                _ => false,
            };
            match quantifier {
                Some(quantifier) if shape_ok && words[1..].iter().all(|w| is_identifier(w)) => {
                    self.spec.win_conditions.push(WinCondition {
                        quantifier,
                        subject: words[1].to_string(),
                        on_target: words.get(3).map(|w| w.to_string()),
                        pos: Pos::new(line_no, col),
                    });
                }
                _ => self.error(
                    line_no,
                    col,
                    codes::MALFORMED_WIN_CONDITION,
                    format!("expected 'all|some|no <name> [on <name>]', found '{t}'"),
                ),
            }
        }
    }

    /// Returns the line index of the first malformed row, if any.
    fn levels(&mut self, body: &[(usize, &str)], layout: &mut Layout) -> Option<usize> {
        let mut first_malformed = None;
        let mut grid: Vec<(usize, usize, String)> = Vec::new();

        let flush = |grid: &mut Vec<(usize, usize, String)>, parser: &mut Parser, layout: &mut Layout| {
            if grid.is_empty() {
                return;
            }
            let width = grid[0].2.chars().count();
            let mut ragged = false;
            for (l, c, row) in grid.iter().skip(1) {
                let w = row.chars().count();
                if w != width {
                    ragged = true;
                    parser.error(
                        *l,
                        *c,
                        codes::RAGGED_LEVEL,
                        format!("level row has {w} cells but the level's first row has {width}"),
                    );
                }
            }
            if ragged {
                layout
                    .ragged_grids
                    .push(grid.iter().map(|(l, _, _)| l - 1).collect());
            }
            let (l, c, _) = grid[0];
            parser.spec.levels.push(LevelEntry::Grid {
                rows: grid.drain(..).map(|(_, _, r)| r).collect(),
                pos: Pos::new(l, c),
            });
        };

        for &(line_no, line) in body {
            let t = line.trim();
            let col = indent_col(line);
            if t.is_empty() {
                flush(&mut grid, self, layout);
                continue;
            }
            let first_word = t.split_whitespace().next().unwrap_or("");
            if first_word.eq_ignore_ascii_case("message") {
                flush(&mut grid, self, layout);
                self.spec.levels.push(LevelEntry::Message {
                    text: t[first_word.len()..].trim().to_string(),
                    pos: Pos::new(line_no, col),
                });
                continue;
            }
            if t.contains(char::is_whitespace) {
                first_malformed.get_or_insert(line_no - 1);
                self.error(
                    line_no,
                    col,
                    codes::MALFORMED_LEVEL_ROW,
                    "level rows may not contain spaces (is this prose?)",
                );
                continue;
            }
            grid.push((line_no, col, t.to_string()));
        }
        flush(&mut grid, self, layout);
        first_malformed
    }
}

fn parse_rule(line: &str, line_no: usize) -> Result<RuleDef, Diagnostic> {
    let tokens = tokenize_rule(line);
    let start_col = tokens.first().map(|t| t.column).unwrap_or(1);
    let err = |col: usize, msg: String| Diagnostic::syntax(line_no, col, codes::MALFORMED_RULE, msg);

    let mut rule = RuleDef {
        grouped: false,
        late: false,
        random: false,
        rigid: false,
        direction: DirectionConstraint::None,
        lhs: Vec::new(),
        rhs: Vec::new(),
        commands: Vec::new(),
        pos: Pos::new(line_no, start_col),
    };
    let mut i = 0;
    if tokens.first().map(|t| t.kind) == Some(TokenKind::Plus) {
        rule.grouped = true;
        i += 1;
    }
    while let Some(tok) = tokens.get(i) {
        if tok.kind != TokenKind::Word {
            break;
        }
        let word = tok.text.to_ascii_lowercase();
        let dir = match word.as_str() {
            "late" => {
                rule.late = true;
                None
            }
            "random" => {
                rule.random = true;
                None
            }
            "rigid" => {
                rule.rigid = true;
                None
            }
            "up" => Some(DirectionConstraint::Up),
            "down" => Some(DirectionConstraint::Down),
            "left" => Some(DirectionConstraint::Left),
            "right" => Some(DirectionConstraint::Right),
            "horizontal" => Some(DirectionConstraint::Horizontal),
            "vertical" => Some(DirectionConstraint::Vertical),
            "orthogonal" => Some(DirectionConstraint::None),
            _ => return Err(err(tok.column, format!("unexpected '{}' before the rule's first '['", tok.text))),
        };
        if let Some(dir) = dir {
            if rule.direction != DirectionConstraint::None && rule.direction != dir {
                return Err(err(tok.column, "a rule may name only one direction".to_string()));
            }
            rule.direction = dir;
        }
        i += 1;
    }

    while tokens.get(i).map(|t| t.kind) == Some(TokenKind::OpenBracket) {
        let (bracket, next) = parse_bracket(&tokens, i, line_no)?;
        rule.lhs.push(bracket);
        i = next;
    }
    if rule.lhs.is_empty() {
        let col = tokens.get(i).map(|t| t.column).unwrap_or(start_col);
        return Err(err(col, "a rule needs at least one '[ ... ]' pattern".to_string()));
    }
    match tokens.get(i) {
        Some(t) if t.kind == TokenKind::Arrow => i += 1,
        Some(t) => return Err(err(t.column, format!("expected '->', found '{}'", t.text))),
        None => return Err(err(start_col, "rule is missing '->'".to_string())),
    }
    while tokens.get(i).map(|t| t.kind) == Some(TokenKind::OpenBracket) {
        let (bracket, next) = parse_bracket(&tokens, i, line_no)?;
        rule.rhs.push(bracket);
        i = next;
    }
    while let Some(tok) = tokens.get(i) {
        if tok.kind != TokenKind::Word {
            return Err(err(tok.column, format!("unexpected '{}' after the rule", tok.text)));
        }
        let word = tok.text.to_ascii_lowercase();
        let command = match word.as_str() {
            "cancel" => Command::Cancel,
            "win" => Command::Win,
            "again" => Command::Again,
            "checkpoint" => Command::Checkpoint,
            "restart" => Command::Restart,
            "message" => {
                let text = line[tok.offset + tok.text.len()..].trim().to_string();
                rule.commands.push(Command::Message(text));
                i = tokens.len();
                continue;
            }
            w if w.starts_with("sfx") && w.len() > 3 && w[3..].chars().all(|c| c.is_ascii_digit()) => {
                Command::Sfx(word.clone())
            }
            _ => return Err(err(tok.column, format!("unknown command '{}'", tok.text))),
        };
        rule.commands.push(command);
        i += 1;
    }

    if !rule.rhs.is_empty() {
        check_arity(&rule, line_no)?;
    }
    Ok(rule)
}

fn check_arity(rule: &RuleDef, line_no: usize) -> Result<(), Diagnostic> {
    let arity = |col: usize, msg: String| Diagnostic::syntax(line_no, col, codes::RULE_ARITY_MISMATCH, msg);
    if rule.lhs.len() != rule.rhs.len() {
        return Err(arity(
            rule.pos.column,
            format!(
                "left side has {} bracket(s) but right side has {} ({} vs {})",
                rule.lhs.len(),
                rule.rhs.len(),
                rule.lhs.len(),
                rule.rhs.len()
            ),
        ));
    }
    for (k, (l, r)) in rule.lhs.iter().zip(&rule.rhs).enumerate() {
        if l.items.len() != r.items.len() {
            return Err(arity(
                r.pos.column,
                format!(
                    "bracket {} has {} cell(s) on the left but {} on the right ({} vs {})",
                    k + 1,
                    l.items.len(),
                    r.items.len(),
                    l.items.len(),
                    r.items.len()
                ),
            ));
        }
        if l.ellipsis_positions() != r.ellipsis_positions() {
            return Err(arity(
                r.pos.column,
                format!("bracket {} has '...' in different positions on each side", k + 1),
            ));
        }
    }
    Ok(())
}

fn parse_bracket(tokens: &[Token<'_>], start: usize, line_no: usize) -> Result<(BracketPattern, usize), Diagnostic> {
    let open = &tokens[start];
    let err = |col: usize, msg: String| Diagnostic::syntax(line_no, col, codes::MALFORMED_RULE, msg);
    let mut items = Vec::new();
    let mut i = start + 1;
    let mut cell: Vec<&Token<'_>> = Vec::new();
    let mut cell_col = tokens.get(i).map(|t| t.column).unwrap_or(open.column);
    loop {
        let Some(tok) = tokens.get(i) else {
            return Err(err(open.column, "'[' is never closed".to_string()));
        };
        match tok.kind {
            TokenKind::Bar | TokenKind::CloseBracket => {
                items.push(finish_cell(&cell, cell_col, line_no)?);
                cell.clear();
                i += 1;
                if tok.kind == TokenKind::CloseBracket {
                    break;
                }
                cell_col = tokens.get(i).map(|t| t.column).unwrap_or(tok.column);
            }
            TokenKind::Word | TokenKind::Ellipsis => {
                cell.push(tok);
                i += 1;
            }
            _ => return Err(err(tok.column, format!("unexpected '{}' inside brackets", tok.text))),
        }
    }
    let n = items.len();
    for (k, item) in items.iter().enumerate() {
        if matches!(item, BracketItem::Ellipsis) {
            let adjacent = k + 1 < n && matches!(items[k + 1], BracketItem::Ellipsis);
            if k == 0 || k + 1 == n || adjacent {
                return Err(err(
                    open.column,
                    "'...' must sit between two cells and cannot repeat".to_string(),
                ));
            }
        }
    }
    Ok((
        BracketPattern {
            items,
            pos: Pos::new(line_no, open.column),
        },
        i,
    ))
}

fn finish_cell(words: &[&Token<'_>], col: usize, line_no: usize) -> Result<BracketItem, Diagnostic> {
    let err = |col: usize, msg: String| Diagnostic::syntax(line_no, col, codes::MALFORMED_RULE, msg);
    if words.iter().any(|t| t.kind == TokenKind::Ellipsis) {
        if words.len() == 1 {
            return Ok(BracketItem::Ellipsis);
        }
        return Err(err(col, "'...' must be alone in its cell".to_string()));
    }
    let mut atoms = Vec::new();
    let mut k = 0;
    while k < words.len() {
        let start = words[k];
        let mut negated = false;
        if words[k].text.eq_ignore_ascii_case("no") && k + 1 < words.len() {
            negated = true;
            k += 1;
        }
        let mut motion = MotionWord::None;
        if k + 1 < words.len() {
            if let Some(m) = MotionWord::parse(words[k].text) {
                motion = m;
                k += 1;
            }
        }
        let entity = words[k];
        if !is_identifier(entity.text) || matches!(entity.text, ">" | "<" | "^") {
            return Err(err(entity.column, format!("'{}' is not an object name", entity.text)));
        }
        atoms.push(Atom {
            negated,
            motion,
            entity: entity.text.to_string(),
            pos: Pos::new(line_no, start.column),
        });
        k += 1;
    }
    Ok(BracketItem::Cell(CellPattern { atoms }))
}
