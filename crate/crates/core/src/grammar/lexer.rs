//! Comment stripping and rule-line tokenization.

use crate::diagnostic::{codes, Diagnostic, Phase};

/// Blanks out `( ... )` comments, which may nest and span lines.
///
/// Comment characters become spaces so every remaining character keeps its
/// original line and column.
pub fn strip_comments(text: &str, diagnostics: &mut Vec<Diagnostic>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut depth = 0usize;
    let (mut line, mut col) = (1usize, 1usize);
    let mut open_at = (1, 1);
    for ch in text.chars() {
        match ch {
            '(' => {
                if depth == 0 {
                    open_at = (line, col);
                }
                depth += 1;
                out.push(' ');
            }
            ')' if depth > 0 => {
                depth -= 1;
                out.push(' ');
            }
            '\n' => out.push('\n'),
            _ if depth > 0 => out.push(' '),
            _ => out.push(ch),
        }
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    if depth > 0 {
        diagnostics.push(Diagnostic::warning(
            Phase::Syntax,
            open_at.0,
            open_at.1,
            codes::UNCLOSED_COMMENT,
            "comment is never closed; the rest of the file is ignored",
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    OpenBracket,
    CloseBracket,
    Bar,
    Arrow,
    Ellipsis,
    Plus,
    Word,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    /// 1-based character column.
    pub column: usize,
    /// Byte offset into the line.
    pub offset: usize,
}

/// Splits one rule line into tokens. `[ ] | -> ... +` delimit themselves;
/// everything else is whitespace separated.
pub fn tokenize_rule(line: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let chars: Vec<(usize, char)> = line.char_indices().collect();
    let mut i = 0;
    let byte_at = |i: usize| chars.get(i).map(|c| c.0).unwrap_or(line.len());
    while i < chars.len() {
        let (offset, ch) = chars[i];
        if ch.is_whitespace() {
            i += 1;
            continue;
        }
        let rest = &line[offset..];
        let single = match ch {
            '[' => Some(TokenKind::OpenBracket),
            ']' => Some(TokenKind::CloseBracket),
            '|' => Some(TokenKind::Bar),
            '+' if tokens.is_empty() => Some(TokenKind::Plus),
            _ => None,
        };
        let (kind, len) = if let Some(kind) = single {
            (kind, 1)
        } else if rest.starts_with("->") {
            (TokenKind::Arrow, 2)
        } else if rest.starts_with("...") {
            (TokenKind::Ellipsis, 3)
        } else {
            let mut j = i;
            while j < chars.len() {
                let c = chars[j].1;
                if c.is_whitespace() || matches!(c, '[' | ']' | '|') {
                    break;
                }
                if j > i && line[chars[j].0..].starts_with("->") {
                    break;
                }
                j += 1;
            }
            (TokenKind::Word, j - i)
        };
        let end = byte_at(i + len);
        tokens.push(Token {
            kind,
            text: &line[offset..end],
            column: i + 1,
            offset,
        });
        i += len;
    }
    tokens
}
