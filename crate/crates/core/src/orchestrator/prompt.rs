//! Prompt assembly and code extraction.

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusEntry;
use crate::grammar::parser::is_known_prelude_key;
use crate::grammar::Section;
use crate::source::SourceText;

use super::{IterationRecord, TrialConfig};

pub const DOCS_DIGEST: &str = include_str!("../../assets/puzzlescript_docs.txt");

pub const TASK_INSTRUCTION: &str = "Write a complete, original PuzzleScript game. \
It must compile and contain several levels, and every level must be solvable \
with a solution longer than 10 moves. Reply with the full source code of the game \
inside a single ``` fenced code block.";

pub const COT_INSTRUCTION: &str = "Think step by step first: describe the mechanics, \
check that every rule is legal PuzzleScript, and plan each level's solution. \
Then give the final code in a ``` fenced code block at the end of your reply.";

pub const BRAINSTORM_INSTRUCTION: &str = "Propose one idea for a small, novel \
turn-based grid puzzle game that could be written in PuzzleScript. Describe its \
core mechanic in two or three sentences. Do not write any code.";

pub const NO_CODE_FEEDBACK: &str = "Your previous reply did not contain a game. \
Reply with the complete game source inside a ``` fenced code block.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub system_text: String,
    pub user_text: String,
}

/// Deterministic in all inputs. Examples appear in the order given.
pub fn build_prompt(
    config: &TrialConfig,
    examples: &[&CorpusEntry],
    idea: Option<&str>,
    prior: Option<&IterationRecord>,
) -> Prompt {
    let mut system_text = DOCS_DIGEST.trim_end().to_string();
    if config.fewshot && !examples.is_empty() {
        system_text.push_str("\n\nEXAMPLE GAMES\n\nThe following games were written by people.\n");
        for entry in examples {
            system_text.push_str(&format!("\n=== example: {} ===\n", entry.id));
            system_text.push_str(entry.source.content().trim_end());
            system_text.push_str(&format!("\n=== end of example: {} ===\n", entry.id));
        }
    }

    let mut user_text = TASK_INSTRUCTION.to_string();
    if config.chain_of_thought {
        user_text.push_str("\n\n");
        user_text.push_str(COT_INSTRUCTION);
    }
    if let Some(idea) = idea {
        user_text.push_str("\n\nBase the game on this idea:\n");
        user_text.push_str(idea.trim());
    }
    if let Some(prior) = prior {
        if !prior.feedback_rendered.is_empty() {
            user_text.push_str("\n\n");
            user_text.push_str(&prior.feedback_rendered);
        }
    }
    Prompt {
        system_text,
        user_text,
    }
}

fn fence_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut open: Option<String> = None;
    for line in text.lines() {
        let is_fence = line.trim_start().starts_with("```");
        match (&mut open, is_fence) {
            (None, true) => open = Some(String::new()),
            (Some(_), true) => blocks.push(open.take().expect("open block")),
            (Some(block), false) => {
                block.push_str(line);
                block.push('\n');
            }
            (None, false) => {}
        }
    }
    // an unterminated final block usually means the reply was cut off
    if let Some(block) = open {
        blocks.push(block);
    }
    blocks
}

fn looks_like_source(text: &str) -> bool {
    let Some(first) = text.lines().map(str::trim).find(|l| !l.is_empty()) else {
        return false;
    };
    if first.starts_with("===") {
        return true;
    }
    let word = first.split_whitespace().next().unwrap_or("").to_ascii_lowercase();
    Section::from_header(&word).is_some() || is_known_prelude_key(&word)
}

/// The last fenced block, or the whole reply when it already reads as
/// PuzzleScript.
pub fn extract_code(raw_response: &str) -> Option<SourceText> {
    if let Some(block) = fence_blocks(raw_response).pop() {
        return Some(SourceText::new(block, "response"));
    }
    let trimmed = raw_response.trim();
    looks_like_source(trimmed).then(|| SourceText::new(format!("{trimmed}\n"), "response"))
}
