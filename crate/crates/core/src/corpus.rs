//! Human-authored example games and few-shot sampling under a token budget.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::compile;
use crate::grammar::parse_game;
use crate::source::SourceText;

pub const META_FILE: &str = "corpus.meta";

/// Budgets used by the context-length sweep.
pub const BUDGET_PRESETS: [u64; 4] = [10_000, 30_000, 50_000, 70_000];

/// Counts model tokens in a piece of text. Implementations must be monotone
/// in the input length.
pub trait TokenEstimator {
    fn estimate(&self, text: &str) -> u64;
}

/// Four bytes per token, rounded up. An approximation; no model tokenizer
/// is bundled.
#[derive(Debug, Clone, Copy, Default)]
pub struct ByteEstimator;

impl TokenEstimator for ByteEstimator {
    fn estimate(&self, text: &str) -> u64 {
        (text.len() as u64).div_ceil(4)
    }
}

pub fn estimate_tokens(text: &str) -> u64 {
    ByteEstimator.estimate(text)
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus directory {path}: {source}")]
    Directory {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub source: SourceText,
    pub token_count: u64,
    pub parses: bool,
    pub compiles: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

impl CorpusEntry {
    pub fn new(id: impl Into<String>, source: SourceText, estimator: &dyn TokenEstimator) -> Self {
        let token_count = estimator.estimate(source.content());
        let parsed = parse_game(&source);
        let compiles = parsed
            .spec
            .as_ref()
            .is_some_and(|spec| compile(spec).game.is_some());
        Self {
            id: id.into(),
            parses: parsed.spec.is_some(),
            compiles,
            source,
            token_count,
            title: None,
        }
    }
}

/// Entries are sorted by id and ids are unique.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    entries: Vec<CorpusEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pool {
    #[default]
    Compiling,
    All,
}

impl Corpus {
    /// Later entries with an id already present are dropped.
    pub fn from_entries(entries: Vec<CorpusEntry>) -> Self {
        let mut entries = entries;
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        entries.dedup_by(|a, b| a.id == b.id);
        Self { entries }
    }

    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&CorpusEntry> {
        self.entries
            .binary_search_by(|e| e.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn pool(&self, pool: Pool) -> Vec<&CorpusEntry> {
        self.entries
            .iter()
            .filter(|e| pool == Pool::All || e.compiles)
            .collect()
    }
}

pub fn load_corpus(directory: &Path) -> Result<Corpus, CorpusError> {
    load_corpus_with(directory, &ByteEstimator)
}

pub fn load_corpus_with(
    directory: &Path,
    estimator: &dyn TokenEstimator,
) -> Result<Corpus, CorpusError> {
    let dir_err = |source| CorpusError::Directory {
        path: directory.to_path_buf(),
        source,
    };
    let mut entries = Vec::new();
    for item in std::fs::read_dir(directory).map_err(dir_err)? {
        let path = item.map_err(dir_err)?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") || !path.is_file() {
            continue;
        }
        let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let source = SourceText::read(&path).map_err(|source| CorpusError::File {
            path: path.clone(),
            source,
        })?;
        entries.push(CorpusEntry::new(id, source, estimator));
    }

    let meta_path = directory.join(META_FILE);
    if meta_path.is_file() {
        let text = std::fs::read_to_string(&meta_path).map_err(|source| CorpusError::File {
            path: meta_path.clone(),
            source,
        })?;
        let titles = parse_meta(&text);
        for entry in &mut entries {
            entry.title = titles.get(entry.id.as_str()).map(|t| t.to_string());
        }
    }

    if entries.is_empty() {
        log::warn!("corpus directory {} has no .txt games", directory.display());
    }
    Ok(Corpus::from_entries(entries))
}

fn parse_meta(text: &str) -> HashMap<&str, &str> {
    text.lines()
        .filter_map(|line| line.split_once('\t'))
        .map(|(id, title)| (id.trim(), title.trim()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewshotSample {
    /// In draw order, which is also prompt order.
    pub games: Vec<String>,
    pub total_tokens: u64,
    pub budget: u64,
    /// The draw that would have overflowed the budget, if sampling stopped
    /// before the pool ran out.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected: Option<String>,
}

pub fn sample_fewshot(corpus: &Corpus, budget: u64, rng_seed: u64) -> FewshotSample {
    sample_fewshot_from(corpus, Pool::Compiling, budget, rng_seed)
}

/// Draws without replacement and stops at the first game that does not fit.
pub fn sample_fewshot_from(corpus: &Corpus, pool: Pool, budget: u64, rng_seed: u64) -> FewshotSample {
    let mut order = corpus.pool(pool);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    order.shuffle(&mut rng);

    let mut sample = FewshotSample {
        games: Vec::new(),
        total_tokens: 0,
        budget,
        rejected: None,
    };
    for entry in order {
        if sample.total_tokens + entry.token_count > budget {
            sample.rejected = Some(entry.id.clone());
            break;
        }
        sample.total_tokens += entry.token_count;
        sample.games.push(entry.id.clone());
    }
    sample
}
