mod common;

use common::*;
use psforge_core::corpus::{estimate_tokens, sample_fewshot_from, Pool, BUDGET_PRESETS};
use psforge_core::{load_corpus, sample_fewshot, Corpus};

fn fixture_corpus() -> Corpus {
    load_corpus(&fixtures().join("corpus")).unwrap()
}

#[test]
fn fixture_corpus_loads_with_recomputed_token_counts() {
    let corpus = fixture_corpus();
    assert_eq!(corpus.len(), 12);
    for entry in corpus.entries() {
        let bytes = std::fs::metadata(fixtures().join("corpus").join(format!("{}.txt", entry.id)))
            .unwrap()
            .len();
        assert_eq!(entry.token_count, bytes.div_ceil(4), "{}", entry.id);
        assert_eq!(entry.token_count, estimate_tokens(entry.source.content()));
        assert!(entry.parses && entry.compiles, "{}", entry.id);
        assert!(entry.title.is_some(), "{}", entry.id);
    }
    let ids: Vec<&str> = corpus.entries().iter().map(|e| e.id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(ids, sorted);
}

#[test]
fn samples_respect_the_budget_and_stop_at_the_first_overflow() {
    let corpus = fixture_corpus();
    let pool_total: u64 = corpus.entries().iter().map(|e| e.token_count).sum();
    for budget in BUDGET_PRESETS.into_iter().chain([0, 1_000, 200_000]) {
        for seed in 0..200 {
            let sample = sample_fewshot(&corpus, budget, seed);
            let sum: u64 = sample.games.iter().map(|id| corpus.get(id).unwrap().token_count).sum();
            assert_eq!(sum, sample.total_tokens);
            assert!(sample.total_tokens <= budget);
            match &sample.rejected {
                Some(id) => {
                    assert!(!sample.games.contains(id));
                    assert!(sample.total_tokens + corpus.get(id).unwrap().token_count > budget);
                }
                None => assert_eq!(sample.total_tokens, pool_total),
            }
            let mut unique = sample.games.clone();
            unique.sort();
            unique.dedup();
            assert_eq!(unique.len(), sample.games.len());
        }
    }
}

#[test]
fn samples_are_seed_reproducible() {
    let corpus = fixture_corpus();
    for budget in BUDGET_PRESETS {
        for seed in [0, 1, 42, u64::MAX] {
            assert_eq!(sample_fewshot(&corpus, budget, seed), sample_fewshot(&corpus, budget, seed));
        }
    }
    let differing = (0..20)
        .filter(|&s| sample_fewshot(&corpus, 30_000, s).games != sample_fewshot(&corpus, 30_000, 0).games)
        .count();
    assert!(differing > 0);
}

#[test]
fn frozen_samples() {
    let corpus = fixture_corpus();
    let s = sample_fewshot(&corpus, 10_000, 42);
    assert_eq!(s.games, ["quarry"]);
    let s = sample_fewshot(&corpus, 30_000, 42);
    assert_eq!(s.games, ["quarry", "gearworks", "crate_garden", "ice_cellar", "orchard"]);
    assert_eq!(s.total_tokens, 27_421);
    assert_eq!(s.rejected.as_deref(), Some("harbour"));
    let s = sample_fewshot(&corpus, 1_000, 42);
    assert!(s.games.is_empty() && s.rejected.is_some());
}

#[test]
fn broken_games_are_excluded_unless_asked_for() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(
        fixtures().join("games/corridor.txt"),
        dir.path().join("corridor.txt"),
    )
    .unwrap();
    std::fs::write(dir.path().join("notes.txt"), "Ideas for later: magnets, ice.\n").unwrap();
    let corpus = load_corpus(dir.path()).unwrap();
    assert_eq!(corpus.len(), 2);
    for seed in 0..10 {
        assert_eq!(sample_fewshot(&corpus, 100_000, seed).games, ["corridor"]);
        assert_eq!(sample_fewshot_from(&corpus, Pool::All, 100_000, seed).games.len(), 2);
    }
}
