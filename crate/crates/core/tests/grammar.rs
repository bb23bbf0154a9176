mod common;

use common::*;
use proptest::prelude::*;
use psforge_core::grammar::syntax_error_count;
use psforge_core::{compile, parse_game, print_game, repair_source, SourceText};

/// Every fixture that compiles, games and corpus alike.
fn compiling_sources() -> Vec<SourceText> {
    let mut files = fixture_files("games");
    files.extend(fixture_files("corpus"));
    files
        .iter()
        .map(|p| read(p))
        .filter(|s| parse_game(s).spec.is_some_and(|spec| compile(&spec).game.is_some()))
        .collect()
}

fn repair_fixtures() -> Vec<SourceText> {
    fixture_files("repair").iter().map(|p| read(p)).collect()
}

fn repaired(source: &SourceText) -> SourceText {
    repair_source(source, &parse_game(source).diagnostics).repaired
}

#[test]
fn every_game_fixture_compiles() {
    let sources = compiling_sources();
    assert_eq!(
        sources.len(),
        fixture_files("games").len() + fixture_files("corpus").len()
    );
}

#[test]
fn print_then_parse_gives_the_same_tree() {
    for source in compiling_sources() {
        let spec = parse_game(&source).spec.unwrap();
        let printed = print_game(&spec);
        let reparsed = parse_game(&printed);
        assert_eq!(reparsed.spec.as_ref(), Some(&spec), "{}", source.origin);
        assert_eq!(print_game(&reparsed.spec.unwrap()), printed, "{}", source.origin);
    }
}

#[test]
fn repair_catalog_is_idempotent() {
    for source in repair_fixtures() {
        let once = repair_source(&source, &parse_game(&source).diagnostics);
        let twice = repair_source(&once.repaired, &parse_game(&once.repaired).diagnostics);
        assert_eq!(twice.repaired, once.repaired, "{}", source.origin);
        assert!(twice.repairs.is_empty(), "{}: {:?}", source.origin, twice.repairs);
    }
}

#[test]
fn repair_catalog_fixes_what_it_can() {
    for source in repair_fixtures() {
        let before = parse_game(&source);
        let outcome = repair_source(&source, &before.diagnostics);
        let after = parse_game(&outcome.repaired);
        if source.origin.ends_with("prose_only.txt") {
            assert!(outcome.repairs.is_empty());
            assert_eq!(outcome.repaired, source);
            continue;
        }
        assert!(before.syntax_errors() > 0, "{} should need repair", source.origin);
        assert!(!outcome.repairs.is_empty(), "{}", source.origin);
        assert_eq!(after.syntax_errors(), 0, "{}: {:?}", source.origin, after.diagnostics);
        let spec = after.spec.unwrap();
        assert!(compile(&spec).game.is_some(), "{}", source.origin);
    }
}

#[test]
fn valid_sources_are_left_alone() {
    for source in compiling_sources() {
        let outcome = repair_source(&source, &parse_game(&source).diagnostics);
        assert!(outcome.repairs.is_empty(), "{}", source.origin);
        assert_eq!(outcome.repaired, source);
    }
}

/// A fixture with a few lines deleted, duplicated or overwritten with noise.
fn mangled_fixture() -> impl Strategy<Value = String> {
    let sources: Vec<String> = compiling_sources()
        .into_iter()
        .filter(|s| s.content().len() < 4_000)
        .map(|s| s.into_content())
        .collect();
    (
        proptest::sample::select(sources),
        proptest::collection::vec((any::<prop::sample::Index>(), 0u8..3, "[ -~]{0,12}"), 1..6),
    )
        .prop_map(|(text, edits)| {
            let mut lines: Vec<String> = text.lines().map(String::from).collect();
            for (at, kind, noise) in edits {
                if lines.is_empty() {
                    break;
                }
                let i = at.index(lines.len());
                match kind {
                    0 => {
                        lines.remove(i);
                    }
                    1 => {
                        let copy = lines[i].clone();
                        lines.insert(i, copy);
                    }
                    _ => lines[i] = noise,
                }
            }
            lines.join("\n")
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 10_000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn byte_noise_never_crashes(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
        let source = SourceText::from_bytes(&bytes, "noise");
        let parsed = parse_game(&source);
        if parsed.spec.is_none() {
            prop_assert!(!parsed.diagnostics.is_empty());
        }
        if let Some(spec) = parsed.spec {
            compile(&spec);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn mangled_games_never_crash(text in mangled_fixture()) {
        let source = SourceText::new(text, "mangled");
        let parsed = parse_game(&source);
        let lines = source.content().lines().count().max(1);
        for d in &parsed.diagnostics {
            prop_assert!(d.line >= 1 && d.line <= lines + 1, "{d}");
        }
        if let Some(spec) = &parsed.spec {
            let printed = print_game(spec);
            prop_assert_eq!(parse_game(&printed).spec, Some(spec.clone()));
            if let Some(game) = compile(spec).game {
                for level in grid_levels(&game) {
                    let state = psforge_core::init_state(&game, level);
                    if let Ok(state) = state {
                        for action in psforge_core::Action::ALL {
                            psforge_core::step(&game, &state, action);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn repair_is_idempotent_and_never_worse(text in mangled_fixture()) {
        let source = SourceText::new(text, "mangled");
        let before = syntax_error_count(&parse_game(&source).diagnostics);
        let once = repaired(&source);
        let after = syntax_error_count(&parse_game(&once).diagnostics);
        prop_assert!(after <= before);
        prop_assert_eq!(repaired(&once), once);
    }

    #[test]
    fn fenced_replies_unwrap_to_the_game(prefix in "[a-zA-Z ,.!]{0,60}", suffix in "[a-zA-Z ,.!]{0,60}") {
        let game = compiling_sources().swap_remove(0);
        let reply = SourceText::new(format!("{prefix}\n```\n{}```\n{suffix}\n", game.content()), "reply");
        let fixed = repaired(&reply);
        prop_assert_eq!(parse_game(&fixed).spec, parse_game(&game).spec);
    }
}
