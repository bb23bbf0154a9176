use super::*;
use crate::testutil::{compile_source, sokoban, source, PUSH};

fn run(game: &CompiledGame, level: usize, moves: &[Action]) -> GameState {
    let mut state = init_state(game, level).unwrap();
    for &a in moves {
        state = step(game, &state, a).state;
    }
    state
}

fn rows(game: &CompiledGame, state: &GameState) -> Vec<String> {
    render_rows(game, state)
}

#[test]
fn bare_movement() {
    let g = sokoban("", "P.");
    let s = init_state(&g, 0).unwrap();
    assert_eq!((s.width, s.height), (2, 1));
    let out = step(&g, &s, Action::Right);
    assert!(out.changed);
    assert_eq!(rows(&g, &out.state), vec![".P"]);
}

#[test]
fn wall_blocks_movement() {
    let g = sokoban("", "P#O");
    let s = init_state(&g, 0).unwrap();
    let out = step(&g, &s, Action::Right);
    assert!(!out.changed);
    assert_eq!(hash_state(&out.state), hash_state(&s));
}

#[test]
fn off_grid_motion_is_dropped() {
    let g = sokoban("", "P.O");
    let s = init_state(&g, 0).unwrap();
    let out = step(&g, &s, Action::Left);
    assert!(!out.changed);
    assert!(out.state.motions.iter().all(|m| *m == 0));
}

#[test]
fn push_moves_player_and_crate() {
    let g = sokoban(PUSH, "P*.O");
    let s = run(&g, 0, &[Action::Right]);
    assert_eq!(rows(&g, &s), vec![".P*O"]);
    let s = run(&g, 0, &[Action::Right, Action::Right]);
    assert_eq!(rows(&g, &s), vec!["..P@"]);
    assert_eq!(s.status, Status::Won);
}

#[test]
fn blocked_crate_blocks_player() {
    let g = sokoban(PUSH, "P*#O");
    let s = init_state(&g, 0).unwrap();
    assert!(!step(&g, &s, Action::Right).changed);
}

#[test]
fn chain_of_pushes_commits_in_fixpoint() {
    let g = sokoban(&format!("{PUSH}\n[ > Crate | Crate ] -> [ > Crate | > Crate ]"), "P***.O");
    let s = run(&g, 0, &[Action::Right]);
    assert_eq!(rows(&g, &s), vec![".P***O"]);
}

fn converge_game(level: &str, rule: &str) -> CompiledGame {
    compile_source(&source(
        &["Background black", "Player blue", "Red red", "Blue blue"],
        &[". = Background", "P = Player", "R = Red", "B = Blue"],
        &["Background", "Player", "Red, Blue"],
        rule,
        "no Player",
        level,
    ))
}

#[test]
fn contested_destination_goes_to_row_major_first() {
    let rule = "[ > Player ] [ stationary Red ] [ stationary Blue ] -> [ > Player ] [ right Red ] [ left Blue ]";
    let g = converge_game("R.B\nP..", rule);
    let s = run(&g, 0, &[Action::Right]);
    assert_eq!(rows(&g, &s), vec![".RB", ".P."]);

    let rule = "[ > Player ] [ stationary Red ] [ stationary Blue ] -> [ > Player ] [ left Red ] [ right Blue ]";
    let g = converge_game("B.R\nP..", rule);
    let s = run(&g, 0, &[Action::Right]);
    assert_eq!(rows(&g, &s), vec![".BR", ".P."]);

    let rule = "[ > Player ] [ stationary Red ] [ stationary Blue ] -> [ > Player ] [ down Red ] [ up Blue ]";
    let g = converge_game("R.\n..\nB.\n.P", rule);
    let s = run(&g, 0, &[Action::Left]);
    assert_eq!(rows(&g, &s), vec!["..", "R.", "B.", "P."]);
}

#[test]
fn property_match_preserves_identity() {
    let src = source(
        &["Background black", "Player blue", "Crate orange", "Ball green"],
        &[". = Background", "P = Player", "C = Crate", "B = Ball", "Pushable = Crate or Ball"],
        &["Background", "Player, Crate, Ball"],
        "[ > Player | Pushable ] -> [ > Player | > Pushable ]",
        "no Player",
        "PB.\nPC.",
    );
    let g = compile_source(&src);
    let s = run(&g, 0, &[Action::Right]);
    assert_eq!(rows(&g, &s), vec![".PB", ".PC"]);
}

#[test]
fn aggregate_glyph_places_both_objects() {
    let g = sokoban("", "P@");
    let s = init_state(&g, 0).unwrap();
    let names: Vec<&str> = s.objects_in(1).map(|o| g.object(o).name.as_str()).collect();
    assert_eq!(names, vec!["Background", "Target", "Crate"]);
}

#[test]
fn init_state_reencodes_to_source_level() {
    let level = "#####\n#P*O#\n#.@.#\n#####";
    let g = sokoban(PUSH, level);
    let s = init_state(&g, 0).unwrap();
    assert_eq!(rows(&g, &s).join("\n"), level);
}

#[test]
fn init_state_rejects_bad_indices() {
    let src = sokoban("", "P.\n\nmessage hi\n\nP.");
    assert!(matches!(init_state(&src, 1), Err(InitError::MessageLevel(1))));
    assert!(matches!(init_state(&src, 9), Err(InitError::OutOfRange { .. })));
}

#[test]
fn win_conditions() {
    let all_target_on_crate = sokoban("", "P*");
    let s = init_state(&all_target_on_crate, 0).unwrap();
    assert!(check_win(&all_target_on_crate, &s), "vacuous with no targets");

    let src = source(
        &["Background black", "Player blue", "Crate orange", "Target red"],
        &[". = Background", "P = Player", "* = Crate", "O = Target", "@ = Crate and Target"],
        &["Background", "Target", "Player, Crate"],
        "",
        "no Crate on Target",
        "P@\n\nP*O",
    );
    let g = compile_source(&src);
    assert!(!check_win(&g, &init_state(&g, 0).unwrap()));
    assert!(check_win(&g, &init_state(&g, 1).unwrap()));

    let src = src.replace("no Crate on Target", "some Crate");
    let g = compile_source(&src);
    assert!(check_win(&g, &init_state(&g, 1).unwrap()));

    let src = src.replace("some Crate", "");
    let g = compile_source(&src);
    assert!(!check_win(&g, &init_state(&g, 1).unwrap()));
}

#[test]
fn hash_distinguishes_cells() {
    let g = sokoban("", "P..");
    let a = init_state(&g, 0).unwrap();
    let b = step(&g, &a, Action::Right).state;
    assert_ne!(hash_state(&a), hash_state(&b));
    assert_eq!(hash_state(&a), hash_state(&a.clone()));
}

#[test]
fn cancel_restores_pre_turn_state() {
    let g = sokoban(&format!("{PUSH}\n[ > Crate | Wall ] -> cancel"), "P*#\n...");
    let s = init_state(&g, 0).unwrap();
    let out = step(&g, &s, Action::Right);
    assert!(out.events.contains(&TurnEvent::Cancelled));
    assert!(!out.changed);
    assert_eq!(hash_state(&out.state), hash_state(&s));
}

#[test]
fn win_command_wins() {
    let g = sokoban("[ > Player | Wall ] -> win", "P#*O");
    let out = step(&g, &init_state(&g, 0).unwrap(), Action::Right);
    assert!(out.won());
    assert_eq!(out.state.status, Status::Won);
    assert!(out.changed);
}

#[test]
fn messages_are_reported() {
    let g = sokoban("[ > Player | Wall ] -> message ouch", "P#*O");
    let out = step(&g, &init_state(&g, 0).unwrap(), Action::Right);
    assert_eq!(out.events, vec![TurnEvent::Message("ouch".into())]);
}

#[test]
fn again_repeats_until_stable() {
    // Each crate slides one cell per turn while it has room.
    let src = source(
        &["Background black", "Player blue", "Crate orange", "Wall grey"],
        &[". = Background", "P = Player", "* = Crate", "# = Wall"],
        &["Background", "Player, Crate, Wall"],
        "right [ stationary Crate | no Wall ] -> [ > Crate | ] again",
        "no Player",
        "*...#\nP....",
    );
    let g = compile_source(&src);
    let out = step(&g, &init_state(&g, 0).unwrap(), Action::Up);
    // The crate moves one cell per repetition; the player follows into the
    // cell it vacated on the first pass.
    assert_eq!(rows(&g, &out.state)[0], "P..*#");
    assert!(out.events.iter().any(|e| matches!(e, TurnEvent::AgainRan(n) if *n >= 1)));
}

#[test]
fn rule_loop_is_a_runtime_error() {
    let src = source(
        &["Background black", "Player blue", "Red red", "Blue blue"],
        &[". = Background", "P = Player", "R = Red", "B = Blue"],
        &["Background", "Player", "Red, Blue"],
        "[ Red ] -> [ Blue ]\n[ Blue ] -> [ Red ]",
        "no Player",
        "PR",
    );
    let g = compile_source(&src);
    let s = init_state(&g, 0).unwrap();
    let out = step(&g, &s, Action::Right);
    assert_eq!(out.error.as_ref().unwrap().code, codes::RULE_LOOP_DETECTED);
    assert!(out.events.contains(&TurnEvent::Cancelled));
    assert_eq!(out.state, s);
}

#[test]
fn checkpoint_and_restart() {
    let src = source(
        &["Background black", "Player blue", "Flag green", "Trap red"],
        &[". = Background", "P = Player", "F = Flag", "T = Trap"],
        &["Background", "Flag, Trap", "Player"],
        "late [ Player Flag ] -> [ Player ] checkpoint\nlate [ Player Trap ] -> restart",
        "no Player",
        "PF.T",
    );
    let g = compile_source(&src);
    let s = init_state(&g, 0).unwrap();
    let out = step(&g, &s, Action::Right);
    assert!(out.events.contains(&TurnEvent::CheckpointSet));
    let s = step(&g, &out.state, Action::Right).state;
    let out = step(&g, &s, Action::Right);
    assert!(out.events.contains(&TurnEvent::Restarted));
    assert_eq!(rows(&g, &out.state), vec![".P.T"]);
}

#[test]
fn run_rules_on_level_start() {
    let src = sokoban("[ Crate ] -> [ ]", "P*").objects.len();
    assert!(src > 0);
    let text = source(
        &["Background black", "Player blue", "Crate orange"],
        &[". = Background", "P = Player", "* = Crate"],
        &["Background", "Player, Crate"],
        "[ Crate ] -> [ ]",
        "no Crate",
        "P*",
    )
    .replace("title Test\n", "title Test\nrun_rules_on_level_start\n");
    let g = compile_source(&text);
    let s = init_state(&g, 0).unwrap();
    assert_eq!(s.status, Status::Won);
}

#[test]
fn random_rules_are_seed_deterministic() {
    let src = source(
        &["Background black", "Player blue", "Coin yellow"],
        &[". = Background", "P = Player", "C = Coin"],
        &["Background", "Player", "Coin"],
        "random [ action Player ] [ no Coin ] -> [ Player ] [ Coin ]",
        "no Player",
        "P....\n.....",
    );
    let g = compile_source(&src);
    let mut a = init_state(&g, 0).unwrap();
    a.rng_seed = 7;
    let x = step(&g, &a, Action::Act);
    let y = step(&g, &a, Action::Act);
    assert_eq!(x, y);
    assert_ne!(x.state.rng_seed, 7);
    assert_eq!(x.state.count(2), 1);
}

#[test]
fn ellipsis_takes_nearest_match() {
    let src = source(
        &["Background black", "Player blue", "Crate orange", "Wall grey"],
        &[". = Background", "P = Player", "* = Crate", "# = Wall"],
        &["Background", "Player, Crate, Wall"],
        "[ > Player | ... | Crate ] -> [ Player | ... | Wall ]",
        "no Player",
        "P.*.*",
    );
    let g = compile_source(&src);
    let s = run(&g, 0, &[Action::Right]);
    assert_eq!(rows(&g, &s), vec!["P.#.*"]);
}

#[test]
fn noaction_ignores_act() {
    let text = source(
        &["Background black", "Player blue", "Crate orange"],
        &[". = Background", "P = Player", "* = Crate"],
        &["Background", "Player, Crate"],
        "[ action Player | Crate ] -> [ Player | ]",
        "no Crate",
        "P*",
    );
    let g = compile_source(&text);
    assert!(step(&g, &init_state(&g, 0).unwrap(), Action::Act).changed);
    let g = compile_source(&text.replace("title Test\n", "title Test\nnoaction\n"));
    assert!(!step(&g, &init_state(&g, 0).unwrap(), Action::Act).changed);
}

#[test]
fn session_undo_and_restart() {
    let g = sokoban(PUSH, "P*.O");
    let mut session = PlaySession::new(&g, 0).unwrap();
    let start = session.state().clone();
    session.apply(Action::Right);
    assert_eq!(session.moves(), 1);
    session.apply(Action::Left);
    assert!(session.undo());
    assert!(session.undo());
    assert_eq!(session.state(), &start);
    assert!(!session.undo());
    session.apply(Action::Right);
    session.restart();
    assert_eq!(session.state(), &start);
    session.apply(Action::Right);
    session.apply(Action::Right);
    assert!(session.is_won());
    assert_eq!(session.next_level(), None);
}

