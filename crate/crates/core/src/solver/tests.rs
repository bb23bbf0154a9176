use super::*;
use crate::engine::{actions_from_letters, step};
use crate::testutil::{compile_source, sokoban, source, PUSH};

#[test]
fn corridor_four_rights() {
    let g = sokoban("", "P...O").clone();
    let g2 = compile_source(&source(
        &["Background black", "Player blue", "Target red"],
        &[". = Background", "P = Player", "T = Target"],
        &["Background", "Target", "Player"],
        "",
        "all Player on Target",
        "P...T",
    ));
    let r = bfs_solve(&g2, 0, &SolverConfig::default());
    assert_eq!(r.status, SolveStatus::Solved);
    assert_eq!(r.solution, actions_from_letters("RRRR").unwrap());
    assert_eq!(r.solution_length, 4);
    // Walking right is not a Sokoban solution without a crate.
    assert_eq!(bfs_solve(&g, 0, &SolverConfig::default()).status, SolveStatus::Exhausted);
}

#[test]
fn solved_at_start_costs_one_node() {
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
    let r = bfs_solve(&g, 0, &SolverConfig::default());
    assert_eq!((r.status, r.solution_length, r.nodes_explored), (SolveStatus::Solved, 0, 1));
}

#[test]
fn solution_replays_and_prefixes_do_not_win() {
    let g = sokoban(PUSH, "#####\n#P..#\n#.*.#\n#..O#\n#####");
    let r = bfs_solve(&g, 0, &SolverConfig::default());
    assert!(r.is_solved());
    let mut state = init_state(&g, 0).unwrap();
    for (k, &a) in r.solution.iter().enumerate() {
        assert_eq!(state.status, Status::InProgress, "won early at {k}");
        state = step(&g, &state, a).state;
    }
    assert_eq!(state.status, Status::Won);
}

#[test]
fn budget_is_exact() {
    // The target is walled off, so the 17 floor positions are all reachable
    // and none wins.
    let g = sokoban(PUSH, "P........#\n........#O");
    assert_eq!(bfs_solve(&g, 0, &SolverConfig::default()).nodes_explored, 17);
    for budget in [1, 7, 16] {
        let r = bfs_solve(&g, 0, &SolverConfig::with_budget(budget));
        assert_eq!(r.status, SolveStatus::BudgetExceeded);
        assert_eq!(r.nodes_explored, budget);
    }
}

#[test]
fn random_games_are_not_certified() {
    let g = compile_source(&source(
        &["Background black", "Player blue", "Coin yellow"],
        &[". = Background", "P = Player", "C = Coin"],
        &["Background", "Player", "Coin"],
        "random [ action Player ] [ no Coin ] -> [ Player ] [ Coin ]",
        "no Player",
        "P.",
    ));
    let r = bfs_solve(&g, 0, &SolverConfig::default());
    assert_eq!((r.status, r.nodes_explored), (SolveStatus::Nondeterministic, 0));
}

#[test]
fn rule_loops_are_engine_errors() {
    let g = compile_source(&source(
        &["Background black", "Player blue", "Red red", "Blue blue"],
        &[". = Background", "P = Player", "R = Red", "B = Blue"],
        &["Background", "Player", "Red, Blue"],
        "[ Red ] -> [ Blue ]\n[ Blue ] -> [ Red ]",
        "no Player",
        "PR",
    ));
    let r = bfs_solve(&g, 0, &SolverConfig::default());
    assert_eq!(r.status, SolveStatus::EngineError);
    assert!(r.detail.unwrap().contains("RULE_LOOP_DETECTED"));
}

#[test]
fn all_levels_keep_message_markers() {
    let g = sokoban(PUSH, "P*O\n\nmessage halfway\n\nP.*O");
    let reports = solve_all_levels(&g, &SolverConfig::default());
    assert_eq!(reports.len(), 3);
    assert!(matches!(reports[1], LevelReport::Message { level_index: 1 }));
    let lengths: Vec<usize> = reports.iter().filter_map(|r| r.result()).map(|r| r.solution_length).collect();
    assert_eq!(lengths, vec![1, 2]);

    let empty = sokoban(PUSH, "");
    assert!(solve_all_levels(&empty, &SolverConfig::default()).is_empty());
}

#[test]
fn result_serializes_with_letters() {
    let g = sokoban(PUSH, "P*.O");
    let r = bfs_solve(&g, 0, &SolverConfig::default());
    let json = serde_json::to_string(&r).unwrap();
    assert!(json.contains(r#""solution":"RR""#), "{json}");
    let back: SolveResult = serde_json::from_str(&json).unwrap();
    assert_eq!(back, r);
}
