use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn game(name: &str) -> PathBuf {
    fixtures().join("games").join(format!("{name}.txt"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psforge"))
        .args(args)
        .current_dir(dir)
        .stdin(Stdio::null())
        .env_remove("PSFORGE_API_KEY")
        .output()
        .expect("run psforge")
}

fn run(args: &[&str]) -> Output {
    run_in(Path::new(env!("CARGO_MANIFEST_DIR")), args)
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn corridor_with(from: &str, to: &str) -> String {
    let text = std::fs::read_to_string(game("corridor")).unwrap();
    assert!(text.contains(from));
    text.replacen(from, to, 1)
}

#[test]
fn help_and_unknown_commands() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["solve"])), 2);
    assert_eq!(code(&run(&["solve", "/no/such/file.txt"])), 2);
}

#[test]
fn parse_reports_syntax_errors() {
    let ok = run(&["parse", p(&game("corridor"))]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));

    let ragged = fixtures().join("repair/ragged_level.txt");
    let bad = run(&["parse", p(&ragged)]);
    assert_eq!(code(&bad), 1);
    assert!(stdout(&bad).contains("[RAGGED_LEVEL]"), "{}", stdout(&bad));

    let json = run(&["parse", "--json", p(&ragged)]);
    let diagnostics: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(diagnostics[0]["code"], "RAGGED_LEVEL");
}

#[test]
fn parse_repair_prints_fixed_source() {
    let dir = TempDir::new().unwrap();
    let out = run(&["parse", "--repair", p(&fixtures().join("repair/ragged_level.txt"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("repair:"));
    let fixed = dir.path().join("fixed.txt");
    std::fs::write(&fixed, &out.stdout).unwrap();
    assert_eq!(code(&run(&["parse", p(&fixed)])), 0);
}

#[test]
fn compile_errors_and_warnings() {
    let dir = TempDir::new().unwrap();
    let no_layer = dir.path().join("no_layer.txt");
    std::fs::write(&no_layer, corridor_with("Target\nPlayer\n\n=====", "Player\n\n=====")).unwrap();
    let out = run(&["compile", p(&no_layer)]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("[OBJECT_IN_NO_LAYER]"), "{}", stdout(&out));

    let unused = dir.path().join("unused.txt");
    std::fs::write(
        &unused,
        corridor_with("Player\nblue", "Wall\ngray\n\nPlayer\nblue").replacen("Target\nPlayer\n\n", "Target, Wall\nPlayer\n\n", 1),
    )
    .unwrap();
    let out = run(&["compile", "--json", p(&unused)]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let diagnostics: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let warning = diagnostics
        .as_array()
        .unwrap()
        .iter()
        .find(|d| d["code"] == "UNUSED_OBJECT")
        .expect("unused object warning");
    assert_eq!(warning["severity"], "warning");
}

#[test]
fn solve_prints_the_solution() {
    let out = run(&["solve", p(&game("corridor"))]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("level 0: solved, length 4"), "{text}");
    assert!(text.contains("solution: RRRR"), "{text}");

    let json = run(&["solve", "--json", p(&game("micro_sokoban")), "--level", "all"]);
    assert_eq!(code(&json), 0);
    let reports: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    let lengths: Vec<u64> = reports
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["result"]["solution_length"].as_u64().unwrap())
        .collect();
    assert_eq!(lengths, [4, 9, 13]);
}

#[test]
fn solve_failure_and_bad_levels() {
    let out = run(&["solve", "--budget", "1", p(&game("corridor"))]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("budget_exceeded"));

    let unsolvable = run(&["solve", p(&game("sealed_room"))]);
    assert_eq!(code(&unsolvable), 1);

    let dir = TempDir::new().unwrap();
    let with_message = dir.path().join("message.txt");
    std::fs::write(&with_message, corridor_with("P...T", "message hello\n\nP...T")).unwrap();
    assert_eq!(code(&run(&["solve", "--level", "1", p(&with_message)])), 0);
    let out = run(&["solve", "--level", "0", p(&with_message)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("message"));
    assert_eq!(code(&run(&["solve", "--level", "9", p(&with_message)])), 2);
    assert_eq!(code(&run(&["solve", "--level", "first", p(&with_message)])), 2);
}

#[test]
fn solve_rejects_games_that_do_not_compile() {
    let out = run(&["solve", p(&fixtures().join("repair/prose_only.txt"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("does not compile"));
}

#[test]
fn play_replays_action_files() {
    let dir = TempDir::new().unwrap();
    let moves = dir.path().join("moves.txt");
    std::fs::write(&moves, "RRRR\n").unwrap();
    let record = dir.path().join("record.txt");
    let out = run(&["play", p(&game("corridor")), "--replay", p(&moves), "--record", p(&record)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("level 0 won in 4 moves"), "{}", stdout(&out));
    assert_eq!(std::fs::read_to_string(&record).unwrap().trim(), "RRRR");

    std::fs::write(&moves, "RRL").unwrap();
    let out = run(&["play", p(&game("corridor")), "--replay", p(&moves)]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("not won"));

    std::fs::write(&moves, "R?R").unwrap();
    assert_eq!(code(&run(&["play", p(&game("corridor")), "--replay", p(&moves)])), 2);
}

#[test]
fn play_needs_a_terminal() {
    let out = run(&["play", p(&game("corridor"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--replay"));
}

fn mock_script(dir: &Path, replies: &[String]) -> PathBuf {
    let path = dir.join("mock.txt");
    std::fs::write(&path, replies.join("\n%%%\n")).unwrap();
    path
}

fn fenced(name: &str) -> String {
    format!("```\n{}\n```", std::fs::read_to_string(game(name)).unwrap())
}

fn trial_dirs(root: &Path) -> Vec<PathBuf> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.join("summary.json").is_file())
        .collect();
    dirs.sort();
    dirs
}

#[test]
fn generate_argument_errors() {
    let dir = TempDir::new().unwrap();
    let mock = mock_script(dir.path(), &["nothing".into()]);
    let backend = format!("--backend=mock:{}", p(&mock));
    assert_eq!(code(&run_in(dir.path(), &["generate", "--trials", "0", &backend])), 2);
    assert_eq!(code(&run_in(dir.path(), &["generate", "--fewshot", &backend])), 2);
    assert_eq!(code(&run_in(dir.path(), &["generate", "--backend", "carrier-pigeon"])), 2);
    assert_eq!(code(&run_in(dir.path(), &["generate", "--backend", "replay:/no/such.jsonl"])), 2);
    let session = dir.path().join("s.jsonl");
    std::fs::write(&session, "\"hi\"\n").unwrap();
    let replay = format!("--backend=replay:{}", p(&session));
    assert_eq!(code(&run_in(dir.path(), &["generate", &replay, "--jobs", "2"])), 2);
}

#[test]
fn generate_with_a_mock_backend() {
    let dir = TempDir::new().unwrap();
    let mock = mock_script(dir.path(), &["I cannot help with that.".into(), fenced("long_push")]);
    let backend = format!("--backend=mock:{}", p(&mock));
    let out = run_in(dir.path(), &["generate", &backend, "--trials", "2", "--out", "runs"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("trial 1 (seed 0): success at iteration 2"), "{text}");
    assert!(text.contains("trial 2 (seed 1): success at iteration 2"), "{text}");
    let dirs = trial_dirs(&dir.path().join("runs"));
    assert_eq!(dirs.len(), 2);
    for file in ["config.json", "system.txt", "prompt-1.txt", "response-2.txt", "game-2.txt", "session.jsonl"] {
        assert!(dirs[0].join(file).is_file(), "{file}");
    }
    assert!(!dirs[0].join("game-1.txt").exists());
}

#[test]
fn generate_fails_when_no_trial_succeeds() {
    let dir = TempDir::new().unwrap();
    let mock = mock_script(dir.path(), &["Just prose.".into()]);
    let backend = format!("--backend=mock:{}", p(&mock));
    let out = run_in(dir.path(), &["generate", &backend, "--max-iterations", "3", "--out", "runs"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("failed after 3 iterations"), "{}", stdout(&out));
}

#[test]
fn generate_with_fewshot_corpus() {
    let dir = TempDir::new().unwrap();
    let mock = mock_script(dir.path(), &[fenced("long_pair")]);
    let backend = format!("--backend=mock:{}", p(&mock));
    let corpus = fixtures().join("corpus");
    let out = run_in(
        dir.path(),
        &["generate", &backend, "--fewshot", "--corpus", p(&corpus), "--context-budget", "30000", "--out", "runs", "--seed", "42"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let run = &trial_dirs(&dir.path().join("runs"))[0];
    let system = std::fs::read_to_string(run.join("system.txt")).unwrap();
    assert!(system.contains("=== example: quarry ==="));
    assert!(!system.contains("=== example: harbour ==="));
}

fn summary_without_timestamps(dir: &Path) -> serde_json::Value {
    let mut value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    let object = value.as_object_mut().unwrap();
    object.remove("started_at");
    object.remove("finished_at");
    value
}

#[test]
fn replay_reproduces_a_trial() {
    let dir = TempDir::new().unwrap();
    let mock = mock_script(dir.path(), &["```\nnot a game\n```".into(), fenced("short_push"), fenced("long_push")]);
    let backend = format!("--backend=mock:{}", p(&mock));
    let out = run_in(dir.path(), &["generate", &backend, "--cot", "--brainstorm", "--out", "first"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let first = &trial_dirs(&dir.path().join("first"))[0];

    let replay = format!("--backend=replay:{}", p(&first.join("session.jsonl")));
    let out = run_in(dir.path(), &["generate", &replay, "--cot", "--brainstorm", "--out", "second"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let second = &trial_dirs(&dir.path().join("second"))[0];
    assert!(stdout(&out).contains("success at iteration 2"));

    assert_eq!(summary_without_timestamps(first), summary_without_timestamps(second));
    for file in ["system.txt", "prompt-2.txt", "eval-1.json", "eval-2.json"] {
        assert_eq!(std::fs::read(first.join(file)).unwrap(), std::fs::read(second.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn report_groups_saved_trials() {
    let dir = TempDir::new().unwrap();
    let good = mock_script(dir.path(), &[fenced("long_pair")]);
    let good = format!("--backend=mock:{}", p(&good));
    assert_eq!(code(&run_in(dir.path(), &["generate", &good, "--out", "runs", "--trials", "3"])), 0);
    assert_eq!(code(&run_in(dir.path(), &["generate", &good, "--out", "runs", "--cot"])), 0);
    std::fs::write(dir.path().join("bad.txt"), "prose").unwrap();
    assert_eq!(
        code(&run_in(dir.path(), &["generate", "--backend=mock:bad.txt", "--out", "runs", "--max-iterations", "1", "--cot"])),
        1
    );

    let out = run_in(dir.path(), &["report", "--trials", "runs", "--group-by", "cot", "--csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let lines: Vec<String> = stdout(&out).lines().map(str::to_string).collect();
    assert_eq!(lines[0], "cot,compiles,any_solvable,all_solvable,sol_complexity");
    assert!(lines[1].starts_with("F,100%,100%,100%,"), "{}", lines[1]);
    assert!(lines[2].starts_with("T,50%,50%,50%,"), "{}", lines[2]);

    let table = run_in(dir.path(), &["report", "--trials", "runs"]);
    assert!(stdout(&table).contains("Sol. Complexity"));
    assert_eq!(code(&run_in(dir.path(), &["report", "--trials", "runs", "--group-by", "colour"])), 2);
    std::fs::create_dir(dir.path().join("empty")).unwrap();
    assert_eq!(code(&run_in(dir.path(), &["report", "--trials", "empty"])), 2);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("psforge.conf");
    std::fs::write(&config, "# tight search\nbudget = 1\nunrelated-key = 3\napi_key = secret\n").unwrap();
    let corridor = game("corridor");

    let out = run(&["--config", p(&config), "solve", p(&corridor)]);
    assert_eq!(code(&out), 1, "{}", stdout(&out));
    let out = run(&["--config", p(&config), "solve", "--budget", "100", p(&corridor)]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let out = run(&["solve", p(&corridor), "--budget=100", &format!("--config={}", p(&config)), "-vv"]);
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("unrelated_key"));
    assert!(!stderr(&out).contains("secret"));

    std::fs::write(&config, "this line has no equals sign\n").unwrap();
    assert_eq!(code(&run(&["--config", p(&config), "solve", p(&corridor)])), 2);
    assert_eq!(code(&run(&["--config", "/no/such.conf", "solve", p(&corridor)])), 2);
}
