//! Terminal play and headless replay of action-letter files.

use std::io::{IsTerminal, Write};
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use crossterm::event::{self, Event, KeyCode, KeyEvent, KeyEventKind, KeyModifiers};
use crossterm::{cursor, execute, terminal};
use psforge_core::compiler::CompiledLevel;
use psforge_core::engine::{actions_from_letters, actions_to_letters, render_rows, PlaySession, TurnEvent};
use psforge_core::{Action, CompiledGame};

use crate::{load_game, FAILED, USAGE};

#[derive(Debug, Args)]
pub struct PlayArgs {
    file: PathBuf,
    /// Level to start on; defaults to the first playable level
    #[arg(long)]
    level: Option<usize>,
    /// Apply the action letters in FILE instead of reading the keyboard
    #[arg(long, value_name = "FILE")]
    replay: Option<PathBuf>,
    /// Write the inputs that led to the final position to FILE
    #[arg(long, value_name = "FILE")]
    record: Option<PathBuf>,
}

/// Inputs per level, net of undo and restart, so replaying them from the
/// start reproduces the play-through.
#[derive(Default)]
struct Recorder {
    finished: Vec<Action>,
    current: Vec<Action>,
    /// `current` before each undoable change on this level.
    snapshots: Vec<Vec<Action>>,
}

impl Recorder {
    fn push(&mut self, action: Action) {
        self.snapshots.push(self.current.clone());
        self.current.push(action);
    }

    /// A restart lands on the level start or a checkpoint; the inputs to
    /// a checkpoint are not tracked, so they are dropped either way.
    fn restart(&mut self) {
        self.snapshots.push(std::mem::take(&mut self.current));
    }

    fn undo(&mut self) {
        if let Some(previous) = self.snapshots.pop() {
            self.current = previous;
        }
    }

    fn letters(&self) -> String {
        let mut all = self.finished.clone();
        all.extend(&self.current);
        actions_to_letters(&all)
    }

    fn level_done(&mut self) {
        self.finished.append(&mut self.current);
        self.snapshots.clear();
    }
}

fn start_level(game: &CompiledGame, requested: Option<usize>) -> anyhow::Result<usize> {
    match requested {
        Some(index) => match game.levels.get(index) {
            None => bail!("level {index} does not exist ({} levels)", game.levels.len()),
            Some(CompiledLevel::Message(_)) => bail!("level {index} is a message, not a playable level"),
            Some(CompiledLevel::Grid(_)) => Ok(index),
        },
        None => game
            .levels
            .iter()
            .position(|l| matches!(l, CompiledLevel::Grid(_)))
            .context("the game has no playable levels"),
    }
}

pub fn cmd_play(args: &PlayArgs, seed: u64) -> anyhow::Result<u8> {
    let game = load_game(&args.file)?;
    let level = start_level(&game, args.level)?;
    let mut session = PlaySession::with_seed(&game, level, seed).map_err(|e| anyhow::anyhow!("{e}"))?;
    let mut recorder = Recorder::default();

    let code = match &args.replay {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            let actions = actions_from_letters(&text)
                .map_err(|c| anyhow::anyhow!("{}: `{c}` is not an action letter", path.display()))?;
            replay(&mut session, &actions, &mut recorder)
        }
        None => {
            if !std::io::stdin().is_terminal() || !std::io::stdout().is_terminal() {
                eprintln!("error: play needs an interactive terminal; use --replay FILE for scripted input");
                return Ok(USAGE);
            }
            interactive(&mut session, &mut recorder)?
        }
    };

    if let Some(path) = &args.record {
        std::fs::write(path, recorder.letters() + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(code)
}

fn print_board(session: &PlaySession<'_>) {
    for row in render_rows(session.game(), session.state()) {
        println!("{row}");
    }
}

fn replay(session: &mut PlaySession<'_>, actions: &[Action], recorder: &mut Recorder) -> u8 {
    let mut any_won = false;
    for &action in actions {
        let outcome = session.apply(action);
        if outcome.changed {
            recorder.push(action);
        }
        for event in &outcome.events {
            if let TurnEvent::Message(text) = event {
                println!("message: {text}");
            }
        }
        if session.is_won() {
            any_won = true;
            recorder.level_done();
            println!("level {} won in {} moves", session.level_index(), session.moves());
            match session.next_level() {
                Some(messages) => {
                    for text in messages {
                        println!("message: {text}");
                    }
                }
                None => {
                    println!("all levels complete");
                    return 0;
                }
            }
        }
    }
    print_board(session);
    if any_won {
        0
    } else {
        println!("level {} not won after {} moves", session.level_index(), session.moves());
        FAILED
    }
}

/// Restores the terminal even when drawing fails.
struct RawTerminal;

impl RawTerminal {
    fn enter() -> anyhow::Result<Self> {
        terminal::enable_raw_mode()?;
        execute!(std::io::stdout(), terminal::EnterAlternateScreen, cursor::Hide)?;
        Ok(RawTerminal)
    }
}

impl Drop for RawTerminal {
    fn drop(&mut self) {
        let _ = execute!(std::io::stdout(), cursor::Show, terminal::LeaveAlternateScreen);
        let _ = terminal::disable_raw_mode();
    }
}

fn draw(session: &PlaySession<'_>, status: &str) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    execute!(out, terminal::Clear(terminal::ClearType::All), cursor::MoveTo(0, 0))?;
    // raw mode needs explicit carriage returns
    write!(out, "level {}   moves {}\r\n\r\n", session.level_index(), session.moves())?;
    for row in render_rows(session.game(), session.state()) {
        write!(out, "{row}\r\n")?;
    }
    write!(out, "\r\n{status}\r\n")?;
    write!(out, "arrows/WASD move  X action  Z undo  R restart  Q quit\r\n")?;
    out.flush()?;
    Ok(())
}

enum Input {
    Act(Action),
    Undo,
    Restart,
    Quit,
}

fn input(key: KeyEvent) -> Option<Input> {
    if key.modifiers.contains(KeyModifiers::CONTROL) && key.code == KeyCode::Char('c') {
        return Some(Input::Quit);
    }
    Some(match key.code {
        KeyCode::Up | KeyCode::Char('w') | KeyCode::Char('W') => Input::Act(Action::Up),
        KeyCode::Down | KeyCode::Char('s') | KeyCode::Char('S') => Input::Act(Action::Down),
        KeyCode::Left | KeyCode::Char('a') | KeyCode::Char('A') => Input::Act(Action::Left),
        KeyCode::Right | KeyCode::Char('d') | KeyCode::Char('D') => Input::Act(Action::Right),
        KeyCode::Char('x') | KeyCode::Char('X') | KeyCode::Char(' ') | KeyCode::Enter => Input::Act(Action::Act),
        KeyCode::Char('z') | KeyCode::Char('Z') | KeyCode::Backspace => Input::Undo,
        KeyCode::Char('r') | KeyCode::Char('R') => Input::Restart,
        KeyCode::Char('q') | KeyCode::Char('Q') | KeyCode::Esc => Input::Quit,
        _ => return None,
    })
}

fn next_key() -> anyhow::Result<KeyEvent> {
    loop {
        if let Event::Key(key) = event::read()? {
            if key.kind != KeyEventKind::Release {
                return Ok(key);
            }
        }
    }
}

fn interactive(session: &mut PlaySession<'_>, recorder: &mut Recorder) -> anyhow::Result<u8> {
    let mut total_moves = 0;
    let mut won_levels = 0;
    let mut finished = false;
    {
        let _terminal = RawTerminal::enter()?;
        let mut status = String::new();
        loop {
            draw(session, &status)?;
            status.clear();
            let Some(command) = input(next_key()?) else {
                continue;
            };
            match command {
                Input::Quit => break,
                Input::Undo => {
                    if session.undo() {
                        recorder.undo();
                    }
                }
                Input::Restart => {
                    let before = session.state().clone();
                    session.restart();
                    if *session.state() != before {
                        recorder.restart();
                    }
                }
                Input::Act(action) => {
                    let outcome = session.apply(action);
                    if outcome.changed {
                        recorder.push(action);
                    }
                    for event in &outcome.events {
                        if let TurnEvent::Message(text) = event {
                            status = text.clone();
                        }
                    }
                }
            }
            if session.is_won() {
                won_levels += 1;
                total_moves += session.moves();
                recorder.level_done();
                draw(session, &format!("Solved in {} moves! Press any key.", session.moves()))?;
                next_key()?;
                match session.next_level() {
                    Some(messages) => status = messages.join("  "),
                    None => {
                        finished = true;
                        break;
                    }
                }
            }
        }
    }
    if finished {
        println!("You won! {won_levels} levels in {total_moves} moves.");
    } else if won_levels > 0 {
        println!("{won_levels} levels solved in {total_moves} moves.");
    }
    Ok(0)
}
