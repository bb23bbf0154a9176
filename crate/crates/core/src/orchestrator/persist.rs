//! Trial directories: `<root>/<timestamp>-<seed>/`.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::diagnostic::render;

use super::{LlmResponse, TrialRecord};

pub const SUMMARY_FILE: &str = "summary.json";
pub const SESSION_FILE: &str = "session.jsonl";

fn to_json<T: serde::Serialize>(value: &T) -> io::Result<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    Ok(text)
}

/// Claims a fresh directory; concurrent trials with the same name get a
/// numeric suffix.
fn create_unique_dir(root: &Path, name: &str) -> io::Result<PathBuf> {
    fs::create_dir_all(root)?;
    for attempt in 1.. {
        let candidate = if attempt == 1 {
            root.join(name)
        } else {
            root.join(format!("{name}-{attempt}"))
        };
        match fs::create_dir(&candidate) {
            Ok(()) => return Ok(candidate),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e),
        }
    }
    unreachable!("the attempt counter is unbounded")
}

pub fn persist_trial(root: &Path, record: &TrialRecord, session: &[LlmResponse]) -> io::Result<PathBuf> {
    let stamp = chrono::DateTime::parse_from_rfc3339(&record.started_at)
        .map(|t| t.format("%Y%m%dT%H%M%S%3f").to_string())
        .unwrap_or_else(|_| "undated".into());
    let dir = create_unique_dir(root, &format!("{stamp}-{}", record.config.rng_seed))?;

    fs::write(dir.join("config.json"), to_json(&record.config)?)?;
    fs::write(dir.join("system.txt"), &record.system_text)?;
    for it in &record.iterations {
        let k = it.index;
        fs::write(dir.join(format!("prompt-{k}.txt")), &it.prompt)?;
        fs::write(dir.join(format!("response-{k}.txt")), &it.raw_response)?;
        if let Some(source) = it.game_source() {
            fs::write(dir.join(format!("game-{k}.txt")), source.content())?;
        }
        let mut diagnostics = render(&it.syntax_diagnostics);
        diagnostics.push_str(&render(&it.compile_diagnostics));
        fs::write(dir.join(format!("diagnostics-{k}.txt")), diagnostics)?;
        fs::write(dir.join(format!("eval-{k}.json")), to_json(&it.eval)?)?;
    }

    let mut file = fs::File::create(dir.join(SESSION_FILE))?;
    for response in session {
        let line = serde_json::to_string(response).map_err(io::Error::other)?;
        writeln!(file, "{line}")?;
    }
    // written last so a directory with a summary is complete
    fs::write(dir.join(SUMMARY_FILE), to_json(record)?)?;
    Ok(dir)
}

pub fn load_trial_record(dir: &Path) -> io::Result<TrialRecord> {
    let text = fs::read_to_string(dir.join(SUMMARY_FILE))?;
    serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

/// `path` itself when it holds a summary, otherwise its immediate
/// subdirectories that do, sorted.
pub fn find_trial_dirs(path: &Path) -> io::Result<Vec<PathBuf>> {
    if path.join(SUMMARY_FILE).is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut dirs = Vec::new();
    for entry in fs::read_dir(path)? {
        let entry = entry?.path();
        if entry.join(SUMMARY_FILE).is_file() {
            dirs.push(entry);
        }
    }
    dirs.sort();
    Ok(dirs)
}
