//! `key = value` configuration files that mirror the command-line flags.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context};
use clap::{ArgAction, Command};

/// Keys that are read from the file but are not flags.
pub const FILE_ONLY_KEYS: [&str; 1] = ["api_key"];

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

impl ConfigFile {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`", n + 1);
            };
            let value = value.trim().trim_matches('"').to_string();
            values.insert(normalize(key), value);
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config file {}", path.display()))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(&normalize(key)).map(String::as_str)
    }

    /// Appends `--flag value` for every key the subcommand (or the global
    /// options) accepts and `argv` does not already set. Also returns the
    /// keys that matched no flag.
    pub fn inject(&self, argv: &[OsString], command: &Command, subcommand: &str) -> (Vec<OsString>, Vec<String>) {
        let mut out = argv.to_vec();
        let sub = command.find_subcommand(subcommand);
        let args = command
            .get_arguments()
            .chain(sub.into_iter().flat_map(|s| s.get_arguments()));
        let given = |long: &str| {
            argv.iter().any(|a| {
                let a = a.to_string_lossy();
                a == format!("--{long}") || a.starts_with(&format!("--{long}="))
            })
        };
        let mut used = Vec::new();
        for arg in args {
            let Some(long) = arg.get_long() else {
                continue;
            };
            let key = normalize(long);
            let Some(value) = self.values.get(&key) else {
                continue;
            };
            used.push(key);
            if long == "config" || given(long) {
                continue;
            }
            match arg.get_action() {
                ArgAction::Count => {
                    let n: usize = value.parse().unwrap_or(0);
                    out.extend((0..n).map(|_| OsString::from(format!("--{long}"))));
                }
                ArgAction::SetTrue => {
                    if matches!(value.as_str(), "true" | "1" | "yes") {
                        out.push(format!("--{long}").into());
                    }
                }
                ArgAction::Append => {
                    for part in value.split_whitespace() {
                        out.push(format!("--{long}={part}").into());
                    }
                }
                _ => out.push(format!("--{long}={value}").into()),
            }
        }
        let unused = self
            .values
            .keys()
            .filter(|k| !used.contains(k) && !FILE_ONLY_KEYS.contains(&k.as_str()))
            .cloned()
            .collect();
        (out, unused)
    }
}
