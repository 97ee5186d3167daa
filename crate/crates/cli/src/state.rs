//! The state directory: `config.json` plus `journal.jsonl`, one line per
//! state-changing command. Every invocation replays the journal into a
//! fresh system, so the holarchy survives between runs without a daemon.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use hamlet_core::frontend::parse_query;
use hamlet_core::protocol::Config;
use hamlet_core::session::{ResourceFile, Session};
use serde::{Deserialize, Serialize};

use crate::Fail;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Entry {
    Add(ResourceFile),
    /// Raw training query text, already validated once.
    Train(String),
}

pub struct State {
    dir: PathBuf,
}

impl State {
    pub fn new(dir: &Path) -> State {
        State { dir: dir.to_path_buf() }
    }

    fn config_path(&self) -> PathBuf {
        self.dir.join("config.json")
    }

    fn journal_path(&self) -> PathBuf {
        self.dir.join("journal.jsonl")
    }

    /// Stored config, or the defaults when the directory is fresh.
    pub fn config(&self) -> Result<Config, Fail> {
        match fs::read_to_string(self.config_path()) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| Fail::config(format!("{}: {e}", self.config_path().display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Config::default()),
            Err(e) => Err(Fail::config(format!("{}: {e}", self.config_path().display()))),
        }
    }

    /// Writes `config` and starts an empty journal.
    pub fn reset(&self, config: &Config) -> anyhow::Result<()> {
        fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        fs::write(self.config_path(), serde_json::to_string_pretty(config)? + "\n")?;
        fs::write(self.journal_path(), "")?;
        Ok(())
    }

    pub fn entries(&self) -> Result<Vec<Entry>, Fail> {
        let text = match fs::read_to_string(self.journal_path()) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Fail::config(format!("{}: {e}", self.journal_path().display()))),
        };
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| Fail::config(format!("{} line {}: {e}", self.journal_path().display(), i + 1))))
            .collect()
    }

    pub fn append(&self, entry: &Entry) -> anyhow::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let mut f = OpenOptions::new().create(true).append(true).open(self.journal_path())?;
        writeln!(f, "{}", serde_json::to_string(entry)?)?;
        Ok(())
    }

    /// Replays every entry; their reports are dropped.
    pub fn replay(&self, session: &mut Session) -> Result<(), Fail> {
        for entry in self.entries()? {
            match entry {
                Entry::Add(file) => {
                    session.submit_add(None, &file).map_err(Fail::from)?;
                }
                Entry::Train(text) => {
                    let q = parse_query(&text, session.system().registry()).map_err(|d| Fail::from(hamlet_core::session::SessionError::Query(d)))?;
                    session.submit_query(&q, false).map_err(Fail::from)?;
                }
            }
            session.run().map_err(Fail::from)?;
        }
        session.system_mut().take_log();
        Ok(())
    }
}
