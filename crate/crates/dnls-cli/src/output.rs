//! Output emission: CSV tables, JSON reports, and the run manifest.
//!
//! Floats are serialized with Rust's shortest round-trip formatting, so a
//! given run configuration produces byte-identical files on any IEEE-754
//! binary64 platform regardless of worker count.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub struct OutputWriter {
    dir: PathBuf,
    csv_on: bool,
    json_on: bool,
    started: Instant,
    hashes: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a RunConfig,
    versions: BTreeMap<&'static str, &'static str>,
    timing_seconds: f64,
    output_hashes: &'a BTreeMap<String, String>,
}

impl OutputWriter {
    pub fn create(cfg: &RunConfig) -> Result<Self, CliError> {
        let dir = cfg.output.directory.clone();
        fs::create_dir_all(&dir).map_err(|e| {
            CliError::config("output.directory", format!("cannot create {}: {e}", dir.display()))
        })?;
        Ok(Self {
            dir,
            csv_on: cfg.output.formats.iter().any(|f| f == "csv"),
            json_on: cfg.output.formats.iter().any(|f| f == "json"),
            started: Instant::now(),
            hashes: BTreeMap::new(),
        })
    }

    fn put(&mut self, name: &str, content: &[u8]) -> Result<(), CliError> {
        fs::write(self.dir.join(name), content)
            .map_err(|e| CliError::config("output.directory", format!("cannot write {name}: {e}")))?;
        self.hashes.insert(name.into(), hex::encode(Sha256::digest(content)));
        Ok(())
    }

    /// Writes `name` with the given header and preformatted rows.
    pub fn csv(&mut self, name: &str, header: &str, rows: &[String]) -> Result<(), CliError> {
        if !self.csv_on {
            return Ok(());
        }
        let mut content = String::with_capacity(header.len() + rows.iter().map(|r| r.len() + 1).sum::<usize>() + 1);
        content.push_str(header);
        content.push('\n');
        for row in rows {
            content.push_str(row);
            content.push('\n');
        }
        self.put(name, content.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        if !self.json_on {
            return Ok(());
        }
        let mut content = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::config("output", format!("cannot serialize {name}: {e}")))?;
        content.push('\n');
        self.put(name, content.as_bytes())
    }

    /// Always written, last: the config echo, library versions, wall-clock
    /// time, and a content hash of every emitted file.
    pub fn manifest(&self, cfg: &RunConfig) -> Result<(), CliError> {
        let mut versions = BTreeMap::new();
        versions.insert("dnls-cli", env!("CARGO_PKG_VERSION"));
        versions.insert("dnls-core", dnls_core::VERSION);
        let manifest = Manifest {
            config: cfg,
            versions,
            timing_seconds: self.started.elapsed().as_secs_f64(),
            output_hashes: &self.hashes,
        };
        let mut content = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::config("output", format!("cannot serialize manifest: {e}")))?;
        content.push('\n');
        fs::write(self.dir.join("manifest.json"), content)
            .map_err(|e| CliError::config("output.directory", format!("cannot write manifest.json: {e}")))
    }
}
