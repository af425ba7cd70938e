use std::io::Write;
use std::path::Path;

use mdap_core::experiments::fmt_f64;
use mdap_core::{Error, Result};
use serde_json::{json, Value};

use crate::args::Format;
use crate::context::Context;

/// Result of one subcommand.
pub struct Output {
    pub csv: String,
    pub json: Value,
    /// Stdout format when none is requested.
    pub prefer_json: bool,
    /// Failed assertions, one line each.
    pub failures: Vec<String>,
}

impl Output {
    pub fn csv(csv: String, json: Value) -> Self {
        Self { csv, json, prefer_json: false, failures: Vec::new() }
    }

    pub fn json(csv: String, json: Value) -> Self {
        Self { csv, json, prefer_json: true, failures: Vec::new() }
    }

    pub fn fail(&mut self, line: String) {
        self.failures.push(line);
    }
}

/// CSV text with `fmt_f64` floats.
pub struct Table {
    w: csv::Writer<Vec<u8>>,
}

pub enum Cell {
    F(f64),
    U(u64),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::U(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        let _ = w.write_record(header);
        Self { w }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        let text: Vec<String> = cells
            .into_iter()
            .map(|c| match c {
                Cell::F(v) => fmt_f64(v),
                Cell::U(v) => v.to_string(),
                Cell::S(s) => s,
            })
            .collect();
        let _ = self.w.write_record(&text);
    }

    pub fn finish(self) -> String {
        String::from_utf8(self.w.into_inner().unwrap_or_default()).unwrap_or_default()
    }
}

/// `git rev-parse --short HEAD`, or `unknown`.
pub fn git_revision() -> String {
    std::process::Command::new("git")
        .args(["rev-parse", "--short", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_string())
}

/// Writes `out` with its metadata to `path` or stdout. The format follows the
/// file extension, then `format`, then the command's preference.
pub fn emit(ctx: &Context, out: &Output, path: Option<&Path>, format: Option<Format>, wall_time_s: f64) -> Result<()> {
    let json_out = match path {
        Some(p) => p.extension().is_some_and(|e| e == "json"),
        None => format.map_or(out.prefer_json, |f| f == Format::Json),
    };
    let git = git_revision();
    let text = if json_out {
        let doc = json!({
            "meta": {
                "version": env!("CARGO_PKG_VERSION"),
                "command": ctx.command,
                "seed": ctx.seed,
                "threads": ctx.threads,
                "config_sha256": ctx.config_hash,
                "git_rev": git,
                "wall_time_s": wall_time_s,
            },
            "data": out.json,
        });
        let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::NonFinite(e.to_string()))?;
        s.push('\n');
        s
    } else {
        format!(
            "# mdap {}\n# command: {}\n# seed: {}\n# config_sha256: {}\n# git_rev: {}\n# wall_time_s: {}\n{}",
            env!("CARGO_PKG_VERSION"),
            ctx.command,
            ctx.seed,
            ctx.config_hash,
            git,
            fmt_f64(wall_time_s),
            out.csv
        )
    };
    let written = match path {
        Some(p) => std::fs::write(p, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    written.map_err(|e| Error::InvalidArgument(format!("cannot write output: {e}")))
}
