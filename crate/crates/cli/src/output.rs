use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// A fresh, timestamped directory for one run. Never reuses an existing
/// directory, so earlier results are not overwritten.
pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating output root {}", root.display()))?;
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
        let base = format!("{command}-{stamp}");
        for attempt in 0.. {
            let name = if attempt == 0 { base.clone() } else { format!("{base}-{attempt}") };
            let path = root.join(name);
            match fs::create_dir(&path) {
                Ok(()) => return Ok(Self { path }),
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e).with_context(|| format!("creating run directory {}", path.display())),
            }
        }
        unreachable!()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.path.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn create_file(&self, name: &str) -> Result<io::BufWriter<fs::File>> {
        let path = self.path.join(name);
        let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(io::BufWriter::new(f))
    }
}

/// One CSV row of `parameter,measured,band,pass`.
pub struct SeriesRow {
    pub parameter: String,
    pub measured: f64,
    pub band: f64,
    pub pass: bool,
}

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn series_csv(rows: &[SeriesRow]) -> String {
    let mut out = String::from("parameter,measured,band,pass\n");
    for r in rows {
        writeln!(out, "{},{},{},{}", r.parameter, num(r.measured), num(r.band), r.pass).unwrap();
    }
    out
}

pub fn flush(mut w: impl Write) -> Result<()> {
    w.flush()?;
    Ok(())
}
