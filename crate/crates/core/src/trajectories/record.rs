//! Line-oriented trajectory record format.
//!
//! One trajectory per line, tab separated:
//!
//! ```text
//! # seed	jump_steps	weight
//! 42	-	9.9950012497916878e-1
//! 43	17,2031	6.2437515606487e-14
//! ```
//!
//! `jump_steps` is a comma-separated list of step indices, or `-` when the
//! trajectory has no jumps. Weights carry 17 significant digits.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::str::FromStr;

use super::TrajectoryRecord;
use crate::error::Error;

pub const HEADER: &str = "# seed\tjump_steps\tweight";

/// The serialized part of a [`TrajectoryRecord`]; the final state is not
/// written since it is reproducible from the seed.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordLine {
    pub seed: u64,
    pub jump_steps: Vec<usize>,
    pub weight: f64,
}

impl From<&TrajectoryRecord> for RecordLine {
    fn from(r: &TrajectoryRecord) -> Self {
        Self {
            seed: r.seed,
            jump_steps: r.jump_steps.clone(),
            weight: r.weight,
        }
    }
}

impl std::fmt::Display for RecordLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut jumps = String::new();
        if self.jump_steps.is_empty() {
            jumps.push('-');
        } else {
            for (i, s) in self.jump_steps.iter().enumerate() {
                if i > 0 {
                    jumps.push(',');
                }
                write!(jumps, "{s}")?;
            }
        }
        write!(f, "{}\t{}\t{:.16e}", self.seed, jumps, self.weight)
    }
}

impl FromStr for RecordLine {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self, Error> {
        let bad = |what: &str| Error::invalid("record", format!("{what} in line {line:?}"));
        let mut fields = line.trim_end_matches(['\n', '\r']).split('\t');
        let seed = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("malformed seed"))?;
        let jumps = fields.next().ok_or_else(|| bad("missing jump steps"))?;
        let jump_steps = if jumps == "-" {
            Vec::new()
        } else {
            jumps
                .split(',')
                .map(|s| s.parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| bad("malformed jump steps"))?
        };
        let weight = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("malformed weight"))?;
        if fields.next().is_some() {
            return Err(bad("trailing fields"));
        }
        Ok(Self {
            seed,
            jump_steps,
            weight,
        })
    }
}

pub fn write_records<'a, W: Write>(
    mut out: W,
    records: impl IntoIterator<Item = &'a TrajectoryRecord>,
) -> io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for r in records {
        writeln!(out, "{}", RecordLine::from(r))?;
    }
    Ok(())
}

/// Parses a record file, skipping `#` comment lines and blank lines.
pub fn read_records(text: &str) -> Result<Vec<RecordLine>, Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(str::parse)
        .collect()
}
