use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::History;
use crate::error::{Error, Result};

/// Fine history probabilities summed into absorption classes.
///
/// A class is the list of 1-based onset steps at which a photon was first
/// seen and then absorbed within `window_steps` further projections; the
/// empty list is "no photon". Histories in which a photon is still seen
/// `window_steps` projections after its onset go to `leakage`; histories
/// that end before an open window closes go to `unresolved`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoarseGrained {
    pub window_steps: usize,
    pub classes: BTreeMap<Vec<usize>, f64>,
    pub leakage: f64,
    pub unresolved: f64,
}

impl CoarseGrained {
    pub fn class_total(&self) -> f64 {
        self.classes.values().sum()
    }

    pub fn total(&self) -> f64 {
        self.class_total() + self.leakage + self.unresolved
    }

    pub fn class(&self, onsets: &[usize]) -> f64 {
        self.classes.get(onsets).copied().unwrap_or(0.0)
    }
}

enum Fate {
    Class(Vec<usize>),
    Leaked,
    Unresolved,
}

fn classify(bits: &[bool], window: usize) -> Fate {
    let mut onsets = Vec::new();
    let mut j = 0;
    while j < bits.len() {
        if !bits[j] {
            j += 1;
            continue;
        }
        // Photon first seen at projection j; look for its absorption.
        let end = j + window;
        match (j + 1..=end.min(bits.len() - 1)).find(|&k| !bits[k]) {
            Some(k) => {
                onsets.push(j + 1);
                j = k;
            }
            None if end >= bits.len() => return Fate::Unresolved,
            None => return Fate::Leaked,
        }
    }
    Fate::Class(onsets)
}

/// Partitions the diagonal `probs` (indexed MSB-first over `n_steps` bits)
/// into absorption classes.
pub fn coarse_grain_absorption(probs: &[f64], n_steps: usize, window_steps: usize) -> Result<CoarseGrained> {
    if window_steps == 0 {
        return Err(Error::invalid("window_steps", "window must span at least one step"));
    }
    if probs.len() != 1usize << n_steps {
        return Err(Error::DimensionMismatch {
            expected: 1 << n_steps,
            found: probs.len(),
        });
    }
    let mut out = CoarseGrained {
        window_steps,
        ..Default::default()
    };
    for (index, &p) in probs.iter().enumerate() {
        let h = History::from_index(index, n_steps);
        match classify(h.bits(), window_steps) {
            Fate::Class(key) => *out.classes.entry(key).or_insert(0.0) += p,
            Fate::Leaked => out.leakage += p,
            Fate::Unresolved => out.unresolved += p,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fate(s: &str, w: usize) -> String {
        let h: History = s.parse().unwrap();
        match classify(h.bits(), w) {
            Fate::Class(k) => format!("{k:?}"),
            Fate::Leaked => "leak".into(),
            Fate::Unresolved => "open".into(),
        }
    }

    #[test]
    fn classification() {
        assert_eq!(fate("00000", 2), "[]");
        assert_eq!(fate("01000", 2), "[2]");
        assert_eq!(fate("01100", 2), "[2]");
        assert_eq!(fate("01110", 2), "leak");
        assert_eq!(fate("01010", 2), "[2, 4]");
        assert_eq!(fate("00011", 2), "open");
        assert_eq!(fate("00001", 2), "open");
        assert_eq!(fate("11000", 2), "[1]");
        assert_eq!(fate("11000", 1), "leak");
    }

    #[test]
    fn point_mass_on_no_photon() {
        let mut probs = vec![0.0; 16];
        probs[0] = 1.0;
        let cg = coarse_grain_absorption(&probs, 4, 2).unwrap();
        assert_eq!(cg.classes.values().filter(|&&v| v > 0.0).count(), 1);
        assert_eq!(cg.class(&[]), 1.0);
        assert_eq!(cg.leakage + cg.unresolved, 0.0);
    }

    #[test]
    fn partition_preserves_total() {
        let probs: Vec<f64> = (0..64).map(|i| (i as f64 + 1.0) / (64.0 * 65.0 / 2.0)).collect();
        let cg = coarse_grain_absorption(&probs, 6, 2).unwrap();
        assert!((cg.total() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn invalid_input() {
        assert!(coarse_grain_absorption(&[1.0, 0.0], 1, 0).is_err());
        assert!(coarse_grain_absorption(&[1.0, 0.0, 0.0], 1, 1).is_err());
    }
}
