use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Convention, History, HistoryEngine};
use crate::error::{Error, Result};
use crate::hilbert::{CMatrix, CVector, C64, STRUCTURAL_TOL};
use crate::model::ModelParams;

/// Largest `N` accepted by [`full_decoherence_matrix`] unless overridden.
pub const DEFAULT_N_CAP: usize = 10;
/// Pairs with `p(h)p(h')` below this are counted as trivially decoherent.
pub const DEFAULT_PROBABILITY_FLOOR: f64 = 1e-20;

/// Subtrees of this depth are evaluated in parallel.
const SPLIT_DEPTH: usize = 3;

/// All `4^N` values of the decoherence functional.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoherenceMatrix {
    pub params: ModelParams,
    pub convention: Convention,
    pub entries: CMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantSummary {
    pub hermiticity_error: f64,
    pub min_diagonal: f64,
    pub diagonal_sum_error: f64,
    pub grand_sum_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    params: ModelParams,
    n_steps: usize,
    convention: Convention,
    /// Row-major `[re, im]` pairs.
    entries: Vec<[f64; 2]>,
    invariants: InvariantSummary,
}

impl DecoherenceMatrix {
    pub fn n_steps(&self) -> usize {
        self.params.n_steps
    }

    pub fn get(&self, h: &History, h2: &History) -> C64 {
        self.entries[(h.index(), h2.index())]
    }

    /// Diagonal `p(h)`, indexed like histories.
    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn check_invariants(&self) -> InvariantSummary {
        let d = &self.entries;
        let hermiticity_error = crate::hilbert::max_abs(&(d - d.adjoint()));
        let diag = d.diagonal();
        let min_diagonal = diag.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        let diagonal_sum_error = (diag.iter().sum::<C64>() - C64::new(1.0, 0.0)).norm();
        let grand_sum_error = (d.iter().sum::<C64>() - C64::new(1.0, 0.0)).norm();
        let tol = STRUCTURAL_TOL;
        InvariantSummary {
            hermiticity_error,
            min_diagonal,
            diagonal_sum_error,
            grand_sum_error,
            tolerance: tol,
            pass: hermiticity_error <= tol
                && min_diagonal >= -tol
                && diagonal_sum_error <= tol
                && grand_sum_error <= tol,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = MatrixFile {
            params: self.params.clone(),
            n_steps: self.n_steps(),
            convention: self.convention,
            entries: self.entries.transpose().iter().map(|z| [z.re, z.im]).collect(),
            invariants: self.check_invariants(),
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::Precondition(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MatrixFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidHistory(format!("malformed matrix file: {e}")))?;
        let n = 1usize << file.n_steps;
        if file.entries.len() != n * n || file.params.n_steps != file.n_steps {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: file.entries.len(),
            });
        }
        Ok(Self {
            params: file.params,
            convention: file.convention,
            entries: CMatrix::from_row_iterator(n, n, file.entries.iter().map(|&[re, im]| C64::new(re, im))),
        })
    }
}

/// Evaluates every `D[h,h']` by depth-first recursion over the pair tree.
/// Each node holds one branch operator, so shared prefixes are propagated
/// once; subtrees below depth 3 run in parallel.
pub fn full_decoherence_matrix(p: &ModelParams, convention: Convention, cap: usize) -> Result<DecoherenceMatrix> {
    if p.n_steps > cap {
        return Err(Error::CapExceeded {
            requested: p.n_steps,
            cap,
        });
    }
    let engine = HistoryEngine::new(p, convention)?;
    let n = p.n_steps;
    let split = SPLIT_DEPTH.min(n);

    // Enumerate prefixes of length `split` serially; they are cheap.
    let mut frontier = vec![(0usize, 0usize, engine.initial().clone())];
    for k in 0..split {
        frontier = frontier
            .into_iter()
            .flat_map(|(row, col, v)| {
                let propagated = if engine.convention().propagates_before(k) {
                    engine.propagate(&v)
                } else {
                    v
                };
                children(&engine, &propagated, row, col)
            })
            .collect();
    }

    let leaves: Vec<(usize, usize, C64)> = frontier
        .into_par_iter()
        .flat_map_iter(|(row, col, v)| {
            let mut out = Vec::with_capacity(1 << (2 * (n - split)));
            descend(&engine, v, split, row, col, &mut out);
            out
        })
        .collect();

    let dim = 1usize << n;
    let mut entries = CMatrix::zeros(dim, dim);
    for (row, col, value) in leaves {
        entries[(row, col)] = value;
    }
    Ok(DecoherenceMatrix {
        params: p.clone(),
        convention,
        entries,
    })
}

fn children(engine: &HistoryEngine, v: &CVector, row: usize, col: usize) -> Vec<(usize, usize, CVector)> {
    let mut out = Vec::with_capacity(4);
    for a in [false, true] {
        for b in [false, true] {
            let mut child = CVector::zeros(v.len());
            engine.project_into(v, a, b, &mut child);
            out.push(((row << 1) | usize::from(a), (col << 1) | usize::from(b), child));
        }
    }
    out
}

fn descend(engine: &HistoryEngine, v: CVector, depth: usize, row: usize, col: usize, out: &mut Vec<(usize, usize, C64)>) {
    if depth == engine.n_steps() {
        out.push((row, col, engine.trace(&v)));
        return;
    }
    let propagated = if engine.convention().propagates_before(depth) {
        engine.propagate(&v)
    } else {
        v
    };
    for (r, c, child) in children(engine, &propagated, row, col) {
        descend(engine, child, depth + 1, r, c, out);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceReport {
    /// Threshold against which pairs are judged.
    pub epsilon: f64,
    pub floor: f64,
    /// `max |D[h,h']| / √(p(h)p(h'))` over qualifying distinct pairs.
    pub attained_epsilon: f64,
    /// `attained_epsilon²`, i.e. the largest `|D|²/(pp')`.
    pub max_ratio: f64,
    /// Pair reaching the maximum, if any qualified.
    pub worst_pair: Option<(History, History)>,
    /// Unordered distinct pairs compared.
    pub qualifying_pairs: usize,
    /// Pairs skipped because `p(h)p(h') < floor`.
    pub trivially_decoherent: usize,
    pub violating_count: usize,
    /// Up to the first [`MAX_LISTED_VIOLATIONS`] violating pairs.
    pub violating_pairs: Vec<(History, History, f64)>,
}

pub const MAX_LISTED_VIOLATIONS: usize = 64;

/// Approximate-decoherence statistics `|D[h,h']|² < ε² p(h)p(h')`.
pub fn decoherence_report(d: &DecoherenceMatrix, epsilon: f64, floor: f64) -> DecoherenceReport {
    let n = d.n_steps();
    let probs = d.probabilities();
    let dim = probs.len();
    let mut report = DecoherenceReport {
        epsilon,
        floor,
        attained_epsilon: 0.0,
        max_ratio: 0.0,
        worst_pair: None,
        qualifying_pairs: 0,
        trivially_decoherent: 0,
        violating_count: 0,
        violating_pairs: Vec::new(),
    };
    for i in 0..dim {
        for j in (i + 1)..dim {
            let pp = probs[i] * probs[j];
            if !(pp >= floor) {
                report.trivially_decoherent += 1;
                continue;
            }
            report.qualifying_pairs += 1;
            let ratio = d.entries[(i, j)].norm() / pp.sqrt();
            if ratio > report.attained_epsilon {
                report.attained_epsilon = ratio;
                report.worst_pair = Some((History::from_index(i, n), History::from_index(j, n)));
            }
            if ratio >= epsilon {
                report.violating_count += 1;
                if report.violating_pairs.len() < MAX_LISTED_VIOLATIONS {
                    report
                        .violating_pairs
                        .push((History::from_index(i, n), History::from_index(j, n), ratio));
                }
            }
        }
    }
    report.max_ratio = report.attained_epsilon * report.attained_epsilon;
    report
}

/// Largest `|D[h,h']|` among pairs at each Hamming distance `0..=N`.
pub fn max_offdiagonal_by_distance(d: &DecoherenceMatrix) -> Vec<f64> {
    let n = d.n_steps();
    let dim = 1usize << n;
    let mut out = vec![0.0_f64; n + 1];
    for i in 0..dim {
        for j in 0..dim {
            let k = (i ^ j).count_ones() as usize;
            out[k] = out[k].max(d.entries[(i, j)].norm());
        }
    }
    out
}
