use std::fmt::Write as _;

use anyhow::{bail, Result};
use jumphist_core::analysis::{
    adiabatic_improvement, adiabatic_validity, compare_no_jump, compare_one_jump, decoherence_scaling,
    unraveling_consistency, ComparisonReport, SeriesPoint, MIN_ENSEMBLE,
};
use jumphist_core::histories::{decoherence_report, full_decoherence_matrix, History, DEFAULT_PROBABILITY_FLOOR};
use jumphist_core::liouville::Superoperator;
use jumphist_core::model::build_reduced_model;
use jumphist_core::trajectories::{ensemble_average, write_records, Unraveling, Weighting};
use jumphist_core::{trace_distance, CMatrix, DensityMatrix};
use serde_json::json;

use crate::config::RunConfig;
use crate::output::{flush, num, series_csv, RunDir, SeriesRow};

/// Result of a command that ran to completion.
pub struct Outcome {
    pub pass: bool,
    pub summary: String,
}

fn matrix_json(m: &CMatrix) -> serde_json::Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect();
    json!(rows)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn check_total_time(cfg: &RunConfig) -> Result<f64> {
    let t = cfg.total_time();
    let expected = cfg.model.total_time();
    if (t - expected).abs() > 1e-9 * expected.max(1.0) {
        bail!(
            "invalid value for `run.total_time`: {t} must equal model.n_steps * model.dt = {expected} for this command"
        );
    }
    Ok(t)
}

pub fn histories(cfg: &RunConfig, dir: &RunDir) -> Result<Outcome> {
    let p = &cfg.model;
    let d = full_decoherence_matrix(p, cfg.run.convention, cfg.run.n_cap)?;
    let inv = d.check_invariants();
    let report = decoherence_report(&d, cfg.run.epsilon, DEFAULT_PROBABILITY_FLOOR);
    dir.write("decoherence_matrix.json", &d.to_json()?)?;
    dir.write_json("decoherence_report.json", &json!({ "invariants": inv, "report": report }))?;

    let mut s = String::new();
    writeln!(s, "histories: N = {}, convention = {}", p.n_steps, cfg.run.convention)?;
    let probs = d.probabilities();
    let mut order: Vec<usize> = (0..probs.len()).collect();
    if probs.len() > 64 {
        order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
        order.truncate(16);
        writeln!(s, "16 most probable of {} histories:", probs.len())?;
    }
    for i in order {
        writeln!(s, "p({}) = {:e}", History::from_index(i, p.n_steps), probs[i])?;
    }
    writeln!(s, "|sum p(h) - 1| = {:e}", inv.diagonal_sum_error)?;
    writeln!(s, "|sum D(h,h') - 1| = {:e}", inv.grand_sum_error)?;
    writeln!(s, "hermiticity error = {:e}", inv.hermiticity_error)?;
    writeln!(s, "min p(h) = {:e}", inv.min_diagonal)?;
    writeln!(s, "attained epsilon = {:e}", report.attained_epsilon)?;
    writeln!(
        s,
        "pairs compared = {}, trivially decoherent = {}, at or above epsilon {} = {}",
        report.qualifying_pairs, report.trivially_decoherent, report.epsilon, report.violating_count
    )?;
    writeln!(s, "invariants (tol {:e}): {}", inv.tolerance, verdict(inv.pass))?;
    dir.write("summary.txt", &s)?;
    Ok(Outcome { pass: inv.pass, summary: s })
}

pub fn trajectories(cfg: &RunConfig, dir: &RunDir) -> Result<Outcome> {
    let p = &cfg.model;
    let t = check_total_time(cfg)?;
    let m = cfg.run.traj_count;
    let records = Unraveling::new(p)?.sample_many(cfg.run.seed, m)?;
    let mut out = dir.create_file("records.txt")?;
    write_records(&mut out, &records)?;
    flush(out)?;

    let average = ensemble_average(&records, Weighting::Sampled)?;
    let generator = Superoperator::generator(&build_reduced_model(p)?.lindblad_model()?);
    let rho0 = p.system_state()?.projector().into_matrix();
    let exact = DensityMatrix::new(generator.exponential(t)?.apply(&rho0))?;
    let distance = trace_distance(&average, &exact)?;
    let band = 3.0 / (m as f64).sqrt() + 2.0 * p.kappa2_over_g() * p.dt * t;
    let asserted = m >= MIN_ENSEMBLE;
    let pass = !asserted || distance <= band;
    let jumps: usize = records.iter().map(|r| r.jump_count()).sum();
    let mean_jumps = jumps as f64 / m as f64;

    dir.write_json(
        "summary.json",
        &json!({
            "trajectories": m,
            "seed": cfg.run.seed,
            "total_time": t,
            "mean_jumps": mean_jumps,
            "ensemble_average": matrix_json(average.matrix()),
            "exact": matrix_json(exact.matrix()),
            "trace_distance": distance,
            "band": band,
            "asserted": asserted,
            "pass": pass,
        }),
    )?;
    let mut s = String::new();
    writeln!(s, "trajectories: M = {m}, seed = {}, T = {t}", cfg.run.seed)?;
    writeln!(s, "mean jumps per trajectory = {mean_jumps}")?;
    writeln!(s, "trace distance to exact reduced evolution = {}", num(distance))?;
    if asserted {
        writeln!(s, "band 3/sqrt(M) + 2 kappa^2 dt T / G = {}: {}", num(band), verdict(pass))?;
    } else {
        writeln!(s, "band {} not asserted below M = {MIN_ENSEMBLE}", num(band))?;
    }
    Ok(Outcome { pass, summary: s })
}

fn comparison_rows(report: &ComparisonReport) -> Vec<SeriesRow> {
    report
        .entries
        .iter()
        .map(|e| SeriesRow {
            parameter: e.label.clone(),
            measured: e.relative_error,
            band: e.band,
            pass: e.pass,
        })
        .collect()
}

pub fn compare(cfg: &RunConfig, dir: &RunDir) -> Result<Outcome> {
    let p = &cfg.model;
    let bands = cfg.bands();
    let no_jump = compare_no_jump(p, cfg.run.convention, bands)?;
    let one_jump = compare_one_jump(p, cfg.jump_step(), cfg.window_steps(), cfg.run.convention, bands)?;
    dir.write_json("compare.json", &json!({ "no_jump": no_jump, "one_jump": one_jump }))?;
    let mut rows = comparison_rows(&no_jump);
    rows.extend(comparison_rows(&one_jump));
    dir.write("compare.csv", &series_csv(&rows))?;

    let pass = no_jump.pass() && one_jump.pass();
    let mut s = String::new();
    writeln!(
        s,
        "compare: N = {}, jump step = {}, window = {} steps, band constant = {}",
        p.n_steps,
        cfg.jump_step(),
        cfg.window_steps(),
        bands.constant
    )?;
    let failures = rows.iter().filter(|r| !r.pass).count();
    for e in no_jump.entries.iter().chain(one_jump.entries.iter().take(2)) {
        writeln!(
            s,
            "{}: history {} vs formula {}, relative error {} (band {}) {}",
            e.label,
            num(e.history_value),
            num(e.formula_value),
            num(e.relative_error),
            num(e.band),
            verdict(e.pass)
        )?;
    }
    let worst = rows.iter().map(|r| r.measured).fold(0.0, f64::max);
    writeln!(s, "{} entries, {failures} outside band, largest relative error {}", rows.len(), num(worst))?;
    Ok(Outcome { pass, summary: s })
}

pub fn scaling(cfg: &RunConfig, dir: &RunDir) -> Result<Outcome> {
    let r = &cfg.run;
    let fit = decoherence_scaling(&cfg.model, r.sweep_axis, &r.sweep, r.scaling_pair, r.convention)?;
    let pass = fit.slope >= r.slope_min && fit.slope <= r.slope_max;
    dir.write_json(
        "scaling.json",
        &json!({ "fit": fit, "slope_min": r.slope_min, "slope_max": r.slope_max, "pass": pass }),
    )?;
    let mut csv = String::from("log_g_dt,log_ratio\n");
    for pt in &fit.points {
        writeln!(csv, "{},{}", num(pt.log_g_dt), num(pt.log_ratio))?;
    }
    dir.write("scaling.csv", &csv)?;

    let mut s = String::new();
    writeln!(s, "scaling: pair {} / {}, {} points", fit.histories.0, fit.histories.1, fit.points.len())?;
    for pt in &fit.points {
        writeln!(s, "G dt = {:>10.4}  |D|^2/(p p') = {}", pt.g_dt, num(pt.ratio))?;
    }
    writeln!(
        s,
        "slope = {} (accepted [{}, {}]): {}",
        fit.slope,
        r.slope_min,
        r.slope_max,
        verdict(pass)
    )?;
    Ok(Outcome { pass, summary: s })
}

fn point_rows(points: &[SeriesPoint]) -> Vec<SeriesRow> {
    points
        .iter()
        .map(|p| SeriesRow {
            parameter: num(p.parameter),
            measured: p.measured,
            band: p.band,
            pass: p.pass,
        })
        .collect()
}

pub fn validate(cfg: &RunConfig, dir: &RunDir) -> Result<Outcome> {
    let p = &cfg.model;
    let r = &cfg.run;
    let bands = cfg.bands();
    let t = cfg.total_time();
    // Cheap preconditions first, so a bad config fails before sampling.
    let adiabatic = adiabatic_validity(p, t, r.adiabatic_samples, bands)?;
    check_total_time(cfg)?;
    let (base, improved) = adiabatic_improvement(p, t, r.gamma2_factor, bands)?;
    let improves = improved < base || base == 0.0;
    let unraveling = unraveling_consistency(p, r.traj_count, t, r.checkpoints, r.seed)?;

    dir.write_json(
        "validate.json",
        &json!({
            "adiabatic": adiabatic,
            "improvement": { "gamma2_factor": r.gamma2_factor, "base": base, "improved": improved, "pass": improves },
            "unraveling": unraveling,
        }),
    )?;
    dir.write("adiabatic.csv", &series_csv(&point_rows(&adiabatic.points)))?;
    dir.write("unraveling.csv", &series_csv(&point_rows(&unraveling.points)))?;

    let pass = adiabatic.pass() && improves && unraveling.pass();
    let mut s = String::new();
    writeln!(
        s,
        "adiabatic: max error for t >= {} is {} (band {}): {}",
        adiabatic.assert_from,
        num(adiabatic.max_asserted_error()),
        num(bands.constant * p.kappa / p.gamma1),
        verdict(adiabatic.pass())
    )?;
    writeln!(
        s,
        "adiabatic with gamma2 x{}: {} -> {}: {}",
        r.gamma2_factor,
        num(base),
        num(improved),
        verdict(improves)
    )?;
    writeln!(
        s,
        "unraveling: M = {}, max trace distance {} (band {}): {}",
        r.traj_count,
        num(unraveling.max_distance()),
        num(unraveling.points[0].band),
        verdict(unraveling.pass())
    )?;
    Ok(Outcome { pass, summary: s })
}
