//! Mechanical checks of the Fourier / Wasserstein equivalence bounds on grid
//! measures, with their explicit constants:
//!
//! | name            | inequality                         |
//! |-----------------|------------------------------------|
//! | `f12_le_w1`     | `f₁,₂ ≤ W₁`                        |
//! | `w1_le_c_f12`   | `W₁ ≤ T²/(2π) · f₁,₂`              |
//! | `d1_le_w1`      | `d₁ ≤ W₁`                          |
//! | `w1_le_c_d1`    | `W₁ ≤ T²/(2π) · d₁`                |
//! | `f22_le_c_w2`   | `f₂,₂ ≤ 2√2 · W₂` (equal centers)  |
//! | `w2sq_le_c_f22` | `W₂² ≤ T³/π · f₂,₂`                |

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier_metrics::{
    converged_d_sup, converged_pfm, f22_translated, refine, Converged, MetricParams,
    DEFAULT_OVERSAMPLE, MAX_OVERSAMPLE,
};
use crate::grid_measure::GridMeasure;
use crate::wasserstein::{wp_exact_guarded, DEFAULT_GUARD};

/// Center distance below which two measures count as equally centered.
pub const CENTER_TOL: f64 = 1e-9;

/// One checked inequality `lhs ≤ rhs` (constants already applied).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_name: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub pair_id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub slack: f64,
    pub converged: bool,
    pub pass: bool,
    /// Quadrature-error allowance added to the pass tolerance.
    #[serde(default)]
    pub allowance: f64,
}

impl BoundReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        bound_name: &str,
        n: usize,
        pair_id: &str,
        lhs: f64,
        rhs: f64,
        constant: f64,
        converged: bool,
        allowance: f64,
    ) -> Self {
        let slack = rhs - lhs;
        let tol = 1e-9 * rhs.abs().max(1.0) + allowance;
        BoundReport {
            bound_name: bound_name.to_string(),
            n,
            pair_id: pair_id.to_string(),
            lhs,
            rhs,
            constant,
            slack,
            converged,
            pass: slack >= -tol,
            allowance,
        }
    }
}

/// Settings shared by all checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    /// Oversampling where refinement starts.
    pub start_oversample: usize,
    /// Largest oversampling for the sup-metric lattice.
    pub max_sup_oversample: usize,
    /// Solver guard on `|supp μ|·|supp ν|`.
    pub guard: usize,
    /// Route unequal-center pairs through `ℱ₂,₂` for the `W₂²` bound.
    pub translated_f22: bool,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            start_oversample: DEFAULT_OVERSAMPLE,
            max_sup_oversample: 16,
            guard: DEFAULT_GUARD,
            translated_f22: false,
        }
    }
}

/// `T²/(2π)` with `T = 2πN`.
pub fn w1_constant(n: usize) -> f64 {
    let t = 2.0 * PI * n as f64;
    t * t / (2.0 * PI)
}

/// `T³/π` with `T = 2πN`.
pub fn w2_constant(n: usize) -> f64 {
    let t = 2.0 * PI * n as f64;
    t * t * t / PI
}

/// `2√2`.
pub fn f22_constant() -> f64 {
    2.0 * 2f64.sqrt()
}

fn require_probability(mu: &GridMeasure, nu: &GridMeasure) -> Result<()> {
    mu.same_grid(nu)?;
    for m in [mu, nu] {
        if !m.is_probability() {
            return Err(Error::MassMismatch(mu.mass(), nu.mass()));
        }
    }
    Ok(())
}

fn center_gap(mu: &GridMeasure, nu: &GridMeasure) -> Result<f64> {
    Ok(mu.center()?.distance(&nu.center()?))
}

fn f12_upper(n: usize, id: &str, f12: &Converged, w1: f64) -> BoundReport {
    BoundReport::new(
        "f12_le_w1",
        n,
        id,
        f12.value,
        w1,
        1.0,
        f12.converged,
        f12.allowance(),
    )
}

fn f12_lower(n: usize, id: &str, f12: &Converged, w1: f64) -> BoundReport {
    let c = w1_constant(n);
    BoundReport::new(
        "w1_le_c_f12",
        n,
        id,
        w1,
        c * f12.value,
        c,
        f12.converged,
        c * f12.allowance(),
    )
}

fn d1_pair(n: usize, id: &str, d1: &Converged, w1: f64) -> (BoundReport, BoundReport) {
    let c = w1_constant(n);
    (
        // the lattice value is a lower bound of the sup, so no allowance
        BoundReport::new("d1_le_w1", n, id, d1.value, w1, 1.0, d1.converged, 0.0),
        BoundReport::new(
            "w1_le_c_d1",
            n,
            id,
            w1,
            c * d1.value,
            c,
            d1.converged,
            c * d1.allowance(),
        ),
    )
}

fn f22_upper(n: usize, id: &str, f22: &Converged, w2: f64) -> BoundReport {
    let c = f22_constant();
    BoundReport::new(
        "f22_le_c_w2",
        n,
        id,
        f22.value,
        c * w2,
        c,
        f22.converged,
        f22.allowance(),
    )
}

fn f22_lower(n: usize, id: &str, f22: &Converged, w2: f64) -> BoundReport {
    let c = w2_constant(n);
    BoundReport::new(
        "w2sq_le_c_f22",
        n,
        id,
        w2 * w2,
        c * f22.value,
        c,
        f22.converged,
        c * f22.allowance(),
    )
}

fn converged_f12(mu: &GridMeasure, nu: &GridMeasure, cfg: &CheckConfig) -> Result<Converged> {
    converged_pfm(mu, nu, &MetricParams::f12(cfg.start_oversample))
}

fn converged_f22(mu: &GridMeasure, nu: &GridMeasure, cfg: &CheckConfig) -> Result<Converged> {
    converged_pfm(mu, nu, &MetricParams::f22(cfg.start_oversample))
}

fn converged_translated_f22(
    mu: &GridMeasure,
    nu: &GridMeasure,
    cfg: &CheckConfig,
) -> Result<Converged> {
    refine(cfg.start_oversample, MAX_OVERSAMPLE, |r| {
        f22_translated(mu, nu, r)
    })
}

/// `f₁,₂ ≤ W₁`.
pub fn check_f12_upper(
    mu: &GridMeasure,
    nu: &GridMeasure,
    pair_id: &str,
    cfg: &CheckConfig,
) -> Result<BoundReport> {
    require_probability(mu, nu)?;
    let (w1, _) = wp_exact_guarded(mu, nu, 1, cfg.guard)?;
    Ok(f12_upper(mu.n(), pair_id, &converged_f12(mu, nu, cfg)?, w1))
}

/// `W₁ ≤ T²/(2π) · f₁,₂`.
pub fn check_f12_lower(
    mu: &GridMeasure,
    nu: &GridMeasure,
    pair_id: &str,
    cfg: &CheckConfig,
) -> Result<BoundReport> {
    require_probability(mu, nu)?;
    let (w1, _) = wp_exact_guarded(mu, nu, 1, cfg.guard)?;
    Ok(f12_lower(mu.n(), pair_id, &converged_f12(mu, nu, cfg)?, w1))
}

/// `d₁ ≤ W₁ ≤ T²/(2π) · d₁` with the lattice-refined `d₁`.
pub fn check_d1_sandwich(
    mu: &GridMeasure,
    nu: &GridMeasure,
    pair_id: &str,
    cfg: &CheckConfig,
) -> Result<(BoundReport, BoundReport)> {
    require_probability(mu, nu)?;
    let (w1, _) = wp_exact_guarded(mu, nu, 1, cfg.guard)?;
    let d1 = converged_d_sup(mu, nu, 1.0, cfg.start_oversample, cfg.max_sup_oversample)?;
    Ok(d1_pair(mu.n(), pair_id, &d1, w1))
}

/// `f₂,₂ ≤ 2√2 · W₂`; requires equal centers.
pub fn check_f22_upper(
    mu: &GridMeasure,
    nu: &GridMeasure,
    pair_id: &str,
    cfg: &CheckConfig,
) -> Result<BoundReport> {
    require_probability(mu, nu)?;
    let gap = center_gap(mu, nu)?;
    if gap > CENTER_TOL {
        return Err(Error::CentersDiffer(gap));
    }
    let (w2, _) = wp_exact_guarded(mu, nu, 2, cfg.guard)?;
    Ok(f22_upper(mu.n(), pair_id, &converged_f22(mu, nu, cfg)?, w2))
}

/// `W₂² ≤ T³/π · f₂,₂`. With unequal centers the raw `f₂,₂` is infinite and
/// the error is returned, unless `cfg.translated_f22` asks for `ℱ₂,₂`.
pub fn check_f22_lower(
    mu: &GridMeasure,
    nu: &GridMeasure,
    pair_id: &str,
    cfg: &CheckConfig,
) -> Result<BoundReport> {
    require_probability(mu, nu)?;
    let f22 = if cfg.translated_f22 && center_gap(mu, nu)? > CENTER_TOL {
        converged_translated_f22(mu, nu, cfg)?
    } else {
        converged_f22(mu, nu, cfg)?
    };
    let (w2, _) = wp_exact_guarded(mu, nu, 2, cfg.guard)?;
    Ok(f22_lower(mu.n(), pair_id, &f22, w2))
}

/// A pair fed to the suite.
#[derive(Debug, Clone)]
pub struct LabeledPair {
    pub id: String,
    pub mu: GridMeasure,
    pub nu: GridMeasure,
}

/// A check that could not be asserted for a pair, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipNote {
    pub pair_id: String,
    pub check: String,
    pub reason: String,
}

/// All reports and skips of a suite run, in input order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub reports: Vec<BoundReport>,
    pub skipped: Vec<SkipNote>,
}

impl SuiteResult {
    /// True iff every converged report passes.
    pub fn all_converged_pass(&self) -> bool {
        self.reports.iter().filter(|r| r.converged).all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &BoundReport> {
        self.reports.iter().filter(|r| !r.pass)
    }
}

/// Runs every applicable check on one pair, sharing the transport solves.
pub fn verify_pair(pair: &LabeledPair, cfg: &CheckConfig) -> SuiteResult {
    let mut out = SuiteResult::default();
    let id = pair.id.as_str();
    let (mu, nu) = (&pair.mu, &pair.nu);
    let n = mu.n();
    let skip = |out: &mut SuiteResult, check: &str, e: &Error| {
        out.skipped.push(SkipNote {
            pair_id: id.to_string(),
            check: check.to_string(),
            reason: e.to_string(),
        })
    };
    if let Err(e) = require_probability(mu, nu) {
        skip(&mut out, "all", &e);
        return out;
    }

    match wp_exact_guarded(mu, nu, 1, cfg.guard) {
        Ok((w1, _)) => {
            match converged_f12(mu, nu, cfg) {
                Ok(f12) => {
                    out.reports.push(f12_upper(n, id, &f12, w1));
                    out.reports.push(f12_lower(n, id, &f12, w1));
                }
                Err(e) => skip(&mut out, "f12", &e),
            }
            match converged_d_sup(mu, nu, 1.0, cfg.start_oversample, cfg.max_sup_oversample) {
                Ok(d1) => {
                    let (lo, hi) = d1_pair(n, id, &d1, w1);
                    out.reports.push(lo);
                    out.reports.push(hi);
                }
                Err(e) => skip(&mut out, "d1", &e),
            }
        }
        Err(e) => skip(&mut out, "w1", &e),
    }

    let gap = match center_gap(mu, nu) {
        Ok(g) => g,
        Err(e) => {
            skip(&mut out, "f22", &e);
            return out;
        }
    };
    let equal = gap <= CENTER_TOL;
    if !equal && !cfg.translated_f22 {
        skip(&mut out, "f22", &Error::CentersDiffer(gap));
        return out;
    }
    let f22 = if equal {
        converged_f22(mu, nu, cfg)
    } else {
        converged_translated_f22(mu, nu, cfg)
    };
    let f22 = match f22 {
        Ok(v) => v,
        Err(e) => {
            skip(&mut out, "f22", &e);
            return out;
        }
    };
    match wp_exact_guarded(mu, nu, 2, cfg.guard) {
        Ok((w2, _)) => {
            if equal {
                out.reports.push(f22_upper(n, id, &f22, w2));
            } else {
                skip(&mut out, "f22_le_c_w2", &Error::CentersDiffer(gap));
            }
            out.reports.push(f22_lower(n, id, &f22, w2));
        }
        Err(e) => skip(&mut out, "w2", &e),
    }
    out
}

/// Runs [`verify_pair`] over all pairs in parallel; output order follows input.
pub fn run_suite(pairs: &[LabeledPair], cfg: &CheckConfig) -> SuiteResult {
    let parts: Vec<SuiteResult> = pairs.par_iter().map(|p| verify_pair(p, cfg)).collect();
    let mut out = SuiteResult::default();
    for p in parts {
        out.reports.extend(p.reports);
        out.skipped.extend(p.skipped);
    }
    out
}

/// Column order of the CSV report.
pub const CSV_HEADER: [&str; 9] = [
    "bound_name",
    "N",
    "pair_id",
    "lhs",
    "rhs",
    "constant",
    "slack",
    "converged",
    "pass",
];

pub fn write_csv<W: Write>(out: W, reports: &[BoundReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in reports {
        w.write_record([
            r.bound_name.clone(),
            r.n.to_string(),
            r.pair_id.clone(),
            r.lhs.to_string(),
            r.rhs.to_string(),
            r.constant.to_string(),
            r.slack.to_string(),
            r.converged.to_string(),
            r.pass.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_json(reports: &[BoundReport]) -> Result<String> {
    serde_json::to_string_pretty(reports).map_err(|e| Error::Io(e.to_string()))
}
