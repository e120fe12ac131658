//! Periodic Fourier-based metrics
//! `f^{(α)}_{s,p}(μ,ν) = ((1/T^d) ∫_{[0,T]^d} |μ̂−ν̂|^p / |k|^{sp+α} dk)^{1/p}`,
//! the sup-metric `d_s`, the center-translated variants `𝒟₂` and `ℱ₂,₂`, and
//! the `s = 0` weight-difference norm.

mod quadrature;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_measure::{matching_translation, GridMeasure, Moments};
use crate::spectrum::{transform, Spectrum};
use quadrature::{Leading, Problem};

pub use quadrature::QuadratureRule;

/// Default absolute tolerance when comparing moments.
pub const DEFAULT_MOMENT_TOL: f64 = 1e-9;
/// Relative change below which an `r → 2r` refinement counts as converged.
pub const CONVERGENCE_REL_TOL: f64 = 0.005;
/// Oversampling at which the refinement protocol starts.
pub const DEFAULT_OVERSAMPLE: usize = 2;
/// Largest oversampling the refinement protocol will try.
pub const MAX_OVERSAMPLE: usize = 32;

/// `(s, p, α, r)` configuration of a metric. `p = ∞` selects the sup-metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub s: f64,
    pub p: f64,
    pub alpha: f64,
    pub oversample: usize,
    pub moment_tol: f64,
    /// Matched moment order to assume instead of detecting it.
    pub order_override: Option<i32>,
    pub rule: QuadratureRule,
}

impl MetricParams {
    pub fn new(s: f64, p: f64, alpha: f64, oversample: usize) -> Self {
        MetricParams {
            s,
            p,
            alpha,
            oversample,
            moment_tol: DEFAULT_MOMENT_TOL,
            order_override: None,
            rule: QuadratureRule::Corrected,
        }
    }

    pub fn f12(oversample: usize) -> Self {
        Self::new(1.0, 2.0, 0.0, oversample)
    }

    pub fn f22(oversample: usize) -> Self {
        Self::new(2.0, 2.0, 0.0, oversample)
    }

    pub fn with_oversample(mut self, oversample: usize) -> Self {
        self.oversample = oversample;
        self
    }

    pub fn with_rule(mut self, rule: QuadratureRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_order(mut self, order: i32) -> Self {
        self.order_override = Some(order);
        self
    }

    /// `α = 0` and integer `s`.
    pub fn is_pure(&self) -> bool {
        self.alpha == 0.0 && self.s.fract() == 0.0
    }

    pub fn is_sup(&self) -> bool {
        self.p == f64::INFINITY
    }

    /// The weight exponent `sp + α`.
    pub fn weight_exponent(&self) -> f64 {
        self.s * self.p + self.alpha
    }

    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) {
            return Err(Error::InvalidParams(format!(
                "p must be >= 1, got {}",
                self.p
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if !self.s.is_finite() {
            return Err(Error::InvalidParams(format!(
                "s must be finite, got {}",
                self.s
            )));
        }
        if !(self.moment_tol > 0.0) {
            return Err(Error::InvalidParams(
                "moment tolerance must be positive".into(),
            ));
        }
        if let Some(r) = self.order_override {
            if !(-1..=2).contains(&r) {
                return Err(Error::InvalidParams(format!(
                    "matched moment order must lie in -1..=2, got {r}"
                )));
            }
        }
        if self.oversample == 0 {
            return Err(Error::OversampleZero);
        }
        Ok(())
    }
}

/// Matched moment order and the resulting finiteness margin
/// `d − [p(s − r − 1) + α]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub matched_moment_order: i32,
    pub feasible: bool,
    pub margin: f64,
}

impl FeasibilityReport {
    pub fn new(dim: usize, params: &MetricParams, order: i32) -> Self {
        let margin = if params.is_sup() {
            // sup of |Δ|/|k|^s is finite iff s ≤ r + 1
            (order + 1) as f64 - params.s
        } else {
            dim as f64 - (params.p * (params.s - order as f64 - 1.0) + params.alpha)
        };
        let feasible = if params.is_sup() {
            margin >= 0.0
        } else {
            margin > 0.0
        };
        FeasibilityReport {
            matched_moment_order: order,
            feasible,
            margin,
        }
    }
}

fn order_from_diff(dm: &Moments, tol: f64) -> i32 {
    if dm.max_abs_of_order(0) > tol {
        return -1;
    }
    for r in 1..=2 {
        if dm.max_abs_of_order(r) > tol {
            return r as i32 - 1;
        }
    }
    2
}

/// Largest `r ≤ 2` such that all mixed moments of order `≤ r` agree within
/// `tol`; `−1` when the masses differ.
pub fn matched_moment_order(mu: &GridMeasure, nu: &GridMeasure, tol: f64) -> i32 {
    order_from_diff(&mu.moments().diff(&nu.moments()), tol)
}

/// Feasibility of `params` for a pair of spectra.
pub fn feasibility(a: &Spectrum, b: &Spectrum, params: &MetricParams) -> FeasibilityReport {
    let order = params
        .order_override
        .unwrap_or_else(|| order_from_diff(&a.moments().diff(b.moments()), params.moment_tol));
    FeasibilityReport::new(a.dim(), params, order)
}

fn leading_term(a: &Spectrum, b: &Spectrum, params: &MetricParams) -> Option<Leading> {
    let dm = a.moments().diff(b.moments());
    match params.order_override {
        Some(r) if r < 2 => Some(Leading::of_order(&dm, (r + 1) as usize)),
        _ => Leading::detect(&dm, params.moment_tol),
    }
}

fn check_mass(a: &Spectrum, b: &Spectrum, tol: f64) -> Result<()> {
    if (a.mass() - b.mass()).abs() > tol {
        return Err(Error::MassMismatch(a.mass(), b.mass()));
    }
    Ok(())
}

/// Metric value on two precomputed spectra sampled on the same lattice.
pub fn pfm_spectra(a: &Spectrum, b: &Spectrum, params: &MetricParams) -> Result<f64> {
    params.validate()?;
    a.compatible(b)?;
    if params.is_sup() {
        return d_sup_spectra(a, b, params.s, params.moment_tol);
    }
    let q = params.weight_exponent();
    if q > 0.0 && params.order_override.is_none() {
        check_mass(a, b, params.moment_tol)?;
    }
    let feas = feasibility(a, b, params);
    if !feas.feasible {
        return Err(Error::InfeasibleParams {
            margin: feas.margin,
            order: feas.matched_moment_order,
        });
    }
    let problem = Problem {
        a,
        b,
        p: params.p,
        q,
        lead: leading_term(a, b, params),
    };
    let mean = problem.integrate(params.rule).max(0.0);
    Ok(mean.powf(1.0 / params.p))
}

/// `f^{(α)}_{s,p}(μ, ν)` on the lattice refined by `params.oversample`.
pub fn pfm(mu: &GridMeasure, nu: &GridMeasure, params: &MetricParams) -> Result<f64> {
    params.validate()?;
    mu.same_grid(nu)?;
    let a = transform(mu, params.oversample)?;
    let b = transform(nu, params.oversample)?;
    pfm_spectra(&a, &b, params)
}

/// Metric between the γ-dilated measures, evaluated on the dilated lattice
/// `[0, γT]^d`.
pub fn pfm_dilated(
    mu: &GridMeasure,
    nu: &GridMeasure,
    gamma: f64,
    params: &MetricParams,
) -> Result<f64> {
    params.validate()?;
    mu.same_grid(nu)?;
    let a = transform(mu, params.oversample)?.dilated(gamma)?;
    let b = transform(nu, params.oversample)?.dilated(gamma)?;
    pfm_spectra(&a, &b, params)
}

/// `sup |Δ|/|k|^s` over the closed lattice cell without the origin, with the
/// directional limit at the origin folded in.
pub fn d_sup_spectra(a: &Spectrum, b: &Spectrum, s: f64, tol: f64) -> Result<f64> {
    a.compatible(b)?;
    if !s.is_finite() {
        return Err(Error::InvalidParams(format!("s must be finite, got {s}")));
    }
    let dm = a.moments().diff(b.moments());
    let lead = Leading::detect(&dm, tol);
    let n = lead.map_or(MAX_DETECTED_ORDER, |l| l.n as f64);
    if n - s < 0.0 {
        if n == 0.0 {
            return Err(Error::MassMismatch(a.mass(), b.mass()));
        }
        return Err(Error::InfeasibleParams {
            margin: n - s,
            order: n as i32 - 1,
        });
    }
    let origin = match lead {
        Some(l) if (l.n as f64 - s).abs() == 0.0 => l.max_on_arc(a.dim()),
        _ => 0.0,
    };
    let problem = Problem {
        a,
        b,
        p: 1.0,
        q: s,
        lead,
    };
    Ok(problem.lattice_sup(s).max(origin))
}

const MAX_DETECTED_ORDER: f64 = 4.0;

/// Sup-metric `d_s` as a lattice maximum (a lower bound of the true sup that
/// is nondecreasing in `oversample`).
pub fn d_sup(mu: &GridMeasure, nu: &GridMeasure, s: f64, oversample: usize) -> Result<f64> {
    mu.same_grid(nu)?;
    let a = transform(mu, oversample)?;
    let b = transform(nu, oversample)?;
    d_sup_spectra(&a, &b, s, DEFAULT_MOMENT_TOL)
}

fn check_probability(mu: &GridMeasure) -> Result<()> {
    if !mu.is_probability() {
        return Err(Error::MassMismatch(mu.mass(), 1.0));
    }
    Ok(())
}

/// Shared driver for the center-translated metrics: evaluates `core` on
/// `(μ, ν_τ)` with `τ = m_μ − m_ν` and returns `sqrt(core² + |τ|²)`.
fn translated_metric<F>(
    mu: &GridMeasure,
    nu: &GridMeasure,
    oversample: usize,
    core: F,
) -> Result<f64>
where
    F: Fn(&Spectrum, &Spectrum) -> Result<f64>,
{
    check_probability(mu)?;
    check_probability(nu)?;
    let tau = matching_translation(mu, nu)?;
    let a = transform(mu, oversample)?;
    let b = transform(nu, oversample)?.translated(&tau);
    let c = core(&a, &b)?;
    Ok((c * c + tau.norm().powi(2)).sqrt())
}

/// `𝒟₂(μ,ν) = sqrt(d₂(μ, ν_{m_μ−m_ν})² + |m_μ − m_ν|²)`.
pub fn translated_d2(mu: &GridMeasure, nu: &GridMeasure, oversample: usize) -> Result<f64> {
    translated_metric(mu, nu, oversample, |a, b| {
        d_sup_spectra(a, b, 2.0, DEFAULT_MOMENT_TOL)
    })
}

/// `ℱ₂,₂(μ,ν) = sqrt(f₂,₂(μ, ν_{m_μ−m_ν})² + |m_μ − m_ν|²)`.
pub fn f22_translated(mu: &GridMeasure, nu: &GridMeasure, oversample: usize) -> Result<f64> {
    let params = MetricParams::f22(oversample);
    translated_metric(mu, nu, oversample, |a, b| pfm_spectra(a, b, &params))
}

/// `ℱ₂,₂` on cached spectra (the second is translated here).
pub fn f22_translated_spectra(a: &Spectrum, b: &Spectrum) -> Result<f64> {
    check_mass(a, b, DEFAULT_MOMENT_TOL)?;
    let ca = a.center()?;
    let cb = b.center()?;
    let tau =
        crate::grid_measure::Translation(ca.0.iter().zip(&cb.0).map(|(x, y)| x - y).collect());
    let moved = b.translated(&tau);
    let params = MetricParams::f22(a.oversample());
    let c = pfm_spectra(a, &moved, &params)?;
    Ok((c * c + tau.norm().powi(2)).sqrt())
}

/// `f₀,₂ = (Σ_y |μ_y − ν_y|²)^{1/2}`; masses may differ.
pub fn tv_like(mu: &GridMeasure, nu: &GridMeasure) -> Result<f64> {
    mu.same_grid(nu)?;
    Ok(mu
        .weights()
        .iter()
        .zip(nu.weights())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// A metric value together with its refinement history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Converged {
    pub value: f64,
    /// Oversampling of the reported value.
    pub oversample: usize,
    /// Value at half the reported oversampling.
    pub previous: f64,
    pub rel_change: f64,
    pub converged: bool,
}

impl Converged {
    /// Quadrature-error allowance used when comparing against bounds.
    pub fn allowance(&self) -> f64 {
        (self.value - self.previous).abs()
    }
}

/// Refines `r → 2r` from `start` until the relative change drops below
/// [`CONVERGENCE_REL_TOL`] or the next step would exceed `max` (at least one
/// refinement is always made).
pub fn refine<F>(start: usize, max: usize, mut eval: F) -> Result<Converged>
where
    F: FnMut(usize) -> Result<f64>,
{
    if start == 0 {
        return Err(Error::OversampleZero);
    }
    let mut r = start;
    let mut prev = eval(r)?;
    loop {
        let next_r = 2 * r;
        let next = eval(next_r)?;
        let rel = rel_change(prev, next);
        let converged = rel < CONVERGENCE_REL_TOL;
        if converged || next_r * 2 > max.max(start * 2) {
            return Ok(Converged {
                value: next,
                oversample: next_r,
                previous: prev,
                rel_change: rel,
                converged,
            });
        }
        r = next_r;
        prev = next;
    }
}

/// `|b − a| / |b|`, zero when both vanish.
pub fn rel_change(a: f64, b: f64) -> f64 {
    let diff = (b - a).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / b.abs().max(a.abs())
    }
}

/// [`pfm`] under the refinement protocol, starting at `params.oversample`.
pub fn converged_pfm(
    mu: &GridMeasure,
    nu: &GridMeasure,
    params: &MetricParams,
) -> Result<Converged> {
    params.validate()?;
    mu.same_grid(nu)?;
    refine(params.oversample, MAX_OVERSAMPLE, |r| {
        pfm(mu, nu, &params.with_oversample(r))
    })
}

/// Lattice nodes polished by [`d_sup_refined`].
const POLISH_STARTS: usize = 8;

/// [`d_sup`] followed by a compass search started from the best lattice
/// nodes, evaluating the transform difference directly off the lattice.
/// Still a lower bound of the true sup, but much closer to it on coarse
/// lattices since peaks between nodes are recovered.
pub fn d_sup_refined(mu: &GridMeasure, nu: &GridMeasure, s: f64, oversample: usize) -> Result<f64> {
    mu.same_grid(nu)?;
    let a = transform(mu, oversample)?;
    let b = transform(nu, oversample)?;
    let base = d_sup_spectra(&a, &b, s, DEFAULT_MOMENT_TOL)?;

    let diff: Vec<([f64; 2], f64)> = (0..mu.len())
        .map(|i| (mu.point(i), mu.weights()[i] - nu.weights()[i]))
        .filter(|&(_, w)| w != 0.0)
        .collect();
    let h = a.spacing();
    let t = a.period();
    let dim = mu.dim();
    let ratio = |k: [f64; 2]| {
        let (mut re, mut im) = (0.0, 0.0);
        for &(p, w) in &diff {
            let (sn, cs) = (p[0] * k[0] + p[1] * k[1]).sin_cos();
            re += w * cs;
            im -= w * sn;
        }
        re.hypot(im) / (k[0] * k[0] + k[1] * k[1]).sqrt().powf(s)
    };

    let m = a.lattice_len();
    let last = if dim == 1 { 0 } else { m };
    let mut nodes: Vec<([f64; 2], f64)> = Vec::with_capacity((m + 1) * (last + 1));
    for j0 in 0..=m {
        for j1 in 0..=last {
            if j0 == 0 && j1 == 0 {
                continue;
            }
            let k = [j0 as f64 * h, j1 as f64 * h];
            let d = (a.value_at([j0, j1]) - b.value_at([j0, j1])).norm();
            nodes.push((k, d / (k[0] * k[0] + k[1] * k[1]).sqrt().powf(s)));
        }
    }
    nodes.sort_by(|x, y| y.1.total_cmp(&x.1));
    nodes.truncate(POLISH_STARTS);

    let dirs: &[[f64; 2]] = if dim == 1 {
        &[[1.0, 0.0], [-1.0, 0.0]]
    } else {
        &[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
    };
    // stay clear of the origin, whose limit is already part of `base`
    let min_radius = 0.25 * h;
    let mut best = base;
    for (mut k, mut f) in nodes {
        let mut step = 0.5 * h;
        let mut iters = 0;
        while step > 1e-9 * h && iters < 400 {
            iters += 1;
            let moved = dirs.iter().find_map(|d| {
                let c = [
                    (k[0] + step * d[0]).clamp(0.0, t),
                    (k[1] + step * d[1]).clamp(0.0, if dim == 1 { 0.0 } else { t }),
                ];
                if c[0].hypot(c[1]) < min_radius {
                    return None;
                }
                let fc = ratio(c);
                (fc > f).then_some((c, fc))
            });
            match moved {
                Some((c, fc)) => {
                    k = c;
                    f = fc;
                }
                None => step *= 0.5,
            }
        }
        best = best.max(f);
    }
    Ok(best)
}

/// [`d_sup_refined`] under the refinement protocol, refining up to `max`.
pub fn converged_d_sup(
    mu: &GridMeasure,
    nu: &GridMeasure,
    s: f64,
    start: usize,
    max: usize,
) -> Result<Converged> {
    refine(start, max, |r| d_sup_refined(mu, nu, s, r))
}
