//! Experiment plumbing: metric selection, pairwise matrices, runtime tables
//! and rank correlation.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier_metrics::{
    d_sup_spectra, f22_translated_spectra, pfm_spectra, tv_like, MetricParams, DEFAULT_MOMENT_TOL,
};
use crate::grid_measure::{GridMeasure, Translation};
use crate::spectrum::{Spectrum, SpectrumCache};
use crate::wasserstein::wp_exact_guarded;

/// Which distance to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Metric {
    W1,
    W2,
    /// `f^{(α)}_{s,p}`.
    Pfm {
        s: f64,
        p: f64,
        alpha: f64,
    },
    /// Sup-metric `d_s`.
    Dsup {
        s: f64,
    },
    /// `𝒟₂`.
    D2t,
    /// `ℱ₂,₂`.
    F22t,
    /// `f₀,₂`, the weight-difference norm.
    Tv,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::W1 => write!(f, "w1"),
            Metric::W2 => write!(f, "w2"),
            Metric::Pfm { s, p, alpha } => write!(f, "f[s={s};p={p};alpha={alpha}]"),
            Metric::Dsup { s } => write!(f, "dsup[s={s}]"),
            Metric::D2t => write!(f, "d2t"),
            Metric::F22t => write!(f, "f22t"),
            Metric::Tv => write!(f, "tv"),
        }
    }
}

impl Metric {
    pub fn uses_spectra(&self) -> bool {
        matches!(
            self,
            Metric::Pfm { .. } | Metric::Dsup { .. } | Metric::D2t | Metric::F22t
        )
    }
}

/// Settings for metric evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub oversample: usize,
    pub guard: usize,
}

fn translated_d2_spectra(a: &Spectrum, b: &Spectrum) -> Result<f64> {
    let ca = a.center()?;
    let cb = b.center()?;
    let tau = Translation(ca.0.iter().zip(&cb.0).map(|(x, y)| x - y).collect());
    let core = d_sup_spectra(a, &b.translated(&tau), 2.0, DEFAULT_MOMENT_TOL)?;
    Ok((core * core + tau.norm().powi(2)).sqrt())
}

/// Evaluates a spectral metric on precomputed spectra.
pub fn eval_spectra(metric: Metric, a: &Spectrum, b: &Spectrum) -> Result<f64> {
    match metric {
        Metric::Pfm { s, p, alpha } => {
            pfm_spectra(a, b, &MetricParams::new(s, p, alpha, a.oversample()))
        }
        Metric::Dsup { s } => d_sup_spectra(a, b, s, DEFAULT_MOMENT_TOL),
        Metric::D2t => translated_d2_spectra(a, b),
        Metric::F22t => f22_translated_spectra(a, b),
        _ => Err(Error::InvalidParams(format!(
            "{metric} is not a spectral metric"
        ))),
    }
}

/// Evaluates `metric` between two measures.
pub fn evaluate(
    metric: Metric,
    mu: &GridMeasure,
    nu: &GridMeasure,
    cfg: &EvalConfig,
) -> Result<f64> {
    mu.same_grid(nu)?;
    match metric {
        Metric::W1 => Ok(wp_exact_guarded(mu, nu, 1, cfg.guard)?.0),
        Metric::W2 => Ok(wp_exact_guarded(mu, nu, 2, cfg.guard)?.0),
        Metric::Tv => tv_like(mu, nu),
        _ => {
            let a = crate::spectrum::transform(mu, cfg.oversample)?;
            let b = crate::spectrum::transform(nu, cfg.oversample)?;
            eval_spectra(metric, &a, &b)
        }
    }
}

/// One unordered pair of a pairwise run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub image_a: String,
    pub image_b: String,
    pub metric: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub value: f64,
    pub seconds: f64,
}

/// Output of [`pairwise_matrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRun {
    /// Rows sorted by `(image_a, image_b)`; failed pairs are left out.
    pub rows: Vec<MatrixRow>,
    /// `(image_a, image_b, error)` for pairs whose metric failed.
    pub errors: Vec<(String, String, Error)>,
    /// Seconds spent filling the spectrum cache.
    pub warmup_seconds: f64,
}

/// All unordered distinct pairs `(i, j)`, `i < j`, evaluated in parallel.
/// Spectra are computed once per image; timing covers the metric call only.
pub fn pairwise_matrix(
    images: &[(String, GridMeasure)],
    metric: Metric,
    cfg: &EvalConfig,
) -> MatrixRun {
    let cache = SpectrumCache::new();
    let t0 = Instant::now();
    let spectra: Vec<Option<Arc<Spectrum>>> = if metric.uses_spectra() {
        images
            .par_iter()
            .enumerate()
            .map(|(i, (_, m))| cache.get_or_compute(i, m, cfg.oversample).ok())
            .collect()
    } else {
        vec![None; images.len()]
    };
    let warmup_seconds = t0.elapsed().as_secs_f64();

    let pairs: Vec<(usize, usize)> = (0..images.len())
        .flat_map(|i| (i + 1..images.len()).map(move |j| (i, j)))
        .collect();
    type Timed = Result<(f64, f64)>;
    let results: Vec<(usize, usize, Timed)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (mu, nu) = (&images[i].1, &images[j].1);
            let res = (|| {
                mu.same_grid(nu)?;
                let start = Instant::now();
                let v = match (&spectra[i], &spectra[j]) {
                    (Some(a), Some(b)) => eval_spectra(metric, a, b)?,
                    _ => evaluate(metric, mu, nu, cfg)?,
                };
                Ok((v, start.elapsed().as_secs_f64()))
            })();
            (i, j, res)
        })
        .collect();

    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (i, j, res) in results {
        let (a, b) = ordered(&images[i].0, &images[j].0);
        match res {
            Ok((value, seconds)) => rows.push(MatrixRow {
                image_a: a.to_string(),
                image_b: b.to_string(),
                metric: metric.to_string(),
                n: images[i].1.n(),
                value,
                seconds,
            }),
            Err(e) => errors.push((a.to_string(), b.to_string(), e)),
        }
    }
    rows.sort_by(|x, y| (&x.image_a, &x.image_b).cmp(&(&y.image_a, &y.image_b)));
    errors.sort_by(|x, y| (&x.0, &x.1).cmp(&(&y.0, &y.1)));
    MatrixRun {
        rows,
        errors,
        warmup_seconds,
    }
}

fn ordered<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Sample mean and (n−1)-normalized standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Ranks with ties sharing their average rank (1-based).
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, _) = mean_std(x);
    let (my, _) = mean_std(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    pearson(&ranks(x), &ranks(y))
}

/// Mean and standard deviation of per-pair seconds for one metric and size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub mean: f64,
    pub std: f64,
    pub samples: usize,
}

/// One line of the runtime table; `None` marks a skipped cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub w1: Option<Timing>,
    pub w2: Option<Timing>,
    pub f12: Option<Timing>,
    pub f22: Option<Timing>,
}

/// Times `metric` on each pair with a fresh computation (no cache).
/// Returns `None` if any pair fails (e.g. exceeds the solver guard).
pub fn time_metric(
    pairs: &[(GridMeasure, GridMeasure)],
    metric: Metric,
    cfg: &EvalConfig,
) -> Option<Timing> {
    let mut secs = Vec::with_capacity(pairs.len());
    for (mu, nu) in pairs {
        let start = Instant::now();
        evaluate(metric, mu, nu, cfg).ok()?;
        secs.push(start.elapsed().as_secs_f64());
    }
    let (mean, std) = mean_std(&secs);
    Some(Timing {
        mean,
        std,
        samples: secs.len(),
    })
}

/// Fills one runtime-table row. Transport metrics are skipped when the
/// dense problem exceeds `cfg.guard` or `with_transport` is false.
pub fn bench_row(
    pairs: &[(GridMeasure, GridMeasure)],
    cfg: &EvalConfig,
    with_transport: bool,
) -> BenchRow {
    let n = pairs.first().map_or(0, |p| p.0.n());
    let fits = pairs
        .iter()
        .all(|(a, b)| a.support_size().saturating_mul(b.support_size()) <= cfg.guard);
    let transport = with_transport && fits;
    BenchRow {
        n,
        w1: transport
            .then(|| time_metric(pairs, Metric::W1, cfg))
            .flatten(),
        w2: transport
            .then(|| time_metric(pairs, Metric::W2, cfg))
            .flatten(),
        f12: time_metric(
            pairs,
            Metric::Pfm {
                s: 1.0,
                p: 2.0,
                alpha: 0.0,
            },
            cfg,
        ),
        f22: time_metric(pairs, Metric::F22t, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_basics() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((spearman(&x, &[2.0, 4.0, 6.0, 8.0, 100.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        // ties: ranks of [1,1,2] are [1.5,1.5,3]
        assert_eq!(ranks(&[1.0, 1.0, 2.0]), vec![1.5, 1.5, 3.0]);
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]);
        assert!((r - 0.8).abs() < 1e-12);
    }

    #[test]
    fn mean_std_values() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matrix_rows_are_sorted_and_complete() {
        let mut rng = crate::corpus::rng(1);
        let images: Vec<(String, GridMeasure)> = (0..5)
            .map(|i| {
                (
                    format!("img{}", 4 - i),
                    crate::corpus::random_measure(&mut rng, 2, 4),
                )
            })
            .collect();
        let cfg = EvalConfig {
            oversample: 2,
            guard: 1_000_000,
        };
        let run = pairwise_matrix(&images, Metric::F22t, &cfg);
        assert_eq!(run.rows.len(), 10);
        assert!(run.errors.is_empty());
        assert!(run
            .rows
            .windows(2)
            .all(|w| (&w[0].image_a, &w[0].image_b) < (&w[1].image_a, &w[1].image_b)));
        // cached path equals the uncached library call
        let row = &run.rows[0];
        let find = |name: &str| &images.iter().find(|(n, _)| n == name).unwrap().1;
        let direct = evaluate(Metric::F22t, find(&row.image_a), find(&row.image_b), &cfg).unwrap();
        let flipped = evaluate(Metric::F22t, find(&row.image_b), find(&row.image_a), &cfg).unwrap();
        assert!(row.value == direct || row.value == flipped);
    }

    #[test]
    fn metric_names() {
        assert_eq!(Metric::W1.to_string(), "w1");
        assert_eq!(
            Metric::Pfm {
                s: 1.0,
                p: 2.0,
                alpha: 0.0
            }
            .to_string(),
            "f[s=1;p=2;alpha=0]"
        );
    }
}
