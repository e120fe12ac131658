//! Fourier transform `μ̂(k) = Σ μ_y e^{−i⟨y/N, k⟩}` sampled on the oversampled
//! periodic lattice `k = 2πj/r`, `j ∈ {0,…,rN−1}^d`, with period `T = 2πN`.
//!
//! A [`Spectrum`] keeps the transform of the original weights and applies
//! translations (a phase factor) and dilations (a frequency rescaling)
//! lazily, so translated or dilated measures are never regridded.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid_measure::{Center, GridMeasure, Moments, Translation};

/// Sampled transform of a (possibly translated and dilated) grid measure.
#[derive(Debug, Clone)]
pub struct Spectrum {
    dim: usize,
    n: usize,
    oversample: usize,
    /// Dilation factor γ: the represented transform is `μ̂(k/γ)` (times phase).
    scale: f64,
    /// Offset applied to the undilated support, so the phase at lattice node
    /// `j` is `e^{−i⟨τ, 2πj/r⟩}`.
    shift: [f64; 2],
    base: Arc<Vec<Complex64>>,
    /// `grad[a][j]` is `∂μ̂/∂k_a` on the edge `k_a = 0` with the other lattice
    /// coordinate at index `j`. In dimension 1 it covers every node.
    grad: Arc<[Vec<Complex64>; 2]>,
    moments: Moments,
    mass: f64,
}

fn fft_in_place(planner: &mut FftPlanner<f64>, buf: &mut [Complex64]) {
    let fft = planner.plan_fft_forward(buf.len());
    fft.process(buf);
}

fn padded_fft(planner: &mut FftPlanner<f64>, data: &[Complex64], len: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    buf[..data.len()].copy_from_slice(data);
    fft_in_place(planner, &mut buf);
    buf
}

/// Evaluates the transform of `mu` on the lattice refined by `oversample`.
pub fn transform(mu: &GridMeasure, oversample: usize) -> Result<Spectrum> {
    if oversample == 0 {
        return Err(Error::OversampleZero);
    }
    let n = mu.n();
    let m = oversample * n;
    let w = mu.weights();
    let inv_n = 1.0 / n as f64;
    let mut planner = FftPlanner::new();

    let (base, grad) = if mu.dim() == 1 {
        let data: Vec<Complex64> = w.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let base = padded_fft(&mut planner, &data, m);
        let gdata: Vec<Complex64> = w
            .iter()
            .enumerate()
            .map(|(y, &x)| Complex64::new(0.0, -(y as f64) * inv_n * x))
            .collect();
        let g = padded_fft(&mut planner, &gdata, m);
        (base, [g, Vec::new()])
    } else {
        let mut grid = vec![Complex64::new(0.0, 0.0); m * m];
        let row_fft = planner.plan_fft_forward(m);
        for row in 0..n {
            let dst = &mut grid[row * m..(row + 1) * m];
            for col in 0..n {
                dst[col] = Complex64::new(w[row * n + col], 0.0);
            }
            row_fft.process(dst);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); m];
        for col in 0..m {
            for row in 0..m {
                column[row] = grid[row * m + col];
            }
            row_fft.process(&mut column);
            for row in 0..m {
                grid[row * m + col] = column[row];
            }
        }

        // Edge k0 = 0: v[y1] = Σ_{y0} (−i y0/N) μ; edge k1 = 0: symmetric.
        let mut v0 = vec![Complex64::new(0.0, 0.0); n];
        let mut v1 = vec![Complex64::new(0.0, 0.0); n];
        for y0 in 0..n {
            for y1 in 0..n {
                let x = w[y0 * n + y1];
                v0[y1] += Complex64::new(0.0, -(y0 as f64) * inv_n * x);
                v1[y0] += Complex64::new(0.0, -(y1 as f64) * inv_n * x);
            }
        }
        let g0 = padded_fft(&mut planner, &v0, m);
        let g1 = padded_fft(&mut planner, &v1, m);
        (grid, [g0, g1])
    };

    Ok(Spectrum {
        dim: mu.dim(),
        n,
        oversample,
        scale: 1.0,
        shift: [0.0, 0.0],
        base: Arc::new(base),
        grad: Arc::new(grad),
        moments: mu.moments(),
        mass: mu.mass(),
    })
}

/// Multiplies the spectrum by `e^{−i⟨τ, k⟩}`, i.e. translates the measure by `τ`.
pub fn phase_translate(spec: &Spectrum, tau: &Translation) -> Spectrum {
    spec.translated(tau)
}

/// Direct evaluation of `μ̂_γ(k) = Σ μ_y e^{−i⟨y/N, k/γ⟩}` at an arbitrary frequency.
pub fn dilated_eval(mu: &GridMeasure, gamma: f64, k: &[f64]) -> Result<Complex64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::NonPositiveGamma(gamma));
    }
    if k.len() != mu.dim() {
        return Err(Error::InvalidParams(format!(
            "frequency has {} components, measure has dimension {}",
            k.len(),
            mu.dim()
        )));
    }
    let kk = [k[0] / gamma, k.get(1).copied().unwrap_or(0.0) / gamma];
    let mut acc = Complex64::new(0.0, 0.0);
    for (flat, w) in mu.support() {
        let p = mu.point(flat);
        let arg = -(p[0] * kk[0] + p[1] * kk[1]);
        acc += Complex64::from_polar(w, arg);
    }
    Ok(acc)
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn oversample(&self) -> usize {
        self.oversample
    }

    /// Number of lattice nodes per axis in one period, `rN`.
    pub fn lattice_len(&self) -> usize {
        self.oversample * self.n
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn shift(&self) -> [f64; 2] {
        self.shift
    }

    /// Period per axis, `γ·2πN`.
    pub fn period(&self) -> f64 {
        self.scale * 2.0 * PI * self.n as f64
    }

    /// Lattice spacing per axis, `γ·2π/r`.
    pub fn spacing(&self) -> f64 {
        self.scale * 2.0 * PI / self.oversample as f64
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Raw moments of the represented measure (after translation and dilation).
    pub fn moments(&self) -> &Moments {
        &self.moments
    }

    fn unit_freq(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.oversample as f64
    }

    fn phase(&self, idx: [usize; 2]) -> Complex64 {
        if self.shift == [0.0, 0.0] {
            return Complex64::new(1.0, 0.0);
        }
        let arg =
            -(self.shift[0] * self.unit_freq(idx[0]) + self.shift[1] * self.unit_freq(idx[1]));
        Complex64::from_polar(1.0, arg)
    }

    fn base_at(&self, idx: [usize; 2]) -> Complex64 {
        let m = self.lattice_len();
        if self.dim == 1 {
            self.base[idx[0] % m]
        } else {
            self.base[(idx[0] % m) * m + idx[1] % m]
        }
    }

    /// Transform value at lattice node `j` (per-axis indices in `0..=rN`; the
    /// index `rN` is the far edge of the closed period cell). In dimension 1
    /// the second index is ignored.
    pub fn value_at(&self, idx: [usize; 2]) -> Complex64 {
        let idx = if self.dim == 1 { [idx[0], 0] } else { idx };
        self.base_at(idx) * self.phase(idx)
    }

    /// Dense values on the half-open lattice `{0,…,rN−1}^d`, row-major.
    pub fn values(&self) -> Vec<Complex64> {
        let m = self.lattice_len();
        if self.dim == 1 {
            (0..m).map(|j| self.value_at([j, 0])).collect()
        } else {
            (0..m * m).map(|f| self.value_at([f / m, f % m])).collect()
        }
    }

    /// Gradient component `∂/∂k_axis` (in the spectrum's own, possibly
    /// dilated, frequency units) at node `idx`. Available on the edges
    /// `idx[axis] ∈ {0, rN}` in dimension 2 and at every node in dimension 1.
    pub fn grad_at(&self, axis: usize, idx: [usize; 2]) -> Complex64 {
        let m = self.lattice_len();
        let (b, g) = if self.dim == 1 {
            (self.base_at([idx[0], 0]), self.grad[0][idx[0] % m])
        } else {
            debug_assert!(idx[axis].is_multiple_of(m), "gradient only stored on edges");
            let other = idx[1 - axis];
            (self.base_at(idx), self.grad[axis][other % m])
        };
        let tau = self.shift[axis];
        let inner = g + Complex64::new(0.0, -tau) * b;
        self.phase(idx) * inner / self.scale
    }

    /// Spectrum of the measure shifted by `tau` (in the spectrum's own units).
    pub fn translated(&self, tau: &Translation) -> Spectrum {
        let t = tau.padded();
        let mut out = self.clone();
        out.shift = [
            self.shift[0] + self.scale * t[0],
            self.shift[1] + self.scale * t[1],
        ];
        out.moments = self.moments.translated(&t);
        out
    }

    /// Spectrum of the γ-dilated measure, evaluated on the dilated lattice.
    pub fn dilated(&self, gamma: f64) -> Result<Spectrum> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::NonPositiveGamma(gamma));
        }
        let mut out = self.clone();
        out.scale = self.scale * gamma;
        out.moments = self.moments.dilated(gamma);
        Ok(out)
    }

    /// Center recovered from the transform: `m = i∇μ̂(0)/μ̂(0)`.
    pub fn center(&self) -> Result<Center> {
        let b0 = self.value_at([0, 0]);
        if b0.re <= 0.0 {
            return Err(Error::ZeroMass);
        }
        let c = (0..self.dim)
            .map(|axis| (Complex64::new(0.0, 1.0) * self.grad_at(axis, [0, 0])).re / b0.re)
            .collect();
        Ok(Center(c))
    }

    /// Checks that two spectra live on the same lattice.
    pub fn compatible(&self, other: &Spectrum) -> Result<()> {
        if self.dim != other.dim || self.n != other.n {
            return Err(Error::GridMismatch {
                dim_a: self.dim,
                n_a: self.n,
                dim_b: other.dim,
                n_b: other.n,
            });
        }
        if self.oversample != other.oversample || self.scale != other.scale {
            return Err(Error::InvalidParams(format!(
                "spectra sampled on different lattices (r={} γ={} vs r={} γ={})",
                self.oversample, self.scale, other.oversample, other.scale
            )));
        }
        Ok(())
    }
}

/// Thread-safe cache of spectra keyed by `(measure id, oversample)`.
#[derive(Debug, Default)]
pub struct SpectrumCache {
    inner: RwLock<HashMap<(usize, usize), Arc<Spectrum>>>,
}

impl SpectrumCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the cached spectrum or computes and stores it. Concurrent
    /// callers may both compute; the first insert wins and both get equal data.
    pub fn get_or_compute(
        &self,
        id: usize,
        mu: &GridMeasure,
        oversample: usize,
    ) -> Result<Arc<Spectrum>> {
        if let Some(s) = self
            .inner
            .read()
            .expect("spectrum cache poisoned")
            .get(&(id, oversample))
        {
            return Ok(Arc::clone(s));
        }
        let spec = Arc::new(transform(mu, oversample)?);
        let mut guard = self.inner.write().expect("spectrum cache poisoned");
        Ok(Arc::clone(guard.entry((id, oversample)).or_insert(spec)))
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("spectrum cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_measure(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> GridMeasure {
        let w: Vec<f64> = (0..n.pow(dim as u32)).map(|_| rng.gen::<f64>()).collect();
        GridMeasure::new(dim, n, w).unwrap().normalized().unwrap()
    }

    fn direct(mu: &GridMeasure, k: [f64; 2]) -> Complex64 {
        dilated_eval(mu, 1.0, &k[..mu.dim()]).unwrap()
    }

    #[test]
    fn delta_at_origin_is_constant() {
        let mu = GridMeasure::delta(2, 4, &[0, 0]).unwrap();
        let s = transform(&mu, 3).unwrap();
        for v in s.values() {
            assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn uniform_kills_nonzero_modes() {
        let mu = GridMeasure::uniform(2, 4).unwrap();
        let v = transform(&mu, 1).unwrap().values();
        assert_abs_diff_eq!(v[0].re, 1.0, epsilon = 1e-14);
        for z in &v[1..] {
            assert!(z.norm() < 1e-14);
        }
    }

    #[test]
    fn matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in [1, 2] {
            let mu = random_measure(&mut rng, dim, 8);
            for r in [1, 3] {
                let s = transform(&mu, r).unwrap();
                let m = s.lattice_len();
                let h = s.spacing();
                let side = if dim == 1 { 1 } else { m + 1 };
                for j0 in 0..=m {
                    for j1 in 0..side {
                        let got = s.value_at([j0, j1]);
                        let want = direct(&mu, [j0 as f64 * h, j1 as f64 * h]);
                        assert!((got - want).norm() < 1e-10, "{dim} {r} {j0} {j1}");
                    }
                }
            }
        }
    }

    #[test]
    fn spectrum_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mu = random_measure(&mut rng, 2, 6);
        let s = transform(&mu, 2).unwrap();
        let m = s.lattice_len();
        let v = s.values();
        assert_abs_diff_eq!(v[0].re, mu.mass(), epsilon = 1e-12);
        for j0 in 0..m {
            for j1 in 0..m {
                let a = v[j0 * m + j1];
                let b = v[((m - j0) % m) * m + (m - j1) % m];
                assert!(a.norm() <= mu.mass() + 1e-12);
                assert!((a - b.conj()).norm() < 1e-12);
            }
        }
        let coarse = transform(&mu, 1).unwrap().values();
        let n = mu.n();
        for j0 in 0..n {
            for j1 in 0..n {
                assert!((coarse[j0 * n + j1] - v[2 * j0 * m + 2 * j1]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn translating_delta_shifts_to_neighbour() {
        let n = 8;
        let d0 = GridMeasure::delta(2, n, &[0, 0]).unwrap();
        let d1 = GridMeasure::delta(2, n, &[1, 0]).unwrap();
        let moved = phase_translate(
            &transform(&d0, 2).unwrap(),
            &Translation(vec![1.0 / n as f64, 0.0]),
        );
        let target = transform(&d1, 2).unwrap();
        for (a, b) in moved.values().iter().zip(target.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mu = random_measure(&mut rng, 2, 5);
        let s = transform(&mu, 2)
            .unwrap()
            .translated(&Translation(vec![0.3, -0.2]))
            .dilated(0.7)
            .unwrap();
        let m = s.lattice_len();
        let h = s.spacing();
        let eval = |k0: f64, k1: f64| {
            // μ_τ dilated by γ: Σ w e^{−i⟨y+τ, k/γ⟩}
            let mut acc = Complex64::new(0.0, 0.0);
            for (f, w) in mu.support() {
                let p = mu.point(f);
                let arg = -((p[0] + 0.3) * k0 + (p[1] - 0.2) * k1) / 0.7;
                acc += Complex64::from_polar(w, arg);
            }
            acc
        };
        let eps = 1e-6;
        for j in [0, 3, m] {
            for (axis, idx) in [(0, [0, j]), (0, [m, j]), (1, [j, 0]), (1, [j, m])] {
                let k = [idx[0] as f64 * h, idx[1] as f64 * h];
                assert!((s.value_at(idx) - eval(k[0], k[1])).norm() < 1e-10);
                let fd = if axis == 0 {
                    (eval(k[0] + eps, k[1]) - eval(k[0] - eps, k[1])) / (2.0 * eps)
                } else {
                    (eval(k[0], k[1] + eps) - eval(k[0], k[1] - eps)) / (2.0 * eps)
                };
                assert!((s.grad_at(axis, idx) - fd).norm() < 1e-7);
            }
        }
    }

    #[test]
    fn center_from_phase_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mu = random_measure(&mut rng, 2, 8);
        let nu = random_measure(&mut rng, 2, 8);
        let tau = crate::grid_measure::matching_translation(&mu, &nu).unwrap();
        let nu_tau = transform(&nu, 1).unwrap().translated(&tau);
        let c = nu_tau.center().unwrap();
        assert!(c.distance(&mu.center().unwrap()) < 1e-12);
        let again = crate::grid_measure::Translation(
            mu.center()
                .unwrap()
                .0
                .iter()
                .zip(&c.0)
                .map(|(a, b)| a - b)
                .collect(),
        );
        assert!(again.norm() < 1e-12);
    }

    #[test]
    fn dilated_eval_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mu = random_measure(&mut rng, 2, 4);
        let s = transform(&mu, 1).unwrap();
        let h = s.spacing();
        let at =
            |j: [usize; 2]| dilated_eval(&mu, 1.0, &[j[0] as f64 * h, j[1] as f64 * h]).unwrap();
        assert!((at([1, 2]) - s.value_at([1, 2])).norm() < 1e-12);
        let k0 = [0.4, 1.3];
        let a = dilated_eval(&mu, 2.0, &[2.0 * k0[0], 2.0 * k0[1]]).unwrap();
        let b = dilated_eval(&mu, 1.0, &k0).unwrap();
        assert!((a - b).norm() < 1e-12);
        let t = s.period();
        let p = dilated_eval(&mu, 1.0, &[k0[0] + t, k0[1]]).unwrap();
        assert!((p - b).norm() < 1e-10);
        assert_eq!(
            dilated_eval(&mu, 0.0, &k0).unwrap_err(),
            Error::NonPositiveGamma(0.0)
        );
        // 1/N dilation is 2π-periodic
        let n = mu.n() as f64;
        let q1 = dilated_eval(&mu, 1.0 / n, &k0).unwrap();
        let q2 = dilated_eval(&mu, 1.0 / n, &[k0[0] + 2.0 * PI, k0[1] - 2.0 * PI]).unwrap();
        assert!((q1 - q2).norm() < 1e-10);
        let delta = GridMeasure::delta(2, 4, &[0, 0]).unwrap();
        assert!((dilated_eval(&delta, 3.7, &k0).unwrap() - 1.0).norm() < 1e-15);
    }

    #[test]
    fn parseval_on_unit_lattice() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mu = random_measure(&mut rng, 2, 8);
        let nu = random_measure(&mut rng, 2, 8);
        let a = transform(&mu, 1).unwrap().values();
        let b = transform(&nu, 1).unwrap().values();
        let lhs: f64 = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            / 64.0;
        let rhs: f64 = mu
            .weights()
            .iter()
            .zip(nu.weights())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        assert!((lhs - rhs).abs() <= 1e-10 * rhs);
    }

    #[test]
    fn cache_reuses_entries() {
        let mu = GridMeasure::uniform(2, 4).unwrap();
        let cache = SpectrumCache::new();
        let a = cache.get_or_compute(0, &mu, 2).unwrap();
        let b = cache.get_or_compute(0, &mu, 2).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        cache.get_or_compute(0, &mu, 4).unwrap();
        assert_eq!(cache.len(), 2);
        assert_eq!(transform(&mu, 0).unwrap_err(), Error::OversampleZero);
    }
}
