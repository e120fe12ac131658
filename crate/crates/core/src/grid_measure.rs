//! Discrete measures on the regular grid `G_N = {y/N : y ∈ {0,…,N−1}^d}` ⊂ [0,1)^d.
//!
//! Weights are stored densely in row-major order; the grid point with
//! multi-index `(i, j)` sits at coordinates `(i/N, j/N)`. Translations and
//! dilations never regrid: they are light views over the original weights.

use crate::error::{Error, Result};

/// Absolute tolerance on the total mass of a probability measure.
pub const PROBABILITY_TOL: f64 = 1e-9;

/// Highest moment order tracked by [`Moments`].
pub const MAX_MOMENT_ORDER: usize = 3;

/// Nonnegative weights on the regular grid `G_N` in dimension 1 or 2.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    dim: usize,
    n: usize,
    weights: Vec<f64>,
    mass: f64,
}

/// First moment of a measure divided by its mass, in grid coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Center(pub Vec<f64>);

/// Offset applied to every support point.
#[derive(Debug, Clone, PartialEq)]
pub struct Translation(pub Vec<f64>);

impl Center {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn distance(&self, other: &Center) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl Translation {
    pub fn zero(dim: usize) -> Self {
        Translation(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|t| t * t).sum::<f64>().sqrt()
    }

    /// Pads to two components; the second is zero in dimension 1.
    pub fn padded(&self) -> [f64; 2] {
        [
            self.0.first().copied().unwrap_or(0.0),
            self.0.get(1).copied().unwrap_or(0.0),
        ]
    }

    pub fn sub(&self, other: &Translation) -> Translation {
        Translation(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Translation) -> Translation {
        Translation(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|t| t.is_finite())
    }
}

/// Raw mixed moments `m[a][b] = Σ w · y₀^a · y₁^b` for `a + b ≤ 3`.
///
/// In dimension 1 the second coordinate is identically zero, so only the
/// `m[a][0]` entries are populated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub dim: usize,
    pub m: [[f64; MAX_MOMENT_ORDER + 1]; MAX_MOMENT_ORDER + 1],
}

impl Moments {
    pub fn zero(dim: usize) -> Self {
        Moments {
            dim,
            m: [[0.0; MAX_MOMENT_ORDER + 1]; MAX_MOMENT_ORDER + 1],
        }
    }

    pub fn mass(&self) -> f64 {
        self.m[0][0]
    }

    /// Moments of the measure after shifting every support point by `tau`.
    pub fn translated(&self, tau: &[f64; 2]) -> Moments {
        let mut out = Moments::zero(self.dim);
        for a in 0..=MAX_MOMENT_ORDER {
            for b in 0..=(MAX_MOMENT_ORDER - a) {
                let mut acc = 0.0;
                for i in 0..=a {
                    for j in 0..=b {
                        acc += binomial(a, i) as f64
                            * binomial(b, j) as f64
                            * tau[0].powi((a - i) as i32)
                            * tau[1].powi((b - j) as i32)
                            * self.m[i][j];
                    }
                }
                out.m[a][b] = acc;
            }
        }
        out
    }

    /// Moments after mapping every support point `y` to `y / gamma`.
    pub fn dilated(&self, gamma: f64) -> Moments {
        let mut out = *self;
        for a in 0..=MAX_MOMENT_ORDER {
            for b in 0..=(MAX_MOMENT_ORDER - a) {
                out.m[a][b] /= gamma.powi((a + b) as i32);
            }
        }
        out
    }

    pub fn diff(&self, other: &Moments) -> Moments {
        let mut out = *self;
        for a in 0..=MAX_MOMENT_ORDER {
            for b in 0..=(MAX_MOMENT_ORDER - a) {
                out.m[a][b] -= other.m[a][b];
            }
        }
        out
    }

    /// Largest absolute mixed moment of exact total order `order`.
    pub fn max_abs_of_order(&self, order: usize) -> f64 {
        (0..=order)
            .map(|a| self.m[a][order - a].abs())
            .fold(0.0, f64::max)
    }

    pub fn center(&self) -> Result<Center> {
        let mass = self.mass();
        if mass <= 0.0 {
            return Err(Error::ZeroMass);
        }
        let c: Vec<f64> = (0..self.dim)
            .map(|axis| {
                if axis == 0 {
                    self.m[1][0] / mass
                } else {
                    self.m[0][1] / mass
                }
            })
            .collect();
        Ok(Center(c))
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(Error::InvalidWeights(format!(
            "dimension must be 1 or 2, got {dim}"
        )))
    }
}

impl GridMeasure {
    /// Builds a measure from dense row-major weights of length `n^dim`.
    pub fn new(dim: usize, n: usize, weights: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if n == 0 {
            return Err(Error::InvalidWeights("grid resolution must be >= 1".into()));
        }
        let expected = n.pow(dim as u32);
        if weights.len() != expected {
            return Err(Error::InvalidWeights(format!(
                "expected {expected} weights for N={n}, d={dim}, got {}",
                weights.len()
            )));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidWeights(format!(
                "weight {w} at flat index {i} is negative or not finite"
            )));
        }
        let mass = weights.iter().sum();
        Ok(GridMeasure {
            dim,
            n,
            weights,
            mass,
        })
    }

    /// Unit mass at a single grid point.
    pub fn delta(dim: usize, n: usize, index: &[usize]) -> Result<Self> {
        check_dim(dim)?;
        if index.len() != dim || index.iter().any(|&i| i >= n) {
            return Err(Error::InvalidWeights(format!(
                "index {index:?} outside grid N={n}"
            )));
        }
        let mut weights = vec![0.0; n.pow(dim as u32)];
        weights[flat_index(n, index)] = 1.0;
        GridMeasure::new(dim, n, weights)
    }

    pub fn uniform(dim: usize, n: usize) -> Result<Self> {
        check_dim(dim)?;
        let len = n.pow(dim as u32);
        GridMeasure::new(dim, n, vec![1.0 / len as f64; len])
    }

    /// Builds a measure from sparse `(multi-index, weight)` entries.
    pub fn from_entries(dim: usize, n: usize, entries: &[(&[usize], f64)]) -> Result<Self> {
        check_dim(dim)?;
        let mut weights = vec![0.0; n.pow(dim as u32)];
        for (index, w) in entries {
            if index.len() != dim || index.iter().any(|&i| i >= n) {
                return Err(Error::InvalidWeights(format!(
                    "index {index:?} outside grid N={n}"
                )));
            }
            weights[flat_index(n, index)] += w;
        }
        GridMeasure::new(dim, n, weights)
    }

    /// Normalizes a square grayscale image to a probability measure.
    pub fn from_image(pixels: &[Vec<f64>]) -> Result<Self> {
        let rows = pixels.len();
        let cols = pixels.first().map_or(0, Vec::len);
        if pixels.iter().any(|row| row.len() != cols) {
            return Err(Error::Format("ragged pixel rows".into()));
        }
        let flat: Vec<f64> = pixels.iter().flatten().copied().collect();
        GridMeasure::from_pixel_buffer(rows, cols, &flat)
    }

    /// Same as [`GridMeasure::from_image`] for a row-major pixel buffer.
    pub fn from_pixel_buffer(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if rows != cols || rows == 0 {
            return Err(Error::NonSquare { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(Error::Format(format!(
                "pixel buffer has {} entries, expected {}",
                data.len(),
                rows * cols
            )));
        }
        for (i, &v) in data.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::NegativePixel {
                    row: i / cols,
                    col: i % cols,
                    value: v,
                });
            }
        }
        let total: f64 = data.iter().sum();
        if total <= 0.0 {
            return Err(Error::AllZeroImage);
        }
        let weights = data.iter().map(|v| v / total).collect();
        GridMeasure::new(2, rows, weights)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_probability(&self) -> bool {
        (self.mass - 1.0).abs() <= PROBABILITY_TOL
    }

    pub fn weight(&self, index: &[usize]) -> f64 {
        self.weights[flat_index(self.n, index)]
    }

    /// Multi-index of a flat position, padded with a zero in dimension 1.
    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        if self.dim == 1 {
            [flat, 0]
        } else {
            [flat / self.n, flat % self.n]
        }
    }

    /// Grid coordinates `y/N` of a flat position, padded in dimension 1.
    pub fn point(&self, flat: usize) -> [f64; 2] {
        let idx = self.multi_index(flat);
        let n = self.n as f64;
        if self.dim == 1 {
            [idx[0] as f64 / n, 0.0]
        } else {
            [idx[0] as f64 / n, idx[1] as f64 / n]
        }
    }

    /// Flat positions and weights of the strictly positive entries.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, w)| (i, *w))
    }

    pub fn support_size(&self) -> usize {
        self.weights.iter().filter(|w| **w > 0.0).count()
    }

    pub fn same_grid(&self, other: &GridMeasure) -> Result<()> {
        if self.dim != other.dim || self.n != other.n {
            return Err(Error::GridMismatch {
                dim_a: self.dim,
                n_a: self.n,
                dim_b: other.dim,
                n_b: other.n,
            });
        }
        Ok(())
    }

    pub fn moments(&self) -> Moments {
        let mut out = Moments::zero(self.dim);
        for (flat, w) in self.support() {
            let [x, y] = self.point(flat);
            let mut xa = 1.0;
            for a in 0..=MAX_MOMENT_ORDER {
                let mut yb = 1.0;
                for b in 0..=(MAX_MOMENT_ORDER - a) {
                    out.m[a][b] += w * xa * yb;
                    yb *= y;
                }
                xa *= x;
            }
        }
        out
    }

    pub fn center(&self) -> Result<Center> {
        if self.mass <= 0.0 {
            return Err(Error::ZeroMass);
        }
        let mut c = vec![0.0; self.dim];
        for (flat, w) in self.support() {
            let p = self.point(flat);
            for (axis, ci) in c.iter_mut().enumerate() {
                *ci += p[axis] * w;
            }
        }
        c.iter_mut().for_each(|ci| *ci /= self.mass);
        Ok(Center(c))
    }

    /// Copy rescaled to unit mass.
    pub fn normalized(&self) -> Result<Self> {
        if self.mass <= 0.0 {
            return Err(Error::ZeroMass);
        }
        GridMeasure::new(
            self.dim,
            self.n,
            self.weights.iter().map(|w| w / self.mass).collect(),
        )
    }

    pub fn translate(&self, tau: Translation) -> Result<TranslatedMeasure<'_>> {
        if tau.dim() != self.dim || !tau.is_finite() {
            return Err(Error::InvalidWeights(format!(
                "translation {:?} does not match dimension {}",
                tau.0, self.dim
            )));
        }
        Ok(TranslatedMeasure { base: self, tau })
    }

    pub fn dilate(&self, gamma: f64) -> Result<DilatedMeasure<'_>> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::NonPositiveGamma(gamma));
        }
        Ok(DilatedMeasure { base: self, gamma })
    }
}

pub(crate) fn flat_index(n: usize, index: &[usize]) -> usize {
    index.iter().fold(0, |acc, &i| acc * n + i)
}

/// The unique translation `τ = m_μ − m_ν` that moves the center of `nu` onto
/// the center of `mu`.
pub fn matching_translation(mu: &GridMeasure, nu: &GridMeasure) -> Result<Translation> {
    mu.same_grid(nu)?;
    let cm = mu.center()?;
    let cn = nu.center()?;
    Ok(Translation(
        cm.0.iter().zip(&cn.0).map(|(a, b)| a - b).collect(),
    ))
}

/// `base` with every support point shifted by `tau`.
#[derive(Debug, Clone)]
pub struct TranslatedMeasure<'a> {
    pub base: &'a GridMeasure,
    pub tau: Translation,
}

impl TranslatedMeasure<'_> {
    pub fn center(&self) -> Result<Center> {
        let c = self.base.center()?;
        Ok(Center(
            c.0.iter().zip(&self.tau.0).map(|(a, t)| a + t).collect(),
        ))
    }

    pub fn moments(&self) -> Moments {
        self.base.moments().translated(&self.tau.padded())
    }

    /// Shifted coordinates of a flat grid position.
    pub fn point(&self, flat: usize) -> [f64; 2] {
        let p = self.base.point(flat);
        let t = self.tau.padded();
        [p[0] + t[0], p[1] + t[1]]
    }
}

/// The γ-dilated measure: support points `y` map to `y/γ`, so the transform
/// satisfies `μ̂_γ(k) = μ̂(k/γ)`.
#[derive(Debug, Clone, Copy)]
pub struct DilatedMeasure<'a> {
    pub base: &'a GridMeasure,
    pub gamma: f64,
}

impl DilatedMeasure<'_> {
    pub fn point(&self, flat: usize) -> [f64; 2] {
        let p = self.base.point(flat);
        [p[0] / self.gamma, p[1] / self.gamma]
    }

    pub fn moments(&self) -> Moments {
        self.base.moments().dilated(self.gamma)
    }

    /// Period of the dilated transform along each axis, `γ·2πN`.
    pub fn period(&self) -> f64 {
        self.gamma * 2.0 * std::f64::consts::PI * self.base.n() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_image_normalizes() {
        let mu = GridMeasure::from_image(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(mu.weights().iter().all(|&w| w == 0.25));
        assert_eq!(mu.dim(), 2);
        assert_abs_diff_eq!(mu.mass(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_pixel_image_is_delta() {
        let mu = GridMeasure::from_image(&[vec![2.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(mu.weight(&[0, 0]), 1.0);
        assert_eq!(mu.support_size(), 1);
    }

    #[test]
    fn image_errors() {
        assert_eq!(
            GridMeasure::from_image(&[vec![0.0, 0.0], vec![0.0, 0.0]]),
            Err(Error::AllZeroImage)
        );
        assert!(matches!(
            GridMeasure::from_image(&[vec![1.0, -1.0], vec![0.0, 0.0]]),
            Err(Error::NegativePixel { row: 0, col: 1, .. })
        ));
        assert_eq!(
            GridMeasure::from_image(&[vec![1.0, 1.0, 1.0], vec![1.0, 1.0, 1.0]]),
            Err(Error::NonSquare { rows: 2, cols: 3 })
        );
    }

    #[test]
    fn centers() {
        let d = GridMeasure::delta(2, 8, &[3, 5]).unwrap();
        assert_eq!(d.center().unwrap().0, vec![0.375, 0.625]);

        let u = GridMeasure::uniform(2, 4).unwrap();
        let c = u.center().unwrap();
        assert_abs_diff_eq!(c.0[0], 0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(c.0[1], 0.375, epsilon = 1e-15);

        let two = GridMeasure::from_entries(2, 4, &[(&[0, 0], 0.5), (&[2, 0], 0.5)]).unwrap();
        assert_eq!(two.center().unwrap().0, vec![0.25, 0.0]);
    }

    #[test]
    fn zero_mass_center_fails() {
        let z = GridMeasure::new(2, 2, vec![0.0; 4]).unwrap();
        assert_eq!(z.center(), Err(Error::ZeroMass));
    }

    #[test]
    fn matching_translation_of_deltas() {
        let mu = GridMeasure::delta(2, 4, &[2, 2]).unwrap();
        let nu = GridMeasure::delta(2, 4, &[1, 2]).unwrap();
        assert_eq!(matching_translation(&mu, &nu).unwrap().0, vec![0.25, 0.0]);
        assert_eq!(matching_translation(&mu, &mu).unwrap().0, vec![0.0, 0.0]);
    }

    #[test]
    fn translated_moments_match_direct_sums() {
        let mu = GridMeasure::from_entries(2, 4, &[(&[0, 1], 0.2), (&[3, 2], 0.5), (&[1, 3], 0.3)])
            .unwrap();
        let t = mu.translate(Translation(vec![0.3, -0.7])).unwrap();
        let mom = t.moments();
        for a in 0..=3 {
            for b in 0..=(3 - a) {
                let direct: f64 = mu
                    .support()
                    .map(|(i, w)| {
                        let p = t.point(i);
                        w * p[0].powi(a as i32) * p[1].powi(b as i32)
                    })
                    .sum();
                assert_abs_diff_eq!(mom.m[a][b], direct, epsilon = 1e-14);
            }
        }
        let c = t.center().unwrap();
        assert_abs_diff_eq!(c.0[0], mom.m[1][0], epsilon = 1e-15);
    }

    #[test]
    fn dilation_guards() {
        let mu = GridMeasure::uniform(1, 4).unwrap();
        assert_eq!(mu.dilate(0.0).unwrap_err(), Error::NonPositiveGamma(0.0));
        assert!(mu.dilate(-1.0).is_err());
        let d = mu.dilate(2.0).unwrap();
        assert_eq!(d.point(2), [0.25, 0.0]);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(GridMeasure::new(3, 2, vec![0.0; 8]).is_err());
        assert!(GridMeasure::new(2, 2, vec![0.0; 3]).is_err());
        assert!(GridMeasure::new(1, 2, vec![f64::NAN, 1.0]).is_err());
    }
}
