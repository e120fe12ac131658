//! Seeded random measures, equal-center pairs and synthetic image classes.
//!
//! Everything here is driven by `ChaCha8Rng`, so a seed reproduces the same
//! corpus on every platform.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::equivalence::LabeledPair;
use crate::error::{Error, Result};
use crate::grid_measure::GridMeasure;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Probability measure with i.i.d. uniform weights on every grid point.
pub fn random_measure<R: Rng>(rng: &mut R, dim: usize, n: usize) -> GridMeasure {
    let len = n.pow(dim as u32);
    let w: Vec<f64> = (0..len).map(|_| rng.gen::<f64>() + 1e-3).collect();
    normalize(dim, n, w)
}

/// Probability measure on `support` distinct random grid points.
pub fn random_sparse_measure<R: Rng>(
    rng: &mut R,
    dim: usize,
    n: usize,
    support: usize,
) -> GridMeasure {
    let len = n.pow(dim as u32);
    let mut w = vec![0.0; len];
    for i in sample(rng, len, support.clamp(1, len)) {
        w[i] = rng.gen::<f64>() + 0.05;
    }
    normalize(dim, n, w)
}

fn normalize(dim: usize, n: usize, w: Vec<f64>) -> GridMeasure {
    GridMeasure::new(dim, n, w)
        .and_then(|m| m.normalized())
        .expect("generated weights are positive")
}

/// Random pairs mixing dense and sparse measures, ids `"{prefix}{i}"`.
pub fn random_pairs(
    seed: u64,
    dim: usize,
    n: usize,
    count: usize,
    prefix: &str,
) -> Vec<LabeledPair> {
    let mut rng = rng(seed);
    let len = n.pow(dim as u32);
    (0..count)
        .map(|i| {
            let draw = |rng: &mut ChaCha8Rng| {
                if rng.gen_bool(0.5) {
                    random_measure(rng, dim, n)
                } else {
                    let k = rng.gen_range(1..=len);
                    random_sparse_measure(rng, dim, n, k)
                }
            };
            let mu = draw(&mut rng);
            let nu = draw(&mut rng);
            LabeledPair {
                id: format!("{prefix}{i}"),
                mu,
                nu,
            }
        })
        .collect()
}

/// Two-point measure on the grid coordinates bracketing `x ∈ [0, (N−1)/N]`
/// whose mean is exactly `x` (up to rounding).
fn bracket(x: f64, n: usize) -> [(usize, f64); 2] {
    let g = (x * n as f64).clamp(0.0, (n - 1) as f64);
    let lo = g.floor() as usize;
    if lo + 1 >= n || g == lo as f64 {
        return [(lo, 1.0), (lo, 0.0)];
    }
    let hi_w = g - lo as f64;
    [(lo, 1.0 - hi_w), (lo + 1, hi_w)]
}

/// Draws a partner for `mu` with exactly the same center: a random measure
/// mixed with a nonnegative product of two-point measures that corrects the
/// mean. Weights stay nonnegative and the support stays on the grid.
pub fn equal_center_partner<R: Rng>(rng: &mut R, mu: &GridMeasure) -> Result<GridMeasure> {
    let (dim, n) = (mu.dim(), mu.n());
    let target = mu.center()?.0;
    let base = if rng.gen_bool(0.5) {
        random_measure(rng, dim, n)
    } else {
        let k = rng.gen_range(1..=n.pow(dim as u32));
        random_sparse_measure(rng, dim, n, k)
    };
    let c0 = base.center()?.0;
    let hi = (n - 1) as f64 / n as f64;
    let first: f64 = rng.gen_range(0.2..0.7);
    for t in [first, 0.75, 0.9, 1.0] {
        let want: Vec<f64> = target
            .iter()
            .zip(&c0)
            .map(|(c, b)| (c - (1.0 - t) * b) / t)
            .collect();
        if want.iter().any(|&x| !(0.0..=hi).contains(&x)) {
            continue;
        }
        let mut w: Vec<f64> = base.weights().iter().map(|x| (1.0 - t) * x).collect();
        if dim == 1 {
            for (i, wi) in bracket(want[0], n) {
                w[i] += t * wi;
            }
        } else {
            for (i, wi) in bracket(want[0], n) {
                for (j, wj) in bracket(want[1], n) {
                    w[i * n + j] += t * wi * wj;
                }
            }
        }
        return GridMeasure::new(dim, n, w);
    }
    Err(Error::InvalidWeights("could not match center".into()))
}

/// Pairs with identical centers, ids `"{prefix}{i}"`.
pub fn equal_center_pairs(seed: u64, n: usize, count: usize, prefix: &str) -> Vec<LabeledPair> {
    let mut rng = rng(seed);
    (0..count)
        .map(|i| {
            let mu = if rng.gen_bool(0.5) {
                random_measure(&mut rng, 2, n)
            } else {
                let k = rng.gen_range(1..=n * n);
                random_sparse_measure(&mut rng, 2, n, k)
            };
            let nu = equal_center_partner(&mut rng, &mu).expect("t = 1 always matches");
            LabeledPair {
                id: format!("{prefix}{i}"),
                mu,
                nu,
            }
        })
        .collect()
}

/// Synthetic grayscale image families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SynthClass {
    GaussianBlobs,
    UniformShapes,
    SaltNoise,
}

impl SynthClass {
    pub const ALL: [SynthClass; 3] = [
        SynthClass::GaussianBlobs,
        SynthClass::UniformShapes,
        SynthClass::SaltNoise,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SynthClass::GaussianBlobs => "gaussian-blobs",
            SynthClass::UniformShapes => "uniform-shapes",
            SynthClass::SaltNoise => "salt-noise",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    fn index(&self) -> u64 {
        *self as u64
    }
}

/// Seed for one `(class, size)` stream so classes and sizes are independent.
fn stream_seed(seed: u64, class: SynthClass, n: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (class.index() + 1).wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ (n as u64).wrapping_mul(0x94D0_49BB_1331_11EB)
}

/// A single 8-bit `n×n` image of the given class.
pub fn synth_image<R: Rng>(rng: &mut R, class: SynthClass, n: usize) -> Vec<u8> {
    match class {
        SynthClass::GaussianBlobs => gaussian_blobs(rng, n),
        SynthClass::UniformShapes => uniform_shapes(rng, n),
        SynthClass::SaltNoise => salt_noise(rng, n),
    }
}

fn gaussian_blobs<R: Rng>(rng: &mut R, n: usize) -> Vec<u8> {
    let nf = n as f64;
    let blobs: Vec<(f64, f64, f64, f64)> = (0..rng.gen_range(1..=4))
        .map(|_| {
            (
                rng.gen_range(0.0..nf),
                rng.gen_range(0.0..nf),
                rng.gen_range(0.04..0.2) * nf,
                rng.gen_range(0.3..1.0),
            )
        })
        .collect();
    let mut field = vec![0.0; n * n];
    for (i, v) in field.iter_mut().enumerate() {
        let (r, c) = ((i / n) as f64, (i % n) as f64);
        *v = blobs
            .iter()
            .map(|&(br, bc, s, a)| {
                a * (-((r - br).powi(2) + (c - bc).powi(2)) / (2.0 * s * s)).exp()
            })
            .sum();
    }
    let peak = field.iter().cloned().fold(0.0, f64::max);
    field
        .iter()
        .map(|v| (255.0 * v / peak).round() as u8)
        .collect()
}

fn uniform_shapes<R: Rng>(rng: &mut R, n: usize) -> Vec<u8> {
    let nf = n as f64;
    loop {
        let target = rng.gen_range(0.15..0.6);
        let mut img = vec![0u8; n * n];
        let mut filled = 0usize;
        let mut shapes = 0;
        while (filled as f64) < target * (n * n) as f64 && shapes < 64 {
            shapes += 1;
            let value = rng.gen_range(64..=255u8);
            let (cr, cc) = (rng.gen_range(0.0..nf), rng.gen_range(0.0..nf));
            let size = rng.gen_range(0.08..0.3) * nf;
            let disk = rng.gen_bool(0.5);
            for (i, px) in img.iter_mut().enumerate() {
                let (r, c) = ((i / n) as f64 + 0.5, (i % n) as f64 + 0.5);
                let inside = if disk {
                    (r - cr).powi(2) + (c - cc).powi(2) <= size * size
                } else {
                    (r - cr).abs() <= size && (c - cc).abs() <= 0.6 * size
                };
                if inside {
                    if *px == 0 {
                        filled += 1;
                    }
                    *px = value;
                }
            }
        }
        let frac = filled as f64 / (n * n) as f64;
        if (0.1..=0.9).contains(&frac) {
            return img;
        }
    }
}

fn salt_noise<R: Rng>(rng: &mut R, n: usize) -> Vec<u8> {
    let density = rng.gen_range(0.05..0.3);
    let mut img: Vec<u8> = (0..n * n)
        .map(|_| {
            if rng.gen_bool(density) {
                rng.gen_range(1..=255u8)
            } else {
                0
            }
        })
        .collect();
    if img.iter().all(|&p| p == 0) {
        let i = rng.gen_range(0..n * n);
        img[i] = 255;
    }
    img
}

/// A named synthetic image.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    pub class: SynthClass,
    pub n: usize,
    pub index: usize,
    pub pixels: Vec<u8>,
}

impl SynthImage {
    /// `"{class}_{n}_{index:03}"`.
    pub fn name(&self) -> String {
        format!("{}_{}_{:03}", self.class.name(), self.n, self.index)
    }

    pub fn measure(&self) -> Result<GridMeasure> {
        let data: Vec<f64> = self.pixels.iter().map(|&p| p as f64).collect();
        GridMeasure::from_pixel_buffer(self.n, self.n, &data)
    }
}

/// `count` images of `class` at size `n`; deterministic in `seed`.
pub fn synth_class(seed: u64, class: SynthClass, n: usize, count: usize) -> Vec<SynthImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, class, n));
    (0..count)
        .map(|index| SynthImage {
            class,
            n,
            index,
            pixels: synth_image(&mut rng, class, n),
        })
        .collect()
}
