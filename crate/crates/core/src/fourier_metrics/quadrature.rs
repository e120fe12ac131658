//! Lattice quadrature for `(1/T^d) ∫_{[0,T]^d} |Δ(k)|^p / |k|^q dk` where
//! `Δ = μ̂ − ν̂` and `q = sp + α`.
//!
//! The corrected rule is a trapezoid rule on the closed lattice with
//!
//! * subtraction of the leading small-`k` behaviour `|Q(k)|^p/|k|^q`
//!   (`Q` the first non-vanishing Taylor term of `Δ`), smoothly cut off and
//!   integrated exactly, whenever that term is not smooth at the origin;
//! * an Euler–Maclaurin end correction built from exact edge derivatives.
//!
//! Plain left Riemann summation is kept as [`QuadratureRule::Riemann`].

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid_measure::{binomial, Moments, MAX_MOMENT_ORDER};
use crate::spectrum::Spectrum;

/// Which lattice rule evaluates the metric integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum QuadratureRule {
    /// Trapezoid with origin-singularity subtraction and end correction.
    #[default]
    Corrected,
    /// Left Riemann sum over `[0,T)^d`; the `k = 0` node is dropped when
    /// `q > 0` and kept when `q ≤ 0`.
    Riemann,
}

/// Leading Taylor term of `Δ` at the origin: `|Δ(k)| ≈ |Q(k)|` with
/// `Q(k) = Σ_a C(n,a) ΔM[a][n−a] k₀^a k₁^{n−a} / n!`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Leading {
    pub n: usize,
    c: [f64; MAX_MOMENT_ORDER + 1],
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

impl Leading {
    pub fn of_order(dm: &Moments, n: usize) -> Self {
        let mut c = [0.0; MAX_MOMENT_ORDER + 1];
        let nf = factorial(n);
        for (a, ca) in c.iter_mut().enumerate().take(n + 1) {
            *ca = binomial(n, a) as f64 * dm.m[a][n - a] / nf;
        }
        Leading { n, c }
    }

    /// First order whose moment differences exceed `tol`, if any up to order 3.
    pub fn detect(dm: &Moments, tol: f64) -> Option<Self> {
        (0..=MAX_MOMENT_ORDER)
            .find(|&n| dm.max_abs_of_order(n) > tol)
            .map(|n| Leading::of_order(dm, n))
    }

    pub fn eval(&self, k0: f64, k1: f64) -> f64 {
        let n = self.n as i32;
        (0..=self.n)
            .map(|a| self.c[a] * k0.powi(a as i32) * k1.powi(n - a as i32))
            .sum()
    }

    pub fn grad(&self, axis: usize, k0: f64, k1: f64) -> f64 {
        let n = self.n as i32;
        let mut acc = 0.0;
        for a in 0..=self.n {
            let a = a as i32;
            let b = n - a;
            if axis == 0 && a > 0 {
                acc += self.c[a as usize] * a as f64 * k0.powi(a - 1) * k1.powi(b);
            } else if axis == 1 && b > 0 {
                acc += self.c[a as usize] * b as f64 * k0.powi(a) * k1.powi(b - 1);
            }
        }
        acc
    }

    /// `max_θ |Q(cos θ, sin θ)|` over the first quadrant (or `|Q(1)|` in 1-D).
    pub fn max_on_arc(&self, dim: usize) -> f64 {
        if dim == 1 {
            return self.eval(1.0, 0.0).abs();
        }
        (0..=256)
            .map(|i| {
                let t = 0.5 * PI * i as f64 / 256.0;
                self.eval(t.cos(), t.sin()).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `∫_0^{π/2} |Q(cos θ, sin θ)|^p dθ` (or `|Q(1)|^p` in 1-D).
    pub fn arc_integral(&self, dim: usize, p: f64) -> f64 {
        if dim == 1 {
            return self.eval(1.0, 0.0).abs().powf(p);
        }
        let (x, w) = gauss_legendre_64();
        x.iter()
            .zip(w)
            .map(|(xi, wi)| {
                let t = 0.25 * PI * (xi + 1.0);
                0.25 * PI * wi * self.eval(t.cos(), t.sin()).abs().powf(p)
            })
            .sum()
    }
}

fn gauss_legendre_64() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(64))
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[−1, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Smooth cutoff `χ(ρ) = (1 − ρ²/ρc²)^4` on `ρ < ρc`, with its radial
/// derivative factor: returns `(χ, dχ/dρ²)`.
fn cutoff(rho2: f64, rc2: f64) -> (f64, f64) {
    if rho2 >= rc2 {
        return (0.0, 0.0);
    }
    let u = 1.0 - rho2 / rc2;
    (u.powi(4), -4.0 * u.powi(3) / rc2)
}

struct Subtraction {
    lead: Leading,
    rc2: f64,
    beta: f64,
}

/// Inputs shared by every node evaluation.
pub(crate) struct Problem<'a> {
    pub a: &'a Spectrum,
    pub b: &'a Spectrum,
    pub p: f64,
    pub q: f64,
    /// Leading term of `Δ`; `None` when all moments up to order 3 agree.
    pub lead: Option<Leading>,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn delta(&self, idx: [usize; 2]) -> Complex64 {
        self.a.value_at(idx) - self.b.value_at(idx)
    }

    fn ddelta(&self, axis: usize, idx: [usize; 2]) -> Complex64 {
        self.a.grad_at(axis, idx) - self.b.grad_at(axis, idx)
    }

    fn abs_pow(&self, z: Complex64) -> f64 {
        if self.p == 2.0 {
            z.norm_sqr()
        } else {
            z.norm().powf(self.p)
        }
    }

    fn radial_pow(&self, k2: f64, e: f64) -> f64 {
        if e == 0.0 {
            1.0
        } else {
            k2.powf(0.5 * e)
        }
    }

    fn beta(&self) -> Option<f64> {
        self.lead.map(|l| self.p * l.n as f64 - self.q)
    }

    fn subtraction(&self) -> Option<Subtraction> {
        let lead = self.lead?;
        let beta = self.beta()?;
        let singular = beta < -1e-12 || (beta.abs() <= 1e-12 && self.dim() == 2);
        if self.q > 0.0 && singular {
            let rc = 0.5 * self.a.period();
            Some(Subtraction {
                lead,
                rc2: rc * rc,
                beta,
            })
        } else {
            None
        }
    }

    /// Integrand minus the subtracted model at a nonzero frequency.
    fn node_value(&self, idx: [usize; 2], k: [f64; 2], sub: &Option<Subtraction>) -> f64 {
        let k2 = k[0] * k[0] + k[1] * k[1];
        let kq = self.radial_pow(k2, self.q);
        let mut f = self.abs_pow(self.delta(idx)) / kq;
        if let Some(sub) = sub {
            let (chi, _) = cutoff(k2, sub.rc2);
            if chi > 0.0 {
                let qv = sub.lead.eval(k[0], k[1]).abs();
                f -= chi * qv.powf(self.p) / kq;
            }
        }
        f
    }

    /// Value assigned to the origin node.
    fn origin_value(&self, sub: &Option<Subtraction>) -> f64 {
        if sub.is_some() || self.q < 0.0 {
            return 0.0;
        }
        if self.q == 0.0 {
            return self.abs_pow(self.delta([0, 0]));
        }
        match (self.lead, self.beta()) {
            (Some(lead), Some(beta)) if beta.abs() <= 1e-12 => lead.arc_integral(1, self.p),
            _ => 0.0,
        }
    }

    /// `∂/∂k_axis` of the (remainder) integrand at a nonzero node on an edge.
    fn edge_derivative(
        &self,
        axis: usize,
        idx: [usize; 2],
        k: [f64; 2],
        sub: &Option<Subtraction>,
    ) -> f64 {
        let k2 = k[0] * k[0] + k[1] * k[1];
        let d = self.delta(idx);
        let dd = self.ddelta(axis, idx);
        let mag = d.norm();
        let kq = self.radial_pow(k2, self.q);
        let mut out = 0.0;
        if mag > 0.0 {
            let num = self.p * mag.powf(self.p - 2.0) * (d.conj() * dd).re;
            out += num / kq;
            if self.q != 0.0 {
                out -= self.q * self.abs_pow(d) * k[axis] / (kq * k2);
            }
        }
        if let Some(sub) = sub {
            let (chi, dchi_drho2) = cutoff(k2, sub.rc2);
            if chi > 0.0 {
                let qv = sub.lead.eval(k[0], k[1]);
                let f0 = qv.abs().powf(self.p) / kq;
                let dq = sub.lead.grad(axis, k[0], k[1]);
                let df0 = if qv != 0.0 {
                    self.p * qv.abs().powf(self.p - 1.0) * qv.signum() * dq / kq
                } else {
                    0.0
                } - self.q * f0 * k[axis] / k2;
                out -= dchi_drho2 * 2.0 * k[axis] * f0 + chi * df0;
            }
        }
        out
    }

    fn origin_derivative(&self, axis: usize, sub: &Option<Subtraction>, edge: &[f64]) -> f64 {
        if self.q == 0.0 {
            let d = self.delta([0, 0]);
            let dd = self.ddelta(axis, [0, 0]);
            let mag = d.norm();
            return if mag > 0.0 {
                self.p * mag.powf(self.p - 2.0) * (d.conj() * dd).re
            } else {
                0.0
            };
        }
        if let Some(s) = sub {
            if s.beta < -1e-12 {
                return 0.0;
            }
        }
        match edge.len() {
            0 | 1 => 0.0,
            2 => edge[1],
            _ => 2.0 * edge[1] - edge[2],
        }
    }

    /// Mean integral `(1/T^d) ∫ |Δ|^p/|k|^q` (before the `1/p` root).
    pub fn integrate(&self, rule: QuadratureRule) -> f64 {
        match rule {
            QuadratureRule::Riemann => self.riemann(),
            QuadratureRule::Corrected => self.corrected(),
        }
    }

    fn riemann(&self) -> f64 {
        let m = self.a.lattice_len();
        let h = self.a.spacing();
        let none = None;
        let origin = if self.q <= 0.0 {
            self.origin_value(&none)
        } else {
            0.0
        };
        let total: f64 = if self.dim() == 1 {
            (1..m)
                .map(|j| self.node_value([j, 0], [j as f64 * h, 0.0], &none))
                .sum()
        } else {
            let rows: Vec<f64> = (0..m)
                .into_par_iter()
                .map(|j0| {
                    (0..m)
                        .filter(|&j1| j0 != 0 || j1 != 0)
                        .map(|j1| self.node_value([j0, j1], [j0 as f64 * h, j1 as f64 * h], &none))
                        .sum::<f64>()
                })
                .collect();
            rows.iter().sum()
        };
        (total + origin) / (m as f64).powi(self.dim() as i32)
    }

    fn corrected(&self) -> f64 {
        let m = self.a.lattice_len();
        let h = self.a.spacing();
        let t = self.a.period();
        let sub = self.subtraction();
        let tw = |j: usize| if j == 0 || j == m { 0.5 } else { 1.0 };
        let dim = self.dim();

        let extra = sub.as_ref().map_or(0.0, |s| {
            let big_a = 0.5 * (s.beta + dim as f64);
            let denom: f64 = (0..5).map(|i| big_a + i as f64).product();
            let rc = s.rc2.sqrt();
            s.lead.arc_integral(dim, self.p) * rc.powf(s.beta + dim as f64) * 12.0 / denom
        });

        if dim == 1 {
            let mut sum = 0.5 * self.origin_value(&sub);
            for j in 1..=m {
                sum += tw(j) * self.node_value([j, 0], [j as f64 * h, 0.0], &sub);
            }
            // Derivatives along the single axis at k = h, 2h for extrapolation.
            let near: Vec<f64> = (0..m.min(2) + 1)
                .map(|j| {
                    if j == 0 {
                        0.0
                    } else {
                        self.edge_derivative(0, [j, 0], [j as f64 * h, 0.0], &sub)
                    }
                })
                .collect();
            let d0 = self.origin_derivative(0, &sub, &near);
            let dt = self.edge_derivative(0, [m, 0], [t, 0.0], &sub);
            let total = h * sum + extra - h * h / 12.0 * (dt - d0);
            return total / t;
        }

        let origin = self.origin_value(&sub);
        let rows: Vec<f64> = (0..=m)
            .into_par_iter()
            .map(|j0| {
                let k0 = j0 as f64 * h;
                let mut acc = 0.0;
                for j1 in 0..=m {
                    let v = if j0 == 0 && j1 == 0 {
                        origin
                    } else {
                        self.node_value([j0, j1], [k0, j1 as f64 * h], &sub)
                    };
                    acc += tw(j1) * v;
                }
                tw(j0) * acc
            })
            .collect();
        let sum: f64 = rows.iter().sum();

        let mut corr = 0.0;
        for axis in 0..2 {
            let at = |fixed: usize, j: usize| -> ([usize; 2], [f64; 2]) {
                let fk = fixed as f64 * h;
                let jk = j as f64 * h;
                if axis == 0 {
                    ([fixed, j], [fk, jk])
                } else {
                    ([j, fixed], [jk, fk])
                }
            };
            let mut near = vec![0.0; m + 1];
            for (j, slot) in near.iter_mut().enumerate().skip(1) {
                let (idx, k) = at(0, j);
                *slot = self.edge_derivative(axis, idx, k, &sub);
            }
            near[0] = self.origin_derivative(axis, &sub, &near);
            let low: f64 = near.iter().enumerate().map(|(j, v)| tw(j) * v).sum();
            let high: f64 = (0..=m)
                .map(|j| {
                    let (idx, k) = at(m, j);
                    tw(j) * self.edge_derivative(axis, idx, k, &sub)
                })
                .sum();
            corr += h * (high - low);
        }
        let total = h * h * sum + extra - h * h / 12.0 * corr;
        total / (t * t)
    }

    /// Lattice maximum of `|Δ|/|k|^s` over the closed cell without the
    /// origin. The caller combines it with the origin limit.
    pub fn lattice_sup(&self, s: f64) -> f64 {
        let m = self.a.lattice_len();
        let h = self.a.spacing();
        let val = |idx: [usize; 2], k: [f64; 2]| {
            let k2 = k[0] * k[0] + k[1] * k[1];
            self.delta(idx).norm() / self.radial_pow(k2, s)
        };
        if self.dim() == 1 {
            return (1..=m)
                .map(|j| val([j, 0], [j as f64 * h, 0.0]))
                .fold(0.0, f64::max);
        }
        (0..=m)
            .into_par_iter()
            .map(|j0| {
                (0..=m)
                    .filter(|&j1| j0 != 0 || j1 != 0)
                    .map(|j1| val([j0, j1], [j0 as f64 * h, j1 as f64 * h]))
                    .fold(0.0, f64::max)
            })
            .collect::<Vec<f64>>()
            .into_iter()
            .fold(0.0, f64::max)
    }
}
