//! Exact Wasserstein distances `W_p`, `p ∈ {1, 2}`, between grid measures,
//! with certified optimal transport plans.

pub mod network_simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_measure::{GridMeasure, Translation, PROBABILITY_TOL};

/// Default guard on `|supp μ|·|supp ν|`.
pub const DEFAULT_GUARD: usize = 100_000_000;

/// Tolerance on plan marginals.
pub const MARGINAL_TOL: f64 = 1e-9;
/// Tolerance on negative reduced costs in the optimality certificate.
pub const REDUCED_COST_TOL: f64 = 1e-9;

/// A positive-weight support point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    /// Grid multi-index (second entry zero in dimension 1).
    pub index: [usize; 2],
    /// Physical position, including any translation.
    pub position: [f64; 2],
    pub weight: f64,
}

/// Optimal coupling between the supports of two measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub sources: Vec<Atom>,
    pub targets: Vec<Atom>,
    /// `(source, target, mass)` with indices into `sources` / `targets`.
    pub flows: Vec<(usize, usize, f64)>,
    pub cost_exponent: u32,
    /// `Σ mass · |x − y|^p`.
    pub objective: f64,
    /// Dual potentials certifying optimality.
    pub source_potentials: Vec<f64>,
    pub target_potentials: Vec<f64>,
}

/// Worst violations found when re-checking a plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub max_marginal_error: f64,
    pub min_flow: f64,
    pub min_reduced_cost: f64,
    pub duality_gap: f64,
    pub objective_error: f64,
}

impl Certificate {
    pub fn is_valid(&self, objective: f64) -> bool {
        self.max_marginal_error <= MARGINAL_TOL
            && self.min_flow >= 0.0
            && self.min_reduced_cost >= -REDUCED_COST_TOL
            && self.duality_gap.abs() <= 1e-9 * objective.max(1.0)
            && self.objective_error <= 1e-10 * objective.max(1e-300)
    }
}

fn ground_cost(a: [f64; 2], b: [f64; 2], p: u32) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let sq = dx * dx + dy * dy;
    if p == 2 {
        sq
    } else {
        sq.sqrt()
    }
}

impl TransportPlan {
    pub fn cost(&self, i: usize, j: usize) -> f64 {
        ground_cost(
            self.sources[i].position,
            self.targets[j].position,
            self.cost_exponent,
        )
    }

    pub fn recompute_objective(&self) -> f64 {
        self.flows
            .iter()
            .map(|&(i, j, f)| f * self.cost(i, j))
            .sum()
    }

    /// `W_p = objective^{1/p}`.
    pub fn distance(&self) -> f64 {
        let obj = self.objective.max(0.0);
        if self.cost_exponent == 2 {
            obj.sqrt()
        } else {
            obj
        }
    }

    /// Re-verifies marginals, nonnegativity, dual feasibility and the
    /// duality gap from scratch.
    pub fn certify(&self) -> Certificate {
        let mut rows = vec![0.0; self.sources.len()];
        let mut cols = vec![0.0; self.targets.len()];
        let mut min_flow = f64::INFINITY;
        for &(i, j, f) in &self.flows {
            rows[i] += f;
            cols[j] += f;
            min_flow = min_flow.min(f);
        }
        if self.flows.is_empty() {
            min_flow = 0.0;
        }
        let max_marginal_error = rows
            .iter()
            .zip(&self.sources)
            .map(|(r, a)| (r - a.weight).abs())
            .chain(
                cols.iter()
                    .zip(&self.targets)
                    .map(|(c, b)| (c - b.weight).abs()),
            )
            .fold(0.0, f64::max);

        let mut min_reduced_cost = f64::INFINITY;
        for (i, ui) in self.source_potentials.iter().enumerate() {
            for (j, vj) in self.target_potentials.iter().enumerate() {
                min_reduced_cost = min_reduced_cost.min(self.cost(i, j) - ui - vj);
            }
        }
        let dual: f64 = self
            .sources
            .iter()
            .zip(&self.source_potentials)
            .map(|(a, u)| a.weight * u)
            .chain(
                self.targets
                    .iter()
                    .zip(&self.target_potentials)
                    .map(|(b, v)| b.weight * v),
            )
            .sum();
        let recomputed = self.recompute_objective();
        Certificate {
            max_marginal_error,
            min_flow,
            min_reduced_cost,
            duality_gap: recomputed - dual,
            objective_error: (recomputed - self.objective).abs(),
        }
    }
}

fn atoms(mu: &GridMeasure, shift: [f64; 2]) -> Vec<Atom> {
    mu.support()
        .map(|(flat, w)| {
            let p = mu.point(flat);
            Atom {
                index: mu.multi_index(flat),
                position: [p[0] + shift[0], p[1] + shift[1]],
                weight: w,
            }
        })
        .collect()
}

fn check_cost_exponent(p: u32) -> Result<()> {
    if p == 1 || p == 2 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!(
            "W_p needs p in {{1, 2}}, got {p}"
        )))
    }
}

/// Solves the transportation problem between two atom lists.
pub fn transport(
    sources: Vec<Atom>,
    targets: Vec<Atom>,
    p: u32,
    guard: usize,
) -> Result<TransportPlan> {
    check_cost_exponent(p)?;
    let ms: f64 = sources.iter().map(|a| a.weight).sum();
    let mt: f64 = targets.iter().map(|a| a.weight).sum();
    if (ms - mt).abs() > PROBABILITY_TOL || ms <= 0.0 {
        return Err(Error::MassMismatch(ms, mt));
    }
    if sources.len().saturating_mul(targets.len()) > guard {
        return Err(Error::TooLarge {
            sources: sources.len(),
            targets: targets.len(),
            guard,
        });
    }
    let supply: Vec<f64> = sources.iter().map(|a| a.weight).collect();
    let demand: Vec<f64> = targets.iter().map(|a| a.weight).collect();
    let cost = |i: usize, j: usize| ground_cost(sources[i].position, targets[j].position, p);
    let sol = network_simplex::solve(&supply, &demand, &cost).map_err(Error::Solver)?;
    if sol.artificial_flow > 10.0 * PROBABILITY_TOL {
        return Err(Error::Solver(format!(
            "{} mass left on artificial arcs",
            sol.artificial_flow
        )));
    }
    let mut plan = TransportPlan {
        sources,
        targets,
        flows: sol.flows,
        cost_exponent: p,
        objective: 0.0,
        source_potentials: sol.u,
        target_potentials: sol.v,
    };
    plan.objective = plan.recompute_objective();
    let cert = plan.certify();
    if !cert.is_valid(plan.objective) {
        return Err(Error::Solver(format!(
            "plan failed certification: {cert:?}"
        )));
    }
    Ok(plan)
}

/// Exact `W_p(μ, ν)` and an optimal plan, with the default size guard.
pub fn wp_exact(mu: &GridMeasure, nu: &GridMeasure, p: u32) -> Result<(f64, TransportPlan)> {
    wp_exact_guarded(mu, nu, p, DEFAULT_GUARD)
}

/// [`wp_exact`] with an explicit guard on `|supp μ|·|supp ν|`.
pub fn wp_exact_guarded(
    mu: &GridMeasure,
    nu: &GridMeasure,
    p: u32,
    guard: usize,
) -> Result<(f64, TransportPlan)> {
    wp_translated(
        mu,
        &Translation::zero(mu.dim()),
        nu,
        &Translation::zero(nu.dim()),
        p,
        guard,
    )
}

/// `W_p(μ_v, ν_w)`: supports shifted by `v` and `w` before solving.
pub fn wp_translated(
    mu: &GridMeasure,
    v: &Translation,
    nu: &GridMeasure,
    w: &Translation,
    p: u32,
    guard: usize,
) -> Result<(f64, TransportPlan)> {
    mu.same_grid(nu)?;
    check_cost_exponent(p)?;
    if !mu.is_probability() || !nu.is_probability() {
        return Err(Error::MassMismatch(mu.mass(), nu.mass()));
    }
    let plan = transport(atoms(mu, v.padded()), atoms(nu, w.padded()), p, guard)?;
    Ok((plan.distance(), plan))
}

/// Both sides of `W₂(μ_v, ν_w)² = W₂(μ,ν)² + |v−w|² + 2⟨v−w, m_μ−m_ν⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranslationIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub discrepancy: f64,
}

pub fn w2_translation_identity(
    mu: &GridMeasure,
    nu: &GridMeasure,
    v: &Translation,
    w: &Translation,
) -> Result<TranslationIdentity> {
    let (moved, _) = wp_translated(mu, v, nu, w, 2, DEFAULT_GUARD)?;
    let (plain, _) = wp_exact(mu, nu, 2)?;
    let d = v.sub(w);
    let cm = mu.center()?;
    let cn = nu.center()?;
    let cross: f64 =
        d.0.iter()
            .zip(cm.0.iter().zip(&cn.0))
            .map(|(di, (a, b))| di * (a - b))
            .sum();
    let lhs = moved * moved;
    let rhs = plain * plain + d.norm().powi(2) + 2.0 * cross;
    Ok(TranslationIdentity {
        lhs,
        rhs,
        discrepancy: (lhs - rhs).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_measure(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> GridMeasure {
        let w: Vec<f64> = (0..n.pow(dim as u32)).map(|_| rng.gen::<f64>()).collect();
        GridMeasure::new(dim, n, w).unwrap().normalized().unwrap()
    }

    #[test]
    fn identical_measures() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mu = random_measure(&mut rng, 2, 6);
        for p in [1, 2] {
            let (w, plan) = wp_exact(&mu, &mu, p).unwrap();
            assert!(w.abs() < 1e-12);
            assert!(plan.certify().is_valid(plan.objective));
        }
    }

    #[test]
    fn delta_pair() {
        let a = GridMeasure::delta(2, 4, &[0, 0]).unwrap();
        let b = GridMeasure::delta(2, 4, &[1, 0]).unwrap();
        for p in [1, 2] {
            let (w, plan) = wp_exact(&a, &b, p).unwrap();
            assert!((w - 0.25).abs() < 1e-15);
            assert_eq!(plan.flows, vec![(0, 0, 1.0)]);
        }
    }

    #[test]
    fn symmetric_and_certified() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let mu = random_measure(&mut rng, 2, 8);
            let nu = random_measure(&mut rng, 2, 8);
            for p in [1, 2] {
                let (ab, plan) = wp_exact(&mu, &nu, p).unwrap();
                let (ba, _) = wp_exact(&nu, &mu, p).unwrap();
                assert!((ab - ba).abs() < 1e-10);
                let cert = plan.certify();
                assert!(cert.is_valid(plan.objective), "{cert:?}");
            }
        }
    }

    #[test]
    fn guards() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mu = random_measure(&mut rng, 2, 4);
        let nu = random_measure(&mut rng, 2, 4);
        assert!(matches!(
            wp_exact_guarded(&mu, &nu, 1, 100),
            Err(Error::TooLarge {
                sources: 16,
                targets: 16,
                guard: 100
            })
        ));
        let half = GridMeasure::new(2, 4, nu.weights().iter().map(|w| w * 0.5).collect()).unwrap();
        assert!(matches!(
            wp_exact(&mu, &half, 1),
            Err(Error::MassMismatch(..))
        ));
        assert!(matches!(
            wp_exact(&mu, &nu, 3),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn translation_identity_recentering() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mu = random_measure(&mut rng, 2, 6);
        let nu = random_measure(&mut rng, 2, 6);
        let cm = mu.center().unwrap();
        let cn = nu.center().unwrap();
        let v = Translation(cm.0.iter().map(|c| -c).collect());
        let w = Translation(cn.0.iter().map(|c| -c).collect());
        let rec = w2_translation_identity(&mu, &nu, &v, &w).unwrap();
        assert!(rec.discrepancy < 1e-9, "{rec:?}");
        let (w2, _) = wp_exact(&mu, &nu, 2).unwrap();
        let expected = w2 * w2 - cm.distance(&cn).powi(2);
        assert!((rec.lhs - expected).abs() < 1e-9);
    }
}
