//! Rayleigh-type quotients whose supremum over admissible functions is `T_k`.
//!
//! With `op` the SPD discretization of `−Δ`, for `k = 2n`
//!
//! ```text
//! Q_k(f) = k! (∫f)² / ∫(opⁿ f)²
//! ```
//!
//! and for `k = 2n + 1` the denominator is the energy `∫ q·(op q)` of
//! `q = opⁿ f`. Every interior vector extends by zero, so `f = op^{−k} g`
//! satisfies the discrete boundary conditions of the admissible class for
//! any seed `g`; the maximizer is `f = u_k`.

use crate::error::{Error, Result};
use crate::hierarchy::HierarchySolution;
use crate::linalg::ln_factorial;
use crate::operators::{default_max_iter, solve_spd_from, SparseOperator};

/// Relative CG tolerance used when building `op^{−k} g`.
pub const SEED_SOLVE_TOL: f64 = 1e-12;
/// Relative slack on the supremum property accepted by [`check_sup`].
pub const SUP_TOL: f64 = 1e-7;
/// Relative tolerance of the integration-by-parts identity.
pub const LEMMA_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleFunction {
    k: usize,
    seed: Vec<f64>,
    f: Vec<f64>,
}

impl AdmissibleFunction {
    /// `f = op^{−k} g` by `k` successive solves.
    pub fn from_seed(op: &SparseOperator, k: usize, seed: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("moment order must be at least 1".into()));
        }
        if seed.len() != op.order() {
            return Err(Error::InvalidArgument(format!(
                "seed has length {}, operator order is {}",
                seed.len(),
                op.order()
            )));
        }
        let max_iter = default_max_iter(op.order());
        let mut f = seed.clone();
        for _ in 0..k {
            f = solve_spd_from(op, &f, None, SEED_SOLVE_TOL, max_iter)?.0;
        }
        let out = AdmissibleFunction { k, seed, f };
        out.mean(op.cell_measure())?;
        Ok(out)
    }

    /// The maximizer `f = u_k`, whose seed is the constant `k!`.
    pub fn from_hierarchy(hier: &HierarchySolution, k: usize) -> Result<Self> {
        let u = hier.u(k).ok_or(Error::InsufficientDepth { needed: k, available: hier.depth() })?;
        if k == 0 {
            return Err(Error::InvalidArgument("moment order must be at least 1".into()));
        }
        let fact = ln_factorial(k).exp();
        Ok(AdmissibleFunction { k, seed: vec![fact; u.len()], f: u.to_vec() })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> &[f64] {
        &self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    /// `c·f` for a nonzero scalar; still admissible.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if c == 0.0 || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("scale must be finite and nonzero, got {c}")));
        }
        Ok(AdmissibleFunction {
            k: self.k,
            seed: self.seed.iter().map(|x| c * x).collect(),
            f: self.f.iter().map(|x| c * x).collect(),
        })
    }

    fn mean(&self, cell_measure: f64) -> Result<f64> {
        let m = cell_measure * self.f.iter().sum::<f64>();
        let scale = cell_measure * self.f.iter().map(|x| x.abs()).sum::<f64>();
        if !(m.abs() > 1e-12 * scale) || !m.is_finite() {
            Err(Error::ZeroMean)
        } else {
            Ok(m)
        }
    }

    fn check_order(&self, op: &SparseOperator) -> Result<()> {
        if self.f.len() != op.order() {
            return Err(Error::InvalidArgument(format!(
                "function has length {}, operator order is {}",
                self.f.len(),
                op.order()
            )));
        }
        Ok(())
    }
}

/// Quotient for even `k = 2n`.
pub fn quotient_even(f: &AdmissibleFunction, op: &SparseOperator) -> Result<f64> {
    if !f.k.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("quotient_even needs an even order, got {}", f.k)));
    }
    f.check_order(op)?;
    let c = op.cell_measure();
    let mean = f.mean(c)?;
    let v = op.apply_power(&f.f, f.k / 2);
    let denom = c * v.iter().map(|x| x * x).sum::<f64>();
    Ok((ln_factorial(f.k) + 2.0 * mean.abs().ln() - denom.ln()).exp())
}

/// Quotient for odd `k = 2n + 1`.
pub fn quotient_odd(f: &AdmissibleFunction, op: &SparseOperator) -> Result<f64> {
    if f.k % 2 != 1 {
        return Err(Error::InvalidArgument(format!("quotient_odd needs an odd order, got {}", f.k)));
    }
    f.check_order(op)?;
    let c = op.cell_measure();
    let mean = f.mean(c)?;
    let q = op.apply_power(&f.f, f.k / 2);
    let denom = op.inner(&q, &op.apply(&q));
    Ok((ln_factorial(f.k) + 2.0 * mean.abs().ln() - denom.ln()).exp())
}

/// Dispatches on the parity of `f.k()`.
pub fn quotient(f: &AdmissibleFunction, op: &SparseOperator) -> Result<f64> {
    if f.k.is_multiple_of(2) {
        quotient_even(f, op)
    } else {
        quotient_odd(f, op)
    }
}

/// `(∫f, (1/k!)·∫(op^k f)·u_k)`; the two agree by summation by parts.
pub fn lemma_a1_check(f: &AdmissibleFunction, op: &SparseOperator, hier: &HierarchySolution) -> Result<(f64, f64)> {
    let u = hier.u(f.k).ok_or(Error::InsufficientDepth { needed: f.k, available: hier.depth() })?;
    f.check_order(op)?;
    let c = op.cell_measure();
    let lhs = c * f.f.iter().sum::<f64>();
    let g = op.apply_power(&f.f, f.k);
    let rhs = c * g.iter().zip(u).map(|(a, b)| a * b).sum::<f64>() / ln_factorial(f.k).exp();
    Ok((lhs, rhs))
}

/// Whether `quotient ≤ T_k·(1 + SUP_TOL)`.
pub fn check_sup(q: f64, t_k: f64) -> bool {
    q <= t_k * (1.0 + SUP_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, DomainSpec};
    use crate::hierarchy::solve_hierarchy;
    use crate::operators::assemble_laplacian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn interval(h: f64) -> SparseOperator {
        assemble_laplacian(&build_grid(&DomainSpec::Interval { length: 1.0 }, h).unwrap())
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn maximizer_attains_moments() {
        let op = interval(0.01);
        let hier = solve_hierarchy(&op, 8, 1e-12).unwrap();
        for k in 1..=4 {
            let f = AdmissibleFunction::from_hierarchy(&hier, k).unwrap();
            let q = quotient(&f, &op).unwrap();
            assert!(rel(q, hier.t(k).unwrap()) < 1e-7, "k={k}: {q} vs {}", hier.t(k).unwrap());
        }
        let t1 = quotient_odd(&AdmissibleFunction::from_hierarchy(&hier, 1).unwrap(), &op).unwrap();
        assert!((t1 - 1.0 / 12.0).abs() < 1e-4);
        let t2 = quotient_even(&AdmissibleFunction::from_hierarchy(&hier, 2).unwrap(), &op).unwrap();
        assert!((t2 - 1.0 / 60.0).abs() < 1e-4);
        let t3 = quotient_odd(&AdmissibleFunction::from_hierarchy(&hier, 3).unwrap(), &op).unwrap();
        assert!((t3 - 17.0 / 3360.0).abs() < 1e-5);
    }

    #[test]
    fn random_functions_stay_below_supremum() {
        let op = interval(0.05);
        let n = op.order();
        let hier = solve_hierarchy(&op, 4, 1e-12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 1..=4 {
            let t_k = hier.t(k).unwrap();
            let fact = ln_factorial(k).exp();
            for _ in 0..100 {
                let seed: Vec<f64> = (0..n).map(|_| fact + 0.1 * fact * (rng.random::<f64>() - 0.5)).collect();
                let f = AdmissibleFunction::from_seed(&op, k, seed).unwrap();
                assert!(check_sup(quotient(&f, &op).unwrap(), t_k));
                let (lhs, rhs) = lemma_a1_check(&f, &op, &hier).unwrap();
                assert!(rel(rhs, lhs) < LEMMA_TOL, "k={k}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn scale_invariance() {
        let op = interval(0.05);
        let seed: Vec<f64> = (0..op.order()).map(|i| 1.0 + (i as f64).sin()).collect();
        for k in 1..=4 {
            let f = AdmissibleFunction::from_seed(&op, k, seed.clone()).unwrap();
            let q = quotient(&f, &op).unwrap();
            for c in [-3.0, 1e-3, 7.5e4] {
                let qs = quotient(&f.scaled(c).unwrap(), &op).unwrap();
                assert!(rel(qs, q) < 1e-13, "{q} vs {qs}");
            }
        }
    }

    #[test]
    fn lemma_for_hierarchy_functions() {
        let op = interval(0.05);
        let hier = solve_hierarchy(&op, 3, 1e-12).unwrap();
        let f1 = AdmissibleFunction::from_hierarchy(&hier, 1).unwrap();
        let (lhs, rhs) = lemma_a1_check(&f1, &op, &hier).unwrap();
        assert!(rel(lhs, hier.t(1).unwrap()) < 1e-14);
        assert!(rel(rhs, lhs) < 1e-10);
        let f3 = AdmissibleFunction::from_hierarchy(&hier, 3).unwrap();
        let (lhs, rhs) = lemma_a1_check(&f3, &op, &hier).unwrap();
        assert!(rel(rhs, hier.t(3).unwrap()) < 1e-8);
        assert!(rel(lhs, hier.t(3).unwrap()) < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        let op = interval(0.25);
        let hier = solve_hierarchy(&op, 2, 1e-12).unwrap();
        let zero = AdmissibleFunction::from_seed(&op, 1, vec![1.0, 0.0, -1.0]);
        assert_eq!(zero.unwrap_err(), Error::ZeroMean);
        let f = AdmissibleFunction::from_seed(&op, 3, vec![1.0, 2.0, 1.0]).unwrap();
        assert!(matches!(lemma_a1_check(&f, &op, &hier), Err(Error::InsufficientDepth { needed: 3, available: 2 })));
        assert!(quotient_even(&f, &op).is_err());
        let f2 = AdmissibleFunction::from_seed(&op, 2, vec![1.0, 2.0, 1.0]).unwrap();
        assert!(quotient_odd(&f2, &op).is_err());
        assert!(f2.scaled(0.0).is_err());
    }
}
