//! The recursive Poisson hierarchy `op · u_1 = 1`, `op · u_k = k · u_{k-1}`
//! and the integrated exit-time moments it produces.
//!
//! With the generator convention used throughout (Brownian motion generated
//! by Δ, not Δ/2) the continuum solutions are `u_k(x) = E^x[τ^k]`; on the
//! unit interval `u_1 = x(1 − x)/2` and `T_1 = 1/12`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::operators::{default_max_iter, solve_spd_from, SparseOperator};
use crate::report::fmt_num;

/// Largest supported moment order.
pub const MAX_ORDER: usize = 30;

/// The moments `T_1..T_K`, addressed 1-based.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(transparent)]
pub struct MomentSpectrum(Vec<f64>);

impl MomentSpectrum {
    pub fn new(values: Vec<f64>) -> Self {
        MomentSpectrum(values)
    }

    /// Exact single-mode spectrum `T_k = k! · a² · λ^{-k}`.
    pub fn single_mode(lambda: f64, a_sq: f64, order: usize) -> Self {
        let mut out = Vec::with_capacity(order);
        let mut t = a_sq;
        for k in 1..=order {
            t *= k as f64 / lambda;
            out.push(t);
        }
        MomentSpectrum(out)
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    /// `T_k`, `k ≥ 1`.
    pub fn get(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.0.get(i)).copied()
    }

    pub fn require(&self, k: usize) -> Result<f64> {
        self.get(k).ok_or(Error::InsufficientMoments { needed: k, available: self.order() })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `T_k ↦ c^{-k} T_k`, the effect of replacing `op` by `c · op`.
    pub fn rescaled(&self, c: f64) -> Self {
        MomentSpectrum(self.0.iter().enumerate().map(|(i, t)| t * c.powi(-(i as i32 + 1))).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchySolution {
    /// `u[k-1]` is `u_k` on the interior nodes.
    pub u: Vec<Vec<f64>>,
    pub moments: MomentSpectrum,
    /// `l2[k-1] = ∫ u_k²`.
    pub l2: Vec<f64>,
    /// `var[k-1] = T_{2k} − ∫ u_k²`, for `2k ≤ K`.
    pub var: Vec<f64>,
    /// Relative residual of each linear solve.
    pub residuals: Vec<f64>,
    pub cell_measure: f64,
}

impl HierarchySolution {
    pub fn depth(&self) -> usize {
        self.u.len()
    }

    pub fn u(&self, k: usize) -> Option<&[f64]> {
        k.checked_sub(1).and_then(|i| self.u.get(i)).map(Vec::as_slice)
    }

    pub fn t(&self, k: usize) -> Option<f64> {
        self.moments.get(k)
    }

    pub fn l2(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.l2.get(i)).copied()
    }

    pub fn var(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.var.get(i)).copied()
    }

    /// CSV with columns `k, T_k, l2_k, var_k, residual`; `var_k` is empty
    /// where `2k > K`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,T_k,l2_k,var_k,residual\n");
        for k in 1..=self.depth() {
            let var = self.var(k).map(fmt_num).unwrap_or_default();
            let _ = writeln!(
                out,
                "{k},{},{},{var},{}",
                fmt_num(self.t(k).unwrap()),
                fmt_num(self.l2(k).unwrap()),
                fmt_num(self.residuals[k - 1])
            );
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<_> = (1..=self.depth())
            .map(|k| {
                serde_json::json!({
                    "k": k,
                    "T_k": self.t(k),
                    "l2_k": self.l2(k),
                    "var_k": self.var(k),
                    "residual": self.residuals[k - 1],
                })
            })
            .collect();
        serde_json::Value::Array(rows)
    }
}

/// Solves the hierarchy through order `order`.
///
/// Grid-backed operators are M-matrices, so every `u_k` must be strictly
/// positive; a non-positive entry there is reported as
/// [`Error::NegativeEntry`]. User matrices are not checked for positivity.
pub fn solve_hierarchy(op: &SparseOperator, order: usize, tol: f64) -> Result<HierarchySolution> {
    if order == 0 {
        return Err(Error::InvalidArgument("hierarchy order must be at least 1".into()));
    }
    if order > MAX_ORDER {
        return Err(Error::InvalidArgument(format!("hierarchy order {order} exceeds the cap of {MAX_ORDER}")));
    }
    let n = op.order();
    let max_iter = default_max_iter(n);
    let mut u: Vec<Vec<f64>> = Vec::with_capacity(order);
    let mut residuals = Vec::with_capacity(order);
    let mut rhs = vec![1.0; n];
    for k in 1..=order {
        if k > 1 {
            let prev = &u[k - 2];
            rhs.iter_mut().zip(prev).for_each(|(r, p)| *r = k as f64 * p);
        }
        // Warm start from the previous level scaled by the Rayleigh-type
        // ratio; the hierarchy converges to the principal mode, so this
        // guess improves with k.
        let guess = (k > 1).then(|| {
            let prev = &u[k - 2];
            let a_prev = op.apply(prev);
            let ratio = crate::operators::dot(prev, &rhs) / crate::operators::dot(prev, &a_prev);
            prev.iter().map(|p| p * ratio).collect::<Vec<f64>>()
        });
        let (uk, stats) = solve_spd_from(op, &rhs, guess.as_deref(), tol, max_iter)
            .map_err(|e| Error::HierarchySolve { level: k, source: Box::new(e) })?;
        if op.provenance().is_grid() {
            if let Some((index, &value)) = uk.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
                return Err(Error::NegativeEntry { level: k, index, value });
            }
        }
        residuals.push(stats.relative_residual);
        u.push(uk);
    }
    let cm = op.cell_measure();
    let moments: Vec<f64> = u.iter().map(|uk| op.integrate(uk)).collect();
    let l2: Vec<f64> = u.iter().map(|uk| op.inner(uk, uk)).collect();
    let var: Vec<f64> = (1..=order / 2).map(|k| moments[2 * k - 1] - l2[k - 1]).collect();
    Ok(HierarchySolution { u, moments: MomentSpectrum(moments), l2, var, residuals, cell_measure: cm })
}
