//! Upper and lower bounds on the principal eigenvalue from the moment
//! spectrum, the variance norms and the projection masses.
//!
//! Every inequality here follows from integration by parts, Cauchy–Schwarz
//! and the Rayleigh quotient, all of which hold exactly for a symmetric
//! positive-definite matrix with the rectangle-rule inner product. Against
//! the discrete λ₀ of the same operator the bounds are therefore exact
//! statements, up to linear-solver noise.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hierarchy::{HierarchySolution, MomentSpectrum};
use crate::linalg::ln_factorial;
use crate::report::fmt_num;
use crate::spectral::SpectralData;

/// Largest `k` whose coefficients are evaluated in exact integer arithmetic
/// (`(2k)!` fits in 64 bits up to `k = 10`).
const EXACT_COEFF_MAX_K: usize = 10;

fn factorial_u64(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// `(k!)² / (2k − 1)!`.
pub fn polya_coefficient(k: usize) -> f64 {
    assert!(k >= 1);
    if k <= EXACT_COEFF_MAX_K {
        let f = factorial_u64(k) as f64;
        f * f / factorial_u64(2 * k - 1) as f64
    } else {
        (2.0 * ln_factorial(k) - ln_factorial(2 * k - 1)).exp()
    }
}

/// `ln((2k)! − (k!)²)`.
fn ln_variance_gap(k: usize) -> f64 {
    if k <= EXACT_COEFF_MAX_K {
        let f = factorial_u64(k);
        ((factorial_u64(2 * k) - f * f) as f64).ln()
    } else {
        let l2k = ln_factorial(2 * k);
        l2k + (-(2.0 * ln_factorial(k) - l2k).exp()).ln_1p()
    }
}

/// `((2k)! − (k!)²) / (2k − 1)!`.
pub fn variance_coefficient(k: usize) -> f64 {
    assert!(k >= 1);
    if k <= EXACT_COEFF_MAX_K {
        let f = factorial_u64(k);
        (factorial_u64(2 * k) - f * f) as f64 / factorial_u64(2 * k - 1) as f64
    } else {
        (ln_variance_gap(k) - ln_factorial(2 * k - 1)).exp()
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::InvalidArgument("bound order k must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Moment form of Pólya's inequality:
/// `λ₁ ≤ (k!)²/(2k−1)! · T_{2k−1} / T_k² · |Ω|`.
pub fn upper_polya(k: usize, moments: &MomentSpectrum, volume: f64) -> Result<f64> {
    check_k(k)?;
    let t_odd = moments.require(2 * k - 1)?;
    let t_k = moments.require(k)?;
    if !(volume > 0.0) {
        return Err(Error::InvalidArgument(format!("volume must be positive, got {volume}")));
    }
    Ok(polya_coefficient(k) * t_odd / (t_k * t_k) * volume)
}

/// `λ₁ ≤ 2k · T_{2k−1} / T_{2k}`.
pub fn upper_ratio(k: usize, moments: &MomentSpectrum) -> Result<f64> {
    check_k(k)?;
    let t_odd = moments.require(2 * k - 1)?;
    let t_even = moments.require(2 * k)?;
    Ok(2.0 * k as f64 * t_odd / t_even)
}

/// `λ₁ ≤ ((2k)! − (k!)²)/(2k−1)! · T_{2k−1} / Var_k`.
pub fn upper_variance(k: usize, moments: &MomentSpectrum, var_k: f64) -> Result<f64> {
    check_k(k)?;
    let t_odd = moments.require(2 * k - 1)?;
    if !(var_k > 0.0) {
        return Err(Error::NonpositiveVariance(var_k));
    }
    Ok(variance_coefficient(k) * t_odd / var_k)
}

/// `(k! · a² / T_k)^{1/k} ≤ λ` for the eigenvalue whose eigenspace carries
/// projection mass `a²`. Zero mass gives the trivial bound 0.
pub fn lower_moment(k: usize, moments: &MomentSpectrum, a_sq: f64) -> Result<f64> {
    check_k(k)?;
    let t_k = moments.require(k)?;
    if a_sq < 0.0 || a_sq.is_nan() {
        return Err(Error::InvalidArgument(format!("projection mass must be non-negative, got {a_sq}")));
    }
    if a_sq == 0.0 {
        return Ok(0.0);
    }
    Ok(((ln_factorial(k) + a_sq.ln() - t_k.ln()) / k as f64).exp())
}

/// `(a² · ((2k)! − (k!)²) / Var_k)^{1/(2k)} ≤ λ`.
pub fn lower_variance(k: usize, var_k: f64, a_sq: f64) -> Result<f64> {
    check_k(k)?;
    if !(var_k > 0.0) {
        return Err(Error::NonpositiveVariance(var_k));
    }
    if a_sq < 0.0 || a_sq.is_nan() {
        return Err(Error::InvalidArgument(format!("projection mass must be non-negative, got {a_sq}")));
    }
    if a_sq == 0.0 {
        return Ok(0.0);
    }
    Ok(((a_sq.ln() + ln_variance_gap(k) - var_k.ln()) / (2 * k) as f64).exp())
}

/// `F(Ω) = λ₁ T₁ / |Ω|`; Pólya's inequality says `F ≤ 1`.
pub fn polya_functional(lambda1: f64, t1: f64, volume: f64) -> f64 {
    lambda1 * t1 / volume
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub k: usize,
    pub upper_polya: f64,
    pub upper_ratio: f64,
    pub upper_variance: f64,
    pub lower_moment: f64,
    pub lower_variance: f64,
    pub reference_lambda1: f64,
    pub polya_functional: f64,
    pub tightness_upper_polya: f64,
    pub tightness_upper_ratio: f64,
    pub tightness_upper_variance: f64,
    pub tightness_lower_moment: f64,
    pub tightness_lower_variance: f64,
}

pub const REPORT_COLUMNS: [&str; 13] = [
    "k",
    "upper_polya",
    "upper_ratio",
    "upper_variance",
    "lower_moment",
    "lower_variance",
    "reference_lambda1",
    "polya_functional",
    "tightness_upper_polya",
    "tightness_upper_ratio",
    "tightness_upper_variance",
    "tightness_lower_moment",
    "tightness_lower_variance",
];

impl BoundReport {
    /// Violations of `lower ≤ λ₀ ≤ upper` beyond relative tolerance `rel_tol`.
    pub fn sandwich_violations(&self, rel_tol: f64) -> Vec<String> {
        let lam = self.reference_lambda1;
        let slack = rel_tol * lam.abs();
        let mut out = Vec::new();
        for (name, v) in [
            ("upper_polya", self.upper_polya),
            ("upper_ratio", self.upper_ratio),
            ("upper_variance", self.upper_variance),
        ] {
            if !(v >= lam - slack) {
                out.push(format!("k={}: {name} = {v} < lambda = {lam}", self.k));
            }
        }
        for (name, v) in [("lower_moment", self.lower_moment), ("lower_variance", self.lower_variance)] {
            if !(v <= lam + slack) {
                out.push(format!("k={}: {name} = {v} > lambda = {lam}", self.k));
            }
        }
        if !(self.polya_functional > 0.0 && self.polya_functional <= 1.0 + rel_tol) {
            out.push(format!("k={}: polya_functional = {} outside (0, 1]", self.k, self.polya_functional));
        }
        out
    }

    fn values(&self) -> [f64; 12] {
        [
            self.upper_polya,
            self.upper_ratio,
            self.upper_variance,
            self.lower_moment,
            self.lower_variance,
            self.reference_lambda1,
            self.polya_functional,
            self.tightness_upper_polya,
            self.tightness_upper_ratio,
            self.tightness_upper_variance,
            self.tightness_lower_moment,
            self.tightness_lower_variance,
        ]
    }
}

/// One row per `k ∈ 1..=k_max`, referenced to the smallest eigenvalue held
/// in `spectrum` and its eigenspace's projection mass.
pub fn build_report(
    hier: &HierarchySolution,
    spectrum: &SpectralData,
    volume: f64,
    k_max: usize,
) -> Result<Vec<BoundReport>> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    if 2 * k_max > hier.depth() {
        return Err(Error::InsufficientMoments { needed: 2 * k_max, available: hier.depth() });
    }
    let (lambda, a_sq) = *spectrum
        .cluster_masses()
        .first()
        .ok_or_else(|| Error::InvalidArgument("spectral data holds no eigenpairs".into()))?;
    let t = &hier.moments;
    let functional = polya_functional(lambda, t.require(1)?, volume);
    (1..=k_max)
        .map(|k| {
            let var_k = hier.var(k).ok_or(Error::InsufficientMoments { needed: 2 * k, available: hier.depth() })?;
            let upper_polya = upper_polya(k, t, volume)?;
            let upper_ratio = upper_ratio(k, t)?;
            let upper_variance = upper_variance(k, t, var_k)?;
            let lower_moment = lower_moment(k, t, a_sq)?;
            let lower_variance = lower_variance(k, var_k, a_sq)?;
            Ok(BoundReport {
                k,
                upper_polya,
                upper_ratio,
                upper_variance,
                lower_moment,
                lower_variance,
                reference_lambda1: lambda,
                polya_functional: functional,
                tightness_upper_polya: upper_polya / lambda,
                tightness_upper_ratio: upper_ratio / lambda,
                tightness_upper_variance: upper_variance / lambda,
                tightness_lower_moment: lower_moment / lambda,
                tightness_lower_variance: lower_variance / lambda,
            })
        })
        .collect()
}

pub fn report_csv(rows: &[BoundReport]) -> String {
    let mut out = REPORT_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{}", r.k);
        for v in r.values() {
            let _ = write!(out, ",{}", fmt_num(v));
        }
        out.push('\n');
    }
    out
}

pub fn report_json(rows: &[BoundReport]) -> serde_json::Value {
    serde_json::to_value(rows).expect("reports serialize")
}
