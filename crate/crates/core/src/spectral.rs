//! Low Dirichlet spectrum, projection masses and the spectral side of the
//! moment identities.
//!
//! Eigenvectors are normalized in the quadrature inner product
//! (`cell_measure · Σ φ² = 1`), so `a_sq[i] = (cell_measure · Σ φ_i)²` is the
//! squared norm of the projection of the constant function onto `φ_i`.
//! Within a cluster of (numerically) equal eigenvalues the basis is rotated
//! so the first vector carries the whole projection of the constant and the
//! rest are orthogonal to it; `a_sq` is then a per-eigenspace quantity.

use std::fmt::Write as _;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hierarchy::MomentSpectrum;
use crate::linalg::{combine, dot, ln_factorial, orthonormalize, symmetric_eigen};
use crate::operators::{conjugate_gradient, default_max_iter, SparseOperator};
use crate::report::fmt_num;

/// Relative gap below which neighbouring eigenvalues form one eigenspace.
pub const CLUSTER_GAP: f64 = 1e-10;
/// Eigen-residual target, relative to λ, for quadrature-normalized vectors.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;
pub const MAX_OUTER_ITERATIONS: usize = 500;
/// Largest operator decomposed densely by [`full_spectrum`].
pub const FULL_SPECTRUM_MAX: usize = 600;

const INNER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub lambda: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub a_sq: Vec<f64>,
    /// `‖op·φ_i − λ_i·φ_i‖₂` per pair.
    pub residuals: Vec<f64>,
    /// Index ranges of eigenvalue clusters, in ascending order.
    pub clusters: Vec<Range<usize>>,
    pub cell_measure: f64,
}

impl SpectralData {
    /// Number of eigenpairs.
    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// Builds from Euclidean-orthonormal eigenvectors.
    fn from_pairs(op: &SparseOperator, lambda: Vec<f64>, vectors: Vec<Vec<f64>>) -> Self {
        let cm = op.cell_measure();
        let scale = 1.0 / cm.sqrt();
        let mut phi: Vec<Vec<f64>> = vectors
            .into_iter()
            .map(|v| {
                let sign = if v.iter().sum::<f64>() < 0.0 { -scale } else { scale };
                v.into_iter().map(|x| x * sign).collect()
            })
            .collect();
        let mut lambda = lambda;
        let clusters = group_clusters(&lambda);

        for range in &clusters {
            if range.len() < 2 {
                continue;
            }
            let c: Vec<f64> = range.clone().map(|i| op.integrate(&phi[i])).collect();
            let norm = dot(&c, &c).sqrt();
            if norm == 0.0 {
                continue;
            }
            // Householder reflection whose first column is c / |c|.
            let s = range.len();
            let mut v: Vec<f64> = c.iter().map(|x| x / norm).collect();
            v[0] -= 1.0;
            let vv = dot(&v, &v);
            if vv > 1e-30 {
                let q: Vec<Vec<f64>> = (0..s)
                    .map(|i| (0..s).map(|j| (if i == j { 1.0 } else { 0.0 }) - 2.0 * v[i] * v[j] / vv).collect())
                    .collect();
                let basis: Vec<Vec<f64>> = range.clone().map(|i| phi[i].clone()).collect();
                let rotated = combine(&basis, &q);
                for (off, vec) in rotated.into_iter().enumerate() {
                    phi[range.start + off] = vec;
                }
            }
            for i in range.clone() {
                let av = op.apply(&phi[i]);
                lambda[i] = dot(&phi[i], &av) / dot(&phi[i], &phi[i]);
            }
            // The reflection leaves the first vector with a non-negative mean.
            if phi[range.start].iter().sum::<f64>() < 0.0 {
                phi[range.start].iter_mut().for_each(|x| *x = -*x);
            }
        }

        let a_sq = phi.iter().map(|p| op.integrate(p).powi(2)).collect();
        let residuals = phi
            .iter()
            .zip(&lambda)
            .map(|(p, &l)| {
                let ap = op.apply(p);
                ap.iter().zip(p).map(|(a, x)| (a - l * x).powi(2)).sum::<f64>().sqrt()
            })
            .collect();
        SpectralData { lambda, phi, a_sq, residuals, clusters, cell_measure: cm }
    }

    /// Projection mass of each eigenspace (one entry per cluster).
    pub fn cluster_masses(&self) -> Vec<(f64, f64)> {
        self.clusters.iter().map(|r| (self.lambda[r.start], r.clone().map(|i| self.a_sq[i]).sum())).collect()
    }

    /// Spectrum table with columns `i, lambda_i, a_sq_i, residual_i`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,lambda_i,a_sq_i,residual_i\n");
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{i},{},{},{}",
                fmt_num(self.lambda[i]),
                fmt_num(self.a_sq[i]),
                fmt_num(self.residuals[i])
            );
        }
        out
    }
}

fn group_clusters(lambda: &[f64]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=lambda.len() {
        if i == lambda.len() || (lambda[i] - lambda[i - 1]).abs() > CLUSTER_GAP * lambda[i].abs() {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// The `m` smallest eigenpairs by block inverse iteration with
/// Rayleigh–Ritz extraction; each inverse application is a warm-started
/// CG solve. If the `m`-th eigenvalue belongs to a cluster that continues
/// past `m`, the whole cluster is returned.
pub fn smallest_eigenpairs(op: &SparseOperator, m: usize) -> Result<SpectralData> {
    let n = op.order();
    if m == 0 || 2 * m > n {
        return Err(Error::InvalidArgument(format!("eigenpair count {m} must satisfy 1 <= m <= n/2 (n = {n})")));
    }
    let block = (2 * m).max(m + 2).min(n);
    // Margin for the in-cluster rotation, which can combine residuals.
    let target = 0.25 * EIGEN_RESIDUAL_TOL * op.cell_measure().sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_e16e);
    let mut x: Vec<Vec<f64>> =
        (0..block).map(|j| (0..n).map(|_| if j == 0 { 1.0 } else { rng.random::<f64>() - 0.5 }).collect()).collect();
    orthonormalize(&mut x);
    let (mut theta, mut ax) = rayleigh_ritz(op, &mut x);
    let max_iter = default_max_iter(n);

    let mut last_res = f64::INFINITY;
    for _outer in 0..MAX_OUTER_ITERATIONS {
        let res = ritz_residuals(&x, &ax, &theta);
        let wanted = wanted_count(&theta, m);
        last_res = (0..wanted).map(|i| res[i] / theta[i]).fold(0.0, f64::max);
        if last_res <= target {
            let lambda = theta[..wanted].to_vec();
            let vecs = x[..wanted].to_vec();
            let data = SpectralData::from_pairs(op, lambda, vecs);
            if let Some((index, &r)) =
                data.residuals.iter().enumerate().find(|(i, &r)| r > EIGEN_RESIDUAL_TOL * data.lambda[*i])
            {
                return Err(Error::ConvergenceFailure { index, residual: r });
            }
            return Ok(data);
        }
        // Solve only as accurately as the current outer residual warrants.
        let inner_tol = (0.01 * last_res).clamp(INNER_TOL, 1e-6);
        let mut y = Vec::with_capacity(block);
        for (j, xj) in x.iter().enumerate() {
            let guess: Vec<f64> = xj.iter().map(|v| v / theta[j]).collect();
            // Inexact inner solves only perturb the iteration; an unconverged
            // iterate is still a usable step as long as it made progress.
            let out = conjugate_gradient(op, xj, Some(&guess), inner_tol, max_iter)?;
            if !out.converged && !(out.stats.relative_residual < 1e-6) {
                return Err(Error::MaxIterationsExceeded {
                    iterations: out.stats.iterations,
                    residual: out.stats.relative_residual,
                });
            }
            y.push(out.x);
        }
        x = y;
        orthonormalize(&mut x);
        (theta, ax) = rayleigh_ritz(op, &mut x);
    }
    let index = (0..m).find(|&i| ritz_residuals(&x, &ax, &theta)[i] / theta[i] > target).unwrap_or(0);
    Err(Error::ConvergenceFailure { index, residual: last_res })
}

/// Number of leading Ritz pairs to report: `m`, extended through a cluster
/// that straddles position `m` while it stays inside the block.
fn wanted_count(theta: &[f64], m: usize) -> usize {
    let mut w = m;
    while w < theta.len().saturating_sub(1) && (theta[w] - theta[w - 1]).abs() <= CLUSTER_GAP * theta[w] {
        w += 1;
    }
    w
}

/// Rotates the orthonormal block `x` onto Ritz vectors; returns ascending
/// Ritz values and `op·x`.
fn rayleigh_ritz(op: &SparseOperator, x: &mut Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let ax: Vec<Vec<f64>> = x.iter().map(|v| op.apply(v)).collect();
    let p = x.len();
    let mut h = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in i..p {
            let v = 0.5 * (dot(&x[i], &ax[j]) + dot(&x[j], &ax[i]));
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    let (theta, q) = symmetric_eigen(&h);
    *x = combine(x, &q);
    let ax = combine(&ax, &q);
    (theta, ax)
}

fn ritz_residuals(x: &[Vec<f64>], ax: &[Vec<f64>], theta: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(ax)
        .zip(theta)
        .map(|((v, av), &t)| av.iter().zip(v).map(|(a, b)| (a - t * b).powi(2)).sum::<f64>().sqrt())
        .collect()
}

/// Every eigenpair of a small operator, by dense Jacobi rotation.
pub fn full_spectrum(op: &SparseOperator) -> Result<SpectralData> {
    let n = op.order();
    if n > FULL_SPECTRUM_MAX {
        return Err(Error::InvalidArgument(format!(
            "full spectrum limited to order {FULL_SPECTRUM_MAX}, operator has order {n}"
        )));
    }
    let (values, vectors) = symmetric_eigen(&op.to_dense());
    let cols: Vec<Vec<f64>> = (0..n).map(|c| (0..n).map(|r| vectors[r][c]).collect()).collect();
    if let Some(&bad) = values.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(format!("operator is not positive definite (eigenvalue {bad:e})")));
    }
    Ok(SpectralData::from_pairs(op, values, cols))
}

/// `H(t) = Σ a_sq[i] · exp(−λ_i t)`, truncated to the pairs held.
pub fn heat_content(data: &SpectralData, t: f64) -> f64 {
    data.lambda.iter().zip(&data.a_sq).map(|(l, a)| a * (-l * t).exp()).sum()
}

/// `ζ(s) = Σ a_sq[i] · λ_i^{−s}`, truncated to the pairs held.
pub fn zeta(data: &SpectralData, s: f64) -> f64 {
    data.lambda.iter().zip(&data.a_sq).map(|(l, a)| a * l.powf(-s)).sum()
}

/// `k · T_{k−1} / T_k` at the largest available `k`. Approaches λ₁ from
/// above as `k` grows when the spectrum has a gap.
pub fn lambda1_from_moments(moments: &MomentSpectrum) -> Result<f64> {
    let k = moments.order();
    if k < 3 {
        return Err(Error::InsufficientMoments { needed: 3, available: k });
    }
    Ok(k as f64 * moments.require(k - 1)? / moments.require(k)?)
}

/// `λ^K · T_K / K!` at the largest available `K`, evaluated in log space.
pub fn a1_from_moments(moments: &MomentSpectrum, lambda1: f64) -> Result<f64> {
    let k = moments.order();
    if k < 2 {
        return Err(Error::InsufficientMoments { needed: 2, available: k });
    }
    if !(lambda1 > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda1 must be positive, got {lambda1}")));
    }
    let t = moments.require(k)?;
    Ok((t.ln() + k as f64 * lambda1.ln() - ln_factorial(k)).exp())
}

/// `k ∫₀^{t_max} t^{k−1} H(t) dt` by adaptive Simpson quadrature.
pub fn moment_from_heat_content(data: &SpectralData, k: usize, t_max: f64, rel_tol: f64) -> f64 {
    let f = |t: f64| k as f64 * t.powi(k as i32 - 1) * heat_content(data, t);
    // Split at the fastest decay scale so the first panels resolve the
    // high-frequency transient.
    let lam_max = data.lambda.iter().copied().fold(0.0, f64::max).max(1.0 / t_max);
    let mut edges = vec![0.0];
    let mut t = 1.0 / lam_max;
    while t < t_max {
        edges.push(t);
        t *= 2.0;
    }
    edges.push(t_max);
    let panels: Vec<_> = edges
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
            (a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
        })
        .collect();
    let coarse: f64 = panels.iter().map(|p| p.5.abs()).sum();
    let tol = rel_tol * coarse.max(f64::MIN_POSITIVE) * 1e-2 / panels.len() as f64;
    panels.iter().map(|&(a, b, fa, fm, fb, whole)| simpson(&f, a, b, fa, fm, fb, whole, tol, 48)).sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, grid_volume, DomainSpec};
    use crate::hierarchy::solve_hierarchy;
    use crate::operators::assemble_laplacian;
    use std::f64::consts::PI;

    fn interval_op(h: f64) -> SparseOperator {
        assemble_laplacian(&build_grid(&DomainSpec::Interval { length: 1.0 }, h).unwrap())
    }

    #[test]
    fn interval_principal_pair() {
        let data = smallest_eigenpairs(&interval_op(0.01), 2).unwrap();
        assert!((data.lambda[0] - PI * PI).abs() / (PI * PI) < 1e-3);
        assert!((data.a_sq[0] - 8.0 / (PI * PI)).abs() / (8.0 / (PI * PI)) < 2e-3);
        assert!(data.a_sq[1] < 1e-6, "{}", data.a_sq[1]);
        for i in 0..data.len() {
            assert!(data.residuals[i] <= EIGEN_RESIDUAL_TOL * data.lambda[i]);
        }
        let cm = data.cell_measure;
        assert!((cm * dot(&data.phi[0], &data.phi[0]) - 1.0).abs() < 1e-12);
        assert!((cm * dot(&data.phi[0], &data.phi[1])).abs() < 1e-8);
    }

    #[test]
    fn unit_square_principal_eigenvalue() {
        let g = build_grid(&DomainSpec::Rectangle { width: 1.0, height: 1.0 }, 0.02).unwrap();
        let data = smallest_eigenpairs(&assemble_laplacian(&g), 1).unwrap();
        let exact = 2.0 * PI * PI;
        assert!((data.lambda[0] - exact).abs() / exact < 5e-3);
    }

    #[test]
    fn degenerate_modes_are_grouped() {
        // λ(1,2) = λ(2,1) on the square.
        let g = build_grid(&DomainSpec::Rectangle { width: 1.0, height: 1.0 }, 0.05).unwrap();
        let op = assemble_laplacian(&g);
        let data = smallest_eigenpairs(&op, 3).unwrap();
        assert_eq!(data.clusters, vec![0..1, 1..3]);
        // Modes (1,2) and (2,1) are odd about a midline: no constant mass.
        assert!(data.a_sq[1].abs() < 1e-12 && data.a_sq[2].abs() < 1e-12);
        let full = full_spectrum(&op).unwrap();
        assert!((full.lambda[1] - data.lambda[1]).abs() < 1e-9 * full.lambda[1]);
    }

    #[test]
    fn rejects_bad_counts() {
        let op = interval_op(0.1);
        assert!(smallest_eigenpairs(&op, 0).is_err());
        assert!(smallest_eigenpairs(&op, 5).is_err());
        assert!(smallest_eigenpairs(&op, 4).is_ok());
    }

    #[test]
    fn full_spectrum_partitions_volume_and_matches_moments() {
        let g = build_grid(&DomainSpec::Interval { length: 1.0 }, 1.0 / 40.0).unwrap();
        let op = assemble_laplacian(&g);
        let data = full_spectrum(&op).unwrap();
        let total: f64 = data.a_sq.iter().sum();
        assert!((total - grid_volume(&g)).abs() < 1e-10 * total);
        let hier = solve_hierarchy(&op, 4, 1e-12).unwrap();
        let mut fact = 1.0;
        for k in 1..=4 {
            fact *= k as f64;
            let t = hier.t(k).unwrap();
            assert!((fact * zeta(&data, k as f64) - t).abs() < 1e-9 * t);
        }
    }

    #[test]
    fn heat_content_limits() {
        let data = full_spectrum(&interval_op(0.05)).unwrap();
        let vol: f64 = data.a_sq.iter().sum();
        assert!((heat_content(&data, 1e-12) - vol).abs() < 1e-9);
        let t = 41.0 / data.lambda[0];
        let lead = data.a_sq[0] * (-data.lambda[0] * t).exp();
        assert!((heat_content(&data, t) - lead).abs() <= 1e-15 * lead);
    }

    #[test]
    fn heat_content_integral_recovers_moments() {
        let op = interval_op(0.05);
        let data = full_spectrum(&op).unwrap();
        let hier = solve_hierarchy(&op, 4, 1e-12).unwrap();
        for k in 1..=4 {
            let q = moment_from_heat_content(&data, k, 60.0 / data.lambda[0], 1e-10);
            let t = hier.t(k).unwrap();
            assert!((q - t).abs() < 1e-8 * t, "k={k}: {q} vs {t}");
        }
    }

    #[test]
    #[allow(clippy::single_range_in_vec_init)]
    fn single_pair_zeta() {
        let data = SpectralData {
            lambda: vec![4.0],
            phi: vec![vec![1.0]],
            a_sq: vec![0.25],
            residuals: vec![0.0],
            clusters: vec![0..1],
            cell_measure: 1.0,
        };
        assert_eq!(zeta(&data, 3.0), 0.25 / 64.0);
    }

    #[test]
    fn moment_asymptotics_on_exact_moments() {
        let exact = MomentSpectrum::new(vec![1.0 / 12.0, 1.0 / 60.0, 17.0 / 3360.0]);
        assert!((lambda1_from_moments(&exact).unwrap() - 168.0 / 17.0).abs() < 1e-12);
        let two = MomentSpectrum::new(vec![1.0 / 12.0, 1.0 / 60.0]);
        assert!(matches!(lambda1_from_moments(&two), Err(Error::InsufficientMoments { .. })));
        let a = a1_from_moments(&two, PI * PI).unwrap();
        assert!((a - PI.powi(4) / 120.0).abs() < 1e-12);

        let single = MomentSpectrum::single_mode(7.5, 0.3, 12);
        assert!((lambda1_from_moments(&single).unwrap() - 7.5).abs() < 1e-12);
        assert!((a1_from_moments(&single, 7.5).unwrap() - 0.3).abs() < 1e-12);
    }
}
