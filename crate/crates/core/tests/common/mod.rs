//! Independent oracles shared by the integration and acceptance targets.
#![allow(dead_code)]

use exit_moments::SparseOperator;
use nalgebra::DMatrix;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Q = Ratio<i128>;

/// Polynomial with exact rational coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<Q>);

impl Poly {
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + to_f64(*c))
    }

    pub fn eval_exact(&self, x: Q) -> Q {
        self.0.iter().rev().fold(Q::from_integer(0), |acc, c| acc * x + c)
    }

    fn antiderivative(&self) -> Poly {
        let mut out = vec![Q::from_integer(0)];
        for (i, c) in self.0.iter().enumerate() {
            out.push(c / Q::from_integer(i as i128 + 1));
        }
        Poly(out)
    }

    /// `∫₀¹ p`.
    pub fn integral01(&self) -> Q {
        self.antiderivative().eval_exact(Q::from_integer(1))
    }
}

pub fn to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// Exact `u_1..=u_K` on (0, 1): `u_k'' = −k·u_{k−1}`, `u_k(0) = u_k(1) = 0`.
pub fn interval_hierarchy(order: usize) -> Vec<Poly> {
    let mut prev = Poly(vec![Q::from_integer(1)]);
    let mut out = Vec::new();
    for k in 1..=order {
        let rhs = Poly(prev.0.iter().map(|c| -c * Q::from_integer(k as i128)).collect());
        let mut u = rhs.antiderivative().antiderivative();
        // Add a·x so that u(1) = 0; u(0) = 0 already.
        let at_one = u.eval_exact(Q::from_integer(1));
        if u.0.len() < 2 {
            u.0.resize(2, Q::from_integer(0));
        }
        u.0[1] -= at_one;
        out.push(u.clone());
        prev = u;
    }
    out
}

/// Exact `T_k = ∫₀¹ u_k` for the unit interval.
pub fn interval_moments(order: usize) -> Vec<Q> {
    interval_hierarchy(order).iter().map(Poly::integral01).collect()
}

/// Bessel `J₀` by its power series (accurate for `|x| ≲ 10`).
pub fn bessel_j0(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..60 {
        term *= q / (m as f64 * m as f64);
        sum += term;
    }
    sum
}

/// First positive zero of `J₀`, by bisection.
pub fn bessel_j0_first_zero() -> f64 {
    let (mut a, mut b) = (2.0, 3.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if bessel_j0(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Random SPD matrix `BᵀB/n + s·I` with entries of `B` uniform in (−1, 1).
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let b: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect();
    let shift = 0.05 + rng.random::<f64>();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let v: f64 = (0..n).map(|r| b[r][i] * b[r][j]).sum::<f64>() / n as f64;
                    if i == j {
                        v + shift
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Smallest eigenvalue and the projection mass of the constant vector onto
/// its eigenspace, from nalgebra's dense symmetric solver, in the
/// quadrature inner product of `op`.
pub fn dense_principal(op: &SparseOperator) -> (f64, f64) {
    let n = op.order();
    let dense = op.to_dense();
    let m = DMatrix::from_fn(n, n, |i, j| dense[i][j]);
    let eig = m.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lam = eig.eigenvalues[idx[0]];
    let c = op.cell_measure();
    let mut mass = 0.0;
    for &i in &idx {
        if (eig.eigenvalues[i] - lam).abs() > 1e-10 * lam.abs() {
            break;
        }
        let col = eig.eigenvectors.column(i);
        // φ = v/√c is quadrature-normalized; a = c·Σφ.
        let a = c.sqrt() * col.iter().sum::<f64>();
        mass += a * a;
    }
    (lam, mass)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
