//! Small dense kernels used by the eigensolvers.

/// Cyclic Jacobi eigen-decomposition of a dense symmetric matrix.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns (`vectors[row][col]`).
pub fn symmetric_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let frob: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    if frob == 0.0 {
        return (vec![0.0; n], v);
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * frob {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = (0..n).map(|r| order.iter().map(|&c| v[r][c]).collect()).collect();
    (values, vectors)
}

/// Orthonormalizes the columns in place (Gram–Schmidt with one
/// re-orthogonalization pass). Columns that collapse numerically are
/// replaced by coordinate vectors until one survives.
pub fn orthonormalize(cols: &mut [Vec<f64>]) {
    for j in 0..cols.len() {
        let n = cols[j].len();
        let mut original = dot(&cols[j], &cols[j]).sqrt();
        let mut replacement = 0;
        loop {
            for _pass in 0..2 {
                let (head, tail) = cols.split_at_mut(j);
                for prev in head.iter() {
                    let proj = dot(prev, &tail[0]);
                    for (x, y) in tail[0].iter_mut().zip(prev) {
                        *x -= proj * y;
                    }
                }
            }
            let norm = dot(&cols[j], &cols[j]).sqrt();
            if norm > 1e-10 * original && norm > 0.0 {
                cols[j].iter_mut().for_each(|x| *x /= norm);
                break;
            }
            assert!(replacement < n, "cannot extend an orthonormal set beyond the dimension");
            cols[j] = vec![0.0; n];
            cols[j][replacement] = 1.0;
            replacement += 1;
            original = 1.0;
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Σ_j coeffs[j][col] · basis[j]` for every column of `coeffs`.
pub fn combine(basis: &[Vec<f64>], coeffs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = basis.first().map_or(0, Vec::len);
    let cols = coeffs.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; n]; cols];
    for (j, b) in basis.iter().enumerate() {
        for (c, o) in out.iter_mut().enumerate() {
            let w = coeffs[j][c];
            if w != 0.0 {
                for (x, y) in o.iter_mut().zip(b) {
                    *x += w * y;
                }
            }
        }
    }
    out
}

pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}
