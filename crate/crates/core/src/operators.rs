//! Symmetric positive-definite discrete operators.
//!
//! Assembled matrices represent the *negative* Laplacian or the negative
//! divergence-form operator `-div(A∇·)`, so every grid-backed matrix is an
//! SPD M-matrix and the Poisson hierarchy reads `op · u_k = k · u_{k-1}`.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Grid;

pub const DEFAULT_TOL: f64 = 1e-10;

/// Default iteration cap, `20·n`.
pub fn default_max_iter(n: usize) -> usize {
    20 * n.max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Provenance {
    GridLaplacian,
    GridDivergenceForm,
    UserMatrix,
}

impl Provenance {
    pub fn is_grid(self) -> bool {
        !matches!(self, Provenance::UserMatrix)
    }
}

/// Symmetric matrix in compressed sparse row layout (full pattern, columns
/// sorted within each row) together with its quadrature weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    cell_measure: f64,
    provenance: Provenance,
}

impl SparseOperator {
    /// Builds from the upper triangle (`i <= j`) of a symmetric matrix.
    pub fn from_upper_triplets(
        n: usize,
        triplets: &[(usize, usize, f64)],
        cell_measure: f64,
        provenance: Provenance,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("matrix order must be positive".into()));
        }
        if !(cell_measure.is_finite() && cell_measure > 0.0) {
            return Err(Error::InvalidArgument(format!("cell measure must be positive, got {cell_measure}")));
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!("entry ({i}, {j}) out of range for order {n}")));
            }
            if i > j {
                return Err(Error::InvalidArgument(format!("entry ({i}, {j}) lies below the diagonal")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("entry ({i}, {j}) is not finite")));
            }
            rows[i].push((j, v));
            if i != j {
                rows[j].push((i, v));
            }
        }
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidArgument(format!("row {i} has duplicate entries")));
            }
            match row.iter().find(|&&(j, _)| j == i) {
                Some(&(_, d)) if d > 0.0 => {}
                _ => return Err(Error::InvalidArgument(format!("row {i} needs a positive diagonal entry"))),
            }
            for &(j, v) in row.iter() {
                col_indices.push(j);
                values.push(v);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(SparseOperator { n, row_offsets, col_indices, values, cell_measure, provenance })
    }

    /// Builds from a dense symmetric matrix (upper triangle is read).
    pub fn from_dense(matrix: &[Vec<f64>], cell_measure: f64) -> Result<Self> {
        let n = matrix.len();
        let mut triplets = Vec::new();
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidArgument("dense matrix must be square".into()));
            }
            for (j, &v) in row.iter().enumerate().skip(i) {
                if v != 0.0 || i == j {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_upper_triplets(n, &triplets, cell_measure, Provenance::UserMatrix)
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn cell_measure(&self) -> f64 {
        self.cell_measure
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[span.clone()].binary_search(&j) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = op · x`.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *yi = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.apply_into(x, &mut y);
        y
    }

    /// `op^power · x`.
    pub fn apply_power(&self, x: &[f64], power: usize) -> Vec<f64> {
        let mut v = x.to_vec();
        for _ in 0..power {
            v = self.apply(&v);
        }
        v
    }

    /// Bitwise check that entry `(i, j)` equals entry `(j, i)`.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i).to_bits() == v.to_bits()))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// Same sparsity, values multiplied by `c`.
    pub fn scaled(&self, c: f64) -> SparseOperator {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    #[cfg(test)]
    pub(crate) fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        m
    }

    /// Rectangle-rule integral `cell_measure · Σ v_i`.
    pub fn integrate(&self, v: &[f64]) -> f64 {
        self.cell_measure * v.iter().sum::<f64>()
    }

    /// Quadrature inner product `cell_measure · Σ a_i b_i`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.cell_measure * dot(a, b)
    }

    /// `n · cell_measure`, the volume seen by the quadrature.
    pub fn volume(&self) -> f64 {
        self.n as f64 * self.cell_measure
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

type CoefficientFn = dyn Fn(&[f64]) -> [[f64; 2]; 2] + Send + Sync;

/// Symmetric coefficient matrix `A(x)` of `div(A∇·)`. In 1D only the
/// `[0][0]` entry is read.
#[derive(Clone)]
pub struct CoefficientField {
    eval: Arc<CoefficientFn>,
    ellipticity_floor: f64,
}

impl std::fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientField").field("ellipticity_floor", &self.ellipticity_floor).finish()
    }
}

impl CoefficientField {
    pub fn new<F>(ellipticity_floor: f64, eval: F) -> Self
    where
        F: Fn(&[f64]) -> [[f64; 2]; 2] + Send + Sync + 'static,
    {
        CoefficientField { eval: Arc::new(eval), ellipticity_floor }
    }

    pub fn scaled_identity(c: f64) -> Self {
        Self::new(c, move |_| [[c, 0.0], [0.0, c]])
    }

    pub fn identity() -> Self {
        Self::scaled_identity(1.0)
    }

    /// `A(x) = diag(a(x), b(x))`.
    pub fn diagonal<F>(ellipticity_floor: f64, diag: F) -> Self
    where
        F: Fn(&[f64]) -> [f64; 2] + Send + Sync + 'static,
    {
        Self::new(ellipticity_floor, move |x| {
            let [a, b] = diag(x);
            [[a, 0.0], [0.0, b]]
        })
    }

    pub fn ellipticity_floor(&self) -> f64 {
        self.ellipticity_floor
    }

    pub fn evaluate(&self, x: &[f64]) -> [[f64; 2]; 2] {
        (self.eval)(x)
    }

    /// Normal-direction coefficient at a face midpoint, after checking the
    /// diagonal-anisotropy restriction and the ellipticity floor there.
    fn face_coefficient(&self, x: &[f64], axis: usize) -> Result<f64> {
        let a = self.evaluate(x);
        let d = x.len();
        if d == 2 && (a[0][1] != 0.0 || a[1][0] != 0.0) {
            return Err(Error::UnsupportedAnisotropy { point: x.to_vec() });
        }
        for i in 0..d {
            let v = a[i][i];
            if !(v >= self.ellipticity_floor) {
                return Err(Error::EllipticityViolation { point: x.to_vec(), value: v, floor: self.ellipticity_floor });
            }
        }
        Ok(a[axis][axis])
    }
}

/// Flux-form assembly: every face between node `i` and its axis neighbour
/// contributes `a_face / h²` to the diagonal, and `-a_face / h²` to the
/// off-diagonal when the neighbour is interior. Faces are evaluated at the
/// midpoint computed from the lower node so both rows see the same value.
fn assemble_flux<F>(grid: &Grid, provenance: Provenance, mut face: F) -> Result<SparseOperator>
where
    F: FnMut(&[f64], usize) -> Result<f64>,
{
    let n = grid.len();
    let d = grid.dimension();
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(n * (2 * d + 1));
    let mut values = Vec::with_capacity(n * (2 * d + 1));
    row_offsets.push(0);
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(2 * d + 1);
    for i in 0..n {
        entries.clear();
        let mut diag_sum = 0.0;
        let coords = grid.lattice_coords(i).to_vec();
        for axis in 0..d {
            for forward in [false, true] {
                let mut lower = coords.clone();
                if !forward {
                    lower[axis] -= 1;
                }
                let mut mid = grid.lattice_point(&lower);
                mid[axis] += 0.5 * h;
                let a = face(&mid, axis)?;
                diag_sum += a;
                if let Some(j) = grid.neighbor(i, axis, forward) {
                    entries.push((j, -(a * inv_h2)));
                }
            }
        }
        entries.push((i, diag_sum * inv_h2));
        entries.sort_by_key(|&(j, _)| j);
        for &(j, v) in &entries {
            col_indices.push(j);
            values.push(v);
        }
        row_offsets.push(col_indices.len());
    }
    Ok(SparseOperator { n, row_offsets, col_indices, values, cell_measure: grid.cell_measure(), provenance })
}

/// Second-order central-difference `-Δ` with homogeneous Dirichlet data.
pub fn assemble_laplacian(grid: &Grid) -> SparseOperator {
    assemble_flux(grid, Provenance::GridLaplacian, |_, _| Ok(1.0)).expect("unit coefficient never fails")
}

/// `-div(A∇·)` for diagonal `A(x)`.
pub fn assemble_divergence_form(grid: &Grid, coeff: &CoefficientField) -> Result<SparseOperator> {
    assemble_flux(grid, Provenance::GridDivergenceForm, |x, axis| coeff.face_coefficient(x, axis))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
pub fn solve_spd(op: &SparseOperator, rhs: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    solve_spd_from(op, rhs, None, tol, max_iter).map(|(x, _)| x)
}

/// Jacobi-preconditioned conjugate gradients. Terminates once the true
/// relative residual `‖b − A x‖₂ / ‖b‖₂` is at most `tol`.
pub fn solve_spd_from(
    op: &SparseOperator,
    rhs: &[f64],
    guess: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let outcome = conjugate_gradient(op, rhs, guess, tol, max_iter)?;
    if outcome.converged {
        Ok((outcome.x, outcome.stats))
    } else {
        Err(Error::MaxIterationsExceeded {
            iterations: outcome.stats.iterations,
            residual: outcome.stats.relative_residual,
        })
    }
}

const STALL_RESTARTS: usize = 3;

pub(crate) struct CgOutcome {
    pub x: Vec<f64>,
    pub stats: SolveStats,
    pub converged: bool,
}

/// CG core; on failure the last iterate is returned with `converged = false`.
pub(crate) fn conjugate_gradient(
    op: &SparseOperator,
    rhs: &[f64],
    guess: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = op.order();
    if rhs.len() != n {
        return Err(Error::InvalidArgument(format!("rhs has length {}, operator order is {n}", rhs.len())));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let b_norm = norm2(rhs);
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            stats: SolveStats { iterations: 0, relative_residual: 0.0 },
            converged: true,
        });
    }
    let inv_diag: Vec<f64> = op.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut x = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        _ => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut iterations = 0;
    let target = tol * b_norm;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut stalled = 0;

    // Each pass restarts from the true residual, so a recurrence that drifts
    // below the target without the true residual following is caught.
    loop {
        op.apply_into(&x, &mut q);
        for i in 0..n {
            r[i] = rhs[i] - q[i];
        }
        let true_res = norm2(&r);
        match &best {
            Some((b, _)) if true_res >= 0.5 * b => stalled += 1,
            _ => stalled = 0,
        }
        if best.as_ref().is_none_or(|(b, _)| true_res < *b) {
            best = Some((true_res, x.clone()));
        }
        // Restarts that no longer halve the true residual mean it has hit
        // the rounding floor.
        if true_res <= target || iterations >= max_iter || stalled >= STALL_RESTARTS {
            let (res, bx) = best.expect("at least one residual evaluated");
            return Ok(CgOutcome {
                x: bx,
                stats: SolveStats { iterations, relative_residual: res / b_norm },
                converged: res <= target,
            });
        }
        for i in 0..n {
            z[i] = inv_diag[i] * r[i];
            p[i] = z[i];
        }
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            op.apply_into(&p, &mut q);
            let pq = dot(&p, &q);
            if !(pq > 0.0) {
                // Not positive definite along p: give up on this operator.
                let (res, bx) = best.expect("at least one residual evaluated");
                return Ok(CgOutcome {
                    x: bx,
                    stats: SolveStats { iterations, relative_residual: res / b_norm },
                    converged: false,
                });
            }
            let alpha = rz / pq;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            iterations += 1;
            if norm2(&r) <= 0.5 * target {
                break;
            }
            for i in 0..n {
                z[i] = inv_diag[i] * r[i];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
}

/// Parses the user-matrix text format: `n nnz`, then `nnz` lines `i j value`
/// (0-based, upper triangle), then `cell_measure value`.
pub fn parse_user_matrix(text: &str) -> Result<SparseOperator> {
    let mut lines = text.lines().enumerate().map(|(no, l)| (no + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let err = |line: usize, msg: &str| Error::Parse(format!("line {line}: {msg}"));

    let (no, header) = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 2 {
        return Err(err(no, "expected header `n nnz`"));
    }
    let n: usize = head[0].parse().map_err(|_| err(no, "matrix order is not an integer"))?;
    let nnz: usize = head[1].parse().map_err(|_| err(no, "nnz is not an integer"))?;

    let mut triplets = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let (no, line) =
            lines.next().ok_or_else(|| Error::Parse(format!("expected {nnz} entries, file ended early")))?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(err(no, "expected `i j value`"));
        }
        let i: usize = parts[0].parse().map_err(|_| err(no, "row index is not an integer"))?;
        let j: usize = parts[1].parse().map_err(|_| err(no, "column index is not an integer"))?;
        let v: f64 = parts[2].parse().map_err(|_| err(no, "value is not a number"))?;
        triplets.push((i, j, v));
    }
    let (no, tail) = lines.next().ok_or_else(|| Error::Parse("missing `cell_measure` line".into()))?;
    let cm = match tail.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["cell_measure", v] => v.parse::<f64>().map_err(|_| err(no, "cell_measure is not a number"))?,
        _ => return Err(err(no, "expected `cell_measure value`")),
    };
    if let Some((no, _)) = lines.next() {
        return Err(err(no, "unexpected trailing content"));
    }
    SparseOperator::from_upper_triplets(n, &triplets, cm, Provenance::UserMatrix)
        .map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_user_matrix(path: &Path) -> Result<SparseOperator> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_user_matrix(&text)
}

/// Serializes in the user-matrix format with round-trip-exact values.
pub fn format_user_matrix(op: &SparseOperator) -> String {
    let upper: Vec<(usize, usize, f64)> =
        (0..op.order()).flat_map(|i| op.row(i).filter(move |&(j, _)| j >= i).map(move |(j, v)| (i, j, v))).collect();
    let mut out = format!("{} {}\n", op.order(), upper.len());
    for (i, j, v) in upper {
        let _ = writeln!(out, "{i} {j} {v:e}");
    }
    let _ = writeln!(out, "cell_measure {:e}", op.cell_measure());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, DomainSpec};

    fn interval(h: f64) -> Grid {
        build_grid(&DomainSpec::Interval { length: 1.0 }, h).unwrap()
    }

    #[test]
    fn interval_stencil() {
        let op = assemble_laplacian(&interval(0.25));
        assert_eq!(op.to_dense(), vec![vec![32.0, -16.0, 0.0], vec![-16.0, 32.0, -16.0], vec![0.0, -16.0, 32.0]]);
        assert!(op.is_symmetric());
        assert_eq!(op.provenance(), Provenance::GridLaplacian);
    }

    #[test]
    fn single_node_square() {
        let g = build_grid(&DomainSpec::Rectangle { width: 1.0, height: 1.0 }, 0.5).unwrap();
        assert_eq!(assemble_laplacian(&g).to_dense(), vec![vec![16.0]]);
    }

    #[test]
    fn grid_row_sums_are_nonnegative_with_a_strict_row() {
        let g = build_grid(&DomainSpec::Annulus { r_inner: 0.3, r_outer: 1.0 }, 0.05).unwrap();
        let op = assemble_laplacian(&g);
        let sums = op.row_sums();
        assert!(sums.iter().all(|&s| s >= 0.0));
        assert!(sums.iter().any(|&s| s > 0.0));
        assert!(op.is_symmetric());
    }

    #[test]
    fn identity_coefficient_matches_laplacian_bitwise() {
        for spec in [DomainSpec::Interval { length: 1.0 }, DomainSpec::Disk { radius: 1.0 }] {
            let g = build_grid(&spec, 0.1).unwrap();
            let lap = assemble_laplacian(&g);
            let div = assemble_divergence_form(&g, &CoefficientField::identity()).unwrap();
            assert_eq!(lap.values(), div.values());
            assert_eq!(lap.col_indices(), div.col_indices());
        }
    }

    #[test]
    fn doubled_coefficient_doubles_matrix() {
        let g = interval(0.05);
        let lap = assemble_laplacian(&g);
        let div = assemble_divergence_form(&g, &CoefficientField::scaled_identity(2.0)).unwrap();
        assert_eq!(div.values(), lap.scaled(2.0).values());
    }

    #[test]
    fn rejects_off_diagonal_and_degenerate_coefficients() {
        let g = build_grid(&DomainSpec::Rectangle { width: 1.0, height: 1.0 }, 0.25).unwrap();
        let skew = CoefficientField::new(0.5, |_| [[1.0, 0.1], [0.1, 1.0]]);
        assert!(matches!(assemble_divergence_form(&g, &skew), Err(Error::UnsupportedAnisotropy { .. })));
        let weak = CoefficientField::diagonal(0.5, |x| [x[0], 1.0]);
        assert!(matches!(assemble_divergence_form(&g, &weak), Err(Error::EllipticityViolation { .. })));
    }

    #[test]
    fn cg_reproduces_torsion_quadratic() {
        let op = assemble_laplacian(&interval(0.25));
        let x = solve_spd(&op, &[1.0; 3], 1e-15, 100).unwrap();
        for (xi, e) in x.iter().zip([0.09375, 0.125, 0.09375]) {
            assert!((xi - e).abs() < 1e-15, "{xi} vs {e}");
        }
        let g = interval(0.01);
        let op = assemble_laplacian(&g);
        let x = solve_spd(&op, &vec![1.0; g.len()], 1e-12, default_max_iter(g.len())).unwrap();
        for (i, xi) in x.iter().enumerate() {
            let p = g.point(i)[0];
            assert!((xi - p * (1.0 - p) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_zero_rhs_and_diagonal() {
        let op = assemble_laplacian(&interval(0.1));
        let (x, stats) = solve_spd_from(&op, &[0.0; 9], None, 1e-10, 100).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
        assert_eq!(stats.iterations, 0);

        let diag = SparseOperator::from_dense(&[vec![2.0, 0.0], vec![0.0, 4.0]], 1.0).unwrap();
        let x = solve_spd(&diag, &[3.0, -8.0], 1e-12, 10).unwrap();
        assert_eq!(x, vec![1.5, -2.0]);
    }

    #[test]
    fn cg_reports_iteration_cap() {
        let op = assemble_laplacian(&interval(0.001));
        let err = solve_spd(&op, &vec![1.0; op.order()], 1e-12, 3).unwrap_err();
        assert!(matches!(err, Error::MaxIterationsExceeded { iterations: 3, .. }));
    }

    #[test]
    fn user_matrix_round_trip_and_errors() {
        let text = "3 4\n0 0 2.0\n0 1 -1\n1 1 2\n2 2 5e-1\ncell_measure 0.5\n";
        let op = parse_user_matrix(text).unwrap();
        assert_eq!(op.to_dense(), vec![vec![2.0, -1.0, 0.0], vec![-1.0, 2.0, 0.0], vec![0.0, 0.0, 0.5]]);
        assert_eq!(op.cell_measure(), 0.5);
        assert_eq!(parse_user_matrix(&format_user_matrix(&op)).unwrap(), op);

        for bad in [
            "",
            "3\n",
            "2 2\n0 0 1\n",
            "2 2\n0 0 1\n1 0 1\ncell_measure 1\n",
            "2 2\n0 0 1\n1 1 x\ncell_measure 1\n",
            "2 1\n0 0 1\ncell_measure 1\n",
            "2 2\n0 0 1\n1 1 1\ncell_measure 0\n",
            "2 2\n0 0 1\n1 1 1\ncell_measure 1\nextra\n",
        ] {
            assert!(matches!(parse_user_matrix(bad), Err(Error::Parse(_))), "{bad:?}");
        }
    }
}
