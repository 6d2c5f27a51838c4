mod common;

use common::*;
use exit_moments::bounds::build_report;
use exit_moments::*;

fn rect(h: f64) -> Grid {
    build_grid(&DomainSpec::Rectangle { width: 1.0, height: 1.0 }, h).unwrap()
}

#[test]
fn variable_coefficient_sandwich() {
    let grid = rect(0.05);
    let field = CoefficientField::diagonal(1.0, |x| [1.0 + x[0], 1.0]);
    let op = assemble_divergence_form(&grid, &field).unwrap();
    assert!(op.is_symmetric());
    let hier = solve_hierarchy(&op, 6, 1e-12).unwrap();
    let spectrum = smallest_eigenpairs(&op, 1).unwrap();
    let (lam, mass) = dense_principal(&op);
    assert!(rel(spectrum.lambda[0], lam) < 1e-9);
    assert!(rel(spectrum.a_sq[0], mass) < 1e-7);
    // Larger coefficients than the Laplacian: faster exit, larger eigenvalue.
    let lap = assemble_laplacian(&grid);
    assert!(hier.t(1).unwrap() < solve_hierarchy(&lap, 1, 1e-12).unwrap().t(1).unwrap());
    for row in build_report(&hier, &spectrum, op.volume(), 3).unwrap() {
        assert!(row.sandwich_violations(1e-7).is_empty(), "{:?}", row);
    }
}

#[test]
fn constant_coefficient_scales_moments() {
    let grid = rect(0.05);
    let lap = assemble_laplacian(&grid);
    let two = assemble_divergence_form(&grid, &CoefficientField::scaled_identity(2.0)).unwrap();
    let base = solve_hierarchy(&lap, 6, 1e-12).unwrap();
    let scaled = solve_hierarchy(&two, 6, 1e-12).unwrap();
    for k in 1..=6 {
        assert!(rel(scaled.t(k).unwrap() * 2f64.powi(k as i32), base.t(k).unwrap()) < 1e-12);
    }
    let l0 = smallest_eigenpairs(&lap, 1).unwrap().lambda[0];
    let l2 = smallest_eigenpairs(&two, 1).unwrap().lambda[0];
    assert!(rel(l2, 2.0 * l0) < 1e-9);
}

#[test]
fn rejects_anisotropy_and_degenerate_fields() {
    let grid = rect(0.25);
    let mixed = CoefficientField::new(0.5, |_| [[1.0, 0.2], [0.2, 1.0]]);
    assert!(matches!(assemble_divergence_form(&grid, &mixed), Err(Error::UnsupportedAnisotropy { .. })));
    let weak = CoefficientField::diagonal(0.5, |x| [x[0], 1.0]);
    assert!(matches!(assemble_divergence_form(&grid, &weak), Err(Error::EllipticityViolation { .. })));
}
