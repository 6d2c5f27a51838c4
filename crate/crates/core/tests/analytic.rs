mod common;

use common::*;
use exit_moments::bounds::{lower_moment, lower_variance, upper_ratio};
use exit_moments::spectral::{a1_from_moments, lambda1_from_moments};
use exit_moments::*;

fn interval(h: f64) -> SparseOperator {
    assemble_laplacian(&build_grid(&DomainSpec::Interval { length: 1.0 }, h).unwrap())
}

#[test]
fn oracle_polynomials_match_known_values() {
    let t = interval_moments(3);
    assert_eq!(t[0], Q::new(1, 12));
    assert_eq!(t[1], Q::new(1, 60));
    assert_eq!(t[2], Q::new(17, 3360));
    let u = interval_hierarchy(2);
    assert_eq!(u[0].eval_exact(Q::new(1, 2)), Q::new(1, 8));
    assert_eq!(u[1].eval_exact(Q::new(1, 2)), Q::new(5, 192));
}

#[test]
fn torsion_function_is_exact_at_nodes() {
    let h = 0.05;
    let op = interval(h);
    let hier = solve_hierarchy(&op, 1, 1e-13).unwrap();
    let u1 = &interval_hierarchy(1)[0];
    for (i, v) in hier.u(1).unwrap().iter().enumerate() {
        let x = (i + 1) as f64 * h;
        assert!((v - u1.eval(x)).abs() < 1e-13);
    }
}

#[test]
fn richardson_recovers_continuum_moments() {
    let exact = interval_moments(4);
    let coarse = solve_hierarchy(&interval(0.02), 4, 1e-12).unwrap();
    let fine = solve_hierarchy(&interval(0.01), 4, 1e-12).unwrap();
    for k in 1..=4 {
        let r = (4.0 * fine.t(k).unwrap() - coarse.t(k).unwrap()) / 3.0;
        assert!((r - to_f64(exact[k - 1])).abs() < 1e-7, "k={k}: {r}");
    }
}

#[test]
fn continuum_bound_values_on_interval() {
    let t = MomentSpectrum::new(interval_moments(6).into_iter().map(to_f64).collect());
    assert!((upper_ratio(1, &t).unwrap() - 10.0).abs() < 1e-12);
    let pi2 = std::f64::consts::PI.powi(2);
    let a_sq = 8.0 / pi2;
    assert!((lower_moment(1, &t, a_sq).unwrap() - 96.0 / pi2).abs() < 1e-12);
    let var1 = t.get(2).unwrap() - l2_interval(1);
    assert!((var1 - 1.0 / 120.0).abs() < 1e-15);
    let lv = lower_variance(1, var1, a_sq).unwrap();
    assert!((lv - (960.0 / pi2).sqrt()).abs() < 1e-12);
    assert!(lv < pi2);
}

fn l2_interval(k: usize) -> f64 {
    let u = &interval_hierarchy(k)[k - 1];
    let mut sq = vec![Q::from_integer(0); 2 * u.0.len()];
    for (i, a) in u.0.iter().enumerate() {
        for (j, b) in u.0.iter().enumerate() {
            sq[i + j] += a * b;
        }
    }
    to_f64(Poly(sq).integral01())
}

#[test]
fn principal_eigenvalue_of_disk() {
    let j01 = bessel_j0_first_zero();
    assert!((j01 - 2.404_825_557_695_773).abs() < 1e-12);
    // The staircase boundary converges at first order in h.
    let err = |h: f64| {
        let op = assemble_laplacian(&build_grid(&DomainSpec::Disk { radius: 1.0 }, h).unwrap());
        rel(smallest_eigenpairs(&op, 1).unwrap().lambda[0], j01 * j01)
    };
    let (coarse, fine) = (err(0.05), err(0.025));
    assert!(coarse < 0.05 && fine < 0.6 * coarse, "{coarse} {fine}");
}

#[test]
fn moment_asymptotics_on_interval() {
    let op = interval(0.01);
    let hier = solve_hierarchy(&op, 10, 1e-12).unwrap();
    let spec = smallest_eigenpairs(&op, 1).unwrap();
    let lam = lambda1_from_moments(&hier.moments).unwrap();
    assert!(rel(lam, spec.lambda[0]) < 5e-4);
    let a = a1_from_moments(&hier.moments, lam).unwrap();
    assert!(rel(a, spec.a_sq[0]) < 5e-3);
}
