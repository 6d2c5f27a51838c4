//! Exit-time moments by direct simulation of Brownian motion with
//! generator `Δ`: `X_{n+1} = X_n + √(2·dt)·ξ`, `ξ` standard Gaussian per
//! coordinate.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`). Batch `b` of
//! node `j` draws from `ChaCha8Rng::seed_from_u64(seed)` with stream
//! `(j << 32) | b`; single-point runs use node 0. Batches are reduced in
//! index order, so results are bit-identical whatever order the batches run
//! in. Gaussians are `rand_distr::StandardNormal` (ziggurat).

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, Grid};
use crate::report::fmt_num;

pub const MIN_PATHS: usize = 100;
pub const DEFAULT_MAX_STEPS: u64 = 1_000_000;
/// Largest tolerated fraction of paths that never exit.
pub const MAX_CENSORED_FRACTION: f64 = 1e-3;
/// Mean overshoot of a discretely monitored Gaussian walk past a flat
/// boundary, in units of the per-step standard deviation.
pub const OVERSHOOT_CONSTANT: f64 = 0.5826;

/// How a step is tested for leaving the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExitRule {
    /// Exit at the first sampled position outside the domain.
    #[default]
    Discrete,
    /// Additionally exit with the Brownian-bridge crossing probability
    /// `exp(−d₀·d₁/dt)` between two interior positions, `d` being the
    /// distance to the boundary.
    BrownianBridge,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub max_steps: u64,
    pub seed: u64,
    pub batch_size: usize,
    pub exit_rule: ExitRule,
    /// When set, `max_steps` need only cover `50/λ₁` time units.
    pub lambda1_estimate: Option<f64>,
}

impl McConfig {
    pub fn new(dt: f64, n_paths: usize, seed: u64) -> Self {
        McConfig {
            dt,
            n_paths,
            max_steps: DEFAULT_MAX_STEPS,
            seed,
            batch_size: 1000,
            exit_rule: ExitRule::Discrete,
            lambda1_estimate: None,
        }
    }

    pub fn with_exit_rule(mut self, rule: ExitRule) -> Self {
        self.exit_rule = rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_paths < MIN_PATHS {
            return Err(Error::InvalidArgument(format!("need at least {MIN_PATHS} paths, got {}", self.n_paths)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        match self.lambda1_estimate {
            Some(l) if !(l > 0.0) => {
                return Err(Error::InvalidArgument(format!("lambda1 estimate must be positive, got {l}")));
            }
            Some(l) if (self.max_steps as f64) * self.dt < 50.0 / l => {
                return Err(Error::InvalidArgument(format!(
                    "max_steps * dt = {} is below 50 / lambda1 = {}",
                    self.max_steps as f64 * self.dt,
                    50.0 / l
                )));
            }
            None if self.max_steps < DEFAULT_MAX_STEPS => {
                return Err(Error::InvalidArgument(format!(
                    "max_steps must be at least {DEFAULT_MAX_STEPS} without a lambda1 estimate"
                )));
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub k: usize,
    pub mean: f64,
    pub std_error: f64,
    pub n_effective: u64,
    pub censored_count: u64,
}

/// Expected overshoot distance of discrete monitoring at step `dt`; shifting
/// the boundary outward by this amount models the leading bias.
pub fn overshoot_shift(dt: f64) -> f64 {
    OVERSHOOT_CONSTANT * (2.0 * dt).sqrt()
}

/// Running moments of `τ^k`, `k = 1..=k_max`, for one monitoring level.
#[derive(Debug, Clone)]
struct Accumulator {
    n: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    censored: u64,
}

impl Accumulator {
    fn new(k_max: usize) -> Self {
        Accumulator { n: 0, mean: vec![0.0; k_max], m2: vec![0.0; k_max], censored: 0 }
    }

    fn push(&mut self, tau: f64) {
        self.n += 1;
        let n = self.n as f64;
        let mut p = 1.0;
        for (mean, m2) in self.mean.iter_mut().zip(self.m2.iter_mut()) {
            p *= tau;
            let delta = p - *mean;
            *mean += delta / n;
            *m2 += delta * (p - *mean);
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        self.censored += other.censored;
        if other.n == 0 {
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for k in 0..self.mean.len() {
            let delta = other.mean[k] - self.mean[k];
            self.mean[k] += delta * nb / n;
            self.m2[k] += other.m2[k] + delta * delta * na * nb / n;
        }
        self.n += other.n;
    }

    fn estimates(&self) -> Vec<McEstimate> {
        (0..self.mean.len())
            .map(|k| {
                let var = if self.n > 1 { self.m2[k] / (self.n - 1) as f64 } else { 0.0 };
                McEstimate {
                    k: k + 1,
                    mean: self.mean[k],
                    std_error: if self.n > 0 { (var / self.n as f64).sqrt() } else { 0.0 },
                    n_effective: self.n,
                    censored_count: self.censored,
                }
            })
            .collect()
    }
}

struct Simulation<'a> {
    spec: &'a DomainSpec,
    x0: &'a [f64],
    k_max: usize,
    cfg: &'a McConfig,
    rule: ExitRule,
    /// Level `j` monitors every `2^j`-th step.
    levels: usize,
}

impl Simulation<'_> {
    fn run_batch(&self, node: u64, batch: usize, paths: usize) -> Vec<Accumulator> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream((node << 32) | batch as u64);
        let mut acc = vec![Accumulator::new(self.k_max); self.levels];
        let sigma = (2.0 * self.cfg.dt).sqrt();
        let dim = self.x0.len();
        let mut exit_step = vec![0u64; self.levels];
        for _ in 0..paths {
            let mut x = [0.0; 2];
            x[..dim].copy_from_slice(self.x0);
            let mut d_prev = match self.rule {
                ExitRule::BrownianBridge => self.spec.boundary_distance(&x[..dim]),
                ExitRule::Discrete => 0.0,
            };
            exit_step.iter_mut().for_each(|s| *s = 0);
            let mut remaining = self.levels;
            let mut step = 0u64;
            while remaining > 0 && step < self.cfg.max_steps {
                step += 1;
                for xi in x[..dim].iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *xi += sigma * z;
                }
                let out = match self.rule {
                    ExitRule::Discrete => !self.spec.contains(&x[..dim]),
                    ExitRule::BrownianBridge => {
                        // Zero exactly when the position is outside.
                        let d = self.spec.boundary_distance(&x[..dim]);
                        let e = d_prev * d / self.cfg.dt;
                        d_prev = d;
                        // exp(−40) is far below the resolution of any estimate.
                        d == 0.0 || (e < 40.0 && rng.random::<f64>() < (-e).exp())
                    }
                };
                if out {
                    for (j, s) in exit_step.iter_mut().enumerate() {
                        if *s == 0 && step.is_multiple_of(1u64 << j) {
                            *s = step;
                            remaining -= 1;
                        }
                    }
                }
            }
            for (a, &s) in acc.iter_mut().zip(&exit_step) {
                if s == 0 {
                    a.censored += 1;
                } else {
                    a.push(s as f64 * self.cfg.dt);
                }
            }
        }
        acc
    }

    fn run(&self, node: u64, n_paths: usize) -> Vec<Accumulator> {
        let bs = self.cfg.batch_size;
        let batches = n_paths.div_ceil(bs);
        let parts: Vec<Vec<Accumulator>> =
            (0..batches).into_par_iter().map(|b| self.run_batch(node, b, bs.min(n_paths - b * bs))).collect();
        let mut total = vec![Accumulator::new(self.k_max); self.levels];
        for part in &parts {
            for (t, p) in total.iter_mut().zip(part) {
                t.merge(p);
            }
        }
        total
    }
}

fn check_start(spec: &DomainSpec, x0: &[f64]) -> Result<()> {
    if x0.len() != spec.dimension() {
        return Err(Error::InvalidArgument(format!(
            "start point has {} coordinates, domain dimension is {}",
            x0.len(),
            spec.dimension()
        )));
    }
    if !x0.iter().all(|v| v.is_finite()) || !spec.contains(x0) {
        return Err(Error::StartOutsideDomain(x0.to_vec()));
    }
    Ok(())
}

fn check_censoring(acc: &Accumulator, paths: usize) -> Result<()> {
    if acc.censored as f64 > MAX_CENSORED_FRACTION * paths as f64 {
        return Err(Error::ExcessiveCensoring { censored: acc.censored, paths: paths as u64 });
    }
    Ok(())
}

/// Estimates `E^{x0}[τ^k]` for `k = 1..=k_max`.
pub fn simulate_exit_moments(spec: &DomainSpec, x0: &[f64], k_max: usize, cfg: &McConfig) -> Result<Vec<McEstimate>> {
    spec.validate()?;
    cfg.validate()?;
    check_start(spec, x0)?;
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    let sim = Simulation { spec, x0, k_max, cfg, rule: cfg.exit_rule, levels: 1 };
    let acc = sim.run(0, cfg.n_paths);
    check_censoring(&acc[0], cfg.n_paths)?;
    Ok(acc[0].estimates())
}

/// Discrete-monitoring estimates at steps `dt, 2·dt, …, 2^{levels−1}·dt`
/// from one set of fine paths, each coarse level observing a subsequence
/// of the fine positions. Pathwise the exit time is nondecreasing in the
/// step, so the level means are ordered without sampling noise.
pub fn simulate_step_ladder(
    spec: &DomainSpec,
    x0: &[f64],
    k_max: usize,
    levels: usize,
    cfg: &McConfig,
) -> Result<Vec<Vec<McEstimate>>> {
    spec.validate()?;
    cfg.validate()?;
    check_start(spec, x0)?;
    if k_max == 0 || levels == 0 || levels > 16 {
        return Err(Error::InvalidArgument(format!("need k_max >= 1 and 1 <= levels <= 16, got {k_max}, {levels}")));
    }
    let sim = Simulation { spec, x0, k_max, cfg, rule: ExitRule::Discrete, levels };
    let acc = sim.run(0, cfg.n_paths);
    acc.iter()
        .map(|a| {
            check_censoring(a, cfg.n_paths)?;
            Ok(a.estimates())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentField {
    pub k: usize,
    /// One estimate per interior node, in grid order.
    pub nodes: Vec<McEstimate>,
    /// `cell_measure · Σ mean`.
    pub total: f64,
    /// `cell_measure · √(Σ std_error²)`.
    pub std_error: f64,
}

/// Per-node estimates of `E^x[τ^k]` and their quadrature; `cfg.n_paths` is
/// split evenly across the interior nodes.
pub fn mc_moment_field(spec: &DomainSpec, grid: &Grid, k: usize, cfg: &McConfig) -> Result<MomentField> {
    if grid.spec() != spec {
        return Err(Error::InvalidArgument(format!("grid was built for {}, not {spec}", grid.spec())));
    }
    cfg.validate()?;
    let per_node = cfg.n_paths / grid.len();
    if per_node < MIN_PATHS {
        return Err(Error::InvalidArgument(format!(
            "{} paths over {} nodes leaves fewer than {MIN_PATHS} per node",
            cfg.n_paths,
            grid.len()
        )));
    }
    let c = grid.cell_measure();
    let nodes: Vec<McEstimate> = if k == 0 {
        vec![
            McEstimate { k: 0, mean: 1.0, std_error: 0.0, n_effective: per_node as u64, censored_count: 0 };
            grid.len()
        ]
    } else {
        let mut out = Vec::with_capacity(grid.len());
        for node in 0..grid.len() {
            let x0 = grid.point(node);
            check_start(spec, &x0)?;
            let sim = Simulation { spec, x0: &x0, k_max: k, cfg, rule: cfg.exit_rule, levels: 1 };
            let acc = sim.run(node as u64, per_node);
            check_censoring(&acc[0], per_node)?;
            out.push(acc[0].estimates().pop().expect("k >= 1"));
        }
        out
    };
    let total = c * nodes.iter().map(|e| e.mean).sum::<f64>();
    let std_error = c * nodes.iter().map(|e| e.std_error * e.std_error).sum::<f64>().sqrt();
    Ok(MomentField { k, nodes, total, std_error })
}

pub const CSV_HEADER: &str = "x0_coords,k,mean,std_error,n_effective,censored";

/// One row per estimate; coordinates are joined with `;`.
pub fn estimates_csv(x0: &[f64], estimates: &[McEstimate]) -> String {
    let coords = x0.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(";");
    let mut out = format!("{CSV_HEADER}\n");
    for e in estimates {
        let _ = writeln!(
            out,
            "{coords},{},{},{},{},{}",
            e.k,
            fmt_num(e.mean),
            fmt_num(e.std_error),
            e.n_effective,
            e.censored_count
        );
    }
    out
}

pub fn estimates_json(x0: &[f64], estimates: &[McEstimate]) -> serde_json::Value {
    serde_json::json!({ "x0": x0, "estimates": estimates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, grid_volume};

    fn unit_interval() -> DomainSpec {
        DomainSpec::Interval { length: 1.0 }
    }

    #[test]
    fn chacha_streams_are_frozen() {
        let mut a = ChaCha8Rng::seed_from_u64(42);
        a.set_stream(0);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        b.set_stream(1);
        let va: Vec<u64> = (0..3).map(|_| a.random()).collect();
        let vb: Vec<u64> = (0..3).map(|_| b.random()).collect();
        assert_eq!(va, FROZEN_STREAM_0);
        assert_eq!(vb, FROZEN_STREAM_1);
        let mut c = ChaCha8Rng::seed_from_u64(42);
        c.set_stream(0);
        let z: f64 = c.sample(StandardNormal);
        assert_eq!(z.to_bits(), FROZEN_NORMAL.to_bits(), "{z:e}");
    }

    const FROZEN_STREAM_0: [u64; 3] = [12578764544318200737, 17529487244874322312, 7886285670807131020];
    const FROZEN_STREAM_1: [u64; 3] = [13222472167927179408, 3078952320862533021, 8898984633443201687];
    const FROZEN_NORMAL: f64 = 4.7798123835102174e-1;

    #[test]
    fn welford_merge_matches_single_pass() {
        let data: Vec<f64> = (1..=50).map(|i| (i as f64).sqrt() * 0.01).collect();
        let mut whole = Accumulator::new(2);
        data.iter().for_each(|&t| whole.push(t));
        let mut left = Accumulator::new(2);
        let mut right = Accumulator::new(2);
        data[..17].iter().for_each(|&t| left.push(t));
        data[17..].iter().for_each(|&t| right.push(t));
        left.merge(&right);
        for k in 0..2 {
            assert!((left.mean[k] - whole.mean[k]).abs() < 1e-15);
            assert!((left.m2[k] - whole.m2[k]).abs() < 1e-15);
        }
        let mean: f64 = data.iter().sum::<f64>() / 50.0;
        let var: f64 = data.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / 49.0;
        let est = whole.estimates();
        assert!((est[0].mean - mean).abs() < 1e-15);
        assert!((est[0].std_error - (var / 50.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn deterministic_regardless_of_threads() {
        let cfg = McConfig { batch_size: 64, ..McConfig::new(1e-3, 500, 7) };
        let a = simulate_exit_moments(&unit_interval(), &[0.3], 2, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| simulate_exit_moments(&unit_interval(), &[0.3], 2, &cfg).unwrap());
        assert_eq!(a, b);
        let other = simulate_exit_moments(&unit_interval(), &[0.3], 2, &McConfig { seed: 8, ..cfg.clone() }).unwrap();
        assert_ne!(a[0].mean, other[0].mean);
    }

    #[test]
    fn exit_times_are_positive_multiples_of_dt() {
        let cfg = McConfig::new(1e-3, 200, 1);
        let est = simulate_exit_moments(&unit_interval(), &[1e-6], 1, &cfg).unwrap();
        assert!(est[0].mean >= 1e-3);
        assert_eq!(est[0].n_effective, 200);
    }

    #[test]
    fn center_of_interval_and_disk() {
        let cfg = McConfig::new(1e-4, 20_000, 3).with_exit_rule(ExitRule::BrownianBridge);
        let est = simulate_exit_moments(&unit_interval(), &[0.5], 2, &cfg).unwrap();
        assert!((est[0].mean - 0.125).abs() < 4.0 * est[0].std_error, "{:?}", est[0]);
        assert!((est[1].mean - 5.0 / 192.0).abs() < 4.0 * est[1].std_error, "{:?}", est[1]);

        let disk = DomainSpec::Disk { radius: 1.0 };
        let cfg = McConfig::new(1e-4, 5_000, 4).with_exit_rule(ExitRule::BrownianBridge);
        let est = simulate_exit_moments(&disk, &[0.0, 0.0], 1, &cfg).unwrap();
        // The half-plane bridge leaves an O(dt / R) curvature bias.
        assert!((est[0].mean - 0.25).abs() < 4.0 * est[0].std_error + 1e-3, "{:?}", est[0]);
    }

    #[test]
    fn ladder_is_ordered() {
        let cfg = McConfig::new(1e-4, 2_000, 5);
        let ladder = simulate_step_ladder(&unit_interval(), &[0.5], 2, 3, &cfg).unwrap();
        for w in ladder.windows(2) {
            for (fine, coarse) in w[0].iter().zip(&w[1]) {
                assert!(fine.mean <= coarse.mean);
            }
        }
    }

    #[test]
    fn field_on_coarse_interval() {
        let spec = unit_interval();
        let grid = build_grid(&spec, 0.1).unwrap();
        let cfg = McConfig::new(1e-4, 9 * 2_000, 9).with_exit_rule(ExitRule::BrownianBridge);
        let field = mc_moment_field(&spec, &grid, 1, &cfg).unwrap();
        // Quadrature of the exact torsion function on this grid.
        let exact: f64 = (1..10).map(|i| 0.1 * (i as f64 * 0.1) * (1.0 - i as f64 * 0.1) / 2.0).sum();
        assert!((field.total - exact).abs() < 4.0 * field.std_error, "{} vs {exact}", field.total);
        let zero = mc_moment_field(&spec, &grid, 0, &cfg).unwrap();
        assert_eq!(zero.total, grid_volume(&grid));
        assert_eq!(zero.std_error, 0.0);
    }

    #[test]
    fn rejects_bad_configs_and_starts() {
        let spec = unit_interval();
        let cfg = McConfig::new(1e-3, 200, 1);
        assert!(matches!(simulate_exit_moments(&spec, &[1.5], 1, &cfg), Err(Error::StartOutsideDomain(_))));
        assert!(matches!(simulate_exit_moments(&spec, &[0.0], 1, &cfg), Err(Error::StartOutsideDomain(_))));
        assert!(simulate_exit_moments(&spec, &[0.5, 0.5], 1, &cfg).is_err());
        assert!(McConfig::new(0.0, 200, 1).validate().is_err());
        assert!(McConfig::new(1e-3, 99, 1).validate().is_err());
        assert!(McConfig { max_steps: 10, ..cfg.clone() }.validate().is_err());
        assert!(McConfig { max_steps: 50_000, lambda1_estimate: Some(1.0), ..cfg.clone() }.validate().is_ok());
    }

    #[test]
    fn censoring_is_reported() {
        // A deliberately wrong eigenvalue estimate lets the step cap bite.
        let cfg = McConfig { max_steps: 50, lambda1_estimate: Some(1e3), ..McConfig::new(1e-3, 200, 1) };
        match simulate_exit_moments(&DomainSpec::Interval { length: 10.0 }, &[5.0], 1, &cfg) {
            Err(Error::ExcessiveCensoring { censored, paths }) => {
                assert_eq!(paths, 200);
                assert!(censored > 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_layout() {
        let est = vec![McEstimate { k: 1, mean: 0.125, std_error: 1e-3, n_effective: 100, censored_count: 0 }];
        let csv = estimates_csv(&[0.25, 0.5], &est);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 6);
        assert_eq!(row[0].split(';').count(), 2);
        assert_eq!(row[4], "100");
    }
}
