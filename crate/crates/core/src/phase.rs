//! Seeded Monte-Carlo estimates of solvability and solution-count moments.
//!
//! Trial `i` of a row draws from `seeds.child(i)`, so a row is a pure function
//! of `(config, seed)` and trials may be evaluated in any order or in
//! parallel; the `summarize_*` functions merge outcomes in trial order.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::borgs::{derive_params, expected_count, npp_prob_bounds, rssp_prob_bounds, second_moment_count};
use crate::rng::SeedTree;
use crate::solver::{Solver, SolverError, SsInstance};

/// Two-sided confidence level of reported intervals.
pub const CI_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetRule {
    Fixed(i64),
    /// `t` uniform on `[1, max(1, ⌊c·M⌋)]`.
    Uniform { c: f64 },
}

impl Default for TargetRule {
    fn default() -> Self {
        TargetRule::Uniform { c: 1.0 }
    }
}

impl TargetRule {
    pub fn draw(&self, m: u64, rng: &mut impl Rng) -> i64 {
        match *self {
            TargetRule::Fixed(t) => t,
            TargetRule::Uniform { c } => {
                let hi = libm::floor(c * m as f64).max(1.0) as i64;
                rng.gen_range(1..=hi)
            }
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            TargetRule::Fixed(t) => format!("fixed:{t}"),
            TargetRule::Uniform { c } => format!("uniform:1..{c}M"),
        }
    }
}

/// `M = round(2^(κ n))`, at least 1.
pub fn m_for_kappa(n: u32, kappa: f64) -> u64 {
    let m = libm::round(libm::exp2(kappa * f64::from(n)));
    if m < 1.0 {
        1
    } else {
        m as u64
    }
}

/// Elements uniform on `{−M..−1, 1..M}`.
pub fn draw_signed(n: u32, m: u64, rng: &mut impl Rng) -> Vec<i64> {
    (0..n)
        .map(|_| {
            let v = rng.gen_range(1..=m) as i64;
            if rng.gen::<bool>() {
                v
            } else {
                -v
            }
        })
        .collect()
}

/// Elements uniform on `{1..M}`.
pub fn draw_positive(n: u32, m: u64, rng: &mut impl Rng) -> Vec<i64> {
    (0..n).map(|_| rng.gen_range(1..=m) as i64).collect()
}

// ---------------------------------------------------------------------------
// exact binomial intervals

fn ln_choose(n: u64, k: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// `P(X ≤ k)` for `X ~ Bin(n, p)`.
pub fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
    if k >= n || p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let (lp, lq) = (libm::log(p), libm::log1p(-p));
    let s: f64 = (0..=k)
        .map(|i| libm::exp(ln_choose(n, i) + i as f64 * lp + (n - i) as f64 * lq))
        .sum();
    s.min(1.0)
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> bool) -> f64 {
    // f(lo) true, f(hi) false
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Clopper–Pearson interval for `k` successes out of `n`.
pub fn clopper_pearson(k: u64, n: u64, level: f64) -> (f64, f64) {
    assert!(n > 0 && k <= n);
    let a = (1.0 - level) / 2.0;
    let lower = if k == 0 {
        0.0
    } else {
        // P(X ≥ k | p) = a
        bisect(0.0, 1.0, |p| 1.0 - binomial_cdf(k - 1, n, p) < a)
    };
    let upper = if k == n {
        1.0
    } else {
        // P(X ≤ k | p) = a
        bisect(0.0, 1.0, |p| binomial_cdf(k, n, p) > a)
    };
    (lower, upper)
}

// ---------------------------------------------------------------------------
// rows

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Success,
    Moment { z: i64, order: u8 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub kind: RowKind,
    pub n: u32,
    pub m: u64,
    pub kappa: f64,
    pub lambda_n: f64,
    pub target: String,
    pub trials: u64,
    pub successes: u64,
    pub empirical_p: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub predicted_upper: f64,
    pub predicted_lower: f64,
    /// Mean solution count (or squared count for second-moment rows).
    pub mean_count: f64,
    pub predicted_mean: f64,
    pub leading_order: bool,
}

/// Outcome of a single random instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub count: u64,
    pub predicted_upper: f64,
    pub predicted_lower: f64,
    pub predicted_mean: f64,
}

fn summarize(kind: RowKind, n: u32, m: u64, target: String, outcomes: &[TrialOutcome], order: u8) -> SweepRow {
    let p = derive_params(n.max(1), m);
    let trials = outcomes.len() as u64;
    let successes = outcomes.iter().filter(|o| o.count > 0).count() as u64;
    let tf = trials.max(1) as f64;
    let mean = |f: &dyn Fn(&TrialOutcome) -> f64| outcomes.iter().map(f).sum::<f64>() / tf;
    let (ci_low, ci_high) = if trials == 0 {
        (0.0, 1.0)
    } else {
        clopper_pearson(successes, trials, CI_LEVEL)
    };
    SweepRow {
        kind,
        n,
        m,
        kappa: p.kappa_n,
        lambda_n: p.lambda_n,
        target,
        trials,
        successes,
        empirical_p: successes as f64 / tf,
        ci_low,
        ci_high,
        predicted_upper: mean(&|o| o.predicted_upper),
        predicted_lower: mean(&|o| o.predicted_lower),
        mean_count: mean(&|o| (o.count as f64).powi(i32::from(order))),
        predicted_mean: mean(&|o| o.predicted_mean),
        leading_order: true,
    }
}

/// One subset-sum trial: signed elements, target from `rule`, exact count.
pub fn success_trial(n: u32, m: u64, rule: TargetRule, seeds: SeedTree, solver: &Solver) -> Result<TrialOutcome, SolverError> {
    let mut rng = seeds.rng();
    let xs = draw_signed(n, m, &mut rng);
    let t = rule.draw(m, &mut rng);
    let inst = SsInstance::new(xs, m as i64)?;
    let count = solver.count_rssp(&inst, t)?;
    let p = derive_params(n, m);
    let b = rssp_prob_bounds(&p, t, inst.total());
    // Given Λ, σ·X lives on the parity class of Λ, doubling the lattice density.
    let mean = p.rho_n * p.gaussian(inst.total() - 2 * t);
    Ok(TrialOutcome {
        count,
        predicted_upper: b.upper,
        predicted_lower: b.lower,
        predicted_mean: mean,
    })
}

pub fn summarize_success(n: u32, m: u64, rule: TargetRule, outcomes: &[TrialOutcome]) -> SweepRow {
    summarize(RowKind::Success, n, m, rule.describe(), outcomes, 1)
}

/// Fraction of random RSSP instances with a solution, with bounds on the same row.
pub fn mc_success(n: u32, m: u64, rule: TargetRule, trials: u64, seeds: SeedTree, solver: &Solver) -> Result<SweepRow, SolverError> {
    let outcomes = (0..trials)
        .map(|i| success_trial(n, m, rule, seeds.child(i), solver))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize_success(n, m, rule, &outcomes))
}

/// One partitioning trial: elements on `{1..M}`, exact `Z_{n,z}`.
pub fn moment_trial(n: u32, m: u64, z: i64, order: u8, seeds: SeedTree, solver: &Solver) -> Result<TrialOutcome, SolverError> {
    let mut rng = seeds.rng();
    let inst = SsInstance::new(draw_positive(n, m, &mut rng), m as i64)?;
    let count = solver.count_npp(&inst, z)?;
    let p = derive_params(n, m);
    let b = npp_prob_bounds(&p, z);
    let predicted_mean = if order >= 2 {
        second_moment_count(&p, z, z)
    } else {
        expected_count(&p, z)
    };
    Ok(TrialOutcome {
        count,
        predicted_upper: b.upper,
        predicted_lower: b.lower,
        predicted_mean,
    })
}

pub fn summarize_moment(n: u32, m: u64, z: i64, order: u8, outcomes: &[TrialOutcome]) -> SweepRow {
    summarize(RowKind::Moment { z, order }, n, m, format!("z={z}"), outcomes, order)
}

/// Empirical `E[Z_{n,z}]` (order 1) or `E[Z_{n,z}²]` (order 2) against predictions.
pub fn mc_moment(n: u32, m: u64, z: i64, trials: u64, seeds: SeedTree, order: u8, solver: &Solver) -> Result<SweepRow, SolverError> {
    let outcomes = (0..trials)
        .map(|i| moment_trial(n, m, z, order, seeds.child(i), solver))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize_moment(n, m, z, order, &outcomes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Concentration {
    pub n: u32,
    pub m: u64,
    pub trials: u64,
    pub inside: u64,
    pub fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `√(2/7) · M · √(n ln n)`.
    pub threshold: f64,
    /// `1 − 2 n^(−1/7)`.
    pub hoeffding_floor: f64,
}

/// Fraction of signed instances with `|Λ| < √(2/7)·M·√(n ln n)`.
pub fn lambda_concentration(n: u32, m: u64, trials: u64, seeds: SeedTree) -> Concentration {
    let nf = f64::from(n);
    let threshold = libm::sqrt(2.0 / 7.0) * m as f64 * libm::sqrt(nf * libm::log(nf));
    let inside = (0..trials)
        .filter(|&i| {
            let mut rng = seeds.child(i).rng();
            let lambda: i64 = draw_signed(n, m, &mut rng).iter().sum();
            (lambda.unsigned_abs() as f64) < threshold
        })
        .count() as u64;
    let (ci_low, ci_high) = if trials == 0 {
        (0.0, 1.0)
    } else {
        clopper_pearson(inside, trials, CI_LEVEL)
    };
    Concentration {
        n,
        m,
        trials,
        inside,
        fraction: inside as f64 / trials.max(1) as f64,
        ci_low,
        ci_high,
        threshold,
        hoeffding_floor: 1.0 - 2.0 * libm::pow(nf, -1.0 / 7.0),
    }
}

// ---------------------------------------------------------------------------
// sweeps

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    Kappa(Vec<f64>),
    M(Vec<u64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Success,
    Moment { order: u8 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n: u32,
    pub axis: SweepAxis,
    pub target_rule: TargetRule,
    pub trials: u64,
    pub master_seed: u64,
    pub mode: SweepMode,
    /// Targets for moment mode; ignored for success rows.
    pub z_values: Vec<i64>,
}

/// One unit of sweep work.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowSpec {
    pub index: u64,
    pub m: u64,
    pub z: i64,
}

impl SweepConfig {
    pub fn m_values(&self) -> Vec<u64> {
        match &self.axis {
            SweepAxis::Kappa(ks) => ks.iter().map(|&k| m_for_kappa(self.n, k)).collect(),
            SweepAxis::M(ms) => ms.clone(),
        }
    }

    /// Rows in output order; `index` keys the per-row seed stream.
    pub fn rows(&self) -> Vec<RowSpec> {
        let mut out = Vec::new();
        for m in self.m_values() {
            match self.mode {
                SweepMode::Success => out.push(RowSpec { index: out.len() as u64, m, z: 0 }),
                SweepMode::Moment { .. } => {
                    for &z in &self.z_values {
                        out.push(RowSpec { index: out.len() as u64, m, z });
                    }
                }
            }
        }
        out
    }

    pub fn row_seeds(&self, row: &RowSpec) -> SeedTree {
        SeedTree::new(self.master_seed).named("sweep").child(row.index)
    }
}

pub fn sweep_row(cfg: &SweepConfig, row: &RowSpec, solver: &Solver) -> Result<SweepRow, SolverError> {
    let seeds = cfg.row_seeds(row);
    match cfg.mode {
        SweepMode::Success => mc_success(cfg.n, row.m, cfg.target_rule, cfg.trials, seeds, solver),
        SweepMode::Moment { order } => mc_moment(cfg.n, row.m, row.z, cfg.trials, seeds, order, solver),
    }
}

/// Every row of the sweep, in order; a failing row does not stop the others.
pub fn sweep(cfg: &SweepConfig, solver: &Solver) -> Vec<Result<SweepRow, SolverError>> {
    cfg.rows().iter().map(|r| sweep_row(cfg, r, solver)).collect()
}
