//! Parallel drivers over the core experiments. Results are collected in
//! input order, so output never depends on thread scheduling.

use std::collections::BTreeSet;

use rayon::prelude::*;

use qticket_core::bounds::{self, BoundsError, CoverageReport};
use qticket_core::construct::{self, ConstructConfig, ConstructError, Construction, Mode, VerifyReport};
use qticket_core::dyadic::Dyadic;
use qticket_core::phase::{self, RowSpec, SweepConfig, SweepMode, SweepRow};
use qticket_core::qnn::{default_probes, random_probes, QNetwork};
use qticket_core::rng::SeedTree;
use qticket_core::solver::{Solver, SolverError};

/// Same rows as [`phase::sweep_row`], with trials spread over threads.
pub fn sweep_row(cfg: &SweepConfig, row: &RowSpec, solver: &Solver) -> Result<SweepRow, SolverError> {
    let seeds = cfg.row_seeds(row);
    match cfg.mode {
        SweepMode::Success => {
            let outcomes = (0..cfg.trials)
                .into_par_iter()
                .map(|i| phase::success_trial(cfg.n, row.m, cfg.target_rule, seeds.child(i), solver))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(phase::summarize_success(cfg.n, row.m, cfg.target_rule, &outcomes))
        }
        SweepMode::Moment { order } => {
            let outcomes = (0..cfg.trials)
                .into_par_iter()
                .map(|i| phase::moment_trial(cfg.n, row.m, row.z, order, seeds.child(i), solver))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(phase::summarize_moment(cfg.n, row.m, row.z, order, &outcomes))
        }
    }
}

/// Every row in order; the first failing row aborts the sweep.
pub fn sweep(cfg: &SweepConfig, solver: &Solver) -> Result<Vec<SweepRow>, SolverError> {
    cfg.rows().iter().map(|r| sweep_row(cfg, r, solver)).collect()
}

/// Exhaustive grid for inputs of width ≤ 2, else `count` random probes plus the axis set.
pub fn probe_suite(d0: usize, count: usize, seed: u64) -> Vec<Vec<Dyadic>> {
    if d0 <= 2 {
        default_probes(d0, SeedTree::new(seed))
    } else {
        random_probes(d0, count, SeedTree::new(seed))
    }
}

pub struct RunOutcome {
    pub construction: Construction,
    pub verify: VerifyReport,
    /// Replica agreement on the pruned network; `None` outside replicated mode.
    pub copy_fidelity: Option<bool>,
}

impl RunOutcome {
    pub fn exact(&self) -> bool {
        self.verify.exact() && self.copy_fidelity != Some(false)
    }
}

pub fn run_construction(target: &QNetwork, cfg: &ConstructConfig, probes: &[Vec<Dyadic>]) -> Result<RunOutcome, ConstructError> {
    let construction = construct::construct(target, cfg)?;
    let verify = construct::verify_exact(target, &construction.big, &construction.masks, cfg.delta, probes)?;
    let copy_fidelity = if cfg.mode == Mode::Theorem2 {
        let pruned = construction.pruned(cfg.delta)?;
        Some(construct::copy_fidelity(&pruned, construction.report.copies, probes)?)
    } else {
        None
    };
    Ok(RunOutcome {
        construction,
        verify,
        copy_fidelity,
    })
}

/// Seeded batch: run `i` uses `cfg.seed + i` for both target and big network.
pub fn run_batch(
    dims: &[usize],
    cfg: &ConstructConfig,
    runs: u64,
    probe_count: usize,
) -> Result<Vec<RunOutcome>, ConstructError> {
    (0..runs)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i);
            let cfg = cfg.with_seed(seed);
            let target = construct::random_target(dims, cfg.delta_t, cfg.gamma, SeedTree::new(seed).named("target"))?;
            let probes = probe_suite(dims[0], probe_count, seed);
            run_construction(&target, &cfg, &probes)
        })
        .collect()
}

/// [`bounds::exhaustive_coverage_check`] with the prunings split into chunks.
pub fn coverage_check(delta: u32, g: &QNetwork) -> Result<CoverageReport, BoundsError> {
    qticket_core::dyadic::PrecisionGrid::new(delta).map_err(|e| BoundsError::GridTooFine(e.0))?;
    // an empty range runs every precondition check
    bounds::coverage_pairs(g, 0..0)?;
    let alpha = bounds::nonzero_positions(g).len();
    let total = 1u64 << alpha;
    let chunk = (total / 64).max(1);
    let pairs = (0..total.div_ceil(chunk))
        .into_par_iter()
        .map(|i| bounds::coverage_pairs(g, i * chunk..((i + 1) * chunk).min(total)))
        .try_reduce(BTreeSet::new, |mut a, b| {
            a.extend(b);
            Ok(a)
        })?;
    Ok(bounds::coverage_report(delta, alpha, &pairs))
}

/// First seed in `seed..seed + attempts` whose block covers the whole family.
pub fn find_covering_ticket(cfg: &ConstructConfig, seed: u64, attempts: u64) -> Result<Option<(u64, QNetwork)>, ConstructError> {
    for s in seed..seed.saturating_add(attempts) {
        if let Some(t) = bounds::covering_ticket(cfg, SeedTree::new(s))? {
            return Ok(Some((s, t)));
        }
    }
    Ok(None)
}
