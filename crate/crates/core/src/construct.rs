//! Exact representation of quantized target networks by pruning random ones.
//!
//! A target weight `w` acting on input `x_j` is realized by a block of hidden
//! units `h_t = σ(u_t x_j)` feeding an output through weights `v_t`. Units with
//! `u_t > 0` only fire for `x_j > 0` and units with `u_t < 0` only for
//! `x_j < 0`, so choosing a subset of each sign class with `Σ v_t u_t = w`
//! gives `Σ v_t σ(u_t x_j) = w x_j` for every `x_j`. Each choice is an exact
//! subset-sum problem over products on the `δ²` grid.
//!
//! Depth-saving constructions replicate every output of a realized layer
//! `K` times; a later target weight `w` is then a subset of the `K` random
//! weights reading identical copies of the same input.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_rational::Ratio;
use rand::Rng;

use crate::dyadic::{Dyadic, PrecisionGrid};
use crate::qnn::{equal_on_probes, schedule, Mask, MaskSet, ProbeReport, QMatrix, QNetwork, QnnError};
use crate::rng::SeedTree;
use crate::solver::{Solver, SolverError, SsInstance};

pub const DEFAULT_C: u32 = 8;
pub const DEFAULT_C_PRIME: u32 = 6;
/// Finest `δ` a construction accepts (products must fit in `i64`).
pub const MAX_CONSTRUCT_EXPONENT: u32 = 20;
/// Finest sampling grid for which the exact product law is enumerated.
pub const MAX_PMF_EXPONENT: u32 = 12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConstructError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("target network rejected: {0}")]
    Target(&'static str),
    #[error("{what}: expected {expected:?}, got {got:?}")]
    Shape {
        what: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("value {value} is not on the grid 2^-{exponent}")]
    OffGrid { value: Dyadic, exponent: u32 },
    #[error("sampling law gives probability 0 to {value}; cannot uniformize")]
    SupportGap { value: Dyadic },
    #[error("grid 2^-{0} is too fine for exact enumeration")]
    GridTooFine(u32),
    #[error(transparent)]
    Qnn(#[from] QnnError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Depth `2ℓ`: two big layers per target layer.
    Theorem1,
    /// Depth `ℓ + 1`: replicated outputs feed the next layer directly.
    Theorem2,
}

/// How the candidate products of a branch are filtered before solving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Uniformize {
    /// Every non-zero product is a candidate.
    #[default]
    Raw,
    /// Rejection sampling onto the uniform law on `S_δ∖{0}`.
    Reject,
}

/// Grids are given as exponents: `δ = 2^-delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstructConfig {
    pub delta_t: u32,
    pub delta: u32,
    pub delta_in: u32,
    pub gamma: u32,
    pub c: u32,
    pub c_prime: u32,
    pub seed: u64,
    pub mode: Mode,
    pub uniformize: Uniformize,
    pub solver: Solver,
}

impl ConstructConfig {
    pub fn new(delta_t: u32, delta: u32, delta_in: u32, gamma: u32, mode: Mode) -> Self {
        ConstructConfig {
            delta_t,
            delta,
            delta_in,
            gamma,
            c: DEFAULT_C,
            c_prime: DEFAULT_C_PRIME,
            seed: 0,
            mode,
            uniformize: Uniformize::Raw,
            solver: Solver::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// `log₂(1/δ)`.
    pub fn log_inv_delta(&self) -> usize {
        self.delta as usize
    }

    /// Hidden units per target input: `C · log₂(1/δ)`.
    pub fn block_size(&self) -> usize {
        self.c as usize * self.log_inv_delta()
    }

    /// Output replication factor for a target of the given depth.
    pub fn copies(&self, depth: usize) -> usize {
        match self.mode {
            Mode::Theorem2 if depth >= 2 => self.c_prime as usize * self.log_inv_delta(),
            _ => 1,
        }
    }

    /// Zero is a possible weight in the sampled network.
    pub fn samples_zero(&self) -> bool {
        self.mode == Mode::Theorem1
    }

    pub fn validate(&self) -> Result<(), ConstructError> {
        use ConstructError::InvalidConfig as E;
        if self.c == 0 || self.c_prime == 0 {
            return Err(E("C and C' must be at least 1"));
        }
        if self.delta == 0 {
            return Err(E("delta must be at most 1/2"));
        }
        if self.delta > MAX_CONSTRUCT_EXPONENT {
            return Err(E("delta is finer than 2^-20"));
        }
        if self.delta_in < self.delta {
            return Err(E("delta_in must not exceed delta"));
        }
        if self.delta_in > crate::dyadic::MAX_GRID_EXPONENT || self.gamma > crate::dyadic::MAX_GRID_EXPONENT {
            return Err(E("grid exponent above 30"));
        }
        if 2 * self.delta < self.delta_t {
            return Err(E("delta^2 must not exceed delta_t"));
        }
        if self.uniformize == Uniformize::Reject && self.delta_in > MAX_PMF_EXPONENT {
            return Err(E("rejection needs delta_in no finer than 2^-12"));
        }
        Ok(())
    }

    fn grid(exponent: u32) -> PrecisionGrid {
        PrecisionGrid::new(exponent).expect("exponent validated")
    }
}

// ---------------------------------------------------------------------------
// product law and rejection

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

/// Exact law of `a·b` as integer counts over numerators at scale `2k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductPmf {
    scale: u32,
    total: u64,
    counts: BTreeMap<i64, u64>,
}

impl ProductPmf {
    pub fn scale(&self) -> u32 {
        self.scale
    }

    /// Number of equally likely `(a, b)` pairs.
    pub fn total(&self) -> u64 {
        self.total
    }

    fn count_raw(&self, num: i64) -> u64 {
        self.counts.get(&num).copied().unwrap_or(0)
    }

    pub fn prob(&self, z: &Dyadic) -> Ratio<u64> {
        let c = z.numerator_at_i64(self.scale).map_or(0, |n| self.count_raw(n));
        Ratio::new(c, self.total)
    }

    pub fn support(&self) -> impl Iterator<Item = (Dyadic, Ratio<u64>)> + '_ {
        self.counts
            .iter()
            .map(|(&n, &c)| (Dyadic::new(n, self.scale), Ratio::new(c, self.total)))
    }

    /// Smallest count over `S_δ∖{0}` (`δ = 2^-k`, `scale = 2k`).
    fn min_grid_count(&self, k: u32) -> Result<u64, ConstructError> {
        let step = 1i64 << (self.scale - k);
        let unit = 1i64 << k;
        let mut min = u64::MAX;
        for j in (-unit..=unit).filter(|&j| j != 0) {
            let c = self.count_raw(j * step);
            if c == 0 {
                return Err(ConstructError::SupportGap {
                    value: Dyadic::new(j, k),
                });
            }
            min = min.min(c);
        }
        Ok(min)
    }
}

fn reduced_counts(sample: PrecisionGrid, k: u32, include_zero: bool, keep: impl Fn(i64) -> bool) -> BTreeMap<i64, u64> {
    let shift = sample.exponent() - k;
    let unit = sample.unit();
    let mut out = BTreeMap::new();
    for raw in -unit..=unit {
        if raw == 0 && !include_zero {
            continue;
        }
        let r = raw >> shift;
        if keep(r) {
            *out.entry(r).or_insert(0u64) += 1;
        }
    }
    out
}

/// Law of `Z = a·b`: `a` uniform on `S_δ` conditioned to `a_sign`, `b` uniform on `S_δ`
/// (or `S_δ∖{0}` when `include_zero_b` is false).
pub fn product_pmf(grid: PrecisionGrid, a_sign: Sign, include_zero_b: bool) -> Result<ProductPmf, ConstructError> {
    product_pmf_reduced(grid, grid, a_sign, include_zero_b)
}

/// As [`product_pmf`], with `a` and `b` drawn on `sample` and floored onto `grid`.
/// The sign condition applies to the floored `a`.
pub fn product_pmf_reduced(
    sample: PrecisionGrid,
    grid: PrecisionGrid,
    a_sign: Sign,
    include_zero_b: bool,
) -> Result<ProductPmf, ConstructError> {
    if sample.exponent() > MAX_PMF_EXPONENT {
        return Err(ConstructError::GridTooFine(sample.exponent()));
    }
    if sample.exponent() < grid.exponent() {
        return Err(ConstructError::InvalidConfig("sampling grid coarser than target grid"));
    }
    let k = grid.exponent();
    let a = reduced_counts(sample, k, true, |r| match a_sign {
        Sign::Positive => r > 0,
        Sign::Negative => r < 0,
    });
    let b = reduced_counts(sample, k, include_zero_b, |_| true);
    let mut counts = BTreeMap::new();
    for (&av, &ac) in &a {
        for (&bv, &bc) in &b {
            *counts.entry(av * bv).or_insert(0u64) += ac * bc;
        }
    }
    let total = a.values().sum::<u64>() * b.values().sum::<u64>();
    Ok(ProductPmf {
        scale: 2 * k,
        total,
        counts,
    })
}

/// Indices kept by rejection sampling towards the uniform law on `S_δ∖{0}`.
///
/// A sample with value `z` is kept with probability `r / q(z)`, `r` the least
/// mass of the law on `S_δ∖{0}`; values outside `S_δ∖{0}` are dropped. The
/// coin of sample `i` is drawn from `seeds.child(i)`.
pub fn rejection_uniformize(
    samples: &[(usize, Dyadic)],
    pmf: &ProductPmf,
    grid: PrecisionGrid,
    seeds: SeedTree,
) -> Result<Vec<usize>, ConstructError> {
    let k = grid.exponent();
    let r = pmf.min_grid_count(k)?;
    Ok(samples
        .iter()
        .filter(|(i, z)| {
            if z.is_zero() || !grid.contains(z) {
                return false;
            }
            let num = z.numerator_at_i64(pmf.scale).expect("grid member");
            accept(pmf.count_raw(num), r, seeds.child(*i as u64))
        })
        .map(|(i, _)| *i)
        .collect())
}

fn accept(q: u64, r: u64, seeds: SeedTree) -> bool {
    seeds.rng().gen_range(0..q) < r
}

// ---------------------------------------------------------------------------
// diagnostics

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BranchKind {
    /// Units with `u > 0`, active for positive inputs.
    Green,
    /// Units with `u < 0`, active for negative inputs.
    Red,
    /// Random weights reading replicated copies of one input.
    Copies,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchDiag {
    pub kind: BranchKind,
    /// Non-zero candidates before filtering.
    pub candidates: usize,
    /// Candidates handed to the solver.
    pub kept: usize,
    pub found: bool,
    /// The target is not representable on the grid of the candidates.
    pub off_grid: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightDiag {
    /// Target layer (0-based).
    pub layer: usize,
    pub row: usize,
    pub col: usize,
    /// Replica index of the output row.
    pub copy: usize,
    pub target: Dyadic,
    pub branches: Vec<BranchDiag>,
}

impl WeightDiag {
    pub fn rssp_found(&self) -> bool {
        self.branches.iter().all(|b| b.found)
    }

    pub fn kept_sample_count(&self) -> usize {
        self.branches.iter().map(|b| b.kept).sum()
    }
}

// ---------------------------------------------------------------------------
// layer routines

struct Ctx<'a> {
    cfg: &'a ConstructConfig,
    pmf: Option<(ProductPmf, ProductPmf)>,
}

impl<'a> Ctx<'a> {
    fn new(cfg: &'a ConstructConfig, sample: PrecisionGrid) -> Result<Self, ConstructError> {
        let pmf = match cfg.uniformize {
            Uniformize::Raw => None,
            Uniformize::Reject => {
                let g = ConstructConfig::grid(cfg.delta);
                let z = cfg.samples_zero();
                Some((
                    product_pmf_reduced(sample, g, Sign::Positive, z)?,
                    product_pmf_reduced(sample, g, Sign::Negative, z)?,
                ))
            }
        };
        Ok(Ctx { cfg, pmf })
    }

    fn solve(
        &self,
        kind: BranchKind,
        target: Option<i64>,
        cands: Vec<(usize, i64)>,
        coins: SeedTree,
    ) -> Result<(BranchDiag, Vec<usize>), ConstructError> {
        let candidates = cands.len();
        let kept: Vec<(usize, i64)> = match (&self.pmf, kind) {
            (Some((pos, neg)), BranchKind::Green | BranchKind::Red) => {
                let pmf = if kind == BranchKind::Green { pos } else { neg };
                let k = self.cfg.delta;
                let r = pmf.min_grid_count(k)?;
                let step = 1i64 << k;
                cands
                    .into_iter()
                    .filter(|&(t, p)| p % step == 0 && accept(pmf.count_raw(p), r, coins.child(t as u64)))
                    .collect()
            }
            _ => cands,
        };
        let mut diag = BranchDiag {
            kind,
            candidates,
            kept: kept.len(),
            found: false,
            off_grid: target.is_none(),
        };
        let Some(t) = target else {
            return Ok((diag, Vec::new()));
        };
        let inst = SsInstance::from_elements(kept.iter().map(|&(_, p)| p).collect())?;
        let out = self.cfg.solver.solve_rssp(&inst, t)?;
        diag.found = out.found;
        let chosen = out.subset().map_or_else(Vec::new, |s| s.iter().map(|&i| kept[i].0).collect());
        Ok((diag, chosen))
    }
}

/// Masks and diagnostics for one realized target layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerOutcome {
    /// Mask of the hidden (block-diagonal) layer, if this layer has one.
    pub t_mask: Option<Mask>,
    /// Mask of the output layer.
    pub s_mask: Mask,
    pub per_weight: Vec<WeightDiag>,
}

impl LayerOutcome {
    pub fn success(&self) -> bool {
        self.per_weight.iter().all(WeightDiag::rssp_found)
    }
}

/// Realize `W` (`d2 × d1`) with hidden matrix `m` (`d1·B × d1`) and output matrix
/// `n` (`d2·K × d1·B`); output row `r·K + c` is replica `c` of target row `r`.
fn product_layer(
    layer: usize,
    w: &QMatrix,
    m: &QMatrix,
    n: &QMatrix,
    cfg: &ConstructConfig,
    coins: SeedTree,
) -> Result<LayerOutcome, ConstructError> {
    let (d2, d1) = w.shape();
    if m.cols() != d1 || m.rows() == 0 || !m.rows().is_multiple_of(d1) {
        return Err(ConstructError::Shape {
            what: "hidden matrix",
            expected: (cfg.block_size() * d1, d1),
            got: m.shape(),
        });
    }
    let b = m.rows() / d1;
    if n.cols() != m.rows() || n.rows() == 0 || !n.rows().is_multiple_of(d2) {
        return Err(ConstructError::Shape {
            what: "output matrix",
            expected: (d2, m.rows()),
            got: n.shape(),
        });
    }
    let copies = n.rows() / d2;
    let k = cfg.delta;
    let ctx = Ctx::new(cfg, m.grid())?;
    let mr = m.reduce_precision(k);
    let nr = n.reduce_precision(k);
    let mut t_mask = Mask::zeros(m.rows(), d1);
    let mut s_mask = Mask::zeros(n.rows(), n.cols());
    let mut per_weight = Vec::with_capacity(d2 * d1 * copies);
    for r in 0..d2 {
        for c in 0..copies {
            let row = r * copies + c;
            for j in 0..d1 {
                let target = w.entry(r, j);
                let t_num = target.numerator_at_i64(2 * k);
                let mut green = Vec::new();
                let mut red = Vec::new();
                for t in 0..b {
                    let unit = j * b + t;
                    let u = mr.raw(unit, j);
                    let p = nr.raw(row, unit) * u;
                    if p != 0 {
                        if u > 0 { &mut green } else { &mut red }.push((unit, p));
                    }
                }
                let base = coins.child(row as u64).child(j as u64);
                let mut branches = Vec::with_capacity(2);
                for (kind, cands) in [(BranchKind::Green, green), (BranchKind::Red, red)] {
                    let (diag, chosen) = ctx.solve(kind, t_num, cands, base)?;
                    for unit in chosen {
                        s_mask.set(row, unit, true);
                        t_mask.set(unit, j, true);
                    }
                    branches.push(diag);
                }
                per_weight.push(WeightDiag {
                    layer,
                    row: r,
                    col: j,
                    copy: c,
                    target,
                    branches,
                });
            }
        }
    }
    Ok(LayerOutcome {
        t_mask: Some(t_mask),
        s_mask,
        per_weight,
    })
}

/// Realize `W` (`d2 × d1`) reading `copies_in` replicas of each input through
/// `big` (`d2·copies_out × d1·copies_in`).
fn copy_layer(
    layer: usize,
    w: &QMatrix,
    big: &QMatrix,
    copies_in: usize,
    cfg: &ConstructConfig,
) -> Result<LayerOutcome, ConstructError> {
    let (d2, d1) = w.shape();
    if big.cols() != d1 * copies_in || !big.rows().is_multiple_of(d2) || big.rows() == 0 {
        return Err(ConstructError::Shape {
            what: "copy layer",
            expected: (d2, d1 * copies_in),
            got: big.shape(),
        });
    }
    let copies_out = big.rows() / d2;
    let k = cfg.delta;
    let ctx = Ctx::new(cfg, big.grid())?;
    let br = big.reduce_precision(k);
    let mut s_mask = Mask::zeros(big.rows(), big.cols());
    let mut per_weight = Vec::new();
    for r in 0..d2 {
        for c in 0..copies_out {
            let row = r * copies_out + c;
            for j in 0..d1 {
                let target = w.entry(r, j);
                let cands: Vec<(usize, i64)> = (0..copies_in)
                    .map(|cc| j * copies_in + cc)
                    .map(|col| (col, br.raw(row, col)))
                    .filter(|&(_, v)| v != 0)
                    .collect();
                let (diag, chosen) = ctx.solve(BranchKind::Copies, target.numerator_at_i64(k), cands, SeedTree::new(0))?;
                for col in chosen {
                    s_mask.set(row, col, true);
                }
                per_weight.push(WeightDiag {
                    layer,
                    row: r,
                    col: j,
                    copy: c,
                    target,
                    branches: vec![diag],
                });
            }
        }
    }
    Ok(LayerOutcome {
        t_mask: None,
        s_mask,
        per_weight,
    })
}

fn coin_tree(cfg: &ConstructConfig) -> SeedTree {
    SeedTree::new(cfg.seed).named("coins")
}

/// Realize `W` (`d2 × d1`) with `M` (`C·d1·log₂(1/δ) × d1`) and `N` (`d2 × C·d1·log₂(1/δ)`).
pub fn represent_layer(w: &QMatrix, m: &QMatrix, n: &QMatrix, cfg: &ConstructConfig) -> Result<LayerOutcome, ConstructError> {
    cfg.validate()?;
    let (d2, d1) = w.shape();
    let hidden = cfg.block_size() * d1;
    if m.shape() != (hidden, d1) {
        return Err(ConstructError::Shape {
            what: "hidden matrix",
            expected: (hidden, d1),
            got: m.shape(),
        });
    }
    if n.shape() != (d2, hidden) {
        return Err(ConstructError::Shape {
            what: "output matrix",
            expected: (d2, hidden),
            got: n.shape(),
        });
    }
    check_target_matrix(w, cfg)?;
    product_layer(0, w, m, n, cfg, coin_tree(cfg).child(0))
}

/// Realize `x ↦ wᵀx` with one hidden block per input.
pub fn represent_neuron(
    w_row: &[Dyadic],
    m_block: &QMatrix,
    v_block: &[Dyadic],
    cfg: &ConstructConfig,
) -> Result<LayerOutcome, ConstructError> {
    let w = QMatrix::from_dyadic(1, w_row.len(), ConstructConfig::grid(cfg.delta_t), w_row)?;
    let n = QMatrix::from_dyadic(1, v_block.len(), m_block.grid(), v_block)?;
    represent_layer(&w, m_block, &n, cfg)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightOutcome {
    /// `(s¹, s²)` when both branches were solved.
    pub masks: Option<(Vec<bool>, Vec<bool>)>,
    pub diag: WeightDiag,
}

/// Masks `s¹, s²` with `(v⊙s²)ᵀ σ((u⊙s¹) x) = w x` for all `x`.
///
/// `u` and `v` must already be on the `δ` grid and hold at least
/// `2·C·log₂(1/δ)` entries.
pub fn represent_weight(w: &Dyadic, u: &[Dyadic], v: &[Dyadic], cfg: &ConstructConfig) -> Result<WeightOutcome, ConstructError> {
    cfg.validate()?;
    let gt = ConstructConfig::grid(cfg.delta_t);
    if !gt.contains(w) {
        return Err(ConstructError::OffGrid {
            value: w.clone(),
            exponent: cfg.delta_t,
        });
    }
    if u.len() != v.len() || u.len() < 2 * cfg.block_size() {
        return Err(ConstructError::Shape {
            what: "weight block",
            expected: (2 * cfg.block_size(), 2 * cfg.block_size()),
            got: (u.len(), v.len()),
        });
    }
    let g = ConstructConfig::grid(cfg.delta);
    if let Some(bad) = u.iter().chain(v).find(|x| !g.contains(x)) {
        return Err(ConstructError::OffGrid {
            value: bad.clone(),
            exponent: cfg.delta,
        });
    }
    let wm = QMatrix::from_dyadic(1, 1, gt, core::slice::from_ref(w))?;
    let m = QMatrix::from_dyadic(u.len(), 1, g, u)?;
    let n = QMatrix::from_dyadic(1, v.len(), g, v)?;
    let out = product_layer(0, &wm, &m, &n, cfg, coin_tree(cfg).child(0))?;
    let diag = out.per_weight.into_iter().next().expect("one weight");
    let masks = diag.rssp_found().then(|| {
        let t = out.t_mask.expect("product layer");
        (t.bits().to_vec(), out.s_mask.bits().to_vec())
    });
    Ok(WeightOutcome { masks, diag })
}

/// `2n` hidden weights `u` and output weights `v`, drawn on `δ_in` and floored to `δ`.
pub fn sample_weight_block(n2: usize, cfg: &ConstructConfig, seeds: SeedTree) -> (Vec<Dyadic>, Vec<Dyadic>) {
    let sample = ConstructConfig::grid(cfg.delta_in);
    let draw = |s: SeedTree| {
        let mut rng = s.rng();
        (0..n2)
            .map(|_| sample.sample(&mut rng, !cfg.samples_zero()).quantize(cfg.delta))
            .collect::<Vec<_>>()
    };
    (draw(seeds.named("u")), draw(seeds.named("v")))
}

// ---------------------------------------------------------------------------
// full networks

#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionReport {
    pub mode: Mode,
    pub success: bool,
    pub per_weight: Vec<WeightDiag>,
    /// Parameters of the target, `Σ d_i d_{i−1}`.
    pub n_t: u64,
    /// Union-bound failure estimate with unit constant, clipped to `[0, 1]`.
    pub failure_bound: f64,
    pub block_size: usize,
    pub copies: usize,
}

impl ConstructionReport {
    pub fn failures(&self) -> impl Iterator<Item = &WeightDiag> {
        self.per_weight.iter().filter(|d| !d.rssp_found())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Construction {
    /// The sampled network on the `δ_in` grid, before reduction or pruning.
    pub big: QNetwork,
    pub masks: MaskSet,
    pub report: ConstructionReport,
}

impl Construction {
    /// `[g]_δ` with the masks applied.
    pub fn pruned(&self, delta: u32) -> Result<QNetwork, QnnError> {
        self.big.reduce_precision(delta).apply_mask(&self.masks)
    }
}

fn check_target_matrix(w: &QMatrix, cfg: &ConstructConfig) -> Result<(), ConstructError> {
    if w.grid().exponent() > cfg.delta_t {
        return Err(ConstructError::Target("weights finer than delta_t"));
    }
    Ok(())
}

fn check_target(target: &QNetwork, cfg: &ConstructConfig) -> Result<(), ConstructError> {
    cfg.validate()?;
    if target.schedule() != schedule::every_layer(target.depth()).as_slice() {
        return Err(ConstructError::Target("every layer output must be quantized"));
    }
    if target.output_grid().exponent() != cfg.gamma {
        return Err(ConstructError::Target("output grid differs from gamma"));
    }
    check_target_matrix(&target.layers()[0], cfg)
}

/// `min(1, N_t · L · L^(−1/7))` with `L = log₂(1/δ)`; the extra `L` applies to replicated layers.
pub fn failure_bound(n_t: u64, cfg: &ConstructConfig) -> f64 {
    let l = cfg.log_inv_delta() as f64;
    let per = libm::pow(l, -1.0 / 7.0);
    let mult = if cfg.mode == Mode::Theorem2 { l } else { 1.0 };
    (n_t as f64 * mult * per).clamp(0.0, 1.0)
}

fn sample_layers(shapes: &[(usize, usize)], cfg: &ConstructConfig) -> Vec<QMatrix> {
    let grid = ConstructConfig::grid(cfg.delta_in);
    let seeds = SeedTree::new(cfg.seed).named("big");
    shapes
        .iter()
        .enumerate()
        .map(|(i, &(r, c))| QMatrix::random(r, c, grid, !cfg.samples_zero(), &mut seeds.child(i as u64).rng()))
        .collect()
}

fn finish(
    target: &QNetwork,
    cfg: &ConstructConfig,
    big: QNetwork,
    outcomes: Vec<LayerOutcome>,
    copies: usize,
) -> Construction {
    let mut masks = Vec::new();
    let mut per_weight = Vec::new();
    for o in outcomes {
        masks.extend(o.t_mask);
        masks.push(o.s_mask);
        per_weight.extend(o.per_weight);
    }
    let n_t = target.total_params() as u64;
    let report = ConstructionReport {
        mode: cfg.mode,
        success: per_weight.iter().all(WeightDiag::rssp_found),
        per_weight,
        n_t,
        failure_bound: failure_bound(n_t, cfg),
        block_size: cfg.block_size(),
        copies,
    };
    Construction {
        big,
        masks: MaskSet { masks },
        report,
    }
}

/// Depth-`2ℓ` construction: target layer `i` becomes a block-diagonal hidden
/// layer of `C·d_{i−1}·log₂(1/δ)` units followed by a `d_i`-wide output layer.
pub fn construct_theorem1(target: &QNetwork, cfg: &ConstructConfig) -> Result<Construction, ConstructError> {
    if cfg.mode != Mode::Theorem1 {
        return Err(ConstructError::InvalidConfig("mode must be theorem1"));
    }
    check_target(target, cfg)?;
    let b = cfg.block_size();
    let dims = target.dims();
    let shapes: Vec<(usize, usize)> = dims
        .windows(2)
        .flat_map(|d| [(b * d[0], d[0]), (d[1], b * d[0])])
        .collect();
    let layers = sample_layers(&shapes, cfg);
    let coins = coin_tree(cfg);
    let outcomes = target
        .layers()
        .iter()
        .enumerate()
        .map(|(i, w)| product_layer(i, w, &layers[2 * i], &layers[2 * i + 1], cfg, coins.child(i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let depth = layers.len();
    let big = QNetwork::new(layers, schedule::even_layers(depth), target.output_grid())?;
    Ok(finish(target, cfg, big, outcomes, 1))
}

/// Depth-`ℓ+1` construction: the first two layers realize target layer 1 with
/// every output replicated `K = C′·log₂(1/δ)` times; each later layer reads
/// the replicas and replicates its own outputs, except the last.
pub fn construct_theorem2(target: &QNetwork, cfg: &ConstructConfig) -> Result<Construction, ConstructError> {
    if cfg.mode != Mode::Theorem2 {
        return Err(ConstructError::InvalidConfig("mode must be theorem2"));
    }
    check_target(target, cfg)?;
    let b = cfg.block_size();
    let dims = target.dims();
    let ell = target.depth();
    let k = cfg.copies(ell);
    let out_copies = |i: usize| if i + 1 == ell { 1 } else { k };
    let mut shapes = vec![(b * dims[0], dims[0]), (dims[1] * out_copies(0), b * dims[0])];
    for i in 1..ell {
        shapes.push((dims[i + 1] * out_copies(i), dims[i] * k));
    }
    let layers = sample_layers(&shapes, cfg);
    let coins = coin_tree(cfg);
    let mut outcomes = vec![product_layer(0, &target.layers()[0], &layers[0], &layers[1], cfg, coins.child(0))?];
    for i in 1..ell {
        outcomes.push(copy_layer(i, &target.layers()[i], &layers[i + 1], k, cfg)?);
    }
    let depth = layers.len();
    let big = QNetwork::new(layers, schedule::all_but_first(depth), target.output_grid())?;
    Ok(finish(target, cfg, big, outcomes, k))
}

/// Dispatch on `cfg.mode`.
pub fn construct(target: &QNetwork, cfg: &ConstructConfig) -> Result<Construction, ConstructError> {
    match cfg.mode {
        Mode::Theorem1 => construct_theorem1(target, cfg),
        Mode::Theorem2 => construct_theorem2(target, cfg),
    }
}

/// Random target with weights uniform on `S_{δ_t}` and every layer output quantized to `γ`.
pub fn random_target(dims: &[usize], delta_t: u32, gamma: u32, seeds: SeedTree) -> Result<QNetwork, ConstructError> {
    let g = PrecisionGrid::new(delta_t).map_err(|_| ConstructError::InvalidConfig("delta_t exponent above 30"))?;
    let o = PrecisionGrid::new(gamma).map_err(|_| ConstructError::InvalidConfig("gamma exponent above 30"))?;
    Ok(crate::qnn::random_network(
        dims,
        g,
        schedule::every_layer(dims.len().saturating_sub(1)),
        o,
        seeds,
    )?)
}

// ---------------------------------------------------------------------------
// verification

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub probes: ProbeReport,
    pub target_params: usize,
    pub total_params: usize,
    /// Mask bits set.
    pub kept_params: usize,
    /// Non-zero weights of the pruned, reduced network.
    pub live_params: usize,
    /// `kept_params / total_params`.
    pub sparsity: f64,
}

impl VerifyReport {
    pub fn exact(&self) -> bool {
        self.probes.equal()
    }
}

/// Compare the target against `[g ⊙ S]_δ` on every probe.
pub fn verify_exact(
    target: &QNetwork,
    big: &QNetwork,
    masks: &MaskSet,
    delta: u32,
    probes: &[Vec<Dyadic>],
) -> Result<VerifyReport, QnnError> {
    let pruned = big.reduce_precision(delta).apply_mask(masks)?;
    let probes = equal_on_probes(target, &pruned, probes)?;
    let total = masks.total();
    let kept = masks.kept();
    Ok(VerifyReport {
        probes,
        target_params: target.total_params(),
        total_params: total,
        kept_params: kept,
        live_params: pruned.nonzero_params(),
        sparsity: if total == 0 { 0.0 } else { kept as f64 / total as f64 },
    })
}

/// Every replicated layer output holds `copies` bit-identical values per target unit.
///
/// Checks each layer except the first (hidden units) and the last.
pub fn copy_fidelity(pruned: &QNetwork, copies: usize, probes: &[Vec<Dyadic>]) -> Result<bool, QnnError> {
    if copies <= 1 {
        return Ok(true);
    }
    let depth = pruned.depth();
    for p in probes {
        let trace = pruned.trace(p)?;
        for out in trace.iter().take(depth - 1).skip(1) {
            if out.chunks(copies).any(|c| c.iter().any(|v| v != &c[0])) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qnn::{default_probes, Requant};
    use alloc::vec::Vec;

    fn g(k: u32) -> PrecisionGrid {
        PrecisionGrid::new(k).unwrap()
    }

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    fn single_weight_net(u: &[Dyadic], v: &[Dyadic], s1: &[bool], s2: &[bool], cfg: &ConstructConfig) -> QNetwork {
        let u: Vec<Dyadic> = u.iter().zip(s1).map(|(x, &k)| if k { x.clone() } else { Dyadic::zero() }).collect();
        let v: Vec<Dyadic> = v.iter().zip(s2).map(|(x, &k)| if k { x.clone() } else { Dyadic::zero() }).collect();
        let m = QMatrix::from_dyadic(u.len(), 1, g(cfg.delta), &u).unwrap();
        let n = QMatrix::from_dyadic(1, v.len(), g(cfg.delta), &v).unwrap();
        QNetwork::new(vec![m, n], vec![Requant::Keep, Requant::Quantize], g(cfg.gamma)).unwrap()
    }

    fn target_weight_net(w: &Dyadic, cfg: &ConstructConfig) -> QNetwork {
        let m = QMatrix::from_dyadic(1, 1, g(cfg.delta_t), core::slice::from_ref(w)).unwrap();
        QNetwork::new(vec![m], vec![Requant::Quantize], g(cfg.gamma)).unwrap()
    }

    #[test]
    fn product_pmf_examples() {
        let pmf = product_pmf(g(1), Sign::Positive, true).unwrap();
        assert_eq!(pmf.total(), 10);
        assert_eq!(pmf.prob(&d("1/2^2")), Ratio::new(1, 10));
        assert_eq!(pmf.prob(&Dyadic::zero()), Ratio::new(1, 5));
        assert_eq!(pmf.prob(&d("3/2^3")), Ratio::new(0, 1));
        let sum: Ratio<u64> = pmf.support().map(|(_, p)| p).sum();
        assert_eq!(sum, Ratio::from_integer(1));
        let neg = product_pmf(g(3), Sign::Negative, false).unwrap();
        assert_eq!(neg.prob(&Dyadic::zero()), Ratio::new(0, 1));
        assert_eq!(neg.support().map(|(_, p)| p).sum::<Ratio<u64>>(), Ratio::from_integer(1));
        assert!(matches!(product_pmf(g(13), Sign::Positive, true), Err(ConstructError::GridTooFine(13))));
    }

    #[test]
    fn reduced_pmf_matches_direct_sampling_law() {
        // floor from 2^-3 onto 2^-2: enumerate pairs directly
        let pmf = product_pmf_reduced(g(3), g(2), Sign::Positive, true).unwrap();
        let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
        let mut total = 0;
        for a in -8i64..=8 {
            let ar = a >> 1;
            if ar <= 0 {
                continue;
            }
            for b in -8i64..=8 {
                *counts.entry(ar * (b >> 1)).or_insert(0) += 1;
                total += 1;
            }
        }
        assert_eq!(pmf.total(), total);
        for (n, c) in counts {
            assert_eq!(pmf.prob(&Dyadic::new(n, 4)), Ratio::new(c, total));
        }
    }

    #[test]
    fn kept_fraction_closed_form() {
        // the rarest grid values are ±1 (only 1·1), so r = 1 and the kept mass is 2/(2^(k+1)+1)
        for k in 1..=6 {
            let pmf = product_pmf(g(k), Sign::Positive, true).unwrap();
            let r = pmf.min_grid_count(k).unwrap();
            assert_eq!(r, 1);
            let kept = Ratio::new((1u64 << (k + 1)) * r, pmf.total());
            assert_eq!(kept, Ratio::new(2, (1 << (k + 1)) + 1));
        }
    }

    #[test]
    fn rejection_is_uniform_chi_squared() {
        let grid = g(1);
        let pmf = product_pmf(grid, Sign::Positive, true).unwrap();
        let mut rng = SeedTree::new(3).named("draws").rng();
        let samples: Vec<(usize, Dyadic)> = (0..100_000)
            .map(|i| {
                let a = Dyadic::new(rng.gen_range(1..=2i64), 1);
                let b = grid.sample(&mut rng, false);
                (i, a * b)
            })
            .collect();
        let kept = rejection_uniformize(&samples, &pmf, grid, SeedTree::new(4)).unwrap();
        let mut counts: BTreeMap<Dyadic, u64> = BTreeMap::new();
        for &i in &kept {
            *counts.entry(samples[i].1.clone()).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 4);
        let n = kept.len() as f64;
        let chi2: f64 = counts.values().map(|&c| (c as f64 - n / 4.0).powi(2) / (n / 4.0)).sum();
        // 3 degrees of freedom, alpha = 0.001
        assert!(chi2 < 16.266, "chi2 = {chi2}");
        // expected kept fraction 2/5 at δ = 1/2
        assert!((n / 100_000.0 - 0.4).abs() < 0.01);
        // off-grid values are always dropped
        let off = [(0usize, d("3/2^3")), (1, Dyadic::zero())];
        assert!(rejection_uniformize(&off, &pmf, grid, SeedTree::new(5)).unwrap().is_empty());
    }

    #[test]
    fn config_validation() {
        let ok = ConstructConfig::new(6, 3, 3, 4, Mode::Theorem1);
        assert!(ok.validate().is_ok());
        assert!(ConstructConfig::new(7, 3, 3, 4, Mode::Theorem1).validate().is_err());
        assert!(ConstructConfig::new(2, 3, 2, 4, Mode::Theorem1).validate().is_err());
        assert!(ConstructConfig { c: 0, ..ok }.validate().is_err());
        assert!(ConstructConfig::new(0, 0, 0, 4, Mode::Theorem1).validate().is_err());
        assert_eq!(ok.block_size(), 24);
        assert_eq!(ConstructConfig { mode: Mode::Theorem2, ..ok }.copies(2), 18);
        assert_eq!(ConstructConfig { mode: Mode::Theorem2, ..ok }.copies(1), 1);
    }

    #[test]
    fn zero_weight_prunes_everything() {
        let cfg = ConstructConfig::new(2, 2, 2, 4, Mode::Theorem1);
        let (u, v) = sample_weight_block(64, &cfg, SeedTree::new(1));
        let out = represent_weight(&Dyadic::zero(), &u, &v, &cfg).unwrap();
        let (s1, s2) = out.masks.unwrap();
        assert!(s1.iter().chain(&s2).all(|&b| !b));
    }

    #[test]
    fn weight_preconditions() {
        let cfg = ConstructConfig::new(1, 1, 1, 4, Mode::Theorem1);
        let (u, v) = sample_weight_block(64, &cfg, SeedTree::new(1));
        assert!(matches!(represent_weight(&d("3/2^2"), &u, &v, &cfg), Err(ConstructError::OffGrid { .. })));
        assert!(matches!(represent_weight(&d("1/2^1"), &u[..4], &v[..4], &cfg), Err(ConstructError::Shape { .. })));
        let mut bad = u.clone();
        bad[0] = d("1/2^3");
        assert!(represent_weight(&d("1/2^1"), &bad, &v, &cfg).is_err());
    }

    #[test]
    fn single_weight_success_rate_and_exactness() {
        let cfg = ConstructConfig::new(2, 2, 2, 4, Mode::Theorem1);
        let w = d("3/2^2");
        let xs = g(3).members();
        let target = target_weight_net(&w, &cfg);
        let mut ok = 0;
        for seed in 0..200 {
            let cfg = cfg.with_seed(seed);
            let (u, v) = sample_weight_block(64, &cfg, SeedTree::new(seed));
            let out = represent_weight(&w, &u, &v, &cfg).unwrap();
            if let Some((s1, s2)) = &out.masks {
                ok += 1;
                let net = single_weight_net(&u, &v, s1, s2, &cfg);
                for x in &xs {
                    let p = [x.clone()];
                    assert_eq!(net.evaluate(&p).unwrap(), target.evaluate(&p).unwrap());
                }
            }
        }
        assert!(ok >= 180, "{ok} / 200");
    }

    #[test]
    fn branches_cover_one_sign_each() {
        let cfg = ConstructConfig::new(3, 3, 3, 8, Mode::Theorem1);
        let w = d("-5/2^3");
        let (u, v) = sample_weight_block(96, &cfg, SeedTree::new(8));
        let out = represent_weight(&w, &u, &v, &cfg).unwrap();
        let (s1, s2) = out.masks.unwrap();
        let only = |sign: bool| -> Vec<bool> { s1.iter().zip(&u).map(|(&k, x)| k && x.is_positive() == sign).collect() };
        let green = single_weight_net(&u, &v, &only(true), &s2, &cfg);
        let red = single_weight_net(&u, &v, &only(false), &s2, &cfg);
        for x in g(3).members() {
            let p = [x.clone()];
            let (gv, rv) = (green.evaluate(&p).unwrap()[0].clone(), red.evaluate(&p).unwrap()[0].clone());
            if !x.is_positive() {
                assert!(gv.is_zero());
            }
            if !x.is_negative() {
                assert!(rv.is_zero());
            }
            assert_eq!(gv + rv, (w.clone() * x).quantize(8));
        }
    }

    #[test]
    fn reject_mode_still_exact() {
        let mut cfg = ConstructConfig::new(2, 2, 2, 4, Mode::Theorem1);
        cfg.uniformize = Uniformize::Reject;
        let w = d("1/2^1");
        let mut ok = 0;
        for seed in 0..40 {
            let cfg = cfg.with_seed(seed);
            let (u, v) = sample_weight_block(128, &cfg, SeedTree::new(seed));
            let out = represent_weight(&w, &u, &v, &cfg).unwrap();
            assert!(out.diag.kept_sample_count() < 128);
            if let Some((s1, s2)) = &out.masks {
                ok += 1;
                let net = single_weight_net(&u, &v, s1, s2, &cfg);
                let target = target_weight_net(&w, &cfg);
                for x in g(3).members() {
                    assert_eq!(net.evaluate(core::slice::from_ref(&x)).unwrap(), target.evaluate(&[x]).unwrap());
                }
            }
        }
        assert!(ok > 0);
    }

    #[test]
    fn success_rate_grows_with_c() {
        let base = ConstructConfig::new(3, 3, 3, 8, Mode::Theorem1);
        let targets = g(3).members();
        let mut rates = Vec::new();
        for c in [2u32, 4, 8, 16] {
            let mut ok = 0;
            for seed in 0..100u64 {
                let cfg = ConstructConfig { c, ..base }.with_seed(seed);
                let (u, v) = sample_weight_block(2 * cfg.block_size(), &cfg, SeedTree::new(seed));
                let w = &targets[(seed % 17) as usize];
                ok += usize::from(represent_weight(w, &u, &v, &cfg).unwrap().masks.is_some());
            }
            rates.push(ok);
        }
        // non-decreasing up to sampling noise
        assert!(rates.windows(2).all(|p| p[1] + 5 >= p[0]), "{rates:?}");
        assert!(rates[3] > rates[0]);
    }

    #[test]
    fn neuron_exact_on_probes() {
        let dd = 3;
        let w = [d("3/2^2"), d("-1/2^1"), d("1")];
        let tw = QMatrix::from_dyadic(1, 3, g(2), &w).unwrap();
        let target = QNetwork::new(vec![tw], vec![Requant::Quantize], g(6)).unwrap();
        let probes = default_probes(3, SeedTree::new(1));
        let mut ok = 0;
        for seed in 0..60 {
            let cfg = ConstructConfig::new(2, 2, 2, 6, Mode::Theorem1).with_seed(seed);
            let rows = cfg.block_size() * dd;
            let mut rng = SeedTree::new(seed).rng();
            let m = QMatrix::random(rows, dd, g(2), false, &mut rng);
            let v: Vec<Dyadic> = (0..rows).map(|_| g(2).sample(&mut rng, false)).collect();
            let out = represent_neuron(&w, &m, &v, &cfg).unwrap();
            if !out.success() {
                continue;
            }
            ok += 1;
            let n = QMatrix::from_dyadic(1, rows, g(2), &v).unwrap();
            let big = QNetwork::new(vec![m, n], vec![Requant::Keep, Requant::Quantize], g(6)).unwrap();
            let masks = MaskSet {
                masks: vec![out.t_mask.unwrap(), out.s_mask],
            };
            assert!(verify_exact(&target, &big, &masks, 2, &probes).unwrap().exact());
            // block-diagonal: no hidden unit reads two inputs
            for r in 0..rows {
                let used: usize = (0..3).filter(|&c| masks.masks[0].get(r, c)).count();
                assert!(used <= 1);
                if used == 1 {
                    assert!(masks.masks[0].get(r, r / cfg.block_size()));
                }
            }
        }
        assert!(ok >= 1);
    }

    #[test]
    fn zero_neuron_and_layer_give_zero_masks() {
        let cfg = ConstructConfig::new(2, 2, 2, 6, Mode::Theorem1);
        let rows = cfg.block_size() * 2;
        let mut rng = SeedTree::new(2).rng();
        let m = QMatrix::random(rows, 2, g(2), false, &mut rng);
        let n = QMatrix::random(2, rows, g(2), false, &mut rng);
        let out = represent_layer(&QMatrix::zeros(2, 2, g(2)), &m, &n, &cfg).unwrap();
        assert!(out.success());
        assert_eq!(out.s_mask.count_ones() + out.t_mask.unwrap().count_ones(), 0);
        let bad = represent_layer(&QMatrix::zeros(2, 2, g(2)), &n, &m, &cfg);
        assert!(matches!(bad, Err(ConstructError::Shape { .. })));
    }

    #[test]
    fn layer_exhaustive_on_grid() {
        let cfg = ConstructConfig {
            c: 24,
            ..ConstructConfig::new(2, 2, 2, 4, Mode::Theorem1)
        };
        let mut found = 0;
        for seed in 0..10 {
            let cfg = cfg.with_seed(seed);
            let target = random_target(&[2, 2], 2, 4, SeedTree::new(100 + seed)).unwrap();
            let c = construct_theorem1(&target, &cfg).unwrap();
            if !c.report.success {
                continue;
            }
            found += 1;
            let probes = default_probes(2, SeedTree::new(0));
            assert_eq!(probes.len(), 81);
            let rep = verify_exact(&target, &c.big, &c.masks, 2, &probes).unwrap();
            assert!(rep.exact(), "{:?}", rep.probes.first_mismatch);
            // the σ-wrapped layer: the last big layer carries no ReLU, matching the target's last layer
            assert_eq!(c.big.depth(), 2);
        }
        assert!(found >= 7, "{found}");
    }

    #[test]
    fn theorem1_smallest_case() {
        let cfg = ConstructConfig::new(2, 2, 2, 2, Mode::Theorem1).with_seed(5);
        let w = QMatrix::from_dyadic(1, 1, g(2), &[d("1/2^2")]).unwrap();
        let target = QNetwork::new(vec![w], vec![Requant::Quantize], g(2)).unwrap();
        let c = construct_theorem1(&target, &cfg).unwrap();
        assert!(c.report.success);
        assert_eq!(c.report.n_t, 1);
        let rep = verify_exact(&target, &c.big, &c.masks, 2, &default_probes(1, SeedTree::new(0))).unwrap();
        assert!(rep.exact());
        assert!(rep.sparsity > 0.0 && rep.sparsity < 1.0);
        assert_eq!(rep.kept_params, c.masks.kept());
    }

    #[test]
    fn zero_target_always_succeeds() {
        for seed in 0..5 {
            for mode in [Mode::Theorem1, Mode::Theorem2] {
                let cfg = ConstructConfig::new(3, 3, 3, 4, mode).with_seed(seed);
                let layers = vec![QMatrix::zeros(2, 2, g(3)), QMatrix::zeros(2, 2, g(3))];
                let target = QNetwork::new(layers, schedule::every_layer(2), g(4)).unwrap();
                let c = construct(&target, &cfg).unwrap();
                assert!(c.report.success);
                assert_eq!(c.masks.kept(), 0);
                let rep = verify_exact(&target, &c.big, &c.masks, 3, &default_probes(2, SeedTree::new(0))).unwrap();
                assert!(rep.exact());
            }
        }
    }

    #[test]
    fn theorem1_two_layers_exact_at_feasible_precision() {
        // δ_t = δ: every target weight lies on the candidate grid
        let mut ok = 0;
        for seed in 0..10 {
            let cfg = ConstructConfig {
                c: 24,
                ..ConstructConfig::new(3, 3, 3, 4, Mode::Theorem1).with_seed(seed)
            };
            let target = random_target(&[3, 3, 3], 3, 4, SeedTree::new(seed)).unwrap();
            let c = construct_theorem1(&target, &cfg).unwrap();
            assert_eq!(c.big.dims(), vec![3, 216, 3, 216, 3]);
            assert_eq!(c.report.per_weight.len(), 18);
            if c.report.success {
                ok += 1;
                let probes = default_probes(3, SeedTree::new(seed));
                let rep = verify_exact(&target, &c.big, &c.masks, 3, &probes).unwrap();
                assert!(rep.exact(), "{:?}", rep.probes.first_mismatch);
            } else {
                assert!(c.report.failures().count() > 0);
            }
        }
        assert!(ok >= 8, "{ok}");
    }

    #[test]
    fn theorem1_reduces_finer_sampling_grid() {
        let cfg = ConstructConfig::new(3, 3, 5, 4, Mode::Theorem1).with_seed(2);
        let target = random_target(&[2, 2], 3, 4, SeedTree::new(7)).unwrap();
        let c = construct_theorem1(&target, &cfg).unwrap();
        assert_eq!(c.big.weight_grid().exponent(), 5);
        if c.report.success {
            let rep = verify_exact(&target, &c.big, &c.masks, 3, &default_probes(2, SeedTree::new(0))).unwrap();
            assert!(rep.exact());
        }
    }

    #[test]
    fn theorem2_single_layer_is_plain_block() {
        let cfg = ConstructConfig::new(3, 3, 3, 4, Mode::Theorem2).with_seed(1);
        let target = random_target(&[2, 2], 3, 4, SeedTree::new(1)).unwrap();
        let c = construct_theorem2(&target, &cfg).unwrap();
        assert_eq!(c.report.copies, 1);
        assert_eq!(c.big.dims(), vec![2, 48, 2]);
        assert!(c.big.layers().iter().all(|l| l.raw_data().iter().all(|&v| v != 0)));
    }

    #[test]
    fn theorem2_copies_and_exactness() {
        let mut ok = 0;
        for seed in 0..10 {
            let cfg = ConstructConfig {
                c: 24,
                ..ConstructConfig::new(3, 3, 3, 4, Mode::Theorem2).with_seed(seed)
            };
            let target = random_target(&[2, 2, 2], 3, 4, SeedTree::new(seed)).unwrap();
            let c = construct_theorem2(&target, &cfg).unwrap();
            assert_eq!(c.big.depth(), 3);
            assert_eq!(c.big.dims(), vec![2, 144, 36, 2]);
            let probes = default_probes(2, SeedTree::new(0));
            if c.report.success {
                ok += 1;
                assert!(copy_fidelity(&c.pruned(3).unwrap(), c.report.copies, &probes).unwrap());
                let rep = verify_exact(&target, &c.big, &c.masks, 3, &probes).unwrap();
                assert!(rep.exact(), "{:?}", rep.probes.first_mismatch);
            }
        }
        assert!(ok >= 8, "{ok}");
    }

    #[test]
    fn theorem2_reports_off_grid_weights() {
        // δ_t finer than δ: later-layer weights off the δ grid cannot be subset sums of δ-grid weights
        let cfg = ConstructConfig::new(6, 3, 3, 4, Mode::Theorem2).with_seed(3);
        let w1 = QMatrix::from_dyadic(1, 1, g(6), &[d("1/2^1")]).unwrap();
        let w2 = QMatrix::from_dyadic(1, 1, g(6), &[d("1/2^6")]).unwrap();
        let target = QNetwork::new(vec![w1, w2], schedule::every_layer(2), g(4)).unwrap();
        let c = construct_theorem2(&target, &cfg).unwrap();
        assert!(!c.report.success);
        let off: Vec<_> = c.report.failures().filter(|w| w.branches.iter().any(|b| b.off_grid)).collect();
        assert_eq!(off.len(), cfg.copies(2).min(1));
        assert_eq!((off[0].layer, off[0].branches[0].kind), (1, BranchKind::Copies));
    }

    #[test]
    fn mutation_and_dead_unit_pruning() {
        let cfg = ConstructConfig::new(3, 3, 3, 4, Mode::Theorem1);
        let (c, target) = (0..20)
            .map(|s| {
                let t = random_target(&[2, 2], 3, 4, SeedTree::new(50 + s)).unwrap();
                (construct_theorem1(&t, &cfg.with_seed(s)).unwrap(), t)
            })
            .find(|(c, t)| c.report.success && t.nonzero_params() > 0)
            .unwrap();
        let probes = default_probes(2, SeedTree::new(0));
        // flipping a live output bit off changes the function
        let mut flipped = c.masks.clone();
        let s = &mut flipped.masks[1];
        let (r, col) = (0..2)
            .flat_map(|r| (0..s.shape().1).map(move |c| (r, c)))
            .find(|&(r, col)| s.get(r, col))
            .unwrap();
        s.set(r, col, false);
        let rep = verify_exact(&target, &c.big, &flipped, 3, &probes).unwrap();
        assert!(!rep.exact());
        // pruning a hidden unit that no output reads changes nothing
        let mut dead = c.masks.clone();
        let unused = (0..dead.masks[1].shape().1).find(|&u| (0..2).all(|r| !dead.masks[1].get(r, u))).unwrap();
        dead.masks[0].set(unused, unused / cfg.block_size(), false);
        for r in 0..2 {
            dead.masks[1].set(r, unused, false);
        }
        assert!(verify_exact(&target, &c.big, &dead, 3, &probes).unwrap().exact());
    }

    #[test]
    fn target_validation() {
        let cfg = ConstructConfig::new(3, 3, 3, 4, Mode::Theorem1);
        let fine = random_target(&[2, 2], 5, 4, SeedTree::new(0)).unwrap();
        assert!(matches!(construct_theorem1(&fine, &cfg), Err(ConstructError::Target(_))));
        let other_gamma = random_target(&[2, 2], 3, 5, SeedTree::new(0)).unwrap();
        assert!(construct_theorem1(&other_gamma, &cfg).is_err());
        let t = random_target(&[2, 2], 3, 4, SeedTree::new(0)).unwrap();
        assert!(construct_theorem2(&t, &cfg).is_err());
        let bound = failure_bound(18, &cfg);
        assert!(bound > 0.0 && bound <= 1.0);
        assert!((failure_bound(1, &cfg) - libm::pow(3.0, -1.0 / 7.0)).abs() < 1e-12);
    }
}
