//! Parameter-counting lower bounds and the exhaustive one-dimensional
//! coverage check against the linear family `{x ↦ wx : w ∈ S_δ}`.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use num_bigint::BigUint;
use num_traits::One;

use crate::construct::{represent_weight, ConstructConfig, ConstructError};
use crate::dyadic::{Dyadic, PrecisionGrid};
use crate::qnn::{schedule, QMatrix, QNetwork, QnnError, Requant};
use crate::rng::SeedTree;

/// Largest pruning count the exhaustive check will enumerate, as `2^MAX_ALPHA`.
pub const MAX_ALPHA: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum BoundsError {
    #[error("width must be at least 1")]
    ZeroWidth,
    #[error("coverage probability must lie in (0, 1], got {0}")]
    Probability(f64),
    #[error("exhaustive check supports d = 1 only, got {inputs} -> {outputs}")]
    Dimension { inputs: usize, outputs: usize },
    #[error("{0} nonzero parameters exceed the enumeration limit of {MAX_ALPHA}")]
    TooManyParams(usize),
    #[error("network quantizes activations; function identity from two probes needs a homogeneous network")]
    NotHomogeneous,
    #[error("pruning range {start}..{end} exceeds 2^{alpha}")]
    Range { start: u64, end: u64, alpha: usize },
    #[error("grid exponent {0} is too fine")]
    GridTooFine(u32),
    #[error(transparent)]
    Qnn(#[from] QnnError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundQuery {
    pub d: u32,
    /// Grid exponent `k` with `δ = 2^-k`.
    pub delta: u32,
    pub p: f64,
}

impl LowerBoundQuery {
    pub fn new(d: u32, delta: u32, p: f64) -> Result<Self, BoundsError> {
        if d == 0 {
            return Err(BoundsError::ZeroWidth);
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(BoundsError::Probability(p));
        }
        Ok(LowerBoundQuery { d, delta, p })
    }
}

/// `|F| = (2/δ + 1)^(d²)`.
pub fn family_size(d: u32, delta: u32) -> BigUint {
    let base = (BigUint::one() << (delta as usize + 1)) + 1u32;
    num_traits::pow(base, (d as usize) * (d as usize))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBound {
    pub value: f64,
    pub integer: i64,
}

/// `log₂ p + d² log₂(2/δ + 1)` and its ceiling.
pub fn param_lower_bound(q: &LowerBoundQuery) -> ParamBound {
    let grid = libm::exp2(f64::from(q.delta) + 1.0) + 1.0;
    let d2 = f64::from(q.d) * f64::from(q.d);
    let value = libm::log2(q.p) + d2 * libm::log2(grid);
    ParamBound {
        value,
        integer: libm::ceil(value) as i64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthBound {
    pub value: f64,
    /// The width bound holds up to an unspecified absolute constant.
    pub constant_free: bool,
}

/// Reference width `d log₂(1/δ)`.
pub fn width_lower_bound(d: u32, delta: u32) -> WidthBound {
    WidthBound {
        value: f64::from(d) * f64::from(delta),
        constant_free: true,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub delta: u32,
    pub alpha: usize,
    pub family_size: u64,
    pub realized_count: usize,
    /// Targets `w` whose map `x ↦ wx` some pruning realizes, ascending.
    pub covered_targets: Vec<Dyadic>,
    pub bound: f64,
    pub bound_satisfied: bool,
}

impl CoverageReport {
    pub fn covers_family(&self) -> bool {
        self.covered_targets.len() as u64 == self.family_size
    }
}

/// Nonzero weight positions `(layer, row, col)` of `g`, in layer-major order.
pub fn nonzero_positions(g: &QNetwork) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for (l, m) in g.layers().iter().enumerate() {
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                if m.raw(r, c) != 0 {
                    out.push((l, r, c));
                }
            }
        }
    }
    out
}

fn check_network(g: &QNetwork) -> Result<Vec<(usize, usize, usize)>, BoundsError> {
    if g.input_dim() != 1 || g.output_dim() != 1 {
        return Err(BoundsError::Dimension {
            inputs: g.input_dim(),
            outputs: g.output_dim(),
        });
    }
    if g.schedule().contains(&Requant::Quantize) {
        return Err(BoundsError::NotHomogeneous);
    }
    let pos = nonzero_positions(g);
    if pos.len() > MAX_ALPHA {
        return Err(BoundsError::TooManyParams(pos.len()));
    }
    Ok(pos)
}

/// Distinct `(g'(1), −g'(−1))` over the prunings `g'` indexed by `range`.
///
/// Bit `i` of a pruning index keeps the `i`-th nonzero parameter. Ranges
/// can be evaluated independently and merged by set union.
pub fn coverage_pairs(g: &QNetwork, range: Range<u64>) -> Result<BTreeSet<(Dyadic, Dyadic)>, BoundsError> {
    let pos = check_network(g)?;
    let alpha = pos.len();
    if range.end > 1u64 << alpha {
        return Err(BoundsError::Range {
            start: range.start,
            end: range.end,
            alpha,
        });
    }
    let one = [Dyadic::one()];
    let minus = [-Dyadic::one()];
    let mut seen = BTreeSet::new();
    let mut layers: Vec<QMatrix> = g.layers().to_vec();
    for idx in range {
        for (i, &(l, r, c)) in pos.iter().enumerate() {
            let v = if idx >> i & 1 == 1 { g.layers()[l].raw(r, c) } else { 0 };
            layers[l].set_raw(r, c, v);
        }
        let net = QNetwork::new(layers.clone(), g.schedule().to_vec(), g.output_grid())?;
        let plus = net.evaluate(&one)?.pop().expect("one output");
        let neg = -net.evaluate(&minus)?.pop().expect("one output");
        seen.insert((plus, neg));
    }
    Ok(seen)
}

/// Assemble a report from the full set of realized pairs.
pub fn coverage_report(delta: u32, alpha: usize, pairs: &BTreeSet<(Dyadic, Dyadic)>) -> CoverageReport {
    let grid = PrecisionGrid::new(delta).expect("delta exponent within grid limit");
    let covered_targets: Vec<Dyadic> = grid.members().into_iter().filter(|w| pairs.contains(&(w.clone(), w.clone()))).collect();
    let bound = param_lower_bound(&LowerBoundQuery { d: 1, delta, p: 1.0 }).value;
    let family = grid.len();
    let counting = pairs.len() as u64 <= 1u64 << alpha;
    let full = covered_targets.len() as u64 == family;
    CoverageReport {
        delta,
        alpha,
        family_size: family,
        realized_count: pairs.len(),
        covered_targets,
        bound,
        bound_satisfied: counting && (!full || alpha as f64 >= bound),
    }
}

/// Enumerate all `2^α` prunings of a scalar network and record which linear
/// maps `x ↦ wx`, `w ∈ S_δ`, appear.
///
/// `g` must map `ℝ → ℝ` without activation quantization, so that its values
/// at `±1` determine it everywhere.
pub fn exhaustive_coverage_check(delta: u32, g: &QNetwork) -> Result<CoverageReport, BoundsError> {
    PrecisionGrid::new(delta).map_err(|e| BoundsError::GridTooFine(e.0))?;
    let alpha = check_network(g)?.len();
    let pairs = coverage_pairs(g, 0..1u64 << alpha)?;
    Ok(coverage_report(delta, alpha, &pairs))
}

/// Sample a `1 → 2·C·k → 1` block on `S_δ`, find a pruning for every
/// `w ∈ S_δ`, and keep only the parameters some pruning uses.
///
/// `None` when some target has no pruning in this block. The result has no
/// activation quantization, so it is a valid input to
/// [`exhaustive_coverage_check`].
pub fn covering_ticket(cfg: &ConstructConfig, seeds: SeedTree) -> Result<Option<QNetwork>, ConstructError> {
    let grid = PrecisionGrid::new(cfg.delta).map_err(|e| ConstructError::GridTooFine(e.0))?;
    let h = 2 * cfg.block_size();
    let mut rng = seeds.named("block").rng();
    let u: Vec<Dyadic> = (0..h).map(|_| grid.sample(&mut rng, false)).collect();
    let v: Vec<Dyadic> = (0..h).map(|_| grid.sample(&mut rng, false)).collect();
    let mut keep_u = vec![false; h];
    let mut keep_v = vec![false; h];
    for w in grid.members() {
        match represent_weight(&w, &u, &v, cfg)?.masks {
            Some((s1, s2)) => {
                keep_u.iter_mut().zip(&s1).for_each(|(k, &b)| *k |= b);
                keep_v.iter_mut().zip(&s2).for_each(|(k, &b)| *k |= b);
            }
            None => return Ok(None),
        }
    }
    let pick = |x: &[Dyadic], keep: &[bool]| -> Vec<Dyadic> {
        x.iter().zip(keep).map(|(x, &k)| if k { x.clone() } else { Dyadic::zero() }).collect()
    };
    let layers = vec![
        QMatrix::from_dyadic(h, 1, grid, &pick(&u, &keep_u))?,
        QMatrix::from_dyadic(1, h, grid, &pick(&v, &keep_v))?,
    ];
    Ok(Some(QNetwork::new(layers, schedule::none(2), grid)?))
}
