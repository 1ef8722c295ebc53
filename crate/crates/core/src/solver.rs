//! Exact subset-sum (RSSP) and number-partitioning (RNPP) solvers and counters.
//!
//! Two exact strategies are available: meet-in-the-middle over sorted
//! half-sums (`O(2^(n/2))`, independent of element magnitude) and a
//! value-range dynamic program (cheap when `n · Σ|X_i|` is small). `Auto`
//! picks the DP when its table fits the configured cell budget.
//!
//! Witness convention: among all solutions the one with the smallest index
//! bitmask (bit `i` set iff `X_i` is used) is returned. The empty subset is a
//! solution for target 0.

use alloc::vec;
use alloc::vec::Vec;

use crate::dyadic::{Dyadic, PrecisionGrid};

/// Default meet-in-the-middle size limit.
pub const DEFAULT_MAX_MITM_N: usize = 44;
/// Default DP budget in table cells (`n ·` value-range width).
pub const DEFAULT_DP_CELL_LIMIT: u64 = 1 << 26;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolverError {
    #[error("instance too large: n = {n} exceeds the solver bound {max}")]
    InstanceTooLarge { n: usize, max: usize },
    #[error("invalid instance: element {index} = {value} violates 0 < |x| <= {bound}")]
    InvalidElement { index: usize, value: i64, bound: i64 },
    #[error("value {value} is not representable on the grid 2^-{exponent}")]
    GridMismatch { value: Dyadic, exponent: u32 },
    #[error("value {value} is out of the supported integer range")]
    ValueOutOfRange { value: Dyadic },
}

/// Multiset `X_1..X_n` of non-zero integers with `|X_i| ≤ M`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SsInstance {
    elements: Vec<i64>,
    bound: i64,
}

impl SsInstance {
    pub fn new(elements: Vec<i64>, bound: i64) -> Result<Self, SolverError> {
        if let Some((index, &value)) = elements
            .iter()
            .enumerate()
            .find(|(_, &v)| v == 0 || v.checked_abs().is_none_or(|a| a > bound))
        {
            return Err(SolverError::InvalidElement { index, value, bound });
        }
        Ok(SsInstance { elements, bound })
    }

    /// Instance whose bound is the largest element magnitude.
    pub fn from_elements(elements: Vec<i64>) -> Result<Self, SolverError> {
        let bound = elements.iter().map(|v| v.saturating_abs()).max().unwrap_or(1).max(1);
        Self::new(elements, bound)
    }

    pub fn elements(&self) -> &[i64] {
        &self.elements
    }

    pub fn bound(&self) -> i64 {
        self.bound
    }

    pub fn n(&self) -> usize {
        self.elements.len()
    }

    /// `Λ = Σ X_i`.
    pub fn total(&self) -> i64 {
        self.elements.iter().sum()
    }

    fn range(&self) -> (i64, i64) {
        let lo = self.elements.iter().filter(|&&v| v < 0).sum();
        let hi = self.elements.iter().filter(|&&v| v > 0).sum();
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Witness {
    /// Sorted indices of the chosen subset.
    Subset(Vec<usize>),
    /// Partition signs `σ_i ∈ {−1, 1}`.
    Signs(Vec<i8>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOutcome {
    pub found: bool,
    pub witness: Option<Witness>,
    pub count: Option<u64>,
}

impl SolveOutcome {
    fn none() -> Self {
        SolveOutcome {
            found: false,
            witness: None,
            count: None,
        }
    }

    pub fn subset(&self) -> Option<&[usize]> {
        match &self.witness {
            Some(Witness::Subset(s)) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    #[default]
    Auto,
    MeetInTheMiddle,
    DynamicProgramming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Solver {
    pub strategy: Strategy,
    pub max_mitm_n: usize,
    pub dp_cell_limit: u64,
}

impl Default for Solver {
    fn default() -> Self {
        Solver {
            strategy: Strategy::Auto,
            max_mitm_n: DEFAULT_MAX_MITM_N,
            dp_cell_limit: DEFAULT_DP_CELL_LIMIT,
        }
    }
}

enum Plan {
    Mitm,
    Dp,
}

impl Solver {
    pub fn with_strategy(strategy: Strategy) -> Self {
        Solver {
            strategy,
            ..Solver::default()
        }
    }

    fn dp_cells(inst: &SsInstance) -> u64 {
        let (lo, hi) = inst.range();
        let width = (hi - lo) as u64 + 1;
        width.saturating_mul(inst.n() as u64 + 1)
    }

    fn plan(&self, inst: &SsInstance) -> Result<Plan, SolverError> {
        let mitm_ok = inst.n() <= self.max_mitm_n;
        // u64 counts stay exact for n < 64
        let dp_ok = inst.n() < 64 && Self::dp_cells(inst) <= self.dp_cell_limit;
        let too_large = SolverError::InstanceTooLarge {
            n: inst.n(),
            max: self.max_mitm_n,
        };
        match self.strategy {
            Strategy::MeetInTheMiddle if mitm_ok => Ok(Plan::Mitm),
            Strategy::DynamicProgramming if dp_ok => Ok(Plan::Dp),
            Strategy::Auto if dp_ok => Ok(Plan::Dp),
            Strategy::Auto if mitm_ok => Ok(Plan::Mitm),
            _ => Err(too_large),
        }
    }

    /// `Y_{n,t}`: number of index subsets summing to `t`.
    pub fn count_rssp(&self, inst: &SsInstance, t: i64) -> Result<u64, SolverError> {
        Ok(match self.plan(inst)? {
            Plan::Mitm => mitm_count_subsets(inst.elements(), t),
            Plan::Dp => dp_count_subsets(inst, &[t])[0],
        })
    }

    /// `Z_{n,z}`: number of sign vectors with `|σ · X| = |z|`.
    pub fn count_npp(&self, inst: &SsInstance, z: i64) -> Result<u64, SolverError> {
        let z = z.abs();
        Ok(match self.plan(inst)? {
            Plan::Mitm => mitm_count_signed(inst.elements(), z),
            Plan::Dp => {
                // σ·X = 2·s − Λ where s is the sum of the `+` part.
                let lambda = inst.total();
                if (lambda + z).rem_euclid(2) != 0 {
                    0
                } else if z == 0 {
                    dp_count_subsets(inst, &[lambda / 2])[0]
                } else {
                    let c = dp_count_subsets(inst, &[(lambda + z) / 2, (lambda - z) / 2]);
                    c[0] + c[1]
                }
            }
        })
    }

    /// Does some subset sum to `t`?
    pub fn rssp_solvable(&self, inst: &SsInstance, t: i64) -> Result<bool, SolverError> {
        Ok(match self.plan(inst)? {
            Plan::Mitm => mitm_exists(inst.elements(), t),
            Plan::Dp => {
                let (lo, hi) = inst.range();
                t >= lo && t <= hi && dp_reach(inst).contains((t - lo) as usize)
            }
        })
    }

    /// Subset summing to `t` with the smallest index bitmask.
    pub fn solve_rssp(&self, inst: &SsInstance, t: i64) -> Result<SolveOutcome, SolverError> {
        let mask = match self.plan(inst)? {
            Plan::Mitm => mitm_min_witness(inst.elements(), t),
            Plan::Dp => dp_min_witness(inst, t),
        };
        Ok(match mask {
            None => SolveOutcome::none(),
            Some(idx) => {
                let s: i64 = idx.iter().map(|&i| inst.elements()[i]).sum();
                assert_eq!(s, t, "witness failed self-verification");
                SolveOutcome {
                    found: true,
                    witness: Some(Witness::Subset(idx)),
                    count: None,
                }
            }
        })
    }

    /// Sign vector with `|σ · X| = |z|`, via the subset-sum reduction.
    pub fn solve_npp(&self, inst: &SsInstance, z: i64) -> Result<SolveOutcome, SolverError> {
        let z = z.abs();
        let lambda = inst.total();
        if (lambda + z).rem_euclid(2) != 0 {
            // still validate capacity so callers see a consistent error surface
            self.plan(inst)?;
            return Ok(SolveOutcome::none());
        }
        for s in [(lambda + z) / 2, (lambda - z) / 2] {
            let out = self.solve_rssp(inst, s)?;
            if let Some(sub) = out.subset() {
                let mut signs = vec![-1i8; inst.n()];
                for &i in sub {
                    signs[i] = 1;
                }
                let dot: i64 = signs.iter().zip(inst.elements()).map(|(&s, &x)| i64::from(s) * x).sum();
                assert_eq!(dot.abs(), z, "partition witness failed self-verification");
                return Ok(SolveOutcome {
                    found: true,
                    witness: Some(Witness::Signs(signs)),
                    count: None,
                });
            }
        }
        Ok(SolveOutcome::none())
    }

    /// Subset-sum over dyadic values sharing the grid `2^-k`.
    ///
    /// Values are scaled by `2^k` to integers; zero values are never part of a
    /// witness. Witness indices refer to positions in `values`.
    pub fn solve_rssp_dyadic(
        &self,
        values: &[Dyadic],
        target: &Dyadic,
        grid: PrecisionGrid,
    ) -> Result<SolveOutcome, SolverError> {
        let k = grid.exponent();
        let to_int = |v: &Dyadic| -> Result<i64, SolverError> {
            if v.scale() > k {
                return Err(SolverError::GridMismatch {
                    value: v.clone(),
                    exponent: k,
                });
            }
            v.numerator_at_i64(k)
                .filter(|x| x.unsigned_abs() < (1u64 << 62))
                .ok_or_else(|| SolverError::ValueOutOfRange { value: v.clone() })
        };
        let t = to_int(target)?;
        let mut ints = Vec::with_capacity(values.len());
        let mut index = Vec::with_capacity(values.len());
        for (i, v) in values.iter().enumerate() {
            let x = to_int(v)?;
            if x != 0 {
                ints.push(x);
                index.push(i);
            }
        }
        let inst = SsInstance::from_elements(ints)?;
        let mut out = self.solve_rssp(&inst, t)?;
        if let Some(Witness::Subset(sub)) = &mut out.witness {
            for i in sub.iter_mut() {
                *i = index[*i];
            }
        }
        Ok(out)
    }
}

/// `z = Λ − 2t`: the partition target equivalent to subset-sum target `t`.
pub fn ssp_to_npp_target(inst: &SsInstance, t: i64) -> i64 {
    inst.total() - 2 * t
}

pub fn count_npp(inst: &SsInstance, z: i64) -> Result<u64, SolverError> {
    Solver::default().count_npp(inst, z)
}

pub fn count_rssp(inst: &SsInstance, t: i64) -> Result<u64, SolverError> {
    Solver::default().count_rssp(inst, t)
}

pub fn solve_rssp(inst: &SsInstance, t: i64) -> Result<SolveOutcome, SolverError> {
    Solver::default().solve_rssp(inst, t)
}

pub fn solve_rssp_dyadic(values: &[Dyadic], target: &Dyadic, grid: PrecisionGrid) -> Result<SolveOutcome, SolverError> {
    Solver::default().solve_rssp_dyadic(values, target, grid)
}

// ---------------------------------------------------------------------------
// meet in the middle

/// Subset sums of `xs`, indexed by bitmask.
fn subset_sums(xs: &[i64]) -> Vec<i64> {
    let mut sums = vec![0i64; 1 << xs.len()];
    for mask in 1usize..sums.len() {
        let low = mask.trailing_zeros() as usize;
        sums[mask] = sums[mask & (mask - 1)] + xs[low];
    }
    sums
}

fn sorted(mut v: Vec<i64>) -> Vec<i64> {
    v.sort_unstable();
    v
}

/// Number of pairs `(a, b)` with `a + b = target`, both lists sorted.
fn count_pairs(a: &[i64], b: &[i64], target: i64) -> u64 {
    let mut count = 0u64;
    let (mut i, mut j) = (0usize, b.len());
    while i < a.len() && j > 0 {
        let s = a[i] + b[j - 1];
        if s < target {
            i += 1;
        } else if s > target {
            j -= 1;
        } else {
            let av = a[i];
            let bv = b[j - 1];
            let mut ca = 0u64;
            while i < a.len() && a[i] == av {
                i += 1;
                ca += 1;
            }
            let mut cb = 0u64;
            while j > 0 && b[j - 1] == bv {
                j -= 1;
                cb += 1;
            }
            count += ca * cb;
        }
    }
    count
}

fn split(xs: &[i64]) -> (&[i64], &[i64]) {
    xs.split_at(xs.len() / 2)
}

fn mitm_count_subsets(xs: &[i64], t: i64) -> u64 {
    let (lo, hi) = split(xs);
    count_pairs(&sorted(subset_sums(lo)), &sorted(subset_sums(hi)), t)
}

fn signed_sums(xs: &[i64]) -> Vec<i64> {
    let total: i64 = xs.iter().sum();
    subset_sums(xs).into_iter().map(|s| 2 * s - total).collect()
}

fn mitm_count_signed(xs: &[i64], z: i64) -> u64 {
    let (lo, hi) = split(xs);
    let a = sorted(signed_sums(lo));
    let b = sorted(signed_sums(hi));
    if z == 0 {
        count_pairs(&a, &b, 0)
    } else {
        count_pairs(&a, &b, z) + count_pairs(&a, &b, -z)
    }
}

fn mitm_exists(xs: &[i64], t: i64) -> bool {
    let (lo, hi) = split(xs);
    let a = sorted(subset_sums(lo));
    subset_sums(hi).iter().any(|s| a.binary_search(&(t - s)).is_ok())
}

fn mask_to_indices(mask: u64, offset: usize, out: &mut Vec<usize>) {
    let mut m = mask;
    while m != 0 {
        out.push(offset + m.trailing_zeros() as usize);
        m &= m - 1;
    }
}

fn mitm_min_witness(xs: &[i64], t: i64) -> Option<Vec<usize>> {
    let (lo, hi) = split(xs);
    let mut low: Vec<(i64, u64)> = subset_sums(lo)
        .into_iter()
        .enumerate()
        .map(|(m, s)| (s, m as u64))
        .collect();
    low.sort_unstable();
    let high = subset_sums(hi);
    // High-half bits are the most significant, so the first high mask with a
    // match fixes them; the smallest matching low mask completes the witness.
    for (hmask, hs) in high.iter().enumerate() {
        let need = t - hs;
        let pos = low.partition_point(|&(s, _)| s < need);
        if pos < low.len() && low[pos].0 == need {
            let mut idx = Vec::new();
            mask_to_indices(low[pos].1, 0, &mut idx);
            mask_to_indices(hmask as u64, lo.len(), &mut idx);
            return Some(idx);
        }
    }
    None
}

// ---------------------------------------------------------------------------
// value-range dynamic programming

#[derive(Clone)]
struct Bits {
    words: Vec<u64>,
    len: usize,
}

impl Bits {
    fn new(len: usize) -> Self {
        Bits {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn contains(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    /// `self | (self << shift)` for signed shifts, truncated to `len`.
    fn or_shifted(&self, shift: i64) -> Bits {
        let mut out = self.clone();
        let n = self.words.len();
        let s = shift.unsigned_abs() as usize;
        let (ws, bs) = (s / 64, (s % 64) as u32);
        if shift >= 0 {
            for i in (ws..n).rev() {
                let mut v = self.words[i - ws] << bs;
                if bs > 0 && i > ws {
                    v |= self.words[i - ws - 1] >> (64 - bs);
                }
                out.words[i] |= v;
            }
        } else {
            for i in 0..n.saturating_sub(ws) {
                let mut v = self.words[i + ws] >> bs;
                if bs > 0 && i + ws + 1 < n {
                    v |= self.words[i + ws + 1] << (64 - bs);
                }
                out.words[i] |= v;
            }
        }
        let tail = self.len % 64;
        if tail != 0 {
            let last = out.words.len() - 1;
            out.words[last] &= (1u64 << tail) - 1;
        }
        out
    }
}

/// Prefix reachability tables: `tables[i]` holds subset sums of `X_0..X_{i−1}`,
/// offset by the most negative attainable sum.
fn dp_prefix_tables(inst: &SsInstance) -> Vec<Bits> {
    let (lo, hi) = inst.range();
    let width = (hi - lo) as usize + 1;
    let mut cur = Bits::new(width);
    cur.set((-lo) as usize);
    let mut tables = Vec::with_capacity(inst.n() + 1);
    for &x in inst.elements() {
        let next = cur.or_shifted(x);
        tables.push(cur);
        cur = next;
    }
    tables.push(cur);
    tables
}

fn dp_reach(inst: &SsInstance) -> Bits {
    dp_prefix_tables(inst).pop().expect("non-empty table list")
}

fn dp_min_witness(inst: &SsInstance, t: i64) -> Option<Vec<usize>> {
    let (lo, hi) = inst.range();
    if t < lo || t > hi {
        return None;
    }
    let tables = dp_prefix_tables(inst);
    let mut need = t;
    if !tables[inst.n()].contains((need - lo) as usize) {
        return None;
    }
    let mut idx = Vec::new();
    for i in (0..inst.n()).rev() {
        let without = need - lo;
        if without >= 0 && tables[i].contains(without as usize) {
            continue;
        }
        idx.push(i);
        need -= inst.elements()[i];
    }
    debug_assert_eq!(need, 0);
    idx.reverse();
    Some(idx)
}

fn dp_count_subsets(inst: &SsInstance, targets: &[i64]) -> Vec<u64> {
    let (lo, hi) = inst.range();
    let width = (hi - lo) as usize + 1;
    let mut counts = vec![0u64; width];
    counts[(-lo) as usize] = 1;
    for &x in inst.elements() {
        let s = x.unsigned_abs() as usize;
        if x > 0 {
            for i in (s..width).rev() {
                counts[i] += counts[i - s];
            }
        } else {
            for i in 0..width - s {
                counts[i] += counts[i + s];
            }
        }
    }
    targets
        .iter()
        .map(|&t| if t < lo || t > hi { 0 } else { counts[(t - lo) as usize] })
        .collect()
}
