//! Quantized bias-free ReLU networks evaluated in exact arithmetic.
//!
//! A network is `W_ℓ σ(W_{ℓ−1} ⋯ σ(W_1 x))` with an explicit per-layer
//! requantization schedule: after layer `i` the activation is optionally
//! floored onto the output grid `γ`. The common mixed-precision patterns
//! (every layer, even layers only, all but the first) are all schedules.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use rand::Rng;

use crate::dyadic::{Dyadic, PrecisionGrid};
use crate::rng::SeedTree;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QnnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("shape mismatch in layer {layer}: expected {expected:?}, got {got:?}")]
    Shape {
        layer: usize,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("layer count mismatch: expected {expected}, got {got}")]
    LayerCount { expected: usize, got: usize },
    #[error("entry {value} at ({row}, {col}) is not on the grid 2^-{exponent}")]
    OffGrid {
        row: usize,
        col: usize,
        value: Dyadic,
        exponent: u32,
    },
    #[error("all layers must share one weight grid")]
    MixedGrids,
    #[error("a network needs at least one layer")]
    Empty,
}

/// Per-layer output directive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Requant {
    Keep,
    /// Floor the layer output onto the network's output grid.
    Quantize,
}

pub mod schedule {
    //! Constructors for the standard mixed-precision schedules.
    use super::Requant;
    use alloc::vec::Vec;

    /// Quantize after every layer.
    pub fn every_layer(depth: usize) -> Vec<Requant> {
        alloc::vec![Requant::Quantize; depth]
    }

    /// Quantize after layers 2, 4, 6, … (1-based).
    pub fn even_layers(depth: usize) -> Vec<Requant> {
        (0..depth)
            .map(|i| if i % 2 == 1 { Requant::Quantize } else { Requant::Keep })
            .collect()
    }

    /// Quantize after every layer except the first.
    pub fn all_but_first(depth: usize) -> Vec<Requant> {
        (0..depth)
            .map(|i| if i == 0 { Requant::Keep } else { Requant::Quantize })
            .collect()
    }

    pub fn none(depth: usize) -> Vec<Requant> {
        alloc::vec![Requant::Keep; depth]
    }
}

/// Weight matrix whose entries live on one precision grid, stored as integer
/// numerators at the grid's scale.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QMatrix {
    rows: usize,
    cols: usize,
    grid: PrecisionGrid,
    data: Vec<i64>,
}

impl QMatrix {
    /// `data` holds row-major numerators at scale `grid.exponent()`.
    pub fn new(rows: usize, cols: usize, grid: PrecisionGrid, data: Vec<i64>) -> Result<Self, QnnError> {
        if data.len() != rows * cols {
            return Err(QnnError::Dimension {
                expected: rows * cols,
                got: data.len(),
            });
        }
        let unit = grid.unit();
        if let Some(i) = data.iter().position(|v| v.abs() > unit) {
            return Err(QnnError::OffGrid {
                row: i / cols,
                col: i % cols,
                value: grid.value(data[i]),
                exponent: grid.exponent(),
            });
        }
        Ok(QMatrix { rows, cols, grid, data })
    }

    pub fn from_dyadic(rows: usize, cols: usize, grid: PrecisionGrid, entries: &[Dyadic]) -> Result<Self, QnnError> {
        if entries.len() != rows * cols {
            return Err(QnnError::Dimension {
                expected: rows * cols,
                got: entries.len(),
            });
        }
        let mut data = Vec::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            match e.numerator_at_i64(grid.exponent()) {
                Some(n) if grid.contains(e) => data.push(n),
                _ => {
                    return Err(QnnError::OffGrid {
                        row: i / cols,
                        col: i % cols,
                        value: e.clone(),
                        exponent: grid.exponent(),
                    })
                }
            }
        }
        Ok(QMatrix { rows, cols, grid, data })
    }

    pub fn zeros(rows: usize, cols: usize, grid: PrecisionGrid) -> Self {
        QMatrix {
            rows,
            cols,
            grid,
            data: vec![0; rows * cols],
        }
    }

    /// Entries drawn i.i.d. uniformly from `S_δ` (or `S_δ ∖ {0}`), row-major.
    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, grid: PrecisionGrid, exclude_zero: bool, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| grid.sample_numerator(rng, exclude_zero))
            .collect();
        QMatrix { rows, cols, grid, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn grid(&self) -> PrecisionGrid {
        self.grid
    }

    /// Numerator of entry `(r, c)` at the grid scale.
    pub fn raw(&self, r: usize, c: usize) -> i64 {
        self.data[r * self.cols + c]
    }

    pub fn raw_data(&self) -> &[i64] {
        &self.data
    }

    pub fn entry(&self, r: usize, c: usize) -> Dyadic {
        self.grid.value(self.raw(r, c))
    }

    pub fn set_raw(&mut self, r: usize, c: usize, v: i64) {
        debug_assert!(v.abs() <= self.grid.unit());
        self.data[r * self.cols + c] = v;
    }

    pub fn nonzero_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// Every entry replaced by `[entry]_{2^-m}`; the declared grid becomes `2^-m`.
    pub fn reduce_precision(&self, m: u32) -> QMatrix {
        let k = self.grid.exponent();
        let grid = PrecisionGrid::new(m).expect("target exponent within range");
        let data = if m >= k {
            self.data.iter().map(|&v| v << (m - k)).collect()
        } else {
            let shift = k - m;
            // arithmetic shift on i64 floors toward −∞
            self.data.iter().map(|&v| v >> shift).collect()
        };
        QMatrix {
            rows: self.rows,
            cols: self.cols,
            grid,
            data,
        }
    }

    pub fn apply_mask(&self, mask: &Mask) -> Result<QMatrix, QnnError> {
        if mask.shape() != self.shape() {
            return Err(QnnError::Shape {
                layer: 0,
                expected: self.shape(),
                got: mask.shape(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(&mask.bits)
            .map(|(&v, &keep)| if keep { v } else { 0 })
            .collect();
        Ok(QMatrix {
            rows: self.rows,
            cols: self.cols,
            grid: self.grid,
            data,
        })
    }

    fn matvec(&self, x: &[Dyadic]) -> Vec<Dyadic> {
        let scale = x.iter().map(Dyadic::scale).max().unwrap_or(0);
        let xs: Vec<BigInt> = x
            .iter()
            .map(|v| v.numerator_at(scale).expect("scale is the maximum"))
            .collect();
        let out_scale = scale + self.grid.exponent();
        (0..self.rows)
            .map(|r| {
                let row = &self.data[r * self.cols..(r + 1) * self.cols];
                let mut acc = BigInt::from(0);
                for (&w, xv) in row.iter().zip(&xs) {
                    if w != 0 {
                        acc += xv * w;
                    }
                }
                Dyadic::new(acc, out_scale)
            })
            .collect()
    }
}

/// Binary pruning mask with the shape of one weight matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self, QnnError> {
        if bits.len() != rows * cols {
            return Err(QnnError::Dimension {
                expected: rows * cols,
                got: bits.len(),
            });
        }
        Ok(Mask { rows, cols, bits })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mask {
            rows,
            cols,
            bits: vec![false; rows * cols],
        }
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Mask {
            rows,
            cols,
            bits: vec![true; rows * cols],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, keep: bool) {
        self.bits[r * self.cols + c] = keep;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// One mask per layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaskSet {
    pub masks: Vec<Mask>,
}

impl MaskSet {
    pub fn ones_for(net: &QNetwork) -> Self {
        MaskSet {
            masks: net.layers.iter().map(|l| Mask::ones(l.rows, l.cols)).collect(),
        }
    }

    pub fn zeros_for(net: &QNetwork) -> Self {
        MaskSet {
            masks: net.layers.iter().map(|l| Mask::zeros(l.rows, l.cols)).collect(),
        }
    }

    pub fn kept(&self) -> usize {
        self.masks.iter().map(Mask::count_ones).sum()
    }

    pub fn total(&self) -> usize {
        self.masks.iter().map(|m| m.rows * m.cols).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QNetwork {
    layers: Vec<QMatrix>,
    schedule: Vec<Requant>,
    output_grid: PrecisionGrid,
}

impl QNetwork {
    pub fn new(layers: Vec<QMatrix>, schedule: Vec<Requant>, output_grid: PrecisionGrid) -> Result<Self, QnnError> {
        if layers.is_empty() {
            return Err(QnnError::Empty);
        }
        if schedule.len() != layers.len() {
            return Err(QnnError::LayerCount {
                expected: layers.len(),
                got: schedule.len(),
            });
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[1].cols != pair[0].rows {
                return Err(QnnError::Shape {
                    layer: i + 1,
                    expected: (pair[1].rows, pair[0].rows),
                    got: pair[1].shape(),
                });
            }
            if pair[1].grid != pair[0].grid {
                return Err(QnnError::MixedGrids);
            }
        }
        Ok(QNetwork {
            layers,
            schedule,
            output_grid,
        })
    }

    pub fn layers(&self) -> &[QMatrix] {
        &self.layers
    }

    pub fn schedule(&self) -> &[Requant] {
        &self.schedule
    }

    pub fn output_grid(&self) -> PrecisionGrid {
        self.output_grid
    }

    pub fn weight_grid(&self) -> PrecisionGrid {
        self.layers[0].grid
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows
    }

    /// Layer widths `d_0, d_1, …, d_ℓ`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(QMatrix::rows));
        d
    }

    pub fn nonzero_params(&self) -> usize {
        self.layers.iter().map(QMatrix::nonzero_count).sum()
    }

    pub fn total_params(&self) -> usize {
        self.layers.iter().map(|l| l.rows * l.cols).sum()
    }

    /// Output of every layer, after ReLU (hidden layers) and scheduled quantization.
    pub fn trace(&self, x: &[Dyadic]) -> Result<Vec<Vec<Dyadic>>, QnnError> {
        if x.len() != self.input_dim() {
            return Err(QnnError::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let last = self.layers.len() - 1;
        let m = self.output_grid.exponent();
        let mut out = Vec::with_capacity(self.layers.len());
        let mut h: Vec<Dyadic> = x.to_vec();
        for (i, (layer, req)) in self.layers.iter().zip(&self.schedule).enumerate() {
            h = layer.matvec(&h);
            if i != last {
                h.iter_mut().for_each(|v| *v = v.relu());
            }
            if *req == Requant::Quantize {
                h.iter_mut().for_each(|v| *v = v.quantize(m));
            }
            out.push(h.clone());
        }
        Ok(out)
    }

    pub fn evaluate(&self, x: &[Dyadic]) -> Result<Vec<Dyadic>, QnnError> {
        Ok(self.trace(x)?.pop().expect("at least one layer"))
    }

    pub fn apply_mask(&self, masks: &MaskSet) -> Result<QNetwork, QnnError> {
        if masks.masks.len() != self.layers.len() {
            return Err(QnnError::LayerCount {
                expected: self.layers.len(),
                got: masks.masks.len(),
            });
        }
        let layers = self
            .layers
            .iter()
            .zip(&masks.masks)
            .enumerate()
            .map(|(i, (l, m))| {
                l.apply_mask(m).map_err(|e| match e {
                    QnnError::Shape { expected, got, .. } => QnnError::Shape {
                        layer: i,
                        expected,
                        got,
                    },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(QNetwork {
            layers,
            schedule: self.schedule.clone(),
            output_grid: self.output_grid,
        })
    }

    pub fn reduce_precision(&self, m: u32) -> QNetwork {
        QNetwork {
            layers: self.layers.iter().map(|l| l.reduce_precision(m)).collect(),
            schedule: self.schedule.clone(),
            output_grid: self.output_grid,
        }
    }
}

pub fn evaluate(net: &QNetwork, x: &[Dyadic]) -> Result<Vec<Dyadic>, QnnError> {
    net.evaluate(x)
}

pub fn apply_mask(net: &QNetwork, masks: &MaskSet) -> Result<QNetwork, QnnError> {
    net.apply_mask(masks)
}

pub fn reduce_precision(net: &QNetwork, m: u32) -> QNetwork {
    net.reduce_precision(m)
}

/// A `δ`-quantized network with weights drawn uniformly from `S_δ`.
pub fn random_network(
    dims: &[usize],
    weight_grid: PrecisionGrid,
    schedule: Vec<Requant>,
    output_grid: PrecisionGrid,
    seeds: SeedTree,
) -> Result<QNetwork, QnnError> {
    if dims.len() < 2 {
        return Err(QnnError::Empty);
    }
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let mut rng = seeds.child(i as u64).rng();
            QMatrix::random(w[1], w[0], weight_grid, false, &mut rng)
        })
        .collect();
    QNetwork::new(layers, schedule, output_grid)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub probe_index: usize,
    pub input: Vec<Dyadic>,
    pub left: Vec<Dyadic>,
    pub right: Vec<Dyadic>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeReport {
    pub probes_checked: usize,
    pub first_mismatch: Option<Mismatch>,
}

impl ProbeReport {
    pub fn equal(&self) -> bool {
        self.first_mismatch.is_none()
    }
}

/// Exact comparison of two networks on every probe; stops at the first mismatch.
pub fn equal_on_probes(a: &QNetwork, b: &QNetwork, probes: &[Vec<Dyadic>]) -> Result<ProbeReport, QnnError> {
    if a.input_dim() != b.input_dim() {
        return Err(QnnError::Dimension {
            expected: a.input_dim(),
            got: b.input_dim(),
        });
    }
    if a.output_dim() != b.output_dim() {
        return Err(QnnError::Dimension {
            expected: a.output_dim(),
            got: b.output_dim(),
        });
    }
    for (i, p) in probes.iter().enumerate() {
        let left = a.evaluate(p)?;
        let right = b.evaluate(p)?;
        if left != right {
            return Ok(ProbeReport {
                probes_checked: i + 1,
                first_mismatch: Some(Mismatch {
                    probe_index: i,
                    input: p.clone(),
                    left,
                    right,
                }),
            });
        }
    }
    Ok(ProbeReport {
        probes_checked: probes.len(),
        first_mismatch: None,
    })
}

/// Number of random probes used for inputs wider than two.
pub const RANDOM_PROBES: usize = 200;
/// Grid exponent of random probe coordinates (`2^-6`).
pub const PROBE_EXPONENT: u32 = 6;

/// Default probe suite.
///
/// For `d0 ≤ 2`: every vector of `S_{1/4}^{d0}`. Otherwise [`RANDOM_PROBES`]
/// seeded vectors uniform on `S_{2^-6}^{d0}`, followed by all `±e_i` and `±e_i ± e_j`.
pub fn default_probes(d0: usize, seeds: SeedTree) -> Vec<Vec<Dyadic>> {
    if d0 <= 2 {
        let g = PrecisionGrid::new(2).expect("small exponent");
        let members = g.members();
        let mut out: Vec<Vec<Dyadic>> = vec![Vec::new()];
        for _ in 0..d0 {
            out = out
                .into_iter()
                .flat_map(|p| {
                    members.iter().map(move |m| {
                        let mut q = p.clone();
                        q.push(m.clone());
                        q
                    })
                })
                .collect();
        }
        return out;
    }
    random_probes(d0, RANDOM_PROBES, seeds)
}

/// `count` seeded vectors uniform on `S_{2^-6}^{d0}`, then [`axis_probes`].
pub fn random_probes(d0: usize, count: usize, seeds: SeedTree) -> Vec<Vec<Dyadic>> {
    let g = PrecisionGrid::new(PROBE_EXPONENT).expect("small exponent");
    let mut rng = seeds.named("probes").rng();
    let mut out: Vec<Vec<Dyadic>> = (0..count)
        .map(|_| (0..d0).map(|_| g.sample(&mut rng, false)).collect())
        .collect();
    out.extend(axis_probes(d0));
    out
}

/// All `±e_i` and `±e_i ± e_j` (`i < j`).
pub fn axis_probes(d0: usize) -> Vec<Vec<Dyadic>> {
    let unit = |i: usize, s: i64| {
        let mut v = vec![Dyadic::zero(); d0];
        v[i] = Dyadic::from_int(s);
        v
    };
    let mut out = Vec::new();
    for i in 0..d0 {
        out.push(unit(i, 1));
        out.push(unit(i, -1));
    }
    for i in 0..d0 {
        for j in i + 1..d0 {
            for si in [1, -1] {
                for sj in [1, -1] {
                    let mut v = unit(i, si);
                    v[j] = Dyadic::from_int(sj);
                    out.push(v);
                }
            }
        }
    }
    out
}
