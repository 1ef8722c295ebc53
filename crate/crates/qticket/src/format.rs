//! On-disk formats. Every JSON document carries `schema: 1` and a
//! [`Provenance`] block; CSV files start with `#` provenance lines.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use qticket_core::bounds::CoverageReport;
use qticket_core::construct::{BranchKind, ConstructionReport, Mode, Uniformize, VerifyReport, WeightDiag};
use qticket_core::dyadic::{Dyadic, PrecisionGrid};
use qticket_core::phase::{Concentration, RowKind, SweepRow};
use qticket_core::qnn::{Mask, MaskSet, QMatrix, QNetwork, Requant};
use qticket_core::rng::RNG_ID;

use crate::error::{Error, Result};
use crate::ini::Ini;

pub const SCHEMA: u32 = 1;
pub const TOOL: &str = "qticket";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub rng: String,
    pub command: String,
    pub seed: u64,
    /// Resolved flags, replayable as a config file section.
    pub config: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(command: &str, seed: u64, config: &[(String, String)]) -> Self {
        Provenance {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            rng: RNG_ID.to_string(),
            command: command.to_string(),
            seed,
            config: config.iter().cloned().collect(),
        }
    }

    pub fn as_ini(&self) -> String {
        let entries: Vec<(String, String)> = self.config.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        Ini::render(&self.command, &entries)
    }

    pub fn csv_header(&self) -> String {
        let mut s = format!("# {} {}\n# rng {}\n# seed {}\n", self.tool, self.version, self.rng, self.seed);
        for line in self.as_ini().lines() {
            s.push_str("# ");
            s.push_str(line);
            s.push('\n');
        }
        s
    }
}

/// Config section embedded in `#` lines of a CSV written by this tool.
pub fn config_from_csv(text: &str) -> String {
    text.lines()
        .filter_map(|l| l.strip_prefix("# "))
        .skip_while(|l| !l.starts_with('['))
        .map(|l| format!("{l}\n"))
        .collect()
}

pub fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("serializable");
    out.push(b'\n');
    out
}

#[derive(Deserialize)]
struct SchemaProbe {
    schema: u32,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let json = |source| Error::Json {
        path: path.display().to_string(),
        source,
    };
    let probe: SchemaProbe = serde_json::from_str(&text).map_err(json)?;
    if probe.schema != SCHEMA {
        return Err(Error::Schema {
            path: path.display().to_string(),
            found: probe.schema,
            expected: SCHEMA,
        });
    }
    serde_json::from_str(&text).map_err(json)
}

// ---------------------------------------------------------------------------
// networks and masks

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RequantJson {
    Keep,
    Quantize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerJson {
    pub rows: usize,
    pub cols: usize,
    /// Row-major integer numerators at the weight grid scale.
    pub numerators: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub schema: u32,
    pub provenance: Provenance,
    pub weight_exponent: u32,
    pub output_exponent: u32,
    pub schedule: Vec<RequantJson>,
    pub layers: Vec<LayerJson>,
}

impl NetworkFile {
    pub fn new(net: &QNetwork, provenance: Provenance) -> Self {
        NetworkFile {
            schema: SCHEMA,
            provenance,
            weight_exponent: net.weight_grid().exponent(),
            output_exponent: net.output_grid().exponent(),
            schedule: net
                .schedule()
                .iter()
                .map(|r| match r {
                    Requant::Keep => RequantJson::Keep,
                    Requant::Quantize => RequantJson::Quantize,
                })
                .collect(),
            layers: net
                .layers()
                .iter()
                .map(|m| LayerJson {
                    rows: m.rows(),
                    cols: m.cols(),
                    numerators: m.raw_data().to_vec(),
                })
                .collect(),
        }
    }

    pub fn network(&self) -> Result<QNetwork> {
        let grid = |k| PrecisionGrid::new(k).map_err(|e| Error::Config(e.to_string()));
        let wg = grid(self.weight_exponent)?;
        let layers = self
            .layers
            .iter()
            .map(|l| QMatrix::new(l.rows, l.cols, wg, l.numerators.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let schedule = self
            .schedule
            .iter()
            .map(|r| match r {
                RequantJson::Keep => Requant::Keep,
                RequantJson::Quantize => Requant::Quantize,
            })
            .collect();
        Ok(QNetwork::new(layers, schedule, grid(self.output_exponent)?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskJson {
    pub rows: usize,
    pub cols: usize,
    /// One string of `0`/`1` per row.
    pub bits: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskFile {
    pub schema: u32,
    pub provenance: Provenance,
    pub masks: Vec<MaskJson>,
}

impl MaskFile {
    pub fn new(masks: &MaskSet, provenance: Provenance) -> Self {
        let enc = |m: &Mask| {
            let (rows, cols) = m.shape();
            MaskJson {
                rows,
                cols,
                bits: (0..rows)
                    .map(|r| (0..cols).map(|c| if m.get(r, c) { '1' } else { '0' }).collect())
                    .collect(),
            }
        };
        MaskFile {
            schema: SCHEMA,
            provenance,
            masks: masks.masks.iter().map(enc).collect(),
        }
    }

    pub fn mask_set(&self) -> Result<MaskSet> {
        let dec = |m: &MaskJson| -> Result<Mask> {
            if m.bits.len() != m.rows || m.bits.iter().any(|r| r.len() != m.cols) {
                return Err(Error::Config(format!("mask rows do not match shape {}x{}", m.rows, m.cols)));
            }
            let bits = m
                .bits
                .iter()
                .flat_map(|r| r.chars())
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(Error::Config(format!("invalid mask character `{other}`"))),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Mask::new(m.rows, m.cols, bits)?)
        };
        Ok(MaskSet {
            masks: self.masks.iter().map(dec).collect::<Result<_>>()?,
        })
    }
}

// ---------------------------------------------------------------------------
// construction reports

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchJson {
    pub kind: String,
    pub candidates: usize,
    pub kept: usize,
    pub found: bool,
    pub off_grid: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightJson {
    pub layer: usize,
    pub row: usize,
    pub col: usize,
    pub copy: usize,
    pub target: String,
    pub found: bool,
    pub branches: Vec<BranchJson>,
}

impl From<&WeightDiag> for WeightJson {
    fn from(d: &WeightDiag) -> Self {
        WeightJson {
            layer: d.layer,
            row: d.row,
            col: d.col,
            copy: d.copy,
            target: d.target.to_string(),
            found: d.rssp_found(),
            branches: d
                .branches
                .iter()
                .map(|b| BranchJson {
                    kind: match b.kind {
                        BranchKind::Green => "green",
                        BranchKind::Red => "red",
                        BranchKind::Copies => "copies",
                    }
                    .to_string(),
                    candidates: b.candidates,
                    kept: b.kept,
                    found: b.found,
                    off_grid: b.off_grid,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MismatchJson {
    pub probe_index: usize,
    pub input: Vec<String>,
    pub target: Vec<String>,
    pub pruned: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyJson {
    pub exact: bool,
    pub probes_checked: usize,
    pub mismatch: Option<MismatchJson>,
    pub target_params: usize,
    pub total_params: usize,
    pub kept_params: usize,
    pub live_params: usize,
    pub sparsity: f64,
    pub copy_fidelity: Option<bool>,
}

fn strings(v: &[Dyadic]) -> Vec<String> {
    v.iter().map(Dyadic::to_string).collect()
}

impl VerifyJson {
    pub fn new(r: &VerifyReport, copy_fidelity: Option<bool>) -> Self {
        VerifyJson {
            exact: r.exact(),
            probes_checked: r.probes.probes_checked,
            mismatch: r.probes.first_mismatch.as_ref().map(|m| MismatchJson {
                probe_index: m.probe_index,
                input: strings(&m.input),
                target: strings(&m.left),
                pruned: strings(&m.right),
            }),
            target_params: r.target_params,
            total_params: r.total_params,
            kept_params: r.kept_params,
            live_params: r.live_params,
            sparsity: r.sparsity,
            copy_fidelity,
        }
    }
}

pub fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Theorem1 => "theorem1",
        Mode::Theorem2 => "theorem2",
    }
}

pub fn uniformize_name(u: Uniformize) -> &'static str {
    match u {
        Uniformize::Raw => "raw",
        Uniformize::Reject => "reject",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema: u32,
    pub provenance: Provenance,
    pub mode: String,
    pub uniformize: String,
    pub delta_t: u32,
    pub delta: u32,
    pub delta_in: u32,
    pub gamma: u32,
    pub c: u32,
    pub c_prime: u32,
    pub probes: usize,
    pub probe_seed: u64,
    pub success: bool,
    pub n_t: u64,
    pub failure_bound: f64,
    pub block_size: usize,
    pub copies: usize,
    pub failed_weights: usize,
    pub verify: Option<VerifyJson>,
    pub weights: Vec<WeightJson>,
}

impl ReportFile {
    pub fn failures(&self) -> impl Iterator<Item = &WeightJson> {
        self.weights.iter().filter(|w| !w.found)
    }
}

pub fn weights_json(r: &ConstructionReport) -> Vec<WeightJson> {
    r.per_weight.iter().map(WeightJson::from).collect()
}

// ---------------------------------------------------------------------------
// instances, coverage, sweeps

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub schema: u32,
    pub elements: Vec<i64>,
    /// Element bound `M`; the largest `|x|` when absent.
    #[serde(default)]
    pub bound: Option<i64>,
    pub target: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveFile {
    pub schema: u32,
    pub provenance: Provenance,
    pub problem: String,
    pub target: i64,
    pub found: bool,
    pub count: u64,
    /// Subset indices (subset sum) or signs (partitioning).
    pub witness: Option<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageFile {
    pub schema: u32,
    pub provenance: Provenance,
    pub delta: u32,
    pub alpha: usize,
    pub family_size: u64,
    pub realized_count: usize,
    pub covered_targets: Vec<String>,
    pub bound: f64,
    pub bound_satisfied: bool,
}

impl CoverageFile {
    pub fn new(r: &CoverageReport, provenance: Provenance) -> Self {
        CoverageFile {
            schema: SCHEMA,
            provenance,
            delta: r.delta,
            alpha: r.alpha,
            family_size: r.family_size,
            realized_count: r.realized_count,
            covered_targets: strings(&r.covered_targets),
            bound: r.bound,
            bound_satisfied: r.bound_satisfied,
        }
    }
}

/// Frozen CSV column order for sweep and moment tables.
pub const SWEEP_COLUMNS: [&str; 18] = [
    "kind",
    "n",
    "M",
    "kappa",
    "lambda_n",
    "target",
    "z",
    "order",
    "trials",
    "successes",
    "empirical_p",
    "ci_low",
    "ci_high",
    "predicted_upper",
    "predicted_lower",
    "mean_count",
    "predicted_mean",
    "leading_order",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRowJson {
    pub kind: String,
    pub n: u32,
    #[serde(rename = "M")]
    pub m: u64,
    pub kappa: f64,
    pub lambda_n: f64,
    pub target: String,
    pub z: Option<i64>,
    pub order: Option<u8>,
    pub trials: u64,
    pub successes: u64,
    pub empirical_p: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub predicted_upper: f64,
    pub predicted_lower: f64,
    pub mean_count: f64,
    pub predicted_mean: f64,
    pub leading_order: bool,
}

impl From<&SweepRow> for SweepRowJson {
    fn from(r: &SweepRow) -> Self {
        let (kind, z, order) = match r.kind {
            RowKind::Success => ("success", None, None),
            RowKind::Moment { z, order } => ("moment", Some(z), Some(order)),
        };
        SweepRowJson {
            kind: kind.to_string(),
            n: r.n,
            m: r.m,
            kappa: r.kappa,
            lambda_n: r.lambda_n,
            target: r.target.clone(),
            z,
            order,
            trials: r.trials,
            successes: r.successes,
            empirical_p: r.empirical_p,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            predicted_upper: r.predicted_upper,
            predicted_lower: r.predicted_lower,
            mean_count: r.mean_count,
            predicted_mean: r.predicted_mean,
            leading_order: r.leading_order,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFile {
    pub schema: u32,
    pub provenance: Provenance,
    pub rows: Vec<SweepRowJson>,
    pub concentration: Option<ConcentrationJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationJson {
    pub n: u32,
    #[serde(rename = "M")]
    pub m: u64,
    pub trials: u64,
    pub inside: u64,
    pub fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub threshold: f64,
    pub hoeffding_floor: f64,
}

impl From<&Concentration> for ConcentrationJson {
    fn from(c: &Concentration) -> Self {
        ConcentrationJson {
            n: c.n,
            m: c.m,
            trials: c.trials,
            inside: c.inside,
            fraction: c.fraction,
            ci_low: c.ci_low,
            ci_high: c.ci_high,
            threshold: c.threshold,
            hoeffding_floor: c.hoeffding_floor,
        }
    }
}

pub fn sweep_csv(rows: &[SweepRow], provenance: &Provenance) -> Vec<u8> {
    let mut out = provenance.csv_header().into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(SWEEP_COLUMNS).expect("in-memory write");
        for r in rows {
            let j = SweepRowJson::from(r);
            let opt = |v: Option<String>| v.unwrap_or_default();
            w.write_record([
                j.kind,
                j.n.to_string(),
                j.m.to_string(),
                j.kappa.to_string(),
                j.lambda_n.to_string(),
                j.target,
                opt(j.z.map(|z| z.to_string())),
                opt(j.order.map(|o| o.to_string())),
                j.trials.to_string(),
                j.successes.to_string(),
                j.empirical_p.to_string(),
                j.ci_low.to_string(),
                j.ci_high.to_string(),
                j.predicted_upper.to_string(),
                j.predicted_lower.to_string(),
                j.mean_count.to_string(),
                j.predicted_mean.to_string(),
                j.leading_order.to_string(),
            ])
            .expect("in-memory write");
        }
        w.flush().expect("in-memory write");
    }
    out
}
