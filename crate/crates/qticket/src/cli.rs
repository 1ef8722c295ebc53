//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use qticket_core::bounds::{self, LowerBoundQuery};
use qticket_core::construct::{self, ConstructConfig, Mode, Uniformize, DEFAULT_C, DEFAULT_C_PRIME};
use qticket_core::phase::{self, SweepAxis, SweepConfig, SweepMode, TargetRule};
use qticket_core::qnn::RANDOM_PROBES;
use qticket_core::rng::SeedTree;
use qticket_core::solver::{SsInstance, Solver, Witness};

use crate::delta::{format_delta, parse_delta};
use crate::error::{exit, Error, Result};
use crate::exec;
use crate::format::*;
use crate::ini::Ini;
use crate::output::{write_all_atomic, write_atomic};

#[derive(Parser, Debug)]
#[command(name = "qticket", version, about = "Exact quantized lottery tickets and random subset-sum experiments")]
pub struct Cli {
    /// Read defaults from a `key = value` file; the section named after the subcommand applies.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Success probability of random subset sum across a sweep of M.
    Phase(PhaseArgs),
    /// Empirical moments of partition counts against the leading-order predictions.
    Moments(MomentsArgs),
    /// Concentration of the instance sum.
    Concentration(ConcentrationArgs),
    /// Build a big random network and prune it to a target; writes a bundle.
    Construct(ConstructArgs),
    /// Re-check a bundle from disk.
    Verify(VerifyArgs),
    /// Parameter-counting lower bounds, optionally with the exhaustive d = 1 check.
    LowerBound(LowerBoundArgs),
    /// Solve one subset-sum or partitioning instance.
    Solve(SolveArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Theorem1,
    Theorem2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UniformizeArg {
    Raw,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Problem {
    Rssp,
    Npp,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct PhaseArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(long, value_delimiter = ',', conflicts_with = "m_list")]
    pub kappa_list: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub m_list: Vec<u64>,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `uniform:C` (t uniform on 1..⌊C·M⌋) or `fixed:T`.
    #[arg(long, default_value = "uniform:1")]
    pub target_rule: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct MomentsArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(long, value_delimiter = ',', conflicts_with = "m_list")]
    pub kappa_list: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub m_list: Vec<u64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "0")]
    pub z_list: Vec<i64>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub order: u8,
    #[arg(long, default_value_t = 2000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct ConcentrationArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(long = "M")]
    pub m: u64,
    #[arg(long, default_value_t = 5000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct ConstructArgs {
    /// Target network JSON.
    #[arg(long, conflicts_with = "random_target", required_unless_present = "random_target")]
    pub target: Option<PathBuf>,
    /// Layer widths of a seeded random target, e.g. `3,3,3`.
    #[arg(long, value_delimiter = ',')]
    pub random_target: Vec<usize>,
    #[arg(long, value_parser = parse_delta)]
    pub delta_t: u32,
    #[arg(long, value_parser = parse_delta)]
    pub delta: u32,
    /// Sampling grid of the big network; defaults to `--delta`.
    #[arg(long, value_parser = parse_delta)]
    pub delta_in: Option<u32>,
    #[arg(long, value_parser = parse_delta)]
    pub gamma: u32,
    #[arg(long = "C", alias = "c", default_value_t = DEFAULT_C)]
    pub c: u32,
    #[arg(long = "C-prime", alias = "c-prime", default_value_t = DEFAULT_C_PRIME)]
    pub c_prime: u32,
    #[arg(long, value_enum, default_value_t = ModeArg::Theorem1)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = UniformizeArg::Raw)]
    pub uniformize: UniformizeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random probes for inputs wider than two (narrower inputs use the full grid).
    #[arg(long, default_value_t = RANDOM_PROBES)]
    pub probes: usize,
    #[arg(long)]
    pub bundle_out: PathBuf,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct VerifyArgs {
    #[arg(long)]
    pub bundle_in: PathBuf,
    /// Override the probe count recorded in the bundle.
    #[arg(long)]
    pub probes: Option<usize>,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct LowerBoundArgs {
    #[arg(long)]
    pub d: u32,
    #[arg(long, value_parser = parse_delta)]
    pub delta: u32,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Enumerate every pruning of a scalar network (requires `--d 1`).
    #[arg(long)]
    pub exhaustive: bool,
    /// Network to enumerate; without it a covering block is searched for.
    #[arg(long, requires = "exhaustive")]
    pub network: Option<PathBuf>,
    #[arg(long = "C", alias = "c", default_value_t = DEFAULT_C)]
    pub c: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub attempts: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
#[command(args_override_self = true)]
pub struct SolveArgs {
    #[arg(long, conflicts_with_all = ["elements", "target"])]
    pub instance: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub elements: Vec<i64>,
    #[arg(long, allow_negative_numbers = true)]
    pub target: Option<i64>,
    #[arg(long, value_enum, default_value_t = Problem::Rssp)]
    pub problem: Problem,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

type Config = Vec<(String, String)>;

fn kv(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn axis_entry(kappa: &[f64], m: &[u64]) -> (String, String) {
    if m.is_empty() {
        kv("kappa-list", join(kappa))
    } else {
        kv("m-list", join(m))
    }
}

fn axis(kappa: &[f64], m: &[u64]) -> Result<SweepAxis> {
    if !m.is_empty() {
        if m.contains(&0) {
            return Err(Error::Config("M must be at least 1".into()));
        }
        return Ok(SweepAxis::M(m.to_vec()));
    }
    if kappa.is_empty() {
        return Err(Error::Config("one of --kappa-list or --m-list is required".into()));
    }
    if kappa.iter().any(|k| !k.is_finite() || *k < 0.0) {
        return Err(Error::Config("kappa values must be finite and non-negative".into()));
    }
    Ok(SweepAxis::Kappa(kappa.to_vec()))
}

pub fn parse_target_rule(s: &str) -> Result<TargetRule> {
    let bad = || Error::Config(format!("bad target rule `{s}` (use uniform:C or fixed:T)"));
    match s.split_once(':') {
        None if s == "uniform" => Ok(TargetRule::default()),
        Some(("uniform", c)) => {
            let c: f64 = c.parse().map_err(|_| bad())?;
            if !(c.is_finite() && c > 0.0) {
                return Err(bad());
            }
            Ok(TargetRule::Uniform { c })
        }
        Some(("fixed", t)) => Ok(TargetRule::Fixed(t.parse().map_err(|_| bad())?)),
        _ => Err(bad()),
    }
}

fn pick_format(format: Option<Format>, out: Option<&Path>) -> Format {
    format.unwrap_or(match out.and_then(|p| p.extension()) {
        Some(e) if e == "json" => Format::Json,
        _ => Format::Csv,
    })
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => std::io::stdout().write_all(bytes).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn sweep_output(rows: &[phase::SweepRow], prov: &Provenance, format: Format) -> Vec<u8> {
    match format {
        Format::Csv => sweep_csv(rows, prov),
        Format::Json => to_json(&SweepFile {
            schema: SCHEMA,
            provenance: prov.clone(),
            rows: rows.iter().map(SweepRowJson::from).collect(),
            concentration: None,
        }),
    }
}

fn cmd_phase(a: &PhaseArgs) -> Result<i32> {
    let rule = parse_target_rule(&a.target_rule)?;
    let cfg = SweepConfig {
        n: a.n,
        axis: axis(&a.kappa_list, &a.m_list)?,
        target_rule: rule,
        trials: a.trials,
        master_seed: a.seed,
        mode: SweepMode::Success,
        z_values: Vec::new(),
    };
    if a.n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let config: Config = vec![
        kv("n", a.n),
        axis_entry(&a.kappa_list, &a.m_list),
        kv("trials", a.trials),
        kv("seed", a.seed),
        kv("target-rule", &a.target_rule),
    ];
    let rows = exec::sweep(&cfg, &Solver::default())?;
    let prov = Provenance::new("phase", a.seed, &config);
    let format = pick_format(a.format, a.out.as_deref());
    emit(a.out.as_deref(), &sweep_output(&rows, &prov, format))?;
    Ok(exit::OK)
}

fn cmd_moments(a: &MomentsArgs) -> Result<i32> {
    if a.n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let cfg = SweepConfig {
        n: a.n,
        axis: axis(&a.kappa_list, &a.m_list)?,
        target_rule: TargetRule::default(),
        trials: a.trials,
        master_seed: a.seed,
        mode: SweepMode::Moment { order: a.order },
        z_values: a.z_list.clone(),
    };
    let config: Config = vec![
        kv("n", a.n),
        axis_entry(&a.kappa_list, &a.m_list),
        kv("z-list", join(&a.z_list)),
        kv("order", a.order),
        kv("trials", a.trials),
        kv("seed", a.seed),
    ];
    let rows = exec::sweep(&cfg, &Solver::default())?;
    let prov = Provenance::new("moments", a.seed, &config);
    let format = pick_format(a.format, a.out.as_deref());
    emit(a.out.as_deref(), &sweep_output(&rows, &prov, format))?;
    Ok(exit::OK)
}

fn cmd_concentration(a: &ConcentrationArgs) -> Result<i32> {
    if a.n < 2 || a.m == 0 {
        return Err(Error::Config("need n >= 2 and M >= 1".into()));
    }
    let c = phase::lambda_concentration(a.n, a.m, a.trials, SeedTree::new(a.seed).named("concentration"));
    let config: Config = vec![kv("n", a.n), kv("M", a.m), kv("trials", a.trials), kv("seed", a.seed)];
    let file = SweepFile {
        schema: SCHEMA,
        provenance: Provenance::new("concentration", a.seed, &config),
        rows: Vec::new(),
        concentration: Some(ConcentrationJson::from(&c)),
    };
    emit(a.out.as_deref(), &to_json(&file))?;
    Ok(exit::OK)
}

impl ConstructArgs {
    fn cfg(&self) -> ConstructConfig {
        let mode = match self.mode {
            ModeArg::Theorem1 => Mode::Theorem1,
            ModeArg::Theorem2 => Mode::Theorem2,
        };
        ConstructConfig {
            c: self.c,
            c_prime: self.c_prime,
            uniformize: match self.uniformize {
                UniformizeArg::Raw => Uniformize::Raw,
                UniformizeArg::Reject => Uniformize::Reject,
            },
            ..ConstructConfig::new(self.delta_t, self.delta, self.delta_in.unwrap_or(self.delta), self.gamma, mode).with_seed(self.seed)
        }
    }

    fn config(&self) -> Config {
        let cfg = self.cfg();
        let mut c = Vec::new();
        match &self.target {
            Some(p) => c.push(kv("target", p.display())),
            None => c.push(kv("random-target", join(&self.random_target))),
        }
        c.extend([
            kv("delta-t", format_delta(cfg.delta_t)),
            kv("delta", format_delta(cfg.delta)),
            kv("delta-in", format_delta(cfg.delta_in)),
            kv("gamma", format_delta(cfg.gamma)),
            kv("C", cfg.c),
            kv("C-prime", cfg.c_prime),
            kv("mode", mode_name(cfg.mode)),
            kv("uniformize", uniformize_name(cfg.uniformize)),
            kv("seed", cfg.seed),
            kv("probes", self.probes),
        ]);
        c
    }
}

fn cmd_construct(a: &ConstructArgs) -> Result<i32> {
    let cfg = a.cfg();
    cfg.validate()?;
    let target = match &a.target {
        Some(p) => read_json::<NetworkFile>(p)?.network()?,
        None => {
            if a.random_target.len() < 2 || a.random_target.contains(&0) {
                return Err(Error::Config("--random-target needs at least two positive widths".into()));
            }
            construct::random_target(&a.random_target, cfg.delta_t, cfg.gamma, SeedTree::new(cfg.seed).named("target"))?
        }
    };
    let probes = exec::probe_suite(target.input_dim(), a.probes, cfg.seed);
    let run = exec::run_construction(&target, &cfg, &probes)?;
    let prov = Provenance::new("construct", cfg.seed, &a.config());
    let rep = &run.construction.report;
    let report = ReportFile {
        schema: SCHEMA,
        provenance: prov.clone(),
        mode: mode_name(cfg.mode).into(),
        uniformize: uniformize_name(cfg.uniformize).into(),
        delta_t: cfg.delta_t,
        delta: cfg.delta,
        delta_in: cfg.delta_in,
        gamma: cfg.gamma,
        c: cfg.c,
        c_prime: cfg.c_prime,
        probes: a.probes,
        probe_seed: cfg.seed,
        success: rep.success,
        n_t: rep.n_t,
        failure_bound: rep.failure_bound,
        block_size: rep.block_size,
        copies: rep.copies,
        failed_weights: rep.failures().count(),
        verify: Some(VerifyJson::new(&run.verify, run.copy_fidelity)),
        weights: weights_json(rep),
    };
    write_all_atomic(
        &a.bundle_out,
        &[
            (BUNDLE_TARGET, to_json(&NetworkFile::new(&target, prov.clone()))),
            (BUNDLE_BIG, to_json(&NetworkFile::new(&run.construction.big, prov.clone()))),
            (BUNDLE_MASKS, to_json(&MaskFile::new(&run.construction.masks, prov.clone()))),
            (BUNDLE_REPORT, to_json(&report)),
        ],
    )?;
    eprintln!(
        "construct: success={} failed_weights={} exact={} kept={}/{}",
        rep.success,
        report.failed_weights,
        run.exact(),
        run.verify.kept_params,
        run.verify.total_params
    );
    if !rep.success {
        return Err(Error::ConstructionFailed(format!(
            "{} of {} weights found no subset; report written to {}",
            report.failed_weights,
            rep.per_weight.len(),
            a.bundle_out.join(BUNDLE_REPORT).display()
        )));
    }
    if !run.exact() {
        return Err(Error::Mismatch(mismatch_text(&report.verify)));
    }
    Ok(exit::OK)
}

pub const BUNDLE_TARGET: &str = "target.json";
pub const BUNDLE_BIG: &str = "big.json";
pub const BUNDLE_MASKS: &str = "masks.json";
pub const BUNDLE_REPORT: &str = "report.json";

fn mismatch_text(v: &Option<VerifyJson>) -> String {
    match v.as_ref() {
        Some(VerifyJson { mismatch: Some(m), .. }) => format!(
            "probe {} input [{}]: target [{}] vs pruned [{}]",
            m.probe_index,
            m.input.join(", "),
            m.target.join(", "),
            m.pruned.join(", ")
        ),
        Some(VerifyJson { copy_fidelity: Some(false), .. }) => "replicated outputs disagree".into(),
        _ => "no mismatch recorded".into(),
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<i32> {
    let dir = &a.bundle_in;
    let report: ReportFile = read_json(&dir.join(BUNDLE_REPORT))?;
    let target = read_json::<NetworkFile>(&dir.join(BUNDLE_TARGET))?.network()?;
    let big = read_json::<NetworkFile>(&dir.join(BUNDLE_BIG))?.network()?;
    let masks = read_json::<MaskFile>(&dir.join(BUNDLE_MASKS))?.mask_set()?;
    let probes = exec::probe_suite(target.input_dim(), a.probes.unwrap_or(report.probes), report.probe_seed);
    let v = construct::verify_exact(&target, &big, &masks, report.delta, &probes)?;
    let fidelity = if report.mode == mode_name(Mode::Theorem2) {
        let pruned = big.reduce_precision(report.delta).apply_mask(&masks)?;
        Some(construct::copy_fidelity(&pruned, report.copies, &probes)?)
    } else {
        None
    };
    let json = VerifyJson::new(&v, fidelity);
    emit(None, &to_json(&json))?;
    if json.exact && fidelity != Some(false) {
        Ok(exit::OK)
    } else {
        Err(Error::Mismatch(mismatch_text(&Some(json))))
    }
}

fn cmd_lower_bound(a: &LowerBoundArgs) -> Result<i32> {
    let q = LowerBoundQuery::new(a.d, a.delta, a.p)?;
    let b = bounds::param_lower_bound(&q);
    let w = bounds::width_lower_bound(a.d, a.delta);
    let mut text = format!(
        "family_size {}\nparam_lower_bound {}\nparam_lower_bound_integer {}\nwidth_lower_bound {} (up to a constant)\n",
        bounds::family_size(a.d, a.delta),
        b.value,
        b.integer,
        w.value
    );
    if a.exhaustive {
        if a.d != 1 {
            return Err(Error::Config("the exhaustive check supports --d 1 only".into()));
        }
        let (net, source) = match &a.network {
            Some(p) => (read_json::<NetworkFile>(p)?.network()?, p.display().to_string()),
            None => {
                let cfg = ConstructConfig {
                    c: a.c,
                    ..ConstructConfig::new(a.delta, a.delta, a.delta, a.delta, Mode::Theorem1)
                };
                match exec::find_covering_ticket(&cfg, a.seed, a.attempts)? {
                    Some((s, t)) => (t, format!("covering block, seed {s}")),
                    None => return Err(Error::ConstructionFailed(format!("no covering block in {} attempts", a.attempts))),
                }
            }
        };
        let r = exec::coverage_check(a.delta, &net)?;
        text.push_str(&format!(
            "network {source}\nalpha {}\nrealized_count {}\ncovered_targets {}/{} [{}]\nbound_satisfied {}\n",
            r.alpha,
            r.realized_count,
            r.covered_targets.len(),
            r.family_size,
            r.covered_targets.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", "),
            r.bound_satisfied
        ));
        if let Some(out) = &a.out {
            let mut config = vec![kv("d", a.d), kv("delta", format_delta(a.delta)), kv("p", a.p), kv("exhaustive", true)];
            match &a.network {
                Some(p) => config.push(kv("network", p.display())),
                None => config.extend([kv("C", a.c), kv("seed", a.seed), kv("attempts", a.attempts)]),
            }
            let prov = Provenance::new("lower-bound", a.seed, &config);
            write_atomic(out, &to_json(&CoverageFile::new(&r, prov)))?;
        }
    }
    emit(None, text.as_bytes())?;
    Ok(exit::OK)
}

fn cmd_solve(a: &SolveArgs) -> Result<i32> {
    let (elements, bound, target) = match &a.instance {
        Some(p) => {
            let f: InstanceFile = read_json(p)?;
            (f.elements, f.bound, f.target)
        }
        None => {
            let t = a.target.ok_or_else(|| Error::Config("--target is required without --instance".into()))?;
            (a.elements.clone(), None, t)
        }
    };
    let inst = match bound {
        Some(b) => SsInstance::new(elements.clone(), b)?,
        None => SsInstance::from_elements(elements.clone())?,
    };
    let solver = Solver::default();
    let (out, count) = match a.problem {
        Problem::Rssp => (solver.solve_rssp(&inst, target)?, solver.count_rssp(&inst, target)?),
        Problem::Npp => (solver.solve_npp(&inst, target)?, solver.count_npp(&inst, target)?),
    };
    let witness = out.witness.map(|w| match w {
        Witness::Subset(ix) => ix.into_iter().map(|i| i as i64).collect(),
        Witness::Signs(s) => s.into_iter().map(i64::from).collect(),
    });
    let problem = match a.problem {
        Problem::Rssp => "rssp",
        Problem::Npp => "npp",
    };
    let mut config = vec![kv("problem", problem)];
    match &a.instance {
        Some(p) => config.push(kv("instance", p.display())),
        None => config.extend([kv("elements", join(&elements)), kv("target", target)]),
    }
    let file = SolveFile {
        schema: SCHEMA,
        provenance: Provenance::new("solve", 0, &config),
        problem: problem.into(),
        target,
        found: out.found,
        count,
        witness,
    };
    emit(a.out.as_deref(), &to_json(&file))?;
    Ok(exit::OK)
}

/// Insert `--key value` pairs from the config file right after the subcommand,
/// so flags given on the command line still win.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    let mut i = 0;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if a == "--config" {
            path = args.get(i + 1).map(PathBuf::from);
            break;
        }
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
            break;
        }
        i += 1;
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let mut sub_at = None;
    let mut j = 1;
    while j < args.len() {
        let a = args[j].to_string_lossy();
        if a == "--config" {
            j += 2;
            continue;
        }
        if !a.starts_with('-') {
            sub_at = Some(j);
            break;
        }
        j += 1;
    }
    let Some(sub_at) = sub_at else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let ini = Ini::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let section = args[sub_at].to_string_lossy().into_owned();
    let mut extra = Vec::new();
    for (k, v) in ini.resolved(&section) {
        match v.as_str() {
            "true" => extra.push(OsString::from(format!("--{k}"))),
            "false" => {}
            _ => extra.push(OsString::from(format!("--{k}={v}"))),
        }
    }
    let mut out = args[..=sub_at].to_vec();
    out.extend(extra);
    out.extend(args[sub_at + 1..].iter().cloned());
    Ok(out)
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::CONFIG } else { exit::OK };
        }
    };
    let result = match &cli.command {
        Command::Phase(a) => cmd_phase(a),
        Command::Moments(a) => cmd_moments(a),
        Command::Concentration(a) => cmd_concentration(a),
        Command::Construct(a) => cmd_construct(a),
        Command::Verify(a) => cmd_verify(a),
        Command::LowerBound(a) => cmd_lower_bound(a),
        Command::Solve(a) => cmd_solve(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
