//! Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fail.
//!
//! `INFO` lines report supplementary runs and do not affect the exit status.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use qticket::exec;
use qticket_core::bounds::{self, LowerBoundQuery};
use qticket_core::construct::{ConstructConfig, Mode};
use qticket_core::dyadic::{Dyadic, PrecisionGrid};
use qticket_core::phase::{self, SweepAxis, SweepConfig, SweepMode, TargetRule};
use qticket_core::qnn::{schedule, QMatrix, QNetwork};
use qticket_core::rng::SeedTree;
use qticket_core::solver::{SsInstance, Solver, Strategy};

struct Outcome {
    pass: bool,
    detail: String,
}

fn criterion(results: &mut Vec<bool>, id: u32, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let in_time = limit.is_none_or(|l| took <= l);
    let pass = out.pass && in_time;
    let budget = limit.map_or(String::new(), |l| format!(" / limit {:.0}s", l.as_secs_f64()));
    println!(
        "{} [{id}] {name}: {}{} ({:.1}s{budget})",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        if in_time { "" } else { "; over time limit" },
        took.as_secs_f64()
    );
    results.push(pass);
}

fn info(line: String) {
    println!("INFO {line}");
}

// ---------------------------------------------------------------------------
// construction

const DIMS: [usize; 3] = [3, 3, 3];
const RUNS: u64 = 50;
const BASE_SEED: u64 = 20_000;

fn base_cfg(mode: Mode, c: u32, c_prime: u32) -> ConstructConfig {
    ConstructConfig {
        c,
        c_prime,
        ..ConstructConfig::new(6, 3, 3, 4, mode).with_seed(BASE_SEED)
    }
}

struct BatchStats {
    runs: usize,
    successes: usize,
    exact_successes: usize,
    fidelity_all: bool,
    fidelity_on_success: bool,
    weight_rate: f64,
}

fn batch(cfg: &ConstructConfig) -> BatchStats {
    let out = exec::run_batch(&DIMS, cfg, RUNS, qticket_core::qnn::RANDOM_PROBES).expect("valid configuration");
    let weights: usize = out.iter().map(|r| r.construction.report.per_weight.len()).sum();
    let found: usize = out
        .iter()
        .map(|r| r.construction.report.per_weight.iter().filter(|w| w.rssp_found()).count())
        .sum();
    let ok: Vec<_> = out.iter().filter(|r| r.construction.report.success).collect();
    BatchStats {
        runs: out.len(),
        successes: ok.len(),
        exact_successes: ok.iter().filter(|r| r.verify.exact()).count(),
        fidelity_all: out.iter().all(|r| r.copy_fidelity != Some(false)),
        fidelity_on_success: ok.iter().all(|r| r.copy_fidelity != Some(false)),
        weight_rate: found as f64 / weights.max(1) as f64,
    }
}

fn describe(b: &BatchStats) -> String {
    format!(
        "{}/{} runs succeeded, {}/{} successes bit-exact, per-weight success {:.3}",
        b.successes, b.runs, b.exact_successes, b.successes, b.weight_rate
    )
}

fn c1() -> Outcome {
    let b = batch(&base_cfg(Mode::Theorem1, 8, 6));
    Outcome {
        pass: b.successes * 10 >= b.runs * 9 && b.exact_successes == b.successes,
        detail: format!("{} (need >= 90% and all exact)", describe(&b)),
    }
}

fn c2() -> Outcome {
    let b = batch(&base_cfg(Mode::Theorem2, 6, 6));
    Outcome {
        pass: b.successes * 10 >= b.runs * 8 && b.exact_successes == b.successes && b.fidelity_all,
        detail: format!(
            "{}, replica agreement on every run: {}, on successes: {} (need >= 80%, exact, agreement everywhere)",
            describe(&b),
            b.fidelity_all,
            b.fidelity_on_success
        ),
    }
}

// ---------------------------------------------------------------------------
// solver

fn brute(xs: &[i64]) -> Vec<i64> {
    (0u32..1 << xs.len())
        .map(|mask| xs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, x)| x).sum())
        .collect()
}

fn c3() -> Outcome {
    let mitm = Solver::with_strategy(Strategy::MeetInTheMiddle);
    let auto = Solver::default();
    let mut checked = 0u64;
    let mut bad = Vec::new();
    let mut lemma_ok = 0u64;
    for n in [8u32, 10, 12, 14] {
        let m = 1i64 << (n / 2);
        for i in 0..500u64 {
            let mut rng = SeedTree::new(3).child(u64::from(n)).child(i).rng();
            let xs = phase::draw_signed(n, m as u64, &mut rng);
            let inst = SsInstance::new(xs.clone(), m).unwrap();
            let sums = brute(&xs);
            let lambda = inst.total();
            let t = if rng.gen_bool(0.5) {
                sums[rng.gen_range(0..sums.len())]
            } else {
                rng.gen_range(-(n as i64) * m..=(n as i64) * m)
            };
            let z = (lambda - 2 * t).abs();
            let y_true = sums.iter().filter(|&&s| s == t).count() as u64;
            let z_true = sums.iter().filter(|&&s| (lambda - 2 * s).abs() == z).count() as u64;
            let y = mitm.count_rssp(&inst, t).unwrap();
            let zc = mitm.count_npp(&inst, z).unwrap();
            if y != y_true || zc != z_true || auto.count_rssp(&inst, t).unwrap() != y_true {
                bad.push((n, i));
            }
            let solvable = mitm.rssp_solvable(&inst, t).unwrap();
            if solvable == (mitm.count_npp(&inst, z).unwrap() > 0) && solvable == (y_true > 0) {
                lemma_ok += 1;
            }
            checked += 1;
        }
    }
    Outcome {
        pass: bad.is_empty() && lemma_ok == checked,
        detail: format!(
            "{} instances, {} count mismatches, subset-sum/partition equivalence on {}/{}",
            checked,
            bad.len(),
            lemma_ok,
            checked
        ),
    }
}

// ---------------------------------------------------------------------------
// moments, phase transition, concentration

fn c4() -> Outcome {
    let cfg = SweepConfig {
        n: 16,
        axis: SweepAxis::M(vec![16]),
        target_rule: TargetRule::default(),
        trials: 2000,
        master_seed: 4,
        mode: SweepMode::Moment { order: 1 },
        z_values: vec![0],
    };
    let row = exec::sweep(&cfg, &Solver::default()).unwrap().remove(0);
    let p = qticket_core::borgs::derive_params(16, 16);
    let predicted = 65536.0 * p.gamma_n;
    let rel = (row.mean_count / predicted - 1.0).abs();
    Outcome {
        pass: rel <= 0.15,
        detail: format!(
            "mean Z = {:.2}, predicted {:.2}, relative error {:.4} (need <= 0.15)",
            row.mean_count, predicted, rel
        ),
    }
}

fn c5() -> Outcome {
    let kappas = vec![0.5, 0.75, 1.0, 1.25, 1.5];
    let cfg = SweepConfig {
        n: 20,
        axis: SweepAxis::Kappa(kappas.clone()),
        target_rule: TargetRule::default(),
        trials: 2000,
        master_seed: 5,
        mode: SweepMode::Success,
        z_values: Vec::new(),
    };
    let rows = exec::sweep(&cfg, &Solver::default()).unwrap();
    let ps: Vec<f64> = rows.iter().map(|r| r.empirical_p).collect();
    let first = ps[0];
    let last = *ps.last().unwrap();
    let monotone = ps.windows(2).all(|w| w[1] <= w[0]);
    let curve = kappas.iter().zip(&ps).map(|(k, p)| format!("{k}:{p:.4}")).collect::<Vec<_>>().join(" ");
    Outcome {
        pass: first >= 0.95 && last <= 0.10 && monotone && first - last >= 0.5,
        detail: format!("P(Y>0) by kappa [{curve}], nonincreasing: {monotone}, gap {:.4}", first - last),
    }
}

fn c6() -> Outcome {
    let c = phase::lambda_concentration(100, 256, 5000, SeedTree::new(6).named("concentration"));
    Outcome {
        pass: c.fraction >= c.hoeffding_floor && c.fraction >= 0.99,
        detail: format!(
            "fraction inside {:.4} (95% CI {:.4}..{:.4}), floor {:.4}: {}, 0.99: {}",
            c.fraction,
            c.ci_low,
            c.ci_high,
            c.hoeffding_floor,
            c.fraction >= c.hoeffding_floor,
            c.fraction >= 0.99
        ),
    }
}

// ---------------------------------------------------------------------------
// lower bound

fn scalar_net(layers: Vec<QMatrix>) -> QNetwork {
    let depth = layers.len();
    QNetwork::new(layers, schedule::none(depth), PrecisionGrid::new(8).unwrap()).unwrap()
}

/// Every network with exactly two nonzero weights on `S_{1/2}` across several shapes.
fn two_weight_nets() -> Vec<QNetwork> {
    let g = PrecisionGrid::new(1).unwrap();
    let mat = |r, c, d: Vec<i64>| QMatrix::new(r, c, g, d).unwrap();
    let vals: Vec<i64> = (-2..=2).filter(|&v| v != 0).collect();
    let mut out = Vec::new();
    for &a in &vals {
        for &b in &vals {
            out.push(scalar_net(vec![mat(1, 1, vec![a]), mat(1, 1, vec![b])]));
            out.push(scalar_net(vec![mat(2, 1, vec![a, 0]), mat(1, 2, vec![b, 0])]));
            out.push(scalar_net(vec![mat(2, 1, vec![a, b]), mat(1, 2, vec![0, 0])]));
            out.push(scalar_net(vec![mat(2, 1, vec![0, 0]), mat(1, 2, vec![a, b])]));
            out.push(scalar_net(vec![mat(3, 1, vec![a, 0, 0]), mat(1, 3, vec![0, b, 0])]));
            out.push(scalar_net(vec![mat(1, 1, vec![a]), mat(1, 1, vec![0]), mat(1, 1, vec![b])]));
            out.push(scalar_net(vec![mat(1, 1, vec![a]), mat(1, 1, vec![b]), mat(1, 1, vec![0])]));
        }
    }
    // seeded wider candidates thinned to two nonzero weights
    let mut rng = SeedTree::new(7).named("candidates").rng();
    for _ in 0..200 {
        let h = rng.gen_range(2..6);
        let mut data = vec![0i64; 2 * h];
        let mut placed = 0;
        while placed < 2 {
            let i = rng.gen_range(0..2 * h);
            if data[i] == 0 {
                data[i] = vals[rng.gen_range(0..vals.len())];
                placed += 1;
            }
        }
        out.push(scalar_net(vec![mat(h, 1, data[..h].to_vec()), mat(1, h, data[h..].to_vec())]));
    }
    out
}

fn c7() -> Outcome {
    let nets = two_weight_nets();
    let mut two_cover = 0;
    let mut counting_ok = true;
    for n in &nets {
        let r = exec::coverage_check(1, n).unwrap();
        counting_ok &= r.alpha == 2 && r.realized_count <= 4 && r.bound_satisfied;
        two_cover += usize::from(r.covers_family());
    }
    let cfg = ConstructConfig::new(1, 1, 1, 8, Mode::Theorem1);
    let ticket = exec::find_covering_ticket(&cfg, 0, 50).unwrap();
    let (block_ok, block_detail) = match &ticket {
        Some((seed, t)) => {
            let r = exec::coverage_check(1, t).unwrap();
            (
                r.covers_family() && r.alpha >= 3 && r.bound_satisfied,
                format!("covering block (seed {seed}) keeps alpha = {} >= 3, covers {}/5", r.alpha, r.covered_targets.len()),
            )
        }
        None => (false, "no covering block found in 50 seeds".to_string()),
    };
    let b = bounds::param_lower_bound(&LowerBoundQuery::new(2, 1, 1.0).unwrap());
    let out = Command::new(env!("CARGO_BIN_EXE_qticket"))
        .args(["lower-bound", "--d", "2", "--delta", "0.5", "--p", "1"])
        .output()
        .unwrap();
    let printed = String::from_utf8_lossy(&out.stdout).lines().any(|l| l == "param_lower_bound_integer 10");
    Outcome {
        pass: two_cover == 0 && counting_ok && block_ok && b.integer == 10 && printed,
        detail: format!(
            "{} two-weight networks, {} cover all 5 targets; {}; bound(2, 1/2, 1) = {} (printed: {})",
            nets.len(),
            two_cover,
            block_detail,
            b.integer,
            printed
        ),
    }
}

// ---------------------------------------------------------------------------
// quantization

fn c8() -> Outcome {
    let mut rng = SeedTree::new(8).named("quantize").rng();
    let cases = 100_000;
    let mut failures = 0u64;
    for _ in 0..cases {
        let num: i64 = rng.gen_range(-(1i64 << 40)..=1i64 << 40);
        let scale: u32 = rng.gen_range(0..=40);
        let m: u32 = rng.gen_range(0..=40);
        let w = Dyadic::new(num, scale);
        let q = w.quantize(m);
        let step = Dyadic::pow2_neg(m);
        // floor oracle on 128-bit integers
        let shifted = i128::from(num) << m;
        let floor = shifted.div_euclid(1i128 << scale);
        let oracle = Dyadic::new(floor, m);
        let idempotent = q.quantize(m) == q;
        let sandwich = q <= w && w < &q + &step;
        let on_grid = q.scale() <= m;
        let negative_floor = !w.is_negative() || w.scale() <= m || q < w;
        let other = Dyadic::new(rng.gen_range(-(1i64 << 40)..=1i64 << 40), rng.gen_range(0..=40));
        let monotone = if w <= other { q <= other.quantize(m) } else { other.quantize(m) <= q };
        if !(q == oracle && idempotent && sandwich && on_grid && negative_floor && monotone) {
            failures += 1;
        }
    }
    Outcome {
        pass: failures == 0,
        detail: format!("{cases} cases, {failures} failures"),
    }
}

// ---------------------------------------------------------------------------
// determinism

fn run_twice(dir: &Path, name: &str, args: &[&str], outputs: &[&str]) -> Result<(), String> {
    let mut bytes = Vec::new();
    for pass in ["a", "b"] {
        let root = dir.join(format!("{name}-{pass}"));
        std::fs::create_dir_all(&root).unwrap();
        let args: Vec<String> = args.iter().map(|a| a.replace("{root}", root.to_str().unwrap())).collect();
        let out = Command::new(env!("CARGO_BIN_EXE_qticket")).args(&args).output().unwrap();
        let stdout = out.stdout;
        let mut files = vec![stdout];
        for f in outputs {
            files.push(std::fs::read(root.join(f)).map_err(|e| format!("{name}: {f}: {e}"))?);
        }
        bytes.push(files);
    }
    if bytes[0] == bytes[1] {
        Ok(())
    } else {
        Err(format!("{name} differs between runs"))
    }
}

fn c9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bundle = ["target.json", "big.json", "masks.json", "report.json"];
    let jobs: Vec<(&str, Vec<&str>, Vec<&str>)> = vec![
        (
            "phase",
            vec!["phase", "--n", "16", "--kappa-list", "0.25,0.5,1.0,1.5", "--trials", "300", "--seed", "7", "--out", "{root}/sweep.csv"],
            vec!["sweep.csv"],
        ),
        (
            "phase-json",
            vec!["phase", "--n", "12", "--m-list", "8,64", "--trials", "200", "--out", "{root}/sweep.json"],
            vec!["sweep.json"],
        ),
        (
            "moments",
            vec!["moments", "--n", "14", "--m-list", "16", "--z-list", "0,2", "--order", "2", "--trials", "300", "--out", "{root}/m.csv"],
            vec!["m.csv"],
        ),
        (
            "concentration",
            vec!["concentration", "--n", "100", "--M", "256", "--trials", "500", "--out", "{root}/c.json"],
            vec!["c.json"],
        ),
        (
            "construct-theorem1",
            vec![
                "construct", "--random-target", "3,3,3", "--delta-t", "2^-6", "--delta", "2^-3", "--gamma", "2^-4", "--seed", "1",
                "--bundle-out", "{root}/b",
            ],
            bundle.iter().map(|f| match *f {
                "target.json" => "b/target.json",
                "big.json" => "b/big.json",
                "masks.json" => "b/masks.json",
                _ => "b/report.json",
            }).collect(),
        ),
        (
            "construct-theorem2",
            vec![
                "construct", "--random-target", "3,3,3", "--delta-t", "2^-6", "--delta", "2^-3", "--gamma", "2^-4", "--mode",
                "theorem2", "--C", "6", "--seed", "2", "--bundle-out", "{root}/b",
            ],
            vec!["b/target.json", "b/big.json", "b/masks.json", "b/report.json"],
        ),
        (
            "lower-bound",
            vec!["lower-bound", "--d", "1", "--delta", "0.5", "--exhaustive", "--out", "{root}/cov.json"],
            vec!["cov.json"],
        ),
        (
            "solve",
            vec!["solve", "--elements", "9,-4,7,3,-8,5", "--target", "6", "--problem", "npp", "--out", "{root}/s.json"],
            vec!["s.json"],
        ),
    ];
    let mut errors = Vec::new();
    for (name, args, outs) in &jobs {
        if let Err(e) = run_twice(d, name, args, outs) {
            errors.push(e);
        }
    }
    Outcome {
        pass: errors.is_empty(),
        detail: if errors.is_empty() {
            format!("{} subcommand runs byte-identical on re-run", jobs.len())
        } else {
            errors.join("; ")
        },
    }
}

fn supplementary() {
    let b = batch(&base_cfg(Mode::Theorem1, 24, 6));
    info(format!("[1] same targets with C = 24: {}", describe(&b)));
    let b = batch(&base_cfg(Mode::Theorem2, 24, 6));
    info(format!(
        "[2] same targets with C = 24, C' = 6: {}, replica agreement on successes: {}",
        describe(&b),
        b.fidelity_on_success
    ));
}

fn main() {
    let mut results = Vec::new();
    let secs = Duration::from_secs;
    criterion(&mut results, 1, "exact reconstruction, depth-doubling construction", Some(secs(60)), c1);
    criterion(&mut results, 2, "exact reconstruction, replicated construction", Some(secs(90)), c2);
    criterion(&mut results, 3, "solver counts against brute force", Some(secs(30)), c3);
    criterion(&mut results, 4, "first moment of the partition count", Some(secs(30)), c4);
    criterion(&mut results, 5, "subset-sum phase transition", Some(secs(60)), c5);
    criterion(&mut results, 6, "concentration of the instance sum", None, c6);
    criterion(&mut results, 7, "parameter-counting lower bound", Some(secs(10)), c7);
    criterion(&mut results, 8, "quantization operator properties", None, c8);
    criterion(&mut results, 9, "CLI determinism", None, c9);
    supplementary();
    let failed = results.iter().filter(|p| !**p).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
