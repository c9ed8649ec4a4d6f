//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion
//! (straight to stderr, so the lines survive test output capture) and fails
//! if any criterion fails.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ktram::device::{mc_trace_oracle, mean_field_trace, preset_params};
use ktram::ktcore::{load_state, save_state};
use ktram::learners::{AnomalyModel, ANOMALY_THRESHOLD};
use ktram::{Core, CoreConfig, Instruction, Mode, Polarity, Pulse, SpikeSet, Synapse, Variant};

fn ktram() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ktram"))
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn run_ok(cmd: &mut Command) -> Result<String, String> {
    let out = cmd.output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "exit {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn accuracy_line(report: &str) -> Result<f64, String> {
    report
        .lines()
        .find_map(|l| l.strip_prefix("accuracy,"))
        .ok_or("no accuracy line")?
        .parse()
        .map_err(|e| format!("{e}"))
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome, String> {
    Ok(Outcome { pass, detail })
}

/// 1: forward/reverse sweep shape and read disturbance, from the CLI trace.
fn sweep_shape(dir: &Path) -> Result<Outcome, String> {
    let path = dir.join("sweep.csv");
    run_ok(
        ktram()
            .args(["device", "sweep", "--preset", "W", "--out"])
            .arg(&path),
    )?;
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    if !lines.next().unwrap_or("").starts_with("# ktram") {
        return Err("missing comment line".into());
    }
    if lines.next() != Some("step,volts,seconds,on_fraction,conductance_S") {
        return Err("bad header".into());
    }
    let rows: Vec<(f64, f64, f64)> = lines
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[1], f[3], f[4])
        })
        .collect();
    if rows.len() != 80 {
        return Err(format!("{} rows, expected 80", rows.len()));
    }
    let p = preset_params(Variant::W);
    let n = p.n_switches as f64;
    let (mut g, mut frac) = (n * 0.5 * (p.w_on + p.w_off), 0.5);
    let (mut up, mut down, mut max_step) = (true, true, 0.0f64);
    let (mut acts, mut reads) = (Vec::new(), Vec::new());
    for (i, &(volts, f, cond)) in rows.iter().enumerate() {
        let dg = cond - g;
        if i % 2 == 0 {
            if volts > 0.0 {
                up &= dg > 0.0;
            } else {
                down &= dg < 0.0;
            }
            max_step = max_step.max((f - frac).abs());
            acts.push(dg.abs());
        } else {
            reads.push(dg.abs());
        }
        g = cond;
        frac = f;
    }
    let mean = acts.iter().sum::<f64>() / acts.len() as f64;
    let worst = reads.iter().cloned().fold(0.0, f64::max) / mean;
    outcome(
        up && down && max_step < 0.5 && worst < 0.1,
        format!("up={up} down={down} max_step={max_step:.3} worst_read/mean_increment={worst:.4}"),
    )
}

/// 2: mean-field vs Monte Carlo, N = 10^4, 100 trials, 200 mixed pulses.
fn oracle_equivalence() -> Result<Outcome, String> {
    let mut params = preset_params(Variant::W);
    params.n_switches = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pulses: Vec<Pulse> = (0..200)
        .map(|_| Pulse::new(rng.random_range(-1.0..1.0), rng.random_range(10e-9..100e-9)))
        .collect();
    let mf = mean_field_trace(&params, &pulses, 0.5).map_err(|e| e.to_string())?;
    let mc = mc_trace_oracle(&params, &pulses, 100, 7).map_err(|e| e.to_string())?;
    let worst = mf
        .iter()
        .zip(&mc)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    outcome(worst <= 0.01, format!("max |mean-field - MC| = {worst:.5}"))
}

/// 3: 1000 forward reads from w = 0.5.
fn forgetful_decay() -> Result<Outcome, String> {
    let p = preset_params(Variant::W);
    // n_a = 29/36, n_b = 7/36 gives G_a = 3 G_b for w_on = 10 w_off
    let mut s = Synapse::from_fractions(Mode::MeanField, 29.0 / 36.0, 7.0 / 36.0, &p);
    let w0 = s.weight(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..1000 {
        s = s
            .read(&p, Polarity::F, 0.2, 50e-9, &mut rng)
            .map_err(|e| e.to_string())?
            .1;
    }
    let w = s.weight(&p);
    outcome(
        (w0 - 0.5).abs() < 1e-12 && w.abs() < 0.05,
        format!("w: {w0:.4} -> {w:.5}"),
    )
}

/// 4: bundled separable CSV, 20 epochs, 10 seeds, all >= 0.99 train accuracy.
fn separable() -> Result<Outcome, String> {
    let data = data_dir().join("separable.csv");
    let mut accs = Vec::new();
    for seed in 1..=10u64 {
        let report = run_ok(
            ktram()
                .args([
                    "--seed",
                    &seed.to_string(),
                    "bench",
                    "classify",
                    "--header",
                    "--epochs",
                    "20",
                    "--data",
                ])
                .arg(&data),
        )?;
        accs.push(accuracy_line(&report)?);
    }
    let worst = accs.iter().cloned().fold(1.0, f64::min);
    outcome(
        worst >= 0.99,
        format!("worst train accuracy over 10 seeds = {worst:.3}"),
    )
}

/// 5: MNIST 10k/2k subset, threshold encoding, error <= 15%.
fn mnist() -> Result<Outcome, String> {
    let d = data_dir().join("mnist");
    let report = run_ok(
        ktram()
            .args([
                "bench",
                "classify",
                "--epochs",
                "8",
                "--t-pulse",
                "1e-8",
                "--margin",
                "0.1",
                "--anneal",
                "0.5",
                "--theta",
                "0.5",
            ])
            .arg("--data")
            .arg(d.join("train-10k-images-idx3-ubyte.gz"))
            .arg("--idx-labels")
            .arg(d.join("train-10k-labels-idx1-ubyte.gz"))
            .arg("--test-data")
            .arg(d.join("t10k-2k-images-idx3-ubyte.gz"))
            .arg("--test-idx-labels")
            .arg(d.join("t10k-2k-labels-idx1-ubyte.gz")),
    )?;
    let samples = report
        .lines()
        .find_map(|l| l.strip_prefix("samples,"))
        .unwrap_or("?")
        .to_string();
    let error = 1.0 - accuracy_line(&report)?;
    outcome(
        error <= 0.15 && samples == "2000",
        format!("test error {error:.4} on {samples} held-out images"),
    )
}

/// 6: FU node alternating two orthogonal patterns.
fn attractor_stability() -> Result<Outcome, String> {
    let p = preset_params(Variant::W);
    let patterns = [SpikeSet::new(1..17), SpikeSet::new(17..33)];
    let mut passing = 0;
    for seed in 0..10u64 {
        let mut core =
            Core::new(CoreConfig::new(1, 33, p).with_seed(seed)).map_err(|e| e.to_string())?;
        let node = core.alloc_node(0..33).map_err(|e| e.to_string())?;
        let mut tail = [Vec::new(), Vec::new()];
        for i in 0..500 {
            let y = core
                .execute(node, &patterns[i % 2], Instruction::FU)
                .map_err(|e| e.to_string())?;
            if i >= 400 {
                tail[i % 2].push(y >= 0.0);
            }
        }
        let stable = tail.iter().all(|signs| {
            let last = *signs.last().unwrap();
            signs.iter().filter(|&&b| b == last).count() as f64 / signs.len() as f64 >= 0.95
        });
        passing += usize::from(stable);
    }
    outcome(passing >= 8, format!("{passing}/10 seeds stable"))
}

/// 7: anomaly separation between disjoint-support families.
fn anomaly_separation() -> Result<Outcome, String> {
    let p = preset_params(Variant::W);
    let sample = |lo: usize, rng: &mut ChaCha8Rng| {
        SpikeSet::new((lo..lo + 16).filter(|_| rng.random_bool(0.8))).with_bias(true)
    };
    let (mut a_flag, mut b_flag, mut n) = (0usize, 0usize, 0usize);
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut model = AnomalyModel::new(32, CoreConfig::new(1, 1, p).with_seed(seed))
            .map_err(|e| e.to_string())?;
        for _ in 0..500 {
            model.fit(&sample(0, &mut rng)).map_err(|e| e.to_string())?;
        }
        for _ in 0..100 {
            let a = model
                .score(&sample(0, &mut rng))
                .map_err(|e| e.to_string())?;
            let b = model
                .score(&sample(16, &mut rng))
                .map_err(|e| e.to_string())?;
            a_flag += usize::from(a > ANOMALY_THRESHOLD);
            b_flag += usize::from(b > ANOMALY_THRESHOLD);
            n += 1;
        }
    }
    let (fa, fb) = (a_flag as f64 / n as f64, b_flag as f64 / n as f64);
    outcome(
        fb >= 0.9 && fa < 0.05,
        format!("family B flagged {fb:.3}, held-out A flagged {fa:.3}"),
    )
}

/// 8: byte-identical outputs for identical seeds, state fixed point, and
/// identical behaviour after a save/load cycle.
fn determinism(dir: &Path) -> Result<Outcome, String> {
    let mut notes = Vec::new();
    let mut ok = true;
    for mode in ["meanfield", "stochastic"] {
        let (a, b) = (
            dir.join(format!("a-{mode}.csv")),
            dir.join(format!("b-{mode}.csv")),
        );
        for path in [&a, &b] {
            run_ok(
                ktram()
                    .args(["--seed", "5", "--mode", mode, "device", "sweep", "--out"])
                    .arg(path),
            )?;
        }
        let same = std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap();
        ok &= same;
        notes.push(format!("{mode} trace identical={same}"));

        let (s1, s2, s3) = (
            dir.join(format!("s1-{mode}.bin")),
            dir.join(format!("s2-{mode}.bin")),
            dir.join(format!("s3-{mode}.bin")),
        );
        for path in [&s1, &s2] {
            run_ok(
                ktram()
                    .args([
                        "--seed", "5", "--mode", mode, "core", "save", "--steps", "25", "--state",
                    ])
                    .arg(path),
            )?;
        }
        run_ok(
            ktram()
                .args(["core", "load", "--state"])
                .arg(&s1)
                .arg("--resave")
                .arg(&s3),
        )?;
        let bytes = std::fs::read(&s1).unwrap();
        let same = bytes == std::fs::read(&s2).unwrap();
        let fixed = bytes == std::fs::read(&s3).unwrap();
        ok &= same && fixed;
        notes.push(format!("{mode} state identical={same} fixed_point={fixed}"));

        let mut original = load_state(&bytes).map_err(|e| e.to_string())?;
        let mut copy = load_state(&save_state(&original)).map_err(|e| e.to_string())?;
        let ids: Vec<_> = original
            .nodes()
            .map(|n| (n.id, n.allocation().to_vec()))
            .collect();
        let mut same_run = true;
        for k in 0..10 {
            let (id, alloc) = &ids[k % ids.len()];
            let spikes = SpikeSet::new(alloc.iter().copied().step_by(k % 3 + 1));
            let instr = Instruction::ALL[k % Instruction::ALL.len()];
            let y1 = original
                .execute(*id, &spikes, instr)
                .map_err(|e| e.to_string())?;
            let y2 = copy
                .execute(*id, &spikes, instr)
                .map_err(|e| e.to_string())?;
            same_run &= y1.to_bits() == y2.to_bits();
        }
        same_run &= save_state(&original) == save_state(&copy);
        ok &= same_run;
        notes.push(format!("{mode} post-load match={same_run}"));
    }
    outcome(ok, notes.join(", "))
}

#[test]
fn acceptance_criteria() {
    let dir = tempfile::tempdir().unwrap();
    type Check<'a> = Box<dyn Fn() -> Result<Outcome, String> + 'a>;
    let criteria: Vec<(&str, Duration, Check)> = vec![
        (
            "1 sweep shape",
            Duration::from_secs(1),
            Box::new(|| sweep_shape(dir.path())),
        ),
        (
            "2 oracle equivalence",
            Duration::from_secs(30),
            Box::new(oracle_equivalence),
        ),
        (
            "3 forgetful decay",
            Duration::from_secs(1),
            Box::new(forgetful_decay),
        ),
        (
            "4 separable classification",
            Duration::from_secs(10),
            Box::new(separable),
        ),
        ("5 MNIST subset", Duration::from_secs(300), Box::new(mnist)),
        (
            "6 attractor stability",
            Duration::from_secs(10),
            Box::new(attractor_stability),
        ),
        (
            "7 anomaly separation",
            Duration::from_secs(30),
            Box::new(anomaly_separation),
        ),
        (
            "8 determinism and persistence",
            Duration::from_secs(60),
            Box::new(|| determinism(dir.path())),
        ),
    ];
    let mut failed = Vec::new();
    let mut err = std::io::stderr();
    for (name, budget, check) in &criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= *budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let verdict = if pass { "PASS" } else { "FAIL" };
        let _ = writeln!(
            err,
            "acceptance {verdict} criterion {name}: {detail} [{:.2?} of {budget:?}]",
            elapsed
        );
        if !pass {
            failed.push(*name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
