use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ktram::bench::{
    evaluate, load_csv, load_idx, train_classifier, Dataset, EncoderConfig, TrainConfig,
};
use ktram::device::{default_sweep, Device, PulseLimits};
use ktram::ktcore::{load_state, save_state};
use ktram::learners::{AnomalyModel, ClassifierConfig, ClassifierModel, ClusterModel};
use ktram::{Core, Instruction, Pulse, SpikeSet};

use crate::args::*;
use crate::settings::Settings;
use crate::CliError;

/// Stream used for CLI-side sampling (shuffles, random spike sets), apart
/// from the core's stream 0 and the cluster allocation stream 1.
const CLI_STREAM: u64 = 2;

pub const TRACE_HEADER: &str = "step,volts,seconds,on_fraction,conductance_S";

pub fn dispatch(cli: &Cli, env_seed: Option<String>, out: &mut dyn Write) -> Result<(), CliError> {
    let mut settings = Settings::resolve(&cli.global, env_seed)?;
    match &cli.command {
        Command::Device(DeviceCommand::Sweep(a)) => sweep(&mut settings, a, out),
        Command::Bench(BenchCommand::Classify(a)) => classify(&mut settings, a, out),
        Command::Bench(BenchCommand::Anomaly(a)) => anomaly(&mut settings, a, out),
        Command::Bench(BenchCommand::Cluster(a)) => cluster(&mut settings, a, out),
        Command::Core(CoreCommand::Save(a)) => core_save(&mut settings, a, out),
        Command::Core(CoreCommand::Load(a)) => core_load(&settings, a, out),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn emit(text: &str, path: Option<&PathBuf>, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| io_err(p, e)),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Data(format!("stdout: {e}"))),
    }
}

fn say(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Data(format!("stdout: {e}")))
}

/// Reads `volts,seconds` rows. Blank lines and `#` comments are skipped and
/// a non-numeric first row is taken as a header.
pub fn parse_pulses(text: &str, origin: &str) -> Result<Vec<Pulse>, CliError> {
    let mut pulses = Vec::new();
    let mut seen_row = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let numbers: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
        match numbers {
            Some(v) if v.len() == 2 => pulses.push(Pulse::new(v[0], v[1])),
            None if !seen_row => {}
            _ => {
                return Err(CliError::Data(format!(
                    "{origin}: line {}: expected `volts,seconds`, found {raw:?}",
                    idx + 1
                )))
            }
        }
        seen_row = true;
    }
    if pulses.is_empty() {
        return Err(CliError::Data(format!("{origin}: no pulses")));
    }
    Ok(pulses)
}

fn sweep(s: &mut Settings, a: &SweepArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if let Some(start) = a.start {
        s.start = start;
    }
    let (pulses, source) = match &a.pulses {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            (
                parse_pulses(&text, &path.display().to_string())?,
                path.display().to_string(),
            )
        }
        None => (default_sweep(), "default".to_string()),
    };
    if !(0.0..=1.0).contains(&s.start) {
        return Err(CliError::Invariant(format!(
            "start ON fraction {} outside [0, 1]",
            s.start
        )));
    }
    s.device.validate()?;
    let limits = PulseLimits::default();
    for (i, p) in pulses.iter().enumerate() {
        limits
            .check(p.volts, p.seconds)
            .map_err(|e| CliError::Invariant(format!("pulse {i}: {e}")))?;
    }
    let mut device = Device::new(s.device, s.mode, s.start, s.seed);
    let mut text = s.comment_line(
        "device sweep",
        &[("start", s.start.to_string()), ("pulses", source)],
    );
    text.push('\n');
    text.push_str(TRACE_HEADER);
    text.push('\n');
    for (i, p) in pulses.iter().enumerate() {
        device.pulse(p.volts, p.seconds)?;
        let _ = writeln!(
            text,
            "{i},{},{},{},{}",
            p.volts,
            p.seconds,
            device.on_fraction(),
            device.conductance()
        );
    }
    emit(&text, a.out.as_ref(), out)
}

fn load_data(path: &Path, idx_labels: Option<&PathBuf>, header: bool) -> Result<Dataset, CliError> {
    Ok(match idx_labels {
        Some(labels) => load_idx(path, Some(labels))?,
        None => load_csv(path, header)?,
    })
}

fn classify(s: &mut Settings, a: &ClassifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    s.apply_tune(&a.tune);
    if let Some(m) = a.margin {
        s.margin = m;
    }
    if let Some(v) = a.anneal {
        s.anneal = v;
    }
    if a.always_update {
        s.only_on_error = false;
    }
    let header = a.header || s.header;
    let train = load_data(&a.data, a.idx_labels.as_ref(), header)?;
    let test = match &a.test_data {
        Some(path) => load_data(path, a.test_idx_labels.as_ref(), header)?,
        None => train.clone(),
    };
    let labels: BTreeSet<&String> = train
        .labels()
        .ok_or_else(|| {
            CliError::Data(format!("{}: training data has no labels", a.data.display()))
        })?
        .iter()
        .collect();
    let enc = s.encoder();
    let mut config = ClassifierConfig::new(train.feature_dim(), labels.len(), s.core_config(1, 1));
    config.only_on_error = s.only_on_error;
    config.margin = s.margin;
    let mut model = ClassifierModel::new(config)?;
    let schedule = TrainConfig {
        anneal: s.anneal,
        ..TrainConfig::new(s.epochs, s.seed)
    };
    let report = train_classifier(&mut model, &train, &enc, &schedule)?;
    let metrics = evaluate(&model, &test, &enc)?;

    let mut text = classify_comment(s, a, &enc, train.len(), test.len());
    let errors: Vec<String> = report.epoch_errors.iter().map(usize::to_string).collect();
    let _ = writeln!(text, "train_errors,{}", errors.join(","));
    let _ = write!(text, "{metrics}");
    say(out, &text)?;
    if let Some(path) = &a.out {
        fs::write(path, &text).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

fn classify_comment(
    s: &Settings,
    a: &ClassifyArgs,
    enc: &EncoderConfig,
    n_train: usize,
    n_test: usize,
) -> String {
    let mut line = s.comment_line(
        "bench classify",
        &[
            ("data", a.data.display().to_string()),
            (
                "test_data",
                a.test_data
                    .as_ref()
                    .map_or("-".into(), |p| p.display().to_string()),
            ),
            ("encoder", enc.kind.to_string()),
            ("theta", enc.theta.to_string()),
            ("epochs", s.epochs.to_string()),
            ("only_on_error", s.only_on_error.to_string()),
            ("margin", s.margin.to_string()),
            ("anneal", s.anneal.to_string()),
            ("train_samples", n_train.to_string()),
            ("test_samples", n_test.to_string()),
        ],
    );
    line.push('\n');
    line
}

fn shuffled_order(len: usize, epochs: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(CLI_STREAM);
    let mut order = Vec::with_capacity(len * epochs);
    let mut epoch: Vec<usize> = (0..len).collect();
    for _ in 0..epochs {
        epoch.shuffle(&mut rng);
        order.extend_from_slice(&epoch);
    }
    order
}

fn encode_all(data: &Dataset, enc: &EncoderConfig) -> Vec<SpikeSet> {
    data.samples().iter().map(|x| enc.encode(x)).collect()
}

fn anomaly(s: &mut Settings, a: &AnomalyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    s.apply_tune(&a.tune);
    let header = a.header || s.header;
    let train = load_csv(&a.train, header)?;
    let test = load_csv(&a.test, header)?;
    if test.feature_dim() != train.feature_dim() {
        return Err(CliError::Data(format!(
            "{} has {} features, training data has {}",
            a.test.display(),
            test.feature_dim(),
            train.feature_dim()
        )));
    }
    let enc = s.encoder();
    let mut model = AnomalyModel::new(train.feature_dim(), s.core_config(1, 1))?;
    let encoded = encode_all(&train, &enc);
    for i in shuffled_order(train.len(), s.epochs, s.seed) {
        model
            .fit(&encoded[i])
            .map_err(|e| CliError::from(e).with_context(&format!("training sample {i}")))?;
    }

    let mut text = s.comment_line(
        "bench anomaly",
        &[
            ("train", a.train.display().to_string()),
            ("test", a.test.display().to_string()),
            ("theta", enc.theta.to_string()),
            ("epochs", s.epochs.to_string()),
            ("threshold", ktram::learners::ANOMALY_THRESHOLD.to_string()),
        ],
    );
    text.push('\n');
    text.push_str("index,score,anomaly,label\n");
    let mut flagged = 0;
    for (i, x) in encode_all(&test, &enc).iter().enumerate() {
        let score = model
            .score(x)
            .map_err(|e| CliError::from(e).with_context(&format!("test sample {i}")))?;
        let flag = score > ktram::learners::ANOMALY_THRESHOLD;
        flagged += usize::from(flag);
        let label = test.labels().map_or("", |l| l[i].as_str());
        let _ = writeln!(text, "{i},{score},{flag},{label}");
    }
    let st = model.stats();
    say(
        out,
        &format!(
            "fit_samples,{}\nmean,{}\nstd,{}\nflagged,{flagged},{}\n",
            st.count(),
            st.mean(),
            st.std(),
            test.len()
        ),
    )?;
    emit(&text, a.out.as_ref(), out)
}

fn cluster(s: &mut Settings, a: &ClusterArgs, out: &mut dyn Write) -> Result<(), CliError> {
    s.apply_tune(&a.tune);
    if let Some(m) = a.ensemble {
        s.ensemble = m;
    }
    if let Some(k) = a.subset {
        s.subset = Some(k);
    }
    let data = load_csv(&a.data, a.header || s.header)?;
    let subset = s.subset.unwrap_or((data.feature_dim() / 2).max(1));
    let enc = s.encoder();
    let mut model = ClusterModel::new(data.feature_dim(), s.ensemble, subset, s.core_config(1, 1))?;
    let encoded = encode_all(&data, &enc);
    for i in shuffled_order(data.len(), s.epochs, s.seed) {
        model
            .fit(&encoded[i])
            .map_err(|e| CliError::from(e).with_context(&format!("sample {i}")))?;
    }
    let mut text = s.comment_line(
        "bench cluster",
        &[
            ("data", a.data.display().to_string()),
            ("theta", enc.theta.to_string()),
            ("epochs", s.epochs.to_string()),
            ("ensemble", s.ensemble.to_string()),
            ("subset", subset.to_string()),
        ],
    );
    text.push('\n');
    text.push_str("index,signature,label\n");
    let mut distinct = BTreeSet::new();
    for (i, x) in encoded.iter().enumerate() {
        let bits: String = model
            .signature(x)
            .map_err(|e| CliError::from(e).with_context(&format!("sample {i}")))?
            .into_iter()
            .map(|b| if b { '1' } else { '0' })
            .collect();
        let label = data.labels().map_or("", |l| l[i].as_str());
        let _ = writeln!(text, "{i},{bits},{label}");
        distinct.insert(bits);
    }
    say(
        out,
        &format!(
            "samples,{}\ndistinct_signatures,{}\n",
            data.len(),
            distinct.len()
        ),
    )?;
    emit(&text, a.out.as_ref(), out)
}

/// Seeded FU operations: node `k % nodes`, each column spiked with
/// probability one half (bias always on).
fn exercise(core: &mut Core, steps: usize, seed: u64) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(CLI_STREAM);
    let ids: Vec<_> = core
        .nodes()
        .map(|n| (n.id, n.allocation().to_vec()))
        .collect();
    if ids.is_empty() {
        return Ok(());
    }
    for step in 0..steps {
        let (id, alloc) = &ids[step % ids.len()];
        let spikes = SpikeSet::new(alloc.iter().copied().filter(|_| rng.random_bool(0.5)));
        let spikes = if spikes.is_empty() {
            SpikeSet::new([alloc[alloc.len() - 1]])
        } else {
            spikes
        };
        core.execute(*id, &spikes, Instruction::FU)?;
    }
    Ok(())
}

fn summary(core: &Core, path: &Path) -> String {
    let params = core.params();
    let mean_abs = (0..core.size())
        .map(|a| core.synapse(a).unwrap().weight(params).abs())
        .sum::<f64>()
        / core.size() as f64;
    let cfg = core.config();
    format!(
        "state,{}\nrows,{}\ncols,{}\nmode,{}\nnodes,{}\nrng_word_pos,{}\nmean_abs_weight,{mean_abs}\n",
        path.display(),
        cfg.rows,
        cfg.cols,
        cfg.mode,
        core.nodes().count(),
        core.rng_position()
    )
}

fn core_save(s: &mut Settings, a: &CoreSaveArgs, out: &mut dyn Write) -> Result<(), CliError> {
    s.apply_tune(&a.tune);
    let mut core = Core::new(s.core_config(a.rows, a.cols))?;
    for r in 0..a.rows as usize {
        let cols = a.cols as usize;
        core.alloc_node(r * cols..(r + 1) * cols)?;
    }
    exercise(&mut core, a.steps, s.seed)?;
    fs::write(&a.state, save_state(&core)).map_err(|e| io_err(&a.state, e))?;
    say(out, &summary(&core, &a.state))
}

fn core_load(s: &Settings, a: &CoreLoadArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let bytes = fs::read(&a.state).map_err(|e| io_err(&a.state, e))?;
    let mut core =
        load_state(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", a.state.display())))?;
    exercise(&mut core, a.steps, s.seed)?;
    say(out, &summary(&core, &a.state))?;
    if let Some(path) = &a.resave {
        fs::write(path, save_state(&core)).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

impl CliError {
    fn with_context(self, ctx: &str) -> CliError {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{ctx}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{ctx}: {m}")),
            CliError::Invariant(m) => CliError::Invariant(format!("{ctx}: {m}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pulse_file_forms() {
        let p = parse_pulses("# note\nvolts,seconds\n0.8,5e-8\n\n-0.8, 5e-8\n", "x").unwrap();
        assert_eq!(p, [Pulse::new(0.8, 5e-8), Pulse::new(-0.8, 5e-8)]);
        assert!(parse_pulses("0.8,5e-8\nbad,row\n", "x").is_err());
        assert!(parse_pulses("0.8\n", "x").is_err());
        assert!(parse_pulses("volts,seconds\n", "x").is_err());
    }

    #[test]
    fn order_is_seeded_permutation() {
        let a = shuffled_order(5, 2, 1);
        assert_eq!(a, shuffled_order(5, 2, 1));
        let mut first: Vec<_> = a[..5].to_vec();
        first.sort();
        assert_eq!(first, [0, 1, 2, 3, 4]);
    }
}
