//! Trains the threshold-encoded classifier on the bundled MNIST subset.
//!
//! cargo run --release -p ktram-core --example mnist -- \
//!     [epochs] [t_pulse] [margin] [anneal] [seed] [theta]

use std::path::Path;
use std::time::Instant;

use ktram::bench::{evaluate, load_idx, train_classifier, EncoderConfig, TrainConfig};
use ktram::device::preset_params;
use ktram::learners::{ClassifierConfig, ClassifierModel};
use ktram::{CoreConfig, Variant};

fn arg<T: std::str::FromStr>(args: &[String], i: usize, default: T) -> T {
    args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let epochs = arg(&args, 0, 8usize);
    let t_pulse = arg(&args, 1, 1e-8);
    let margin = arg(&args, 2, 0.1);
    let anneal = arg(&args, 3, 0.5);
    let seed = arg(&args, 4, 42u64);
    let theta = arg(&args, 5, 0.5);

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist");
    let train = load_idx(
        &dir.join("train-10k-images-idx3-ubyte.gz"),
        Some(&dir.join("train-10k-labels-idx1-ubyte.gz")),
    )?;
    let test = load_idx(
        &dir.join("t10k-2k-images-idx3-ubyte.gz"),
        Some(&dir.join("t10k-2k-labels-idx1-ubyte.gz")),
    )?;

    let enc = EncoderConfig {
        theta,
        ..Default::default()
    };
    let mut core = CoreConfig::new(1, 1, preset_params(Variant::W)).with_seed(seed);
    core.t_pulse = t_pulse;
    let mut config = ClassifierConfig::new(train.feature_dim(), 10, core);
    config.margin = margin;
    let mut model = ClassifierModel::new(config)?;
    let start = Instant::now();
    let schedule = TrainConfig {
        anneal,
        ..TrainConfig::new(epochs, seed)
    };
    let report = train_classifier(&mut model, &train, &enc, &schedule)?;
    println!("train errors per epoch: {:?}", report.epoch_errors);
    let metrics = evaluate(&model, &test, &enc)?;
    println!(
        "test error {:.4} ({:.1?})",
        metrics.error_rate(),
        start.elapsed()
    );
    Ok(())
}
