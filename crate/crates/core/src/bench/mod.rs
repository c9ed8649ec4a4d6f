//! Dataset loading, spike encoding, metrics and reproducible training runs.

mod dataset;
mod encode;
mod metrics;

pub use dataset::{
    load_csv, load_idx, parse_csv, parse_idx_images, parse_idx_labels, write_csv, DataError,
    Dataset, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use encode::{encode_threshold, EncoderConfig, EncoderKind};
pub use metrics::Metrics;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::learners::{ClassifierModel, LearnError};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("dataset has no labels")]
    Unlabeled,
    #[error("dataset has no samples")]
    Empty,
    #[error("dataset has {data} features, model expects {model}")]
    DimMismatch { data: usize, model: usize },
    #[error("encoder: {0}")]
    Encoder(String),
    #[error("training schedule: {0}")]
    Schedule(String),
    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: LearnError,
    },
}

fn check(model: &ClassifierModel, data: &Dataset, enc: &EncoderConfig) -> Result<(), BenchError> {
    enc.validate().map_err(BenchError::Encoder)?;
    if data.is_empty() {
        return Err(BenchError::Empty);
    }
    if data.labels().is_none() {
        return Err(BenchError::Unlabeled);
    }
    if data.feature_dim() != model.input_dim() {
        return Err(BenchError::DimMismatch {
            data: data.feature_dim(),
            model: model.input_dim(),
        });
    }
    Ok(())
}

/// Top-1 evaluation with non-mutating predictions, fanned out over threads.
pub fn evaluate(
    model: &ClassifierModel,
    data: &Dataset,
    enc: &EncoderConfig,
) -> Result<Metrics, BenchError> {
    check(model, data, enc)?;
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let chunk = data.len().div_ceil(threads);
    let predicted: Vec<String> = std::thread::scope(|scope| {
        let handles: Vec<_> = data
            .samples()
            .chunks(chunk)
            .enumerate()
            .map(|(c, samples)| {
                scope.spawn(move || {
                    samples
                        .iter()
                        .enumerate()
                        .map(|(i, s)| {
                            model
                                .predict(&enc.encode(s))
                                .map(|ranked| ranked[0].label.clone())
                                .map_err(|source| BenchError::Sample {
                                    index: c * chunk + i,
                                    source,
                                })
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("evaluation worker panicked"))
            .collect::<Result<Vec<Vec<_>>, _>>()
            .map(|v| v.concat())
    })?;
    let truth = data.labels().unwrap();
    Ok(Metrics::from_pairs(
        truth
            .iter()
            .map(String::as_str)
            .zip(predicted.iter().map(String::as_str)),
    ))
}

/// Online training mistakes per epoch: samples whose strongest pre-update
/// activation belonged to a wrong label (or that met an untrained label).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TrainReport {
    pub epoch_errors: Vec<usize>,
}

/// Training schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
    /// Pulse-width multiplier applied after every epoch; 1 keeps the core's
    /// pulse width throughout. Shorter pulses mean smaller increments.
    pub anneal: f64,
}

impl TrainConfig {
    pub fn new(epochs: usize, seed: u64) -> Self {
        TrainConfig {
            epochs,
            seed,
            anneal: 1.0,
        }
    }
}

/// Trains for `epochs` passes, shuffling the order each epoch with a
/// ChaCha stream seeded by `seed`. With annealing, epoch `e` runs at
/// `t_pulse * anneal^e`; the original width is restored afterwards.
pub fn train_classifier(
    model: &mut ClassifierModel,
    data: &Dataset,
    enc: &EncoderConfig,
    train: &TrainConfig,
) -> Result<TrainReport, BenchError> {
    check(model, data, enc)?;
    if !(train.anneal > 0.0 && train.anneal <= 1.0) {
        return Err(BenchError::Schedule(format!(
            "anneal factor must be in (0, 1], got {}",
            train.anneal
        )));
    }
    let labels = data.labels().unwrap();
    let encoded: Vec<_> = data.samples().iter().map(|s| enc.encode(s)).collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
    let mut report = TrainReport::default();
    let t0 = model.core().config().t_pulse;
    let mut width = t0;
    let result = (|| {
        for _ in 0..train.epochs {
            model
                .core_mut()
                .set_pulse_width(width)
                .map_err(|e| BenchError::Schedule(e.to_string()))?;
            order.shuffle(&mut rng);
            let mut errors = 0;
            for &i in &order {
                let known = model.labels().len();
                let ys = model
                    .fit_step(&encoded[i], &[&labels[i]])
                    .map_err(|source| BenchError::Sample { index: i, source })?;
                let best = ys[..known]
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1).then_with(|| b.0.cmp(&a.0)))
                    .map(|(k, _)| &model.labels()[k]);
                if best != Some(&labels[i]) {
                    errors += 1;
                }
            }
            report.epoch_errors.push(errors);
            width *= train.anneal;
        }
        Ok(())
    })();
    model
        .core_mut()
        .set_pulse_width(t0)
        .expect("original pulse width was valid");
    result.map(|()| report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{preset_params, Variant};
    use crate::ktcore::{CoreConfig, SpikeSet};
    use crate::learners::ClassifierConfig;

    fn model(dim: usize) -> ClassifierModel {
        let core = CoreConfig::new(1, 1, preset_params(Variant::W));
        ClassifierModel::new(ClassifierConfig::new(dim, 4, core)).unwrap()
    }

    fn blocks() -> Dataset {
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let mut s = vec![0.0; 8];
            let base = if i % 2 == 0 { 0 } else { 4 };
            s[base..base + 4].fill(1.0);
            s[base + i % 4] = 0.0;
            samples.push(s);
            labels.push(if i % 2 == 0 { "even" } else { "odd" }.to_string());
        }
        Dataset::new(samples, Some(labels))
    }

    #[test]
    fn rejects_unusable_data() {
        let m = model(8);
        let enc = EncoderConfig::default();
        let unlabeled = Dataset::new(vec![vec![0.0; 8]], None);
        assert!(matches!(
            evaluate(&m, &unlabeled, &enc),
            Err(BenchError::Unlabeled)
        ));
        let empty = Dataset::new(vec![], Some(vec![]));
        assert!(matches!(evaluate(&m, &empty, &enc), Err(BenchError::Empty)));
        let narrow = Dataset::new(vec![vec![0.0; 3]], Some(vec!["a".into()]));
        assert!(matches!(
            evaluate(&m, &narrow, &enc),
            Err(BenchError::DimMismatch { .. })
        ));
    }

    #[test]
    fn single_label_model_scores_its_share() {
        let mut m = model(2);
        m.fit_step(&SpikeSet::new(0..2), &["A"]).unwrap();
        let data = Dataset::new(
            vec![vec![1.0, 0.0]; 4],
            Some(["A", "A", "A", "B"].map(String::from).to_vec()),
        );
        let metrics = evaluate(&m, &data, &EncoderConfig::default()).unwrap();
        assert_eq!(metrics.accuracy(), 0.75);
    }

    #[test]
    fn trains_separable_blocks() {
        let mut m = model(8);
        let data = blocks();
        let enc = EncoderConfig::default();
        let report = train_classifier(&mut m, &data, &enc, &TrainConfig::new(10, 7)).unwrap();
        assert_eq!(report.epoch_errors.len(), 10);
        assert_eq!(*report.epoch_errors.last().unwrap(), 0);
        assert_eq!(evaluate(&m, &data, &enc).unwrap().accuracy(), 1.0);
    }

    #[test]
    fn training_is_seeded() {
        let data = blocks();
        let enc = EncoderConfig::default();
        let (mut a, mut b) = (model(8), model(8));
        train_classifier(&mut a, &data, &enc, &TrainConfig::new(3, 11)).unwrap();
        train_classifier(&mut b, &data, &enc, &TrainConfig::new(3, 11)).unwrap();
        assert_eq!(a.save(), b.save());
    }

    #[test]
    fn annealing_restores_pulse_width() {
        let mut m = model(8);
        let data = blocks();
        let enc = EncoderConfig::default();
        let t0 = m.core().config().t_pulse;
        let schedule = TrainConfig {
            anneal: 0.5,
            ..TrainConfig::new(4, 1)
        };
        train_classifier(&mut m, &data, &enc, &schedule).unwrap();
        assert_eq!(m.core().config().t_pulse, t0);
        let bad = TrainConfig {
            anneal: 1.5,
            ..schedule
        };
        assert!(matches!(
            train_classifier(&mut m, &data, &enc, &bad),
            Err(BenchError::Schedule(_))
        ));
    }
}
