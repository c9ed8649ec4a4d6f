use std::collections::BTreeSet;
use std::fmt;

/// Confusion matrix over a sorted label set; rows are true labels,
/// columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metrics {
    labels: Vec<String>,
    confusion: Vec<Vec<u64>>,
}

impl Metrics {
    pub fn from_pairs<'a, I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let pairs: Vec<_> = pairs.into_iter().collect();
        let labels: Vec<String> = pairs
            .iter()
            .flat_map(|&(t, p)| [t, p])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(String::from)
            .collect();
        let index = |l: &str| labels.binary_search_by(|x| x.as_str().cmp(l)).unwrap();
        let mut confusion = vec![vec![0; labels.len()]; labels.len()];
        for (t, p) in pairs {
            confusion[index(t)][index(p)] += 1;
        }
        Metrics { labels, confusion }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn confusion(&self) -> &[Vec<u64>] {
        &self.confusion
    }

    pub fn count(&self, truth: &str, predicted: &str) -> u64 {
        match (self.index(truth), self.index(predicted)) {
            (Some(t), Some(p)) => self.confusion[t][p],
            _ => 0,
        }
    }

    fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.confusion[i][i]).sum()
    }

    /// Trace over total; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.correct() as f64 / n as f64,
        }
    }

    pub fn error_rate(&self) -> f64 {
        1.0 - self.accuracy()
    }

    /// `None` when the label was never predicted.
    pub fn precision(&self, label: &str) -> Option<f64> {
        let i = self.index(label)?;
        let predicted: u64 = self.confusion.iter().map(|row| row[i]).sum();
        (predicted > 0).then(|| self.confusion[i][i] as f64 / predicted as f64)
    }

    /// `None` when the label never occurs as truth.
    pub fn recall(&self, label: &str) -> Option<f64> {
        let i = self.index(label)?;
        let actual: u64 = self.confusion[i].iter().sum();
        (actual > 0).then(|| self.confusion[i][i] as f64 / actual as f64)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |v| format!("{v:.4}"))
}

impl fmt::Display for Metrics {
    /// Line-oriented report: accuracy, per-label precision/recall, then the
    /// confusion matrix as `confusion,<true>,<counts..>` rows.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "accuracy,{:.6}", self.accuracy())?;
        writeln!(f, "samples,{}", self.total())?;
        for l in &self.labels {
            writeln!(
                f,
                "label,{l},precision,{},recall,{}",
                opt(self.precision(l)),
                opt(self.recall(l))
            )?;
        }
        writeln!(f, "confusion_labels,{}", self.labels.join(","))?;
        for (l, row) in self.labels.iter().zip(&self.confusion) {
            let row: Vec<String> = row.iter().map(u64::to_string).collect();
            writeln!(f, "confusion,{l},{}", row.join(","))?;
        }
        Ok(())
    }
}
