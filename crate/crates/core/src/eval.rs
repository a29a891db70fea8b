//! Confusion matrices and support-weighted classification metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::shape("confusion matrix must be square"));
        }
        Ok(Self {
            classes: k,
            counts: rows.concat(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        if self.classes == 0 {
            return Vec::new();
        }
        self.counts.chunks(self.classes).map(<[u64]>::to_vec).collect()
    }

    fn support(&self, class: usize) -> u64 {
        (0..self.classes).map(|p| self.get(class, p)).sum()
    }

    fn predicted(&self, class: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, class)).sum()
    }
}

pub fn confusion(preds: &[usize], labels: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let mut cm = ConfusionMatrix::zeros(classes);
    for (&p, &t) in preds.iter().zip(labels) {
        for v in [p, t] {
            if v >= classes {
                return Err(Error::InvalidLabel { label: v, classes });
            }
        }
        cm.counts[t * classes + p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub averaging: String,
    pub samples: u64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: Vec<Vec<u64>>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision/recall/F1 and their support-weighted means.
/// Classes are named by index; see [`MetricsReport::with_class_names`].
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyEvaluation);
    }
    let mut per_class = Vec::with_capacity(cm.classes);
    let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
    let mut correct = 0;
    for c in 0..cm.classes {
        let tp = cm.get(c, c);
        correct += tp;
        let support = cm.support(c);
        let predicted = cm.predicted(c);
        if predicted == 0 && support > 0 {
            log::warn!("class {c} is never predicted; its precision is reported as 0");
        }
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let w = support as f64 / total as f64;
        wp += w * precision;
        wr += w * recall;
        wf += w * f1;
        per_class.push(ClassMetrics {
            class: c.to_string(),
            precision,
            recall,
            f1,
            support,
        });
    }
    Ok(MetricsReport {
        accuracy: ratio(correct, total),
        precision: wp,
        recall: wr,
        f1: wf,
        averaging: "weighted".to_owned(),
        samples: total,
        per_class,
        confusion: cm.rows(),
    })
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

impl MetricsReport {
    pub fn with_class_names(mut self, names: &[String]) -> Self {
        for (m, n) in self.per_class.iter_mut().zip(names) {
            m.class = n.clone();
        }
        self
    }

    /// Copy with every metric rounded to four decimals.
    pub fn rounded(&self) -> Self {
        let mut r = self.clone();
        for v in [&mut r.accuracy, &mut r.precision, &mut r.recall, &mut r.f1] {
            *v = round4(*v);
        }
        for m in &mut r.per_class {
            m.precision = round4(m.precision);
            m.recall = round4(m.recall);
            m.f1 = round4(m.f1);
        }
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.rounded()).expect("report serialises")
    }
}
