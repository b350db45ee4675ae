//! Confusion-matrix accumulation, mIoU and pixel accuracy over label
//! rasters, with a per-class report in percent.

use serde::Serialize;

use crate::error::{Error, Result};

/// K x K confusion counts; rows index ground truth, columns prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![0; num_classes * num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn count(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Elementwise merge; matrices accumulated over disjoint tiles combine
    /// into the whole-raster matrix.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.num_classes != other.num_classes {
            return Err(Error::ShapeMismatch("confusion matrices differ in K".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Accumulates per-pixel counts from a ground-truth/prediction pair.
    /// Pixels whose ground-truth label equals `ignore_label` are skipped.
    pub fn accumulate(&mut self, gt: &[u8], pred: &[u8], ignore_label: Option<u8>) -> Result<()> {
        if gt.len() != pred.len() {
            return Err(Error::ShapeMismatch(format!(
                "gt has {} pixels, pred has {}",
                gt.len(),
                pred.len()
            )));
        }
        let k = self.num_classes as u64;
        for (&g, &p) in gt.iter().zip(pred) {
            if Some(g) == ignore_label {
                continue;
            }
            if (g as u64) >= k || (p as u64) >= k {
                return Err(Error::InvalidValue(format!(
                    "label out of range: gt={g} pred={p} with K={k}"
                )));
            }
            self.counts[g as usize * self.num_classes + p as usize] += 1;
        }
        Ok(())
    }

    fn class_stats(&self, k: usize) -> (u64, u64, u64) {
        let tp = self.count(k, k);
        let fp: u64 = (0..self.num_classes).filter(|&g| g != k).map(|g| self.count(g, k)).sum();
        let fn_: u64 = (0..self.num_classes).filter(|&p| p != k).map(|p| self.count(k, p)).sum();
        (tp, fp, fn_)
    }

    /// Per-class IoU (TP / (TP + FP + FN)) and the mean over defined
    /// classes. Classes never seen in gt or pred have no denominator and are
    /// excluded from the mean, reported as `None`.
    pub fn miou(&self) -> (Vec<Option<f64>>, f64) {
        let per_class: Vec<Option<f64>> = (0..self.num_classes)
            .map(|k| {
                let (tp, fp, fn_) = self.class_stats(k);
                let denom = tp + fp + fn_;
                (denom > 0).then(|| tp as f64 / denom as f64)
            })
            .collect();
        let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
        let mean = if defined.is_empty() {
            0.0
        } else {
            defined.iter().sum::<f64>() / defined.len() as f64
        };
        (per_class, mean)
    }

    /// Overall pixel accuracy: trace / total.
    pub fn accuracy(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::InvalidValue("accuracy of an empty matrix".into()));
        }
        let trace: u64 = (0..self.num_classes).map(|k| self.count(k, k)).sum();
        Ok(trace as f64 / total as f64)
    }
}

/// One row of the per-class report.
#[derive(Debug, Clone, Serialize)]
pub struct ClassIou {
    pub name: String,
    /// IoU in percent, `None` when undefined (class absent everywhere).
    pub iou_pct: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub classes: Vec<ClassIou>,
    pub miou_pct: f64,
    pub accuracy_pct: f64,
}

impl MetricsReport {
    /// Plain-text table: one column per class plus the mean, percentages
    /// with two decimals, undefined classes rendered as a dash.
    pub fn to_table(&self) -> String {
        let mut header = String::new();
        let mut values = String::new();
        for c in &self.classes {
            header.push_str(&format!("{:>10} ", c.name));
            match c.iou_pct {
                Some(v) => values.push_str(&format!("{:>10.2} ", v)),
                None => values.push_str(&format!("{:>10} ", "—")),
            }
        }
        header.push_str(&format!("{:>10} {:>10}", "mIoU", "Acc"));
        values.push_str(&format!("{:>10.2} {:>10.2}", self.miou_pct, self.accuracy_pct));
        format!("{header}\n{values}")
    }
}

/// Builds the per-class report for the given class names.
pub fn per_class_table(cm: &ConfusionMatrix, class_names: &[String]) -> Result<MetricsReport> {
    if class_names.len() != cm.num_classes() {
        return Err(Error::ShapeMismatch(format!(
            "{} class names for K={}",
            class_names.len(),
            cm.num_classes()
        )));
    }
    let (per_class, mean) = cm.miou();
    let classes = class_names
        .iter()
        .zip(&per_class)
        .map(|(name, iou)| ClassIou {
            name: name.clone(),
            iou_pct: iou.map(|v| v * 100.0),
        })
        .collect();
    Ok(MetricsReport {
        classes,
        miou_pct: mean * 100.0,
        accuracy_pct: cm.accuracy()? * 100.0,
    })
}
