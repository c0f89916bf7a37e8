use crate::error::{Error, Result};
use crate::scene::LabelMap;

/// `K x K` pixel counts, rows ground truth, columns prediction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<u64>,
    classes: usize,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix { counts: vec![0; classes * classes], classes }
    }

    pub fn from_counts(counts: Vec<u64>, classes: usize) -> Result<Self> {
        if counts.len() != classes * classes {
            return Err(Error::invalid(format!("expected {} counts for {classes} classes", classes * classes)));
        }
        Ok(ConfusionMatrix { counts, classes })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn add(&mut self, pred: &LabelMap, gt: &LabelMap) -> Result<()> {
        if pred.dims() != gt.dims() {
            return Err(Error::invalid(format!(
                "prediction is {}x{} but ground truth is {}x{}",
                pred.height, pred.width, gt.height, gt.width
            )));
        }
        let k = self.classes;
        for (&p, &g) in pred.labels.iter().zip(&gt.labels) {
            let (p, g) = (p as usize, g as usize);
            if p >= k || g >= k {
                return Err(Error::invalid(format!("label outside [0, {k})")));
            }
            self.counts[g * k + p] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::invalid("confusion matrices differ in class count"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// `TP / (TP + FP + FN)` per class; `None` where the union is empty.
    pub fn iou(&self) -> Vec<Option<f64>> {
        let k = self.classes;
        (0..k)
            .map(|c| {
                let tp = self.get(c, c);
                let row: u64 = (0..k).map(|j| self.get(c, j)).sum();
                let col: u64 = (0..k).map(|i| self.get(i, c)).sum();
                let union = row + col - tp;
                (union > 0).then(|| tp as f64 / union as f64)
            })
            .collect()
    }

    /// Mean IoU over classes with a non-empty union; 0 when nothing was counted.
    pub fn miou(&self) -> f64 {
        let present: Vec<f64> = self.iou().into_iter().flatten().collect();
        if present.is_empty() {
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MiouResult {
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<Option<f64>>,
    pub miou: f64,
}

pub fn miou(pred: &LabelMap, gt: &LabelMap, num_classes: usize) -> Result<MiouResult> {
    if pred.num_classes != gt.num_classes || pred.num_classes != num_classes {
        return Err(Error::invalid(format!(
            "class counts differ: prediction {}, ground truth {}, requested {num_classes}",
            pred.num_classes, gt.num_classes
        )));
    }
    let mut confusion = ConfusionMatrix::new(num_classes);
    confusion.add(pred, gt)?;
    Ok(MiouResult { per_class: confusion.iou(), miou: confusion.miou(), confusion })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lm(v: Vec<u32>, w: usize, k: usize) -> LabelMap {
        let h = v.len() / w;
        LabelMap::new(v, h, w, 0, k).unwrap()
    }

    #[test]
    fn hand_computed_two_by_two() {
        let r = miou(&lm(vec![0, 1, 1, 1], 2, 2), &lm(vec![0, 0, 1, 1], 2, 2), 2).unwrap();
        assert_eq!(r.per_class, vec![Some(0.5), Some(2.0 / 3.0)]);
        assert!((r.miou - 7.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_inverted_and_absent_classes() {
        let gt = lm(vec![0, 1, 0, 1], 2, 5);
        assert_eq!(miou(&gt, &gt, 5).unwrap().miou, 1.0);
        let inv = lm(vec![1, 0, 1, 0], 2, 5);
        let r = miou(&inv, &gt, 5).unwrap();
        assert_eq!(r.miou, 0.0);
        assert_eq!(r.per_class[4], None);
    }

    #[test]
    fn shape_errors() {
        assert!(miou(&lm(vec![0; 4], 2, 2), &lm(vec![0; 4], 4, 2), 2).is_err());
        assert!(miou(&lm(vec![0; 4], 2, 2), &lm(vec![0; 4], 2, 3), 2).is_err());
    }
}
