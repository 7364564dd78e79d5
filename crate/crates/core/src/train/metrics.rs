use crate::tensor::Tensor;

use super::TrainError;

/// Fraction of `idx` whose arg-max class equals the label. Ties go to the
/// lower class index.
pub fn accuracy(probs: &Tensor, labels: &[usize], idx: &[usize]) -> Result<f64, TrainError> {
    if idx.is_empty() {
        return Err(TrainError::EmptySplit("accuracy"));
    }
    let correct = idx.iter().filter(|&&i| argmax(probs.row(i)) == labels[i]).count();
    Ok(correct as f64 / idx.len() as f64)
}

pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

/// `-Σ log p[i, y_i]` over `idx`.
pub fn cross_entropy_loss(probs: &Tensor, labels: &[usize], idx: &[usize]) -> Result<f64, TrainError> {
    if idx.is_empty() {
        return Err(TrainError::EmptySplit("cross-entropy"));
    }
    Ok(idx.iter().map(|&i| -probs.get(i, labels[i]).ln()).sum())
}

/// Area under the ROC curve from ranks; tied scores share the average rank,
/// which credits a positive-negative tie with one half.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64, TrainError> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(TrainError::EmptySplit("AUROC needs both positives and negatives"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += order[i..=j].iter().filter(|&&k| labels[k]).count() as f64 * avg_rank;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_inverted_auroc() {
        let labels = [true, true, false, false];
        assert_eq!(auroc(&[0.9, 0.8, 0.1, 0.2], &labels).unwrap(), 1.0);
        assert_eq!(auroc(&[0.1, 0.2, 0.9, 0.8], &labels).unwrap(), 0.0);
        assert_eq!(auroc(&[0.5; 4], &labels).unwrap(), 0.5);
    }

    #[test]
    fn accuracy_and_loss() {
        let p = Tensor::from_rows(&[vec![0.5, 0.5], vec![0.2, 0.8]]).unwrap();
        assert_eq!(accuracy(&p, &[0, 1], &[0, 1]).unwrap(), 1.0);
        assert!((cross_entropy_loss(&p, &[0, 1], &[0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(accuracy(&p, &[0, 1], &[]).is_err());
    }
}
