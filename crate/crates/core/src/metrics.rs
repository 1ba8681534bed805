//! Classification and ranking metrics: nearest-rank percentile labels,
//! average-precision AUPRC, and Kendall's tau-b.

use crate::error::{Error, Result};

/// Binary labels from thresholding affinities at the p-th percentile.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdedLabels {
    pub labels: Vec<u8>,
    pub percentile: f64,
    pub threshold_value: f64,
}

/// Nearest-rank percentile threshold; positives are strictly above it,
/// ties at the threshold fall negative.
pub fn threshold_labels(y: &[f64], p: f64) -> Result<ThresholdedLabels> {
    if !(p > 0.0 && p < 100.0) {
        return Err(Error::Config(format!("percentile {p} outside (0,100)")));
    }
    if y.len() < 2 {
        return Err(Error::EmptyInput("need at least 2 values to threshold".into()));
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((p / 100.0) * y.len() as f64).ceil() as usize; // 1-indexed
    let threshold_value = sorted[rank.clamp(1, y.len()) - 1];
    let labels: Vec<u8> = y.iter().map(|&v| (v > threshold_value) as u8).collect();
    let pos: usize = labels.iter().map(|&l| l as usize).sum();
    if pos == 0 || pos == y.len() {
        return Err(Error::DegenerateLabels(format!(
            "percentile {p} leaves {} positives of {}",
            pos,
            y.len()
        )));
    }
    Ok(ThresholdedLabels {
        labels,
        percentile: p,
        threshold_value,
    })
}

/// Average-precision AUPRC: AP = sum_k dRecall(k) * Precision(k) walking
/// thresholds in descending score order. Tied scores enter as one block.
pub fn auprc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let total_pos: usize = labels.iter().map(|&l| l as usize).sum();
    if total_pos == 0 || total_pos == labels.len() {
        return Err(Error::DegenerateLabels(
            "AUPRC needs both classes present".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let mut ap = 0.0;
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        // advance through the whole tied-score block
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            tp += labels[order[j]] as usize;
            seen += 1;
            j += 1;
        }
        let recall = tp as f64 / total_pos as f64;
        let precision = tp as f64 / seen as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Ok(ap)
}

/// Kendall's tau-b: (C - D) / sqrt((C + D + Tx)(C + D + Ty)) with Tx/Ty the
/// pairs tied only in one argument. O(n log n) via sort + merge-sort
/// discordance counting.
pub fn kendall_tau(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    let n = y_true.len();
    if n != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y_pred.len(),
        });
    }
    if n < 2 {
        return Err(Error::EmptyInput("kendall tau needs length >= 2".into()));
    }
    // sort by (x, y)
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        y_true[a]
            .partial_cmp(&y_true[b])
            .unwrap()
            .then(y_pred[a].partial_cmp(&y_pred[b]).unwrap())
    });
    let x: Vec<f64> = idx.iter().map(|&i| y_true[i]).collect();
    let mut y: Vec<f64> = idx.iter().map(|&i| y_pred[i]).collect();

    let pair = |t: u64| t * (t.saturating_sub(1)) / 2;
    // ties in x and joint ties
    let mut ties_x = 0u64;
    let mut ties_xy = 0u64;
    {
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j < n && x[j] == x[i] {
                j += 1;
            }
            ties_x += pair((j - i) as u64);
            let mut k = i;
            while k < j {
                let mut m = k;
                while m < j && y[m] == y[k] {
                    m += 1;
                }
                ties_xy += pair((m - k) as u64);
                k = m;
            }
            i = j;
        }
    }
    // ties in y
    let mut ties_y = 0u64;
    {
        let mut ys = y.clone();
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j < n && ys[j] == ys[i] {
                j += 1;
            }
            ties_y += pair((j - i) as u64);
            i = j;
        }
    }
    let n0 = pair(n as u64);
    if ties_x == n0 || ties_y == n0 {
        return Err(Error::UndefinedTau("one side is entirely tied".into()));
    }
    // discordant pairs = swaps needed to sort y (ties contribute none)
    let discordant = merge_count_swaps(&mut y);

    let n0 = n0 as f64;
    let n1 = ties_x as f64;
    let n2 = ties_y as f64;
    let n3 = ties_xy as f64;
    let concordant_plus_discordant = n0 - n1 - n2 + n3;
    // C - D, with C + D + ties-only-y = n0 - n1 and C + D + ties-only-x = n0 - n2
    let numerator = concordant_plus_discordant - 2.0 * discordant as f64;
    Ok(numerator / ((n0 - n1) * (n0 - n2)).sqrt())
}

/// Counts inversions (strict) while merge-sorting in place.
fn merge_count_swaps(y: &mut [f64]) -> u64 {
    let n = y.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = y.split_at_mut(mid);
    let mut swaps = merge_count_swaps(left) + merge_count_swaps(right);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, 0);
    while i < left.len() && j < right.len() {
        if right[j] < left[i] {
            swaps += (left.len() - i) as u64;
            merged.push(right[j]);
            j += 1;
        } else {
            merged.push(left[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&left[i..]);
    merged.extend_from_slice(&right[j..]);
    y.copy_from_slice(&merged);
    swaps
}

/// O(n^2) pair-enumeration oracle for tau-b, kept for tests and the
/// acceptance suite. Independent of the fast path above.
pub fn kendall_tau_naive(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    let n = y_true.len();
    if n != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y_pred.len(),
        });
    }
    if n < 2 {
        return Err(Error::EmptyInput("kendall tau needs length >= 2".into()));
    }
    let (mut c, mut d, mut tx_only, mut ty_only) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = y_true[i] - y_true[j];
            let dy = y_pred[i] - y_pred[j];
            if dx == 0.0 && dy == 0.0 {
                // joint tie: contributes nowhere
            } else if dx == 0.0 {
                tx_only += 1;
            } else if dy == 0.0 {
                ty_only += 1;
            } else if dx * dy > 0.0 {
                c += 1;
            } else {
                d += 1;
            }
        }
    }
    let denom = ((c + d + ty_only) as f64 * (c + d + tx_only) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::UndefinedTau("one side is entirely tied".into()));
    }
    Ok((c as f64 - d as f64) / denom)
}

/// O(n^2) naive PR-walk AUPRC oracle: for every distinct score threshold in
/// descending order, count tp/fp by full scans. Tests and acceptance only.
pub fn auprc_naive(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let total_pos: usize = labels.iter().map(|&l| l as usize).sum();
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if total_pos == 0 || total_pos == labels.len() {
        return Err(Error::DegenerateLabels(
            "AUPRC needs both classes present".into(),
        ));
    }
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for &t in &thresholds {
        let mut tp = 0usize;
        let mut picked = 0usize;
        for (s, &l) in scores.iter().zip(labels) {
            if *s >= t {
                picked += 1;
                tp += l as usize;
            }
        }
        let recall = tp as f64 / total_pos as f64;
        let precision = tp as f64 / picked as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}
