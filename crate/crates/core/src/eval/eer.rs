use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Operating point at threshold `eta`: accept iff distance <= eta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EerReport {
    pub eer_percent: f64,
    pub threshold: f64,
    pub roc_points: Vec<RocPoint>,
    pub n_same: usize,
    pub n_diff: usize,
}

/// Equal error rate of distance scores. Thresholds sweep the sorted union of
/// scores; FRR counts same-speaker scores above the threshold, FAR counts
/// different-speaker scores at or below it. The EER is `(FAR + FRR) / 2` at
/// the threshold minimizing `|FAR - FRR|`, the smallest such threshold on ties.
pub fn compute_eer(same_scores: &[f64], diff_scores: &[f64]) -> Result<EerReport> {
    if same_scores.is_empty() {
        return Err(Error::EmptyInput("same-speaker scores"));
    }
    if diff_scores.is_empty() {
        return Err(Error::EmptyInput("different-speaker scores"));
    }
    if same_scores.iter().chain(diff_scores).any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("scores must not be NaN".into()));
    }
    let mut same = same_scores.to_vec();
    let mut diff = diff_scores.to_vec();
    same.sort_by(f64::total_cmp);
    diff.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = same.iter().chain(&diff).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let (ns, nd) = (same.len(), diff.len());
    let (mut i_same, mut i_diff) = (0, 0);
    let mut roc_points = Vec::with_capacity(thresholds.len());
    let mut best: Option<(f64, usize)> = None;
    for &eta in &thresholds {
        while i_same < ns && same[i_same] <= eta {
            i_same += 1;
        }
        while i_diff < nd && diff[i_diff] <= eta {
            i_diff += 1;
        }
        let frr = (ns - i_same) as f64 / ns as f64;
        let far = i_diff as f64 / nd as f64;
        let gap = (far - frr).abs();
        if best.is_none_or(|(g, _)| gap < g) {
            best = Some((gap, roc_points.len()));
        }
        roc_points.push(RocPoint {
            threshold: eta,
            far,
            frr,
        });
    }
    let (_, at) = best.expect("at least one threshold");
    let p = roc_points[at];
    Ok(EerReport {
        eer_percent: 100.0 * (p.far + p.frr) / 2.0,
        threshold: p.threshold,
        roc_points,
        n_same: ns,
        n_diff: nd,
    })
}
