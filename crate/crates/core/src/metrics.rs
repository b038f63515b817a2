//! Segmentation evaluation metrics: Dice, absolute volume difference,
//! lesion-wise F1, and absolute lesion count difference.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::components::{label_components, Connectivity, LabelMap3D};
use crate::error::{Error, Result};
use crate::volume::BinaryMask3D;

/// All four leaderboard metrics for one (prediction, ground truth) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dice: f64,
    pub avd_ml: f64,
    pub f1_lesionwise: f64,
    pub alcd: usize,
    pub n_pred_lesions: usize,
    pub n_gt_lesions: usize,
}

/// Outcome of lesion matching behind the F1 score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LesionMatching {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Matched (pred label, gt label, overlap voxels), sorted by pred label.
    pub pairs: Vec<(u32, u32, usize)>,
}

fn check_pair(pred: &BinaryMask3D, gt: &BinaryMask3D) -> Result<()> {
    if pred.geometry.compatible(&gt.geometry) {
        Ok(())
    } else {
        Err(Error::GeometryMismatch(
            pred.geometry.mismatch_message(&gt.geometry),
        ))
    }
}

/// Dice overlap 2|P∩G| / (|P|+|G|); 1.0 when both masks are empty.
pub fn dice(pred: &BinaryMask3D, gt: &BinaryMask3D) -> Result<f64> {
    check_pair(pred, gt)?;
    let mut intersection = 0usize;
    let mut p = 0usize;
    let mut g = 0usize;
    for (&a, &b) in pred.bits.iter().zip(gt.bits.iter()) {
        p += a as usize;
        g += b as usize;
        intersection += (a && b) as usize;
    }
    if p + g == 0 {
        Ok(1.0)
    } else {
        Ok(2.0 * intersection as f64 / (p + g) as f64)
    }
}

/// Absolute volume difference in millilitres, from the voxel spacing.
pub fn avd(pred: &BinaryMask3D, gt: &BinaryMask3D) -> Result<f64> {
    check_pair(pred, gt)?;
    let diff = pred.count_true() as f64 - gt.count_true() as f64;
    Ok(diff.abs() * pred.geometry.voxel_volume_mm3() / 1000.0)
}

/// Lesion-wise F1 with one-to-one matching between predicted and ground
/// truth components. A pair is matchable when it shares at least
/// `min_overlap` voxels; the matching is seeded greedily in decreasing
/// overlap order and then augmented, so the detection count equals the
/// maximum achievable by any one-to-one matching. Both sides lesion-free
/// scores 1.0.
pub fn lesionwise_f1_with_min_overlap(
    pred: &BinaryMask3D,
    gt: &BinaryMask3D,
    connectivity: Connectivity,
    min_overlap: usize,
) -> Result<(f64, LesionMatching)> {
    check_pair(pred, gt)?;
    let pred_lm = label_components(pred, connectivity);
    let gt_lm = label_components(gt, connectivity);
    Ok(match_lesions(&pred_lm, &gt_lm, min_overlap))
}

/// `lesionwise_f1_with_min_overlap` with the default 1-voxel overlap rule.
pub fn lesionwise_f1(
    pred: &BinaryMask3D,
    gt: &BinaryMask3D,
    connectivity: Connectivity,
) -> Result<(f64, LesionMatching)> {
    lesionwise_f1_with_min_overlap(pred, gt, connectivity, 1)
}

pub(crate) fn match_lesions(
    pred_lm: &LabelMap3D,
    gt_lm: &LabelMap3D,
    min_overlap: usize,
) -> (f64, LesionMatching) {
    let k_pred = pred_lm.component_count();
    let k_gt = gt_lm.component_count();

    let mut overlap: HashMap<(u32, u32), usize> = HashMap::new();
    for (&p, &g) in pred_lm.labels.iter().zip(gt_lm.labels.iter()) {
        if p != 0 && g != 0 {
            *overlap.entry((p, g)).or_insert(0) += 1;
        }
    }
    let mut edges: Vec<(u32, u32, usize)> = overlap
        .into_iter()
        .filter(|(_, count)| *count >= min_overlap.max(1))
        .map(|((p, g), count)| (p, g, count))
        .collect();
    // Decreasing overlap; ties by (pred, gt) label for determinism.
    edges.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));

    // pred label -> matched gt label (1-based), and the reverse.
    let mut pred_to_gt = vec![0u32; k_pred + 1];
    let mut gt_to_pred = vec![0u32; k_gt + 1];
    for &(p, g, _) in &edges {
        if pred_to_gt[p as usize] == 0 && gt_to_pred[g as usize] == 0 {
            pred_to_gt[p as usize] = g;
            gt_to_pred[g as usize] = p;
        }
    }

    // Augment to a maximum-cardinality matching so the TP count cannot be
    // beaten by any other one-to-one assignment.
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); k_pred + 1];
    for &(p, g, _) in &edges {
        adjacency[p as usize].push(g);
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
    }
    for p in 1..=k_pred as u32 {
        if pred_to_gt[p as usize] == 0 {
            let mut visited = vec![false; k_gt + 1];
            try_augment(p, &adjacency, &mut pred_to_gt, &mut gt_to_pred, &mut visited);
        }
    }

    let overlap_of = |p: u32, g: u32| -> usize {
        edges
            .iter()
            .find(|(ep, eg, _)| *ep == p && *eg == g)
            .map(|(_, _, c)| *c)
            .unwrap_or(0)
    };
    let pairs: Vec<(u32, u32, usize)> = (1..=k_pred as u32)
        .filter(|p| pred_to_gt[*p as usize] != 0)
        .map(|p| {
            let g = pred_to_gt[p as usize];
            (p, g, overlap_of(p, g))
        })
        .collect();

    let tp = pairs.len();
    let fp = k_pred - tp;
    let fn_ = k_gt - tp;
    let f1 = if k_pred == 0 && k_gt == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2.0 * tp as f64 + fp as f64 + fn_ as f64)
    };
    (
        f1,
        LesionMatching {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            pairs,
        },
    )
}

fn try_augment(
    p: u32,
    adjacency: &[Vec<u32>],
    pred_to_gt: &mut [u32],
    gt_to_pred: &mut [u32],
    visited: &mut [bool],
) -> bool {
    for &g in &adjacency[p as usize] {
        if visited[g as usize] {
            continue;
        }
        visited[g as usize] = true;
        let holder = gt_to_pred[g as usize];
        if holder == 0 || try_augment(holder, adjacency, pred_to_gt, gt_to_pred, visited) {
            pred_to_gt[p as usize] = g;
            gt_to_pred[g as usize] = p;
            return true;
        }
    }
    false
}

/// Absolute difference in connected-lesion counts.
pub fn alcd(pred: &BinaryMask3D, gt: &BinaryMask3D, connectivity: Connectivity) -> Result<usize> {
    check_pair(pred, gt)?;
    let k_pred = label_components(pred, connectivity).component_count();
    let k_gt = label_components(gt, connectivity).component_count();
    Ok(k_pred.abs_diff(k_gt))
}

/// All four metrics, computing each mask's component labeling once.
pub fn evaluate(
    pred: &BinaryMask3D,
    gt: &BinaryMask3D,
    connectivity: Connectivity,
    min_overlap: usize,
) -> Result<MetricsReport> {
    check_pair(pred, gt)?;
    let pred_lm = label_components(pred, connectivity);
    let gt_lm = label_components(gt, connectivity);
    let (f1, _) = match_lesions(&pred_lm, &gt_lm, min_overlap);
    Ok(MetricsReport {
        dice: dice(pred, gt)?,
        avd_ml: avd(pred, gt)?,
        f1_lesionwise: f1,
        alcd: pred_lm.component_count().abs_diff(gt_lm.component_count()),
        n_pred_lesions: pred_lm.component_count(),
        n_gt_lesions: gt_lm.component_count(),
    })
}
