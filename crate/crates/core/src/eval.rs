//! Tracking, grouping and activity metrics.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::domain::{Action, BBox, Collective, GroundTruth, GroupActivity};
use crate::error::{Error, Result};

/// An identified box at one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tagged {
    pub bbox: BBox,
    pub id: u64,
}

/// Ground-truth and predicted boxes of one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameIds {
    pub gt: Vec<Tagged>,
    pub pred: Vec<Tagged>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdSwitchReport {
    pub switches: usize,
    /// Distinct ground-truth identities seen.
    pub gt_tracks: usize,
    /// `switches / gt_tracks`, zero without identities.
    pub ratio: f64,
}

/// Minimum IoU for a gt/prediction correspondence.
pub const MATCH_IOU: f64 = 0.5;

/// Greedy highest-IoU one-to-one matching; returns `(gt index, pred index)` pairs.
pub fn match_boxes(gt: &[Tagged], pred: &[Tagged]) -> Vec<(usize, usize)> {
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for (i, g) in gt.iter().enumerate() {
        for (j, p) in pred.iter().enumerate() {
            let iou = g.bbox.iou(&p.bbox);
            if iou >= MATCH_IOU {
                cand.push((iou, i, j));
            }
        }
    }
    cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut used_g, mut used_p) = (BTreeSet::new(), BTreeSet::new());
    let mut out = Vec::new();
    for (_, i, j) in cand {
        if !used_g.contains(&i) && !used_p.contains(&j) {
            used_g.insert(i);
            used_p.insert(j);
            out.push((i, j));
        }
    }
    out.sort_unstable();
    out
}

/// Counts frames where a gt identity is matched to a different predicted id
/// than at its previous matched frame.
pub fn id_switches(frames: &[FrameIds]) -> IdSwitchReport {
    let mut last: BTreeMap<u64, u64> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    let mut switches = 0;
    for f in frames {
        seen.extend(f.gt.iter().map(|t| t.id));
        for (i, j) in match_boxes(&f.gt, &f.pred) {
            let (g, p) = (f.gt[i].id, f.pred[j].id);
            if let Some(prev) = last.insert(g, p) {
                if prev != p {
                    switches += 1;
                }
            }
        }
    }
    let gt_tracks = seen.len();
    IdSwitchReport { switches, gt_tracks, ratio: if gt_tracks == 0 { 0.0 } else { switches as f64 / gt_tracks as f64 } }
}

fn contingency(pred: &[u64], gt: &[u64]) -> Result<BTreeMap<(u64, u64), usize>> {
    if pred.len() != gt.len() {
        return Err(Error::Dimension(format!("partitions cover {} and {} elements", pred.len(), gt.len())));
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("partitions are empty".into()));
    }
    let mut table = BTreeMap::new();
    for (&p, &g) in pred.iter().zip(gt) {
        *table.entry((p, g)).or_insert(0) += 1;
    }
    Ok(table)
}

fn sizes(labels: &[u64]) -> BTreeMap<u64, usize> {
    let mut m = BTreeMap::new();
    for &l in labels {
        *m.entry(l).or_insert(0) += 1;
    }
    m
}

/// `(1/N) Σ_c max_g |c ∩ g|` over predicted clusters `c`.
pub fn purity(pred: &[u64], gt: &[u64]) -> Result<f64> {
    let table = contingency(pred, gt)?;
    let mut best: BTreeMap<u64, usize> = BTreeMap::new();
    for (&(p, _), &n) in &table {
        let b = best.entry(p).or_insert(0);
        *b = (*b).max(n);
    }
    Ok(best.values().sum::<usize>() as f64 / pred.len() as f64)
}

fn pairs(n: usize) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Fraction of element pairs on which the two partitions agree.
pub fn rand_index(pred: &[u64], gt: &[u64]) -> Result<f64> {
    if pred.len() < 2 {
        return Err(Error::InvalidInput("rand index needs at least two elements".into()));
    }
    let table = contingency(pred, gt)?;
    let total = pairs(pred.len());
    let same_both: f64 = table.values().map(|&n| pairs(n)).sum();
    let same_pred: f64 = sizes(pred).values().map(|&n| pairs(n)).sum();
    let same_gt: f64 = sizes(gt).values().map(|&n| pairs(n)).sum();
    let diff_both = total - same_pred - same_gt + same_both;
    Ok((same_both + diff_both) / total)
}

fn entropy(labels: &[u64]) -> f64 {
    let n = labels.len() as f64;
    sizes(labels)
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// `2 I(pred; gt) / (H(pred) + H(gt))`; two single-cluster partitions score 1.
pub fn nmi(pred: &[u64], gt: &[u64]) -> Result<f64> {
    let table = contingency(pred, gt)?;
    let n = pred.len() as f64;
    let (hp, hg) = (entropy(pred), entropy(gt));
    if hp + hg == 0.0 {
        return Ok(1.0);
    }
    let (sp, sg) = (sizes(pred), sizes(gt));
    let mi: f64 = table
        .iter()
        .map(|(&(p, g), &c)| {
            let pij = c as f64 / n;
            pij * (pij * n * n / (sp[&p] as f64 * sg[&g] as f64)).ln()
        })
        .sum();
    Ok((2.0 * mi / (hp + hg)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterScores {
    pub purity: f64,
    pub rand_index: f64,
    pub nmi: f64,
}

impl ClusterScores {
    pub fn of(pred: &[u64], gt: &[u64]) -> Result<Self> {
        Ok(Self { purity: purity(pred, gt)?, rand_index: rand_index(pred, gt)?, nmi: nmi(pred, gt)? })
    }
}

/// Accuracy summary for one label level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMetrics {
    pub overall: f64,
    /// Mean of per-class recall over classes with support.
    pub mean_class: f64,
    /// `confusion[truth][pred]`.
    pub confusion: Vec<Vec<usize>>,
    pub count: usize,
}

impl LevelMetrics {
    /// Metrics from `(truth, prediction)` index pairs over `n` classes.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>, n: usize) -> Self {
        let mut confusion = vec![vec![0usize; n]; n];
        for (t, p) in pairs {
            confusion[t][p] += 1;
        }
        let count: usize = confusion.iter().flatten().sum();
        let correct: usize = (0..n).map(|k| confusion[k][k]).sum();
        let recalls: Vec<f64> = confusion
            .iter()
            .enumerate()
            .filter_map(|(k, row)| {
                let s: usize = row.iter().sum();
                (s > 0).then(|| row[k] as f64 / s as f64)
            })
            .collect();
        Self {
            overall: if count == 0 { 0.0 } else { correct as f64 / count as f64 },
            mean_class: if recalls.is_empty() { 0.0 } else { recalls.iter().sum::<f64>() / recalls.len() as f64 },
            confusion,
            count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityMetrics {
    pub collective: LevelMetrics,
    pub group: LevelMetrics,
    pub atomic: LevelMetrics,
}

/// One person at one frame with predicted and true annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonFrame {
    pub frame: u64,
    pub bbox: BBox,
    pub pred: GroundTruth,
    pub gt: GroundTruth,
}

fn by_frame(records: &[PersonFrame]) -> BTreeMap<u64, Vec<&PersonFrame>> {
    let mut m: BTreeMap<u64, Vec<&PersonFrame>> = BTreeMap::new();
    for r in records {
        m.entry(r.frame).or_default().push(r);
    }
    m
}

fn majority(labels: impl IntoIterator<Item = usize>, n: usize) -> usize {
    let mut counts = vec![0usize; n];
    for l in labels {
        counts[l] += 1;
    }
    (0..n).fold(0, |best, i| if counts[i] > counts[best] { i } else { best })
}

fn member_sets(ids: impl Iterator<Item = (usize, u64)>) -> BTreeMap<u64, BTreeSet<usize>> {
    let mut m: BTreeMap<u64, BTreeSet<usize>> = BTreeMap::new();
    for (i, g) in ids {
        m.entry(g).or_default().insert(i);
    }
    m
}

fn jaccard(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Minimum member-set Jaccard overlap for a predicted group to count as detected.
pub const GROUP_JACCARD: f64 = 0.5;

/// Activity accuracies. Collective accuracy is per frame, group accuracy is
/// over predicted groups overlapping a true group by more than
/// [`GROUP_JACCARD`], atomic accuracy is per person-frame.
pub fn activity_metrics(records: &[PersonFrame]) -> ActivityMetrics {
    activity_metrics_streams(&[records])
}

/// [`activity_metrics`] pooled over several independent streams.
pub fn activity_metrics_streams(streams: &[&[PersonFrame]]) -> ActivityMetrics {
    let mut coll = Vec::new();
    let mut grp = Vec::new();
    let mut atom = Vec::new();
    for people in streams.iter().flat_map(|r| by_frame(r).into_values()) {
        coll.push((
            majority(people.iter().map(|r| r.gt.collective.index()), Collective::COUNT),
            majority(people.iter().map(|r| r.pred.collective.index()), Collective::COUNT),
        ));
        atom.extend(people.iter().map(|r| (r.gt.action.index(), r.pred.action.index())));
        let pred_sets = member_sets(people.iter().enumerate().map(|(i, r)| (i, r.pred.group)));
        let gt_sets = member_sets(people.iter().enumerate().map(|(i, r)| (i, r.gt.group)));
        for members in pred_sets.values() {
            let matched = gt_sets.values().find(|g| jaccard(members, g) > GROUP_JACCARD);
            if let Some(g) = matched {
                let truth = majority(g.iter().map(|&i| people[i].gt.group_act.index()), GroupActivity::COUNT);
                let pred = majority(members.iter().map(|&i| people[i].pred.group_act.index()), GroupActivity::COUNT);
                grp.push((truth, pred));
            }
        }
    }
    ActivityMetrics {
        collective: LevelMetrics::from_pairs(coll, Collective::COUNT),
        group: LevelMetrics::from_pairs(grp, GroupActivity::COUNT),
        atomic: LevelMetrics::from_pairs(atom, Action::COUNT),
    }
}

/// Grouping scores averaged over frames with at least two people.
pub fn grouping_scores(records: &[PersonFrame]) -> Result<Option<ClusterScores>> {
    let mut acc = [0.0; 3];
    let mut n = 0usize;
    for people in by_frame(records).values().filter(|p| p.len() >= 2) {
        let pred: Vec<u64> = people.iter().map(|r| r.pred.group).collect();
        let gt: Vec<u64> = people.iter().map(|r| r.gt.group).collect();
        let s = ClusterScores::of(&pred, &gt)?;
        acc[0] += s.purity;
        acc[1] += s.rand_index;
        acc[2] += s.nmi;
        n += 1;
    }
    Ok((n > 0).then(|| ClusterScores {
        purity: acc[0] / n as f64,
        rand_index: acc[1] / n as f64,
        nmi: acc[2] / n as f64,
    }))
}

/// Identity correspondences of the records, frame by frame.
pub fn frame_ids(records: &[PersonFrame]) -> Vec<FrameIds> {
    by_frame(records)
        .values()
        .map(|people| FrameIds {
            gt: people.iter().map(|r| Tagged { bbox: r.bbox, id: r.gt.track }).collect(),
            pred: people.iter().map(|r| Tagged { bbox: r.bbox, id: r.pred.track }).collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub frames: usize,
    pub tracking: IdSwitchReport,
    pub grouping: Option<ClusterScores>,
    pub activity: ActivityMetrics,
}

/// All metrics over one labelled stream.
pub fn evaluate(records: &[PersonFrame]) -> Result<EvalReport> {
    Ok(EvalReport {
        frames: by_frame(records).len(),
        tracking: id_switches(&frame_ids(records)),
        grouping: grouping_scores(records)?,
        activity: activity_metrics(records),
    })
}
