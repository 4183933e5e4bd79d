//! Observation vectors for the activity model.
//!
//! Per person: the outer product of the (confidence-weighted) pose one-hot and
//! action one-hot, flattened pose-major. Per group: the member mean plus the
//! mean pairwise pose-position score, normalised by mean member height. For
//! the scene: the mean over all persons.

use serde::{Deserialize, Serialize};

use crate::domain::{dot, mode_pose, sub, Action, BBox, Detection, Pose, Track, Vec2};
use crate::error::{Error, Result};

/// Least-squares slope of `values` against `times`; zero for fewer than two points.
pub fn ls_slope(times: &[f64], values: &[f64]) -> f64 {
    let n = times.len();
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let mt = times.iter().sum::<f64>() / nf;
    let mv = values.iter().sum::<f64>() / nf;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, v) in times.iter().zip(values) {
        num += (t - mt) * (v - mv);
        den += (t - mt) * (t - mt);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn window_of(history: &[(u64, BBox)], window: usize) -> &[(u64, BBox)] {
    &history[history.len().saturating_sub(window.max(1))..]
}

fn slopes_of(history: &[(u64, BBox)], pick: impl Fn(&BBox) -> Vec2) -> Vec2 {
    let ts: Vec<f64> = history.iter().map(|(f, _)| *f as f64).collect();
    let xs: Vec<f64> = history.iter().map(|(_, b)| pick(b)[0]).collect();
    let ys: Vec<f64> = history.iter().map(|(_, b)| pick(b)[1]).collect();
    [ls_slope(&ts, &xs), ls_slope(&ts, &ys)]
}

/// Foot-point velocity over the last `window` frames of a track.
pub fn estimate_velocity(track: &Track, window: usize) -> Vec2 {
    slopes_of(window_of(&track.history, window), BBox::foot)
}

/// Velocity the track would have if `det` were appended to it.
pub fn provisional_velocity(track: &Track, det: &Detection, window: usize) -> Vec2 {
    let mut hist: Vec<(u64, BBox)> = window_of(&track.history, window.saturating_sub(1)).to_vec();
    if window <= 1 {
        hist.clear();
    }
    hist.push((det.frame, det.bbox));
    slopes_of(&hist, BBox::foot)
}

/// Slopes of the top-left and bottom-right box corners: `(tl.x, tl.y, br.x, br.y)`.
pub fn action_features(track: &Track, window: usize) -> [f64; 4] {
    let hist = window_of(&track.history, window);
    let tl = slopes_of(hist, BBox::top_left);
    let br = slopes_of(hist, BBox::bottom_right);
    [tl[0], tl[1], br[0], br[1]]
}

fn logistic(m: f64) -> f64 {
    1.0 / (1.0 + (-m).exp())
}

/// Linear max-margin standing/walking classifier over corner slope magnitudes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionModel {
    /// `[w_0..w_3, bias]`, present once trained.
    pub params: Option<[f64; 5]>,
}

impl ActionModel {
    pub fn from_params(params: [f64; 5]) -> Self {
        Self { params: Some(params) }
    }

    /// Trains an L1-loss linear SVM by dual coordinate descent; bias is
    /// learned as the weight of a constant feature. Slopes enter as absolute
    /// values so that walking in opposite directions falls on one side.
    pub fn train(samples: &[([f64; 4], Action)], c: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("no action training samples".into()));
        }
        let xs: Vec<[f64; 5]> =
            samples.iter().map(|(f, _)| [f[0].abs(), f[1].abs(), f[2].abs(), f[3].abs(), 1.0]).collect();
        let ys: Vec<f64> = samples.iter().map(|(_, a)| if *a == Action::Walking { 1.0 } else { -1.0 }).collect();
        let qd: Vec<f64> = xs.iter().map(|x| x.iter().map(|v| v * v).sum()).collect();
        let mut alpha = vec![0.0; xs.len()];
        let mut w = [0.0; 5];
        for _ in 0..1000 {
            let mut max_pg: f64 = 0.0;
            for i in 0..xs.len() {
                if qd[i] == 0.0 {
                    continue;
                }
                let g = ys[i] * xs[i].iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() - 1.0;
                let pg = if alpha[i] == 0.0 {
                    g.min(0.0)
                } else if alpha[i] == c {
                    g.max(0.0)
                } else {
                    g
                };
                max_pg = max_pg.max(pg.abs());
                if pg != 0.0 {
                    let old = alpha[i];
                    alpha[i] = (old - g / qd[i]).clamp(0.0, c);
                    let d = (alpha[i] - old) * ys[i];
                    for (wk, xk) in w.iter_mut().zip(&xs[i]) {
                        *wk += d * xk;
                    }
                }
            }
            if max_pg < 1e-8 {
                break;
            }
        }
        Ok(Self::from_params(w))
    }

    pub fn margin(&self, slopes: &[f64; 4]) -> Result<f64> {
        let p = self.params.ok_or(Error::UntrainedModel)?;
        Ok(slopes.iter().zip(&p[..4]).map(|(a, b)| a.abs() * b).sum::<f64>() + p[4])
    }
}

/// Action label and its confidence `logistic(|margin|)`.
pub fn classify_action(slopes: &[f64; 4], model: &ActionModel) -> Result<(Action, f64)> {
    let m = model.margin(slopes)?;
    let action = if m > 0.0 { Action::Walking } else { Action::Standing };
    Ok((action, logistic(m.abs())))
}

/// `|p · (d_i − d_j)|`.
pub fn pose_position_score(pose: Vec2, di: Vec2, dj: Vec2) -> f64 {
    dot(pose, sub(di, dj)).abs()
}

/// Normalised histogram of labels drawn from `0..n`.
pub fn histogram(labels: &[usize], n: usize) -> Result<Vec<f64>> {
    if labels.is_empty() {
        return Err(Error::InvalidInput("histogram of an empty label list".into()));
    }
    let mut h = vec![0.0; n];
    for &l in labels {
        *h.get_mut(l).ok_or_else(|| Error::InvalidInput(format!("label {l} outside 0..{n}")))? += 1.0;
    }
    let total = labels.len() as f64;
    h.iter_mut().for_each(|v| *v /= total);
    Ok(h)
}

/// Pose ⊗ action feature of one person.
pub fn individual_feature(pose: Pose, pose_conf: f64, action: Action, action_conf: f64) -> Vec<f64> {
    let mut x = vec![0.0; Pose::COUNT * Action::COUNT];
    x[pose.index() * Action::COUNT + action.index()] = pose_conf * action_conf;
    x
}

fn mean_of<'a>(vs: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    let mut n = 0usize;
    for v in vs {
        for (o, x) in out.iter_mut().zip(v) {
            *o += x;
        }
        n += 1;
    }
    if n > 0 {
        out.iter_mut().for_each(|o| *o /= n as f64);
    }
    out
}

/// One group member as seen by the group feature.
#[derive(Debug, Clone, Copy)]
pub struct MemberView<'a> {
    pub feature: &'a [f64],
    pub foot: Vec2,
    pub pose: Pose,
    pub height: f64,
}

/// Mean pairwise pose-position score using the members' mode pose.
pub fn mean_pose_position(members: &[MemberView<'_>]) -> f64 {
    let p = mode_pose(members.iter().map(|m| m.pose)).direction();
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            sum += pose_position_score(p, members[i].foot, members[j].foot);
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        sum / pairs as f64
    }
}

/// Group observation: member mean feature plus the height-normalised pose-position score.
pub fn group_feature(members: &[MemberView<'_>], dim: usize) -> Vec<f64> {
    let mut x = mean_of(members.iter().map(|m| m.feature), dim);
    let h = members.iter().map(|m| m.height).sum::<f64>() / members.len().max(1) as f64;
    let score = mean_pose_position(members);
    x.push(if h > 0.0 { score / h } else { 0.0 });
    x
}

/// Scene observation: mean of all individual features.
pub fn collective_feature(xi: &[Vec<f64>], dim: usize) -> Vec<f64> {
    mean_of(xi.iter().map(Vec::as_slice), dim)
}

/// All observations of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observations {
    pub x0: Vec<f64>,
    /// One vector per group.
    pub xg: Vec<Vec<f64>>,
    /// One vector per person.
    pub xi: Vec<Vec<f64>>,
}

/// Builds the frame observations from detections, their tracks and their groups.
///
/// `tracks[i]` is the (already updated) track of detection `i`, `grouping[i]`
/// its group index in `0..groups`.
pub fn observe(
    dets: &[Detection],
    tracks: &[&Track],
    grouping: &[usize],
    groups: usize,
    action_model: &ActionModel,
    window: usize,
) -> Result<Observations> {
    if tracks.len() != dets.len() || grouping.len() != dets.len() {
        return Err(Error::Dimension("detections, tracks and grouping differ in length".into()));
    }
    if let Some(&bad) = grouping.iter().find(|&&g| g >= groups) {
        return Err(Error::InvalidInput(format!("person mapped to group {bad} of {groups}")));
    }
    let dim = Pose::COUNT * Action::COUNT;
    let xi = dets
        .iter()
        .zip(tracks)
        .map(|(d, t)| {
            let (a, conf) = classify_action(&action_features(t, window), action_model)?;
            Ok(individual_feature(d.pose, d.pose_conf, a, conf))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut xg = Vec::with_capacity(groups);
    for g in 0..groups {
        let members: Vec<MemberView<'_>> = (0..dets.len())
            .filter(|&i| grouping[i] == g)
            .map(|i| MemberView { feature: &xi[i], foot: dets[i].foot(), pose: dets[i].pose, height: dets[i].bbox.h })
            .collect();
        xg.push(group_feature(&members, dim));
    }
    Ok(Observations { x0: collective_feature(&xi, dim), xg, xi })
}
