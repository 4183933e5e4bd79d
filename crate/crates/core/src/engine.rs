//! Per-frame state machine: association, then recognition.

use std::collections::BTreeMap;

use crate::assoc;
use crate::config::Config;
use crate::domain::{
    canonical_cmp, Action, Collective, Detection, Frame, FrameState, GroundTruth, GroupActivity, GroupState,
    LabelState, Track,
};
use crate::error::{Error, Result};
use crate::eval::PersonFrame;
use crate::features::{self, ActionModel, Observations};
use crate::infer::{infer, InferOptions};
use crate::learn::{self, TrainOptions, TrainReport, TrainSample};
use crate::potentials::{Layout, WeightVector};

/// Histogram sum tolerance applied to incoming detections.
pub const HIST_TOL: f64 = 1e-6;

/// Learned recognition model: activity weights plus the atomic-action classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityModel {
    pub weights: WeightVector,
    pub action: ActionModel,
}

/// Externally supplied structure of a frame: track and group id per detection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Structure {
    pub tracks: Vec<u64>,
    pub groups: Vec<u64>,
}

impl Structure {
    /// Structure read from the ground truth attached to each detection.
    pub fn from_truth(dets: &[Detection]) -> Result<Self> {
        let gts = dets
            .iter()
            .map(|d| {
                d.gt.as_ref()
                    .ok_or_else(|| Error::InvalidInput(format!("detection at frame {} has no ground truth", d.frame)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { tracks: gts.iter().map(|g| g.track).collect(), groups: gts.iter().map(|g| g.group).collect() })
    }
}

fn infer_options(cfg: &Config) -> InferOptions {
    InferOptions { eps: cfg.infer_eps, max_iter: cfg.infer_max_iter }
}

fn check_frame(prev: &FrameState, frame: u64, dets: &[Detection], cfg: &Config) -> Result<()> {
    if !prev.is_initial() && frame <= prev.k {
        return Err(Error::InvalidInput(format!("frame {frame} does not follow frame {}", prev.k)));
    }
    for d in dets {
        if d.frame != frame {
            return Err(Error::InvalidInput(format!("detection of frame {} passed with frame {frame}", d.frame)));
        }
        d.validate(cfg.hist_bins, HIST_TOL)?;
    }
    Ok(())
}

/// State for a frame without detections: tracks stay available for the next
/// frame, there are no groups, and the collective label is carried over.
fn empty_frame(prev: &FrameState, frame: u64) -> FrameState {
    FrameState {
        k: frame,
        tracks: prev.tracks.clone(),
        groups: Vec::new(),
        labels: LabelState { y: prev.labels.y, g: Vec::new(), h: Vec::new() },
        detections: Vec::new(),
        det_track: Vec::new(),
        det_group: Vec::new(),
        psi: Vec::new(),
        prev_track_count: prev.tracks.len(),
        next_track_id: prev.next_track_id,
        next_group_id: prev.next_group_id,
        assoc_iterations: 0,
        infer_capped: false,
        observations: None,
    }
}

/// Labels of the previous frame mapped onto the current structure by id.
fn warm_start(prev: &FrameState, groups: &[GroupState], det_track: &[u64]) -> LabelState {
    let prev_g: BTreeMap<u64, usize> = if prev.labels.g.len() == prev.groups.len() {
        prev.groups.iter().zip(&prev.labels.g).map(|(g, &l)| (g.id, l)).collect()
    } else {
        BTreeMap::new()
    };
    let prev_h: BTreeMap<u64, usize> = if prev.labels.h.len() == prev.det_track.len() {
        prev.det_track.iter().copied().zip(prev.labels.h.iter().copied()).collect()
    } else {
        BTreeMap::new()
    };
    LabelState {
        y: prev.labels.y,
        g: groups.iter().map(|g| prev_g.get(&g.id).copied().unwrap_or(0)).collect(),
        h: det_track.iter().map(|t| prev_h.get(t).copied().unwrap_or(0)).collect(),
    }
}

struct Assembled {
    dets: Vec<Detection>,
    tracks: Vec<Track>,
    groups: Vec<GroupState>,
    det_track: Vec<u64>,
    det_group: Vec<usize>,
    psi: Vec<Option<usize>>,
    next_track_id: u64,
    next_group_id: u64,
    assoc_iterations: usize,
}

fn recognise(
    prev: &FrameState,
    frame: u64,
    a: Assembled,
    action: Option<&ActionModel>,
    weights: Option<&WeightVector>,
    cfg: &Config,
) -> Result<FrameState> {
    let mut tracks = a.tracks;
    tracks.sort_by_key(|t| t.id);
    let det_tracks: Vec<&Track> = a
        .det_track
        .iter()
        .map(|id| &tracks[tracks.binary_search_by_key(id, |t| t.id).expect("every detection has a track")])
        .collect();

    let mut labels = LabelState::cold(a.groups.len(), a.dets.len());
    let mut observations = None;
    let mut infer_capped = false;
    if let Some(action) = action {
        let obs = features::observe(&a.dets, &det_tracks, &a.det_group, a.groups.len(), action, cfg.velocity_window)?;
        if let Some(w) = weights {
            let warm = warm_start(prev, &a.groups, &a.det_track);
            let out = infer(w, &obs, &a.det_group, Some(&warm), None, &infer_options(cfg))?;
            labels = out.labels;
            infer_capped = out.capped;
        }
        observations = Some(obs);
    }

    Ok(FrameState {
        k: frame,
        tracks,
        groups: a.groups,
        labels,
        detections: a.dets,
        det_track: a.det_track,
        det_group: a.det_group,
        psi: a.psi,
        prev_track_count: prev.tracks.len(),
        next_track_id: a.next_track_id,
        next_group_id: a.next_group_id,
        assoc_iterations: a.assoc_iterations,
        infer_capped,
        observations,
    })
}

/// Processes one frame: association by group growing, then (with a model)
/// activity inference warm-started from the previous frame.
///
/// Unmatched tracks end here; unmatched detections start new tracks.
pub fn advance_frame(
    prev: &FrameState,
    frame: u64,
    mut dets: Vec<Detection>,
    model: Option<&ActivityModel>,
    cfg: &Config,
) -> Result<FrameState> {
    check_frame(prev, frame, &dets, cfg)?;
    if dets.is_empty() {
        return Ok(empty_frame(prev, frame));
    }
    dets.sort_by(canonical_cmp);
    let out = assoc::grow_groups(&dets, &prev.tracks, &prev.groups, prev.is_initial(), cfg, prev.next_group_id)?;

    let mut next_track_id = prev.next_track_id;
    let tracks: Vec<Track> = dets
        .iter()
        .zip(&out.psi)
        .map(|(d, a)| match a {
            Some(j) => {
                let mut t = prev.tracks[*j].clone();
                t.push(d, cfg.velocity_window);
                t
            }
            None => {
                next_track_id += 1;
                Track::start(next_track_id - 1, d, cfg.velocity_window)
            }
        })
        .collect();
    let det_track: Vec<u64> = tracks.iter().map(|t| t.id).collect();

    let mut groups = Vec::new();
    let mut remap = vec![usize::MAX; out.groups.len()];
    for (l, proto) in out.groups.iter().enumerate() {
        let members: Vec<&Track> = (0..dets.len()).filter(|&i| out.omega[i] == l).map(|i| &tracks[i]).collect();
        if !members.is_empty() {
            remap[l] = groups.len();
            groups.push(GroupState::from_tracks(proto.id, members)?);
        }
    }
    let det_group = out.omega.iter().map(|&l| remap[l]).collect();

    let assembled = Assembled {
        dets,
        tracks,
        groups,
        det_track,
        det_group,
        psi: out.psi,
        next_track_id,
        next_group_id: out.next_group_id,
        assoc_iterations: out.iterations,
    };
    recognise(prev, frame, assembled, model.map(|m| &m.action), model.map(|m| &m.weights), cfg)
}

fn assemble_given(
    prev: &FrameState,
    frame: u64,
    dets: Vec<Detection>,
    structure: &Structure,
    cfg: &Config,
) -> Result<Assembled> {
    if structure.tracks.len() != dets.len() || structure.groups.len() != dets.len() {
        return Err(Error::Dimension("structure does not cover every detection".into()));
    }
    let mut rows: Vec<(Detection, u64, u64)> =
        dets.into_iter().zip(structure.tracks.iter().zip(&structure.groups)).map(|(d, (&t, &g))| (d, t, g)).collect();
    rows.sort_by(|a, b| canonical_cmp(&a.0, &b.0));
    let mut seen = std::collections::BTreeSet::new();
    if let Some((_, t, _)) = rows.iter().find(|(_, t, _)| !seen.insert(*t)) {
        return Err(Error::InvalidInput(format!("track {t} appears twice in frame {frame}")));
    }

    let mut psi = Vec::with_capacity(rows.len());
    let mut tracks = Vec::with_capacity(rows.len());
    for (d, id, _) in &rows {
        match prev.tracks.binary_search_by_key(id, |t| t.id) {
            Ok(j) => {
                let mut t = prev.tracks[j].clone();
                t.push(d, cfg.velocity_window);
                tracks.push(t);
                psi.push(Some(j));
            }
            Err(_) => {
                tracks.push(Track::start(*id, d, cfg.velocity_window));
                psi.push(None);
            }
        }
    }

    let mut by_group: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, (_, _, g)) in rows.iter().enumerate() {
        by_group.entry(*g).or_default().push(i);
    }
    let mut det_group = vec![0; rows.len()];
    let mut groups = Vec::with_capacity(by_group.len());
    for (l, (gid, members)) in by_group.iter().enumerate() {
        for &i in members {
            det_group[i] = l;
        }
        groups.push(GroupState::from_tracks(*gid, members.iter().map(|&i| &tracks[i]))?);
    }

    let det_track: Vec<u64> = rows.iter().map(|r| r.1).collect();
    let next_track_id = det_track.iter().map(|t| t + 1).max().unwrap_or(0).max(prev.next_track_id);
    let next_group_id = by_group.keys().map(|g| g + 1).max().unwrap_or(0).max(prev.next_group_id);
    Ok(Assembled {
        dets: rows.into_iter().map(|r| r.0).collect(),
        tracks,
        groups,
        det_track,
        det_group,
        psi,
        next_track_id,
        next_group_id,
        assoc_iterations: 0,
    })
}

/// Like [`advance_frame`] but with tracks and groups supplied by the caller
/// instead of estimated; only recognition runs.
pub fn advance_with_structure(
    prev: &FrameState,
    frame: u64,
    dets: Vec<Detection>,
    structure: &Structure,
    model: Option<&ActivityModel>,
    cfg: &Config,
) -> Result<FrameState> {
    check_frame(prev, frame, &dets, cfg)?;
    if dets.is_empty() {
        return Ok(empty_frame(prev, frame));
    }
    let a = assemble_given(prev, frame, dets, structure, cfg)?;
    recognise(prev, frame, a, model.map(|m| &m.action), model.map(|m| &m.weights), cfg)
}

/// Runs [`advance_frame`] over a whole stream.
pub fn run_stream(frames: &[Frame], model: Option<&ActivityModel>, cfg: &Config) -> Result<Vec<FrameState>> {
    let mut prev = FrameState::initial();
    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        let next = advance_frame(&prev, f.index, f.detections.clone(), model, cfg)?;
        out.push(next.clone());
        prev = next;
    }
    Ok(out)
}

fn run_given(
    frames: &[Frame],
    action: Option<&ActionModel>,
    weights: Option<&WeightVector>,
    cfg: &Config,
) -> Result<Vec<FrameState>> {
    let mut prev = FrameState::initial();
    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        check_frame(&prev, f.index, &f.detections, cfg)?;
        let next = if f.detections.is_empty() {
            empty_frame(&prev, f.index)
        } else {
            let s = Structure::from_truth(&f.detections)?;
            let a = assemble_given(&prev, f.index, f.detections.clone(), &s, cfg)?;
            recognise(&prev, f.index, a, action, weights, cfg)?
        };
        out.push(next.clone());
        prev = next;
    }
    Ok(out)
}

/// Runs recognition over a stream using its ground-truth tracks and groups.
pub fn run_stream_with_truth(frames: &[Frame], model: Option<&ActivityModel>, cfg: &Config) -> Result<Vec<FrameState>> {
    run_given(frames, model.map(|m| &m.action), model.map(|m| &m.weights), cfg)
}

/// Majority label; ties go to the lowest index.
fn majority(labels: impl IntoIterator<Item = usize>, n: usize) -> usize {
    let mut counts = vec![0usize; n];
    for l in labels {
        counts[l] += 1;
    }
    (0..n).fold(0, |best, i| if counts[i] > counts[best] { i } else { best })
}

/// Ground-truth labelling of a processed frame: the collective label of its
/// detections, the majority group activity of every group's members and the
/// atomic action of every person.
pub fn truth_labels(state: &FrameState) -> Result<LabelState> {
    let gts = state
        .detections
        .iter()
        .map(|d| {
            d.gt.as_ref()
                .ok_or_else(|| Error::InvalidInput(format!("detection at frame {} has no ground truth", d.frame)))
        })
        .collect::<Result<Vec<_>>>()?;
    let y = majority(gts.iter().map(|g| g.collective.index()), Collective::COUNT);
    let g = (0..state.groups.len())
        .map(|l| {
            majority(
                gts.iter().zip(&state.det_group).filter(|(_, &dg)| dg == l).map(|(g, _)| g.group_act.index()),
                GroupActivity::COUNT,
            )
        })
        .collect();
    Ok(LabelState { y, g, h: gts.iter().map(|g| g.action.index()).collect() })
}

/// Options for [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Regularisation of the action classifier.
    pub action_c: f64,
    /// Use every `stride`-th frame as a structured training sample.
    pub stride: usize,
    /// Tracks shorter than this are not used to train the action classifier.
    pub min_track_len: usize,
    pub train: TrainOptions,
}

impl FitOptions {
    pub fn from_config(cfg: &Config) -> Self {
        Self {
            action_c: 1.0,
            stride: 1,
            min_track_len: 3,
            train: TrainOptions {
                dreg: cfg.dreg,
                eps_cp: cfg.eps_cp,
                max_rounds: cfg.max_rounds,
                infer: infer_options(cfg),
            },
        }
    }
}

/// Trains the action classifier from ground-truth tracks, then the activity
/// weights from ground-truth structure and labels.
pub fn fit(videos: &[Vec<Frame>], cfg: &Config, opts: &FitOptions) -> Result<(ActivityModel, TrainReport)> {
    let mut action_samples: Vec<([f64; 4], Action)> = Vec::new();
    for v in videos {
        for st in run_given(v, None, None, cfg)? {
            for (d, id) in st.detections.iter().zip(&st.det_track) {
                let t = st.track(*id).expect("track of detection");
                if t.history.len() >= opts.min_track_len {
                    let gt = d.gt.as_ref().expect("checked by structure");
                    action_samples.push((features::action_features(t, cfg.velocity_window), gt.action));
                }
            }
        }
    }
    let action = ActionModel::train(&action_samples, opts.action_c)?;

    let stride = opts.stride.max(1);
    let mut samples = Vec::new();
    for v in videos {
        for (n, st) in run_given(v, Some(&action), None, cfg)?.into_iter().enumerate() {
            if n % stride != 0 || st.detections.is_empty() {
                continue;
            }
            let truth = truth_labels(&st)?;
            let obs: Observations = st.observations.clone().expect("observations computed");
            samples.push(TrainSample::new(obs, st.det_group.clone(), truth)?);
        }
    }
    let report = learn::train(&samples, Layout::default(), &opts.train)?;
    Ok((ActivityModel { weights: report.w.clone(), action }, report))
}

/// Predicted annotation of every detection of a processed frame.
pub fn annotations(state: &FrameState) -> Result<Vec<GroundTruth>> {
    let collective = Collective::from_index(state.labels.y)?;
    state
        .det_track
        .iter()
        .zip(&state.det_group)
        .zip(&state.labels.h)
        .map(|((&track, &g), &h)| {
            Ok(GroundTruth {
                track,
                group: state.groups[g].id,
                action: Action::from_index(h)?,
                group_act: GroupActivity::from_index(state.labels.g[g])?,
                collective,
            })
        })
        .collect()
}

/// Evaluation records of processed frames whose detections carry ground truth.
pub fn person_frames(states: &[FrameState]) -> Result<Vec<PersonFrame>> {
    let mut out = Vec::new();
    for st in states {
        for (d, pred) in st.detections.iter().zip(annotations(st)?) {
            let gt =
                d.gt.ok_or_else(|| Error::InvalidInput(format!("detection at frame {} has no ground truth", d.frame)))?;
            out.push(PersonFrame { frame: st.k, bbox: d.bbox, pred, gt });
        }
    }
    Ok(out)
}
