//! Shared domain types: boxes, detections, tracks, groups and label spaces.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2-D point or vector in image coordinates (x right, y down).
pub type Vec2 = [f64; 2];

pub(crate) fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub(crate) fn norm2(a: Vec2) -> f64 {
    dot(a, a)
}

/// Axis-aligned bounding box, top-left corner plus size, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0) || !x.is_finite() || !y.is_finite() || !w.is_finite() || !h.is_finite() {
            return Err(Error::InvalidInput(format!("bbox must have finite coords and w, h > 0 (got w={w}, h={h})")));
        }
        Ok(Self { x, y, w, h })
    }

    /// Bottom-center of the box; the ground-plane location of the person.
    pub fn foot(&self) -> Vec2 {
        [self.x + 0.5 * self.w, self.y + self.h]
    }

    pub fn top_left(&self) -> Vec2 {
        [self.x, self.y]
    }

    pub fn bottom_right(&self) -> Vec2 {
        [self.x + self.w, self.y + self.h]
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let ix = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let iy = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if ix <= 0.0 || iy <= 0.0 {
            return 0.0;
        }
        let inter = ix * iy;
        inter / (self.area() + other.area() - inter)
    }
}

/// One of the eight quantized body orientations.
///
/// Index `k` points along angle `k * 45°` measured from +x towards +y in image
/// coordinates, so `Front` (towards the camera) points down the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Pose {
    Right = 0,
    RightFront = 1,
    Front = 2,
    LeftFront = 3,
    Left = 4,
    LeftBack = 5,
    Back = 6,
    RightBack = 7,
}

impl Pose {
    pub const COUNT: usize = 8;
    pub const ALL: [Pose; 8] = [
        Pose::Right,
        Pose::RightFront,
        Pose::Front,
        Pose::LeftFront,
        Pose::Left,
        Pose::LeftBack,
        Pose::Back,
        Pose::RightBack,
    ];

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL.get(i).copied().ok_or_else(|| Error::InvalidInput(format!("pose index {i} outside 0..8")))
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Unit direction vector of this pose.
    pub fn direction(self) -> Vec2 {
        let a = self.index() as f64 * std::f64::consts::FRAC_PI_4;
        let (s, c) = a.sin_cos();
        // keep axis-aligned poses exact
        [snap(c), snap(s)]
    }

    /// Nearest pose to a heading angle (radians, image coordinates).
    pub fn from_angle(angle: f64) -> Self {
        let k = (angle / std::f64::consts::FRAC_PI_4).round() as i64;
        Self::ALL[k.rem_euclid(8) as usize]
    }

    pub fn opposite(self) -> Self {
        Self::ALL[(self.index() + 4) % 8]
    }

    pub fn rotate(self, steps: i64) -> Self {
        Self::ALL[(self.index() as i64 + steps).rem_euclid(8) as usize]
    }
}

fn snap(v: f64) -> f64 {
    if v.abs() < 1e-15 {
        0.0
    } else if (v.abs() - 1.0).abs() < 1e-15 {
        v.signum()
    } else {
        v
    }
}

impl From<Pose> for u8 {
    fn from(p: Pose) -> u8 {
        p as u8
    }
}

impl TryFrom<u8> for Pose {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Pose::from_index(v as usize)
    }
}

macro_rules! label_enum {
    ($(#[$meta:meta])* $name:ident { $($var:ident => $s:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name { $($var),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$var),+];
            pub const COUNT: usize = Self::ALL.len();

            pub fn index(self) -> usize {
                Self::ALL.iter().position(|&v| v == self).unwrap()
            }

            pub fn from_index(i: usize) -> Result<Self> {
                Self::ALL.get(i).copied().ok_or_else(|| {
                    Error::InvalidInput(format!("{} index {} out of range", stringify!($name), i))
                })
            }

            pub fn as_str(self) -> &'static str {
                match self { $($name::$var => $s),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($name::$var),)+
                    _ => Err(Error::InvalidInput(format!("unknown {} label '{}'", stringify!($name), s))),
                }
            }
        }
    };
}

label_enum!(
    /// Scene-level activity.
    Collective {
        Crossing => "crossing",
        Waiting => "waiting",
        Queuing => "queuing",
        Walking => "walking",
        Talking => "talking",
    }
);

label_enum!(
    /// Activity shared by the members of one group.
    GroupActivity {
        Walking => "walking",
        Waiting => "waiting",
        Queuing => "queuing",
        Talking => "talking",
    }
);

label_enum!(
    /// Per-person atomic action.
    Action {
        Standing => "standing",
        Walking => "walking",
    }
);

impl GroupActivity {
    /// The collective label used when this activity dominates the scene.
    pub fn as_collective(self) -> Collective {
        match self {
            GroupActivity::Walking => Collective::Walking,
            GroupActivity::Waiting => Collective::Waiting,
            GroupActivity::Queuing => Collective::Queuing,
            GroupActivity::Talking => Collective::Talking,
        }
    }
}

/// Sizes of the three label spaces plus the pose wheel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpaces {
    pub collective: usize,
    pub group: usize,
    pub action: usize,
    pub poses: usize,
}

impl Default for LabelSpaces {
    fn default() -> Self {
        Self { collective: Collective::COUNT, group: GroupActivity::COUNT, action: Action::COUNT, poses: Pose::COUNT }
    }
}

/// Per-person annotation: identity, group and labels at all three levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub track: u64,
    pub group: u64,
    pub action: Action,
    pub group_act: GroupActivity,
    pub collective: Collective,
}

/// One person observation in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: u64,
    pub bbox: BBox,
    pub pose: Pose,
    /// Confidence of the pose estimate, in `[0, 1]`.
    pub pose_conf: f64,
    /// Colour histogram, non-negative and summing to one.
    pub appearance: Vec<f64>,
    pub gt: Option<GroundTruth>,
}

impl Detection {
    pub fn new(frame: u64, bbox: BBox, pose: Pose, appearance: Vec<f64>) -> Self {
        Self { frame, bbox, pose, pose_conf: 1.0, appearance, gt: None }
    }

    pub fn foot(&self) -> Vec2 {
        self.bbox.foot()
    }

    /// Checks the histogram invariant with the given tolerance.
    pub fn validate(&self, bins: usize, tol: f64) -> Result<()> {
        if self.appearance.len() != bins {
            return Err(Error::Dimension(format!(
                "appearance histogram has {} bins, expected {bins}",
                self.appearance.len()
            )));
        }
        if self.appearance.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::InvalidInput("appearance histogram has a negative or non-finite entry".into()));
        }
        let sum: f64 = self.appearance.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::InvalidInput(format!("appearance histogram sums to {sum}, expected 1")));
        }
        if !(0.0..=1.0).contains(&self.pose_conf) {
            return Err(Error::InvalidInput(format!("pose_conf {} outside [0, 1]", self.pose_conf)));
        }
        Ok(())
    }

    fn sort_key(&self) -> [f64; 4] {
        [self.bbox.x, self.bbox.y, self.bbox.w, self.bbox.h]
    }
}

/// Canonical detection order: `(x, y, w, h)`, exact ties broken on pose and histogram.
pub fn canonical_cmp(a: &Detection, b: &Detection) -> std::cmp::Ordering {
    let (ka, kb) = (a.sort_key(), b.sort_key());
    ka.iter()
        .zip(kb.iter())
        .map(|(x, y)| x.total_cmp(y))
        .chain(std::iter::once(a.pose.cmp(&b.pose)))
        .chain(a.appearance.iter().zip(&b.appearance).map(|(x, y)| x.total_cmp(y)))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Sorts detections into canonical order.
pub fn canonical_sort(dets: &mut [Detection]) {
    dets.sort_by(canonical_cmp);
}

/// All detections of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: u64,
    pub detections: Vec<Detection>,
}

/// A causal sequence of associated detections.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    /// `(frame, bbox)` pairs with strictly increasing frames.
    pub history: Vec<(u64, BBox)>,
    pub appearance: Vec<f64>,
    pub last_pose: Pose,
    /// Pixels per frame, of the foot point.
    pub velocity: Vec2,
    pub last_frame: u64,
}

impl Track {
    pub fn start(id: u64, det: &Detection, window: usize) -> Self {
        let mut t = Self {
            id,
            history: Vec::new(),
            appearance: Vec::new(),
            last_pose: det.pose,
            velocity: [0.0, 0.0],
            last_frame: det.frame,
        };
        t.push(det, window);
        t
    }

    /// Appends a detection and re-estimates the velocity.
    pub fn push(&mut self, det: &Detection, window: usize) {
        debug_assert!(self.history.last().is_none_or(|&(f, _)| f < det.frame));
        self.history.push((det.frame, det.bbox));
        self.appearance.clone_from(&det.appearance);
        self.last_pose = det.pose;
        self.last_frame = det.frame;
        self.velocity = crate::features::estimate_velocity(self, window);
    }

    pub fn last_bbox(&self) -> BBox {
        self.history.last().expect("track history is never empty").1
    }

    pub fn last_foot(&self) -> Vec2 {
        self.last_bbox().foot()
    }
}

/// A detected group at one frame, summarised from its member tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupState {
    pub id: u64,
    pub members: BTreeSet<u64>,
    pub centroid: Vec2,
    pub velocity: Vec2,
    pub mode_pose: Pose,
}

impl GroupState {
    /// Builds the group summary from its member tracks.
    pub fn from_tracks<'a>(id: u64, members: impl IntoIterator<Item = &'a Track>) -> Result<Self> {
        let members: Vec<&Track> = members.into_iter().collect();
        if members.is_empty() {
            return Err(Error::InvalidInput(format!("group {id} has no members")));
        }
        let n = members.len() as f64;
        let mut centroid = [0.0; 2];
        let mut velocity = [0.0; 2];
        for t in &members {
            let f = t.last_foot();
            centroid[0] += f[0];
            centroid[1] += f[1];
            velocity[0] += t.velocity[0];
            velocity[1] += t.velocity[1];
        }
        Ok(Self {
            id,
            members: members.iter().map(|t| t.id).collect(),
            centroid: [centroid[0] / n, centroid[1] / n],
            velocity: [velocity[0] / n, velocity[1] / n],
            mode_pose: mode_pose(members.iter().map(|t| t.last_pose)),
        })
    }
}

/// Statistical mode of a pose list; ties go to the lowest pose index.
pub fn mode_pose(poses: impl IntoIterator<Item = Pose>) -> Pose {
    let mut counts = [0usize; 8];
    for p in poses {
        counts[p.index()] += 1;
    }
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    Pose::ALL[best]
}

/// Activity labels for one frame, as indices into the label spaces.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct LabelState {
    /// Collective activity.
    pub y: usize,
    /// One activity per group.
    pub g: Vec<usize>,
    /// One action per person.
    pub h: Vec<usize>,
}

impl LabelState {
    pub fn cold(groups: usize, persons: usize) -> Self {
        Self { y: 0, g: vec![0; groups], h: vec![0; persons] }
    }

    /// Number of label components `1 + N_g + N`.
    pub fn len(&self) -> usize {
        1 + self.g.len() + self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged matrix rows".into()));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub(crate) fn from_row_vecs(rows: usize, cols: usize, data: Vec<Vec<f64>>) -> Self {
        let data = data.concat();
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().copied()
    }
}

/// Converts an assignment vector into the binary matrix form (`rows × cols`).
pub fn assignment_matrix(assign: &[Option<usize>], cols: usize) -> Vec<Vec<u8>> {
    assign
        .iter()
        .map(|a| {
            let mut row = vec![0u8; cols];
            if let Some(j) = *a {
                row[j] = 1;
            }
            row
        })
        .collect()
}

/// Engine state after processing frame `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameState {
    pub k: u64,
    /// Live tracks, sorted by id.
    pub tracks: Vec<Track>,
    /// Groups of the current frame, sorted by id.
    pub groups: Vec<GroupState>,
    pub labels: LabelState,
    /// Detections of frame `k` in canonical order.
    pub detections: Vec<Detection>,
    /// Track id of each detection.
    pub det_track: Vec<u64>,
    /// Index into `groups` of each detection.
    pub det_group: Vec<usize>,
    /// `psi[i] = Some(j)`: detection `i` continued `prev.tracks[j]`.
    pub psi: Vec<Option<usize>>,
    /// Column count of `psi` (tracks available at the previous frame).
    pub prev_track_count: usize,
    pub next_track_id: u64,
    pub next_group_id: u64,
    /// Iterations spent in group growing for this frame.
    pub assoc_iterations: usize,
    pub infer_capped: bool,
    /// Recognition inputs of this frame, when recognition ran.
    pub observations: Option<crate::features::Observations>,
}

impl FrameState {
    /// State before the first frame of a stream.
    pub fn initial() -> Self {
        Self {
            k: 0,
            tracks: Vec::new(),
            groups: Vec::new(),
            labels: LabelState::cold(0, 0),
            detections: Vec::new(),
            det_track: Vec::new(),
            det_group: Vec::new(),
            psi: Vec::new(),
            prev_track_count: 0,
            next_track_id: 0,
            next_group_id: 0,
            assoc_iterations: 0,
            infer_capped: false,
            observations: None,
        }
    }

    /// True before any frame has been processed.
    pub fn is_initial(&self) -> bool {
        self.next_track_id == 0 && self.tracks.is_empty()
    }

    pub fn track(&self, id: u64) -> Option<&Track> {
        self.tracks.binary_search_by_key(&id, |t| t.id).ok().map(|i| &self.tracks[i])
    }

    /// Binary track-association matrix, `N × prev_track_count`.
    pub fn psi_matrix(&self) -> Vec<Vec<u8>> {
        assignment_matrix(&self.psi, self.prev_track_count)
    }

    /// Binary group-association matrix, `N × N_g`.
    pub fn omega_matrix(&self) -> Vec<Vec<u8>> {
        let assign: Vec<Option<usize>> = self.det_group.iter().map(|&g| Some(g)).collect();
        assignment_matrix(&assign, self.groups.len())
    }

    /// Person-to-group index vector (the grouping used by the potentials).
    pub fn grouping(&self) -> &[usize] {
        &self.det_group
    }
}
