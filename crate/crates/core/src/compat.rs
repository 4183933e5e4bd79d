//! Detection-to-track and detection-to-group compatibility scores.
//!
//! Both matrices combine three Gaussian-kernel terms, each mapped into
//! `[-1, 1]` as `2 exp(-beta d^2) - 1` and mixed with weights summing to one.
//! The group matrix replaces its third kernel term by a field-of-view overlap
//! score: each person looks into the half-plane in front of them, a group's
//! interaction zone is the intersection of its members' half-planes, and a
//! detection is pose-compatible with a group when its own half-plane covers
//! that zone.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AssocMode, Config};
use crate::domain::{norm2, sub, Detection, GroupState, Matrix, Pose, Track, Vec2};
use crate::error::{Error, Result};
use crate::features;
use crate::geometry::{ConvexPolygon, HalfPlane, Rect, AREA_EPS};

/// Weights `alpha` and normalisers `beta` of a three-term kernel score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
}

impl KernelParams {
    pub fn new(alpha: [f64; 3], beta: [f64; 3]) -> Result<Self> {
        let p = Self { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.iter().any(|&a| a.is_nan() || a < 0.0) || (self.alpha.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "kernel weights must be non-negative and sum to 1, got {:?}",
                self.alpha
            )));
        }
        if self.beta.iter().any(|&b| b.is_nan() || b <= 0.0) {
            return Err(Error::InvalidInput(format!("kernel normalisers must be positive, got {:?}", self.beta)));
        }
        Ok(())
    }
}

/// `sum_n alpha_n (2 exp(-beta_n d2_n) - 1)`, in `[-1, 1]`.
pub fn score_kernel(dist2: [f64; 3], params: &KernelParams) -> f64 {
    (0..3).map(|n| params.alpha[n] * kernel_term(params.beta[n], dist2[n])).sum()
}

fn kernel_term(beta: f64, d2: f64) -> f64 {
    2.0 * (-beta * d2).exp() - 1.0
}

/// Track-kernel settings; the spatial normaliser is `1 / h` per detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackKernel {
    pub alpha: [f64; 3],
    pub beta_appearance: f64,
    pub beta_motion: f64,
}

impl Default for TrackKernel {
    fn default() -> Self {
        Self { alpha: [1.0 / 3.0; 3], beta_appearance: 1.0, beta_motion: 1.0 }
    }
}

impl TrackKernel {
    pub fn params_for(&self, det_height: f64) -> KernelParams {
        KernelParams { alpha: self.alpha, beta: [self.beta_appearance, 1.0 / det_height, self.beta_motion] }
    }
}

fn hist_dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Track score of one detection against one track.
pub fn track_score(det: &Detection, track: &Track, kernel: &TrackKernel) -> f64 {
    let foot = det.foot();
    let last = track.last_foot();
    let gap = det.frame.saturating_sub(track.last_frame).max(1) as f64;
    let offset = sub(foot, last);
    let implied = [offset[0] / gap, offset[1] / gap];
    let dist2 = [hist_dist2(&det.appearance, &track.appearance), norm2(offset), norm2(sub(track.velocity, implied))];
    score_kernel(dist2, &kernel.params_for(det.bbox.h))
}

/// Track-compatibility matrix `M`, `N × T`.
pub fn build_m(dets: &[Detection], tracks: &[Track], kernel: &TrackKernel) -> Matrix {
    let rows: Vec<Vec<f64>> =
        dets.par_iter().map(|d| tracks.iter().map(|t| track_score(d, t, kernel)).collect()).collect();
    Matrix::from_row_vecs(dets.len(), tracks.len(), rows)
}

/// Half-plane a person at `loc` facing `pose` looks into.
pub fn fov_halfplane(loc: Vec2, pose: Pose) -> HalfPlane {
    HalfPlane::new(loc, pose.direction())
}

/// Field of view: the half-plane in the pose direction clipped to the image.
pub fn fov(loc: Vec2, pose: Pose, img: &Rect) -> ConvexPolygon {
    img.to_polygon().clip(&fov_halfplane(img.clamp(loc), pose))
}

/// Interaction zone of a group: the intersection of its members' fields of view.
pub fn group_fov(members: &[(Vec2, Pose)], img: &Rect) -> ConvexPolygon {
    let planes: Vec<HalfPlane> = members.iter().map(|&(loc, pose)| fov_halfplane(img.clamp(loc), pose)).collect();
    img.to_polygon().clip_all(planes.iter())
}

/// Fraction of a group zone covered by a detection's field of view.
///
/// A degenerate zone scores 0.
pub fn zone_coverage(zone: &ConvexPolygon, loc: Vec2, pose: Pose, img: &Rect) -> f64 {
    let zone_area = zone.area();
    if zone_area <= AREA_EPS {
        return 0.0;
    }
    let inter = zone.clip(&fov_halfplane(img.clamp(loc), pose)).area();
    (inter / zone_area).clamp(0.0, 1.0)
}

/// Pose compatibility of a detection with a group given its members' locations and poses.
pub fn pose_compat_members(loc: Vec2, pose: Pose, members: &[(Vec2, Pose)], img: &Rect) -> f64 {
    zone_coverage(&group_fov(members, img), loc, pose, img)
}

/// Pose compatibility of a detection with a group, reading member state from `tracks`.
pub fn pose_compat(det: &Detection, grp: &GroupState, tracks: &[Track], img: &Rect) -> Result<f64> {
    let members = member_locs_poses(grp, tracks)?;
    Ok(pose_compat_members(det.foot(), det.pose, &members, img))
}

fn member_tracks<'a>(grp: &GroupState, tracks: &'a [Track]) -> Result<Vec<&'a Track>> {
    grp.members
        .iter()
        .map(|id| {
            tracks
                .iter()
                .find(|t| t.id == *id)
                .ok_or_else(|| Error::InvalidInput(format!("group {} references unknown track {id}", grp.id)))
        })
        .collect()
}

fn member_locs_poses(grp: &GroupState, tracks: &[Track]) -> Result<Vec<(Vec2, Pose)>> {
    Ok(member_tracks(grp, tracks)?.into_iter().map(|t| (t.last_foot(), t.last_pose)).collect())
}

/// Everything group compatibility needs to know about a candidate group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupProto {
    pub id: u64,
    pub centroid: Vec2,
    pub velocity: Vec2,
    pub mean_height: f64,
    pub zone: ConvexPolygon,
}

impl GroupProto {
    pub fn from_group(grp: &GroupState, tracks: &[Track], img: &Rect) -> Result<Self> {
        let members = member_tracks(grp, tracks)?;
        let locs: Vec<(Vec2, Pose)> = members.iter().map(|t| (t.last_foot(), t.last_pose)).collect();
        let mean_height = members.iter().map(|t| t.last_bbox().h).sum::<f64>() / members.len() as f64;
        Ok(Self {
            id: grp.id,
            centroid: grp.centroid,
            velocity: grp.velocity,
            mean_height,
            zone: group_fov(&locs, img),
        })
    }

    /// Group with the given detections as members.
    pub fn from_detections(id: u64, dets: &[&Detection], velocities: &[Vec2], img: &Rect) -> Self {
        let n = dets.len().max(1) as f64;
        let mut centroid = [0.0; 2];
        let mut velocity = [0.0; 2];
        for (d, v) in dets.iter().zip(velocities) {
            let f = d.foot();
            centroid = [centroid[0] + f[0] / n, centroid[1] + f[1] / n];
            velocity = [velocity[0] + v[0] / n, velocity[1] + v[1] / n];
        }
        let locs: Vec<(Vec2, Pose)> = dets.iter().map(|d| (d.foot(), d.pose)).collect();
        Self {
            id,
            centroid,
            velocity,
            mean_height: dets.iter().map(|d| d.bbox.h).sum::<f64>() / n,
            zone: group_fov(&locs, img),
        }
    }
}

/// Group score of a detection with known velocity against one group.
pub fn group_score(det: &Detection, velocity: Vec2, grp: &GroupProto, cfg: &Config) -> f64 {
    let img = cfg.image();
    let scale = cfg.group_spatial_scale * grp.mean_height;
    let motion = kernel_term(1.0, norm2(sub(velocity, grp.velocity)));
    let spatial = kernel_term(1.0 / (scale * scale), norm2(sub(det.foot(), grp.centroid)));
    let pose = 2.0 * zone_coverage(&grp.zone, det.foot(), det.pose, &img) - 1.0;
    (motion + spatial + pose) / 3.0
}

/// Group-compatibility matrix from prepared group prototypes.
pub fn build_c_protos(dets: &[Detection], velocities: &[Vec2], protos: &[GroupProto], cfg: &Config) -> Matrix {
    let rows: Vec<Vec<f64>> = dets
        .par_iter()
        .zip(velocities.par_iter())
        .map(|(d, &v)| protos.iter().map(|g| group_score(d, v, g, cfg)).collect())
        .collect();
    Matrix::from_row_vecs(dets.len(), protos.len(), rows)
}

/// Velocity of each detection implied by the track assignment `psi`.
///
/// Unassigned detections, and all detections in group-only mode, get zero
/// velocity.
pub fn detection_velocities(dets: &[Detection], psi: &[Option<usize>], tracks: &[Track], cfg: &Config) -> Vec<Vec2> {
    dets.iter()
        .zip(psi)
        .map(|(d, a)| match (cfg.mode, a) {
            (AssocMode::GroupOnly, _) | (_, None) => [0.0, 0.0],
            (_, Some(j)) => features::provisional_velocity(&tracks[*j], d, cfg.velocity_window),
        })
        .collect()
}

/// Group-compatibility matrix `C`, `N × N_g`.
pub fn build_c(
    dets: &[Detection],
    groups: &[GroupState],
    psi: &[Option<usize>],
    tracks: &[Track],
    cfg: &Config,
) -> Result<Matrix> {
    if psi.len() != dets.len() {
        return Err(Error::Dimension(format!("psi has {} rows for {} detections", psi.len(), dets.len())));
    }
    let img = cfg.image();
    let protos = groups.iter().map(|g| GroupProto::from_group(g, tracks, &img)).collect::<Result<Vec<_>>>()?;
    let vel = detection_velocities(dets, psi, tracks, cfg);
    Ok(build_c_protos(dets, &vel, &protos, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::BBox;

    fn det(frame: u64, x: f64, y: f64, pose: Pose, hist: Vec<f64>) -> Detection {
        Detection::new(frame, BBox::new(x, y, 40.0, 100.0).unwrap(), pose, hist)
    }

    fn img() -> Rect {
        Rect::new(0.0, 0.0, 720.0, 480.0)
    }

    #[test]
    fn kernel_examples() {
        let p = KernelParams::new([1.0 / 3.0; 3], [1.0; 3]).unwrap();
        assert!((score_kernel([0.0; 3], &p) - 1.0).abs() < 1e-15);
        assert!(score_kernel([50.0; 3], &p) < -0.99);
        let ln2 = std::f64::consts::LN_2;
        assert!(score_kernel([ln2; 3], &p).abs() < 1e-15);
    }

    #[test]
    fn kernel_params_validation() {
        assert!(KernelParams::new([0.5, 0.5, 0.5], [1.0; 3]).is_err());
        assert!(KernelParams::new([1.0, 0.0, 0.0], [1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn m_is_one_for_replayed_detection() {
        let h = vec![0.5, 0.5];
        let d0 = det(1, 100.0, 100.0, Pose::Right, h.clone());
        let t = Track::start(7, &d0, 20);
        let d1 = det(2, 100.0, 100.0, Pose::Right, h);
        let m = build_m(&[d1], &[t], &TrackKernel::default());
        assert_eq!((m.rows(), m.cols()), (1, 1));
        assert!((m.get(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn m_matches_direct_formula_for_moving_track() {
        let h = vec![0.25, 0.75];
        let mut t = Track::start(1, &det(1, 100.0, 100.0, Pose::Right, h.clone()), 20);
        t.push(&det(2, 102.0, 101.0, Pose::Right, h.clone()), 20);
        assert!((t.velocity[0] - 2.0).abs() < 1e-12 && (t.velocity[1] - 1.0).abs() < 1e-12);
        // next detection a bit off the predicted offset
        let d = det(3, 104.3, 102.0, Pose::Right, h.clone());
        let m = build_m(std::slice::from_ref(&d), std::slice::from_ref(&t), &TrackKernel::default()).get(0, 0);
        let offset: [f64; 2] = [2.3, 1.0];
        let expected = (1.0
            + (2.0 * (-(offset[0].powi(2) + offset[1].powi(2)) / 100.0).exp() - 1.0)
            + (2.0 * (-(0.3f64.powi(2))).exp() - 1.0))
            / 3.0;
        assert!((m - expected).abs() < 1e-12);
        assert!(m > 0.5);
    }

    #[test]
    fn m_negative_for_dissimilar_far_detection() {
        let t = Track::start(1, &det(1, 100.0, 100.0, Pose::Right, vec![1.0, 0.0]), 20);
        let d = det(2, 500.0, 300.0, Pose::Right, vec![0.0, 1.0]);
        let m = build_m(&[d], &[t], &TrackKernel::default()).get(0, 0);
        let expected = ((2.0 * (-2.0f64).exp() - 1.0) - 1.0 - 1.0) / 3.0;
        assert!(m < 0.0);
        assert!((m - expected).abs() < 1e-9);
    }

    #[test]
    fn m_without_tracks_has_no_columns() {
        let d = det(1, 0.0, 0.0, Pose::Right, vec![1.0]);
        let m = build_m(&[d], &[], &TrackKernel::default());
        assert_eq!((m.rows(), m.cols()), (1, 0));
    }

    #[test]
    fn fov_right_half() {
        let p = fov([360.0, 240.0], Pose::Right, &img());
        assert!((p.area() - 360.0 * 480.0).abs() < 1e-9);
        assert!(p.vertices.iter().all(|v| v[0] >= 360.0 - 1e-12));
    }

    #[test]
    fn fov_left_right_complementary() {
        let loc = [200.0, 100.0];
        let l = fov(loc, Pose::Left, &img());
        let r = fov(loc, Pose::Right, &img());
        assert!((l.area() + r.area() - img().area()).abs() < 1e-6);
        assert!(l.intersect(&r).area() < 1e-9);
    }

    #[test]
    fn fov_superset_scores_one() {
        // det behind the group facing the same way
        let members = [([300.0, 200.0], Pose::Right), ([300.0, 260.0], Pose::Right)];
        let s = pose_compat_members([100.0, 230.0], Pose::Right, &members, &img());
        assert!((s - 1.0).abs() < 1e-12);
        let s = pose_compat_members([100.0, 230.0], Pose::Left, &members, &img());
        assert_eq!(s, 0.0);
    }

    #[test]
    fn facing_away_members_have_zero_zone() {
        let members = [([300.0, 200.0], Pose::Right), ([200.0, 200.0], Pose::Left)];
        assert!(group_fov(&members, &img()).is_empty());
        assert_eq!(pose_compat_members([250.0, 200.0], Pose::Right, &members, &img()), 0.0);
    }

    #[test]
    fn c_is_one_for_self_equivalent_singleton() {
        let cfg = Config::default();
        let d0 = det(1, 100.0, 100.0, Pose::Front, vec![1.0]);
        let t = Track::start(3, &d0, 20);
        let g = GroupState::from_tracks(0, [&t]).unwrap();
        let d1 = det(2, 100.0, 100.0, Pose::Front, vec![1.0]);
        let c = build_c(&[d1], &[g], &[Some(0)], &[t], &cfg).unwrap();
        assert!((c.get(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn c_psi_length_checked() {
        let cfg = Config::default();
        let d = det(1, 0.0, 0.0, Pose::Front, vec![1.0]);
        assert!(build_c(&[d], &[], &[], &[], &cfg).is_err());
    }
}
