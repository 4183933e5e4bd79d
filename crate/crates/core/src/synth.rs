//! Synthetic crowd scenes with full ground truth.
//!
//! Each group is placed in its spawn region in a formation that depends on
//! its activity: walkers move side by side, waiting people stand side by side
//! facing away from their line, queues stand in line facing the same way, and
//! talking people stand on a circle facing its centre. Generation is a pure
//! function of the scenario, seed included.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{Action, BBox, Collective, Detection, Frame, GroundTruth, GroupActivity, Pose, Vec2};
use crate::error::{Error, Result};
use crate::geometry::{segments_intersect, Rect};

fn default_speed() -> f64 {
    2.0
}

fn default_spacing() -> f64 {
    30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub size: usize,
    pub activity: GroupActivity,
    /// `[x0, y0, x1, y1]`; the formation is centred in it at frame 0.
    pub spawn: [f64; 4],
    /// Facing (and, for walkers, motion) direction in radians, image axes.
    pub heading: f64,
    /// Pixels per frame, walkers only.
    #[serde(default = "default_speed")]
    pub speed: f64,
    /// Distance between neighbouring members.
    #[serde(default = "default_spacing")]
    pub spacing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Noise {
    /// Foot position σ in pixels.
    pub position: f64,
    /// Probability of replacing a pose by a uniformly drawn one.
    pub pose_flip: f64,
    /// σ of additive histogram noise before renormalisation.
    pub appearance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub seed: u64,
    pub width: f64,
    pub height: f64,
    pub frames: usize,
    pub hist_bins: usize,
    pub box_height: f64,
    /// Half-width, in frames, of the window over which crossing paths are checked.
    pub crossing_window: usize,
    pub noise: Noise,
    pub groups: Vec<GroupSpec>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            seed: 0,
            width: 720.0,
            height: 480.0,
            frames: 40,
            hist_bins: 24,
            box_height: 60.0,
            crossing_window: 10,
            noise: Noise::default(),
            groups: Vec::new(),
        }
    }
}

/// Generator output. `headings` and `velocities` are aligned with the
/// detections of every frame and hold the noise-free values.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub frames: Vec<Frame>,
    pub headings: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<Vec2>>,
    pub collective: Vec<Collective>,
}

struct Member {
    offset: Vec2,
    facing: f64,
    height: f64,
    signature: Vec<f64>,
}

fn rect_of(s: &[f64; 4]) -> Result<Rect> {
    if !(s[2] > s[0] && s[3] > s[1]) {
        return Err(Error::InvalidInput(format!("spawn region {s:?} is empty")));
    }
    Ok(Rect::new(s[0], s[1], s[2], s[3]))
}

fn overlaps(a: &Rect, b: &Rect) -> bool {
    a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1
}

fn validate(sc: &Scenario) -> Result<Vec<Rect>> {
    if sc.hist_bins == 0 || [sc.box_height, sc.width, sc.height].iter().any(|v| v.is_nan() || *v <= 0.0) {
        return Err(Error::InvalidInput("scenario needs positive canvas, box height and histogram length".into()));
    }
    let n = sc.noise;
    if !(n.position >= 0.0 && n.appearance >= 0.0 && (0.0..=1.0).contains(&n.pose_flip)) {
        return Err(Error::InvalidInput("noise levels out of range".into()));
    }
    let rects = sc.groups.iter().map(|g| rect_of(&g.spawn)).collect::<Result<Vec<_>>>()?;
    for (i, g) in sc.groups.iter().enumerate() {
        if g.size == 0 {
            return Err(Error::InvalidInput(format!("group {i} is empty")));
        }
        for j in 0..i {
            if overlaps(&rects[i], &rects[j]) {
                return Err(Error::InvalidInput(format!("spawn regions of groups {j} and {i} overlap")));
            }
        }
    }
    Ok(rects)
}

fn formation(g: &GroupSpec) -> Vec<(Vec2, f64)> {
    let (u, n) = ([g.heading.cos(), g.heading.sin()], [-g.heading.sin(), g.heading.cos()]);
    let k = g.size as f64;
    (0..g.size)
        .map(|i| {
            let c = i as f64 - (k - 1.0) / 2.0;
            match g.activity {
                GroupActivity::Walking | GroupActivity::Waiting => {
                    ([c * g.spacing * n[0], c * g.spacing * n[1]], g.heading)
                }
                GroupActivity::Queuing => ([-c * g.spacing * u[0], -c * g.spacing * u[1]], g.heading),
                GroupActivity::Talking => {
                    let r = if g.size == 1 {
                        0.0
                    } else {
                        (g.spacing / (2.0 * (std::f64::consts::PI / k).sin())).max(0.5 * g.spacing)
                    };
                    let phi = g.heading + 2.0 * std::f64::consts::PI * i as f64 / k;
                    ([r * phi.cos(), r * phi.sin()], phi + std::f64::consts::PI)
                }
            }
        })
        .collect()
}

fn group_velocity(g: &GroupSpec) -> Vec2 {
    match g.activity {
        GroupActivity::Walking => [g.speed * g.heading.cos(), g.speed * g.heading.sin()],
        _ => [0.0, 0.0],
    }
}

fn centre(r: &Rect) -> Vec2 {
    [(r.x0 + r.x1) / 2.0, (r.y0 + r.y1) / 2.0]
}

/// Noise-free centroid of group `g` at (possibly fractional) time `t`.
fn centroid_at(spawn: &Rect, g: &GroupSpec, t: f64) -> Vec2 {
    let c = centre(spawn);
    let v = group_velocity(g);
    let offs = formation(g);
    let k = offs.len() as f64;
    let mean = offs.iter().fold([0.0, 0.0], |a, (o, _)| [a[0] + o[0] / k, a[1] + o[1] / k]);
    [c[0] + mean[0] + v[0] * t, c[1] + mean[1] + v[1] * t]
}

/// True when two walking groups' centroid paths over `[t − w, t + w]`
/// (clamped to the video) intersect.
pub fn crossing_at(sc: &Scenario, t: usize) -> Result<bool> {
    let rects = validate(sc)?;
    Ok(crossing_with(sc, &rects, t))
}

fn crossing_with(sc: &Scenario, rects: &[Rect], t: usize) -> bool {
    let last = sc.frames.saturating_sub(1);
    let (t0, t1) = (t.saturating_sub(sc.crossing_window) as f64, (t + sc.crossing_window).min(last) as f64);
    let walkers: Vec<usize> =
        (0..sc.groups.len()).filter(|&i| sc.groups[i].activity == GroupActivity::Walking).collect();
    walkers.iter().enumerate().any(|(a, &i)| {
        walkers[a + 1..].iter().any(|&j| {
            let (gi, gj) = (&sc.groups[i], &sc.groups[j]);
            segments_intersect(
                centroid_at(&rects[i], gi, t0),
                centroid_at(&rects[i], gi, t1),
                centroid_at(&rects[j], gj, t0),
                centroid_at(&rects[j], gj, t1),
            )
        })
    })
}

/// Majority group activity weighted by member count; ties go to the lower
/// collective index.
pub fn majority_collective(groups: &[GroupSpec]) -> Collective {
    let mut counts = [0usize; Collective::COUNT];
    for g in groups {
        counts[g.activity.as_collective().index()] += g.size;
    }
    let best = (0..counts.len()).fold(0, |b, i| if counts[i] > counts[b] { i } else { b });
    Collective::ALL[best]
}

fn normalise(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    } else {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
    }
}

/// Generates a labelled detection stream.
pub fn generate(sc: &Scenario) -> Result<Generated> {
    let rects = validate(sc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let pos_noise = Normal::new(0.0, sc.noise.position.max(0.0)).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let app_noise = Normal::new(0.0, sc.noise.appearance.max(0.0)).map_err(|e| Error::InvalidInput(e.to_string()))?;

    let mut members: Vec<Vec<Member>> = Vec::with_capacity(sc.groups.len());
    for g in &sc.groups {
        let mut ms = Vec::with_capacity(g.size);
        for (offset, facing) in formation(g) {
            let mut signature: Vec<f64> = (0..sc.hist_bins).map(|_| rng.random::<f64>()).collect();
            normalise(&mut signature);
            ms.push(Member { offset, facing, height: sc.box_height * rng.random_range(0.9..1.1), signature });
        }
        members.push(ms);
    }

    let global = majority_collective(&sc.groups);
    let mut frames = Vec::with_capacity(sc.frames);
    let mut headings = Vec::with_capacity(sc.frames);
    let mut velocities = Vec::with_capacity(sc.frames);
    let mut collective = Vec::with_capacity(sc.frames);
    for t in 0..sc.frames {
        let y = if crossing_with(sc, &rects, t) { Collective::Crossing } else { global };
        let mut dets = Vec::new();
        let mut hs = Vec::new();
        let mut vs = Vec::new();
        let mut track = 0u64;
        for (gi, (g, ms)) in sc.groups.iter().zip(&members).enumerate() {
            let c = centre(&rects[gi]);
            let v = group_velocity(g);
            for m in ms {
                let foot = [
                    c[0] + m.offset[0] + v[0] * t as f64 + pos_noise.sample(&mut rng),
                    c[1] + m.offset[1] + v[1] * t as f64 + pos_noise.sample(&mut rng),
                ];
                let w = 0.4 * m.height;
                let bbox = BBox::new(foot[0] - w / 2.0, foot[1] - m.height, w, m.height)?;
                let mut pose = Pose::from_angle(m.facing);
                if rng.random::<f64>() < sc.noise.pose_flip {
                    pose = Pose::ALL[rng.random_range(0..Pose::COUNT)];
                }
                let mut hist: Vec<f64> =
                    m.signature.iter().map(|&s| (s + app_noise.sample(&mut rng)).max(0.0)).collect();
                normalise(&mut hist);
                let mut d = Detection::new(t as u64, bbox, pose, hist);
                d.gt = Some(GroundTruth {
                    track,
                    group: gi as u64,
                    action: if g.activity == GroupActivity::Walking { Action::Walking } else { Action::Standing },
                    group_act: g.activity,
                    collective: y,
                });
                dets.push(d);
                hs.push(m.facing);
                vs.push(v);
                track += 1;
            }
        }
        frames.push(Frame { index: t as u64, detections: dets });
        headings.push(hs);
        velocities.push(vs);
        collective.push(y);
    }
    Ok(Generated { frames, headings, velocities, collective })
}

/// Ready-made scenarios.
pub mod presets {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::{GroupSpec, Noise, Scenario};
    use crate::domain::{Collective, GroupActivity};

    fn region(cx: f64, cy: f64, half: f64) -> [f64; 4] {
        [cx - half, cy - half, cx + half, cy + half]
    }

    fn spec(size: usize, activity: GroupActivity, cx: f64, cy: f64, heading: f64) -> GroupSpec {
        GroupSpec { size, activity, spawn: region(cx, cy, 60.0), heading, speed: 2.0, spacing: 30.0 }
    }

    const CROSS_SPEED: f64 = 2.5;
    const CROSS_HALF: f64 = 30.0;

    /// Two walker groups, one horizontal (`h`) and one vertical (`v`), whose
    /// centroids pass `p` at fractions `la` and `lb` of the video.
    fn crossing_pair(
        rng: &mut ChaCha8Rng,
        p: [f64; 2],
        h: f64,
        v: f64,
        frames: usize,
        la: f64,
        lb: f64,
    ) -> [GroupSpec; 2] {
        let f = frames as f64;
        let a = [p[0] - CROSS_SPEED * f * la * h.cos(), p[1]];
        // short videos would otherwise spawn both groups on top of each other
        let lead = (CROSS_SPEED * f * lb).max(2.0 * CROSS_HALF + 1.0);
        let b = [p[0], p[1] - lead * v.sin()];
        let mut ga = spec(rng.random_range(2..=4), GroupActivity::Walking, a[0], a[1], h);
        let mut gb = spec(rng.random_range(2..=4), GroupActivity::Walking, b[0], b[1], v);
        for g in [&mut ga, &mut gb] {
            g.speed = CROSS_SPEED;
            g.spawn = region(g.spawn[0] + 60.0, g.spawn[1] + 60.0, CROSS_HALF);
        }
        [ga, gb]
    }

    /// Two talking groups of three people each.
    pub fn two_talking_groups(seed: u64) -> Scenario {
        Scenario {
            seed,
            frames: 20,
            groups: vec![
                spec(3, GroupActivity::Talking, 200.0, 240.0, 0.0),
                spec(3, GroupActivity::Talking, 520.0, 240.0, 0.0),
            ],
            ..Scenario::default()
        }
    }

    /// A single-activity scene whose classes are linearly separable in the
    /// recognition features: walkers head left or right, crossings pair a
    /// horizontal with a vertical walker group, waiting and queuing groups
    /// face diagonal directions, talking groups face along the axes.
    pub fn separable(kind: Collective, seed: u64, frames: usize) -> Scenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
        let mut size = |lo: usize, hi: usize| rng.random_range(lo..=hi);
        let groups = match kind {
            Collective::Walking => {
                let (heading, x) = if seed.is_multiple_of(2) { (0.0, 180.0) } else { (PI, 540.0) };
                vec![
                    spec(size(2, 4), GroupActivity::Walking, x, 130.0, heading),
                    spec(size(2, 4), GroupActivity::Walking, x, 360.0, heading),
                ]
            }
            Collective::Crossing => {
                let h = if seed.is_multiple_of(2) { 0.0 } else { PI };
                let v = if (seed / 2).is_multiple_of(2) { FRAC_PI_2 } else { -FRAC_PI_2 };
                crossing_pair(&mut rng, [360.0, 240.0], h, v, frames, 0.2, 0.8).to_vec()
            }
            Collective::Waiting | Collective::Queuing => {
                let act = if kind == Collective::Waiting { GroupActivity::Waiting } else { GroupActivity::Queuing };
                vec![
                    spec(size(2, 4), act, 200.0, 150.0, -3.0 * FRAC_PI_4),
                    spec(size(2, 4), act, 520.0, 340.0, FRAC_PI_4),
                ]
            }
            Collective::Talking => {
                let mut talk = |cx: f64| {
                    let n = if rng.random::<bool>() { 2 } else { 4 };
                    let heading = if rng.random::<bool>() { 0.0 } else { FRAC_PI_2 };
                    spec(n, GroupActivity::Talking, cx, 240.0, heading)
                };
                vec![talk(200.0), talk(520.0)]
            }
        };
        Scenario {
            seed,
            frames,
            crossing_window: frames,
            noise: Noise { position: 0.5, pose_flip: 0.0, appearance: 0.01 },
            groups,
            ..Scenario::default()
        }
    }

    /// A cluttered scene for the association ablations: two walking groups
    /// whose paths cross, plus a stationary group.
    pub fn ablation(seed: u64) -> Scenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00ab_1a7e);
        let frames = 40usize;
        let h = if rng.random::<bool>() { 0.0 } else { PI };
        let v = if rng.random::<bool>() { FRAC_PI_2 } else { -FRAC_PI_2 };
        let px = rng.random_range(300.0..420.0);
        let py = rng.random_range(200.0..280.0);
        let la = rng.random_range(0.15..0.3);
        let lb = rng.random_range(0.7..0.85);
        let pair = crossing_pair(&mut rng, [px, py], h, v, frames, la, lb);
        let mut groups = pair.to_vec();
        let stationary = [
            (GroupActivity::Waiting, -3.0 * FRAC_PI_4),
            (GroupActivity::Queuing, -FRAC_PI_4),
            (GroupActivity::Talking, 0.0),
        ];
        let (act, heading) = stationary[rng.random_range(0..stationary.len())];
        let corner = if py < 240.0 { [110.0, 420.0] } else { [110.0, 70.0] };
        let mut gc = spec(rng.random_range(2..=3), act, corner[0], corner[1], heading);
        gc.spawn = region(corner[0], corner[1], 50.0);
        groups.push(gc);
        Scenario {
            seed,
            frames,
            crossing_window: 5,
            noise: Noise { position: 1.0, pose_flip: 0.05, appearance: 0.02 },
            groups,
            ..Scenario::default()
        }
    }
}
