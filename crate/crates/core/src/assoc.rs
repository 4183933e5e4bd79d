//! Joint track/group association.
//!
//! With `M` and `C` fixed, the binary program
//! `max Σ Ψ_ij M_ij + λ Σ Ω_il C_il` under "at most one per row/column" for
//! `Ψ` and "at most one per row" for `Ω` splits into a maximum-weight
//! bipartite matching over the positive entries of `M` and an independent
//! per-row argmax over `C`. The group-growing loop wraps that solve: any
//! detection left without a group seeds a new one and the problem is solved
//! again.

use crate::compat::{self, GroupProto};
use crate::config::{AssocMode, Config};
use crate::domain::{assignment_matrix, Detection, GroupState, Matrix, Track};
use crate::error::{Error, Result};

/// Fixed-matrix association problem.
#[derive(Debug, Clone, PartialEq)]
pub struct AssocProblem {
    /// Track scores, `N × T`.
    pub m: Matrix,
    /// Group scores, `N × N_g`.
    pub c: Matrix,
    pub lambda: f64,
}

impl AssocProblem {
    pub fn new(m: Matrix, c: Matrix, lambda: f64) -> Result<Self> {
        if m.rows() != c.rows() && m.cols() > 0 && c.cols() > 0 {
            return Err(Error::Dimension(format!("M has {} rows, C has {}", m.rows(), c.rows())));
        }
        if lambda.is_nan() || lambda <= 0.0 {
            return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { m, c, lambda })
    }

    /// Objective value of an arbitrary assignment.
    pub fn objective(&self, psi: &[Option<usize>], omega: &[Option<usize>]) -> f64 {
        let t: f64 = psi.iter().enumerate().filter_map(|(i, j)| j.map(|j| self.m.get(i, j))).sum();
        let g: f64 = omega.iter().enumerate().filter_map(|(i, l)| l.map(|l| self.c.get(i, l))).sum();
        t + self.lambda * g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssocSolution {
    /// Track of each detection.
    pub psi: Vec<Option<usize>>,
    /// Group of each detection.
    pub omega: Vec<Option<usize>>,
    pub tracks: usize,
    pub groups: usize,
    pub objective: f64,
}

impl AssocSolution {
    pub fn psi_matrix(&self) -> Vec<Vec<u8>> {
        assignment_matrix(&self.psi, self.tracks)
    }

    pub fn omega_matrix(&self) -> Vec<Vec<u8>> {
        assignment_matrix(&self.omega, self.groups)
    }
}

/// Checks the association constraints on binary matrices: every `Ψ` row and
/// column and every `Ω` row has at most one entry set.
pub fn satisfies_constraints(psi: &[Vec<u8>], omega: &[Vec<u8>]) -> bool {
    let binary = psi.iter().chain(omega).all(|r| r.iter().all(|&v| v <= 1));
    let rows_ok = psi.iter().chain(omega).all(|r| r.iter().map(|&v| v as usize).sum::<usize>() <= 1);
    let cols = psi.first().map_or(0, Vec::len);
    let cols_ok = (0..cols).all(|j| psi.iter().map(|r| r[j] as usize).sum::<usize>() <= 1);
    binary && rows_ok && cols_ok
}

/// Minimum-cost assignment of every row to a distinct column (`rows ≤ cols`),
/// by the shortest augmenting path form of the Hungarian method.
fn hungarian_min(cost: &[Vec<f64>], cols: usize) -> Vec<usize> {
    let n = cost.len();
    debug_assert!(n <= cols);
    // 1-based potentials, column 0 is the virtual source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=cols {
        if owner[j] != 0 {
            assign[owner[j] - 1] = j - 1;
        }
    }
    assign
}

/// Maximum-weight matching using only strictly positive entries of `w`.
pub fn max_weight_matching(w: &Matrix) -> Vec<Option<usize>> {
    let (n, t) = (w.rows(), w.cols());
    let mut out = vec![None; n];
    if n == 0 || t == 0 {
        return out;
    }
    let gain = |i: usize, j: usize| w.get(i, j).max(0.0);
    if n <= t {
        let cost: Vec<Vec<f64>> = (0..n).map(|i| (0..t).map(|j| -gain(i, j)).collect()).collect();
        for (i, j) in hungarian_min(&cost, t).into_iter().enumerate() {
            if w.get(i, j) > 0.0 {
                out[i] = Some(j);
            }
        }
    } else {
        let cost: Vec<Vec<f64>> = (0..t).map(|j| (0..n).map(|i| -gain(i, j)).collect()).collect();
        for (j, i) in hungarian_min(&cost, n).into_iter().enumerate() {
            if w.get(i, j) > 0.0 {
                out[i] = Some(j);
            }
        }
    }
    out
}

/// Per-row argmax of `C` restricted to positive rows; ties go to the lowest column.
pub fn best_groups(c: &Matrix) -> Vec<Option<usize>> {
    (0..c.rows())
        .map(|i| {
            let row = c.row(i);
            let mut best: Option<usize> = None;
            for (l, &v) in row.iter().enumerate() {
                if v > 0.0 && best.is_none_or(|b| v > row[b]) {
                    best = Some(l);
                }
            }
            best
        })
        .collect()
}

/// Exact optimum of the association program with fixed `M` and `C`.
pub fn solve_fixed(prob: &AssocProblem) -> AssocSolution {
    let n = prob.m.rows().max(prob.c.rows());
    let mut psi = max_weight_matching(&prob.m);
    psi.resize(n, None);
    let mut omega = best_groups(&prob.c);
    omega.resize(n, None);
    let objective = prob.objective(&psi, &omega);
    AssocSolution { psi, omega, tracks: prob.m.cols(), groups: prob.c.cols(), objective }
}

/// Result of the group-growing association for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupingOutput {
    pub psi: Vec<Option<usize>>,
    /// Group index (into `groups`) of every detection.
    pub omega: Vec<usize>,
    /// Candidate groups, carried-over ones first, then the seeded ones.
    pub groups: Vec<GroupProto>,
    /// Number of groups seeded by the loop.
    pub iterations: usize,
    /// Solution of every solve, for constraint checks.
    pub trace: Vec<AssocSolution>,
    pub next_group_id: u64,
}

/// Group-growing association.
///
/// `dets` must be in canonical order. Singleton groups of `prev_groups` are
/// discarded before the first solve. On the first frame of a stream
/// (`first_frame`), all detections start in one group.
pub fn grow_groups(
    dets: &[Detection],
    tracks: &[Track],
    prev_groups: &[GroupState],
    first_frame: bool,
    cfg: &Config,
    mut next_group_id: u64,
) -> Result<GroupingOutput> {
    let n = dets.len();
    let img = cfg.image();
    let m = compat::build_m(dets, tracks, &cfg.track_kernel);
    let psi = max_weight_matching(&m);

    if n == 0 {
        return Ok(GroupingOutput {
            psi,
            omega: Vec::new(),
            groups: Vec::new(),
            iterations: 0,
            trace: Vec::new(),
            next_group_id,
        });
    }

    let velocities = compat::detection_velocities(dets, &psi, tracks, cfg);

    if cfg.mode == AssocMode::TrackOnly {
        let groups: Vec<GroupProto> = dets
            .iter()
            .zip(&velocities)
            .map(|(d, v)| {
                let id = next_group_id;
                next_group_id += 1;
                GroupProto::from_detections(id, &[d], std::slice::from_ref(v), &img)
            })
            .collect();
        return Ok(GroupingOutput {
            psi,
            omega: (0..n).collect(),
            groups,
            iterations: 0,
            trace: Vec::new(),
            next_group_id,
        });
    }

    let mut groups: Vec<GroupProto> = prev_groups
        .iter()
        .filter(|g| g.members.len() >= 2)
        .map(|g| GroupProto::from_group(g, tracks, &img))
        .collect::<Result<_>>()?;
    if cfg.mode == AssocMode::GroupOnly {
        for g in &mut groups {
            g.velocity = [0.0, 0.0];
        }
    }
    if first_frame && groups.is_empty() {
        let all: Vec<&Detection> = dets.iter().collect();
        groups.push(GroupProto::from_detections(next_group_id, &all, &velocities, &img));
        next_group_id += 1;
    }

    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let c = compat::build_c_protos(dets, &velocities, &groups, cfg);
        let prob = AssocProblem::new(m.clone(), c, cfg.lambda)?;
        let sol = solve_fixed(&prob);
        let seed = sol.omega.iter().position(Option::is_none);
        trace.push(sol);
        let Some(i) = seed else { break };
        if iterations >= n {
            return Err(Error::InvalidInput("group growing exceeded one seed per detection".into()));
        }
        groups.push(GroupProto::from_detections(next_group_id, &[&dets[i]], &velocities[i..=i], &img));
        next_group_id += 1;
        iterations += 1;
    }
    let last = trace.last().expect("at least one solve");
    Ok(GroupingOutput {
        psi: last.psi.clone(),
        omega: last.omega.iter().map(|l| l.expect("every detection grouped")).collect(),
        groups,
        iterations,
        trace,
        next_group_id,
    })
}
