//! One-slack structured SVM with margin rescaling, trained by cutting planes.
//!
//! Every round adds one aggregated constraint
//! `w · mean_i[phi(x_i, z_i) − phi(x_i, zbar_i)] ≥ mean_i Δ(z_i, zbar_i) − ξ`
//! built from the most violated labelling of each sample, then re-solves the
//! working-set QP `min ½‖w‖² + Dξ` in its dual. The dual lives on the scaled
//! simplex `{α ≥ 0, Σα ≤ D}`; a zero-loss, zero-feature slack constraint turns
//! the inequality into an equality so pairwise (SMO-style) coordinate steps
//! keep the iterate feasible.

use rayon::prelude::*;

use crate::domain::LabelState;
use crate::error::{Error, Result};
use crate::features::Observations;
use crate::infer::{infer_tables, objective, InferOptions};
use crate::potentials::{feature_map, Layout, Tables, WeightVector};

/// Normalised Hamming distance over the concatenated `(y, g, h)`; assumes equal shapes.
pub fn hamming(zbar: &LabelState, z: &LabelState) -> f64 {
    let diff = usize::from(zbar.y != z.y)
        + zbar.g.iter().zip(&z.g).filter(|(a, b)| a != b).count()
        + zbar.h.iter().zip(&z.h).filter(|(a, b)| a != b).count();
    diff as f64 / z.len() as f64
}

/// Normalised Hamming loss between two labellings of the same frame.
pub fn loss(zbar: &LabelState, z: &LabelState) -> Result<f64> {
    if zbar.g.len() != z.g.len() || zbar.h.len() != z.h.len() {
        return Err(Error::Dimension(format!(
            "label shapes differ: ({}, {}) vs ({}, {})",
            zbar.g.len(),
            zbar.h.len(),
            z.g.len(),
            z.h.len()
        )));
    }
    Ok(hamming(zbar, z))
}

/// One training frame with its ground-truth structure and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub obs: Observations,
    pub grouping: Vec<usize>,
    pub truth: LabelState,
}

impl TrainSample {
    pub fn new(obs: Observations, grouping: Vec<usize>, truth: LabelState) -> Result<Self> {
        if truth.h.len() != obs.xi.len() || truth.g.len() != obs.xg.len() || grouping.len() != obs.xi.len() {
            return Err(Error::Dimension("training labels do not match the grouping".into()));
        }
        Ok(Self { obs, grouping, truth })
    }
}

/// Most violated labelling: loss-augmented inference, best of a ground-truth
/// start and a cold start.
pub fn most_violated(w: &WeightVector, sample: &TrainSample, opts: &InferOptions) -> Result<LabelState> {
    let tables = Tables::new(w, &sample.obs, &sample.grouping)?;
    most_violated_tables(&tables, sample, opts)
}

fn most_violated_tables(tables: &Tables, sample: &TrainSample, opts: &InferOptions) -> Result<LabelState> {
    let truth = Some(&sample.truth);
    let from_truth = infer_tables(tables, truth, truth, opts)?.labels;
    let from_cold = infer_tables(tables, None, truth, opts)?.labels;
    let a = objective(tables, &from_truth, truth);
    let b = objective(tables, &from_cold, truth);
    Ok(if b > a { from_cold } else { from_truth })
}

/// Aggregated constraints of the cutting-plane working set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorkingSet {
    /// Mean feature differences `mean[phi(z) − phi(zbar)]`.
    pub diffs: Vec<Vec<f64>>,
    /// Mean losses, each in `[0, 1]`.
    pub losses: Vec<f64>,
}

impl WorkingSet {
    pub fn push(&mut self, diff: Vec<f64>, loss: f64) {
        self.diffs.push(diff);
        self.losses.push(loss);
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub w: Vec<f64>,
    pub xi: f64,
    /// Dual multiplier per working-set constraint.
    pub alpha: Vec<f64>,
    pub primal: f64,
    pub dual: f64,
    /// Largest first-order violation of the dual optimality conditions.
    pub kkt_residual: f64,
    pub steps: usize,
}

impl QpSolution {
    pub fn gap(&self) -> f64 {
        self.primal - self.dual
    }
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const QP_TOL: f64 = 1e-10;
const QP_MAX_STEPS: usize = 2_000_000;

/// Solves the working-set QP `min ½‖w‖² + Dξ  s.t.  w·u_r ≥ ℓ_r − ξ, ξ ≥ 0`.
pub fn solve_qp(ws: &WorkingSet, dreg: f64) -> QpSolution {
    solve_qp_warm(ws, dreg, None)
}

/// [`solve_qp`] starting from previous multipliers (missing entries start at zero).
pub fn solve_qp_warm(ws: &WorkingSet, dreg: f64, warm: Option<&[f64]>) -> QpSolution {
    let r = ws.len();
    let dim = ws.diffs.first().map_or(0, Vec::len);
    // index 0 is the slack constraint
    let mut gram = vec![vec![0.0; r + 1]; r + 1];
    for a in 0..r {
        for b in a..r {
            let k = dotv(&ws.diffs[a], &ws.diffs[b]);
            gram[a + 1][b + 1] = k;
            gram[b + 1][a + 1] = k;
        }
    }
    let lin: Vec<f64> = std::iter::once(0.0).chain(ws.losses.iter().copied()).collect();

    let mut alpha = vec![0.0; r + 1];
    if let Some(prev) = warm {
        for (a, &p) in alpha[1..].iter_mut().zip(prev) {
            *a = p.max(0.0);
        }
        let s: f64 = alpha[1..].iter().sum();
        if s > dreg {
            alpha[1..].iter_mut().for_each(|a| *a *= dreg / s);
        }
    }
    alpha[0] = (dreg - alpha[1..].iter().sum::<f64>()).max(0.0);

    let mut grad: Vec<f64> = (0..=r).map(|i| lin[i] - (0..=r).map(|j| gram[i][j] * alpha[j]).sum::<f64>()).collect();

    let mut steps = 0;
    let mut residual;
    loop {
        let (mut up, mut down) = (0, usize::MAX);
        for i in 0..=r {
            if grad[i] > grad[up] {
                up = i;
            }
            if alpha[i] > 0.0 && (down == usize::MAX || grad[i] < grad[down]) {
                down = i;
            }
        }
        residual = if down == usize::MAX { 0.0 } else { grad[up] - grad[down] };
        if residual <= QP_TOL || steps >= QP_MAX_STEPS {
            break;
        }
        let eta = gram[up][up] + gram[down][down] - 2.0 * gram[up][down];
        let t = if eta > 0.0 { ((grad[up] - grad[down]) / eta).min(alpha[down]) } else { alpha[down] };
        alpha[up] += t;
        alpha[down] -= t;
        if alpha[down] < 1e-300 {
            alpha[down] = 0.0;
        }
        for (i, g) in grad.iter_mut().enumerate() {
            *g -= t * (gram[i][up] - gram[i][down]);
        }
        steps += 1;
        // refresh gradients now and then to cancel drift
        if steps % 4096 == 0 {
            for (i, g) in grad.iter_mut().enumerate() {
                *g = lin[i] - (0..=r).map(|j| gram[i][j] * alpha[j]).sum::<f64>();
            }
        }
    }

    let mut w = vec![0.0; dim];
    for (a, u) in alpha[1..].iter().zip(&ws.diffs) {
        if *a != 0.0 {
            for (wk, uk) in w.iter_mut().zip(u) {
                *wk += a * uk;
            }
        }
    }
    let xi = ws.diffs.iter().zip(&ws.losses).map(|(u, l)| l - dotv(&w, u)).fold(0.0, f64::max);
    let wsq = dotv(&w, &w);
    let primal = 0.5 * wsq + dreg * xi;
    let dual = dotv(&alpha[1..], &ws.losses) - 0.5 * wsq;
    QpSolution { w, xi, alpha: alpha[1..].to_vec(), primal, dual, kkt_residual: residual.max(0.0), steps }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub dreg: f64,
    pub eps_cp: f64,
    pub max_rounds: usize,
    pub infer: InferOptions,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { dreg: 100.0, eps_cp: 1e-3, max_rounds: 500, infer: InferOptions::default() }
    }
}

/// Per-round record of the cutting-plane loop.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundStat {
    /// Violation of the new constraint beyond the current slack.
    pub violation: f64,
    pub qp_primal: f64,
    pub qp_gap: f64,
    pub kkt_residual: f64,
    /// Largest violation of any working-set constraint by the returned `(w, ξ)`.
    pub feasibility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub w: WeightVector,
    pub xi: f64,
    pub rounds: usize,
    pub stats: Vec<RoundStat>,
}

/// Cutting-plane training over `samples`.
pub fn train(samples: &[TrainSample], layout: Layout, opts: &TrainOptions) -> Result<TrainReport> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("training needs at least one sample".into()));
    }
    let truth_phi = samples
        .iter()
        .map(|s| feature_map(&layout, &s.truth, &s.obs, &s.grouping).map(|p| p.data))
        .collect::<Result<Vec<_>>>()?;
    let inv_s = 1.0 / samples.len() as f64;

    let mut w = WeightVector::zeros(layout);
    let mut xi = 0.0;
    let mut ws = WorkingSet::default();
    let mut alpha: Vec<f64> = Vec::new();
    let mut stats = Vec::new();

    for round in 1..=opts.max_rounds {
        let per_sample = samples
            .par_iter()
            .zip(truth_phi.par_iter())
            .map(|(s, phi_t)| {
                let zbar = most_violated(&w, s, &opts.infer)?;
                let phi_bar = feature_map(&layout, &zbar, &s.obs, &s.grouping)?;
                let diff: Vec<f64> = phi_t.iter().zip(&phi_bar.data).map(|(a, b)| a - b).collect();
                Ok((diff, hamming(&zbar, &s.truth)))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut diff = vec![0.0; layout.len()];
        let mut mean_loss = 0.0;
        for (d, l) in &per_sample {
            for (a, b) in diff.iter_mut().zip(d) {
                *a += b * inv_s;
            }
            mean_loss += l * inv_s;
        }
        let violation = mean_loss - dotv(&w.data, &diff);
        if violation <= xi + opts.eps_cp {
            return Ok(TrainReport { w, xi, rounds: round, stats });
        }

        ws.push(diff, mean_loss);
        let sol = solve_qp_warm(&ws, opts.dreg, Some(&alpha));
        let feasibility =
            ws.diffs.iter().zip(&ws.losses).map(|(u, l)| l - sol.xi - dotv(&sol.w, u)).fold(0.0, f64::max);
        stats.push(RoundStat {
            violation: violation - xi,
            qp_primal: sol.primal,
            qp_gap: sol.gap(),
            kkt_residual: sol.kkt_residual,
            feasibility,
        });
        alpha = sol.alpha;
        xi = sol.xi;
        w = WeightVector::from_vec(layout, sol.w)?;
    }
    Err(Error::NotConverged { rounds: opts.max_rounds, last: w.data })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_examples() {
        let z = LabelState { y: 1, g: vec![0], h: vec![1, 0] };
        assert_eq!(loss(&z, &z).unwrap(), 0.0);
        let far = LabelState { y: 0, g: vec![1], h: vec![0, 1] };
        assert_eq!(loss(&far, &z).unwrap(), 1.0);
        let y_only = LabelState { y: 2, ..z.clone() };
        assert_eq!(loss(&y_only, &z).unwrap(), 0.25);
        let bad = LabelState { y: 0, g: vec![], h: vec![0, 1] };
        assert!(loss(&bad, &z).is_err());
    }

    #[test]
    fn single_constraint_closed_form() {
        for (u, l, d) in [(vec![1.0, 2.0], 0.5, 100.0), (vec![3.0, -1.0, 0.5], 0.9, 0.01), (vec![0.1], 1.0, 2.0)] {
            let mut ws = WorkingSet::default();
            ws.push(u.clone(), l);
            let sol = solve_qp(&ws, d);
            let nu: f64 = u.iter().map(|v| v * v).sum();
            let a = d.min(l / nu);
            for (wk, uk) in sol.w.iter().zip(&u) {
                assert!((wk - a * uk).abs() < 1e-9, "{wk} vs {}", a * uk);
            }
            assert!(sol.kkt_residual <= 1e-6);
            assert!(sol.gap() <= 1e-6);
        }
    }

    #[test]
    fn zero_loss_constraints_give_zero_weights() {
        let mut ws = WorkingSet::default();
        ws.push(vec![1.0, 0.0], 0.0);
        ws.push(vec![0.0, -2.0], 0.0);
        let sol = solve_qp(&ws, 10.0);
        assert!(sol.w.iter().all(|v| v.abs() < 1e-12));
        assert_eq!(sol.xi, 0.0);
    }

    #[test]
    fn degenerate_label_spaces_need_no_weights() {
        let layout = Layout { n_y: 1, n_g: 1, n_h: 1, dim_x0: 3, dim_xg: 2, dim_xi: 3 };
        let obs = Observations {
            x0: vec![0.2, 0.3, 0.5],
            xg: vec![vec![1.0, 0.5]],
            xi: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
        };
        let s = TrainSample::new(obs, vec![0, 0], LabelState { y: 0, g: vec![0], h: vec![0, 0] }).unwrap();
        let rep = train(&[s], layout, &TrainOptions::default()).unwrap();
        assert!(rep.w.data.iter().all(|&v| v == 0.0));
        assert_eq!(rep.xi, 0.0);
        assert_eq!(rep.rounds, 1);
    }
}
