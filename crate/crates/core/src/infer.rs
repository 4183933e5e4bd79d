//! Coordinate-ascent inference over `(y, g, h)`.
//!
//! Each sweep updates the collective label, then every group label in order,
//! then every person label in order, each by an exact argmax with the others
//! held fixed. An optional Hamming-loss bonus turns this into loss-augmented
//! inference for learning.

use crate::domain::LabelState;
use crate::error::{Error, Result};
use crate::features::Observations;
use crate::potentials::{Tables, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferOptions {
    /// Stop once the fraction of changed labels is at most this.
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for InferOptions {
    fn default() -> Self {
        Self { eps: 0.01, max_iter: 50 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferOutput {
    pub labels: LabelState,
    pub iterations: usize,
    /// Objective at the start and after every sweep.
    pub objective_trace: Vec<f64>,
    /// Change rate of every sweep.
    pub err_trace: Vec<f64>,
    /// True when the sweep cap was hit before the change rate fell below `eps`.
    pub capped: bool,
}

/// Loss bonus for labelling a component with `label` when the truth is `truth`.
#[derive(Debug, Clone, Copy)]
struct LossTerm<'a> {
    truth: &'a LabelState,
    unit: f64,
}

impl LossTerm<'_> {
    fn y(&self, label: usize) -> f64 {
        if label != self.truth.y {
            self.unit
        } else {
            0.0
        }
    }
    fn g(&self, i: usize, label: usize) -> f64 {
        if label != self.truth.g[i] {
            self.unit
        } else {
            0.0
        }
    }
    fn h(&self, p: usize, label: usize) -> f64 {
        if label != self.truth.h[p] {
            self.unit
        } else {
            0.0
        }
    }
}

/// Argmax that keeps `current` when it attains the maximum, else takes the
/// lowest maximising index.
fn argmax_keep(values: &[f64], current: usize) -> usize {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * (1.0 + m.abs());
    if values[current] >= m - tol {
        return current;
    }
    values.iter().position(|&v| v >= m - tol).unwrap_or(current)
}

/// Objective of a labelling: score plus the loss term when augmenting.
pub fn objective(tables: &Tables, z: &LabelState, loss_against: Option<&LabelState>) -> f64 {
    let base = tables.total(z);
    match loss_against {
        Some(t) => base + crate::learn::hamming(z, t),
        None => base,
    }
}

fn check_state(tables: &Tables, z: &LabelState, what: &str) -> Result<()> {
    let l = &tables.layout;
    if z.g.len() != tables.groups() || z.h.len() != tables.persons() {
        return Err(Error::Dimension(format!(
            "{what} has {} groups / {} persons, frame has {} / {}",
            z.g.len(),
            z.h.len(),
            tables.groups(),
            tables.persons()
        )));
    }
    if z.y >= l.n_y || z.g.iter().any(|&g| g >= l.n_g) || z.h.iter().any(|&h| h >= l.n_h) {
        return Err(Error::InvalidInput(format!("{what} has a label outside its space")));
    }
    Ok(())
}

/// Runs coordinate ascent from `warm_start` (or the all-zeros labelling).
pub fn infer(
    w: &WeightVector,
    obs: &Observations,
    grouping: &[usize],
    warm_start: Option<&LabelState>,
    loss_against: Option<&LabelState>,
    opts: &InferOptions,
) -> Result<InferOutput> {
    let tables = Tables::new(w, obs, grouping)?;
    infer_tables(&tables, warm_start, loss_against, opts)
}

/// [`infer`] on prepared tables.
pub fn infer_tables(
    tables: &Tables,
    warm_start: Option<&LabelState>,
    loss_against: Option<&LabelState>,
    opts: &InferOptions,
) -> Result<InferOutput> {
    let l = tables.layout;
    let mut z = match warm_start {
        Some(z) => z.clone(),
        None => LabelState::cold(tables.groups(), tables.persons()),
    };
    check_state(tables, &z, "warm start")?;
    if let Some(t) = loss_against {
        check_state(tables, t, "loss target")?;
    }
    let loss = loss_against.map(|truth| LossTerm { truth, unit: 1.0 / truth.len() as f64 });
    let norm = z.len() as f64;

    let mut objective_trace = vec![objective(tables, &z, loss_against)];
    let mut err_trace = Vec::new();
    let mut iterations = 0;
    let mut capped = false;
    let mut vals_y = vec![0.0; l.n_y];
    let mut vals_g = vec![0.0; l.n_g];
    let mut vals_h = vec![0.0; l.n_h];

    loop {
        if iterations >= opts.max_iter {
            capped = true;
            break;
        }
        iterations += 1;
        let mut changed = 0usize;

        for (y, v) in vals_y.iter_mut().enumerate() {
            *v = tables.unary_y[y] + tables.collective_term(y, &z.g) + loss.map_or(0.0, |ls| ls.y(y));
        }
        let y_new = argmax_keep(&vals_y, z.y);
        changed += usize::from(y_new != z.y);
        z.y = y_new;

        for i in 0..tables.groups() {
            let cur = z.g[i];
            for (g, v) in vals_g.iter_mut().enumerate() {
                z.g[i] = g;
                *v = tables.collective_term(z.y, &z.g)
                    + tables.unary_g[i][g]
                    + tables.group_action_term(i, g, &z.h)
                    + loss.map_or(0.0, |ls| ls.g(i, g));
            }
            let g_new = argmax_keep(&vals_g, cur);
            changed += usize::from(g_new != cur);
            z.g[i] = g_new;
        }

        for p in 0..tables.persons() {
            let j = tables.grouping[p];
            let cur = z.h[p];
            for (h, v) in vals_h.iter_mut().enumerate() {
                z.h[p] = h;
                *v = tables.group_action_term(j, z.g[j], &z.h)
                    + tables.unary_h[p][h]
                    + loss.map_or(0.0, |ls| ls.h(p, h));
            }
            let h_new = argmax_keep(&vals_h, cur);
            changed += usize::from(h_new != cur);
            z.h[p] = h_new;
        }

        objective_trace.push(objective(tables, &z, loss_against));
        let err = changed as f64 / norm;
        err_trace.push(err);
        if err <= opts.eps {
            break;
        }
    }

    Ok(InferOutput { labels: z, iterations, objective_trace, err_trace, capped })
}
