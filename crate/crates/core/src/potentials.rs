//! The hierarchical linear potential over collective, group and atomic labels.
//!
//! The score of a labelling is `w · phi` with five blocks, in this order:
//!
//! | block | rows        | columns | content of row `r`                              |
//! |-------|-------------|---------|-------------------------------------------------|
//! | `w0`  | `\|Y\|`     | `d0`    | scene observation if `y = r`                    |
//! | `w1`  | `\|Y\|`     | `\|G\|` | group-activity histogram if `y = r`             |
//! | `w2`  | `\|G\|`     | `dg`    | sum of group observations with `g_i = r`        |
//! | `w3`  | `\|G\|`     | `\|H\|` | sum of member action histograms with `g_i = r`  |
//! | `w4`  | `\|H\|`     | `di`    | sum of person observations with `h_i = r`       |
//!
//! Each block is stored row-major.

use serde::{Deserialize, Serialize};

use crate::domain::{Action, LabelSpaces, LabelState, Pose};
use crate::error::{Error, Result};
use crate::features::Observations;

/// Block layout of the weight and joint-feature vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub n_y: usize,
    pub n_g: usize,
    pub n_h: usize,
    pub dim_x0: usize,
    pub dim_xg: usize,
    pub dim_xi: usize,
}

impl Default for Layout {
    fn default() -> Self {
        Self::for_spaces(&LabelSpaces::default())
    }
}

impl Layout {
    pub fn for_spaces(spaces: &LabelSpaces) -> Self {
        let d = spaces.poses * Action::COUNT;
        debug_assert_eq!(spaces.poses, Pose::COUNT);
        Self { n_y: spaces.collective, n_g: spaces.group, n_h: spaces.action, dim_x0: d, dim_xg: d + 1, dim_xi: d }
    }

    fn sizes(&self) -> [usize; 5] {
        [
            self.n_y * self.dim_x0,
            self.n_y * self.n_g,
            self.n_g * self.dim_xg,
            self.n_g * self.n_h,
            self.n_h * self.dim_xi,
        ]
    }

    /// Start offset of each block.
    pub fn offsets(&self) -> [usize; 5] {
        let s = self.sizes();
        [0, s[0], s[0] + s[1], s[0] + s[1] + s[2], s[0] + s[1] + s[2] + s[3]]
    }

    pub fn len(&self) -> usize {
        self.sizes().iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, labels: &LabelState, obs: &Observations, grouping: &[usize]) -> Result<()> {
        let n = obs.xi.len();
        let ng = obs.xg.len();
        if labels.h.len() != n || labels.g.len() != ng || grouping.len() != n {
            return Err(Error::Dimension(format!(
                "labels (g={}, h={}) / grouping ({}) do not match observations (groups={ng}, persons={n})",
                labels.g.len(),
                labels.h.len(),
                grouping.len()
            )));
        }
        if obs.x0.len() != self.dim_x0
            || obs.xg.iter().any(|x| x.len() != self.dim_xg)
            || obs.xi.iter().any(|x| x.len() != self.dim_xi)
        {
            return Err(Error::Dimension("observation vector length does not match the layout".into()));
        }
        if labels.y >= self.n_y || labels.g.iter().any(|&g| g >= self.n_g) || labels.h.iter().any(|&h| h >= self.n_h) {
            return Err(Error::InvalidInput("label index outside its label space".into()));
        }
        if let Some(i) = grouping.iter().position(|&g| g >= ng) {
            return Err(Error::InvalidInput(format!("person {i} is mapped to no group")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub layout: Layout,
    pub data: Vec<f64>,
}

impl WeightVector {
    pub fn zeros(layout: Layout) -> Self {
        Self { layout, data: vec![0.0; layout.len()] }
    }

    pub fn from_vec(layout: Layout, data: Vec<f64>) -> Result<Self> {
        if data.len() != layout.len() {
            return Err(Error::Dimension(format!(
                "weight vector has {} entries, layout needs {}",
                data.len(),
                layout.len()
            )));
        }
        Ok(Self { layout, data })
    }

    /// Row `r` of block `b`.
    pub fn row(&self, block: usize, r: usize) -> &[f64] {
        let width = block_width(&self.layout, block);
        let off = self.layout.offsets()[block] + r * width;
        &self.data[off..off + width]
    }

    pub fn dot(&self, phi: &FeatureMap) -> f64 {
        self.data.iter().zip(&phi.data).map(|(a, b)| a * b).sum()
    }
}

fn block_width(l: &Layout, block: usize) -> usize {
    match block {
        0 => l.dim_x0,
        1 => l.n_g,
        2 => l.dim_xg,
        3 => l.n_h,
        4 => l.dim_xi,
        _ => panic!("block index {block} out of range"),
    }
}

/// Joint feature map with the same block layout as [`WeightVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub layout: Layout,
    pub data: Vec<f64>,
}

impl FeatureMap {
    fn add_row(&mut self, block: usize, r: usize, v: &[f64]) {
        let width = block_width(&self.layout, block);
        debug_assert_eq!(v.len(), width);
        let off = self.layout.offsets()[block] + r * width;
        for (d, x) in self.data[off..off + width].iter_mut().zip(v) {
            *d += x;
        }
    }
}

/// Normalised label histogram; all-zero for an empty list.
pub(crate) fn label_hist(labels: impl IntoIterator<Item = usize>, n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n];
    let mut count = 0usize;
    for l in labels {
        h[l] += 1.0;
        count += 1;
    }
    if count > 0 {
        h.iter_mut().for_each(|v| *v /= count as f64);
    }
    h
}

/// Members of each group, in person order.
pub(crate) fn members_by_group(grouping: &[usize], groups: usize) -> Vec<Vec<usize>> {
    let mut m = vec![Vec::new(); groups];
    for (i, &g) in grouping.iter().enumerate() {
        m[g].push(i);
    }
    m
}

/// Builds `phi(y, g, h, x)` for a labelling under the given grouping.
pub fn feature_map(layout: &Layout, labels: &LabelState, obs: &Observations, grouping: &[usize]) -> Result<FeatureMap> {
    layout.check(labels, obs, grouping)?;
    let mut phi = FeatureMap { layout: *layout, data: vec![0.0; layout.len()] };
    phi.add_row(0, labels.y, &obs.x0);
    phi.add_row(1, labels.y, &label_hist(labels.g.iter().copied(), layout.n_g));
    let members = members_by_group(grouping, obs.xg.len());
    for (i, &gi) in labels.g.iter().enumerate() {
        phi.add_row(2, gi, &obs.xg[i]);
        phi.add_row(3, gi, &label_hist(members[i].iter().map(|&p| labels.h[p]), layout.n_h));
    }
    for (p, &hp) in labels.h.iter().enumerate() {
        phi.add_row(4, hp, &obs.xi[p]);
    }
    Ok(phi)
}

/// `w · phi(y, g, h, x)`.
pub fn score(w: &WeightVector, labels: &LabelState, obs: &Observations, grouping: &[usize]) -> Result<f64> {
    Ok(w.dot(&feature_map(&w.layout, labels, obs, grouping)?))
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Potential with the observation terms folded into per-label tables, for
/// fast coordinate updates.
#[derive(Debug, Clone)]
pub struct Tables {
    pub layout: Layout,
    /// `unary_y[y] = w0_y · x0`.
    pub unary_y: Vec<f64>,
    /// `unary_g[i][g] = w2_g · x_{g_i}`.
    pub unary_g: Vec<Vec<f64>>,
    /// `unary_h[p][h] = w4_h · x_p`.
    pub unary_h: Vec<Vec<f64>>,
    /// `pair_yg[y][g]`: row of `w1`.
    pub pair_yg: Vec<Vec<f64>>,
    /// `pair_gh[g][h]`: row of `w3`.
    pub pair_gh: Vec<Vec<f64>>,
    pub members: Vec<Vec<usize>>,
    pub grouping: Vec<usize>,
}

impl Tables {
    pub fn new(w: &WeightVector, obs: &Observations, grouping: &[usize]) -> Result<Self> {
        let l = w.layout;
        let probe = LabelState::cold(obs.xg.len(), obs.xi.len());
        l.check(&probe, obs, grouping)?;
        Ok(Self {
            layout: l,
            unary_y: (0..l.n_y).map(|y| dotv(w.row(0, y), &obs.x0)).collect(),
            unary_g: obs.xg.iter().map(|x| (0..l.n_g).map(|g| dotv(w.row(2, g), x)).collect()).collect(),
            unary_h: obs.xi.iter().map(|x| (0..l.n_h).map(|h| dotv(w.row(4, h), x)).collect()).collect(),
            pair_yg: (0..l.n_y).map(|y| w.row(1, y).to_vec()).collect(),
            pair_gh: (0..l.n_g).map(|g| w.row(3, g).to_vec()).collect(),
            members: members_by_group(grouping, obs.xg.len()),
            grouping: grouping.to_vec(),
        })
    }

    pub fn groups(&self) -> usize {
        self.unary_g.len()
    }

    pub fn persons(&self) -> usize {
        self.unary_h.len()
    }

    /// `w1_y · H(g)`.
    pub fn collective_term(&self, y: usize, g: &[usize]) -> f64 {
        dotv(&self.pair_yg[y], &label_hist(g.iter().copied(), self.layout.n_g))
    }

    /// `w3_{g} · H(h of group i's members)`.
    pub fn group_action_term(&self, group: usize, g: usize, h: &[usize]) -> f64 {
        let hist = label_hist(self.members[group].iter().map(|&p| h[p]), self.layout.n_h);
        dotv(&self.pair_gh[g], &hist)
    }

    /// Full score of a labelling, equal to `w · phi`.
    pub fn total(&self, z: &LabelState) -> f64 {
        let mut s = self.unary_y[z.y] + self.collective_term(z.y, &z.g);
        for (i, &gi) in z.g.iter().enumerate() {
            s += self.unary_g[i][gi] + self.group_action_term(i, gi, &z.h);
        }
        for (p, &hp) in z.h.iter().enumerate() {
            s += self.unary_h[p][hp];
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(n: usize, ng: usize) -> Observations {
        let l = Layout::default();
        Observations {
            x0: (0..l.dim_x0).map(|k| 0.01 * k as f64).collect(),
            xg: (0..ng).map(|i| (0..l.dim_xg).map(|k| ((i + k) % 3) as f64).collect()).collect(),
            xi: (0..n).map(|i| (0..l.dim_xi).map(|k| ((i * k) % 5) as f64 * 0.1).collect()).collect(),
        }
    }

    #[test]
    fn default_layout_has_208_entries() {
        let l = Layout::default();
        assert_eq!(l.len(), 208);
        assert_eq!(l.offsets(), [0, 80, 100, 168, 176]);
    }

    #[test]
    fn single_person_touches_one_row_per_block() {
        let l = Layout::default();
        let o = Observations { x0: vec![1.0; 16], xg: vec![vec![1.0; 17]], xi: vec![vec![1.0; 16]] };
        let z = LabelState { y: 2, g: vec![1], h: vec![0] };
        let phi = feature_map(&l, &z, &o, &[0]).unwrap();
        let offs = l.offsets();
        let widths = [16, 4, 17, 2, 16];
        for b in 0..5 {
            let end = if b == 4 { l.len() } else { offs[b + 1] };
            let block = &phi.data[offs[b]..end];
            let nonzero_rows: std::collections::BTreeSet<usize> =
                block.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, _)| k / widths[b]).collect();
            assert_eq!(nonzero_rows.len(), 1, "block {b}");
        }
    }

    #[test]
    fn two_talking_groups_of_standing_people() {
        // y=talking(4), g=(talking, talking), six standing people in two groups
        let l = Layout::default();
        let o = obs(6, 2);
        let z = LabelState { y: 4, g: vec![3, 3], h: vec![0; 6] };
        let grouping = [0, 0, 0, 1, 1, 1];
        let phi = feature_map(&l, &z, &o, &grouping).unwrap();
        let offs = l.offsets();
        assert_eq!(&phi.data[offs[1] + 4 * 4..offs[1] + 5 * 4], &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(&phi.data[offs[3] + 3 * 2..offs[3] + 4 * 2], &[2.0, 0.0]);
    }

    #[test]
    fn zero_weights_score_zero_and_linearity() {
        let l = Layout::default();
        let o = obs(3, 2);
        let z = LabelState { y: 1, g: vec![0, 2], h: vec![1, 0, 1] };
        let g = [0, 1, 1];
        assert_eq!(score(&WeightVector::zeros(l), &z, &o, &g).unwrap(), 0.0);
        let a = WeightVector::from_vec(l, (0..l.len()).map(|k| (k as f64 * 0.37).sin()).collect()).unwrap();
        let b = WeightVector::from_vec(l, (0..l.len()).map(|k| (k as f64 * 0.11).cos()).collect()).unwrap();
        let ab = WeightVector::from_vec(l, a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect()).unwrap();
        let lhs = score(&a, &z, &o, &g).unwrap() + score(&b, &z, &o, &g).unwrap();
        assert!((lhs - score(&ab, &z, &o, &g).unwrap()).abs() < 1e-12);
        let t = Tables::new(&a, &o, &g).unwrap();
        assert!((t.total(&z) - score(&a, &z, &o, &g).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ungrouped_person_is_an_error() {
        let l = Layout::default();
        let o = obs(2, 1);
        let z = LabelState { y: 0, g: vec![0], h: vec![0, 0] };
        assert!(feature_map(&l, &z, &o, &[0, 1]).is_err());
        assert!(feature_map(&l, &z, &o, &[0]).is_err());
    }
}
