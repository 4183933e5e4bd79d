//! Engine configuration and ablation modes.

use serde::{Deserialize, Serialize};

use crate::compat::TrackKernel;

/// Which parts of the joint association objective are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssocMode {
    /// Track and group association together.
    #[default]
    Full,
    /// Track association only; every detection gets its own group.
    TrackOnly,
    /// Group association without the track term: detections carry no
    /// velocity when group compatibility is built.
    GroupOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Appearance histogram length.
    pub hist_bins: usize,
    /// Weight of the group term against the track term.
    pub lambda: f64,
    /// Frames used for velocity and slope fits.
    pub velocity_window: usize,
    pub image_width: f64,
    pub image_height: f64,
    pub track_kernel: TrackKernel,
    /// Spatial normaliser for group compatibility is `1 / (scale * h)^2`
    /// with `h` the mean member height.
    pub group_spatial_scale: f64,
    pub mode: AssocMode,
    /// Stopping threshold on the label change rate during inference.
    pub infer_eps: f64,
    pub infer_max_iter: usize,
    /// Regularisation constant `D` of the structured SVM.
    pub dreg: f64,
    /// Cutting-plane stopping tolerance.
    pub eps_cp: f64,
    pub max_rounds: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            hist_bins: 24,
            lambda: 1.0,
            velocity_window: 20,
            image_width: 720.0,
            image_height: 480.0,
            track_kernel: TrackKernel::default(),
            group_spatial_scale: 1.0,
            mode: AssocMode::Full,
            infer_eps: 0.01,
            infer_max_iter: 50,
            dreg: 100.0,
            eps_cp: 1e-3,
            max_rounds: 500,
        }
    }
}

impl Config {
    pub fn image(&self) -> crate::geometry::Rect {
        crate::geometry::Rect::new(0.0, 0.0, self.image_width, self.image_height)
    }
}
