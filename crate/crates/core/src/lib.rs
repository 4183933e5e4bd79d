//! Joint tracking, group detection and hierarchical activity recognition for
//! crowd video.
//!
//! A frame is processed in two stages. Association ([`assoc`]) links the new
//! detections to existing tracks and to groups, growing the group set until
//! every detection belongs to one. Recognition ([`infer`]) then labels the
//! people, groups and the whole scene under a linear model over the features
//! of [`features`], whose weights are learned by [`learn`]. [`engine`] ties a
//! stream of frames together, [`eval`] scores the output and [`synth`]
//! generates labelled scenes.

pub mod assoc;
pub mod cli;
pub mod compat;
pub mod config;
pub mod domain;
pub mod engine;
pub mod error;
pub mod eval;
pub mod features;
pub mod geometry;
pub mod infer;
pub mod io;
pub mod learn;
pub mod potentials;
pub mod synth;

pub use config::{AssocMode, Config};
pub use domain::{Action, BBox, Collective, Detection, FrameState, GroupActivity, GroupState, LabelState, Pose, Track};
pub use error::{Error, Result};
