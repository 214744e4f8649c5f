//! Semantic localization from RGB-D point clouds with a bag-of-words model.
//!
//! Keypoints are picked on every cloud by Uniform Sampling or Harris3D and
//! described locally with PFH, PFH-RGB, FPFH, SHOT or Color-SHOT. A k-means
//! dictionary turns each cloud's descriptors into a fixed-length word
//! histogram. A chi-square SVM or a kNN classifier then maps the histogram to
//! a room category. The global ESF
//! signature is available as a baseline that skips the keypoint and
//! dictionary stages.
//!
//! [`pipeline`] ties the stages together behind a configuration file and
//! [`cli`] exposes them as the `semloc` command.

// `!(x > 0.0)` is used on purpose: unlike `x <= 0.0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bow;
pub mod classify;
pub mod cli;
pub mod cloud;
mod codec;
pub mod error;
pub mod features;
pub mod keypoints;
pub mod pipeline;

pub use error::{Error, Result};
