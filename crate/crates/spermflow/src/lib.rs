//! Motility and morphology regression from sperm video.
//!
//! The pipeline: decode frame sequences, compute dense optical flow
//! (Farnebäck, from scratch), stack 9-channel training samples (D1: nine
//! grayscale frames; D2: RGB frame + stride-1 flow + stride-10 flow), train
//! ResNet-shaped regression networks (M1 linear head, M2 dropout MLP) with
//! Adam on MSE, and report MAE over a 3-fold cross-validation.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod flow;
pub mod media;
pub mod nn;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
