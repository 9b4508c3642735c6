//! Quantisation scale-spaces and inpainting-based image compression.
//!
//! Grey-value quantisation is treated as a scale-space: each step merges two
//! level sets, so entropy and contrast decrease monotonically. Combined with
//! spatial sparsification and homogeneous diffusion inpainting, the two
//! scale parameters (removed pixels `l`, merged levels `m`) span the
//! rate-distortion search space of an inpainting-based codec.

pub mod compression;
pub mod error;
pub mod image;
pub mod inpainting;
pub mod pgm;
pub mod quantisation;
pub mod scale_space;
pub mod sparsification;
pub mod synthetic;

pub use compression::{
    coding_cost, curve_csv, density_grid, lower_envelope, rd_curve, rd_optimize, rd_points, CostModel, EnvelopePoint,
    RateDistortionPoint,
};
pub use error::{Error, PgmError, Result};
pub use image::{entropy, level_partition, mse, total_contrast, Image, LevelPartition, Mask};
pub use inpainting::{inpaint, round_to_grey, InpaintConfig, InpaintSystem, Reconstruction};
pub use pgm::{read_pgm, write_pgm};
pub use quantisation::{
    apply_path, build_path, sparsification_quant_path, uniform_path, ward_path, MergeStep, QuantMethod,
    QuantisationPath, SparsQuantOptions,
};
pub use sparsification::{probabilistic_sparsify, SparsificationPath, SparsifyParams};
