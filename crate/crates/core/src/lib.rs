//! Optimal spectral shrinkage with noise whitening for the spiked model with
//! heteroscedastic noise.
//!
//! All p×n data matrices use the convention that each column is divided by
//! `√n`; see [`rank_noise::scale_samples`] for converting raw samples.

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eig_shrinkage;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod matrix_io;
pub mod noise;
pub mod optshrink;
pub mod pca_metrics;
pub mod prediction;
pub mod rank_noise;
pub mod rng;
pub mod sim;
pub mod spectral_params;
pub mod sv_shrinkage;

pub use eig_shrinkage::{cov_estimate, CovEstimate, LossFunction};
pub use error::{Error, Result};
pub use linalg::{Mat, Svd, Vector};
pub use noise::{make_noise_cov, EigenBasis, NoiseModel, SpectrumProfile};
pub use optshrink::optshrink_predict;
pub use prediction::{blp_oracle, OosPredictor};
pub use sim::{generate_dataset, Dataset, EntryDist, PcGenerator, SpikedModelSpec};
pub use spectral_params::{fit_whitened, ComponentEstimate, ModelAggregates, WhitenedSpectrum};
pub use sv_shrinkage::{shrink_predict, ShrinkageResult, SvShrinker};
