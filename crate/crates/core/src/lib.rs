//! Boundary-entropy index for zone inspection of neural classifiers.
//!
//! The index of an input `X` is the expected base-`C` Shannon entropy of a
//! classifier's output over the clipped infinity-norm ball
//! `B∞(X, r) ∩ [0,1]^d`, estimated by uniform Monte Carlo sampling. Values
//! near 0 mean every point of the zone is classified with full confidence;
//! values near 1 mean the zone is saturated with decision boundaries.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`). The
//! unsuffixed aliases at the crate root fix the scalar to `f64`.

pub mod attacks;
pub mod data;
pub mod error;
pub mod experiments;
pub mod index;
pub mod model;
pub mod sampler;
pub mod scalar;
pub mod stats;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ProbVector = model::ProbVector<f64>;
pub type DenseLayer = model::DenseLayer<f64>;
pub type MlpModel = model::MlpModel<f64>;
pub type InputPoint = model::InputPoint<f64>;
pub type BallRegion = sampler::BallRegion<f64>;
pub type ScanReport = index::ScanReport<f64>;
pub type LabeledDataset = data::LabeledDataset<f64>;
pub type WatermarkKey = training::WatermarkKey<f64>;
pub type AdversarialPair = attacks::AdversarialPair<f64>;

pub type ProbVector32 = model::ProbVector<f32>;
pub type MlpModel32 = model::MlpModel<f32>;
pub type InputPoint32 = model::InputPoint<f32>;
pub type ScanReport32 = index::ScanReport<f32>;
pub type LabeledDataset32 = data::LabeledDataset<f32>;

pub use attacks::{fgm, generate_adversarial_set, AttackConfig};
pub use data::{load_csv, load_idx, make_blobs, write_idx, Split};
pub use index::{class_surface, entropy, radius_sweep, scan, scan_stream, ScanConfig};
pub use model::{load_model, save_model, Activation};
pub use sampler::{make_region, SeededStream};
pub use stats::{find_disagreements, ks_two_sample, summarize, DistributionSummary, KsResult};
pub use training::{
    input_gradient, loss_and_gradient, train, watermark_finetune, TrainConfig, TrainOutcome,
};
