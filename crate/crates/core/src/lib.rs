//! Open-set recognition for 3D point clouds with saliency-guided part
//! decomposition, pseudo-unknown synthesis and feature-margin separation.

pub mod cloud;
pub mod dataio;
pub mod diffcore;
pub mod encoder;
pub mod evalkit;
pub mod error;
pub mod gss;
pub mod hull;
pub mod kv;
pub mod seeding;
pub mod sms;
pub mod trainer;
pub mod tsd;
pub mod visibility;

pub use cloud::{Point, PointCloud};
pub use error::{Error, Result};
pub use dataio::{Dataset, DatasetManifest, SaliencyCache, Split};
pub use diffcore::{Array, Checkpoint};
pub use encoder::{EncoderConfig, Model};
pub use evalkit::{Metrics, ScoredSample, Scorer};
pub use trainer::{TrainConfig, TrainReport};
