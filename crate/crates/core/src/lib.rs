//! Multilevel threshold segmentation of 8-bit grey images.
//!
//! The DE+OTSU segmenter ([`de::segment_de_otsu`]) picks cluster cuts with
//! the TBD-region Otsu recursion and then evolves whole-image pixel vectors
//! towards the cluster centers. [`meta`] holds the GA, PSO, ABC and MABC
//! baselines that search threshold vectors directly, [`objectives`] the
//! criteria they maximize, and [`metrics`] the PSNR/SSIM used to compare
//! outputs. [`experiment`] runs the full comparison matrix.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod de;
pub mod experiment;
pub mod imaging;
pub mod meta;
pub mod metrics;
pub mod objectives;
pub mod otsu;
pub mod rng;
pub mod synthetic;

pub use de::{run_de, segment_de_otsu, DeConfig, DeError, SegmentationResult};
pub use experiment::{emit_report, run_matrix, Method, ReportFormat, ReportRow, RunSpec};
pub use imaging::{histogram, load_image, save_image, GrayImage, Histogram, ImageError};
pub use meta::{apply_thresholds, MetaError, Optimizer, OptimizerConfig, OptimizerRun};
pub use metrics::{psnr, ssim, MetricsError, MetricsReport};
pub use objectives::{probabilities, ObjectiveError, ObjectiveKind, ProbDist, ThresholdVector};
pub use otsu::{multilevel_thresholds_tbd, ClusterModel, OtsuError};
