//! Exact Gaussian-process regression of one-step state deltas.
//!
//! Each state dimension gets an independent GP; all of them share one
//! squared-exponential kernel over the encoded `(state, action)` input, so a
//! single Cholesky factor serves every output. Angle components of the state
//! are fed to the kernel as `(sin, cos)` pairs.

mod beta;
mod dataset;
mod io;
mod kernel;
mod linalg;
mod posterior;
mod rff;
mod subsample;

pub use beta::BetaSchedule;
pub use dataset::GpDataset;
pub use io::{load_model, save_model, ModelFile, MODEL_FORMAT, MODEL_VERSION};
pub use kernel::{kernel_metric, KernelParams};
pub use posterior::{calibration_coverage, BatchPrediction, CalibratedPrediction, GpPosterior};
pub use rff::{sample_rff, RffSample};
pub use subsample::select_max_variance;
