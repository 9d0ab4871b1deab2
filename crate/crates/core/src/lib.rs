//! Missing-value imputation by PCA, a simulated shared-angle Rx rotation of
//! amplitude-encoded component rows, and bounded anti-clustering correction,
//! with classical baselines and distributional metrics for comparison.

pub mod baseline;
pub mod cli;
pub mod correct;
pub mod error;
pub mod metrics;
pub mod optimize;
pub mod pca;
pub mod pipeline;
pub mod qrotate;
pub mod seed;
pub mod tabular;

pub use error::{Error, ErrorClass, Result};
pub use tabular::{Dataset, MissingMask};
