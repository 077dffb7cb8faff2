//! Probability types and the information and estimation metrics built on them.
//!
//! Every divergence here is measured in nats. Validated types are immutable, so
//! they can be shared between threads freely.

mod metrics;
mod types;

pub use metrics::{
    chi2_divergence, chi2_information, error_probability, kl_divergence, mmse_binary,
    mutual_information, nats_to_bits,
};
pub use types::{
    ChannelMatrix, JointDistribution, ProbVector, CLAMP_TOLERANCE, DEFAULT_SINGULAR_THRESHOLD,
    SUM_TOLERANCE,
};
