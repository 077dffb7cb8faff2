//! Strongly chi-square-private disclosure mechanisms.
//!
//! Given a leakage matrix `P_{X|Y}` from useful data `Y` to private data `X`, the
//! designer builds `W = [sqrt(P_Y)^-1] P_{X|Y}^-1 [sqrt(P_X)]`, takes its principal
//! right singular vector and perturbs the priors along it to obtain a binary,
//! uniformly distributed disclosure `U` whose posteriors satisfy
//! `chi2(P_{X|U=u} || P_X) <= eps^2` for every `u`.
//!
//! ```
//! use chi2mech::{designer, ChannelMatrix, ProbVector};
//!
//! let leakage = ChannelMatrix::from_rows(&[vec![0.25, 0.4], vec![0.75, 0.6]]).unwrap();
//! let py = ProbVector::new(vec![0.25, 0.75]).unwrap();
//! let (mechanism, report) = designer::design_mechanism(&leakage, &py, 0.01).unwrap();
//! assert!((report.sigma_max - 7.4012).abs() < 5e-4);
//! assert_eq!(mechanism.pu().as_slice(), &[0.5, 0.5]);
//! ```

pub mod adversary;
pub mod cli;
pub mod designer;
pub mod error;
pub mod linalg;
pub mod mechanism;
pub mod oracle;
pub mod probcore;
pub mod provider;
pub mod sampling;

pub use error::{Error, Result};
pub use mechanism::{Mechanism, PerturbationDirection};
pub use probcore::{ChannelMatrix, JointDistribution, ProbVector};

/// Per-letter privacy budget convention.
///
/// `Eps2` bounds every posterior by `chi2 <= eps^2`; `HalfEps2` by `eps^2 / 2`, which
/// is the same as running the `Eps2` design at radius `eps / sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Budget {
    #[default]
    Eps2,
    HalfEps2,
}

impl Budget {
    /// Perturbation radius `r` such that the per-letter bound is `r^2`.
    pub fn radius(self, eps: f64) -> f64 {
        match self {
            Budget::Eps2 => eps,
            Budget::HalfEps2 => eps / std::f64::consts::SQRT_2,
        }
    }

    /// The per-letter chi-square bound.
    pub fn bound(self, eps: f64) -> f64 {
        let r = self.radius(eps);
        r * r
    }
}
