use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probcore::{
    chi2_divergence, chi2_information, kl_divergence, mutual_information, ChannelMatrix,
    JointDistribution, ProbVector,
};

/// Tolerance for mixture consistency `sum_u P_U(u) P_{.|U=u} = prior`.
pub const MIXTURE_TOLERANCE: f64 = 1e-10;

/// A direction `l` in the unit ball orthogonal to `sqrt(prior)`, together with the
/// perturbation `j = diag(sqrt(prior)) l` it induces on the prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationDirection {
    l: Vec<f64>,
    j: Vec<f64>,
}

impl PerturbationDirection {
    pub fn new(l: DVector<f64>, prior: &ProbVector) -> Result<Self> {
        if l.len() != prior.len() {
            return Err(Error::DimensionMismatch {
                context: "perturbation direction",
                expected: prior.len(),
                found: l.len(),
            });
        }
        let root = prior.sqrt();
        let j = root.component_mul(&l);
        let d = Self {
            l: l.iter().copied().collect(),
            j: j.iter().copied().collect(),
        };
        d.validate(prior)?;
        Ok(d)
    }

    pub fn validate(&self, prior: &ProbVector) -> Result<()> {
        let l = self.l();
        let norm = l.norm();
        if norm > 1.0 + 1e-12 {
            return Err(Error::InvariantViolation(format!(
                "direction norm {norm} exceeds 1"
            )));
        }
        let dot = prior.sqrt().dot(&l);
        if dot.abs() > 1e-10 {
            return Err(Error::NotOrthogonal { dot });
        }
        let mass: f64 = self.j.iter().sum();
        if mass.abs() > 1e-10 {
            return Err(Error::InvariantViolation(format!(
                "perturbation does not preserve total mass (sum = {mass:e})"
            )));
        }
        Ok(())
    }

    pub fn l(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.l)
    }

    pub fn j(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.j)
    }

    pub fn l_slice(&self) -> &[f64] {
        &self.l
    }

    pub fn negated(&self) -> Self {
        Self {
            l: self.l.iter().map(|x| -x).collect(),
            j: self.j.iter().map(|x| -x).collect(),
        }
    }
}

/// Adds `scale * dir` to `base` and validates the result as a distribution.
pub(crate) fn perturb(base: &ProbVector, scale: f64, dir: &DVector<f64>) -> Result<ProbVector> {
    ProbVector::new(
        base.as_slice()
            .iter()
            .zip(dir.iter())
            .map(|(b, d)| b + scale * d)
            .collect(),
    )
}

/// Largest step `t` such that `base + t * c * dir` stays in the simplex for every coefficient `c`.
pub(crate) fn simplex_step_bound(base: &ProbVector, dir: &DVector<f64>, coefficients: &[f64]) -> f64 {
    let mut bound = f64::INFINITY;
    for &c in coefficients {
        for (b, d) in base.as_slice().iter().zip(dir.iter()) {
            let slope = c * d;
            if slope < 0.0 {
                bound = bound.min(b / -slope);
            }
        }
    }
    bound
}

/// Disclosure kernel with its conditionals on the useful side and posteriors on the private side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pu: ProbVector,
    output_conditionals: Vec<ProbVector>,
    posteriors: Vec<ProbVector>,
    epsilon: f64,
    /// `P_{U|input}` with rows indexed by `u` and columns by the input symbol.
    kernel: ChannelMatrix,
}

impl Mechanism {
    /// Builds a mechanism; the kernel follows from Bayes' rule on the input side.
    pub fn assemble(
        pu: ProbVector,
        input_marginal: &ProbVector,
        input_conditionals: &[ProbVector],
        output_conditionals: Vec<ProbVector>,
        posteriors: Vec<ProbVector>,
        epsilon: f64,
    ) -> Result<Self> {
        let n_u = pu.len();
        for (what, len) in [
            ("input conditionals", input_conditionals.len()),
            ("output conditionals", output_conditionals.len()),
            ("posteriors", posteriors.len()),
        ] {
            if len != n_u {
                return Err(Error::DimensionMismatch {
                    context: what,
                    expected: n_u,
                    found: len,
                });
            }
        }
        input_marginal.require_strictly_positive()?;
        let k = input_marginal.len();
        let kernel = DMatrix::from_fn(n_u, k, |u, x| {
            pu[u] * input_conditionals[u][x] / input_marginal[x]
        });
        let kernel = ChannelMatrix::new(kernel).map_err(|e| {
            Error::InvariantViolation(format!("kernel from Bayes' rule is not stochastic: {e}"))
        })?;
        Ok(Self {
            pu,
            output_conditionals,
            posteriors,
            epsilon,
            kernel,
        })
    }

    pub fn pu(&self) -> &ProbVector {
        &self.pu
    }

    pub fn output_conditionals(&self) -> &[ProbVector] {
        &self.output_conditionals
    }

    pub fn posteriors(&self) -> &[ProbVector] {
        &self.posteriors
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn kernel(&self) -> &ChannelMatrix {
        &self.kernel
    }

    /// Joint of (U, useful variable).
    pub fn output_joint(&self) -> Result<JointDistribution> {
        JointDistribution::from_conditionals(&self.pu, &self.output_conditionals)
    }

    /// Exact `I(U; useful)` in nats.
    pub fn exact_utility(&self) -> Result<f64> {
        Ok(mutual_information(&self.output_joint()?))
    }

    /// Exact `I(U; private)` in nats.
    pub fn leakage(&self, prior: &ProbVector) -> Result<f64> {
        self.posteriors
            .iter()
            .zip(self.pu.as_slice())
            .try_fold(0.0, |acc, (post, &w)| Ok(acc + w * kl_divergence(post, prior)?))
    }

    pub fn chi2_per_letter(&self, prior: &ProbVector) -> Result<Vec<f64>> {
        self.posteriors
            .iter()
            .map(|p| chi2_divergence(p, prior))
            .collect()
    }

    pub fn chi2_information(&self, prior: &ProbVector) -> Result<f64> {
        chi2_information(&self.posteriors, &self.pu, prior)
    }

    /// Checks mixture consistency on both sides and the per-letter budget on the private side.
    pub fn audit(
        &self,
        output_prior: &ProbVector,
        private_prior: &ProbVector,
        budget: f64,
    ) -> Result<()> {
        check_mixture(&self.pu, &self.output_conditionals, output_prior, "output")?;
        check_mixture(&self.pu, &self.posteriors, private_prior, "posterior")?;
        for (u, c) in self.chi2_per_letter(private_prior)?.into_iter().enumerate() {
            if c > budget * (1.0 + 1e-9) {
                return Err(Error::InvariantViolation(format!(
                    "chi2 of posterior {u} is {c:e}, above the budget {budget:e}"
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_mixture(
    pu: &ProbVector,
    conditionals: &[ProbVector],
    prior: &ProbVector,
    what: &str,
) -> Result<()> {
    for x in 0..prior.len() {
        let mix: f64 = conditionals
            .iter()
            .zip(pu.as_slice())
            .map(|(c, &w)| w * c[x])
            .sum();
        if (mix - prior[x]).abs() > MIXTURE_TOLERANCE {
            return Err(Error::InvariantViolation(format!(
                "{what} mixture differs from the prior at {x}: {mix} vs {}",
                prior[x]
            )));
        }
    }
    Ok(())
}
