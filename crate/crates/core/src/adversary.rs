//! Design when the adversary observes `U'` through a fixed invertible binary
//! channel `P_{U|U'}`, with Markov chain `X - Y - U - U'`.

use serde::{Deserialize, Serialize};

use crate::designer::{build_w, derive_px, principal_direction, DesignMatrix};
use crate::error::{Error, Result};
use crate::mechanism::{check_mixture, perturb, simplex_step_bound, Mechanism, PerturbationDirection};
use crate::probcore::{chi2_divergence, chi2_information, nats_to_bits, ChannelMatrix, ProbVector, DEFAULT_SINGULAR_THRESHOLD};
use crate::Budget;

const CLASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelClass {
    /// `a <= 0, d <= 0, b >= 1, c >= 1`
    A1,
    /// `a >= 1, d >= 1, b <= 0, c <= 0`
    A2,
}

/// Entries of `P_{U|U'}^-1 = [[a, c], [b, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// A validated invertible 2x2 channel `P_{U|U'} = [[x, y], [z, t]]` (columns indexed by `u'`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryChannel {
    pub forward: ChannelMatrix,
    pub inverse: InverseCoefficients,
    pub class: ChannelClass,
}

pub fn invert_binary_channel(forward: &ChannelMatrix) -> Result<BinaryChannel> {
    if forward.nrows() != 2 || forward.ncols() != 2 {
        return Err(Error::NotBinary(forward.nrows().max(forward.ncols())));
    }
    let m = forward.matrix();
    let (x, y, z, t) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let det = x * t - z * y;
    if det.abs() <= DEFAULT_SINGULAR_THRESHOLD {
        return Err(Error::SingularMatrix {
            sigma_min: det.abs(),
            threshold: DEFAULT_SINGULAR_THRESHOLD,
        });
    }
    let inverse = InverseCoefficients {
        a: t / det,
        b: -z / det,
        c: -y / det,
        d: x / det,
    };
    let InverseCoefficients { a, b, c, d } = inverse;
    if (a + b - 1.0).abs() > CLASS_TOLERANCE || (c + d - 1.0).abs() > CLASS_TOLERANCE {
        return Err(Error::InvariantViolation(format!(
            "inverse columns do not sum to one: a+b = {}, c+d = {}",
            a + b,
            c + d
        )));
    }
    let tol = CLASS_TOLERANCE;
    let class = if a <= tol && d <= tol && b >= 1.0 - tol && c >= 1.0 - tol {
        ChannelClass::A1
    } else if a >= 1.0 - tol && d >= 1.0 - tol && b <= tol && c <= tol {
        ChannelClass::A2
    } else {
        return Err(Error::InvariantViolation(format!(
            "inverse coefficients ({a}, {b}, {c}, {d}) fall in neither class"
        )));
    };
    Ok(BinaryChannel {
        forward: forward.clone(),
        inverse,
        class,
    })
}

impl BinaryChannel {
    /// Optimal `P_U = [(c - 1/2)/(c - a), (1/2 - a)/(c - a)]`.
    pub fn optimal_pu(&self) -> Result<ProbVector> {
        let InverseCoefficients { a, c, .. } = self.inverse;
        ProbVector::new(vec![(c - 0.5) / (c - a), (0.5 - a) / (c - a)])
    }

    /// Utility gain over the direct design: `4 (c - 1/2)(1/2 - a)`, at least one.
    pub fn gain(&self) -> f64 {
        let InverseCoefficients { a, c, .. } = self.inverse;
        4.0 * (c - 0.5) * (0.5 - a)
    }

    /// `P_{U'} = P_{U|U'}^-1 P_U`.
    pub fn adversary_marginal(&self, pu: &ProbVector) -> Result<ProbVector> {
        let InverseCoefficients { a, b, c, d } = self.inverse;
        ProbVector::new(vec![a * pu[0] + c * pu[1], b * pu[0] + d * pu[1]])
    }
}

/// Per-letter bounds on `(X, U)` implied by the budget on `(X, U')`:
/// `2 r^2 (a^2 + b^2)` and `2 r^2 (c^2 + d^2)` with `r` the budget radius.
/// Under [`Budget::HalfEps2`] these are `eps^2 (a^2 + b^2)` and `eps^2 (c^2 + d^2)`.
pub fn induced_u_constraint(channel: &BinaryChannel, eps: f64, budget: Budget) -> (f64, f64) {
    let InverseCoefficients { a, b, c, d } = channel.inverse;
    let per_letter = budget.bound(eps);
    (
        2.0 * per_letter * (a * a + b * b),
        2.0 * per_letter * (c * c + d * d),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryDesignReport {
    pub epsilon: f64,
    pub budget: Budget,
    pub radius: f64,
    pub channel: BinaryChannel,
    pub sigma: f64,
    pub psi: PerturbationDirection,
    pub px: ProbVector,
    pub pu: ProbVector,
    pub pu_prime: ProbVector,
    /// `2 r^2 sigma^2 (c - 1/2)(1/2 - a)`.
    pub approx_utility_nats: f64,
    pub approx_utility_bits: f64,
    pub utility_nats_coeff: f64,
    /// Value of the boundary solution `P_{U'}(0) = 0`: `-a c sigma^2 r^2 / 2`.
    pub boundary_utility_nats: f64,
    pub exact_utility_nats: f64,
    pub leakage_mi_nats: f64,
    pub adversary_posteriors: Vec<ProbVector>,
    pub chi2_adversary: Vec<f64>,
    pub chi2_per_letter: Vec<f64>,
    pub induced_bounds: (f64, f64),
    pub chi2_information_u: f64,
    pub chi2_information_u_prime: f64,
    pub eps_bound_posthoc: f64,
}

impl AdversaryDesignReport {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvariantViolation(what.to_string()));
        if self.pu_prime.as_slice().iter().any(|p| (p - 0.5).abs() > 1e-10) {
            return bad("adversary marginal is not uniform");
        }
        let r2 = self.radius * self.radius;
        let base = 0.5 * r2 * self.sigma * self.sigma;
        if self.approx_utility_nats < base * (1.0 - 1e-12) {
            return bad("approximate utility below the direct design");
        }
        if self.approx_utility_nats < self.boundary_utility_nats * (1.0 - 1e-12) {
            return bad("interior solution worse than the boundary solution");
        }
        if self.chi2_adversary.iter().any(|c| (c - r2).abs() > 1e-12) {
            return bad("adversary posteriors do not saturate the budget");
        }
        let (b0, b1) = self.induced_bounds;
        if self.chi2_per_letter[0] > b0 * (1.0 + 1e-9) || self.chi2_per_letter[1] > b1 * (1.0 + 1e-9) {
            return bad("posterior at U exceeds the induced bound");
        }
        if self.chi2_information_u_prime > self.chi2_information_u + 1e-15 {
            return bad("post-processing increased chi-square information");
        }
        self.psi.validate(&self.px)
    }
}

pub fn design_adversarial_mechanism(
    leakage: &ChannelMatrix,
    py: &ProbVector,
    channel: &BinaryChannel,
    eps: f64,
    budget: Budget,
) -> Result<(Mechanism, AdversaryDesignReport)> {
    let w: DesignMatrix = build_w(leakage, py)?;
    let px = derive_px(leakage, py)?;
    let psi = principal_direction(&w, &px)?;
    let l = psi.l();
    let j = psi.j();
    let inv = leakage.inverse(DEFAULT_SINGULAR_THRESHOLD)?;
    let v = &inv * &j;

    let InverseCoefficients { a, b, c, d } = channel.inverse;
    let (k0, k1) = (a - b, c - d);
    let scale = budget.radius(1.0);
    let posthoc_eps = simplex_step_bound(py, &v, &[k0, k1]) / scale;
    if !(eps > 0.0 && eps.is_finite() && eps < posthoc_eps) {
        return Err(Error::EpsilonOutOfRange {
            eps,
            bound: posthoc_eps,
        });
    }
    let r = budget.radius(eps);

    let pu = channel.optimal_pu()?;
    let outputs = vec![perturb(py, r * k0, &v)?, perturb(py, r * k1, &v)?];
    let posteriors = vec![perturb(&px, r * k0, &j)?, perturb(&px, r * k1, &j)?];
    let mechanism = Mechanism::assemble(pu.clone(), py, &outputs, outputs.clone(), posteriors, eps)?;

    let induced = induced_u_constraint(channel, eps, budget);
    mechanism.audit(py, &px, induced.0.max(induced.1))?;

    let pu_prime = channel.adversary_marginal(&pu)?;
    let adversary_posteriors = vec![perturb(&px, r, &j)?, perturb(&px, -r, &j)?];
    check_mixture(&pu_prime, &adversary_posteriors, &px, "adversary posterior")?;
    let chi2_adversary = adversary_posteriors
        .iter()
        .map(|p| chi2_divergence(p, &px))
        .collect::<Result<Vec<_>>>()?;

    let sigma = (w.matrix() * &l).norm();
    let approx = 2.0 * r * r * sigma * sigma * (c - 0.5) * (0.5 - a);
    let report = AdversaryDesignReport {
        epsilon: eps,
        budget,
        radius: r,
        channel: channel.clone(),
        sigma,
        psi,
        px: px.clone(),
        pu,
        pu_prime: pu_prime.clone(),
        approx_utility_nats: approx,
        approx_utility_bits: nats_to_bits(approx),
        utility_nats_coeff: approx / (eps * eps),
        boundary_utility_nats: -0.5 * a * c * sigma * sigma * r * r,
        exact_utility_nats: mechanism.exact_utility()?,
        leakage_mi_nats: mechanism.leakage(&px)?,
        chi2_information_u_prime: chi2_information(&adversary_posteriors, &pu_prime, &px)?,
        adversary_posteriors,
        chi2_adversary,
        chi2_per_letter: mechanism.chi2_per_letter(&px)?,
        induced_bounds: induced,
        chi2_information_u: mechanism.chi2_information(&px)?,
        eps_bound_posthoc: posthoc_eps,
    };
    report.validate()?;
    Ok((mechanism, report))
}
