//! Design for a data provider who holds `X`, wants to disclose about `Y` and must
//! protect `Z`, with Markov chain `(Z, Y) - X - U`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::designer::{select_direction, DesignMatrix};
use crate::error::{Error, Result};
use crate::linalg;
use crate::mechanism::{check_mixture, perturb, simplex_step_bound, Mechanism, PerturbationDirection};
use crate::probcore::{nats_to_bits, ChannelMatrix, ProbVector, DEFAULT_SINGULAR_THRESHOLD};
use crate::Budget;

/// `sigma_max(W1 W2)` above `1 + CASE_TOLERANCE` selects the top right singular vector.
pub const CASE_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderScenario {
    p_y_given_x: ChannelMatrix,
    p_z_given_x: ChannelMatrix,
    px: ProbVector,
    py: ProbVector,
    pz: ProbVector,
}

impl ProviderScenario {
    pub fn new(p_y_given_x: ChannelMatrix, p_z_given_x: ChannelMatrix, px: ProbVector) -> Result<Self> {
        let k = px.len();
        px.require_strictly_positive()?;
        if k < 2 {
            return Err(Error::Unsupported("X needs at least two symbols".into()));
        }
        if p_z_given_x.nrows() != k || p_z_given_x.ncols() != k {
            return Err(Error::DimensionMismatch {
                context: "P_{Z|X} must be K x K",
                expected: k,
                found: if p_z_given_x.ncols() != k { p_z_given_x.ncols() } else { p_z_given_x.nrows() },
            });
        }
        if p_y_given_x.ncols() != k {
            return Err(Error::DimensionMismatch {
                context: "P_{Y|X} columns",
                expected: k,
                found: p_y_given_x.ncols(),
            });
        }
        if p_y_given_x.nrows() < 2 {
            return Err(Error::Unsupported("Y needs at least two symbols".into()));
        }
        p_z_given_x.inverse(DEFAULT_SINGULAR_THRESHOLD)?;
        let py = p_y_given_x.apply(&px)?;
        let pz = p_z_given_x.apply(&px)?;
        py.require_strictly_positive()?;
        pz.require_strictly_positive()?;
        Ok(Self {
            p_y_given_x,
            p_z_given_x,
            px,
            py,
            pz,
        })
    }

    pub fn p_y_given_x(&self) -> &ChannelMatrix {
        &self.p_y_given_x
    }

    pub fn p_z_given_x(&self) -> &ChannelMatrix {
        &self.p_z_given_x
    }

    pub fn px(&self) -> &ProbVector {
        &self.px
    }

    pub fn py(&self) -> &ProbVector {
        &self.py
    }

    pub fn pz(&self) -> &ProbVector {
        &self.pz
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderMatrices {
    pub w1: DesignMatrix,
    pub w2: DesignMatrix,
    pub product: DesignMatrix,
}

impl ProviderMatrices {
    /// `sigma_max(W2) * sigma_min(W1)`, defined when `P_{Y|X}` is square.
    pub fn spectral_product(&self) -> Option<f64> {
        let w1 = self.w1.matrix();
        (w1.nrows() == w1.ncols()).then(|| self.w2.sigma_max() * self.w1.sigma_min())
    }
}

/// `W1 = [sqrt(P_Y)^-1] P_{Y|X} [sqrt(P_X)]`, `W2 = [sqrt(P_X)^-1] P_{Z|X}^-1 [sqrt(P_Z)]` and their product.
pub fn build_w1_w2(s: &ProviderScenario) -> Result<ProviderMatrices> {
    let inv = s.p_z_given_x.inverse(DEFAULT_SINGULAR_THRESHOLD)?;
    let w1 = linalg::diag_map(s.py.as_slice(), |p| 1.0 / p.sqrt())
        * s.p_y_given_x.matrix()
        * linalg::diag(&s.px.sqrt());
    let w2 = linalg::diag_map(s.px.as_slice(), |p| 1.0 / p.sqrt()) * inv * linalg::diag(&s.pz.sqrt());
    let product = &w1 * &w2;

    let root_z = s.pz.sqrt();
    let root_y = s.py.sqrt();
    let forward = (&product * &root_z - &root_y).amax();
    let backward = (product.transpose() * &root_y - &root_z).amax();
    if forward > 1e-7 || backward > 1e-7 {
        return Err(Error::InvariantViolation(format!(
            "sqrt(P_Z) is not a unit singular vector of W1 W2 (residuals {forward:e}, {backward:e})"
        )));
    }
    Ok(ProviderMatrices {
        w1: DesignMatrix::new(w1)?,
        w2: DesignMatrix::new(w2)?,
        product: DesignMatrix::new(product)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderCase {
    SigmaGtOne,
    SigmaEqOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderReport {
    pub epsilon: f64,
    pub budget: Budget,
    pub radius: f64,
    pub px: ProbVector,
    pub py: ProbVector,
    pub pz: ProbVector,
    pub w1: Vec<Vec<f64>>,
    pub w2: Vec<Vec<f64>>,
    pub product: Vec<Vec<f64>>,
    pub w1_singular_values: Vec<f64>,
    pub w2_singular_values: Vec<f64>,
    pub product_singular_values: Vec<f64>,
    pub case: ProviderCase,
    /// Direction in `Z` space, orthogonal to `sqrt(P_Z)`.
    pub chosen_direction: PerturbationDirection,
    pub sigma_selected: f64,
    pub degenerate: bool,
    pub approx_utility_nats: f64,
    pub approx_utility_bits: f64,
    pub utility_nats_coeff: f64,
    pub exact_utility_nats: f64,
    /// Exact `I(U; Z)`.
    pub leakage_mi_nats: f64,
    pub chi2_per_letter: Vec<f64>,
    pub x_posteriors: Vec<ProbVector>,
    /// Post-hoc bound from the `Y` conditionals alone.
    pub eps_bound_output: f64,
    /// Post-hoc bound from the `X` posteriors the kernel acts on.
    pub eps_bound_input: f64,
    pub eps_bound_posthoc: f64,
}

impl ProviderReport {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvariantViolation(what.to_string()));
        self.chosen_direction.validate(&self.pz)?;
        let dot = self.pz.sqrt().dot(&self.chosen_direction.l());
        if dot.abs() > 1e-8 {
            return Err(Error::NotOrthogonal { dot });
        }
        let r2 = self.radius * self.radius;
        if self.chi2_per_letter.iter().any(|c| (c - r2).abs() > 1e-12) {
            return bad("Z posteriors do not saturate the budget");
        }
        let expect = 0.5 * r2 * self.sigma_selected * self.sigma_selected;
        if (self.approx_utility_nats - expect).abs() > 1e-12 * expect.max(1e-300) {
            return bad("approximate utility does not match the selected singular value");
        }
        let top = self.product_singular_values[0];
        let case = if top > 1.0 + CASE_TOLERANCE {
            ProviderCase::SigmaGtOne
        } else {
            ProviderCase::SigmaEqOne
        };
        if case != self.case {
            return bad("case does not match the top singular value");
        }
        if self.eps_bound_posthoc > self.eps_bound_output.min(self.eps_bound_input) {
            return bad("post-hoc bound above its components");
        }
        Ok(())
    }
}

pub fn design_provider_mechanism(
    s: &ProviderScenario,
    eps: f64,
    budget: Budget,
) -> Result<(Mechanism, ProviderReport)> {
    let mats = build_w1_w2(s)?;
    let product = &mats.product;
    let root_z = s.pz.sqrt();
    let case = if product.sigma_max() > 1.0 + CASE_TOLERANCE {
        ProviderCase::SigmaGtOne
    } else {
        ProviderCase::SigmaEqOne
    };
    let index = match case {
        ProviderCase::SigmaGtOne => 0,
        ProviderCase::SigmaEqOne => 1,
    };
    let (l, degenerate) = select_direction(product, index, &root_z)?;
    let direction = PerturbationDirection::new(l.clone(), &s.pz)?;

    let inv = s.p_z_given_x.inverse(DEFAULT_SINGULAR_THRESHOLD)?;
    let jz: DVector<f64> = direction.j();
    let vx = &inv * &jz;
    let vy = s.p_y_given_x.matrix() * &vx;

    let scale = budget.radius(1.0);
    let eps_bound_output = simplex_step_bound(&s.py, &vy, &[1.0, -1.0]) / scale;
    let eps_bound_input = simplex_step_bound(&s.px, &vx, &[1.0, -1.0]) / scale;
    let posthoc = eps_bound_output.min(eps_bound_input);
    if !(eps > 0.0 && eps.is_finite() && eps < posthoc) {
        return Err(Error::EpsilonOutOfRange { eps, bound: posthoc });
    }
    let r = budget.radius(eps);

    let pu = ProbVector::uniform(2)?;
    let x_posteriors = vec![perturb(&s.px, r, &vx)?, perturb(&s.px, -r, &vx)?];
    let outputs = vec![perturb(&s.py, r, &vy)?, perturb(&s.py, -r, &vy)?];
    let z_posteriors = vec![perturb(&s.pz, r, &jz)?, perturb(&s.pz, -r, &jz)?];
    check_mixture(&pu, &x_posteriors, &s.px, "input posterior")?;
    let mechanism = Mechanism::assemble(pu, &s.px, &x_posteriors, outputs, z_posteriors, eps)?;
    mechanism.audit(&s.py, &s.pz, budget.bound(eps))?;

    let sigma = (product.matrix() * &l).norm();
    let approx = 0.5 * r * r * sigma * sigma;
    let report = ProviderReport {
        epsilon: eps,
        budget,
        radius: r,
        px: s.px.clone(),
        py: s.py.clone(),
        pz: s.pz.clone(),
        w1: mats.w1.to_rows(),
        w2: mats.w2.to_rows(),
        product: product.to_rows(),
        w1_singular_values: mats.w1.singular_values().to_vec(),
        w2_singular_values: mats.w2.singular_values().to_vec(),
        product_singular_values: product.singular_values().to_vec(),
        case,
        chosen_direction: direction,
        sigma_selected: sigma,
        degenerate,
        approx_utility_nats: approx,
        approx_utility_bits: nats_to_bits(approx),
        utility_nats_coeff: approx / (eps * eps),
        exact_utility_nats: mechanism.exact_utility()?,
        leakage_mi_nats: mechanism.leakage(&s.pz)?,
        chi2_per_letter: mechanism.chi2_per_letter(&s.pz)?,
        x_posteriors,
        eps_bound_output,
        eps_bound_input,
        eps_bound_posthoc: posthoc,
    };
    report.validate()?;
    Ok((mechanism, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designer::{build_w, design_mechanism};

    fn reference_leakage() -> ChannelMatrix {
        ChannelMatrix::from_rows(&[vec![0.25, 0.4], vec![0.75, 0.6]]).unwrap()
    }

    #[test]
    fn same_channel_is_flat() {
        let c = ChannelMatrix::from_rows(&[vec![0.7, 0.2, 0.1], vec![0.2, 0.6, 0.3], vec![0.1, 0.2, 0.6]]).unwrap();
        let px = ProbVector::new(vec![0.3, 0.3, 0.4]).unwrap();
        let s = ProviderScenario::new(c.clone(), c, px).unwrap();
        let m = build_w1_w2(&s).unwrap();
        assert!(m.product.singular_values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let (_, r) = design_provider_mechanism(&s, 0.01, Budget::Eps2).unwrap();
        assert_eq!(r.case, ProviderCase::SigmaEqOne);
        assert!((r.utility_nats_coeff - 0.5).abs() < 1e-9);
    }

    #[test]
    fn direct_disclosure_matches_base_design() {
        let py_base = ProbVector::new(vec![0.25, 0.75]).unwrap();
        let s = ProviderScenario::new(ChannelMatrix::identity(2).unwrap(), reference_leakage(), py_base.clone()).unwrap();
        let m = build_w1_w2(&s).unwrap();
        let w = build_w(&reference_leakage(), &py_base).unwrap();
        assert!((m.product.matrix() - w.matrix()).amax() < 1e-12);
        let (_, r) = design_provider_mechanism(&s, 0.01, Budget::Eps2).unwrap();
        let (_, b) = design_mechanism(&reference_leakage(), &py_base, 0.01).unwrap();
        assert_eq!(r.case, ProviderCase::SigmaGtOne);
        assert!((r.exact_utility_nats - b.exact_utility_nats).abs() < 1e-14);
    }

    #[test]
    fn rectangular_output_channel() {
        let pyx = ChannelMatrix::from_rows(&[vec![0.9, 0.1], vec![0.05, 0.3], vec![0.05, 0.6]]).unwrap();
        let s = ProviderScenario::new(pyx, reference_leakage(), ProbVector::new(vec![0.4, 0.6]).unwrap()).unwrap();
        let (m, r) = design_provider_mechanism(&s, 0.005, Budget::Eps2).unwrap();
        assert_eq!(m.kernel().ncols(), 2);
        assert!(r.leakage_mi_nats <= 0.5 * 0.005f64.powi(2) * 1.1);
    }

    #[test]
    fn rejects_singular_protection_channel() {
        let bad = ChannelMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let err = ProviderScenario::new(ChannelMatrix::identity(2).unwrap(), bad, ProbVector::uniform(2).unwrap());
        assert!(matches!(err, Err(Error::SingularMatrix { .. })));
    }
}
