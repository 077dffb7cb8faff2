//! The base design: build `W`, take its principal right singular vector, and
//! perturb the priors along it to get a binary, uniform disclosure.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Svd};
use crate::mechanism::{perturb, simplex_step_bound, Mechanism, PerturbationDirection};
use crate::probcore::{
    nats_to_bits, ChannelMatrix, ProbVector, DEFAULT_SINGULAR_THRESHOLD,
};
use crate::Budget;

/// Relative gap below which two singular values count as one repeated value.
pub const DEGENERACY_TOLERANCE: f64 = 1e-9;
/// Tolerance of the orthogonality check between a direction and the prior root.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-8;

/// A design matrix together with its full SVD.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    w: DMatrix<f64>,
    svd: Svd,
}

impl DesignMatrix {
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        let svd = linalg::svd(&w)?;
        Ok(Self { w, svd })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn svd(&self) -> &Svd {
        &self.svd
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.svd.singular_values
    }

    pub fn sigma_max(&self) -> f64 {
        self.svd.max()
    }

    pub fn sigma_min(&self) -> f64 {
        self.svd.min()
    }

    pub fn right(&self, i: usize) -> DVector<f64> {
        self.svd.right(i)
    }

    pub fn left(&self, i: usize) -> DVector<f64> {
        self.svd.left(i)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        linalg::to_rows(&self.w)
    }

    /// Whether singular value `i` is within [`DEGENERACY_TOLERANCE`] of a neighbour.
    pub fn is_degenerate(&self, i: usize) -> bool {
        let s = self.singular_values();
        let close = |j: usize| (s[i] - s[j]).abs() <= DEGENERACY_TOLERANCE * s[0].max(f64::MIN_POSITIVE);
        (i > 0 && close(i - 1)) || (i + 1 < s.len() && close(i + 1))
    }
}

/// `P_X = P_{X|Y} P_Y`, required to be strictly positive.
pub fn derive_px(leakage: &ChannelMatrix, py: &ProbVector) -> Result<ProbVector> {
    let px = leakage.apply(py)?;
    px.require_strictly_positive()?;
    Ok(px)
}

fn require_square_pair(leakage: &ChannelMatrix, py: &ProbVector) -> Result<()> {
    if !leakage.is_square() {
        return Err(Error::DimensionMismatch {
            context: "square leakage matrix",
            expected: leakage.nrows(),
            found: leakage.ncols(),
        });
    }
    if leakage.ncols() != py.len() {
        return Err(Error::DimensionMismatch {
            context: "leakage columns vs P_Y",
            expected: leakage.ncols(),
            found: py.len(),
        });
    }
    if py.len() < 2 {
        return Err(Error::Unsupported(
            "alphabets need at least two symbols".into(),
        ));
    }
    py.require_strictly_positive()
}

pub fn build_w(leakage: &ChannelMatrix, py: &ProbVector) -> Result<DesignMatrix> {
    build_w_with_threshold(leakage, py, DEFAULT_SINGULAR_THRESHOLD)
}

pub fn build_w_with_threshold(
    leakage: &ChannelMatrix,
    py: &ProbVector,
    threshold: f64,
) -> Result<DesignMatrix> {
    require_square_pair(leakage, py)?;
    let px = derive_px(leakage, py)?;
    let inv = leakage.inverse(threshold)?;
    let w = linalg::diag_map(py.as_slice(), |p| 1.0 / p.sqrt())
        * inv
        * linalg::diag(&px.sqrt());
    DesignMatrix::new(w)
}

/// The unit vector orthogonal to `anchor` that maximizes `||m l||`, computed on
/// the orthogonal complement of `anchor`. Returns the vector and its gain.
pub(crate) fn complement_direction(
    m: &DMatrix<f64>,
    anchor: &DVector<f64>,
) -> Result<(DVector<f64>, f64)> {
    let basis = linalg::orthogonal_complement(anchor);
    let restricted = linalg::svd(&(m * &basis))?;
    let mut l = &basis * restricted.right(0);
    l.normalize_mut();
    linalg::canonical_sign(&mut l);
    Ok((l, restricted.max()))
}

/// Picks right singular vector `index` of `d` if it is simple and orthogonal to
/// `anchor`; otherwise falls back to the complement construction. The flag is
/// true when the fallback was used.
pub(crate) fn select_direction(
    d: &DesignMatrix,
    index: usize,
    anchor: &DVector<f64>,
) -> Result<(DVector<f64>, bool)> {
    if !d.is_degenerate(index) {
        let v = d.right(index);
        if v.dot(anchor).abs() <= ORTHOGONALITY_TOLERANCE {
            return Ok((v, false));
        }
    }
    let (l, _) = complement_direction(d.matrix(), anchor)?;
    Ok((l, true))
}

/// `L*`, the top right singular vector of `W`.
///
/// When the top singular value is repeated the optimum is not unique; the
/// deterministic complement construction picks one (the objective only depends
/// on the singular value).
pub fn principal_direction(w: &DesignMatrix, px: &ProbVector) -> Result<PerturbationDirection> {
    let anchor = px.sqrt();
    let (l, _) = principal_direction_flagged(w, &anchor)?;
    PerturbationDirection::new(l, px)
}

fn principal_direction_flagged(w: &DesignMatrix, anchor: &DVector<f64>) -> Result<(DVector<f64>, bool)> {
    if w.matrix().nrows() != anchor.len() {
        return Err(Error::DimensionMismatch {
            context: "design matrix vs prior",
            expected: w.matrix().nrows(),
            found: anchor.len(),
        });
    }
    if !w.is_degenerate(0) {
        let v = w.right(0);
        let dot = v.dot(anchor);
        if dot.abs() > ORTHOGONALITY_TOLERANCE {
            return Err(Error::NotOrthogonal { dot });
        }
        return Ok((v, false));
    }
    let (l, _) = complement_direction(w.matrix(), anchor)?;
    Ok((l, true))
}

/// The three admissible-epsilon figures for a direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonBounds {
    /// `min P_X / sqrt(max P_X)`: sufficient for the quadratic leakage approximation.
    pub leakage_apriori: f64,
    /// `sigma_min(P_{X|Y}) min P_Y / sqrt(max P_X)`: sufficient for the utility approximation.
    pub utility_apriori: f64,
    /// Largest radius keeping the designed conditionals inside the simplex.
    pub posthoc: f64,
}

/// Coefficient vector `P_{X|Y}^-1 [sqrt(P_X)] l` that moves `P_Y`.
fn output_coefficients(inv: &DMatrix<f64>, px: &ProbVector, l: &DVector<f64>) -> DVector<f64> {
    inv * px.sqrt().component_mul(l)
}

pub fn epsilon_bounds(
    leakage: &ChannelMatrix,
    py: &ProbVector,
    px: &ProbVector,
    direction: &PerturbationDirection,
) -> Result<EpsilonBounds> {
    require_square_pair(leakage, py)?;
    direction.validate(px)?;
    let inv = leakage.inverse(DEFAULT_SINGULAR_THRESHOLD)?;
    let v = output_coefficients(&inv, px, &direction.l());
    Ok(bounds_from(leakage, py, px, &v))
}

fn bounds_from(
    leakage: &ChannelMatrix,
    py: &ProbVector,
    px: &ProbVector,
    v: &DVector<f64>,
) -> EpsilonBounds {
    let root_max = px.max().sqrt();
    EpsilonBounds {
        leakage_apriori: px.min() / root_max,
        utility_apriori: leakage.min_singular_value() * py.min() / root_max,
        posthoc: simplex_step_bound(py, v, &[1.0, -1.0]),
    }
}

/// Knobs for [`design_mechanism_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignOptions {
    pub budget: Budget,
    pub singular_threshold: f64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            budget: Budget::Eps2,
            singular_threshold: DEFAULT_SINGULAR_THRESHOLD,
        }
    }
}

/// Everything computed while designing a base mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub epsilon: f64,
    pub budget: Budget,
    /// Perturbation radius actually applied (`eps` or `eps / sqrt(2)`).
    pub radius: f64,
    pub px: ProbVector,
    pub w: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub sigma_max: f64,
    pub l_star: PerturbationDirection,
    /// `P_{X|Y}^-1 [sqrt(P_X)] L*`; the conditionals are `P_Y +/- radius * this`.
    pub output_coefficients: Vec<f64>,
    pub approx_utility_nats: f64,
    pub approx_utility_bits: f64,
    /// `approx_utility / eps^2`.
    pub utility_nats_coeff: f64,
    pub utility_bits_coeff: f64,
    pub exact_utility_nats: f64,
    pub exact_utility_bits: f64,
    pub leakage_mi_nats: f64,
    pub chi2_per_letter: Vec<f64>,
    pub chi2_information: f64,
    pub eps_bound_leakage_apriori: f64,
    pub eps_bound_utility_apriori: f64,
    pub eps_bound_posthoc: f64,
    pub lambda_min: f64,
    pub degenerate: bool,
    pub warning: Option<String>,
}

impl DesignReport {
    /// Re-checks the relations that must hold between the report's fields.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvariantViolation(what));
        let expect = 0.5 * self.radius * self.radius * self.sigma_max * self.sigma_max;
        if (self.approx_utility_nats - expect).abs() > 1e-12 * expect.max(1e-300) {
            return bad(format!(
                "approx utility {} != radius^2 sigma_max^2 / 2 = {expect}",
                self.approx_utility_nats
            ));
        }
        if (self.lambda_min * self.sigma_max * self.sigma_max - 1.0).abs() > 1e-9 {
            return bad("lambda_min * sigma_max^2 != 1".into());
        }
        if (self.radius - self.budget.radius(self.epsilon)).abs() > 1e-15 {
            return bad("radius does not match the budget".into());
        }
        self.l_star.validate(&self.px)?;
        let limit = self.radius * self.radius * (1.0 + 1e-9);
        if let Some(c) = self.chi2_per_letter.iter().find(|&&c| c > limit) {
            return bad(format!("per-letter chi2 {c} above the budget"));
        }
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        if (top - self.sigma_max).abs() > 1e-9 * top {
            return bad("sigma_max is not the top singular value".into());
        }
        Ok(())
    }
}

pub fn design_mechanism(
    leakage: &ChannelMatrix,
    py: &ProbVector,
    eps: f64,
) -> Result<(Mechanism, DesignReport)> {
    design_mechanism_with(leakage, py, eps, &DesignOptions::default())
}

pub fn design_mechanism_with(
    leakage: &ChannelMatrix,
    py: &ProbVector,
    eps: f64,
    options: &DesignOptions,
) -> Result<(Mechanism, DesignReport)> {
    let w = build_w_with_threshold(leakage, py, options.singular_threshold)?;
    let px = derive_px(leakage, py)?;
    let (l, degenerate) = principal_direction_flagged(&w, &px.sqrt())?;
    let direction = PerturbationDirection::new(l.clone(), &px)?;
    let inv = leakage.inverse(options.singular_threshold)?;
    let v = output_coefficients(&inv, &px, &l);
    let bounds = bounds_from(leakage, py, &px, &v);

    let scale = options.budget.radius(1.0);
    let posthoc_eps = bounds.posthoc / scale;
    if !(eps > 0.0 && eps.is_finite() && eps < posthoc_eps) {
        return Err(Error::EpsilonOutOfRange {
            eps,
            bound: posthoc_eps,
        });
    }
    let radius = options.budget.radius(eps);
    let warning = if radius >= bounds.leakage_apriori.min(bounds.utility_apriori) {
        let msg = format!(
            "radius {radius} exceeds an a-priori bound (leakage {:.6}, utility {:.6}); \
             the local approximations may be loose",
            bounds.leakage_apriori, bounds.utility_apriori
        );
        warn!("{msg}");
        Some(msg)
    } else {
        None
    };

    let j = direction.j();
    let outputs = vec![perturb(py, radius, &v)?, perturb(py, -radius, &v)?];
    let posteriors = vec![perturb(&px, radius, &j)?, perturb(&px, -radius, &j)?];
    let mechanism = Mechanism::assemble(
        ProbVector::uniform(2)?,
        py,
        &outputs,
        outputs.clone(),
        posteriors,
        eps,
    )?;
    mechanism.audit(py, &px, options.budget.bound(eps))?;

    let sigma = (w.matrix() * &l).norm();
    let approx = 0.5 * radius * radius * sigma * sigma;
    let exact = mechanism.exact_utility()?;
    let report = DesignReport {
        epsilon: eps,
        budget: options.budget,
        radius,
        px: px.clone(),
        w: w.to_rows(),
        singular_values: w.singular_values().to_vec(),
        sigma_max: sigma,
        l_star: direction,
        output_coefficients: v.iter().copied().collect(),
        approx_utility_nats: approx,
        approx_utility_bits: nats_to_bits(approx),
        utility_nats_coeff: approx / (eps * eps),
        utility_bits_coeff: nats_to_bits(approx / (eps * eps)),
        exact_utility_nats: exact,
        exact_utility_bits: nats_to_bits(exact),
        leakage_mi_nats: mechanism.leakage(&px)?,
        chi2_per_letter: mechanism.chi2_per_letter(&px)?,
        chi2_information: mechanism.chi2_information(&px)?,
        eps_bound_leakage_apriori: bounds.leakage_apriori / scale,
        eps_bound_utility_apriori: bounds.utility_apriori / scale,
        eps_bound_posthoc: posthoc_eps,
        lambda_min: 1.0 / (sigma * sigma),
        degenerate,
        warning,
    };
    report.validate()?;
    Ok((mechanism, report))
}

/// `Q = [sqrt(P_X)^-1] P_{X|Y} [sqrt(P_Y)] = W^-1` and its smallest squared
/// singular value, which equals `1 / sigma_max(W)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tightness {
    pub q: DMatrix<f64>,
    pub lambda_min: f64,
}

/// Builds `Q` and checks that the averaged chi-square bound it induces is attained by `W`.
pub fn information_bound_tightness(leakage: &ChannelMatrix, py: &ProbVector) -> Result<Tightness> {
    let w = build_w(leakage, py)?;
    let px = derive_px(leakage, py)?;
    let q = linalg::diag_map(px.as_slice(), |p| 1.0 / p.sqrt())
        * leakage.matrix()
        * linalg::diag(&py.sqrt());
    let q_min = linalg::svd(&q)?.min();
    let lambda_min = q_min * q_min;
    let product = lambda_min * w.sigma_max() * w.sigma_max();
    if (product - 1.0).abs() > 1e-9 {
        return Err(Error::InvariantViolation(format!(
            "sigma_min(Q)^2 * sigma_max(W)^2 = {product}, expected 1"
        )));
    }
    Ok(Tightness { q, lambda_min })
}
