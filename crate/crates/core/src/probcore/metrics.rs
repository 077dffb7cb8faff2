//! Divergences and estimation metrics on finite distributions. All logarithms are natural.

use crate::error::{Error, Result};

use super::types::{JointDistribution, ProbVector};

fn same_len(p: &ProbVector, q: &ProbVector) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            context: "divergence arguments",
            expected: q.len(),
            found: p.len(),
        });
    }
    Ok(())
}

/// `(1 + x) ln(1 + x) - x`, accurate near zero where the direct form cancels.
fn entropy_gap(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        // sum_{n >= 2} (-1)^n x^n / (n (n - 1))
        let mut term = x * x;
        let mut total = 0.0;
        for n in 2..=14 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            total += sign * term / (n * (n - 1)) as f64;
            term *= x;
        }
        total
    } else if x <= -1.0 {
        // p = 0: only the shift survives.
        1.0
    } else {
        (1.0 + x) * x.ln_1p() - x
    }
}

/// One cell of `sum p log(p / q)`, shifted by `p - q`. The shifts sum to zero over
/// a pair of distributions, and every shifted cell is non-negative.
fn kl_cell(p: f64, q: f64) -> f64 {
    q * entropy_gap((p - q) / q)
}

/// `D(p || q) = sum p log(p / q)` in nats, with `0 log 0 = 0`.
pub fn kl_divergence(p: &ProbVector, q: &ProbVector) -> Result<f64> {
    same_len(p, q)?;
    let mut total = 0.0;
    for (i, (&pi, &qi)) in p.as_slice().iter().zip(q.as_slice()).enumerate() {
        if qi == 0.0 {
            if pi > 0.0 {
                return Err(Error::SupportViolation { index: i });
            }
            continue;
        }
        total += kl_cell(pi, qi);
    }
    Ok(total)
}

/// `chi2(p || q) = sum (p - q)^2 / q`. Requires `q` strictly positive.
pub fn chi2_divergence(p: &ProbVector, q: &ProbVector) -> Result<f64> {
    same_len(p, q)?;
    let mut total = 0.0;
    for (i, (&pi, &qi)) in p.as_slice().iter().zip(q.as_slice()).enumerate() {
        if qi == 0.0 {
            if pi > 0.0 {
                return Err(Error::SupportViolation { index: i });
            }
            continue;
        }
        let d = pi - qi;
        total += d * d / qi;
    }
    Ok(total)
}

/// `I(A; B)` in nats for a joint pmf.
pub fn mutual_information(joint: &JointDistribution) -> f64 {
    let rows = joint.row_marginal();
    let cols = joint.col_marginal();
    let m = joint.matrix();
    let mut total = 0.0;
    for a in 0..m.nrows() {
        for b in 0..m.ncols() {
            let q = rows[a] * cols[b];
            if q > 0.0 {
                total += kl_cell(m[(a, b)], q);
            }
        }
    }
    total
}

/// Averaged chi-square criterion `sum_u P_U(u) chi2(P_{X|U=u} || P_X)`.
pub fn chi2_information(
    posteriors: &[ProbVector],
    pu: &ProbVector,
    prior: &ProbVector,
) -> Result<f64> {
    if posteriors.len() != pu.len() {
        return Err(Error::DimensionMismatch {
            context: "one posterior per disclosed symbol",
            expected: pu.len(),
            found: posteriors.len(),
        });
    }
    posteriors
        .iter()
        .zip(pu.as_slice())
        .try_fold(0.0, |acc, (post, &w)| {
            Ok(acc + w * chi2_divergence(post, prior)?)
        })
}

/// Minimum mean-square error of estimating a binary `X` from its posterior: `p(1) (1 - p(1))`.
pub fn mmse_binary(posterior: &ProbVector) -> Result<f64> {
    if posterior.len() != 2 {
        return Err(Error::NotBinary(posterior.len()));
    }
    let p1 = posterior[1];
    Ok(p1 * (1.0 - p1))
}

/// `P(U != Y) = sum_u P_U(u) P(Y != u | U = u)` for binary `U` and `Y`.
pub fn error_probability(pu: &ProbVector, outputs: &[ProbVector]) -> Result<f64> {
    if pu.len() != 2 {
        return Err(Error::NotBinary(pu.len()));
    }
    if outputs.len() != 2 {
        return Err(Error::NotBinary(outputs.len()));
    }
    if let Some(o) = outputs.iter().find(|o| o.len() != 2) {
        return Err(Error::NotBinary(o.len()));
    }
    Ok((0..2).map(|u| pu[u] * (1.0 - outputs[u][u])).sum())
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn kl_identity_and_deterministic() {
        assert_eq!(kl_divergence(&pv(&[0.3, 0.7]), &pv(&[0.3, 0.7])).unwrap(), 0.0);
        let d = kl_divergence(&pv(&[1.0, 0.0]), &pv(&[0.5, 0.5])).unwrap();
        assert!((d - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn kl_rejects_support_violation_and_mismatch() {
        assert_eq!(
            kl_divergence(&pv(&[0.5, 0.5]), &pv(&[1.0, 0.0])),
            Err(Error::SupportViolation { index: 1 })
        );
        assert!(matches!(
            kl_divergence(&pv(&[0.5, 0.5]), &pv(&[0.2, 0.3, 0.5])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn kl_near_reference_output_matches_direct_sum() {
        // Direct summation oracle for the perturbed output at eps = 0.01.
        let p: [f64; 2] = [0.25 - 0.032, 0.75 + 0.032];
        let q = [0.25, 0.75];
        let direct: f64 = p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum();
        let got = kl_divergence(&pv(&p), &pv(&q)).unwrap();
        assert!((got - direct).abs() < 1e-15);
        // Local quadratic behaviour: D ~ chi2 / 2.
        let chi = chi2_divergence(&pv(&p), &pv(&q)).unwrap();
        assert!((got - 0.5 * chi).abs() / got < 0.05);
    }

    #[test]
    fn chi2_of_unit_direction_is_eps_squared() {
        let prior = pv(&[0.3625, 0.6375]);
        let s = prior.sqrt();
        // Unit vector orthogonal to sqrt(prior).
        let l = [s[1], -s[0]];
        let eps = 0.05;
        let post: Vec<f64> = (0..2).map(|i| prior[i] + eps * s[i] * l[i]).collect();
        let c = chi2_divergence(&pv(&post), &prior).unwrap();
        assert!((c - eps * eps).abs() < 1e-15);
        assert_eq!(chi2_divergence(&prior, &prior).unwrap(), 0.0);
    }

    #[test]
    fn mutual_information_basic_cases() {
        let product = JointDistribution::from_conditionals(
            &pv(&[0.4, 0.6]),
            &[pv(&[0.2, 0.8]), pv(&[0.2, 0.8])],
        )
        .unwrap();
        assert!(mutual_information(&product).abs() < 1e-15);

        let diag = JointDistribution::from_conditionals(
            &pv(&[0.5, 0.5]),
            &[pv(&[1.0, 0.0]), pv(&[0.0, 1.0])],
        )
        .unwrap();
        assert!((mutual_information(&diag) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn chi2_information_is_zero_at_prior_and_bounded_by_max() {
        let prior = pv(&[0.2, 0.3, 0.5]);
        let pu = pv(&[0.25, 0.75]);
        assert_eq!(
            chi2_information(&[prior.clone(), prior.clone()], &pu, &prior).unwrap(),
            0.0
        );
        let a = pv(&[0.25, 0.3, 0.45]);
        let b = pv(&[0.1833333333333333, 0.3, 0.5166666666666667]);
        let avg = chi2_information(&[a.clone(), b.clone()], &pu, &prior).unwrap();
        let m = chi2_divergence(&a, &prior)
            .unwrap()
            .max(chi2_divergence(&b, &prior).unwrap());
        assert!(avg <= m);
    }

    #[test]
    fn mmse_binary_cases() {
        assert_eq!(mmse_binary(&pv(&[0.5, 0.5])).unwrap(), 0.25);
        assert_eq!(mmse_binary(&pv(&[1.0, 0.0])).unwrap(), 0.0);
        // Perfect-privacy baseline of a BSC leakage at alpha = 1/4.
        let alpha = 0.25;
        let px = pv(&[(3.0 - 2.0 * alpha) / 4.0, (2.0 * alpha + 1.0) / 4.0]);
        assert!((mmse_binary(&px).unwrap() - 0.234375).abs() < 1e-15);
        assert_eq!(mmse_binary(&pv(&[0.2, 0.3, 0.5])), Err(Error::NotBinary(3)));
    }

    #[test]
    fn error_probability_cases() {
        let half = pv(&[0.5, 0.5]);
        assert_eq!(
            error_probability(&half, &[half.clone(), half.clone()]).unwrap(),
            0.5
        );
        let e = error_probability(&half, &[pv(&[1.0, 0.0]), pv(&[0.0, 1.0])]).unwrap();
        assert_eq!(e, 0.0);
        assert!(error_probability(&pv(&[0.2, 0.3, 0.5]), &[]).is_err());
    }
}
