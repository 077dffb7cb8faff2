//! Brute-force solvers for the privacy problem, independent of the SVD design.
//!
//! The grid searches cover binary `Y` and binary `U`. The randomized search works
//! for any alphabet size but only yields a lower bound on the optimum.

use log::warn;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::designer::{derive_px, design_mechanism};
use crate::error::{Error, Result};
use crate::probcore::{
    chi2_divergence, mutual_information, ChannelMatrix, JointDistribution, ProbVector,
    DEFAULT_SINGULAR_THRESHOLD,
};
use crate::sampling::random_orthogonal_unit;

/// Disclosed symbols with less mass than this define no posterior and are ignored.
pub const MASS_THRESHOLD: f64 = 1e-9;
/// Absolute slack on the chi-square feasibility test.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-14;
pub const DEFAULT_RESOLUTION: usize = 2000;
pub const MIN_RESOLUTION: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    /// Grid over `(P(U=0|Y=0), P(U=0|Y=1))` on `[0, 1]^2`.
    KernelGrid,
    /// Grid over `(P(Y=0|U=0), P(Y=0|U=1))` on the feasible interval.
    ConditionalGrid,
    Randomized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub method: SearchMethod,
    pub best_utility_nats: f64,
    /// `P_{U|Y}`, rows indexed by `u`.
    pub best_kernel: ChannelMatrix,
    /// Grid resolution, or the sample count for the randomized search.
    pub grid_resolution: usize,
    pub feasible_count: u64,
    /// Largest utility change between the best cell and its grid neighbours.
    pub cell_slack_nats: f64,
}

/// Utility `I(U;Y)` of a kernel if every realized posterior meets `chi2 <= eps^2`.
///
/// This is the audit applied to every returned kernel; it only uses the
/// divergence functions and Bayes' rule.
pub fn evaluate_kernel(
    leakage: &ChannelMatrix,
    py: &ProbVector,
    kernel: &ChannelMatrix,
    eps: f64,
) -> Result<Option<f64>> {
    if kernel.ncols() != py.len() {
        return Err(Error::DimensionMismatch {
            context: "kernel columns vs P_Y",
            expected: py.len(),
            found: kernel.ncols(),
        });
    }
    let px = derive_px(leakage, py)?;
    let k = kernel.matrix();
    let joint = DMatrix::from_fn(k.nrows(), k.ncols(), |u, y| k[(u, y)] * py[y]);
    for u in 0..k.nrows() {
        let mass: f64 = joint.row(u).sum();
        if mass <= MASS_THRESHOLD {
            continue;
        }
        let cond: Vec<f64> = joint.row(u).iter().map(|j| j / mass).collect();
        let total: f64 = cond.iter().sum();
        let cond = ProbVector::new(cond.into_iter().map(|c| c / total).collect())?;
        let posterior = leakage.apply(&cond)?;
        if chi2_divergence(&posterior, &px)? > eps * eps + FEASIBILITY_TOLERANCE {
            return Ok(None);
        }
    }
    Ok(Some(mutual_information(&JointDistribution::new(joint)?)))
}

fn require_binary(leakage: &ChannelMatrix, py: &ProbVector, eps: f64, resolution: usize) -> Result<()> {
    if leakage.nrows() != 2 || leakage.ncols() != 2 || py.len() != 2 {
        return Err(Error::NotBinary(leakage.nrows().max(leakage.ncols()).max(py.len())));
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::Unsupported(format!(
            "grid resolution {resolution} is below {MIN_RESOLUTION}"
        )));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::EpsilonOutOfRange { eps, bound: f64::INFINITY });
    }
    py.require_strictly_positive()?;
    leakage.inverse(DEFAULT_SINGULAR_THRESHOLD)?;
    Ok(())
}

/// Binary KL `D([t, 1-t] || [a, 1-a])` with `0 log 0 = 0`.
fn kl2(t: f64, a: f64) -> f64 {
    let term = |p: f64, q: f64| if p > 0.0 { p * (p / q).ln() } else { 0.0 };
    (term(t, a) + term(1.0 - t, 1.0 - a)).max(0.0)
}

#[derive(Clone, Copy)]
struct Cell {
    value: f64,
    i: usize,
    j: usize,
}

/// Higher value wins; exact ties go to the lexicographically smallest index.
fn better(a: Option<Cell>, b: Option<Cell>) -> Option<Cell> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => {
            if y.value > x.value || (y.value == x.value && (y.i, y.j) < (x.i, x.j)) {
                Some(y)
            } else {
                Some(x)
            }
        }
    }
}

/// Runs `eval` over the `(res+1)^2` grid in parallel. Returns the best feasible
/// cell and the number of feasible cells; the reduction is order independent.
fn grid_max<F>(res: usize, eval: F) -> (Option<Cell>, u64)
where
    F: Fn(usize, usize) -> Option<f64> + Sync,
{
    (0..=res)
        .into_par_iter()
        .map(|i| {
            let mut best = None;
            let mut count = 0u64;
            for j in 0..=res {
                if let Some(value) = eval(i, j) {
                    count += 1;
                    best = better(best, Some(Cell { value, i, j }));
                }
            }
            (best, count)
        })
        .reduce(|| (None, 0), |(a, ca), (b, cb)| (better(a, b), ca + cb))
}

/// Largest utility difference between the best cell and its eight neighbours.
fn neighbour_slack(res: usize, best: Cell, utility: impl Fn(usize, usize) -> Option<f64>) -> f64 {
    let mut slack: f64 = 0.0;
    for di in -1i64..=1 {
        for dj in -1i64..=1 {
            let (i, j) = (best.i as i64 + di, best.j as i64 + dj);
            if (di, dj) == (0, 0) || i < 0 || j < 0 || i > res as i64 || j > res as i64 {
                continue;
            }
            if let Some(v) = utility(i as usize, j as usize) {
                slack = slack.max((v - best.value).abs());
            }
        }
    }
    slack
}

#[allow(clippy::too_many_arguments)]
fn finish(
    leakage: &ChannelMatrix,
    py: &ProbVector,
    eps: f64,
    method: SearchMethod,
    kernel: ChannelMatrix,
    claimed: f64,
    resolution: usize,
    feasible_count: u64,
    cell_slack_nats: f64,
) -> Result<GridSearchResult> {
    let audited = evaluate_kernel(leakage, py, &kernel, eps)?.ok_or_else(|| {
        Error::InvariantViolation("search returned a kernel that fails the chi-square audit".into())
    })?;
    if (audited - claimed).abs() > 1e-9 * claimed.max(1e-12) {
        return Err(Error::InvariantViolation(format!(
            "search utility {claimed} disagrees with the audit {audited}"
        )));
    }
    Ok(GridSearchResult {
        method,
        best_utility_nats: audited,
        best_kernel: kernel,
        grid_resolution: resolution,
        feasible_count,
        cell_slack_nats,
    })
}

fn independent_kernel(k: usize) -> Result<ChannelMatrix> {
    ChannelMatrix::new(DMatrix::from_element(2, k, 0.5))
}

/// Exhaustive search over binary kernels `(P(U=0|Y=0), P(U=0|Y=1))` with step `1/resolution`.
pub fn exact_binary_search(
    leakage: &ChannelMatrix,
    py: &ProbVector,
    eps: f64,
    resolution: usize,
) -> Result<GridSearchResult> {
    require_binary(leakage, py, eps, resolution)?;
    let px = derive_px(leakage, py)?;
    let m = leakage.matrix();
    let (a, b) = (py[0], py[1]);
    let (m00, m01) = (m[(0, 0)], m[(0, 1)]);
    let weight = 1.0 / px[0] + 1.0 / px[1];
    let budget = eps * eps + FEASIBILITY_TOLERANCE;
    // Exact division keeps nested grids bitwise nested.
    let at = |i: usize| i as f64 / resolution as f64;

    let utility = |i: usize, j: usize| -> (f64, bool) {
        let (q0, q1) = (at(i), at(j));
        let pu0 = a * q0 + b * q1;
        let pu1 = 1.0 - pu0;
        let mut feasible = true;
        let mut mi = 0.0;
        for (mass, ty) in [(pu0, a * q0), (pu1, a * (1.0 - q0))] {
            if mass <= MASS_THRESHOLD {
                continue;
            }
            let t = ty / mass;
            let x0 = m00 * t + m01 * (1.0 - t);
            let d = x0 - px[0];
            feasible &= d * d * weight <= budget;
            mi += mass * kl2(t, a);
        }
        (mi, feasible)
    };
    let (best, count) = grid_max(resolution, |i, j| {
        let (mi, ok) = utility(i, j);
        ok.then_some(mi)
    });
    let Some(best) = best else {
        return finish(leakage, py, eps, SearchMethod::KernelGrid, independent_kernel(2)?, 0.0, resolution, 0, 0.0);
    };
    let slack = neighbour_slack(resolution, best, |i, j| Some(utility(i, j).0));
    let (q0, q1) = (at(best.i), at(best.j));
    let kernel = ChannelMatrix::from_rows(&[vec![q0, q1], vec![1.0 - q0, 1.0 - q1]])?;
    finish(leakage, py, eps, SearchMethod::KernelGrid, kernel, best.value, resolution, count, slack)
}

/// Exhaustive search over the output conditionals `(P(Y=0|U=0), P(Y=0|U=1))`.
///
/// Each posterior's chi-square is a quadratic in `P(Y=0|U=u)`, so the feasible
/// values form an interval around `P_Y(0)`; the grid spans that interval with
/// `resolution` steps and includes both endpoints. `P_U` follows from the mixture
/// constraint. Much finer than [`exact_binary_search`] at small `eps`.
pub fn exact_conditional_search(
    leakage: &ChannelMatrix,
    py: &ProbVector,
    eps: f64,
    resolution: usize,
) -> Result<GridSearchResult> {
    require_binary(leakage, py, eps, resolution)?;
    let px = derive_px(leakage, py)?;
    let m = leakage.matrix();
    let a = py[0];
    let spread: f64 = (0..2).map(|x| (m[(x, 0)] - m[(x, 1)]).powi(2) / px[x]).sum();
    let half_width = eps / spread.sqrt();
    let lo = (a - half_width).max(0.0);
    let hi = (a + half_width).min(1.0);
    let step = (hi - lo) / resolution as f64;
    let budget = eps * eps + FEASIBILITY_TOLERANCE;
    let weight = 1.0 / px[0] + 1.0 / px[1];

    let grid: Vec<f64> = (0..=resolution)
        .map(|i| if i == resolution { hi } else { lo + i as f64 * step })
        .collect();
    // Per grid value: divergence from P_Y and whether its posterior is feasible.
    let table: Vec<(f64, bool)> = grid
        .iter()
        .map(|&p| {
            let x0 = m[(0, 0)] * p + m[(0, 1)] * (1.0 - p);
            let d = x0 - px[0];
            (kl2(p, a), d * d * weight <= budget)
        })
        .collect();

    let weight_of = |i: usize, j: usize| -> Option<f64> {
        let (p0, p1) = (grid[i], grid[j]);
        if p0 == p1 {
            return None;
        }
        let w = (a - p1) / (p0 - p1);
        (0.0..=1.0).contains(&w).then_some(w)
    };
    let utility = |i: usize, j: usize| -> Option<(f64, bool)> {
        let w = weight_of(i, j)?;
        let mut feasible = true;
        if w > MASS_THRESHOLD {
            feasible &= table[i].1;
        }
        if 1.0 - w > MASS_THRESHOLD {
            feasible &= table[j].1;
        }
        Some((w * table[i].0 + (1.0 - w) * table[j].0, feasible))
    };
    let (best, count) = grid_max(resolution, |i, j| {
        utility(i, j).and_then(|(mi, ok)| ok.then_some(mi))
    });
    let Some(best) = best else {
        return finish(leakage, py, eps, SearchMethod::ConditionalGrid, independent_kernel(2)?, 0.0, resolution, 0, 0.0);
    };
    let slack = neighbour_slack(resolution, best, |i, j| utility(i, j).map(|u| u.0));
    let w = weight_of(best.i, best.j).expect("best cell has a weight");
    let p0 = grid[best.i];
    let q0 = w * p0 / a;
    let q1 = w * (1.0 - p0) / py[1];
    let kernel = ChannelMatrix::from_rows(&[vec![q0, q1], vec![1.0 - q0, 1.0 - q1]])?;
    finish(leakage, py, eps, SearchMethod::ConditionalGrid, kernel, best.value, resolution, count, slack)
}

/// Seeded random probe over binary kernels; a lower bound, not an optimum.
pub fn randomized_search(
    leakage: &ChannelMatrix,
    py: &ProbVector,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    randomized_search_with(leakage, py, eps, samples, seed, &[])
}

/// As [`randomized_search`], evaluating `candidates` before the random samples.
///
/// Even-numbered samples are uniform random kernels. Odd-numbered samples are
/// symmetric uniform-`U` mechanisms along a random unit direction orthogonal to
/// `sqrt(P_X)`; they are skipped when they leave the simplex.
pub fn randomized_search_with(
    leakage: &ChannelMatrix,
    py: &ProbVector,
    eps: f64,
    samples: usize,
    seed: u64,
    candidates: &[ChannelMatrix],
) -> Result<GridSearchResult> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::EpsilonOutOfRange { eps, bound: f64::INFINITY });
    }
    let px = derive_px(leakage, py)?;
    py.require_strictly_positive()?;
    let inv = leakage.inverse(DEFAULT_SINGULAR_THRESHOLD)?;
    let k = py.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut best_kernel = independent_kernel(k)?;
    let mut best = 0.0;
    let mut feasible = 0u64;
    let mut consider = |kernel: ChannelMatrix| -> Result<()> {
        if let Some(u) = evaluate_kernel(leakage, py, &kernel, eps)? {
            feasible += 1;
            if u > best {
                best = u;
                best_kernel = kernel;
            }
        }
        Ok(())
    };
    for c in candidates {
        consider(c.clone())?;
    }
    let anchor = px.sqrt();
    for s in 0..samples {
        if s % 2 == 0 {
            let q: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
            consider(ChannelMatrix::new(DMatrix::from_fn(2, k, |u, y| {
                if u == 0 { q[y] } else { 1.0 - q[y] }
            }))?)?;
        } else {
            let l = random_orthogonal_unit(&mut rng, &anchor);
            let v = &inv * anchor.component_mul(&l);
            let ok = (0..k).all(|y| py[y] - eps * v[y].abs() >= 0.0);
            if !ok {
                continue;
            }
            consider(ChannelMatrix::new(DMatrix::from_fn(2, k, |u, y| {
                let sign = if u == 0 { 1.0 } else { -1.0 };
                0.5 * (py[y] + sign * eps * v[y]) / py[y]
            }))?)?;
        }
    }
    if feasible == 0 {
        warn!("randomized search found no feasible sample; reporting the independent kernel");
    }
    let claimed = best;
    finish(leakage, py, eps, SearchMethod::Randomized, best_kernel, claimed, samples, feasible, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorPoint {
    pub eps: f64,
    pub exact: f64,
    pub approx: f64,
    /// `|exact - approx| / eps^2`.
    pub residual_ratio: f64,
}

/// Exact versus quadratic utility of the designed mechanism over `eps_list`.
pub fn taylor_residual_scan(
    leakage: &ChannelMatrix,
    py: &ProbVector,
    eps_list: &[f64],
) -> Result<Vec<TaylorPoint>> {
    eps_list
        .iter()
        .map(|&eps| {
            let (_, r) = design_mechanism(leakage, py, eps)?;
            Ok(TaylorPoint {
                eps,
                exact: r.exact_utility_nats,
                approx: r.approx_utility_nats,
                residual_ratio: (r.exact_utility_nats - r.approx_utility_nats).abs() / (eps * eps),
            })
        })
        .collect()
}
