//! The four subcommands. Each returns the rendered output; `mod.rs` decides where it goes.

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::format::{number, Table};
use super::scenario::{bsc_matrix, OracleGrid, ScenarioFile};
use super::{CliError, Format, Overrides};
use crate::adversary::{design_adversarial_mechanism, AdversaryDesignReport};
use crate::designer::{design_mechanism_with, DesignOptions, DesignReport};
use crate::error::Error;
use crate::oracle::{
    exact_binary_search, exact_conditional_search, randomized_search, DEFAULT_RESOLUTION,
};
use crate::probcore::{error_probability, mmse_binary, ChannelMatrix, ProbVector};
use crate::provider::{design_provider_mechanism, ProviderReport};
use crate::{Budget, Mechanism};

pub const DEFAULT_SAMPLES: usize = 2000;

fn invariant(e: Error) -> CliError {
    CliError::from(e)
}

fn check_px(leakage: &ChannelMatrix, py: &ProbVector, px: &ProbVector) -> Result<(), Error> {
    let derived = leakage.apply(py)?;
    for (i, (a, b)) in derived.as_slice().iter().zip(px.as_slice()).enumerate() {
        if (a - b).abs() > 1e-12 {
            return Err(Error::InvariantViolation(format!(
                "px[{i}] = {b} but P_{{X|Y}} P_Y gives {a}"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignOutput {
    pub name: String,
    pub leakage: ChannelMatrix,
    pub p_y: ProbVector,
    pub report: DesignReport,
    pub mechanism: Mechanism,
}

impl DesignOutput {
    pub fn validate(&self) -> Result<(), Error> {
        self.report.validate()?;
        check_px(&self.leakage, &self.p_y, &self.report.px)?;
        self.mechanism
            .audit(&self.p_y, &self.report.px, self.report.budget.bound(self.report.epsilon))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryOutput {
    pub name: String,
    pub leakage: ChannelMatrix,
    pub p_y: ProbVector,
    pub report: AdversaryDesignReport,
    pub mechanism: Mechanism,
}

impl AdversaryOutput {
    pub fn validate(&self) -> Result<(), Error> {
        self.report.validate()?;
        check_px(&self.leakage, &self.p_y, &self.report.px)?;
        let (b0, b1) = self.report.induced_bounds;
        self.mechanism.audit(&self.p_y, &self.report.px, b0.max(b1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderOutput {
    pub name: String,
    pub report: ProviderReport,
    pub mechanism: Mechanism,
}

impl ProviderOutput {
    pub fn validate(&self) -> Result<(), Error> {
        self.report.validate()?;
        self.mechanism.audit(
            &self.report.py,
            &self.report.pz,
            self.report.budget.bound(self.report.epsilon),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub approx_utility_nats: f64,
    pub exact_utility_nats: f64,
    pub oracle_utility_nats: f64,
    pub leakage_mi_nats: f64,
    pub chi2_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub alpha: f64,
    pub eps: f64,
    pub mmse_designed: f64,
    pub mmse_baseline: f64,
    pub perr_designed: f64,
    pub perr_baseline: f64,
}

fn budget(s: &ScenarioFile, o: &Overrides) -> Budget {
    o.budget.or(s.budget).unwrap_or_default()
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::numerical(format!("cannot serialize report: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn design(s: &ScenarioFile, o: &Overrides) -> Result<String, CliError> {
    let (leakage, py) = s.base()?;
    let eps = s.epsilon()?;
    let options = DesignOptions { budget: budget(s, o), ..DesignOptions::default() };
    let (mechanism, mut report) = design_mechanism_with(&leakage, &py, eps, &options)?;
    if let Some(labels) = s.x_labels() {
        report.px = report.px.clone().with_labels(labels.clone()).map_err(|e| CliError::from(e).context("labels.x"))?;
    }
    info!("sigma_max = {}, utility coefficient = {} nats", report.sigma_max, report.utility_nats_coeff);
    let out = DesignOutput { name: s.label_name(), leakage, p_y: py, report, mechanism };
    out.validate().map_err(invariant)?;
    match o.format {
        Format::Json => json(&out),
        Format::Csv => {
            let r = &out.report;
            let mut t = Table::new(&[
                "eps",
                "sigma_max",
                "approx_utility_nats",
                "exact_utility_nats",
                "leakage_mi_nats",
                "chi2_max",
                "eps_bound_posthoc",
            ]);
            t.push_numbers(&[
                r.epsilon,
                r.sigma_max,
                r.approx_utility_nats,
                r.exact_utility_nats,
                r.leakage_mi_nats,
                max(&r.chi2_per_letter),
                r.eps_bound_posthoc,
            ]);
            Ok(t.render())
        }
    }
}

pub fn adversary(s: &ScenarioFile, o: &Overrides) -> Result<String, CliError> {
    let (leakage, py, channel) = s.adversary()?;
    let eps = s.epsilon()?;
    let (mechanism, report) = design_adversarial_mechanism(&leakage, &py, &channel, eps, budget(s, o))?;
    info!("channel class {:?}, gain {}", report.channel.class, report.channel.gain());
    let out = AdversaryOutput { name: s.label_name(), leakage, p_y: py, report, mechanism };
    out.validate().map_err(invariant)?;
    match o.format {
        Format::Json => json(&out),
        Format::Csv => {
            let r = &out.report;
            let inv = r.channel.inverse;
            let mut t = Table::new(&[
                "eps", "class", "a", "b", "c", "d", "pu0", "approx_utility_nats",
                "boundary_utility_nats", "exact_utility_nats", "induced_bound_0", "induced_bound_1",
            ]);
            let mut row = vec![number(r.epsilon), format!("{:?}", r.channel.class)];
            row.extend(
                [
                    inv.a, inv.b, inv.c, inv.d, r.pu[0], r.approx_utility_nats,
                    r.boundary_utility_nats, r.exact_utility_nats, r.induced_bounds.0, r.induced_bounds.1,
                ]
                .iter()
                .map(|&x| number(x)),
            );
            t.push(row);
            Ok(t.render())
        }
    }
}

pub fn provider(s: &ScenarioFile, o: &Overrides) -> Result<String, CliError> {
    let scenario = s.provider()?;
    let eps = s.epsilon()?;
    let (mechanism, report) = design_provider_mechanism(&scenario, eps, budget(s, o))?;
    info!("provider case {:?}, sigma {}", report.case, report.sigma_selected);
    let out = ProviderOutput { name: s.label_name(), report, mechanism };
    out.validate().map_err(invariant)?;
    match o.format {
        Format::Json => json(&out),
        Format::Csv => {
            let r = &out.report;
            let mut t = Table::new(&[
                "eps", "case", "sigma_selected", "approx_utility_nats", "exact_utility_nats",
                "leakage_mi_nats", "eps_bound_posthoc",
            ]);
            let case = serde_json::to_value(r.case)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default();
            let mut row = vec![number(r.epsilon), case];
            row.extend(
                [r.sigma_selected, r.approx_utility_nats, r.exact_utility_nats, r.leakage_mi_nats, r.eps_bound_posthoc]
                    .iter()
                    .map(|&x| number(x)),
            );
            t.push(row);
            Ok(t.render())
        }
    }
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn eps_values(s: &ScenarioFile) -> Result<Vec<f64>, CliError> {
    match (&s.sweep, s.epsilon) {
        (Some(sw), _) => sw.values(),
        (None, Some(_)) => Ok(vec![s.epsilon()?]),
        (None, None) => Err(CliError::validation("sweep: missing required field".into())),
    }
}

/// Runs `f` on every value in parallel; rows come back in input order and the
/// first failing row (in that order) decides the error.
fn par_rows<T: Send, F>(values: &[(f64, f64)], f: F) -> Result<Vec<T>, CliError>
where
    F: Fn(f64, f64) -> Result<T, CliError> + Sync,
{
    let results: Vec<Result<T, CliError>> = values.par_iter().map(|&(a, e)| f(a, e)).collect();
    results.into_iter().collect()
}

pub fn sweep(s: &ScenarioFile, o: &Overrides) -> Result<String, CliError> {
    if s.alpha_sweep.is_some() {
        return tradeoff(s, o);
    }
    let (leakage, py) = s.base()?;
    let eps_list = eps_values(s)?;
    let budget = budget(s, o);
    let options = DesignOptions { budget, ..DesignOptions::default() };
    let oracle = s.oracle();
    let resolution = o.oracle_resolution.or(oracle.resolution).unwrap_or(DEFAULT_RESOLUTION);
    let seed = o.seed.or(oracle.seed).unwrap_or(0);
    let samples = oracle.samples.unwrap_or(DEFAULT_SAMPLES);
    let grid = oracle.grid.unwrap_or_default();
    let binary = leakage.ncols() == 2 && leakage.nrows() == 2;

    let points: Vec<(f64, f64)> = eps_list.iter().map(|&e| (0.0, e)).collect();
    let rows = par_rows(&points, |_, eps| {
        let (mechanism, report) = design_mechanism_with(&leakage, &py, eps, &options)?;
        // The oracles use the plain eps^2 budget, so hand them the radius.
        let r = report.radius;
        let best = if binary {
            match grid {
                OracleGrid::Conditional => exact_conditional_search(&leakage, &py, r, resolution)?,
                OracleGrid::Kernel => exact_binary_search(&leakage, &py, r, resolution)?,
            }
        } else {
            randomized_search(&leakage, &py, r, samples, seed)?
        };
        debug!("eps {eps}: oracle {} vs approx {}", best.best_utility_nats, report.approx_utility_nats);
        Ok(SweepRow {
            eps,
            approx_utility_nats: report.approx_utility_nats,
            exact_utility_nats: mechanism.exact_utility()?,
            oracle_utility_nats: best.best_utility_nats,
            leakage_mi_nats: report.leakage_mi_nats,
            chi2_max: max(&report.chi2_per_letter),
        })
    })?;
    match o.format {
        Format::Json => json(&rows),
        Format::Csv => {
            let mut t = Table::new(&[
                "eps",
                "approx_utility_nats",
                "exact_utility_nats",
                "oracle_utility_nats",
                "leakage_mi_nats",
                "chi2_max",
            ]);
            for r in &rows {
                t.push_numbers(&[
                    r.eps,
                    r.approx_utility_nats,
                    r.exact_utility_nats,
                    r.oracle_utility_nats,
                    r.leakage_mi_nats,
                    r.chi2_max,
                ]);
            }
            Ok(t.render())
        }
    }
}

/// `sum_u P_U(u) mmse(P_{X|U=u})`. Unlike the value at a single `u` this does not
/// depend on the sign of the singular vector.
pub fn expected_mmse(m: &Mechanism) -> Result<f64, Error> {
    m.posteriors()
        .iter()
        .zip(m.pu().as_slice())
        .try_fold(0.0, |acc, (p, &w)| Ok(acc + w * mmse_binary(p)?))
}

/// MMSE and error probability of the designed disclosure over a grid of BSC leakages.
fn tradeoff(s: &ScenarioFile, o: &Overrides) -> Result<String, CliError> {
    if s.leakage.is_some() {
        return Err(CliError::validation(
            "leakage: alpha_sweep builds BSC leakages and cannot be combined with an explicit matrix".into(),
        ));
    }
    if s.kind != super::scenario::ScenarioKind::Base {
        return Err(CliError::validation("kind: sweep needs a base scenario".into()));
    }
    let alphas = &s.alpha_sweep.as_ref().expect("checked by caller").values;
    if alphas.is_empty() {
        return Err(CliError::validation("alpha_sweep.values: empty".into()));
    }
    let py = s.py()?;
    let eps_list = eps_values(s)?;
    let options = DesignOptions { budget: budget(s, o), ..DesignOptions::default() };
    let mut points = Vec::new();
    for (i, &alpha) in alphas.iter().enumerate() {
        bsc_matrix(alpha).map_err(|e| e.context(&format!("alpha_sweep.values[{i}]")))?;
        points.extend(eps_list.iter().map(|&e| (alpha, e)));
    }
    let rows = par_rows(&points, |alpha, eps| {
        let leakage = bsc_matrix(alpha)?;
        let (mechanism, report) = design_mechanism_with(&leakage, &py, eps, &options)?;
        let uniform = ProbVector::uniform(2)?;
        Ok(TradeoffRow {
            alpha,
            eps,
            mmse_designed: expected_mmse(&mechanism)?,
            mmse_baseline: mmse_binary(&report.px)?,
            perr_designed: error_probability(mechanism.pu(), mechanism.output_conditionals())?,
            perr_baseline: error_probability(&uniform, &[py.clone(), py.clone()])?,
        })
    })?;
    match o.format {
        Format::Json => json(&rows),
        Format::Csv => {
            let mut t = Table::new(&[
                "alpha",
                "eps",
                "mmse_designed",
                "mmse_baseline",
                "perr_designed",
                "perr_baseline",
            ]);
            for r in &rows {
                t.push_numbers(&[r.alpha, r.eps, r.mmse_designed, r.mmse_baseline, r.perr_designed, r.perr_baseline]);
            }
            Ok(t.render())
        }
    }
}
