//! Choosing the number of boosting iterations.
//!
//! Two routes are offered: information criteria (corrected AIC, BIC) built on
//! the degrees of freedom of the cumulative boosting smoother, and
//! resampling, which refits on training subsets and scores the held-out rows
//! at every candidate iteration.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaboost;
use crate::baselearners::build_pspline;
use crate::data::{rng_from_seed, resample_indices, Dataset, ResamplingScheme, Response, RNG_ALGORITHM};
use crate::gradboost::{self, BoostModel, ComponentModel, GradientConfig, Scale};
use crate::likboost::{self, partial_loglik, GlmFamily, LikConfig, LikEngine};
use crate::losses::Family;
use crate::{BoostError, Result};

/// Low-rank factors `H = left · right` of a component's hat matrix.
struct HatFactors {
    left: DMatrix<f64>,
    right: DMatrix<f64>,
}

fn hat_factors(model: &BoostModel, x: &DMatrix<f64>, j: usize) -> Result<HatFactors> {
    let n = x.nrows();
    let col: Vec<f64> = x.column(j).iter().copied().collect();
    let w = vec![1.0; n];
    match &model.components[j] {
        ComponentModel::Linear { .. } => {
            let left = DMatrix::from_fn(n, 2, |i, k| if k == 0 { 1.0 } else { col[i] });
            let gram = left.transpose() * &left;
            let (right, _) = crate::linalg::spd_solve(&gram, &left.transpose())?;
            Ok(HatFactors { left, right })
        }
        ComponentModel::PSpline { spec, lambda, .. } => {
            let mut learner = build_pspline(&col, *spec)?;
            learner.lambda = Some(*lambda);
            let (right, _) = learner.smoother(&w)?;
            Ok(HatFactors { left: learner.design, right })
        }
        ComponentModel::Excluded => Err(BoostError::InvalidArgument(format!("component {j} was never fittable"))),
    }
}

/// Trace of the cumulative smoother `B_m` for m = 0..=up_to, using the
/// recursion `B_m = B_{m−1} + sl·H_{j*_m}(I − B_{m−1})` with `B_0 = (1/n)·11ᵀ`.
pub fn df_path(model: &BoostModel, d: &Dataset, up_to: Option<usize>) -> Result<Vec<f64>> {
    if model.family != Family::L2 {
        return Err(BoostError::Unsupported(
            "degrees of freedom are only defined for the L2 family; use resampling instead".into(),
        ));
    }
    let m = up_to.unwrap_or(model.m_stop());
    if m > model.m_stop() {
        return Err(BoostError::IterationOutOfRange { requested: m, max: model.m_stop() });
    }
    if d.p() != model.p() {
        return Err(BoostError::Dimension("dataset does not match the model".into()));
    }
    let x = match &model.scaling {
        Some(s) => s.apply(d.predictors())?,
        None => d.predictors().clone(),
    };
    let n = d.n();
    let mut factors: Vec<Option<HatFactors>> = (0..model.p()).map(|_| None).collect();
    let mut b = DMatrix::from_element(n, n, 1.0 / n as f64);
    let mut df = Vec::with_capacity(m + 1);
    df.push(b.trace());
    for step in &model.path[..m] {
        let j = step.component;
        if factors[j].is_none() {
            factors[j] = Some(hat_factors(model, &x, j)?);
        }
        let h = factors[j].as_ref().expect("built above");
        // right·(I − B) = right − right·B
        let rb = &h.right - &h.right * &b;
        b += (&h.left * rb) * model.step;
        df.push(b.trace());
    }
    Ok(df)
}

/// Corrected AIC; `None` when `df + 2 ≥ n`.
pub fn aicc(sigma2: f64, df: f64, n: usize) -> Option<f64> {
    let n = n as f64;
    if df + 2.0 >= n {
        return None;
    }
    Some(sigma2.ln() + (1.0 + df / n) / (1.0 - (df + 2.0) / n))
}

pub fn bic(sigma2: f64, df: f64, n: usize) -> f64 {
    let n = n as f64;
    n * sigma2.ln() + df * n.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aicc,
    Bic,
}

/// Information-criterion values along a grid of iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionPath {
    pub criterion: Criterion,
    pub grid: Vec<usize>,
    pub df: Vec<f64>,
    /// `None` where the criterion is undefined (AICc with df + 2 ≥ n).
    pub values: Vec<Option<f64>>,
    pub selected: usize,
}

impl CriterionPath {
    pub fn value_at_selected(&self) -> f64 {
        let k = self.grid.iter().position(|&m| m == self.selected).expect("selected lies in grid");
        self.values[k].expect("selected value is defined")
    }
}

/// Index of the smallest value; ties keep the earliest.
fn argmin(values: impl IntoIterator<Item = Option<f64>>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in values.into_iter().enumerate() {
        if let Some(v) = v {
            if v.is_finite() && best.is_none_or(|(_, b)| v < b) {
                best = Some((k, v));
            }
        }
    }
    best.map(|(k, _)| k)
}

fn check_grid(grid: &[usize], max: usize) -> Result<()> {
    if grid.is_empty() {
        return Err(BoostError::InvalidArgument("empty iteration grid".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BoostError::InvalidArgument("iteration grid must be strictly increasing".into()));
    }
    let last = *grid.last().expect("nonempty");
    if last > max {
        return Err(BoostError::IterationOutOfRange { requested: last, max });
    }
    Ok(())
}

fn information_criterion(model: &BoostModel, d: &Dataset, grid: &[usize], criterion: Criterion) -> Result<CriterionPath> {
    check_grid(grid, model.m_stop())?;
    let all_df = df_path(model, d, grid.last().copied())?;
    let y = d.response().values().ok_or(BoostError::ContinuousRequired)?;
    let n = d.n();
    let mut sigma2 = Vec::with_capacity(grid.len());
    model.visit_path(d.predictors(), grid, |_, f| {
        sigma2.push(y.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64);
    })?;
    let df: Vec<f64> = grid.iter().map(|&m| all_df[m]).collect();
    let values: Vec<Option<f64>> = sigma2
        .iter()
        .zip(&df)
        .zip(grid)
        .map(|((s, df), m)| match criterion {
            Criterion::Aicc => {
                let v = aicc(*s, *df, n);
                if v.is_none() {
                    log::warn!("AICc undefined at m = {m} (df + 2 ≥ n); skipped");
                }
                v
            }
            Criterion::Bic => Some(bic(*s, *df, n)),
        })
        .collect();
    let k = argmin(values.iter().copied())
        .ok_or_else(|| BoostError::Numeric("criterion undefined on the whole grid".into()))?;
    Ok(CriterionPath { criterion, grid: grid.to_vec(), df, values, selected: grid[k] })
}

pub fn aic_corrected(model: &BoostModel, d: &Dataset, grid: &[usize]) -> Result<CriterionPath> {
    information_criterion(model, d, grid, Criterion::Aicc)
}

pub fn bic_path(model: &BoostModel, d: &Dataset, grid: &[usize]) -> Result<CriterionPath> {
    information_criterion(model, d, grid, Criterion::Bic)
}

/// Which engine to refit inside each resample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "lowercase")]
pub enum FitConfig {
    Gradient(GradientConfig),
    Likelihood(LikConfig),
    AdaBoost,
}

impl FitConfig {
    /// Name of the out-of-sample loss.
    pub fn loss_name(&self) -> String {
        match self {
            FitConfig::Gradient(c) => format!("{} risk", c.family.id()),
            FitConfig::Likelihood(c) => match c.engine {
                LikEngine::Glm(f) => format!("{f} negative log-likelihood"),
                LikEngine::Cox => "negative partial log-likelihood".into(),
            },
            FitConfig::AdaBoost => "exponential risk".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingReport {
    pub grid: Vec<usize>,
    /// Held-out risk, one row per evaluated resample, one column per grid point.
    pub risk: Vec<Vec<f64>>,
    /// Indices of the resamples behind the rows of `risk`.
    pub resamples: Vec<usize>,
    /// Resamples that could not be evaluated, with the reason.
    pub skipped: Vec<(usize, String)>,
    pub mean: Vec<f64>,
    pub selected: usize,
    pub criterion: String,
    pub scheme: String,
    pub seed: u64,
    pub rng: String,
}

/// Strata implied by the response: class labels or event status.
pub fn response_strata(d: &Dataset) -> Option<Vec<i64>> {
    match d.response() {
        Response::Binary(y) => Some(y.iter().map(|v| if *v > 0.0 { 1 } else { 0 }).collect()),
        Response::Survival { status, .. } => Some(status.iter().map(|s| i64::from(*s)).collect()),
        Response::Continuous(_) => None,
    }
}

/// Held-out risk of one resample at every grid point.
fn resample_risk(d: &Dataset, train: &[usize], test: &[usize], config: &FitConfig, grid: &[usize]) -> Result<Vec<f64>> {
    let max = *grid.last().expect("grid checked");
    let train_d = d.subset(train);
    let test_d = d.subset(test);
    match config {
        FitConfig::Gradient(c) => {
            let model = gradboost::fit(&train_d, &c.clone().with_mstop(max))?;
            let y = model.family.response_values(test_d.response())?;
            let mut out = Vec::with_capacity(grid.len());
            let mut err = None;
            model.visit_path(test_d.predictors(), grid, |_, f| match model.family.empirical_risk(y, f, None) {
                Ok(r) => out.push(r),
                Err(e) => err = Some(e),
            })?;
            err.map_or(Ok(out), Err)
        }
        FitConfig::Likelihood(c) => {
            let model = likboost::fit(&train_d, &LikConfig { m_stop: max, ..c.clone() })?;
            grid.iter()
                .map(|&m| {
                    let eta = model.predict(test_d.predictors(), Some(m), Scale::Link)?;
                    likelihood_loss(&model.engine, &test_d, &eta)
                })
                .collect()
        }
        FitConfig::AdaBoost => {
            let model = adaboost::fit_adaboost(&train_d, max)?;
            let path = model.exponential_risk_path(&test_d)?;
            // rounds may stop early; later iterations keep the final vote
            Ok(grid.iter().map(|&m| path[m.min(path.len() - 1)]).collect())
        }
    }
}

/// Mean negative log-likelihood (GLM, up to constants) or negative partial
/// log-likelihood per held-out row (Cox).
fn likelihood_loss(engine: &LikEngine, test: &Dataset, eta: &[f64]) -> Result<f64> {
    let n = test.n() as f64;
    match engine {
        LikEngine::Glm(family) => {
            let y: Vec<f64> = match (family, test.response()) {
                (GlmFamily::Logistic, Response::Binary(y)) => y.iter().map(|v| if *v > 0.0 { 1.0 } else { 0.0 }).collect(),
                (_, Response::Continuous(y)) => y.clone(),
                _ => return Err(BoostError::IncompatibleResponse { family: family.to_string(), reason: "held-out response".into() }),
            };
            Ok(family.deviance(&y, eta) / (2.0 * n))
        }
        LikEngine::Cox => {
            let Response::Survival { time, status } = test.response() else {
                return Err(BoostError::SurvivalRequired);
            };
            if !status.iter().any(|s| *s) {
                return Err(BoostError::Resampling("held-out set has no events".into()));
            }
            Ok(-partial_loglik(time, status, eta) / n)
        }
    }
}

/// Resampling estimate of the out-of-sample risk along `grid`, and the
/// iteration minimizing its mean.
pub fn cv_risk(d: &Dataset, config: &FitConfig, scheme: &ResamplingScheme, grid: &[usize]) -> Result<StoppingReport> {
    check_grid(grid, usize::MAX)?;
    if *grid.last().expect("nonempty") < 1 {
        return Err(BoostError::InvalidArgument("iteration grid must reach at least 1".into()));
    }
    let strata = if scheme.stratified { response_strata(d) } else { None };
    let splits = resample_indices(scheme, d.n(), strata.as_deref())?;
    let results: Vec<Result<Vec<f64>>> =
        splits.par_iter().map(|s| resample_risk(d, &s.train, &s.test, config, grid)).collect();
    let mut risk = Vec::new();
    let mut resamples = Vec::new();
    let mut skipped = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(row) => {
                risk.push(row);
                resamples.push(k);
            }
            Err(e) if e.kind() == crate::ErrorKind::Data => {
                log::warn!("resample {} skipped: {e}", k + 1);
                skipped.push((k, e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    if risk.is_empty() {
        return Err(BoostError::Resampling("no resample could be evaluated".into()));
    }
    let rows = risk.len() as f64;
    let mean: Vec<f64> = (0..grid.len()).map(|g| risk.iter().map(|r| r[g]).sum::<f64>() / rows).collect();
    let k = argmin(mean.iter().map(|v| Some(*v))).ok_or_else(|| BoostError::Numeric("non-finite mean risk".into()))?;
    Ok(StoppingReport {
        grid: grid.to_vec(),
        risk,
        resamples,
        skipped,
        mean,
        selected: grid[k],
        criterion: config.loss_name(),
        scheme: scheme.kind.to_string(),
        seed: scheme.seed,
        rng: RNG_ALGORITHM.to_string(),
    })
}

/// Grid point with the smallest mean risk; ties keep the smallest m.
pub fn select_from_risk(grid: &[usize], mean: &[f64]) -> Option<usize> {
    argmin(mean.iter().map(|v| Some(*v))).map(|k| grid[k])
}

/// The nonlinear test function of the simulation study.
pub fn nonlinear_truth(x: f64) -> f64 {
    (0.5 - 0.9 * (-50.0 * x * x).exp()) * x
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    /// One predictor `x`, rows sorted by x.
    pub data: Dataset,
    /// Noise-free function values, aligned with the rows.
    pub truth: Vec<f64>,
}

/// `x ~ U(−0.2, 0.2)`, `y = (0.5 − 0.9·exp(−50x²))·x + 0.02·ε`.
pub fn simulate_nonlinear(n: usize, seed: u64) -> Result<Simulated> {
    if n == 0 {
        return Err(BoostError::InvalidArgument("n must be positive".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let x: f64 = rng.random_range(-0.2..0.2);
            let e: f64 = StandardNormal.sample(&mut rng);
            (x, nonlinear_truth(x) + 0.02 * e)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let truth = x.iter().map(|&v| nonlinear_truth(v)).collect();
    let data = Dataset::from_columns(&[x], Response::Continuous(y))?.with_names(vec!["x".into()])?;
    Ok(Simulated { data, truth })
}
