//! Component-wise likelihood-based boosting.
//!
//! Each iteration treats the current linear predictor as a fixed offset and
//! computes, for every penalized component, a single penalized Newton
//! (Fisher scoring) step on its own coefficient. The best candidate — lowest
//! deviance for GLMs, largest penalized score statistic for the Cox model —
//! is added to the predictor, after which the unpenalized block (GLM
//! intercept plus any mandatory covariates) takes one unpenalized Newton step.
//!
//! Candidate covariates are centered internally; coefficients are reported
//! on the original scale.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{standardize, Dataset, Response, Scaling};
use crate::gradboost::Scale;
use crate::linalg::spd_solve;
use crate::{BoostError, Result};

/// Candidates at or above this count are scored in parallel.
const PARALLEL_MIN_CANDIDATES: usize = 32;
const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 100;
/// Two-sided normal quantile for approximate 95% bands.
pub const Z_95: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlmFamily {
    Gaussian,
    Logistic,
    Poisson,
}

impl std::str::FromStr for GlmFamily {
    type Err = BoostError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "l2" => Ok(GlmFamily::Gaussian),
            "logistic" | "binomial" => Ok(GlmFamily::Logistic),
            "poisson" => Ok(GlmFamily::Poisson),
            other => Err(BoostError::InvalidArgument(format!("unknown likelihood family '{other}'"))),
        }
    }
}

impl std::fmt::Display for GlmFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GlmFamily::Gaussian => "gaussian",
            GlmFamily::Logistic => "logistic",
            GlmFamily::Poisson => "poisson",
        })
    }
}

impl GlmFamily {
    fn mean(&self, eta: f64) -> f64 {
        match self {
            GlmFamily::Gaussian => eta,
            GlmFamily::Logistic => 1.0 / (1.0 + (-eta).exp()),
            GlmFamily::Poisson => eta.exp(),
        }
    }

    /// Fisher working weight at the given mean.
    fn weight(&self, mu: f64) -> f64 {
        match self {
            GlmFamily::Gaussian => 1.0,
            GlmFamily::Logistic => mu * (1.0 - mu),
            GlmFamily::Poisson => mu,
        }
    }

    /// Unit deviance contribution.
    fn unit_deviance(&self, y: f64, eta: f64) -> f64 {
        match self {
            GlmFamily::Gaussian => (y - eta).powi(2),
            // 2·(log(1 + e^η) − yη), computed without overflow
            GlmFamily::Logistic => 2.0 * (eta.max(0.0) + (-eta.abs()).exp().ln_1p() - y * eta),
            GlmFamily::Poisson => {
                let mu = eta.exp();
                let ylogy = if y > 0.0 { y * (y / mu).ln() } else { 0.0 };
                2.0 * (ylogy - (y - mu))
            }
        }
    }

    pub fn deviance(&self, y: &[f64], eta: &[f64]) -> f64 {
        y.iter().zip(eta).map(|(a, b)| self.unit_deviance(*a, *b)).sum()
    }

    /// Response on the family's natural scale (0/1 for logistic).
    fn response(&self, r: &Response) -> Result<Vec<f64>> {
        match (self, r) {
            (GlmFamily::Logistic, Response::Binary(y)) => Ok(y.iter().map(|v| if *v > 0.0 { 1.0 } else { 0.0 }).collect()),
            (GlmFamily::Logistic, _) => Err(BoostError::BinaryRequired),
            (GlmFamily::Gaussian, Response::Continuous(y)) => Ok(y.clone()),
            (GlmFamily::Poisson, Response::Continuous(y)) => {
                if let Some(v) = y.iter().find(|v| **v < 0.0) {
                    return Err(BoostError::IncompatibleResponse {
                        family: "poisson".into(),
                        reason: format!("negative count {v}"),
                    });
                }
                if y.iter().all(|v| *v == 0.0) {
                    return Err(BoostError::Numeric("all-zero counts: intercept diverges".into()));
                }
                Ok(y.clone())
            }
            (_, _) => Err(BoostError::ContinuousRequired),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "engine", content = "family", rename_all = "lowercase")]
pub enum LikEngine {
    Glm(GlmFamily),
    Cox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    Lambda(f64),
    StepSize(f64),
}

/// Penalty giving roughly the step size `nu`: event count × (1/ν − 1) for
/// the Cox model, n × (1/ν − 1) for GLMs.
pub fn penalty_from_stepsize(nu: f64, d: &Dataset, engine: LikEngine) -> Result<f64> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(BoostError::InvalidArgument(format!("step size must lie in (0, 1], got {nu}")));
    }
    let scale = match engine {
        LikEngine::Cox => {
            let Response::Survival { status, .. } = d.response() else {
                return Err(BoostError::SurvivalRequired);
            };
            let events = status.iter().filter(|s| **s).count();
            if events == 0 {
                return Err(BoostError::NoEvents);
            }
            events as f64
        }
        LikEngine::Glm(_) => d.n() as f64,
    };
    Ok(scale * (1.0 / nu - 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikConfig {
    pub engine: LikEngine,
    pub penalty: Penalty,
    pub m_stop: usize,
    pub standardize: bool,
}

impl LikConfig {
    pub fn new(engine: LikEngine, penalty: Penalty, m_stop: usize) -> Self {
        LikConfig { engine, penalty, m_stop, standardize: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikStep {
    pub component: usize,
    pub gamma: f64,
    /// Unpenalized block after this step (intercept first for GLMs).
    pub unpenalized: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikBoostModel {
    pub engine: LikEngine,
    pub lambda: f64,
    pub names: Vec<String>,
    /// Internal centering of each (possibly standardized) column.
    pub centers: Vec<f64>,
    pub scaling: Option<Scaling>,
    /// Mandatory, unpenalized components.
    pub unpenalized: Vec<usize>,
    /// Components that could never be selected (zero variance).
    pub excluded: Vec<usize>,
    /// Unpenalized block before the first boosting step.
    pub initial: Vec<f64>,
    pub path: Vec<LikStep>,
    /// Deviance (GLM) or partial log-likelihood (Cox) at m = 0..=m_stop.
    pub criterion: Vec<f64>,
    /// Trace of the cumulative hat matrix at m = 0..=m_stop (GLM only).
    pub df: Vec<f64>,
    #[serde(skip)]
    training_eta: Option<Vec<f64>>,
}

/// Working columns: optionally standardized, then centered.
struct Design {
    cols: Vec<Vec<f64>>,
    centers: Vec<f64>,
    scaling: Option<Scaling>,
}

fn design(d: &Dataset, standardize_first: bool) -> Result<Design> {
    let (data, scaling) = if standardize_first {
        let (s, sc) = standardize(d)?;
        (s, Some(sc))
    } else {
        (d.clone(), None)
    };
    let n = data.n() as f64;
    let mut cols = Vec::with_capacity(data.p());
    let mut centers = Vec::with_capacity(data.p());
    for j in 0..data.p() {
        let col = data.column(j);
        let c = col.iter().sum::<f64>() / n;
        cols.push(col.iter().map(|v| v - c).collect());
        centers.push(c);
    }
    Ok(Design { cols, centers, scaling })
}

/// Risk-set bookkeeping for the Breslow partial likelihood.
struct RiskSets {
    /// Row indices by decreasing time.
    order: Vec<usize>,
    /// Ranges of `order` sharing one time value.
    groups: Vec<(usize, usize)>,
    status: Vec<bool>,
}

impl RiskSets {
    fn new(time: &[f64], status: &[bool]) -> Self {
        let mut order: Vec<usize> = (0..time.len()).collect();
        order.sort_by(|&a, &b| time[b].total_cmp(&time[a]).then(a.cmp(&b)));
        let mut groups = Vec::new();
        let mut start = 0;
        for k in 1..=order.len() {
            if k == order.len() || time[order[k]] != time[order[start]] {
                groups.push((start, k));
                start = k;
            }
        }
        RiskSets { order, groups, status: status.to_vec() }
    }

    /// `exp(η − max η)`; the shift cancels in every risk-set ratio.
    fn relative_risk(eta: &[f64]) -> Vec<f64> {
        let mx = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        eta.iter().map(|e| (e - mx).exp()).collect()
    }

    fn loglik(&self, eta: &[f64]) -> f64 {
        let mx = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s0 = 0.0;
        let mut ll = 0.0;
        for &(a, b) in &self.groups {
            for &i in &self.order[a..b] {
                s0 += (eta[i] - mx).exp();
            }
            for &i in &self.order[a..b] {
                if self.status[i] {
                    ll += eta[i] - mx - s0.ln();
                }
            }
        }
        ll
    }

    /// Score and observed information of a single covariate.
    fn score_info(&self, r: &[f64], x: &[f64]) -> (f64, f64) {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        let (mut u, mut info) = (0.0, 0.0);
        for &(a, b) in &self.groups {
            for &i in &self.order[a..b] {
                s0 += r[i];
                s1 += r[i] * x[i];
                s2 += r[i] * x[i] * x[i];
            }
            let mean = s1 / s0;
            for &i in &self.order[a..b] {
                if self.status[i] {
                    u += x[i] - mean;
                    info += s2 / s0 - mean * mean;
                }
            }
        }
        (u, info)
    }

    /// Score vector and information matrix of a block of covariates.
    fn score_info_block(&self, r: &[f64], cols: &[&[f64]]) -> (DVector<f64>, DMatrix<f64>) {
        let k = cols.len();
        let mut s0 = 0.0;
        let mut s1 = DVector::zeros(k);
        let mut s2 = DMatrix::zeros(k, k);
        let mut u = DVector::zeros(k);
        let mut info = DMatrix::zeros(k, k);
        for &(a, b) in &self.groups {
            for &i in &self.order[a..b] {
                s0 += r[i];
                for p in 0..k {
                    s1[p] += r[i] * cols[p][i];
                    for q in 0..k {
                        s2[(p, q)] += r[i] * cols[p][i] * cols[q][i];
                    }
                }
            }
            let mean = &s1 / s0;
            for &i in &self.order[a..b] {
                if self.status[i] {
                    for p in 0..k {
                        u[p] += cols[p][i] - mean[p];
                    }
                    info += &s2 / s0 - &mean * mean.transpose();
                }
            }
        }
        (u, info)
    }
}

/// Breslow partial log-likelihood of a linear predictor.
pub fn partial_loglik(time: &[f64], status: &[bool], eta: &[f64]) -> f64 {
    RiskSets::new(time, status).loglik(eta)
}

/// Engine-specific likelihood state.
enum Lik {
    Glm { family: GlmFamily, y: Vec<f64> },
    Cox { sets: RiskSets },
}

impl Lik {
    fn criterion(&self, eta: &[f64]) -> f64 {
        match self {
            Lik::Glm { family, y } => family.deviance(y, eta),
            Lik::Cox { sets } => sets.loglik(eta),
        }
    }

    /// Score and information of the unpenalized block at `eta`.
    fn block_score_info(&self, eta: &[f64], cols: &[&[f64]]) -> (DVector<f64>, DMatrix<f64>) {
        match self {
            Lik::Glm { family, y } => {
                let k = cols.len();
                let mut u = DVector::zeros(k);
                let mut info = DMatrix::zeros(k, k);
                for i in 0..y.len() {
                    let mu = family.mean(eta[i]);
                    let w = family.weight(mu);
                    for p in 0..k {
                        u[p] += cols[p][i] * (y[i] - mu);
                        for q in 0..k {
                            info[(p, q)] += w * cols[p][i] * cols[q][i];
                        }
                    }
                }
                (u, info)
            }
            Lik::Cox { sets } => sets.score_info_block(&RiskSets::relative_risk(eta), cols),
        }
    }

    /// Whether `new` is no worse than `old`, up to rounding in the criterion.
    fn improves(&self, new: f64, old: f64) -> bool {
        let slack = 1e-12 * (1.0 + old.abs());
        match self {
            Lik::Glm { .. } => new <= old + slack,
            Lik::Cox { .. } => new >= old - slack,
        }
    }
}

/// `eta_i = boost_i + Σ_k block_k[i] · beta_k`, in a fixed summation order.
fn block_eta(boost: &[f64], block: &[&[f64]], beta: &[f64]) -> Vec<f64> {
    boost
        .iter()
        .enumerate()
        .map(|(i, b)| block.iter().zip(beta).fold(*b, |acc, (col, be)| acc + col[i] * be))
        .collect()
}

fn newton_step(lik: &Lik, boost: &[f64], block: &[&[f64]], beta: &[f64]) -> Result<Vec<f64>> {
    let eta = block_eta(boost, block, beta);
    let (u, info) = lik.block_score_info(&eta, block);
    let (step, _) = spd_solve(&info, &DMatrix::from_column_slice(u.len(), 1, u.as_slice()))?;
    Ok(beta.iter().zip(step.iter()).map(|(b, s)| b + s).collect())
}

/// Maximum-likelihood fit of the unpenalized block with `boost` as offset.
fn fit_block(lik: &Lik, boost: &[f64], block: &[&[f64]], start: Vec<f64>) -> Result<Vec<f64>> {
    if block.is_empty() {
        return Ok(start);
    }
    let mut beta = start;
    let mut crit = lik.criterion(&block_eta(boost, block, &beta));
    for _ in 0..NEWTON_MAX_ITER {
        let full = newton_step(lik, boost, block, &beta)?;
        // step halving keeps the iteration monotone
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let cand: Vec<f64> = beta.iter().zip(&full).map(|(b, f)| b + t * (f - b)).collect();
            let c = lik.criterion(&block_eta(boost, block, &cand));
            if c.is_finite() && lik.improves(c, crit) {
                accepted = Some((cand, c));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, c)) = accepted else { break };
        let change = beta.iter().zip(&cand).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        beta = cand;
        crit = c;
        if change < NEWTON_TOL {
            break;
        }
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(BoostError::Numeric("unpenalized fit diverged".into()));
    }
    Ok(beta)
}

pub fn fit(d: &Dataset, config: &LikConfig) -> Result<LikBoostModel> {
    let lambda = match config.penalty {
        Penalty::Lambda(l) if l >= 0.0 && l.is_finite() => l,
        Penalty::Lambda(l) => return Err(BoostError::InvalidArgument(format!("penalty must be ≥ 0, got {l}"))),
        Penalty::StepSize(nu) => penalty_from_stepsize(nu, d, config.engine)?,
    };
    let unpenalized: Vec<usize> = d.unpenalized().iter().copied().collect();
    let penalized_count = d.p() - unpenalized.len();
    if lambda == 0.0 && penalized_count > d.n() {
        return Err(BoostError::InvalidArgument("a positive penalty is required when p > n".into()));
    }
    let lik = match config.engine {
        LikEngine::Glm(family) => {
            let y = family.response(d.response())?;
            if family == GlmFamily::Logistic && (y.iter().all(|v| *v == 1.0) || y.iter().all(|v| *v == 0.0)) {
                return Err(BoostError::SingleClass);
            }
            Lik::Glm { family, y }
        }
        LikEngine::Cox => {
            let Response::Survival { time, status } = d.response() else {
                return Err(BoostError::SurvivalRequired);
            };
            if !status.iter().any(|s| *s) {
                return Err(BoostError::NoEvents);
            }
            Lik::Cox { sets: RiskSets::new(time, status) }
        }
    };
    let des = design(d, config.standardize)?;
    let n = d.n();
    let ones = vec![1.0; n];
    let mut block: Vec<&[f64]> = Vec::new();
    if matches!(lik, Lik::Glm { .. }) {
        block.push(&ones);
    }
    block.extend(unpenalized.iter().map(|&j| des.cols[j].as_slice()));

    let candidates: BTreeSet<usize> = (0..d.p()).filter(|j| !d.unpenalized().contains(j)).collect();
    let excluded: Vec<usize> =
        candidates.iter().copied().filter(|&j| des.cols[j].iter().all(|v| v.abs() <= 1e-12 * (1.0 + des.centers[j].abs()))).collect();
    let active: Vec<usize> = candidates.iter().copied().filter(|j| !excluded.contains(j)).collect();
    if !excluded.is_empty() {
        let names: Vec<&str> = excluded.iter().map(|&j| d.names()[j].as_str()).collect();
        log::warn!("excluded constant components: {}", names.join(", "));
    }

    let mut boost = vec![0.0; n];
    let initial = fit_block(&lik, &boost, &block, vec![0.0; block.len()])?;
    let mut beta = initial.clone();
    let mut eta = block_eta(&boost, &block, &beta);
    let mut criterion = vec![lik.criterion(&eta)];
    let mut path = Vec::with_capacity(config.m_stop);

    for m in 0..config.m_stop {
        if active.is_empty() {
            return Err(BoostError::NoFittableLearner);
        }
        let (j, gamma) = select_candidate(&lik, &eta, &des.cols, &active, lambda)?;
        for (b, x) in boost.iter_mut().zip(&des.cols[j]) {
            *b += gamma * x;
        }
        if !block.is_empty() {
            beta = newton_step(&lik, &boost, &block, &beta)?;
        }
        eta = block_eta(&boost, &block, &beta);
        let c = lik.criterion(&eta);
        if matches!(lik, Lik::Cox { .. }) && c < criterion[m] {
            log::info!("partial log-likelihood decreased at step {}", m + 1);
        }
        criterion.push(c);
        path.push(LikStep { component: j, gamma, unpenalized: beta.clone() });
    }

    let mut model = LikBoostModel {
        engine: config.engine,
        lambda,
        names: d.names().to_vec(),
        centers: des.centers,
        scaling: des.scaling,
        unpenalized,
        excluded,
        initial,
        path,
        criterion,
        df: Vec::new(),
        training_eta: Some(eta),
    };
    if let LikEngine::Glm(_) = config.engine {
        model.df = hat_path(&model, d, model.m_stop())?.df;
    }
    Ok(model)
}

/// Picks the best candidate at the current predictor and returns it with
/// its penalized one-step update.
fn select_candidate(lik: &Lik, eta: &[f64], cols: &[Vec<f64>], active: &[usize], lambda: f64) -> Result<(usize, f64)> {
    // (component, gamma, value) where larger value is better
    let scored: Vec<Option<(usize, f64, f64)>> = match lik {
        Lik::Glm { family, y } => {
            let mu: Vec<f64> = eta.iter().map(|e| family.mean(*e)).collect();
            let w: Vec<f64> = mu.iter().map(|m| family.weight(*m)).collect();
            let score_one = |j: usize| {
                let x = &cols[j];
                let (mut u, mut info) = (0.0, 0.0);
                for i in 0..y.len() {
                    u += x[i] * (y[i] - mu[i]);
                    info += w[i] * x[i] * x[i];
                }
                let denom = info + lambda;
                if !(denom > 0.0) {
                    return None;
                }
                let gamma = u / denom;
                let dev: f64 = (0..y.len()).map(|i| family.unit_deviance(y[i], eta[i] + gamma * x[i])).sum();
                dev.is_finite().then_some((j, gamma, -dev))
            };
            if active.len() >= PARALLEL_MIN_CANDIDATES {
                active.par_iter().map(|&j| score_one(j)).collect()
            } else {
                active.iter().map(|&j| score_one(j)).collect()
            }
        }
        Lik::Cox { sets } => {
            let r = RiskSets::relative_risk(eta);
            let score_one = |j: usize| {
                let (u, info) = sets.score_info(&r, &cols[j]);
                let denom = info + lambda;
                if !(denom > 0.0) {
                    return None;
                }
                Some((j, u / denom, u * u / denom))
            };
            if active.len() >= PARALLEL_MIN_CANDIDATES {
                active.par_iter().map(|&j| score_one(j)).collect()
            } else {
                active.iter().map(|&j| score_one(j)).collect()
            }
        }
    };
    let mut best: Option<(usize, f64, f64)> = None;
    for cand in scored.into_iter().flatten() {
        if best.is_none_or(|b| cand.2 > b.2) {
            best = Some(cand);
        }
    }
    best.map(|(j, g, _)| (j, g))
        .ok_or_else(|| BoostError::Numeric("no candidate has positive information plus penalty".into()))
}

/// Intercept and slopes on the original predictor scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LikCoefficients {
    /// Always zero for the Cox model.
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandTarget {
    Intercept,
    Component(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandRow {
    pub value: f64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bands {
    pub rows: Vec<BandRow>,
    /// False when the component never entered the model by `at_m`.
    pub selected: bool,
}

/// Cumulative hat matrix and coefficient maps along the GLM path.
struct HatPath {
    df: Vec<f64>,
    /// Final cumulative hat matrix.
    b: DMatrix<f64>,
    /// Row maps from the working response to each component coefficient.
    comp_maps: Vec<Option<DVector<f64>>>,
    /// Maps to the unpenalized block (rows).
    block_map: DMatrix<f64>,
    /// Working weights at the final predictor.
    weights: Vec<f64>,
}

/// Replays the path on the training data and accumulates the linearized
/// hat matrices `B_m = B_{m−1} + H_m (I − B_{m−1})`.
fn hat_path(model: &LikBoostModel, d: &Dataset, at_m: usize) -> Result<HatPath> {
    let LikEngine::Glm(family) = model.engine else {
        return Err(BoostError::Unsupported("hat matrices are available for GLM models only".into()));
    };
    let des = design(d, model.scaling.is_some())?;
    if des.centers.len() != model.p() {
        return Err(BoostError::Dimension("dataset does not match the model".into()));
    }
    // use the model's centering so the replay matches training exactly
    let cols: Vec<Vec<f64>> = (0..model.p())
        .map(|j| {
            let raw: Vec<f64> = des.cols[j].iter().map(|v| v + des.centers[j]).collect();
            raw.iter().map(|v| v - model.centers[j]).collect()
        })
        .collect();
    let n = d.n();
    let ones = vec![1.0; n];
    let mut block: Vec<&[f64]> = vec![&ones];
    block.extend(model.unpenalized.iter().map(|&j| cols[j].as_slice()));
    let xu = DMatrix::from_fn(n, block.len(), |i, k| block[k][i]);
    let weights_at = |eta: &[f64]| -> Vec<f64> { eta.iter().map(|e| family.weight(family.mean(*e))).collect() };

    // projection-type map G = (XᵀWX)⁻¹XᵀW of the unpenalized block
    let block_map_at = |w: &[f64]| -> Result<DMatrix<f64>> {
        let xtw = crate::linalg::weighted_transpose(&xu, w);
        let gram = &xtw * &xu;
        Ok(spd_solve(&gram, &xtw)?.0)
    };

    let mut boost = vec![0.0; n];
    let mut beta = model.initial.clone();
    let eta0 = block_eta(&boost, &block, &beta);
    let g0 = block_map_at(&weights_at(&eta0))?;
    let mut b = &xu * &g0;
    let mut block_map = g0;
    let mut comp_maps: Vec<Option<DVector<f64>>> = vec![None; model.p()];
    let mut df = vec![b.trace()];
    let identity = DMatrix::<f64>::identity(n, n);
    let mut eta = eta0;
    for step in &model.path[..at_m] {
        let j = step.component;
        let x = DVector::from_column_slice(&cols[j]);
        let w = weights_at(&eta);
        let info: f64 = (0..n).map(|i| w[i] * x[i] * x[i]).sum();
        let a = DVector::from_fn(n, |i, _| w[i] * x[i] / (info + model.lambda));
        // aᵀ(I − B)
        let resid_map = (&identity - &b).transpose() * &a;
        let map = comp_maps[j].get_or_insert_with(|| DVector::zeros(n));
        *map += &resid_map;
        b += &x * resid_map.transpose();

        for (bo, xi) in boost.iter_mut().zip(&cols[j]) {
            *bo += step.gamma * xi;
        }
        let mid_eta = block_eta(&boost, &block, &beta);
        let g = block_map_at(&weights_at(&mid_eta))?;
        let delta = &g * (&identity - &b);
        block_map += &delta;
        b += &xu * &delta;
        beta = step.unpenalized.clone();
        eta = block_eta(&boost, &block, &beta);
        df.push(b.trace());
    }
    Ok(HatPath { df, b, comp_maps, block_map, weights: weights_at(&eta) })
}

impl LikBoostModel {
    pub fn m_stop(&self) -> usize {
        self.path.len()
    }

    pub fn p(&self) -> usize {
        self.names.len()
    }

    pub fn training_eta(&self) -> Option<&[f64]> {
        self.training_eta.as_deref()
    }

    fn check_m(&self, m: usize) -> Result<()> {
        if m > self.m_stop() {
            Err(BoostError::IterationOutOfRange { requested: m, max: self.m_stop() })
        } else {
            Ok(())
        }
    }

    fn has_intercept(&self) -> bool {
        matches!(self.engine, LikEngine::Glm(_))
    }

    fn block_at(&self, m: usize) -> &[f64] {
        if m == 0 {
            &self.initial
        } else {
            &self.path[m - 1].unpenalized
        }
    }

    /// Names of the components selected at each step.
    pub fn selected_names(&self) -> Vec<&str> {
        self.path.iter().map(|s| self.names[s.component].as_str()).collect()
    }

    pub fn truncate(&self, m: usize) -> Result<LikBoostModel> {
        self.check_m(m)?;
        let mut out = self.clone();
        out.path.truncate(m);
        out.criterion.truncate(m + 1);
        if !out.df.is_empty() {
            out.df.truncate(m + 1);
        }
        if m != self.m_stop() {
            out.training_eta = None;
        }
        Ok(out)
    }

    fn working_columns(&self, x: &DMatrix<f64>) -> Result<Vec<Vec<f64>>> {
        if x.ncols() != self.p() {
            return Err(BoostError::Dimension(format!("expected {} columns, got {}", self.p(), x.ncols())));
        }
        let scaled = match &self.scaling {
            Some(s) => s.apply(x)?,
            None => x.clone(),
        };
        Ok((0..self.p()).map(|j| scaled.column(j).iter().map(|v| v - self.centers[j]).collect()).collect())
    }

    /// Linear predictor after `at_m` steps (default: all); the response scale
    /// gives the mean for GLMs and the relative hazard `exp(η)` for Cox.
    pub fn predict(&self, x: &DMatrix<f64>, at_m: Option<usize>, scale: Scale) -> Result<Vec<f64>> {
        let m = at_m.unwrap_or(self.m_stop());
        self.check_m(m)?;
        let cols = self.working_columns(x)?;
        let n = x.nrows();
        let mut boost = vec![0.0; n];
        for step in &self.path[..m] {
            for (b, xi) in boost.iter_mut().zip(&cols[step.component]) {
                *b += step.gamma * xi;
            }
        }
        let ones = vec![1.0; n];
        let mut block: Vec<&[f64]> = Vec::new();
        if self.has_intercept() {
            block.push(&ones);
        }
        block.extend(self.unpenalized.iter().map(|&j| cols[j].as_slice()));
        let eta = block_eta(&boost, &block, self.block_at(m));
        Ok(match scale {
            Scale::Link => eta,
            Scale::Response => match self.engine {
                LikEngine::Glm(f) => eta.iter().map(|e| f.mean(*e)).collect(),
                LikEngine::Cox => eta.iter().map(|e| e.exp()).collect(),
            },
        })
    }

    pub fn coefficients(&self, at_m: Option<usize>) -> Result<LikCoefficients> {
        let m = at_m.unwrap_or(self.m_stop());
        self.check_m(m)?;
        let mut centered = vec![0.0; self.p()];
        for step in &self.path[..m] {
            centered[step.component] += step.gamma;
        }
        let block = self.block_at(m);
        let offset = usize::from(self.has_intercept());
        for (k, &j) in self.unpenalized.iter().enumerate() {
            centered[j] += block[offset + k];
        }
        let mut intercept = if self.has_intercept() { block[0] } else { 0.0 };
        let mut coefficients = Vec::with_capacity(self.p());
        for (j, c) in centered.iter().enumerate() {
            let (mean, sd) = match &self.scaling {
                Some(s) => (s.means[j], s.sds[j]),
                None => (0.0, 1.0),
            };
            // c·((x − mean)/sd − center) = (c/sd)·x − c·(mean/sd + center)
            coefficients.push(c / sd);
            intercept -= c * (mean / sd + self.centers[j]);
        }
        if !self.has_intercept() {
            intercept = 0.0;
        }
        Ok(LikCoefficients { intercept, coefficients })
    }

    /// Trace of the cumulative hat matrix after `at_m` steps (GLM only).
    pub fn degrees_of_freedom(&self, d: &Dataset, at_m: Option<usize>) -> Result<f64> {
        let m = at_m.unwrap_or(self.m_stop());
        self.check_m(m)?;
        Ok(*hat_path(self, d, m)?.df.last().expect("df has m + 1 entries"))
    }

    /// Approximate pointwise 95% bands for the centered effect of a
    /// component (or the intercept), from the linearized hat matrices.
    pub fn confidence_bands(&self, d: &Dataset, target: BandTarget, grid: &[f64], at_m: Option<usize>) -> Result<Bands> {
        let m = at_m.unwrap_or(self.m_stop());
        self.check_m(m)?;
        let LikEngine::Glm(family) = self.engine else {
            return Err(BoostError::Unsupported("confidence bands are available for GLM models only".into()));
        };
        let hp = hat_path(self, d, m)?;
        let n = d.n();
        let phi = match family {
            GlmFamily::Gaussian => {
                let eta = self.predict(d.predictors(), Some(m), Scale::Link)?;
                let y = d.response().values().ok_or(BoostError::ContinuousRequired)?;
                let rss: f64 = y.iter().zip(&eta).map(|(a, b)| (a - b).powi(2)).sum();
                let df = hp.b.trace();
                if n as f64 - df <= 0.0 {
                    return Err(BoostError::Numeric("no residual degrees of freedom for the dispersion".into()));
                }
                rss / (n as f64 - df)
            }
            _ => 1.0,
        };
        // coefficient variance c Σ cᵀ with Σ = φ W⁻¹
        let variance = |c: &DVector<f64>| -> f64 { phi * (0..n).map(|i| c[i] * c[i] / hp.weights[i]).sum::<f64>() };
        let band = |estimate: f64, se: f64, value: f64| BandRow {
            value,
            estimate,
            lower: estimate - Z_95 * se,
            upper: estimate + Z_95 * se,
        };
        match target {
            BandTarget::Intercept => {
                let c = hp.block_map.row(0).transpose();
                let est = self.block_at(m)[0];
                let se = variance(&c).max(0.0).sqrt();
                Ok(Bands { rows: vec![band(est, se, 0.0)], selected: true })
            }
            BandTarget::Component(j) => {
                if j >= self.p() {
                    return Err(BoostError::InvalidArgument(format!("component {j} out of range")));
                }
                let (mean, sd) = match &self.scaling {
                    Some(s) => (s.means[j], s.sds[j]),
                    None => (0.0, 1.0),
                };
                let map = match self.unpenalized.iter().position(|&u| u == j) {
                    Some(k) => {
                        // unpenalized covariates collect both their block map and any boosting map
                        let mut c = hp.block_map.row(1 + k).transpose();
                        if let Some(extra) = &hp.comp_maps[j] {
                            c += extra;
                        }
                        Some(c)
                    }
                    None => hp.comp_maps[j].clone(),
                };
                let Some(c) = map else {
                    let rows = grid.iter().map(|&g| band(0.0, 0.0, g)).collect();
                    return Ok(Bands { rows, selected: false });
                };
                let mut coef: f64 = self.path[..m].iter().filter(|s| s.component == j).map(|s| s.gamma).sum();
                if let Some(k) = self.unpenalized.iter().position(|&u| u == j) {
                    coef += self.block_at(m)[1 + k];
                }
                let sd_coef = variance(&c).max(0.0).sqrt();
                let rows = grid
                    .iter()
                    .map(|&g| {
                        let xt = (g - mean) / sd - self.centers[j];
                        band(coef * xt, xt.abs() * sd_coef, g)
                    })
                    .collect();
                Ok(Bands { rows, selected: true })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselearners::LearnerSpec;
    use crate::gradboost::{self, GradientConfig};
    use crate::losses::Family;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Exp, StandardNormal};

    fn normal(rng: &mut impl Rng) -> f64 {
        StandardNormal.sample(rng)
    }

    #[test]
    fn penalty_examples() {
        let status: Vec<bool> = (0..200).map(|i| i < 126).collect();
        let d = Dataset::from_columns(&[vec![0.0; 200]], Response::Survival { time: vec![1.0; 200], status }).unwrap();
        assert!((penalty_from_stepsize(0.1, &d, LikEngine::Cox).unwrap() - 1134.0).abs() < 1e-9);
        assert_eq!(penalty_from_stepsize(1.0, &d, LikEngine::Cox).unwrap(), 0.0);
        let g = Dataset::from_columns(&[vec![0.0; 50]], Response::Continuous(vec![0.0; 50])).unwrap();
        assert!((penalty_from_stepsize(0.1, &g, LikEngine::Glm(GlmFamily::Gaussian)).unwrap() - 450.0).abs() < 1e-9);
        assert!(penalty_from_stepsize(0.0, &g, LikEngine::Glm(GlmFamily::Gaussian)).is_err());
        let none = Dataset::from_columns(&[vec![0.0; 3]], Response::Survival { time: vec![1.0; 3], status: vec![false; 3] }).unwrap();
        assert!(matches!(penalty_from_stepsize(0.1, &none, LikEngine::Cox), Err(BoostError::NoEvents)));
    }

    #[test]
    fn two_subject_partial_likelihood() {
        let ll = partial_loglik(&[1.0, 2.0], &[true, true], &[0.0, 0.0]);
        assert!((ll + 2f64.ln()).abs() < 1e-15);
    }

    /// Direct O(n²) Breslow partial likelihood.
    fn brute_loglik(time: &[f64], status: &[bool], eta: &[f64]) -> f64 {
        (0..time.len())
            .filter(|&i| status[i])
            .map(|i| {
                let s: f64 = (0..time.len()).filter(|&k| time[k] >= time[i]).map(|k| eta[k].exp()).sum();
                eta[i] - s.ln()
            })
            .sum()
    }

    /// Direct O(n²) score and information of one covariate.
    fn brute_score_info(time: &[f64], status: &[bool], eta: &[f64], x: &[f64]) -> (f64, f64) {
        let (mut u, mut info) = (0.0, 0.0);
        for i in (0..time.len()).filter(|&i| status[i]) {
            let risk: Vec<usize> = (0..time.len()).filter(|&k| time[k] >= time[i]).collect();
            let s0: f64 = risk.iter().map(|&k| eta[k].exp()).sum();
            let s1: f64 = risk.iter().map(|&k| eta[k].exp() * x[k]).sum();
            let s2: f64 = risk.iter().map(|&k| eta[k].exp() * x[k] * x[k]).sum();
            u += x[i] - s1 / s0;
            info += s2 / s0 - (s1 / s0).powi(2);
        }
        (u, info)
    }

    #[allow(clippy::needless_range_loop)] // rows index every column
    fn survival_data(n: usize, p: usize, effects: &[(usize, f64)], seed: u64) -> Dataset {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| normal(&mut rng)).collect()).collect();
        let mut time = Vec::with_capacity(n);
        let mut status = Vec::with_capacity(n);
        for i in 0..n {
            let eta: f64 = effects.iter().map(|(j, b)| b * cols[*j][i]).sum();
            let t: f64 = Exp::new(eta.exp()).unwrap().sample(&mut rng);
            let c: f64 = Exp::new(0.3).unwrap().sample(&mut rng);
            // round to create ties
            time.push((t.min(c) * 20.0).ceil() / 20.0);
            status.push(t <= c);
        }
        Dataset::from_columns(&cols, Response::Survival { time, status }).unwrap()
    }

    #[test]
    fn risk_set_computations_match_brute_force() {
        let d = survival_data(40, 2, &[(0, 1.0)], 3);
        let Response::Survival { time, status } = d.response() else { unreachable!() };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let eta: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sets = RiskSets::new(time, status);
        assert!((sets.loglik(&eta) - brute_loglik(time, status, &eta)).abs() < 1e-10);
        let shifted: Vec<f64> = eta.iter().map(|e| e + 3.7).collect();
        assert!((sets.loglik(&shifted) - sets.loglik(&eta)).abs() < 1e-10);
        let (u, info) = sets.score_info(&RiskSets::relative_risk(&eta), d.column(1));
        let (bu, binfo) = brute_score_info(time, status, &eta, d.column(1));
        assert!((u - bu).abs() < 1e-10 && (info - binfo).abs() < 1e-10);
    }

    #[test]
    fn unpenalized_cox_fit_is_the_partial_likelihood_maximum() {
        let d = survival_data(80, 3, &[(0, 0.8), (1, -0.5)], 7);
        let d = d.with_unpenalized([0, 1].into_iter().collect()).unwrap();
        let model = fit(&d, &LikConfig::new(LikEngine::Cox, Penalty::Lambda(10.0), 0)).unwrap();
        let Response::Survival { time, status } = d.response() else { unreachable!() };
        // independent Newton iteration on brute-force score/information
        let x0 = d.column(0);
        let x1 = d.column(1);
        let mut b = [0.0, 0.0];
        for _ in 0..50 {
            let eta: Vec<f64> = (0..80).map(|i| b[0] * x0[i] + b[1] * x1[i]).collect();
            let mut u = [0.0; 2];
            let mut h = [[0.0; 2]; 2];
            for i in (0..80).filter(|&i| status[i]) {
                let risk: Vec<usize> = (0..80).filter(|&k| time[k] >= time[i]).collect();
                let s0: f64 = risk.iter().map(|&k| eta[k].exp()).sum();
                let xs = [x0, x1];
                let m: Vec<f64> = xs.iter().map(|x| risk.iter().map(|&k| eta[k].exp() * x[k]).sum::<f64>() / s0).collect();
                for p in 0..2 {
                    u[p] += xs[p][i] - m[p];
                    for q in 0..2 {
                        let s2: f64 = risk.iter().map(|&k| eta[k].exp() * xs[p][k] * xs[q][k]).sum();
                        h[p][q] += s2 / s0 - m[p] * m[q];
                    }
                }
            }
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            b[0] += (h[1][1] * u[0] - h[0][1] * u[1]) / det;
            b[1] += (h[0][0] * u[1] - h[1][0] * u[0]) / det;
        }
        let coef = model.coefficients(None).unwrap();
        assert!((coef.coefficients[0] - b[0]).abs() < 1e-6, "{:?} vs {:?}", coef.coefficients, b);
        assert!((coef.coefficients[1] - b[1]).abs() < 1e-6);
        assert_eq!(coef.coefficients[2], 0.0);
    }

    #[test]
    fn cox_selection_recovers_true_effects() {
        let effects = [(3, 1.0), (17, -1.0), (58, 0.8)];
        let d = survival_data(60, 100, &effects, 11);
        let lambda = penalty_from_stepsize(0.1, &d, LikEngine::Cox).unwrap();
        let model = fit(&d, &LikConfig::new(LikEngine::Cox, Penalty::Lambda(lambda), 50)).unwrap();
        let selected: BTreeSet<usize> = model.path.iter().map(|s| s.component).collect();
        for (j, _) in effects {
            assert!(selected.contains(&j), "component {j} missing from {selected:?}");
        }
        // every step picks the argmax of U²/(I + λ), recomputed by brute force
        let Response::Survival { time, status } = d.response() else { unreachable!() };
        let cols: Vec<Vec<f64>> = (0..100)
            .map(|j| {
                let c = d.column(j);
                let mean = c.iter().sum::<f64>() / 60.0;
                c.iter().map(|v| v - mean).collect()
            })
            .collect();
        let mut eta = vec![0.0; 60];
        let mut decreases = 0;
        for (m, step) in model.path.iter().enumerate() {
            let stats: Vec<f64> = cols
                .iter()
                .map(|x| {
                    let (u, info) = brute_score_info(time, status, &eta, x);
                    u * u / (info + lambda)
                })
                .collect();
            let best = (0..100).fold(0, |b, j| if stats[j] > stats[b] { j } else { b });
            assert_eq!(step.component, best, "step {m}");
            for (e, x) in eta.iter_mut().zip(&cols[best]) {
                *e += step.gamma * x;
            }
            if model.criterion[m + 1] < model.criterion[m] {
                decreases += 1;
            }
        }
        assert!(model.criterion[50] >= model.criterion[0]);
        assert!(decreases == 0, "{decreases} decreasing steps");
        let pred = model.predict(d.predictors(), None, Scale::Link).unwrap();
        for (a, b) in pred.iter().zip(model.training_eta().unwrap()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cox_score_selection_is_scale_invariant_without_penalty() {
        let d = survival_data(50, 5, &[(2, 0.7)], 5);
        let model = fit(&d, &LikConfig::new(LikEngine::Cox, Penalty::Lambda(0.0), 10)).unwrap();
        let cols: Vec<Vec<f64>> = (0..5).map(|j| d.column(j).iter().map(|v| v * (j as f64 + 0.5) * 7.0).collect()).collect();
        let scaled = Dataset::from_columns(&cols, d.response().clone()).unwrap();
        let other = fit(&scaled, &LikConfig::new(LikEngine::Cox, Penalty::Lambda(0.0), 10)).unwrap();
        let a: Vec<usize> = model.path.iter().map(|s| s.component).collect();
        let b: Vec<usize> = other.path.iter().map(|s| s.component).collect();
        assert_eq!(a, b);
    }

    /// Columns with mean zero and Σx² = n.
    fn unit_columns(n: usize, p: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        (0..p)
            .map(|_| {
                let raw: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
                let mean = raw.iter().sum::<f64>() / n as f64;
                let c: Vec<f64> = raw.iter().map(|v| v - mean).collect();
                let ss: f64 = c.iter().map(|v| v * v).sum();
                c.iter().map(|v| v * (n as f64 / ss).sqrt()).collect()
            })
            .collect()
    }

    #[test]
    fn gaussian_coincides_with_l2_gradient_boosting() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let (n, p, sl) = (80, 6, 0.1);
        let cols = unit_columns(n, p, &mut rng);
        let y: Vec<f64> = (0..n).map(|i| 2.0 + cols[1][i] - 0.7 * cols[4][i] + 0.5 * normal(&mut rng)).collect();
        let d = Dataset::from_columns(&cols, Response::Continuous(y)).unwrap();
        let gb = gradboost::fit(&d, &GradientConfig::uniform(Family::L2, LearnerSpec::Linear, p).with_mstop(100).with_step(sl)).unwrap();
        let lambda = n as f64 * (1.0 / sl - 1.0);
        let lb = fit(&d, &LikConfig::new(LikEngine::Glm(GlmFamily::Gaussian), Penalty::Lambda(lambda), 100)).unwrap();
        for m in 0..=100 {
            if m > 0 {
                assert_eq!(gb.path[m - 1].component, lb.path[m - 1].component, "step {m}");
            }
            let a = gb.aggregate_coefficients(Some(m)).unwrap();
            let b = lb.coefficients(Some(m)).unwrap();
            assert!((a.intercept - b.intercept).abs() < 1e-8);
            for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
                assert!((x - y).abs() < 1e-8, "m={m}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn unpenalized_single_step_is_ols() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..5.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 + 0.3 * v + normal(&mut rng)).collect();
        let d = Dataset::from_columns(std::slice::from_ref(&x), Response::Continuous(y.clone())).unwrap();
        let model = fit(&d, &LikConfig::new(LikEngine::Glm(GlmFamily::Gaussian), Penalty::Lambda(0.0), 1)).unwrap();
        let (xm, ym) = (x.iter().sum::<f64>() / 30.0, y.iter().sum::<f64>() / 30.0);
        let ols = x.iter().zip(&y).map(|(a, b)| (a - xm) * (b - ym)).sum::<f64>() / x.iter().map(|a| (a - xm).powi(2)).sum::<f64>();
        assert!((model.path[0].gamma - ols).abs() < 1e-12);
        let coef = model.coefficients(None).unwrap();
        assert!((coef.intercept - (ym - ols * xm)).abs() < 1e-10);
    }

    #[test]
    fn logistic_selects_informative_covariate_first() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..20).map(|_| normal(&mut rng)).collect()).collect();
        let y: Vec<f64> = (0..20).map(|i| if 2.5 * cols[1][i] + 0.3 * normal(&mut rng) > 0.0 { 1.0 } else { -1.0 }).collect();
        let d = Dataset::from_columns(&cols, Response::Binary(y.clone())).unwrap();
        let lambda = 20.0 * 9.0;
        let model = fit(&d, &LikConfig::new(LikEngine::Glm(GlmFamily::Logistic), Penalty::Lambda(lambda), 5)).unwrap();
        // exhaustive deviance of every one-step candidate from the intercept model
        let y01: Vec<f64> = y.iter().map(|v| (v + 1.0) / 2.0).collect();
        let pbar = y01.iter().sum::<f64>() / 20.0;
        let b0 = (pbar / (1.0 - pbar)).ln();
        let devs: Vec<f64> = cols
            .iter()
            .map(|c| {
                let mean = c.iter().sum::<f64>() / 20.0;
                let x: Vec<f64> = c.iter().map(|v| v - mean).collect();
                let u: f64 = x.iter().zip(&y01).map(|(a, b)| a * (b - pbar)).sum();
                let info: f64 = x.iter().map(|a| pbar * (1.0 - pbar) * a * a).sum();
                let g = u / (info + lambda);
                x.iter()
                    .zip(&y01)
                    .map(|(a, b)| {
                        let eta = b0 + g * a;
                        let p = 1.0 / (1.0 + (-eta).exp());
                        -2.0 * (b * p.ln() + (1.0 - b) * (1.0 - p).ln())
                    })
                    .sum()
            })
            .collect();
        let best = (0..3).fold(0, |b, j| if devs[j] < devs[b] { j } else { b });
        assert_eq!(best, 1);
        assert_eq!(model.path[0].component, 1);
        assert!((model.initial[0] - b0).abs() < 1e-9);
        let resp = model.predict(d.predictors(), None, Scale::Response).unwrap();
        assert!(resp.iter().all(|p| *p > 0.0 && *p < 1.0));
    }

    #[test]
    fn poisson_deviance_decreases() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        let x: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| {
                let lam: f64 = (0.5 + v).exp();
                rand_distr::Poisson::new(lam).unwrap().sample(&mut rng)
            })
            .collect();
        let d = Dataset::from_columns(&[x], Response::Continuous(y)).unwrap();
        let model = fit(&d, &LikConfig::new(LikEngine::Glm(GlmFamily::Poisson), Penalty::StepSize(0.1), 100)).unwrap();
        assert!(model.criterion.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        assert!((model.coefficients(None).unwrap().coefficients[0] - 1.0).abs() < 0.5);
    }

    #[test]
    fn zero_steps_predicts_intercept_and_validates_inputs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let x: Vec<f64> = (0..10).map(|_| normal(&mut rng)).collect();
        let y: Vec<f64> = (0..10).map(|_| normal(&mut rng)).collect();
        let d = Dataset::from_columns(&[x], Response::Continuous(y.clone())).unwrap();
        let model = fit(&d, &LikConfig::new(LikEngine::Glm(GlmFamily::Gaussian), Penalty::StepSize(0.1), 0)).unwrap();
        let mean = y.iter().sum::<f64>() / 10.0;
        for v in model.predict(d.predictors(), None, Scale::Link).unwrap() {
            assert!((v - mean).abs() < 1e-12);
        }
        assert!(model.predict(d.predictors(), Some(1), Scale::Link).is_err());
        let one_class = Dataset::from_columns(&[vec![1.0, 2.0]], Response::Binary(vec![1.0, 1.0])).unwrap();
        assert!(matches!(
            fit(&one_class, &LikConfig::new(LikEngine::Glm(GlmFamily::Logistic), Penalty::Lambda(1.0), 1)),
            Err(BoostError::SingleClass)
        ));
        assert!(matches!(
            fit(&d, &LikConfig::new(LikEngine::Cox, Penalty::Lambda(1.0), 1)),
            Err(BoostError::SurvivalRequired)
        ));
        let wide = Dataset::from_columns(&vec![vec![1.0, 2.0, 3.0]; 5], Response::Continuous(vec![1.0, 2.0, 4.0])).unwrap();
        assert!(fit(&wide, &LikConfig::new(LikEngine::Glm(GlmFamily::Gaussian), Penalty::Lambda(0.0), 1)).is_err());
    }

    #[test]
    fn bands_match_ols_for_long_unpenalized_runs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        let n = 100;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.4 * v + normal(&mut rng)).collect();
        let d = Dataset::from_columns(std::slice::from_ref(&x), Response::Continuous(y.clone())).unwrap();
        let model = fit(&d, &LikConfig::new(LikEngine::Glm(GlmFamily::Gaussian), Penalty::Lambda(0.01), 200)).unwrap();
        let xm = x.iter().sum::<f64>() / n as f64;
        let ym = y.iter().sum::<f64>() / n as f64;
        let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
        let b = x.iter().zip(&y).map(|(a, c)| (a - xm) * (c - ym)).sum::<f64>() / sxx;
        let rss: f64 = x.iter().zip(&y).map(|(a, c)| (c - ym - b * (a - xm)).powi(2)).sum();
        let sigma2 = rss / (n as f64 - 2.0);
        let grid = [0.0, 2.0, 8.0, 10.0];
        let bands = model.confidence_bands(&d, BandTarget::Component(0), &grid, None).unwrap();
        assert!(bands.selected);
        for row in &bands.rows {
            let ols_se = (row.value - xm).abs() * (sigma2 / sxx).sqrt();
            let se = (row.upper - row.estimate) / Z_95;
            assert!((se - ols_se).abs() <= 0.15 * ols_se, "{se} vs {ols_se}");
            assert!(row.lower <= row.estimate && row.estimate <= row.upper);
        }
        assert!((model.df.last().unwrap() - 2.0).abs() < 1e-3);
        let dfs = &model.df;
        assert!((dfs[0] - 1.0).abs() < 1e-12);
        assert!(dfs.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        // intercept band at m = 0
        let b0 = model.confidence_bands(&d, BandTarget::Intercept, &[], Some(0)).unwrap();
        let sd_y = (y.iter().map(|v| (v - ym).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        let se0 = (b0.rows[0].upper - b0.rows[0].estimate) / Z_95;
        assert!((b0.rows[0].estimate - ym).abs() < 1e-12);
        assert!((se0 - sd_y / (n as f64).sqrt()).abs() < 1e-10);
        let unsel = model.confidence_bands(&d, BandTarget::Component(0), &grid, Some(0)).unwrap();
        assert!(!unsel.selected && unsel.rows.iter().all(|r| r.lower == 0.0 && r.upper == 0.0));
    }

    #[test]
    fn logistic_bands_are_nonnegative_width() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..50).map(|_| normal(&mut rng)).collect()).collect();
        let y: Vec<f64> = (0..50).map(|i| if cols[0][i] + normal(&mut rng) > 0.0 { 1.0 } else { -1.0 }).collect();
        let d = Dataset::from_columns(&cols, Response::Binary(y)).unwrap();
        let model = fit(&d, &LikConfig::new(LikEngine::Glm(GlmFamily::Logistic), Penalty::StepSize(0.1), 30)).unwrap();
        let grid: Vec<f64> = (-10..=10).map(|k| k as f64 * 0.3).collect();
        for j in 0..3 {
            let bands = model.confidence_bands(&d, BandTarget::Component(j), &grid, None).unwrap();
            assert!(bands.rows.iter().all(|r| r.upper - r.lower >= 0.0));
        }
    }

    #[test]
    fn standardized_cox_reports_original_scale() {
        let d = survival_data(70, 3, &[(0, 0.9)], 13);
        let cols: Vec<Vec<f64>> = (0..3).map(|j| d.column(j).iter().map(|v| 5.0 + 3.0 * v).collect()).collect();
        let shifted = Dataset::from_columns(&cols, d.response().clone()).unwrap();
        let mut cfg = LikConfig::new(LikEngine::Cox, Penalty::StepSize(0.1), 40);
        cfg.standardize = true;
        let a = fit(&d, &cfg).unwrap();
        let b = fit(&shifted, &cfg).unwrap();
        let ca = a.coefficients(None).unwrap();
        let cb = b.coefficients(None).unwrap();
        for j in 0..3 {
            assert!((ca.coefficients[j] - 3.0 * cb.coefficients[j]).abs() < 1e-8);
        }
        let pa = a.predict(d.predictors(), None, Scale::Link).unwrap();
        let pb = b.predict(shifted.predictors(), None, Scale::Link).unwrap();
        for (x, y) in pa.iter().zip(&pb) {
            assert!((x - y).abs() < 1e-8);
        }
        assert!(a.confidence_bands(&d, BandTarget::Component(0), &[0.0], None).is_err());
    }
}
