//! Component-wise functional gradient descent.
//!
//! Every iteration fits each component's base-learner to the negative
//! gradient, keeps only the best-fitting component and adds a shrunken copy
//! of its fit to the additive predictor. The model stores the full path, so
//! any earlier iteration can be recovered exactly by truncation.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselearners::{build_pspline, spline_value, LearnerSpec, LinearFit, LinearLearner, PSplineSpec, SplineBasis};
use crate::data::{standardize, Dataset, Scaling};
use crate::losses::Family;
use crate::{BoostError, Result};

pub const DEFAULT_STEP: f64 = 0.1;
pub const DEFAULT_MSTOP: usize = 100;

/// Components at or above this count are fitted in parallel each iteration.
const PARALLEL_MIN_COMPONENTS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientConfig {
    pub family: Family,
    /// One learner per component.
    pub learners: Vec<LearnerSpec>,
    pub m_stop: usize,
    pub step: f64,
    pub standardize: bool,
}

impl GradientConfig {
    pub fn uniform(family: Family, learner: LearnerSpec, p: usize) -> Self {
        GradientConfig {
            family,
            learners: vec![learner; p],
            m_stop: DEFAULT_MSTOP,
            step: DEFAULT_STEP,
            standardize: false,
        }
    }

    pub fn with_mstop(mut self, m_stop: usize) -> Self {
        self.m_stop = m_stop;
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ComponentModel {
    Linear {
        /// Training mean, used to center partial effects.
        mean: f64,
    },
    #[serde(rename = "pspline")]
    PSpline {
        spec: PSplineSpec,
        basis: SplineBasis,
        lambda: f64,
        /// Column means of the training design, used to center partial effects.
        basis_mean: Vec<f64>,
    },
    /// Non-fittable on the training data (zero variance); never selected.
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Increment {
    Linear(LinearFit),
    Spline { coef: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub component: usize,
    pub increment: Increment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub family: Family,
    pub step: f64,
    pub offset: f64,
    pub names: Vec<String>,
    pub components: Vec<ComponentModel>,
    pub path: Vec<PathStep>,
    /// Training risk at m = 0..=m_stop.
    pub risk: Vec<f64>,
    pub scaling: Option<Scaling>,
    #[serde(skip)]
    training_fit: Option<Vec<f64>>,
}

/// A fitted base-learner ready to be refit to new targets.
pub(crate) enum Prepared {
    Linear { learner: LinearLearner },
    Spline { smoother: DMatrix<f64>, rows: Vec<Vec<f64>> },
}

impl Prepared {
    pub(crate) fn new(col: &[f64], spec: &LearnerSpec, w: &[f64]) -> Result<Option<(Prepared, ComponentModel)>> {
        match spec {
            LearnerSpec::Linear => Ok(LinearLearner::new(col, w)
                .map(|l| (ComponentModel::Linear { mean: l.mean() }, Prepared::Linear { learner: l }))
                .map(|(m, p)| (p, m))),
            LearnerSpec::PSpline(ps) => {
                let distinct = {
                    let mut v: Vec<f64> = col.iter().zip(w).filter(|(_, w)| **w > 0.0).map(|(x, _)| *x).collect();
                    v.sort_by(f64::total_cmp);
                    v.dedup();
                    v.len()
                };
                if distinct < 2 {
                    return Ok(None);
                }
                let learner = build_pspline(col, *ps)?.calibrated(w)?;
                let (smoother, ridged) = learner.smoother(w)?;
                if ridged {
                    log::warn!("P-spline normal equations needed ridge regularization");
                }
                let total: f64 = w.iter().sum();
                let q = learner.design.ncols();
                let basis_mean =
                    (0..q).map(|k| learner.design.column(k).iter().zip(w).map(|(b, w)| b * w).sum::<f64>() / total).collect();
                let rows = learner.design.row_iter().map(|r| r.iter().copied().collect()).collect();
                let model = ComponentModel::PSpline {
                    spec: *ps,
                    basis: learner.basis.clone(),
                    lambda: learner.lambda.expect("calibrated"),
                    basis_mean,
                };
                Ok(Some((Prepared::Spline { smoother, rows }, model)))
            }
        }
    }

    /// Fits the learner to `u` and returns (increment, fitted values).
    pub(crate) fn fit(&self, col: &[f64], u: &[f64], w: &[f64]) -> (Increment, Vec<f64>) {
        match self {
            Prepared::Linear { learner } => {
                let fit = learner.fit(col, u, w);
                let fitted = col.iter().map(|&x| fit.eval(x)).collect();
                (Increment::Linear(fit), fitted)
            }
            Prepared::Spline { smoother, rows } => {
                let coef: Vec<f64> = smoother
                    .row_iter()
                    .map(|r| r.iter().zip(u).fold(0.0, |acc, (s, v)| acc + s * v))
                    .collect();
                let fitted = rows.iter().map(|row| spline_value(row, &coef)).collect();
                (Increment::Spline { coef }, fitted)
            }
        }
    }
}

/// Index of the fit with the smallest weighted SSE against `u`; ties go to
/// the lowest index. `None` entries are skipped.
pub fn select_component(u: &[f64], fits: &[Option<Vec<f64>>], w: Option<&[f64]>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, fit) in fits.iter().enumerate() {
        let Some(h) = fit else { continue };
        let sse: f64 = match w {
            Some(w) => u.iter().zip(h).zip(w).map(|((a, b), c)| c * (a - b).powi(2)).sum(),
            None => u.iter().zip(h).map(|(a, b)| (a - b).powi(2)).sum(),
        };
        if best.is_none_or(|(_, s)| sse < s) {
            best = Some((j, sse));
        }
    }
    best.map(|(j, _)| j)
}

/// Fits with unit case weights.
pub fn fit(d: &Dataset, config: &GradientConfig) -> Result<BoostModel> {
    fit_weighted(d, config, &vec![1.0; d.n()])
}

pub fn fit_weighted(d: &Dataset, config: &GradientConfig, w: &[f64]) -> Result<BoostModel> {
    if !(config.step > 0.0 && config.step <= 1.0) {
        return Err(BoostError::InvalidArgument(format!("step length must lie in (0, 1], got {}", config.step)));
    }
    if config.learners.len() != d.p() {
        return Err(BoostError::Dimension(format!("{} learners for {} components", config.learners.len(), d.p())));
    }
    if w.len() != d.n() || w.iter().any(|&v| !(v >= 0.0)) {
        return Err(BoostError::InvalidArgument("weights must be nonnegative, one per row".into()));
    }
    let y = config.family.response_values(d.response())?.to_vec();
    let (data, scaling) = if config.standardize {
        let (s, sc) = standardize(d)?;
        (s, Some(sc))
    } else {
        (d.clone(), None)
    };

    let prepared: Vec<Option<(Prepared, ComponentModel)>> = (0..data.p())
        .map(|j| Prepared::new(data.column(j), &config.learners[j], w))
        .collect::<Result<_>>()?;
    let excluded: Vec<&str> =
        prepared.iter().enumerate().filter(|(_, p)| p.is_none()).map(|(j, _)| d.names()[j].as_str()).collect();
    if excluded.len() == data.p() {
        return Err(BoostError::NoFittableLearner);
    }
    if !excluded.is_empty() {
        log::warn!("excluded non-fittable components: {}", excluded.join(", "));
    }
    let (learners, components): (Vec<Option<Prepared>>, Vec<ComponentModel>) = prepared
        .into_iter()
        .map(|p| match p {
            Some((l, m)) => (Some(l), m),
            None => (None, ComponentModel::Excluded),
        })
        .unzip();

    let family = config.family;
    let offset = family.offset_init(&y, Some(w))?;
    let mut f = vec![offset; data.n()];
    let mut risk = Vec::with_capacity(config.m_stop + 1);
    risk.push(family.empirical_risk(&y, &f, Some(w))?);
    let mut path = Vec::with_capacity(config.m_stop);

    for _ in 0..config.m_stop {
        let u = family.negative_gradient_weighted(&y, &f, w);
        let fit_one = |j: usize| learners[j].as_ref().map(|l| l.fit(data.column(j), &u, w));
        let fits: Vec<Option<(Increment, Vec<f64>)>> = if data.p() >= PARALLEL_MIN_COMPONENTS {
            (0..data.p()).into_par_iter().map(fit_one).collect()
        } else {
            (0..data.p()).map(fit_one).collect()
        };
        let fitted: Vec<Option<Vec<f64>>> = fits.iter().map(|o| o.as_ref().map(|(_, h)| h.clone())).collect();
        let best = select_component(&u, &fitted, Some(w)).ok_or(BoostError::NoFittableLearner)?;
        let (increment, h) = fits.into_iter().nth(best).flatten().expect("selected component has a fit");
        for (fi, hi) in f.iter_mut().zip(&h) {
            *fi += config.step * hi;
        }
        path.push(PathStep { component: best, increment });
        risk.push(family.empirical_risk(&y, &f, Some(w))?);
    }

    Ok(BoostModel {
        family,
        step: config.step,
        offset,
        names: d.names().to_vec(),
        components,
        path,
        risk,
        scaling,
        training_fit: Some(f),
    })
}

/// Output of [`BoostModel::predict`].
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub values: Vec<f64>,
    /// Rows where some spline component was evaluated outside its training range.
    pub extrapolated: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Link,
    Response,
}

impl std::str::FromStr for Scale {
    type Err = BoostError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "link" => Ok(Scale::Link),
            "response" => Ok(Scale::Response),
            other => Err(BoostError::InvalidArgument(format!("unknown scale '{other}'"))),
        }
    }
}

/// Per-model intercept and linear coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialEffect {
    pub grid: Vec<f64>,
    pub effect: Vec<f64>,
    pub selected: bool,
}

impl BoostModel {
    pub fn m_stop(&self) -> usize {
        self.path.len()
    }

    pub fn p(&self) -> usize {
        self.names.len()
    }

    /// Additive predictor on the training data at `m_stop`, when the model
    /// came straight out of a fit.
    pub fn training_fit(&self) -> Option<&[f64]> {
        self.training_fit.as_deref()
    }

    /// Indices of components that were never fittable.
    pub fn excluded(&self) -> Vec<usize> {
        self.components
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c, ComponentModel::Excluded))
            .map(|(j, _)| j)
            .collect()
    }

    pub fn selection_counts(&self, at_m: usize) -> Vec<usize> {
        let mut counts = vec![0; self.p()];
        for step in &self.path[..at_m.min(self.m_stop())] {
            counts[step.component] += 1;
        }
        counts
    }

    fn check_m(&self, m: usize) -> Result<()> {
        if m > self.m_stop() {
            Err(BoostError::IterationOutOfRange { requested: m, max: self.m_stop() })
        } else {
            Ok(())
        }
    }

    fn prepare_x(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.p() {
            return Err(BoostError::Dimension(format!("expected {} columns, got {}", self.p(), x.ncols())));
        }
        match &self.scaling {
            Some(s) => s.apply(x),
            None => Ok(x.clone()),
        }
    }

    /// Walks the path once and calls `visit(m, f)` for every `m` in `grid`
    /// (ascending, each ≤ m_stop) with the link-scale predictor.
    pub fn visit_path(
        &self,
        x: &DMatrix<f64>,
        grid: &[usize],
        mut visit: impl FnMut(usize, &[f64]),
    ) -> Result<Vec<bool>> {
        if grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(BoostError::InvalidArgument("grid must be ascending".into()));
        }
        if let Some(&last) = grid.last() {
            self.check_m(last)?;
        }
        let x = self.prepare_x(x)?;
        let n = x.nrows();
        let mut extrapolated = vec![false; n];
        // basis rows per spline component, built on first use
        let mut rows: Vec<Option<Vec<Vec<f64>>>> = vec![None; self.p()];
        let mut f = vec![self.offset; n];
        let mut next = 0;
        while next < grid.len() && grid[next] == 0 {
            visit(0, &f);
            next += 1;
        }
        for (m, step) in self.path.iter().enumerate() {
            if next >= grid.len() {
                break;
            }
            let j = step.component;
            match &step.increment {
                Increment::Linear(fit) => {
                    for (i, fi) in f.iter_mut().enumerate() {
                        *fi += self.step * fit.eval(x[(i, j)]);
                    }
                }
                Increment::Spline { coef } => {
                    if rows[j].is_none() {
                        let ComponentModel::PSpline { basis, .. } = &self.components[j] else {
                            return Err(BoostError::ModelFile(format!("component {j} has no spline basis")));
                        };
                        let built = (0..n)
                            .map(|i| {
                                let (row, flag) = basis.row(x[(i, j)]);
                                extrapolated[i] |= flag;
                                row
                            })
                            .collect();
                        rows[j] = Some(built);
                    }
                    let rj = rows[j].as_ref().expect("built above");
                    for (fi, row) in f.iter_mut().zip(rj) {
                        *fi += self.step * spline_value(row, coef);
                    }
                }
            }
            while next < grid.len() && grid[next] == m + 1 {
                visit(m + 1, &f);
                next += 1;
            }
        }
        Ok(extrapolated)
    }

    pub fn predict(&self, x: &DMatrix<f64>, at_m: Option<usize>, scale: Scale) -> Result<Prediction> {
        let m = at_m.unwrap_or(self.m_stop());
        let mut values = Vec::new();
        let extrapolated = self.visit_path(x, &[m], |_, f| values = f.to_vec())?;
        if scale == Scale::Response {
            for v in values.iter_mut() {
                *v = self.family.inverse_link(*v);
            }
        }
        Ok(Prediction { values, extrapolated })
    }

    /// Prefix model with the first `m` iterations.
    pub fn truncate(&self, m: usize) -> Result<BoostModel> {
        self.check_m(m)?;
        let mut out = self.clone();
        out.path.truncate(m);
        out.risk.truncate(m + 1);
        if m != self.m_stop() {
            out.training_fit = None;
        }
        Ok(out)
    }

    /// Intercept and per-component slopes of an all-linear model, on the
    /// original scale of the predictors.
    pub fn aggregate_coefficients(&self, at_m: Option<usize>) -> Result<Coefficients> {
        let m = at_m.unwrap_or(self.m_stop());
        self.check_m(m)?;
        let mut intercepts = 0.0;
        let mut slopes = vec![0.0; self.p()];
        for step in &self.path[..m] {
            match &step.increment {
                Increment::Linear(fit) => {
                    intercepts += fit.intercept;
                    slopes[step.component] += fit.slope;
                }
                Increment::Spline { .. } => return Err(BoostError::NonLinearModel(self.names[step.component].clone())),
            }
        }
        let mut intercept = self.offset + self.step * intercepts;
        let mut coefficients: Vec<f64> = slopes.iter().map(|s| self.step * s).collect();
        if let Some(sc) = &self.scaling {
            for (j, c) in coefficients.iter_mut().enumerate() {
                *c /= sc.sds[j];
                intercept -= *c * sc.means[j];
            }
        }
        Ok(Coefficients { intercept, coefficients })
    }

    /// Centered contribution of component `j` evaluated on `grid` (original scale).
    pub fn partial_effect(&self, j: usize, grid: &[f64], at_m: Option<usize>) -> Result<PartialEffect> {
        if grid.is_empty() {
            return Err(BoostError::InvalidArgument("empty grid".into()));
        }
        if j >= self.p() {
            return Err(BoostError::InvalidArgument(format!("component {j} out of range")));
        }
        let m = at_m.unwrap_or(self.m_stop());
        self.check_m(m)?;
        let scaled: Vec<f64> = match &self.scaling {
            Some(sc) => grid.iter().map(|g| (g - sc.means[j]) / sc.sds[j]).collect(),
            None => grid.to_vec(),
        };
        let steps: Vec<&PathStep> = self.path[..m].iter().filter(|s| s.component == j).collect();
        if steps.is_empty() {
            return Ok(PartialEffect { grid: grid.to_vec(), effect: vec![0.0; grid.len()], selected: false });
        }
        let effect = match &self.components[j] {
            ComponentModel::Linear { mean } => {
                let slope: f64 = self.step
                    * steps
                        .iter()
                        .map(|s| match &s.increment {
                            Increment::Linear(fit) => fit.slope,
                            Increment::Spline { .. } => 0.0,
                        })
                        .sum::<f64>();
                scaled.iter().map(|g| slope * (g - mean)).collect()
            }
            ComponentModel::PSpline { basis, basis_mean, .. } => {
                let mut total = vec![0.0; basis.n_basis()];
                for s in &steps {
                    if let Increment::Spline { coef } = &s.increment {
                        for (t, c) in total.iter_mut().zip(coef) {
                            *t += self.step * c;
                        }
                    }
                }
                let center = spline_value(basis_mean, &total);
                scaled.iter().map(|&g| spline_value(&basis.row(g).0, &total) - center).collect()
            }
            ComponentModel::Excluded => vec![0.0; grid.len()],
        };
        Ok(PartialEffect { grid: grid.to_vec(), effect, selected: true })
    }

    /// Empirical risk on `d` at every m = 0..=m_stop.
    pub fn risk_path(&self, d: &Dataset) -> Result<Vec<f64>> {
        let y = self.family.response_values(d.response())?;
        let grid: Vec<usize> = (0..=self.m_stop()).collect();
        let mut out = Vec::with_capacity(grid.len());
        let mut err = None;
        self.visit_path(d.predictors(), &grid, |_, f| match self.family.empirical_risk(y, f, None) {
            Ok(r) => out.push(r),
            Err(e) => err = Some(e),
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }
}
