//! Component-wise base-learners: weighted simple linear regression, penalized
//! B-splines (P-splines) and decision stumps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use rayon::prelude::*;

use crate::linalg::{spd_solve, weighted_gram, weighted_transpose};
use crate::{BoostError, Result};

/// Base-learner choice for one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LearnerSpec {
    Linear,
    PSpline(PSplineSpec),
}

impl LearnerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerSpec::Linear => "linear",
            LearnerSpec::PSpline(_) => "pspline",
        }
    }
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
}

impl LinearFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Weighted sufficient statistics of one column, reused across iterations.
#[derive(Debug, Clone)]
pub struct LinearLearner {
    mean: f64,
    sxx: f64,
    total_weight: f64,
}

impl LinearLearner {
    /// `None` when the column has (numerically) zero weighted variance.
    pub fn new(x: &[f64], w: &[f64]) -> Option<Self> {
        let total_weight: f64 = w.iter().sum();
        if !(total_weight > 0.0) {
            return None;
        }
        let mean = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total_weight;
        let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - mean).powi(2)).sum();
        let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
        if !(sxx > 1e-24 * scale * scale * total_weight) {
            return None;
        }
        Some(LinearLearner { mean, sxx, total_weight })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn fit(&self, x: &[f64], u: &[f64], w: &[f64]) -> LinearFit {
        let mut su = 0.0;
        let mut sxu = 0.0;
        for ((&xi, &ui), &wi) in x.iter().zip(u).zip(w) {
            su += wi * ui;
            sxu += wi * (xi - self.mean) * ui;
        }
        let slope = sxu / self.sxx;
        let intercept = su / self.total_weight - slope * self.mean;
        LinearFit { intercept, slope }
    }
}

/// Minimizes `Σ w_i (u_i − a − b x_i)²`; `None` for zero-variance columns.
pub fn fit_linear(x: &[f64], u: &[f64], w: &[f64]) -> Option<LinearFit> {
    LinearLearner::new(x, w).map(|l| l.fit(x, u, w))
}

/// `X̃ (X̃ᵀWX̃)⁻¹ X̃ᵀW` with `X̃ = [1, x]`.
pub fn linear_hat_matrix(x: &[f64], w: &[f64]) -> Result<DMatrix<f64>> {
    if LinearLearner::new(x, w).is_none() {
        return Err(BoostError::Singular("zero-variance column".into()));
    }
    let n = x.len();
    let design = DMatrix::from_fn(n, 2, |i, k| if k == 0 { 1.0 } else { x[i] });
    let gram = weighted_gram(&design, w);
    let (inv_xtw, _) = spd_solve(&gram, &weighted_transpose(&design, w))?;
    Ok(design * inv_xtw)
}

// ---------------------------------------------------------------------------
// P-splines
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PSplineSpec {
    pub degree: usize,
    pub inner_knots: usize,
    pub diff_order: usize,
    pub df: f64,
}

impl Default for PSplineSpec {
    fn default() -> Self {
        PSplineSpec { degree: 3, inner_knots: 20, diff_order: 2, df: 4.0 }
    }
}

impl PSplineSpec {
    pub fn n_basis(&self) -> usize {
        self.inner_knots + self.degree + 1
    }
}

/// Equidistant B-spline basis over `[lower, upper]`, extended by `degree`
/// knot spacings on each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    pub degree: usize,
    pub lower: f64,
    pub upper: f64,
    pub knots: Vec<f64>,
}

impl SplineBasis {
    pub fn new(lower: f64, upper: f64, inner_knots: usize, degree: usize) -> Result<Self> {
        if !(upper > lower) {
            return Err(BoostError::InvalidDataset("spline needs at least two distinct values".into()));
        }
        let h = (upper - lower) / (inner_knots + 1) as f64;
        let total = inner_knots + 2 + 2 * degree;
        let knots = (0..total).map(|k| lower + (k as f64 - degree as f64) * h).collect();
        Ok(SplineBasis { degree, lower, upper, knots })
    }

    pub fn n_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// All basis functions of degree `k` at `x` (Cox–de Boor).
    fn eval_degree(&self, x: f64, k: usize) -> Vec<f64> {
        let t = &self.knots;
        let m = t.len() - 1;
        let mut b: Vec<f64> = (0..m).map(|i| if t[i] <= x && x < t[i + 1] { 1.0 } else { 0.0 }).collect();
        for d in 1..=k {
            let next: Vec<f64> = (0..m - d)
                .map(|i| {
                    let left = (x - t[i]) / (t[i + d] - t[i]) * b[i];
                    let right = (t[i + d + 1] - x) / (t[i + d + 1] - t[i + 1]) * b[i + 1];
                    left + right
                })
                .collect();
            b = next;
        }
        b
    }

    /// Basis row at `x`; outside `[lower, upper]` the boundary row is extended
    /// linearly. The flag reports whether extrapolation happened.
    pub fn row(&self, x: f64) -> (Vec<f64>, bool) {
        if x < self.lower {
            (self.linear_extension(self.lower, x), true)
        } else if x > self.upper {
            (self.linear_extension(self.upper, x), true)
        } else {
            (self.eval_degree(x, self.degree), false)
        }
    }

    fn linear_extension(&self, bound: f64, x: f64) -> Vec<f64> {
        let value = self.eval_degree(bound, self.degree);
        let deriv = self.derivative(bound);
        value.iter().zip(&deriv).map(|(v, d)| v + (x - bound) * d).collect()
    }

    /// First derivative of every basis function at `x`.
    pub fn derivative(&self, x: f64) -> Vec<f64> {
        let d = self.degree;
        if d == 0 {
            return vec![0.0; self.n_basis()];
        }
        let t = &self.knots;
        let lower = self.eval_degree(x, d - 1);
        (0..self.n_basis())
            .map(|j| {
                let a = d as f64 / (t[j + d] - t[j]) * lower[j];
                let b = d as f64 / (t[j + d + 1] - t[j + 1]) * lower[j + 1];
                a - b
            })
            .collect()
    }

    pub fn design(&self, x: &[f64]) -> DMatrix<f64> {
        let q = self.n_basis();
        let mut out = DMatrix::zeros(x.len(), q);
        for (i, &xi) in x.iter().enumerate() {
            let (row, _) = self.row(xi);
            for (k, v) in row.into_iter().enumerate() {
                out[(i, k)] = v;
            }
        }
        out
    }
}

/// Evaluates `Σ_k row_k γ_k` in a fixed order so training fits and
/// predictions agree bitwise.
pub fn spline_value(row: &[f64], coef: &[f64]) -> f64 {
    row.iter().zip(coef).fold(0.0, |acc, (b, g)| acc + b * g)
}

/// Difference operator of the given order, `(q − order) × q`.
pub fn difference_matrix(q: usize, order: usize) -> DMatrix<f64> {
    let mut d = DMatrix::<f64>::identity(q, q);
    for _ in 0..order {
        let rows = d.nrows();
        d = DMatrix::from_fn(rows - 1, q, |i, j| d[(i + 1, j)] - d[(i, j)]);
    }
    d
}

#[derive(Debug, Clone)]
pub struct PSplineLearner {
    pub spec: PSplineSpec,
    pub basis: SplineBasis,
    pub design: DMatrix<f64>,
    pub penalty: DMatrix<f64>,
    pub lambda: Option<f64>,
}

/// Builds the basis and difference penalty for one column; λ is left uncalibrated.
pub fn build_pspline(x: &[f64], spec: PSplineSpec) -> Result<PSplineLearner> {
    let lower = x.iter().copied().fold(f64::INFINITY, f64::min);
    let upper = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(upper > lower) {
        return Err(BoostError::InvalidDataset("P-spline needs at least two distinct values".into()));
    }
    if spec.diff_order >= spec.n_basis() {
        return Err(BoostError::InvalidArgument("difference order too large for basis".into()));
    }
    let basis = SplineBasis::new(lower, upper, spec.inner_knots, spec.degree)?;
    let design = basis.design(x);
    let d = difference_matrix(basis.n_basis(), spec.diff_order);
    let penalty = d.transpose() * d;
    Ok(PSplineLearner { spec, basis, design, penalty, lambda: None })
}

impl PSplineLearner {
    fn gram(&self, w: &[f64]) -> DMatrix<f64> {
        weighted_gram(&self.design, w)
    }

    /// `trace(B(BᵀWB + λP)⁻¹BᵀW)`; at λ = 0 this is the rank of `W^{1/2}B`.
    pub fn df(&self, lambda: f64, w: &[f64]) -> Result<f64> {
        let gram = self.gram(w);
        if lambda == 0.0 {
            return Ok(numeric_rank(&gram) as f64);
        }
        let system = &gram + &self.penalty * lambda;
        let (solved, _) = spd_solve(&system, &gram)?;
        Ok(solved.trace())
    }

    /// Finds λ with `df(λ) = target_df` by bisection on ln λ over [−20, 40].
    pub fn calibrate_lambda(&self, target_df: f64, w: &[f64]) -> Result<f64> {
        let null_dim = self.spec.diff_order as f64;
        let rank = numeric_rank(&self.gram(w)) as f64;
        if !(target_df > null_dim && target_df < rank) {
            return Err(BoostError::DfOutOfRange { target: target_df, lower: null_dim, upper: rank });
        }
        let (mut lo, mut hi) = (-20.0_f64, 40.0_f64);
        let df_lo = self.df(lo.exp(), w)?;
        let df_hi = self.df(hi.exp(), w)?;
        if !(df_lo >= target_df && df_hi <= target_df) {
            return Err(BoostError::DfOutOfRange { target: target_df, lower: df_hi, upper: df_lo });
        }
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..200 {
            mid = 0.5 * (lo + hi);
            let df = self.df(mid.exp(), w)?;
            if (df - target_df).abs() < 1e-10 {
                break;
            }
            if df > target_df {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(mid.exp())
    }

    pub fn calibrated(mut self, w: &[f64]) -> Result<Self> {
        self.lambda = Some(self.calibrate_lambda(self.spec.df, w)?);
        Ok(self)
    }

    fn require_lambda(&self) -> Result<f64> {
        self.lambda.ok_or_else(|| BoostError::InvalidArgument("P-spline λ not calibrated".into()))
    }

    /// `(BᵀWB + λP)⁻¹BᵀW`, a `q × n` matrix; the flag reports the ridge fallback.
    pub fn smoother(&self, w: &[f64]) -> Result<(DMatrix<f64>, bool)> {
        let lambda = self.require_lambda()?;
        let system = self.gram(w) + &self.penalty * lambda;
        spd_solve(&system, &weighted_transpose(&self.design, w))
    }

    /// Spline coefficients `γ = (BᵀWB + λP)⁻¹BᵀWu`.
    pub fn fit(&self, u: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        let (s, ridged) = self.smoother(w)?;
        if ridged {
            log::warn!("P-spline system singular; solved with ridge {}", crate::linalg::RIDGE_FALLBACK);
        }
        Ok((s * DVector::from_column_slice(u)).iter().copied().collect())
    }

    pub fn fitted(&self, coef: &[f64]) -> Vec<f64> {
        self.design.row_iter().map(|r| spline_value(r.transpose().as_slice(), coef)).collect()
    }

    pub fn hat_matrix(&self, w: &[f64]) -> Result<DMatrix<f64>> {
        let (s, _) = self.smoother(w)?;
        Ok(&self.design * s)
    }
}

fn numeric_rank(sym: &DMatrix<f64>) -> usize {
    let eig = sym.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    eig.eigenvalues.iter().filter(|v| v.abs() > 1e-10 * max).count()
}

// ---------------------------------------------------------------------------
// Stumps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub component: usize,
    pub threshold: f64,
    /// +1 predicts +1 at or above the threshold, −1 the reverse.
    pub polarity: i8,
}

impl Stump {
    /// `polarity · sign(x − threshold)` with `sign(0) = +1`.
    pub fn predict_value(&self, x: f64) -> f64 {
        let side = if x >= self.threshold { 1.0 } else { -1.0 };
        f64::from(self.polarity) * side
    }

    pub fn predict_row(&self, x: &DMatrix<f64>, i: usize) -> f64 {
        self.predict_value(x[(i, self.component)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StumpFit {
    pub stump: Stump,
    /// Weighted misclassification rate, normalized by the total weight.
    pub error: f64,
}

/// Candidate thresholds of one column: one below every value, then the
/// midpoints between consecutive distinct sorted values.
fn stump_thresholds(sorted: &[f64]) -> Vec<f64> {
    let mut distinct: Vec<f64> = sorted.to_vec();
    distinct.dedup();
    let min_gap = distinct.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let gap = if min_gap.is_finite() { min_gap } else { 1.0 };
    let mut out = vec![distinct[0] - 0.5 * gap];
    out.extend(distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out
}

const STUMP_TIE_TOL: f64 = 1e-12;
const PARALLEL_MIN_STUMP_COMPONENTS: usize = 32;

fn consider_stump(cand: StumpFit, best: &mut Option<StumpFit>) {
    if best.is_none_or(|b| cand.error < b.error - STUMP_TIE_TOL) {
        *best = Some(cand);
    }
}

fn best_stump_for_column(x: &DMatrix<f64>, j: usize, y: &[f64], w: &[f64], total: f64, neg_total: f64) -> Option<StumpFit> {
    let n = x.nrows();
    let col = x.column(j);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| col[i]).collect();
    let mut best = None;
    let mut cursor = 0;
    let (mut pos_left, mut neg_left) = (0.0, 0.0);
    for t in stump_thresholds(&sorted) {
        while cursor < n && sorted[cursor] < t {
            let i = order[cursor];
            if y[i] > 0.0 {
                pos_left += w[i];
            } else {
                neg_left += w[i];
            }
            cursor += 1;
        }
        // polarity +1: left predicted −1, right +1
        let err_plus = (pos_left + (neg_total - neg_left)) / total;
        let err_minus = 1.0 - err_plus;
        consider_stump(StumpFit { stump: Stump { component: j, threshold: t, polarity: 1 }, error: err_plus }, &mut best);
        consider_stump(StumpFit { stump: Stump { component: j, threshold: t, polarity: -1 }, error: err_minus }, &mut best);
    }
    best
}

/// Exhaustive stump search over all components, thresholds and polarities.
///
/// Ties keep the earliest candidate in (component, threshold, polarity +1
/// before −1) order.
pub fn fit_stump(x: &DMatrix<f64>, y: &[f64], w: &[f64]) -> Result<StumpFit> {
    let (n, p) = x.shape();
    if y.len() != n || w.len() != n {
        return Err(BoostError::Dimension("stump inputs must have equal length".into()));
    }
    if w.iter().any(|&v| v < 0.0) {
        return Err(BoostError::InvalidArgument("negative weight".into()));
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(BoostError::InvalidArgument("weights sum to zero".into()));
    }
    let neg_total: f64 = y.iter().zip(w).filter(|(v, _)| **v < 0.0).map(|(_, w)| w).sum();
    let search = |j: usize| best_stump_for_column(x, j, y, w, total, neg_total);
    // per-component winners are reduced in component order, so the result does
    // not depend on whether the search ran in parallel
    let per_component: Vec<Option<StumpFit>> = if p >= PARALLEL_MIN_STUMP_COMPONENTS {
        (0..p).into_par_iter().map(search).collect()
    } else {
        (0..p).map(search).collect()
    };
    let mut best: Option<StumpFit> = None;
    for cand in per_component.into_iter().flatten() {
        consider_stump(cand, &mut best);
    }
    best.ok_or_else(|| BoostError::InvalidDataset("no stump candidates".into()))
}
