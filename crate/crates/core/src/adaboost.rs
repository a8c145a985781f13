//! Discrete AdaBoost with decision stumps.
//!
//! Observation weights start uniform; each round fits the stump with the
//! smallest weighted misclassification rate, gives it the vote
//! `α = ½ ln((1 − ε)/ε)` and up-weights the observations it misclassified.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::baselearners::{fit_stump, Stump};
use crate::data::{Dataset, Response};
use crate::losses::Family;
use crate::{BoostError, Result};

/// Floor applied to the weighted error before computing the vote, so a
/// perfect stump still gets a finite coefficient.
pub const EPSILON_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub stump: Stump,
    pub alpha: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// All requested rounds were run.
    Completed,
    /// A stump classified every observation correctly; it was kept.
    PerfectStump,
    /// The best stump had weighted error ≥ 0.5; it was discarded.
    NoImprovement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    pub names: Vec<String>,
    pub rounds: Vec<Round>,
    pub termination: Termination,
}

/// Predicted labels together with the vote margins `Σ α_m h_m(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaPrediction {
    pub labels: Vec<f64>,
    pub margins: Vec<f64>,
}

fn binary_labels(d: &Dataset) -> Result<&[f64]> {
    match d.response() {
        Response::Binary(y) => Ok(y),
        _ => Err(BoostError::BinaryRequired),
    }
}

pub fn fit_adaboost(d: &Dataset, m_stop: usize) -> Result<AdaBoostModel> {
    fit_adaboost_traced(d, m_stop).map(|(model, _)| model)
}

/// Like [`fit_adaboost`], also returning the weight vector before the first
/// round and after every retained round.
pub fn fit_adaboost_traced(d: &Dataset, m_stop: usize) -> Result<(AdaBoostModel, Vec<Vec<f64>>)> {
    let y = binary_labels(d)?;
    if y.iter().all(|&v| v > 0.0) || y.iter().all(|&v| v < 0.0) {
        return Err(BoostError::SingleClass);
    }
    let x = d.predictors();
    let n = d.n();
    let mut w = vec![1.0 / n as f64; n];
    let mut trace = vec![w.clone()];
    let mut rounds = Vec::new();
    let mut termination = Termination::Completed;
    for _ in 0..m_stop {
        let stump = fit_stump(x, y, &w)?.stump;
        let h: Vec<f64> = (0..n).map(|i| stump.predict_row(x, i)).collect();
        let epsilon: f64 = (0..n).filter(|&i| h[i] != y[i]).map(|i| w[i]).sum();
        if epsilon >= 0.5 {
            termination = Termination::NoImprovement;
            break;
        }
        let eps = epsilon.max(EPSILON_FLOOR);
        let alpha = 0.5 * ((1.0 - eps) / eps).ln();
        for i in 0..n {
            w[i] *= (-alpha * y[i] * h[i]).exp();
        }
        let total: f64 = w.iter().sum();
        for wi in w.iter_mut() {
            *wi /= total;
        }
        trace.push(w.clone());
        rounds.push(Round { stump, alpha, epsilon });
        if epsilon == 0.0 {
            termination = Termination::PerfectStump;
            break;
        }
    }
    Ok((AdaBoostModel { names: d.names().to_vec(), rounds, termination }, trace))
}

/// `sign(0)` is taken as +1.
fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

impl AdaBoostModel {
    fn margins_at(&self, x: &DMatrix<f64>, rounds: usize) -> Result<Vec<f64>> {
        if x.ncols() != self.names.len() {
            return Err(BoostError::Dimension(format!("expected {} columns, got {}", self.names.len(), x.ncols())));
        }
        let mut margins = vec![0.0; x.nrows()];
        for r in &self.rounds[..rounds] {
            for (i, m) in margins.iter_mut().enumerate() {
                *m += r.alpha * r.stump.predict_row(x, i);
            }
        }
        Ok(margins)
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<AdaPrediction> {
        if self.rounds.is_empty() {
            return Err(BoostError::EmptyModel);
        }
        let margins = self.margins_at(x, self.rounds.len())?;
        Ok(AdaPrediction { labels: margins.iter().map(|&m| sign(m)).collect(), margins })
    }

    /// Mean exponential loss `exp(−y F_m)` after m = 0, 1, …, M rounds.
    pub fn exponential_risk_path(&self, d: &Dataset) -> Result<Vec<f64>> {
        let y = binary_labels(d)?;
        let x = d.predictors();
        if x.ncols() != self.names.len() {
            return Err(BoostError::Dimension(format!("expected {} columns, got {}", self.names.len(), x.ncols())));
        }
        let mut f = vec![0.0; d.n()];
        let mut out = vec![Family::Exponential.empirical_risk(y, &f, None)?];
        for r in &self.rounds {
            for (i, fi) in f.iter_mut().enumerate() {
                *fi += r.alpha * r.stump.predict_row(x, i);
            }
            out.push(Family::Exponential.empirical_risk(y, &f, None)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn dataset(cols: &[Vec<f64>], y: Vec<f64>) -> Dataset {
        Dataset::from_columns(cols, Response::Binary(y)).unwrap()
    }

    fn noisy(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y = (0..n)
            .map(|i| {
                let s = cols[0][i] + cols[1 % p][i] * cols[0][i] + rng.random_range(-0.4..0.4);
                if s > 0.0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        dataset(&cols, y)
    }

    #[test]
    fn separable_data_stops_after_a_perfect_round() {
        let d = dataset(&[vec![1.0, 2.0, 3.0, 4.0]], vec![1.0, 1.0, -1.0, -1.0]);
        let model = fit_adaboost(&d, 10).unwrap();
        assert_eq!(model.rounds.len(), 1);
        assert_eq!(model.rounds[0].epsilon, 0.0);
        assert_eq!(model.termination, Termination::PerfectStump);
        let expected_alpha = 0.5 * ((1.0 - EPSILON_FLOOR) / EPSILON_FLOOR).ln();
        assert_eq!(model.rounds[0].alpha, expected_alpha);
        assert_eq!(model.predict(d.predictors()).unwrap().labels, vec![1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn first_round_on_eight_points() {
        let x: Vec<f64> = (1..=8).map(f64::from).collect();
        let y = vec![1.0, 1.0, 1.0, -1.0, -1.0, -1.0, 1.0, 1.0];
        let d = dataset(&[x], y);
        let model = fit_adaboost(&d, 1).unwrap();
        assert!((model.rounds[0].epsilon - 0.25).abs() < 1e-15);
        assert!((model.rounds[0].alpha - 0.5 * 3f64.ln()).abs() < 1e-14);
        assert_eq!(model.termination, Termination::Completed);
    }

    #[test]
    fn empty_model_refuses_to_predict() {
        let d = noisy(20, 2, 1);
        let model = fit_adaboost(&d, 0).unwrap();
        assert!(model.rounds.is_empty());
        assert!(matches!(model.predict(d.predictors()), Err(BoostError::EmptyModel)));
        assert_eq!(model.exponential_risk_path(&d).unwrap(), vec![1.0]);
    }

    #[test]
    fn single_class_is_rejected() {
        let d = dataset(&[vec![1.0, 2.0]], vec![1.0, 1.0]);
        assert!(matches!(fit_adaboost(&d, 3), Err(BoostError::SingleClass)));
        let c = Dataset::from_columns(&[vec![1.0, 2.0]], Response::Continuous(vec![1.0, 2.0])).unwrap();
        assert!(matches!(fit_adaboost(&c, 3), Err(BoostError::BinaryRequired)));
    }

    #[test]
    fn single_round_predicts_like_its_stump() {
        let d = noisy(30, 3, 2);
        let model = fit_adaboost(&d, 1).unwrap();
        let pred = model.predict(d.predictors()).unwrap();
        for i in 0..30 {
            assert_eq!(pred.labels[i], model.rounds[0].stump.predict_row(d.predictors(), i));
        }
    }

    #[test]
    fn doubling_alphas_scales_margins_only() {
        let d = noisy(40, 3, 3);
        let model = fit_adaboost(&d, 15).unwrap();
        let mut doubled = model.clone();
        for r in doubled.rounds.iter_mut() {
            r.alpha *= 2.0;
        }
        let a = model.predict(d.predictors()).unwrap();
        let b = doubled.predict(d.predictors()).unwrap();
        assert_eq!(a.labels, b.labels);
        for (x, y) in a.margins.iter().zip(&b.margins) {
            assert!((2.0 * x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_built_vote() {
        let stumps = [
            Stump { component: 0, threshold: 0.0, polarity: 1 },
            Stump { component: 1, threshold: 0.5, polarity: -1 },
            Stump { component: 0, threshold: 1.0, polarity: -1 },
        ];
        let alphas = [0.7, 0.4, 0.2];
        let model = AdaBoostModel {
            names: vec!["a".into(), "b".into()],
            rounds: stumps.iter().zip(alphas).map(|(s, a)| Round { stump: *s, alpha: a, epsilon: 0.2 }).collect(),
            termination: Termination::Completed,
        };
        let x = DMatrix::from_row_slice(4, 2, &[-1.0, 0.0, 0.5, 1.0, 2.0, 0.0, 0.0, 0.5]);
        // votes: row0 (−.7, +.4, +.2) row1 (+.7, −.4, +.2) row2 (+.7, +.4, −.2) row3 (+.7, −.4, +.2)
        let pred = model.predict(&x).unwrap();
        let expected = [-0.1, 0.5, 0.9, 0.5];
        for (m, e) in pred.margins.iter().zip(expected) {
            assert!((m - e).abs() < 1e-12);
        }
        assert_eq!(pred.labels, vec![-1.0, 1.0, 1.0, 1.0]);
        // a zero vote predicts +1
        let tied = AdaBoostModel { rounds: vec![model.rounds[0], Round { alpha: 0.7, ..model.rounds[2] }], ..model };
        let z = DMatrix::from_row_slice(1, 2, &[2.0, 0.0]);
        let p = tied.predict(&z).unwrap();
        assert_eq!(p.margins[0], 0.0);
        assert_eq!(p.labels[0], 1.0);
    }

    #[test]
    fn reweighting_invariants() {
        for seed in 0..20 {
            let d = noisy(50, 3, seed);
            let y = d.response().values().unwrap().to_vec();
            let (model, trace) = fit_adaboost_traced(&d, 30).unwrap();
            assert_eq!(trace.len(), model.rounds.len() + 1);
            for (m, r) in model.rounds.iter().enumerate() {
                let (before, after) = (&trace[m], &trace[m + 1]);
                assert!((after.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(after.iter().all(|&v| v > 0.0));
                assert!(r.epsilon < 0.5 && r.alpha > 0.0);
                let wrong: Vec<bool> = (0..50).map(|i| r.stump.predict_row(d.predictors(), i) != y[i]).collect();
                if r.epsilon > 0.0 {
                    let err: f64 = (0..50).filter(|&i| wrong[i]).map(|i| after[i]).sum();
                    assert!((err - 0.5).abs() < 1e-12, "seed {seed} round {m}: {err}");
                }
                for i in (0..50).filter(|&i| wrong[i]) {
                    for j in (0..50).filter(|&j| !wrong[j]) {
                        assert!(after[i] / after[j] > before[i] / before[j]);
                    }
                }
            }
            let risk = model.exponential_risk_path(&d).unwrap();
            assert_eq!(risk[0], 1.0);
            assert!(risk.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        }
    }

    #[test]
    fn risk_path_matches_exponential_family() {
        let d = noisy(40, 2, 9);
        let model = fit_adaboost(&d, 10).unwrap();
        let risk = model.exponential_risk_path(&d).unwrap();
        let y = d.response().values().unwrap();
        let f = model.predict(d.predictors()).unwrap().margins;
        let direct: f64 = y.iter().zip(&f).map(|(a, b)| (-a * b).exp()).sum::<f64>() / 40.0;
        assert!((risk.last().unwrap() - direct).abs() < 1e-12);
    }
}
