//! Subcommand implementations.

use std::path::Path;
use std::str::FromStr;

use boostkit::adaboost::{self, AdaBoostModel};
use boostkit::baselearners::{LearnerSpec, PSplineSpec};
use boostkit::data::{self, CsvOptions, Dataset, MissingPolicy, ResamplingScheme, ResponseSpec, SchemeKind};
use boostkit::gradboost::{self, BoostModel, ComponentModel, GradientConfig, Scale};
use boostkit::likboost::{self, BandTarget, GlmFamily, LikBoostModel, LikConfig, LikEngine, Penalty};
use boostkit::losses::Family;
use boostkit::model_file::{Metadata, ModelFile, Payload};
use boostkit::stopping::{self, FitConfig};
use boostkit::BoostError;
use nalgebra::DMatrix;

use crate::args::{CriterionArg, CvArgs, DataArgs, EffectsArgs, Engine, FitArgs, LearnerKind, ModelArgs, PredictArgs, ScaleArg, SimulateArgs};
use crate::tsv::{num, write_file, Table};
use crate::{CliError, CliResult};

const DEFAULT_NU: f64 = 0.1;

fn arg_err(msg: impl Into<String>) -> CliError {
    CliError::Argument(msg.into())
}

fn parse_missing(s: &str) -> CliResult<MissingPolicy> {
    MissingPolicy::from_str(s).map_err(|_| arg_err(format!("--missing: expected reject or median, got '{s}'")))
}

fn gradient_family(m: &ModelArgs) -> CliResult<Family> {
    let name = m.family.as_deref().unwrap_or("l2");
    let family = Family::from_str(name).map_err(|_| arg_err(format!("--family: unknown gradient family '{name}'")))?;
    Ok(match (family, m.huber_delta) {
        (Family::Huber { .. }, Some(delta)) => {
            if !(delta > 0.0) {
                return Err(arg_err("--huber-delta must be positive"));
            }
            Family::Huber { delta: Some(delta) }
        }
        (_, Some(_)) => return Err(arg_err("--huber-delta applies to the huber family only")),
        (f, None) => f,
    })
}

fn glm_family(m: &ModelArgs) -> CliResult<GlmFamily> {
    let name = m.family.as_deref().unwrap_or("gaussian");
    GlmFamily::from_str(name).map_err(|_| arg_err(format!("--family: unknown likelihood family '{name}'")))
}

fn response_spec(d: &DataArgs, m: &ModelArgs) -> CliResult<ResponseSpec> {
    let named = |what: &str| {
        d.response.clone().ok_or_else(|| arg_err(format!("--response is required for {what}")))
    };
    Ok(match m.engine {
        Engine::LikelihoodCox => match (&d.time, &d.status) {
            (Some(time), Some(status)) => ResponseSpec::Survival { time: time.clone(), status: status.clone() },
            _ => return Err(arg_err("--time and --status are required for the likelihood-cox engine")),
        },
        Engine::Adaboost => ResponseSpec::Binary(named("adaboost")?),
        Engine::Gradient => {
            if gradient_family(m)?.is_binary() {
                ResponseSpec::Binary(named("binary families")?)
            } else {
                ResponseSpec::Continuous(named("the gradient engine")?)
            }
        }
        Engine::LikelihoodGlm => match glm_family(m)? {
            GlmFamily::Logistic => ResponseSpec::Binary(named("logistic models")?),
            _ => ResponseSpec::Continuous(named("likelihood-glm")?),
        },
    })
}

fn load_dataset(d: &DataArgs, m: &ModelArgs) -> CliResult<Dataset> {
    let spec = response_spec(d, m)?;
    let options = CsvOptions { missing: parse_missing(&d.missing)?, predictors: d.predictors.clone() };
    let mut dataset = data::load_csv(&d.data, &spec, &options)?;
    if !m.unpenalized.is_empty() {
        if !matches!(m.engine, Engine::LikelihoodCox | Engine::LikelihoodGlm) {
            return Err(arg_err("--unpenalized applies to the likelihood engines only"));
        }
        dataset = dataset.with_unpenalized_names(&m.unpenalized)?;
    }
    Ok(dataset)
}

fn learner_spec(kind: LearnerKind, df: f64) -> LearnerSpec {
    match kind {
        LearnerKind::Linear => LearnerSpec::Linear,
        LearnerKind::Pspline => LearnerSpec::PSpline(PSplineSpec { df, ..PSplineSpec::default() }),
    }
}

fn gradient_config(d: &Dataset, m: &ModelArgs, m_stop: usize) -> CliResult<GradientConfig> {
    let mut cfg = GradientConfig::uniform(gradient_family(m)?, learner_spec(m.learner, m.df), d.p());
    for pair in &m.learner_overrides {
        let (name, kind) = pair
            .rsplit_once(':')
            .ok_or_else(|| arg_err(format!("--learner-override: expected name:learner, got '{pair}'")))?;
        let kind = match kind {
            "linear" => LearnerKind::Linear,
            "pspline" => LearnerKind::Pspline,
            other => return Err(arg_err(format!("--learner-override: unknown learner '{other}'"))),
        };
        let j = d.column_index(name).ok_or_else(|| BoostError::MissingColumn(name.to_string()))?;
        cfg.learners[j] = learner_spec(kind, m.df);
    }
    cfg.m_stop = m_stop;
    cfg.step = m.sl;
    cfg.standardize = m.standardize;
    Ok(cfg)
}

fn lik_config(m: &ModelArgs, m_stop: usize) -> CliResult<LikConfig> {
    let engine = match m.engine {
        Engine::LikelihoodCox => LikEngine::Cox,
        _ => LikEngine::Glm(glm_family(m)?),
    };
    let penalty = match (m.lambda, m.nu) {
        (Some(l), _) => Penalty::Lambda(l),
        (None, nu) => Penalty::StepSize(nu.unwrap_or(DEFAULT_NU)),
    };
    Ok(LikConfig { engine, penalty, m_stop, standardize: m.standardize })
}

fn fit_config(d: &Dataset, m: &ModelArgs, m_stop: usize) -> CliResult<FitConfig> {
    Ok(match m.engine {
        Engine::Gradient => FitConfig::Gradient(gradient_config(d, m, m_stop)?),
        Engine::Adaboost => FitConfig::AdaBoost,
        Engine::LikelihoodGlm | Engine::LikelihoodCox => FitConfig::Likelihood(lik_config(m, m_stop)?),
    })
}

fn fit_payload(d: &Dataset, m: &ModelArgs, m_stop: usize) -> CliResult<Payload> {
    Ok(match fit_config(d, m, m_stop)? {
        FitConfig::Gradient(cfg) => Payload::Gradient(gradboost::fit(d, &cfg)?),
        FitConfig::Likelihood(cfg) => Payload::Likelihood(likboost::fit(d, &cfg)?),
        FitConfig::AdaBoost => Payload::AdaBoost(adaboost::fit_adaboost(d, m_stop)?),
    })
}

fn invocation() -> Vec<String> {
    std::env::args().collect()
}

/// Evenly spaced points over the observed range of a column.
fn column_grid(values: &[f64], points: usize) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if points <= 1 || lo == hi {
        return vec![lo];
    }
    (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect()
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

/// Intercept plus the terms that entered the model.
fn coefficient_table(intercept: Option<f64>, names: &[String], coefs: &[f64], entered: &[bool]) -> Table {
    let mut t = Table::new(&["term", "coefficient"]);
    if let Some(b0) = intercept {
        t.row(["(Intercept)".to_string(), num(b0)]);
    }
    for ((name, c), _) in names.iter().zip(coefs).zip(entered).filter(|(_, e)| **e) {
        t.row([name.clone(), num(*c)]);
    }
    t
}

fn fitted_table(values: &[f64]) -> Table {
    let mut t = Table::new(&["row", "fitted"]);
    for (i, v) in values.iter().enumerate() {
        t.row([(i + 1).to_string(), num(*v)]);
    }
    t
}

fn gradient_effects(model: &BoostModel, x: &DMatrix<f64>, only: Option<&[usize]>, points: usize, at_m: Option<usize>, dir: &Path) -> CliResult<()> {
    for j in 0..model.p() {
        if only.is_some_and(|o| !o.contains(&j)) || matches!(model.components[j], ComponentModel::Excluded) {
            continue;
        }
        let col: Vec<f64> = x.column(j).iter().copied().collect();
        let pe = model.partial_effect(j, &column_grid(&col, points), at_m)?;
        let mut t = Table::new(&["x", "effect"]);
        for (g, e) in pe.grid.iter().zip(&pe.effect) {
            t.row([num(*g), num(*e)]);
        }
        t.write(&dir.join(format!("{}.tsv", file_stem(&model.names[j]))))?;
        if !pe.selected {
            println!("component {} not selected", model.names[j]);
        }
    }
    Ok(())
}

fn glm_bands(model: &LikBoostModel, d: &Dataset, only: Option<&[usize]>, points: usize, at_m: Option<usize>, dir: &Path) -> CliResult<()> {
    for j in 0..model.p() {
        if only.is_some_and(|o| !o.contains(&j)) {
            continue;
        }
        let bands = model.confidence_bands(d, BandTarget::Component(j), &column_grid(d.column(j), points), at_m)?;
        let mut t = Table::new(&["x", "estimate", "lower", "upper"]);
        for r in &bands.rows {
            t.row([num(r.value), num(r.estimate), num(r.lower), num(r.upper)]);
        }
        t.write(&dir.join(format!("{}.tsv", file_stem(&model.names[j]))))?;
        if !bands.selected {
            println!("component {} not selected", model.names[j]);
        }
    }
    Ok(())
}

fn write_fit_outputs(out: &Path, payload: Payload, d: &Dataset, seed: u64) -> CliResult<()> {
    std::fs::create_dir_all(out).map_err(|source| BoostError::Io { path: out.display().to_string(), source })?;
    match &payload {
        Payload::Gradient(model) => {
            let mut risk = Table::new(&["m", "risk"]);
            for (m, r) in model.risk.iter().enumerate() {
                risk.row([m.to_string(), num(*r)]);
            }
            risk.write(&out.join("risk_path.tsv"))?;
            fitted_table(model.training_fit().expect("fresh fit")).write(&out.join("fitted.tsv"))?;
            let has_splines = model.components.iter().any(|c| matches!(c, ComponentModel::PSpline { .. }));
            if has_splines {
                gradient_effects(model, d.predictors(), None, 100, None, &out.join("effects"))?;
            } else {
                let c = model.aggregate_coefficients(None)?;
                let entered: Vec<bool> = model.selection_counts(model.m_stop()).iter().map(|k| *k > 0).collect();
                coefficient_table(Some(c.intercept), &model.names, &c.coefficients, &entered)
                    .write(&out.join("coefficients.tsv"))?;
            }
        }
        Payload::Likelihood(model) => {
            let mut risk = match model.engine {
                LikEngine::Glm(_) => Table::new(&["m", "deviance", "df"]),
                LikEngine::Cox => Table::new(&["m", "partial_loglik"]),
            };
            for (m, c) in model.criterion.iter().enumerate() {
                let mut row = vec![m.to_string(), num(*c)];
                if let Some(df) = model.df.get(m) {
                    row.push(num(*df));
                }
                risk.row(row);
            }
            risk.write(&out.join("risk_path.tsv"))?;
            fitted_table(model.training_eta().expect("fresh fit")).write(&out.join("fitted.tsv"))?;
            let c = model.coefficients(None)?;
            let intercept = matches!(model.engine, LikEngine::Glm(_)).then_some(c.intercept);
            let mut entered: Vec<bool> = (0..model.p()).map(|j| model.unpenalized.contains(&j)).collect();
            for step in &model.path {
                entered[step.component] = true;
            }
            coefficient_table(intercept, &model.names, &c.coefficients, &entered).write(&out.join("coefficients.tsv"))?;
            if model.engine == LikEngine::Cox {
                let mut trace = Table::new(&["step", "component"]);
                for (m, name) in model.selected_names().iter().enumerate() {
                    println!("step {}: {name}", m + 1);
                    trace.row([(m + 1).to_string(), name.to_string()]);
                }
                trace.write(&out.join("trace.tsv"))?;
            }
        }
        Payload::AdaBoost(model) => {
            let mut risk = Table::new(&["m", "exponential_risk"]);
            for (m, r) in model.exponential_risk_path(d)?.iter().enumerate() {
                risk.row([m.to_string(), num(*r)]);
            }
            risk.write(&out.join("risk_path.tsv"))?;
            write_rounds(model, &out.join("rounds.tsv"))?;
            if !model.rounds.is_empty() {
                fitted_table(&model.predict(d.predictors())?.margins).write(&out.join("fitted.tsv"))?;
            }
            println!("termination: {:?}", model.termination);
        }
    }
    let file = ModelFile::new(payload, Metadata::new(Some(seed), invocation(), d.label_map().cloned()));
    let path = out.join("model.json");
    file.save(&path)?;
    println!("model written to {}", path.display());
    Ok(())
}

fn write_rounds(model: &AdaBoostModel, path: &Path) -> CliResult<()> {
    let mut t = Table::new(&["round", "component", "threshold", "polarity", "alpha", "epsilon"]);
    for (m, r) in model.rounds.iter().enumerate() {
        t.row([
            (m + 1).to_string(),
            model.names[r.stump.component].clone(),
            num(r.stump.threshold),
            r.stump.polarity.to_string(),
            num(r.alpha),
            num(r.epsilon),
        ]);
    }
    Ok(t.write(path)?)
}

pub fn fit(a: &FitArgs) -> CliResult<()> {
    let d = load_dataset(&a.data, &a.model)?;
    let payload = fit_payload(&d, &a.model, a.model.mstop)?;
    write_fit_outputs(&a.out, payload, &d, a.model.seed)
}

pub fn predict(a: &PredictArgs) -> CliResult<()> {
    let file = ModelFile::load(&a.model)?;
    let x = data::load_predictors(&a.data, file.payload.names(), parse_missing(&a.missing)?)?;
    let scale = match a.scale {
        ScaleArg::Link => Scale::Link,
        ScaleArg::Response => Scale::Response,
    };
    let mut text = String::new();
    match &file.payload {
        Payload::Gradient(model) => {
            let pred = model.predict(&x, a.at_m, scale)?;
            let flagged = pred.extrapolated.iter().filter(|e| **e).count();
            if flagged > 0 {
                log::warn!("{flagged} rows lie outside the training range of a spline component");
            }
            text.push_str("prediction\n");
            for v in pred.values {
                text.push_str(&num(v));
                text.push('\n');
            }
        }
        Payload::Likelihood(model) => {
            text.push_str("prediction\n");
            for v in model.predict(&x, a.at_m, scale)? {
                text.push_str(&num(v));
                text.push('\n');
            }
        }
        Payload::AdaBoost(model) => {
            let model = match a.at_m {
                Some(m) if m > model.rounds.len() => {
                    return Err(BoostError::IterationOutOfRange { requested: m, max: model.rounds.len() }.into())
                }
                Some(m) => AdaBoostModel { rounds: model.rounds[..m].to_vec(), ..model.clone() },
                None => model.clone(),
            };
            let pred = model.predict(&x)?;
            text.push_str("prediction,margin\n");
            for (l, m) in pred.labels.iter().zip(&pred.margins) {
                text.push_str(&format!("{},{}\n", num(*l), num(*m)));
            }
        }
    }
    match &a.out {
        Some(path) => Ok(write_file(path, &text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_grid(spec: Option<&str>, mstop: usize) -> CliResult<Vec<usize>> {
    let Some(spec) = spec else {
        return Ok((1..=mstop.max(1)).collect());
    };
    let bad = || arg_err(format!("--grid: expected FROM:TO[:STRIDE], got '{spec}'"));
    let parts: Vec<usize> = spec.split(':').map(|p| p.parse::<usize>().map_err(|_| bad())).collect::<CliResult<_>>()?;
    let (from, to, stride) = match parts[..] {
        [from, to] => (from, to, 1),
        [from, to, stride] if stride > 0 => (from, to, stride),
        _ => return Err(bad()),
    };
    if from > to || to == 0 {
        return Err(bad());
    }
    let mut grid: Vec<usize> = (from..=to).step_by(stride).collect();
    if grid.last() != Some(&to) {
        grid.push(to);
    }
    Ok(grid)
}

pub fn cv(a: &CvArgs) -> CliResult<()> {
    let d = load_dataset(&a.data, &a.model)?;
    let grid = parse_grid(a.grid.as_deref(), a.model.mstop)?;
    let max = *grid.last().expect("grid is nonempty");
    std::fs::create_dir_all(&a.out).map_err(|source| BoostError::Io { path: a.out.display().to_string(), source })?;
    let selected = match a.criterion {
        CriterionArg::Resampling => {
            let kind = SchemeKind::from_str(&a.scheme).map_err(|e| arg_err(format!("--scheme: {e}")))?;
            let scheme = ResamplingScheme { kind, stratified: a.stratified, seed: a.model.seed };
            let config = fit_config(&d, &a.model, max)?;
            let report = stopping::cv_risk(&d, &config, &scheme, &grid)?;
            let header: Vec<String> = std::iter::once("resample".to_string()).chain(grid.iter().map(|m| m.to_string())).collect();
            let mut t = Table::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
            for (k, row) in report.resamples.iter().zip(&report.risk) {
                t.row(std::iter::once((k + 1).to_string()).chain(row.iter().map(|v| num(*v))));
            }
            t.row(std::iter::once("mean".to_string()).chain(report.mean.iter().map(|v| num(*v))));
            t.write(&a.out.join("cv.tsv"))?;
            report.selected
        }
        CriterionArg::Aicc | CriterionArg::Bic => {
            if a.model.engine != Engine::Gradient {
                return Err(arg_err("--criterion aicc/bic requires the gradient engine"));
            }
            let model = gradboost::fit(&d, &gradient_config(&d, &a.model, max)?)?;
            let path = if a.criterion == CriterionArg::Aicc {
                stopping::aic_corrected(&model, &d, &grid)?
            } else {
                stopping::bic_path(&model, &d, &grid)?
            };
            let mut t = Table::new(&["m", "df", "value"]);
            for ((m, df), v) in path.grid.iter().zip(&path.df).zip(&path.values) {
                t.row([m.to_string(), num(*df), v.map_or_else(|| "NA".to_string(), num)]);
            }
            t.write(&a.out.join("cv.tsv"))?;
            path.selected
        }
    };
    println!("selected_mstop={selected}");
    if a.refit {
        let payload = fit_payload(&d, &a.model, selected)?;
        write_fit_outputs(&a.out, payload, &d, a.model.seed)?;
    }
    Ok(())
}

fn component_indices(names: &[String], wanted: Option<&Vec<String>>) -> CliResult<Option<Vec<usize>>> {
    wanted
        .map(|w| {
            w.iter()
                .map(|n| names.iter().position(|m| m == n).ok_or_else(|| BoostError::MissingColumn(n.clone()).into()))
                .collect::<CliResult<Vec<usize>>>()
        })
        .transpose()
}

pub fn effects(a: &EffectsArgs) -> CliResult<()> {
    if a.points == 0 {
        return Err(arg_err("--points must be positive"));
    }
    let file = ModelFile::load(&a.model)?;
    let names = file.payload.names().to_vec();
    let only = component_indices(&names, a.component.as_ref())?;
    let missing = parse_missing(&a.data.missing)?;
    match &file.payload {
        Payload::Gradient(model) => {
            let x = data::load_predictors(&a.data.data, &names, missing)?;
            gradient_effects(model, &x, only.as_deref(), a.points, a.at_m, &a.out)
        }
        Payload::Likelihood(model) => {
            let LikEngine::Glm(family) = model.engine else {
                return Err(BoostError::Unsupported("effects with bands are available for likelihood-glm models only".into()).into());
            };
            let response = a.data.response.clone().ok_or_else(|| arg_err("--response is required for likelihood bands"))?;
            let spec = match family {
                GlmFamily::Logistic => ResponseSpec::Binary(response),
                _ => ResponseSpec::Continuous(response),
            };
            let d = data::load_csv(&a.data.data, &spec, &CsvOptions { missing, predictors: Some(names.clone()) })?;
            glm_bands(model, &d, only.as_deref(), a.points, a.at_m, &a.out)
        }
        Payload::AdaBoost(_) => Err(BoostError::Unsupported("AdaBoost models have no partial effects".into()).into()),
    }
}

pub fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let sim = stopping::simulate_nonlinear(a.n, a.seed)?;
    let x = sim.data.column(0);
    let y = sim.data.response().values().expect("continuous response");
    let mut text = String::from("x,y\n");
    for (xi, yi) in x.iter().zip(y) {
        text.push_str(&format!("{},{}\n", num(*xi), num(*yi)));
    }
    write_file(&a.out, &text)?;
    if let Some(path) = &a.truth {
        let mut t = Table::new(&["x", "truth"]);
        for (xi, ti) in x.iter().zip(&sim.truth) {
            t.row([num(*xi), num(*ti)]);
        }
        t.write(path)?;
    }
    Ok(())
}
