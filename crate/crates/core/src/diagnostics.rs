//! Effective sample size, absolute-error tables, leave-one-out
//! cross-validation and the simulation benchmark harness.

use std::fmt::{self, Write as _};
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    fit_blr, fit_pls, predict_blr, predict_pls, BlrPrior, DEFAULT_PLS_COMPONENTS,
};
use crate::error::{Error, Result};
use crate::model::{Dataset, HyperOptions, PosteriorChain};
use crate::predict::{prepare_new_biomarkers, sample_predictive, PredictOptions};
use crate::sampler::{fit_model, SamplerConfig};
use crate::simulate::{generate_scenario, ScenarioConfig};
use crate::stats::{median, quantile_sorted, sorted_copy, RngStream};

pub const MIN_ESS_DRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ess {
    pub value: f64,
    /// Set when the chain is constant; `value` is then the chain length.
    pub degenerate: bool,
}

fn autocov(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    x[..n - lag]
        .iter()
        .zip(&x[lag..])
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / n as f64
}

/// Geyer's initial monotone positive sequence estimator, capped at the chain
/// length.
pub fn effective_sample_size(draws: &[f64]) -> Result<Ess> {
    let n = draws.len();
    if n < MIN_ESS_DRAWS {
        return Err(Error::Parameter(format!(
            "ESS needs at least {MIN_ESS_DRAWS} draws, got {n}"
        )));
    }
    if draws.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter(
            "ESS of a chain with non-finite draws".into(),
        ));
    }
    let m = draws.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = draws.iter().map(|v| v - m).collect();
    let c0 = autocov(&x, 0);
    let spread = draws.iter().fold(0.0f64, |a, v| a.max((v - m).abs()));
    if c0 <= 0.0 || spread <= 1e-13 * m.abs() {
        return Ok(Ess {
            value: n as f64,
            degenerate: true,
        });
    }
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = (autocov(&x, 2 * k) + autocov(&x, 2 * k + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    Ok(Ess {
        value: (n as f64 / tau).min(n as f64),
        degenerate: false,
    })
}

/// Median absolute error and the width of the central 95% interval of the
/// absolute errors.
pub fn error_summary(true_z: &[f64], est_z: &[f64]) -> Result<(f64, f64)> {
    if true_z.len() != est_z.len() {
        return Err(Error::Dimension {
            what: "error summary inputs",
            expected: true_z.len(),
            found: est_z.len(),
        });
    }
    if true_z.is_empty() {
        return Err(Error::Parameter("error summary of no observations".into()));
    }
    let abs: Vec<f64> = true_z
        .iter()
        .zip(est_z)
        .map(|(t, e)| (t - e).abs())
        .collect();
    let s = sorted_copy(&abs);
    Ok((
        quantile_sorted(&s, 0.5),
        quantile_sorted(&s, 0.975) - quantile_sorted(&s, 0.025),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "MM")]
    MultiMarker,
    #[serde(rename = "BLR")]
    Blr,
    #[serde(rename = "PLS")]
    Pls,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::MultiMarker, Method::Blr, Method::Pls];

    pub fn label(self) -> &'static str {
        match self {
            Method::MultiMarker => "MM",
            Method::Blr => "BLR",
            Method::Pls => "PLS",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mm" | "multimarker" => Ok(Method::MultiMarker),
            "blr" => Ok(Method::Blr),
            "pls" => Ok(Method::Pls),
            _ => Err(Error::Usage(format!(
                "unknown method '{s}' (expected multimarker, blr or pls)"
            ))),
        }
    }
}

/// E: latent intakes of the training data; I: intakes inferred for test data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    E,
    I,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub study: String,
    pub scenario: String,
    pub method: Method,
    pub phase: Phase,
    pub median: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn push(
        &mut self,
        study: &str,
        scenario: &str,
        method: Method,
        phase: Phase,
        (median, width): (f64, f64),
    ) {
        debug_assert!(width >= 0.0);
        self.rows.push(ErrorRow {
            study: study.into(),
            scenario: scenario.into(),
            method,
            phase,
            median,
            width,
        });
    }

    pub fn get(&self, method: Method, phase: Phase) -> Option<&ErrorRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.phase == phase)
    }

    pub fn extend(&mut self, other: ErrorTable) {
        self.rows.extend(other.rows);
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["study", "scenario", "method", "phase", "median", "width95"])?;
        for r in &self.rows {
            out.write_record([
                r.study.clone(),
                r.scenario.clone(),
                r.method.to_string(),
                format!("{:?}", r.phase),
                r.median.to_string(),
                r.width.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Method/phase rows against study/scenario columns, cells as
    /// `median(width)` rounded to grams.
    pub fn to_text(&self) -> String {
        let mut cols: Vec<(String, String)> = Vec::new();
        for r in &self.rows {
            let key = (r.study.clone(), r.scenario.clone());
            if !cols.contains(&key) {
                cols.push(key);
            }
        }
        let mut keys: Vec<(Method, Phase)> =
            self.rows.iter().map(|r| (r.method, r.phase)).collect();
        keys.sort();
        keys.dedup();
        let mut grid = vec![std::iter::once("Model".to_string())
            .chain(std::iter::once(String::new()))
            .chain(cols.iter().map(|(st, sc)| format!("{st}/{sc}")))
            .collect::<Vec<_>>()];
        for &(m, ph) in &keys {
            let mut line = vec![m.to_string(), format!("{ph:?}")];
            for (st, sc) in &cols {
                let cell = self
                    .rows
                    .iter()
                    .find(|r| r.method == m && r.phase == ph && &r.study == st && &r.scenario == sc)
                    .map(|r| format!("{:.0}({:.0})", r.median, r.width))
                    .unwrap_or_else(|| "-".into());
                line.push(cell);
            }
            grid.push(line);
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|j| grid.iter().map(|l| l[j].len()).max().unwrap_or(0))
            .collect();
        let mut s = String::new();
        for line in &grid {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect();
            let _ = writeln!(s, "{}", cells.join("  ").trim_end());
        }
        s
    }
}

/// Options shared by the cross-validation driver and the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    pub hyper: HyperOptions,
    pub sampler: SamplerConfig,
    pub scale: bool,
    pub blr_prior_scale: f64,
    pub pls_components: usize,
    pub stochastic_allocation: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            hyper: HyperOptions::default(),
            sampler: SamplerConfig::default(),
            scale: false,
            blr_prior_scale: BlrPrior::default().scale,
            pls_components: DEFAULT_PLS_COMPONENTS,
            stochastic_allocation: false,
        }
    }
}

/// One held-out observation. `difference` is the inferred median minus the
/// administered dose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoocvRow {
    pub index: usize,
    pub dose: f64,
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseSummary {
    pub dose: f64,
    pub n: usize,
    pub median_abs_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoocvReport {
    pub method: Method,
    pub rows: Vec<LoocvRow>,
    pub per_dose: Vec<DoseSummary>,
    /// Median difference with the 2.5% and 97.5% quantiles of the differences.
    pub overall: (f64, f64, f64),
}

pub const LOOCV_HEADER: [&str; 7] = [
    "index",
    "dose",
    "median",
    "ci_low",
    "ci_high",
    "difference",
    "method",
];
pub const LOOCV_DOSE_HEADER: [&str; 4] = ["dose", "n", "median_abs_difference", "method"];

impl LoocvReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(LOOCV_HEADER)?;
        for r in &self.rows {
            out.write_record([
                (r.index + 1).to_string(),
                r.dose.to_string(),
                r.median.to_string(),
                r.ci_low.to_string(),
                r.ci_high.to_string(),
                r.difference.to_string(),
                self.method.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Per-dose medians followed by an `all` row carrying the overall median
    /// absolute difference.
    pub fn write_dose_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(LOOCV_DOSE_HEADER)?;
        for s in &self.per_dose {
            out.write_record([
                s.dose.to_string(),
                s.n.to_string(),
                s.median_abs_difference.to_string(),
                self.method.to_string(),
            ])?;
        }
        let abs: Vec<f64> = self.rows.iter().map(|r| r.difference.abs()).collect();
        out.write_record([
            "all".into(),
            abs.len().to_string(),
            median(&abs).to_string(),
            self.method.to_string(),
        ])?;
        out.flush()?;
        Ok(())
    }
}

fn summarize_folds(
    method: Method,
    data: &Dataset,
    doses: &[f64],
    preds: Vec<(f64, f64, f64)>,
) -> LoocvReport {
    let rows: Vec<LoocvRow> = preds
        .into_iter()
        .enumerate()
        .map(|(i, (med, lo, hi))| LoocvRow {
            index: i,
            dose: doses[i],
            median: med,
            ci_low: lo,
            ci_high: hi,
            difference: med - doses[i],
        })
        .collect();
    let per_dose = data
        .levels()
        .iter()
        .filter_map(|&x| {
            let abs: Vec<f64> = rows
                .iter()
                .filter(|r| r.dose == x)
                .map(|r| r.difference.abs())
                .collect();
            (!abs.is_empty()).then(|| DoseSummary {
                dose: x,
                n: abs.len(),
                median_abs_difference: median(&abs),
            })
        })
        .collect();
    let s = sorted_copy(&rows.iter().map(|r| r.difference).collect::<Vec<_>>());
    let overall = (
        quantile_sorted(&s, 0.5),
        quantile_sorted(&s, 0.025),
        quantile_sorted(&s, 0.975),
    );
    LoocvReport {
        method,
        rows,
        per_dose,
        overall,
    }
}

/// Refit on all but observation i and infer its intake from its biomarkers.
/// Each fold derives its own hyperparameters and scaling and uses a seed
/// derived from the configured one, so results do not depend on the order in
/// which folds run.
pub fn loocv(data: &Dataset, method: Method, opts: &EvalOptions) -> Result<LoocvReport> {
    let doses = data
        .doses()
        .ok_or_else(|| Error::Usage("cross-validation needs a dose column".into()))?
        .to_vec();
    let n = data.n();
    if n < 2 {
        return Err(Error::Usage(
            "cross-validation needs at least two observations".into(),
        ));
    }
    let preds: Vec<(f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let keep: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let train = data.select(&keep);
            let held = data.select(&[i]);
            fold_prediction(
                &train,
                held.y(),
                method,
                opts,
                RngStream::derive_seed(opts.sampler.seed, i as u64),
            )
        })
        .collect::<Result<_>>()?;
    Ok(summarize_folds(method, data, &doses, preds))
}

fn fold_prediction(
    train: &Dataset,
    y_star: &nalgebra::DMatrix<f64>,
    method: Method,
    opts: &EvalOptions,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    match method {
        Method::MultiMarker => {
            let cfg = SamplerConfig {
                seed,
                store_latent: false,
                ..opts.sampler.clone()
            };
            let chain = fit_model(train, &opts.hyper, &cfg, opts.scale)?;
            let ys = prepare_new_biomarkers(y_star, &chain)?;
            let popts = PredictOptions {
                seed,
                stochastic_allocation: opts.stochastic_allocation,
            };
            let r = sample_predictive(&ys, &chain, &popts)?.remove(0);
            Ok((r.median, r.ci95.0, r.ci95.1))
        }
        Method::Blr => {
            let r = predict_blr(&fit_blr(train, opts.blr_prior_scale)?, y_star)?[0];
            Ok((r.median, r.ci95.0, r.ci95.1))
        }
        Method::Pls => {
            let r = predict_pls(train, opts.pls_components, y_star)?[0];
            Ok((r.median, r.ci95.0, r.ci95.1))
        }
    }
}

/// Posterior median and 95% interval width per parameter dimension, with
/// σ_p and θ_d reported as standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRow {
    pub dimension: usize,
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    pub sigma: (f64, f64),
    pub theta: Option<(f64, f64)>,
}

pub const PARAMETER_HEADER: [&str; 9] = [
    "dimension",
    "alpha",
    "alpha_width",
    "beta",
    "beta_width",
    "sigma",
    "sigma_width",
    "theta",
    "theta_width",
];

fn median_width(xs: &[f64]) -> (f64, f64) {
    let s = sorted_copy(xs);
    (
        quantile_sorted(&s, 0.5),
        quantile_sorted(&s, 0.975) - quantile_sorted(&s, 0.025),
    )
}

pub fn parameter_table(chain: &PosteriorChain) -> Result<Vec<ParameterRow>> {
    if chain.is_empty() {
        return Err(Error::Usage("parameter summary of an empty chain".into()));
    }
    let (p, d) = (chain.p(), chain.d());
    let col =
        |f: &dyn Fn(&crate::model::Params) -> f64| chain.draws.iter().map(f).collect::<Vec<_>>();
    Ok((0..p.max(d))
        .map(|k| ParameterRow {
            dimension: k + 1,
            alpha: if k < p {
                median_width(&col(&|q| q.alpha[k]))
            } else {
                (f64::NAN, f64::NAN)
            },
            beta: if k < p {
                median_width(&col(&|q| q.beta[k]))
            } else {
                (f64::NAN, f64::NAN)
            },
            sigma: if k < p {
                median_width(&col(&|q| q.sigma2[k].sqrt()))
            } else {
                (f64::NAN, f64::NAN)
            },
            theta: (k < d).then(|| median_width(&col(&|q| q.theta2[k].sqrt()))),
        })
        .collect())
}

pub fn write_parameter_csv<W: Write>(rows: &[ParameterRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(PARAMETER_HEADER)?;
    let cell = |v: f64| {
        if v.is_nan() {
            String::new()
        } else {
            v.to_string()
        }
    };
    for r in rows {
        let (t, tw) = r.theta.unwrap_or((f64::NAN, f64::NAN));
        out.write_record([
            r.dimension.to_string(),
            cell(r.alpha.0),
            cell(r.alpha.1),
            cell(r.beta.0),
            cell(r.beta.1),
            cell(r.sigma.0),
            cell(r.sigma.1),
            cell(t),
            cell(tw),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Minimum, median and maximum ESS over the components of each parameter
/// group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssRow {
    pub group: String,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub degenerate: usize,
}

pub const ESS_HEADER: [&str; 5] = ["parameter", "min", "median", "max", "degenerate"];

pub fn ess_summary(chain: &PosteriorChain) -> Result<Vec<EssRow>> {
    let groups = [
        "mu_alpha",
        "mu_beta",
        "sigma_beta2",
        "alpha",
        "beta",
        "sigma2",
        "theta2",
        "z",
        "gamma",
        "eta",
    ];
    let mut series: Vec<(&str, Vec<f64>)> = Vec::new();
    for name in chain.param_columns() {
        let group = name
            .rsplit_once('_')
            .filter(|(_, k)| k.parse::<usize>().is_ok())
            .map(|(g, _)| g)
            .unwrap_or(&name);
        if let (Some(g), Some(tr)) = (groups.iter().find(|g| **g == group), chain.trace(&name)) {
            series.push((g, tr));
        }
    }
    if let Some(lat) = &chain.latent {
        for i in 0..chain.n_obs {
            series.push(("z", lat.iter().map(|l| l.z[i]).collect()));
        }
    }
    let mut rows = Vec::new();
    for g in groups {
        let mut vals = Vec::new();
        let mut degenerate = 0;
        for (_, tr) in series.iter().filter(|(name, _)| *name == g) {
            let e = effective_sample_size(tr)?;
            degenerate += e.degenerate as usize;
            vals.push(e.value);
        }
        if vals.is_empty() {
            continue;
        }
        let s = sorted_copy(&vals);
        rows.push(EssRow {
            group: g.into(),
            min: s[0],
            median: quantile_sorted(&s, 0.5),
            max: s[s.len() - 1],
            degenerate,
        });
    }
    Ok(rows)
}

pub fn write_ess_csv<W: Write>(rows: &[EssRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(ESS_HEADER)?;
    for r in rows {
        out.write_record([
            r.group.clone(),
            r.min.to_string(),
            r.median.to_string(),
            r.max.to_string(),
            r.degenerate.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub scenario: ScenarioConfig,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub eval: EvalOptions,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            scenario: ScenarioConfig::default(),
            replicates: 5,
            methods: Method::ALL.to_vec(),
            eval: EvalOptions::default(),
        }
    }
}

/// Absolute errors pooled across replicates for one method.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PooledErrors {
    pub estimated: Vec<f64>,
    pub inferred: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub table: ErrorTable,
    pub errors: Vec<(Method, PooledErrors)>,
}

fn abs_errors(truth: &[f64], est: &[f64]) -> Vec<f64> {
    truth.iter().zip(est).map(|(t, e)| (t - e).abs()).collect()
}

/// Replicate r is generated with a seed derived from the scenario seed and
/// r. MM estimates are posterior medians of the training latent intakes; BLR
/// and PLS estimates are their predictions at the training biomarkers.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.replicates == 0 {
        return Err(Error::Usage(
            "benchmark needs at least one replicate".into(),
        ));
    }
    if cfg.methods.is_empty() {
        return Err(Error::Usage("benchmark needs at least one method".into()));
    }
    cfg.scenario.validate()?;
    let per_rep: Vec<Vec<(Method, Vec<f64>, Vec<f64>)>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let seed = RngStream::derive_seed(cfg.scenario.seed, r as u64);
            let sim = generate_scenario(&ScenarioConfig {
                seed,
                ..cfg.scenario.clone()
            })?;
            cfg.methods
                .iter()
                .map(|&m| {
                    let (e, i) = replicate_estimates(&sim.train, &sim.test, m, &cfg.eval, seed)?;
                    Ok((
                        m,
                        abs_errors(&sim.truth.train_z, &e),
                        abs_errors(&sim.truth.test_z, &i),
                    ))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let study = format!("{:?}", cfg.scenario.study);
    let scenario = format!("{:?}", cfg.scenario.variance_scenario);
    let mut table = ErrorTable::default();
    let mut errors = Vec::new();
    for &m in &cfg.methods {
        let mut pooled = PooledErrors::default();
        for rep in &per_rep {
            for (mm, e, i) in rep {
                if *mm == m {
                    pooled.estimated.extend(e);
                    pooled.inferred.extend(i);
                }
            }
        }
        let zeros_e = vec![0.0; pooled.estimated.len()];
        let zeros_i = vec![0.0; pooled.inferred.len()];
        table.push(
            &study,
            &scenario,
            m,
            Phase::E,
            error_summary(&zeros_e, &pooled.estimated)?,
        );
        table.push(
            &study,
            &scenario,
            m,
            Phase::I,
            error_summary(&zeros_i, &pooled.inferred)?,
        );
        errors.push((m, pooled));
    }
    Ok(BenchReport { table, errors })
}

fn replicate_estimates(
    train: &Dataset,
    test: &Dataset,
    method: Method,
    opts: &EvalOptions,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    match method {
        Method::MultiMarker => {
            let cfg = SamplerConfig {
                seed,
                store_latent: true,
                ..opts.sampler.clone()
            };
            let chain = fit_model(train, &opts.hyper, &cfg, opts.scale)?;
            let est = chain.latent_medians().expect("latent draws stored");
            let ys = prepare_new_biomarkers(test.y(), &chain)?;
            let popts = PredictOptions {
                seed,
                stochastic_allocation: opts.stochastic_allocation,
            };
            let inf = sample_predictive(&ys, &chain, &popts)?
                .iter()
                .map(|r| r.median)
                .collect();
            Ok((est, inf))
        }
        Method::Blr => {
            let m = fit_blr(train, opts.blr_prior_scale)?;
            let est = predict_blr(&m, train.y())?
                .iter()
                .map(|r| r.median)
                .collect();
            let inf = predict_blr(&m, test.y())?
                .iter()
                .map(|r| r.median)
                .collect();
            Ok((est, inf))
        }
        Method::Pls => {
            let m = fit_pls(train, opts.pls_components)?;
            Ok((m.predict_point(train.y())?, m.predict_point(test.y())?))
        }
    }
}
