use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use log::info;
use multimarker::baselines::{fit_blr, predict_blr, predict_pls};
use multimarker::diagnostics::{
    ess_summary, loocv, parameter_table, run_benchmark, write_ess_csv, write_parameter_csv,
    BenchConfig, Method,
};
use multimarker::io::{
    read_biomarkers, read_dataset_path, write_dataset, write_interval_predictions,
    write_predictions, write_predictive_draws, write_true_parameters, write_truth, Manifest,
};
use multimarker::model::{Dataset, PosteriorChain};
use multimarker::predict::{
    prepare_new_biomarkers, sample_predictive, sample_predictive_joint, PredictOptions,
};
use multimarker::sampler::{fit_model, SamplerConfig};
use multimarker::simulate::{generate_scenario, ScenarioConfig};
use multimarker::stats::RngStream;
use multimarker::{Error, Result};
use serde::Serialize;

use crate::cli::{BenchArgs, DiagArgs, FitArgs, LoocvArgs, PredictArgs, SimulateArgs};
use crate::config::RunConfig;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn with_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn manifest<C: Serialize>(command: &str, seed: u64, config: &C, output: &Path) -> Result<()> {
    Manifest::new(command, seed, config)?.write_beside(output)
}

/// `iteration,parameter,value` rows for every retained draw.
fn write_trace<W: Write>(chain: &PosteriorChain, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["iteration", "parameter", "value"])?;
    for name in chain.param_columns() {
        let tr = chain.trace(&name).expect("column listed by the chain");
        for (t, v) in tr.iter().enumerate() {
            out.write_record([(t + 1).to_string(), name.clone(), v.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

fn log_config(cfg: &RunConfig) {
    info!(
        "effective configuration: {}",
        serde_json::to_string(cfg).unwrap_or_default()
    );
}

pub fn fit(cfg: &RunConfig, a: &FitArgs) -> Result<()> {
    log_config(cfg);
    let data = read_dataset_path(&a.data, cfg.levels.as_deref())?;
    let chain = fit_model(&data, &cfg.hyper, &cfg.sampler, cfg.scale)?;
    info!(
        "acceptance: gamma {:.3}, eta {:.3}",
        chain.diagnostics.acceptance_gamma, chain.diagnostics.acceptance_eta
    );
    if let Some(dir) = a.chain.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    chain.save(&a.chain)?;
    manifest("fit", cfg.seed, cfg, &a.chain)?;
    if let Some(t) = &a.trace {
        with_file(t, |w| write_trace(&chain, w))?;
    }
    Ok(())
}

fn scaled_training(chain: &PosteriorChain, path: &Path) -> Result<Dataset> {
    let train = read_dataset_path(path, Some(&chain.levels))?;
    let work = match &chain.scaling {
        Some(s) => train.with_biomarkers(s.apply(train.y())?),
        None => train,
    };
    if work.fingerprint() != chain.fingerprint {
        return Err(Error::Mismatch(format!(
            "{} is not the data this chain was fitted on",
            path.display()
        )));
    }
    Ok(work)
}

pub fn predict(cfg: &RunConfig, a: &PredictArgs) -> Result<()> {
    log_config(cfg);
    let method = cfg.method(a.method.as_deref())?;
    let raw = read_biomarkers(File::open(&a.data)?)?;
    if method != Method::MultiMarker {
        let train_path = a
            .train
            .as_ref()
            .ok_or_else(|| Error::Usage(format!("--train is required for {method}")))?;
        let train = read_dataset_path(train_path, cfg.levels.as_deref())?;
        let preds = match method {
            Method::Blr => predict_blr(&fit_blr(&train, cfg.blr_prior_scale)?, &raw)?,
            _ => predict_pls(&train, cfg.pls_components, &raw)?,
        };
        with_file(&a.out, |w| write_interval_predictions(&preds, method, w))?;
        return manifest("predict", cfg.seed, cfg, &a.out);
    }

    let chain_path = a
        .chain
        .as_ref()
        .ok_or_else(|| Error::Usage("--chain is required for multimarker".into()))?;
    let chain = PosteriorChain::load(chain_path)?;
    if let Some(want) = a.scale.explicit() {
        let have = chain.scaling.is_some();
        if want != have {
            let state = |s: bool| if s { "standardized" } else { "unscaled" };
            return Err(Error::Mismatch(format!(
                "chain was fitted on {} biomarkers but {} biomarkers were requested",
                state(have),
                state(want)
            )));
        }
    }
    let ys = prepare_new_biomarkers(&raw, &chain)?;
    let stochastic = a.stochastic_allocation || cfg.stochastic_allocation;
    let results = if a.joint {
        let train_path = a
            .train
            .as_ref()
            .ok_or_else(|| Error::Usage("--joint needs --train".into()))?;
        let train = scaled_training(&chain, train_path)?;
        let sc = SamplerConfig {
            seed: cfg.seed,
            stochastic_allocation: stochastic,
            ..chain.config.clone()
        };
        sample_predictive_joint(&train, &ys, &chain.hyper, &sc)?
    } else {
        if let Some(t) = &a.train {
            scaled_training(&chain, t)?;
        }
        sample_predictive(
            &ys,
            &chain,
            &PredictOptions {
                seed: cfg.seed,
                stochastic_allocation: stochastic,
            },
        )?
    };
    with_file(&a.out, |w| write_predictions(&results, chain.d(), w))?;
    manifest("predict", cfg.seed, cfg, &a.out)?;
    if let Some(d) = &a.draws {
        with_file(d, |w| write_predictive_draws(&results, w))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateManifest<'a> {
    scenario: &'a ScenarioConfig,
    replicates: usize,
    replicate_seeds: Vec<u64>,
}

pub fn simulate(cfg: &RunConfig, a: &SimulateArgs) -> Result<()> {
    log_config(cfg);
    let reps = a.replicates.unwrap_or(1);
    if reps == 0 {
        return Err(Error::Usage("--replicates must be positive".into()));
    }
    fs::create_dir_all(&a.out_dir)?;
    let mut seeds = Vec::with_capacity(reps);
    for r in 0..reps {
        let seed = RngStream::derive_seed(cfg.scenario.seed, r as u64);
        seeds.push(seed);
        let sim = generate_scenario(&ScenarioConfig {
            seed,
            ..cfg.scenario.clone()
        })?;
        let stem = format!("rep{}", r + 1);
        with_file(&a.out_dir.join(format!("{stem}_train.csv")), |w| {
            write_dataset(&sim.train, w)
        })?;
        with_file(&a.out_dir.join(format!("{stem}_test.csv")), |w| {
            write_dataset(&sim.test, w)
        })?;
        with_file(&a.out_dir.join(format!("{stem}_truth.csv")), |w| {
            write_truth(&sim, w)
        })?;
        with_file(&a.out_dir.join(format!("{stem}_params.csv")), |w| {
            write_true_parameters(&sim, w)
        })?;
    }
    let m = SimulateManifest {
        scenario: &cfg.scenario,
        replicates: reps,
        replicate_seeds: seeds,
    };
    manifest("simulate", cfg.seed, &m, &a.out_dir.join("simulate"))
}

pub fn loocv_cmd(cfg: &RunConfig, a: &LoocvArgs) -> Result<()> {
    log_config(cfg);
    let method = cfg.method(a.method.as_deref())?;
    let data = read_dataset_path(&a.data, cfg.levels.as_deref())?;
    let report = loocv(&data, method, &cfg.eval())?;
    fs::create_dir_all(&a.out_dir)?;
    let per_obs = a.out_dir.join("loocv.csv");
    with_file(&per_obs, |w| report.write_csv(w))?;
    with_file(&a.out_dir.join("loocv_dose.csv"), |w| {
        report.write_dose_csv(w)
    })?;
    manifest("loocv", cfg.seed, cfg, &per_obs)?;
    if method == Method::MultiMarker && !a.no_params {
        let chain = fit_model(
            &data,
            &cfg.hyper,
            &SamplerConfig {
                store_latent: false,
                ..cfg.sampler.clone()
            },
            cfg.scale,
        )?;
        with_file(&a.out_dir.join("parameters.csv"), |w| {
            write_parameter_csv(&parameter_table(&chain)?, w)
        })?;
    }
    let mut out = io::stdout().lock();
    for s in &report.per_dose {
        writeln!(
            out,
            "dose {}: n = {}, median |difference| = {:.2}",
            s.dose, s.n, s.median_abs_difference
        )?;
    }
    let (m, lo, hi) = report.overall;
    writeln!(
        out,
        "overall difference: median {m:.2}, 95% interval ({lo:.2}, {hi:.2})"
    )?;
    Ok(())
}

pub fn bench(cfg: &RunConfig, a: &BenchArgs) -> Result<()> {
    log_config(cfg);
    let methods = match &a.methods {
        Some(ms) => ms
            .iter()
            .map(|m| m.parse())
            .collect::<Result<Vec<Method>>>()?,
        None => Method::ALL.to_vec(),
    };
    let bc = BenchConfig {
        scenario: cfg.scenario.clone(),
        replicates: a.replicates.unwrap_or(cfg.replicates),
        methods,
        eval: cfg.eval(),
    };
    let report = run_benchmark(&bc)?;
    match &a.out {
        Some(p) => {
            with_file(p, |w| report.table.write_csv(w))?;
            manifest("bench", cfg.seed, &bc, p)?;
            print!("{}", report.table.to_text());
        }
        None => report.table.write_csv(io::stdout().lock())?,
    }
    if let Some(t) = &a.text {
        with_file(t, |w| Ok(w.write_all(report.table.to_text().as_bytes())?))?;
    }
    Ok(())
}

pub fn diag(cfg: &RunConfig, a: &DiagArgs) -> Result<()> {
    let chain = PosteriorChain::load(&a.chain)?;
    with_file(&a.out, |w| write_ess_csv(&ess_summary(&chain)?, w))?;
    manifest("diag", chain.seed, cfg, &a.out)?;
    if let Some(p) = &a.params {
        with_file(p, |w| write_parameter_csv(&parameter_table(&chain)?, w))?;
    }
    if let Some(t) = &a.trace {
        with_file(t, |w| write_trace(&chain, w))?;
    }
    Ok(())
}
