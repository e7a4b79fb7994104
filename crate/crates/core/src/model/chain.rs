use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BiomarkerScaling, Hyperparameters, Params};
use crate::error::{Error, Result};
use crate::sampler::{MhDiagnostics, SamplerConfig};
use crate::stats;

pub const CHAIN_FORMAT: &str = "multimarker-chain";
pub const CHAIN_FORMAT_VERSION: u32 = 1;

/// Latent intakes and zero-based allocations of one retained draw.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentDraw {
    pub z: Vec<f64>,
    pub c: Vec<usize>,
}

/// Retained post-burn-in draws together with everything needed to reuse them.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorChain {
    pub seed: u64,
    pub n_iter: usize,
    pub n_burn: usize,
    pub thin: usize,
    /// Digest of the (possibly scaled) training data the chain was fitted on.
    pub fingerprint: String,
    pub n_obs: usize,
    pub levels: Vec<f64>,
    /// Transform applied to the raw training biomarkers, if any.
    pub scaling: Option<BiomarkerScaling>,
    pub config: SamplerConfig,
    pub hyper: Hyperparameters,
    pub diagnostics: MhDiagnostics,
    pub draws: Vec<Params>,
    pub latent: Option<Vec<LatentDraw>>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    seed: u64,
    n_iter: usize,
    n_burn: usize,
    thin: usize,
    fingerprint: String,
    n_obs: usize,
    p: usize,
    levels: Vec<f64>,
    scaling: Option<BiomarkerScaling>,
    config: SamplerConfig,
    hyper: Hyperparameters,
    diagnostics: MhDiagnostics,
    draws: usize,
    latent: bool,
}

impl PosteriorChain {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn p(&self) -> usize {
        self.hyper.p()
    }

    pub fn d(&self) -> usize {
        self.levels.len()
    }

    pub fn expected_len(&self) -> usize {
        (self.n_iter - self.n_burn) / self.thin
    }

    pub fn check_invariants(&self) -> Result<()> {
        if self.len() != self.expected_len() {
            return Err(Error::Format(format!(
                "chain holds {} draws, expected (n_iter - n_burn) / thin = {}",
                self.len(),
                self.expected_len()
            )));
        }
        for (t, d) in self.draws.iter().enumerate() {
            d.check_invariants()
                .map_err(|e| Error::Format(format!("draw {t}: {e}")))?;
            if d.p() != self.p() || d.d() != self.d() {
                return Err(Error::Format(format!("draw {t} has wrong dimensions")));
            }
        }
        if let Some(l) = &self.latent {
            if l.len() != self.len()
                || l.iter()
                    .any(|x| x.z.len() != self.n_obs || x.c.len() != self.n_obs)
            {
                return Err(Error::Format("latent draws do not match the chain".into()));
            }
        }
        Ok(())
    }

    /// Posterior medians of each training observation's latent intake.
    pub fn latent_medians(&self) -> Option<Vec<f64>> {
        let l = self.latent.as_ref()?;
        if l.is_empty() {
            return None;
        }
        Some(
            (0..self.n_obs)
                .map(|i| stats::median(&l.iter().map(|d| d.z[i]).collect::<Vec<_>>()))
                .collect(),
        )
    }

    /// Trace of one named scalar parameter, e.g. `beta_2` or `mu_alpha`
    /// (indices are one-based, matching the chain file's column names).
    pub fn trace(&self, name: &str) -> Option<Vec<f64>> {
        let cols = self.param_columns();
        let k = cols.iter().position(|c| c == name)?;
        Some(self.draws.iter().map(|d| flatten(d)[k]).collect())
    }

    pub fn param_columns(&self) -> Vec<String> {
        let (p, d) = (self.p(), self.d());
        let mut cols = Vec::new();
        for name in ["alpha", "beta", "sigma2"] {
            cols.extend((1..=p).map(|k| format!("{name}_{k}")));
        }
        cols.extend(["mu_alpha", "mu_beta", "sigma_beta2"].map(String::from));
        cols.extend((1..=d).map(|k| format!("theta2_{k}")));
        cols.extend((1..d).map(|k| format!("gamma_{k}")));
        cols.extend((1..=p).map(|k| format!("eta_{k}")));
        cols
    }

    /// Serialize: one `#`-prefixed JSON manifest line, then a CSV of draws.
    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        let manifest = Manifest {
            format: CHAIN_FORMAT.into(),
            version: CHAIN_FORMAT_VERSION,
            seed: self.seed,
            n_iter: self.n_iter,
            n_burn: self.n_burn,
            thin: self.thin,
            fingerprint: self.fingerprint.clone(),
            n_obs: self.n_obs,
            p: self.p(),
            levels: self.levels.clone(),
            scaling: self.scaling.clone(),
            config: self.config.clone(),
            hyper: self.hyper.clone(),
            diagnostics: self.diagnostics.clone(),
            draws: self.len(),
            latent: self.latent.is_some(),
        };
        writeln!(w, "# {}", serde_json::to_string(&manifest)?)?;
        let mut cols = self.param_columns();
        if self.latent.is_some() {
            cols.extend((1..=self.n_obs).map(|i| format!("z_{i}")));
            cols.extend((1..=self.n_obs).map(|i| format!("c_{i}")));
        }
        writeln!(w, "{}", cols.join(","))?;
        let mut line = String::new();
        for (t, d) in self.draws.iter().enumerate() {
            line.clear();
            push_values(&mut line, flatten(d));
            if let Some(l) = &self.latent {
                push_values(&mut line, l[t].z.iter().copied());
                for c in &l[t].c {
                    line.push_str(&(c + 1).to_string());
                    line.push(',');
                }
            }
            line.pop();
            writeln!(w, "{line}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(mut r: R) -> Result<Self> {
        let mut first = String::new();
        r.read_line(&mut first)?;
        let json = first.strip_prefix("# ").ok_or_else(|| {
            Error::Format("chain file must start with a '# ' manifest line".into())
        })?;
        let m: Manifest = serde_json::from_str(json.trim_end())?;
        if m.format != CHAIN_FORMAT {
            return Err(Error::Format(format!(
                "not a chain file (format '{}')",
                m.format
            )));
        }
        if m.version != CHAIN_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported chain format version {}",
                m.version
            )));
        }
        let (p, d) = (m.p, m.levels.len());
        let n_params = 3 * p + 3 + d + (d - 1) + p;
        let width = n_params + if m.latent { 2 * m.n_obs } else { 0 };
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let mut draws = Vec::with_capacity(m.draws);
        let mut latent = m.latent.then(|| Vec::with_capacity(m.draws));
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != width {
                return Err(Error::Format(format!(
                    "draw row has {} fields, expected {width}",
                    rec.len()
                )));
            }
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::Format(format!("bad number '{s}' in chain")))
                })
                .collect::<Result<_>>()?;
            draws.push(unflatten(&vals[..n_params], p, d));
            if let Some(l) = latent.as_mut() {
                let z = vals[n_params..n_params + m.n_obs].to_vec();
                let c = vals[n_params + m.n_obs..]
                    .iter()
                    .map(|v| *v as usize - 1)
                    .collect();
                l.push(LatentDraw { z, c });
            }
        }
        let chain = PosteriorChain {
            seed: m.seed,
            n_iter: m.n_iter,
            n_burn: m.n_burn,
            thin: m.thin,
            fingerprint: m.fingerprint,
            n_obs: m.n_obs,
            levels: m.levels,
            scaling: m.scaling,
            config: m.config,
            hyper: m.hyper,
            diagnostics: m.diagnostics,
            draws,
            latent,
        };
        chain.check_invariants()?;
        Ok(chain)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

fn push_values(line: &mut String, vals: impl IntoIterator<Item = f64>) {
    for v in vals {
        // `{}` on f64 prints the shortest representation that round-trips
        line.push_str(&v.to_string());
        line.push(',');
    }
}

fn flatten(d: &Params) -> Vec<f64> {
    let mut v = Vec::with_capacity(4 * d.p() + 2 * d.d() + 2);
    v.extend(&d.alpha);
    v.extend(&d.beta);
    v.extend(&d.sigma2);
    v.extend([d.mu_alpha, d.mu_beta, d.sigma_beta2]);
    v.extend(&d.theta2);
    v.extend(&d.gamma);
    v.extend(&d.eta);
    v
}

fn unflatten(v: &[f64], p: usize, d: usize) -> Params {
    let mut at = 0;
    let mut take = |k: usize| {
        let s = v[at..at + k].to_vec();
        at += k;
        s
    };
    let alpha = take(p);
    let beta = take(p);
    let sigma2 = take(p);
    let nuis = take(3);
    let theta2 = take(d);
    let gamma = take(d - 1);
    let eta = take(p);
    Params {
        alpha,
        beta,
        sigma2,
        mu_alpha: nuis[0],
        mu_beta: nuis[1],
        sigma_beta2: nuis[2],
        theta2,
        gamma,
        eta,
    }
}
