//! CSV readers and writers for datasets, predictions and simulation truth,
//! plus the JSON manifests written next to every output.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::IntervalPrediction;
use crate::diagnostics::Method;
use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::predict::PredictiveResult;
use crate::simulate::SimulatedPair;

pub const DOSE_COLUMN: &str = "dose";

struct RawTable {
    biomarkers: DMatrix<f64>,
    doses: Option<Vec<f64>>,
}

fn read_table<R: Read>(r: R) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let header = rdr.headers()?.clone();
    let dose_col = header
        .iter()
        .position(|h| h.eq_ignore_ascii_case(DOSE_COLUMN));
    let marker_cols: Vec<usize> = (0..header.len()).filter(|&j| Some(j) != dose_col).collect();
    if marker_cols.is_empty() {
        return Err(Error::Format("no biomarker columns in header".into()));
    }
    let mut values = Vec::new();
    let mut doses = Vec::new();
    let mut n = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = |j: usize| -> Result<f64> {
            let s = rec.get(j).unwrap_or("");
            s.parse::<f64>().map_err(|_| {
                Error::Format(format!(
                    "row {}, column '{}': '{s}' is not a number",
                    i + 1,
                    &header[j]
                ))
            })
        };
        for &j in &marker_cols {
            values.push(cell(j)?);
        }
        if let Some(j) = dose_col {
            doses.push(cell(j)?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Format("no data rows".into()));
    }
    Ok(RawTable {
        biomarkers: DMatrix::from_row_slice(n, marker_cols.len(), &values),
        doses: dose_col.map(|_| doses),
    })
}

/// Read `y1..yP[,dose]`. Levels default to the distinct doses when the dose
/// column is present; without doses they must be supplied.
pub fn read_dataset<R: Read>(r: R, levels: Option<&[f64]>) -> Result<Dataset> {
    let t = read_table(r)?;
    let levels = match (levels, &t.doses) {
        (Some(l), _) => l.to_vec(),
        (None, Some(d)) => {
            let mut l = d.clone();
            l.sort_by(|a, b| a.total_cmp(b));
            l.dedup();
            l
        }
        (None, None) => {
            return Err(Error::Usage(
                "dataset has no dose column; supply the food-quantity levels".into(),
            ))
        }
    };
    Dataset::new(t.biomarkers, t.doses, levels)
}

/// Biomarker matrix only; a dose column, if present, is ignored.
pub fn read_biomarkers<R: Read>(r: R) -> Result<DMatrix<f64>> {
    Ok(read_table(r)?.biomarkers)
}

pub fn read_dataset_path(path: &Path, levels: Option<&[f64]>) -> Result<Dataset> {
    read_dataset(std::fs::File::open(path)?, levels)
}

pub fn write_dataset<W: Write>(data: &Dataset, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (1..=data.p()).map(|k| format!("y{k}")).collect();
    if data.doses().is_some() {
        header.push(DOSE_COLUMN.into());
    }
    out.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec: Vec<String> = data.row(i).iter().map(f64::to_string).collect();
        if let Some(d) = data.doses() {
            rec.push(d[i].to_string());
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn prediction_header(d: usize) -> Vec<String> {
    let mut h: Vec<String> = ["median", "ci_low", "ci_high"].map(String::from).to_vec();
    h.extend((1..=d).map(|k| format!("p_comp_{k}")));
    h
}

pub fn write_predictions<W: Write>(results: &[PredictiveResult], d: usize, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(prediction_header(d))?;
    for r in results {
        let mut rec = vec![
            r.median.to_string(),
            r.ci95.0.to_string(),
            r.ci95.1.to_string(),
        ];
        rec.extend(r.component_freq.iter().map(f64::to_string));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub const BASELINE_HEADER: [&str; 4] = ["median", "ci_low", "ci_high", "method"];

pub fn write_interval_predictions<W: Write>(
    preds: &[IntervalPrediction],
    method: Method,
    w: W,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(BASELINE_HEADER)?;
    for p in preds {
        out.write_record([
            p.median.to_string(),
            p.ci95.0.to_string(),
            p.ci95.1.to_string(),
            method.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Long-format dump of every predictive draw: `obs,draw,z`.
pub fn write_predictive_draws<W: Write>(results: &[PredictiveResult], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["obs", "draw", "z"])?;
    for (j, r) in results.iter().enumerate() {
        for (t, z) in r.draws.iter().enumerate() {
            out.write_record([(j + 1).to_string(), (t + 1).to_string(), z.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `set,index,z,component`; component is one-based and empty when the test
/// intakes come from no mixture component.
pub fn write_truth<W: Write>(sim: &SimulatedPair, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["set", "index", "z", "component"])?;
    let t = &sim.truth;
    for (set, z, c) in [
        ("train", &t.train_z, &t.train_c),
        ("test", &t.test_z, &t.test_c),
    ] {
        for (i, zi) in z.iter().enumerate() {
            let comp = c.get(i).map(|k| (k + 1).to_string()).unwrap_or_default();
            out.write_record([set.to_string(), (i + 1).to_string(), zi.to_string(), comp])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `parameter,index,value` for the generating α, β, σ², X and θ².
pub fn write_true_parameters<W: Write>(sim: &SimulatedPair, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["parameter", "index", "value"])?;
    let t = &sim.truth;
    for (name, v) in [
        ("alpha", &t.alpha),
        ("beta", &t.beta),
        ("sigma2", &t.sigma2),
        ("level", &t.levels),
        ("theta2", &t.theta2),
        ("test_level", &t.test_levels),
        ("test_theta2", &t.test_theta2),
    ] {
        for (k, x) in v.iter().enumerate() {
            out.write_record([name.to_string(), (k + 1).to_string(), x.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Provenance written beside each output as `<output>.manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub config_hash: String,
}

impl Manifest {
    pub fn new<C: Serialize>(command: &str, seed: u64, config: &C) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        let config_hash = hex::encode(Sha256::digest(serde_json::to_vec(&config)?));
        Ok(Manifest {
            tool: "multimarker".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config,
            config_hash,
        })
    }

    pub fn path_for(output: &Path) -> PathBuf {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    pub fn write_beside(&self, output: &Path) -> Result<()> {
        let mut f = std::fs::File::create(Self::path_for(output))?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_round_trip() {
        let rows = vec![vec![0.5, 1.25], vec![2.0, 0.1], vec![3.0, 1e-7]];
        let data =
            Dataset::from_rows(&rows, Some(vec![50.0, 100.0, 100.0]), vec![50.0, 100.0]).unwrap();
        let mut buf = Vec::new();
        write_dataset(&data, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone())
            .unwrap()
            .starts_with("y1,y2,dose\n"));
        let back = read_dataset(&buf[..], None).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn levels_required_without_doses() {
        let csv = "y1,y2\n1,2\n3,4\n";
        assert!(matches!(
            read_dataset(csv.as_bytes(), None),
            Err(Error::Usage(_))
        ));
        let d = read_dataset(csv.as_bytes(), Some(&[10.0, 20.0])).unwrap();
        assert_eq!((d.n(), d.p(), d.d()), (2, 2, 2));
    }

    #[test]
    fn bad_cell_names_row_and_column() {
        let e = read_dataset("y1,dose\n1,50\nx,50\n".as_bytes(), None).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("row 2") && msg.contains("y1"), "{msg}");
        assert_eq!(e.category(), "format");
    }

    #[test]
    fn biomarkers_ignore_dose() {
        let m = read_biomarkers("y1,dose,y2\n1,50,2\n".as_bytes()).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(1, 2, &[1.0, 2.0]));
    }

    #[test]
    fn prediction_schema() {
        let r = PredictiveResult {
            draws: vec![1.0],
            median: 1.0,
            ci95: (0.5, 2.0),
            component_freq: vec![0.25, 0.75],
        };
        let mut buf = Vec::new();
        write_predictions(&[r], 2, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "median,ci_low,ci_high,p_comp_1,p_comp_2\n1,0.5,2,0.25,0.75\n"
        );
    }

    #[test]
    fn manifest_hash_is_stable() {
        let a = Manifest::new("fit", 3, &serde_json::json!({"n_iter": 10})).unwrap();
        let b = Manifest::new("fit", 3, &serde_json::json!({"n_iter": 10})).unwrap();
        let c = Manifest::new("fit", 3, &serde_json::json!({"n_iter": 11})).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.config_hash, c.config_hash);
        assert_eq!(
            Manifest::path_for(Path::new("out/x.csv")),
            PathBuf::from("out/x.csv.manifest.json")
        );
    }
}
