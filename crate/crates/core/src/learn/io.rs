//! Parameter bundles: a directory holding `manifest.json` and one TSV per
//! tensor (row-major, tab-separated, shortest round-trip float text).
//!
//! ```text
//! {"format": "spic-params", "version": 1, "variant": "general", "k": 3, "beta": 0,
//!  "tensors": [{"name": "omega_p", "rows": 5, "cols": 64, "file": "omega_p.tsv"}, ...]}
//! ```
//! θ is stored as a (K+1) × 1 tensor.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{ModelParams, Variant};
use crate::error::{Result, SpicError};

const MANIFEST: &str = "manifest.json";
const FORMAT: &str = "spic-params";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
    file: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    variant: Variant,
    k: usize,
    beta: u32,
    tensors: Vec<TensorEntry>,
}

fn write_tensor(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| SpicError::io(path, e))
}

fn read_tensor(dir: &Path, entry: &TensorEntry) -> Result<DMatrix<f64>> {
    let path = dir.join(&entry.file);
    let text = fs::read_to_string(&path).map_err(|e| SpicError::io(&path, e))?;
    let mut values = Vec::with_capacity(entry.rows * entry.cols);
    let mut rows = 0;
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let before = values.len();
        for tok in line.split('\t') {
            values.push(
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| SpicError::parse(&entry.file, i + 1, format!("bad value {tok:?}")))?,
            );
        }
        if values.len() - before != entry.cols {
            return Err(SpicError::parse(
                &entry.file,
                i + 1,
                format!("expected {} values", entry.cols),
            ));
        }
        rows += 1;
    }
    if rows != entry.rows {
        return Err(SpicError::parse(
            &entry.file,
            0,
            format!("expected {} rows, found {rows}", entry.rows),
        ));
    }
    Ok(DMatrix::from_row_slice(entry.rows, entry.cols, &values))
}

pub fn write_params(params: &ModelParams, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| SpicError::io(dir, e))?;
    let mut tensors: Vec<(&str, DMatrix<f64>)> = Vec::new();
    if let Some(p) = &params.omega_p {
        tensors.push(("omega_p", p.clone()));
    }
    if let Some(r) = &params.omega_r {
        tensors.push(("omega_r", r.clone()));
    }
    tensors.push(("omega_f", params.omega_f.clone()));
    if let Some(t) = &params.theta {
        tensors.push(("theta", DMatrix::from_column_slice(t.len(), 1, t)));
    }
    let mut entries = Vec::with_capacity(tensors.len());
    for (name, m) in &tensors {
        let file = format!("{name}.tsv");
        write_tensor(&dir.join(&file), m)?;
        entries.push(TensorEntry {
            name: name.to_string(),
            rows: m.nrows(),
            cols: m.ncols(),
            file,
        });
    }
    let manifest = Manifest {
        format: FORMAT.into(),
        version: VERSION,
        variant: params.variant,
        k: params.k,
        beta: params.beta,
        tensors: entries,
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    let path = dir.join(MANIFEST);
    fs::write(&path, json).map_err(|e| SpicError::io(path, e))
}

pub fn read_params(dir: impl AsRef<Path>) -> Result<ModelParams> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| SpicError::io(&path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| SpicError::parse(MANIFEST, e.line(), e.to_string()))?;
    if manifest.format != FORMAT || manifest.version != VERSION {
        return Err(SpicError::parse(
            MANIFEST,
            0,
            format!("unsupported bundle {} v{}", manifest.format, manifest.version),
        ));
    }
    let mut params = ModelParams {
        variant: manifest.variant,
        omega_p: None,
        omega_r: None,
        omega_f: DMatrix::zeros(0, 0),
        theta: None,
        k: manifest.k,
        beta: manifest.beta,
    };
    let mut saw_head = false;
    for entry in &manifest.tensors {
        let m = read_tensor(dir, entry)?;
        match entry.name.as_str() {
            "omega_p" => params.omega_p = Some(m),
            "omega_r" => params.omega_r = Some(m),
            "omega_f" => {
                params.omega_f = m;
                saw_head = true;
            }
            "theta" => params.theta = Some(m.iter().copied().collect()),
            other => return Err(SpicError::parse(MANIFEST, 0, format!("unknown tensor {other:?}"))),
        }
    }
    if !saw_head {
        return Err(SpicError::parse(MANIFEST, 0, "bundle has no omega_f"));
    }
    let d = params.omega_p.as_ref().map_or(params.omega_f.nrows(), |p| p.nrows());
    params.validate(d)?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn bundle_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for (i, v) in Variant::ALL.into_iter().enumerate() {
            let p = ModelParams::init(v, 6, 3, 2, 2, 1, &mut seeded(i as u64));
            let sub = dir.path().join(v.as_str());
            write_params(&p, &sub).unwrap();
            assert_eq!(read_params(&sub).unwrap(), p);
        }
    }

    #[test]
    fn rejects_foreign_manifest() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join(MANIFEST),
            r#"{"format":"other","version":1,"variant":"linear","k":1,"beta":0,"tensors":[]}"#,
        )
        .unwrap();
        assert!(read_params(dir.path()).is_err());
    }
}
