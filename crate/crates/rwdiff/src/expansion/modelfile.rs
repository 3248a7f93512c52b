//! Model files: `family`, `params`, `T` keys, plus `table` pointing at a
//! two-column `t,alpha` CSV for tabulated models. A `model.` prefix on every
//! key is accepted so the same lines can live inside an ensemble config.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::kv::{KvDoc, KvError};

use super::model::{ExpansionModel, ModelError, ModelSpec};

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error(transparent)]
    Kv(#[from] KvError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("table {path}: {reason}")]
    Csv { path: PathBuf, reason: String },
}

/// Reads a two-column `t,alpha` CSV (a header row is optional).
pub fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>), ModelFileError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| ModelFileError::Csv {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    let mut ts = Vec::new();
    let mut al = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ModelFileError::Csv {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        if rec.len() != 2 {
            return Err(ModelFileError::Csv {
                path: path.to_path_buf(),
                reason: format!("row {} has {} columns, expected 2", i + 1, rec.len()),
            });
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(t), Ok(a)) => {
                ts.push(t);
                al.push(a);
            }
            _ if i == 0 => continue,
            _ => {
                return Err(ModelFileError::Csv {
                    path: path.to_path_buf(),
                    reason: format!("row {} is not numeric", i + 1),
                })
            }
        }
    }
    Ok((ts, al))
}

/// Builds a model from key-value entries under `prefix` (e.g. `""` or
/// `"model."`); relative table paths resolve against `base_dir`.
pub fn model_from_doc(doc: &KvDoc, prefix: &str, base_dir: &Path) -> Result<ExpansionModel, ModelFileError> {
    let key = |k: &str| format!("{prefix}{k}");
    let family = doc.require(&key("family"))?;
    let params = doc.list_f64(&key("params"))?;
    let t_end = doc.opt_f64(&key("T"))?;
    if family == "tabulated" || family == "custom-tabulated" {
        if let Some(table) = doc.get(&key("table")) {
            let path = base_dir.join(table);
            let (ts, al) = read_table(&path)?;
            return Ok(ExpansionModel::tabulated(&ts, &al, t_end.filter(|t| t.is_finite()))?);
        }
    }
    let spec = ModelSpec {
        family: family.to_string(),
        params,
        t_end: t_end.filter(|t| t.is_finite()),
    };
    Ok(ExpansionModel::from_spec(&spec)?)
}

/// Reads a standalone model file.
pub fn read_model_file(path: &Path) -> Result<ExpansionModel, ModelFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let doc = KvDoc::parse(&text)?;
    let prefix = if doc.get("model.family").is_some() { "model." } else { "" };
    let base = path.parent().unwrap_or(Path::new("."));
    model_from_doc(&doc, prefix, base)
}
