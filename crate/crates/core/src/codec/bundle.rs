//! Scheme bundles: a `manifest.json` next to one `.col` file per encoded label.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path};

use serde_json::{json, Value as Json};

use super::SchemeInstance;
use crate::column::{io, ColumnError};
use crate::ops::Ports;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("column `{label}`: {source}")]
    Column { label: String, source: ColumnError },
}

fn file_name(label: &str) -> String {
    let s: String =
        label.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect();
    format!("{s}.col")
}

pub fn write_bundle(dir: impl AsRef<Path>, inst: &SchemeInstance) -> Result<(), BundleError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut files = BTreeMap::new();
    let mut used = std::collections::BTreeSet::new();
    for (label, col) in &inst.columns {
        let mut name = file_name(label);
        let mut n = 1;
        while !used.insert(name.clone()) {
            n += 1;
            name = format!("{}~{n}.col", name.trim_end_matches(".col"));
        }
        io::write_file(dir.join(&name), col).map_err(|source| BundleError::Column { label: label.clone(), source })?;
        files.insert(label.clone(), Json::String(name));
    }
    let manifest = json!({"scheme": inst.scheme, "params": inst.params, "columns": files});
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest).expect("json") + "\n")?;
    Ok(())
}

pub fn read_bundle(dir: impl AsRef<Path>) -> Result<SchemeInstance, BundleError> {
    let dir = dir.as_ref();
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let m: Json = serde_json::from_str(&text).map_err(|e| BundleError::Manifest(e.to_string()))?;
    let scheme = m
        .get("scheme")
        .and_then(|s| s.as_str())
        .ok_or_else(|| BundleError::Manifest("missing `scheme`".into()))?
        .to_string();
    let params = m.get("params").cloned().unwrap_or(json!({}));
    let cols = m
        .get("columns")
        .and_then(|c| c.as_object())
        .ok_or_else(|| BundleError::Manifest("missing `columns`".into()))?;
    let mut columns = Ports::new();
    for (label, path) in cols {
        let rel =
            path.as_str().ok_or_else(|| BundleError::Manifest(format!("column `{label}` path must be a string")))?;
        let p = Path::new(rel);
        if p.components().any(|c| !matches!(c, Component::Normal(_) | Component::CurDir)) {
            return Err(BundleError::Manifest(format!("column path `{rel}` leaves the bundle")));
        }
        let col = io::read_file(dir.join(p)).map_err(|source| BundleError::Column { label: label.clone(), source })?;
        columns.insert(label.clone(), col);
    }
    Ok(SchemeInstance::new(scheme, params, columns))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::column::Column;

    #[test]
    fn bundle_roundtrip() {
        let dir = std::env::temp_dir().join(format!("colcirc-bundle-{}", std::process::id()));
        let mut cols = Ports::new();
        cols.insert("value".into(), Column::u64s(vec![7]));
        cols.insert("alt0.length".into(), Column::u64s(vec![3]));
        let inst = SchemeInstance::new("constant", json!({"type": "u64"}), cols);
        write_bundle(&dir, &inst).unwrap();
        assert_eq!(read_bundle(&dir).unwrap(), inst);
        fs::remove_dir_all(&dir).unwrap();
    }
}
