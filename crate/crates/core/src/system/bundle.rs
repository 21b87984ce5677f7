//! System bundles: a `manifest.json` plus one Matrix Market file per term.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AffineSystem, Coefficient, GridSet, MatrixTerm, ParameterDomain, RhsTerm};
use crate::error::{Error, Result};
use crate::linalg::mtx;

pub const SYSTEM_FORMAT: &str = "rbcert-system";
const SYSTEM_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEntry {
    pub name: String,
    pub coefficient: Coefficient,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemManifest {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub ports: usize,
    pub scale: f64,
    pub domain: ParameterDomain,
    pub matrix_terms: Vec<TermEntry>,
    pub rhs_terms: Vec<TermEntry>,
    #[serde(default)]
    pub grids: GridSet,
    /// Free-form provenance, e.g. the generator spec and reference resonances.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

/// Writes `sys` into `dir` (created if missing).
pub fn save_system(dir: &Path, sys: &AffineSystem, metadata: Option<serde_json::Value>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut matrix_terms = Vec::new();
    for (k, t) in sys.matrix_terms().iter().enumerate() {
        let file = format!("A{k}_{}.mtx", file_stem(&t.name));
        mtx::write(&dir.join(&file), &t.matrix)?;
        matrix_terms.push(TermEntry {
            name: t.name.clone(),
            coefficient: t.coefficient,
            file,
        });
    }
    let mut rhs_terms = Vec::new();
    for (k, t) in sys.rhs_terms().iter().enumerate() {
        let file = format!("B{k}_{}.mtx", file_stem(&t.name));
        mtx::write_dense(&dir.join(&file), &t.matrix)?;
        rhs_terms.push(TermEntry {
            name: t.name.clone(),
            coefficient: t.coefficient,
            file,
        });
    }
    let manifest = SystemManifest {
        format: SYSTEM_FORMAT.into(),
        version: SYSTEM_VERSION,
        n: sys.n(),
        ports: sys.ports(),
        scale: sys.scale(),
        domain: sys.domain().clone(),
        matrix_terms,
        rhs_terms,
        grids: sys.grids().clone(),
        metadata,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
}

pub fn read_manifest(dir: &Path) -> Result<SystemManifest> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: SystemManifest = serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.to_string()))?;
    if m.format != SYSTEM_FORMAT {
        return Err(Error::parse(&path, format!("expected format {SYSTEM_FORMAT:?}, found {:?}", m.format)));
    }
    if m.version != SYSTEM_VERSION {
        return Err(Error::parse(&path, format!("unsupported version {}", m.version)));
    }
    Ok(m)
}

pub fn load_system(dir: &Path) -> Result<AffineSystem> {
    let m = read_manifest(dir)?;
    let matrix_terms = m
        .matrix_terms
        .iter()
        .map(|t| Ok(MatrixTerm::new(t.name.clone(), t.coefficient, mtx::read(&dir.join(&t.file))?)))
        .collect::<Result<Vec<_>>>()?;
    let rhs_terms = m
        .rhs_terms
        .iter()
        .map(|t| Ok(RhsTerm::new(t.name.clone(), t.coefficient, mtx::read_dense(&dir.join(&t.file))?)))
        .collect::<Result<Vec<_>>>()?;
    let sys = AffineSystem::new(matrix_terms, rhs_terms, m.domain, Some(m.scale))?.with_grids(m.grids);
    if sys.n() != m.n || sys.ports() != m.ports {
        return Err(Error::mismatch(
            "system manifest",
            format!("n = {}, ports = {}", m.n, m.ports),
            format!("n = {}, ports = {}", sys.n(), sys.ports()),
        ));
    }
    Ok(sys)
}
