//! ROM bundles: everything the online phase needs, with no full-order matrices.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ReducedModel, ReducedTerm};
use crate::error::{Error, Result};
use crate::estimators::{
    EstimatorKind, EstimatorState, ErrorSpace, InfSupCache, RandomizedState, ResidualSystem,
};
use crate::linalg::{mtx, BasisMatrix, CMat, DEFAULT_SVD_CAP};
use crate::system::{ParameterDomain, TermEntry};

pub const ROM_FORMAT: &str = "rbcert-rom";
const ROM_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorEntry {
    pub kind: EstimatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_basis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_vectors: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<TermEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cross_terms: Vec<TermEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rhs_terms: Vec<TermEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RomManifest {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub r: usize,
    pub ports: usize,
    pub scale: f64,
    pub domain: ParameterDomain,
    pub basis: String,
    pub matrix_terms: Vec<TermEntry>,
    pub rhs_terms: Vec<TermEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

/// A reduced model with the estimator data it was built with.
#[derive(Debug, Clone, PartialEq)]
pub struct RomBundle {
    pub rom: ReducedModel,
    pub estimator: Option<EstimatorState>,
    pub metadata: Option<serde_json::Value>,
}

fn write_terms(dir: &Path, prefix: &str, terms: &[ReducedTerm]) -> Result<Vec<TermEntry>> {
    terms
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let file = format!("{prefix}{k}.mtx");
            mtx::write_dense(&dir.join(&file), &t.matrix)?;
            Ok(TermEntry {
                name: t.name.clone(),
                coefficient: t.coefficient,
                file,
            })
        })
        .collect()
}

fn read_terms(dir: &Path, entries: &[TermEntry]) -> Result<Vec<ReducedTerm>> {
    entries
        .iter()
        .map(|e| {
            Ok(ReducedTerm {
                name: e.name.clone(),
                coefficient: e.coefficient,
                matrix: mtx::read_dense(&dir.join(&e.file))?,
            })
        })
        .collect()
}

fn read_basis(dir: &Path, file: &str) -> Result<BasisMatrix> {
    let path = dir.join(file);
    let basis = BasisMatrix::checked(mtx::read_dense(&path)?);
    if !basis.is_orthonormal() {
        return Err(Error::parse(&path, "stored basis is not orthonormal"));
    }
    Ok(basis)
}

fn write_residual_system(dir: &Path, prefix: &str, rs: &ResidualSystem, entry: &mut EstimatorEntry) -> Result<()> {
    let basis = format!("{prefix}_basis.mtx");
    mtx::write_dense(&dir.join(&basis), rs.basis().matrix())?;
    entry.basis = Some(basis);
    entry.terms = write_terms(dir, &format!("{prefix}_A"), rs.terms())?;
    entry.cross_terms = write_terms(dir, &format!("{prefix}_C"), rs.cross_terms())?;
    entry.rhs_terms = write_terms(dir, &format!("{prefix}_B"), rs.rhs_terms())?;
    Ok(())
}

fn read_residual_system(dir: &Path, entry: &EstimatorEntry, scale: f64) -> Result<ResidualSystem> {
    let basis = entry
        .basis
        .as_deref()
        .ok_or_else(|| Error::parse(dir.join("manifest.json"), "estimator entry lacks a basis"))?;
    ResidualSystem::from_parts(
        read_basis(dir, basis)?,
        read_terms(dir, &entry.terms)?,
        read_terms(dir, &entry.cross_terms)?,
        read_terms(dir, &entry.rhs_terms)?,
        scale,
    )
}

pub fn save_rom(dir: &Path, bundle: &RomBundle) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rom = &bundle.rom;
    mtx::write_dense(&dir.join("V.mtx"), rom.basis().matrix())?;
    let estimator = match &bundle.estimator {
        None => None,
        Some(state) => {
            let mut entry = EstimatorEntry {
                kind: state.kind(),
                basis: None,
                trajectory_basis: None,
                random_vectors: None,
                terms: Vec::new(),
                cross_terms: Vec::new(),
                rhs_terms: Vec::new(),
            };
            match state {
                EstimatorState::Proposed(space) => {
                    write_residual_system(dir, "Ve", &space.residual, &mut entry)?;
                    mtx::write_dense(&dir.join("Vr.mtx"), space.v_r.matrix())?;
                    entry.trajectory_basis = Some("Vr.mtx".into());
                }
                EstimatorState::Randomized(s) => {
                    write_residual_system(dir, "Vrd", &s.residual, &mut entry)?;
                    mtx::write_dense(&dir.join("Z.mtx"), &s.z)?;
                    entry.random_vectors = Some("Z.mtx".into());
                }
                EstimatorState::Standard(_) | EstimatorState::Residual => {}
            }
            Some(entry)
        }
    };
    let manifest = RomManifest {
        format: ROM_FORMAT.into(),
        version: ROM_VERSION,
        n: rom.n(),
        r: rom.r(),
        ports: rom.ports(),
        scale: rom.scale(),
        domain: rom.domain().clone(),
        basis: "V.mtx".into(),
        matrix_terms: write_terms(dir, "Ahat", rom.terms())?,
        rhs_terms: write_terms(dir, "Bhat", rom.rhs_terms())?,
        estimator,
        metadata: bundle.metadata.clone(),
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
}

pub fn load_rom(dir: &Path) -> Result<RomBundle> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: RomManifest = serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.to_string()))?;
    if m.format != ROM_FORMAT {
        return Err(Error::parse(&path, format!("expected format {ROM_FORMAT:?}, found {:?}", m.format)));
    }
    if m.version != ROM_VERSION {
        return Err(Error::parse(&path, format!("unsupported version {}", m.version)));
    }
    let basis = read_basis(dir, &m.basis)?;
    if basis.nrows() == m.n && basis.ncols() == m.r {
        let rom = ReducedModel::from_parts(
            basis,
            read_terms(dir, &m.matrix_terms)?,
            read_terms(dir, &m.rhs_terms)?,
            m.scale,
            m.domain,
        )?;
        let estimator = match &m.estimator {
            None => None,
            Some(e) => Some(match e.kind {
                EstimatorKind::Standard => EstimatorState::Standard(InfSupCache::new(DEFAULT_SVD_CAP)),
                EstimatorKind::Residual => EstimatorState::Residual,
                EstimatorKind::Proposed => {
                    let residual = read_residual_system(dir, e, m.scale)?;
                    let v_r = match &e.trajectory_basis {
                        Some(f) => read_basis(dir, f)?,
                        None => BasisMatrix::empty(m.n),
                    };
                    EstimatorState::Proposed(ErrorSpace { v_r, residual })
                }
                EstimatorKind::Randomized => {
                    let residual = read_residual_system(dir, e, m.scale)?;
                    let zf = e
                        .random_vectors
                        .as_deref()
                        .ok_or_else(|| Error::parse(&path, "randomized estimator entry lacks random vectors"))?;
                    let z: CMat = mtx::read_dense(&dir.join(zf))?;
                    let z_hat = residual.basis().matrix().transpose() * &z;
                    EstimatorState::Randomized(RandomizedState { z, z_hat, residual })
                }
            }),
        };
        if let Some(rs) = estimator.as_ref().and_then(|s| s.residual_system()) {
            if rs.rom_dim() != rom.r() {
                return Err(Error::mismatch("estimator cross terms", rom.r(), rs.rom_dim()));
            }
        }
        Ok(RomBundle {
            rom,
            estimator,
            metadata: m.metadata,
        })
    } else {
        Err(Error::mismatch(
            "rom basis",
            format!("{}x{}", m.n, m.r),
            format!("{}x{}", basis.nrows(), basis.ncols()),
        ))
    }
}
