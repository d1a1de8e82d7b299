//! Versioned model persistence.
//!
//! An artifact is the flat raw parameter vector plus enough structure to
//! rebuild the model: family tag, latent dimension and the fixed
//! piecewise-linear knot grids (quantile on the unit interval, warp on the
//! real line). JSON keeps artifacts human-inspectable; `f64` values are
//! written in shortest round-trip form, so save/load reproduces the
//! parameter vector bit-exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Family, ModelSpec, RealizedModel};
use crate::pwl::{MonotonePwl, PwlDomain};

pub const ARTIFACT_VERSION: &str = "1";

/// Structural metadata; grids are stored as knot abscissae only, the knot
/// values live in the parameter vector.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Structure {
    #[serde(default)]
    pub dim: usize,
    #[serde(default)]
    pub quantile_knots: Option<Vec<f64>>,
    #[serde(default)]
    pub warp_knots: Option<Vec<f64>>,
}

/// Where the parameters came from.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

/// A persisted model: family, structure, flat raw parameters, provenance.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelArtifact {
    pub version: String,
    pub family: String,
    pub structure: Structure,
    pub params: Vec<f64>,
    pub provenance: Provenance,
}

impl ModelArtifact {
    /// Packs a spec and raw vector, validating their consistency.
    pub fn from_spec(spec: &ModelSpec, params: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if params.len() != spec.param_len() {
            return Err(Error::StructureMismatch(format!(
                "parameter vector has length {}, structure requires {}",
                params.len(),
                spec.param_len()
            )));
        }
        Ok(ModelArtifact {
            version: ARTIFACT_VERSION.to_string(),
            family: spec.family.tag().to_string(),
            structure: Structure {
                dim: spec.dim,
                quantile_knots: spec.quantile.as_ref().map(|q| q.knot_inputs().to_vec()),
                warp_knots: spec.warp.as_ref().map(|w| w.knot_inputs().to_vec()),
            },
            params,
            provenance,
        })
    }

    /// Rebuilds the structural spec; template raw offsets are taken from
    /// the stored parameter vector.
    pub fn to_spec(&self) -> Result<ModelSpec> {
        if self.version != ARTIFACT_VERSION {
            return Err(Error::VersionMismatch(self.version.clone()));
        }
        let family = Family::from_tag(&self.family)?;
        let core_len = match family {
            Family::GaussianLs | Family::PwlLs => 5,
            Family::Plda => self.structure.dim,
        };
        if family == Family::Plda && self.structure.dim == 0 {
            return Err(Error::StructureMismatch("PLDA artifact without dim".into()));
        }
        if family == Family::PwlLs && self.structure.quantile_knots.is_none() {
            return Err(Error::StructureMismatch(
                "pwl-ls artifact without quantile knots".into(),
            ));
        }
        let mut at = core_len;
        let take = |at: &mut usize, len: usize| -> Result<Vec<f64>> {
            if self.params.len() < *at + len {
                return Err(Error::StructureMismatch(format!(
                    "parameter vector too short: need {} values, have {}",
                    *at + len,
                    self.params.len()
                )));
            }
            let slice = self.params[*at..*at + len].to_vec();
            *at += len;
            Ok(slice)
        };
        let quantile = match (&family, &self.structure.quantile_knots) {
            (Family::PwlLs, Some(knots)) => Some(MonotonePwl::new(
                PwlDomain::UnitInterval,
                knots.clone(),
                take(&mut at, knots.len())?,
            )?),
            _ => None,
        };
        let warp = match &self.structure.warp_knots {
            Some(knots) => Some(MonotonePwl::new(
                PwlDomain::RealLine,
                knots.clone(),
                take(&mut at, knots.len())?,
            )?),
            None => None,
        };
        let spec = ModelSpec {
            family,
            dim: self.structure.dim,
            quantile,
            warp,
        };
        if self.params.len() != spec.param_len() {
            return Err(Error::StructureMismatch(format!(
                "parameter vector has length {}, structure requires {}",
                self.params.len(),
                spec.param_len()
            )));
        }
        Ok(spec)
    }

    /// Realizes plain-`f64` model parameters.
    pub fn realized(&self) -> Result<RealizedModel> {
        self.to_spec()?.realized(&self.params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Invalid(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let artifact: ModelArtifact =
            serde_json::from_str(&text).map_err(|e| Error::MalformedRow {
                line: 0,
                msg: format!("{}: {e}", path.display()),
            })?;
        // full structural validation happens in to_spec
        artifact.to_spec()?;
        Ok(artifact)
    }
}

/// Hex SHA-256 of a serializable configuration, for provenance.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let json = serde_json::to_string(cfg).unwrap_or_default();
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
