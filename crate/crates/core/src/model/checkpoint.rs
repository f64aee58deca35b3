//! JSON checkpoint of a model.
//!
//! ```text
//! {
//!   "format": "rgae-checkpoint",
//!   "version": 1,
//!   "arch": "gae" | "vgae" | "dgae",
//!   "seed": u64,
//!   "graph_hash": hex string or null,
//!   "w1":        {"rows": J, "cols": H, "data": [row-major f64]},
//!   "w2":        {"rows": H, "cols": D, "data": [...]},
//!   "w2_logstd": same shape as w2, or null,
//!   "centers":   {"rows": K, "cols": D, "data": [...]} or null,
//!   "adam":      {"lr", "beta1", "beta2", "eps", "step", "m": [...], "v": [...]} or null
//! }
//! ```
//!
//! Adam buffers cover `[w1, w2, w2_logstd, centers]` flattened in that
//! order. Floats are written in shortest round-trip form, so loading
//! restores every weight bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::encoder::{Arch, GaeModel};
use crate::error::{Error, Result};
use crate::graph::hex;
use crate::linalg::{AdamState, DenseMatrix};

const FORMAT: &str = "rgae-checkpoint";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub arch: Arch,
    pub seed: u64,
    pub graph_hash: Option<String>,
    pub w1: DenseMatrix,
    pub w2: DenseMatrix,
    pub w2_logstd: Option<DenseMatrix>,
    pub centers: Option<DenseMatrix>,
    pub adam: Option<AdamState>,
}

impl Checkpoint {
    pub fn from_model(model: &GaeModel, graph_hash: Option<String>) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            arch: model.arch(),
            seed: model.seed(),
            graph_hash,
            w1: model.w1().clone(),
            w2: model.w2().clone(),
            w2_logstd: model.w2_logstd().cloned(),
            centers: model.centers().cloned(),
            adam: model.adam().cloned(),
        }
    }

    pub fn into_model(self) -> Result<GaeModel> {
        GaeModel::from_parts(
            self.arch,
            self.seed,
            self.w1,
            self.w2,
            self.w2_logstd,
            self.centers,
            self.adam,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.format != FORMAT || c.version != VERSION {
            return Err(Error::State(format!(
                "unsupported checkpoint {} v{}",
                c.format, c.version
            )));
        }
        Ok(c)
    }

    /// SHA-256 of the serialized weights, stable across save/load.
    pub fn weights_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.arch.as_str());
        for m in [
            Some(&self.w1),
            Some(&self.w2),
            self.w2_logstd.as_ref(),
            self.centers.as_ref(),
        ]
        .into_iter()
        .flatten()
        {
            h.update((m.rows() as u64).to_le_bytes());
            h.update((m.cols() as u64).to_le_bytes());
            for x in m.data() {
                h.update(x.to_bits().to_le_bytes());
            }
        }
        hex(&h.finalize())
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_json()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
