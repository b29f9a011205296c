use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GridFunction;
use crate::error::{Error, Result};

/// JSON manifest accompanying a flat little-endian `f64` sample file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridManifest {
    pub d: usize,
    pub m: i32,
    pub origin: Vec<i64>,
    pub extent: Vec<usize>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub background: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl GridFunction {
    pub fn manifest(&self) -> GridManifest {
        GridManifest {
            d: self.dim(),
            m: self.resolution(),
            origin: self.origin().to_vec(),
            extent: self.extent().to_vec(),
            background: self.background(),
        }
    }

    /// Writes the manifest as JSON and the samples in lexicographic cell order.
    pub fn save(&self, manifest: &Path, samples: &Path) -> Result<()> {
        fs::write(manifest, serde_json::to_string_pretty(&self.manifest())?)?;
        let mut bytes = Vec::with_capacity(self.len() * 8);
        for v in self.samples() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(samples, bytes)?;
        Ok(())
    }

    pub fn load(manifest: &Path, samples: &Path) -> Result<Self> {
        let man: GridManifest = serde_json::from_str(&fs::read_to_string(manifest)?)?;
        let bytes = fs::read(samples)?;
        if bytes.len() % 8 != 0 {
            return Err(Error::InvalidGrid(format!(
                "sample file length {} is not a multiple of 8",
                bytes.len()
            )));
        }
        let vals = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(GridFunction::new(man.d, man.m, &man.origin, &man.extent, vals)?.with_background(man.background))
    }
}
