//! Reproducibility manifest: content hashes of the configuration, the
//! dataset, and every artifact in the output directory. No timestamps or
//! machine entropy, so identical runs produce identical manifests.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub data_sha256: String,
    /// Artifact name → sha256, sorted by name.
    pub artifacts: std::collections::BTreeMap<String, String>,
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(hex_digest(&bytes))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

impl Manifest {
    pub fn collect(
        seed: u64,
        config_path: &Path,
        data_path: &Path,
        out_dir: &Path,
    ) -> Result<Self> {
        let mut artifacts = std::collections::BTreeMap::new();
        let mut entries: Vec<_> = std::fs::read_dir(out_dir)
            .with_context(|| format!("listing {}", out_dir.display()))?
            .collect::<std::io::Result<_>>()?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let name = entry.file_name().to_string_lossy().into_owned();
            if !entry.file_type()?.is_file() || name == "manifest.json" || name == "summary.txt" {
                continue;
            }
            artifacts.insert(name, hash_file(&entry.path())?);
        }
        Ok(Manifest {
            tool: "bvarkit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config_sha256: hash_file(config_path)?,
            data_sha256: hash_file(data_path)?,
            artifacts,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            hex_digest(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
