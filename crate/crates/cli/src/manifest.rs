//! Run manifest: records what was run, with what configuration, where the
//! outputs went, and how long it took. The manifest is the only output file
//! carrying wall-clock time, so every other artifact is reproducible
//! byte-for-byte from the same seed.

use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Duration;

/// FNV-1a over the serialized configuration, for quick "same config?" checks.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub schema_version: u32,
    pub seed: u64,
    pub config_hash: String,
    /// The fully resolved configuration, defaults included.
    pub config: serde_json::Value,
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new<T: Serialize>(
        command: &str,
        config: &T,
        seed: u64,
        out: &Path,
        elapsed: Duration,
    ) -> Self {
        let value = serde_json::to_value(config).unwrap_or_default();
        let blob = serde_json::to_vec(&value).unwrap_or_default();
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            schema_version: crate::config::SCHEMA_VERSION,
            seed,
            config_hash: format!("{:016x}", fnv1a(&blob)),
            config: value,
            input: None,
            output_dir: out.to_path_buf(),
            wall_clock_seconds: elapsed.as_secs_f64(),
        }
    }

    pub fn with_input(mut self, input: &Path) -> Self {
        self.input = Some(input.to_path_buf());
        self
    }

    pub fn write(&self, out: &Path) -> curefrail::Result<()> {
        curefrail::io::write_json(&out.join("manifest.json"), self)
    }
}
