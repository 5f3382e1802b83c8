use std::ffi::OsString;
use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use patrol_core::seeds::derive_seed;
use patrol_core::OptimizerConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Everything needed to rerun a solve bit for bit.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub subcommand: String,
    pub config: OptimizerConfig,
    pub restarts: usize,
    pub seeds: Seeds,
    pub graph_sha256: String,
    pub artifacts: Vec<Artifact>,
    pub versions: Versions,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Serialize)]
pub struct Seeds {
    pub root: u64,
    /// Seed of the random initial strategy of each restart.
    pub per_restart: Vec<u64>,
}

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub patrol_cli: String,
    pub patrol_core: String,
}

pub fn unix_time() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

impl RunManifest {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        argv: &[OsString],
        subcommand: &str,
        config: &OptimizerConfig,
        restarts: usize,
        seed: u64,
        graph_text: &str,
        artifacts: &[(&str, &String)],
        started: f64,
        wall_time_s: f64,
    ) -> Self {
        Self {
            command_line: argv.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
            subcommand: subcommand.to_string(),
            config: *config,
            restarts,
            seeds: Seeds {
                root: seed,
                per_restart: (0..restarts as u64).map(|i| derive_seed(seed, i)).collect(),
            },
            graph_sha256: sha256_hex(graph_text.as_bytes()),
            artifacts: artifacts
                .iter()
                .map(|(name, text)| Artifact {
                    file: name.to_string(),
                    sha256: sha256_hex(text.as_bytes()),
                })
                .collect(),
            versions: Versions {
                patrol_cli: env!("CARGO_PKG_VERSION").to_string(),
                patrol_core: patrol_core::VERSION.to_string(),
            },
            started_unix_s: started,
            finished_unix_s: unix_time(),
            wall_time_s,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::sha256_hex;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
