// SPDX-License-Identifier: Apache-2.0

//! Run manifests and the hash that ties output files to them.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use dispel_core::sweep::sha_hex;

use crate::io::{read_text, write_text};
use dispel_core::Result;

#[derive(Debug, Clone, Serialize)]
pub struct ConfigInput {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_paths: Vec<ConfigInput>,
    pub seeds: Vec<u64>,
    pub tool_version: String,
    /// Hash over command, tool version, seeds, input contents and
    /// parameters. Paths and timestamps are excluded.
    pub config_hash: String,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    pub output_paths: Vec<String>,
    pub parameters: String,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Collects inputs while a command runs.
#[derive(Debug)]
pub struct Recorder {
    command: String,
    inputs: Vec<ConfigInput>,
    seeds: Vec<u64>,
    parameters: String,
    started: u64,
    outputs: Vec<String>,
}

impl Recorder {
    pub fn new(command: &str) -> Self {
        Recorder {
            command: command.to_string(),
            inputs: Vec::new(),
            seeds: Vec::new(),
            parameters: String::new(),
            started: now(),
            outputs: Vec::new(),
        }
    }

    /// Reads an input file and folds its contents into the hash.
    pub fn read(&mut self, path: &Path) -> Result<String> {
        let text = read_text(path)?;
        self.inputs.push(ConfigInput { path: path.display().to_string(), sha256: sha_hex(&text) });
        Ok(text)
    }

    pub fn seed(&mut self, seed: u64) {
        self.seeds.push(seed);
    }

    pub fn param(&mut self, key: &str, value: impl std::fmt::Display) {
        self.parameters.push_str(&format!("{key}={value};"));
    }

    pub fn hash(&self) -> String {
        let digests: Vec<&str> = self.inputs.iter().map(|i| i.sha256.as_str()).collect();
        sha_hex(&format!(
            "{}|{}|{:?}|{}|{}",
            self.command,
            env!("CARGO_PKG_VERSION"),
            self.seeds,
            digests.join(","),
            self.parameters
        ))
    }

    /// `# manifest <hash>` line for CSV headers.
    pub fn header(&self) -> String {
        format!("# manifest {}\n", self.hash())
    }

    pub fn output(&mut self, path: &Path, contents: &str) -> Result<()> {
        write_text(path, contents)?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    pub fn finish(self, manifest_path: &Path) -> Result<RunManifest> {
        let m = RunManifest {
            config_hash: self.hash(),
            command: self.command,
            config_paths: self.inputs,
            seeds: self.seeds,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_s: self.started,
            finished_unix_s: now(),
            output_paths: self.outputs,
            parameters: self.parameters,
        };
        let json = serde_json::to_string_pretty(&m).expect("manifest serializes");
        write_text(manifest_path, &json)?;
        Ok(m)
    }
}

/// `dir/manifest.json` for directory outputs, `file.manifest.json` otherwise.
pub fn manifest_path_for_file(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_timestamps_and_tracks_parameters() {
        let mut a = Recorder::new("x");
        a.param("k", 1);
        a.seed(42);
        let mut b = Recorder::new("x");
        b.started += 100;
        b.param("k", 1);
        b.seed(42);
        assert_eq!(a.hash(), b.hash());
        b.param("j", 2);
        assert_ne!(a.hash(), b.hash());
        assert!(a.header().starts_with("# manifest ") && a.header().ends_with('\n'));
    }

    #[test]
    fn sibling_manifest_path() {
        assert_eq!(manifest_path_for_file(Path::new("a/m.json")), PathBuf::from("a/m.json.manifest.json"));
    }
}
