use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::Failure;

pub const MANIFEST_NAME: &str = "run_manifest.json";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    /// Files written into the output directory, relative to it.
    pub outputs: Vec<String>,
    pub duration_seconds: f64,
}

/// Tracks one command invocation and writes its manifest after success.
pub struct Run {
    command: String,
    started: Instant,
}

impl Run {
    pub fn start(command: &str) -> Self {
        Run {
            command: command.into(),
            started: Instant::now(),
        }
    }

    pub fn finish<C: Serialize>(
        self,
        out: &Path,
        config: &C,
        seed: Option<u64>,
        mut outputs: Vec<String>,
    ) -> Result<(), Failure> {
        outputs.sort();
        let manifest = RunManifest {
            command: self.command,
            config: serde_json::to_value(config).map_err(|e| Failure::Runtime(e.to_string()))?,
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            outputs,
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Runtime(e.to_string()))?;
        write_atomic(&out.join(MANIFEST_NAME), &(text + "\n"))
    }
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, contents)
        .and_then(|_| std::fs::rename(&tmp, path))
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    write_atomic(path, &(text + "\n"))
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))
}
