// SPDX-License-Identifier: Apache-2.0

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{CliError, Command};

/// What a command read and wrote, plus command-specific details.
#[derive(Debug, Clone, Default)]
pub(crate) struct RunRecord {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub details: serde_json::Value,
}

/// Written as `<out>.manifest.json` after every successful command.
/// `replay` re-parses `args` and pins `seed`, so a rerun does not depend on
/// the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub wall_time_ms: u128,
    pub details: serde_json::Value,
}

impl RunManifest {
    pub(crate) fn new(command: &Command, args: Vec<String>, record: RunRecord, elapsed: Duration) -> Self {
        Self {
            command: command.name().to_owned(),
            args,
            config: serde_json::to_value(command).unwrap_or(serde_json::Value::Null),
            inputs: record.inputs,
            outputs: record.outputs,
            seed: command.seed(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            wall_time_ms: elapsed.as_millis(),
            details: record.details,
        }
    }

    pub fn path_for(out: &Path) -> PathBuf {
        let mut s = OsString::from(out.as_os_str());
        s.push(".manifest.json");
        PathBuf::from(s)
    }

    pub(crate) fn write_next_to(&self, out: &Path) -> Result<(), CliError> {
        let json = serde_json::to_vec_pretty(self)?;
        crate::io::write_atomic(&Self::path_for(out), &json)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let data = std::fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        serde_json::from_slice(&data).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}
