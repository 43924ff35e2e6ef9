use std::path::Path;
use std::time::Instant;

use nvmux::io::write_json;
use serde::Serialize;
use serde_json::Value;

/// One pass/fail comparison against a threshold.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: String,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, threshold: impl Into<String>, pass: bool) -> Self {
        Self {
            name: name.to_string(),
            value,
            threshold: threshold.into(),
            pass,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub name: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub wall_clock_s: f64,
    pub results: Value,
    pub checks: Vec<Check>,
    pub outputs: Vec<String>,
}

pub struct ReportBuilder {
    started: Instant,
    pub command: String,
    pub name: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub checks: Vec<Check>,
    pub outputs: Vec<String>,
}

impl ReportBuilder {
    pub fn new(command: &str, name: &str, config_hash: &str, seed: Option<u64>) -> Self {
        Self {
            started: Instant::now(),
            command: command.to_string(),
            name: name.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            checks: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn output(&mut self, path: &Path) {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        self.outputs.push(name);
    }

    /// Writes `report.json` (and `checks.json` when there are checks).
    /// Returns whether every check passed.
    pub fn finish(mut self, dir: &Path, results: Value) -> nvmux::Result<bool> {
        let report_path = dir.join("report.json");
        let checks_path = dir.join("checks.json");
        self.output(&report_path);
        if !self.checks.is_empty() {
            self.output(&checks_path);
        }
        let report = RunReport {
            tool: "nvmux",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            name: self.name,
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            wall_clock_s: self.started.elapsed().as_secs_f64(),
            results,
            checks: self.checks,
            outputs: self.outputs,
        };
        if !report.checks.is_empty() {
            write_json(
                &checks_path,
                &serde_json::json!({ "config_hash": report.config_hash, "checks": report.checks }),
            )?;
            for c in &report.checks {
                log::info!("{} {}: {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
            }
        }
        write_json(&report_path, &report)?;
        Ok(report.checks.iter().all(|c| c.pass))
    }
}
