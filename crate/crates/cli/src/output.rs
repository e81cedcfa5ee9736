//! Serialized writing of tables, reports and the run manifest.

use crate::config::{OutputFormat, RunConfig};
use crate::error::CliError;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

/// Rows of already formatted cells under a fixed header.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    fn to_json(&self) -> String {
        let records: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|r| {
                self.header
                    .iter()
                    .zip(r)
                    .map(|(h, v)| {
                        let value = v
                            .parse::<f64>()
                            .ok()
                            .and_then(serde_json::Number::from_f64)
                            .map_or_else(|| serde_json::Value::String(v.clone()), serde_json::Value::Number);
                        (h.to_string(), value)
                    })
                    .collect()
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&records).unwrap_or_default();
        s.push('\n');
        s
    }
}

/// Formats a float so that it parses back to the same value.
pub fn f(v: f64) -> String {
    format!("{v}")
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config_sha256: String,
    config_file: &'a str,
    config: &'a str,
    outputs: &'a [Artifact],
}

pub const CONFIG_ECHO: &str = "config.echo";
pub const MANIFEST: &str = "manifest.json";

/// The single writer of a run's output directory.
pub struct Sink {
    dir: PathBuf,
    format: OutputFormat,
    artifacts: Vec<Artifact>,
}

impl Sink {
    pub fn create(dir: &Path, format: OutputFormat) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display().to_string(), e))?;
        Ok(Self { dir: dir.to_path_buf(), format, artifacts: Vec::new() })
    }

    fn write(&mut self, name: String, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(&name);
        fs::write(&path, body).map_err(|e| CliError::io(path.display().to_string(), e))?;
        self.artifacts.push(Artifact { file: name, sha256: sha256_hex(body.as_bytes()) });
        Ok(())
    }

    pub fn table(&mut self, stem: &str, table: &Table) -> Result<(), CliError> {
        match self.format {
            OutputFormat::Csv => self.write(format!("{stem}.csv"), &table.to_csv()),
            OutputFormat::Json => self.write(format!("{stem}.json"), &table.to_json()),
        }
    }

    pub fn report<T: Serialize>(&mut self, stem: &str, value: &T) -> Result<(), CliError> {
        let mut body = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
        body.push('\n');
        self.write(format!("{stem}.json"), &body)
    }

    /// Writes the config echo and the manifest describing every artifact.
    pub fn finish(self, command: &str, config: &RunConfig) -> Result<Vec<Artifact>, CliError> {
        let echo = config.echo();
        let echo_path = self.dir.join(CONFIG_ECHO);
        fs::write(&echo_path, &echo).map_err(|e| CliError::io(echo_path.display().to_string(), e))?;
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: config.seed,
            config_sha256: sha256_hex(echo.as_bytes()),
            config_file: CONFIG_ECHO,
            config: &echo,
            outputs: &self.artifacts,
        };
        let mut body = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Config(e.to_string()))?;
        body.push('\n');
        let path = self.dir.join(MANIFEST);
        fs::write(&path, body).map_err(|e| CliError::io(path.display().to_string(), e))?;
        Ok(self.artifacts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_tables() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![f(0.1), "x".into()]);
        assert_eq!(t.to_csv(), "a,b\n0.1,x\n");
        let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v[0]["a"], 0.1);
        assert_eq!(v[0]["b"], "x");
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 1e21] {
            assert_eq!(f(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
