//! Artifact emission: provenance headers, CSV/JSON rendering and atomic
//! file replacement.

use std::io::Write;
use std::path::{Path, PathBuf};

use levqsim_core::constants::CONSTANT_SET_ID;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{Format, RunConfig};
use crate::error::{io_err, CliError};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

const CONFIG_BEGIN: &str = "# config-begin";
const CONFIG_END: &str = "# config-end";

/// Config as recorded in artifacts: the output directory is left out so the
/// same run written to two places produces identical bytes.
fn recorded(config: &RunConfig) -> RunConfig {
    let mut c = config.clone();
    c.output.dir = None;
    c
}

/// `#`-prefixed provenance block that opens every CSV artifact.
pub fn csv_header(config: &RunConfig) -> String {
    let mut s = format!("# levqsim {TOOL_VERSION}\n# constants: {CONSTANT_SET_ID}\n{CONFIG_BEGIN}\n");
    for line in recorded(config).to_toml().lines() {
        s.push_str("# ");
        s.push_str(line);
        s.push('\n');
    }
    s.push_str(CONFIG_END);
    s.push('\n');
    s
}

pub fn provenance_json(config: &RunConfig) -> Value {
    serde_json::json!({
        "tool": "levqsim",
        "version": TOOL_VERSION,
        "constants": CONSTANT_SET_ID,
        "config": serde_json::to_value(recorded(config)).expect("config serialises"),
    })
}

/// Rebuilds the run configuration from an artifact written by this tool,
/// CSV or JSON.
pub fn parse_provenance(text: &str) -> Result<RunConfig, CliError> {
    if text.trim_start().starts_with('{') {
        let v: Value = serde_json::from_str(text).map_err(|e| CliError::validation(format!("artifact: {e}")))?;
        let cfg = v
            .pointer("/provenance/config")
            .ok_or_else(|| CliError::validation("artifact has no provenance block"))?;
        return serde_json::from_value(cfg.clone())
            .map_err(|e| CliError::validation(format!("provenance config: {e}")));
    }
    let mut lines = text.lines();
    if !lines.any(|l| l == CONFIG_BEGIN) {
        return Err(CliError::validation("artifact has no provenance header"));
    }
    let mut toml_text = String::new();
    for l in lines {
        if l == CONFIG_END {
            return RunConfig::from_toml(&toml_text);
        }
        let body = l
            .strip_prefix("# ")
            .or_else(|| l.strip_prefix('#'))
            .ok_or_else(|| CliError::validation("unterminated provenance header"))?;
        toml_text.push_str(body);
        toml_text.push('\n');
    }
    Err(CliError::validation("unterminated provenance header"))
}

/// Strips the provenance header from a CSV artifact.
pub fn csv_body(text: &str) -> &str {
    match text.find(&format!("{CONFIG_END}\n")) {
        Some(i) => &text[i + CONFIG_END.len() + 1..],
        None => text,
    }
}

fn cell_value(s: &str) -> Value {
    if let Ok(i) = s.parse::<i64>() {
        return Value::from(i);
    }
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => Value::from(x),
        Ok(_) => Value::Null,
        Err(_) => Value::from(s),
    }
}

/// Turns a headed CSV table into an array of row objects. Non-finite
/// numbers become `null`.
pub fn csv_to_json(csv: &str) -> Value {
    let mut lines = csv.lines();
    let Some(head) = lines.next() else {
        return Value::Array(Vec::new());
    };
    let cols: Vec<&str> = head.split(',').collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let obj: Map<String, Value> = cols
                .iter()
                .zip(l.split(','))
                .map(|(c, v)| (c.to_string(), cell_value(v)))
                .collect();
            Value::Object(obj)
        })
        .collect();
    Value::Array(rows)
}

/// Writes `bytes` to `path` via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    // temp files are created owner-only; artifacts are ordinary files
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))
            .map_err(io_err(path))?;
    }
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Collects the artifacts of one run under a common directory and config.
pub struct Emitter<'a> {
    pub dir: PathBuf,
    pub config: &'a RunConfig,
    pub format: Format,
    pub written: Vec<PathBuf>,
}

impl<'a> Emitter<'a> {
    pub fn new(dir: impl Into<PathBuf>, config: &'a RunConfig) -> Self {
        Self {
            dir: dir.into(),
            config,
            format: config.output.format,
            written: Vec::new(),
        }
    }

    /// Renders a table with one of the core CSV writers and stores it as
    /// `<stem>.csv` or `<stem>.json` depending on the format.
    pub fn table(
        &mut self,
        stem: &str,
        render: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<PathBuf, CliError> {
        let mut body = Vec::new();
        render(&mut body).map_err(io_err(self.dir.join(stem)))?;
        let body = String::from_utf8(body).expect("writers emit UTF-8");
        match self.format {
            Format::Csv => {
                let text = csv_header(self.config) + &body;
                self.put(&format!("{stem}.csv"), text.as_bytes())
            }
            Format::Json => {
                let v = serde_json::json!({
                    "provenance": provenance_json(self.config),
                    "data": csv_to_json(&body),
                });
                self.put(&format!("{stem}.json"), pretty(&v).as_bytes())
            }
        }
    }

    /// Stores a structured record as `<stem>.json` regardless of format.
    pub fn record(&mut self, stem: &str, data: &impl Serialize) -> Result<PathBuf, CliError> {
        let v = serde_json::json!({
            "provenance": provenance_json(self.config),
            "data": serde_json::to_value(data).map_err(|e| CliError::numerical(format!("{stem}: {e}")))?,
        });
        self.put(&format!("{stem}.json"), pretty(&v).as_bytes())
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.written.push(path.clone());
        Ok(path)
    }
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON value serialises");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{CommandKind, WkbConfig};

    fn cfg() -> RunConfig {
        RunConfig {
            command: Some(CommandKind::Wkb),
            wkb: Some(WkbConfig::default()),
            ..RunConfig::default()
        }
    }

    #[test]
    fn header_round_trips() {
        let c = cfg();
        let text = csv_header(&c) + "a,b\n1,2\n";
        assert_eq!(parse_provenance(&text).unwrap(), c);
        assert_eq!(csv_body(&text), "a,b\n1,2\n");
        let j = pretty(&serde_json::json!({"provenance": provenance_json(&c), "data": []}));
        assert_eq!(parse_provenance(&j).unwrap(), c);
    }

    #[test]
    fn output_dir_is_not_recorded() {
        let mut a = cfg();
        a.output.dir = Some("/tmp/x".into());
        assert_eq!(csv_header(&a), csv_header(&cfg()));
    }

    #[test]
    fn csv_conversion() {
        let v = csv_to_json("x,y,ok\n1.5e0,nan,1\n");
        assert_eq!(v[0]["x"], 1.5);
        assert!(v[0]["y"].is_null());
        assert_eq!(v[0]["ok"], 1);
    }

    #[test]
    fn missing_header_is_an_error() {
        assert!(parse_provenance("a,b\n").is_err());
        assert!(parse_provenance("# config-begin\n# [wkb]\n").is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("sub/f.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
