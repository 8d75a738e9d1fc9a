//! Run directory writer. Every file carries its format tag and the resolved
//! configuration; nothing depends on wall-clock time.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use qhdturb::exchange::{encode_binary, encode_csv, FieldData};
use qhdturb::kvdoc::KvDocument;
use serde_json::{json, Map, Value};

use crate::config::{OutputFormat, RunConfig};

pub const MANIFEST_FILE: &str = "manifest";
pub const MANIFEST_FORMAT: &str = "QHDTURB-MANIFEST-01";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SUMMARY_FORMAT: &str = "QHDTURB-SUMMARY-01";
pub const FIELDS_DIR: &str = "fields";

/// Accumulates outputs of one run and writes the manifest and summary last.
pub struct RunWriter {
    dir: PathBuf,
    command: String,
    echo: Vec<(String, String)>,
    format: OutputFormat,
    files: Vec<(String, String)>,
    summary: Map<String, Value>,
}

impl RunWriter {
    pub fn create(dir: &Path, config: &RunConfig) -> io::Result<Self> {
        fs::create_dir_all(dir.join(FIELDS_DIR))?;
        Ok(RunWriter {
            dir: dir.to_path_buf(),
            command: config.command.name().to_string(),
            echo: config.echo(),
            format: config.format,
            files: Vec::new(),
            summary: Map::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn meta(&self, extra: &[(&str, String)]) -> Vec<(String, String)> {
        let mut m = vec![("command".to_string(), self.command.clone())];
        m.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
        m.extend(self.echo.iter().map(|(k, v)| (format!("config.{k}"), v.clone())));
        m
    }

    /// Writes `fields/<name>.<ext>` in the configured exchange encoding.
    pub fn field(&mut self, name: &str, field: impl Into<FieldData>, extra: &[(&str, String)]) -> io::Result<()> {
        let field = field.into();
        let rel = format!("{FIELDS_DIR}/{name}.{}", self.format.extension());
        let mut meta = vec![("field", name.to_string())];
        meta.extend(extra.iter().cloned());
        let bytes = match self.format {
            OutputFormat::Csv => encode_csv(&field, &self.meta(&meta)).into_bytes(),
            OutputFormat::Binary => encode_binary(&field),
        };
        fs::write(self.dir.join(&rel), bytes)?;
        self.files.push((rel, format!("{} field", field.kind().name())));
        Ok(())
    }

    /// Writes a versioned CSV table: signature line, `# key = value` header
    /// with the config echo, column row, then rows.
    pub fn table(&mut self, name: &str, signature: &str, columns: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
        let mut out = format!("# {signature} csv\n");
        for (k, v) in self.meta(&[]) {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out.push_str(&columns.join(","));
        out.push('\n');
        for r in rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        fs::write(self.dir.join(name), out)?;
        self.files.push((name.to_string(), signature.to_string()));
        Ok(())
    }

    /// Writes a text file verbatim and lists it in the manifest.
    pub fn text(&mut self, name: &str, description: &str, content: &str) -> io::Result<()> {
        fs::write(self.dir.join(name), content)?;
        self.files.push((name.to_string(), description.to_string()));
        Ok(())
    }

    /// Adds a summary entry; non-finite numbers become `null`.
    pub fn summary(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    pub fn summary_map(&mut self, key: &str, values: &BTreeMap<String, f64>) {
        let m: Map<String, Value> = values.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        self.summary.insert(key.to_string(), Value::Object(m));
    }

    /// Writes `summary.json` and `manifest`.
    pub fn finish(mut self, status: &str) -> io::Result<()> {
        let config: Map<String, Value> = self.echo.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let doc = json!({
            "format": SUMMARY_FORMAT,
            "command": self.command,
            "status": status,
            "config": config,
            "values": Value::Object(std::mem::take(&mut self.summary)),
        });
        let mut text = serde_json::to_string_pretty(&doc).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(self.dir.join(SUMMARY_FILE), text)?;
        self.files.push((SUMMARY_FILE.to_string(), SUMMARY_FORMAT.to_string()));

        let mut m = KvDocument::new();
        m.set("format", MANIFEST_FORMAT);
        m.set("command", &self.command);
        m.set("status", status);
        m.set("version", env!("CARGO_PKG_VERSION"));
        m.set("files.count", self.files.len());
        for (i, (name, desc)) in self.files.iter().enumerate() {
            m.set(&format!("files.{i}.name"), name);
            m.set(&format!("files.{i}.kind"), desc);
        }
        for (k, v) in &self.echo {
            m.set(&format!("config.{k}"), v);
        }
        fs::write(self.dir.join(MANIFEST_FILE), m.to_string())
    }
}

/// Shortest round-trip decimal form, as used in every table.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}
