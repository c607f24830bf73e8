use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

/// Exact decimal form for regression baselines.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub struct Sink {
    dir: PathBuf,
    meta: Value,
}

impl Sink {
    pub fn new(dir: &Path, meta: Value) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), meta })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// CSV file plus a `<name>.meta.json` sidecar.
    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        let sidecar = json!({ "file": name, "columns": header, "meta": self.meta });
        fs::write(self.path(&format!("{name}.meta.json")), pretty(&sidecar)?)?;
        Ok(())
    }

    /// JSON file with the metadata embedded under "meta".
    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> anyhow::Result<()> {
        let mut v = serde_json::to_value(body)?;
        if let Value::Object(m) = &mut v {
            m.insert("meta".into(), self.meta.clone());
        }
        fs::write(self.path(name), pretty(&v)?)?;
        Ok(())
    }
}

fn pretty(v: &Value) -> serde_json::Result<String> {
    serde_json::to_string_pretty(v).map(|mut s| {
        s.push('\n');
        s
    })
}
