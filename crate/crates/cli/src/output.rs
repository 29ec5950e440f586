//! Errors, exit codes and atomic output.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;
use twoway_core::Error;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, files or schema; exit 2.
    Input(String),
    /// The evaluation itself reports infeasibility; exit 1.
    Infeasible(String),
}

impl CliError {
    pub fn from_core(e: Error) -> Self {
        match e {
            Error::Infeasible(_) | Error::NonConvergence { .. } => {
                CliError::Infeasible(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Infeasible(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Infeasible(m) => m,
        }
    }
}

pub fn core<T>(r: twoway_core::Result<T>) -> Result<T, CliError> {
    r.map_err(CliError::from_core)
}

/// Writes `bytes` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let ctx = |e: std::io::Error| CliError::Input(format!("{}: {e}", path.display()));
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(ctx)?;
    tmp.write_all(bytes).map_err(ctx)?;
    tmp.persist(path).map_err(|e| ctx(e.error))?;
    Ok(())
}

/// Result object with the run echo under `"run"`.
pub fn with_run(result: Value, run: &Value) -> Value {
    let mut obj = match result {
        Value::Object(m) => m,
        other => {
            let mut m = serde_json::Map::new();
            m.insert("result".into(), other);
            m
        }
    };
    obj.insert("run".into(), run.clone());
    Value::Object(obj)
}

/// Emits JSON to `out` or stdout.
pub fn emit_json(value: &Value, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("json values serialize") + "\n";
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

/// Emits CSV to `out` (with a `.run.json` sidecar holding `meta`) or stdout.
pub fn emit_csv(csv: &[u8], out: Option<&Path>, meta: &Value) -> Result<(), CliError> {
    match out {
        Some(p) => {
            write_atomic(p, csv)?;
            let mut side = meta.clone();
            if let Value::Object(m) = &mut side {
                m.insert("output".into(), p.display().to_string().into());
            }
            emit_json(&side, Some(&sidecar_path(p)))
        }
        None => {
            print!("{}", String::from_utf8_lossy(csv));
            Ok(())
        }
    }
}
