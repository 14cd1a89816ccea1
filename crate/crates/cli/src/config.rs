//! `--config` expansion and run manifests.
//!
//! A config file is a JSON object whose keys are long flag names. A run
//! manifest written by any subcommand is also a valid config: its `args`
//! object is used. Config flags are inserted right after the subcommand
//! name, so flags given on the command line override them.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};

pub const TOOL: &str = "reverbkit";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn flag_args(key: &str, value: &Value, out: &mut Vec<OsString>) -> Result<()> {
    let flag = format!("--{}", key.replace('_', "-"));
    let scalar = |v: &Value| -> Result<String> {
        Ok(match v {
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            Value::Bool(b) => b.to_string(),
            other => bail!("config key {key}: unsupported value {other}"),
        })
    };
    match value {
        Value::Null | Value::Bool(false) => {}
        Value::Bool(true) => out.push(flag.into()),
        Value::Array(items) => {
            if !items.is_empty() {
                let joined: Vec<String> = items.iter().map(scalar).collect::<Result<_>>()?;
                out.push(flag.into());
                out.push(joined.join(",").into());
            }
        }
        Value::Object(_) => bail!("config key {key}: nested objects are not supported"),
        v => {
            out.push(flag.into());
            out.push(scalar(v)?.into());
        }
    }
    Ok(())
}

/// Flags equivalent to a config object.
pub fn config_to_args(config: &Map<String, Value>) -> Result<Vec<OsString>> {
    let map = match config.get("args") {
        Some(Value::Object(inner)) => inner,
        _ => config,
    };
    let mut out = Vec::new();
    for (k, v) in map {
        flag_args(k, v, &mut out)?;
    }
    Ok(out)
}

/// Removes `--config PATH` (or `--config=PATH`) from `argv` and splices the
/// file's flags in after the first token equal to one of `subcommands`.
pub fn expand_config(argv: Vec<OsString>, subcommands: &[&str]) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config: Option<PathBuf> = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let path = it.next().context("--config needs a path")?;
            config = Some(path.into());
        } else if let Some(p) = s.strip_prefix("--config=") {
            config = Some(p.into());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let text =
        fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let value: Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;
    let Value::Object(map) = value else {
        bail!("config {} is not a JSON object", path.display());
    };
    let extra = config_to_args(&map)?;
    let pos = rest
        .iter()
        .position(|a| subcommands.iter().any(|s| a == *s))
        .context("--config given without a subcommand")?;
    rest.splice(pos + 1..pos + 1, extra);
    Ok(rest)
}

#[derive(Serialize)]
struct RunManifest<'a, A: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    args: &'a A,
}

/// Writes `{tool, version, command, args}` to `path`.
pub fn write_run_manifest<A: Serialize>(path: &Path, command: &str, args: &A) -> Result<()> {
    let m = RunManifest {
        tool: TOOL,
        version: VERSION,
        command,
        args,
    };
    let text = serde_json::to_string_pretty(&m)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// `out.run.json` next to a file output.
pub fn manifest_for_file(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

/// `dir/run.json` for a directory output.
pub fn manifest_for_dir(dir: &Path) -> PathBuf {
    dir.join("run.json")
}
