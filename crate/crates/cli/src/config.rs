//! `--config file.json`: keys mirror long flag names and are spliced into the
//! argument list ahead of the explicit flags, so explicit flags win.
//!
//! A key named after the subcommand may hold an object of flags that apply to
//! that subcommand only; other object-valued keys are ignored.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::Context;
use serde_json::Value;

use crate::failure::{CliResult, Failure};

const SUBCOMMANDS: [&str; 6] = ["solve", "compare", "materialize", "horizon", "bench", "layer"];

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn push_flag(out: &mut Vec<OsString>, key: &str, value: &Value) -> CliResult<()> {
    let flag = format!("--{}", key.replace('_', "-"));
    let text = match value {
        Value::Null | Value::Bool(false) | Value::Object(_) => return Ok(()),
        Value::Bool(true) => {
            out.push(flag.into());
            return Ok(());
        }
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        Value::Array(items) => items
            .iter()
            .map(|v| match v {
                Value::String(s) => Ok(s.clone()),
                Value::Number(n) => Ok(n.to_string()),
                _ => Err(Failure::usage(format!("config key `{key}` must hold scalars"))),
            })
            .collect::<CliResult<Vec<_>>>()?
            .join(","),
    };
    out.push(flag.into());
    out.push(text.into());
    Ok(())
}

/// Returns `args` with the config file's flags inserted after the subcommand.
pub fn expand(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("reading config {}", path.display()))
        .map_err(Failure::Input)?;
    let json: Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))
        .map_err(Failure::Input)?;
    let Value::Object(map) = json else {
        return Err(Failure::Input(anyhow::anyhow!("config must be a JSON object")));
    };
    let Some(pos) = args
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
    else {
        return Ok(args);
    };
    let sub = args[pos].to_string_lossy().into_owned();

    let mut injected = Vec::new();
    for (key, value) in &map {
        if map.get(&sub).and_then(Value::as_object).is_some_and(|s| s.contains_key(key)) {
            continue;
        }
        push_flag(&mut injected, key, value)?;
    }
    if let Some(Value::Object(section)) = map.get(&sub) {
        for (key, value) in section {
            push_flag(&mut injected, key, value)?;
        }
    }
    let mut out = args;
    out.splice(pos + 1..pos + 1, injected);
    Ok(out)
}
