//! Config files are TOML. Top-level keys apply to every subcommand that has
//! a flag of that name; a `[subcommand]` table applies to that subcommand
//! only. Keys are long flag names (`learning-rate`, or `learning_rate`).
//! Flags given on the command line win over the file.
//!
//! ```toml
//! seed = 7
//! splits = 100
//!
//! [consistency]
//! k = [40, 100, 135]
//! ```

use std::ffi::OsString;
use std::path::Path;

use clap::Command;

use crate::error::{CliError, Result};

pub fn load(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    text.parse::<toml::Table>()
        .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
}

fn flag_names(cmd: &Command) -> Vec<String> {
    cmd.get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect()
}

fn render(key: &str, value: &toml::Value) -> Result<Vec<OsString>> {
    let scalar = |v: &toml::Value| -> Result<String> {
        match v {
            toml::Value::String(s) => Ok(s.clone()),
            toml::Value::Integer(i) => Ok(i.to_string()),
            toml::Value::Float(f) => Ok(f.to_string()),
            other => Err(CliError::Usage(format!("config key {key}: unsupported value {other}"))),
        }
    };
    let flag = OsString::from(format!("--{key}"));
    Ok(match value {
        toml::Value::Boolean(true) => vec![flag],
        toml::Value::Boolean(false) => vec![],
        toml::Value::Array(items) => {
            let parts = items.iter().map(scalar).collect::<Result<Vec<_>>>()?;
            vec![flag, parts.join(",").into()]
        }
        v => vec![flag, scalar(v)?.into()],
    })
}

/// Flags implied by `table` for subcommand `sub`, to be placed before the
/// user's own flags so that the latter override them.
pub fn config_args(table: &toml::Table, root: &Command, sub: &str) -> Result<Vec<OsString>> {
    let cmd = root
        .find_subcommand(sub)
        .ok_or_else(|| CliError::Internal(format!("unknown subcommand {sub}")))?;
    let own = flag_names(cmd);
    let any: Vec<String> = root.get_subcommands().flat_map(flag_names).collect();
    let mut out = Vec::new();
    let mut section = None;
    for (key, value) in table {
        if let toml::Value::Table(t) = value {
            if root.find_subcommand(key).is_none() {
                return Err(CliError::Usage(format!("config section [{key}] is not a subcommand")));
            }
            if key == sub {
                section = Some(t);
            }
            continue;
        }
        let key = key.replace('_', "-");
        if own.contains(&key) {
            out.extend(render(&key, value)?);
        } else if !any.contains(&key) {
            return Err(CliError::Usage(format!("unknown config key {key}")));
        }
    }
    // section keys come last so they override top-level keys
    if let Some(t) = section {
        for (key, value) in t {
            let key = key.replace('_', "-");
            if !own.contains(&key) {
                return Err(CliError::Usage(format!("[{sub}] has no flag --{key}")));
            }
            out.extend(render(&key, value)?);
        }
    }
    Ok(out)
}
