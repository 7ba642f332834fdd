//! `--config` files: `key = value` lines injected as `--key value` flags
//! right after the subcommand name.

use std::collections::HashSet;
use std::ffi::OsString;
use std::path::Path;

use crate::CliError;

/// Flags taking a value that may appear before the subcommand.
const GLOBAL_VALUED: [&str; 2] = ["--config", "--threads"];

/// One parsed `key = value` entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
}

/// Parses `key = value` lines. `#` starts a comment, keys may use `_` or
/// `-`, and values may be quoted.
pub fn parse_config(text: &str) -> Result<Vec<Entry>, String> {
    let mut entries = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with('[') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", k + 1))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(format!("line {}: invalid key `{}`", k + 1, key));
        }
        let value = value.trim();
        let value = value
            .strip_prefix('"')
            .and_then(|v| v.strip_suffix('"'))
            .unwrap_or(value);
        entries.push(Entry {
            key,
            value: value.to_string(),
        });
    }
    Ok(entries)
}

fn long_name(arg: &str) -> Option<&str> {
    let name = arg.strip_prefix("--")?;
    Some(name.split_once('=').map_or(name, |(n, _)| n))
}

/// Position of the subcommand token and the `--config` path, if any.
fn scan(argv: &[OsString]) -> (Option<usize>, Option<OsString>) {
    let mut config = None;
    let mut k = 1;
    while k < argv.len() {
        let a = argv[k].to_string_lossy();
        if a == "--config" {
            config = argv.get(k + 1).cloned();
        } else if let Some(path) = a.strip_prefix("--config=") {
            config = Some(path.into());
        }
        if GLOBAL_VALUED.contains(&a.as_ref()) {
            k += 2;
            continue;
        }
        if !a.starts_with('-') {
            return (Some(k), config.or_else(|| find_config(&argv[k + 1..])));
        }
        k += 1;
    }
    (None, config)
}

fn find_config(rest: &[OsString]) -> Option<OsString> {
    let mut found = None;
    for (k, a) in rest.iter().enumerate() {
        let a = a.to_string_lossy();
        if a == "--config" {
            found = rest.get(k + 1).cloned();
        } else if let Some(path) = a.strip_prefix("--config=") {
            found = Some(path.into());
        }
    }
    found
}

/// Returns `argv` with the config file's entries spliced in after the
/// subcommand. Entries for flags already on the command line are skipped,
/// so explicit flags always win. Boolean entries become bare flags when
/// `true` and are dropped when `false`.
pub fn inject_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let (Some(sub), Some(path)) = scan(&argv) else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let entries =
        parse_config(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    let given: HashSet<String> = argv
        .iter()
        .filter_map(|a| long_name(&a.to_string_lossy()).map(str::to_string))
        .collect();
    let mut injected = Vec::new();
    for e in entries {
        if given.contains(&e.key) {
            continue;
        }
        match e.value.as_str() {
            "true" => injected.push(OsString::from(format!("--{}", e.key))),
            "false" => {}
            v => {
                injected.push(OsString::from(format!("--{}", e.key)));
                injected.push(OsString::from(v));
            }
        }
    }
    let mut out = argv;
    out.splice(sub + 1..sub + 1, injected);
    Ok(out)
}
