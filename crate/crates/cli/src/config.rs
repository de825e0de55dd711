//! Flat `key = value` configuration files.
//!
//! Each key names a long flag of the subcommand being run (`_` and `-` are
//! interchangeable). File values are spliced into the argument list right
//! after the subcommand, so flags given on the command line win.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Command};
use undermine::{Error, Result};

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut entries: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "{}:{}: expected `key = value`",
                origin.display(),
                i + 1
            )));
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(Error::Config(format!("{}:{}: invalid key {key:?}", origin.display(), i + 1)));
        }
        if entries.iter().any(|(k, _)| *k == key) {
            return Err(Error::Config(format!("{}:{}: duplicate key {key}", origin.display(), i + 1)));
        }
        entries.push((key, unquote(value.trim()).to_owned()));
    }
    Ok(entries)
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}

/// Location of `--config` and of the subcommand name in `args`.
struct Layout {
    config: Option<PathBuf>,
    subcommand: Option<usize>,
}

fn scan(args: &[OsString]) -> Layout {
    let mut layout = Layout {
        config: None,
        subcommand: None,
    };
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if a == "--" {
            break;
        }
        if a == "--config" {
            layout.config = args.get(i + 1).map(PathBuf::from);
            i += 2;
            continue;
        }
        if let Some(path) = a.strip_prefix("--config=") {
            layout.config = Some(PathBuf::from(path));
        } else if layout.subcommand.is_none() && !a.starts_with('-') {
            layout.subcommand = Some(i);
        }
        i += 1;
    }
    layout
}

/// Returns `args` with the configuration file's values inserted as flags of
/// the chosen subcommand.
pub fn expand(args: Vec<OsString>, root: &Command) -> Result<Vec<OsString>> {
    let layout = scan(&args);
    let (Some(path), Some(at)) = (layout.config, layout.subcommand) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let entries = parse(&text, &path)?;
    let name = args[at].to_string_lossy().into_owned();
    let Some(sub) = root.find_subcommand(&name) else {
        return Ok(args);
    };
    let mut injected = Vec::new();
    for (key, value) in entries {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && a.get_id() != "config")
            .ok_or_else(|| {
                Error::Config(format!("{}: unknown key {key} for `{name}`", path.display()))
            })?;
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" => injected.push(OsString::from(format!("--{key}"))),
                "false" => {}
                other => {
                    return Err(Error::Config(format!(
                        "{}: key {key} expects true or false, got {other:?}",
                        path.display()
                    )))
                }
            },
            _ => {
                injected.push(OsString::from(format!("--{key}")));
                injected.push(OsString::from(value));
            }
        }
    }
    let mut out = args[..=at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[at + 1..]);
    Ok(out)
}
