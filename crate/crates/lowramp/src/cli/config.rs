//! `key = value` configuration files.
//!
//! Each entry becomes the flag `--key value` (underscores turn into dashes,
//! `true` into a bare switch, `false` is dropped) and is spliced in right
//! after the subcommand. Flags typed on the command line replace the file's
//! entries for the same flag.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

pub const SUBCOMMANDS: [&str; 6] = ["gen", "amp", "se", "phase-scan", "spectral", "compare"];

/// Parsed configuration file: the optional `command` plus one flag (and
/// its value, if any) per entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub command: Option<String>,
    pub entries: Vec<(String, Option<String>)>,
}

impl ConfigFile {
    /// Flag tokens, skipping the flags in `given`.
    pub fn tokens(&self, given: &[String]) -> Vec<String> {
        let mut out = Vec::new();
        for (flag, value) in &self.entries {
            if given.contains(flag) {
                continue;
            }
            out.push(flag.clone());
            out.extend(value.clone());
        }
        out
    }
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let mut out = ConfigFile::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected `key = value`, got `{raw}`", lineno + 1)));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"').to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        if key == "command" {
            out.command = Some(value);
            continue;
        }
        if key == "config" {
            return Err(Error::Config("configuration files cannot include other files".into()));
        }
        match value.as_str() {
            "true" => out.entries.push((format!("--{key}"), None)),
            "false" => {}
            _ => out.entries.push((format!("--{key}"), Some(value))),
        }
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<ConfigFile> {
    parse_config(&fs::read_to_string(path)?)
}

/// Value of `--config` in a raw argument list, if any.
pub fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(OsString::from(rest));
        }
    }
    None
}

/// Splices the file's flags into `args` right after the subcommand, except
/// those already present on the command line.
pub fn merge_args(args: Vec<OsString>, file: &ConfigFile) -> Result<Vec<OsString>> {
    let mut args = args;
    let given: Vec<String> = args
        .iter()
        .filter_map(|a| {
            let s = a.to_string_lossy();
            s.starts_with("--").then(|| s.split('=').next().unwrap_or_default().to_string())
        })
        .collect();
    let position = args.iter().skip(1).position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()));
    let at = match (position, &file.command) {
        (Some(p), Some(cmd)) if args[p + 1].to_string_lossy() != cmd.as_str() => {
            return Err(Error::Config(format!(
                "config file is for `{cmd}` but `{}` was requested",
                args[p + 1].to_string_lossy()
            )));
        }
        (Some(p), _) => p + 2,
        (None, Some(cmd)) => {
            if !SUBCOMMANDS.contains(&cmd.as_str()) {
                return Err(Error::Config(format!("unknown command `{cmd}` in config file")));
            }
            let at = 1.min(args.len());
            args.insert(at, OsString::from(cmd));
            at + 1
        }
        (None, None) => 1.min(args.len()),
    };
    let tail = args.split_off(at);
    args.extend(file.tokens(&given).into_iter().map(OsString::from));
    args.extend(tail);
    Ok(args)
}
