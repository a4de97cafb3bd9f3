//! Flat `key = value` config files merged under command-line flags.

use anyhow::{bail, Context, Result};
use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Command};
use std::path::Path;

/// Parses `key = value` lines; `#` starts a comment. Keys use the long flag
/// spelling (`history-min-dt`, underscores accepted).
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected key = value, got {raw:?}", i + 1);
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            bail!("line {}: empty key", i + 1);
        }
        if out.iter().any(|(k, _)| *k == key) {
            bail!("line {}: duplicate key {key:?}", i + 1);
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Extra arguments carrying the file's settings for `sub`, skipping any
/// option already given on the command line. Unknown keys are errors.
pub fn overrides(path: &Path, root: &Command, matches: &ArgMatches) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let Some((name, sub_matches)) = matches.subcommand() else {
        bail!("a config file needs a subcommand");
    };
    let sub = root.find_subcommand(name).expect("parsed subcommand exists");
    let mut extra = Vec::new();
    for (key, value) in parse(&text)? {
        if key == "config" {
            bail!("config files cannot include other config files");
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && !a.is_global_set())
            .with_context(|| format!("unknown config key {key:?} for `{name}`"))?;
        let id = arg.get_id().as_str();
        if sub_matches.value_source(id) == Some(ValueSource::CommandLine) {
            continue;
        }
        match arg.get_action() {
            ArgAction::Count => {
                let n: usize = value.parse().with_context(|| format!("config key {key:?} expects a count"))?;
                extra.extend(std::iter::repeat_n(format!("--{key}"), n));
            }
            ArgAction::SetTrue => match value.as_str() {
                "true" => extra.push(format!("--{key}")),
                "false" => {}
                _ => bail!("config key {key:?} expects true or false, got {value:?}"),
            },
            _ => extra.push(format!("--{key}={value}")),
        }
    }
    Ok(extra)
}
