//! Defaults from a `key=value` config file. Keys are long flag names of the
//! chosen subcommand; keys other subcommands use are ignored, so one file
//! can drive a whole experiment. Flags given on the command line win.

use std::ffi::OsString;

use anyhow::{anyhow, Context};
use clap::{ArgAction, CommandFactory, FromArgMatches};

use crate::Cli;

pub enum ParseFailure {
    Clap(clap::Error),
    Config(anyhow::Error),
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

fn injected_args(args: &[OsString], text: &str) -> anyhow::Result<Vec<OsString>> {
    let map = lexfuse::formats::parse_config(text)?;
    let root = Cli::command();
    let mut cmd = &root;
    let mut skip_value = false;
    for a in args.iter().skip(1) {
        let s = a.to_string_lossy();
        if skip_value {
            skip_value = false;
            continue;
        }
        if s == "--config" {
            skip_value = true;
            continue;
        }
        if s.starts_with('-') {
            continue;
        }
        match cmd.find_subcommand(s.as_ref()) {
            Some(sub) => cmd = sub,
            None => break,
        }
    }
    let on_command_line = |long: &str| {
        let eq = format!("--{long}=");
        let bare = format!("--{long}");
        args.iter()
            .map(|a| a.to_string_lossy())
            .any(|a| a == bare || a.starts_with(&eq))
    };

    let mut out = Vec::new();
    for (key, value) in &map {
        let Some(arg) = cmd.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
            continue;
        };
        if key == "config" || on_command_line(key) {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => match value.as_str() {
                "true" => out.push(format!("--{key}")),
                "false" => {}
                other => return Err(anyhow!("config key {key}: expected true or false, got {other:?}")),
            },
            ArgAction::Append => {
                for v in value.split(',').map(str::trim).filter(|v| !v.is_empty()) {
                    out.push(format!("--{key}={v}"));
                }
            }
            _ => out.push(format!("--{key}={value}")),
        }
    }
    Ok(out.into_iter().map(OsString::from).collect())
}

pub fn parse_with_config(mut args: Vec<OsString>) -> Result<Cli, ParseFailure> {
    if let Some(path) = config_path(&args) {
        let path = std::path::PathBuf::from(path);
        let extra = std::fs::read_to_string(&path)
            .with_context(|| format!("cannot read config file {}", path.display()))
            .and_then(|text| {
                injected_args(&args, &text)
                    .with_context(|| format!("config file {}", path.display()))
            })
            .map_err(ParseFailure::Config)?;
        args.extend(extra);
    }
    let matches = Cli::command()
        .try_get_matches_from(args)
        .map_err(ParseFailure::Clap)?;
    Cli::from_arg_matches(&matches).map_err(ParseFailure::Clap)
}
