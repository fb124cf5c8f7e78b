//! Merges a JSON config of flat dotted keys into the command line.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches};
use serde_json::Value;

use crate::args::Cli;
use crate::error::{CliError, CliResult};

fn scalar(key: &str, v: &Value) -> CliResult<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(CliError::Usage(format!("config key {key}: unsupported value {other}"))),
    }
}

/// Flags for one config entry, or nothing when the flag is false.
fn flags_for(key: &str, long: &str, v: &Value, takes_value: bool) -> CliResult<Vec<OsString>> {
    if !takes_value {
        return match v {
            Value::Bool(true) => Ok(vec![format!("--{long}").into()]),
            Value::Bool(false) => Ok(vec![]),
            other => Err(CliError::Usage(format!("config key {key}: expected true or false, got {other}"))),
        };
    }
    let items = match v {
        Value::Array(a) => a.iter().map(|x| scalar(key, x)).collect::<CliResult<Vec<_>>>()?,
        other => vec![scalar(key, other)?],
    };
    Ok(items.into_iter().map(|s| format!("--{long}={s}").into()).collect())
}

fn given(m: &ArgMatches, id: &str) -> bool {
    matches!(m.try_contains_id(id), Ok(true)) && m.value_source(id) == Some(ValueSource::CommandLine)
}

/// Parses `argv`, filling every flag the command line leaves unset from
/// `--config`. Keys for other commands are ignored; unknown keys for the
/// running command are errors.
pub fn parse(argv: Vec<OsString>) -> CliResult<Cli> {
    let command = Cli::command();
    // first pass only locates the config; required flags may live in it
    let Ok(matches) = command.clone().ignore_errors(true).try_get_matches_from(&argv) else {
        return finish(command, argv);
    };
    let (Some(path), Some((name, sub_matches))) = (matches.get_one::<PathBuf>("config").cloned(), matches.subcommand())
    else {
        return finish(command, argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("reading config {}: {e}", path.display())))?;
    let json: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    let Value::Object(entries) = json else {
        return Err(CliError::Usage(format!("config {} must be a JSON object", path.display())));
    };
    let sub = command.find_subcommand(name).expect("parsed subcommand exists");

    let mut extra: Vec<OsString> = Vec::new();
    for (key, value) in &entries {
        if key == "seed" {
            if !given(&matches, "seed") && !given(sub_matches, "seed") {
                extra.extend(flags_for(key, "seed", value, true)?);
            }
            continue;
        }
        let Some((cmd, long)) = key.split_once('.') else {
            return Err(CliError::Usage(format!("config key {key:?} is neither `seed` nor `<command>.<flag>`")));
        };
        if cmd != name {
            continue;
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(long) && a.get_id() != "config")
            .ok_or_else(|| CliError::Usage(format!("config key {key}: {name} has no flag --{long}")))?;
        if given(sub_matches, arg.get_id().as_str()) {
            continue;
        }
        let takes_value = arg.get_action().takes_values();
        extra.extend(flags_for(key, long, value, takes_value)?);
    }
    let mut full = argv;
    full.extend(extra);
    finish(command, full)
}

/// Strict parse; clap reports its own errors (exit 2) and help (exit 0).
fn finish(command: clap::Command, argv: Vec<OsString>) -> CliResult<Cli> {
    let matches = command.try_get_matches_from(argv).unwrap_or_else(|e| e.exit());
    Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))
}
