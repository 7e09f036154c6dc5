//! `AUTOSAGE_*` environment toggles.

use std::collections::BTreeMap;
use std::str::FromStr;

pub const PREFIX: &str = "AUTOSAGE_";

pub const FTILE: &str = "AUTOSAGE_FTILE";
pub const WPB: &str = "AUTOSAGE_WPB";
pub const HUB_T: &str = "AUTOSAGE_HUB_T";
pub const VEC: &str = "AUTOSAGE_VEC";
pub const FORCE: &str = "AUTOSAGE_FORCE";
pub const PROBE_FRAC: &str = "AUTOSAGE_PROBE_FRAC";
pub const PROBE_MIN_ROWS: &str = "AUTOSAGE_PROBE_MIN_ROWS";
pub const PROBE_ITERS: &str = "AUTOSAGE_PROBE_ITERS";
pub const PROBE_CAP_MS: &str = "AUTOSAGE_PROBE_CAP_MS";
pub const PROBE_TOPK: &str = "AUTOSAGE_PROBE_TOPK";
pub const GUARDRAIL: &str = "AUTOSAGE_GUARDRAIL";
pub const CACHE: &str = "AUTOSAGE_CACHE";
pub const REPLAY_ONLY: &str = "AUTOSAGE_REPLAY_ONLY";
pub const REPLAY_STRICT: &str = "AUTOSAGE_REPLAY_STRICT";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{var}={value:?}: {reason}")]
pub struct EnvError {
    pub var: &'static str,
    pub value: String,
    pub reason: String,
}

/// Raw value, treating unset and empty-after-trim alike.
pub fn raw(var: &str) -> Option<String> {
    std::env::var(var)
        .ok()
        .map(|v| v.trim().to_owned())
        .filter(|v| !v.is_empty())
}

pub fn parse<T: FromStr>(var: &'static str) -> Result<Option<T>, EnvError>
where
    T::Err: std::fmt::Display,
{
    match raw(var) {
        None => Ok(None),
        Some(value) => value.parse().map(Some).map_err(|e: T::Err| EnvError {
            var,
            reason: e.to_string(),
            value,
        }),
    }
}

pub fn positive(var: &'static str) -> Result<Option<usize>, EnvError> {
    match parse::<usize>(var)? {
        Some(0) => Err(EnvError {
            var,
            value: "0".into(),
            reason: "must be positive".into(),
        }),
        other => Ok(other),
    }
}

/// `0/1`, `true/false`, `on/off`, `yes/no`.
pub fn flag(var: &'static str) -> Result<Option<bool>, EnvError> {
    let Some(value) = raw(var) else {
        return Ok(None);
    };
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "on" | "yes" => Ok(Some(true)),
        "0" | "false" | "off" | "no" => Ok(Some(false)),
        _ => Err(EnvError {
            var,
            value,
            reason: "expected 0 or 1".into(),
        }),
    }
}

/// Every `AUTOSAGE_*` variable currently set, sorted by name.
pub fn snapshot() -> BTreeMap<String, String> {
    std::env::vars()
        .filter(|(k, _)| k.starts_with(PREFIX))
        .collect()
}
