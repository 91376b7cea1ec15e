//! Text checkpoints: a version line, the model config as JSON, then the
//! parameter blocks with their shapes.

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nn::Params;

pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write<C: Serialize>(kind: &str, cfg: &C, params: &Params) -> String {
    let cfg = serde_json::to_string(cfg).expect("config serializes");
    format!("intent-checkpoint {CHECKPOINT_VERSION} {kind}\nconfig {cfg}\n{}", params.to_text())
}

/// Returns the config and the remaining parameter text.
pub fn read<'a, C: DeserializeOwned>(kind: &str, text: &'a str) -> Result<(C, &'a str)> {
    let (head, rest) = text.split_once('\n').ok_or_else(|| Error::Parse("empty checkpoint".into()))?;
    let expected = format!("intent-checkpoint {CHECKPOINT_VERSION} {kind}");
    if head.trim() != expected {
        return Err(Error::Parse(format!("checkpoint header {head:?}, expected {expected:?}")));
    }
    let (cfg_line, body) = rest.split_once('\n').unwrap_or((rest, ""));
    let cfg_json = cfg_line.strip_prefix("config ").ok_or_else(|| Error::Parse("missing config line".into()))?;
    Ok((serde_json::from_str(cfg_json)?, body))
}
