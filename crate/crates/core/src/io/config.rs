//! `key=value` model configuration files.
//!
//! ```text
//! preset = edsr
//! scale = 4
//! blocks = 8      # overrides the preset
//! ```
//!
//! The preset (default `none`) supplies every field; other keys override it
//! regardless of their position in the file.

use crate::conv::PadMode;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Preset};

fn config_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

pub fn parse_config(text: &str) -> Result<ModelConfig> {
    let mut entries = Vec::new();
    let mut preset = Preset::None;
    let mut scale = 2;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(line_no, "expected key=value"))?;
        let (key, value) = (key.trim(), value.trim());
        if entries.iter().any(|(_, k, _): &(usize, &str, &str)| *k == key) {
            return Err(config_err(line_no, format!("duplicate key {key}")));
        }
        match key {
            "preset" => preset = value.parse().map_err(|e| config_err(line_no, e))?,
            "scale" => scale = value.parse().map_err(|e| config_err(line_no, e))?,
            _ => {}
        }
        entries.push((line_no, key, value));
    }

    let mut cfg = ModelConfig::preset(preset, scale);
    for (line_no, key, value) in entries {
        let bad = |what: &str| config_err(line_no, format!("invalid {what} {value:?} for {key}"));
        let int = || value.parse::<usize>().map_err(|_| bad("integer"));
        let flag = || parse_bool(value).ok_or_else(|| bad("flag"));
        match key {
            "preset" | "scale" => {}
            "feat_channels" => cfg.feat_channels = int()?,
            "groups" => cfg.groups = int()?,
            "blocks" => cfg.blocks = int()?,
            "channel_attention" => cfg.channel_attention = flag()?,
            "ca_reduction" => cfg.ca_reduction = int()?,
            "group_skip" => cfg.group_skip = flag()?,
            "group_tail" => cfg.group_tail = flag()?,
            "body_tail" => cfg.body_tail = flag()?,
            "res_scale" => cfg.res_scale = value.parse().map_err(|_| bad("number"))?,
            "adapter_channels" => cfg.adapter_channels = int()?,
            "adapter_padding" => {
                cfg.adapter_padding = match value {
                    "zeros" => PadMode::Zeros,
                    "replicate" => PadMode::Replicate,
                    _ => return Err(bad("padding")),
                }
            }
            "rgb_mean" => {
                let parts: Vec<f32> = value
                    .split(',')
                    .map(|p| p.trim().parse::<f32>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("mean"))?;
                cfg.rgb_mean = <[f32; 3]>::try_from(parts).map_err(|_| bad("mean"))?;
            }
            other => return Err(config_err(line_no, format!("unknown key {other}"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes every field explicitly with `preset = none`.
pub fn config_to_text(cfg: &ModelConfig) -> String {
    let [r, g, b] = cfg.rgb_mean;
    format!(
        "preset = none\n\
         scale = {}\n\
         feat_channels = {}\n\
         groups = {}\n\
         blocks = {}\n\
         channel_attention = {}\n\
         ca_reduction = {}\n\
         group_skip = {}\n\
         group_tail = {}\n\
         body_tail = {}\n\
         res_scale = {}\n\
         rgb_mean = {r},{g},{b}\n\
         adapter_channels = {}\n\
         adapter_padding = {}\n",
        cfg.scale,
        cfg.feat_channels,
        cfg.groups,
        cfg.blocks,
        cfg.channel_attention,
        cfg.ca_reduction,
        cfg.group_skip,
        cfg.group_tail,
        cfg.body_tail,
        cfg.res_scale,
        cfg.adapter_channels,
        match cfg.adapter_padding {
            PadMode::Zeros => "zeros",
            PadMode::Replicate => "replicate",
        },
    )
}
