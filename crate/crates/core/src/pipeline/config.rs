//! `key = value` run configuration, covering the detector knobs and the
//! six-parameter ground-plane calibration.

use super::PipelineError;
use crate::congestion::CongestionConfig;
use crate::geometry::AffineTransform2D;
use std::path::Path;

/// Full pipeline configuration. Calibration defaults to the identity
/// transform (pixels already in meters); `units` is an informational note
/// carried through from the file.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub congestion: CongestionConfig,
    pub score_floor: f64,
    pub calibration: AffineTransform2D,
    pub units: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            congestion: CongestionConfig::default(),
            score_floor: 0.5,
            calibration: AffineTransform2D::IDENTITY,
            units: None,
        }
    }
}

/// Parse configuration text. Unknown keys, bad numbers and duplicate keys
/// are errors naming the offending line; `#` starts a comment.
pub fn parse_config_str(text: &str) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = PipelineConfig::default();
    let mut seen: Vec<String> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| PipelineError::Config {
            line: line_no,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if seen.iter().any(|k| k == key) {
            return Err(PipelineError::Config {
                line: line_no,
                message: format!("duplicate key `{key}`"),
            });
        }
        seen.push(key.to_string());

        let bad_number = |e: std::num::ParseFloatError| PipelineError::Config {
            line: line_no,
            message: format!("invalid number for `{key}`: {e}"),
        };
        let bad_int = |e: std::num::ParseIntError| PipelineError::Config {
            line: line_no,
            message: format!("invalid integer for `{key}`: {e}"),
        };
        match key {
            "k" => cfg.congestion.k = value.parse().map_err(bad_int)?,
            "c_neighbors" => cfg.congestion.c_neighbors = value.parse().map_err(bad_int)?,
            "safe_dist" => cfg.congestion.safe_dist = value.parse().map_err(bad_number)?,
            "crowding_factor" => {
                cfg.congestion.crowding_factor = value.parse().map_err(bad_number)?
            }
            "max_iters" => cfg.congestion.max_iters = value.parse().map_err(bad_int)?,
            "seed" => cfg.congestion.seed = value.parse().map_err(bad_int)?,
            "score_floor" => cfg.score_floor = value.parse().map_err(bad_number)?,
            "a" => cfg.calibration.a = value.parse().map_err(bad_number)?,
            "b" => cfg.calibration.b = value.parse().map_err(bad_number)?,
            "c" => cfg.calibration.c = value.parse().map_err(bad_number)?,
            "d" => cfg.calibration.d = value.parse().map_err(bad_number)?,
            "e" => cfg.calibration.e = value.parse().map_err(bad_number)?,
            "f" => cfg.calibration.f_t = value.parse().map_err(bad_number)?,
            "units" => cfg.units = Some(value.to_string()),
            _ => {
                return Err(PipelineError::Config {
                    line: line_no,
                    message: format!("unknown key `{key}`"),
                })
            }
        }
    }
    cfg.congestion
        .validate()
        .map_err(|e| PipelineError::Config {
            line: 0,
            message: e.to_string(),
        })?;
    if !(0.0..=1.0).contains(&cfg.score_floor) {
        return Err(PipelineError::Config {
            line: 0,
            message: format!("score_floor {} outside [0, 1]", cfg.score_floor),
        });
    }
    Ok(cfg)
}

/// [`parse_config_str`] over a file path.
pub fn parse_config(path: impl AsRef<Path>) -> Result<PipelineConfig, PipelineError> {
    parse_config_str(&std::fs::read_to_string(path)?)
}
