//! Run configuration shared by the command line and the service.

use serde::{Deserialize, Serialize};

/// Preset thresholds. Expert users review the output and discard obvious
/// mistakes, so they can afford a lower cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Expert,
    #[default]
    Strict,
}

impl Mode {
    pub fn threshold(self) -> f64 {
        match self {
            Mode::Expert => 0.5,
            Mode::Strict => 0.75,
        }
    }
}

/// An explicit threshold wins over the mode preset.
pub fn effective_threshold(mode: Option<Mode>, threshold: Option<f64>) -> f64 {
    threshold.unwrap_or_else(|| mode.unwrap_or_default().threshold())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    #[default]
    Table,
}
