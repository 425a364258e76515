use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::apf::ApfConfig;
use crate::destination::DestinationConfig;
use crate::error::{Error, Result};
use crate::morphology::MorphConfig;
use crate::segmap::{ClassTable, DEFAULT_MIN_AREA_FRACTION};

/// What the CLI writes besides the path document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Write `overlay.ppm` next to `path.json` when an output directory is given.
    pub overlay: bool,
    /// Include the per-step force trace in path documents.
    pub forces: bool,
    /// Include wall-clock stage timings in reports. Timings vary run to run.
    pub timings: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            overlay: true,
            forces: false,
            timings: false,
        }
    }
}

/// Whole-pipeline configuration. Every field defaults; unknown keys are
/// rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// JSON class table; `None` uses 0 others, 1 road, 2 obstacle.
    /// Relative paths resolve against the config file's directory.
    pub class_table: Option<PathBuf>,
    pub morph: MorphConfig,
    pub destination: DestinationConfig,
    pub apf: ApfConfig,
    pub roi_min_area_fraction: f64,
    pub output: OutputConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            class_table: None,
            morph: MorphConfig::default(),
            destination: DestinationConfig::default(),
            apf: ApfConfig::default(),
            roi_min_area_fraction: DEFAULT_MIN_AREA_FRACTION,
            output: OutputConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        if let (Some(table), Some(dir)) = (&cfg.class_table, path.parent()) {
            if table.is_relative() {
                cfg.class_table = Some(dir.join(table));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.morph.validate()?;
        self.destination.validate()?;
        self.apf.validate()?;
        if !(0.0..=1.0).contains(&self.roi_min_area_fraction) {
            return Err(Error::InvalidParameter(format!(
                "roi_min_area_fraction = {} must lie in [0, 1]",
                self.roi_min_area_fraction
            )));
        }
        Ok(())
    }

    pub fn load_class_table(&self) -> Result<ClassTable> {
        match &self.class_table {
            Some(path) => ClassTable::from_json(&std::fs::read_to_string(path)?),
            None => Ok(ClassTable::default()),
        }
    }
}
