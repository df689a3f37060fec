//! TOML configuration documents.
//!
//! ```toml
//! [system]
//! tau_min = 2.0
//!
//! [scenario]
//! side = 40.0
//!
//! [[devices]]
//! energy_budget = 1.5
//! channel_gain = 0.004
//! ```
//!
//! Every field is optional and falls back to its default. An explicit
//! `[[devices]]` list fixes the devices; without one they are generated from
//! `[scenario]`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiments::ScenarioSettings;
use crate::instance::Instance;
use crate::model::{DeviceProfile, SystemConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigDocument {
    pub system: SystemConfig,
    pub scenario: ScenarioSettings,
    pub devices: Vec<DeviceProfile>,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: Self = toml::from_str(text)?;
        doc.system.validate()?;
        for p in &doc.devices {
            p.validate()?;
        }
        Ok(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Instance over the explicit device list, with ids renumbered by position.
    pub fn instance(&self) -> Result<Instance> {
        let profiles = self
            .devices
            .iter()
            .enumerate()
            .map(|(id, p)| DeviceProfile { id, ..p.clone() })
            .collect();
        Instance::new(profiles, self.system.clone())
    }
}
