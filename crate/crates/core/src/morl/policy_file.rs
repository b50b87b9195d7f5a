//! Versioned JSON policy file: tree and critic parameters, state scales,
//! training preferences and the training configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ddt::Ddt;
use super::state::{StateScales, OBJECTIVES, POLICY_INPUTS};
use super::train::{PpoConfig, Trained};
use super::value::ValueNet;
use crate::arch::PimType;
use crate::error::{read_to_string, write_atomic, Error, Result};

pub const POLICY_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    pub version: u32,
    pub seed: u64,
    pub config: PpoConfig,
    pub scales: StateScales,
    pub policy: Ddt,
    pub value: ValueNet,
}

impl PolicyFile {
    pub fn from_trained(t: &Trained, config: &PpoConfig, seed: u64) -> Self {
        PolicyFile {
            version: POLICY_FILE_VERSION,
            seed,
            config: config.clone(),
            scales: t.scales,
            policy: t.policy.clone(),
            value: t.value.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != POLICY_FILE_VERSION {
            return Err(Error::Config(format!("unsupported policy file version {}", self.version)));
        }
        if self.policy.n_in != POLICY_INPUTS || self.policy.n_actions != PimType::COUNT {
            return Err(Error::Config("policy tree does not match the state and action sizes".into()));
        }
        if self.value.n_in != POLICY_INPUTS || self.value.n_out != OBJECTIVES {
            return Err(Error::Config("value network does not match the state and objective sizes".into()));
        }
        self.scales.validate()?;
        self.policy.validate()?;
        self.value.validate()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serializes")
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let p: PolicyFile = serde_json::from_str(text).map_err(|e| Error::parse(origin, e))?;
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_to_string(path)?, path)
    }
}
