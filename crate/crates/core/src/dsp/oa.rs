use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mixing weight for observation adding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OaConfig {
    pub omega: f32,
}

impl OaConfig {
    pub fn new(omega: f32) -> Result<Self> {
        let cfg = Self { omega };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(Error::Config(format!(
                "observation-adding weight must lie in [0, 1], got {}",
                self.omega
            )));
        }
        Ok(())
    }
}

/// Mixes the unprocessed observation back into the enhanced signal:
/// `omega * noisy + (1 - omega) * enhanced`, sample by sample.
pub fn observation_add(noisy: &[f32], enhanced: &[f32], cfg: OaConfig) -> Result<Vec<f32>> {
    cfg.validate()?;
    if noisy.len() != enhanced.len() {
        return Err(Error::Shape(format!(
            "observation adding needs equal lengths, got {} and {}",
            noisy.len(),
            enhanced.len()
        )));
    }
    let w = cfg.omega;
    let rest = 1.0 - w;
    Ok(noisy
        .iter()
        .zip(enhanced)
        .map(|(&n, &e)| w * n + rest * e)
        .collect())
}
