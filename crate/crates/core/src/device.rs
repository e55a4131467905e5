//! Static device record and its versioned JSON file form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration::{bare_coupling_g0, kappa_from_q, power_budget, PowerBudget};
use crate::error::{positive, Error, Result};
use crate::model::ResonatorParams;

pub const DEVICE_FORMAT_VERSION: u32 = 1;

/// Gate lever arms in eV/V.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeverArms {
    pub p2_eps: f64,
    pub p3_eps: f64,
    pub s1_eps: f64,
    /// P3-to-dot-3 lever arm from thermal broadening, when measured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p3_3: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub lever_arms: LeverArms,
    pub resonator: ResonatorParams,
    /// Bare dot-cavity coupling `g0/2π` in Hz.
    pub g0: f64,
    /// Gate bias-line impedance in Ω.
    pub z0g: f64,
    /// Microwave chain for the drive, if known.
    pub power: Option<PowerBudget>,
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        self.resonator.validate()?;
        positive("g0", self.g0)?;
        positive("z0g", self.z0g)?;
        Ok(())
    }

    /// Input power at the gate from the stored chain.
    pub fn input_power(&self) -> Result<f64> {
        let budget = self
            .power
            .as_ref()
            .ok_or_else(|| Error::InvalidConfiguration("device has no power budget".into()))?;
        power_budget(budget)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        DeviceFile::load(path)?.resolve()
    }
}

/// On-disk device description.
///
/// Either `kappa_hz` or `q_loaded` must be present. `g0_hz` overrides the
/// value computed from the S1 lever arm and resonator parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceFile {
    pub format_version: u32,
    #[serde(rename = "lever_arms_eV_per_V")]
    pub lever_arms: LeverArms,
    pub fr_hz: f64,
    pub z0r_ohm: f64,
    pub z0g_ohm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_loaded: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g0_hz: Option<f64>,
    #[serde(default)]
    pub attenuations_db: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_dbm: Option<f64>,
}

impl DeviceFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        check_version(&raw, DEVICE_FORMAT_VERSION)?;
        Ok(serde_json::from_value(raw)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn resolve(&self) -> Result<DeviceParams> {
        let kappa = match (self.kappa_hz, &self.q_loaded) {
            (Some(k), _) => k,
            (None, Some(q)) => kappa_from_q(self.fr_hz, q)?,
            (None, None) => {
                return Err(Error::InvalidConfiguration("device file needs kappa_hz or q_loaded".into()))
            }
        };
        let g0 = match self.g0_hz {
            Some(g) => g,
            None => bare_coupling_g0(self.lever_arms.s1_eps, self.fr_hz, self.z0r_ohm)?,
        };
        let power = self.generator_dbm.map(|generator_dbm| PowerBudget {
            generator_dbm,
            attenuations_db: self.attenuations_db.clone(),
            z0g: self.z0g_ohm,
        });
        let device = DeviceParams {
            lever_arms: self.lever_arms,
            resonator: ResonatorParams { fr: self.fr_hz, kappa, z0r: self.z0r_ohm },
            g0,
            z0g: self.z0g_ohm,
            power,
        };
        device.validate()?;
        Ok(device)
    }
}

pub(crate) fn check_version(raw: &serde_json::Value, expected: u32) -> Result<()> {
    match raw.get("format_version") {
        Some(v) if v.as_u64() == Some(expected as u64) => Ok(()),
        Some(v) => Err(Error::FormatVersion { found: v.to_string(), expected: expected.to_string() }),
        None => Err(Error::FormatVersion { found: "missing".into(), expected: expected.to_string() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAIR: &str = r#"{
        "format_version": 1,
        "lever_arms_eV_per_V": {"p2_eps": 0.11, "p3_eps": 0.09, "s1_eps": 0.04, "p3_3": 0.149},
        "fr_hz": 1.3038e9,
        "z0r_ohm": 575.0,
        "z0g_ohm": 1.0,
        "q_loaded": [10470, 10476],
        "attenuations_db": [33, 40, 10],
        "generator_dbm": 6
    }"#;

    #[test]
    fn resolves_kappa_and_g0_from_raw_inputs() {
        let dev = DeviceFile::from_json(PAIR).unwrap().resolve().unwrap();
        assert!((dev.resonator.kappa - 124.5e3).abs() < 50.0);
        assert!((dev.g0 - 5.5e6).abs() < 0.05e6);
        assert!((dev.input_power().unwrap() - 20e-12).abs() < 0.1e-12);
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let text = PAIR.replace("\"format_version\": 1", "\"format_version\": 7");
        assert!(matches!(DeviceFile::from_json(&text), Err(Error::FormatVersion { .. })));
        let text = PAIR.replace("\"format_version\": 1,", "");
        assert!(matches!(DeviceFile::from_json(&text), Err(Error::FormatVersion { .. })));
    }

    #[test]
    fn needs_kappa_or_q() {
        let text = PAIR.replace("\"q_loaded\": [10470, 10476],", "");
        let file = DeviceFile::from_json(&text).unwrap();
        assert!(file.resolve().is_err());
    }

    #[test]
    fn json_roundtrip() {
        let file = DeviceFile::from_json(PAIR).unwrap();
        let again = DeviceFile::from_json(&file.to_json().unwrap()).unwrap();
        assert_eq!(file, again);
    }
}
