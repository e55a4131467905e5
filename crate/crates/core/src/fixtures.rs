//! Reference values for the three measured datasets and the raw device
//! inputs needed to regenerate them.
//!
//! * pair: simultaneous S1/P3 line cuts at one tuning
//! * sweep: P3 peaks over a generator-power sweep, same device
//! * series: P3 peaks over a tunnel-coupling series, second tuning
//!
//! Energies and rates are in Hz, gains in V/Hz, products `c·ε` in V·Hz.

use crate::calibration::{CouplingRow, PowerBudget};
use crate::device::{DeviceParams, LeverArms};
use crate::model::{DriveSettings, ResonatorParams};
use crate::units::{ghz, mhz};

pub const FR: f64 = 1.3038e9;
pub const Z0R: f64 = 575.0;
pub const Z0G: f64 = 1.0;
pub const Q_LOADED: [f64; 2] = [10470.0, 10476.0];
pub const ALPHA_P33: f64 = 0.149;
pub const TE0: f64 = 0.212;

/// Fitted tunnel coupling of the line-cut pair.
pub const PAIR_TC: f64 = 6.14e9;
pub const PAIR_C_EPS2: f64 = 2.52e4;
pub const PAIR_C_EPS3: f64 = 12.93e4;
pub const PAIR_BETA2: f64 = 1.27e-2;
pub const PAIR_BETA3: f64 = 2.89e-3;
/// Magnitude of the P3 drive implied by the 20 pW chain at 0.09 eV/V.
pub const PAIR_EPS3: f64 = 137.47e6;
/// Detector gain implied by the fitted `c·ε3` product.
pub const PAIR_C: f64 = PAIR_C_EPS3 / PAIR_EPS3;

/// Per-peak fits of the tunnel-coupling series: `(c·ε3, tc)`.
pub const SERIES_PEAKS: [(f64, f64); 3] = [(12.77e4, 4.65e9), (12.66e4, 5.51e9), (12.57e4, 6.55e9)];
pub const SERIES_BETA3: f64 = 2.93e-3;
/// Crosstalk ratio held fixed in per-peak fits.
pub const DEFAULT_FROZEN_BETA2: f64 = 1.27e-2;
pub const SWEEP_BETA3: f64 = 3.09e-3;

pub fn pair_lever_arms() -> LeverArms {
    LeverArms { p2_eps: 0.11, p3_eps: 0.09, s1_eps: 0.04, p3_3: Some(ALPHA_P33) }
}

pub fn series_lever_arms() -> LeverArms {
    LeverArms { p2_eps: 0.10, p3_eps: 0.10, s1_eps: 0.03, p3_3: None }
}

pub fn pair_power() -> PowerBudget {
    PowerBudget { generator_dbm: 6.0, attenuations_db: vec![33.0, 40.0, 10.0], z0g: Z0G }
}

pub fn series_power() -> PowerBudget {
    PowerBudget { generator_dbm: 15.0, attenuations_db: vec![42.0, 40.0, 10.0], z0g: Z0G }
}

fn kappa() -> f64 {
    FR / (Q_LOADED.iter().sum::<f64>() / Q_LOADED.len() as f64)
}

fn device(lever_arms: LeverArms, power: PowerBudget) -> DeviceParams {
    let g0 = crate::calibration::bare_coupling_g0(lever_arms.s1_eps, FR, Z0R).expect("fixture inputs are valid");
    DeviceParams {
        lever_arms,
        resonator: ResonatorParams { fr: FR, kappa: kappa(), z0r: Z0R },
        g0,
        z0g: Z0G,
        power: Some(power),
    }
}

/// Device of the line-cut pair and the power sweep.
pub fn pair_device() -> DeviceParams {
    device(pair_lever_arms(), pair_power())
}

/// Device tuning of the tunnel-coupling series.
pub fn series_device() -> DeviceParams {
    device(series_lever_arms(), series_power())
}

pub fn pair_s1_settings() -> DriveSettings {
    DriveSettings::s1(PAIR_C_EPS2 / PAIR_C, PAIR_BETA2, PAIR_BETA3)
}

pub fn pair_p3_settings() -> DriveSettings {
    DriveSettings::p3(PAIR_EPS3, PAIR_BETA2, PAIR_BETA3)
}

/// One published drive-amplitude and photon-number row.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveRow {
    pub label: &'static str,
    pub p_in_pw: f64,
    pub eps_q_mhz: f64,
    pub eps_r_khz: f64,
    pub photons: f64,
}

/// Published upper-bound drive estimates (single-valued rows and both ends of the power sweep).
pub fn drive_table() -> Vec<DriveRow> {
    vec![
        DriveRow { label: "pair-S1", p_in_pw: 20.0, eps_q_mhz: 27.0, eps_r_khz: 340.0, photons: 30.0 },
        DriveRow { label: "pair-P3", p_in_pw: 20.0, eps_q_mhz: -137.0, eps_r_khz: 397.0, photons: 41.0 },
        DriveRow { label: "sweep-low", p_in_pw: 2.0, eps_q_mhz: -39.0, eps_r_khz: 119.0, photons: 4.0 },
        DriveRow { label: "sweep-high", p_in_pw: 20.0, eps_q_mhz: -137.0, eps_r_khz: 424.0, photons: 46.0 },
        DriveRow { label: "series", p_in_pw: 20.0, eps_q_mhz: -152.0, eps_r_khz: 447.0, photons: 51.0 },
    ]
}

/// Generator settings of the power sweep in dBm: lowest, middle, highest.
pub const SWEEP_GENERATOR_DBM: [f64; 3] = [-5.0, 2.0, 6.0];

/// One published coupling-table row with its inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingReference {
    pub row: CouplingRow,
    pub delta_omega_khz: f64,
    pub g_dy_khz: f64,
    pub ratio: f64,
}

/// Coupling-table inputs (fitted `tc`, computed `g0`, published `εq`) and the
/// printed outputs they should reproduce.
pub fn coupling_references() -> Vec<CouplingReference> {
    let g_a = pair_device().g0;
    let g_b = series_device().g0;
    let r = |label: &str, tc_ghz: f64, g0: f64, eps_q_mhz: f64, dw: f64, gdy: f64, ratio: f64| CouplingReference {
        row: CouplingRow { label: label.into(), tc: ghz(tc_ghz), g0, eps_q: mhz(eps_q_mhz) },
        delta_omega_khz: dw,
        g_dy_khz: gdy,
        ratio,
    };
    vec![
        r("pair-S1", 6.14, g_a, 27.0, 4.9, 12.1, 2.5),
        r("pair-P3", 6.14, g_a, -137.0, 4.9, -61.4, 12.4),
        r("sweep-i", 5.57, g_a, -39.0, 5.4, -19.3, 3.5),
        r("sweep-ii", 5.24, g_a, -87.0, 5.8, -45.7, 7.9),
        r("sweep-iii", 5.90, g_a, -137.0, 5.1, -63.9, 12.4),
        r("series-iv", 4.65, g_b, -152.0, 3.7, -67.6, 18.4),
        r("series-v", 5.51, g_b, -152.0, 3.1, -57.0, 18.4),
        r("series-vi", 6.55, g_b, -152.0, 2.6, -47.9, 18.4),
    ]
}

/// Published `κ` in Hz.
pub const KAPPA_PUBLISHED: f64 = 124.5e3;
pub const G0_PUBLISHED: [f64; 2] = [5.5e6, 4.1e6];

/// Scaled-down laboratory-frame parameters used to check the closed form
/// against a full master-equation simulation. Units: `fr = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeskPreset {
    pub fr: f64,
    pub tc: f64,
    pub kappa: f64,
    pub g0: f64,
    pub eps_q: f64,
    pub eps_r: f64,
    pub n_max: usize,
}

/// `fq/fr = 7`, `εq/tc = 0.1`.
pub fn desk_preset() -> DeskPreset {
    DeskPreset { fr: 1.0, tc: 3.5, kappa: 0.01, g0: 0.002, eps_q: 0.35, eps_r: 0.003, n_max: 12 }
}

/// Agreement band for reproduced couplings, in Hz.
pub const COUPLING_TOLERANCE: f64 = 0.15e3;
/// Agreement band for reproduced tunability ratios.
pub const RATIO_TOLERANCE: f64 = 0.1;

/// Comparison of one computed coupling row against its published counterpart.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CouplingCheck {
    pub label: String,
    pub delta_omega_error: f64,
    pub g_dy_error: f64,
    pub ratio_error: f64,
    pub pass: bool,
}

/// Checks a computed row against the reference with the same label, if any.
pub fn check_coupling_row(row: &crate::calibration::CouplingTableRow) -> Option<CouplingCheck> {
    let reference = coupling_references().into_iter().find(|r| r.row.label == row.label)?;
    let delta_omega_error = row.delta_omega - reference.delta_omega_khz * 1e3;
    let g_dy_error = row.g_dy - reference.g_dy_khz * 1e3;
    let ratio_error = row.ratio - reference.ratio;
    Some(CouplingCheck {
        label: row.label.clone(),
        delta_omega_error,
        g_dy_error,
        ratio_error,
        pass: delta_omega_error.abs() <= COUPLING_TOLERANCE
            && g_dy_error.abs() <= COUPLING_TOLERANCE
            && ratio_error.abs() <= RATIO_TOLERANCE,
    })
}

/// Detector noise at one photon, in V, for synthetic line cuts.
pub const PAIR_SIGMA0: f64 = 1.2e-4;
/// Default detuning grid for synthetic line cuts: start, stop (µeV), points.
pub const LINECUT_GRID_UEV: (f64, f64, usize) = (-150.0, 150.0, 301);
/// Mixing-chamber temperatures of a synthetic thermal-broadening series, K.
pub const THERMAL_T_MC: [f64; 7] = [0.02, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
