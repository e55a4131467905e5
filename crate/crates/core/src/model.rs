//! Closed-form effective model of the driven double dot seen through the cavity.
//!
//! All quantities follow the crate-wide frequency-unit convention (see the
//! crate docs): energies are `E/h`, rates are `ω/2π`, both in Hz.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::data::{LineCut, LineCutMeta};
use crate::device::DeviceParams;
use crate::error::{finite, non_negative, positive, Error, Result};

/// Static operating point of the charge qubit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitTuning {
    /// Detuning `ε0/h` in Hz (signed).
    pub eps0: f64,
    /// Tunnel coupling `tc/h` in Hz.
    pub tc: f64,
}

impl QubitTuning {
    pub fn new(eps0: f64, tc: f64) -> Result<Self> {
        finite("eps0", eps0)?;
        positive("tc", tc)?;
        Ok(Self { eps0, tc })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.eps0, self.tc).map(|_| ())
    }
}

/// Gate through which the ac drive is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DriveChannel {
    /// Screening gate on the cavity side: drives the cavity directly.
    S1,
    /// Plunger on the far dot: drives the cavity through crosstalk only.
    P3,
}

impl std::fmt::Display for DriveChannel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DriveChannel::S1 => f.write_str("S1"),
            DriveChannel::P3 => f.write_str("P3"),
        }
    }
}

impl std::str::FromStr for DriveChannel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S1" => Ok(DriveChannel::S1),
            "P3" => Ok(DriveChannel::P3),
            other => Err(Error::InvalidConfiguration(format!("unknown drive channel `{other}`"))),
        }
    }
}

/// Raw drive amplitudes and cross-coupling ratios.
///
/// `beta2` maps the dot-2 detuning drive onto the cavity drive, `beta3` the
/// dot-3 drive (via crosstalk). Only one of `eps2`, `eps3` may be nonzero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveSettings {
    pub channel: DriveChannel,
    pub eps2: f64,
    pub eps3: f64,
    pub beta2: f64,
    pub beta3: f64,
}

impl DriveSettings {
    pub fn s1(eps2: f64, beta2: f64, beta3: f64) -> Self {
        Self { channel: DriveChannel::S1, eps2, eps3: 0.0, beta2, beta3 }
    }

    pub fn p3(eps3: f64, beta2: f64, beta3: f64) -> Self {
        Self { channel: DriveChannel::P3, eps2: 0.0, eps3, beta2, beta3 }
    }

    pub fn validate(&self) -> Result<()> {
        non_negative("eps2", self.eps2)?;
        non_negative("eps3", self.eps3)?;
        positive("beta2", self.beta2)?;
        positive("beta3", self.beta3)?;
        if self.eps2 != 0.0 && self.eps3 != 0.0 {
            return Err(Error::InvalidConfiguration(
                "only one of eps2 (S1) and eps3 (P3) may be active".into(),
            ));
        }
        match self.channel {
            DriveChannel::S1 if self.eps3 != 0.0 => Err(Error::InvalidConfiguration(
                "S1 channel selected but eps3 is nonzero".into(),
            )),
            DriveChannel::P3 if self.eps2 != 0.0 => Err(Error::InvalidConfiguration(
                "P3 channel selected but eps2 is nonzero".into(),
            )),
            _ => Ok(()),
        }
    }

    /// `1 - beta3/beta2`, the crosstalk reduction of the P3 detuning drive.
    pub fn crosstalk_factor(&self) -> f64 {
        1.0 - self.beta3 / self.beta2
    }
}

/// Detuning drive `εq` and cavity drive `εr` seen by the Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveDrive {
    pub eps_q: f64,
    pub eps_r: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonatorParams {
    /// Resonance frequency in Hz.
    pub fr: f64,
    /// Decay rate `κ/2π` in Hz.
    pub kappa: f64,
    /// Characteristic impedance in Ω.
    pub z0r: f64,
}

impl ResonatorParams {
    pub fn validate(&self) -> Result<()> {
        positive("fr", self.fr)?;
        positive("kappa", self.kappa)?;
        positive("z0r", self.z0r)?;
        if self.kappa >= self.fr {
            return Err(Error::param("kappa", "must be much smaller than fr"));
        }
        Ok(())
    }
}

/// Couplings at one tuning point. All in Hz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSet {
    pub e_q0: f64,
    pub g_st: f64,
    pub g_dy: f64,
    pub delta_omega: f64,
    pub g_perp: f64,
}

/// Qubit energy eigenstate the cavity response is conditioned on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum QubitBranch {
    #[default]
    Ground,
    Excited,
}

impl QubitBranch {
    /// Eigenvalue of the energy-basis `σz`: -1 for ground, +1 for excited.
    pub fn sign(self) -> f64 {
        match self {
            QubitBranch::Ground => -1.0,
            QubitBranch::Excited => 1.0,
        }
    }
}

pub fn qubit_energy(tuning: &QubitTuning) -> Result<f64> {
    finite("eps0", tuning.eps0)?;
    finite("tc", tuning.tc)?;
    Ok(tuning.eps0.hypot(2.0 * tuning.tc))
}

/// `εq = ε2 − (1 − β3/β2)·ε3`, `εr = β2·ε2 + β3·ε3`.
pub fn resolve_drive(settings: &DriveSettings) -> Result<EffectiveDrive> {
    settings.validate()?;
    let eps_q = settings.eps2 - settings.crosstalk_factor() * settings.eps3;
    let eps_r = settings.beta2 * settings.eps2 + settings.beta3 * settings.eps3;
    Ok(EffectiveDrive { eps_q, eps_r })
}

/// Static and dynamic longitudinal couplings, dispersive shift and the
/// energy-basis transverse coupling at `tuning`.
pub fn coupling_set(tuning: &QubitTuning, g0: f64, eps_q: f64) -> Result<CouplingSet> {
    tuning.validate()?;
    finite("g0", g0)?;
    finite("eps_q", eps_q)?;
    let e = qubit_energy(tuning)?;
    let tc2 = tuning.tc * tuning.tc;
    let e3 = e * e * e;
    Ok(CouplingSet {
        e_q0: e,
        g_st: tuning.eps0 * g0 / e,
        g_dy: 4.0 * tc2 * g0 * eps_q / e3,
        delta_omega: 8.0 * tc2 * g0 * g0 / e3,
        g_perp: 2.0 * tuning.tc * g0 / e,
    })
}

/// Two-term Schrieffer–Wolff dispersive shift `g⊥²·(1/(fq−fr) + 1/(fq+fr))`.
pub fn schrieffer_wolff_shift(g_perp: f64, fq: f64, fr: f64) -> Result<f64> {
    finite("g_perp", g_perp)?;
    positive("fq", fq)?;
    positive("fr", fr)?;
    if fq == fr {
        return Err(Error::Singular("qubit and resonator are degenerate (fq = fr)".into()));
    }
    Ok(g_perp * g_perp * (1.0 / (fq - fr) + 1.0 / (fq + fr)))
}

/// Stationary rotating-frame cavity amplitude conditioned on `branch`, for a
/// drive detuned by `drive_detuning` (drive frequency minus `fr`).
pub fn steady_state_alpha(
    couplings: &CouplingSet,
    eps_r: f64,
    kappa: f64,
    branch: QubitBranch,
    drive_detuning: f64,
) -> Result<C64> {
    positive("kappa", kappa)?;
    let s = branch.sign();
    let drive = eps_r + s * couplings.g_dy / 2.0;
    let denom = C64::new(s * couplings.delta_omega - drive_detuning, -kappa / 2.0);
    Ok(-drive / denom)
}

/// Homodyne output `c·(εr ± g∥dy/2)/√(δω² + κ²/4)`.
pub fn iq_signal(c: f64, couplings: &CouplingSet, eps_r: f64, kappa: f64, branch: QubitBranch) -> Result<f64> {
    positive("kappa", kappa)?;
    let s = branch.sign();
    Ok(c * (eps_r + s * couplings.g_dy / 2.0) / couplings.delta_omega.hypot(kappa / 2.0))
}

/// `|g∥dy/δω| = |εq|/(2 g0)`.
pub fn tunability_ratio(eps_q: f64, g0: f64) -> Result<f64> {
    positive("g0", g0)?;
    Ok(eps_q.abs() / (2.0 * g0))
}

/// `2 tc² g0 / E_q0³`: the dimensionless curvature factor shared by the
/// channel-resolved line-cut formulas.
pub(crate) fn curvature_factor(eps0: f64, tc: f64, g0: f64) -> f64 {
    let e = eps0.hypot(2.0 * tc);
    2.0 * tc * tc * g0 / (e * e * e)
}

pub(crate) fn dispersive_shift(eps0: f64, tc: f64, g0: f64) -> f64 {
    let e = eps0.hypot(2.0 * tc);
    8.0 * tc * tc * g0 * g0 / (e * e * e)
}

/// Ground-branch IQ for an S1 drive, with `c_eps2` the product `c·ε2`.
pub(crate) fn iq_s1_point(eps0: f64, c_eps2: f64, beta2: f64, tc: f64, g0: f64, kappa: f64) -> f64 {
    let dw = dispersive_shift(eps0, tc, g0);
    c_eps2 * (beta2 - curvature_factor(eps0, tc, g0)) / dw.hypot(kappa / 2.0)
}

/// Ground-branch IQ for a P3 drive, with `c_eps3` the product `c·ε3`.
pub(crate) fn iq_p3_point(eps0: f64, c_eps3: f64, beta3: f64, beta2: f64, tc: f64, g0: f64, kappa: f64) -> f64 {
    let dw = dispersive_shift(eps0, tc, g0);
    c_eps3 * (beta3 + (1.0 - beta3 / beta2) * curvature_factor(eps0, tc, g0)) / dw.hypot(kappa / 2.0)
}

/// Evaluates the channel-resolved ground-branch IQ signal across a detuning
/// sweep given in µeV.
pub fn iq_linecut(
    device: &DeviceParams,
    eps0_uev: &[f64],
    tc: f64,
    settings: &DriveSettings,
    c: f64,
) -> Result<LineCut> {
    settings.validate()?;
    positive("tc", tc)?;
    finite("c", c)?;
    let g0 = device.g0;
    let kappa = device.resonator.kappa;
    positive("kappa", kappa)?;
    let iq: Vec<f64> = eps0_uev
        .iter()
        .map(|&u| {
            let eps0 = crate::units::uev_to_hz(u);
            match settings.channel {
                DriveChannel::S1 => iq_s1_point(eps0, c * settings.eps2, settings.beta2, tc, g0, kappa),
                DriveChannel::P3 => {
                    iq_p3_point(eps0, c * settings.eps3, settings.beta3, settings.beta2, tc, g0, kappa)
                }
            }
        })
        .collect();
    let meta = LineCutMeta {
        channel: Some(settings.channel),
        c_gain: Some(c),
        ..Default::default()
    };
    LineCut::new(eps0_uev.to_vec(), iq, meta)
}

/// Sampled cavity transmission around the resonance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Absolute drive frequencies in Hz.
    pub freq_hz: Vec<f64>,
    /// `|α₋|` at each frequency.
    pub magnitude: Vec<f64>,
    /// Peak location after parabolic refinement, Hz.
    pub peak_hz: f64,
}

impl Spectrum {
    /// Peak shift relative to the bare resonance.
    pub fn peak_shift(&self, fr: f64) -> f64 {
        self.peak_hz - fr
    }
}

/// Ground-branch transmission magnitude over `fr ± span/2`.
pub fn transmission_spectrum(
    couplings: &CouplingSet,
    eps_r: f64,
    kappa: f64,
    fr: f64,
    span: f64,
    n_points: usize,
) -> Result<Spectrum> {
    positive("span", span)?;
    positive("fr", fr)?;
    if n_points < 3 {
        return Err(Error::param("n_points", "need at least 3 samples"));
    }
    let step = span / (n_points - 1) as f64;
    let mut freq_hz = Vec::with_capacity(n_points);
    let mut magnitude = Vec::with_capacity(n_points);
    for k in 0..n_points {
        let detuning = -span / 2.0 + k as f64 * step;
        let alpha = steady_state_alpha(couplings, eps_r, kappa, QubitBranch::Ground, detuning)?;
        freq_hz.push(fr + detuning);
        magnitude.push(alpha.norm());
    }
    let peak_hz = refine_peak(&freq_hz, &magnitude, step);
    Ok(Spectrum { freq_hz, magnitude, peak_hz })
}

/// Argmax plus a three-point parabolic correction on a uniform grid.
fn refine_peak(x: &[f64], y: &[f64], step: f64) -> f64 {
    let k = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    if k == 0 || k + 1 == y.len() {
        return x[k];
    }
    let (ym, y0, yp) = (y[k - 1], y[k], y[k + 1]);
    let curv = ym - 2.0 * y0 + yp;
    if curv >= 0.0 {
        return x[k];
    }
    x[k] + 0.5 * step * (ym - yp) / curv
}
