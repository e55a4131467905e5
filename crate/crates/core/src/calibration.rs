//! Device-parameter extraction: thermal lever arm, plunger and S1 lever arms,
//! bare coupling, cavity linewidth, microwave power chain and drive strengths.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{finite, non_negative, positive, Error, Result};
use crate::fit::{least_squares, FitResult, LmOptions, ParameterSpec};
use crate::model::{coupling_set, tunability_ratio, QubitTuning};
use crate::units::{dbm_to_watts, HZ_PER_EV, KLITZING_OHM, K_B_EV_PER_K};

/// `offset − |amp|·sech²(alpha·(vp3 − v0)/(2 k_B te))`.
pub fn thermal_model(vp3: f64, v0: f64, amp: f64, offset: f64, alpha: f64, te: f64) -> Result<f64> {
    positive("alpha", alpha)?;
    positive("te", te)?;
    Ok(sech2_dip(vp3, v0, amp, offset, 2.0 * K_B_EV_PER_K * te / alpha))
}

/// Same lineshape parametrized by its voltage width `w = 2 k_B T_e / α`.
fn sech2_dip(v: f64, v0: f64, amp: f64, offset: f64, width: f64) -> f64 {
    let s = 1.0 / ((v - v0) / width).cosh();
    offset - amp.abs() * s * s
}

/// Full width at half depth of the thermal dip in volts.
pub fn thermal_fwhm(alpha: f64, te: f64) -> Result<f64> {
    positive("alpha", alpha)?;
    positive("te", te)?;
    Ok(2.0 * K_B_EV_PER_K * te / alpha * 2.0 * 2f64.sqrt().acosh())
}

pub fn electron_temperature(t_mc: f64, te0: f64) -> Result<f64> {
    non_negative("t_mc", t_mc)?;
    non_negative("te0", te0)?;
    Ok(t_mc.hypot(te0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalScan {
    /// Plunger voltage samples in V.
    pub vp3: Vec<f64>,
    /// Detector magnitude in V.
    pub iq_mag: Vec<f64>,
    /// Mixing-chamber temperature in K.
    pub t_mc: f64,
}

impl ThermalScan {
    pub fn validate(&self) -> Result<()> {
        non_negative("t_mc", self.t_mc)?;
        if self.vp3.len() != self.iq_mag.len() {
            return Err(Error::InvalidConfiguration("vp3 and iq_mag lengths differ".into()));
        }
        if self.vp3.len() < 20 {
            return Err(Error::InsufficientData(format!(
                "thermal scan needs >= 20 samples, got {}",
                self.vp3.len()
            )));
        }
        if self.vp3.iter().chain(&self.iq_mag).any(|v| !v.is_finite()) {
            return Err(Error::param("vp3/iq_mag", "non-finite sample"));
        }
        Ok(())
    }
}

/// Stage-one result for one scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalScanFit {
    pub t_mc: f64,
    pub v0: f64,
    pub amp: f64,
    pub offset: f64,
    /// `2 k_B T_e / α` in V.
    pub width: f64,
    pub width_sigma: f64,
    pub result: FitResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalSeriesFit {
    /// P3-to-dot-3 lever arm in eV/V.
    pub alpha_p33: f64,
    pub alpha_sigma: f64,
    /// Base electron temperature in K.
    pub te0: f64,
    pub te0_sigma: f64,
    pub scans: Vec<ThermalScanFit>,
    pub result: FitResult,
}

impl ThermalSeriesFit {
    /// Electron temperature implied by each scan's width and the fitted lever arm.
    pub fn electron_temperatures(&self) -> Vec<(f64, f64)> {
        self.scans
            .iter()
            .map(|s| (s.t_mc, s.width * self.alpha_p33 / (2.0 * K_B_EV_PER_K)))
            .collect()
    }
}

fn fit_thermal_scan(scan: &ThermalScan, opts: &LmOptions) -> Result<ThermalScanFit> {
    scan.validate()?;
    let v = &scan.vp3;
    let y = &scan.iq_mag;
    let offset = crate::fit::tail_level(y);
    let (kmin, ymin) = y
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, &m)| (k, m))
        .unwrap_or((0, offset));
    let amp = (offset - ymin).abs().max(f64::MIN_POSITIVE);
    let half = offset - 0.5 * amp;
    let below = y.iter().zip(v).filter(|(yi, _)| **yi < half).map(|(_, vi)| *vi);
    let (lo, hi) = below.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let span = (v[v.len() - 1] - v[0]).abs();
    let fwhm = if hi > lo { hi - lo } else { span / 10.0 };
    let width = (fwhm / (2.0 * 2f64.sqrt().acosh())).max(span * 1e-4);
    let specs = vec![
        ParameterSpec::free("v0", v[kmin]),
        ParameterSpec::positive("amp", amp),
        ParameterSpec::free("offset", offset),
        ParameterSpec::positive("width", width),
    ];
    let residuals = |p: &[f64]| {
        v.iter().zip(y).map(|(&vi, &yi)| sech2_dip(vi, p[0], p[1], p[2], p[3]) - yi).collect::<Vec<_>>()
    };
    let result = least_squares(residuals, &specs, opts)?;
    if !result.converged {
        return Err(Error::NonConvergence(format!(
            "thermal scan at t_mc = {} K: {}",
            scan.t_mc,
            result.diagnostic.clone().unwrap_or_default()
        )));
    }
    let p = result.best_fit.clone();
    Ok(ThermalScanFit {
        t_mc: scan.t_mc,
        v0: p[0],
        amp: p[1],
        offset: p[2],
        width: p[3],
        width_sigma: result.sigma[3],
        result,
    })
}

/// Two-stage thermal-broadening analysis: per-scan sech² width, then
/// `w(T_mc) = (2 k_B/α)·√(T_mc² + T_e0²)` across scans.
pub fn fit_thermal_series(scans: &[ThermalScan], opts: &LmOptions) -> Result<ThermalSeriesFit> {
    let mut temps: Vec<f64> = scans.iter().map(|s| s.t_mc).collect();
    temps.sort_by(f64::total_cmp);
    temps.dedup();
    if temps.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need >= 3 distinct mixing-chamber temperatures, got {}",
            temps.len()
        )));
    }
    let (tmin, tmax) = (temps[0], temps[temps.len() - 1]);
    if !(tmax >= 2.0 * tmin) {
        return Err(Error::InsufficientData(format!(
            "temperature spread too small: {tmin} K to {tmax} K (need a factor of 2)"
        )));
    }
    let fits: Vec<ThermalScanFit> = scans.iter().map(|s| fit_thermal_scan(s, opts)).collect::<Result<_>>()?;

    // Weights from the stage-one uncertainties; fall back to equal weights when
    // the per-scan fits were exact.
    let floor = fits.iter().map(|f| f.width * 1e-9).fold(0.0, f64::max);
    let weights: Vec<f64> = fits
        .iter()
        .map(|f| if f.width_sigma.is_finite() && f.width_sigma > floor { 1.0 / f.width_sigma } else { 1.0 / f.width })
        .collect();

    // Initial guess from the hottest and coldest scans.
    let hot = fits.iter().max_by(|a, b| a.t_mc.total_cmp(&b.t_mc)).unwrap();
    let cold = fits.iter().min_by(|a, b| a.t_mc.total_cmp(&b.t_mc)).unwrap();
    let slope2 = (hot.width.powi(2) - cold.width.powi(2)) / (hot.t_mc.powi(2) - cold.t_mc.powi(2));
    let alpha0 = if slope2 > 0.0 { 2.0 * K_B_EV_PER_K / slope2.sqrt() } else { 2.0 * K_B_EV_PER_K * hot.t_mc / hot.width };
    let te0_sq = (cold.width * alpha0 / (2.0 * K_B_EV_PER_K)).powi(2) - cold.t_mc.powi(2);
    let te0 = if te0_sq > 0.0 { te0_sq.sqrt() } else { 0.5 * tmin.max(1e-3) };

    let specs = vec![ParameterSpec::positive("alpha_p33", alpha0), ParameterSpec::positive("te0", te0)];
    let residuals = |p: &[f64]| {
        fits.iter()
            .zip(&weights)
            .map(|(f, w)| (2.0 * K_B_EV_PER_K / p[0] * f.t_mc.hypot(p[1]) - f.width) * w)
            .collect::<Vec<_>>()
    };
    let result = least_squares(residuals, &specs, opts)?;
    if !result.converged {
        return Err(Error::NonConvergence(format!(
            "temperature-series fit: {}",
            result.diagnostic.clone().unwrap_or_default()
        )));
    }
    Ok(ThermalSeriesFit {
        alpha_p33: result.best_fit[0],
        alpha_sigma: result.sigma[0],
        te0: result.best_fit[1],
        te0_sigma: result.sigma[1],
        scans: fits,
        result,
    })
}

/// Transition-line slopes `m = ΔV_P2/ΔV_P3` and S1 cross-capacitance ratios.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeSet {
    pub m2: f64,
    pub m3: f64,
    pub m_pol: f64,
    /// `(ΔV_P2/ΔV_S1)` along dot-2 lines.
    pub dv_p2_s1: f64,
    /// `(ΔV_P3/ΔV_S1)` along dot-3 lines.
    pub dv_p3_s1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeverArmSet {
    pub alpha_p3_eps: f64,
    pub alpha_p2_eps: f64,
    pub alpha_p22: f64,
    pub alpha_s1_eps: f64,
}

pub fn lever_arms(slopes: &SlopeSet, alpha_p33: f64) -> Result<LeverArmSet> {
    let SlopeSet { m2, m3, m_pol, dv_p2_s1, dv_p3_s1 } = *slopes;
    for (name, v) in [("m2", m2), ("m3", m3), ("m_pol", m_pol), ("dv_p2_s1", dv_p2_s1), ("dv_p3_s1", dv_p3_s1)] {
        finite(name, v)?;
    }
    positive("alpha_p33", alpha_p33)?;
    if m3 == 0.0 {
        return Err(Error::Singular("denominator m3 is zero".into()));
    }
    if m2 + m_pol == 0.0 {
        return Err(Error::Singular("denominator m2 + m_pol is zero".into()));
    }
    if m_pol == 0.0 {
        return Err(Error::Singular("denominator m_pol is zero".into()));
    }
    if m3 == m2 {
        return Err(Error::Singular("denominator m3 - m2 is zero".into()));
    }
    let alpha_p3_eps = alpha_p33 * m_pol / m3 * ((m3 - m2) / (m2 + m_pol));
    let alpha_p2_eps = alpha_p3_eps / m_pol;
    let alpha_p22 = (m3 * alpha_p2_eps + alpha_p3_eps) / (m3 - m2);
    let alpha_s1_eps = alpha_p22 * dv_p2_s1 - alpha_p33 * dv_p3_s1;
    Ok(LeverArmSet { alpha_p3_eps, alpha_p2_eps, alpha_p22, alpha_s1_eps })
}

/// `g0 = (α_S1ε·fr/2)·√(2 Z0r / R_K)` in Hz, with `α` in eV/V.
pub fn bare_coupling_g0(alpha_s1_eps: f64, fr: f64, z0r: f64) -> Result<f64> {
    non_negative("alpha_s1_eps", alpha_s1_eps)?;
    positive("fr", fr)?;
    positive("z0r", z0r)?;
    Ok(alpha_s1_eps * fr / 2.0 * (2.0 * z0r / KLITZING_OHM).sqrt())
}

/// `κ = fr / mean(Q_L)`.
pub fn kappa_from_q(fr: f64, q_loaded: &[f64]) -> Result<f64> {
    Ok(kappa_from_q_with_sigma(fr, q_loaded, &[])?.0)
}

/// `κ` and its 1σ uncertainty from per-measurement `Q` uncertainties added in
/// quadrature through the mean.
pub fn kappa_from_q_with_sigma(fr: f64, q_loaded: &[f64], q_sigma: &[f64]) -> Result<(f64, f64)> {
    positive("fr", fr)?;
    if q_loaded.is_empty() {
        return Err(Error::InsufficientData("no loaded Q values".into()));
    }
    for &q in q_loaded {
        positive("q_loaded", q)?;
    }
    let n = q_loaded.len() as f64;
    let mean = q_loaded.iter().sum::<f64>() / n;
    let mean_sigma = q_sigma.iter().map(|s| s * s).sum::<f64>().sqrt() / n;
    let kappa = fr / mean;
    Ok((kappa, kappa * mean_sigma / mean))
}

/// Microwave chain from the generator to the gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    pub generator_dbm: f64,
    /// Room-temperature chain, cryostat and bias-lead entries in dB.
    pub attenuations_db: Vec<f64>,
    /// Gate-line impedance in Ω.
    pub z0g: f64,
}

impl PowerBudget {
    pub fn total_attenuation_db(&self) -> f64 {
        self.attenuations_db.iter().sum()
    }

    pub fn input_dbm(&self) -> f64 {
        self.generator_dbm - self.total_attenuation_db()
    }

    pub fn validate(&self) -> Result<()> {
        finite("generator_dbm", self.generator_dbm)?;
        non_negative("total attenuation", self.total_attenuation_db())?;
        positive("z0g", self.z0g)?;
        Ok(())
    }
}

/// Input power at the gate in W. Attenuations are minimum values, so this is an upper bound.
pub fn power_budget(budget: &PowerBudget) -> Result<f64> {
    budget.validate()?;
    Ok(dbm_to_watts(budget.input_dbm()))
}

/// `εq = −α·√(2 Z0g P_in)` converted to Hz.
pub fn drive_amplitude(alpha_eps: f64, z0g: f64, p_in: f64) -> Result<f64> {
    positive("alpha_eps", alpha_eps)?;
    positive("z0g", z0g)?;
    non_negative("p_in", p_in)?;
    Ok(-alpha_eps * (2.0 * z0g * p_in).sqrt() * HZ_PER_EV)
}

/// Mean intracavity photon number `4 εr²/κ²`.
pub fn photon_number(eps_r: f64, kappa: f64) -> Result<f64> {
    finite("eps_r", eps_r)?;
    positive("kappa", kappa)?;
    Ok(4.0 * eps_r * eps_r / (kappa * kappa))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingRow {
    pub label: String,
    pub tc: f64,
    pub g0: f64,
    pub eps_q: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingTableRow {
    pub label: String,
    pub tc: f64,
    pub delta_omega: f64,
    pub g_dy: f64,
    pub ratio: f64,
}

/// Couplings at `ε0 = 0` for each row.
pub fn coupling_table(rows: &[CouplingRow]) -> Result<Vec<CouplingTableRow>> {
    rows.iter()
        .map(|r| {
            let c = coupling_set(&QubitTuning::new(0.0, r.tc)?, r.g0, r.eps_q)?;
            Ok(CouplingTableRow {
                label: r.label.clone(),
                tc: r.tc,
                delta_omega: c.delta_omega,
                g_dy: c.g_dy,
                ratio: tunability_ratio(r.eps_q, r.g0)?,
            })
        })
        .collect()
}

/// Plain-text table in GHz and kHz.
pub fn format_coupling_table(rows: &[CouplingTableRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<12} {:>8} {:>12} {:>12} {:>8}", "row", "tc/GHz", "dw/kHz", "g_dy/kHz", "ratio");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<12} {:>8.2} {:>12.1} {:>12.1} {:>8.1}",
            r.label,
            r.tc / 1e9,
            r.delta_omega / 1e3,
            r.g_dy / 1e3,
            r.ratio
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn thermal_model_limits() {
        let te = 0.25;
        let alpha = 0.149;
        assert_relative_eq!(thermal_model(0.1, 0.1, 2.0, 5.0, alpha, te).unwrap(), 3.0);
        assert_relative_eq!(thermal_model(10.0, 0.1, 2.0, 5.0, alpha, te).unwrap(), 5.0);
        assert_relative_eq!(thermal_model(0.1, 0.1, -2.0, 5.0, alpha, te).unwrap(), 3.0);
        let fwhm = thermal_fwhm(alpha, te).unwrap();
        let edge = thermal_model(0.1 + fwhm / 2.0, 0.1, 2.0, 5.0, alpha, te).unwrap();
        assert_relative_eq!(edge, 4.0, epsilon = 1e-12);
        assert!(thermal_model(0.0, 0.0, 1.0, 0.0, alpha, 0.0).is_err());
    }

    #[test]
    fn electron_temperature_examples() {
        assert_relative_eq!(electron_temperature(0.0, 0.212).unwrap(), 0.212);
        assert_relative_eq!(electron_temperature(0.7, 0.0).unwrap(), 0.7);
        assert_relative_eq!(electron_temperature(0.3, 0.4).unwrap(), 0.5, epsilon = 1e-15);
        assert!(electron_temperature(-0.1, 0.2).is_err());
    }

    fn synthetic_scan(t_mc: f64, alpha: f64, te0: f64) -> ThermalScan {
        let te = t_mc.hypot(te0);
        let w = 2.0 * K_B_EV_PER_K * te / alpha;
        let vp3: Vec<f64> = (0..61).map(|k| 0.5 + (k as f64 - 30.0) * w / 6.0).collect();
        let iq_mag = vp3.iter().map(|&v| thermal_model(v, 0.5, 1e-3, 4e-3, alpha, te).unwrap()).collect();
        ThermalScan { vp3, iq_mag, t_mc }
    }

    #[test]
    fn noiseless_thermal_series_is_exact() {
        let scans: Vec<_> = [0.05, 0.15, 0.3, 0.5].iter().map(|&t| synthetic_scan(t, 0.149, 0.212)).collect();
        let fit = fit_thermal_series(&scans, &LmOptions::default()).unwrap();
        assert_relative_eq!(fit.alpha_p33, 0.149, max_relative = 1e-7);
        assert_relative_eq!(fit.te0, 0.212, max_relative = 1e-7);
        for (t_mc, te) in fit.electron_temperatures() {
            assert_relative_eq!(te, t_mc.hypot(0.212), max_relative = 1e-6);
        }
    }

    #[test]
    fn thermal_series_needs_three_temperatures_and_spread() {
        let two: Vec<_> = [0.1, 0.4].iter().map(|&t| synthetic_scan(t, 0.149, 0.212)).collect();
        assert!(matches!(fit_thermal_series(&two, &LmOptions::default()), Err(Error::InsufficientData(_))));
        let narrow: Vec<_> = [0.3, 0.35, 0.4].iter().map(|&t| synthetic_scan(t, 0.149, 0.212)).collect();
        assert!(matches!(fit_thermal_series(&narrow, &LmOptions::default()), Err(Error::InsufficientData(_))));
    }

    /// Slopes chosen so that the lever-arm relations reproduce
    /// α_P3ε = 0.09, α_P2ε = 0.11 and α_S1ε = 0.04 eV/V at α_P3,3 = 0.149 eV/V.
    fn pair_slopes() -> SlopeSet {
        SlopeSet { m2: 118.0 / 369.0, m3: 2.0, m_pol: 9.0 / 11.0, dv_p2_s1: 61.0 / 205.0, dv_p3_s1: 0.1 }
    }

    #[test]
    fn lever_arms_reproduce_device_row() {
        let arms = lever_arms(&pair_slopes(), 0.149).unwrap();
        assert_relative_eq!(arms.alpha_p3_eps, 0.09, max_relative = 1e-12);
        assert_relative_eq!(arms.alpha_p2_eps, 0.11, max_relative = 1e-12);
        assert_relative_eq!(arms.alpha_s1_eps, 0.04, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_slopes_name_the_denominator() {
        let mut s = pair_slopes();
        s.m2 = s.m3;
        match lever_arms(&s, 0.149) {
            Err(Error::Singular(msg)) => assert!(msg.contains("m3 - m2")),
            other => panic!("expected singular error, got {other:?}"),
        }
        let mut s = pair_slopes();
        s.m2 = -s.m_pol;
        assert!(matches!(lever_arms(&s, 0.149), Err(Error::Singular(m)) if m.contains("m2 + m_pol")));
    }

    #[test]
    fn s1_lever_arm_is_linear_in_ratios() {
        let base = pair_slopes();
        let a = lever_arms(&base, 0.149).unwrap();
        let scaled = SlopeSet { dv_p2_s1: 3.0 * base.dv_p2_s1, dv_p3_s1: 3.0 * base.dv_p3_s1, ..base };
        let b = lever_arms(&scaled, 0.149).unwrap();
        assert_relative_eq!(b.alpha_s1_eps, 3.0 * a.alpha_s1_eps, max_relative = 1e-12);
        assert_relative_eq!(b.alpha_p22, a.alpha_p22);
    }

    #[test]
    fn bare_coupling_examples() {
        let g = bare_coupling_g0(0.04, 1.3038e9, 575.0).unwrap();
        assert!((g / 1e6 - 5.5).abs() < 0.05, "{g}");
        let g = bare_coupling_g0(0.03, 1.3038e9, 575.0).unwrap();
        assert!((g / 1e6 - 4.1).abs() < 0.05, "{g}");
        assert_eq!(bare_coupling_g0(0.0, 1.3038e9, 575.0).unwrap(), 0.0);
    }

    #[test]
    fn kappa_examples() {
        let k = kappa_from_q(1.3038e9, &[10470.0, 10476.0]).unwrap();
        assert!((k / 1e3 - 124.5).abs() < 0.05);
        assert_relative_eq!(kappa_from_q(1.0e9, &[10000.0]).unwrap(), 100e3);
        assert!(kappa_from_q(1.0e9, &[]).is_err());
        assert!(kappa_from_q(1.0e9, &[0.0]).is_err());
        let (_, s) = kappa_from_q_with_sigma(1.3038e9, &[10470.0, 10476.0], &[32.0, 32.0]).unwrap();
        assert!(s > 0.0 && s < 1e3);
    }

    #[test]
    fn power_budget_examples() {
        let b = PowerBudget { generator_dbm: 6.0, attenuations_db: vec![33.0, 40.0, 10.0], z0g: 1.0 };
        assert!((power_budget(&b).unwrap() - 20e-12).abs() < 0.1e-12);
        let b = PowerBudget { generator_dbm: 15.0, attenuations_db: vec![42.0, 40.0, 10.0], z0g: 1.0 };
        assert!((b.input_dbm() + 77.0).abs() < 1e-12);
        let b = PowerBudget { generator_dbm: 0.0, attenuations_db: vec![], z0g: 50.0 };
        assert_relative_eq!(power_budget(&b).unwrap(), 1e-3, max_relative = 1e-12);
        let b = PowerBudget { generator_dbm: 0.0, attenuations_db: vec![-3.0], z0g: 50.0 };
        assert!(power_budget(&b).is_err());
    }

    #[test]
    fn drive_amplitude_examples() {
        let p = dbm_to_watts(-77.0);
        assert!((drive_amplitude(0.09, 1.0, p).unwrap() / 1e6 + 137.0).abs() < 1.0);
        assert!((drive_amplitude(0.10, 1.0, p).unwrap() / 1e6 + 152.0).abs() < 1.0);
        assert_eq!(drive_amplitude(0.10, 1.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn photon_number_examples() {
        assert_eq!(photon_number(397e3, 124.5e3).unwrap().round(), 41.0);
        assert_eq!(photon_number(340e3, 124.5e3).unwrap().round(), 30.0);
        assert_eq!(photon_number(0.0, 124.5e3).unwrap(), 0.0);
    }

    #[test]
    fn coupling_table_zero_drive_and_ceiling() {
        let rows = vec![
            CouplingRow { label: "idle".into(), tc: 5e9, g0: 5.5e6, eps_q: 0.0 },
            CouplingRow { label: "ceiling".into(), tc: 4.6e9, g0: 5.5e6, eps_q: 0.1 * 4.6e9 },
        ];
        let t = coupling_table(&rows).unwrap();
        assert_eq!(t[0].g_dy, 0.0);
        assert_eq!(t[0].ratio, 0.0);
        assert_relative_eq!(t[1].g_dy, 5.5e6 / 20.0, max_relative = 1e-12);
        assert!((t[1].g_dy / 1e6 - 0.28).abs() < 0.01);
        let text = format_coupling_table(&t);
        assert!(text.contains("ceiling"));
        assert_eq!(text.lines().count(), 3);
    }
}
