//! Line-cut fits built on the damped least-squares engine in [`lm`].

pub mod lm;

use serde::{Deserialize, Serialize};

use crate::data::LineCut;
use crate::error::{positive, Error, Result};
use crate::model::{iq_p3_point, iq_s1_point, DriveChannel};

pub use lm::{least_squares, numerical_jacobian, FitResult, LmOptions, ParamRole, ParameterSpec};

/// Independently calibrated cavity quantities held fixed in every IQ fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityFixed {
    pub g0: f64,
    pub kappa: f64,
}

/// S1-drive fit parameters; `c_eps2` is the product `c·ε2` in V·Hz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct S1Params {
    pub c_eps2: f64,
    pub beta2: f64,
    pub tc: f64,
}

/// P3-drive fit parameters; `c_eps3` is the product `c·ε3` in V·Hz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct P3Params {
    pub c_eps3: f64,
    pub beta3: f64,
    pub tc: f64,
}

pub fn model_iq_s1(eps0_hz: &[f64], p: &S1Params, fixed: &CavityFixed) -> Vec<f64> {
    eps0_hz
        .iter()
        .map(|&e| iq_s1_point(e, p.c_eps2, p.beta2, p.tc, fixed.g0, fixed.kappa))
        .collect()
}

pub fn model_iq_p3(eps0_hz: &[f64], p: &P3Params, beta2: f64, fixed: &CavityFixed) -> Vec<f64> {
    eps0_hz
        .iter()
        .map(|&e| iq_p3_point(e, p.c_eps3, p.beta3, beta2, p.tc, fixed.g0, fixed.kappa))
        .collect()
}

/// Far-detuned level `2·c·εr/κ` of an S1 trace.
pub fn s1_background(p: &S1Params, fixed: &CavityFixed) -> f64 {
    2.0 * p.c_eps2 * p.beta2 / fixed.kappa
}

/// Far-detuned level `2·c·εr/κ` of a P3 trace.
pub fn p3_background(p: &P3Params, fixed: &CavityFixed) -> f64 {
    2.0 * p.c_eps3 * p.beta3 / fixed.kappa
}

/// A fitted trace with its background level, raw and background-subtracted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedCurve {
    pub channel: DriveChannel,
    pub eps0_uev: Vec<f64>,
    pub data: Vec<f64>,
    pub model: Vec<f64>,
    pub background: f64,
    pub data_subtracted: Vec<f64>,
    pub model_subtracted: Vec<f64>,
}

impl FittedCurve {
    fn new(channel: DriveChannel, cut: &LineCut, model: Vec<f64>, background: f64) -> Self {
        Self {
            channel,
            eps0_uev: cut.eps0_uev.clone(),
            data_subtracted: cut.iq.iter().map(|v| v - background).collect(),
            model_subtracted: model.iter().map(|v| v - background).collect(),
            data: cut.iq.clone(),
            model,
            background,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairFit {
    pub result: FitResult,
    pub s1: S1Params,
    pub p3: P3Params,
    pub curves: Vec<FittedCurve>,
}

impl PairFit {
    pub fn background_s1(&self) -> f64 {
        self.curves[0].background
    }

    pub fn background_p3(&self) -> f64 {
        self.curves[1].background
    }

    /// Relative difference of the two background levels, `(B_P3 − B_S1)/B_S1`.
    pub fn background_mismatch(&self) -> f64 {
        (self.background_p3() - self.background_s1()) / self.background_s1()
    }
}

/// Simultaneous fit of one S1 and one P3 line cut with `β2` and `tc` shared.
///
/// Parameters, in order: `c_eps2`, `c_eps3`, `beta2`, `beta3`, `tc`.
pub fn simultaneous_fit(cuts: &[LineCut], fixed: &CavityFixed, opts: &LmOptions) -> Result<PairFit> {
    positive("g0", fixed.g0)?;
    positive("kappa", fixed.kappa)?;
    let find = |ch: DriveChannel| cuts.iter().find(|c| c.meta.channel == Some(ch));
    let s1 = find(DriveChannel::S1).ok_or_else(|| {
        Error::MissingDataset("S1 line cut required: beta2 is not identifiable from P3 data alone".into())
    })?;
    let p3 = find(DriveChannel::P3)
        .ok_or_else(|| Error::MissingDataset("P3 line cut required for the simultaneous fit".into()))?;
    let (x1, x3) = (s1.eps0_hz.clone(), p3.eps0_hz.clone());

    let init = initial_guess_pair(s1, p3, fixed);
    let specs = vec![
        ParameterSpec::positive("c_eps2", init.0.c_eps2),
        ParameterSpec::positive("c_eps3", init.1.c_eps3),
        ParameterSpec::positive("beta2", init.0.beta2).shared(),
        ParameterSpec::positive("beta3", init.1.beta3),
        ParameterSpec::positive("tc", init.0.tc).shared(),
    ];
    let unpack = |x: &[f64]| {
        (
            S1Params { c_eps2: x[0], beta2: x[2], tc: x[4] },
            P3Params { c_eps3: x[1], beta3: x[3], tc: x[4] },
            x[2],
        )
    };
    let residuals = |x: &[f64]| {
        let (a, b, beta2) = unpack(x);
        let mut r: Vec<f64> = model_iq_s1(&x1, &a, fixed).iter().zip(&s1.iq).map(|(m, d)| m - d).collect();
        r.extend(model_iq_p3(&x3, &b, beta2, fixed).iter().zip(&p3.iq).map(|(m, d)| m - d));
        r
    };
    let result = least_squares(residuals, &specs, opts)?;
    let (a, b, beta2) = unpack(&result.best_fit);
    let curves = vec![
        FittedCurve::new(DriveChannel::S1, s1, model_iq_s1(&x1, &a, fixed), s1_background(&a, fixed)),
        FittedCurve::new(DriveChannel::P3, p3, model_iq_p3(&x3, &b, beta2, fixed), p3_background(&b, fixed)),
    ];
    Ok(PairFit { result, s1: a, p3: b, curves })
}

/// Values held fixed across independent per-peak P3 fits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenP3 {
    pub beta3: f64,
    pub beta2: f64,
    pub g0: f64,
    pub kappa: f64,
}

impl FrozenP3 {
    fn cavity(&self) -> CavityFixed {
        CavityFixed { g0: self.g0, kappa: self.kappa }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakFit {
    pub result: FitResult,
    pub params: P3Params,
    pub curve: FittedCurve,
}

impl PeakFit {
    /// `c·g∥dy` at `ε0 = 0`: `(1 − β3/β2)·(c·ε3)·g0/(2tc)`, signed as `g∥dy` (negative for P3).
    pub fn c_times_g_dy(&self, frozen: &FrozenP3) -> f64 {
        -(1.0 - frozen.beta3 / frozen.beta2) * self.params.c_eps3 * frozen.g0 / (2.0 * self.params.tc)
    }

    /// 1σ of [`Self::c_times_g_dy`] from the covariance of `c·ε3` and `tc`.
    pub fn c_times_g_dy_sigma(&self, frozen: &FrozenP3) -> f64 {
        let cov = &self.result.covariance;
        let (a, t) = (self.params.c_eps3, self.params.tc);
        let rel2 = cov[0][0] / (a * a) + cov[2][2] / (t * t) - 2.0 * cov[0][2] / (a * t);
        self.c_times_g_dy(frozen).abs() * rel2.max(0.0).sqrt()
    }

    /// `δω` at `ε0 = 0` implied by the fitted `tc`: `g0²/tc`.
    pub fn delta_omega(&self, frozen: &FrozenP3) -> f64 {
        frozen.g0 * frozen.g0 / self.params.tc
    }
}

/// Independent `(c·ε3, tc)` fits to each P3 peak.
pub fn per_peak_fit(peaks: &[LineCut], frozen: &FrozenP3, opts: &LmOptions) -> Vec<Result<PeakFit>> {
    use rayon::prelude::*;
    peaks.par_iter().map(|cut| fit_single_peak(cut, frozen, opts)).collect()
}

fn fit_single_peak(cut: &LineCut, frozen: &FrozenP3, opts: &LmOptions) -> Result<PeakFit> {
    positive("beta2", frozen.beta2)?;
    positive("beta3", frozen.beta3)?;
    positive("g0", frozen.g0)?;
    positive("kappa", frozen.kappa)?;
    let fixed = frozen.cavity();
    let x = &cut.eps0_hz;
    let background = tail_level(&cut.iq);
    let c_eps3 = (background * frozen.kappa / (2.0 * frozen.beta3)).max(f64::MIN_POSITIVE);
    let tc = tc_from_width(x, &cut.iq, background).unwrap_or_else(|| span(x) / 20.0);
    let specs = vec![
        ParameterSpec::positive("c_eps3", c_eps3),
        ParameterSpec::frozen("beta3", frozen.beta3),
        ParameterSpec::positive("tc", tc),
    ];
    let residuals = |p: &[f64]| {
        let params = P3Params { c_eps3: p[0], beta3: p[1], tc: p[2] };
        model_iq_p3(x, &params, frozen.beta2, &fixed)
            .iter()
            .zip(&cut.iq)
            .map(|(m, d)| m - d)
            .collect::<Vec<_>>()
    };
    let result = least_squares(residuals, &specs, opts)?;
    let params = P3Params { c_eps3: result.best_fit[0], beta3: frozen.beta3, tc: result.best_fit[2] };
    let model = model_iq_p3(x, &params, frozen.beta2, &fixed);
    let curve = FittedCurve::new(DriveChannel::P3, cut, model, p3_background(&params, &fixed));
    Ok(PeakFit { result, params, curve })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub amplitude: f64,
    pub center: f64,
    pub hwhm: f64,
    pub offset: f64,
    pub result: FitResult,
}

pub fn lorentzian(x: f64, amplitude: f64, center: f64, hwhm: f64, offset: f64) -> f64 {
    let u = (x - center) / hwhm;
    offset + amplitude / (1.0 + u * u)
}

/// Fits `offset + amplitude/(1 + ((x − center)/hwhm)²)`; dips give negative amplitudes.
pub fn lorentzian_peak_fit(x: &[f64], y: &[f64], opts: &LmOptions) -> Result<LorentzianFit> {
    if x.len() != y.len() {
        return Err(Error::InvalidConfiguration("x and y lengths differ".into()));
    }
    if x.len() < 7 {
        return Err(Error::InsufficientData(format!("Lorentzian fit needs >= 7 points, got {}", x.len())));
    }
    let offset = tail_level(y);
    let smooth = moving_average(y, 2);
    let (k, dev) = smooth
        .iter()
        .enumerate()
        .map(|(k, v)| (k, v - offset))
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .unwrap_or((0, 0.0));
    let hwhm = half_width(x, &smooth, offset, k).unwrap_or(span(x) / 10.0).max(span(x) * 1e-6);
    let specs = vec![
        ParameterSpec::free("offset", offset),
        ParameterSpec::free("amplitude", dev),
        ParameterSpec::free("center", x[k]),
        ParameterSpec::positive("hwhm", hwhm),
    ];
    let residuals = |p: &[f64]| {
        x.iter().zip(y).map(|(&xi, &yi)| lorentzian(xi, p[1], p[2], p[3], p[0]) - yi).collect::<Vec<_>>()
    };
    let result = least_squares(residuals, &specs, opts)?;
    let p = &result.best_fit;
    Ok(LorentzianFit { offset: p[0], amplitude: p[1], center: p[2], hwhm: p[3], result })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub exponent: f64,
    pub sigma: f64,
    /// Fitted `ln y` at `ln x = 0`.
    pub log_prefactor: f64,
}

/// Power-law exponent from ordinary least squares of `ln y` on `ln x`.
pub fn trend_exponent(x: &[f64], y: &[f64]) -> Result<TrendFit> {
    if x.len() != y.len() {
        return Err(Error::InvalidConfiguration("x and y lengths differ".into()));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData("trend fit needs at least 2 points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::param("x/y", "trend fit requires positive finite values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Singular("all x values identical".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sigma = if lx.len() > 2 {
        let rss: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Ok(TrendFit { exponent: slope, sigma, log_prefactor: intercept })
}

/// Power-law exponent from weighted least squares of `ln y` on `ln x`, with
/// each point weighted by `(y/σy)²`. The returned sigma follows from the
/// supplied uncertainties alone.
pub fn weighted_trend_exponent(x: &[f64], y: &[f64], y_sigma: &[f64]) -> Result<TrendFit> {
    if x.len() != y.len() || y.len() != y_sigma.len() {
        return Err(Error::InvalidConfiguration("x, y and sigma lengths differ".into()));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData("trend fit needs at least 2 points".into()));
    }
    if x.iter().chain(y).chain(y_sigma).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::param("x/y/sigma", "weighted trend fit requires positive finite values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let w: Vec<f64> = y.iter().zip(y_sigma).map(|(v, s)| (v / s).powi(2)).collect();
    let sw: f64 = w.iter().sum();
    let mx = lx.iter().zip(&w).map(|(a, w)| a * w).sum::<f64>() / sw;
    let my = ly.iter().zip(&w).map(|(b, w)| b * w).sum::<f64>() / sw;
    let sxx: f64 = lx.iter().zip(&w).map(|(a, w)| w * (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Singular("all x values identical".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).zip(&w).map(|((a, b), w)| w * (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok(TrendFit { exponent: slope, sigma: sxx.recip().sqrt(), log_prefactor: my - slope * mx })
}

// --- initialization heuristics ---------------------------------------------

fn span(x: &[f64]) -> f64 {
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    (hi - lo).abs()
}

/// Median of the outer 15% of samples on each side.
pub(crate) fn tail_level(y: &[f64]) -> f64 {
    let k = ((y.len() as f64 * 0.15).ceil() as usize).max(1).min(y.len());
    let mut tails: Vec<f64> = y[..k].iter().chain(&y[y.len() - k..]).copied().collect();
    tails.sort_by(f64::total_cmp);
    let n = tails.len();
    if n % 2 == 1 {
        tails[n / 2]
    } else {
        0.5 * (tails[n / 2 - 1] + tails[n / 2])
    }
}

fn moving_average(y: &[f64], half: usize) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(y.len());
            y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Half width at half maximum around index `k`, by linear interpolation.
fn half_width(x: &[f64], y: &[f64], base: f64, k: usize) -> Option<f64> {
    let peak = y[k] - base;
    if peak == 0.0 {
        return None;
    }
    let half = 0.5 * peak;
    let above = |i: usize| (y[i] - base) / half >= 1.0;
    let crossing = |range: Box<dyn Iterator<Item = usize>>| -> Option<f64> {
        let mut prev = k;
        for i in range {
            if !above(i) {
                let (y0, y1) = ((y[prev] - base) / half, (y[i] - base) / half);
                let t = (y0 - 1.0) / (y0 - y1);
                return Some(x[prev] + t * (x[i] - x[prev]));
            }
            prev = i;
        }
        None
    };
    let right = crossing(Box::new(k + 1..y.len()))?;
    let left = crossing(Box::new((0..k).rev()))?;
    Some(0.5 * (right - left).abs())
}

/// Width heuristic for the `E_q0⁻³` lineshape: the half-maximum half width is
/// `2 tc √(2^{2/3} − 1)`.
fn tc_from_width(x: &[f64], y: &[f64], background: f64) -> Option<f64> {
    let smooth = moving_average(y, 2);
    let (k, _) = smooth
        .iter()
        .enumerate()
        .max_by(|a, b| (a.1 - background).abs().total_cmp(&(b.1 - background).abs()))?;
    let hw = half_width(x, &smooth, background, k)?;
    let tc = hw / (2.0 * (2f64.powf(2.0 / 3.0) - 1.0).sqrt());
    (tc > 0.0 && tc.is_finite()).then_some(tc)
}

fn initial_guess_pair(s1: &LineCut, p3: &LineCut, fixed: &CavityFixed) -> (S1Params, P3Params) {
    let kappa = fixed.kappa;
    let b1 = tail_level(&s1.iq);
    let b3 = tail_level(&p3.iq);
    let tc = tc_from_width(&p3.eps0_hz, &p3.iq, b3).unwrap_or_else(|| span(&p3.eps0_hz) / 20.0);
    // Contrast at ε0 = 0 ignoring δω: Δ = (c·ε)·g0/(4tc)·(2/κ) times the crosstalk factor.
    let k = fixed.g0 / (2.0 * tc * kappa);
    let dip = (b1 - moving_average(&s1.iq, 2).iter().copied().fold(f64::INFINITY, f64::min)).max(1e-3 * b1.abs());
    let c_eps2 = (dip / k).max(f64::MIN_POSITIVE);
    let beta2 = (b1 * kappa / (2.0 * c_eps2)).clamp(1e-6, 0.5);
    let peak = (moving_average(&p3.iq, 2).iter().copied().fold(f64::NEG_INFINITY, f64::max) - b3).max(1e-3 * b3.abs());
    let c_eps3 = (peak / k + b3 * kappa / (2.0 * beta2)).max(f64::MIN_POSITIVE);
    let beta3 = (b3 * kappa / (2.0 * c_eps3)).clamp(1e-7, 0.9 * beta2);
    (S1Params { c_eps2, beta2, tc }, P3Params { c_eps3, beta3, tc })
}
