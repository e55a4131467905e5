//! Synthetic data generation, dc-offset handling and on-disk formats.
//!
//! Line cuts are CSV with a `# v1` first line, optional `# meta: {json}`
//! line, and an `eps0_ueV,iq_volts` header. Diagrams are row-major CSV plus a
//! JSON sidecar holding the axes. Values are written with 17 significant
//! digits so a write/read cycle reproduces every `f64` exactly.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::calibration::{photon_number, thermal_model, ThermalScan};
use crate::device::{check_version, DeviceParams};
use crate::error::{finite, non_negative, positive, Error, Result};
use crate::model::{iq_linecut, iq_p3_point, iq_s1_point, resolve_drive, DriveChannel, DriveSettings};
use crate::units::uev_to_hz;

pub const CSV_VERSION_LINE: &str = "# v1";
pub const LINECUT_HEADER: [&str; 2] = ["eps0_ueV", "iq_volts"];
pub const ARTIFACT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LineCutMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<DriveChannel>,
    /// Path or label of the device description the cut was made with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<String>,
    /// Detector gain `c` in V/Hz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Offset still present in `iq`, in V.
    #[serde(default)]
    pub dc_offset: f64,
    /// Total offset removed so far, in V.
    #[serde(default)]
    pub dc_offset_removed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photon_number: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
}

/// One detuning sweep. `eps0_hz` always mirrors `eps0_uev`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineCut {
    pub eps0_uev: Vec<f64>,
    pub eps0_hz: Vec<f64>,
    pub iq: Vec<f64>,
    pub meta: LineCutMeta,
}

impl LineCut {
    pub fn new(eps0_uev: Vec<f64>, iq: Vec<f64>, meta: LineCutMeta) -> Result<Self> {
        if eps0_uev.len() != iq.len() {
            return Err(Error::InvalidConfiguration(format!(
                "eps0 has {} samples but iq has {}",
                eps0_uev.len(),
                iq.len()
            )));
        }
        if eps0_uev.iter().chain(&iq).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfiguration("line cut contains non-finite values".into()));
        }
        let increasing = eps0_uev.windows(2).all(|w| w[1] > w[0]);
        let decreasing = eps0_uev.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::InvalidConfiguration("eps0 must be strictly monotone".into()));
        }
        let eps0_hz = eps0_uev.iter().map(|&u| uev_to_hz(u)).collect();
        Ok(Self { eps0_uev, eps0_hz, iq, meta })
    }

    pub fn len(&self) -> usize {
        self.iq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iq.is_empty()
    }
}

/// Gaussian detector noise with standard deviation `sigma0/√⟨n⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Noise at one photon, in V.
    pub sigma0: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self { sigma0: 0.0, seed: 0 }
    }

    pub fn sigma_at(&self, photons: f64) -> Result<f64> {
        non_negative("sigma0", self.sigma0)?;
        if self.sigma0 == 0.0 {
            return Ok(0.0);
        }
        positive("photon number", photons)?;
        Ok(self.sigma0 / photons.sqrt())
    }

    fn samples(&self, sigma: f64, n: usize) -> Vec<f64> {
        if sigma == 0.0 {
            return vec![0.0; n];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let normal = Normal::new(0.0, sigma).expect("sigma checked finite and non-negative");
        (0..n).map(|_| normal.sample(&mut rng)).collect()
    }
}

/// Uniform detuning grid in µeV.
pub fn uniform_grid(start_uev: f64, stop_uev: f64, n: usize) -> Result<Vec<f64>> {
    finite("start", start_uev)?;
    finite("stop", stop_uev)?;
    if n < 2 || start_uev == stop_uev {
        return Err(Error::InvalidConfiguration("grid needs >= 2 points and a non-zero span".into()));
    }
    let step = (stop_uev - start_uev) / (n - 1) as f64;
    Ok((0..n).map(|k| start_uev + step * k as f64).collect())
}

/// Model line cut with Gaussian noise and a dc offset. `c` is the detector gain in V/Hz.
pub fn generate_linecut(
    device: &DeviceParams,
    tc: f64,
    settings: &DriveSettings,
    grid_uev: &[f64],
    noise: &NoiseModel,
    dc_offset: f64,
    c: f64,
) -> Result<LineCut> {
    device.validate()?;
    finite("dc_offset", dc_offset)?;
    let clean = iq_linecut(device, grid_uev, tc, settings, c)?;
    let drive = resolve_drive(settings)?;
    let photons = photon_number(drive.eps_r, device.resonator.kappa)?;
    let sigma = noise.sigma_at(photons)?;
    let noise_samples = noise.samples(sigma, clean.len());
    let iq = clean.iq.iter().zip(&noise_samples).map(|(v, n)| v + n + dc_offset).collect();
    let meta = LineCutMeta {
        seed: Some(noise.seed),
        dc_offset,
        photon_number: Some(photons),
        noise_sigma: Some(sigma),
        ..clean.meta
    };
    LineCut::new(clean.eps0_uev, iq, meta)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramAnchor {
    pub vp2_0: f64,
    pub vp3_0: f64,
}

/// IQ over a plunger-voltage grid; `iq[i][j]` is at `(vp2[i], vp3[j])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagram {
    pub vp2: Vec<f64>,
    pub vp3: Vec<f64>,
    pub iq: Vec<Vec<f64>>,
    pub channel: DriveChannel,
}

/// Detuning in Hz at plunger voltages `(vp2, vp3)`.
pub fn detuning_map(device: &DeviceParams, anchor: &DiagramAnchor, vp2: f64, vp3: f64) -> f64 {
    let la = &device.lever_arms;
    crate::units::ev_to_hz(la.p2_eps * (vp2 - anchor.vp2_0) - la.p3_eps * (vp3 - anchor.vp3_0))
}

/// Stability diagram around one polarization line, noiseless, `c` in V/Hz.
pub fn generate_diagram(
    device: &DeviceParams,
    tc: f64,
    settings: &DriveSettings,
    vp2_grid: &[f64],
    vp3_grid: &[f64],
    anchor: &DiagramAnchor,
    c: f64,
) -> Result<Diagram> {
    device.validate()?;
    settings.validate()?;
    positive("tc", tc)?;
    finite("c", c)?;
    finite("alpha_p2_eps", device.lever_arms.p2_eps)?;
    finite("alpha_p3_eps", device.lever_arms.p3_eps)?;
    if vp2_grid.is_empty() || vp3_grid.is_empty() {
        return Err(Error::InvalidConfiguration("empty voltage grid".into()));
    }
    let (g0, kappa) = (device.g0, device.resonator.kappa);
    let iq = vp2_grid
        .par_iter()
        .map(|&v2| {
            vp3_grid
                .iter()
                .map(|&v3| {
                    let eps0 = detuning_map(device, anchor, v2, v3);
                    match settings.channel {
                        DriveChannel::S1 => iq_s1_point(eps0, c * settings.eps2, settings.beta2, tc, g0, kappa),
                        DriveChannel::P3 => {
                            iq_p3_point(eps0, c * settings.eps3, settings.beta3, settings.beta2, tc, g0, kappa)
                        }
                    }
                })
                .collect()
        })
        .collect();
    Ok(Diagram { vp2: vp2_grid.to_vec(), vp3: vp3_grid.to_vec(), iq, channel: settings.channel })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum OffsetMethod {
    Given(f64),
    /// Median of the outer 15% on each side minus the expected background level.
    MedianOfTails { expected_background: f64 },
}

pub fn subtract_dc_offset(cut: &LineCut, method: OffsetMethod) -> Result<LineCut> {
    let offset = match method {
        OffsetMethod::Given(v) => finite("offset", v)?,
        OffsetMethod::MedianOfTails { expected_background } => {
            if cut.is_empty() {
                return Err(Error::InsufficientData("empty line cut".into()));
            }
            crate::fit::tail_level(&cut.iq) - finite("expected_background", expected_background)?
        }
    };
    let mut out = cut.clone();
    if offset != 0.0 {
        out.iq.iter_mut().for_each(|v| *v -= offset);
        out.meta.dc_offset -= offset;
        out.meta.dc_offset_removed += offset;
    }
    Ok(out)
}

/// Thermal-broadening scans at each mixing-chamber temperature, with
/// Gaussian noise of `relative_noise · amp`.
#[allow(clippy::too_many_arguments)]
pub fn generate_thermal_series(
    alpha: f64,
    te0: f64,
    t_mc: &[f64],
    amp: f64,
    offset: f64,
    n_points: usize,
    relative_noise: f64,
    seed: u64,
) -> Result<Vec<ThermalScan>> {
    positive("alpha", alpha)?;
    non_negative("relative_noise", relative_noise)?;
    positive("amp", amp)?;
    if n_points < 20 {
        return Err(Error::InsufficientData("thermal scans need >= 20 points".into()));
    }
    let te_max = t_mc.iter().map(|&t| t.hypot(te0)).fold(0.0, f64::max);
    let v0 = 0.5;
    t_mc.iter()
        .enumerate()
        .map(|(k, &t)| {
            let te = crate::calibration::electron_temperature(t, te0)?;
            let width = 2.0 * crate::units::K_B_EV_PER_K * te / alpha;
            // Each scan spans ±8 of its own widths so every transition is fully resolved.
            let half_span = 8.0 * width.max(1e-3 * te_max * 2.0 * crate::units::K_B_EV_PER_K / alpha);
            let grid: Vec<f64> =
                (0..n_points).map(|i| v0 - half_span + 2.0 * half_span * i as f64 / (n_points - 1) as f64).collect();
            let noise = NoiseModel { sigma0: relative_noise * amp, seed: seed.wrapping_add(k as u64) };
            let n = noise.samples(noise.sigma0, n_points);
            let iq_mag = grid
                .iter()
                .zip(&n)
                .map(|(&v, e)| Ok(thermal_model(v, v0, amp, offset, alpha, te)? + e))
                .collect::<Result<Vec<_>>>()?;
            Ok(ThermalScan { vp3: grid, iq_mag, t_mc: t })
        })
        .collect()
}

// --- files -------------------------------------------------------------------

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn linecut_to_csv(cut: &LineCut) -> Result<String> {
    let mut out = String::new();
    out.push_str(CSV_VERSION_LINE);
    out.push('\n');
    out.push_str("# meta: ");
    out.push_str(&serde_json::to_string(&cut.meta)?);
    out.push('\n');
    out.push_str(&LINECUT_HEADER.join(","));
    out.push('\n');
    for (e, v) in cut.eps0_uev.iter().zip(&cut.iq) {
        out.push_str(&fmt_f64(*e));
        out.push(',');
        out.push_str(&fmt_f64(*v));
        out.push('\n');
    }
    Ok(out)
}

pub fn linecut_from_csv(text: &str) -> Result<LineCut> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == CSV_VERSION_LINE => {}
        Some((_, l)) => {
            return Err(Error::FormatVersion { found: l.trim().to_string(), expected: CSV_VERSION_LINE.into() })
        }
        None => return Err(Error::Parse { line: 1, message: "empty file".into() }),
    }
    let mut meta = LineCutMeta::default();
    let mut header_seen = false;
    let (mut eps, mut iq) = (Vec::new(), Vec::new());
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim_end_matches('\r');
        if let Some(rest) = line.strip_prefix("# meta:") {
            meta = serde_json::from_str(rest.trim())
                .map_err(|e| Error::Parse { line: line_no, message: format!("bad meta: {e}") })?;
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if !header_seen {
            check_header(&cols, &LINECUT_HEADER, line_no)?;
            header_seen = true;
            continue;
        }
        if cols.len() != 2 {
            return Err(Error::Parse { line: line_no, message: format!("expected 2 columns, got {}", cols.len()) });
        }
        eps.push(parse_value(cols[0], LINECUT_HEADER[0], line_no)?);
        iq.push(parse_value(cols[1], LINECUT_HEADER[1], line_no)?);
    }
    if !header_seen {
        return Err(Error::Parse { line: 2, message: "missing header eps0_ueV,iq_volts".into() });
    }
    LineCut::new(eps, iq, meta)
}

fn check_header(cols: &[&str], expected: &[&str], line: usize) -> Result<()> {
    for (k, want) in expected.iter().enumerate() {
        match cols.get(k) {
            Some(got) if got == want => {}
            Some(got) => {
                return Err(Error::Parse {
                    line,
                    message: format!("column {}: expected header `{want}`, found `{got}`", k + 1),
                })
            }
            None => return Err(Error::Parse { line, message: format!("missing column `{want}`") }),
        }
    }
    if cols.len() > expected.len() {
        return Err(Error::Parse { line, message: format!("unexpected column `{}`", cols[expected.len()]) });
    }
    Ok(())
}

fn parse_value(s: &str, column: &str, line: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Parse { line, message: format!("column `{column}`: cannot parse `{s}` as a number") })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

pub fn write_linecut(path: impl AsRef<Path>, cut: &LineCut) -> Result<()> {
    write_text(path.as_ref(), &linecut_to_csv(cut)?)
}

pub fn read_linecut(path: impl AsRef<Path>) -> Result<LineCut> {
    linecut_from_csv(&std::fs::read_to_string(path)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct DiagramSidecar {
    format_version: u32,
    channel: DriveChannel,
    rows_axis: String,
    rows: Vec<f64>,
    cols_axis: String,
    cols: Vec<f64>,
}

/// Sidecar path next to a diagram CSV: `name.csv` → `name.axes.json`.
pub fn diagram_sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("axes.json")
}

pub fn write_diagram(path: impl AsRef<Path>, diagram: &Diagram) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from(CSV_VERSION_LINE);
    out.push('\n');
    for row in &diagram.iq {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_text(path, &out)?;
    let sidecar = DiagramSidecar {
        format_version: ARTIFACT_FORMAT_VERSION,
        channel: diagram.channel,
        rows_axis: "vp2_V".into(),
        rows: diagram.vp2.clone(),
        cols_axis: "vp3_V".into(),
        cols: diagram.vp3.clone(),
    };
    write_text(&diagram_sidecar_path(path), &(serde_json::to_string_pretty(&sidecar)? + "\n"))
}

pub fn read_diagram(path: impl AsRef<Path>) -> Result<Diagram> {
    let path = path.as_ref();
    let side_text = std::fs::read_to_string(diagram_sidecar_path(path))?;
    let raw: serde_json::Value = serde_json::from_str(&side_text)?;
    check_version(&raw, ARTIFACT_FORMAT_VERSION)?;
    let side: DiagramSidecar = serde_json::from_value(raw)?;
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == CSV_VERSION_LINE => {}
        other => {
            return Err(Error::FormatVersion {
                found: other.map(|(_, l)| l.to_string()).unwrap_or_default(),
                expected: CSV_VERSION_LINE.into(),
            })
        }
    }
    let mut iq = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(j, s)| parse_value(s.trim(), &format!("col {}", j + 1), idx + 1))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != side.cols.len() {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected {} columns, got {}", side.cols.len(), row.len()),
            });
        }
        iq.push(row);
    }
    if iq.len() != side.rows.len() {
        return Err(Error::Parse { line: 0, message: format!("expected {} rows, got {}", side.rows.len(), iq.len()) });
    }
    Ok(Diagram { vp2: side.rows, vp3: side.cols, iq, channel: side.channel })
}

/// Versioned JSON envelope for fit results and other artifacts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub format_version: u32,
    pub kind: String,
    pub data: T,
}

pub fn write_artifact<T: Serialize>(path: impl AsRef<Path>, kind: &str, data: &T) -> Result<()> {
    let env = Artifact { format_version: ARTIFACT_FORMAT_VERSION, kind: kind.to_string(), data };
    write_text(path.as_ref(), &(serde_json::to_string_pretty(&env)? + "\n"))
}

pub fn read_artifact<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Artifact<T>> {
    let raw: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    check_version(&raw, ARTIFACT_FORMAT_VERSION)?;
    Ok(serde_json::from_value(raw)?)
}

/// CSV of several equally long columns, used for plot-ready outputs.
pub fn write_columns(path: impl AsRef<Path>, headers: &[&str], columns: &[&[f64]]) -> Result<()> {
    let n = columns.first().map_or(0, |c| c.len());
    if headers.len() != columns.len() || columns.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidConfiguration("column headers and lengths must agree".into()));
    }
    let mut out = String::from(CSV_VERSION_LINE);
    out.push('\n');
    out.push_str(&headers.join(","));
    out.push('\n');
    for i in 0..n {
        let cells: Vec<String> = columns.iter().map(|c| fmt_f64(c[i])).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_text(path.as_ref(), &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn p3_cut(noise: NoiseModel, offset: f64) -> LineCut {
        let dev = fixtures::pair_device();
        let grid = uniform_grid(-60.0, 60.0, 241).unwrap();
        let s = fixtures::pair_p3_settings();
        generate_linecut(&dev, fixtures::PAIR_TC, &s, &grid, &noise, offset, fixtures::PAIR_C).unwrap()
    }

    #[test]
    fn noiseless_generation_is_model_plus_offset() {
        let clean = p3_cut(NoiseModel::noiseless(), 0.0);
        let shifted = p3_cut(NoiseModel::noiseless(), 1e-3);
        for (a, b) in clean.iq.iter().zip(&shifted.iq) {
            assert!((b - a - 1e-3).abs() < 1e-15);
        }
    }

    #[test]
    fn same_seed_same_noise() {
        let n = NoiseModel { sigma0: 1e-4, seed: 11 };
        assert_eq!(p3_cut(n, 0.0), p3_cut(n, 0.0));
        let other = NoiseModel { seed: 12, ..n };
        assert_ne!(p3_cut(n, 0.0).iq, p3_cut(other, 0.0).iq);
    }

    #[test]
    fn noise_scales_with_photon_number() {
        let n = NoiseModel { sigma0: 2e-4, seed: 3 };
        assert!((n.sigma_at(30.0).unwrap() / n.sigma_at(41.0).unwrap() - (41.0f64 / 30.0).sqrt()).abs() < 1e-12);
        assert!(n.sigma_at(0.0).is_err());
        assert_eq!(NoiseModel::noiseless().sigma_at(0.0).unwrap(), 0.0);
    }

    #[test]
    fn given_offset_inverts_generation() {
        let clean = p3_cut(NoiseModel::noiseless(), 0.0);
        let shifted = p3_cut(NoiseModel::noiseless(), 2.5e-3);
        let back = subtract_dc_offset(&shifted, OffsetMethod::Given(2.5e-3)).unwrap();
        for (a, b) in clean.iq.iter().zip(&back.iq) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(back.meta.dc_offset.abs() < 1e-18);
        assert_eq!(back.meta.dc_offset_removed, 2.5e-3);
        let again = subtract_dc_offset(&back, OffsetMethod::Given(0.0)).unwrap();
        assert_eq!(again, back);
    }

    #[test]
    fn tails_method_recovers_offset_on_flat_data() {
        let x = uniform_grid(-10.0, 10.0, 400).unwrap();
        let noise = NoiseModel { sigma0: 1e-5, seed: 5 };
        let iq: Vec<f64> = noise.samples(1e-5, 400).iter().map(|n| 3e-3 + n).collect();
        let cut = LineCut::new(x, iq, LineCutMeta::default()).unwrap();
        let out = subtract_dc_offset(&cut, OffsetMethod::MedianOfTails { expected_background: 0.0 }).unwrap();
        assert!((out.meta.dc_offset_removed - 3e-3).abs() < 3e-6);
    }

    #[test]
    fn linecut_validation() {
        assert!(LineCut::new(vec![0.0, 1.0], vec![0.0], LineCutMeta::default()).is_err());
        assert!(LineCut::new(vec![0.0, 2.0, 1.0], vec![0.0; 3], LineCutMeta::default()).is_err());
        assert!(LineCut::new(vec![2.0, 1.0, 0.0], vec![0.0; 3], LineCutMeta::default()).is_ok());
        let cut = LineCut::new(vec![1.0, 2.0], vec![0.0; 2], LineCutMeta::default()).unwrap();
        assert!((cut.eps0_hz[0] - crate::units::HZ_PER_UEV).abs() < 1e-3);
    }

    #[test]
    fn csv_roundtrip_is_lossless() {
        let cut = p3_cut(NoiseModel { sigma0: 1e-4, seed: 9 }, 1.234e-3);
        let text = linecut_to_csv(&cut).unwrap();
        assert!(text.starts_with("# v1\n"));
        assert!(text.ends_with('\n'));
        let back = linecut_from_csv(&text).unwrap();
        assert_eq!(back, cut);
    }

    #[test]
    fn malformed_header_names_the_column() {
        let text = "# v1\neps0_ueV,iq_V\n0,1\n";
        match linecut_from_csv(text) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("iq_volts") && message.contains("iq_V")),
            other => panic!("{other:?}"),
        }
        let text = "# v1\neps0_ueV,iq_volts\n0,abc\n";
        match linecut_from_csv(text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("iq_volts"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(linecut_from_csv("# v2\n"), Err(Error::FormatVersion { .. })));
        let text = "# v1\neps0_ueV,iq_volts\n0,0\n2,0\n1,0\n";
        assert!(matches!(linecut_from_csv(text), Err(Error::InvalidConfiguration(_))));
    }

    #[test]
    fn diagram_ridge_sits_on_zero_detuning() {
        let dev = fixtures::pair_device();
        let anchor = DiagramAnchor { vp2_0: 0.0, vp3_0: 0.0 };
        let vp2: Vec<f64> = (0..41).map(|k| (k as f64 - 20.0) * 2e-5).collect();
        let vp3: Vec<f64> = (0..81).map(|k| (k as f64 - 40.0) * 1e-5).collect();
        let s = fixtures::pair_s1_settings();
        let d = generate_diagram(&dev, fixtures::PAIR_TC, &s, &vp2, &vp3, &anchor, fixtures::PAIR_C).unwrap();
        // On the row through the anchor the S1 dip is at vp3 = 0.
        let row = &d.iq[20];
        let jmin = (0..row.len()).min_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        assert_eq!(jmin, 40);
        let mut zero = dev.clone();
        zero.lever_arms.p2_eps = 0.0;
        zero.lever_arms.p3_eps = 0.0;
        let flat = generate_diagram(&zero, fixtures::PAIR_TC, &s, &vp2, &vp3, &anchor, fixtures::PAIR_C).unwrap();
        let v = flat.iq[0][0];
        assert!(flat.iq.iter().flatten().all(|x| *x == v));
    }

    #[test]
    fn diagram_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let dev = fixtures::pair_device();
        let anchor = DiagramAnchor { vp2_0: 0.0, vp3_0: 0.0 };
        let d = generate_diagram(
            &dev,
            fixtures::PAIR_TC,
            &fixtures::pair_p3_settings(),
            &[0.0, 1e-4, 2e-4],
            &[-1e-4, 0.0],
            &anchor,
            fixtures::PAIR_C,
        )
        .unwrap();
        let path = dir.path().join("diag.csv");
        write_diagram(&path, &d).unwrap();
        assert!(diagram_sidecar_path(&path).exists());
        assert_eq!(read_diagram(&path).unwrap(), d);
    }

    #[test]
    fn artifact_roundtrip_and_version_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.json");
        write_artifact(&path, "numbers", &vec![1.0, 2.5]).unwrap();
        let back: Artifact<Vec<f64>> = read_artifact(&path).unwrap();
        assert_eq!(back.data, vec![1.0, 2.5]);
        std::fs::write(&path, r#"{"format_version": 2, "kind": "x", "data": []}"#).unwrap();
        assert!(matches!(read_artifact::<Vec<f64>>(&path), Err(Error::FormatVersion { .. })));
    }

    #[test]
    fn thermal_series_generator_shapes() {
        let scans = generate_thermal_series(0.149, 0.212, &[0.05, 0.2, 0.5], 1e-3, 4e-3, 41, 0.0, 1).unwrap();
        assert_eq!(scans.len(), 3);
        for s in &scans {
            assert_eq!(s.vp3.len(), 41);
            let min = s.iq_mag.iter().copied().fold(f64::INFINITY, f64::min);
            assert!((min - 3e-3).abs() < 1e-12);
        }
    }
}
