use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use longcav_core::calibration::{
    bare_coupling_g0, coupling_table, drive_amplitude, fit_thermal_series, kappa_from_q, lever_arms,
    photon_number, power_budget, CouplingRow, CouplingTableRow, PowerBudget, SlopeSet, ThermalScan,
};
use longcav_core::data::{
    generate_diagram, generate_linecut, generate_thermal_series, read_artifact, read_linecut, subtract_dc_offset,
    uniform_grid, write_artifact, write_columns, write_diagram, write_linecut, DiagramAnchor, LineCut, NoiseModel,
    OffsetMethod,
};
use longcav_core::device::DeviceParams;
use longcav_core::fit::{
    lorentzian_peak_fit, per_peak_fit, simultaneous_fit, trend_exponent, CavityFixed, FittedCurve, FrozenP3,
    LmOptions, P3Params,
};
use longcav_core::fixtures::{self, CouplingCheck};
use longcav_core::model::{
    coupling_set, resolve_drive, transmission_spectrum, DriveChannel, DriveSettings, QubitTuning,
};
use longcav_core::oracle::{oracle_iq_compare_with_run, write_trajectory, FockConfig, LabFrameParams};
use longcav_core::units::{ghz, khz, mhz, pw, to_ghz, to_khz, to_mhz, to_pw, uev_to_hz};

use crate::args::{CavityArgs, Calib, Channel, Cli, Command, DriveArgs, Fit, Oracle, Simulate, Table};
use crate::manifest::{manifest_path, RunManifest, MANIFEST_FORMAT_VERSION};
use crate::NotConverged;

/// Files and settings produced by one command.
struct Outcome {
    primary: PathBuf,
    outputs: Vec<PathBuf>,
    inputs: Vec<PathBuf>,
    seed: Option<u64>,
    resolved: serde_json::Value,
    /// Set when results were written but a fit did not converge.
    not_converged: Option<String>,
}

impl Outcome {
    fn new(primary: PathBuf, resolved: serde_json::Value) -> Self {
        Self { outputs: vec![primary.clone()], primary, inputs: vec![], seed: None, resolved, not_converged: None }
    }
}

struct Ctx {
    device: DeviceParams,
    device_label: String,
    device_path: Option<PathBuf>,
    out_dir: PathBuf,
}

impl Ctx {
    fn output(&self, explicit: &Option<PathBuf>, default_name: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.out_dir.join(default_name))
    }

    fn resolved<T: Serialize>(&self, args: &T) -> Result<serde_json::Value> {
        Ok(serde_json::json!({
            "args": serde_json::to_value(args)?,
            "device": serde_json::to_value(&self.device)?,
            "device_source": self.device_label,
        }))
    }
}

pub fn run(cli: &Cli, argv: &[String]) -> Result<()> {
    if let Command::Replay { manifest } = &cli.command {
        return replay(manifest);
    }
    if let Some(n) = cli.threads {
        longcav_core::configure_threads(n)?;
    }
    let (device, device_label) = match &cli.device {
        Some(path) => (
            DeviceParams::load(path).with_context(|| format!("loading device {}", path.display()))?,
            path.display().to_string(),
        ),
        None => (fixtures::pair_device(), "builtin:pair".to_string()),
    };
    std::fs::create_dir_all(&cli.out_dir)
        .with_context(|| format!("creating output directory {}", cli.out_dir.display()))?;
    let ctx = Ctx { device, device_label, device_path: cli.device.clone(), out_dir: cli.out_dir.clone() };

    let mut outcome = match &cli.command {
        Command::Simulate(cmd) => simulate(&ctx, cmd)?,
        Command::Fit(cmd) => fit(&ctx, cmd)?,
        Command::Calib(cmd) => calib(&ctx, cmd)?,
        Command::Oracle(cmd) => oracle(&ctx, cmd)?,
        Command::Table(cmd) => table(&ctx, cmd)?,
        Command::Replay { .. } => unreachable!("handled above"),
    };
    if let Some(path) = &ctx.device_path {
        outcome.inputs.insert(0, path.clone());
    }
    let manifest = RunManifest {
        format_version: MANIFEST_FORMAT_VERSION,
        command: argv.to_vec(),
        cwd: std::env::current_dir()?,
        resolved: outcome.resolved,
        inputs: outcome.inputs,
        outputs: outcome.outputs,
        seed: outcome.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: chrono::Utc::now().to_rfc3339(),
    };
    let mpath = manifest_path(&outcome.primary);
    manifest.save(&mpath)?;
    println!("manifest: {}", mpath.display());
    if let Some(msg) = outcome.not_converged {
        return Err(NotConverged(msg).into());
    }
    Ok(())
}

fn replay(path: &Path) -> Result<()> {
    let manifest = RunManifest::load(path)?;
    if manifest.command.first().map(String::as_str) == Some("replay") {
        bail!("manifest records a replay; refusing to recurse");
    }
    std::env::set_current_dir(&manifest.cwd)
        .with_context(|| format!("entering recorded working directory {}", manifest.cwd.display()))?;
    let mut argv = vec!["longcav".to_string()];
    argv.extend(manifest.command.iter().cloned());
    let cli = <Cli as clap::Parser>::try_parse_from(&argv)?;
    run(&cli, &manifest.command)
}

fn channel(c: Channel) -> DriveChannel {
    match c {
        Channel::S1 => DriveChannel::S1,
        Channel::P3 => DriveChannel::P3,
    }
}

fn drive_settings(d: &DriveArgs) -> DriveSettings {
    match channel(d.channel) {
        DriveChannel::S1 => {
            let eps2 = d.eps_mhz.map(mhz).unwrap_or(fixtures::pair_s1_settings().eps2);
            DriveSettings::s1(eps2, d.beta2, d.beta3)
        }
        DriveChannel::P3 => {
            let eps3 = d.eps_mhz.map(mhz).unwrap_or(fixtures::pair_p3_settings().eps3);
            DriveSettings::p3(eps3, d.beta2, d.beta3)
        }
    }
}

fn cavity(ctx: &Ctx, c: &CavityArgs) -> CavityFixed {
    CavityFixed {
        g0: c.g0_mhz.map(mhz).unwrap_or(ctx.device.g0),
        kappa: c.kappa_khz.map(khz).unwrap_or(ctx.device.resonator.kappa),
    }
}

fn simulate(ctx: &Ctx, cmd: &Simulate) -> Result<Outcome> {
    match cmd {
        Simulate::Linecut { drive, grid, sigma0_v, seed, dc_offset_v, out } => {
            let settings = drive_settings(drive);
            let grid_uev = uniform_grid(grid.start_uev, grid.stop_uev, grid.points)?;
            let noise = NoiseModel { sigma0: *sigma0_v, seed: *seed };
            let mut cut = generate_linecut(
                &ctx.device,
                ghz(drive.tc_ghz),
                &settings,
                &grid_uev,
                &noise,
                *dc_offset_v,
                drive.gain_v_per_hz,
            )?;
            cut.meta.device = Some(ctx.device_label.clone());
            let path = ctx.output(out, &format!("linecut_{}.csv", settings.channel));
            write_linecut(&path, &cut)?;
            println!(
                "{} line cut: {} points, <n> = {:.1}, noise sigma = {:.3e} V -> {}",
                settings.channel,
                cut.len(),
                cut.meta.photon_number.unwrap_or_default(),
                cut.meta.noise_sigma.unwrap_or_default(),
                path.display()
            );
            let mut o = Outcome::new(path, ctx.resolved(cmd)?);
            o.seed = Some(*seed);
            Ok(o)
        }
        Simulate::Diagram { drive, vp2_min_v, vp2_max_v, vp2_points, vp3_min_v, vp3_max_v, vp3_points, out } => {
            let settings = drive_settings(drive);
            let vp2 = uniform_grid(*vp2_min_v, *vp2_max_v, *vp2_points)?;
            let vp3 = uniform_grid(*vp3_min_v, *vp3_max_v, *vp3_points)?;
            let anchor = DiagramAnchor { vp2_0: 0.0, vp3_0: 0.0 };
            let diagram =
                generate_diagram(&ctx.device, ghz(drive.tc_ghz), &settings, &vp2, &vp3, &anchor, drive.gain_v_per_hz)?;
            let path = ctx.output(out, &format!("diagram_{}.csv", settings.channel));
            write_diagram(&path, &diagram)?;
            let sidecar = longcav_core::data::diagram_sidecar_path(&path);
            println!("{} diagram: {}x{} pixels -> {}", settings.channel, vp2.len(), vp3.len(), path.display());
            let mut o = Outcome::new(path, ctx.resolved(cmd)?);
            o.outputs.push(sidecar);
            Ok(o)
        }
        Simulate::Spectrum { drive, eps0_uev, span_khz, points, out } => {
            let settings = drive_settings(drive);
            let eff = resolve_drive(&settings)?;
            let tuning = QubitTuning::new(uev_to_hz(*eps0_uev), ghz(drive.tc_ghz))?;
            let couplings = coupling_set(&tuning, ctx.device.g0, eff.eps_q)?;
            let fr = ctx.device.resonator.fr;
            let spectrum =
                transmission_spectrum(&couplings, eff.eps_r, ctx.device.resonator.kappa, fr, khz(*span_khz), *points)?;
            let path = ctx.output(out, "spectrum.csv");
            write_columns(&path, &["freq_hz", "magnitude"], &[&spectrum.freq_hz, &spectrum.magnitude])?;
            println!(
                "peak at fr {:+.3} kHz (delta_omega = {:.3} kHz) -> {}",
                to_khz(spectrum.peak_shift(fr)),
                to_khz(couplings.delta_omega),
                path.display()
            );
            Ok(Outcome::new(path, ctx.resolved(cmd)?))
        }
        Simulate::Thermal { alpha_ev_per_v, te0_k, t_mc_k, points, relative_noise, seed, amp_v, offset_v, out } => {
            let scans = generate_thermal_series(
                *alpha_ev_per_v,
                *te0_k,
                t_mc_k,
                *amp_v,
                *offset_v,
                *points,
                *relative_noise,
                *seed,
            )?;
            let path = ctx.output(out, "thermal_series.json");
            write_artifact(&path, "thermal-series", &scans)?;
            println!("{} thermal scans -> {}", scans.len(), path.display());
            let mut o = Outcome::new(path, ctx.resolved(cmd)?);
            o.seed = Some(*seed);
            Ok(o)
        }
    }
}

/// Removes the dc offset recorded in the file, if any.
fn ingest(path: &Path, ch: DriveChannel) -> Result<LineCut> {
    let mut cut = read_linecut(path).with_context(|| format!("reading line cut {}", path.display()))?;
    if let Some(found) = cut.meta.channel {
        if found != ch {
            bail!("{} holds a {found} line cut, expected {ch}", path.display());
        }
    }
    cut.meta.channel = Some(ch);
    if cut.meta.dc_offset != 0.0 {
        cut = subtract_dc_offset(&cut, OffsetMethod::Given(cut.meta.dc_offset))?;
    }
    Ok(cut)
}

fn write_curve(path: &Path, c: &FittedCurve) -> Result<()> {
    write_columns(
        path,
        &["eps0_ueV", "data", "model", "data_subtracted", "model_subtracted"],
        &[&c.eps0_uev, &c.data, &c.model, &c.data_subtracted, &c.model_subtracted],
    )?;
    Ok(())
}

fn sibling(primary: &Path, suffix: &str) -> PathBuf {
    let stem = primary.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    primary.with_file_name(format!("{stem}_{suffix}"))
}

#[derive(Serialize)]
struct PeakReport {
    source: PathBuf,
    params: Option<P3Params>,
    tc_sigma: Option<f64>,
    c_times_g_dy: Option<f64>,
    delta_omega: Option<f64>,
    converged: bool,
    lorentzian_amplitude: Option<f64>,
    error: Option<String>,
}

fn fit(ctx: &Ctx, cmd: &Fit) -> Result<Outcome> {
    let opts = LmOptions::default();
    match cmd {
        Fit::Linecut { s1, p3, cavity: cav, out } => {
            let cuts = [ingest(s1, DriveChannel::S1)?, ingest(p3, DriveChannel::P3)?];
            let fixed = cavity(ctx, cav);
            let pair = simultaneous_fit(&cuts, &fixed, &opts)?;
            let path = ctx.output(out, "fit_pair.json");
            write_artifact(&path, "pair-fit", &pair)?;
            let mut o = Outcome::new(path.clone(), ctx.resolved(cmd)?);
            for c in &pair.curves {
                let p = sibling(&path, &format!("{}.csv", c.channel));
                write_curve(&p, c)?;
                o.outputs.push(p);
            }
            o.inputs = vec![s1.clone(), p3.clone()];
            let r = &pair.result;
            for (k, name) in r.names.iter().enumerate() {
                println!("{name:>8} = {:.6e} +/- {:.2e}", r.best_fit[k], r.sigma[k]);
            }
            println!("tc = {:.3} GHz", to_ghz(pair.s1.tc));
            println!(
                "backgrounds: S1 {:.4e} V, P3 {:.4e} V (P3/S1 - 1 = {:+.4})",
                pair.background_s1(),
                pair.background_p3(),
                pair.background_mismatch()
            );
            if !r.converged {
                o.not_converged = Some(r.diagnostic.clone().unwrap_or_else(|| "pair fit".into()));
            }
            Ok(o)
        }
        Fit::Thermal { input, out } => {
            let artifact = read_artifact::<Vec<ThermalScan>>(input)?;
            if artifact.kind != "thermal-series" {
                bail!("{} holds a `{}` artifact, expected `thermal-series`", input.display(), artifact.kind);
            }
            let fitted = fit_thermal_series(&artifact.data, &opts)?;
            let path = ctx.output(out, "fit_thermal.json");
            write_artifact(&path, "thermal-fit", &fitted)?;
            println!("alpha_P3,3 = {:.4} +/- {:.4} eV/V", fitted.alpha_p33, fitted.alpha_sigma);
            println!("T_e0 = {:.4} +/- {:.4} K", fitted.te0, fitted.te0_sigma);
            let mut o = Outcome::new(path, ctx.resolved(cmd)?);
            o.inputs = vec![input.clone()];
            Ok(o)
        }
        Fit::Peaks { peaks, beta3, beta2, cavity: cav, out } => {
            let fixed = cavity(ctx, cav);
            let frozen = FrozenP3 { beta3: *beta3, beta2: *beta2, g0: fixed.g0, kappa: fixed.kappa };
            let cuts: Vec<LineCut> = peaks.iter().map(|p| ingest(p, DriveChannel::P3)).collect::<Result<_>>()?;
            let results = per_peak_fit(&cuts, &frozen, &opts);
            let path = ctx.output(out, "fit_peaks.json");
            let mut o = Outcome::new(path.clone(), ctx.resolved(cmd)?);
            o.inputs = peaks.clone();
            let mut reports = Vec::new();
            let mut failures = Vec::new();
            for (k, (res, cut)) in results.into_iter().zip(&cuts).enumerate() {
                let lor = lorentzian_peak_fit(&cut.eps0_uev, &cut.iq, &opts).ok();
                let rep = match res {
                    Ok(pf) => {
                        let curve_path = sibling(&path, &format!("{k}.csv"));
                        write_curve(&curve_path, &pf.curve)?;
                        o.outputs.push(curve_path);
                        if !pf.result.converged {
                            failures.push(format!("peak {k}: {}", pf.result.diagnostic.clone().unwrap_or_default()));
                        }
                        PeakReport {
                            source: peaks[k].clone(),
                            params: Some(pf.params),
                            tc_sigma: pf.result.sigma_of("tc"),
                            c_times_g_dy: Some(pf.c_times_g_dy(&frozen)),
                            delta_omega: Some(pf.delta_omega(&frozen)),
                            converged: pf.result.converged,
                            lorentzian_amplitude: lor.as_ref().map(|l| l.amplitude),
                            error: None,
                        }
                    }
                    Err(e) => {
                        failures.push(format!("peak {k}: {e}"));
                        PeakReport {
                            source: peaks[k].clone(),
                            params: None,
                            tc_sigma: None,
                            c_times_g_dy: None,
                            delta_omega: None,
                            converged: false,
                            lorentzian_amplitude: lor.as_ref().map(|l| l.amplitude),
                            error: Some(e.to_string()),
                        }
                    }
                };
                match (&rep.params, rep.c_times_g_dy, rep.delta_omega) {
                    (Some(p), Some(cg), Some(dw)) => println!(
                        "peak {k}: tc = {:.3} GHz, c*eps3 = {:.4e} V*Hz, c*g_dy = {:.4e} V*Hz, delta_omega = {:.2} kHz{}",
                        to_ghz(p.tc),
                        p.c_eps3,
                        cg,
                        to_khz(dw),
                        if rep.converged { "" } else { " (not converged)" }
                    ),
                    _ => println!("peak {k}: failed ({})", rep.error.clone().unwrap_or_default()),
                }
                reports.push(rep);
            }
            let trend = {
                let pts: Vec<(f64, f64)> = reports
                    .iter()
                    .filter_map(|r| Some((r.params?.tc, r.lorentzian_amplitude?)))
                    .filter(|(_, a)| *a > 0.0)
                    .collect();
                let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                trend_exponent(&x, &y).ok()
            };
            if let Some(t) = &trend {
                println!("peak amplitude vs tc: exponent {:.3} +/- {:.3}", t.exponent, t.sigma);
            }
            write_artifact(&path, "peak-fits", &serde_json::json!({ "frozen": frozen, "peaks": reports, "amplitude_trend": trend }))?;
            if !failures.is_empty() {
                o.not_converged = Some(failures.join("; "));
            }
            Ok(o)
        }
    }
}

#[derive(Serialize)]
struct Calibrated<'a> {
    quantity: &'a str,
    value: f64,
    unit: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    details: Option<serde_json::Value>,
}

fn calib(ctx: &Ctx, cmd: &Calib) -> Result<Outcome> {
    let (name, result) = match cmd {
        Calib::G0 { alpha_s1_ev_per_v, fr_ghz, z0r_ohm } => {
            let g0 = bare_coupling_g0(*alpha_s1_ev_per_v, ghz(*fr_ghz), *z0r_ohm)?;
            println!("g0/2pi = {:.4} MHz", to_mhz(g0));
            ("g0", Calibrated { quantity: "g0", value: g0, unit: "Hz", details: None })
        }
        Calib::Kappa { fr_ghz, q_loaded } => {
            let kappa = kappa_from_q(ghz(*fr_ghz), q_loaded)?;
            println!("kappa/2pi = {:.2} kHz", to_khz(kappa));
            ("kappa", Calibrated { quantity: "kappa", value: kappa, unit: "Hz", details: None })
        }
        Calib::Leverarm { m2, m3, m_pol, dv_p2_s1, dv_p3_s1, alpha_p33_ev_per_v } => {
            let slopes = SlopeSet { m2: *m2, m3: *m3, m_pol: *m_pol, dv_p2_s1: *dv_p2_s1, dv_p3_s1: *dv_p3_s1 };
            let arms = lever_arms(&slopes, *alpha_p33_ev_per_v)?;
            println!("alpha_P3,eps = {:.4} eV/V", arms.alpha_p3_eps);
            println!("alpha_P2,eps = {:.4} eV/V", arms.alpha_p2_eps);
            println!("alpha_P2,2   = {:.4} eV/V", arms.alpha_p22);
            println!("alpha_S1,eps = {:.4} eV/V", arms.alpha_s1_eps);
            (
                "leverarm",
                Calibrated {
                    quantity: "alpha_s1_eps",
                    value: arms.alpha_s1_eps,
                    unit: "eV/V",
                    details: Some(serde_json::to_value(arms)?),
                },
            )
        }
        Calib::Power { generator_dbm, attenuation_db } => {
            let budget =
                PowerBudget { generator_dbm: *generator_dbm, attenuations_db: attenuation_db.clone(), z0g: ctx.device.z0g };
            let p_in = power_budget(&budget)?;
            println!("P_in = {:.2} dBm = {:.2} pW (upper bound)", budget.input_dbm(), to_pw(p_in));
            ("power", Calibrated { quantity: "p_in", value: p_in, unit: "W", details: Some(serde_json::to_value(&budget)?) })
        }
        Calib::Drive { alpha_ev_per_v, p_in_pw, z0g_ohm } => {
            let eps = drive_amplitude(*alpha_ev_per_v, *z0g_ohm, pw(*p_in_pw))?;
            println!("eps_q/h = {:.2} MHz (upper bound)", to_mhz(eps));
            ("drive", Calibrated { quantity: "eps_q", value: eps, unit: "Hz", details: None })
        }
        Calib::Photons { eps_r_khz, kappa_khz } => {
            let n = photon_number(khz(*eps_r_khz), khz(*kappa_khz))?;
            println!("<n> = {n:.0} ({n:.3})");
            ("photons", Calibrated { quantity: "photon_number", value: n, unit: "", details: None })
        }
    };
    let path = ctx.out_dir.join(format!("calib_{name}.json"));
    write_artifact(&path, &format!("calib-{name}"), &result)?;
    Ok(Outcome::new(path, ctx.resolved(cmd)?))
}

fn oracle(ctx: &Ctx, cmd: &Oracle) -> Result<Outcome> {
    let Oracle::Compare { eps_q, eps0, tc, g0, eps_r, kappa, n_max, window_periods, trajectory, stride, out } = cmd;
    let p = LabFrameParams { eps0: *eps0, eps_q: *eps_q, tc: *tc, g0: *g0, eps_r: *eps_r, fr: 1.0, kappa: *kappa };
    let cfg = FockConfig::for_params(&p, *n_max, *window_periods)?;
    let (report, run) = oracle_iq_compare_with_run(&p, &cfg, *window_periods)?;
    let path = ctx.output(out, "oracle_report.json");
    write_artifact(&path, "oracle-report", &report)?;
    let mut o = Outcome::new(path, ctx.resolved(cmd)?);
    if let Some(tpath) = trajectory {
        write_trajectory(tpath, &run.trajectory, *stride)?;
        o.outputs.push(tpath.clone());
    }
    println!(
        "oracle |a| = {:.6}, closed form = {:.6}, relative error = {:+.3e}",
        report.oracle_magnitude, report.effective_magnitude, report.relative_error
    );
    println!(
        "regime: adiabatic {}, weak drive {}, weak coupling {}; drift {:.1e}; trace error {:.1e}",
        report.regime.adiabatic, report.regime.weak_drive, report.regime.weak_coupling, report.drift, report.max_trace_error
    );
    Ok(o)
}

/// Row of a coupling-table input file.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct RowInput {
    label: String,
    tc_ghz: f64,
    eps_q_mhz: f64,
    /// Falls back to the device value.
    #[serde(default)]
    g0_mhz: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RowsFile {
    format_version: u32,
    rows: Vec<RowInput>,
}

fn load_rows(path: &Path, default_g0: f64) -> Result<Vec<CouplingRow>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading rows {}", path.display()))?;
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    if raw.get("format_version").and_then(|v| v.as_u64()) != Some(1) {
        return Err(longcav_core::Error::FormatVersion {
            found: raw.get("format_version").map_or("missing".into(), |v| v.to_string()),
            expected: "1".into(),
        }
        .into());
    }
    let file: RowsFile = serde_json::from_value(raw)?;
    Ok(file
        .rows
        .into_iter()
        .map(|r| CouplingRow {
            label: r.label,
            tc: ghz(r.tc_ghz),
            g0: r.g0_mhz.map(mhz).unwrap_or(default_g0),
            eps_q: mhz(r.eps_q_mhz),
        })
        .collect())
}

fn table(ctx: &Ctx, cmd: &Table) -> Result<Outcome> {
    let Table::Couplings { rows, out } = cmd;
    let input: Vec<CouplingRow> = match rows {
        Some(path) => load_rows(path, ctx.device.g0)?,
        None => fixtures::coupling_references().into_iter().map(|r| r.row).collect(),
    };
    let computed: Vec<CouplingTableRow> = coupling_table(&input)?;
    let checks: Vec<Option<CouplingCheck>> = computed.iter().map(fixtures::check_coupling_row).collect();
    println!(
        "{:<10} {:>7} {:>7} {:>8} {:>9} {:>7}  check",
        "row", "tc/GHz", "g0/MHz", "dw/kHz", "gdy/kHz", "ratio"
    );
    for ((row, inp), check) in computed.iter().zip(&input).zip(&checks) {
        let verdict = match check {
            Some(c) if c.pass => "PASS",
            Some(_) => "FAIL",
            None => "-",
        };
        println!(
            "{:<10} {:>7.2} {:>7.3} {:>8.2} {:>9.2} {:>7.2}  {verdict}",
            row.label,
            to_ghz(row.tc),
            to_mhz(inp.g0),
            to_khz(row.delta_omega),
            to_khz(row.g_dy),
            row.ratio
        );
    }
    let checked = checks.iter().flatten().count();
    let passed = checks.iter().flatten().filter(|c| c.pass).count();
    println!("{passed}/{checked} rows within tolerance of the reference table");
    let path = ctx.output(out, "coupling_table.json");
    write_artifact(&path, "coupling-table", &serde_json::json!({ "rows": computed, "checks": checks }))?;
    let mut o = Outcome::new(path, ctx.resolved(cmd)?);
    if let Some(r) = rows {
        o.inputs.push(r.clone());
    }
    Ok(o)
}
