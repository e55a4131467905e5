use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use longcav_core::{fixtures, units};

#[derive(Debug, Parser, Serialize)]
#[command(name = "longcav", version, about = "Model, simulate and fit a longitudinally driven cavity-coupled charge qubit")]
pub struct Cli {
    /// Device description (JSON). Defaults to the built-in pair device.
    #[arg(long, global = true)]
    pub device: Option<PathBuf>,

    /// Directory for output files.
    #[arg(long, global = true, env = "LONGCAV_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,

    /// Worker threads for parallel sweeps and per-peak fits.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Generate synthetic data.
    #[command(subcommand)]
    Simulate(Simulate),
    /// Fit measured or synthetic data.
    #[command(subcommand)]
    Fit(Fit),
    /// Calibration helpers.
    #[command(subcommand)]
    Calib(Calib),
    /// Full master-equation checks of the closed form.
    #[command(subcommand)]
    Oracle(Oracle),
    /// Derived tables.
    #[command(subcommand)]
    Table(Table),
    /// Re-run the command recorded in a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Channel {
    #[value(name = "S1", alias = "s1")]
    S1,
    #[value(name = "P3", alias = "p3")]
    P3,
}

#[derive(Debug, Args, Serialize)]
pub struct DriveArgs {
    #[arg(long, value_enum, default_value = "P3")]
    pub channel: Channel,
    /// Raw drive amplitude (ε2 for S1, ε3 for P3) in MHz. Defaults to the pair values.
    #[arg(long)]
    pub eps_mhz: Option<f64>,
    #[arg(long, default_value_t = fixtures::PAIR_BETA2)]
    pub beta2: f64,
    #[arg(long, default_value_t = fixtures::PAIR_BETA3)]
    pub beta3: f64,
    #[arg(long, default_value_t = 6.14)]
    pub tc_ghz: f64,
    /// Detector gain c in V/Hz.
    #[arg(long, default_value_t = fixtures::PAIR_C)]
    pub gain_v_per_hz: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    #[arg(long, default_value_t = fixtures::LINECUT_GRID_UEV.0, allow_hyphen_values = true)]
    pub start_uev: f64,
    #[arg(long, default_value_t = fixtures::LINECUT_GRID_UEV.1, allow_hyphen_values = true)]
    pub stop_uev: f64,
    #[arg(long, default_value_t = fixtures::LINECUT_GRID_UEV.2)]
    pub points: usize,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Simulate {
    /// Line cut across the interdot transition, with noise and dc offset.
    Linecut {
        #[command(flatten)]
        drive: DriveArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Noise at one photon in V; scaled by 1/sqrt(<n>).
        #[arg(long, default_value_t = fixtures::PAIR_SIGMA0)]
        sigma0_v: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        dc_offset_v: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Noiseless IQ map over the two plunger voltages around one polarization line.
    Diagram {
        #[command(flatten)]
        drive: DriveArgs,
        #[arg(long, default_value_t = -2e-3, allow_hyphen_values = true)]
        vp2_min_v: f64,
        #[arg(long, default_value_t = 2e-3, allow_hyphen_values = true)]
        vp2_max_v: f64,
        #[arg(long, default_value_t = 81)]
        vp2_points: usize,
        #[arg(long, default_value_t = -2e-3, allow_hyphen_values = true)]
        vp3_min_v: f64,
        #[arg(long, default_value_t = 2e-3, allow_hyphen_values = true)]
        vp3_max_v: f64,
        #[arg(long, default_value_t = 81)]
        vp3_points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cavity transmission magnitude versus drive frequency.
    Spectrum {
        #[command(flatten)]
        drive: DriveArgs,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        eps0_uev: f64,
        #[arg(long, default_value_t = 1000.0)]
        span_khz: f64,
        #[arg(long, default_value_t = 2001)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Thermal-broadening scans over several mixing-chamber temperatures.
    Thermal {
        #[arg(long, default_value_t = fixtures::ALPHA_P33)]
        alpha_ev_per_v: f64,
        #[arg(long, default_value_t = fixtures::TE0)]
        te0_k: f64,
        /// Mixing-chamber temperatures in K, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = fixtures::THERMAL_T_MC)]
        t_mc_k: Vec<f64>,
        #[arg(long, default_value_t = 101)]
        points: usize,
        /// Dip depth in V.
        #[arg(long, default_value_t = 1e-3)]
        amp_v: f64,
        /// Far-off-resonance level in V.
        #[arg(long, default_value_t = 5e-3)]
        offset_v: f64,
        /// Noise as a fraction of the dip amplitude.
        #[arg(long, default_value_t = 0.02)]
        relative_noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct CavityArgs {
    /// Overrides the device g0, MHz.
    #[arg(long)]
    pub g0_mhz: Option<f64>,
    /// Overrides the device κ/2π, kHz.
    #[arg(long)]
    pub kappa_khz: Option<f64>,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Fit {
    /// Simultaneous fit of an S1 and a P3 line cut with shared β2 and tc.
    Linecut {
        #[arg(long)]
        s1: PathBuf,
        #[arg(long)]
        p3: PathBuf,
        #[command(flatten)]
        cavity: CavityArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lever arm and base electron temperature from a thermal-broadening series.
    Thermal {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Independent (c·ε3, tc) fits of P3 peaks with β2 and β3 frozen.
    Peaks {
        #[arg(long = "peak", required = true)]
        peaks: Vec<PathBuf>,
        #[arg(long, default_value_t = fixtures::SERIES_BETA3)]
        beta3: f64,
        #[arg(long, default_value_t = fixtures::DEFAULT_FROZEN_BETA2)]
        beta2: f64,
        #[command(flatten)]
        cavity: CavityArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Calib {
    /// Bare coupling g0 from the S1 lever arm and resonator parameters.
    G0 {
        #[arg(long, default_value_t = 0.04)]
        alpha_s1_ev_per_v: f64,
        #[arg(long, default_value_t = units::to_ghz(fixtures::FR))]
        fr_ghz: f64,
        #[arg(long, default_value_t = fixtures::Z0R)]
        z0r_ohm: f64,
    },
    /// Decay rate from loaded quality factors.
    Kappa {
        #[arg(long, default_value_t = units::to_ghz(fixtures::FR))]
        fr_ghz: f64,
        #[arg(long, value_delimiter = ',', default_values_t = fixtures::Q_LOADED)]
        q_loaded: Vec<f64>,
    },
    /// Detuning lever arms from transition-line slopes.
    Leverarm {
        #[arg(long, allow_hyphen_values = true)]
        m2: f64,
        #[arg(long, allow_hyphen_values = true)]
        m3: f64,
        #[arg(long, allow_hyphen_values = true)]
        m_pol: f64,
        #[arg(long, allow_hyphen_values = true)]
        dv_p2_s1: f64,
        #[arg(long, allow_hyphen_values = true)]
        dv_p3_s1: f64,
        #[arg(long, default_value_t = fixtures::ALPHA_P33)]
        alpha_p33_ev_per_v: f64,
    },
    /// Gate input power from the generator setting and the attenuation chain.
    Power {
        #[arg(long, default_value_t = 6.0, allow_hyphen_values = true)]
        generator_dbm: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [33.0, 40.0, 10.0])]
        attenuation_db: Vec<f64>,
    },
    /// Detuning drive amplitude from lever arm, line impedance and input power.
    Drive {
        #[arg(long, default_value_t = 0.09)]
        alpha_ev_per_v: f64,
        #[arg(long, default_value_t = 20.0)]
        p_in_pw: f64,
        #[arg(long, default_value_t = fixtures::Z0G)]
        z0g_ohm: f64,
    },
    /// Mean intracavity photon number.
    Photons {
        #[arg(long)]
        eps_r_khz: f64,
        #[arg(long)]
        kappa_khz: f64,
    },
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Oracle {
    /// Lab-frame Lindblad run versus the closed-form steady state (desk units, fr = 1).
    Compare {
        #[arg(long, default_value_t = fixtures::desk_preset().eps_q, allow_hyphen_values = true)]
        eps_q: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        eps0: f64,
        #[arg(long, default_value_t = fixtures::desk_preset().tc)]
        tc: f64,
        #[arg(long, default_value_t = fixtures::desk_preset().g0)]
        g0: f64,
        #[arg(long, default_value_t = fixtures::desk_preset().eps_r)]
        eps_r: f64,
        #[arg(long, default_value_t = fixtures::desk_preset().kappa)]
        kappa: f64,
        #[arg(long, default_value_t = fixtures::desk_preset().n_max)]
        n_max: usize,
        #[arg(long, default_value_t = 20)]
        window_periods: usize,
        /// Also write the trajectory CSV, keeping every `stride`-th step.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        stride: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Table {
    /// Couplings at the symmetric point for each row, checked against the reference table.
    Couplings {
        /// Row file; defaults to the eight reference rows.
        #[arg(long)]
        rows: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}
