//! Brute-force checks of the effective cavity response.
//!
//! Two levels of rigour: the rotating-frame coherent-amplitude ODE, and a full
//! laboratory-frame master equation for a charge qubit coupled to a truncated
//! oscillator, followed by homodyne demodulation of the field quadrature.
//!
//! Hilbert-space ordering is `qubit ⊗ Fock`: index `q·(n_max+1) + n`, with
//! `q = 0` the `σz = +1` charge state.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{finite, non_negative, positive, Error, Result};
use crate::model::{coupling_set, steady_state_alpha, CouplingSet, QubitBranch, QubitTuning};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Population allowed in the two highest Fock levels.
pub const TRUNCATION_LEAK_LIMIT: f64 = 1e-4;
/// Maximum relative change of the demodulated magnitude between the last two windows.
pub const STEADY_STATE_DRIFT_LIMIT: f64 = 5e-3;

// --- rotating-frame amplitude ODE -------------------------------------------

/// Integrates `dα/dt = −2πi[(sδω − iκ/2)α + (εr + s·g∥dy/2)]` with RK4 and
/// returns `(t, α)` at every step, starting with `(0, alpha0)`.
pub fn coherent_ode_evolve(
    alpha0: C64,
    couplings: &CouplingSet,
    eps_r: f64,
    kappa: f64,
    branch: QubitBranch,
    t_final: f64,
    dt: f64,
) -> Result<Vec<(f64, C64)>> {
    positive("kappa", kappa)?;
    positive("dt", dt)?;
    non_negative("t_final", t_final)?;
    finite("eps_r", eps_r)?;
    if !(alpha0.re.is_finite() && alpha0.im.is_finite()) {
        return Err(Error::param("alpha0", "must be finite"));
    }
    let s = branch.sign();
    let lambda = C64::new(0.0, -TWO_PI) * C64::new(s * couplings.delta_omega, -kappa / 2.0);
    let source = C64::new(0.0, -TWO_PI) * (eps_r + s * couplings.g_dy / 2.0);
    let f = |a: C64| lambda * a + source;
    let alpha_st = steady_state_alpha(couplings, eps_r, kappa, branch, 0.0)?;
    let bound = 1e6 * (alpha0.norm() + alpha_st.norm() + 1.0);

    let steps = (t_final / dt).round() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let mut a = alpha0;
    out.push((0.0, a));
    for k in 1..=steps {
        let k1 = f(a);
        let k2 = f(a + k1 * (dt / 2.0));
        let k3 = f(a + k2 * (dt / 2.0));
        let k4 = f(a + k3 * dt);
        a += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if !(a.norm() <= bound) {
            return Err(Error::Integrator(format!(
                "amplitude blew up at step {k} (|alpha| = {:.3e}); reduce dt below {:.3e}",
                a.norm(),
                1.0 / (TWO_PI * lambda.norm() / TWO_PI)
            )));
        }
        out.push((k as f64 * dt, a));
    }
    Ok(out)
}

// --- laboratory-frame master equation ---------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockConfig {
    pub n_max: usize,
    /// RK4 step in the same time unit as `1/fr`.
    pub dt: f64,
    pub t_final: f64,
}

impl FockConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_max < 2 {
            return Err(Error::InvalidConfiguration(format!("n_max must be >= 2, got {}", self.n_max)));
        }
        positive("dt", self.dt)?;
        positive("t_final", self.t_final)?;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        2 * (self.n_max + 1)
    }

    /// Step of `1/(fr·m)` with `m ≥ 50·fq/fr` samples per drive period, and a
    /// run of `10/κ` followed by `window_periods` drive periods.
    pub fn for_params(p: &LabFrameParams, n_max: usize, window_periods: usize) -> Result<Self> {
        p.validate()?;
        let per_period = (50.0 * p.qubit_frequency() / p.fr).ceil().max(50.0) as usize;
        let period = 1.0 / p.fr;
        let transient = (10.0 / p.kappa / period).ceil() * period;
        Ok(Self {
            n_max,
            dt: period / per_period as f64,
            t_final: transient + window_periods as f64 * period,
        })
    }

    /// Smallest truncation compatible with an expected photon number.
    pub fn min_n_max(expected_photons: f64) -> usize {
        (4.0 * expected_photons + 6.0).ceil() as usize
    }
}

/// Laboratory-frame parameters; drives are resonant with the cavity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabFrameParams {
    pub eps0: f64,
    pub eps_q: f64,
    pub tc: f64,
    pub g0: f64,
    pub eps_r: f64,
    pub fr: f64,
    pub kappa: f64,
}

impl LabFrameParams {
    pub fn validate(&self) -> Result<()> {
        finite("eps0", self.eps0)?;
        finite("eps_q", self.eps_q)?;
        positive("tc", self.tc)?;
        finite("g0", self.g0)?;
        finite("eps_r", self.eps_r)?;
        positive("fr", self.fr)?;
        non_negative("kappa", self.kappa)?;
        Ok(())
    }

    pub fn qubit_frequency(&self) -> f64 {
        self.eps0.hypot(2.0 * self.tc)
    }

    fn dim_checked(&self, cfg: &FockConfig) -> Result<usize> {
        self.validate()?;
        cfg.validate()?;
        Ok(cfg.dim())
    }
}

/// Dense `H(t)`.
pub fn build_lab_hamiltonian(t: f64, p: &LabFrameParams, cfg: &FockConfig) -> Result<DMatrix<C64>> {
    let d = p.dim_checked(cfg)?;
    let nf = cfg.n_max + 1;
    let c = (TWO_PI * p.fr * t).cos();
    let mut h = DMatrix::<C64>::zeros(d, d);
    for q in 0..2 {
        let sz = if q == 0 { 1.0 } else { -1.0 };
        let coupling = 2.0 * p.eps_r * c + p.g0 * sz;
        for n in 0..nf {
            let i = q * nf + n;
            h[(i, i)] = C64::from(sz * (p.eps0 + p.eps_q * c) / 2.0 + p.fr * n as f64);
            let partner = (1 - q) * nf + n;
            h[(i, partner)] = C64::from(p.tc);
            if n + 1 < nf {
                let v = C64::from(coupling * ((n + 1) as f64).sqrt());
                h[(i, i + 1)] = v;
                h[(i + 1, i)] = v;
            }
        }
    }
    Ok(h)
}

/// Instantaneous ground state of the qubit at `t = 0` (drive at its crest) with the cavity in vacuum.
pub fn initial_state(p: &LabFrameParams, cfg: &FockConfig) -> Result<DMatrix<C64>> {
    let d = p.dim_checked(cfg)?;
    let nf = cfg.n_max + 1;
    // Ground state of (b/2)σz + tc·σx: (−sin θ/2, cos θ/2)-type vector.
    let b = p.eps0 + p.eps_q;
    let theta = (2.0 * p.tc).atan2(b);
    let (up, down) = (-(theta / 2.0).sin(), (theta / 2.0).cos());
    let mut psi = vec![0.0; d];
    psi[0] = up;
    psi[nf] = down;
    Ok(DMatrix::from_fn(d, d, |i, j| C64::from(psi[i] * psi[j])))
}

/// Sparse right-hand side of the master equation on row-major flat storage.
struct Lindbladian {
    nf: usize,
    d: usize,
    p: LabFrameParams,
    sqrt_n: Vec<f64>,
}

impl Lindbladian {
    fn new(p: &LabFrameParams, cfg: &FockConfig) -> Self {
        let nf = cfg.n_max + 1;
        Self { nf, d: 2 * nf, p: *p, sqrt_n: (0..=nf).map(|n| (n as f64).sqrt()).collect() }
    }

    /// Writes `dρ/dt` into `out`, using `m` as scratch for `Hρ`.
    fn rhs(&self, t: f64, rho: &[C64], m: &mut [C64], out: &mut [C64]) {
        let (d, nf, p) = (self.d, self.nf, &self.p);
        let c = (TWO_PI * p.fr * t).cos();
        for q in 0..2 {
            let sz = if q == 0 { 1.0 } else { -1.0 };
            let coupling = 2.0 * p.eps_r * c + p.g0 * sz;
            let qubit = sz * (p.eps0 + p.eps_q * c) / 2.0;
            for n in 0..nf {
                let i = q * nf + n;
                let partner = (1 - q) * nf + n;
                let diag = qubit + p.fr * n as f64;
                let up = if n + 1 < nf { coupling * self.sqrt_n[n + 1] } else { 0.0 };
                let down = if n > 0 { coupling * self.sqrt_n[n] } else { 0.0 };
                let row = &mut m[i * d..(i + 1) * d];
                let r_i = &rho[i * d..(i + 1) * d];
                let r_p = &rho[partner * d..(partner + 1) * d];
                for j in 0..d {
                    row[j] = r_i[j] * diag + r_p[j] * p.tc;
                }
                if n + 1 < nf {
                    let r_u = &rho[(i + 1) * d..(i + 2) * d];
                    for j in 0..d {
                        row[j] += r_u[j] * up;
                    }
                }
                if n > 0 {
                    let r_d = &rho[(i - 1) * d..i * d];
                    for j in 0..d {
                        row[j] += r_d[j] * down;
                    }
                }
            }
        }
        let w = TWO_PI;
        let k = TWO_PI * p.kappa;
        for i in 0..d {
            let ni = i % nf;
            for j in i..d {
                let nj = j % nf;
                // −i·2π(Hρ − ρH) with ρH = (Hρ)†.
                let comm = m[i * d + j] - m[j * d + i].conj();
                let mut v = C64::new(comm.im * w, -comm.re * w);
                let mut diss = rho[i * d + j] * (-0.5 * (ni + nj) as f64);
                if ni + 1 < nf && nj + 1 < nf {
                    diss += rho[(i + 1) * d + j + 1] * (self.sqrt_n[ni + 1] * self.sqrt_n[nj + 1]);
                }
                v += diss * k;
                out[i * d + j] = v;
                out[j * d + i] = v.conj();
            }
        }
    }

    fn expect_a(&self, rho: &[C64]) -> C64 {
        let (d, nf) = (self.d, self.nf);
        let mut a = C64::new(0.0, 0.0);
        for q in 0..2 {
            for n in 0..nf - 1 {
                let i = q * nf + n;
                a += rho[(i + 1) * d + i] * self.sqrt_n[n + 1];
            }
        }
        a
    }

    fn expect_n(&self, rho: &[C64]) -> f64 {
        (0..self.d).map(|i| rho[i * self.d + i].re * (i % self.nf) as f64).sum()
    }

    fn trace(&self, rho: &[C64]) -> f64 {
        (0..self.d).map(|i| rho[i * self.d + i].re).sum()
    }

    fn top_population(&self, rho: &[C64]) -> f64 {
        let (d, nf) = (self.d, self.nf);
        [nf - 2, nf - 1, 2 * nf - 2, 2 * nf - 1].iter().map(|&i| rho[i * d + i].re).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub a: C64,
    pub n: f64,
    pub trace_err: f64,
}

#[derive(Clone, Debug)]
pub struct LindbladRun {
    /// One point per integrator step, starting at `t = 0`.
    pub trajectory: Vec<TrajectoryPoint>,
    pub final_rho: DMatrix<C64>,
    pub max_trace_error: f64,
    /// Smallest eigenvalue seen at the positivity checkpoints.
    pub min_eigenvalue: f64,
    pub max_top_population: f64,
}

/// Number of checkpoints at which the spectrum of `ρ` is inspected.
const POSITIVITY_CHECKS: usize = 16;

fn min_eigenvalue(rho: &[C64], d: usize) -> f64 {
    let m = DMatrix::from_row_slice(d, d, rho);
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn lindblad_evolve(rho0: &DMatrix<C64>, p: &LabFrameParams, cfg: &FockConfig) -> Result<LindbladRun> {
    let d = p.dim_checked(cfg)?;
    if rho0.nrows() != d || rho0.ncols() != d {
        return Err(Error::InvalidConfiguration(format!("rho0 must be {d}x{d}")));
    }
    let tr0: C64 = rho0.trace();
    if (tr0.re - 1.0).abs() > 1e-10 || tr0.im.abs() > 1e-10 {
        return Err(Error::param("rho0", format!("trace must be 1, got {tr0}")));
    }
    if (rho0 - rho0.adjoint()).norm() > 1e-12 {
        return Err(Error::param("rho0", "must be Hermitian"));
    }
    let mut rho: Vec<C64> = (0..d * d).map(|k| rho0[(k / d, k % d)]).collect();
    let mut min_eig = min_eigenvalue(&rho, d);
    if min_eig < -1e-10 {
        return Err(Error::param("rho0", format!("must be positive semidefinite (min eigenvalue {min_eig:.3e})")));
    }

    let lv = Lindbladian::new(p, cfg);
    let steps = (cfg.t_final / cfg.dt).round() as usize;
    let dt = cfg.dt;
    let check_every = (steps / POSITIVITY_CHECKS).max(1);
    let mut m = vec![C64::new(0.0, 0.0); d * d];
    let mut k1 = m.clone();
    let mut k2 = m.clone();
    let mut k3 = m.clone();
    let mut k4 = m.clone();
    let mut tmp = m.clone();

    let mut trajectory = Vec::with_capacity(steps + 1);
    let mut max_trace_error = 0.0f64;
    let mut max_top = lv.top_population(&rho);
    let point = |t: f64, rho: &[C64]| TrajectoryPoint {
        t,
        a: lv.expect_a(rho),
        n: lv.expect_n(rho),
        trace_err: lv.trace(rho) - 1.0,
    };
    trajectory.push(point(0.0, &rho));

    for step in 1..=steps {
        let t = (step - 1) as f64 * dt;
        lv.rhs(t, &rho, &mut m, &mut k1);
        for (x, (r, k)) in tmp.iter_mut().zip(rho.iter().zip(&k1)) {
            *x = r + k * (dt / 2.0);
        }
        lv.rhs(t + dt / 2.0, &tmp, &mut m, &mut k2);
        for (x, (r, k)) in tmp.iter_mut().zip(rho.iter().zip(&k2)) {
            *x = r + k * (dt / 2.0);
        }
        lv.rhs(t + dt / 2.0, &tmp, &mut m, &mut k3);
        for (x, (r, k)) in tmp.iter_mut().zip(rho.iter().zip(&k3)) {
            *x = r + k * dt;
        }
        lv.rhs(t + dt, &tmp, &mut m, &mut k4);
        for idx in 0..d * d {
            rho[idx] += (k1[idx] + (k2[idx] + k3[idx]) * 2.0 + k4[idx]) * (dt / 6.0);
        }

        let pt = point(step as f64 * dt, &rho);
        if !pt.trace_err.is_finite() {
            return Err(Error::Integrator(format!("density matrix diverged at step {step}")));
        }
        max_trace_error = max_trace_error.max(pt.trace_err.abs());
        let top = lv.top_population(&rho);
        max_top = max_top.max(top);
        if top > TRUNCATION_LEAK_LIMIT {
            return Err(Error::TruncationLeak { population: top, limit: TRUNCATION_LEAK_LIMIT });
        }
        if step % check_every == 0 || step == steps {
            min_eig = min_eig.min(min_eigenvalue(&rho, d));
        }
        trajectory.push(pt);
    }
    Ok(LindbladRun {
        trajectory,
        final_rho: DMatrix::from_row_slice(d, d, &rho),
        max_trace_error,
        min_eigenvalue: min_eig,
        max_top_population: max_top,
    })
}

// --- demodulation ------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Demodulation {
    pub i: f64,
    pub q: f64,
    pub magnitude: f64,
    pub phase: f64,
    /// Drive periods actually covered by the samples used.
    pub periods: f64,
    /// Set when the window is not an integer number of periods on the sample grid.
    pub misaligned: bool,
}

/// Homodyne demodulation of a real signal sampled on a uniform grid, over the
/// last `window_periods` drive periods: `I = ⟨x cos⟩`, `Q = −⟨x sin⟩`.
pub fn demodulate(times: &[f64], signal: &[f64], fr: f64, window_periods: f64) -> Result<Demodulation> {
    positive("fr", fr)?;
    positive("window_periods", window_periods)?;
    if times.len() != signal.len() {
        return Err(Error::InvalidConfiguration("times and signal lengths differ".into()));
    }
    if times.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 samples".into()));
    }
    let dt = times[1] - times[0];
    positive("sample spacing", dt)?;
    let want = window_periods / (fr * dt);
    let count = want.round() as usize;
    if count < 1 || count >= times.len() {
        return Err(Error::InsufficientData(format!(
            "window of {window_periods} periods needs {count} samples, have {}",
            times.len()
        )));
    }
    let misaligned = (want - count as f64).abs() > 1e-6 || (window_periods - window_periods.round()).abs() > 1e-9;
    // Uniform samples over [t_end − W, t_end), dropping the final sample so the window is half-open.
    let end = times.len() - 1;
    let (mut i_sum, mut q_sum) = (0.0, 0.0);
    for k in end - count..end {
        let ph = TWO_PI * fr * times[k];
        i_sum += signal[k] * ph.cos();
        q_sum -= signal[k] * ph.sin();
    }
    let i = i_sum / count as f64;
    let q = q_sum / count as f64;
    Ok(Demodulation {
        i,
        q,
        magnitude: i.hypot(q),
        phase: q.atan2(i),
        periods: count as f64 * dt * fr,
        misaligned,
    })
}

/// `Re⟨a + a†⟩` for each trajectory point.
pub fn field_quadrature(trajectory: &[TrajectoryPoint]) -> Vec<f64> {
    trajectory.iter().map(|p| 2.0 * p.a.re).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeFlags {
    /// `fq/fr ≥ 5`.
    pub adiabatic: bool,
    /// `|εq|/tc ≤ 0.1`.
    pub weak_drive: bool,
    /// `g0 ≤ 0.01·tc`.
    pub weak_coupling: bool,
}

impl RegimeFlags {
    pub fn of(p: &LabFrameParams) -> Self {
        Self {
            adiabatic: p.qubit_frequency() / p.fr >= 5.0,
            weak_drive: p.eps_q.abs() / p.tc <= 0.1 + 1e-12,
            weak_coupling: p.g0.abs() <= 0.01 * p.tc,
        }
    }

    pub fn all(&self) -> bool {
        self.adiabatic && self.weak_drive && self.weak_coupling
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub params: LabFrameParams,
    pub config: FockConfig,
    pub oracle_magnitude: f64,
    pub effective_magnitude: f64,
    pub relative_error: f64,
    pub regime: RegimeFlags,
    /// Relative change of the magnitude between the last two windows.
    pub drift: f64,
    pub demodulation: Demodulation,
    pub max_trace_error: f64,
    pub min_eigenvalue: f64,
    pub max_top_population: f64,
}

/// Closed-form ground-branch `|α_st|` for the same parameters.
pub fn effective_magnitude(p: &LabFrameParams) -> Result<f64> {
    let couplings = coupling_set(&QubitTuning::new(p.eps0, p.tc)?, p.g0, p.eps_q)?;
    Ok(steady_state_alpha(&couplings, p.eps_r, p.kappa, QubitBranch::Ground, 0.0)?.norm())
}

/// Runs the master equation from vacuum ⊗ qubit ground state, demodulates the
/// last `window_periods` drive periods and compares with the closed form.
pub fn oracle_iq_compare(p: &LabFrameParams, cfg: &FockConfig, window_periods: usize) -> Result<OracleReport> {
    oracle_iq_compare_with_run(p, cfg, window_periods).map(|(report, _)| report)
}

/// As [`oracle_iq_compare`], also returning the full evolution.
pub fn oracle_iq_compare_with_run(
    p: &LabFrameParams,
    cfg: &FockConfig,
    window_periods: usize,
) -> Result<(OracleReport, LindbladRun)> {
    p.validate()?;
    cfg.validate()?;
    positive("kappa", p.kappa)?;
    let effective = effective_magnitude(p)?;
    let need = FockConfig::min_n_max(effective * effective);
    if cfg.n_max < need {
        return Err(Error::InvalidConfiguration(format!(
            "n_max = {} too small for <n> = {:.2}; need >= {need}",
            cfg.n_max,
            effective * effective
        )));
    }
    let window = window_periods as f64 / p.fr;
    if cfg.t_final < 10.0 / p.kappa + window - 1e-9 {
        return Err(Error::InvalidConfiguration(format!(
            "t_final must cover 10/kappa plus the demodulation window ({} periods)",
            window_periods
        )));
    }
    let run = lindblad_evolve(&initial_state(p, cfg)?, p, cfg)?;
    let times: Vec<f64> = run.trajectory.iter().map(|x| x.t).collect();
    let x = field_quadrature(&run.trajectory);
    let demod = demodulate(&times, &x, p.fr, window_periods as f64)?;
    let per_window = (window / cfg.dt).round() as usize;
    let cut = times.len().saturating_sub(per_window);
    let previous = demodulate(&times[..cut], &x[..cut], p.fr, window_periods as f64)?;
    let drift = (demod.magnitude - previous.magnitude).abs() / demod.magnitude;
    if drift > STEADY_STATE_DRIFT_LIMIT {
        return Err(Error::NonConvergence(format!(
            "demodulated magnitude still drifting by {:.3}% between windows",
            100.0 * drift
        )));
    }
    let report = OracleReport {
        params: *p,
        config: *cfg,
        oracle_magnitude: demod.magnitude,
        effective_magnitude: effective,
        relative_error: (demod.magnitude - effective) / effective,
        regime: RegimeFlags::of(p),
        drift,
        demodulation: demod,
        max_trace_error: run.max_trace_error,
        min_eigenvalue: run.min_eigenvalue,
        max_top_population: run.max_top_population,
    };
    Ok((report, run))
}

/// Trajectory CSV with columns `t,re_a,im_a,n_expect,trace_err`, keeping every `stride`-th point.
pub fn write_trajectory(path: impl AsRef<Path>, trajectory: &[TrajectoryPoint], stride: usize) -> Result<()> {
    let pts: Vec<&TrajectoryPoint> = trajectory.iter().step_by(stride.max(1)).collect();
    let col = |f: fn(&TrajectoryPoint) -> f64| pts.iter().map(|p| f(p)).collect::<Vec<f64>>();
    let (t, re, im, n, tr) = (col(|p| p.t), col(|p| p.a.re), col(|p| p.a.im), col(|p| p.n), col(|p| p.trace_err));
    crate::data::write_columns(path, &["t", "re_a", "im_a", "n_expect", "trace_err"], &[&t, &re, &im, &n, &tr])
}

/// Laboratory-frame version of the desk-scale preset.
pub fn desk_params(eps_q: f64) -> LabFrameParams {
    let d = crate::fixtures::desk_preset();
    LabFrameParams { eps0: 0.0, eps_q, tc: d.tc, g0: d.g0, eps_r: d.eps_r, fr: d.fr, kappa: d.kappa }
}
