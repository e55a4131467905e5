//! Effective model, brute-force oracle, calibration chain and fitting tools for
//! a microwave cavity longitudinally coupled to an ac-driven double-quantum-dot
//! charge qubit operated far below the qubit frequency.
//!
//! # Units
//!
//! Every energy is stored as an ordinary frequency `E/h` in Hz and every
//! angular rate (`g0`, `δω`, `g∥dy`, `κ`) as `ω/2π` in Hz. With this
//! convention the coupling and steady-state formulas hold with all `ħ` and
//! `2π` factors gone. Conversions to µeV, eV/V lever arms, dBm, kelvin and
//! volts live in [`units`] and are applied only at the I/O boundary.
//!
//! # Layout
//!
//! - [`model`]: closed-form couplings, drive resolution, steady state and IQ signal.
//! - [`oracle`]: coherent-state ODE and lab-frame Lindblad evolution with
//!   homodyne demodulation, used to validate [`model`].
//! - [`calibration`]: lever arms, `g0`, `κ`, power budget, drive amplitude,
//!   photon number and coupling tables.
//! - [`fit`]: damped least squares with shared/frozen parameters and the
//!   line-cut, Lorentzian and trend fits built on it.
//! - [`data`]: synthetic data generation, noise, dc offsets and file formats.
//! - [`fixtures`]: published device and fit values used as reference inputs.

pub mod calibration;
pub mod data;
pub mod device;
pub mod error;
pub mod fit;
pub mod fixtures;
pub mod model;
pub mod oracle;
pub mod units;

pub use error::{Error, Result};

/// Sizes the global worker pool used by diagram generation and per-peak fits.
/// Must be called before any parallel work starts; later calls fail.
pub fn configure_threads(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidConfiguration("thread count must be >= 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidConfiguration(format!("cannot size worker pool: {e}")))
}
