//! Physical constants and unit conversions used at the I/O boundary.

/// `1 eV / h` in Hz.
pub const HZ_PER_EV: f64 = 2.417_989_35e14;

/// `1 µeV / h` in Hz (241.798935 MHz).
pub const HZ_PER_UEV: f64 = HZ_PER_EV * 1e-6;

/// Boltzmann constant in eV/K.
pub const K_B_EV_PER_K: f64 = 8.617_333e-5;

/// von Klitzing constant `h/e²` in Ω.
pub const KLITZING_OHM: f64 = 25_812.807;

pub fn uev_to_hz(uev: f64) -> f64 {
    uev * HZ_PER_UEV
}

pub fn hz_to_uev(hz: f64) -> f64 {
    hz / HZ_PER_UEV
}

pub fn ev_to_hz(ev: f64) -> f64 {
    ev * HZ_PER_EV
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn ghz(x: f64) -> f64 {
    x * 1e9
}

pub fn mhz(x: f64) -> f64 {
    x * 1e6
}

pub fn khz(x: f64) -> f64 {
    x * 1e3
}

pub fn to_ghz(hz: f64) -> f64 {
    hz / 1e9
}

pub fn to_mhz(hz: f64) -> f64 {
    hz / 1e6
}

pub fn to_khz(hz: f64) -> f64 {
    hz / 1e3
}

pub fn pw(x: f64) -> f64 {
    x * 1e-12
}

pub fn to_pw(watts: f64) -> f64 {
    watts / 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uev_matches_quoted_conversion() {
        assert!((uev_to_hz(1.0) - 241.798_935e6).abs() < 1e-3);
        assert_eq!(hz_to_uev(uev_to_hz(37.5)), 37.5);
    }

    #[test]
    fn dbm_definition() {
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-18);
        assert!((dbm_to_watts(-77.0) - 19.95e-12).abs() < 0.01e-12);
        assert!((watts_to_dbm(1e-3)).abs() < 1e-12);
    }
}
