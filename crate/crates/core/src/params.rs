//! System parameters of the grid-converter case study and their per-unit bases.
//!
//! Voltages and currents are handled as dq phasors in the amplitude-invariant
//! frame, so the voltage base is the phase peak `V_th * sqrt(2/3)` and the
//! current base is the matching peak `I_base = V_base / Z_base`. The RMS line
//! current base `S_base / (sqrt 3 V_th)` is that value divided by `sqrt 2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Grid line-to-line RMS voltage (V).
    pub v_th: f64,
    pub s_base: f64,
    pub f_n: f64,
    pub v_dc: f64,
    /// Grid Thevenin impedance at `f_n`, per unit.
    pub z_th: Complex64,
    /// Converter filter impedance at `f_n`, per unit.
    pub z_s: Complex64,
    /// Current controller proportional gain, per unit.
    pub kp: f64,
    pub ti: f64,
    /// PLL proportional gain acting on the per-unit q-axis voltage.
    pub k_pll: f64,
    pub t_pll: f64,
    /// PWM delay time constant (s).
    pub t_d: f64,
    pub id_ref: f64,
    pub iq_ref: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::case_study()
    }
}

impl SystemParams {
    /// Case-study values: 690 V / 1 MVA / 50 Hz, stiff inductive grid.
    ///
    /// The set-points (converter exporting 1 pu active current with 0.3 pu
    /// reactive) and the 100 us delay are assumed values.
    pub fn case_study() -> Self {
        SystemParams {
            v_th: 690.0,
            s_base: 1e6,
            f_n: 50.0,
            v_dc: 1400.0,
            z_th: Complex64::new(0.02, 0.4),
            z_s: Complex64::new(0.002, 0.1),
            kp: 0.255,
            ti: 0.0025,
            k_pll: 60.0,
            t_pll: 0.033,
            t_d: 1e-4,
            id_ref: -1.0,
            iq_ref: 0.3,
        }
    }

    /// Same `|Z_th|`, new reactance-to-resistance ratio.
    pub fn with_xr(mut self, xr: f64) -> Self {
        let mag = self.z_th.norm();
        let r = mag / (1.0 + xr * xr).sqrt();
        self.z_th = Complex64::new(r, xr * r);
        self
    }

    pub fn xr(&self) -> f64 {
        self.z_th.im / self.z_th.re
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("v_th_volt", self.v_th),
            ("s_base_va", self.s_base),
            ("f_n_hz", self.f_n),
            ("v_dc_volt", self.v_dc),
            ("ti_s", self.ti),
            ("t_pll_s", self.t_pll),
            ("t_d_s", self.t_d),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        let finite = [
            ("z_th_pu_re", self.z_th.re),
            ("z_th_pu_im", self.z_th.im),
            ("z_s_pu_re", self.z_s.re),
            ("z_s_pu_im", self.z_s.im),
            ("kp_pu", self.kp),
            ("k_pll", self.k_pll),
            ("id_ref_pu", self.id_ref),
            ("iq_ref_pu", self.iq_ref),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        if self.z_th.re < 0.0 || self.z_th.im < 0.0 || self.z_s.re < 0.0 || self.z_s.im <= 0.0 {
            return Err(Error::InvalidParameter(
                "impedances need R >= 0, X >= 0 and a nonzero filter inductance".into(),
            ));
        }
        Ok(())
    }

    pub fn w1(&self) -> f64 {
        2.0 * PI * self.f_n
    }

    pub fn z_base(&self) -> f64 {
        self.v_th * self.v_th / self.s_base
    }

    /// Phase peak voltage base.
    pub fn v_base(&self) -> f64 {
        self.v_th * (2.0f64 / 3.0).sqrt()
    }

    /// Phase peak current base.
    pub fn i_base(&self) -> f64 {
        self.v_base() / self.z_base()
    }

    pub fn i_base_rms(&self) -> f64 {
        self.s_base / (3.0f64.sqrt() * self.v_th)
    }

    pub fn r_th(&self) -> f64 {
        self.z_th.re * self.z_base()
    }

    pub fn l_th(&self) -> f64 {
        self.z_th.im * self.z_base() / self.w1()
    }

    pub fn r_s(&self) -> f64 {
        self.z_s.re * self.z_base()
    }

    pub fn l_s(&self) -> f64 {
        self.z_s.im * self.z_base() / self.w1()
    }

    /// Proportional current-controller gain in ohms.
    pub fn kp_ohm(&self) -> f64 {
        self.kp * self.z_base()
    }

    /// Current set-point as an SI dq phasor (current into the converter).
    pub fn i_ref(&self) -> Complex64 {
        Complex64::new(self.id_ref, self.iq_ref) * self.i_base()
    }
}

/// Conversion between SI and per-unit quantities for one parameter set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Ohm,
    PerUnit,
}

impl SystemParams {
    pub fn ohm_to_pu(&self, z: Complex64) -> Complex64 {
        z / self.z_base()
    }

    pub fn pu_to_ohm(&self, z: Complex64) -> Complex64 {
        z * self.z_base()
    }

    pub fn impedance_scale(&self, units: Units) -> f64 {
        match units {
            Units::Ohm => 1.0,
            Units::PerUnit => 1.0 / self.z_base(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bases() {
        let p = SystemParams::case_study();
        assert_relative_eq!(p.z_base(), 0.4761, max_relative = 1e-12);
        assert_relative_eq!(p.i_base_rms(), 836.7395, max_relative = 1e-6);
        assert_relative_eq!(p.i_base(), p.i_base_rms() * 2f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(p.v_base() * p.i_base() * 1.5, p.s_base, max_relative = 1e-12);
        assert_relative_eq!(p.w1() * p.l_th(), 0.4 * 0.4761, max_relative = 1e-12);
    }

    #[test]
    fn xr_variant_keeps_magnitude() {
        let p = SystemParams::case_study();
        let q = p.with_xr(0.1);
        assert_relative_eq!(q.z_th.norm(), p.z_th.norm(), max_relative = 1e-14);
        assert_relative_eq!(q.xr(), 0.1, max_relative = 1e-12);
        assert_relative_eq!(p.xr(), 20.0, max_relative = 1e-12);
    }

    #[test]
    fn pu_round_trip() {
        let p = SystemParams::case_study();
        let z = Complex64::new(0.123, -4.5);
        let back = p.ohm_to_pu(p.pu_to_ohm(z));
        assert!((back - z).norm() <= 1e-12 * z.norm());
    }

    #[test]
    fn validation() {
        assert!(SystemParams::case_study().validate().is_ok());
        let mut p = SystemParams::case_study();
        p.t_d = 0.0;
        let e = p.validate().unwrap_err().to_string();
        assert!(e.contains("t_d_s"), "{e}");
        let mut p = SystemParams::case_study();
        p.kp = f64::NAN;
        assert!(p.validate().is_err());
    }
}
