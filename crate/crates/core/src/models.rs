//! Closed-form dq impedances of the case-study grid (RL Thevenin source) and
//! converter (PI current control, PWM delay, optional SRF-PLL).
//!
//! All matrices use the load convention: current positive into the modelled
//! subsystem. The dq frame is aligned with the steady-state PCC voltage.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::freqresp::{Domain, FrequencyGrid, Mat2, Role, Tf2x2, J, ONE, ZERO};
use crate::params::{SystemParams, Units};

/// Steady state of the averaged circuit, SI dq phasors (`d + j q`, peak).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OperatingPoint {
    /// PCC voltage; real by frame choice.
    pub v_pcc: Complex64,
    /// Converter current (into the converter).
    pub i_l: Complex64,
    /// Converter modulation voltage.
    pub v_conv: Complex64,
    /// Thevenin source voltage in the PCC-aligned frame.
    pub v_th: Complex64,
}

impl OperatingPoint {
    /// Largest per-unit violation of the steady-state circuit equations.
    pub fn residual(&self, p: &SystemParams) -> f64 {
        let w1 = p.w1();
        let vb = p.v_base();
        let z_th = Complex64::new(p.r_th(), w1 * p.l_th());
        let z_s = Complex64::new(p.r_s(), w1 * p.l_s());
        [
            (self.v_th.norm() - vb).abs() / vb,
            (self.v_th - self.v_pcc - z_th * self.i_l).norm() / vb,
            (self.v_pcc - self.v_conv - z_s * self.i_l).norm() / vb,
            (self.i_l - p.i_ref()).norm() / p.i_base(),
            self.v_pcc.im.abs() / vb,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Modulation index referred to half the DC-link voltage.
    pub fn modulation_index(&self, p: &SystemParams) -> f64 {
        self.v_conv.norm() / (0.5 * p.v_dc)
    }
}

/// Solves the phasor circuit with the converter current held at its
/// set-point. With `Z_th I = a + j b` the PCC voltage is `-a + sqrt(E^2 - b^2)`.
pub fn solve_operating_point(p: &SystemParams) -> Result<OperatingPoint> {
    p.validate()?;
    let w1 = p.w1();
    let e = p.v_base();
    let i = p.i_ref();
    let z_th = Complex64::new(p.r_th(), w1 * p.l_th());
    let z_s = Complex64::new(p.r_s(), w1 * p.l_s());
    let drop = z_th * i;
    let disc = e * e - drop.im * drop.im;
    if disc < 0.0 {
        return Err(Error::OperatingPoint(format!(
            "grid cannot supply the set-point current (reactive drop {:.3} pu exceeds source)",
            drop.im / e
        )));
    }
    let v = -drop.re + disc.sqrt();
    if v <= 0.0 {
        return Err(Error::OperatingPoint(format!(
            "PCC voltage collapses ({:.3} pu)",
            v / e
        )));
    }
    let v_pcc = Complex64::new(v, 0.0);
    let op = OperatingPoint {
        v_pcc,
        i_l: i,
        v_conv: v_pcc - z_s * i,
        v_th: v_pcc + drop,
    };
    let res = op.residual(p);
    if res > 1e-9 {
        return Err(Error::OperatingPoint(format!("residual {res:e} pu")));
    }
    Ok(op)
}

/// `[[R + sL, -w1 L], [w1 L, R + sL]]` at `s = j omega`.
pub fn rl_dq(r: f64, l: f64, w1: f64, omega: f64) -> Mat2 {
    let diag = Complex64::new(r, omega * l);
    Mat2::new(diag, (-w1 * l).into(), (w1 * l).into(), diag)
}

pub fn grid_impedance_dq(p: &SystemParams, grid: &FrequencyGrid, units: Units) -> Result<Tf2x2> {
    check_fundamental(p, grid)?;
    let (r, l, w1) = (p.r_th(), p.l_th(), p.w1());
    let k = p.impedance_scale(units);
    Tf2x2::from_fn(grid, Domain::Dq, Role::Impedance, |w| rl_dq(r, l, w1, w) * k)
}

fn check_fundamental(p: &SystemParams, grid: &FrequencyGrid) -> Result<()> {
    let w1 = p.w1();
    if (grid.fundamental() - w1).abs() > 1e-12 * w1 {
        return Err(Error::InvalidParameter(format!(
            "grid fundamental {} Hz differs from f_n = {} Hz",
            grid.fundamental_hz(),
            p.f_n
        )));
    }
    Ok(())
}

/// Pieces of the linearised converter at one complex frequency.
#[derive(Clone, Copy, Debug)]
pub struct VscTerms {
    /// Controller path from current error to converter voltage, delay included.
    pub control: Mat2,
    /// Impedance with a fixed (ideal) frame: filter plus control.
    pub fixed_frame: Mat2,
    /// Angle sensitivity of the converter voltage minus control reaction.
    pub angle_gain: [Complex64; 2],
    /// PLL angle response to PCC q-axis voltage (rad/V).
    pub pll: Complex64,
}

/// Evaluates the linearised converter terms at `s`.
///
/// The current controller acts on the measured current in the controller
/// frame: `v_ref = Hc (i - i_ref) - w1 Ls J i`, delayed by `1 / (1 + s Td)`.
/// The PLL is a PI on `v_q / V_base`, so the angle responds as
/// `H / V_base / (s + H V_pcc / V_base)`.
pub fn vsc_terms(p: &SystemParams, op: &OperatingPoint, s: Complex64) -> VscTerms {
    let w1 = p.w1();
    let (rs, ls) = (p.r_s(), p.l_s());
    let jm = Mat2::rot90();
    let hc = p.kp_ohm() * (ONE + ONE / (p.ti * s));
    let gd = ONE / (ONE + p.t_d * s);
    let control = (Mat2::identity() * hc - jm * (w1 * ls)) * gd;
    let filter = Mat2::identity() * (rs + s * ls) + jm * (w1 * ls);
    let fixed_frame = filter + control;

    let v0 = [op.v_pcc, ZERO];
    let i0 = [op.i_l.re.into(), op.i_l.im.into()];
    let vc0 = {
        let zf0 = Mat2::identity() * Complex64::from(rs) + jm * (w1 * ls);
        let d = zf0.mul_vec(i0);
        [v0[0] - d[0], v0[1] - d[1]]
    };
    let a = jm.mul_vec(vc0);
    let b = (control * jm).mul_vec(i0);
    let angle_gain = [a[0] - b[0], a[1] - b[1]];

    let vb = p.v_base();
    let h = p.k_pll * (ONE + ONE / (p.t_pll * s));
    let pll = h / vb / (s + h * op.v_pcc.re / vb);
    VscTerms {
        control,
        fixed_frame,
        angle_gain,
        pll,
    }
}

/// Converter impedance at one angular frequency.
pub fn vsc_impedance_at(p: &SystemParams, op: &OperatingPoint, omega: f64, pll_enabled: bool) -> Mat2 {
    let s = J * omega;
    let t = vsc_terms(p, op, s);
    if !pll_enabled {
        return t.fixed_frame;
    }
    // (I - P g^T)^-1 M with g = [0, G]
    let pg = Mat2::new(ZERO, t.angle_gain[0] * t.pll, ZERO, t.angle_gain[1] * t.pll);
    let lhs = Mat2::identity() - pg;
    match lhs.inverse() {
        Some(inv) => inv * t.fixed_frame,
        None => Mat2::new(f64::NAN.into(), ZERO, ZERO, ZERO),
    }
}

pub fn vsc_impedance_dq(
    p: &SystemParams,
    op: &OperatingPoint,
    grid: &FrequencyGrid,
    pll_enabled: bool,
    units: Units,
) -> Result<Tf2x2> {
    check_fundamental(p, grid)?;
    let res = op.residual(p);
    if !(res <= 1e-9) {
        return Err(Error::OperatingPoint(format!(
            "operating point does not match the parameters (residual {res:e})"
        )));
    }
    let k = p.impedance_scale(units);
    Tf2x2::from_fn(grid, Domain::Dq, Role::Impedance, |w| {
        vsc_impedance_at(p, op, w, pll_enabled) * k
    })
}

/// Source and load impedances of one configuration.
#[derive(Clone, Debug)]
pub struct AnalyticModels {
    pub op: OperatingPoint,
    pub source: Tf2x2,
    pub load: Tf2x2,
}

pub fn analytic_models(
    p: &SystemParams,
    grid: &FrequencyGrid,
    pll_enabled: bool,
    units: Units,
) -> Result<AnalyticModels> {
    let op = solve_operating_point(p)?;
    Ok(AnalyticModels {
        source: grid_impedance_dq(p, grid, units)?,
        load: vsc_impedance_dq(p, &op, grid, pll_enabled, units)?,
        op,
    })
}
