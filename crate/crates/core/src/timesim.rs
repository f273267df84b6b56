//! Averaged time-domain model of the case-study system with shunt current
//! injection at the PCC, integrated with fixed-step RK4.
//!
//! The network is integrated in the system dq frame (`theta = w1 t`) using
//! complex notation `x = x_d + j x_q`; the recorded outputs are three-phase.
//! The converter controls its current in its own frame, rotated from the
//! system frame by the PLL angle deviation (zero for the fixed-ramp case).

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freqresp::{fmt_num, J};
use crate::models::solve_operating_point;
use crate::params::SystemParams;

pub const DEFAULT_DT: f64 = 1e-5;
pub const DEFAULT_I_INJ_PU: f64 = 0.02;
pub const DEFAULT_DIVERGENCE_PU: f64 = 10.0;
pub const SETTLE_TOL_PU: f64 = 1e-6;

const TWO_PI_3: f64 = 2.0 * PI / 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    /// Controller frame from the fixed ramp `w1 t`.
    Mfd,
    /// Controller frame from the SRF-PLL.
    Mfc,
}

impl Case {
    pub fn pll_enabled(self) -> bool {
        self == Case::Mfc
    }

    pub fn name(self) -> &'static str {
        match self {
            Case::Mfd => "mfd",
            Case::Mfc => "mfc",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InjectionKind {
    Dq1,
    Dq2,
    Pn1,
    Pn2,
}

impl InjectionKind {
    pub fn name(self) -> &'static str {
        match self {
            InjectionKind::Dq1 => "dq1",
            InjectionKind::Dq2 => "dq2",
            InjectionKind::Pn1 => "pn1",
            InjectionKind::Pn2 => "pn2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dq1" => Some(InjectionKind::Dq1),
            "dq2" => Some(InjectionKind::Dq2),
            "pn1" => Some(InjectionKind::Pn1),
            "pn2" => Some(InjectionKind::Pn2),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectionSpec {
    pub kind: InjectionKind,
    pub f_inj: f64,
    /// Peak amplitude in per unit of the phase peak current base.
    pub amplitude_pu: f64,
}

impl InjectionSpec {
    pub fn new(kind: InjectionKind, f_inj: f64) -> Self {
        InjectionSpec {
            kind,
            f_inj,
            amplitude_pu: DEFAULT_I_INJ_PU,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_inj.is_finite() && self.f_inj > 0.0) {
            return Err(Error::InvalidParameter(format!("f_inj_hz must be positive, got {}", self.f_inj)));
        }
        if !(self.amplitude_pu.is_finite() && self.amplitude_pu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "i_inj_pu must be positive, got {}",
                self.amplitude_pu
            )));
        }
        Ok(())
    }
}

/// Three-phase injected current (A) at time `t`.
///
/// `dq1` modulates a positive-sequence carrier at the fundamental, `dq2` the
/// same carrier shifted by a quarter period so the signal lies on the q axis.
/// `pn1` and `pn2` are balanced tones at `f_inj + f1` and `f_inj - f1`.
pub fn injection_signal(spec: &InjectionSpec, p: &SystemParams, t: f64) -> [f64; 3] {
    let amp = spec.amplitude_pu * p.i_base();
    let wi = 2.0 * PI * spec.f_inj;
    let w1 = p.w1();
    let phases = [0.0, -TWO_PI_3, TWO_PI_3];
    let mut out = [0.0; 3];
    for (k, ph) in phases.iter().enumerate() {
        out[k] = amp
            * match spec.kind {
                InjectionKind::Dq1 => (wi * t).sin() * (w1 * t + ph).cos(),
                InjectionKind::Dq2 => (wi * t).sin() * (w1 * t + ph + PI / 2.0).cos(),
                InjectionKind::Pn1 => ((wi + w1) * t + ph).sin(),
                InjectionKind::Pn2 => ((wi - w1) * t - ph).sin(),
            };
    }
    out
}

/// Injected current in the system dq frame and its time derivative.
pub fn injection_dq(spec: &InjectionSpec, p: &SystemParams, t: f64) -> (Complex64, Complex64) {
    let amp = spec.amplitude_pu * p.i_base();
    let w = 2.0 * PI * spec.f_inj;
    let (s, c) = (w * t).sin_cos();
    match spec.kind {
        InjectionKind::Dq1 => (Complex64::new(amp * s, 0.0), Complex64::new(amp * w * c, 0.0)),
        InjectionKind::Dq2 => (Complex64::new(0.0, amp * s), Complex64::new(0.0, amp * w * c)),
        InjectionKind::Pn1 => {
            let e = Complex64::new(c, s);
            (-J * e * amp, e * (amp * w))
        }
        InjectionKind::Pn2 => {
            let e = Complex64::new(c, -s);
            (J * e * amp, e * (amp * w))
        }
    }
}

/// Amplitude-invariant Park transform, `d + j q = (2/3) sum x_k e^{-j(theta - k 2pi/3)}`.
pub fn abc_to_dq(x: [f64; 3], theta: f64) -> Complex64 {
    abc_to_alphabeta(x) * Complex64::from_polar(1.0, -theta)
}

/// `alpha + j beta = (2/3) sum x_k e^{j k 2pi/3}`.
pub fn abc_to_alphabeta(x: [f64; 3]) -> Complex64 {
    let a = Complex64::from_polar(1.0, TWO_PI_3);
    (Complex64::from(x[0]) + a * x[1] + a.conj() * x[2]) * (2.0 / 3.0)
}

pub fn dq_to_abc(x: Complex64, theta: f64) -> [f64; 3] {
    let ab = x * Complex64::from_polar(1.0, theta);
    [
        ab.re,
        (ab * Complex64::from_polar(1.0, -TWO_PI_3)).re,
        (ab * Complex64::from_polar(1.0, TWO_PI_3)).re,
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: SystemParams,
    pub case: Case,
    pub dt: f64,
    pub t_end: f64,
    pub injection: Option<InjectionSpec>,
    /// State deviation (pu) beyond which a run is declared diverged.
    pub divergence_pu: f64,
}

impl SimConfig {
    pub fn new(params: SystemParams, case: Case) -> Self {
        SimConfig {
            params,
            case,
            dt: DEFAULT_DT,
            t_end: 3.0,
            injection: None,
            divergence_pu: DEFAULT_DIVERGENCE_PU,
        }
    }

    pub fn with_injection(mut self, spec: InjectionSpec) -> Self {
        self.injection = Some(spec);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt_s must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > self.dt) {
            return Err(Error::InvalidParameter(format!("t_end_s must exceed dt_s, got {}", self.t_end)));
        }
        let slack = 1.0 + 1e-9;
        if self.dt > self.params.t_d / 10.0 * slack {
            return Err(Error::InvalidParameter(format!(
                "dt_s = {} does not resolve the PWM delay (need <= t_d_s / 10)",
                self.dt
            )));
        }
        if self.case.pll_enabled() && self.dt > self.params.t_pll / 20.0 * slack {
            return Err(Error::InvalidParameter(format!(
                "dt_s = {} does not resolve the PLL (need <= t_pll_s / 20)",
                self.dt
            )));
        }
        if let Some(inj) = &self.injection {
            inj.validate()?;
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Integrator state: grid current (2), PI integrator (2), delayed converter
/// voltage (2), PLL angle deviation, PLL integrator.
pub type State = [f64; 8];

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Outputs {
    pub v_pcc: Complex64,
    pub i_s: Complex64,
    pub i_l: Complex64,
}

#[derive(Clone, Debug)]
struct Plant {
    p: SystemParams,
    pll: bool,
    injection: Option<InjectionSpec>,
    z_th1: Complex64,
    z_s1: Complex64,
    l_th: f64,
    l_s: f64,
    kp: f64,
    ki: f64,
    v_th: Complex64,
    i_ref: Complex64,
    x_scale: State,
}

impl Plant {
    fn new(cfg: &SimConfig) -> Result<(Plant, State)> {
        let p = cfg.params;
        let op = solve_operating_point(&p)?;
        let w1 = p.w1();
        let (ib, vb) = (p.i_base(), p.v_base());
        let plant = Plant {
            p,
            pll: cfg.case.pll_enabled(),
            injection: cfg.injection,
            z_th1: Complex64::new(p.r_th(), w1 * p.l_th()),
            z_s1: Complex64::new(p.r_s(), w1 * p.l_s()),
            l_th: p.l_th(),
            l_s: p.l_s(),
            kp: p.kp_ohm(),
            ki: p.kp_ohm() / p.ti,
            v_th: op.v_th,
            i_ref: p.i_ref(),
            x_scale: [ib, ib, vb, vb, vb, vb, 1.0, w1],
        };
        let x_i = op.v_conv + J * (w1 * plant.l_s) * op.i_l;
        let x0 = [
            op.i_l.re,
            op.i_l.im,
            x_i.re,
            x_i.im,
            op.v_conv.re,
            op.v_conv.im,
            0.0,
            0.0,
        ];
        Ok((plant, x0))
    }

    /// Network derivative of the grid current and the resulting PCC voltage.
    fn network(&self, v_th: Complex64, v_conv: Complex64, i_s: Complex64, inj: (Complex64, Complex64)) -> (Complex64, Complex64) {
        let i_l = i_s + inj.0;
        let di_s = (v_th - v_conv - self.z_th1 * i_s - self.z_s1 * i_l - inj.1 * self.l_s) / (self.l_th + self.l_s);
        let v_pcc = v_th - self.z_th1 * i_s - di_s * self.l_th;
        (di_s, v_pcc)
    }

    fn eval(&self, t: f64, x: &State) -> (State, Outputs) {
        let inj = match &self.injection {
            Some(s) => injection_dq(s, &self.p, t),
            None => (Complex64::default(), Complex64::default()),
        };
        let i_s = Complex64::new(x[0], x[1]);
        let x_i = Complex64::new(x[2], x[3]);
        let v_c = Complex64::new(x[4], x[5]);
        let delta = x[6];
        let rot = Complex64::from_polar(1.0, delta);
        let v_conv = v_c * rot;
        let (di_s, v_pcc) = self.network(self.v_th, v_conv, i_s, inj);
        let i_l = i_s + inj.0;

        let i_c = i_l * rot.conj();
        let e = i_c - self.i_ref;
        let v_ref = e * self.kp + x_i - J * (self.p.w1() * self.l_s) * i_c;
        let dx_i = e * self.ki;
        let dv_c = (v_ref - v_c) / self.p.t_d;
        let (d_delta, dx_pll) = if self.pll {
            let u = (v_pcc * rot.conj()).im / self.p.v_base();
            (self.p.k_pll * u + x[7], self.p.k_pll / self.p.t_pll * u)
        } else {
            (0.0, 0.0)
        };
        (
            [di_s.re, di_s.im, dx_i.re, dx_i.im, dv_c.re, dv_c.im, d_delta, dx_pll],
            Outputs { v_pcc, i_s, i_l },
        )
    }

    fn rk4(&self, t: f64, dt: f64, x: &State) -> (State, Outputs) {
        let add = |a: &State, k: &State, h: f64| {
            let mut o = *a;
            for i in 0..8 {
                o[i] += h * k[i];
            }
            o
        };
        let (k1, out) = self.eval(t, x);
        let (k2, _) = self.eval(t + 0.5 * dt, &add(x, &k1, 0.5 * dt));
        let (k3, _) = self.eval(t + 0.5 * dt, &add(x, &k2, 0.5 * dt));
        let (k4, _) = self.eval(t + dt, &add(x, &k3, dt));
        let mut next = *x;
        for i in 0..8 {
            next[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        (next, out)
    }

    /// Largest per-unit distance between two states.
    fn distance_pu(&self, a: &State, b: &State) -> f64 {
        (0..8)
            .map(|i| (a[i] - b[i]).abs() / self.x_scale[i])
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimTrace {
    pub dt: f64,
    pub t: Vec<f64>,
    pub v_pcc: Vec<[f64; 3]>,
    /// Grid branch current, flowing out of the grid towards the PCC.
    pub i_s: Vec<[f64; 3]>,
    /// Converter branch current, flowing into the converter.
    pub i_l: Vec<[f64; 3]>,
    pub theta_pll: Vec<f64>,
    pub states: Vec<State>,
    /// Time at which the divergence bound was crossed.
    pub diverged_at: Option<f64>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn push(&mut self, t: f64, w1: f64, x: &State, out: &Outputs) {
        let theta = w1 * t;
        self.t.push(t);
        self.v_pcc.push(dq_to_abc(out.v_pcc, theta));
        self.i_s.push(dq_to_abc(out.i_s, theta));
        self.i_l.push(dq_to_abc(out.i_l, theta));
        self.theta_pll.push(theta + x[6]);
        self.states.push(*x);
    }

    /// Samples `[start, start + n)` as a new trace.
    pub fn slice(&self, start: usize, n: usize) -> SimTrace {
        let r = start..start + n;
        SimTrace {
            dt: self.dt,
            t: self.t[r.clone()].to_vec(),
            v_pcc: self.v_pcc[r.clone()].to_vec(),
            i_s: self.i_s[r.clone()].to_vec(),
            i_l: self.i_l[r.clone()].to_vec(),
            theta_pll: self.theta_pll[r.clone()].to_vec(),
            states: self.states[r].to_vec(),
            diverged_at: self.diverged_at,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t_s,va,vb,vc,isa,isb,isc,ila,ilb,ilc,theta_pll")?;
        for k in 0..self.len() {
            let mut row = vec![fmt_num(self.t[k])];
            for x in self.v_pcc[k].iter().chain(&self.i_s[k]).chain(&self.i_l[k]) {
                row.push(fmt_num(*x));
            }
            row.push(fmt_num(self.theta_pll[k]));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Integrator driving one configuration step by step.
pub struct Simulator {
    plant: Plant,
    x0: State,
    x: State,
    k: usize,
    dt: f64,
    divergence_pu: f64,
}

impl Simulator {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let (plant, x0) = Plant::new(cfg)?;
        Ok(Simulator {
            plant,
            x0,
            x: x0,
            k: 0,
            dt: cfg.dt,
            divergence_pu: cfg.divergence_pu,
        })
    }

    pub fn time(&self) -> f64 {
        self.k as f64 * self.dt
    }

    pub fn state(&self) -> &State {
        &self.x
    }

    /// Steady-state operating point the run was initialised at.
    pub fn equilibrium(&self) -> &State {
        &self.x0
    }

    /// Adds a per-unit offset to the grid current and the PLL angle.
    pub fn perturb(&mut self, di_s_pu: Complex64, d_delta: f64) {
        let ib = self.plant.p.i_base();
        self.x[0] += di_s_pu.re * ib;
        self.x[1] += di_s_pu.im * ib;
        self.x[6] += d_delta;
    }

    pub fn deviation_pu(&self) -> f64 {
        self.plant.distance_pu(&self.x, &self.x0)
    }

    /// Advances one step; returns the outputs at the start of the step.
    pub fn step(&mut self) -> Result<Outputs> {
        let t = self.time();
        let (next, out) = self.plant.rk4(t, self.dt, &self.x);
        if !next.iter().all(|v| v.is_finite()) || self.plant.distance_pu(&next, &self.x0) > self.divergence_pu {
            return Err(Error::Diverged { t: t + self.dt });
        }
        self.x = next;
        self.k += 1;
        Ok(out)
    }

    fn record(&self, trace: &mut SimTrace, out: &Outputs) {
        trace.push(self.time(), self.plant.p.w1(), &self.x, out);
    }

    /// Outputs at the current state without advancing.
    pub fn outputs(&self) -> Outputs {
        self.plant.eval(self.time(), &self.x).1
    }
}

/// Integrates from the steady-state operating point to `t_end`, recording
/// every step. Divergence truncates the trace and sets `diverged_at`.
pub fn simulate(cfg: &SimConfig) -> Result<SimTrace> {
    let mut sim = Simulator::new(cfg)?;
    let mut trace = SimTrace {
        dt: cfg.dt,
        ..Default::default()
    };
    let n = cfg.steps();
    for _ in 0..n {
        let x = sim.x;
        match sim.step() {
            Ok(out) => {
                let t = sim.time() - sim.dt;
                trace.push(t, cfg.params.w1(), &x, &out);
            }
            Err(Error::Diverged { t }) => {
                trace.diverged_at = Some(t);
                return Ok(trace);
            }
            Err(e) => return Err(e),
        }
    }
    let out = sim.outputs();
    sim.record(&mut trace, &out);
    Ok(trace)
}

/// Integer millihertz, rejecting values off that grid.
fn millihertz(f: f64) -> Option<u64> {
    let m = (f.abs() * 1000.0).round();
    ((f.abs() * 1000.0 - m).abs() < 1e-6 && m > 0.0).then_some(m as u64)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Shortest time over which every listed frequency completes whole periods.
pub fn common_period(freqs: &[f64]) -> Option<f64> {
    let mut g = 0;
    for &f in freqs {
        g = gcd(g, millihertz(f)?);
    }
    (g > 0).then(|| 1000.0 / g as f64)
}

/// Steps per common period, if it is an integer number of steps.
fn period_steps(freqs: &[f64], dt: f64) -> Result<usize> {
    let t = common_period(freqs).ok_or_else(|| Error::NonCommensurate {
        f_hz: freqs.iter().copied().fold(f64::NAN, f64::max),
        window_s: f64::NAN,
    })?;
    let n = t / dt;
    if (n - n.round()).abs() > 1e-6 * n.max(1.0) {
        return Err(Error::NonCommensurate { f_hz: 1.0 / t, window_s: dt });
    }
    Ok(n.round() as usize)
}

#[derive(Clone, Debug)]
pub struct SteadyRun {
    pub trace: SimTrace,
    /// Index into `trace` where the periodic steady state starts.
    pub settle_index: usize,
    pub settle_time: f64,
}

/// Runs until the state repeats over one period of the excitation (to
/// `SETTLE_TOL_PU`), then records `window_s` more seconds.
///
/// The period is `1 / gcd(f_inj, f_n)`, or `1 / f_n` without injection.
/// Only samples from `record_from` onwards are kept.
pub fn run_to_steady_state(cfg: &SimConfig, window_s: f64, record_from: f64) -> Result<SteadyRun> {
    let mut sim = Simulator::new(cfg)?;
    let f_n = cfg.params.f_n;
    let freqs = match &cfg.injection {
        Some(inj) => vec![inj.f_inj, f_n],
        None => vec![f_n],
    };
    let period = period_steps(&freqs, cfg.dt)?;
    let window = (window_s / cfg.dt).round() as usize;
    let total = cfg.steps();
    let w1 = cfg.params.w1();

    let mut ring: Vec<State> = Vec::with_capacity(period);
    let mut trace = SimTrace {
        dt: cfg.dt,
        ..Default::default()
    };
    let first_record = (record_from / cfg.dt).round() as usize;
    let mut settled: Option<usize> = None;
    let mut worst = 0.0f64;

    while sim.k < total {
        let k = sim.k;
        let x = sim.x;
        match settled {
            Some(s) if k >= s + window => break,
            Some(_) => {}
            None => {
                if k >= period {
                    worst = worst.max(sim.plant.distance_pu(&x, &ring[k % period]));
                    if k % period == 0 {
                        if k >= 2 * period && worst < SETTLE_TOL_PU {
                            settled = Some(k);
                        }
                        worst = 0.0;
                    }
                    ring[k % period] = x;
                } else {
                    ring.push(x);
                }
            }
        }
        let out = sim.step()?;
        if k >= first_record || settled.is_some() {
            trace.push(k as f64 * cfg.dt, w1, &x, &out);
        }
    }
    let s = settled.ok_or(Error::NotSettled { t_end: cfg.t_end })?;
    if sim.k < s + window {
        return Err(Error::NotSettled { t_end: cfg.t_end });
    }
    let offset = trace
        .t
        .iter()
        .position(|&t| (t / cfg.dt).round() as usize >= s)
        .unwrap_or(0);
    Ok(SteadyRun {
        settle_time: s as f64 * cfg.dt,
        settle_index: offset,
        trace,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Boundedness {
    pub bounded: bool,
    pub diverged_at: Option<f64>,
    /// Peak state deviation in the last segment over that in the first.
    pub growth: f64,
}

/// Kicks the steady state and reports whether the deviation dies out.
///
/// The peak deviation is compared over the first and last fifth of the run;
/// a run is bounded when it did not diverge and the deviation shrank.
pub fn time_domain_stability(cfg: &SimConfig, kick_pu: f64) -> Result<Boundedness> {
    let mut cfg = cfg.clone();
    cfg.injection = None;
    let mut sim = Simulator::new(&cfg)?;
    sim.perturb(Complex64::new(kick_pu, kick_pu), kick_pu);
    let n = cfg.steps();
    let seg = (n / 5).max(1);
    let (mut first, mut last) = (0.0f64, 0.0f64);
    for k in 0..n {
        match sim.step() {
            Ok(_) => {}
            Err(Error::Diverged { t }) => {
                return Ok(Boundedness {
                    bounded: false,
                    diverged_at: Some(t),
                    growth: f64::INFINITY,
                })
            }
            Err(e) => return Err(e),
        }
        let d = sim.deviation_pu();
        if k < seg {
            first = first.max(d);
        }
        if k >= n - seg {
            last = last.max(d);
        }
    }
    let growth = last / first;
    Ok(Boundedness {
        bounded: growth < 1.0,
        diverged_at: None,
        growth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p() -> SystemParams {
        SystemParams::case_study()
    }

    #[test]
    fn dq1_at_quarter_period() {
        let p = p();
        let spec = InjectionSpec::new(InjectionKind::Dq1, 40.0);
        let t = 0.25 / 40.0;
        let x = injection_signal(&spec, &p, t);
        let amp = spec.amplitude_pu * p.i_base();
        assert_relative_eq!(x[0], amp * (p.w1() * t).cos(), max_relative = 1e-12);
    }

    #[test]
    fn pn1_at_zero() {
        let p = p();
        let spec = InjectionSpec::new(InjectionKind::Pn1, 40.0);
        let x = injection_signal(&spec, &p, 0.0);
        let amp = spec.amplitude_pu * p.i_base();
        let s = TWO_PI_3.sin();
        assert!(x[0].abs() < 1e-12 * amp);
        assert_relative_eq!(x[1], -amp * s, max_relative = 1e-12);
        assert_relative_eq!(x[2], amp * s, max_relative = 1e-12);
    }

    #[test]
    fn injections_transform_to_their_axis() {
        let p = p();
        let w1 = p.w1();
        for t in [0.0, 0.0013, 0.0171, 0.2345] {
            let d = InjectionSpec::new(InjectionKind::Dq1, 37.5);
            let amp = d.amplitude_pu * p.i_base();
            let wi = 2.0 * PI * 37.5;
            let z = abc_to_dq(injection_signal(&d, &p, t), w1 * t);
            assert!((z - Complex64::new(amp * (wi * t).sin(), 0.0)).norm() < 1e-9 * amp);
            let q = InjectionSpec::new(InjectionKind::Dq2, 37.5);
            let z = abc_to_dq(injection_signal(&q, &p, t), w1 * t);
            assert!((z - Complex64::new(0.0, amp * (wi * t).sin())).norm() < 1e-9 * amp);
            for kind in [InjectionKind::Dq1, InjectionKind::Dq2, InjectionKind::Pn1, InjectionKind::Pn2] {
                let s = InjectionSpec::new(kind, 37.5);
                let z = abc_to_dq(injection_signal(&s, &p, t), w1 * t);
                assert!((z - injection_dq(&s, &p, t).0).norm() < 1e-9 * amp, "{kind:?}");
            }
        }
    }

    #[test]
    fn injection_derivative_matches_difference() {
        let p = p();
        let h = 1e-7;
        for kind in [InjectionKind::Dq1, InjectionKind::Dq2, InjectionKind::Pn1, InjectionKind::Pn2] {
            let s = InjectionSpec::new(kind, 62.5);
            let t = 0.0123;
            let fd = (injection_dq(&s, &p, t + h).0 - injection_dq(&s, &p, t - h).0) / (2.0 * h);
            let d = injection_dq(&s, &p, t).1;
            assert!((fd - d).norm() < 1e-6 * d.norm().max(1.0), "{kind:?}");
        }
    }

    #[test]
    fn sequence_content_of_pn_injections() {
        let p = p();
        let w1 = p.w1();
        let wi = 2.0 * PI * 30.0;
        let t = 0.0077;
        let amp = DEFAULT_I_INJ_PU * p.i_base();
        let s1 = InjectionSpec::new(InjectionKind::Pn1, 30.0);
        let ab = abc_to_alphabeta(injection_signal(&s1, &p, t));
        assert!((ab - Complex64::from_polar(amp, (wi + w1) * t - PI / 2.0)).norm() < 1e-9 * amp);
        let s2 = InjectionSpec::new(InjectionKind::Pn2, 30.0);
        let ab = abc_to_alphabeta(injection_signal(&s2, &p, t));
        assert!((ab - Complex64::from_polar(amp, -(wi - w1) * t + PI / 2.0)).norm() < 1e-9 * amp);
    }

    #[test]
    fn park_round_trip() {
        let z = Complex64::new(0.3, -1.7);
        for th in [0.0, 1.0, 4.0] {
            assert!((abc_to_dq(dq_to_abc(z, th), th) - z).norm() < 1e-14);
        }
    }

    #[test]
    fn config_checks_step_size() {
        let mut cfg = SimConfig::new(p(), Case::Mfc);
        assert!(cfg.validate().is_ok());
        cfg.dt = 2e-5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn mfd_rests_at_set_point() {
        let mut cfg = SimConfig::new(p(), Case::Mfd);
        cfg.t_end = 0.05;
        let tr = simulate(&cfg).unwrap();
        assert!(tr.diverged_at.is_none());
        let pp = p();
        let last = tr.states.last().unwrap();
        let i = Complex64::new(last[0], last[1]) / pp.i_base();
        assert!((i - Complex64::new(pp.id_ref, pp.iq_ref)).norm() < 1e-6);
        for s in &tr.states {
            let d = Plant::new(&cfg).unwrap().0.distance_pu(s, &tr.states[0]);
            assert!(d < 1e-9, "{d}");
        }
    }

    #[test]
    fn mfc_recovers_from_kick() {
        let mut cfg = SimConfig::new(p(), Case::Mfc);
        cfg.t_end = 0.6;
        let b = time_domain_stability(&cfg, 1e-3).unwrap();
        assert!(b.bounded, "{b:?}");
        assert!(b.growth < 1e-2);
    }

    #[test]
    fn network_dissipates_without_sources() {
        let cfg = SimConfig::new(p(), Case::Mfd);
        let (plant, _) = Plant::new(&cfg).unwrap();
        let l = plant.l_th + plant.l_s;
        let zero = (Complex64::default(), Complex64::default());
        let mut i = Complex64::new(300.0, -120.0);
        let h = 1e-5;
        let mut energy = 0.5 * l * i.norm_sqr();
        for _ in 0..2000 {
            let (di, _) = plant.network(Complex64::default(), Complex64::default(), i, zero);
            i += di * h;
            let e = 0.5 * l * i.norm_sqr();
            assert!(e <= energy);
            energy = e;
        }
    }

    #[test]
    fn common_period_examples() {
        assert_relative_eq!(common_period(&[97.5, 50.0]).unwrap(), 0.4, max_relative = 1e-12);
        assert_relative_eq!(common_period(&[50.0]).unwrap(), 0.02, max_relative = 1e-12);
        assert_relative_eq!(common_period(&[100.0, 50.0]).unwrap(), 0.02, max_relative = 1e-12);
        assert!(common_period(&[1.0 / 3.0, 50.0]).is_none());
    }

    #[test]
    fn steady_state_with_injection() {
        let mut cfg = SimConfig::new(p(), Case::Mfd).with_injection(InjectionSpec::new(InjectionKind::Dq1, 100.0));
        cfg.t_end = 1.0;
        let run = run_to_steady_state(&cfg, 0.04, 0.0).unwrap();
        assert!(run.settle_time < 0.5, "{}", run.settle_time);
        let n = run.trace.len();
        assert_eq!(n - run.settle_index, 4000);
        let si = run.settle_index;
        let plant = Plant::new(&cfg).unwrap().0;
        let drift = plant.distance_pu(&run.trace.states[si], &run.trace.states[si + 2000]);
        assert!(drift < SETTLE_TOL_PU, "{drift}");
        let swing = plant.distance_pu(&run.trace.states[si], &run.trace.states[si + 500]);
        assert!(swing > 1e-4);
    }

    #[test]
    fn unstable_config_does_not_settle() {
        let mut pp = p();
        pp.z_th *= 2.0;
        let mut cfg = SimConfig::new(pp, Case::Mfc).with_injection(InjectionSpec::new(InjectionKind::Dq1, 100.0));
        cfg.t_end = 1.0;
        let e = run_to_steady_state(&cfg, 0.02, 0.0).unwrap_err();
        assert!(matches!(e, Error::NotSettled { .. } | Error::Diverged { .. }), "{e}");
    }
}
