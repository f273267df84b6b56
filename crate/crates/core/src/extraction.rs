//! Impedance identification from simulated shunt-injection experiments.
//!
//! Each experiment injects one signal at one frequency, waits for the periodic
//! steady state, subtracts the no-injection baseline and projects the PCC
//! voltage and both branch currents onto single DFT bins. One experiment per
//! channel gives decoupled scalar impedances; two independent experiments give
//! the full 2x2 matrices.
//!
//! Sequence phasors come from the complex space vector `z = alpha + j beta`:
//! the positive channel is the `e^{j w_p t}` coefficient and the negative
//! channel is the conjugate of the `e^{-j w_n t}` coefficient. When `w_n < 0`
//! that coefficient is a positive-sequence tone at `|w_n|`; the conjugate
//! identification keeps `[P, N] = A_Z [D, Q] / sqrt 2` valid on both sides of
//! the fundamental.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::freqresp::{Domain, FrequencyGrid, Mat2, Role, Tf1x1, Tf2x2};
use crate::stability::DecoupledChannels;
use crate::timesim::{abc_to_alphabeta, abc_to_dq, run_to_steady_state, InjectionKind, InjectionSpec, SimConfig, SimTrace};

pub const DEFAULT_WINDOW_S: f64 = 0.4;
pub const GRID_STEP_HZ: f64 = 2.5;
pub const COND_FLAG: f64 = 1e3;
const COND_FAIL: f64 = 1e10;
const NOISE_FLOOR_REL: f64 = 1e-6;

fn check_commensurate(n: usize, dt: f64, f: f64) -> Result<()> {
    let window = n as f64 * dt;
    let cycles = window * f.abs();
    if (cycles - cycles.round()).abs() > 1e-6 {
        return Err(Error::NonCommensurate { f_hz: f, window_s: window });
    }
    Ok(())
}

/// Single-bin projection `(2/N) sum x(t_k) e^{-j w t_k}` with `t_k = t0 + k dt`.
///
/// A tone `A sin(w t + phi)` returns `A e^{j(phi - pi/2)}`.
pub fn dft_bin(x: &[f64], dt: f64, t0: f64, f: f64) -> Result<Complex64> {
    check_commensurate(x.len(), dt, f)?;
    let w = 2.0 * PI * f;
    let sum: Complex64 = x
        .iter()
        .enumerate()
        .map(|(k, &v)| Complex64::from_polar(v, -w * (t0 + k as f64 * dt)))
        .sum();
    Ok(sum * (2.0 / x.len() as f64))
}

/// Coefficient of `e^{j w t}` in a complex signal, `(1/N) sum z e^{-j w t}`.
pub fn complex_bin(z: &[Complex64], dt: f64, t0: f64, f: f64) -> Result<Complex64> {
    check_commensurate(z.len(), dt, f)?;
    let w = 2.0 * PI * f;
    let sum: Complex64 = z
        .iter()
        .enumerate()
        .map(|(k, &v)| v * Complex64::from_polar(1.0, -w * (t0 + k as f64 * dt)))
        .sum();
    Ok(sum / z.len() as f64)
}

/// Phasors of one experiment, channel order `(d, q)` or `(p, n)`.
///
/// Both currents are taken positive into their subsystem, so the source
/// current is the negated grid-branch current.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhasorSet {
    pub f_hz: f64,
    #[serde(skip)]
    pub domain: Domain,
    pub v: [Complex64; 2],
    pub i_source: [Complex64; 2],
    pub i_load: [Complex64; 2],
}

/// One fundamental period of the undisturbed steady state, indexed by
/// absolute step number.
#[derive(Clone, Debug)]
pub struct Baseline {
    start_step: usize,
    v: Vec<[f64; 3]>,
    i_s: Vec<[f64; 3]>,
    i_l: Vec<[f64; 3]>,
}

impl Baseline {
    pub fn zero(period_steps: usize) -> Self {
        Baseline {
            start_step: 0,
            v: vec![[0.0; 3]; period_steps],
            i_s: vec![[0.0; 3]; period_steps],
            i_l: vec![[0.0; 3]; period_steps],
        }
    }

    pub fn run(cfg: &SimConfig) -> Result<Self> {
        let mut cfg = cfg.clone();
        cfg.injection = None;
        let period = 1.0 / cfg.params.f_n;
        let run = run_to_steady_state(&cfg, period, cfg.t_end)?;
        let n = (period / cfg.dt).round() as usize;
        let w = run.trace.slice(run.settle_index, n);
        Ok(Baseline {
            start_step: (w.t[0] / cfg.dt).round() as usize,
            v: w.v_pcc,
            i_s: w.i_s,
            i_l: w.i_l,
        })
    }

    fn at(&self, step: usize) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let p = self.v.len();
        let k = (step as i64 - self.start_step as i64).rem_euclid(p as i64) as usize;
        (self.v[k], self.i_s[k], self.i_l[k])
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn neg2(x: [Complex64; 2]) -> [Complex64; 2] {
    [-x[0], -x[1]]
}

/// Perturbation signals after baseline removal: `(v, i_s, i_l)` per sample.
fn perturbations(trace: &SimTrace, baseline: &Baseline) -> Vec<([f64; 3], [f64; 3], [f64; 3])> {
    (0..trace.len())
        .map(|k| {
            let step = (trace.t[k] / trace.dt).round() as usize;
            let (bv, bs, bl) = baseline.at(step);
            (sub(trace.v_pcc[k], bv), sub(trace.i_s[k], bs), sub(trace.i_l[k], bl))
        })
        .collect()
}

/// dq phasors at `f_hz` in the fixed `w1 t` frame.
pub fn abc_to_dq_phasors(trace: &SimTrace, baseline: &Baseline, f_hz: f64, f1_hz: f64) -> Result<PhasorSet> {
    if trace.is_empty() {
        return Err(Error::InvalidParameter("empty trace".into()));
    }
    let w1 = 2.0 * PI * f1_hz;
    check_commensurate(trace.len(), trace.dt, f1_hz)?;
    let sig = perturbations(trace, baseline);
    let mut ch: [Vec<f64>; 6] = Default::default();
    for (k, (v, is, il)) in sig.iter().enumerate() {
        let th = w1 * trace.t[k];
        for (j, x) in [v, is, il].into_iter().enumerate() {
            let z = abc_to_dq(*x, th);
            ch[2 * j].push(z.re);
            ch[2 * j + 1].push(z.im);
        }
    }
    let t0 = trace.t[0];
    let mut out = [Complex64::default(); 6];
    for (o, x) in out.iter_mut().zip(&ch) {
        *o = dft_bin(x, trace.dt, t0, f_hz)?;
    }
    Ok(PhasorSet {
        f_hz,
        domain: Domain::Dq,
        v: [out[0], out[1]],
        i_source: neg2([out[2], out[3]]),
        i_load: [out[4], out[5]],
    })
}

/// Sequence phasors: positive channel at `f_p`, negative channel at `f_n`
/// (possibly negative) with the conjugate identification.
pub fn abc_to_pn_phasors(trace: &SimTrace, baseline: &Baseline, f_p: f64, f_n: f64) -> Result<PhasorSet> {
    if trace.is_empty() {
        return Err(Error::InvalidParameter("empty trace".into()));
    }
    let sig = perturbations(trace, baseline);
    let mut z: [Vec<Complex64>; 3] = Default::default();
    for (v, is, il) in &sig {
        z[0].push(abc_to_alphabeta(*v));
        z[1].push(abc_to_alphabeta(*is));
        z[2].push(abc_to_alphabeta(*il));
    }
    let t0 = trace.t[0];
    let mut out = [[Complex64::default(); 2]; 3];
    for (o, x) in out.iter_mut().zip(&z) {
        o[0] = complex_bin(x, trace.dt, t0, f_p)?;
        o[1] = complex_bin(x, trace.dt, t0, -f_n)?.conj();
    }
    Ok(PhasorSet {
        f_hz: (f_p + f_n) / 2.0,
        domain: Domain::Pn,
        v: out[0],
        i_source: neg2(out[1]),
        i_load: out[2],
    })
}

/// The two injections spanning a domain, in channel order.
pub fn injection_pair(domain: Domain) -> [InjectionKind; 2] {
    match domain {
        Domain::Dq => [InjectionKind::Dq1, InjectionKind::Dq2],
        Domain::Pn => [InjectionKind::Pn1, InjectionKind::Pn2],
    }
}

/// Snaps a requested grid onto the leakage-free 2.5 Hz lattice. The sequence
/// sweep skips points whose mirror lands on DC or the fundamental.
pub fn sweep_grid(grid: &FrequencyGrid, domain: Domain) -> Result<FrequencyGrid> {
    let f1 = grid.fundamental_hz();
    grid.snapped(GRID_STEP_HZ, |f| {
        domain == Domain::Pn && ((f - f1).abs() < 1e-9 || (f - 2.0 * f1).abs() < 1e-9)
    })
}

/// Runs one injection experiment and returns its phasors.
pub fn measure(cfg: &SimConfig, baseline: &Baseline, spec: InjectionSpec, window_s: f64) -> Result<PhasorSet> {
    let cfg = cfg.clone().with_injection(spec);
    let run = run_to_steady_state(&cfg, window_s, cfg.t_end)?;
    let n = (window_s / cfg.dt).round() as usize;
    let w = run.trace.slice(run.settle_index, n);
    let f1 = cfg.params.f_n;
    match spec.kind {
        InjectionKind::Dq1 | InjectionKind::Dq2 => abc_to_dq_phasors(&w, baseline, spec.f_inj, f1),
        InjectionKind::Pn1 | InjectionKind::Pn2 => abc_to_pn_phasors(&w, baseline, spec.f_inj + f1, spec.f_inj - f1),
    }
}

/// `Z = [V1 V2] [I1 I2]^-1` for source and load, with the larger condition
/// number of the two current matrices.
pub fn extract_matrix(a: &PhasorSet, b: &PhasorSet) -> Result<(Mat2, Mat2, f64)> {
    let v = Mat2::from_columns(a.v, b.v);
    let is = Mat2::from_columns(a.i_source, b.i_source);
    let il = Mat2::from_columns(a.i_load, b.i_load);
    let cond = is.condition_number().max(il.condition_number());
    if !(cond < COND_FAIL) {
        return Err(Error::IllConditioned { f_hz: a.f_hz, cond });
    }
    let zs = v * is.inverse().ok_or(Error::IllConditioned { f_hz: a.f_hz, cond })?;
    let zl = v * il.inverse().ok_or(Error::IllConditioned { f_hz: a.f_hz, cond })?;
    Ok((zs, zl, cond))
}

/// Scalar impedances `V_k / I_k` of channel `k` from its own injection.
pub fn extract_decoupled(ph: &PhasorSet, channel: usize, i_inj: f64) -> Result<(Complex64, Complex64)> {
    let floor = NOISE_FLOOR_REL * i_inj;
    let (is, il) = (ph.i_source[channel], ph.i_load[channel]);
    if is.norm() < floor || il.norm() < floor {
        return Err(Error::BelowNoiseFloor { f_hz: ph.f_hz });
    }
    Ok((ph.v[channel] / is, ph.v[channel] / il))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dec,
    Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractOptions {
    pub window_s: f64,
    pub amplitude_pu: f64,
    pub kinds: Vec<InjectionKind>,
    pub models: Vec<ModelKind>,
    /// Repeat this many points at twice the amplitude.
    pub linearity_points: usize,
}

impl ExtractOptions {
    pub fn new(domain: Domain) -> Self {
        ExtractOptions {
            window_s: DEFAULT_WINDOW_S,
            amplitude_pu: crate::timesim::DEFAULT_I_INJ_PU,
            kinds: injection_pair(domain).to_vec(),
            models: vec![ModelKind::Dec, ModelKind::Matrix],
            linearity_points: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearityDelta {
    pub f_hz: f64,
    pub kind: InjectionKind,
    /// Largest relative deviation of the doubled-amplitude phasors from twice
    /// the nominal ones.
    pub delta: f64,
}

#[derive(Clone, Debug)]
pub struct ExtractionResult {
    pub domain: Domain,
    pub grid: FrequencyGrid,
    pub z_source: Option<Tf2x2>,
    pub z_load: Option<Tf2x2>,
    /// Per channel, `None` where that channel's injection was not run.
    pub source_channels: [Option<Tf1x1>; 2],
    pub load_channels: [Option<Tf1x1>; 2],
    pub cond: Vec<f64>,
    pub flagged_hz: Vec<f64>,
    pub linearity: Vec<LinearityDelta>,
    pub phasors: Vec<PhasorSet>,
}

impl ExtractionResult {
    pub fn decoupled(&self) -> Option<DecoupledChannels> {
        match (&self.source_channels, &self.load_channels) {
            ([Some(s1), Some(s2)], [Some(l1), Some(l2)]) => Some(DecoupledChannels {
                source: (s1.clone(), s2.clone()),
                load: (l1.clone(), l2.clone()),
            }),
            _ => None,
        }
    }
}

fn stage_err(stage: &'static str, f_hz: f64, kind: InjectionKind) -> impl FnOnce(Error) -> Error {
    move |e| Error::Stage {
        stage,
        f_hz,
        injection: kind.name().to_string(),
        source: Box::new(e),
    }
}

/// Simulate, transform, project and solve at every point of `grid`.
pub fn pipeline(cfg: &SimConfig, grid: &FrequencyGrid, domain: Domain, opts: &ExtractOptions) -> Result<ExtractionResult> {
    cfg.validate()?;
    let pair = injection_pair(domain);
    if let Some(k) = opts.kinds.iter().find(|k| !pair.contains(k)) {
        return Err(Error::Usage(format!(
            "injection {} does not belong to the {} domain",
            k.name(),
            domain.name()
        )));
    }
    let has = |k: InjectionKind| opts.kinds.contains(&k);
    if opts.models.contains(&ModelKind::Matrix) && !(has(pair[0]) && has(pair[1])) {
        return Err(Error::Usage(format!(
            "the matrix model needs two independent injections ({} and {})",
            pair[0].name(),
            pair[1].name()
        )));
    }
    if opts.kinds.is_empty() {
        return Err(Error::Usage("no injection selected".into()));
    }
    let grid = sweep_grid(grid, domain)?;
    let hz = grid.hz();
    let baseline = Baseline::run(cfg).map_err(|e| Error::Stage {
        stage: "baseline",
        f_hz: 0.0,
        injection: "none".into(),
        source: Box::new(e),
    })?;

    let kinds: Vec<InjectionKind> = pair.iter().copied().filter(|k| has(*k)).collect();
    let jobs: Vec<(f64, InjectionKind)> = hz.iter().flat_map(|&f| kinds.iter().map(move |&k| (f, k))).collect();
    let spec = |f: f64, kind: InjectionKind, scale: f64| InjectionSpec {
        kind,
        f_inj: f,
        amplitude_pu: opts.amplitude_pu * scale,
    };
    let phasors: Vec<PhasorSet> = jobs
        .par_iter()
        .map(|&(f, k)| measure(cfg, &baseline, spec(f, k, 1.0), opts.window_s).map_err(stage_err("simulate", f, k)))
        .collect::<Result<_>>()?;

    let i_inj = opts.amplitude_pu * cfg.params.i_base();
    let nk = kinds.len();
    let mut src_ch: [Vec<Complex64>; 2] = Default::default();
    let mut load_ch: [Vec<Complex64>; 2] = Default::default();
    let mut zs = Vec::new();
    let mut zl = Vec::new();
    let mut cond = Vec::new();
    let mut flagged_hz = Vec::new();
    for (j, &f) in hz.iter().enumerate() {
        let row = &phasors[j * nk..(j + 1) * nk];
        for (ph, kind) in row.iter().zip(&kinds) {
            let c = pair.iter().position(|p| p == kind).unwrap_or(0);
            let (s, l) = extract_decoupled(ph, c, i_inj).map_err(stage_err("decoupled", f, *kind))?;
            src_ch[c].push(s);
            load_ch[c].push(l);
        }
        if nk == 2 {
            let (s, l, k) = extract_matrix(&row[0], &row[1]).map_err(stage_err("matrix", f, pair[0]))?;
            zs.push(s);
            zl.push(l);
            if k > COND_FLAG {
                flagged_hz.push(f);
            }
            cond.push(k);
        }
    }

    let lin_idx: Vec<usize> = match opts.linearity_points {
        0 => vec![],
        1 => vec![0],
        n => (0..n).map(|i| i * (hz.len() - 1) / (n - 1)).collect(),
    };
    let lin_jobs: Vec<(usize, InjectionKind)> = lin_idx
        .iter()
        .filter(|&&i| i < hz.len())
        .map(|&i| (i, kinds[0]))
        .collect();
    let linearity = lin_jobs
        .par_iter()
        .map(|&(i, k)| {
            let f = hz[i];
            let big = measure(cfg, &baseline, spec(f, k, 2.0), opts.window_s).map_err(stage_err("linearity", f, k))?;
            let small = &phasors[i * nk];
            let mut delta = 0.0f64;
            for (a, b) in [(big.v, small.v), (big.i_source, small.i_source), (big.i_load, small.i_load)] {
                let scale = b[0].norm().max(b[1].norm()) * 2.0;
                for c in 0..2 {
                    delta = delta.max((a[c] - b[c] * 2.0).norm() / scale);
                }
            }
            Ok(LinearityDelta { f_hz: f, kind: k, delta })
        })
        .collect::<Result<Vec<_>>>()?;

    let ch = domain.channels();
    let chan = |vals: &[Vec<Complex64>; 2], prefix: &str| -> Result<[Option<Tf1x1>; 2]> {
        let mut out: [Option<Tf1x1>; 2] = [None, None];
        for c in 0..2 {
            if vals[c].len() == hz.len() {
                out[c] = Some(Tf1x1::new(grid.clone(), vals[c].clone(), format!("{prefix}_{}", ch[c]))?);
            }
        }
        Ok(out)
    };
    let matrix = |v: Vec<Mat2>| -> Result<Option<Tf2x2>> {
        if nk == 2 {
            Ok(Some(Tf2x2::new(grid.clone(), v, domain, Role::Impedance)?))
        } else {
            Ok(None)
        }
    };
    Ok(ExtractionResult {
        domain,
        z_source: matrix(zs)?,
        z_load: matrix(zl)?,
        source_channels: chan(&src_ch, "zs")?,
        load_channels: chan(&load_ch, "zl")?,
        cond,
        flagged_hz,
        linearity,
        phasors,
        grid,
    })
}

/// Hex SHA-256 of the canonical JSON form of a configuration.
pub fn config_hash(cfg: &SimConfig) -> String {
    let json = serde_json::to_vec(cfg).unwrap_or_default();
    let digest = Sha256::digest(&json);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtractionManifest {
    pub config_hash: String,
    pub case: String,
    pub domain: String,
    pub grid_hz: Vec<f64>,
    pub injections: Vec<InjectionKind>,
    pub amplitude_pu: f64,
    pub amplitude_a: f64,
    pub window_s: f64,
    pub dt_s: f64,
    pub max_cond: f64,
    pub flagged_hz: Vec<f64>,
    pub linearity: Vec<LinearityDelta>,
}

impl ExtractionManifest {
    pub fn new(cfg: &SimConfig, opts: &ExtractOptions, res: &ExtractionResult) -> Self {
        ExtractionManifest {
            config_hash: config_hash(cfg),
            case: cfg.case.name().into(),
            domain: res.domain.name().into(),
            grid_hz: res.grid.hz(),
            injections: opts.kinds.clone(),
            amplitude_pu: opts.amplitude_pu,
            amplitude_a: opts.amplitude_pu * cfg.params.i_base(),
            window_s: opts.window_s,
            dt_s: cfg.dt,
            max_cond: res.cond.iter().copied().fold(0.0, f64::max),
            flagged_hz: res.flagged_hz.clone(),
            linearity: res.linearity.clone(),
        }
    }
}
