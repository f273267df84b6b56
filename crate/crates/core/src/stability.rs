//! Minor-loop gains, eigenvalue loci, the decoupling norm and Nyquist verdicts.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::freqresp::{fmt_num, invert, matmul, Domain, FrequencyGrid, Mat2, Role, Tf1x1, Tf2x2, ZERO};
use crate::params::SystemParams;

pub const DEFAULT_EPS_THRESHOLD: f64 = 0.1;
pub const DEFAULT_TOL_MARGIN: f64 = 0.02;
pub const OPEN_LOOP_NOTE: &str = "assumes open-loop stable";

/// `L = Z_S Y_L`.
pub fn minor_loop(zs: &Tf2x2, yl: &Tf2x2) -> Result<Tf2x2> {
    if zs.role() != Role::Impedance || yl.role() != Role::Admittance {
        return Err(Error::InvalidParameter(format!(
            "minor loop needs impedance times admittance, got {} times {}",
            zs.role().name(),
            yl.role().name()
        )));
    }
    matmul(zs, yl)
}

/// `diag(Z_1^S Y_1^L, Z_2^S Y_2^L)` from scalar channels.
pub fn minor_loop_decoupled(
    zs: (&Tf1x1, &Tf1x1),
    yl: (&Tf1x1, &Tf1x1),
    domain: Domain,
) -> Result<Tf2x2> {
    let grid = zs.0.grid();
    for g in [zs.1.grid(), yl.0.grid(), yl.1.grid()] {
        if !grid.same_as(g) {
            return Err(Error::GridMismatch);
        }
    }
    let values = (0..grid.len())
        .map(|k| {
            Mat2::diag(
                zs.0.values()[k] * yl.0.values()[k],
                zs.1.values()[k] * yl.1.values()[k],
            )
        })
        .collect();
    Tf2x2::new(grid.clone(), values, domain, Role::MinorLoop)
}

/// Drops the off-diagonal entries; the diagonal is copied bit for bit.
pub fn semidecouple(l: &Tf2x2) -> Result<Tf2x2> {
    if l.role() != Role::MinorLoop {
        return Err(Error::InvalidParameter("semidecouple needs a minor-loop gain".into()));
    }
    l.map(Mat2::diagonal)
}

/// Scalar impedances seen by a single shunt injection in each channel.
#[derive(Clone, Debug)]
pub struct DecoupledChannels {
    pub source: (Tf1x1, Tf1x1),
    pub load: (Tf1x1, Tf1x1),
}

impl DecoupledChannels {
    pub fn load_admittance(&self) -> Result<(Tf1x1, Tf1x1)> {
        let inv = |z: &Tf1x1| {
            let hz = z.grid().hz();
            let vals = z
                .values()
                .iter()
                .zip(&hz)
                .map(|(v, &f_hz)| {
                    if v.norm() == 0.0 {
                        Err(Error::Singular { f_hz, det: 0.0 })
                    } else {
                        Ok(v.inv())
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Tf1x1::new(z.grid().clone(), vals, format!("y_{}", z.label()))
        };
        Ok((inv(&self.load.0)?, inv(&self.load.1)?))
    }
}

/// Emulates a unit shunt injection `e_k` at the interface:
/// `V = (Y_S + Y_L)^-1 e_k`, then `Z_k = V_k / I_k` per subsystem.
pub fn decoupled_channels(zs: &Tf2x2, zl: &Tf2x2) -> Result<DecoupledChannels> {
    if zs.domain() != zl.domain() {
        return Err(Error::DomainMismatch {
            expected: zs.domain().name(),
            found: zl.domain().name(),
        });
    }
    if !zs.grid().same_as(zl.grid()) {
        return Err(Error::GridMismatch);
    }
    let ys = invert(zs)?;
    let yl = invert(zl)?;
    let hz = zs.grid().hz();
    let ch = zs.domain().channels();
    let mut out: [[Vec<Complex64>; 2]; 2] = Default::default();
    for k in 0..zs.len() {
        let ys = ys.values()[k];
        let yl = yl.values()[k];
        let total = (ys + yl).inverse().ok_or(Error::Singular {
            f_hz: hz[k],
            det: (ys + yl).det().norm(),
        })?;
        for c in 0..2 {
            let mut e = [ZERO; 2];
            e[c] = 1.0.into();
            let v = total.mul_vec(e);
            let is = ys.mul_vec(v);
            let il = yl.mul_vec(v);
            out[0][c].push(v[c] / is[c]);
            out[1][c].push(v[c] / il[c]);
        }
    }
    let grid = zs.grid();
    let [[s1, s2], [l1, l2]] = out;
    Ok(DecoupledChannels {
        source: (
            Tf1x1::new(grid.clone(), s1, format!("zs_{}", ch[0]))?,
            Tf1x1::new(grid.clone(), s2, format!("zs_{}", ch[1]))?,
        ),
        load: (
            Tf1x1::new(grid.clone(), l1, format!("zl_{}", ch[0]))?,
            Tf1x1::new(grid.clone(), l2, format!("zl_{}", ch[1]))?,
        ),
    })
}

/// Exact, semi-decoupled and decoupled minor loops in one domain.
#[derive(Clone, Debug)]
pub struct MinorLoopSet {
    pub domain: Domain,
    pub exact: Tf2x2,
    pub semidec: Tf2x2,
    pub dec: Tf2x2,
}

impl MinorLoopSet {
    /// Decoupled channels are emulated from the matrices.
    pub fn from_impedances(zs: &Tf2x2, zl: &Tf2x2) -> Result<Self> {
        let ch = decoupled_channels(zs, zl)?;
        Self::with_channels(zs, zl, &ch)
    }

    /// Decoupled loop from separately identified channels.
    pub fn with_channels(zs: &Tf2x2, zl: &Tf2x2, ch: &DecoupledChannels) -> Result<Self> {
        let exact = minor_loop(zs, &invert(zl)?)?;
        let semidec = semidecouple(&exact)?;
        let yl = ch.load_admittance()?;
        let dec = minor_loop_decoupled((&ch.source.0, &ch.source.1), (&yl.0, &yl.1), zs.domain())?;
        Ok(MinorLoopSet {
            domain: zs.domain(),
            exact,
            semidec,
            dec,
        })
    }
}

/// Eigenvalues of `[[a, b], [c, d]]` as `(a + d +- sqrt((a - d)^2 + 4 b c)) / 2`.
pub fn eig2_closed_form(m: &Mat2) -> [Complex64; 2] {
    let (a, b, c, d) = (m.a11(), m.a12(), m.a21(), m.a22());
    let half_tr = (a + d) * 0.5;
    let r = ((a - d) * (a - d) + b * c * 4.0).sqrt() * 0.5;
    [half_tr + r, half_tr - r]
}

/// Eigenvalues through a complex Schur decomposition.
pub fn eig2_numeric(m: &Mat2) -> Option<[Complex64; 2]> {
    let a = Matrix2::new(m.a11(), m.a12(), m.a21(), m.a22());
    let ev = a.schur().eigenvalues()?;
    Some([ev[0], ev[1]])
}

/// Distance between two unordered pairs under the better matching.
pub fn pair_distance(x: [Complex64; 2], y: [Complex64; 2]) -> f64 {
    let straight = (x[0] - y[0]).norm().max((x[1] - y[1]).norm());
    let crossed = (x[0] - y[1]).norm().max((x[1] - y[0]).norm());
    straight.min(crossed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenLoci {
    pub grid: FrequencyGrid,
    pub l1: Vec<Complex64>,
    pub l2: Vec<Complex64>,
    /// `true` where the solver's order was swapped to keep branches continuous.
    pub swapped: Vec<bool>,
}

impl EigenLoci {
    /// Orders raw eigenvalue pairs so that each branch moves as little as
    /// possible between neighbouring frequencies.
    pub fn from_pairs(grid: &FrequencyGrid, raw: Vec<[Complex64; 2]>) -> Self {
        let mut l1: Vec<Complex64> = Vec::with_capacity(raw.len());
        let mut l2: Vec<Complex64> = Vec::with_capacity(raw.len());
        let mut swapped = Vec::with_capacity(raw.len());
        for (k, [x, y]) in raw.into_iter().enumerate() {
            let swap = k > 0 && {
                let (p, q) = (l1[k - 1], l2[k - 1]);
                (x - q).norm() + (y - p).norm() < (x - p).norm() + (y - q).norm()
            };
            let (u, v) = if swap { (y, x) } else { (x, y) };
            l1.push(u);
            l2.push(v);
            swapped.push(swap);
        }
        EigenLoci {
            grid: grid.clone(),
            l1,
            l2,
            swapped,
        }
    }

    pub fn len(&self) -> usize {
        self.l1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l1.is_empty()
    }

    pub fn pair(&self, k: usize) -> [Complex64; 2] {
        [self.l1[k], self.l2[k]]
    }

    /// Smallest distance of either branch to `-1`.
    pub fn min_distance_to_critical(&self) -> f64 {
        self.l1
            .iter()
            .chain(&self.l2)
            .map(|l| (l + 1.0).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest pairwise distance to another loci set on the same grid.
    pub fn max_distance(&self, other: &EigenLoci) -> f64 {
        (0..self.len())
            .map(|k| pair_distance(self.pair(k), other.pair(k)))
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "f_hz,re_l1,im_l1,re_l2,im_l2")?;
        for (k, f) in self.grid.hz().iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_num(*f),
                fmt_num(self.l1[k].re),
                fmt_num(self.l1[k].im),
                fmt_num(self.l2[k].re),
                fmt_num(self.l2[k].im)
            )?;
        }
        Ok(())
    }
}

fn check_minor_loop(l: &Tf2x2) -> Result<()> {
    if l.role() != Role::MinorLoop {
        return Err(Error::InvalidParameter(format!(
            "expected a minor-loop gain, got {}",
            l.role().name()
        )));
    }
    Ok(())
}

pub fn eig_loci_closed_form(l: &Tf2x2) -> Result<EigenLoci> {
    check_minor_loop(l)?;
    let raw = l.values().iter().map(eig2_closed_form).collect();
    Ok(EigenLoci::from_pairs(l.grid(), raw))
}

pub fn eig_loci_numeric(l: &Tf2x2) -> Result<EigenLoci> {
    check_minor_loop(l)?;
    let hz = l.grid().hz();
    let raw = l
        .values()
        .iter()
        .zip(&hz)
        .map(|(m, &f)| {
            eig2_numeric(m).ok_or_else(|| {
                Error::InvalidParameter(format!("eigensolver did not converge at {f} Hz"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EigenLoci::from_pairs(l.grid(), raw))
}

/// Distance from `L11` to the nearer exact eigenvalue.
///
/// Evaluated as `-2 b c / (D + r)` with `D = a - d` and `r = +-sqrt(D^2 + 4bc)`
/// signed to maximise `|D + r|`. This is the small root of
/// `e^2 - D e - b c = 0`, exactly zero when `b c = 0`, and the exact
/// eigenvalues are `a - e` and `d + e`.
pub fn epsilon_at(m: &Mat2) -> Complex64 {
    let (a, b, c, d) = (m.a11(), m.a12(), m.a21(), m.a22());
    let bc = b * c;
    if bc == ZERO {
        return ZERO;
    }
    let delta = a - d;
    let mut r = (delta * delta + bc * 4.0).sqrt();
    if (delta - r).norm() > (delta + r).norm() {
        r = -r;
    }
    -bc * 2.0 / (delta + r)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonNorm {
    pub grid: FrequencyGrid,
    pub eps: Vec<Complex64>,
    pub domain: Domain,
    pub threshold: f64,
    /// Frequencies (Hz) where `|eps|` exceeds the threshold.
    pub violations: Vec<f64>,
}

impl EpsilonNorm {
    pub fn abs(&self) -> Vec<f64> {
        self.eps.iter().map(|e| e.norm()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.eps.iter().map(|e| e.norm()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "f_hz,re_eps,im_eps,abs_eps,violated")?;
        for (k, f) in self.grid.hz().iter().enumerate() {
            let e = self.eps[k];
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_num(*f),
                fmt_num(e.re),
                fmt_num(e.im),
                fmt_num(e.norm()),
                e.norm() > self.threshold
            )?;
        }
        Ok(())
    }
}

pub fn epsilon_norm(l: &Tf2x2, threshold: f64) -> Result<EpsilonNorm> {
    check_minor_loop(l)?;
    let eps: Vec<Complex64> = l.values().iter().map(epsilon_at).collect();
    let violations = l
        .grid()
        .hz()
        .into_iter()
        .zip(&eps)
        .filter(|(_, e)| e.norm() > threshold)
        .map(|(f, _)| f)
        .collect();
    Ok(EpsilonNorm {
        grid: l.grid().clone(),
        eps,
        domain: l.domain(),
        threshold,
        violations,
    })
}

/// `(w1 L_th)^2 < R_th^2 + (w L_th)^2` per grid point.
pub fn diagonal_dominance(p: &SystemParams, grid: &FrequencyGrid) -> Vec<bool> {
    let (r, l, w1) = (p.r_th(), p.l_th(), p.w1());
    grid.points()
        .iter()
        .map(|&w| (w1 * l).powi(2) < r * r + (w * l).powi(2))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    /// Append the mirrored negative-frequency half, `conj` of each branch.
    ConjugateSymmetric,
    /// Treat the samples as an already closed curve.
    None,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NyquistOptions {
    pub closure: Closure,
    pub tol_margin: f64,
}

impl Default for NyquistOptions {
    fn default() -> Self {
        NyquistOptions {
            closure: Closure::ConjugateSymmetric,
            tol_margin: DEFAULT_TOL_MARGIN,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NyquistVerdict {
    /// Counter-clockwise encirclements of `-1` per branch.
    pub encirclements: [i64; 2],
    pub total: i64,
    pub min_distance: f64,
    pub marginal: bool,
    /// `None` when marginal.
    pub stable: Option<bool>,
    pub note: &'static str,
}

impl NyquistVerdict {
    pub fn label(&self) -> &'static str {
        match self.stable {
            Some(true) => "stable",
            Some(false) => "unstable",
            None => "marginal",
        }
    }
}

/// Accumulated angle of `z + 1` along a closed polygon, in turns.
pub fn winding_turns(points: &[Complex64]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for k in 0..points.len() {
        let a = points[k] + 1.0;
        let b = points[(k + 1) % points.len()] + 1.0;
        total += (b / a).arg();
    }
    total / (2.0 * PI)
}

fn closed_branch(branch: &[Complex64], closure: Closure) -> Vec<Complex64> {
    match closure {
        Closure::None => branch.to_vec(),
        Closure::ConjugateSymmetric => branch
            .iter()
            .rev()
            .map(|z| z.conj())
            .chain(branch.iter().copied())
            .collect(),
    }
}

pub fn nyquist_verdict(loci: &EigenLoci, opts: NyquistOptions) -> NyquistVerdict {
    let t1 = winding_turns(&closed_branch(&loci.l1, opts.closure));
    let t2 = winding_turns(&closed_branch(&loci.l2, opts.closure));
    let min_distance = loci.min_distance_to_critical();
    let total = (t1 + t2).round() as i64;
    let marginal = min_distance < opts.tol_margin;
    NyquistVerdict {
        encirclements: [t1.round() as i64, t2.round() as i64],
        total,
        min_distance,
        marginal,
        stable: if marginal { None } else { Some(total == 0) },
        note: OPEN_LOOP_NOTE,
    }
}

/// Encirclements of the origin by `det(I + L)` over the closed contour.
pub fn det_winding(l: &Tf2x2, closure: Closure) -> i64 {
    let d: Vec<Complex64> = l
        .values()
        .iter()
        .map(|m| (Mat2::identity() + *m).det() - 1.0)
        .collect();
    winding_turns(&closed_branch(&d, closure)).round() as i64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::dq_to_pn;
    use crate::freqresp::{make_grid, GridKind, ONE, J};
    use crate::models::analytic_models;
    use crate::params::Units;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid(n: usize) -> FrequencyGrid {
        make_grid(1.0, 1000.0, n, GridKind::Logarithmic, 50.0).unwrap()
    }

    fn ml(g: &FrequencyGrid, m: Mat2) -> Tf2x2 {
        Tf2x2::constant(g, m, Domain::Dq, Role::MinorLoop).unwrap()
    }

    #[test]
    fn minor_loop_examples() {
        let g = grid(4);
        let zs = Tf2x2::constant(&g, Mat2::identity(), Domain::Dq, Role::Impedance).unwrap();
        let yl = Tf2x2::constant(&g, Mat2::identity(), Domain::Dq, Role::Admittance).unwrap();
        let l = minor_loop(&zs, &yl).unwrap();
        assert_eq!(l.role(), Role::MinorLoop);
        assert_eq!(l.values()[0], Mat2::identity());

        let zs = Tf2x2::constant(&g, Mat2::diag(c(2.0, 0.0), c(0.0, 1.0)), Domain::Dq, Role::Impedance).unwrap();
        let yl = Tf2x2::constant(&g, Mat2::diag(c(0.25, 0.0), c(3.0, 0.0)), Domain::Dq, Role::Admittance).unwrap();
        let l = minor_loop(&zs, &yl).unwrap().values()[0];
        assert_eq!(l, Mat2::diag(c(0.5, 0.0), c(0.0, 3.0)));

        let a = Mat2::new(c(0.1, 0.2), c(-0.3, 0.4), c(0.5, -0.6), c(0.7, 0.8));
        let b = Mat2::new(c(-0.9, 0.1), c(0.2, 0.3), c(0.4, -0.5), c(0.6, 0.7));
        let zs = Tf2x2::constant(&g, a, Domain::Dq, Role::Impedance).unwrap();
        let yl = Tf2x2::constant(&g, b, Domain::Dq, Role::Admittance).unwrap();
        let l = minor_loop(&zs, &yl).unwrap().values()[0];
        let l11 = a.a11() * b.a11() + a.a12() * b.a21();
        assert!((l.a11() - l11).norm() < 1e-15);

        assert!(minor_loop(&yl, &zs).is_err());
    }

    #[test]
    fn decoupled_loop_examples() {
        let g = grid(3);
        let s = |v: f64, name: &str| Tf1x1::new(g.clone(), vec![v.into(); 3], name).unwrap();
        let l = minor_loop_decoupled((&s(2.0, "d"), &s(1.0, "q")), (&s(0.25, "d"), &s(3.0, "q")), Domain::Dq).unwrap();
        for m in l.values() {
            assert_eq!(m.a11(), c(0.5, 0.0));
            assert_eq!(m.a12(), ZERO);
            assert_eq!(m.a21(), ZERO);
        }
        let other = make_grid(1.0, 100.0, 3, GridKind::Logarithmic, 50.0).unwrap();
        let bad = Tf1x1::new(other, vec![ONE; 3], "x").unwrap();
        assert!(matches!(
            minor_loop_decoupled((&s(2.0, "d"), &bad), (&s(0.25, "d"), &s(3.0, "q")), Domain::Dq),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn semidecouple_examples() {
        let g = grid(3);
        let m = Mat2::new(c(1.0, 2.0), c(3.0, 4.0), c(5.0, 6.0), c(7.0, 8.0));
        let s = semidecouple(&ml(&g, m)).unwrap();
        assert_eq!(s.values()[0], Mat2::diag(m.a11(), m.a22()));
        let again = semidecouple(&s).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn eigen_examples() {
        let ev = eig2_closed_form(&Mat2::from_re(0.0, 1.0, 1.0, 0.0));
        assert!(pair_distance(ev, [ONE, -ONE]) < 1e-15);
        let d = Mat2::diag(c(1.0, -2.0), c(0.5, 0.5));
        let ev = eig2_closed_form(&d);
        assert!(pair_distance(ev, [d.a11(), d.a22()]) < 1e-15);
        let ev = eig2_numeric(&Mat2::from_re(0.0, 1.0, 1.0, 0.0)).unwrap();
        assert!(pair_distance(ev, [ONE, -ONE]) < 1e-12);
        // the printed minus sign would give +-j here
        let bad = [(ONE * 0.0) + J, -J];
        assert!(pair_distance(eig2_closed_form(&Mat2::from_re(0.0, 1.0, 1.0, 0.0)), bad) > 1.0);
    }

    #[test]
    fn continuity_pairing_follows_crossing_branches() {
        let g = make_grid(1.0, 2.0, 5, GridKind::Linear, 50.0).unwrap();
        let t = [-2.0, -1.0, 0.0, 1.0, 2.0];
        // two straight lines crossing near t = 0, handed out in sorted order
        let raw: Vec<_> = t
            .iter()
            .map(|&x| {
                let a = c(x, 0.1);
                let b = c(-x, -0.1);
                if a.re >= b.re { [a, b] } else { [b, a] }
            })
            .collect();
        let loci = EigenLoci::from_pairs(&g, raw);
        for (k, &x) in t.iter().enumerate() {
            assert_eq!(loci.l1[k], c(-x, -0.1));
            assert_eq!(loci.l2[k], c(x, 0.1));
        }
        assert!(loci.swapped.iter().any(|&s| s));
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon_at(&Mat2::diag(c(1.0, 1.0), c(-3.0, 0.2))), ZERO);
        for x in [0.01, 0.3, 2.0] {
            let e = epsilon_at(&Mat2::from_re(1.0, x, x, 1.0));
            assert_relative_eq!(e.norm(), x, max_relative = 1e-14);
            assert_relative_eq!(e.re, -x, max_relative = 1e-14);
        }
        let m = Mat2::new(c(0.4, -0.2), c(0.05, 0.01), c(-0.02, 0.03), c(1.1, 0.6));
        let e = epsilon_at(&m);
        let recon = [m.a11() - e, m.a22() + e];
        assert!(pair_distance(recon, eig2_closed_form(&m)) < 1e-15);
        assert!((m.a11() - e - m.a11()).norm() < (m.a11() - (m.a22() + e)).norm());
    }

    #[test]
    fn epsilon_norm_reports_violations() {
        let g = grid(3);
        let n = epsilon_norm(&ml(&g, Mat2::from_re(1.0, 0.2, 0.2, 1.0)), DEFAULT_EPS_THRESHOLD).unwrap();
        assert_eq!(n.violations.len(), 3);
        let mut buf = Vec::new();
        n.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("f_hz,re_eps,im_eps,abs_eps,violated\n"));
        assert!(text.lines().nth(1).unwrap().ends_with(",true"));
    }

    #[test]
    fn dominance_examples() {
        let g = FrequencyGrid::from_hz(&[1e-6, 10.0, 50.0, 2000.0], 50.0).unwrap();
        let p = SystemParams::case_study();
        let dd = diagonal_dominance(&p, &g);
        assert_eq!(dd, vec![false, false, true, true]);
        assert!(diagonal_dominance(&p.with_xr(0.1), &g).iter().all(|&b| b));
    }

    fn circle(center: Complex64, radius: f64, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|k| center + Complex64::from_polar(radius, 2.0 * PI * k as f64 / n as f64))
            .collect()
    }

    fn loci_of(branch: Vec<Complex64>) -> EigenLoci {
        let n = branch.len();
        let pts: Vec<f64> = (1..=n).map(|k| k as f64).collect();
        let g = FrequencyGrid::from_hz(&pts, 50.0).unwrap();
        EigenLoci {
            grid: g,
            l2: vec![c(0.0, 0.0); n],
            l1: branch,
            swapped: vec![false; n],
        }
    }

    #[test]
    fn nyquist_examples() {
        let opts = NyquistOptions {
            closure: Closure::None,
            tol_margin: DEFAULT_TOL_MARGIN,
        };
        let v = nyquist_verdict(&loci_of(circle(ZERO, 0.5, 200)), opts);
        assert_eq!(v.total, 0);
        assert_eq!(v.stable, Some(true));
        let v = nyquist_verdict(&loci_of(circle(-ONE, 2.0, 200)), opts);
        assert_eq!(v.encirclements, [1, 0]);
        assert_eq!(v.stable, Some(false));
        let v = nyquist_verdict(&loci_of(circle(ZERO, 1.01, 200)), opts);
        assert!(v.marginal && v.stable.is_none());
        assert_eq!(v.note, OPEN_LOOP_NOTE);
    }

    #[test]
    fn case_study_verdict_matches_determinant_route() {
        let p = SystemParams::case_study();
        let g = make_grid(0.01, 20000.0, 4000, GridKind::Logarithmic, 50.0).unwrap();
        let m = analytic_models(&p, &g, true, Units::PerUnit).unwrap();
        let l = minor_loop(&m.source, &invert(&m.load).unwrap()).unwrap();
        let v = nyquist_verdict(&eig_loci_closed_form(&l).unwrap(), NyquistOptions::default());
        assert_eq!(v.total, det_winding(&l, Closure::ConjugateSymmetric));
        assert_eq!(v.stable, Some(true));

        let mut weak = p;
        weak.z_th = weak.z_th * 2.0;
        let m = analytic_models(&weak, &g, true, Units::PerUnit).unwrap();
        let l = minor_loop(&m.source, &invert(&m.load).unwrap()).unwrap();
        let v = nyquist_verdict(&eig_loci_closed_form(&l).unwrap(), NyquistOptions::default());
        assert_eq!(v.total, det_winding(&l, Closure::ConjugateSymmetric));
        assert_eq!(v.stable, Some(false));
    }

    #[test]
    fn decoupled_channels_equal_diagonal_for_mfd_pn() {
        let p = SystemParams::case_study();
        let g = grid(30);
        let m = analytic_models(&p, &g, false, Units::PerUnit).unwrap();
        let zs = dq_to_pn(&m.source).unwrap();
        let zl = dq_to_pn(&m.load).unwrap();
        let set = MinorLoopSet::from_impedances(&zs, &zl).unwrap();
        for k in 0..g.len() {
            let ex = set.exact.values()[k];
            let de = set.dec.values()[k];
            let scale = ex.max_abs();
            assert!((ex.a11() - de.a11()).norm() < 1e-9 * scale);
            assert!((ex.a22() - de.a22()).norm() < 1e-9 * scale);
        }
    }
}
