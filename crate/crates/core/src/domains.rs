//! dq <-> modified sequence domain transform and mirror-frequency structure.
//!
//! The modified sequence domain evaluates the positive channel at
//! `w_p = w_dq + w1` and the negative channel at `w_n = w_dq - w1`. With that
//! frequency mapping the two domains are related by the unitary similarity
//! `Z_pn = A Z_dq A^-1`, `A = (1/sqrt 2) [[1, j], [1, -j]]`, so eigenvalues
//! (and therefore Nyquist plots) are identical in both.
//!
//! A negative `w_n` is a negative-frequency phasor. Measured single-sided
//! spectra represent it by the conjugate response at `+|w_n|`; see
//! [`crate::extraction::abc_to_pn_phasors`].

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::freqresp::{fmt_num, FrequencyGrid, Mat2, Tf2x2, Domain, J, ONE};

/// Off-diagonal ratio at or below which a point is called mirror-frequency
/// decoupled.
pub const DEFAULT_MFD_THRESHOLD: f64 = 0.05;

/// The transform matrix `A_Z`, rows `(1, j)` and `(1, -j)` scaled by `1/sqrt 2`.
pub fn a_z() -> Mat2 {
    Mat2::new(ONE, J, ONE, -J).scale(std::f64::consts::FRAC_1_SQRT_2.into())
}

/// `A_Z^-1`, equal to its conjugate transpose.
pub fn a_z_inv() -> Mat2 {
    a_z().adjoint()
}

pub fn mat_dq_to_pn(m: &Mat2) -> Mat2 {
    a_z() * *m * a_z_inv()
}

pub fn mat_pn_to_dq(m: &Mat2) -> Mat2 {
    a_z_inv() * *m * a_z()
}

fn expect_domain(z: &Tf2x2, expected: Domain) -> Result<()> {
    if z.domain() != expected {
        return Err(Error::DomainMismatch {
            expected: expected.name(),
            found: z.domain().name(),
        });
    }
    Ok(())
}

/// Pointwise `A_Z Z A_Z^-1`. The grid is reused; each point is read as the dq
/// frequency of the `(w_p, w_n)` pair.
pub fn dq_to_pn(z: &Tf2x2) -> Result<Tf2x2> {
    expect_domain(z, Domain::Dq)?;
    z.with_values(
        z.values().iter().map(mat_dq_to_pn).collect(),
        Domain::Pn,
        z.role(),
    )
}

pub fn pn_to_dq(z: &Tf2x2) -> Result<Tf2x2> {
    expect_domain(z, Domain::Pn)?;
    z.with_values(
        z.values().iter().map(mat_pn_to_dq).collect(),
        Domain::Dq,
        z.role(),
    )
}

/// Converts to the requested domain, passing through when already there.
pub fn to_domain(z: &Tf2x2, domain: Domain) -> Result<Tf2x2> {
    match (z.domain(), domain) {
        (a, b) if a == b => Ok(z.clone()),
        (Domain::Dq, Domain::Pn) => dq_to_pn(z),
        _ => pn_to_dq(z),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SequenceFrequencyPair {
    pub omega_dq: f64,
    pub omega_p: f64,
    pub omega_n: f64,
}

/// Positive/negative sequence frequencies for every point of `grid`.
pub fn map_frequencies(grid: &FrequencyGrid) -> Vec<SequenceFrequencyPair> {
    let w1 = grid.fundamental();
    grid.points()
        .iter()
        .map(|&w| SequenceFrequencyPair {
            omega_dq: w,
            omega_p: w + w1,
            omega_n: w - w1,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MfdReport {
    pub f_hz: Vec<f64>,
    pub domain: Domain,
    pub threshold: f64,
    /// `max(|Z12|, |Z21|) / max(|Z11|, |Z22|)` in the input's domain.
    pub ratio: Vec<f64>,
    pub verdict: Vec<bool>,
    /// `|Z_dd - Z_qq|`, normalised by the larger dq diagonal magnitude.
    pub sym_residual_diag: Vec<f64>,
    /// `|Z_dq + Z_qd|`, normalised the same way.
    pub sym_residual_offdiag: Vec<f64>,
}

impl MfdReport {
    pub fn all_mfd(&self) -> bool {
        self.verdict.iter().all(|&v| v)
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratio.iter().copied().fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "f_hz,ratio,verdict,sym_residual_diag,sym_residual_offdiag")?;
        for k in 0..self.f_hz.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_num(self.f_hz[k]),
                fmt_num(self.ratio[k]),
                self.verdict[k],
                fmt_num(self.sym_residual_diag[k]),
                fmt_num(self.sym_residual_offdiag[k]),
            )?;
        }
        Ok(())
    }
}

fn off_diagonal_ratio(m: &Mat2) -> f64 {
    let diag = m.a11().norm().max(m.a22().norm());
    let off = m.a12().norm().max(m.a21().norm());
    if off == 0.0 {
        0.0
    } else if diag == 0.0 {
        f64::INFINITY
    } else {
        off / diag
    }
}

fn symmetry_residuals(dq: &Mat2) -> (f64, f64) {
    let scale = dq.a11().norm().max(dq.a22().norm());
    let rd = (dq.a11() - dq.a22()).norm();
    let ro = (dq.a12() + dq.a21()).norm();
    if scale == 0.0 {
        (rd, ro)
    } else {
        (rd / scale, ro / scale)
    }
}

/// Classifies each frequency as mirror-frequency decoupled when the
/// off-diagonal ratio is at most `threshold`.
///
/// The symmetry residuals are always evaluated on the dq form (pn inputs are
/// transformed first); an MFD system has `Z_dd = Z_qq` and `Z_dq = -Z_qd`.
pub fn mfd_classify(z: &Tf2x2, threshold: f64) -> Result<MfdReport> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "MFD threshold must be positive, got {threshold}"
        )));
    }
    let n = z.len();
    let mut report = MfdReport {
        f_hz: z.grid().hz(),
        domain: z.domain(),
        threshold,
        ratio: Vec::with_capacity(n),
        verdict: Vec::with_capacity(n),
        sym_residual_diag: Vec::with_capacity(n),
        sym_residual_offdiag: Vec::with_capacity(n),
    };
    for m in z.values() {
        let r = off_diagonal_ratio(m);
        let dq = match z.domain() {
            Domain::Dq => *m,
            Domain::Pn => mat_pn_to_dq(m),
        };
        let (rd, ro) = symmetry_residuals(&dq);
        report.ratio.push(r);
        report.verdict.push(r <= threshold);
        report.sym_residual_diag.push(rd);
        report.sym_residual_offdiag.push(ro);
    }
    Ok(report)
}

/// Complex rotation of the dq frame by a fixed angle, as a 2x2 real rotation.
pub fn frame_rotation(angle: f64) -> Mat2 {
    let (s, c) = angle.sin_cos();
    Mat2::from_re(c, -s, s, c)
}

/// Scalar helper: `[[a, b], [-b, a]]` maps to `diag(a - jb, a + jb)`.
pub fn mfd_pn_diagonal(a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    (a - J * b, a + J * b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freqresp::{make_grid, GridKind, Role};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid() -> FrequencyGrid {
        make_grid(1.0, 1000.0, 9, GridKind::Logarithmic, 50.0).unwrap()
    }

    #[test]
    fn a_z_convention_is_pinned() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a = a_z();
        assert_eq!(a.a11(), c(s, 0.0));
        assert_eq!(a.a12(), c(0.0, s));
        assert_eq!(a.a21(), c(s, 0.0));
        assert_eq!(a.a22(), c(0.0, -s));
        assert!((a * a.adjoint()).max_abs_diff(&Mat2::identity()) < 1e-15);
    }

    #[test]
    fn identity_maps_to_identity() {
        let z = Tf2x2::constant(&grid(), Mat2::identity(), Domain::Dq, Role::Impedance).unwrap();
        let pn = dq_to_pn(&z).unwrap();
        assert_eq!(pn.domain(), Domain::Pn);
        assert_eq!(pn.role(), Role::Impedance);
        for m in pn.values() {
            assert!(m.max_abs_diff(&Mat2::identity()) < 1e-15);
        }
        let back = pn_to_dq(&pn).unwrap();
        for m in back.values() {
            assert!(m.max_abs_diff(&Mat2::identity()) < 1e-15);
        }
    }

    #[test]
    fn mfd_structure_diagonalises() {
        let (a, b) = (c(0.3, -1.2), c(0.7, 0.25));
        let dq = Mat2::new(a, b, -b, a);
        let pn = mat_dq_to_pn(&dq);
        let (p, n) = mfd_pn_diagonal(a, b);
        assert!((pn.a11() - p).norm() < 1e-15);
        assert!((pn.a22() - n).norm() < 1e-15);
        assert!(pn.a12().norm() < 1e-15 && pn.a21().norm() < 1e-15);
        // and back
        let dq2 = mat_pn_to_dq(&Mat2::diag(p, n));
        assert!(dq2.max_abs_diff(&dq) < 1e-15);
    }

    #[test]
    fn rl_thevenin_maps_to_shifted_frequencies() {
        let (r, l, w1) = (0.1, 2e-3, 2.0 * PI * 50.0);
        let w = 2.0 * PI * 130.0;
        let s = c(0.0, w);
        let dq = Mat2::new(r + s * l, c(-w1 * l, 0.0), c(w1 * l, 0.0), r + s * l);
        let pn = mat_dq_to_pn(&dq);
        let zp = c(r, (w + w1) * l);
        let zn = c(r, (w - w1) * l);
        assert!((pn.a11() - zp).norm() < 1e-13);
        assert!((pn.a22() - zn).norm() < 1e-13);
        assert!(pn.a12().norm() < 1e-13);
    }

    #[test]
    fn wrong_domain_is_rejected() {
        let z = Tf2x2::constant(&grid(), Mat2::identity(), Domain::Pn, Role::Impedance).unwrap();
        assert!(matches!(dq_to_pn(&z), Err(Error::DomainMismatch { .. })));
        let z = Tf2x2::constant(&grid(), Mat2::identity(), Domain::Dq, Role::Impedance).unwrap();
        assert!(matches!(pn_to_dq(&z), Err(Error::DomainMismatch { .. })));
    }

    #[test]
    fn frequency_mapping() {
        let g = FrequencyGrid::from_hz(&[0.0 + 1e-12, 10.0, 100.0], 50.0).unwrap();
        let pairs = map_frequencies(&g);
        let tw = 2.0 * PI;
        assert_relative_eq!(pairs[2].omega_p, tw * 150.0, max_relative = 1e-14);
        assert_relative_eq!(pairs[2].omega_n, tw * 50.0, max_relative = 1e-14);
        assert_relative_eq!(pairs[1].omega_n, -tw * 40.0, max_relative = 1e-14);
        assert_relative_eq!(pairs[0].omega_p, tw * 50.0, max_relative = 1e-12);
        assert_relative_eq!(pairs[0].omega_n, -tw * 50.0, max_relative = 1e-12);
        for p in &pairs {
            assert_eq!(p.omega_p, p.omega_dq + g.fundamental());
            assert_eq!(p.omega_n, p.omega_dq - g.fundamental());
        }
    }

    #[test]
    fn classify_examples() {
        let g = grid();
        let diag = Tf2x2::constant(&g, Mat2::diag(c(1.0, 1.0), c(2.0, 0.0)), Domain::Pn, Role::Impedance).unwrap();
        let rep = mfd_classify(&diag, 0.01).unwrap();
        assert!(rep.all_mfd());
        assert_eq!(rep.max_ratio(), 0.0);

        let coupled = Tf2x2::constant(&g, Mat2::from_re(1.0, 0.5, 0.5, 1.0), Domain::Pn, Role::Impedance).unwrap();
        let rep = mfd_classify(&coupled, 0.1).unwrap();
        assert!(!rep.verdict.iter().any(|&v| v));
        assert_relative_eq!(rep.ratio[0], 0.5);

        assert!(mfd_classify(&coupled, 0.0).is_err());
    }

    #[test]
    fn classify_reports_dq_symmetry() {
        let g = grid();
        let (a, b) = (c(2.0, 1.0), c(0.4, 0.0));
        let sym = Tf2x2::constant(&g, Mat2::new(a, b, -b, a), Domain::Dq, Role::Impedance).unwrap();
        let rep = mfd_classify(&sym, DEFAULT_MFD_THRESHOLD).unwrap();
        assert!(rep.sym_residual_diag.iter().all(|&r| r == 0.0));
        assert!(rep.sym_residual_offdiag.iter().all(|&r| r == 0.0));
        // dq off-diagonals are not small even though the system is MFD
        assert!(!rep.all_mfd());
        let rep_pn = mfd_classify(&dq_to_pn(&sym).unwrap(), DEFAULT_MFD_THRESHOLD).unwrap();
        assert!(rep_pn.all_mfd());

        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("f_hz,ratio,verdict,sym_residual_diag,sym_residual_offdiag\n"));
        assert!(text.lines().nth(1).unwrap().contains(",false,"));
    }
}
