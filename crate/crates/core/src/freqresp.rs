//! Frequency-response containers and the 2x2 complex matrix algebra shared by
//! the rest of the crate.
//!
//! A [`Tf2x2`] is a 2x2 complex matrix sampled on a [`FrequencyGrid`] and
//! tagged with the domain it lives in (dq or modified sequence) and the role it
//! plays (impedance, admittance, minor-loop gain). Tags are fixed at
//! construction; operations produce new values and never mutate their inputs.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::ops::{Add, Mul, Sub};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const J: Complex64 = Complex64::new(0.0, 1.0);

/// |det| below this fraction of (max |entry|)^2 counts as singular.
pub const SINGULAR_RTOL: f64 = 1e-12;

/// Dense 2x2 complex matrix, row major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2 {
    pub m: [[Complex64; 2]; 2],
}

impl Mat2 {
    pub const fn new(a11: Complex64, a12: Complex64, a21: Complex64, a22: Complex64) -> Self {
        Mat2 {
            m: [[a11, a12], [a21, a22]],
        }
    }

    pub fn from_re(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2::new(a11.into(), a12.into(), a21.into(), a22.into())
    }

    pub const fn identity() -> Self {
        Mat2::new(ONE, ZERO, ZERO, ONE)
    }

    pub const fn zero() -> Self {
        Mat2::new(ZERO, ZERO, ZERO, ZERO)
    }

    pub const fn diag(a: Complex64, b: Complex64) -> Self {
        Mat2::new(a, ZERO, ZERO, b)
    }

    /// Rotation generator `[[0, -1], [1, 0]]`.
    pub const fn rot90() -> Self {
        Mat2::new(ZERO, Complex64::new(-1.0, 0.0), ONE, ZERO)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.m[row][col]
    }

    #[inline]
    pub fn a11(&self) -> Complex64 {
        self.m[0][0]
    }
    #[inline]
    pub fn a12(&self) -> Complex64 {
        self.m[0][1]
    }
    #[inline]
    pub fn a21(&self) -> Complex64 {
        self.m[1][0]
    }
    #[inline]
    pub fn a22(&self) -> Complex64 {
        self.m[1][1]
    }

    pub fn det(&self) -> Complex64 {
        self.a11() * self.a22() - self.a12() * self.a21()
    }

    pub fn trace(&self) -> Complex64 {
        self.a11() + self.a22()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn entries(&self) -> [Complex64; 4] {
        [self.a11(), self.a12(), self.a21(), self.a22()]
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn is_singular(&self) -> bool {
        let scale = self.max_abs();
        self.det().norm() < SINGULAR_RTOL * scale * scale || scale == 0.0
    }

    /// Inverse, or `None` when the matrix is singular by [`SINGULAR_RTOL`].
    pub fn inverse(&self) -> Option<Mat2> {
        if self.is_singular() {
            return None;
        }
        let d = self.det();
        Some(Mat2::new(
            self.a22() / d,
            -self.a12() / d,
            -self.a21() / d,
            self.a11() / d,
        ))
    }

    pub fn adjoint(&self) -> Mat2 {
        Mat2::new(
            self.a11().conj(),
            self.a21().conj(),
            self.a12().conj(),
            self.a22().conj(),
        )
    }

    pub fn conj(&self) -> Mat2 {
        Mat2::new(
            self.a11().conj(),
            self.a12().conj(),
            self.a21().conj(),
            self.a22().conj(),
        )
    }

    pub fn scale(&self, k: Complex64) -> Mat2 {
        Mat2::new(self.a11() * k, self.a12() * k, self.a21() * k, self.a22() * k)
    }

    pub fn diagonal(&self) -> Mat2 {
        Mat2::diag(self.a11(), self.a22())
    }

    pub fn mul_vec(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        [
            self.a11() * v[0] + self.a12() * v[1],
            self.a21() * v[0] + self.a22() * v[1],
        ]
    }

    /// Maximum entrywise distance.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        (*self - *other).max_abs()
    }

    /// Matrix built from two column vectors.
    pub fn from_columns(c1: [Complex64; 2], c2: [Complex64; 2]) -> Mat2 {
        Mat2::new(c1[0], c2[0], c1[1], c2[1])
    }

    /// 2-norm condition number from the singular values.
    pub fn condition_number(&self) -> f64 {
        // singular values of a 2x2: s1^2 + s2^2 = ||A||_F^2, s1 s2 = |det|
        let fro2: f64 = self.entries().iter().map(|z| z.norm_sqr()).sum();
        let det = self.det().norm();
        let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
        let s1 = ((fro2 + disc) / 2.0).sqrt();
        let s2_sq = (fro2 - disc) / 2.0;
        if det == 0.0 || s2_sq <= 0.0 {
            return f64::INFINITY;
        }
        // s2 = det / s1 is better conditioned than sqrt(s2_sq)
        s1 / (det / s1)
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        Mat2::new(
            self.a11() + rhs.a11(),
            self.a12() + rhs.a12(),
            self.a21() + rhs.a21(),
            self.a22() + rhs.a22(),
        )
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        Mat2::new(
            self.a11() - rhs.a11(),
            self.a12() - rhs.a12(),
            self.a21() - rhs.a21(),
            self.a22() - rhs.a22(),
        )
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, b: Mat2) -> Mat2 {
        let a = self;
        Mat2::new(
            a.a11() * b.a11() + a.a12() * b.a21(),
            a.a11() * b.a12() + a.a12() * b.a22(),
            a.a21() * b.a11() + a.a22() * b.a21(),
            a.a21() * b.a12() + a.a22() * b.a22(),
        )
    }
}

impl Mul<Complex64> for Mat2 {
    type Output = Mat2;
    fn mul(self, k: Complex64) -> Mat2 {
        self.scale(k)
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, k: f64) -> Mat2 {
        self.scale(k.into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Linear,
    Logarithmic,
    Explicit,
}

/// Ordered analysis frequencies in rad/s plus the fundamental they refer to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    points: Vec<f64>,
    kind: GridKind,
    fundamental: f64,
}

impl FrequencyGrid {
    /// Builds a grid from angular frequencies (rad/s).
    pub fn new(points: Vec<f64>, kind: GridKind, fundamental: f64) -> Result<Self> {
        if !(fundamental.is_finite() && fundamental > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "fundamental must be positive, got {fundamental}"
            )));
        }
        if points.is_empty() {
            return Err(Error::InvalidGrid("grid has no points".into()));
        }
        if points.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidGrid("non-finite frequency".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(
                "frequencies must be strictly increasing".into(),
            ));
        }
        Ok(FrequencyGrid {
            points,
            kind,
            fundamental,
        })
    }

    /// Builds an explicit grid from frequencies in Hz.
    pub fn from_hz(f_hz: &[f64], fundamental_hz: f64) -> Result<Self> {
        FrequencyGrid::new(
            f_hz.iter().map(|f| 2.0 * PI * f).collect(),
            GridKind::Explicit,
            2.0 * PI * fundamental_hz,
        )
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn hz(&self) -> Vec<f64> {
        self.points.iter().map(|w| w / (2.0 * PI)).collect()
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    /// Fundamental angular frequency (rad/s).
    pub fn fundamental(&self) -> f64 {
        self.fundamental
    }

    pub fn fundamental_hz(&self) -> f64 {
        self.fundamental / (2.0 * PI)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Rounds every point to the nearest multiple of `step_hz`, drops
    /// duplicates, zero, and any frequency rejected by `exclude`.
    pub fn snapped(&self, step_hz: f64, exclude: impl Fn(f64) -> bool) -> Result<Self> {
        let mut out: Vec<f64> = Vec::with_capacity(self.len());
        for f in self.hz() {
            let k = (f / step_hz).round();
            if k < 1.0 {
                continue;
            }
            let fs = k * step_hz;
            if exclude(fs) {
                continue;
            }
            if out.last().is_some_and(|&last| (last - fs).abs() < 1e-9) {
                continue;
            }
            out.push(fs);
        }
        FrequencyGrid::from_hz(&out, self.fundamental_hz())
    }

    /// Exact point-by-point equality of grids (no interpolation anywhere).
    pub fn same_as(&self, other: &FrequencyGrid) -> bool {
        self.points == other.points && self.fundamental == other.fundamental
    }
}

/// Builds a grid with `n` points spanning `[f_min, f_max]` Hz.
pub fn make_grid(
    f_min: f64,
    f_max: f64,
    n: usize,
    kind: GridKind,
    fundamental_hz: f64,
) -> Result<FrequencyGrid> {
    if !(f_min > 0.0 && f_max > 0.0) {
        return Err(Error::InvalidGrid(format!(
            "bounds must be positive, got [{f_min}, {f_max}]"
        )));
    }
    if f_min >= f_max {
        return Err(Error::InvalidGrid(format!(
            "f_min ({f_min}) must be below f_max ({f_max})"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidGrid(format!("need at least 2 points, got {n}")));
    }
    let last = (n - 1) as f64;
    let f_hz: Vec<f64> = match kind {
        GridKind::Linear => (0..n)
            .map(|i| f_min + (f_max - f_min) * i as f64 / last)
            .collect(),
        GridKind::Logarithmic => {
            let (a, b) = (f_min.log10(), f_max.log10());
            (0..n)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / last))
                .collect()
        }
        GridKind::Explicit => {
            return Err(Error::InvalidGrid(
                "explicit grids are built from a point list".into(),
            ))
        }
    };
    let mut points: Vec<f64> = f_hz.iter().map(|f| 2.0 * PI * f).collect();
    // pin the end points exactly
    points[0] = 2.0 * PI * f_min;
    points[n - 1] = 2.0 * PI * f_max;
    FrequencyGrid::new(points, kind, 2.0 * PI * fundamental_hz)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Dq,
    Pn,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Dq => "dq",
            Domain::Pn => "pn",
        }
    }

    /// Channel labels, e.g. `["d", "q"]`.
    pub fn channels(self) -> [&'static str; 2] {
        match self {
            Domain::Dq => ["d", "q"],
            Domain::Pn => ["p", "n"],
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Impedance,
    Admittance,
    MinorLoop,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Impedance => "impedance",
            Role::Admittance => "admittance",
            Role::MinorLoop => "minorloop",
        }
    }
}

/// 2x2 complex frequency response.
#[derive(Clone, Debug, PartialEq)]
pub struct Tf2x2 {
    grid: FrequencyGrid,
    values: Vec<Mat2>,
    domain: Domain,
    role: Role,
}

impl Tf2x2 {
    pub fn new(grid: FrequencyGrid, values: Vec<Mat2>, domain: Domain, role: Role) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite response at {:.6} Hz",
                grid.hz()[k]
            )));
        }
        Ok(Tf2x2 {
            grid,
            values,
            domain,
            role,
        })
    }

    /// Evaluates `f(omega)` at every grid point in parallel.
    pub fn from_fn<F>(grid: &FrequencyGrid, domain: Domain, role: Role, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Mat2 + Sync,
    {
        let values = grid.points().par_iter().map(|&w| f(w)).collect();
        Tf2x2::new(grid.clone(), values, domain, role)
    }

    pub fn constant(grid: &FrequencyGrid, m: Mat2, domain: Domain, role: Role) -> Result<Self> {
        Tf2x2::new(grid.clone(), vec![m; grid.len()], domain, role)
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Mat2] {
        &self.values
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same grid and tags, new values.
    pub(crate) fn with_values(&self, values: Vec<Mat2>, domain: Domain, role: Role) -> Result<Self> {
        Tf2x2::new(self.grid.clone(), values, domain, role)
    }

    /// Pointwise map keeping grid, domain and role.
    pub fn map(&self, f: impl Fn(&Mat2) -> Mat2 + Sync + Send) -> Result<Self> {
        let values = self.values.par_iter().map(f).collect();
        self.with_values(values, self.domain, self.role)
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        self.map(|m| *m * k)
    }

    /// Entry `(row, col)` as a scalar response.
    pub fn element(&self, row: usize, col: usize) -> Tf1x1 {
        let ch = self.domain.channels();
        Tf1x1 {
            grid: self.grid.clone(),
            values: self.values.iter().map(|m| m.get(row, col)).collect(),
            label: format!("{}{}", ch[row], ch[col]),
        }
    }

    /// Largest entrywise relative difference `|a - b| / max(|a|_max, |b|_max)`.
    pub fn max_rel_diff(&self, other: &Tf2x2) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| {
                let scale = a.max_abs().max(b.max_abs()).max(f64::MIN_POSITIVE);
                a.max_abs_diff(b) / scale
            })
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        self.write_csv_with(&mut w, &[])
    }

    /// Writes the standard columns plus extra per-point columns.
    pub fn write_csv_with<W: Write>(
        &self,
        mut w: W,
        extra: &[(&str, &[f64])],
    ) -> std::io::Result<()> {
        write!(w, "f_hz,re_11,im_11,re_12,im_12,re_21,im_21,re_22,im_22")?;
        for (name, _) in extra {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for (k, (f, m)) in self.grid.hz().iter().zip(&self.values).enumerate() {
            write!(w, "{}", fmt_num(*f))?;
            for z in m.entries() {
                write!(w, ",{},{}", fmt_num(z.re), fmt_num(z.im))?;
            }
            for (_, col) in extra {
                write!(w, ",{}", fmt_num(col[k]))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(
        r: R,
        fundamental_hz: f64,
        domain: Domain,
        role: Role,
    ) -> Result<Self> {
        let table = read_numeric_csv(r, Path::new("<tf2x2>"))?;
        table.require(&[
            "f_hz", "re_11", "im_11", "re_12", "im_12", "re_21", "im_21", "re_22", "im_22",
        ])?;
        let grid = FrequencyGrid::from_hz(&table.column("f_hz")?, fundamental_hz)?;
        let c = |name: &str| table.column(name);
        let (r11, i11, r12, i12) = (c("re_11")?, c("im_11")?, c("re_12")?, c("im_12")?);
        let (r21, i21, r22, i22) = (c("re_21")?, c("im_21")?, c("re_22")?, c("im_22")?);
        let values = (0..grid.len())
            .map(|k| {
                Mat2::new(
                    Complex64::new(r11[k], i11[k]),
                    Complex64::new(r12[k], i12[k]),
                    Complex64::new(r21[k], i21[k]),
                    Complex64::new(r22[k], i22[k]),
                )
            })
            .collect();
        Tf2x2::new(grid, values, domain, role)
    }
}

/// Scalar complex frequency response.
#[derive(Clone, Debug, PartialEq)]
pub struct Tf1x1 {
    grid: FrequencyGrid,
    values: Vec<Complex64>,
    label: String,
}

impl Tf1x1 {
    pub fn new(grid: FrequencyGrid, values: Vec<Complex64>, label: impl Into<String>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidParameter("non-finite scalar response".into()));
        }
        Ok(Tf1x1 {
            grid,
            values,
            label: label.into(),
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "f_hz,re,im")?;
        for (f, z) in self.grid.hz().iter().zip(&self.values) {
            writeln!(w, "{},{},{}", fmt_num(*f), fmt_num(z.re), fmt_num(z.im))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, fundamental_hz: f64, label: &str) -> Result<Self> {
        let table = read_numeric_csv(r, Path::new("<tf1x1>"))?;
        table.require(&["f_hz", "re", "im"])?;
        let grid = FrequencyGrid::from_hz(&table.column("f_hz")?, fundamental_hz)?;
        let (re, im) = (table.column("re")?, table.column("im")?);
        let values = re
            .iter()
            .zip(&im)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        Tf1x1::new(grid, values, label)
    }
}

/// Pointwise 2x2 inverse; the role flips between impedance and admittance.
pub fn invert(m: &Tf2x2) -> Result<Tf2x2> {
    let hz = m.grid.hz();
    let values = m
        .values
        .iter()
        .zip(&hz)
        .map(|(a, &f_hz)| {
            a.inverse().ok_or(Error::Singular {
                f_hz,
                det: a.det().norm(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let role = match m.role {
        Role::Impedance => Role::Admittance,
        Role::Admittance => Role::Impedance,
        Role::MinorLoop => Role::MinorLoop,
    };
    m.with_values(values, m.domain, role)
}

/// Pointwise product `a * b`. Impedance times admittance yields a minor-loop gain.
pub fn matmul(a: &Tf2x2, b: &Tf2x2) -> Result<Tf2x2> {
    if a.domain != b.domain {
        return Err(Error::DomainMismatch {
            expected: a.domain.name(),
            found: b.domain.name(),
        });
    }
    if !a.grid.same_as(&b.grid) {
        return Err(Error::GridMismatch);
    }
    let values = a
        .values
        .par_iter()
        .zip(&b.values)
        .map(|(x, y)| *x * *y)
        .collect();
    let role = match (a.role, b.role) {
        (Role::Impedance, Role::Admittance) => Role::MinorLoop,
        (r, _) => r,
    };
    a.with_values(values, a.domain, role)
}

/// Shortest round-trip representation in scientific notation.
pub fn fmt_num(x: f64) -> String {
    format!("{x:e}")
}

/// Header-indexed numeric table.
#[derive(Clone, Debug)]
pub struct NumericTable {
    pub path: std::path::PathBuf,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Csv {
                path: self.path.clone(),
                msg: format!("missing column `{name}`"),
            })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.index_of(name)?;
        Ok(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn require(&self, names: &[&str]) -> Result<()> {
        names.iter().try_for_each(|n| self.index_of(n).map(|_| ()))
    }
}

/// Reads a CSV with a mandatory header row and numeric cells.
/// `true`/`false` cells read as 1/0.
pub fn read_numeric_csv<R: BufRead>(r: R, path: &Path) -> Result<NumericTable> {
    let csv_err = |msg: String| Error::Csv {
        path: path.to_path_buf(),
        msg,
    };
    let mut lines = r.lines();
    let header: Vec<String> = match lines.next() {
        Some(line) => line?.split(',').map(|s| s.trim().to_string()).collect(),
        None => return Err(csv_err("empty file".into())),
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| match cell.trim() {
                "true" => Ok(1.0),
                "false" => Ok(0.0),
                s => s
                    .parse::<f64>()
                    .map_err(|e| csv_err(format!("line {}: `{s}`: {e}", i + 2))),
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(csv_err(format!(
                "line {}: {} cells, header has {}",
                i + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok(NumericTable {
        path: path.to_path_buf(),
        header,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid3() -> FrequencyGrid {
        make_grid(10.0, 1000.0, 3, GridKind::Linear, 50.0).unwrap()
    }

    #[test]
    fn linear_grid_points() {
        let g = grid3();
        let expect = [10.0, 505.0, 1000.0];
        for (w, f) in g.points().iter().zip(expect) {
            assert_relative_eq!(*w, 2.0 * PI * f, max_relative = 1e-15);
        }
        assert_eq!(g.kind(), GridKind::Linear);
    }

    #[test]
    fn log_grid_points() {
        let g = make_grid(1.0, 100.0, 3, GridKind::Logarithmic, 50.0).unwrap();
        for (w, f) in g.points().iter().zip([1.0, 10.0, 100.0]) {
            assert_relative_eq!(*w, 2.0 * PI * f, max_relative = 1e-14);
        }
    }

    #[test]
    fn grid_errors() {
        assert!(make_grid(100.0, 10.0, 5, GridKind::Linear, 50.0).is_err());
        assert!(make_grid(0.0, 10.0, 5, GridKind::Linear, 50.0).is_err());
        assert!(make_grid(-1.0, 10.0, 5, GridKind::Linear, 50.0).is_err());
        assert!(make_grid(1.0, 10.0, 1, GridKind::Linear, 50.0).is_err());
        assert!(FrequencyGrid::new(vec![1.0, 1.0], GridKind::Explicit, 1.0).is_err());
        assert!(FrequencyGrid::new(vec![1.0, 2.0], GridKind::Explicit, 0.0).is_err());
        assert!(FrequencyGrid::new(vec![1.0, f64::NAN], GridKind::Explicit, 1.0).is_err());
    }

    #[test]
    fn snapping_drops_duplicates_and_exclusions() {
        let g = FrequencyGrid::from_hz(&[10.1, 10.9, 49.0, 51.0, 98.7], 50.0).unwrap();
        let s = g.snapped(2.5, |f| f == 50.0).unwrap();
        assert_eq!(s.hz(), vec![10.0, 97.5]);
    }

    #[test]
    fn invert_identity_and_diagonal() {
        let g = grid3();
        let id = Tf2x2::constant(&g, Mat2::identity(), Domain::Dq, Role::Impedance).unwrap();
        let inv = invert(&id).unwrap();
        assert_eq!(inv.values(), id.values());
        assert_eq!(inv.role(), Role::Admittance);

        let d = Tf2x2::constant(&g, Mat2::diag(c(2.0, 0.0), c(4.0, 0.0)), Domain::Dq, Role::Admittance)
            .unwrap();
        let inv = invert(&d).unwrap();
        for m in inv.values() {
            assert_eq!(*m, Mat2::diag(c(0.5, 0.0), c(0.25, 0.0)));
        }
        assert_eq!(inv.role(), Role::Impedance);
    }

    #[test]
    fn invert_singular_names_frequency() {
        let g = grid3();
        let s = Tf2x2::constant(&g, Mat2::from_re(1.0, 2.0, 2.0, 4.0), Domain::Dq, Role::Impedance)
            .unwrap();
        match invert(&s) {
            Err(Error::Singular { f_hz, .. }) => assert_relative_eq!(f_hz, 10.0, epsilon = 1e-9),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn singular_threshold_is_scale_invariant() {
        let m = Mat2::from_re(1.0, 1.0, 1.0, 1.0 + 1e-13);
        assert!(m.is_singular());
        assert!((m * 1e9).is_singular());
        let ok = Mat2::from_re(1.0, 1.0, 1.0, 1.0 + 1e-9);
        assert!(!ok.is_singular());
        assert!(!(ok * 1e-9).is_singular());
    }

    #[test]
    fn matmul_examples() {
        let g = grid3();
        let a = Tf2x2::constant(&g, Mat2::new(c(1.0, 2.0), c(3.0, -1.0), c(0.5, 0.0), c(0.0, 7.0)), Domain::Dq, Role::Impedance).unwrap();
        let id = Tf2x2::constant(&g, Mat2::identity(), Domain::Dq, Role::Admittance).unwrap();
        let p = matmul(&a, &id).unwrap();
        assert_eq!(p.values(), a.values());
        assert_eq!(p.role(), Role::MinorLoop);

        let d1 = Tf2x2::constant(&g, Mat2::diag(c(2.0, 1.0), c(3.0, 0.0)), Domain::Pn, Role::Impedance).unwrap();
        let d2 = Tf2x2::constant(&g, Mat2::diag(c(0.0, 1.0), c(-1.0, 0.0)), Domain::Pn, Role::Impedance).unwrap();
        let p = matmul(&d1, &d2).unwrap();
        assert_eq!(p.values()[0], Mat2::diag(c(-1.0, 2.0), c(-3.0, 0.0)));

        // hand multiply: [[1,1],[0,1]] [[1,0],[1,1]] = [[2,1],[1,1]]
        let u = Tf2x2::constant(&g, Mat2::from_re(1.0, 1.0, 0.0, 1.0), Domain::Dq, Role::Impedance).unwrap();
        let l = Tf2x2::constant(&g, Mat2::from_re(1.0, 0.0, 1.0, 1.0), Domain::Dq, Role::Impedance).unwrap();
        assert_eq!(matmul(&u, &l).unwrap().values()[1], Mat2::from_re(2.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let g = grid3();
        let g2 = make_grid(10.0, 1000.0, 4, GridKind::Linear, 50.0).unwrap();
        let a = Tf2x2::constant(&g, Mat2::identity(), Domain::Dq, Role::Impedance).unwrap();
        let b = Tf2x2::constant(&g, Mat2::identity(), Domain::Pn, Role::Impedance).unwrap();
        let c2 = Tf2x2::constant(&g2, Mat2::identity(), Domain::Dq, Role::Impedance).unwrap();
        assert!(matches!(matmul(&a, &b), Err(Error::DomainMismatch { .. })));
        assert!(matches!(matmul(&a, &c2), Err(Error::GridMismatch)));
    }

    #[test]
    fn condition_number_of_rotation_and_diag() {
        let r = Mat2::from_re(0.0, -1.0, 1.0, 0.0);
        assert_relative_eq!(r.condition_number(), 1.0, max_relative = 1e-12);
        let d = Mat2::diag(c(10.0, 0.0), c(0.0, 0.1));
        assert_relative_eq!(d.condition_number(), 100.0, max_relative = 1e-10);
        assert!(Mat2::from_re(1.0, 2.0, 2.0, 4.0).condition_number() > 1e12);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let g = make_grid(1.0, 100.0, 7, GridKind::Logarithmic, 50.0).unwrap();
        let z = Tf2x2::from_fn(&g, Domain::Pn, Role::Impedance, |w| {
            Mat2::new(c(0.1, w), c(1.0 / w, -0.3), c(-w.sqrt(), 1e-300), c(PI, -w * 1e7))
        })
        .unwrap();
        let mut buf = Vec::new();
        z.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("f_hz,re_11,im_11,re_12,im_12,re_21,im_21,re_22,im_22\n"));
        let back = Tf2x2::read_csv(&buf[..], 50.0, Domain::Pn, Role::Impedance).unwrap();
        assert_eq!(back.values(), z.values());

        let s = z.element(1, 0);
        assert_eq!(s.label(), "np");
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = Tf1x1::read_csv(&buf[..], 50.0, "np").unwrap();
        assert_eq!(back.values(), s.values());
    }

    #[test]
    fn csv_requires_header() {
        let bad = "1,2,3\n4,5,6\n";
        assert!(Tf1x1::read_csv(bad.as_bytes(), 50.0, "x").is_err());
    }
}
