//! Sampled fields on the fundamental cell.
//!
//! Nodes are `x_ij = (i/N) e1 + (j/N) e2` for `0 <= i, j < N`, stored row-major
//! with `j` fastest. Quasi-periodic fields are kept on the open cell only; values
//! outside it are produced from the closed-form shift phase.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{Cocycle, DualLattice, LatticeParam, Vec2};
use crate::operators::magnetic::ZakTables;

pub struct SpectralGrid {
    pub lattice: LatticeParam,
    pub dual: DualLattice,
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    line_fwd: Arc<dyn Fft<f64>>,
    line_inv: Arc<dyn Fft<f64>>,
    pub(crate) zak: OnceLock<ZakTables>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n", &self.n)
            .field("tau", &self.lattice.tau)
            .finish()
    }
}

impl SpectralGrid {
    pub fn new(lattice: &LatticeParam, n: usize) -> Result<Arc<Self>> {
        if n < 4 || n % 2 != 0 {
            return Err(invalid(format!("grid size must be even and >= 4, got {n}")));
        }
        let mut planner = FftPlanner::new();
        Ok(Arc::new(SpectralGrid {
            lattice: *lattice,
            dual: lattice.dual(),
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            line_fwd: planner.plan_fft_forward(n * n),
            line_inv: planner.plan_fft_inverse(n * n),
            zak: OnceLock::new(),
        }))
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        let h = 1.0 / self.n as f64;
        self.lattice.point(i as f64 * h, j as f64 * h)
    }

    /// Quadrature weight of a node; the weights sum to the cell area.
    pub fn weight(&self) -> f64 {
        self.lattice.area() / self.len() as f64
    }

    /// Signed frequency of FFT slot `i`, in `[-N/2, N/2)`.
    #[inline]
    pub fn freq(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    #[inline]
    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.n / 2
    }

    /// Cartesian wave vector of FFT slot `(a, b)`.
    #[inline]
    pub fn wave_vector(&self, a: usize, b: usize) -> Vec2 {
        self.dual.vector(self.freq(a) as f64, self.freq(b) as f64)
    }

    pub(crate) fn same_as(&self, other: &SpectralGrid) -> bool {
        self.n == other.n && self.lattice == other.lattice
    }

    /// Unnormalized 2D DFT in place.
    pub fn fft2(&self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inv } else { &self.fwd };
        plan.process(data);
        self.fft_first_axis(data, inverse);
    }

    /// Unnormalized DFT of length `N` along the first index, for every `j`.
    pub(crate) fn fft_first_axis(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let plan = if inverse { &self.inv } else { &self.fwd };
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = data[i * n + j];
            }
            plan.process(&mut col);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
    }

    /// Unnormalized DFT of length `N^2` on a single line.
    pub(crate) fn fft_line(&self, data: &mut [Complex64], inverse: bool) {
        if inverse {
            self.line_inv.process(data)
        } else {
            self.line_fwd.process(data)
        }
    }
}

/// Quasi-periodic complex field with `flux` quanta per cell.
#[derive(Debug, Clone)]
pub struct QpField {
    pub grid: Arc<SpectralGrid>,
    pub values: Vec<Complex64>,
    pub flux: u32,
}

#[derive(Debug, Clone)]
pub struct PerScalarField {
    pub grid: Arc<SpectralGrid>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PerVecField {
    pub grid: Arc<SpectralGrid>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl QpField {
    pub fn zeros(grid: &Arc<SpectralGrid>, flux: u32) -> Self {
        QpField {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            flux,
        }
    }

    pub fn from_fn(grid: &Arc<SpectralGrid>, flux: u32, f: impl Fn(Vec2) -> Complex64) -> Self {
        let n = grid.size();
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(grid.node(i, j)));
            }
        }
        QpField { grid: grid.clone(), values, flux }
    }

    pub fn with_values(&self, values: Vec<Complex64>) -> Self {
        QpField { grid: self.grid.clone(), values, flux: self.flux }
    }

    /// `<self, other>` as a cell average, antilinear in `self`.
    pub fn inner(&self, other: &QpField) -> Complex64 {
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        s / self.values.len() as f64
    }

    /// Root-mean-square over the cell.
    pub fn norm(&self) -> f64 {
        rms_c(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.with_values(self.values.iter().map(|z| z * c).collect())
    }

    pub fn axpy(&mut self, c: Complex64, other: &QpField) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    pub fn sub(&self, other: &QpField) -> Self {
        self.with_values(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }

    pub fn modulus_sq(&self) -> PerScalarField {
        PerScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|z| z.norm_sqr()).collect(),
        }
    }

    /// Multiply by a periodic real field pointwise.
    pub fn mul_real(&self, f: &[f64]) -> Self {
        self.with_values(self.values.iter().zip(f).map(|(a, b)| a * b).collect())
    }

    pub fn cocycle(&self) -> Cocycle {
        let l = make_flux_lattice(&self.grid.lattice, self.flux);
        Cocycle::standard(&l).with_twist(self.flux as f64 * PI)
    }

    /// Value at an arbitrary integer node, extended with the shift phase.
    pub fn sample(&self, i: i64, j: i64) -> Complex64 {
        sample_with(self, &self.cocycle(), i, j)
    }
}

fn make_flux_lattice(l: &LatticeParam, flux: u32) -> LatticeParam {
    LatticeParam { n: flux, ..*l }
}

/// Extension of a grid field to any integer node using the given cocycle.
pub fn sample_with(psi: &QpField, c: &Cocycle, i: i64, j: i64) -> Complex64 {
    let n = psi.grid.size() as i64;
    let (m1, i0) = (i.div_euclid(n), i.rem_euclid(n));
    let (m2, j0) = (j.div_euclid(n), j.rem_euclid(n));
    let v = psi.values[psi.grid.idx(i0 as usize, j0 as usize)];
    if m1 == 0 && m2 == 0 {
        return v;
    }
    let x0 = psi.grid.node(i0 as usize, j0 as usize);
    v * Complex64::from_polar(1.0, c.shift_phase(m1, m2, x0))
}

impl PerScalarField {
    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        PerScalarField { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: &Arc<SpectralGrid>, f: impl Fn(Vec2) -> f64) -> Self {
        let n = grid.size();
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(grid.node(i, j)));
            }
        }
        PerScalarField { grid: grid.clone(), values }
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        PerScalarField { grid: self.grid.clone(), values }
    }

    pub fn norm(&self) -> f64 {
        rms_r(&self.values)
    }

    pub fn mean_zero(&self) -> Self {
        let m = self.cell_average();
        self.with_values(self.values.iter().map(|v| v - m).collect())
    }
}

impl PerVecField {
    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        PerVecField { grid: grid.clone(), x: vec![0.0; grid.len()], y: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: &Arc<SpectralGrid>, c: Vec2) -> Self {
        PerVecField { grid: grid.clone(), x: vec![c[0]; grid.len()], y: vec![c[1]; grid.len()] }
    }

    pub fn from_fn(grid: &Arc<SpectralGrid>, f: impl Fn(Vec2) -> Vec2) -> Self {
        let n = grid.size();
        let mut out = PerVecField::zeros(grid);
        for i in 0..n {
            for j in 0..n {
                let v = f(grid.node(i, j));
                let k = grid.idx(i, j);
                out.x[k] = v[0];
                out.y[k] = v[1];
            }
        }
        out
    }

    pub fn norm(&self) -> f64 {
        let s: f64 = self.x.iter().zip(&self.y).map(|(a, b)| a * a + b * b).sum();
        (s / self.x.len() as f64).sqrt()
    }

    pub fn add(&self, o: &PerVecField) -> Self {
        PerVecField {
            grid: self.grid.clone(),
            x: self.x.iter().zip(&o.x).map(|(a, b)| a + b).collect(),
            y: self.y.iter().zip(&o.y).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &PerVecField) -> Self {
        PerVecField {
            grid: self.grid.clone(),
            x: self.x.iter().zip(&o.x).map(|(a, b)| a - b).collect(),
            y: self.y.iter().zip(&o.y).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        PerVecField {
            grid: self.grid.clone(),
            x: self.x.iter().map(|a| a * c).collect(),
            y: self.y.iter().map(|a| a * c).collect(),
        }
    }

    pub fn inner(&self, o: &PerVecField) -> f64 {
        let s: f64 = (0..self.x.len()).map(|k| self.x[k] * o.x[k] + self.y[k] * o.y[k]).sum();
        s / self.x.len() as f64
    }
}

pub(crate) fn rms_c(v: &[Complex64]) -> f64 {
    (v.iter().map(|z| z.norm_sqr()).sum::<f64>() / v.len() as f64).sqrt()
}

pub(crate) fn rms_r(v: &[f64]) -> f64 {
    (v.iter().map(|z| z * z).sum::<f64>() / v.len() as f64).sqrt()
}

/// Mean over the cell, `(1/|cell|) ∫ f`.
pub trait CellAverage {
    type Output;
    fn cell_average(&self) -> Self::Output;
}

impl CellAverage for PerScalarField {
    type Output = f64;
    fn cell_average(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

impl CellAverage for PerVecField {
    type Output = Vec2;
    fn cell_average(&self) -> Vec2 {
        let m = self.x.len() as f64;
        [self.x.iter().sum::<f64>() / m, self.y.iter().sum::<f64>() / m]
    }
}

impl CellAverage for QpField {
    type Output = Complex64;
    fn cell_average(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }
}

pub fn cell_average<F: CellAverage>(f: &F) -> F::Output {
    f.cell_average()
}

/// Coefficients of `f = Σ_k f̂_k e^{i k·x}` over the dual lattice, in FFT order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub grid: Arc<SpectralGrid>,
    pub coeffs: Vec<Complex64>,
}

impl Spectrum {
    /// Coefficient of `k = m1 k1 + m2 k2`, zero if outside the band.
    pub fn mode(&self, m1: i64, m2: i64) -> Complex64 {
        let n = self.grid.size() as i64;
        if m1 < -n / 2 || m1 >= n / 2 || m2 < -n / 2 || m2 >= n / 2 {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[self.grid.idx(m1.rem_euclid(n) as usize, m2.rem_euclid(n) as usize)]
    }

    /// `Σ |f̂_k|²`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }
}

pub fn spectrum_of(grid: &Arc<SpectralGrid>, values: &[f64]) -> Spectrum {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid.fft2(&mut data, false);
    let s = 1.0 / grid.len() as f64;
    data.iter_mut().for_each(|c| *c *= s);
    Spectrum { grid: grid.clone(), coeffs: data }
}

pub fn spectrum_of_complex(grid: &Arc<SpectralGrid>, values: &[Complex64]) -> Spectrum {
    let mut data = values.to_vec();
    grid.fft2(&mut data, false);
    let s = 1.0 / grid.len() as f64;
    data.iter_mut().for_each(|c| *c *= s);
    Spectrum { grid: grid.clone(), coeffs: data }
}

pub fn synthesize(spec: &Spectrum) -> Vec<Complex64> {
    let mut data = spec.coeffs.clone();
    spec.grid.fft2(&mut data, true);
    data
}

pub fn fourier_forward(f: &PerScalarField) -> Spectrum {
    spectrum_of(&f.grid, &f.values)
}

pub fn fourier_forward_vec(f: &PerVecField) -> [Spectrum; 2] {
    [spectrum_of(&f.grid, &f.x), spectrum_of(&f.grid, &f.y)]
}

/// Real part of the synthesis; exact when the coefficients are Hermitian.
pub fn fourier_inverse(spec: &Spectrum) -> PerScalarField {
    PerScalarField {
        grid: spec.grid.clone(),
        values: synthesize(spec).iter().map(|c| c.re).collect(),
    }
}

pub fn fourier_inverse_vec(spec: &[Spectrum; 2]) -> PerVecField {
    PerVecField {
        grid: spec[0].grid.clone(),
        x: synthesize(&spec[0]).iter().map(|c| c.re).collect(),
        y: synthesize(&spec[1]).iter().map(|c| c.re).collect(),
    }
}

/// Degree of `psi` around the cell: `-(1/2 pi)` times the counterclockwise phase
/// increment of `arg psi`, so that the lowest Landau level state of flux `n`
/// (anti-holomorphic up to a Gaussian) has degree `n`.
///
/// The contour runs through grid nodes along the boundary of a translated cell;
/// the translate at the origin is tried first, then a few shifted ones.
pub fn winding_number(psi: &QpField) -> Result<i64> {
    let n = psi.grid.size() as i64;
    let shifts = [(0, 0), (n / 4, n / 4), (n / 8, 3 * n / 8), (3 * n / 8, n / 8), (n / 2, n / 2)];
    let mut last = None;
    for (i0, j0) in shifts {
        match winding_on_contour(psi, i0, j0) {
            Ok(w) => return Ok(w),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap())
}

/// Winding on the boundary of the cell with lower-left node `(i0, j0)`.
pub fn winding_on_contour(psi: &QpField, i0: i64, j0: i64) -> Result<i64> {
    let n = psi.grid.size() as i64;
    let mut path = Vec::with_capacity(4 * n as usize + 1);
    for t in 0..n {
        path.push((i0 + t, j0));
    }
    for t in 0..n {
        path.push((i0 + n, j0 + t));
    }
    for t in 0..n {
        path.push((i0 + n - t, j0 + n));
    }
    for t in 0..=n {
        path.push((i0, j0 + n - t));
    }
    let samples: Vec<Complex64> = path.iter().map(|&(i, j)| psi.sample(i, j)).collect();
    let max = psi.max_abs();
    let min = samples.iter().fold(f64::INFINITY, |m, z| m.min(z.norm()));
    if !(max > 0.0) || min <= 1e-8 * max {
        return Err(Error::DegenerateBoundary(format!(
            "min boundary modulus {min:.3e} vs max {max:.3e}; shift the cell"
        )));
    }
    let mut total = 0.0;
    for w in samples.windows(2) {
        let d = (w[1] / w[0]).arg();
        if d.abs() > 2.0 {
            return Err(Error::DegenerateBoundary(format!(
                "phase jump {d:.3} between neighbouring nodes; refine the grid or shift the cell"
            )));
        }
        total += d;
    }
    Ok((-total / (2.0 * PI)).round() as i64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    #[serde(rename = "N")]
    pub n: usize,
    pub tau_re: f64,
    pub tau_im: f64,
    #[serde(rename = "n")]
    pub n_flux: u32,
    pub kind: String,
}

fn sibling(stem: &Path, ext: &str) -> PathBuf {
    let mut p = stem.as_os_str().to_owned();
    p.push(ext);
    PathBuf::from(p)
}

fn write_raw(stem: &Path, header: &FieldHeader, data: impl Iterator<Item = f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(sibling(stem, ".bin"))?);
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    let h = File::create(sibling(stem, ".json"))?;
    serde_json::to_writer_pretty(h, header)?;
    Ok(())
}

fn header_for(grid: &SpectralGrid, flux: u32, kind: &str) -> FieldHeader {
    FieldHeader {
        n: grid.size(),
        tau_re: grid.lattice.tau.re,
        tau_im: grid.lattice.tau.im,
        n_flux: flux,
        kind: kind.to_string(),
    }
}

/// Writes `<stem>.bin` (row-major, little-endian f64, complex interleaved) and
/// `<stem>.json`.
pub fn write_qp_field(stem: &Path, psi: &QpField) -> Result<()> {
    let h = header_for(&psi.grid, psi.flux, "qp");
    write_raw(stem, &h, psi.values.iter().flat_map(|z| [z.re, z.im]))
}

pub fn write_scalar_field(stem: &Path, f: &PerScalarField) -> Result<()> {
    let h = header_for(&f.grid, f.grid.lattice.n, "scalar");
    write_raw(stem, &h, f.values.iter().copied())
}

pub fn write_vec_field(stem: &Path, f: &PerVecField) -> Result<()> {
    let h = header_for(&f.grid, f.grid.lattice.n, "vector");
    write_raw(stem, &h, f.x.iter().zip(&f.y).flat_map(|(a, b)| [*a, *b]))
}

pub fn read_header(stem: &Path) -> Result<FieldHeader> {
    let h = BufReader::new(File::open(sibling(stem, ".json"))?);
    Ok(serde_json::from_reader(h)?)
}

/// Reads a field written by [`write_qp_field`] onto `grid`.
pub fn read_qp_field(stem: &Path, grid: &Arc<SpectralGrid>) -> Result<QpField> {
    let h = read_header(stem)?;
    if h.kind != "qp" || h.n != grid.size() {
        return Err(invalid(format!("header {h:?} does not match a qp field on N = {}", grid.size())));
    }
    let mut bytes = Vec::new();
    BufReader::new(File::open(sibling(stem, ".bin"))?).read_to_end(&mut bytes)?;
    if bytes.len() != 16 * grid.len() {
        return Err(invalid("field payload has the wrong length"));
    }
    let f = |k: usize| f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
    let values = (0..grid.len()).map(|k| Complex64::new(f(2 * k), f(2 * k + 1))).collect();
    Ok(QpField { grid: grid.clone(), values, flux: h.n_flux })
}
