//! Periodic spectral grids on the box `[-L, L)^d`.
//!
//! Values are stored row-major with axis 0 (the `x_1` direction) varying
//! slowest. Spectral coefficients approximate the unitary Fourier transform
//!
//! ```text
//! f^(xi) = (2 pi)^(-d/2) \int f(x) e^{-i x.xi} dx
//! ```
//!
//! sampled on the lattice `xi = (pi / L) k'` with signed indices
//! `k' in [-n/2, n/2)`, stored in FFT order. With this normalization
//! `sum |f|^2 h^d = sum |f^|^2 (pi/L)^d` exactly.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const SNAPSHOT_MAGIC: &[u8; 4] = b"WGLF";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralGrid {
    dim: usize,
    half_length: f64,
    n: usize,
}

impl SpectralGrid {
    pub fn new(dim: usize, half_length: f64, n: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::structural("grid dimension must be at least 1"));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::structural(format!(
                "half length must be positive, got {half_length}"
            )));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::structural(format!(
                "points per axis must be a power of two >= 4, got {n}"
            )));
        }
        if n.checked_pow(dim as u32).is_none() {
            return Err(Error::structural("grid too large"));
        }
        Ok(Self {
            dim,
            half_length,
            n,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    /// Total number of points, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Lattice spacing in frequency, `pi / L`.
    pub fn frequency_step(&self) -> f64 {
        PI / self.half_length
    }

    /// Spectral cell measure `(pi / L)^d`.
    pub fn spectral_cell(&self) -> f64 {
        self.frequency_step().powi(self.dim as i32)
    }

    /// Largest representable frequency magnitude per axis.
    pub fn nyquist(&self) -> f64 {
        self.frequency_step() * (self.n / 2) as f64
    }

    /// Signed index `k'` of FFT index `k`.
    pub fn signed_index(&self, k: usize) -> i64 {
        let n = self.n as i64;
        let k = k as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    /// FFT index of a signed index, if representable.
    pub fn fft_index(&self, signed: i64) -> Option<usize> {
        let n = self.n as i64;
        if signed < -n / 2 || signed >= n / 2 {
            return None;
        }
        Some(signed.rem_euclid(n) as usize)
    }

    pub fn axis_coordinates(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n)
            .map(|k| -self.half_length + k as f64 * h)
            .collect()
    }

    /// Frequencies along one axis in FFT order.
    pub fn axis_frequencies(&self) -> Vec<f64> {
        let step = self.frequency_step();
        (0..self.n)
            .map(|k| step * self.signed_index(k) as f64)
            .collect()
    }

    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = flat % self.n;
            flat /= self.n;
        }
    }

    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let h = self.spacing();
        let mut rem = flat;
        for slot in out.iter_mut().rev() {
            *slot = -self.half_length + (rem % self.n) as f64 * h;
            rem /= self.n;
        }
    }

    pub fn frequency(&self, flat: usize, out: &mut [f64]) {
        let step = self.frequency_step();
        let mut rem = flat;
        for slot in out.iter_mut().rev() {
            *slot = step * self.signed_index(rem % self.n) as f64;
            rem /= self.n;
        }
    }

    /// `|xi|^2` for every coefficient, in FFT order.
    pub fn frequency_sq_norms(&self) -> Vec<f64> {
        self.separable_sum(|xi| xi * xi)
    }

    /// Builds `sum_a g_a(xi_a)` over the frequency lattice, with one
    /// function per axis given as a closure over the axis index.
    pub fn separable_frequency_sum(&self, g: impl Fn(usize, f64) -> f64) -> Vec<f64> {
        let freqs = self.axis_frequencies();
        let mut out = vec![0.0; self.len()];
        let mut idx = vec![0usize; self.dim];
        for (flat, slot) in out.iter_mut().enumerate() {
            self.multi_index(flat, &mut idx);
            *slot = idx.iter().enumerate().map(|(a, &k)| g(a, freqs[k])).sum();
        }
        out
    }

    fn separable_sum(&self, g: impl Fn(f64) -> f64) -> Vec<f64> {
        self.separable_frequency_sum(|_, xi| g(xi))
    }

    /// Signed lattice index of `xi` if it lies on the frequency lattice.
    pub fn lattice_index(&self, xi: f64) -> Option<i64> {
        let k = xi / self.frequency_step();
        let r = k.round();
        ((k - r).abs() <= 1e-9 * (1.0 + r.abs())).then_some(r as i64)
    }

    /// Same point count and dimension on a box of a different size.
    pub fn with_half_length(&self, half_length: f64) -> Result<Self> {
        Self::new(self.dim, half_length, self.n)
    }

    pub fn with_points(&self, n: usize) -> Result<Self> {
        Self::new(self.dim, self.half_length, n)
    }

    pub(crate) fn ensure_same(&self, other: &SpectralGrid) -> Result<()> {
        if self != other {
            return Err(Error::structural(format!(
                "grid mismatch: {self:?} vs {other:?}"
            )));
        }
        Ok(())
    }
}

/// Complex samples on a [`SpectralGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: SpectralGrid,
    values: Vec<C64>,
}

impl GridFunction {
    pub fn new(grid: SpectralGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::structural(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: SpectralGrid) -> Self {
        Self {
            grid,
            values: vec![C64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: SpectralGrid, f: impl Fn(&[f64]) -> C64) -> Self {
        let mut x = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|flat| {
                grid.point(flat, &mut x);
                f(&x)
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn zip_with(&self, other: &Self, op: impl Fn(C64, C64) -> C64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| op(a, b))
            .collect();
        Ok(Self {
            grid: self.grid,
            values,
        })
    }

    pub fn map(&self, op: impl Fn(C64) -> C64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| op(v)).collect(),
        }
    }

    /// Multiplies by the plane wave `e^{i xi.x}`.
    pub fn modulate(&self, xi: &[f64]) -> Result<Self> {
        if xi.len() != self.grid.dim() {
            return Err(Error::structural("modulation frequency has wrong length"));
        }
        let mut x = vec![0.0; self.grid.dim()];
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(flat, &v)| {
                self.grid.point(flat, &mut x);
                let phase: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum();
                v * C64::from_polar(1.0, phase)
            })
            .collect();
        Ok(Self {
            grid: self.grid,
            values,
        })
    }

    /// Same samples reinterpreted on a box of another size (a dilation).
    pub fn rescaled_box(&self, half_length: f64) -> Result<Self> {
        Ok(Self {
            grid: self.grid.with_half_length(half_length)?,
            values: self.values.clone(),
        })
    }

    /// Spectral interpolation onto a grid with the same box and dimension.
    ///
    /// Coefficients are zero padded or truncated; the Nyquist row of the
    /// coarser grid is dropped so real data stays real.
    pub fn resample(&self, target: &SpectralGrid) -> Result<Self> {
        if target.dim() != self.grid.dim() || target.half_length() != self.grid.half_length() {
            return Err(Error::structural(
                "resample needs the same box and dimension",
            ));
        }
        if target == &self.grid {
            return Ok(self.clone());
        }
        let src = forward_transform(self);
        let keep = (self.grid.points_per_axis().min(target.points_per_axis()) / 2) as i64;
        let d = self.grid.dim();
        let mut out = vec![C64::new(0.0, 0.0); target.len()];
        let mut idx = vec![0usize; d];
        'outer: for (flat, c) in src.coeffs().iter().enumerate() {
            self.grid.multi_index(flat, &mut idx);
            let mut t = 0usize;
            for &k in &idx {
                let s = self.grid.signed_index(k);
                if s.abs() >= keep {
                    continue 'outer;
                }
                t = t * target.points_per_axis() + target.fft_index(s).expect("inside target band");
            }
            out[t] = *c;
        }
        Ok(inverse_transform(&Spectrum {
            grid: *target,
            coeffs: out,
        }))
    }
}

/// Fourier coefficients on the lattice of a grid, in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: SpectralGrid,
    coeffs: Vec<C64>,
}

impl Spectrum {
    pub fn new(grid: SpectralGrid, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::structural(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    /// Coefficient at a signed multi-index, if representable.
    pub fn at(&self, signed: &[i64]) -> Option<C64> {
        if signed.len() != self.grid.dim() {
            return None;
        }
        let mut flat = 0usize;
        for &s in signed {
            flat = flat * self.grid.points_per_axis() + self.grid.fft_index(s)?;
        }
        Some(self.coeffs[flat])
    }

    /// `sum |c|^2 (pi/L)^d`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.spectral_cell()
    }
}

/// Reusable FFT plans and scratch for one grid shape.
///
/// Not shared between threads; every caller owns its workspace.
pub struct FftWorkspace {
    grid: SpectralGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<C64>,
    lines: Vec<C64>,
    parity: Vec<bool>,
    forward_scale: f64,
    inverse_scale: f64,
}

impl std::fmt::Debug for FftWorkspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftWorkspace")
            .field("grid", &self.grid)
            .finish_non_exhaustive()
    }
}

const LINE_BATCH: usize = 32;

impl FftWorkspace {
    pub fn new(grid: &SpectralGrid) -> Self {
        let n = grid.points_per_axis();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        let mut idx = vec![0usize; grid.dim()];
        let parity = (0..grid.len())
            .map(|flat| {
                grid.multi_index(flat, &mut idx);
                idx.iter().sum::<usize>() % 2 == 1
            })
            .collect();
        let root = (2.0 * PI).sqrt();
        let d = grid.dim() as i32;
        Self {
            grid: *grid,
            forward,
            inverse,
            scratch: vec![C64::new(0.0, 0.0); scratch_len],
            lines: vec![C64::new(0.0, 0.0); n * LINE_BATCH.min(grid.len() / n).max(1)],
            parity,
            forward_scale: (grid.spacing() / root).powi(d),
            inverse_scale: (grid.frequency_step() / root).powi(d),
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    /// Samples to coefficients, in place.
    pub fn forward_in_place(&mut self, data: &mut [C64]) {
        assert_eq!(
            data.len(),
            self.grid.len(),
            "buffer does not match workspace grid"
        );
        let plan = Arc::clone(&self.forward);
        self.transform(data, plan.as_ref());
        self.apply_phase(data, self.forward_scale);
    }

    /// Coefficients to samples, in place.
    pub fn inverse_in_place(&mut self, data: &mut [C64]) {
        assert_eq!(
            data.len(),
            self.grid.len(),
            "buffer does not match workspace grid"
        );
        self.apply_phase(data, self.inverse_scale);
        let plan = Arc::clone(&self.inverse);
        self.transform(data, plan.as_ref());
    }

    // e^{i L xi} = (-1)^{k'} accounts for the grid starting at -L.
    fn apply_phase(&self, data: &mut [C64], scale: f64) {
        for (v, &odd) in data.iter_mut().zip(&self.parity) {
            *v *= if odd { -scale } else { scale };
        }
    }

    fn transform(&mut self, data: &mut [C64], plan: &dyn Fft<f64>) {
        let n = self.grid.points_per_axis();
        let d = self.grid.dim();
        plan.process_with_scratch(data, &mut self.scratch);
        for axis in (0..d - 1).rev() {
            let stride = n.pow((d - 1 - axis) as u32);
            let block = stride * n;
            for base in (0..data.len()).step_by(block) {
                let mut inner = 0;
                while inner < stride {
                    let batch = LINE_BATCH.min(stride - inner);
                    let lines = &mut self.lines[..batch * n];
                    for k in 0..n {
                        let row = base + k * stride + inner;
                        for b in 0..batch {
                            lines[b * n + k] = data[row + b];
                        }
                    }
                    plan.process_with_scratch(lines, &mut self.scratch);
                    for k in 0..n {
                        let row = base + k * stride + inner;
                        for b in 0..batch {
                            data[row + b] = lines[b * n + k];
                        }
                    }
                    inner += batch;
                }
            }
        }
    }
}

pub fn forward_transform(f: &GridFunction) -> Spectrum {
    let mut ws = FftWorkspace::new(f.grid());
    let mut coeffs = f.values().to_vec();
    ws.forward_in_place(&mut coeffs);
    Spectrum {
        grid: *f.grid(),
        coeffs,
    }
}

pub fn inverse_transform(s: &Spectrum) -> GridFunction {
    let mut ws = FftWorkspace::new(s.grid());
    let mut values = s.coeffs().to_vec();
    ws.inverse_in_place(&mut values);
    GridFunction {
        grid: *s.grid(),
        values,
    }
}

/// Exact translation `f(x - v t)` of the band-limited interpolant of `f`.
pub fn shift_in_fourier(f: &GridFunction, velocity: &[f64], t: f64) -> Result<GridFunction> {
    if velocity.len() != f.grid().dim() {
        return Err(Error::structural(format!(
            "velocity has length {}, grid dimension is {}",
            velocity.len(),
            f.grid().dim()
        )));
    }
    let mut ws = FftWorkspace::new(f.grid());
    let mut values = f.values().to_vec();
    shift_with(&mut ws, &mut values, velocity, t);
    Ok(GridFunction {
        grid: *f.grid(),
        values,
    })
}

pub(crate) fn shift_with(ws: &mut FftWorkspace, values: &mut [C64], velocity: &[f64], t: f64) {
    if t == 0.0 || velocity.iter().all(|&v| v == 0.0) {
        return;
    }
    let grid = *ws.grid();
    ws.forward_in_place(values);
    // The multiplier factorizes over axes: prod_a e^{-i t v_a xi_a}.
    let freqs = grid.axis_frequencies();
    let factors: Vec<Vec<C64>> = velocity
        .iter()
        .map(|&v| {
            freqs
                .iter()
                .map(|&xi| C64::from_polar(1.0, -t * v * xi))
                .collect()
        })
        .collect();
    let mut idx = vec![0usize; grid.dim()];
    for (flat, c) in values.iter_mut().enumerate() {
        grid.multi_index(flat, &mut idx);
        let mut m = C64::new(1.0, 0.0);
        for (a, &k) in idx.iter().enumerate() {
            m *= factors[a][k];
        }
        *c *= m;
    }
    ws.inverse_in_place(values);
}

/// Writes a little-endian binary snapshot.
pub fn write_snapshot<W: Write>(mut w: W, f: &GridFunction) -> Result<()> {
    let g = f.grid();
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&(g.dim() as u32).to_le_bytes())?;
    w.write_all(&(g.points_per_axis() as u32).to_le_bytes())?;
    w.write_all(&g.half_length().to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * f.values().len());
    for v in f.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<GridFunction> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Format("bad snapshot magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Format(format!(
            "unsupported snapshot version {version}"
        )));
    }
    let d = read_u32(&mut r)? as usize;
    let n = read_u32(&mut r)? as usize;
    let mut lb = [0u8; 8];
    r.read_exact(&mut lb)?;
    let grid = SpectralGrid::new(d, f64::from_le_bytes(lb), n)
        .map_err(|e| Error::Format(format!("bad snapshot header: {e}")))?;
    let mut buf = vec![0u8; 16 * grid.len()];
    r.read_exact(&mut buf)?;
    let values = buf
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            C64::new(re, im)
        })
        .collect();
    GridFunction::new(grid, values)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn random_field(grid: SpectralGrid, seed: &[f64]) -> GridFunction {
        let values = (0..grid.len())
            .map(|i| {
                let a = seed[i % seed.len()];
                C64::new((a * (i as f64 + 1.3)).sin(), (a * 0.7 * i as f64).cos())
            })
            .collect();
        GridFunction::new(grid, values).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(SpectralGrid::new(1, 1.0, 6).is_err());
        assert!(SpectralGrid::new(1, 1.0, 2).is_err());
        assert!(SpectralGrid::new(0, 1.0, 8).is_err());
        let g = SpectralGrid::new(2, 1.0, 8).unwrap();
        assert!(GridFunction::new(g, vec![C64::new(0.0, 0.0); 63]).is_err());
    }

    #[test]
    fn constant_maps_to_zero_mode() {
        let g = SpectralGrid::new(1, PI, 8).unwrap();
        let s = forward_transform(&GridFunction::from_fn(g, |_| C64::new(1.0, 0.0)));
        for (k, c) in s.coeffs().iter().enumerate() {
            if k == 0 {
                // (2 pi)^{-1/2} * 2 pi
                assert!((c.re - (2.0 * PI).sqrt()).abs() < 1e-12 && c.im.abs() < 1e-12);
            } else {
                assert!(c.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn plane_wave_has_single_coefficient() {
        let g = SpectralGrid::new(1, PI, 16).unwrap();
        let f = GridFunction::from_fn(g, |x| C64::from_polar(1.0, x[0]));
        let s = forward_transform(&f);
        for (k, c) in s.coeffs().iter().enumerate() {
            if g.signed_index(k) == 1 {
                assert!((c - C64::new((2.0 * PI).sqrt(), 0.0)).norm() < 1e-12);
            } else {
                assert!(c.norm() < 1e-12, "k={k} c={c}");
            }
        }
    }

    #[test]
    fn gaussian_transform_is_gaussian() {
        let g = SpectralGrid::new(1, 16.0, 256).unwrap();
        let f = GridFunction::from_fn(g, |x| C64::new((-x[0] * x[0] / 2.0).exp(), 0.0));
        let s = forward_transform(&f);
        for (k, xi) in g.axis_frequencies().iter().enumerate() {
            let expect = (-xi * xi / 2.0).exp();
            assert!((s.coeffs()[k] - expect).norm() < 1e-8, "xi={xi}");
        }
    }

    #[test]
    fn gaussian_transform_2d() {
        let g = SpectralGrid::new(2, 16.0, 128).unwrap();
        let f = GridFunction::from_fn(g, |x| {
            C64::new((-(x[0] * x[0] + 4.0 * x[1] * x[1]) / 2.0).exp(), 0.0)
        });
        let s = forward_transform(&f);
        let mut xi = [0.0; 2];
        for flat in 0..g.len() {
            g.frequency(flat, &mut xi);
            let expect = 0.5 * (-(xi[0] * xi[0] + xi[1] * xi[1] / 4.0) / 2.0).exp();
            assert!((s.coeffs()[flat] - expect).norm() < 1e-8);
        }
    }

    #[test]
    fn axis_order_is_row_major() {
        let g = SpectralGrid::new(2, PI, 8).unwrap();
        let f = GridFunction::from_fn(g, |x| C64::from_polar(1.0, 2.0 * x[0] - x[1]));
        let s = forward_transform(&f);
        assert!(s.at(&[2, -1]).unwrap().norm() > 1.0);
        assert!(s.at(&[-1, 2]).unwrap().norm() < 1e-12);
    }

    #[test]
    fn shift_examples() {
        let g = SpectralGrid::new(1, 3.0, 32).unwrap();
        let f = GridFunction::from_fn(g, |x| C64::new((-x[0] * x[0]).exp(), 0.2 * x[0].sin()));
        assert_eq!(shift_in_fourier(&f, &[0.7], 0.0).unwrap(), f);
        let v = 2.0 * PI / 3.0;
        let full = shift_in_fourier(&f, &[v], 6.0 / v).unwrap();
        for (a, b) in full.values().iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-12);
        }
        let xi0 = g.frequency_step() * 3.0;
        let w = GridFunction::from_fn(g, |x| C64::from_polar(1.0, xi0 * x[0]));
        let (v, t) = (0.4, 1.1);
        let shifted = shift_in_fourier(&w, &[v], t).unwrap();
        let expect = GridFunction::from_fn(g, |x| C64::from_polar(1.0, xi0 * (x[0] - v * t)));
        for (a, b) in shifted.values().iter().zip(expect.values()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(shift_in_fourier(&f, &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn resample_round_trip() {
        let g = SpectralGrid::new(2, PI, 32).unwrap();
        let f = GridFunction::from_fn(g, |x| {
            C64::new((2.0 * x[0]).cos() * x[1].sin(), (x[0] - x[1]).cos())
        });
        let fine = f.resample(&g.with_points(64).unwrap()).unwrap();
        let exact = GridFunction::from_fn(*fine.grid(), |x| {
            C64::new((2.0 * x[0]).cos() * x[1].sin(), (x[0] - x[1]).cos())
        });
        for (a, b) in fine.values().iter().zip(exact.values()) {
            assert!((a - b).norm() < 1e-12);
        }
        let back = fine.resample(&g).unwrap();
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn snapshot_round_trip() {
        let g = SpectralGrid::new(2, 1.5, 8).unwrap();
        let f = random_field(g, &[0.3, 1.7]);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &f).unwrap();
        assert_eq!(buf.len(), 24 + 16 * 64);
        assert_eq!(&buf[..4], b"WGLF");
        let back = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(back, f);
        buf[0] = b'X';
        assert!(read_snapshot(buf.as_slice()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn round_trip_and_parseval(d in 1usize..=3, logn in 2u32..=5, l in 0.5f64..20.0,
                                   seed in proptest::collection::vec(-3.0f64..3.0, 1..6)) {
            let g = SpectralGrid::new(d, l, 1 << logn).unwrap();
            let f = random_field(g, &seed);
            let s = forward_transform(&f);
            prop_assert!(rel(s.l2_norm_sq(), f.l2_norm_sq()) < 1e-10);
            let back = inverse_transform(&s);
            let err = back.sub(&f).unwrap().l2_norm();
            prop_assert!(err <= 1e-12 * f.l2_norm());
        }

        #[test]
        fn shift_is_additive(t1 in -3.0f64..3.0, t2 in -3.0f64..3.0, v0 in -2.0f64..2.0, v1 in -2.0f64..2.0) {
            let g = SpectralGrid::new(2, 2.0, 16).unwrap();
            let f = random_field(g, &[0.9, -1.4, 2.2]);
            let v = [v0, v1];
            let a = shift_in_fourier(&shift_in_fourier(&f, &v, t1).unwrap(), &v, t2).unwrap();
            let b = shift_in_fourier(&f, &v, t1 + t2).unwrap();
            prop_assert!(a.sub(&b).unwrap().l2_norm() <= 1e-12 * f.l2_norm());
        }
    }
}
