//! Wiener, Sobolev and scaled-profile norms, and the closed-form Sobolev
//! norm of complex Gaussians.
//!
//! `<xi> = (1 + |xi|^2)^{1/2}` throughout. On a grid every sum runs over the
//! finite frequency lattice, so negative orders need no regularization.

use crate::error::{Error, Result};
use crate::grid::{forward_transform, GridFunction, SpectralGrid, C64};
use crate::resonance::WaveVector;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

/// `(sum <xi>^{2s} |F f(xi)|^2 (pi/L)^d)^{1/2}`.
pub fn sobolev_norm(f: &GridFunction, s: f64) -> f64 {
    let spec = forward_transform(f);
    let grid = f.grid();
    let total: f64 = if s == 0.0 {
        spec.coeffs().iter().map(|c| c.norm_sqr()).sum()
    } else {
        grid.frequency_sq_norms()
            .iter()
            .zip(spec.coeffs())
            .map(|(q, c)| (1.0 + q).powf(s) * c.norm_sqr())
            .sum()
    };
    (total * grid.spectral_cell()).sqrt()
}

/// `sum |F f(xi)| (pi/L)^d`, the continuum `||F f||_{L^1}`.
pub fn fourier_l1_norm(f: &GridFunction) -> f64 {
    let spec = forward_transform(f);
    spec.coeffs().iter().map(|c| c.norm()).sum::<f64>() * f.grid().spectral_cell()
}

/// Wiener norm normalized so that `c e^{i xi.x}` has norm `|c|`; this is
/// the `l^1` norm of the Fourier series coefficients.
pub fn wiener_norm(f: &GridFunction) -> f64 {
    fourier_l1_norm(f) * (2.0 * PI).powf(-(f.grid().dim() as f64) / 2.0)
}

#[derive(Debug, Clone)]
pub enum ProfileSource {
    Grid(GridFunction),
    /// `e^{-|x|^2/2}` in the given dimension.
    Gaussian {
        dim: usize,
    },
}

/// `I^eps(f, kappa)(x) = f(x eps^{(1-beta)/2}) e^{i kappa.x / eps^{(1+beta)/2}}`.
#[derive(Debug, Clone)]
pub struct ScaledProfileSpec {
    pub f: ProfileSource,
    pub kappa: WaveVector,
    pub beta: f64,
    pub eps: f64,
}

impl ScaledProfileSpec {
    /// Dilation factor `eps^{-(1-beta)/2}` of the profile.
    pub fn dilation(&self) -> f64 {
        self.eps.powf(-(1.0 - self.beta) / 2.0)
    }
}

// Grid for the Gaussian source: frequency step 1/8 and the carrier well
// inside the Nyquist band.
fn gaussian_grid(dim: usize, carrier: f64) -> Result<SpectralGrid> {
    let half_length = 8.0 * PI;
    let n = ((16.0 * (carrier + 12.0)).ceil() as usize)
        .max(128)
        .next_power_of_two();
    SpectralGrid::new(dim, half_length, n)
}

/// `||I^eps(f, kappa)||_{H^sigma}`.
///
/// In the variable `y = x eps^{(1-beta)/2}` the profile is `f(y) e^{i kappa.y / eps}`,
/// so it is built on the grid of `f` and the box is then dilated.
pub fn scaled_profile_norm(spec: &ScaledProfileSpec, sigma: f64) -> Result<f64> {
    if !(spec.beta > 0.0) {
        return Err(Error::domain(format!(
            "beta must be positive, got {}",
            spec.beta
        )));
    }
    if !(spec.eps > 0.0 && spec.eps <= 1.0) {
        return Err(Error::domain(format!(
            "eps must lie in (0, 1], got {}",
            spec.eps
        )));
    }
    if !spec.kappa.is_zero() && sigma > 0.0 {
        return Err(Error::domain(
            "sigma must be non-positive for an oscillating profile",
        ));
    }
    let xi: Vec<f64> = spec.kappa.to_f64().iter().map(|k| k / spec.eps).collect();
    let f = match &spec.f {
        ProfileSource::Grid(f) => f.clone(),
        ProfileSource::Gaussian { dim } => {
            let top = xi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let g = gaussian_grid(*dim, top)?;
            GridFunction::from_fn(g, |x| {
                C64::new((-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp(), 0.0)
            })
        }
    };
    let grid = *f.grid();
    if spec.kappa.dim() != grid.dim() {
        return Err(Error::structural("kappa and profile dimensions differ"));
    }
    for &c in &xi {
        if grid.lattice_index(c).is_none() {
            return Err(Error::domain(format!(
                "carrier {c} is off the frequency lattice of the profile grid"
            )));
        }
        if c.abs() >= grid.nyquist() {
            return Err(Error::domain(format!(
                "carrier {c} exceeds the Nyquist frequency {} of the profile grid",
                grid.nyquist()
            )));
        }
    }
    let modulated = if spec.kappa.is_zero() {
        f
    } else {
        f.modulate(&xi)?
    };
    let scaled = modulated.rescaled_box(grid.half_length() * spec.dilation())?;
    Ok(sobolev_norm(&scaled, sigma))
}

/// Squared `H^s` norm of `g_z = e^{-z|x|^2/2}` in dimension `d`,
/// `a^{-d/2} int <c eta>^{2s} e^{-|eta|^2} d eta` with `a = Re z` and
/// `c = |z| / sqrt(a)`, as a radial integral.
pub fn gaussian_sobolev_norm_sq(z: C64, s: f64, d: usize) -> Result<f64> {
    if !(z.re > 0.0) {
        return Err(Error::domain(format!(
            "Re z must be positive, got {}",
            z.re
        )));
    }
    if d == 0 {
        return Err(Error::domain("dimension must be positive"));
    }
    let a = z.re;
    let c = z.norm() / a.sqrt();
    let df = d as f64;
    let sphere = 2.0 * PI.powf(df / 2.0) / gamma(df / 2.0);
    let integrand = |r: f64| (1.0 + c * c * r * r).powf(s) * (-r * r).exp() * r.powi(d as i32 - 1);
    // e^{-r^2} r^{d-1} < 1e-16 beyond r = 6.5 for the dimensions in use
    let rmax = 6.5 + (df / 2.0).sqrt();
    let mut breaks = vec![0.0];
    let mut b = 1.0 / c;
    while b < rmax {
        breaks.push(b);
        b *= 2.0;
    }
    breaks.push(rmax);
    let total: f64 = breaks
        .windows(2)
        .map(|w| adaptive_gk(&integrand, w[0], w[1], 1e-13, 40))
        .sum();
    Ok(a.powf(-df / 2.0) * sphere * total)
}

pub fn gaussian_sobolev_norm(z: C64, s: f64, d: usize) -> Result<f64> {
    gaussian_sobolev_norm_sq(z, s, d).map(f64::sqrt)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::structural(
            "a slope fit needs at least two paired samples",
        ));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::domain("log-log fit needs positive finite samples"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("log-log fit needs distinct abscissae"));
    }
    Ok(sxy / sxx)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

// 15-point Kronrod estimate and its difference from the embedded 7-point Gauss rule.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let (u, v) = (f(c - h * XGK[i]), f(c + h * XGK[i]));
        kron += WGK[i] * (u + v);
        if i % 2 == 1 {
            gauss += WG[i / 2] * (u + v);
        }
    }
    (kron * h, (kron - gauss).abs() * h)
}

fn adaptive_gk(f: &impl Fn(f64) -> f64, a: f64, b: f64, rel: f64, depth: u32) -> f64 {
    let (val, err) = gk15(f, a, b);
    if depth == 0 || err <= rel * val.abs().max(1e-300) {
        return val;
    }
    let m = 0.5 * (a + b);
    adaptive_gk(f, a, m, rel, depth - 1) + adaptive_gk(f, m, b, rel, depth - 1)
}
