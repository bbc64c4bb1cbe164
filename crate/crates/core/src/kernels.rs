//! Fourier multipliers homogeneous of degree zero.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{FftWorkspace, GridFunction, SpectralGrid, C64};
use crate::resonance::WaveVector;

const CUSTOM_SPOT_CHECKS: usize = 32;
const CUSTOM_SEED: u64 = 0x5eed_0e7e;

type SymbolFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum KernelKind {
    Identity,
    Zero,
    DaveyStewartson,
    Dipolar { axis: [f64; 3] },
    Custom { name: String, symbol: Arc<SymbolFn> },
}

impl fmt::Debug for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelKind::Identity => f.write_str("Identity"),
            KernelKind::Zero => f.write_str("Zero"),
            KernelKind::DaveyStewartson => f.write_str("DaveyStewartson"),
            KernelKind::Dipolar { axis } => f.debug_struct("Dipolar").field("axis", axis).finish(),
            KernelKind::Custom { name, .. } => {
                f.debug_struct("Custom").field("name", name).finish()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    kind: KernelKind,
    dim: usize,
}

impl KernelSpec {
    pub fn identity(dim: usize) -> Self {
        Self {
            kind: KernelKind::Identity,
            dim,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            kind: KernelKind::Zero,
            dim,
        }
    }

    pub fn davey_stewartson() -> Self {
        Self {
            kind: KernelKind::DaveyStewartson,
            dim: 2,
        }
    }

    pub fn dipolar(axis: [f64; 3]) -> Result<Self> {
        let norm = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!(
                "dipole axis must be a unit vector, |axis| = {norm}"
            )));
        }
        Ok(Self {
            kind: KernelKind::Dipolar { axis },
            dim: 3,
        })
    }

    /// Wraps a user symbol after randomized checks of reality, evenness and
    /// degree-zero homogeneity.
    pub fn custom(
        dim: usize,
        name: impl Into<String>,
        symbol: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(CUSTOM_SEED);
        let mut xi = vec![0.0; dim];
        let mut neg = vec![0.0; dim];
        let mut scaled = vec![0.0; dim];
        for _ in 0..CUSTOM_SPOT_CHECKS {
            loop {
                for (a, (b, c)) in xi.iter_mut().zip(neg.iter_mut().zip(scaled.iter_mut())) {
                    *a = rng.gen_range(-4.0..4.0);
                    *b = -*a;
                    *c = 3.7 * *a;
                }
                if xi.iter().any(|v: &f64| v.abs() > 1e-3) {
                    break;
                }
            }
            let (p, m, s) = (symbol(&xi), symbol(&neg), symbol(&scaled));
            if !p.is_finite() || !m.is_finite() {
                return Err(Error::domain("custom kernel returned a non-finite value"));
            }
            let tol = 1e-12 * (1.0 + p.abs());
            if (p - m).abs() > tol {
                return Err(Error::domain(format!(
                    "custom kernel is not even at {xi:?}"
                )));
            }
            if (p - s).abs() > tol {
                return Err(Error::domain(format!(
                    "custom kernel is not homogeneous of degree zero at {xi:?}"
                )));
            }
        }
        Ok(Self {
            kind: KernelKind::Custom {
                name: name.into(),
                symbol: Arc::new(symbol),
            },
            dim,
        })
    }

    /// Parses `identity`, `zero`, `ds` or `dipolar:ax,ay,az`.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        let text = text.trim();
        let spec = match text {
            "identity" => Self::identity(dim),
            "zero" => Self::zero(dim),
            "ds" => Self::davey_stewartson(),
            _ => {
                let Some(rest) = text.strip_prefix("dipolar:") else {
                    return Err(Error::domain(format!("unknown kernel '{text}'")));
                };
                let parts: Vec<f64> = rest
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::domain(format!("bad dipole axis '{rest}': {e}")))?;
                let axis: [f64; 3] = parts
                    .try_into()
                    .map_err(|_| Error::domain("dipole axis needs three components"))?;
                Self::dipolar(axis)?
            }
        };
        if spec.dim != dim {
            return Err(Error::structural(format!(
                "kernel '{text}' needs dimension {}, got {dim}",
                spec.dim
            )));
        }
        Ok(spec)
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Config string for built-in kernels.
    pub fn label(&self) -> String {
        match &self.kind {
            KernelKind::Identity => "identity".into(),
            KernelKind::Zero => "zero".into(),
            KernelKind::DaveyStewartson => "ds".into(),
            KernelKind::Dipolar { axis } => format!("dipolar:{},{},{}", axis[0], axis[1], axis[2]),
            KernelKind::Custom { name, .. } => format!("custom:{name}"),
        }
    }

    pub fn evaluate(&self, xi: &[f64]) -> Result<f64> {
        if xi.len() != self.dim {
            return Err(Error::structural(format!(
                "frequency has length {}, kernel dimension is {}",
                xi.len(),
                self.dim
            )));
        }
        let sq: f64 = xi.iter().map(|v| v * v).sum();
        if sq == 0.0 {
            return Err(Error::domain("kernel symbol is undefined at the origin"));
        }
        Ok(self.symbol_unchecked(xi, sq))
    }

    fn symbol_unchecked(&self, xi: &[f64], sq: f64) -> f64 {
        match &self.kind {
            KernelKind::Identity => 1.0,
            KernelKind::Zero => 0.0,
            KernelKind::DaveyStewartson => xi[0] * xi[0] / sq,
            KernelKind::Dipolar { axis } => {
                let c: f64 = axis.iter().zip(xi).map(|(a, b)| a * b).sum();
                dipolar_prefactor() * (3.0 * c * c / sq - 1.0)
            }
            KernelKind::Custom { symbol, .. } => symbol(xi),
        }
    }

    /// Multiplier used for the zero Fourier mode. Constant symbols keep
    /// their value; genuinely direction-dependent ones use 0.
    pub fn zero_mode_value(&self) -> f64 {
        match self.kind {
            KernelKind::Identity => 1.0,
            _ => 0.0,
        }
    }

    /// Value of the symbol at a point, with the zero-mode convention at 0.
    pub fn symbol_or_zero_mode(&self, xi: &[f64]) -> f64 {
        let sq: f64 = xi.iter().map(|v| v * v).sum();
        if sq == 0.0 {
            self.zero_mode_value()
        } else {
            self.symbol_unchecked(xi, sq)
        }
    }

    /// Symbol on the grid lattice, FFT order.
    pub fn multiplier(&self, grid: &SpectralGrid) -> Result<Vec<f64>> {
        self.check_grid(grid)?;
        let mut xi = vec![0.0; grid.dim()];
        Ok((0..grid.len())
            .map(|flat| {
                grid.frequency(flat, &mut xi);
                self.symbol_or_zero_mode(&xi)
            })
            .collect())
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        let mut op = KernelOperator::new(self, f.grid())?;
        let mut values = f.values().to_vec();
        op.apply_in_place(&mut values);
        GridFunction::new(*f.grid(), values)
    }

    fn check_grid(&self, grid: &SpectralGrid) -> Result<()> {
        if grid.dim() != self.dim {
            return Err(Error::structural(format!(
                "kernel dimension {} does not match grid dimension {}",
                self.dim,
                grid.dim()
            )));
        }
        Ok(())
    }
}

/// `(2/3)(2 pi)^{5/2}`, the dipolar coupling prefactor.
pub fn dipolar_prefactor() -> f64 {
    2.0 / 3.0 * (2.0 * PI).powf(2.5)
}

/// Kernel with its lattice multiplier and FFT plans precomputed, for
/// repeated application on one grid.
#[derive(Debug)]
pub struct KernelOperator {
    inner: Operator,
}

#[derive(Debug)]
enum Operator {
    Scalar(f64),
    Spectral {
        multiplier: Vec<f64>,
        ws: FftWorkspace,
    },
}

impl KernelOperator {
    pub fn new(kernel: &KernelSpec, grid: &SpectralGrid) -> Result<Self> {
        kernel.check_grid(grid)?;
        let inner = match kernel.kind {
            KernelKind::Identity => Operator::Scalar(1.0),
            KernelKind::Zero => Operator::Scalar(0.0),
            _ => Operator::Spectral {
                multiplier: kernel.multiplier(grid)?,
                ws: FftWorkspace::new(grid),
            },
        };
        Ok(Self { inner })
    }

    pub fn apply_in_place(&mut self, data: &mut [C64]) {
        match &mut self.inner {
            Operator::Scalar(c) => {
                if *c != 1.0 {
                    data.iter_mut().for_each(|v| *v *= *c);
                }
            }
            Operator::Spectral { multiplier, ws } => {
                ws.forward_in_place(data);
                for (v, m) in data.iter_mut().zip(multiplier.iter()) {
                    *v *= *m;
                }
                ws.inverse_in_place(data);
            }
        }
    }
}

/// `|| e^{-i kappa.x/eps} E(A e^{i kappa.x/eps}) - K(kappa) A ||_{L^2}` for
/// each `eps`.
///
/// Demodulation turns the left term into the multiplier
/// `K(zeta + kappa/eps)` acting on `A`, so it is evaluated on the lattice of
/// `A`'s grid without resolving the carrier. The carrier must still be a
/// lattice frequency so the modulated field is periodic.
pub fn oscillatory_coefficient_limit(
    kernel: &KernelSpec,
    kappa: &WaveVector,
    a: &GridFunction,
    eps_list: &[f64],
) -> Result<Vec<f64>> {
    let grid = *a.grid();
    kernel.check_grid(&grid)?;
    if kappa.dim() != grid.dim() {
        return Err(Error::structural(
            "wave vector dimension does not match grid",
        ));
    }
    if kappa.is_zero() {
        return Err(Error::domain("kappa must be nonzero"));
    }
    let kf = kappa.to_f64();
    let k_kappa = kernel.evaluate(&kf)?;
    let coeffs = crate::grid::forward_transform(a);
    let mut zeta = vec![0.0; grid.dim()];
    let mut shifted = vec![0.0; grid.dim()];
    eps_list
        .iter()
        .map(|&eps| {
            if !(eps > 0.0) {
                return Err(Error::domain(format!("eps must be positive, got {eps}")));
            }
            let carrier: Vec<f64> = kf.iter().map(|k| k / eps).collect();
            if carrier.iter().any(|&c| grid.lattice_index(c).is_none()) {
                return Err(Error::domain(format!(
                    "carrier kappa/eps = {carrier:?} is not on the frequency lattice of step {}",
                    grid.frequency_step()
                )));
            }
            let mut acc = 0.0;
            for (flat, c) in coeffs.coeffs().iter().enumerate() {
                grid.frequency(flat, &mut zeta);
                for ((s, z), w) in shifted.iter_mut().zip(&zeta).zip(&carrier) {
                    *s = z + w;
                }
                let m = kernel.symbol_or_zero_mode(&shifted) - k_kappa;
                acc += m * m * c.norm_sqr();
            }
            Ok((acc * grid.spectral_cell()).sqrt())
        })
        .collect()
}
