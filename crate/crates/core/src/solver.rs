//! Split-step Fourier solver for
//!
//! ```text
//! i eps d_t u + (eps^2 / 2) Delta_eta u = eps^J (lambda E(|u|^{2nu}) + mu |u|^{2nu}) u
//! ```
//!
//! and assembly of the multiphase approximation
//! `u_app = sum_j a_j(t, x) e^{i phi_j(t, x) / eps}` with
//! `phi_j = kappa_j . x - (t/2) sum_m eta_m kappa_{j,m}^2`.

use crate::error::{ConfigCode, Error, Result};
use crate::grid::{FftWorkspace, GridFunction, SpectralGrid, C64};
use crate::kernels::{KernelOperator, KernelSpec};
use crate::norms::wiener_norm;
use crate::resonance::{Signature, WaveVector};
use crate::transport::{ProfileSet, TransportParams};

#[derive(Debug, Clone)]
pub struct ModelParams {
    pub eps: f64,
    pub j_exponent: f64,
    pub lambda: f64,
    pub mu: f64,
    pub nu: usize,
    pub signature: Signature,
    pub kernel: KernelSpec,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::domain(format!(
                "eps must lie in (0, 1], got {}",
                self.eps
            )));
        }
        if !(self.j_exponent >= 1.0) {
            return Err(Error::domain(format!(
                "J must be at least 1, got {}",
                self.j_exponent
            )));
        }
        if self.nu == 0 {
            return Err(Error::domain("nu must be at least 1"));
        }
        if self.kernel.dim() != self.signature.dim() {
            return Err(Error::structural("kernel and signature dimensions differ"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.signature.dim()
    }

    /// `eps^{J-1}`, the coupling left after dividing the equation by `eps`.
    pub fn weight(&self) -> f64 {
        self.eps.powf(self.j_exponent - 1.0)
    }

    pub fn transport_params(&self) -> TransportParams {
        TransportParams::new(self.lambda, self.mu, self.nu, self.kernel.clone())
            .with_weight(self.weight())
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        Self {
            eps,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SemiclassicalField {
    field: GridFunction,
    time: f64,
    params: ModelParams,
}

impl SemiclassicalField {
    pub fn new(field: GridFunction, time: f64, params: ModelParams) -> Result<Self> {
        params.validate()?;
        if field.grid().dim() != params.dim() {
            return Err(Error::structural("field dimension differs from the model"));
        }
        Ok(Self {
            field,
            time,
            params,
        })
    }

    pub fn field(&self) -> &GridFunction {
        &self.field
    }

    pub fn grid(&self) -> &SpectralGrid {
        self.field.grid()
    }

    pub fn values(&self) -> &[C64] {
        self.field.values()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn mass(&self) -> f64 {
        self.field.l2_norm_sq()
    }
}

/// Points per axis required to resolve carriers up to `max_l1 = max |kappa|_1`.
pub fn required_points(max_l1: i64, eps: f64, half_length: f64) -> f64 {
    8.0 * (max_l1 as f64 / eps) * half_length / std::f64::consts::PI
}

/// Smallest admissible power of two (at least `floor`) for the rule above.
pub fn auto_points(max_l1: i64, eps: f64, half_length: f64, floor: usize) -> usize {
    let need = required_points(max_l1, eps, half_length).ceil() as usize;
    need.max(floor).max(4).next_power_of_two()
}

pub fn check_resolution(grid: &SpectralGrid, phases: &[WaveVector], eps: f64) -> Result<()> {
    let max_l1 = phases.iter().map(WaveVector::l1_norm).max().unwrap_or(0);
    let need = required_points(max_l1, eps, grid.half_length());
    if (grid.points_per_axis() as f64) < need - 1e-9 {
        return Err(Error::config(
            ConfigCode::Resolution,
            format!(
                "n = {} per axis is below the resolution rule 8 (max|kappa|_1 / eps) L / pi = {need:.1} (eps = {eps})",
                grid.points_per_axis()
            ),
        ));
    }
    Ok(())
}

/// Values of `eps <= 1` for which every integer carrier `kappa / eps` is a
/// lattice frequency, when `L = pi M`.
pub fn admissible_eps(half_length: f64, count: usize) -> Vec<f64> {
    let m = half_length / std::f64::consts::PI;
    let mr = m.round();
    if (m - mr).abs() > 1e-12 || mr < 1.0 {
        return Vec::new();
    }
    let mr = mr as u64;
    (mr..).take(count).map(|k| mr as f64 / k as f64).collect()
}

/// Lattice frequency `kappa / eps`, or a domain error listing admissible
/// values of `eps`.
pub fn carrier(grid: &SpectralGrid, kappa: &WaveVector, eps: f64) -> Result<Vec<f64>> {
    let xi: Vec<f64> = kappa.to_f64().iter().map(|k| k / eps).collect();
    if xi.iter().any(|&c| grid.lattice_index(c).is_none()) {
        let list = admissible_eps(grid.half_length(), 6);
        return Err(Error::domain(format!(
            "kappa/eps = {xi:?} is off the frequency lattice for L = {}; admissible eps: {}",
            grid.half_length(),
            if list.is_empty() {
                "none (L must be an integer multiple of pi)".to_string()
            } else {
                list.iter()
                    .map(|e| format!("{e:.6}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            }
        )));
    }
    Ok(xi)
}

/// `u_0 = sum_j alpha_j e^{i kappa_j . x / eps}`.
pub fn oscillatory_initial_data(
    grid: &SpectralGrid,
    phases: &[WaveVector],
    alphas: &[GridFunction],
    params: &ModelParams,
) -> Result<SemiclassicalField> {
    params.validate()?;
    if phases.len() != alphas.len() {
        return Err(Error::structural("one amplitude per phase is required"));
    }
    let mut sum = GridFunction::zeros(*grid);
    for (k, a) in phases.iter().zip(alphas) {
        grid.ensure_same(a.grid())?;
        let xi = carrier(grid, k, params.eps)?;
        sum = sum.add(&a.modulate(&xi)?)?;
    }
    SemiclassicalField::new(sum, 0.0, params.clone())
}

/// Strang splitting with exact free flow and exact nonlinear substep.
struct SplitStep {
    ws: FftWorkspace,
    kernel: Option<KernelOperator>,
    quad: Vec<f64>,
    density: Vec<C64>,
    eps: f64,
    weight: f64,
    lambda: f64,
    mu: f64,
    nu: usize,
}

impl SplitStep {
    fn new(u: &SemiclassicalField) -> Result<Self> {
        let p = &u.params;
        let grid = u.grid();
        let etas = p.signature.etas().to_vec();
        let kernel = if p.lambda != 0.0 {
            Some(KernelOperator::new(&p.kernel, grid)?)
        } else {
            None
        };
        Ok(Self {
            ws: FftWorkspace::new(grid),
            kernel,
            quad: grid.separable_frequency_sum(|a, xi| etas[a] as f64 * xi * xi),
            density: vec![C64::new(0.0, 0.0); grid.len()],
            eps: p.eps,
            weight: p.weight(),
            lambda: p.lambda,
            mu: p.mu,
            nu: p.nu,
        })
    }

    // Multiplies the coefficient at xi by exp(-i (eps t / 2) sum eta xi^2).
    fn free(&mut self, u: &mut [C64], t: f64) {
        if t == 0.0 {
            return;
        }
        self.ws.forward_in_place(u);
        let c = -0.5 * self.eps * t;
        for (v, q) in u.iter_mut().zip(&self.quad) {
            *v *= C64::from_polar(1.0, c * q);
        }
        self.ws.inverse_in_place(u);
    }

    // |u| is conserved pointwise, so the potential is frozen over the substep.
    fn nonlinear(&mut self, u: &mut [C64], t: f64) {
        let nu = self.nu as i32;
        for (d, v) in self.density.iter_mut().zip(u.iter()) {
            *d = C64::new(v.norm_sqr().powi(nu), 0.0);
        }
        if let Some(op) = self.kernel.as_mut() {
            let mut e = self.density.clone();
            op.apply_in_place(&mut e);
            for ((v, d), ev) in u.iter_mut().zip(&self.density).zip(&e) {
                let pot = self.lambda * ev.re + self.mu * d.re;
                *v *= C64::from_polar(1.0, -t * self.weight * pot);
            }
        } else {
            for (v, d) in u.iter_mut().zip(&self.density) {
                *v *= C64::from_polar(1.0, -t * self.weight * self.mu * d.re);
            }
        }
    }
}

/// Evolves to `t_end` (forwards or backwards) with uniform steps of size at
/// most `dt`.
pub fn evolve_semiclassical(
    u: &SemiclassicalField,
    t_end: f64,
    dt: f64,
) -> Result<SemiclassicalField> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("dt must be positive, got {dt}")));
    }
    let span = t_end - u.time;
    let steps = (span.abs() / dt - 1e-9).ceil().max(0.0) as usize;
    let mut out = u.clone();
    if steps == 0 {
        out.time = t_end;
        return Ok(out);
    }
    let h = span / steps as f64;
    let mut s = SplitStep::new(u)?;
    let values = out.field.values_mut();
    s.free(values, h / 2.0);
    for k in 0..steps {
        s.nonlinear(values, h);
        s.free(values, if k + 1 == steps { h / 2.0 } else { h });
    }
    out.time = t_end;
    Ok(out)
}

/// `sum_j a_j e^{i phi_j / eps}` on `grid`, interpolating the profiles if
/// they live on another grid of the same box.
pub fn assemble_approximation(
    profiles: &ProfileSet,
    params: &ModelParams,
    grid: &SpectralGrid,
) -> Result<SemiclassicalField> {
    let t = profiles.time();
    let set = profiles.phase_set();
    if set.signature() != &params.signature {
        return Err(Error::structural(
            "profile signature differs from the model",
        ));
    }
    let mut sum = GridFunction::zeros(*grid);
    for (k, a) in set.vectors().iter().zip(profiles.amplitudes()) {
        let xi = carrier(grid, k, params.eps)?;
        let a = a.resample(grid)?;
        let omega = params.signature.quadratic(k) as f64;
        let phase = C64::from_polar(1.0, -0.5 * t * omega / params.eps);
        sum = sum.add(&a.modulate(&xi)?.scale(phase))?;
    }
    SemiclassicalField::new(sum, t, params.clone())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub sup: f64,
    pub wiener: f64,
}

pub fn approximation_error(
    u: &SemiclassicalField,
    u_app: &SemiclassicalField,
) -> Result<ErrorNorms> {
    let diff = u.field.sub(&u_app.field)?;
    if (u.time - u_app.time).abs() > 1e-12 * (1.0 + u.time.abs()) {
        return Err(Error::structural(format!(
            "times differ: {} vs {}",
            u.time, u_app.time
        )));
    }
    Ok(ErrorNorms {
        l2: diff.l2_norm(),
        sup: diff.sup_norm(),
        wiener: wiener_norm(&diff),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{forward_transform, shift_in_fourier};
    use crate::resonance::close_phase_set;
    use crate::transport::{evolve_profiles, key_layout};
    use std::f64::consts::PI;

    fn params(eps: f64, lambda: f64, mu: f64, sig: Signature) -> ModelParams {
        let kernel = if lambda != 0.0 {
            KernelSpec::davey_stewartson()
        } else {
            KernelSpec::zero(2)
        };
        ModelParams {
            eps,
            j_exponent: 1.0,
            lambda,
            mu,
            nu: 1,
            signature: sig,
            kernel,
        }
    }

    fn gauss(grid: SpectralGrid, amp: f64, width: f64) -> GridFunction {
        GridFunction::from_fn(grid, |x| {
            C64::new(
                amp * (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * width * width)).exp(),
                0.0,
            )
        })
    }

    fn rel_l2(a: &GridFunction, b: &GridFunction) -> f64 {
        a.sub(b).unwrap().l2_norm() / b.l2_norm()
    }

    #[test]
    fn resolution_and_lattice_rules() {
        let g = SpectralGrid::new(2, 5.0 * PI, 256).unwrap();
        let k = key_layout(2).unwrap();
        assert!(carrier(&g, &k[0], 0.3).is_err());
        let err = carrier(&g, &k[0], 0.3).unwrap_err().to_string();
        assert!(err.contains("1.000000, 0.833333"), "{err}");
        assert!(carrier(&g, &k[1], 0.5).is_ok());
        // 8 * 2 / 0.25 * 5 = 320 > 256
        assert!(matches!(
            check_resolution(&g, &k, 0.25),
            Err(Error::Config {
                code: ConfigCode::Resolution,
                ..
            })
        ));
        assert!(check_resolution(&g, &k, 0.5).is_ok());
        assert_eq!(auto_points(2, 1.0 / 32.0, PI, 64), 512);
    }

    #[test]
    fn plane_wave_initial_data() {
        let g = SpectralGrid::new(2, PI, 32).unwrap();
        let p = params(0.25, 0.0, 1.0, Signature::elliptic(2));
        let k = WaveVector::new(vec![1, -1]);
        let one = GridFunction::from_fn(g, |_| C64::new(1.0, 0.0));
        let u = oscillatory_initial_data(&g, &[k], &[one], &p).unwrap();
        let s = forward_transform(u.field());
        let nonzero: Vec<_> = s.coeffs().iter().filter(|c| c.norm() > 1e-10).collect();
        assert_eq!(nonzero.len(), 1);
        assert!(s.at(&[4, -4]).unwrap().norm() > 1.0);
    }

    #[test]
    fn free_flow_is_exact() {
        let g = SpectralGrid::new(2, PI, 32).unwrap();
        let p = params(0.5, 0.0, 0.0, Signature::new(vec![-1, 1]).unwrap());
        let u0 = SemiclassicalField::new(gauss(g, 1.0, 0.6), 0.0, p.clone()).unwrap();
        let t = 0.7;
        let u = evolve_semiclassical(&u0, t, 0.1).unwrap();
        let s0 = forward_transform(u0.field());
        let mut xi = [0.0; 2];
        let expect: Vec<C64> = s0
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                g.frequency(i, &mut xi);
                c * C64::from_polar(1.0, -0.5 * p.eps * t * (-xi[0] * xi[0] + xi[1] * xi[1]))
            })
            .collect();
        let s = forward_transform(u.field());
        let err: f64 = s
            .coeffs()
            .iter()
            .zip(&expect)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
        assert!(
            (wiener_norm(u.field()) - wiener_norm(u0.field())).abs()
                < 1e-12 * wiener_norm(u0.field())
        );
    }

    #[test]
    fn constant_solution() {
        let g = SpectralGrid::new(2, PI, 16).unwrap();
        let mut p = params(0.25, 0.0, 0.8, Signature::elliptic(2));
        p.j_exponent = 1.5;
        let c = C64::new(0.6, -0.3);
        let u0 = SemiclassicalField::new(GridFunction::from_fn(g, |_| c), 0.0, p.clone()).unwrap();
        let t = 1.3;
        let u = evolve_semiclassical(&u0, t, 0.05).unwrap();
        let expect = c * C64::from_polar(1.0, -0.8 * c.norm_sqr() * t * 0.25f64.powf(0.5));
        assert!(u.values().iter().all(|v| (v - expect).norm() < 1e-12));
    }

    #[test]
    fn null_direction_is_stationary() {
        let g = SpectralGrid::new(2, PI, 32).unwrap();
        let p = params(0.25, 0.0, 0.0, Signature::new(vec![-1, 1]).unwrap());
        let k = WaveVector::new(vec![1, 1]);
        let a = GridFunction::from_fn(g, |_| C64::new(0.7, 0.0));
        let u0 = oscillatory_initial_data(&g, &[k], &[a], &p).unwrap();
        let u = evolve_semiclassical(&u0, 2.0, 0.1).unwrap();
        assert!(u.field().sub(u0.field()).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn conservation_and_reversibility() {
        let g = SpectralGrid::new(2, PI, 64).unwrap();
        let p = params(0.25, 1.0, 0.5, Signature::elliptic(2));
        let phases = key_layout(2).unwrap();
        let alphas = vec![gauss(g, 1.0, 0.5), gauss(g, 0.8, 0.6), gauss(g, 1.1, 0.4)];
        let u0 = oscillatory_initial_data(&g, &phases, &alphas, &p).unwrap();
        let u = evolve_semiclassical(&u0, 0.5, 0.01).unwrap();
        assert!(((u.mass() - u0.mass()) / u0.mass()).abs() < 1e-8);
        let back = evolve_semiclassical(&u, 0.0, 0.01).unwrap();
        assert!(rel_l2(back.field(), u0.field()) < 1e-7);
    }

    #[test]
    fn splitting_is_second_order() {
        let g = SpectralGrid::new(2, PI, 64).unwrap();
        let p = params(0.5, 1.0, 1.0, Signature::elliptic(2));
        let phases = key_layout(2).unwrap();
        let alphas = vec![gauss(g, 1.0, 0.5), gauss(g, 0.8, 0.6), gauss(g, 1.1, 0.4)];
        let u0 = oscillatory_initial_data(&g, &phases, &alphas, &p).unwrap();
        let run = |dt| evolve_semiclassical(&u0, 0.4, dt).unwrap();
        let (a, b, c) = (run(0.02), run(0.01), run(0.005));
        let ratio = a.field().sub(b.field()).unwrap().l2_norm()
            / b.field().sub(c.field()).unwrap().l2_norm();
        assert!((3.4..4.6).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn galilean_invariance() {
        let g = SpectralGrid::new(2, PI, 128).unwrap();
        let eps = 0.25;
        let p = params(eps, 0.0, 1.0, Signature::elliptic(2));
        let a = GridFunction::from_fn(g, |x| {
            C64::new(
                (-3.0 * (x[0] * x[0] + 2.0 * x[1] * x[1])).exp(),
                0.3 * (-3.0 * ((x[0] - 0.2).powi(2) + x[1] * x[1])).exp(),
            )
        });
        // whole grid cells per half step keep the discrete scheme exactly covariant
        let v = [0.5, -0.5];
        let xi = [v[0] / eps, v[1] / eps];
        let h = PI / 16.0;
        let t = 4.0 * h;
        let u = evolve_semiclassical(
            &SemiclassicalField::new(a.clone(), 0.0, p.clone()).unwrap(),
            t,
            h,
        )
        .unwrap();
        let boosted = SemiclassicalField::new(a.modulate(&xi).unwrap(), 0.0, p.clone()).unwrap();
        let w = evolve_semiclassical(&boosted, t, h).unwrap();
        let v2 = v[0] * v[0] + v[1] * v[1];
        let expect = shift_in_fourier(u.field(), &v, t)
            .unwrap()
            .modulate(&xi)
            .unwrap()
            .scale(C64::from_polar(1.0, -0.5 * v2 * t / eps));
        let err = w.field().sub(&expect).unwrap().sup_norm();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn assembly_matches_data_and_free_modes() {
        let g = SpectralGrid::new(2, PI, 64).unwrap();
        let p = params(1.0 / 16.0, 0.0, 0.0, Signature::elliptic(2));
        let phases = key_layout(2).unwrap();
        let alphas = vec![gauss(g, 1.0, 0.5), gauss(g, 0.8, 0.6), gauss(g, 1.1, 0.4)];
        let set = close_phase_set(&phases, &p.signature, 1, 4, 4).unwrap();
        let prof = ProfileSet::new(set.clone(), alphas.clone(), p.transport_params()).unwrap();
        let u0 = oscillatory_initial_data(&g, &phases, &alphas, &p).unwrap();
        let app = assemble_approximation(&prof, &p, &g).unwrap();
        assert!(approximation_error(&u0, &app).unwrap().sup < 1e-14);
        let single = ProfileSet::new(
            crate::resonance::PhaseSet::from_vectors(
                vec![phases[1].clone()],
                p.signature.clone(),
                1,
            )
            .unwrap(),
            vec![alphas[1].clone()],
            p.transport_params(),
        )
        .unwrap();
        let t = 0.5;
        let u = evolve_semiclassical(
            &oscillatory_initial_data(&g, &phases[1..2], &alphas[1..2], &p).unwrap(),
            t,
            0.05,
        )
        .unwrap();
        let app =
            assemble_approximation(&evolve_profiles(&single, t, 0.05).unwrap(), &p, &g).unwrap();
        let e = approximation_error(&u, &app).unwrap();
        // the free flow also disperses the profile, at rate eps
        assert!(e.l2 < 0.1 * u.field().l2_norm());
        let zero =
            ProfileSet::new(set, vec![GridFunction::zeros(g); 3], p.transport_params()).unwrap();
        assert_eq!(
            assemble_approximation(&zero, &p, &g)
                .unwrap()
                .field()
                .sup_norm(),
            0.0
        );
    }
}
