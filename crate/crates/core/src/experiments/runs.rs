use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind, ProfileKind};
use super::{Check, SweepResult};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, SpectralGrid, C64};
use crate::norms::{
    gaussian_sobolev_norm, log_log_slope, scaled_profile_norm, sobolev_norm, ProfileSource,
    ScaledProfileSpec,
};
use crate::resonance::{PhaseSet, WaveVector};
use crate::solver::{
    approximation_error, assemble_approximation, auto_points, check_resolution,
    evolve_semiclassical, oscillatory_initial_data, ErrorNorms, ModelParams, SemiclassicalField,
};
use crate::transport::{evolve_profiles, zero_mode_rate, ProfileSet};

/// Everything a run derives from its config once.
pub(crate) struct Setup {
    pub cfg: ExperimentConfig,
    pub params: ModelParams,
    pub phases: Vec<WaveVector>,
    pub set: PhaseSet,
    pub alphas: Vec<GridFunction>,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let params = cfg.model_params()?;
        let phases = cfg.initial_phases()?;
        let set = cfg.phase_set()?;
        let profile_grid =
            SpectralGrid::new(cfg.model.dim, cfg.half_length(), cfg.profile_points())?;
        let alphas = gaussian_amplitudes(cfg, &profile_grid);
        Ok(Self {
            cfg: cfg.clone(),
            params,
            phases,
            set,
            alphas,
        })
    }

    fn max_l1(&self) -> i64 {
        self.set
            .vectors()
            .iter()
            .map(WaveVector::l1_norm)
            .max()
            .unwrap_or(0)
    }

    pub fn solver_grid(&self, eps: f64) -> Result<SpectralGrid> {
        let l = self.cfg.half_length();
        let n = match self.cfg.grid.n {
            Some(n) => n,
            None => auto_points(self.max_l1(), eps, l, self.cfg.n_min()),
        };
        let grid = SpectralGrid::new(self.cfg.model.dim, l, n)?;
        check_resolution(&grid, self.set.vectors(), eps)?;
        Ok(grid)
    }

    /// `u^eps(0)` built from the profile-grid amplitudes, so that it equals
    /// the assembled approximation at `t = 0`.
    pub fn initial_field(&self, eps: f64, grid: &SpectralGrid) -> Result<SemiclassicalField> {
        let alphas = self
            .alphas
            .iter()
            .map(|a| a.resample(grid))
            .collect::<Result<Vec<_>>>()?;
        oscillatory_initial_data(grid, &self.phases, &alphas, &self.params.with_eps(eps))
    }

    pub fn profiles(&self, eps: f64) -> Result<ProfileSet> {
        ProfileSet::new(
            self.set.clone(),
            self.alphas.clone(),
            self.params.with_eps(eps).transport_params(),
        )
    }

    /// Profiles at each of the given times.
    pub fn profile_snapshots(&self, eps: f64, times: &[f64]) -> Result<Vec<ProfileSet>> {
        let mut state = self.profiles(eps)?;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            state = evolve_profiles(&state, t, self.cfg.dt())?;
            out.push(state.clone());
        }
        Ok(out)
    }

    fn zero_index(&self) -> Result<usize> {
        self.set
            .index_of(&WaveVector::zero(self.cfg.model.dim))
            .ok_or_else(|| Error::domain("the phase set does not contain the zero mode"))
    }
}

/// Gaussian initial profiles from the `data` section, sampled on `grid`.
pub fn gaussian_amplitudes(cfg: &ExperimentConfig, grid: &SpectralGrid) -> Vec<GridFunction> {
    let d = &cfg.data;
    (0..d.amplitudes.len())
        .map(|j| {
            let (a, w) = (d.amplitudes[j], d.widths[j]);
            let c = d
                .centers
                .as_ref()
                .map(|c| c[j].clone())
                .unwrap_or_else(|| vec![0.0; grid.dim()]);
            GridFunction::from_fn(*grid, |x| {
                let r2: f64 = x.iter().zip(&c).map(|(x, c)| (x - c) * (x - c)).sum();
                C64::new(a * (-r2 / (2.0 * w * w)).exp(), 0.0)
            })
        })
        .collect()
}

fn sample_times(t_final: f64, samples: usize) -> Vec<f64> {
    (0..=samples)
        .map(|k| t_final * k as f64 / samples as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub mass: f64,
    pub errors: ErrorNorms,
}

fn trajectory_with(
    setup: &Setup,
    eps: f64,
    times: &[f64],
    profiles: &[ProfileSet],
) -> Result<(usize, Vec<TrajectoryPoint>)> {
    let grid = setup.solver_grid(eps)?;
    let params = setup.params.with_eps(eps);
    let mut u = setup.initial_field(eps, &grid)?;
    let mut out = Vec::with_capacity(times.len());
    for (&t, prof) in times.iter().zip(profiles) {
        u = evolve_semiclassical(&u, t, setup.cfg.dt())?;
        let app = assemble_approximation(prof, &params, &grid)?;
        out.push(TrajectoryPoint {
            t,
            mass: u.mass(),
            errors: approximation_error(&u, &app)?,
        });
    }
    Ok((grid.points_per_axis(), out))
}

/// Exact and approximate fields compared at the sample times of `[0, T]`.
pub fn simulate_trajectory(cfg: &ExperimentConfig, eps: f64) -> Result<Vec<TrajectoryPoint>> {
    let setup = Setup::new(cfg)?;
    let times = sample_times(cfg.t_final()?, cfg.samples());
    let profiles = setup.profile_snapshots(eps, &times)?;
    Ok(trajectory_with(&setup, eps, &times, &profiles)?.1)
}

fn result(cfg: &ExperimentConfig, kind: ExperimentKind, columns: &[&str]) -> SweepResult {
    SweepResult {
        experiment: kind,
        columns: columns.iter().map(|c| c.to_string()).collect(),
        rows: Vec::new(),
        fitted_slopes: BTreeMap::new(),
        checks: Vec::new(),
        config: cfg.clone(),
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Sup-in-time errors of the multiphase approximation across the sweep.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let setup = Setup::new(cfg)?;
    let eps_list = cfg.eps_values()?.to_vec();
    let times = sample_times(cfg.t_final()?, cfg.samples());
    // with J = 1 the profiles do not depend on eps
    let shared = if cfg.model.j_exponent == 1.0 {
        Some(setup.profile_snapshots(1.0, &times)?)
    } else {
        None
    };
    let rows = eps_list
        .par_iter()
        .map(|&eps| {
            let own;
            let profiles = match &shared {
                Some(p) => p,
                None => {
                    own = setup.profile_snapshots(eps, &times)?;
                    &own
                }
            };
            let (n, traj) = trajectory_with(&setup, eps, &times, profiles)?;
            let worst = traj.iter().fold([0.0f64; 3], |m, p| {
                [
                    m[0].max(p.errors.l2),
                    m[1].max(p.errors.sup),
                    m[2].max(p.errors.wiener),
                ]
            });
            let m0 = traj[0].mass;
            let drift = traj
                .iter()
                .map(|p| ((p.mass - m0) / m0).abs())
                .fold(0.0, f64::max);
            Ok(vec![eps, n as f64, worst[0], worst[1], worst[2], drift])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut res = result(
        cfg,
        ExperimentKind::Converge,
        &["eps", "n", "l2_err", "sup_err", "wiener_err", "mass_drift"],
    );
    res.rows = rows;
    let l2 = res.column("l2_err").unwrap();
    if l2.iter().all(|e| *e == 0.0) {
        res.checks
            .push(check("zero_error", true, "all errors vanish".into()));
        return Ok(res);
    }
    for name in ["l2_err", "sup_err", "wiener_err"] {
        if let Ok(s) = log_log_slope(&eps_list, &res.column(name).unwrap()) {
            res.fitted_slopes.insert(name.to_string(), s);
        }
    }
    if cfg.t_final()? == 0.0 {
        res.checks.push(check(
            "zero_error",
            false,
            format!("errors {l2:?} at T = 0"),
        ));
    } else if cfg.model.lambda == 0.0 {
        let s = res.fitted_slopes.get("l2_err").copied().unwrap_or(f64::NAN);
        res.checks.push(check(
            "l2_slope",
            (0.9..=1.3).contains(&s),
            format!("L2 slope {s:.4}, expected in [0.9, 1.3]"),
        ));
    } else {
        res.checks.push(check(
            "l2_decreasing",
            strictly_decreasing(&l2),
            format!("L2 errors {l2:?}"),
        ));
    }
    Ok(res)
}

/// `||a_0(t)||_{L^2}` over `[0, T]` and the central-difference rate at `t = 0`.
pub fn run_zero_mode(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let setup = Setup::new(cfg)?;
    let zero = setup.zero_index()?;
    let t_final = cfg.t_final()?;
    let samples = cfg.samples.unwrap_or(50);
    let h = cfg.fd_dt.unwrap_or(1e-3);
    let initial = setup.profiles(1.0)?;

    let mut plus = initial.clone();
    plus.step(h)?;
    let mut minus = initial.clone();
    minus.step(-h)?;
    let fd = plus
        .amplitude(zero)
        .sub(minus.amplitude(zero))?
        .scale(C64::new(0.5 / h, 0.0));

    let p = &setup.params;
    let a = &setup.alphas;
    let expected = if p.nu == 1 {
        let k = &setup.phases;
        let c = p.lambda
            * (p.kernel.symbol_or_zero_mode(&k[0].to_f64())
                + p.kernel.symbol_or_zero_mode(&k[2].to_f64()))
            + 2.0 * p.mu;
        a[0].mul(&a[1].conj())?.mul(&a[2])?.scale(C64::new(0.0, -c))
    } else {
        zero_mode_rate(a, &p.transport_params())?
    };
    let scale = expected.sup_norm();
    let rate_err = fd.sub(&expected)?.sup_norm() / if scale > 0.0 { scale } else { 1.0 };

    let times = sample_times(t_final, samples);
    let snaps = setup.profile_snapshots(1.0, &times)?;
    let mut res = result(cfg, ExperimentKind::ZeroMode, &["t", "a0_l2", "total_mass"]);
    res.rows = times
        .iter()
        .zip(&snaps)
        .map(|(&t, s)| vec![t, s.amplitude(zero).l2_norm(), s.total_mass()])
        .collect();
    let a0_max = res
        .column("a0_l2")
        .unwrap()
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    res.fitted_slopes.insert("rate_rel_err".into(), rate_err);
    if scale == 0.0 {
        let bound = 1e-6 * a[0].l2_norm().powi(3);
        res.checks.push(check(
            "a0_flat",
            a0_max <= bound,
            format!("max ||a0|| = {a0_max:e}, bound {bound:e}"),
        ));
    } else {
        res.checks.push(check(
            "rate",
            rate_err <= 1e-4,
            format!("relative rate error {rate_err:e} at dt = {h}"),
        ));
    }
    let m0 = initial.total_mass();
    let drift = res
        .column("total_mass")
        .unwrap()
        .iter()
        .map(|m| ((m - m0) / m0).abs())
        .fold(0.0, f64::max);
    res.checks.push(check(
        "mass",
        drift <= 1e-8,
        format!("relative mass drift {drift:e}"),
    ));
    Ok(res)
}

/// `||u^eps(0)||_{H^s}` against `||u^eps(T)||_{H^s}` with weight `eps^{J-1}`.
pub fn run_more_weakly(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let setup = Setup::new(cfg)?;
    let s = cfg.s()?;
    let t_final = cfg.t_final()?;
    let eps_list = cfg.eps_values()?.to_vec();
    let zero = setup.zero_index()?;
    let rows = eps_list
        .par_iter()
        .map(|&eps| {
            let grid = setup.solver_grid(eps)?;
            let u0 = setup.initial_field(eps, &grid)?;
            let u1 = evolve_semiclassical(&u0, t_final, cfg.dt())?;
            let prof = evolve_profiles(&setup.profiles(eps)?, t_final, cfg.dt())?;
            let initial = sobolev_norm(u0.field(), s);
            let fin = sobolev_norm(u1.field(), s);
            let a0 = sobolev_norm(prof.amplitude(zero), s);
            Ok(vec![
                eps,
                grid.points_per_axis() as f64,
                initial,
                fin,
                fin / initial,
                a0,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut res = result(
        cfg,
        ExperimentKind::MoreWeakly,
        &["eps", "n", "hs_initial", "hs_final", "ratio", "a0_hs"],
    );
    res.rows = rows;
    let j = cfg.model.j_exponent;
    let ratio = res.column("ratio").unwrap();
    let slope_final = log_log_slope(&eps_list, &res.column("hs_final").unwrap())?;
    let slope_initial = log_log_slope(&eps_list, &res.column("hs_initial").unwrap())?;
    res.fitted_slopes.insert("hs_final".into(), slope_final);
    res.fitted_slopes.insert("hs_initial".into(), slope_initial);
    if let Ok(sa) = log_log_slope(&eps_list, &res.column("a0_hs").unwrap()) {
        res.fitted_slopes.insert("a0_hs".into(), sa);
    }
    if cfg.expect_growth.unwrap_or(true) {
        res.checks.push(check(
            "final_slope",
            (slope_final - (j - 1.0)).abs() <= 0.15,
            format!("slope {slope_final:.4}, expected {} +- 0.15", j - 1.0),
        ));
        res.checks.push(check(
            "initial_slope",
            (slope_initial - s.abs()).abs() <= 0.15,
            format!("slope {slope_initial:.4}, expected {} +- 0.15", s.abs()),
        ));
        let last = *ratio.last().unwrap();
        res.checks.push(check(
            "crossing",
            last > 10.0,
            format!("final/initial = {last:.4} at the smallest eps, expected > 10"),
        ));
    } else {
        let top = ratio.iter().cloned().fold(0.0, f64::max);
        res.checks.push(check(
            "no_crossing",
            top < 2.0,
            format!("largest final/initial ratio {top:.4}"),
        ));
    }
    Ok(res)
}

/// First interior local maximum of `||a_0||` on the sample times, else `T`.
fn zero_mode_peak(setup: &Setup, eps: f64, t_final: f64, samples: usize) -> Result<(f64, f64)> {
    let zero = setup.zero_index()?;
    let times = sample_times(t_final, samples);
    let snaps = setup.profile_snapshots(eps, &times)?;
    let norms: Vec<f64> = snaps.iter().map(|s| s.amplitude(zero).l2_norm()).collect();
    for k in 1..norms.len().saturating_sub(1) {
        if norms[k] > 0.0 && norms[k] >= norms[k - 1] && norms[k] > norms[k + 1] {
            return Ok((times[k], norms[k]));
        }
    }
    Ok((t_final, *norms.last().unwrap()))
}

/// Norm-inflation sequence: `phi_n = psi_n(0)` in `H^s` and `psi_n(t_n)` in
/// `H^sigma` read off `u^eps` through the scaling
/// `u^eps(t, x) = eps^{(beta+1-J)/(2 nu)} psi(eps^beta t, eps^{(beta-1)/2} x)`.
pub fn run_inflation(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let setup = Setup::new(cfg)?;
    let (s, sigma, beta) = (cfg.s()?, cfg.sigma()?, cfg.beta());
    let (d, nu, j) = (
        cfg.model.dim as f64,
        cfg.model.nu as f64,
        cfg.model.j_exponent,
    );
    let t_final = cfg.t_final()?;
    let samples = cfg.samples.unwrap_or(40);
    let eps_list = cfg.eps_values()?.to_vec();
    let p = (beta + 1.0 - j) / (2.0 * nu);
    let shared = if j == 1.0 {
        Some(zero_mode_peak(&setup, 1.0, t_final, samples)?)
    } else {
        None
    };
    let rows = eps_list
        .par_iter()
        .map(|&eps| {
            let (tau, a0) = match shared {
                Some(v) => v,
                None => zero_mode_peak(&setup, eps, t_final, samples)?,
            };
            let grid = setup.solver_grid(eps)?;
            let u0 = setup.initial_field(eps, &grid)?;
            let u1 = evolve_semiclassical(&u0, tau, cfg.dt())?;
            let box_l = grid.half_length() * eps.powf(-(1.0 - beta) / 2.0);
            let amp = eps.powf(-p);
            let phi = amp * sobolev_norm(&u0.field().rescaled_box(box_l)?, s);
            let psi = amp * sobolev_norm(&u1.field().rescaled_box(box_l)?, sigma);
            Ok(vec![
                eps,
                grid.points_per_axis() as f64,
                tau,
                phi,
                psi,
                psi * psi,
                a0,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut res = result(
        cfg,
        ExperimentKind::Inflate,
        &[
            "eps",
            "n",
            "tau",
            "phi_hs",
            "psi_hsigma",
            "psi_hsigma_sq",
            "a0_l2",
        ],
    );
    res.rows = rows;
    let phi = res.column("phi_hs").unwrap();
    let psi_sq = res.column("psi_hsigma_sq").unwrap();
    let predicted = 2.0 * (j - 1.0) - (beta + 1.0 - j) / nu - d * (1.0 - beta) / 2.0;
    let slope = log_log_slope(&eps_list, &psi_sq)?;
    res.fitted_slopes.insert("psi_hsigma_sq".into(), slope);
    res.fitted_slopes
        .insert("phi_hs".into(), log_log_slope(&eps_list, &phi)?);
    let growth: Vec<f64> = (1..psi_sq.len())
        .map(|i| (psi_sq[i] / psi_sq[i - 1]).powf(1.0 / (eps_list[i - 1] / eps_list[i]).log2()))
        .collect();
    if cfg.expect_growth.unwrap_or(true) {
        res.checks.push(check(
            "phi_decreasing",
            strictly_decreasing(&phi),
            format!("||phi_n||_H^s = {phi:?}"),
        ));
        res.checks.push(check(
            "psi_growth",
            growth.iter().all(|g| *g >= 1.5),
            format!("growth of ||psi_n(t_n)||^2 per halving {growth:?}, expected >= 1.5"),
        ));
        res.checks.push(check(
            "psi_exponent",
            (slope - predicted).abs() <= 0.15,
            format!("exponent {slope:.4}, expected {predicted} +- 0.15"),
        ));
    } else {
        res.checks.push(check(
            "no_growth",
            growth.iter().all(|g| *g < 1.5),
            format!("growth of ||psi_n(t_n)||^2 per halving {growth:?}"),
        ));
    }
    Ok(res)
}

/// Predicted log-slope of the norm against `eps`.
pub fn predicted_sobolev_slope(
    kind: ProfileKind,
    d: usize,
    s: f64,
    beta: f64,
    kappa_zero: bool,
) -> f64 {
    let d = d as f64;
    let wkb = if s > -d / 2.0 { -s } else { d / 2.0 };
    match kind {
        ProfileKind::Wkb => wkb,
        ProfileKind::Coherent => wkb / 2.0,
        ProfileKind::Scaled if kappa_zero => {
            if beta < 1.0 {
                (beta - 1.0) * d / 4.0
            } else {
                (beta - 1.0) * (d - 2.0 * s) / 4.0
            }
        }
        ProfileKind::Scaled => ((1.0 + beta) * s.abs() - d * (1.0 - beta) / 2.0) / 2.0,
    }
}

pub fn sobolev_profile_norm(cfg: &ExperimentConfig, eps: f64) -> Result<f64> {
    let sob = cfg
        .sobolev
        .as_ref()
        .ok_or_else(|| Error::domain("missing sobolev section"))?;
    let (d, s) = (cfg.model.dim, cfg.s()?);
    match sob.profile {
        ProfileKind::Wkb => gaussian_sobolev_norm(Complex64::new(1.0, 1.0 / eps), s, d),
        ProfileKind::Coherent => Ok(eps.powf(-(d as f64) / 4.0)
            * gaussian_sobolev_norm(Complex64::new(1.0 / eps, 0.0), s, d)?),
        ProfileKind::Scaled => scaled_profile_norm(
            &ScaledProfileSpec {
                f: ProfileSource::Gaussian { dim: d },
                kappa: cfg.sobolev_kappa()?,
                beta: cfg.beta(),
                eps,
            },
            s,
        ),
    }
}

pub fn run_sobolev_asymptotics(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let eps_list = cfg.eps_values()?.to_vec();
    let norms = eps_list
        .par_iter()
        .map(|&e| sobolev_profile_norm(cfg, e))
        .collect::<Result<Vec<_>>>()?;
    let slope = log_log_slope(&eps_list, &norms)?;
    let sob = cfg.sobolev.as_ref().unwrap();
    let expected = predicted_sobolev_slope(
        sob.profile,
        cfg.model.dim,
        cfg.s()?,
        cfg.beta(),
        cfg.sobolev_kappa()?.is_zero(),
    );
    let mut res = result(
        cfg,
        ExperimentKind::SobolevAsymptotics,
        &["eps", "norm", "fitted_slope"],
    );
    res.rows = eps_list
        .iter()
        .zip(&norms)
        .map(|(e, n)| vec![*e, *n, slope])
        .collect();
    res.fitted_slopes.insert("norm".into(), slope);
    res.checks.push(check(
        "slope",
        (slope - expected).abs() <= 0.05,
        format!("slope {slope:.4}, expected {expected:.4} +- 0.05"),
    ));
    Ok(res)
}
