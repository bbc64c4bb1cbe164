//! Profile equations of multiphase geometric optics.
//!
//! Each amplitude `a_j` is transported at velocity `v_j = (eta_m kappa_{j,m})`
//! and coupled to the others through the resonant tuples `I_j`:
//!
//! ```text
//! (d_t + v_j . grad) a_j = -i w [ lambda sum_{I_j, l_last = j} E(a_l1 conj(a_l2) ... conj(a_l2nu)) a_j
//!                                + lambda sum_{I_j, l_last != j} K(kappa_j - kappa_last) a_l1 conj(a_l2) ... a_last
//!                                + mu sum_{I_j} a_l1 conj(a_l2) ... a_last ]
//! ```
//!
//! with weight `w` (1 in the critical scaling). Time stepping is Strang
//! splitting: exact spectral advection around an RK4 reaction step.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{forward_transform, shift_with, FftWorkspace, GridFunction, SpectralGrid, C64};
use crate::kernels::{KernelOperator, KernelSpec};
use crate::resonance::{
    close_phase_set, is_resonant, resonant_tuples, PhaseSet, ResonantTuple, Signature, WaveVector,
};

#[derive(Debug, Clone)]
pub struct TransportParams {
    pub lambda: f64,
    pub mu: f64,
    pub nu: usize,
    pub kernel: KernelSpec,
    /// Overall coupling factor, `eps^{J-1}` in the more weakly nonlinear
    /// scaling.
    pub weight: f64,
}

impl TransportParams {
    pub fn new(lambda: f64, mu: f64, nu: usize, kernel: KernelSpec) -> Self {
        Self {
            lambda,
            mu,
            nu,
            kernel,
            weight: 1.0,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

/// Precomputed coupling structure for one target phase.
#[derive(Debug, Clone, Default)]
struct TargetCoupling {
    /// First `2nu` indices of tuples ending in the target, with multiplicity.
    nonlocal: Vec<(Vec<usize>, f64)>,
    /// Full tuples with their scalar coefficient.
    local: Vec<(Vec<usize>, f64)>,
}

#[derive(Debug, Clone)]
struct Coupling {
    targets: Vec<TargetCoupling>,
    tuples: Vec<Vec<ResonantTuple>>,
}

impl Coupling {
    // Tuples whose products coincide (same multisets in the unconjugated and
    // conjugated slots) are merged, so cancelling coefficients cancel exactly.
    fn build(
        set: &PhaseSet,
        params: &TransportParams,
        tuples: Vec<Vec<ResonantTuple>>,
    ) -> Result<Self> {
        let vectors = set.vectors();
        let mut targets = Vec::with_capacity(vectors.len());
        for (j, list) in tuples.iter().enumerate() {
            let mut local: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
            let mut nonlocal: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
            for tuple in list {
                let last = *tuple.indices.last().expect("tuples are nonempty");
                let mut coeff = params.mu;
                if last == j {
                    if params.lambda != 0.0 {
                        *nonlocal
                            .entry(canonical(&tuple.indices[..tuple.indices.len() - 1]))
                            .or_default() += 1.0;
                    }
                } else if params.lambda != 0.0 {
                    let diff = vectors[j].sub(&vectors[last]);
                    coeff += params.lambda * params.kernel.evaluate(&diff.to_f64())?;
                }
                *local.entry(canonical(&tuple.indices)).or_default() += coeff;
            }
            targets.push(TargetCoupling {
                nonlocal: nonlocal.into_iter().collect(),
                local: local.into_iter().filter(|(_, c)| *c != 0.0).collect(),
            });
        }
        Ok(Self { targets, tuples })
    }
}

/// Reorders a tuple so unconjugated and conjugated slots are each sorted.
fn canonical(idx: &[usize]) -> Vec<usize> {
    let mut even: Vec<usize> = idx.iter().step_by(2).copied().collect();
    let mut odd: Vec<usize> = idx.iter().skip(1).step_by(2).copied().collect();
    even.sort_unstable();
    odd.sort_unstable();
    let mut out = Vec::with_capacity(idx.len());
    for (k, e) in even.into_iter().enumerate() {
        out.push(e);
        if let Some(&o) = odd.get(k) {
            out.push(o);
        }
    }
    out
}

/// State of the profile system.
#[derive(Debug, Clone)]
pub struct ProfileSet {
    phase_set: PhaseSet,
    grid: SpectralGrid,
    amplitudes: Vec<GridFunction>,
    time: f64,
    params: TransportParams,
    coupling: Arc<Coupling>,
}

impl ProfileSet {
    /// Builds the state from initial amplitudes, one per phase or one per
    /// initial phase (the generated ones start at zero).
    pub fn new(
        phase_set: PhaseSet,
        initial: Vec<GridFunction>,
        params: TransportParams,
    ) -> Result<Self> {
        let tuples = (0..phase_set.len())
            .map(|j| resonant_tuples(&phase_set, j))
            .collect::<Result<Vec<_>>>()?;
        Self::with_tuples(phase_set, initial, params, tuples)
    }

    /// As [`ProfileSet::new`] with an explicit tuple table, which is checked
    /// against the phase set.
    pub fn with_tuples(
        phase_set: PhaseSet,
        initial: Vec<GridFunction>,
        params: TransportParams,
        tuples: Vec<Vec<ResonantTuple>>,
    ) -> Result<Self> {
        let first = initial
            .first()
            .ok_or_else(|| Error::structural("no initial amplitudes"))?;
        let grid = *first.grid();
        for a in &initial {
            grid.ensure_same(a.grid())?;
        }
        if grid.dim() != phase_set.dim() {
            return Err(Error::structural(
                "grid dimension does not match the phase set",
            ));
        }
        if params.kernel.dim() != grid.dim() {
            return Err(Error::structural(
                "kernel dimension does not match the grid",
            ));
        }
        if params.nu != phase_set.nu() {
            return Err(Error::structural(
                "nonlinearity order differs from the phase set",
            ));
        }
        let n = phase_set.len();
        let amplitudes = if initial.len() == n {
            initial
        } else if initial.len() == phase_set.origin_count() {
            let mut a = initial;
            a.resize(n, GridFunction::zeros(grid));
            a
        } else {
            return Err(Error::structural(format!(
                "expected {} or {} amplitudes, got {}",
                phase_set.origin_count(),
                n,
                initial.len()
            )));
        };
        if tuples.len() != n {
            return Err(Error::structural(
                "tuple table length differs from the phase set",
            ));
        }
        for (j, list) in tuples.iter().enumerate() {
            for t in list {
                let valid = t.target == j
                    && t.indices.len() == 2 * phase_set.nu() + 1
                    && t.indices.iter().all(|&i| i < n);
                let kappas: Vec<WaveVector> = if valid {
                    t.indices
                        .iter()
                        .map(|&i| phase_set.vectors()[i].clone())
                        .collect()
                } else {
                    Vec::new()
                };
                if !valid
                    || !is_resonant(
                        phase_set.signature(),
                        phase_set.nu(),
                        &kappas,
                        &phase_set.vectors()[j],
                    )?
                {
                    return Err(Error::structural(format!(
                        "tuple {:?} is not resonant for phase {j}",
                        t.indices
                    )));
                }
            }
        }
        let coupling = Arc::new(Coupling::build(&phase_set, &params, tuples)?);
        Ok(Self {
            phase_set,
            grid,
            amplitudes,
            time: 0.0,
            params,
            coupling,
        })
    }

    pub fn phase_set(&self) -> &PhaseSet {
        &self.phase_set
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[GridFunction] {
        &self.amplitudes
    }

    pub fn amplitude(&self, j: usize) -> &GridFunction {
        &self.amplitudes[j]
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn params(&self) -> &TransportParams {
        &self.params
    }

    pub fn tuples(&self, j: usize) -> &[ResonantTuple] {
        &self.coupling.tuples[j]
    }

    /// `sum_j ||a_j||^2_{L^2}`.
    pub fn total_mass(&self) -> f64 {
        self.amplitudes.iter().map(GridFunction::l2_norm_sq).sum()
    }

    pub fn max_amplitude(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(GridFunction::sup_norm)
            .fold(0.0, f64::max)
    }

    /// Replaces the grid by spectral interpolation of every amplitude.
    pub fn resampled(&self, grid: &SpectralGrid) -> Result<Self> {
        let amplitudes = self
            .amplitudes
            .iter()
            .map(|a| a.resample(grid))
            .collect::<Result<_>>()?;
        Ok(Self {
            amplitudes,
            grid: *grid,
            ..self.clone()
        })
    }

    /// One Strang step of size `dt`; negative `dt` steps backwards.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let mut stepper = Stepper::new(self)?;
        stepper.advect(self, dt / 2.0);
        stepper.react(self, dt);
        stepper.advect(self, dt / 2.0);
        self.time += dt;
        Ok(())
    }
}

/// Reaction terms of the profile system, without advection.
pub fn transport_rhs(state: &ProfileSet) -> Result<Vec<GridFunction>> {
    let mut reaction = Reaction::new(state)?;
    let input: Vec<Vec<C64>> = state
        .amplitudes
        .iter()
        .map(|a| a.values().to_vec())
        .collect();
    let mut out = vec![vec![C64::new(0.0, 0.0); state.grid.len()]; input.len()];
    reaction.eval(&input, &mut out);
    out.into_iter()
        .map(|v| GridFunction::new(state.grid, v))
        .collect()
}

struct Reaction {
    coupling: Arc<Coupling>,
    kernel: Option<KernelOperator>,
    factor: C64,
    lambda: f64,
    scratch: Vec<C64>,
    point: Vec<C64>,
    point_conj: Vec<C64>,
}

impl Reaction {
    fn new(state: &ProfileSet) -> Result<Self> {
        let needs_kernel = state
            .coupling
            .targets
            .iter()
            .any(|t| !t.nonlocal.is_empty());
        let kernel = if needs_kernel {
            Some(KernelOperator::new(&state.params.kernel, &state.grid)?)
        } else {
            None
        };
        let n = state.amplitudes.len();
        Ok(Self {
            coupling: Arc::clone(&state.coupling),
            kernel,
            factor: C64::new(0.0, -state.params.weight),
            lambda: state.params.lambda,
            scratch: vec![C64::new(0.0, 0.0); state.grid.len()],
            point: vec![C64::new(0.0, 0.0); n],
            point_conj: vec![C64::new(0.0, 0.0); n],
        })
    }

    fn eval(&mut self, a: &[Vec<C64>], out: &mut [Vec<C64>]) {
        let npts = self.scratch.len();
        let targets = &self.coupling.targets;
        for x in 0..npts {
            for (l, al) in a.iter().enumerate() {
                self.point[l] = al[x];
                self.point_conj[l] = al[x].conj();
            }
            for (j, t) in targets.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (idx, coeff) in &t.local {
                    acc += self.product(idx) * *coeff;
                }
                out[j][x] = acc;
            }
        }
        for (j, t) in targets.iter().enumerate() {
            if t.nonlocal.is_empty() {
                continue;
            }
            for x in 0..npts {
                for (l, al) in a.iter().enumerate() {
                    self.point[l] = al[x];
                    self.point_conj[l] = al[x].conj();
                }
                self.scratch[x] = t
                    .nonlocal
                    .iter()
                    .map(|(idx, c)| self.product(idx) * *c)
                    .sum();
            }
            self.kernel
                .as_mut()
                .expect("kernel operator present")
                .apply_in_place(&mut self.scratch);
            for x in 0..npts {
                out[j][x] += self.lambda * self.scratch[x] * a[j][x];
            }
        }
        for o in out.iter_mut() {
            for v in o.iter_mut() {
                *v *= self.factor;
            }
        }
    }

    // a_{l1} conj(a_{l2}) a_{l3} ... at the current point.
    fn product(&self, idx: &[usize]) -> C64 {
        let mut p = C64::new(1.0, 0.0);
        for (k, &l) in idx.iter().enumerate() {
            p *= if k % 2 == 0 {
                self.point[l]
            } else {
                self.point_conj[l]
            };
        }
        p
    }
}

struct Stepper {
    reaction: Reaction,
    ws: FftWorkspace,
    velocities: Vec<Vec<f64>>,
    y: Vec<Vec<C64>>,
    k: [Vec<Vec<C64>>; 4],
}

impl Stepper {
    fn new(state: &ProfileSet) -> Result<Self> {
        let zeros = vec![vec![C64::new(0.0, 0.0); state.grid.len()]; state.amplitudes.len()];
        Ok(Self {
            reaction: Reaction::new(state)?,
            ws: FftWorkspace::new(&state.grid),
            velocities: state.phase_set.velocities(),
            y: zeros.clone(),
            k: [zeros.clone(), zeros.clone(), zeros.clone(), zeros],
        })
    }

    fn advect(&mut self, state: &mut ProfileSet, dt: f64) {
        for (a, v) in state.amplitudes.iter_mut().zip(&self.velocities) {
            shift_with(&mut self.ws, a.values_mut(), v, dt);
        }
    }

    fn react(&mut self, state: &mut ProfileSet, dt: f64) {
        let y0: Vec<&[C64]> = state.amplitudes.iter().map(|a| a.values()).collect();
        for (yj, y0j) in self.y.iter_mut().zip(&y0) {
            yj.copy_from_slice(y0j);
        }
        let [k1, k2, k3, k4] = &mut self.k;
        self.reaction.eval(&self.y, k1);
        stage(&mut self.y, &y0, k1, dt / 2.0);
        self.reaction.eval(&self.y, k2);
        stage(&mut self.y, &y0, k2, dt / 2.0);
        self.reaction.eval(&self.y, k3);
        stage(&mut self.y, &y0, k3, dt);
        self.reaction.eval(&self.y, k4);
        let c = dt / 6.0;
        for (j, a) in state.amplitudes.iter_mut().enumerate() {
            for (x, v) in a.values_mut().iter_mut().enumerate() {
                *v += (k1[j][x] + 2.0 * k2[j][x] + 2.0 * k3[j][x] + k4[j][x]) * c;
            }
        }
    }
}

fn stage(y: &mut [Vec<C64>], y0: &[&[C64]], k: &[Vec<C64>], h: f64) {
    for ((yj, y0j), kj) in y.iter_mut().zip(y0).zip(k) {
        for ((v, &b), &s) in yj.iter_mut().zip(y0j.iter()).zip(kj) {
            *v = b + s * h;
        }
    }
}

/// Evolves to `t_end` with uniform steps of size at most `dt`.
pub fn evolve_profiles(state: &ProfileSet, t_end: f64, dt: f64) -> Result<ProfileSet> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("dt must be positive, got {dt}")));
    }
    if t_end < state.time {
        return Err(Error::domain(format!(
            "t_end {t_end} precedes the current time {}",
            state.time
        )));
    }
    let mut out = state.clone();
    let span = t_end - state.time;
    let steps = (span / dt - 1e-9).ceil().max(0.0) as usize;
    if steps == 0 {
        out.time = t_end;
        return Ok(out);
    }
    let h = span / steps as f64;
    let mut stepper = Stepper::new(&out)?;
    // Consecutive half-step advections are merged.
    stepper.advect(&mut out, h / 2.0);
    for k in 0..steps {
        stepper.react(&mut out, h);
        stepper.advect(&mut out, if k + 1 == steps { h / 2.0 } else { h });
    }
    out.time = t_end;
    Ok(out)
}

/// The three-wave layout `(e_1, e_1 + e_2, e_2)` producing the zero mode.
pub fn key_layout(dim: usize) -> Result<Vec<WaveVector>> {
    if dim < 2 {
        return Err(Error::domain(
            "the zero-mode layout needs dimension at least 2",
        ));
    }
    let e = |c: &[i64]| {
        let mut v = vec![0i64; dim];
        v[..2].copy_from_slice(c);
        WaveVector::new(v)
    };
    Ok(vec![e(&[1, 0]), e(&[1, 1]), e(&[0, 1])])
}

/// Closure of the three-wave layout in the unit box; contains the zero mode.
pub fn key_phase_set(dim: usize, signature: Signature, nu: usize) -> Result<PhaseSet> {
    close_phase_set(&key_layout(dim)?, &signature, nu, 1, 1)
}

fn zero_index(set: &PhaseSet) -> Result<usize> {
    set.index_of(&WaveVector::zero(set.dim()))
        .ok_or_else(|| Error::domain("the zero mode is not generated by this layout"))
}

/// `d_t a_0` at `t = 0` for data `(alpha_1, alpha_2, alpha_3)` on the
/// three-wave layout, from the tuple enumeration.
pub fn zero_mode_rate(alphas: &[GridFunction], params: &TransportParams) -> Result<GridFunction> {
    if alphas.len() != 3 {
        return Err(Error::domain(format!(
            "expected three amplitudes, got {}",
            alphas.len()
        )));
    }
    let dim = alphas[0].grid().dim();
    let set = key_phase_set(dim, Signature::elliptic(dim), params.nu)?;
    let zero = zero_index(&set)?;
    let state = ProfileSet::new(set, alphas.to_vec(), params.clone())?;
    Ok(transport_rhs(&state)?.swap_remove(zero))
}

/// Number of tuples into the zero mode using only the three layout phases.
pub fn zero_mode_tuple_count(dim: usize, nu: usize) -> Result<usize> {
    let set = key_phase_set(dim, Signature::elliptic(dim), nu)?;
    let zero = zero_index(&set)?;
    Ok(resonant_tuples(&set, zero)?
        .iter()
        .filter(|t| t.indices.iter().all(|&i| i < 3))
        .count())
}

/// Discrete `X` and `X^s` norms of a profile state.
#[derive(Debug, Clone, PartialEq)]
pub struct XNorms {
    pub x_norm: f64,
    /// `(s, ||a||_{X^s})` for each requested `s`.
    pub xs_norms: Vec<(u32, f64)>,
}

impl XNorms {
    pub fn xs(&self, s: u32) -> Option<f64> {
        self.xs_norms.iter().find(|(k, _)| *k == s).map(|(_, v)| *v)
    }
}

/// `X` norm `sum_j ||a_j^||_{L^1} + ||a_j^||_{L^2}` and
/// `X^s` norm `||(<kappa_j>^s a_j)||_X + sum_{1 <= |beta| <= s} ||d^beta a||_X`.
pub fn profile_norms(state: &ProfileSet, s_list: &[u32]) -> XNorms {
    let grid = state.grid;
    let cell = grid.spectral_cell();
    let spectra: Vec<Vec<C64>> = state
        .amplitudes
        .iter()
        .map(|a| forward_transform(a).into_coeffs())
        .collect();
    let x_of = |weights: Option<&[f64]>| -> f64 {
        spectra
            .iter()
            .map(|c| {
                let (mut l1, mut l2) = (0.0, 0.0);
                for (i, v) in c.iter().enumerate() {
                    let m = v.norm() * weights.map_or(1.0, |w| w[i]);
                    l1 += m;
                    l2 += m * m;
                }
                l1 * cell + (l2 * cell).sqrt()
            })
            .sum()
    };
    let x_norm = x_of(None);
    let brackets: Vec<f64> = state
        .phase_set
        .vectors()
        .iter()
        .map(|k| (1.0 + k.norm_sq() as f64).sqrt())
        .collect();
    let xs_norms = s_list
        .iter()
        .map(|&s| {
            let weighted: f64 = brackets
                .iter()
                .map(|b| b.powi(s as i32))
                .zip(&spectra)
                .map(|(b, c)| {
                    let (l1, l2) = c.iter().fold((0.0, 0.0), |(l1, l2), v| {
                        let m = v.norm() * b;
                        (l1 + m, l2 + m * m)
                    });
                    l1 * cell + (l2 * cell).sqrt()
                })
                .sum();
            let mut deriv = 0.0;
            for order in 1..=s {
                for beta in multi_indices(grid.dim(), order) {
                    let w = derivative_weights(&grid, &beta);
                    deriv += x_of(Some(&w));
                }
            }
            (s, weighted + deriv)
        })
        .collect();
    XNorms { x_norm, xs_norms }
}

fn multi_indices(dim: usize, order: u32) -> Vec<Vec<u32>> {
    if dim == 1 {
        return vec![vec![order]];
    }
    let mut out = Vec::new();
    for first in (0..=order).rev() {
        for mut rest in multi_indices(dim - 1, order - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

// |xi^beta| on the lattice.
fn derivative_weights(grid: &SpectralGrid, beta: &[u32]) -> Vec<f64> {
    let mut xi = vec![0.0; grid.dim()];
    (0..grid.len())
        .map(|flat| {
            grid.frequency(flat, &mut xi);
            xi.iter()
                .zip(beta)
                .map(|(x, &b)| x.abs().powi(b as i32))
                .product()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gauss(grid: SpectralGrid, amp: f64, center: [f64; 2], width: f64) -> GridFunction {
        GridFunction::from_fn(grid, |x| {
            let r2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
            C64::new(amp * (-r2 / (2.0 * width * width)).exp(), 0.0)
        })
    }

    fn key_state(grid: SpectralGrid, params: TransportParams) -> ProfileSet {
        let set =
            close_phase_set(&key_layout(2).unwrap(), &Signature::elliptic(2), 1, 8, 4).unwrap();
        let alphas = vec![
            gauss(grid, 1.0, [0.3, -0.2], 0.7),
            gauss(grid, 0.8, [-0.1, 0.2], 0.6).scale(C64::new(0.6, 0.8)),
            gauss(grid, 1.2, [0.0, 0.4], 0.8),
        ];
        ProfileSet::new(set, alphas, params).unwrap()
    }

    fn grid() -> SpectralGrid {
        SpectralGrid::new(2, 2.0 * PI, 64).unwrap()
    }

    #[test]
    fn zero_state_has_zero_rhs() {
        let g = grid();
        let set =
            close_phase_set(&key_layout(2).unwrap(), &Signature::elliptic(2), 1, 8, 4).unwrap();
        let state = ProfileSet::new(
            set,
            vec![GridFunction::zeros(g); 3],
            TransportParams::new(1.0, 1.0, 1, KernelSpec::davey_stewartson()),
        )
        .unwrap();
        assert!(transport_rhs(&state)
            .unwrap()
            .iter()
            .all(|r| r.sup_norm() == 0.0));
        let norms = profile_norms(&state, &[0, 1, 2]);
        assert_eq!(norms.x_norm, 0.0);
        assert_eq!(norms.xs(2), Some(0.0));
    }

    #[test]
    fn single_mode_rhs_is_cubic() {
        let g = grid();
        let set = PhaseSet::from_vectors(
            vec![WaveVector::new(vec![2, -1])],
            Signature::elliptic(2),
            1,
        )
        .unwrap();
        let a = gauss(g, 1.3, [0.0, 0.0], 1.0).scale(C64::new(0.0, 1.0));
        let state = ProfileSet::new(
            set,
            vec![a.clone()],
            TransportParams::new(0.0, 0.7, 1, KernelSpec::zero(2)),
        )
        .unwrap();
        assert_eq!(state.tuples(0).len(), 1);
        let rhs = transport_rhs(&state).unwrap();
        let expect = a.map(|v| C64::new(0.0, -0.7) * v.norm_sqr() * v);
        assert!(rhs[0].sub(&expect).unwrap().sup_norm() < 1e-14);
    }

    #[test]
    fn single_mode_closed_form() {
        let g = grid();
        let k = WaveVector::new(vec![1, 1]);
        let set = PhaseSet::from_vectors(vec![k], Signature::new(vec![-1, 1]).unwrap(), 1).unwrap();
        let alpha = |x: &[f64]| C64::new((-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp() * 1.1, 0.0);
        let state = ProfileSet::new(
            set,
            vec![GridFunction::from_fn(g, alpha)],
            TransportParams::new(0.0, 0.9, 1, KernelSpec::zero(2)),
        )
        .unwrap();
        let t = 0.6;
        let out = evolve_profiles(&state, t, 0.01).unwrap();
        // velocity (eta_m kappa_m) = (-1, 1)
        let wrap = |z: f64| (z + 2.0 * PI).rem_euclid(4.0 * PI) - 2.0 * PI;
        let expect = GridFunction::from_fn(g, |x| {
            let y = [wrap(x[0] + t), wrap(x[1] - t)];
            let a = alpha(&y);
            a * C64::from_polar(1.0, -0.9 * a.norm_sqr() * t)
        });
        let err = out.amplitude(0).sub(&expect).unwrap().sup_norm();
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn free_transport_is_exact() {
        let g = grid();
        let state = key_state(g, TransportParams::new(0.0, 0.0, 1, KernelSpec::zero(2)));
        let t = 0.83;
        let out = evolve_profiles(&state, t, 0.2).unwrap();
        for (j, v) in state.phase_set().velocities().iter().enumerate() {
            let expect = crate::grid::shift_in_fourier(state.amplitude(j), v, t).unwrap();
            assert!(out.amplitude(j).sub(&expect).unwrap().sup_norm() < 1e-12);
        }
        assert_eq!(out.time(), t);
    }

    #[test]
    fn key_zero_mode_rate() {
        let g = grid();
        let params = TransportParams::new(1.0, 0.25, 1, KernelSpec::davey_stewartson());
        let state = key_state(g, params.clone());
        let rhs = transport_rhs(&state).unwrap();
        let a = state.amplitudes();
        let expect = a[0]
            .mul(&a[1].conj())
            .unwrap()
            .mul(&a[2])
            .unwrap()
            .scale(C64::new(0.0, -1.5));
        assert!(rhs[3].sub(&expect).unwrap().sup_norm() < 1e-13);
        let direct = zero_mode_rate(&a[..3], &params).unwrap();
        assert!(direct.sub(&expect).unwrap().sup_norm() < 1e-13);
        let flat = zero_mode_rate(
            &a[..3],
            &TransportParams::new(1.0, -0.5, 1, KernelSpec::davey_stewartson()),
        )
        .unwrap();
        assert_eq!(flat.sup_norm(), 0.0);
        let mut no3 = a[..3].to_vec();
        no3[2] = GridFunction::zeros(g);
        assert_eq!(zero_mode_rate(&no3, &params).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn zero_mode_counts() {
        for nu in 1..=3 {
            assert!(zero_mode_tuple_count(2, nu).unwrap() >= 1);
        }
        assert_eq!(zero_mode_tuple_count(2, 1).unwrap(), 2);
        assert!(zero_mode_tuple_count(1, 1).is_err());
    }

    #[test]
    fn finite_difference_rate_matches() {
        let g = grid();
        let state = key_state(
            g,
            TransportParams::new(1.0, 0.0, 1, KernelSpec::davey_stewartson()),
        );
        let rhs = transport_rhs(&state).unwrap();
        let mut errs = Vec::new();
        for dt in [1e-2, 5e-3] {
            let mut fwd = state.clone();
            fwd.step(dt).unwrap();
            let mut bwd = state.clone();
            bwd.step(-dt).unwrap();
            let fd = fwd
                .amplitude(3)
                .sub(bwd.amplitude(3))
                .unwrap()
                .scale(C64::new(0.5 / dt, 0.0));
            errs.push(fd.sub(&rhs[3]).unwrap().sup_norm() / rhs[3].sup_norm());
        }
        assert!(errs[0] < 1e-3);
        let ratio = errs[0] / errs[1];
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn mass_and_order() {
        let g = grid();
        let state = key_state(
            g,
            TransportParams::new(1.0, 0.5, 1, KernelSpec::davey_stewartson()),
        );
        let m0 = state.total_mass();
        let t = 0.5;
        let a = evolve_profiles(&state, t, 0.05).unwrap();
        let b = evolve_profiles(&state, t, 0.025).unwrap();
        let c = evolve_profiles(&state, t, 0.0125).unwrap();
        assert!(((c.total_mass() - m0) / m0).abs() < 1e-8);
        let diff = |p: &ProfileSet, q: &ProfileSet| -> f64 {
            p.amplitudes()
                .iter()
                .zip(q.amplitudes())
                .map(|(x, y)| x.sub(y).unwrap().l2_norm_sq())
                .sum::<f64>()
                .sqrt()
        };
        let ratio = diff(&a, &b) / diff(&b, &c);
        assert!((4.0 * 0.85..4.0 * 1.15).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn gauge_covariance() {
        let g = grid();
        let params = TransportParams::new(1.0, 0.5, 1, KernelSpec::davey_stewartson());
        let state = key_state(g, params.clone());
        let phase = C64::from_polar(1.0, 0.9);
        let rotated: Vec<_> = state.amplitudes()[..3]
            .iter()
            .map(|a| a.scale(phase))
            .collect();
        let rstate = ProfileSet::new(state.phase_set().clone(), rotated, params).unwrap();
        let a = evolve_profiles(&state, 0.3, 0.05).unwrap();
        let b = evolve_profiles(&rstate, 0.3, 0.05).unwrap();
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!(x.scale(phase).sub(y).unwrap().sup_norm() < 1e-10);
        }
    }

    #[test]
    fn inconsistent_tuples_rejected() {
        let g = grid();
        let set =
            close_phase_set(&key_layout(2).unwrap(), &Signature::elliptic(2), 1, 8, 4).unwrap();
        let params = TransportParams::new(0.0, 1.0, 1, KernelSpec::zero(2));
        let mut tuples: Vec<_> = (0..4).map(|j| resonant_tuples(&set, j).unwrap()).collect();
        tuples[0].push(ResonantTuple {
            indices: vec![0, 1, 2],
            target: 0,
        });
        let alphas = vec![gauss(g, 1.0, [0.0, 0.0], 1.0); 3];
        assert!(matches!(
            ProfileSet::with_tuples(set.clone(), alphas.clone(), params.clone(), tuples),
            Err(Error::Structural(_))
        ));
        assert!(ProfileSet::new(set, alphas[..2].to_vec(), params).is_err());
    }

    #[test]
    fn gaussian_x_norms() {
        let g = SpectralGrid::new(2, 16.0, 128).unwrap();
        let set =
            PhaseSet::from_vectors(vec![WaveVector::zero(2)], Signature::elliptic(2), 1).unwrap();
        let state = ProfileSet::new(
            set,
            vec![gauss(g, 1.0, [0.0, 0.0], 1.0)],
            TransportParams::new(0.0, 1.0, 1, KernelSpec::zero(2)),
        )
        .unwrap();
        let norms = profile_norms(&state, &[0, 1]);
        let expect = 2.0 * PI + PI.sqrt();
        assert!((norms.x_norm - expect).abs() < 1e-6 * expect);
        assert_eq!(norms.xs(0), Some(norms.x_norm));
        // d/dx_m of the Gaussian: ||xi_m e^{-|xi|^2/2}|| in L^1 and L^2; the
        // kink of |xi_m| is only resolved to O(h^2) by the lattice, so the
        // L^1 factor is the lattice sum itself.
        let h = PI / 16.0;
        let kink: f64 = (-64..64)
            .map(|k| (h * k as f64).abs() * (-(h * k as f64).powi(2) / 2.0).exp() * h)
            .sum();
        let l1 = kink * (2.0 * PI).sqrt();
        let l2 = (PI / 2.0).sqrt();
        let expect1 = expect + 2.0 * (l1 + l2);
        assert!(
            (norms.xs(1).unwrap() - expect1).abs() < 1e-6 * expect1,
            "{:?} vs {expect1}",
            norms
        );
    }
}
