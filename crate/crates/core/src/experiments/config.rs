use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigCode, Error, Result};
use crate::kernels::KernelSpec;
use crate::resonance::{close_phase_set, PhaseSet, Signature, WaveVector};
use crate::solver::{admissible_eps, required_points, ModelParams};
use crate::transport::key_layout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Converge,
    ZeroMode,
    MoreWeakly,
    Inflate,
    SobolevAsymptotics,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Converge => "converge",
            ExperimentKind::ZeroMode => "zero-mode",
            ExperimentKind::MoreWeakly => "more-weakly",
            ExperimentKind::Inflate => "inflate",
            ExperimentKind::SobolevAsymptotics => "sobolev-asymptotics",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(rename = "J", default = "one")]
    pub j_exponent: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "one_usize")]
    pub nu: usize,
    /// `"+-"` style; all `+` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<String>,
    /// `identity`, `zero`, `ds` or `dipolar:ax,ay,az`.
    #[serde(default = "zero_kernel")]
    pub kernel: String,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            j_exponent: 1.0,
            lambda: 0.0,
            mu: 1.0,
            nu: 1,
            signature: None,
            kernel: zero_kernel(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Half-length of the box; an integer multiple of pi keeps every
    /// dyadic carrier on the lattice. Defaults to `5 pi` (`3 pi` in 3d).
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub half_length: Option<f64>,
    /// Solver points per axis; smallest admissible power of two when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_min: Option<usize>,
    /// Points per axis of the profile grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_n: Option<usize>,
}

/// Gaussian amplitudes `A_j exp(-|x - c_j|^2 / (2 w_j^2))` on the phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// `"(1,0);(1,1);(0,1)"`; the three-wave layout when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<String>,
    #[serde(default = "unit_amplitudes")]
    pub amplitudes: Vec<f64>,
    #[serde(default = "default_widths")]
    pub widths: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<Vec<f64>>>,
    #[serde(default = "one_i64")]
    pub closure_box: i64,
    #[serde(default = "default_generations")]
    pub closure_generations: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            phases: None,
            amplitudes: unit_amplitudes(),
            widths: default_widths(),
            centers: None,
            closure_box: 1,
            closure_generations: default_generations(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    /// `e^{-z|x|^2/2}` with `z = 1 + i/eps`.
    Wkb,
    /// `eps^{-d/4} e^{-|x|^2/(2 eps)}`.
    Coherent,
    /// `I^eps(f, kappa)` for the unit Gaussian `f`.
    Scaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SobolevConfig {
    pub profile: ProfileKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default)]
    pub data: DataConfig,
    /// Number of sample times in `(0, T]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Step of the central difference for the zero-mode rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_dt: Option<f64>,
    /// Whether the run should see zero-mode growth (inflation, threshold).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_growth: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sobolev: Option<SobolevConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn default_dim() -> usize {
    2
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn one_i64() -> i64 {
    1
}
fn zero_kernel() -> String {
    "zero".into()
}
fn unit_amplitudes() -> Vec<f64> {
    vec![1.0; 3]
}
fn default_widths() -> Vec<f64> {
    vec![0.4; 3]
}
fn default_generations() -> usize {
    4
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::config(ConfigCode::InvalidValue, msg)
}

fn missing(key: &str) -> Error {
    Error::config(
        ConfigCode::MissingKey,
        format!("missing required key `{key}`"),
    )
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Parses and validates a TOML config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::from_toml(text)?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Parses without validating, for callers that fill in fields afterwards.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            Error::config(ConfigCode::Parse, e.message().to_string())
        })?;
        let cfg: ExperimentConfig = table.try_into().map_err(|e: toml::de::Error| {
            let msg = e.message().to_string();
            let code = if msg.contains("unknown field") {
                ConfigCode::UnknownKey
            } else if msg.contains("missing field") {
                ConfigCode::MissingKey
            } else {
                ConfigCode::InvalidValue
            };
            Error::config(code, msg)
        })?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            experiment: Some(kind),
            model: ModelConfig::default(),
            eps_list: None,
            grid: GridConfig::default(),
            t_final: None,
            dt: None,
            s: None,
            sigma: None,
            beta: None,
            data: DataConfig::default(),
            samples: None,
            fd_dt: None,
            expect_growth: None,
            sobolev: None,
            output_dir: None,
        }
    }

    pub fn kind(&self) -> Result<ExperimentKind> {
        self.experiment.ok_or_else(|| missing("experiment"))
    }

    pub fn signature(&self) -> Result<Signature> {
        match &self.model.signature {
            None => Ok(Signature::elliptic(self.model.dim)),
            Some(text) => {
                let sig =
                    Signature::parse(text).map_err(|e| invalid(format!("model.signature: {e}")))?;
                if sig.dim() != self.model.dim {
                    return Err(invalid(format!(
                        "model.signature `{text}` does not have {} entries",
                        self.model.dim
                    )));
                }
                Ok(sig)
            }
        }
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        KernelSpec::parse(&self.model.kernel, self.model.dim)
            .map_err(|e| invalid(format!("model.kernel: {e}")))
    }

    /// Model at `eps = 1`; sweeps substitute their own values.
    pub fn model_params(&self) -> Result<ModelParams> {
        Ok(ModelParams {
            eps: 1.0,
            j_exponent: self.model.j_exponent,
            lambda: self.model.lambda,
            mu: self.model.mu,
            nu: self.model.nu,
            signature: self.signature()?,
            kernel: self.kernel()?,
        })
    }

    pub fn half_length(&self) -> f64 {
        self.grid.half_length.unwrap_or(if self.model.dim >= 3 {
            3.0 * PI
        } else {
            5.0 * PI
        })
    }

    pub fn initial_phases(&self) -> Result<Vec<WaveVector>> {
        let phases = match &self.data.phases {
            Some(text) => {
                WaveVector::parse_list(text).map_err(|e| invalid(format!("data.phases: {e}")))?
            }
            None => key_layout(self.model.dim).map_err(|e| invalid(format!("data.phases: {e}")))?,
        };
        if phases.iter().any(|k| k.dim() != self.model.dim) {
            return Err(invalid(
                "data.phases: every wave vector needs model.dim components",
            ));
        }
        Ok(phases)
    }

    pub fn phase_set(&self) -> Result<PhaseSet> {
        let phases = self.initial_phases()?;
        close_phase_set(
            &phases,
            &self.signature()?,
            self.model.nu,
            self.data.closure_generations,
            self.data.closure_box,
        )
        .map_err(|e| invalid(format!("data: {e}")))
    }

    pub fn eps_values(&self) -> Result<&[f64]> {
        self.eps_list.as_deref().ok_or_else(|| missing("eps_list"))
    }

    pub fn t_final(&self) -> Result<f64> {
        self.t_final.ok_or_else(|| missing("T"))
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(2e-3)
    }

    pub fn s(&self) -> Result<f64> {
        self.s.ok_or_else(|| missing("s"))
    }

    pub fn sigma(&self) -> Result<f64> {
        self.sigma.ok_or_else(|| missing("sigma"))
    }

    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(1.0)
    }

    pub fn samples(&self) -> usize {
        self.samples.unwrap_or(10)
    }

    pub fn n_min(&self) -> usize {
        self.grid.n_min.unwrap_or(128)
    }

    /// Resolves the Gaussian of width `min w` with about 2.5 points per width.
    pub fn profile_points(&self) -> usize {
        self.grid.profile_n.unwrap_or_else(|| {
            let w = self
                .data
                .widths
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            ((5.0 * self.half_length() / w).ceil() as usize)
                .max(32)
                .next_power_of_two()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        let m = &self.model;
        if !(1..=3).contains(&m.dim) {
            return Err(invalid(format!(
                "model.dim must be 1, 2 or 3, got {}",
                m.dim
            )));
        }
        if !(m.j_exponent >= 1.0) {
            return Err(invalid(format!(
                "model.J must be at least 1, got {}",
                m.j_exponent
            )));
        }
        if m.nu == 0 {
            return Err(invalid("model.nu must be at least 1"));
        }
        self.signature()?;
        self.kernel()?;
        if let Some(l) = self.grid.half_length {
            if !(l > 0.0) {
                return Err(invalid(format!("grid.L must be positive, got {l}")));
            }
        }
        for (key, v) in [
            ("grid.n", self.grid.n),
            ("grid.n_min", self.grid.n_min),
            ("grid.profile_n", self.grid.profile_n),
        ] {
            if let Some(n) = v {
                if n < 4 || !n.is_power_of_two() {
                    return Err(invalid(format!(
                        "{key} must be a power of two >= 4, got {n}"
                    )));
                }
            }
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(invalid(format!("dt must be positive, got {dt}")));
            }
        }
        if let Some(t) = self.t_final {
            if !(t >= 0.0) {
                return Err(invalid(format!("T must be non-negative, got {t}")));
            }
        }
        if let Some(eps) = &self.eps_list {
            if eps.len() < 2 {
                return Err(invalid("eps_list needs at least two values"));
            }
            if eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
                return Err(invalid("eps_list entries must lie in (0, 1]"));
            }
            if eps.windows(2).any(|w| w[1] >= w[0]) {
                return Err(invalid("eps_list must be strictly decreasing"));
            }
        }
        if kind == ExperimentKind::SobolevAsymptotics {
            return self.validate_sobolev();
        }
        self.validate_data()?;
        self.t_final()?;
        match kind {
            ExperimentKind::ZeroMode => {
                let phases = self.initial_phases()?;
                if m.dim < 2 || phases != key_layout(m.dim)? {
                    return Err(invalid(
                        "zero-mode runs use the three-wave layout (1,0), (1,1), (0,1)",
                    ));
                }
                if let Some(h) = self.fd_dt {
                    if !(h > 0.0) {
                        return Err(invalid(format!("fd_dt must be positive, got {h}")));
                    }
                }
            }
            ExperimentKind::Converge => self.validate_sweep()?,
            ExperimentKind::MoreWeakly => {
                self.validate_sweep()?;
                let (s, j) = (self.s()?, m.j_exponent);
                if !(s < 1.0 - j && 1.0 - j < 0.0 && j < 2.0) {
                    return Err(Error::config(
                        ConfigCode::Constraint,
                        format!("the zero mode dominates only for s < 1 - J < 0 and J < 2; got s = {s}, J = {j}"),
                    ));
                }
            }
            ExperimentKind::Inflate => {
                self.validate_sweep()?;
                self.validate_inflation()?;
            }
            ExperimentKind::SobolevAsymptotics => unreachable!(),
        }
        Ok(())
    }

    fn validate_data(&self) -> Result<()> {
        let phases = self.initial_phases()?;
        let d = &self.data;
        if d.amplitudes.len() != phases.len() || d.widths.len() != phases.len() {
            return Err(invalid(format!(
                "data.amplitudes and data.widths need one entry per phase ({})",
                phases.len()
            )));
        }
        if d.widths.iter().any(|w| !(*w > 0.0)) {
            return Err(invalid("data.widths must be positive"));
        }
        if let Some(c) = &d.centers {
            if c.len() != phases.len() || c.iter().any(|v| v.len() != self.model.dim) {
                return Err(invalid(
                    "data.centers needs one point of dimension model.dim per phase",
                ));
            }
        }
        if d.closure_box < 1 {
            return Err(invalid("data.closure_box must be at least 1"));
        }
        self.phase_set()?;
        Ok(())
    }

    /// Lattice admissibility of every eps and, for a fixed `grid.n`, the
    /// resolution rule.
    fn validate_sweep(&self) -> Result<()> {
        let eps_list = self.eps_values()?;
        let set = self.phase_set()?;
        let l = self.half_length();
        let step = PI / l;
        for &eps in eps_list {
            for k in set.vectors() {
                let off = k.to_f64().iter().any(|c| {
                    let q = c / eps / step;
                    (q - q.round()).abs() > 1e-9 * (1.0 + q.abs())
                });
                if off {
                    let list = admissible_eps(l, 6);
                    return Err(Error::config(
                        ConfigCode::InadmissibleEps,
                        format!(
                            "eps = {eps} puts kappa/eps = {k}/{eps} off the frequency lattice of L = {l}; admissible eps: {}",
                            if list.is_empty() {
                                "none (L must be an integer multiple of pi)".to_string()
                            } else {
                                list.iter().map(|e| format!("{e:.6}")).collect::<Vec<_>>().join(", ")
                            }
                        ),
                    ));
                }
            }
            if let Some(n) = self.grid.n {
                let max_l1 = set
                    .vectors()
                    .iter()
                    .map(WaveVector::l1_norm)
                    .max()
                    .unwrap_or(0);
                let need = required_points(max_l1, eps, l);
                if (n as f64) < need - 1e-9 {
                    return Err(Error::config(
                        ConfigCode::Resolution,
                        format!("grid.n = {n} is below 8 (max|kappa|_1 / eps) L / pi = {need:.1} at eps = {eps}"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn validate_inflation(&self) -> Result<()> {
        let m = &self.model;
        let (d, nu, j) = (m.dim as f64, m.nu as f64, m.j_exponent);
        let s = self.s()?;
        let sigma = self.sigma()?;
        let beta = self.beta();
        let constraint = |msg: String| Err(Error::config(ConfigCode::Constraint, msg));
        if sigma > 0.0 {
            return constraint(format!("sigma must be non-positive, got {sigma}"));
        }
        if m.dim < 2 {
            return constraint("norm inflation needs dimension at least 2".into());
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return constraint(format!("beta must lie in (0, 1], got {beta}"));
        }
        if !(j < 2.0) {
            return constraint(format!("J must lie in [1, 2), got {j}"));
        }
        let sc = d / 2.0 - 1.0 / nu;
        let a = s.abs();
        if j == 1.0 {
            let bound = -1.0 / (2.0 * nu);
            if !(s < bound) {
                return Err(Error::config(
                    ConfigCode::Threshold,
                    format!("inflation with J = 1 requires s < -1/(2 nu) = {bound}, got s = {s}; the endpoint needs a logarithmic correction that is not implemented"),
                ));
            }
            let need = (d / 2.0 - a) / (sc + a);
            if !(beta > need) {
                return constraint(format!("||phi_n||_{{H^s}} -> 0 requires beta > (d/2 - |s|)/(s_c + |s|) = {need}, got beta = {beta}"));
            }
        } else {
            if m.lambda != 0.0 {
                return constraint("inflation with J > 1 is only available without the non-local term (lambda = 0)".into());
            }
            let bound = -1.0 / (1.0 + 2.0 * nu);
            if !(s < bound) {
                return Err(Error::config(
                    ConfigCode::Threshold,
                    format!(
                        "inflation with J > 1 requires s < -1/(1 + 2 nu) = {bound}, got s = {s}"
                    ),
                ));
            }
            let need = (d / 2.0 - a - (j - 1.0) / nu) / (sc + a);
            if !(beta > need) {
                return constraint(format!("||phi_n||_{{H^s}} -> 0 requires beta > (d/2 - |s| - (J-1)/nu)/(s_c + |s|) = {need}, got beta = {beta}"));
            }
            let rhs = d / 2.0 - (j - 1.0) * (2.0 + 1.0 / nu);
            if !(beta * sc < rhs) {
                return constraint(format!(
                    "growth requires beta s_c < d/2 - (J-1)(2 + 1/nu) = {rhs}, got beta s_c = {}",
                    beta * sc
                ));
            }
        }
        Ok(())
    }

    fn validate_sobolev(&self) -> Result<()> {
        self.eps_values()?;
        self.s()?;
        let sob = self.sobolev.as_ref().ok_or_else(|| missing("sobolev"))?;
        if sob.profile == ProfileKind::Scaled {
            let beta = self.beta();
            if !(beta > 0.0) {
                return Err(invalid(format!("beta must be positive, got {beta}")));
            }
            let kappa = self.sobolev_kappa()?;
            if !kappa.is_zero() && self.s()? > 0.0 {
                return Err(Error::config(
                    ConfigCode::Constraint,
                    "an oscillating scaled profile needs s <= 0",
                ));
            }
        }
        Ok(())
    }

    pub fn sobolev_kappa(&self) -> Result<WaveVector> {
        match self.sobolev.as_ref().and_then(|s| s.kappa.as_ref()) {
            None => Ok(WaveVector::zero(self.model.dim)),
            Some(text) => {
                let k =
                    WaveVector::parse(text).map_err(|e| invalid(format!("sobolev.kappa: {e}")))?;
                if k.dim() != self.model.dim {
                    return Err(invalid("sobolev.kappa needs model.dim components"));
                }
                Ok(k)
            }
        }
    }
}
