//! Experiment configuration: JSON schema, defaults, validation, and
//! materialization into solver-ready objects.
//!
//! An empty JSON object loads the full baseline configuration. Unknown keys
//! are rejected, and every constraint violation names the offending field.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adjoint::CostWeights;
use crate::bundles::StateField;
use crate::error::{CoreError, Result};
use crate::field::Field;
use crate::forward::SolverOptions;
use crate::grid::{Grid, TimeGrid};
use crate::model::{ModelParams, N_SPECIES};
use crate::optimizer::{InitMode, OptimConfig};
use crate::oracles::Problem;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulate,
    Optimize,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub mode: Mode,
    pub model: ModelSection,
    pub weights: WeightsSection,
    pub grid: GridSection,
    pub time: TimeSection,
    pub optim: OptimSection,
    pub initial: InitialSpec,
    /// Constant control values used by `simulate` mode; unset components
    /// fall back to the uncontrolled reference.
    pub controls: ControlsSection,
    pub sweep: SweepSection,
    pub solver: SolverSection,
    pub outputs: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            mode: Mode::Optimize,
            model: ModelSection::default(),
            weights: WeightsSection::default(),
            grid: GridSection::default(),
            time: TimeSection::default(),
            optim: OptimSection::default(),
            initial: InitialSpec::default(),
            controls: ControlsSection::default(),
            sweep: SweepSection::default(),
            solver: SolverSection::default(),
            outputs: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub xi: f64,
    pub mu_bar: f64,
    pub nu_bar: f64,
    pub alpha_lower: f64,
    pub diffusion: DiffusionSpec,
    pub birth: BirthSpec,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            beta: 5.0,
            gamma: 1.0,
            delta: 1e-3,
            xi: 1.0,
            mu_bar: 1.0,
            nu_bar: 1.0,
            alpha_lower: 0.1,
            diffusion: DiffusionSpec::Uniform(0.1),
            birth: BirthSpec::default(),
        }
    }
}

/// Either one shared diffusion coefficient or six per-species values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DiffusionSpec {
    Uniform(f64),
    PerSpecies([f64; N_SPECIES]),
}

impl DiffusionSpec {
    pub fn coefficients(&self) -> [f64; N_SPECIES] {
        match self {
            DiffusionSpec::Uniform(d) => [*d; N_SPECIES],
            DiffusionSpec::PerSpecies(d) => *d,
        }
    }
}

/// Birth-rate field specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BirthSpec {
    /// `amplitude * exp(-(x^2 + y^2) / width^2)`.
    Gaussian { amplitude: f64, width: f64 },
    Constant { value: f64 },
}

impl Default for BirthSpec {
    fn default() -> Self {
        BirthSpec::Gaussian {
            amplitude: 0.1,
            width: 1.0,
        }
    }
}

impl BirthSpec {
    pub fn materialize(&self, grid: Grid) -> Result<Field> {
        match self {
            BirthSpec::Gaussian { amplitude, width } => {
                if !(*amplitude >= 0.0) || !(*width > 0.0) {
                    return Err(CoreError::Validation {
                        field: "model.birth".into(),
                        message: "gaussian birth needs amplitude >= 0 and width > 0".into(),
                    });
                }
                let inv_w2 = 1.0 / (width * width);
                Ok(Field::from_fn(grid, |x, y| {
                    amplitude * (-(x * x + y * y) * inv_w2).exp()
                }))
            }
            BirthSpec::Constant { value } => {
                if !(*value >= 0.0) {
                    return Err(CoreError::Validation {
                        field: "model.birth".into(),
                        message: format!("constant birth must be >= 0 (got {value})"),
                    });
                }
                Ok(Field::constant(grid, *value))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsSection {
    pub lambda1: f64,
    pub lambda2: f64,
    pub zeta: f64,
    /// When set, the alpha control cost is charged against
    /// `alpha - alpha_lower` instead of `alpha`.
    pub control_cost_offset: bool,
}

impl Default for WeightsSection {
    fn default() -> Self {
        Self {
            lambda1: 3.0,
            lambda2: 0.02,
            zeta: 0.2,
            control_cost_offset: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub dim: usize,
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            dim: 2,
            nx: 64,
            ny: 64,
            x_min: -5.0,
            x_max: 5.0,
            y_min: -5.0,
            y_max: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub t_final: f64,
    pub dt: f64,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            t_final: 200.0,
            dt: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimSection {
    pub tol: f64,
    pub max_iter: usize,
    pub eta0: f64,
    pub decay_c: f64,
    pub decay_k: usize,
    pub seed: u64,
    pub init: InitMode,
    pub armijo: bool,
}

impl Default for OptimSection {
    fn default() -> Self {
        let d = OptimConfig::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
            eta0: d.eta0,
            decay_c: d.decay_c,
            decay_k: d.decay_k,
            seed: d.seed,
            init: d.init,
            armijo: d.armijo,
        }
    }
}

/// Initial population densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `S0 = s_peak exp(-(x^2+y^2))`, `I0 = i_ratio S0`,
    /// `S*0 = s_star_ratio S0`, `I*0 = i_star_ratio I0`; recovered empty.
    GaussianSir {
        s_peak: f64,
        i_ratio: f64,
        s_star_ratio: f64,
        i_star_ratio: f64,
    },
    /// Spatially constant values `(S, I, R, S*, I*, R*)`.
    Homogeneous { values: [f64; N_SPECIES] },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::GaussianSir {
            s_peak: 1.0,
            i_ratio: 0.1,
            s_star_ratio: 0.05,
            i_star_ratio: 0.05,
        }
    }
}

impl InitialSpec {
    pub fn materialize(&self, grid: Grid) -> Result<StateField> {
        let state = match self {
            InitialSpec::GaussianSir {
                s_peak,
                i_ratio,
                s_star_ratio,
                i_star_ratio,
            } => {
                let s0 = Field::from_fn(grid, |x, y| s_peak * (-(x * x + y * y)).exp());
                let scaled = |c: f64| {
                    let mut f = s0.clone();
                    for v in f.as_mut_slice() {
                        *v *= c;
                    }
                    f
                };
                StateField::from_fields([
                    s0.clone(),
                    scaled(*i_ratio),
                    Field::zeros(grid),
                    scaled(*s_star_ratio),
                    scaled(i_star_ratio * i_ratio),
                    Field::zeros(grid),
                ])
            }
            InitialSpec::Homogeneous { values } => StateField::from_fields(
                std::array::from_fn(|k| Field::constant(grid, values[k])),
            ),
        };
        if state.min_value() < 0.0 || !state.is_finite() {
            return Err(CoreError::Validation {
                field: "initial".into(),
                message: "initial data must be finite and nonnegative".into(),
            });
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ControlsSection {
    pub alpha: Option<f64>,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
}

impl ControlsSection {
    /// Constant control values, falling back to the uncontrolled reference.
    pub fn values(&self, p: &ModelParams) -> [f64; 3] {
        [
            self.alpha.unwrap_or(p.alpha_lower),
            self.mu.unwrap_or(0.0),
            self.nu.unwrap_or(0.0),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Zeta,
    Lambda1,
    Lambda2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Maximum number of member experiments run in parallel.
    pub jobs: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            parameter: SweepParameter::Zeta,
            values: vec![1.0, 0.4, 0.2, 0.1],
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub cg_tol: f64,
    pub cg_max_iter_factor: usize,
    pub checkpoint_stride: usize,
    pub nonneg_tol: f64,
    pub adjoint_bound: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            cg_tol: d.cg_tol,
            cg_max_iter_factor: d.cg_max_iter_factor,
            checkpoint_stride: d.checkpoint_stride,
            nonneg_tol: d.nonneg_tol,
            adjoint_bound: d.adjoint_bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub snapshot_times: Vec<f64>,
    /// Normalize population columns of the time series by the total
    /// population at each time.
    pub normalize: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            snapshot_times: vec![1.75, 10.0, 50.0, 150.0],
            normalize: true,
        }
    }
}

impl ExperimentConfig {
    pub fn build_grid(&self) -> Result<Grid> {
        let g = &self.grid;
        let built = match g.dim {
            1 => Grid::new_1d(g.nx, g.x_min, g.x_max),
            2 => Grid::new_2d(g.nx, g.ny, g.x_min, g.x_max, g.y_min, g.y_max),
            other => {
                return Err(CoreError::Validation {
                    field: "grid.dim".into(),
                    message: format!("must be 1 or 2 (got {other})"),
                })
            }
        };
        built.map_err(|e| CoreError::Validation {
            field: "grid".into(),
            message: e.to_string(),
        })
    }

    pub fn build_time(&self) -> Result<TimeGrid> {
        TimeGrid::from_dt(self.time.t_final, self.time.dt).map_err(|e| CoreError::Validation {
            field: "time".into(),
            message: e.to_string(),
        })
    }

    pub fn build_params(&self, grid: Grid) -> Result<ModelParams> {
        let m = &self.model;
        let params = ModelParams {
            beta: m.beta,
            gamma: m.gamma,
            delta: m.delta,
            xi: m.xi,
            mu_bar: m.mu_bar,
            nu_bar: m.nu_bar,
            alpha_lower: m.alpha_lower,
            diffusion: m.diffusion.coefficients(),
            birth_rate: m.birth.materialize(grid)?,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn build_weights(&self, params: &ModelParams) -> Result<CostWeights> {
        let w = CostWeights {
            lambda1: self.weights.lambda1,
            lambda2: self.weights.lambda2,
            zeta: self.weights.zeta,
            alpha_cost_offset: if self.weights.control_cost_offset {
                params.alpha_lower
            } else {
                0.0
            },
        };
        w.validate()?;
        Ok(w)
    }

    pub fn build_optim(&self) -> Result<OptimConfig> {
        let o = &self.optim;
        let cfg = OptimConfig {
            tol: o.tol,
            max_iter: o.max_iter,
            eta0: o.eta0,
            decay_c: o.decay_c,
            decay_k: o.decay_k,
            seed: o.seed,
            init: o.init,
            armijo: o.armijo,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn build_solver(&self) -> Result<SolverOptions> {
        let s = &self.solver;
        let opts = SolverOptions {
            cg_tol: s.cg_tol,
            cg_max_iter_factor: s.cg_max_iter_factor,
            checkpoint_stride: s.checkpoint_stride,
            nonneg_tol: s.nonneg_tol,
            adjoint_bound: s.adjoint_bound,
        };
        opts.validate()?;
        Ok(opts)
    }

    /// Materializes the full problem description.
    pub fn build_problem(&self) -> Result<Problem> {
        let grid = self.build_grid()?;
        let time = self.build_time()?;
        let params = self.build_params(grid)?;
        let weights = self.build_weights(&params)?;
        let y0 = self.initial.materialize(grid)?;
        let opts = self.build_solver()?;
        Ok(Problem {
            grid,
            time,
            params,
            weights,
            y0,
            opts,
        })
    }

    /// Validates every section; returns the first violation.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CoreError::Validation {
                field: "schema_version".into(),
                message: format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            });
        }
        let problem = self.build_problem()?;
        self.build_optim()?;

        let [alpha, mu, nu] = self.controls.values(&problem.params);
        let [(al, au), (ml, mh), (nl, nh)] = problem.params.control_bounds();
        if !(al..=au).contains(&alpha) || !(ml..=mh).contains(&mu) || !(nl..=nh).contains(&nu) {
            return Err(CoreError::Validation {
                field: "controls".into(),
                message: format!(
                    "constant controls ({alpha}, {mu}, {nu}) leave the admissible box"
                ),
            });
        }
        for t in &self.outputs.snapshot_times {
            if !(*t >= 0.0 && *t <= self.time.t_final) {
                return Err(CoreError::Validation {
                    field: "outputs.snapshot_times".into(),
                    message: format!("time {t} outside [0, {}]", self.time.t_final),
                });
            }
        }
        if self.sweep.values.is_empty() {
            return Err(CoreError::Validation {
                field: "sweep.values".into(),
                message: "must be nonempty".into(),
            });
        }
        for v in &self.sweep.values {
            if !(*v >= 0.0) {
                return Err(CoreError::Validation {
                    field: "sweep.values".into(),
                    message: format!("weights must be >= 0 (got {v})"),
                });
            }
        }
        if self.sweep.jobs == 0 {
            return Err(CoreError::Validation {
                field: "sweep.jobs".into(),
                message: "must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// Loads and validates a configuration file; missing keys fall back to the
/// baseline defaults.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Parses a configuration from a JSON string.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| CoreError::ParseError(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
