//! Pointwise reaction terms of the compliant/noncompliant SIR system and
//! their state and control Jacobians.
//!
//! State ordering is `(S, I, R, S*, I*, R*)`; the asterisked compartments are
//! the noncompliant strata. Controls are `(alpha, mu, nu)`: extra infectivity
//! reduction among the compliant, reduction of the noncompliance transmission
//! rate, and recovery rate from noncompliance.

use crate::error::{CoreError, Result};
use crate::field::Field;

pub const N_SPECIES: usize = 6;
pub const N_CONTROLS: usize = 3;

pub const SPECIES_NAMES: [&str; N_SPECIES] = ["S", "I", "R", "S_star", "I_star", "R_star"];
pub const CONTROL_NAMES: [&str; N_CONTROLS] = ["alpha", "mu", "nu"];

/// All scalar rates, the diffusion coefficients, and the birth-rate field.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Disease transmission rate (1/time).
    pub beta: f64,
    /// Disease recovery rate (1/time).
    pub gamma: f64,
    /// Death rate (1/time).
    pub delta: f64,
    /// Fraction of births that are compliant, in [0, 1].
    pub xi: f64,
    /// Noncompliance transmission rate (1/time).
    pub mu_bar: f64,
    /// Maximum noncompliance recovery rate (1/time).
    pub nu_bar: f64,
    /// Baseline infectivity reduction, in (0, 1].
    pub alpha_lower: f64,
    /// Per-species diffusion coefficients `d_1..d_6`.
    pub diffusion: [f64; N_SPECIES],
    /// Nonnegative birth-rate field `b(x)`.
    pub birth_rate: Field,
}

impl ModelParams {
    /// Baseline parameter set on the given grid: `beta = 5`, `gamma = 1`,
    /// `delta = 1e-3`, `xi = 1`, `mu_bar = nu_bar = 1`, `alpha_lower = 0.1`,
    /// all diffusion coefficients `0.1`, and `b(x, y) = 0.1 exp(-(x^2+y^2))`.
    pub fn baseline(grid: crate::grid::Grid) -> Self {
        Self {
            beta: 5.0,
            gamma: 1.0,
            delta: 1e-3,
            xi: 1.0,
            mu_bar: 1.0,
            nu_bar: 1.0,
            alpha_lower: 0.1,
            diffusion: [0.1; N_SPECIES],
            birth_rate: Field::from_fn(grid, |x, y| 0.1 * (-(x * x + y * y)).exp()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("mu_bar", self.mu_bar),
            ("nu_bar", self.nu_bar),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(CoreError::Validation {
                    field: format!("model.{name}"),
                    message: format!("must be > 0 (got {v})"),
                });
            }
        }
        if !(0.0..=1.0).contains(&self.xi) {
            return Err(CoreError::Validation {
                field: "model.xi".into(),
                message: format!("must lie in [0, 1] (got {})", self.xi),
            });
        }
        if !(self.alpha_lower > 0.0 && self.alpha_lower <= 1.0) {
            return Err(CoreError::Validation {
                field: "model.alpha_lower".into(),
                message: format!("must lie in (0, 1] (got {})", self.alpha_lower),
            });
        }
        for (k, d) in self.diffusion.iter().enumerate() {
            if !(*d > 0.0) {
                return Err(CoreError::Validation {
                    field: format!("model.diffusion[{k}]"),
                    message: format!("must be > 0 (got {d})"),
                });
            }
        }
        if !self.birth_rate.is_finite() || self.birth_rate.min() < 0.0 {
            return Err(CoreError::Validation {
                field: "model.birth".into(),
                message: "birth rate must be finite and nonnegative".into(),
            });
        }
        Ok(())
    }

    /// Lower and upper bounds of the admissible box per control component.
    pub fn control_bounds(&self) -> [(f64, f64); N_CONTROLS] {
        [
            (self.alpha_lower, 1.0),
            (0.0, self.mu_bar),
            (0.0, self.nu_bar),
        ]
    }
}

/// Population densities at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointState {
    pub s: f64,
    pub i: f64,
    pub r: f64,
    pub s_star: f64,
    pub i_star: f64,
    pub r_star: f64,
}

impl PointState {
    pub fn from_array(v: [f64; N_SPECIES]) -> Self {
        Self {
            s: v[0],
            i: v[1],
            r: v[2],
            s_star: v[3],
            i_star: v[4],
            r_star: v[5],
        }
    }

    pub fn as_array(&self) -> [f64; N_SPECIES] {
        [self.s, self.i, self.r, self.s_star, self.i_star, self.r_star]
    }

    pub fn total(&self) -> f64 {
        self.s + self.i + self.r + self.s_star + self.i_star + self.r_star
    }

    /// Checks componentwise nonnegativity down to `-tol`.
    pub fn check_nonnegative(&self, tol: f64) -> Result<()> {
        for (k, v) in self.as_array().iter().enumerate() {
            if *v < -tol {
                return Err(CoreError::StateNegative {
                    time_index: 0,
                    species: SPECIES_NAMES[k],
                    min_value: *v,
                });
            }
        }
        Ok(())
    }
}

/// Control values at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointControl {
    pub alpha: f64,
    pub mu: f64,
    pub nu: f64,
}

impl PointControl {
    pub fn from_array(v: [f64; N_CONTROLS]) -> Self {
        Self {
            alpha: v[0],
            mu: v[1],
            nu: v[2],
        }
    }

    pub fn as_array(&self) -> [f64; N_CONTROLS] {
        [self.alpha, self.mu, self.nu]
    }

    pub fn in_box(&self, p: &ModelParams) -> bool {
        let [(al, au), (ml, mu), (nl, nu)] = p.control_bounds();
        self.alpha >= al
            && self.alpha <= au
            && self.mu >= ml
            && self.mu <= mu
            && self.nu >= nl
            && self.nu <= nu
    }
}

/// Actively mixing infectious population `I_M = (1 - alpha) I + I*`.
pub fn mixing_infectious(y: &PointState, alpha: f64) -> f64 {
    (1.0 - alpha) * y.i + y.i_star
}

/// Right-hand side `F(y, u)` of the controlled reaction system at one point.
///
/// Every transfer term is computed once and reused with opposite signs in the
/// paired equations, so the component sum cancels exactly to
/// `b - delta * total(y)` in floating point as well.
pub fn reaction_rhs(y: &PointState, u: &PointControl, b: f64, p: &ModelParams) -> [f64; N_SPECIES] {
    let im = mixing_infectious(y, u.alpha);
    let ns = y.s_star + y.i_star + y.r_star;
    let m = p.mu_bar - u.mu;

    let infect_c = p.beta * (1.0 - u.alpha) * y.s * im; // S -> I
    let infect_n = p.beta * y.s_star * im; // S* -> I*
    let recover_i = p.gamma * y.i; // I -> R
    let recover_is = p.gamma * y.i_star; // I* -> R*
    let defect_s = m * y.s * ns; // S -> S*
    let defect_i = m * y.i * ns; // I -> I*
    let defect_r = m * y.r * ns; // R -> R*
    let return_s = u.nu * y.s_star; // S* -> S
    let return_i = u.nu * y.i_star; // I* -> I
    let return_r = u.nu * y.r_star; // R* -> R

    [
        p.xi * b - infect_c - defect_s + return_s - p.delta * y.s,
        infect_c - recover_i - defect_i + return_i - p.delta * y.i,
        recover_i - defect_r + return_r - p.delta * y.r,
        (1.0 - p.xi) * b - infect_n + defect_s - return_s - p.delta * y.s_star,
        infect_n - recover_is + defect_i - return_i - p.delta * y.i_star,
        recover_is + defect_r - return_r - p.delta * y.r_star,
    ]
}

/// State Jacobian `J[i][j] = d f_i / d y_j`, derived by hand from the system.
///
/// Derivative building blocks: `d I_M / d I = 1 - alpha`, `d I_M / d I* = 1`,
/// and `d N* / d S* = d N* / d I* = d N* / d R* = 1`. Each mass-action term
/// `c * a * b` contributes `c * b` to the column of `a` and `c * a` to the
/// column of `b`; linear transfers contribute their rates. Column sums equal
/// `-delta` because the component sum of `F` is `b - delta * total(y)`.
pub fn reaction_jacobian_state(
    y: &PointState,
    u: &PointControl,
    p: &ModelParams,
) -> [[f64; N_SPECIES]; N_SPECIES] {
    let im = mixing_infectious(y, u.alpha);
    let ns = y.s_star + y.i_star + y.r_star;
    let m = p.mu_bar - u.mu;
    let oma = 1.0 - u.alpha; // 1 - alpha
    let ac = p.beta * oma; // compliant infection factor beta (1 - alpha)

    [
        // f_S = xi b - ac S I_M - m S N* + nu S* - delta S
        [
            -ac * im - m * ns - p.delta,
            -ac * oma * y.s,
            0.0,
            u.nu - m * y.s,
            -ac * y.s - m * y.s,
            -m * y.s,
        ],
        // f_I = ac S I_M - gamma I - m I N* + nu I* - delta I
        [
            ac * im,
            ac * oma * y.s - p.gamma - m * ns - p.delta,
            0.0,
            -m * y.i,
            ac * y.s - m * y.i + u.nu,
            -m * y.i,
        ],
        // f_R = gamma I - m R N* + nu R* - delta R
        [
            0.0,
            p.gamma,
            -m * ns - p.delta,
            -m * y.r,
            -m * y.r,
            -m * y.r + u.nu,
        ],
        // f_S* = (1 - xi) b - beta S* I_M + m S N* - nu S* - delta S*
        [
            m * ns,
            -p.beta * y.s_star * oma,
            0.0,
            -p.beta * im + m * y.s - u.nu - p.delta,
            -p.beta * y.s_star + m * y.s,
            m * y.s,
        ],
        // f_I* = beta S* I_M - gamma I* + m I N* - nu I* - delta I*
        [
            0.0,
            p.beta * y.s_star * oma + m * ns,
            0.0,
            p.beta * im + m * y.i,
            p.beta * y.s_star + m * y.i - p.gamma - u.nu - p.delta,
            m * y.i,
        ],
        // f_R* = gamma I* + m R N* - nu R* - delta R*
        [
            0.0,
            0.0,
            m * ns,
            m * y.r,
            p.gamma + m * y.r,
            m * y.r - u.nu - p.delta,
        ],
    ]
}

/// Control Jacobian `J[i][k] = d f_i / d u_k` with `u = (alpha, mu, nu)`.
///
/// `alpha` acts through both the `(1 - alpha)` prefactor of the compliant
/// infection term and through `I_M` itself, giving
/// `d/d alpha [-(1-alpha) S I_M] = S (2 (1-alpha) I + I*)` (times `beta`),
/// while the noncompliant infection sees only the `I_M` dependence.
/// `mu` enters as `-(mu_bar - mu)`, so each defection term flips sign, and
/// `nu` multiplies the starred compartments linearly.
pub fn reaction_jacobian_control(
    y: &PointState,
    u: &PointControl,
    p: &ModelParams,
) -> [[f64; N_CONTROLS]; N_SPECIES] {
    let ns = y.s_star + y.i_star + y.r_star;
    let da_c = p.beta * y.s * (2.0 * (1.0 - u.alpha) * y.i + y.i_star);
    let da_n = p.beta * y.s_star * y.i;

    [
        [da_c, y.s * ns, y.s_star],
        [-da_c, y.i * ns, y.i_star],
        [0.0, y.r * ns, y.r_star],
        [da_n, -y.s * ns, -y.s_star],
        [-da_n, -y.i * ns, -y.i_star],
        [0.0, -y.r * ns, -y.r_star],
    ]
}

/// Transpose-applies the state Jacobian: returns `J_F(y, u)^T phi`.
pub fn jacobian_state_transpose_apply(
    y: &PointState,
    u: &PointControl,
    p: &ModelParams,
    phi: [f64; N_SPECIES],
) -> [f64; N_SPECIES] {
    let j = reaction_jacobian_state(y, u, p);
    let mut out = [0.0; N_SPECIES];
    for (row, &phi_i) in j.iter().zip(phi.iter()) {
        for (o, &entry) in out.iter_mut().zip(row.iter()) {
            *o += entry * phi_i;
        }
    }
    out
}

/// Transpose-applies the control Jacobian: returns `F_u(y, u)^T phi`.
pub fn jacobian_control_transpose_apply(
    y: &PointState,
    u: &PointControl,
    p: &ModelParams,
    phi: [f64; N_SPECIES],
) -> [f64; N_CONTROLS] {
    let j = reaction_jacobian_control(y, u, p);
    let mut out = [0.0; N_CONTROLS];
    for (row, &phi_i) in j.iter().zip(phi.iter()) {
        for (o, &entry) in out.iter_mut().zip(row.iter()) {
            *o += entry * phi_i;
        }
    }
    out
}

/// Applies the state Jacobian: returns `J_F(y, u) w`.
pub fn jacobian_state_apply(
    y: &PointState,
    u: &PointControl,
    p: &ModelParams,
    w: [f64; N_SPECIES],
) -> [f64; N_SPECIES] {
    let j = reaction_jacobian_state(y, u, p);
    let mut out = [0.0; N_SPECIES];
    for (o, row) in out.iter_mut().zip(j.iter()) {
        for (&entry, &wk) in row.iter().zip(w.iter()) {
            *o += entry * wk;
        }
    }
    out
}

/// Applies the control Jacobian: returns `F_u(y, u) h`.
pub fn jacobian_control_apply(
    y: &PointState,
    u: &PointControl,
    p: &ModelParams,
    h: [f64; N_CONTROLS],
) -> [f64; N_SPECIES] {
    let j = reaction_jacobian_control(y, u, p);
    let mut out = [0.0; N_SPECIES];
    for (o, row) in out.iter_mut().zip(j.iter()) {
        for (&entry, &hk) in row.iter().zip(h.iter()) {
            *o += entry * hk;
        }
    }
    out
}
