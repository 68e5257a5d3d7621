//! Uniform cell-centered grids and time discretization.

use crate::error::{CoreError, Result};

/// Uniform cell-centered grid on a rectangle (or an interval when `ny == 1`).
///
/// Cells are indexed `(i, j)` with `i` along x and `j` along y; cell centers
/// sit at `x_min + (i + 1/2) dx`. Integrals are cell sums times `dx * dy`,
/// exact for constants. For 1D grids `dy = 1`, so the cell measure is `dx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    dx: f64,
    dy: f64,
}

impl Grid {
    pub fn new_1d(nx: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if nx < 3 {
            return Err(CoreError::DomainError(format!("grid nx = {nx} must be >= 3")));
        }
        if !(x_max > x_min) {
            return Err(CoreError::DomainError(format!(
                "grid bounds [{x_min}, {x_max}] must be increasing"
            )));
        }
        let dx = (x_max - x_min) / nx as f64;
        Ok(Self {
            nx,
            ny: 1,
            x_min,
            x_max,
            y_min: 0.0,
            y_max: 1.0,
            dx,
            dy: 1.0,
        })
    }

    pub fn new_2d(
        nx: usize,
        ny: usize,
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    ) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(CoreError::DomainError(format!(
                "grid nx = {nx}, ny = {ny} must both be >= 3"
            )));
        }
        if !(x_max > x_min) || !(y_max > y_min) {
            return Err(CoreError::DomainError(format!(
                "grid bounds [{x_min}, {x_max}] x [{y_min}, {y_max}] must be increasing"
            )));
        }
        let dx = (x_max - x_min) / nx as f64;
        let dy = (y_max - y_min) / ny as f64;
        Ok(Self {
            nx,
            ny,
            x_min,
            x_max,
            y_min,
            y_max,
            dx,
            dy,
        })
    }

    /// Default domain `[-5, 5]^2` at 64 x 64 cells.
    pub fn default_square(n: usize) -> Result<Self> {
        Self::new_2d(n, n, -5.0, 5.0, -5.0, 5.0)
    }

    pub fn dim(&self) -> usize {
        if self.ny == 1 {
            1
        } else {
            2
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    /// Measure of one cell (`dx * dy`, or `dx` in 1D).
    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    /// Coordinates of the center of cell `(i, j)`.
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x_min + (i as f64 + 0.5) * self.dx,
            self.y_min + (j as f64 + 0.5) * self.dy,
        )
    }
}

/// Uniform time grid over `[0, t_final]` with `n_steps` steps.
///
/// `dt` is always recomputed as `t_final / n_steps` so that
/// `n_steps * dt == t_final` holds by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        if !(t_final > 0.0) || n_steps == 0 {
            return Err(CoreError::DomainError(format!(
                "time grid needs t_final > 0 and n_steps >= 1 (got {t_final}, {n_steps})"
            )));
        }
        Ok(Self {
            t_final,
            dt: t_final / n_steps as f64,
            n_steps,
        })
    }

    /// Builds the grid from a requested step size, rounding to the nearest
    /// integer step count.
    pub fn from_dt(t_final: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !(t_final > 0.0) {
            return Err(CoreError::DomainError(format!(
                "time grid needs t_final > 0 and dt > 0 (got {t_final}, {dt})"
            )));
        }
        let n = (t_final / dt).round() as usize;
        if n == 0 {
            return Err(CoreError::DomainError(format!(
                "dt = {dt} exceeds the horizon t_final = {t_final}"
            )));
        }
        Self::new(t_final, n)
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of stored time levels (`n_steps + 1`).
    pub fn n_levels(&self) -> usize {
        self.n_steps + 1
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.dt
    }

    /// Trapezoid quadrature weight of a time level (in units of `dt`).
    pub fn trapezoid_weight(&self, level: usize) -> f64 {
        if level == 0 || level == self.n_steps {
            0.5
        } else {
            1.0
        }
    }

    /// Time level nearest to `t`, clamped to the grid.
    pub fn nearest_level(&self, t: f64) -> usize {
        let l = (t / self.dt).round();
        (l.max(0.0) as usize).min(self.n_steps)
    }
}
