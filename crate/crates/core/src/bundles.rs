//! Multi-component fields: state, control, adjoint, tangent, and gradient
//! bundles sharing one grid.

use crate::error::{CoreError, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::model::{ModelParams, PointControl, PointState, SPECIES_NAMES};

macro_rules! field_bundle {
    ($(#[$meta:meta])* $name:ident, $n:expr) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            fields: [Field; $n],
        }

        impl $name {
            pub fn zeros(grid: Grid) -> Self {
                Self {
                    fields: std::array::from_fn(|_| Field::zeros(grid)),
                }
            }

            pub fn from_fields(fields: [Field; $n]) -> Self {
                let grid = fields[0].grid();
                assert!(
                    fields.iter().all(|f| f.grid() == grid),
                    "bundle components must share one grid"
                );
                Self { fields }
            }

            pub fn grid(&self) -> Grid {
                self.fields[0].grid()
            }

            pub fn n_components(&self) -> usize {
                $n
            }

            pub fn component(&self, k: usize) -> &Field {
                &self.fields[k]
            }

            pub fn component_mut(&mut self, k: usize) -> &mut Field {
                &mut self.fields[k]
            }

            pub fn components(&self) -> &[Field; $n] {
                &self.fields
            }

            /// Per-component integrals over the domain.
            pub fn integrals(&self) -> [f64; $n] {
                std::array::from_fn(|k| self.fields[k].integral())
            }

            pub fn min_value(&self) -> f64 {
                self.fields
                    .iter()
                    .map(|f| f.min())
                    .fold(f64::INFINITY, f64::min)
            }

            pub fn max_abs(&self) -> f64 {
                self.fields.iter().map(|f| f.max_abs()).fold(0.0, f64::max)
            }

            pub fn is_finite(&self) -> bool {
                self.fields.iter().all(|f| f.is_finite())
            }

            /// Sup-norm distance over all components and cells.
            pub fn sup_diff(&self, other: &Self) -> f64 {
                self.fields
                    .iter()
                    .zip(other.fields.iter())
                    .map(|(a, b)| a.linf_diff(b))
                    .fold(0.0, f64::max)
            }

            /// Values of all components at flat cell index `idx`.
            pub fn point_values(&self, idx: usize) -> [f64; $n] {
                std::array::from_fn(|k| self.fields[k].as_slice()[idx])
            }
        }
    };
}

field_bundle!(
    /// The six population density fields `(S, I, R, S*, I*, R*)` at one time.
    StateField,
    6
);

field_bundle!(
    /// The three control fields `(alpha, mu, nu)` at one time.
    ControlField,
    3
);

field_bundle!(
    /// The six adjoint fields at one time.
    AdjointField,
    6
);

field_bundle!(
    /// Directional state derivative fields (solution of the linearized system).
    TangentField,
    6
);

field_bundle!(
    /// Cost gradient densities `(dJ/d alpha, dJ/d mu, dJ/d nu)` at one time.
    GradientField,
    3
);

impl StateField {
    pub fn s(&self) -> &Field {
        &self.fields[0]
    }
    pub fn i(&self) -> &Field {
        &self.fields[1]
    }
    pub fn r(&self) -> &Field {
        &self.fields[2]
    }
    pub fn s_star(&self) -> &Field {
        &self.fields[3]
    }
    pub fn i_star(&self) -> &Field {
        &self.fields[4]
    }
    pub fn r_star(&self) -> &Field {
        &self.fields[5]
    }

    pub fn point(&self, idx: usize) -> PointState {
        PointState::from_array(self.point_values(idx))
    }

    /// Total mass (integral of the six components).
    pub fn total_mass(&self) -> f64 {
        self.integrals().iter().sum()
    }

    /// Errors with the offending species if any value is below `-tol` or not
    /// finite (NaN slips past plain comparisons, so finiteness is checked in
    /// the same pass).
    pub fn check_nonnegative(&self, tol: f64, time_index: usize) -> Result<()> {
        for (k, f) in self.fields.iter().enumerate() {
            let mut min = f64::INFINITY;
            let mut finite = true;
            for v in f.as_slice() {
                min = min.min(*v);
                finite &= v.is_finite();
            }
            if !finite || min < -tol {
                return Err(CoreError::StateNegative {
                    time_index,
                    species: SPECIES_NAMES[k],
                    min_value: if finite { min } else { f64::NAN },
                });
            }
        }
        Ok(())
    }
}

impl ControlField {
    pub fn alpha(&self) -> &Field {
        &self.fields[0]
    }
    pub fn mu(&self) -> &Field {
        &self.fields[1]
    }
    pub fn nu(&self) -> &Field {
        &self.fields[2]
    }

    pub fn point(&self, idx: usize) -> PointControl {
        PointControl::from_array(self.point_values(idx))
    }

    /// Spatially constant control field.
    pub fn constant(grid: Grid, alpha: f64, mu: f64, nu: f64) -> Self {
        Self::from_fields([
            Field::constant(grid, alpha),
            Field::constant(grid, mu),
            Field::constant(grid, nu),
        ])
    }

    /// Componentwise clamp into the admissible box; idempotent.
    pub fn project_in_place(&mut self, p: &ModelParams) {
        for (field, (lo, hi)) in self.fields.iter_mut().zip(p.control_bounds()) {
            for v in field.as_mut_slice() {
                *v = v.clamp(lo, hi);
            }
        }
    }

    /// Exact box-membership check.
    pub fn in_box(&self, p: &ModelParams) -> bool {
        self.fields
            .iter()
            .zip(p.control_bounds())
            .all(|(field, (lo, hi))| field.min() >= lo && field.max() <= hi)
    }
}

impl AdjointField {
    pub fn check_bounded(&self, bound: f64, time_index: usize) -> Result<()> {
        let max_abs = self.max_abs();
        if !max_abs.is_finite() || max_abs > bound {
            return Err(CoreError::AdjointBlowup {
                time_index,
                max_abs,
            });
        }
        Ok(())
    }
}
