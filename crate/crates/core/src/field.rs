//! Scalar fields on a grid and the zero-flux discrete Laplacian.

use ndarray::Array2;

use crate::grid::Grid;

/// A scalar field sampled at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Array2<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: Array2::zeros((grid.nx(), grid.ny())),
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: Array2::from_elem((grid.nx(), grid.ny()), c),
        }
    }

    /// Samples `f(x, y)` at every cell center.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut field = Self::zeros(grid);
        for i in 0..grid.nx() {
            for j in 0..grid.ny() {
                let (x, y) = grid.cell_center(i, j);
                field.values[[i, j]] = f(x, y);
            }
        }
        field
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    /// Flat row-major view (index `i * ny + j`).
    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice().expect("field storage is contiguous")
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        self.values
            .as_slice_mut()
            .expect("field storage is contiguous")
    }

    pub fn sum(&self) -> f64 {
        self.as_slice().iter().sum()
    }

    /// Integral over the domain: cell sum times cell measure.
    pub fn integral(&self) -> f64 {
        self.sum() * self.grid.cell_area()
    }

    pub fn min(&self) -> f64 {
        self.as_slice().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.as_slice()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }

    /// Sup-norm of the difference with `other`.
    pub fn linf_diff(&self, other: &Field) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Applies the 5-point (2D) or 3-point (1D) Laplacian with homogeneous
/// Neumann boundaries realized by mirror ghost cells: a missing neighbor
/// contributes no flux. Written in flux form so the cell sum of the output
/// telescopes to zero (discrete divergence theorem).
pub fn laplacian_apply(f: &Field) -> Field {
    let mut out = Field::zeros(f.grid());
    laplacian_into(f.grid(), f.as_slice(), out.as_mut_slice());
    out
}

pub(crate) fn laplacian_into(grid: Grid, f: &[f64], out: &mut [f64]) {
    let nx = grid.nx();
    let ny = grid.ny();
    let inv_dx2 = 1.0 / (grid.dx() * grid.dx());
    let inv_dy2 = 1.0 / (grid.dy() * grid.dy());
    for i in 0..nx {
        let row = i * ny;
        for j in 0..ny {
            let k = row + j;
            let c = f[k];
            let mut acc = 0.0;
            if i > 0 {
                acc += (f[k - ny] - c) * inv_dx2;
            }
            if i + 1 < nx {
                acc += (f[k + ny] - c) * inv_dx2;
            }
            if j > 0 {
                acc += (f[k - 1] - c) * inv_dy2;
            }
            if j + 1 < ny {
                acc += (f[k + 1] - c) * inv_dy2;
            }
            out[k] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn laplacian_of_constant_is_zero() {
        let g = Grid::default_square(16).unwrap();
        let f = Field::constant(g, 3.75);
        let lap = laplacian_apply(&f);
        assert_eq!(lap.max_abs(), 0.0);
    }

    /// The first Neumann eigenmode cos(pi (x - x_min) / L) sampled at cell
    /// centers is an exact eigenvector of the discrete operator, so the
    /// observed error against the analytic eigenvalue -(pi/L)^2 must shrink
    /// at second order under grid refinement.
    #[test]
    fn laplacian_eigenmode_second_order() {
        let lambda = -(PI / 10.0) * (PI / 10.0);
        let mut errors = Vec::new();
        for n in [16usize, 32, 64] {
            let g = Grid::default_square(n).unwrap();
            let f = Field::from_fn(g, |x, _| (PI * (x + 5.0) / 10.0).cos());
            let lap = laplacian_apply(&f);
            let mut err = 0.0f64;
            for (l, v) in lap.as_slice().iter().zip(f.as_slice()) {
                err = err.max((l - lambda * v).abs());
            }
            errors.push(err);
        }
        let r1 = errors[0] / errors[1];
        let r2 = errors[1] / errors[2];
        assert!((3.5..=4.5).contains(&r1), "ratio {r1} not second order");
        assert!((3.5..=4.5).contains(&r2), "ratio {r2} not second order");
    }

    #[test]
    fn laplacian_eigenmode_1d() {
        let g = Grid::new_1d(128, -5.0, 5.0).unwrap();
        let f = Field::from_fn(g, |x, _| (PI * (x + 5.0) / 10.0).cos());
        let lap = laplacian_apply(&f);
        let lambda = -(PI / 10.0) * (PI / 10.0);
        for (l, v) in lap.as_slice().iter().zip(f.as_slice()) {
            assert!((l - lambda * v).abs() < 2e-5);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(16))]

        /// Zero-flux conservation: the integral of the Laplacian of any field
        /// vanishes (discrete divergence theorem), up to round-off.
        #[test]
        fn laplacian_conserves_mass_for_random_field(
            values in proptest::collection::vec(-1.0f64..1.0, 32 * 32),
        ) {
            let g = Grid::default_square(32).unwrap();
            let mut f = Field::zeros(g);
            f.as_mut_slice().copy_from_slice(&values);
            let lap = laplacian_apply(&f);
            proptest::prop_assert!(
                (lap.sum() * g.cell_area()).abs() < 1e-12,
                "flux imbalance {}", lap.sum() * g.cell_area()
            );
        }
    }
}
