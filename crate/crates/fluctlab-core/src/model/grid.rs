use alloc::vec;
use alloc::vec::Vec;

use super::ModelError;
use crate::math;

/// Uniform periodic mesh on the unit torus.
///
/// Only the cell count is stored: the period is the literal constant `1.0`,
/// the cell width is `1 / n_cells` and centers sit at `(i + 1/2) / n_cells`,
/// so the total length is exact by construction rather than by accumulated
/// arithmetic. Indices wrap modulo `n_cells`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TorusGrid {
    n_cells: usize,
}

impl TorusGrid {
    pub const MIN_CELLS: usize = 8;

    pub fn new(n_cells: usize) -> Result<Self, ModelError> {
        if n_cells < Self::MIN_CELLS {
            return Err(ModelError::GridTooCoarse {
                got: n_cells,
                min: Self::MIN_CELLS,
            });
        }
        Ok(Self { n_cells })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Cell width `1 / n_cells`.
    pub fn dx(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    /// Center of cell `i`, `x_i = (i + 1/2) / n_cells`.
    pub fn cell_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.n_cells as f64
    }

    /// Wrap a signed cell index onto the torus.
    pub fn wrap(&self, i: isize) -> usize {
        let n = self.n_cells as isize;
        (((i % n) + n) % n) as usize
    }

    /// Geodesic distance on the unit torus, `min(|x-y|, 1-|x-y|)`.
    pub fn torus_distance(x: f64, y: f64) -> f64 {
        let d = x - y;
        let frac = d - math::floor(d);
        frac.min(1.0 - frac)
    }
}

/// Cell-averaged scalar field on a [`TorusGrid`].
///
/// Values are plain `f64`; NaN/Inf is a detected failure state, checked via
/// [`Field::check_finite`] at solver and norm boundaries, never silently
/// propagated into results.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn constant(grid: TorusGrid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.n_cells()],
        }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn from_values(grid: TorusGrid, values: Vec<f64>) -> Result<Self, ModelError> {
        if values.len() != grid.n_cells() {
            return Err(ModelError::FieldLength {
                got: values.len(),
                expected: grid.n_cells(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Sample a function of the spatial coordinate at cell centers.
    pub fn from_fn(grid: TorusGrid, mut f: impl FnMut(f64) -> f64) -> Self {
        let values = (0..grid.n_cells()).map(|i| f(grid.cell_center(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// First non-finite cell, if any.
    pub fn check_finite(&self) -> Result<(), ModelError> {
        for (cell, &value) in self.values.iter().enumerate() {
            if !value.is_finite() {
                return Err(ModelError::NonFinite { cell, value });
            }
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sub(&self, rhs: &Field) -> Result<Field, ModelError> {
        self.check_same_grid(rhs)?;
        let values = self
            .values
            .iter()
            .zip(rhs.values.iter())
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }

    pub fn check_same_grid(&self, rhs: &Field) -> Result<(), ModelError> {
        if self.grid != rhs.grid {
            return Err(ModelError::GridMismatch {
                left: self.grid.n_cells(),
                right: rhs.grid.n_cells(),
            });
        }
        Ok(())
    }

    /// Total mass `dx * sum(u_i)`; conserved by the finite-volume steppers.
    pub fn mass(&self) -> f64 {
        self.grid.dx() * self.values.iter().sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
    }

    /// Conservative restriction onto a coarser grid whose cell count divides
    /// this field's: each coarse value is the mean of its fine block.
    pub fn restrict_to(&self, coarse: TorusGrid) -> Result<Field, ModelError> {
        let fine_n = self.grid.n_cells();
        let coarse_n = coarse.n_cells();
        if coarse_n == 0 || fine_n % coarse_n != 0 {
            return Err(ModelError::BadRefinement {
                left: fine_n,
                right: coarse_n,
            });
        }
        let block = fine_n / coarse_n;
        let inv = 1.0 / block as f64;
        let values = (0..coarse_n)
            .map(|i| self.values[i * block..(i + 1) * block].iter().sum::<f64>() * inv)
            .collect();
        Ok(Field {
            grid: coarse,
            values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_fewer_than_eight_cells() {
        assert!(TorusGrid::new(7).is_err());
        assert!(TorusGrid::new(8).is_ok());
    }

    #[test]
    fn period_is_exactly_one() {
        // The length is represented as the constant 1.0; centers and dx are
        // derived per call, so nothing can drift.
        for n in [8, 100, 128, 961] {
            let g = TorusGrid::new(n).unwrap();
            assert_eq!(g.cell_center(0), 0.5 / n as f64);
            assert!(g.cell_center(n - 1) < 1.0);
            assert_eq!(g.wrap(-1), n - 1);
            assert_eq!(g.wrap(n as isize), 0);
        }
    }

    #[test]
    fn torus_distance_uses_the_short_way_around() {
        assert!((TorusGrid::torus_distance(0.1, 0.9) - 0.2).abs() < 1e-15);
        assert!((TorusGrid::torus_distance(0.9, 0.1) - 0.2).abs() < 1e-15);
        assert_eq!(TorusGrid::torus_distance(0.4, 0.4), 0.0);
    }

    #[test]
    fn finite_check_reports_first_bad_cell() {
        let g = TorusGrid::new(8).unwrap();
        let mut f = Field::zeros(g);
        f.values_mut()[3] = f64::NAN;
        match f.check_finite() {
            Err(ModelError::NonFinite { cell, .. }) => assert_eq!(cell, 3),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn restriction_averages_blocks() {
        let fine = TorusGrid::new(16).unwrap();
        let coarse = TorusGrid::new(8).unwrap();
        let f = Field::from_fn(fine, |x| x);
        let r = f.restrict_to(coarse).unwrap();
        for i in 0..8 {
            let expect = 0.5 * (fine.cell_center(2 * i) + fine.cell_center(2 * i + 1));
            assert!((r.values()[i] - expect).abs() < 1e-15);
        }
        assert!(f.restrict_to(TorusGrid::new(9).unwrap()).is_err());
    }

    #[test]
    fn mass_is_mean_on_unit_torus() {
        let g = TorusGrid::new(10).unwrap();
        let f = Field::constant(g, 2.5);
        assert!((f.mass() - 2.5).abs() < 1e-15);
    }
}
