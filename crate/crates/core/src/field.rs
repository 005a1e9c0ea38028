//! Grid-sampled scalar, vector and symmetric 2-tensor fields, and the
//! conformal metric `g = e^{2φ}·δ`.

use crate::error::{ensure_same_grid, Error, Result};
use crate::grid::ManifoldGrid;
use crate::scalar::{seq_max, seq_min, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    grid: ManifoldGrid,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: ManifoldGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values but {grid} has {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: ManifoldGrid, value: T) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn zeros(grid: ManifoldGrid) -> Self {
        Self::constant(grid, T::zero())
    }

    /// Samples `f` at the flat coordinates of every grid point.
    pub fn from_fn(grid: ManifoldGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| T::lit(f(grid.coords(k)))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &ManifoldGrid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn get(&self, k: usize) -> T {
        self.values[k]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        ensure_same_grid(&self.grid, &other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn ensure_finite(&self, field: &'static str) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite { field, index }),
            None => Ok(()),
        }
    }

    pub fn max(&self) -> T {
        seq_max(self.values.iter().copied())
    }

    pub fn min(&self) -> T {
        seq_min(self.values.iter().copied())
    }

    pub fn max_abs(&self) -> T {
        seq_max(self.values.iter().map(|v| v.abs()))
    }

    /// Index of the largest value; the first one wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = k;
            }
        }
        best
    }

    pub fn mean(&self) -> T {
        let n = T::from_usize(self.values.len()).unwrap();
        self.values.iter().copied().sum::<T>() / n
    }
}

/// One-form or vector field, two components per point (second is zero in 1-D).
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<T> {
    grid: ManifoldGrid,
    data: Vec<[T; 2]>,
}

impl<T: Real> VectorField<T> {
    pub fn new(grid: ManifoldGrid, data: Vec<[T; 2]>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "vector field has {} entries but {grid} has {} points",
                data.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: ManifoldGrid) -> Self {
        Self {
            grid,
            data: vec![[T::zero(); 2]; grid.len()],
        }
    }

    pub fn grid(&self) -> &ManifoldGrid {
        &self.grid
    }

    pub fn data(&self) -> &[[T; 2]] {
        &self.data
    }

    pub fn get(&self, k: usize) -> [T; 2] {
        self.data[k]
    }

    pub fn component(&self, axis: usize) -> ScalarField<T> {
        ScalarField {
            grid: self.grid,
            values: self.data.iter().map(|v| v[axis]).collect(),
        }
    }

    /// Largest flat (component-wise Euclidean) magnitude.
    pub fn max_abs(&self) -> T {
        seq_max(self.data.iter().map(|v| (v[0] * v[0] + v[1] * v[1]).sqrt()))
    }
}

/// Symmetric 2-tensor field in covariant components, stored as the upper
/// triangle `(xx, xy, yy)`; in 1-D only `xx` is populated.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField<T> {
    grid: ManifoldGrid,
    data: Vec<[T; 3]>,
}

impl<T: Real> TensorField<T> {
    pub fn new(grid: ManifoldGrid, data: Vec<[T; 3]>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "tensor field has {} entries but {grid} has {} points",
                data.len(),
                grid.len()
            )));
        }
        if grid.dim() == 1 && data.iter().any(|c| c[1] != T::zero() || c[2] != T::zero()) {
            return Err(Error::InvalidGrid(
                "1-D tensor fields carry only the xx component".into(),
            ));
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: ManifoldGrid) -> Self {
        Self {
            grid,
            data: vec![[T::zero(); 3]; grid.len()],
        }
    }

    /// `s(x)·δ_ij` (flat identity scaled pointwise).
    pub fn isotropic(s: &ScalarField<T>) -> Self {
        let two_d = s.grid.dim() == 2;
        Self {
            grid: s.grid,
            data: s
                .values
                .iter()
                .map(|&v| [v, T::zero(), if two_d { v } else { T::zero() }])
                .collect(),
        }
    }

    pub fn grid(&self) -> &ManifoldGrid {
        &self.grid
    }

    pub fn data(&self) -> &[[T; 3]] {
        &self.data
    }

    pub fn get(&self, k: usize) -> [T; 3] {
        self.data[k]
    }

    /// Component `(i, j)`; symmetric by construction.
    pub fn component(&self, k: usize, i: usize, j: usize) -> T {
        let c = &self.data[k];
        match (i, j) {
            (0, 0) => c[0],
            (1, 1) => c[2],
            _ => c[1],
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|c| [c[0] * s, c[1] * s, c[2] * s]).collect(),
        }
    }

    /// Multiplies pointwise by a scalar field.
    pub fn scale_by(&self, s: &ScalarField<T>) -> Result<Self> {
        ensure_same_grid(&self.grid, &s.grid)?;
        Ok(Self {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&s.values)
                .map(|(c, &v)| [c[0] * v, c[1] * v, c[2] * v])
                .collect(),
        })
    }
}

/// Conformal metric `g = e^{2φ}·δ` on a periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField<T> {
    phi: ScalarField<T>,
}

impl<T: Real> MetricField<T> {
    pub fn new(phi: ScalarField<T>) -> Result<Self> {
        phi.ensure_finite("phi")?;
        Ok(Self { phi })
    }

    pub fn flat(grid: ManifoldGrid) -> Self {
        Self {
            phi: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &ManifoldGrid {
        &self.phi.grid
    }

    pub fn phi(&self) -> &ScalarField<T> {
        &self.phi
    }

    pub fn into_phi(self) -> ScalarField<T> {
        self.phi
    }

    pub fn dim(&self) -> usize {
        self.phi.grid.dim()
    }

    /// `e^{2φ}` at point `k`.
    pub fn factor(&self, k: usize) -> T {
        (self.phi.values[k] + self.phi.values[k]).exp()
    }

    /// `e^{-2φ}` at point `k`.
    pub fn inverse_factor(&self, k: usize) -> T {
        (-(self.phi.values[k] + self.phi.values[k])).exp()
    }

    pub fn inverse_factors(&self) -> Vec<T> {
        (0..self.phi.len()).map(|k| self.inverse_factor(k)).collect()
    }

    /// The metric itself as a covariant tensor field.
    pub fn metric_tensor(&self) -> TensorField<T> {
        TensorField::isotropic(&self.phi.map(|p| (p + p).exp()))
    }

    /// Riemannian volume element `e^{dφ}·dx` per cell, summed: the total volume.
    pub fn volume(&self) -> T {
        let d = T::from_usize(self.dim()).unwrap();
        let cell = T::lit(self.grid().cell_volume());
        self.phi.values.iter().map(|&p| (d * p).exp() * cell).sum()
    }

    /// Quadrature of `f` against the Riemannian volume form.
    pub fn integrate(&self, f: &ScalarField<T>) -> Result<T> {
        ensure_same_grid(self.grid(), f.grid())?;
        let d = T::from_usize(self.dim()).unwrap();
        let cell = T::lit(self.grid().cell_volume());
        Ok(self
            .phi
            .values
            .iter()
            .zip(&f.values)
            .map(|(&p, &v)| (d * p).exp() * v * cell)
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_storage_is_symmetric() {
        let g = ManifoldGrid::torus(8, 8).unwrap();
        let t = TensorField::new(g, vec![[1.0, 2.0, 3.0]; 64]).unwrap();
        assert_eq!(t.component(5, 0, 1), t.component(5, 1, 0));
        assert_eq!(t.component(5, 1, 1), 3.0);
    }

    #[test]
    fn one_d_tensor_rejects_off_axis_components() {
        let g = ManifoldGrid::circle(8).unwrap();
        assert!(TensorField::new(g, vec![[1.0, 0.5, 0.0]; 8]).is_err());
    }

    #[test]
    fn metric_rejects_non_finite_phi() {
        let g = ManifoldGrid::circle(8).unwrap();
        let mut phi = ScalarField::<f64>::zeros(g);
        phi.values_mut()[3] = f64::NAN;
        assert!(matches!(MetricField::new(phi), Err(Error::NonFinite { index: 3, .. })));
    }

    #[test]
    fn factors_positive_and_reciprocal() {
        let g = ManifoldGrid::circle(16).unwrap();
        let m = MetricField::new(ScalarField::<f64>::from_fn(g, |x| 3.0 * x[0] - 1.0)).unwrap();
        for k in 0..16 {
            assert!(m.factor(k) > 0.0);
            assert!((m.factor(k) * m.inverse_factor(k) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn size_mismatch_rejected() {
        let g = ManifoldGrid::circle(8).unwrap();
        assert!(ScalarField::new(g, vec![0.0f64; 7]).is_err());
    }
}
