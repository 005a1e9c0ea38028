//! Periodic structured grids standing in for S¹ and T².

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest number of points allowed along any axis.
pub const MIN_POINTS: usize = 8;

/// Periodic grid on the circle (dim 1) or flat torus (dim 2).
///
/// Points are numbered `k = i + nx * j` with `x_i = i * hx`, `y_j = j * hy`.
/// In one dimension the second axis is a dummy of size 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldGrid {
    dim: usize,
    sizes: [usize; 2],
    periods: [f64; 2],
}

impl ManifoldGrid {
    pub fn new(sizes: &[usize], periods: &[f64]) -> Result<Self> {
        let dim = sizes.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if periods.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{} periods given for a {dim}-dimensional grid",
                periods.len()
            )));
        }
        if let Some(&n) = sizes.iter().find(|&&n| n < MIN_POINTS) {
            return Err(Error::InvalidGrid(format!(
                "every axis needs at least {MIN_POINTS} points, got {n}"
            )));
        }
        if let Some(&p) = periods.iter().find(|&&p| !(p.is_finite() && p > 0.0)) {
            return Err(Error::InvalidGrid(format!(
                "period must be positive and finite, got {p}"
            )));
        }
        let mut s = [1, 1];
        let mut l = [1.0, 1.0];
        s[..dim].copy_from_slice(sizes);
        l[..dim].copy_from_slice(periods);
        Ok(Self {
            dim,
            sizes: s,
            periods: l,
        })
    }

    /// Unit circle with `n` points.
    pub fn circle(n: usize) -> Result<Self> {
        Self::new(&[n], &[1.0])
    }

    /// Unit torus with `nx × ny` points.
    pub fn torus(nx: usize, ny: usize) -> Result<Self> {
        Self::new(&[nx, ny], &[1.0, 1.0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes[..self.dim]
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods[..self.dim]
    }

    pub fn size(&self, axis: usize) -> usize {
        self.sizes[axis]
    }

    pub fn period(&self, axis: usize) -> f64 {
        self.periods[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.periods[axis] / self.sizes[axis] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    /// Flat area element `hx * hy` (just `hx` on the circle).
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    pub fn len(&self) -> usize {
        self.sizes[0] * self.sizes[1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        (i % self.sizes[0]) + self.sizes[0] * (j % self.sizes[1])
    }

    pub fn split(&self, k: usize) -> (usize, usize) {
        (k % self.sizes[0], k / self.sizes[0])
    }

    /// Index of the point `offset` steps away from `k` along `axis`, wrapping.
    pub fn shift(&self, k: usize, axis: usize, offset: isize) -> usize {
        let (i, j) = self.split(k);
        let n = self.sizes[axis] as isize;
        let step = |c: usize| ((c as isize + offset).rem_euclid(n)) as usize;
        if axis == 0 {
            self.index(step(i), j)
        } else {
            self.index(i, step(j))
        }
    }

    pub fn coords(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.split(k);
        let y = if self.dim == 2 { j as f64 * self.spacing(1) } else { 0.0 };
        [i as f64 * self.spacing(0), y]
    }

    /// Grid neighbours used by the distance graph: 2 in 1-D, 8 in 2-D.
    /// Each entry is `(neighbour, flat displacement)`.
    pub fn neighbours(&self, k: usize) -> Vec<(usize, [f64; 2])> {
        let hx = self.spacing(0);
        if self.dim == 1 {
            return vec![(self.shift(k, 0, 1), [hx, 0.0]), (self.shift(k, 0, -1), [-hx, 0.0])];
        }
        let hy = self.spacing(1);
        let (i, j) = self.split(k);
        let (nx, ny) = (self.sizes[0] as isize, self.sizes[1] as isize);
        let mut out = Vec::with_capacity(8);
        for dj in -1isize..=1 {
            for di in -1isize..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let ii = (i as isize + di).rem_euclid(nx) as usize;
                let jj = (j as isize + dj).rem_euclid(ny) as usize;
                out.push((self.index(ii, jj), [di as f64 * hx, dj as f64 * hy]));
            }
        }
        out
    }

    /// Whether `a` and `b` are distinct neighbours in the distance graph.
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.neighbours(a).iter().any(|&(n, _)| n == b)
    }
}

impl fmt::Display for ManifoldGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dim == 1 {
            write!(f, "S¹[{}; L={}]", self.sizes[0], self.periods[0])
        } else {
            write!(
                f,
                "T²[{}×{}; L={}×{}]",
                self.sizes[0], self.sizes[1], self.periods[0], self.periods[1]
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(ManifoldGrid::new(&[4], &[1.0]).is_err());
        assert!(ManifoldGrid::new(&[8, 8, 8], &[1.0; 3]).is_err());
        assert!(ManifoldGrid::new(&[8], &[0.0]).is_err());
        assert!(ManifoldGrid::new(&[8, 8], &[1.0]).is_err());
    }

    #[test]
    fn shift_wraps() {
        let g = ManifoldGrid::torus(8, 10).unwrap();
        let k = g.index(0, 9);
        assert_eq!(g.split(g.shift(k, 0, -1)), (7, 9));
        assert_eq!(g.split(g.shift(k, 1, 1)), (0, 0));
        assert_eq!(g.spacing(1), 0.1);
    }

    #[test]
    fn neighbour_counts() {
        let c = ManifoldGrid::circle(8).unwrap();
        assert_eq!(c.neighbours(0).len(), 2);
        assert!(c.adjacent(0, 7));
        let t = ManifoldGrid::torus(8, 8).unwrap();
        assert_eq!(t.neighbours(0).len(), 8);
        assert!(t.adjacent(0, t.index(7, 7)));
        assert!(!t.adjacent(0, t.index(2, 0)));
    }
}
