//! Discrete differential geometry for conformal metrics `g = e^{2φ}·δ` on
//! periodic grids.
//!
//! Every operator uses second-order central differences with periodic
//! wraparound. Index conventions: covariant components carry lower indices
//! and contravariant ones are obtained by multiplying with `e^{-2φ}`.
//! The Christoffel symbols of a conformal metric in flat coordinates are
//! `Γ^k_ij = δ^k_i φ_j + δ^k_j φ_i − δ_ij φ_k`.

mod distance;

pub use distance::{geodesic_distance, geodesic_path, path_length};

use crate::error::{ensure_same_grid, Result};
use crate::field::{MetricField, ScalarField, TensorField, VectorField};
use crate::grid::ManifoldGrid;
use crate::scalar::Real;

/// Wrapped neighbour offsets along one axis, precomputed per coordinate.
struct AxisWrap {
    prev: Vec<usize>,
    next: Vec<usize>,
}

impl AxisWrap {
    fn new(n: usize) -> Self {
        Self {
            prev: (0..n).map(|i| (i + n - 1) % n).collect(),
            next: (0..n).map(|i| (i + 1) % n).collect(),
        }
    }
}

/// Flat central first differences `(∂x, ∂y)` at every point.
pub(crate) fn first_differences<T: Real>(grid: &ManifoldGrid, v: &[T]) -> Vec<[T; 2]> {
    let (nx, ny) = (grid.size(0), grid.size(1));
    let ax = AxisWrap::new(nx);
    let ay = AxisWrap::new(ny);
    let two_d = grid.dim() == 2;
    let cx = T::lit(0.5 / grid.spacing(0));
    let cy = if two_d {
        T::lit(0.5 / grid.spacing(1))
    } else {
        T::zero()
    };
    let mut out = vec![[T::zero(); 2]; grid.len()];
    for j in 0..ny {
        let row = j * nx;
        for i in 0..nx {
            let k = row + i;
            let dx = (v[row + ax.next[i]] - v[row + ax.prev[i]]) * cx;
            let dy = if two_d {
                (v[ay.next[j] * nx + i] - v[ay.prev[j] * nx + i]) * cy
            } else {
                T::zero()
            };
            out[k] = [dx, dy];
        }
    }
    out
}

/// Flat second differences `(∂xx, ∂xy, ∂yy)`; three-point compact stencils
/// on the diagonal and the four-point cross stencil off it.
pub(crate) fn second_differences<T: Real>(grid: &ManifoldGrid, v: &[T]) -> Vec<[T; 3]> {
    let (nx, ny) = (grid.size(0), grid.size(1));
    let ax = AxisWrap::new(nx);
    let ay = AxisWrap::new(ny);
    let two_d = grid.dim() == 2;
    let hx = grid.spacing(0);
    let cxx = T::lit(1.0 / (hx * hx));
    let (cyy, cxy) = if two_d {
        let hy = grid.spacing(1);
        (T::lit(1.0 / (hy * hy)), T::lit(0.25 / (hx * hy)))
    } else {
        (T::zero(), T::zero())
    };
    let two = T::lit(2.0);
    let mut out = vec![[T::zero(); 3]; grid.len()];
    for j in 0..ny {
        let row = j * nx;
        for i in 0..nx {
            let k = row + i;
            let (ip, im) = (ax.next[i], ax.prev[i]);
            let dxx = (v[row + ip] - two * v[k] + v[row + im]) * cxx;
            if !two_d {
                out[k] = [dxx, T::zero(), T::zero()];
                continue;
            }
            let (rp, rm) = (ay.next[j] * nx, ay.prev[j] * nx);
            let dyy = (v[rp + i] - two * v[k] + v[rm + i]) * cyy;
            let dxy = (v[rp + ip] - v[rm + ip] - v[rp + im] + v[rm + im]) * cxy;
            out[k] = [dxx, dxy, dyy];
        }
    }
    out
}

/// Laplace–Beltrami operator frozen at one metric, reusable across many
/// applications (the solver evaluates it four times per step).
///
/// `Δ_g f = e^{-2φ}(Δ₀f + (d−2)⟨∇₀φ, ∇₀f⟩)`.
pub struct LaplaceBeltrami<T> {
    grid: ManifoldGrid,
    inverse: Vec<T>,
    drift: Vec<[T; 2]>,
}

impl<T: Real> LaplaceBeltrami<T> {
    pub fn new(m: &MetricField<T>) -> Self {
        let grid = *m.grid();
        let d_minus_2 = T::from_usize(grid.dim()).unwrap() - T::lit(2.0);
        let drift = first_differences(&grid, m.phi().values())
            .into_iter()
            .map(|p| [p[0] * d_minus_2, p[1] * d_minus_2])
            .collect();
        Self {
            grid,
            inverse: m.inverse_factors(),
            drift,
        }
    }

    pub fn grid(&self) -> &ManifoldGrid {
        &self.grid
    }

    /// Writes `Δ_g f` into `out`. Both slices must have the grid's length.
    pub fn apply_into(&self, f: &[T], out: &mut [T]) {
        let g = &self.grid;
        let (nx, ny) = (g.size(0), g.size(1));
        let ax = AxisWrap::new(nx);
        let two_d = g.dim() == 2;
        let hx = g.spacing(0);
        let cxx = T::lit(1.0 / (hx * hx));
        let cx = T::lit(0.5 / hx);
        let two = T::lit(2.0);
        if !two_d {
            for i in 0..nx {
                let (ip, im) = (ax.next[i], ax.prev[i]);
                let lap = (f[ip] - two * f[i] + f[im]) * cxx;
                let grad = (f[ip] - f[im]) * cx;
                out[i] = self.inverse[i] * (lap + self.drift[i][0] * grad);
            }
            return;
        }
        // In two dimensions the conformal drift term vanishes identically.
        let ay = AxisWrap::new(ny);
        let hy = g.spacing(1);
        let cyy = T::lit(1.0 / (hy * hy));
        for j in 0..ny {
            let row = j * nx;
            let (rp, rm) = (ay.next[j] * nx, ay.prev[j] * nx);
            for i in 0..nx {
                let k = row + i;
                let lap = (f[row + ax.next[i]] - two * f[k] + f[row + ax.prev[i]]) * cxx
                    + (f[rp + i] - two * f[k] + f[rm + i]) * cyy;
                out[k] = self.inverse[k] * lap;
            }
        }
    }

    pub fn apply(&self, f: &ScalarField<T>) -> Result<ScalarField<T>> {
        ensure_same_grid(&self.grid, f.grid())?;
        let mut out = vec![T::zero(); self.grid.len()];
        self.apply_into(f.values(), &mut out);
        ScalarField::new(self.grid, out)
    }
}

fn check_inputs<T: Real>(m: &MetricField<T>, f: &ScalarField<T>) -> Result<()> {
    ensure_same_grid(m.grid(), f.grid())?;
    f.ensure_finite("input field")
}

/// `Δ_g f`.
pub fn laplace_beltrami<T: Real>(m: &MetricField<T>, f: &ScalarField<T>) -> Result<ScalarField<T>> {
    check_inputs(m, f)?;
    LaplaceBeltrami::new(m).apply(f)
}

/// Covariant differential `df = (∂x f, ∂y f)`.
pub fn differential<T: Real>(f: &ScalarField<T>) -> VectorField<T> {
    VectorField::new(*f.grid(), first_differences(f.grid(), f.values())).expect("differential has grid length")
}

/// Contravariant gradient `g^{ij}∂_j f = e^{-2φ}∂_i f`.
pub fn gradient<T: Real>(m: &MetricField<T>, f: &ScalarField<T>) -> Result<VectorField<T>> {
    check_inputs(m, f)?;
    let df = first_differences(f.grid(), f.values());
    let data = df
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let s = m.inverse_factor(k);
            [d[0] * s, d[1] * s]
        })
        .collect();
    VectorField::new(*m.grid(), data)
}

/// `|∇f|²_g = e^{-2φ}Σ(∂_i f)²`.
pub fn grad_norm_sq<T: Real>(m: &MetricField<T>, f: &ScalarField<T>) -> Result<ScalarField<T>> {
    check_inputs(m, f)?;
    let df = first_differences(f.grid(), f.values());
    let values = df
        .iter()
        .enumerate()
        .map(|(k, d)| m.inverse_factor(k) * (d[0] * d[0] + d[1] * d[1]))
        .collect();
    ScalarField::new(*m.grid(), values)
}

/// Covariant Hessian `f_ij = ∂_i∂_j f − Γ^k_ij ∂_k f`.
pub fn hessian<T: Real>(m: &MetricField<T>, f: &ScalarField<T>) -> Result<TensorField<T>> {
    check_inputs(m, f)?;
    let grid = *m.grid();
    let dphi = first_differences(&grid, m.phi().values());
    let df = first_differences(&grid, f.values());
    let d2f = second_differences(&grid, f.values());
    let data = (0..grid.len())
        .map(|k| {
            let (p, g, s) = (dphi[k], df[k], d2f[k]);
            if grid.dim() == 1 {
                [s[0] - p[0] * g[0], T::zero(), T::zero()]
            } else {
                [
                    s[0] - p[0] * g[0] + p[1] * g[1],
                    s[1] - (p[1] * g[0] + p[0] * g[1]),
                    s[2] - p[1] * g[1] + p[0] * g[0],
                ]
            }
        })
        .collect();
    TensorField::new(grid, data)
}

/// Gaussian curvature `K = −e^{-2φ}Δ₀φ` (identically zero on the circle).
pub fn gaussian_curvature<T: Real>(m: &MetricField<T>) -> ScalarField<T> {
    let grid = *m.grid();
    if grid.dim() == 1 {
        return ScalarField::zeros(grid);
    }
    let d2 = second_differences(&grid, m.phi().values());
    let values = d2
        .iter()
        .enumerate()
        .map(|(k, s)| -m.inverse_factor(k) * (s[0] + s[2]))
        .collect();
    ScalarField::new(grid, values).expect("curvature has grid length")
}

/// Ricci tensor `Ric = K·g`, which in flat components is `−Δ₀φ·δ`.
pub fn ricci<T: Real>(m: &MetricField<T>) -> TensorField<T> {
    let grid = *m.grid();
    if grid.dim() == 1 {
        return TensorField::zeros(grid);
    }
    let d2 = second_differences(&grid, m.phi().values());
    let rho = ScalarField::new(grid, d2.iter().map(|s| -(s[0] + s[2])).collect()).expect("ricci has grid length");
    TensorField::isotropic(&rho)
}

/// Mixed components `e^{-2φ}h_ij` (the matrix of `h·g^{-1}`), as separate
/// flat component arrays.
fn mixed_components<T: Real>(m: &MetricField<T>, h: &TensorField<T>) -> [Vec<T>; 3] {
    let n = m.grid().len();
    let mut out = [vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]];
    for k in 0..n {
        let s = m.inverse_factor(k);
        let c = h.get(k);
        for (slot, v) in out.iter_mut().zip(c) {
            slot[k] = v * s;
        }
    }
    out
}

/// Divergence `(div h)_c = g^{ij}∇_i h_jc`, returned as a covector.
///
/// Written through `κ = e^{-2φ}h`:
/// `(div h)_c = Σ_i ∂_i κ_ic + d·Σ_i φ_i κ_ic − φ_c·tr κ`,
/// so `h = s·g` with constant `s` gives zero up to rounding.
pub fn div_tensor<T: Real>(m: &MetricField<T>, h: &TensorField<T>) -> Result<VectorField<T>> {
    ensure_same_grid(m.grid(), h.grid())?;
    let grid = *m.grid();
    let d = grid.dim();
    let dn = T::from_usize(d).unwrap();
    let kappa = mixed_components(m, h);
    let dk: Vec<Vec<[T; 2]>> = kappa.iter().map(|c| first_differences(&grid, c)).collect();
    let dphi = first_differences(&grid, m.phi().values());
    let comp = |k: usize, i: usize, j: usize| -> T {
        match (i, j) {
            (0, 0) => kappa[0][k],
            (1, 1) => kappa[2][k],
            _ => kappa[1][k],
        }
    };
    let slot = |i: usize, j: usize| -> usize {
        match (i, j) {
            (0, 0) => 0,
            (1, 1) => 2,
            _ => 1,
        }
    };
    let data = (0..grid.len())
        .map(|k| {
            let tr = (0..d).map(|i| comp(k, i, i)).sum::<T>();
            let mut out = [T::zero(); 2];
            for (c, o) in out.iter_mut().enumerate().take(d) {
                let mut acc = T::zero();
                for i in 0..d {
                    acc += dk[slot(i, c)][k][i] + dn * dphi[k][i] * comp(k, i, c);
                }
                *o = acc - dphi[k][c] * tr;
            }
            out
        })
        .collect();
    VectorField::new(grid, data)
}

/// `H = g^{ij}h_ij = e^{-2φ}Σ_i h_ii`.
pub fn trace<T: Real>(m: &MetricField<T>, h: &TensorField<T>) -> Result<ScalarField<T>> {
    ensure_same_grid(m.grid(), h.grid())?;
    let values = (0..m.grid().len())
        .map(|k| {
            let c = h.get(k);
            m.inverse_factor(k) * (c[0] + c[2])
        })
        .collect();
    ScalarField::new(*m.grid(), values)
}

/// Pointwise g-norm `|∇h|_g` of the covariant derivative of `h`.
pub fn covariant_derivative_norm<T: Real>(m: &MetricField<T>, h: &TensorField<T>) -> Result<ScalarField<T>> {
    ensure_same_grid(m.grid(), h.grid())?;
    let grid = *m.grid();
    let d = grid.dim();
    let kappa = mixed_components(m, h);
    let dk: Vec<Vec<[T; 2]>> = kappa.iter().map(|c| first_differences(&grid, c)).collect();
    let dphi = first_differences(&grid, m.phi().values());
    let slot = |i: usize, j: usize| -> usize {
        match (i, j) {
            (0, 0) => 0,
            (1, 1) => 2,
            _ => 1,
        }
    };
    let delta = |a: usize, b: usize| if a == b { T::one() } else { T::zero() };
    let two = T::lit(2.0);
    let values = (0..grid.len())
        .map(|k| {
            let p = dphi[k];
            let christoffel =
                |l: usize, i: usize, j: usize| delta(l, i) * p[j] + delta(l, j) * p[i] - delta(i, j) * p[l];
            let mut sum = T::zero();
            for i in 0..d {
                for j in 0..d {
                    for c in 0..d {
                        let mut t = dk[slot(j, c)][k][i] + two * p[i] * kappa[slot(j, c)][k];
                        for l in 0..d {
                            t -= christoffel(l, i, j) * kappa[slot(l, c)][k]
                                + christoffel(l, i, c) * kappa[slot(j, l)][k];
                        }
                        sum += t * t;
                    }
                }
            }
            (m.inverse_factor(k) * sum).sqrt()
        })
        .collect();
    ScalarField::new(grid, values)
}

/// `⟨a, b⟩_g = e^{-2φ}Σ a_i b_i` for covectors.
pub fn dot<T: Real>(m: &MetricField<T>, a: &VectorField<T>, b: &VectorField<T>) -> Result<ScalarField<T>> {
    ensure_same_grid(m.grid(), a.grid())?;
    ensure_same_grid(m.grid(), b.grid())?;
    let values = (0..m.grid().len())
        .map(|k| {
            let (x, y) = (a.get(k), b.get(k));
            m.inverse_factor(k) * (x[0] * y[0] + x[1] * y[1])
        })
        .collect();
    ScalarField::new(*m.grid(), values)
}

/// `g^{ik}g^{jl}A_ij B_kl = e^{-4φ}Σ A_ij B_ij` for covariant 2-tensors.
pub fn tensor_inner<T: Real>(m: &MetricField<T>, a: &TensorField<T>, b: &TensorField<T>) -> Result<ScalarField<T>> {
    ensure_same_grid(m.grid(), a.grid())?;
    ensure_same_grid(m.grid(), b.grid())?;
    let two = T::lit(2.0);
    let values = (0..m.grid().len())
        .map(|k| {
            let (x, y) = (a.get(k), b.get(k));
            let s = m.inverse_factor(k);
            s * s * (x[0] * y[0] + two * x[1] * y[1] + x[2] * y[2])
        })
        .collect();
    ScalarField::new(*m.grid(), values)
}

/// `|A|²_g`.
pub fn tensor_norm_sq<T: Real>(m: &MetricField<T>, a: &TensorField<T>) -> Result<ScalarField<T>> {
    tensor_inner(m, a, a)
}

/// `A(v♯, v♯) = e^{-4φ}A_ij v_i v_j` for a covector `v`.
pub fn tensor_on_covector<T: Real>(
    m: &MetricField<T>,
    a: &TensorField<T>,
    v: &VectorField<T>,
) -> Result<ScalarField<T>> {
    ensure_same_grid(m.grid(), a.grid())?;
    ensure_same_grid(m.grid(), v.grid())?;
    let two = T::lit(2.0);
    let values = (0..m.grid().len())
        .map(|k| {
            let (c, w) = (a.get(k), v.get(k));
            let s = m.inverse_factor(k);
            s * s * (c[0] * w[0] * w[0] + two * c[1] * w[0] * w[1] + c[2] * w[1] * w[1])
        })
        .collect();
    ScalarField::new(*m.grid(), values)
}

/// Eigenvalues `(λ_min, λ_max)` of `h·g^{-1}` at every point.
pub fn relative_eigenvalues<T: Real>(m: &MetricField<T>, h: &TensorField<T>) -> Result<Vec<(T, T)>> {
    ensure_same_grid(m.grid(), h.grid())?;
    let two_d = m.dim() == 2;
    let half = T::lit(0.5);
    Ok((0..m.grid().len())
        .map(|k| {
            let s = m.inverse_factor(k);
            let c = h.get(k);
            if !two_d {
                let v = c[0] * s;
                return (v, v);
            }
            let (a, b, d) = (c[0] * s, c[1] * s, c[2] * s);
            let mean = (a + d) * half;
            let r = ((a - d) * (a - d) * half * half + b * b).sqrt();
            (mean - r, mean + r)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    type MetricField = crate::field::MetricField<f64>;
    type ScalarField = crate::field::ScalarField<f64>;

    fn circle(n: usize) -> ManifoldGrid {
        ManifoldGrid::circle(n).unwrap()
    }

    fn torus(n: usize) -> ManifoldGrid {
        ManifoldGrid::torus(n, n).unwrap()
    }

    fn const_metric(grid: ManifoldGrid, c: f64) -> MetricField {
        MetricField::new(ScalarField::constant(grid, c)).unwrap()
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        for grid in [circle(16), torus(16)] {
            let m = MetricField::new(ScalarField::from_fn(grid, |x| 0.3 * (2.0 * PI * x[0]).sin())).unwrap();
            let l = laplace_beltrami(&m, &ScalarField::constant(grid, 1.0)).unwrap();
            assert!(l.max_abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_flat_sine() {
        let grid = circle(256);
        let m = MetricField::flat(grid);
        let f = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).sin());
        let l = laplace_beltrami(&m, &f).unwrap();
        let exact = ScalarField::from_fn(grid, |x| -(4.0 * PI * PI) * (2.0 * PI * x[0]).sin());
        let err = l.zip_map(&exact, |a, b| a - b).unwrap().max_abs();
        // (2π)^4 h²/12 leading term
        assert!(err < 2.0 * (2.0 * PI).powi(4) / (12.0 * 256.0 * 256.0), "err {err}");
    }

    #[test]
    fn laplacian_conformal_rescaling() {
        let grid = circle(256);
        let m = const_metric(grid, 0.5);
        let f = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).sin());
        let l = laplace_beltrami(&m, &f).unwrap();
        let exact = ScalarField::from_fn(grid, |x| -(4.0 * PI * PI) * (-1.0f64).exp() * (2.0 * PI * x[0]).sin());
        let err = l.zip_map(&exact, |a, b| a - b).unwrap().max_abs();
        assert!(err < 1e-2, "err {err}");
    }

    #[test]
    fn gradient_cases() {
        let grid = circle(256);
        let c = ScalarField::constant(grid, 4.2);
        assert!(gradient(&MetricField::flat(grid), &c).unwrap().max_abs() < 1e-12);

        let f = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).sin());
        let g = gradient(&MetricField::flat(grid), &f).unwrap();
        for k in 0..grid.len() {
            let x = grid.coords(k)[0];
            assert!((g.get(k)[0] - 2.0 * PI * (2.0 * PI * x).cos()).abs() < 1e-3);
        }

        // φ ≡ 1 scales the flat gradient by e^{-2}
        let g1 = gradient(&const_metric(grid, 1.0), &f).unwrap();
        for k in 0..grid.len() {
            assert!((g1.get(k)[0] - g.get(k)[0] * (-2.0f64).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn grad_norm_sq_conformal_scaling_and_sign() {
        let grid = torus(16);
        let f = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos());
        let phi = ScalarField::from_fn(grid, |x| 0.2 * (2.0 * PI * x[1]).sin());
        let base = grad_norm_sq(&MetricField::new(phi.clone()).unwrap(), &f).unwrap();
        let shifted = grad_norm_sq(&MetricField::new(phi.map(|p| p + 0.7)).unwrap(), &f).unwrap();
        for k in 0..grid.len() {
            assert!(base.get(k) >= 0.0);
            let expect = base.get(k) * (-1.4f64).exp();
            assert!((shifted.get(k) - expect).abs() <= 1e-14 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn hessian_trace_matches_laplacian() {
        for grid in [circle(64), torus(32)] {
            let m = MetricField::new(ScalarField::from_fn(grid, |x| {
                0.1 * (2.0 * PI * x[0]).sin() + 0.05 * (2.0 * PI * x[1]).cos()
            }))
            .unwrap();
            let f = ScalarField::from_fn(grid, |x| {
                (2.0 * PI * x[0]).cos() + 0.3 * (4.0 * PI * x[1]).sin() * (2.0 * PI * x[0]).sin()
            });
            let tr = trace(&m, &hessian(&m, &f).unwrap()).unwrap();
            let lap = laplace_beltrami(&m, &f).unwrap();
            let err = tr.zip_map(&lap, |a, b| a - b).unwrap().max_abs();
            assert!(err < 1e-9, "err {err}");
        }
    }

    #[test]
    fn hessian_of_constant_is_zero() {
        let grid = torus(16);
        let m = MetricField::new(ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).sin())).unwrap();
        let h = hessian(&m, &ScalarField::constant(grid, 2.0)).unwrap();
        assert!(h.data().iter().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn ricci_flat_and_one_dimensional() {
        assert!(ricci(&MetricField::flat(torus(16)))
            .data()
            .iter()
            .flatten()
            .all(|&v| v == 0.0));
        let m = MetricField::new(ScalarField::from_fn(circle(16), |x| (2.0 * PI * x[0]).sin())).unwrap();
        assert!(ricci(&m).data().iter().flatten().all(|&v| v == 0.0));
        assert!(gaussian_curvature(&m).max_abs() == 0.0);
    }

    #[test]
    fn ricci_is_curvature_times_metric() {
        let grid = torus(32);
        let m = MetricField::new(ScalarField::from_fn(grid, |x| 0.1 * (2.0 * PI * x[0]).sin())).unwrap();
        let ric = ricci(&m);
        let k = gaussian_curvature(&m);
        for p in 0..grid.len() {
            let expect = k.get(p) * m.factor(p);
            assert!((ric.component(p, 0, 0) - expect).abs() < 1e-12);
            assert!((ric.component(p, 1, 1) - expect).abs() < 1e-12);
            assert_eq!(ric.component(p, 0, 1), 0.0);
        }
    }

    #[test]
    fn divergence_of_scaled_metric() {
        let grid = torus(32);
        let m = MetricField::new(ScalarField::from_fn(grid, |x| {
            0.2 * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos()
        }))
        .unwrap();
        let g = m.metric_tensor();
        assert!(div_tensor(&m, &TensorField::zeros(grid)).unwrap().max_abs() == 0.0);
        assert!(div_tensor(&m, &g.scale(3.0)).unwrap().max_abs() < 1e-10);
        assert!(covariant_derivative_norm(&m, &g.scale(3.0)).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn trace_cases() {
        let grid = torus(16);
        let m = MetricField::new(ScalarField::from_fn(grid, |x| (2.0 * PI * x[1]).sin())).unwrap();
        let t = trace(&m, &m.metric_tensor()).unwrap();
        assert!(t.values().iter().all(|&v| (v - 2.0).abs() < 1e-14));
        assert!(trace(&m, &TensorField::zeros(grid)).unwrap().max_abs() == 0.0);
        let e2 = m.phi().map(|p| (2.0 * p).exp());
        let diag = TensorField::new(grid, e2.values().iter().map(|&v| [v, 0.0, 0.0]).collect()).unwrap();
        let t1 = trace(&m, &diag).unwrap();
        assert!(t1.values().iter().all(|&v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn cauchy_schwarz_for_hessian() {
        let grid = torus(24);
        let m = MetricField::new(ScalarField::from_fn(grid, |x| 0.1 * (2.0 * PI * x[0]).sin())).unwrap();
        let f = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos());
        let hs = tensor_norm_sq(&m, &hessian(&m, &f).unwrap()).unwrap();
        let lap = laplace_beltrami(&m, &f).unwrap();
        for k in 0..grid.len() {
            assert!(hs.get(k) + 1e-10 >= lap.get(k).powi(2) / 2.0);
        }
    }

    #[test]
    fn relative_eigenvalues_of_conformal_and_anisotropic() {
        let grid = torus(8);
        let m = MetricField::new(ScalarField::constant(grid, 0.3)).unwrap();
        let ev = relative_eigenvalues(&m, &m.metric_tensor().scale(-2.0)).unwrap();
        assert!(ev
            .iter()
            .all(|&(a, b)| (a + 2.0).abs() < 1e-14 && (b + 2.0).abs() < 1e-14));
        let flat = MetricField::flat(grid);
        let h = TensorField::new(grid, vec![[1.0, 0.0, 3.0]; 64]).unwrap();
        let ev = relative_eigenvalues(&flat, &h).unwrap();
        assert_eq!(ev[0], (1.0, 3.0));
    }

    #[test]
    fn mismatched_grids_are_structural_errors() {
        let m = MetricField::flat(circle(16));
        let f = ScalarField::zeros(circle(32));
        assert!(matches!(
            laplace_beltrami(&m, &f),
            Err(crate::Error::GridMismatch { .. })
        ));
        let mut bad = ScalarField::zeros(circle(16));
        bad.values_mut()[0] = f64::INFINITY;
        assert!(matches!(gradient(&m, &bad), Err(crate::Error::NonFinite { .. })));
    }

    #[test]
    fn works_in_single_precision() {
        let grid = circle(64);
        let m = crate::field::MetricField::<f32>::flat(grid);
        let f = crate::field::ScalarField::<f32>::from_fn(grid, |x| (2.0 * PI * x[0]).sin());
        let l = laplace_beltrami(&m, &f).unwrap();
        let k = grid.len() / 4;
        assert!((l.get(k) + 4.0 * std::f32::consts::PI.powi(2)).abs() < 0.1);
    }
}
