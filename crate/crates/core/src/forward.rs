//! Potentials for ∇·σ∇u = 0 with canonical face currents.
//!
//! With u = x_j + v the correction v solves ∇·σ∇v = -∂_j(σ - 1) with zero
//! Neumann data. In the discrete setting the operator is
//! `A v = -Σ_k S_k(σ C_k v)` where `C_k` differentiates a cosine series
//! and `S_k` a sine series along axis k. `S_k` is the negative adjoint of
//! `C_k` in the trapezoid inner product, so `A` is symmetric positive
//! semi-definite there, with the same null space as the constant
//! coefficient operator. That operator's pseudo-inverse is the
//! preconditioner of a conjugate residual iteration.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{AetError, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::io::field_hash;
use crate::spectral::{d_cos_to_sin, d_sin_to_cos, neumann_preconditioner};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 500;

/// Boundary current `n(x)·e_axis`: +1 on the face x_axis = 1, -1 on the
/// face x_axis = -1, zero elsewhere. Axes are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CurrentPattern {
    pub axis: usize,
}

impl CurrentPattern {
    pub fn new(axis: usize) -> Self {
        Self { axis }
    }
}

#[derive(Debug, Clone)]
pub struct PotentialSolution {
    /// Zero-mean potential.
    pub u: ScalarField,
    /// ∇u, with the linear part of u differentiated exactly.
    pub gradient: VectorField,
    pub current: CurrentPattern,
    /// Hash of the conductivity samples.
    pub sigma_id: String,
    /// Achieved relative residual in the preconditioned norm.
    pub residual: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Recompute the residual from scratch before accepting convergence.
    pub verify: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iterations: MAX_ITERATIONS, verify: true }
    }
}

#[derive(Debug, Clone)]
pub struct SolveStats {
    pub residual: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

fn trapezoid_weights(grid: &Grid) -> Arc<Vec<f64>> {
    Arc::new((0..grid.len()).map(|i| grid.trapezoid_weight(i)).collect())
}

/// `v ↦ -Σ_k S_k(σ C_k v)` for a fixed conductivity.
#[derive(Debug, Clone)]
pub struct ConductivityOperator {
    grid: Grid,
    sigma: Vec<f64>,
    weights: Arc<Vec<f64>>,
}

impl ConductivityOperator {
    pub fn new(sigma: &ScalarField) -> Self {
        let grid = *sigma.grid();
        Self { grid, sigma: sigma.values().to_vec(), weights: trapezoid_weights(&grid) }
    }

    fn with_weights(grid: Grid, sigma: Vec<f64>, weights: Arc<Vec<f64>>) -> Self {
        Self { grid, sigma, weights }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for k in 0..self.grid.dim() {
            let mut flux = d_cos_to_sin(v, &self.grid, k);
            flux.par_iter_mut().zip(&self.sigma).for_each(|(f, s)| *f *= s);
            let div = d_sin_to_cos(&flux, &self.grid, k);
            out.par_iter_mut().zip(&div).for_each(|(o, d)| *o -= d);
        }
        out
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        // Fixed-order chunked sum keeps results independent of thread count.
        a.par_chunks(4096)
            .zip(b.par_chunks(4096))
            .zip(self.weights.par_chunks(4096))
            .map(|((a, b), w)| a.iter().zip(b).zip(w).map(|((x, y), w)| w * x * y).sum::<f64>())
            .collect::<Vec<_>>()
            .iter()
            .sum()
    }

    /// Preconditioned conjugate residual solve of `A x = b`, starting from
    /// `x0` (or zero). The reported residual is `‖b - Ax‖ / ‖b‖` in the norm
    /// induced by the preconditioner, which this method decreases
    /// monotonically.
    pub fn solve(&self, b: &[f64], x0: Option<&[f64]>, opts: SolverOptions) -> Result<(Vec<f64>, SolveStats)> {
        let g = &self.grid;
        let minv = |r: &[f64]| neumann_preconditioner(r, g);
        let bnorm = self.dot(b, &minv(b)).max(0.0).sqrt();
        let mut x = x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; b.len()]);
        let mut history = Vec::new();
        if bnorm == 0.0 {
            return Ok((vec![0.0; b.len()], SolveStats { residual: 0.0, iterations: 0, history }));
        }

        let residual_of = |x: &[f64]| -> Vec<f64> {
            let ax = self.apply(x);
            b.iter().zip(&ax).map(|(b, a)| b - a).collect()
        };
        let mut r = if x0.is_some() { residual_of(&x) } else { b.to_vec() };
        let mut z = minv(&r);
        let mut res = self.dot(&r, &z).max(0.0).sqrt() / bnorm;
        history.push(res);
        let mut p = z.clone();
        let mut az = self.apply(&z);
        let mut ap = az.clone();
        let mut z_az = self.dot(&z, &az);
        let mut it = 0;
        while res > opts.tol {
            if it >= opts.max_iterations {
                return Err(AetError::NotConverged { tol: opts.tol, residual: res, iterations: it });
            }
            it += 1;
            let q = minv(&ap);
            let denom = self.dot(&ap, &q);
            if !(denom > 0.0) || !z_az.is_finite() {
                return Err(AetError::NotConverged { tol: opts.tol, residual: res, iterations: it });
            }
            let alpha = z_az / denom;
            x.par_iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
            r.par_iter_mut().zip(&ap).for_each(|(r, a)| *r -= alpha * a);
            z.par_iter_mut().zip(&q).for_each(|(z, q)| *z -= alpha * q);
            res = self.dot(&r, &z).max(0.0).sqrt() / bnorm;

            if res <= opts.tol && !opts.verify {
                history.push(res);
                break;
            }
            if res <= opts.tol {
                // Confirm against the true residual; restart if drift crept in.
                r = residual_of(&x);
                z = minv(&r);
                let true_res = self.dot(&r, &z).max(0.0).sqrt() / bnorm;
                if true_res <= opts.tol {
                    res = true_res;
                    history.push(res);
                    break;
                }
                res = true_res;
                history.push(res);
                p = z.clone();
                az = self.apply(&z);
                ap = az.clone();
                z_az = self.dot(&z, &az);
                continue;
            }
            history.push(res);
            az = self.apply(&z);
            let z_az_new = self.dot(&z, &az);
            let beta = z_az_new / z_az;
            z_az = z_az_new;
            p.par_iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
            ap.par_iter_mut().zip(&az).for_each(|(a, z)| *a = z + beta * *a);
        }
        Ok((x, SolveStats { residual: res, iterations: it, history }))
    }
}

/// Checks σ > 0, finite, and σ = 1 on the two outermost node layers.
pub fn check_conductivity(sigma: &ScalarField) -> Result<()> {
    let g = sigma.grid();
    for (i, &s) in sigma.values().iter().enumerate() {
        if !(s > 0.0) || !s.is_finite() {
            return Err(AetError::Conductivity(format!("σ = {s} at node {i}")));
        }
        if g.boundary_depth(i) < 2 && (s - 1.0).abs() >= 1e-12 {
            return Err(AetError::Conductivity(format!(
                "σ = {s} at node {i}; σ must equal 1 on the two outer layers"
            )));
        }
    }
    Ok(())
}

/// Full gradient of `x_axis + v`.
pub(crate) fn gradient_of_correction(v: &[f64], grid: &Grid, axis: usize) -> VectorField {
    let comps = (0..grid.dim())
        .map(|k| {
            let mut d = d_cos_to_sin(v, grid, k);
            if k == axis {
                d.iter_mut().for_each(|x| *x += 1.0);
            }
            ScalarField::from_values(*grid, d).expect("same grid")
        })
        .collect();
    VectorField::new(comps).expect("same grid")
}

/// Solves ∇·σ∇u = 0 with boundary current `current` to relative residual
/// `tol`.
pub fn solve_potential(sigma: &ScalarField, current: CurrentPattern, tol: f64) -> Result<PotentialSolution> {
    solve_potential_with(sigma, current, SolverOptions { tol, ..Default::default() })
}

pub fn solve_potential_with(
    sigma: &ScalarField,
    current: CurrentPattern,
    opts: SolverOptions,
) -> Result<PotentialSolution> {
    let grid = *sigma.grid();
    grid.check_axis(current.axis)?;
    check_conductivity(sigma)?;
    let op = ConductivityOperator::new(sigma);
    let excess: Vec<f64> = sigma.values().iter().map(|s| s - 1.0).collect();
    let rhs = d_sin_to_cos(&excess, &grid, current.axis);
    let (mut v, stats) = op.solve(&rhs, None, opts)?;

    let vf = ScalarField::from_values(grid, v.clone())?;
    let mean = vf.mean();
    v.iter_mut().for_each(|x| *x -= mean);
    let gradient = gradient_of_correction(&v, &grid, current.axis);
    let u = ScalarField::from_values(
        grid,
        (0..grid.len()).map(|i| grid.point(i)[current.axis] + v[i]).collect(),
    )?;
    Ok(PotentialSolution {
        u,
        gradient,
        current,
        sigma_id: field_hash(sigma),
        residual: stats.residual,
        iterations: stats.iterations,
        residual_history: stats.history,
    })
}

/// M_ij = σ ∇u_i·∇u_j.
pub fn power_density(sigma: &ScalarField, ui: &PotentialSolution, uj: &PotentialSolution) -> Result<ScalarField> {
    sigma.grid().ensure_same(ui.u.grid())?;
    sigma.grid().ensure_same(uj.u.grid())?;
    let dot = ui.gradient.dot(&uj.gradient)?;
    sigma.mul(&dot)
}

/// ∮ u I ds for the face current `weight`, trapezoid rule on each face.
pub fn boundary_functional(u: &ScalarField, weight: CurrentPattern) -> Result<f64> {
    let g = *u.grid();
    g.check_axis(weight.axis)?;
    let n = g.n();
    let h = g.spacing();
    let d = g.dim();
    let mut idx = [0usize; 3];
    let mut total = 0.0;
    for (i, &val) in u.values().iter().enumerate() {
        g.unravel(i, &mut idx[..d]);
        let k = idx[weight.axis];
        let sign = if k == n - 1 {
            1.0
        } else if k == 0 {
            -1.0
        } else {
            continue;
        };
        let w: f64 = (0..d)
            .filter(|&a| a != weight.axis)
            .map(|a| if idx[a] == 0 || idx[a] == n - 1 { 0.5 * h } else { h })
            .product();
        total += sign * w * val;
    }
    Ok(total)
}

/// Current pairs (i ≤ j) in storage order: (0,0),(0,1),(1,1) in 2D and
/// (0,0),(0,1),(0,2),(1,1),(1,2),(2,2) in 3D.
pub fn pair_list(dim: usize) -> Vec<(usize, usize)> {
    (0..dim).flat_map(|i| (i..dim).map(move |j| (i, j))).collect()
}

/// Potentials for every canonical current and all power densities in
/// [`pair_list`] order.
pub fn power_densities(sigma: &ScalarField, tol: f64) -> Result<(Vec<ScalarField>, Vec<PotentialSolution>)> {
    power_densities_for(sigma, sigma.grid().dim(), tol)
}

/// As [`power_densities`] with only the first `currents` canonical currents.
pub fn power_densities_for(
    sigma: &ScalarField,
    currents: usize,
    tol: f64,
) -> Result<(Vec<ScalarField>, Vec<PotentialSolution>)> {
    sigma.grid().check_axis(currents.saturating_sub(1))?;
    let sols = (0..currents)
        .into_par_iter()
        .map(|a| solve_potential(sigma, CurrentPattern::new(a), tol))
        .collect::<Result<Vec<_>>>()?;
    let m = pair_list(currents)
        .into_iter()
        .map(|(i, j)| power_density(sigma, &sols[i], &sols[j]))
        .collect::<Result<Vec<_>>>()?;
    Ok((m, sols))
}

pub(crate) fn operator_with_weights(grid: Grid, sigma: Vec<f64>, weights: Arc<Vec<f64>>) -> ConductivityOperator {
    ConductivityOperator::with_weights(grid, sigma, weights)
}

pub(crate) fn shared_weights(grid: &Grid) -> Arc<Vec<f64>> {
    trapezoid_weights(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{builtin_phantom, Output};

    #[test]
    fn identity_conductivity_gives_linear_potential() {
        let g = Grid::new(2, 33).unwrap();
        let s = ScalarField::constant(g, 1.0);
        for axis in 0..2 {
            let sol = solve_potential(&s, CurrentPattern::new(axis), 1e-10).unwrap();
            let x = ScalarField::from_fn(g, |p| p[axis]);
            assert!(sol.u.sub(&x).unwrap().max_abs() < 1e-14);
            assert_eq!(sol.iterations, 0);
        }
    }

    #[test]
    fn rejects_bad_conductivity() {
        let g = Grid::new(2, 17).unwrap();
        let mut s = ScalarField::constant(g, 1.0);
        s.values_mut()[g.index(&[8, 8])] = -1.0;
        assert!(solve_potential(&s, CurrentPattern::new(0), 1e-8).is_err());
        let mut s = ScalarField::constant(g, 1.0);
        s.values_mut()[g.index(&[1, 8])] = 1.1;
        assert!(matches!(
            solve_potential(&s, CurrentPattern::new(0), 1e-8),
            Err(AetError::Conductivity(_))
        ));
    }

    #[test]
    fn phantom_solve_converges_monotonically() {
        let g = Grid::new(2, 65).unwrap();
        let s = builtin_phantom("table1-2d").unwrap().rasterize(&g, Output::Sigma).unwrap();
        let sol = solve_potential(&s, CurrentPattern::new(0), 1e-10).unwrap();
        assert!(sol.residual <= 1e-10);
        assert!(sol.u.mean().abs() < 1e-12);
        for w in sol.residual_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "{:?}", w);
        }
    }

    #[test]
    fn boundary_functional_examples() {
        let g = Grid::new(2, 33).unwrap();
        let x1 = ScalarField::from_fn(g, |p| p[0]);
        let x2 = ScalarField::from_fn(g, |p| p[1]);
        let sq = ScalarField::from_fn(g, |p| p[0] * p[0]);
        let w = CurrentPattern::new(0);
        assert!((boundary_functional(&x1, w).unwrap() - 4.0).abs() < 1e-12);
        assert!(boundary_functional(&x2, w).unwrap().abs() < 1e-12);
        assert!(boundary_functional(&sq, w).unwrap().abs() < 1e-12);
        let g3 = Grid::new(3, 9).unwrap();
        let z = ScalarField::from_fn(g3, |p| p[2]);
        assert!((boundary_functional(&z, CurrentPattern::new(2)).unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn unit_conductivity_power_density_is_identity() {
        let g = Grid::new(3, 17).unwrap();
        let s = ScalarField::constant(g, 1.0);
        let sols: Vec<_> = (0..3).map(|a| solve_potential(&s, CurrentPattern::new(a), 1e-10).unwrap()).collect();
        for i in 0..3 {
            for j in 0..3 {
                let m = power_density(&s, &sols[i], &sols[j]).unwrap();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!(m.values().iter().all(|&v| (v - e).abs() < 1e-10));
            }
        }
    }
}
