#![allow(dead_code)]

use aet_core::{Grid, ScalarField};

/// Radial bump ρ(x) = A (1 - |x-c|²/R²)^K inside the ball, zero outside,
/// with the closed-form linearized perturbations g_jk = ρ δ_jk + 2∂_j∂_k φ
/// where Δφ = -ρ, so v_j = ∂_j φ solves Δv_j = -∂_j ρ.
pub struct Bump {
    pub amp: f64,
    pub radius: f64,
    pub center: [f64; 3],
}

const K: i32 = 4;

fn binom(n: i32, k: i32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl Bump {
    pub fn rho_r(&self, r: f64) -> f64 {
        if r >= self.radius {
            0.0
        } else {
            self.amp * (1.0 - (r / self.radius).powi(2)).powi(K)
        }
    }

    /// ∂_r ρ.
    pub fn drho_r(&self, r: f64) -> f64 {
        if r >= self.radius {
            0.0
        } else {
            let q = 1.0 - (r / self.radius).powi(2);
            -self.amp * K as f64 * q.powi(K - 1) * 2.0 * r / self.radius.powi(2)
        }
    }

    /// ∫_0^r ρ(t) t^{d-1} dt.
    fn flux(&self, r: f64, d: usize) -> f64 {
        let r = r.min(self.radius);
        let d = d as i32;
        (0..=K)
            .map(|i| {
                binom(K, i) * (-1f64).powi(i) * r.powi(2 * i + d) / ((2 * i + d) as f64 * self.radius.powi(2 * i))
            })
            .sum::<f64>()
            * self.amp
    }

    fn rel(&self, p: &[f64]) -> (Vec<f64>, f64) {
        let x: Vec<f64> = p.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        (x, r)
    }

    pub fn rho(&self, grid: Grid) -> ScalarField {
        ScalarField::from_fn(grid, |p| self.rho_r(self.rel(p).1))
    }

    pub fn grad(&self, grid: Grid, axis: usize) -> ScalarField {
        ScalarField::from_fn(grid, |p| {
            let (x, r) = self.rel(p);
            if r == 0.0 {
                0.0
            } else {
                self.drho_r(r) * x[axis] / r
            }
        })
    }

    /// g_jk for 0-based axes j, k.
    pub fn g(&self, grid: Grid, j: usize, k: usize) -> ScalarField {
        let d = grid.dim();
        ScalarField::from_fn(grid, |p| {
            let (x, r) = self.rel(p);
            let rho = self.rho_r(r);
            let delta = if j == k { 1.0 } else { 0.0 };
            let hess = if r < 1e-12 {
                // φ'' = φ'/r = -ρ(0)/d at the center
                -rho / d as f64 * delta
            } else {
                let dphi = -self.flux(r, d) / r.powi(d as i32 - 1);
                let ddphi = -rho - (d as f64 - 1.0) * dphi / r;
                let (a, b) = (x[j] / r, x[k] / r);
                ddphi * a * b + dphi / r * (delta - a * b)
            };
            rho * delta + 2.0 * hess
        })
    }

    /// All g in pair order (0,0),(0,1),... for `grid.dim()` currents.
    pub fn pairs(&self, grid: Grid) -> Vec<ScalarField> {
        aet_core::forward::pair_list(grid.dim()).into_iter().map(|(j, k)| self.g(grid, j, k)).collect()
    }
}

pub fn bump2() -> Bump {
    Bump { amp: 0.1, radius: 0.85, center: [0.05, -0.05, 0.0] }
}

pub fn bump3() -> Bump {
    Bump { amp: 0.1, radius: 0.5, center: [0.1, -0.15, 0.05] }
}
