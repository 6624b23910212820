//! Two-current reconstruction in 2D.
//!
//! With σ = σ₀(1 + ρ) and M = M⁰ + g, the constant-benchmark linearization
//! yields Δρ = ½(∂₁² - ∂₂²)(g₂₂ - g₁₁) - 2∂₁∂₂g₁₂ with ρ = 0 on the
//! boundary (iteration #0). Later iterations use the parametrix: corrected
//! current fields W_j give ∇ln σ pointwise, and ln σ follows from one
//! Dirichlet Poisson solve.

use rayon::prelude::*;

use crate::error::{AetError, Result};
use crate::fd::{fd_derivative, fd_mixed};
use crate::field::{ScalarField, VectorField};
use crate::forward::{power_densities, PotentialSolution, DEFAULT_TOL};
use crate::spectral::{poisson_dirichlet, spectral_derivative};

/// Perturbations g_jk = M_jk - M⁰_jk.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationData {
    pub g11: ScalarField,
    pub g12: ScalarField,
    pub g22: ScalarField,
}

impl PerturbationData {
    pub fn zeros(grid: crate::Grid) -> Self {
        let z = ScalarField::zeros(grid);
        Self { g11: z.clone(), g12: z.clone(), g22: z }
    }
}

fn check_2d(f: &ScalarField) -> Result<()> {
    if f.grid().dim() != 2 {
        return Err(AetError::InvalidParameter("expected 2D fields".into()));
    }
    Ok(())
}

/// `m` and `m0` hold [M11, M12, M22].
pub fn perturbation_data(m: &[ScalarField], m0: &[ScalarField]) -> Result<PerturbationData> {
    if m.len() != 3 || m0.len() != 3 {
        return Err(AetError::InvalidParameter(format!(
            "expected 3 power densities, got {} and {}",
            m.len(),
            m0.len()
        )));
    }
    check_2d(&m[0])?;
    Ok(PerturbationData { g11: m[0].sub(&m0[0])?, g12: m[1].sub(&m0[1])?, g22: m[2].sub(&m0[2])? })
}

/// Right-hand side ½(∂₁² - ∂₂²)(g₂₂ - g₁₁) - 2∂₁∂₂g₁₂ by finite differences.
pub fn iteration0_rhs(g: &PerturbationData) -> Result<ScalarField> {
    pair_rhs(&g.g11, &g.g22, &g.g12, 0, 1)
}

/// ½(∂_a² - ∂_b²)(g_bb - g_aa) - 2∂_a∂_b g_ab.
pub fn pair_rhs(
    gaa: &ScalarField,
    gbb: &ScalarField,
    gab: &ScalarField,
    a: usize,
    b: usize,
) -> Result<ScalarField> {
    let diff = gbb.sub(gaa)?;
    let daa = fd_derivative(&diff, a, 2)?;
    let dbb = fd_derivative(&diff, b, 2)?;
    let mixed = fd_mixed(gab, a, b)?;
    let v = daa
        .values()
        .iter()
        .zip(dbb.values())
        .zip(mixed.values())
        .map(|((p, q), m)| 0.5 * (p - q) - 2.0 * m)
        .collect();
    ScalarField::from_values(*gab.grid(), v)
}

/// ρ from Δρ = [`iteration0_rhs`], ρ = 0 on the boundary.
pub fn iteration0(g: &PerturbationData) -> Result<ScalarField> {
    check_2d(&g.g11)?;
    Ok(poisson_dirichlet(&iteration0_rhs(g)?))
}

/// (∂₁ρ, ∂₂ρ) = (½∂₁(g₂₂-g₁₁) - ∂₂g₁₂, ½∂₂(g₁₁-g₂₂) - ∂₁g₁₂).
pub fn gradient_formulas(g: &PerturbationData) -> Result<VectorField> {
    check_2d(&g.g11)?;
    let diff = g.g22.sub(&g.g11)?;
    let d1 = fd_derivative(&diff, 0, 1)?;
    let d2 = fd_derivative(&diff, 1, 1)?;
    let c1 = fd_derivative(&g.g12, 1, 1)?;
    let c2 = fd_derivative(&g.g12, 0, 1)?;
    let first = d1.zip_map(&c1, |a, b| 0.5 * a - b)?;
    let second = d2.zip_map(&c2, |a, b| -0.5 * a - b)?;
    VectorField::new(vec![first, second])
}

pub const TAU_DET: f64 = 1e-3;
pub const W_FLOOR: f64 = 1e-8;

/// Diagnostics of one parametrix step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParametrixReport {
    /// Nodes where |W_j|² was raised to the floor, per j.
    pub floored: [usize; 2],
}

/// Solves U₁·V₁ = g₁₁/2, U₂·V₁ = g₁₂/2, U₁·V₂ = g₁₂/2, U₂·V₂ = g₂₂/2 at one
/// node, `u` = [U₁, U₂] and `g` = [g₁₁, g₁₂, g₂₂]. `None` when the currents
/// are nearly parallel.
pub fn node_corrections(u: [[f64; 2]; 2], g: [f64; 3]) -> Option<([f64; 2], [f64; 2])> {
    let [[a, b], [c, d]] = u;
    let det = a * d - b * c;
    if det == 0.0 || det.abs() < TAU_DET * a.hypot(b) * c.hypot(d) {
        return None;
    }
    let solve = |r1: f64, r2: f64| [(d * r1 - b * r2) / det, (a * r2 - c * r1) / det];
    Some((solve(0.5 * g[0], 0.5 * g[1]), solve(0.5 * g[1], 0.5 * g[2])))
}

/// One parametrix step about the benchmark σ_b with potentials `u`
/// (currents 0 and 1) and measured [M11, M12, M22]. Returns the new σ.
pub fn parametrix_update(
    sigma_bench: &ScalarField,
    u: &[PotentialSolution],
    m_measured: &[ScalarField],
) -> Result<(ScalarField, ParametrixReport)> {
    check_2d(sigma_bench)?;
    if u.len() != 2 || m_measured.len() != 3 {
        return Err(AetError::InvalidParameter("need two potentials and three power densities".into()));
    }
    let grid = *sigma_bench.grid();
    for f in m_measured {
        grid.ensure_same(f.grid())?;
    }
    let len = grid.len();
    let sq: Vec<f64> = sigma_bench.values().iter().map(|s| s.sqrt()).collect();
    let comp = |j: usize, k: usize| -> Vec<f64> {
        u[j].gradient.component(k).values().iter().zip(&sq).map(|(g, s)| g * s).collect()
    };
    let uu = [[comp(0, 0), comp(0, 1)], [comp(1, 0), comp(1, 1)]];

    let mut parallel = 0usize;
    let mut w = [[vec![0.0; len], vec![0.0; len]], [vec![0.0; len], vec![0.0; len]]];
    for i in 0..len {
        let (a, b) = (uu[0][0][i], uu[0][1][i]);
        let (c, d) = (uu[1][0][i], uu[1][1][i]);
        let g = [
            m_measured[0].values()[i] - (a * a + b * b),
            m_measured[1].values()[i] - (a * c + b * d),
            m_measured[2].values()[i] - (c * c + d * d),
        ];
        let Some((v1, v2)) = node_corrections([[a, b], [c, d]], g) else {
            parallel += 1;
            continue;
        };
        w[0][0][i] = a + v1[0];
        w[0][1][i] = b + v1[1];
        w[1][0][i] = c + v2[0];
        w[1][1][i] = d + v2[1];
    }
    if parallel > 0 {
        return Err(AetError::ParallelCurrents { fraction: 100.0 * parallel as f64 / len as f64 });
    }

    let mut report = ParametrixReport::default();
    let mut s = [vec![0.0; len], vec![0.0; len]];
    for (j, wj) in w.iter().enumerate() {
        let wx = ScalarField::from_values(grid, wj[0].clone())?;
        let wy = ScalarField::from_values(grid, wj[1].clone())?;
        let dxx = spectral_derivative(&wx, 0)?;
        let dyy = spectral_derivative(&wy, 1)?;
        let dxy = spectral_derivative(&wy, 0)?;
        let dyx = spectral_derivative(&wx, 1)?;
        let norm2: Vec<f64> = wj[0].iter().zip(&wj[1]).map(|(x, y)| x * x + y * y).collect();
        let floor = W_FLOOR * norm2.iter().copied().fold(0.0, f64::max);
        for i in 0..len {
            let mut n2 = norm2[i];
            if n2 < floor {
                n2 = floor;
                report.floored[j] += 1;
            }
            let div = dxx.values()[i] + dyy.values()[i];
            let curl = dxy.values()[i] - dyx.values()[i];
            let (x, y) = (wj[0][i], wj[1][i]);
            // ½ · (2/|W|²)(W^⊥ curl + W div), W^⊥ = (-y, x)
            let c = 1.0 / n2;
            s[0][i] += c * (-y * curl + x * div);
            s[1][i] += c * (x * curl + y * div);
        }
    }
    let sx = ScalarField::from_values(grid, std::mem::take(&mut s[0]))?;
    let sy = ScalarField::from_values(grid, std::mem::take(&mut s[1]))?;
    let div_s = spectral_derivative(&sx, 0)?.add(&spectral_derivative(&sy, 1)?)?;
    let ln_sigma = poisson_dirichlet(&div_s.scale(-1.0));
    Ok((ln_sigma.map(f64::exp), report))
}

#[derive(Debug, Clone)]
pub struct ReconResult {
    pub sigma: ScalarField,
    /// σ after each iteration, index 0 = iteration #0.
    pub iterates: Vec<ScalarField>,
    /// rel L2 misfit of all power densities of each iterate against the data.
    pub residual_history: Vec<f64>,
    /// rel L2 error of ln σ of each iterate, when the truth is known.
    pub error_history: Vec<f64>,
    /// Why iteration stopped before the requested count, if it did.
    pub stopped_early: Option<String>,
}

impl ReconResult {
    pub fn ln_sigma(&self) -> ScalarField {
        self.sigma.map(f64::ln)
    }
}

pub const SIGMA_MIN: f64 = 0.135_335_283_236_612_7; // e^-2
pub const SIGMA_MAX: f64 = 7.389_056_098_930_65; // e^2

#[derive(Debug, Clone)]
pub struct ReconOptions {
    pub tol: f64,
    /// ln σ of the true medium, for error reporting.
    pub truth_ln_sigma: Option<ScalarField>,
}

impl Default for ReconOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, truth_ln_sigma: None }
    }
}

/// Clamps to [e^-2, e^2] and resets the two outer node layers to 1.
pub fn sanitize_sigma(sigma: &ScalarField) -> ScalarField {
    let g = *sigma.grid();
    let v = sigma
        .values()
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            if g.boundary_depth(i) < 2 || !s.is_finite() {
                1.0
            } else {
                s.clamp(SIGMA_MIN, SIGMA_MAX)
            }
        })
        .collect();
    ScalarField::from_values(g, v).expect("same grid")
}

/// Relative L2 misfit over a list of fields.
pub fn misfit(model: &[ScalarField], data: &[ScalarField]) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in model.iter().zip(data) {
        num += a.sub(b)?.norm_l2().powi(2);
        den += b.norm_l2().powi(2);
    }
    if den == 0.0 {
        return Err(AetError::ZeroNorm);
    }
    Ok((num / den).sqrt())
}

pub(crate) fn ln_error(sigma: &ScalarField, truth: &Option<ScalarField>) -> Result<Option<f64>> {
    match truth {
        None => Ok(None),
        Some(t) => Ok(Some(crate::metrics::rel_l2(&sigma.map(f64::ln), t)?)),
    }
}

/// Iteration #0 about σ₀ followed by parametrix refinements; `n_iters`
/// iterates are produced in total.
pub fn reconstruct2d(
    m_measured: &[ScalarField],
    sigma0: &ScalarField,
    n_iters: usize,
    opts: &ReconOptions,
) -> Result<ReconResult> {
    check_2d(sigma0)?;
    let mut res = ReconResult {
        sigma: sigma0.clone(),
        iterates: Vec::new(),
        residual_history: Vec::new(),
        error_history: Vec::new(),
        stopped_early: None,
    };
    if n_iters == 0 {
        return Ok(res);
    }
    let fail = |res: &ReconResult, iteration: usize, e: AetError| AetError::Reconstruction {
        iteration,
        partial: Box::new(res.clone()),
        source: Box::new(e),
    };

    let (m0, _) = power_densities(sigma0, opts.tol).map_err(|e| fail(&res, 0, e))?;
    let g = perturbation_data(m_measured, &m0)?;
    let rho = iteration0(&g)?;
    let mut sigma = sanitize_sigma(&sigma0.zip_map(&rho, |s, r| s * (1.0 + r))?);
    for k in 0..n_iters {
        res.sigma = sigma.clone();
        res.iterates.push(sigma.clone());
        if let Some(e) = ln_error(&sigma, &opts.truth_ln_sigma)? {
            res.error_history.push(e);
        }
        let (m_k, sols) = power_densities(&sigma, opts.tol).map_err(|e| fail(&res, k, e))?;
        res.residual_history.push(misfit(&m_k, m_measured)?);
        if k + 1 == n_iters {
            break;
        }
        let (next, _) = parametrix_update(&sigma, &sols, m_measured).map_err(|e| fail(&res, k + 1, e))?;
        sigma = sanitize_sigma(&next);
    }
    Ok(res)
}
