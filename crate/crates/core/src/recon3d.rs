//! Three-current reconstruction in 3D.
//!
//! Each current pair (a, b) gives a planar Poisson equation
//! (∂_a² + ∂_b²)ρ = ½(∂_a² - ∂_b²)(g_bb - g_aa) - 2∂_a∂_b g_ab. Slice mode
//! solves the (1, 2) equation on every x₃ plane; full mode sums all three,
//! which yields 2Δρ, and solves one 3D Poisson problem.

use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{AetError, Result};
use crate::field::ScalarField;
use crate::forward::power_densities_for;
use crate::recon2d::{ln_error, misfit, pair_rhs, sanitize_sigma, ReconOptions, ReconResult};
use crate::spectral::poisson_dirichlet;

/// g_jk = M_jk - M⁰_jk. Slice mode needs only g11, g22 and g12.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationData3D {
    pub g11: ScalarField,
    pub g22: ScalarField,
    pub g12: ScalarField,
    pub g33: Option<ScalarField>,
    pub g13: Option<ScalarField>,
    pub g23: Option<ScalarField>,
}

impl PerturbationData3D {
    /// From fields in pair order: [11, 12, 13, 22, 23, 33], or [11, 12, 22]
    /// for two currents.
    pub fn from_pairs(g: Vec<ScalarField>) -> Result<Self> {
        let k = g.len();
        let mut it = g.into_iter();
        let mut next = || it.next().expect("length checked");
        match k {
            6 => {
                let (g11, g12, g13, g22, g23, g33) = (next(), next(), next(), next(), next(), next());
                Ok(Self { g11, g22, g12, g33: Some(g33), g13: Some(g13), g23: Some(g23) })
            }
            3 => {
                let (g11, g12, g22) = (next(), next(), next());
                Ok(Self { g11, g22, g12, g33: None, g13: None, g23: None })
            }
            k => Err(AetError::InvalidParameter(format!("expected 3 or 6 perturbation fields, got {k}"))),
        }
    }

    fn check(&self) -> Result<()> {
        let grid = *self.g11.grid();
        if grid.dim() != 3 {
            return Err(AetError::InvalidParameter("expected 3D fields".into()));
        }
        for f in [Some(&self.g22), Some(&self.g12), self.g33.as_ref(), self.g13.as_ref(), self.g23.as_ref()]
            .into_iter()
            .flatten()
        {
            grid.ensure_same(f.grid())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode3D {
    Full,
    Slice,
}

impl Mode3D {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode3D::Full => "full",
            Mode3D::Slice => "slice",
        }
    }

    /// Currents needed by the mode.
    pub fn currents(self) -> usize {
        match self {
            Mode3D::Full => 3,
            Mode3D::Slice => 2,
        }
    }
}

impl FromStr for Mode3D {
    type Err = AetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Mode3D::Full),
            "slice" => Ok(Mode3D::Slice),
            _ => Err(AetError::InvalidParameter(format!("unknown 3D mode `{s}` (full|slice)"))),
        }
    }
}

/// Sum of the three pair right-hand sides, i.e. the right side of 2Δρ.
pub fn full_rhs(g: &PerturbationData3D) -> Result<ScalarField> {
    g.check()?;
    let g33 = g.g33.as_ref().ok_or(AetError::MissingComponent("g33"))?;
    let g13 = g.g13.as_ref().ok_or(AetError::MissingComponent("g13"))?;
    let g23 = g.g23.as_ref().ok_or(AetError::MissingComponent("g23"))?;
    let r12 = pair_rhs(&g.g11, &g.g22, &g.g12, 0, 1)?;
    let r13 = pair_rhs(&g.g11, g33, g13, 0, 2)?;
    let r23 = pair_rhs(&g.g22, g33, g23, 1, 2)?;
    r12.add(&r13)?.add(&r23)
}

pub fn iteration0_3d(g: &PerturbationData3D, mode: Mode3D) -> Result<ScalarField> {
    g.check()?;
    match mode {
        Mode3D::Full => Ok(poisson_dirichlet(&full_rhs(g)?.scale(0.5))),
        Mode3D::Slice => {
            let grid = *g.g11.grid();
            let n = grid.n();
            let r12 = pair_rhs(&g.g11, &g.g22, &g.g12, 0, 1)?;
            let planes = (1..n - 1)
                .into_par_iter()
                .map(|k| r12.section(2, k).map(|p| poisson_dirichlet(&p)))
                .collect::<Result<Vec<_>>>()?;
            let mut rho = ScalarField::zeros(grid);
            for (k, p) in planes.iter().enumerate() {
                rho.set_section(2, k + 1, p)?;
            }
            Ok(rho)
        }
    }
}

/// Fixed-point iteration σ_{k+1} = σ_k(1 + ρ_k), where ρ_k inverts the
/// misfit g = M - M(σ_k) with the constant-benchmark formulas. `m_measured`
/// is in pair order for the currents of `mode`. Stops early when the misfit
/// grows twice in a row.
pub fn reconstruct3d(
    m_measured: &[ScalarField],
    sigma0: &ScalarField,
    n_iters: usize,
    mode: Mode3D,
    opts: &ReconOptions,
) -> Result<ReconResult> {
    if sigma0.grid().dim() != 3 {
        return Err(AetError::InvalidParameter("expected a 3D conductivity".into()));
    }
    let currents = mode.currents();
    let expected = currents * (currents + 1) / 2;
    if m_measured.len() < expected {
        return Err(AetError::InvalidParameter(format!(
            "{} mode needs {expected} power densities, got {}",
            mode.as_str(),
            m_measured.len()
        )));
    }
    let data: Vec<ScalarField> = if m_measured.len() == 6 && currents == 2 {
        vec![m_measured[0].clone(), m_measured[1].clone(), m_measured[3].clone()]
    } else {
        m_measured[..expected].to_vec()
    };
    let mut res = ReconResult {
        sigma: sigma0.clone(),
        iterates: Vec::new(),
        residual_history: Vec::new(),
        error_history: Vec::new(),
        stopped_early: None,
    };
    let fail = |res: &ReconResult, iteration: usize, e: AetError| AetError::Reconstruction {
        iteration,
        partial: Box::new(res.clone()),
        source: Box::new(e),
    };

    let mut sigma = sigma0.clone();
    let mut rises = 0;
    for k in 0..=n_iters {
        let (m_k, _) = power_densities_for(&sigma, currents, opts.tol).map_err(|e| fail(&res, k, e))?;
        if k > 0 {
            let r = misfit(&m_k, &data)?;
            if let Some(&prev) = res.residual_history.last() {
                rises = if r > prev { rises + 1 } else { 0 };
            }
            res.residual_history.push(r);
            if rises >= 2 {
                res.stopped_early = Some(format!("misfit increased at iterations #{} and #{}", k - 2, k - 1));
                break;
            }
            if k == n_iters {
                break;
            }
        }
        let g: Vec<ScalarField> = data.iter().zip(&m_k).map(|(a, b)| a.sub(b)).collect::<Result<_>>()?;
        let rho = iteration0_3d(&PerturbationData3D::from_pairs(g)?, mode)?;
        sigma = sanitize_sigma(&sigma.zip_map(&rho, |s, r| s * (1.0 + r))?);
        res.sigma = sigma.clone();
        res.iterates.push(sigma.clone());
        if let Some(e) = ln_error(&sigma, &opts.truth_ln_sigma)? {
            res.error_history.push(e);
        }
    }
    Ok(res)
}
