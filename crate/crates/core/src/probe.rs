//! Acoustic front perturbations and non-focused measurements.
//!
//! A front of radius t centered at z perturbs ln σ by
//! `η(x) = φ_w'(t - |x-z|) / (2π max(|x-z|, w))`, where φ_w is a quartic
//! bump of half-width w and unit mass. For any f the pairing ∫ f η equals
//! the t-derivative of the φ_w-smoothed circular mean of f around z.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{AetError, Result};
use crate::field::ScalarField;
use crate::forward::{
    check_conductivity, operator_with_weights, shared_weights, solve_potential,
    CurrentPattern, SolverOptions,
};
use crate::grid::Grid;
use crate::metrics::{l2_norm, Samples};
use crate::spectral::{d_cos_to_sin, d_sin_to_cos};

/// Quartic bump `15/(16w) (1-(s/w)²)²` on |s| < w.
pub fn mollifier(s: f64, w: f64) -> f64 {
    let q = s / w;
    if q.abs() >= 1.0 {
        0.0
    } else {
        let b = 1.0 - q * q;
        15.0 / (16.0 * w) * b * b
    }
}

/// Derivative of [`mollifier`].
pub fn mollifier_derivative(s: f64, w: f64) -> f64 {
    let q = s / w;
    if q.abs() >= 1.0 {
        0.0
    } else {
        -15.0 / (4.0 * w * w * w) * s * (1.0 - q * q)
    }
}

/// Transducers on a circle of radius `R_s` around the origin, each
/// emitting fronts with radii uniformly spaced on [0, T_max].
#[derive(Debug, Clone, PartialEq)]
pub struct TransducerArray {
    radius: f64,
    count: usize,
    fronts: usize,
    t_max: f64,
    width: f64,
}

pub const DEFAULT_TRANSDUCERS: usize = 256;
pub const DEFAULT_FRONTS: usize = 257;
pub const DEFAULT_RADIUS: f64 = 1.6;

impl TransducerArray {
    pub fn new(count: usize, fronts: usize, radius: f64, t_max: f64, width: f64) -> Result<Self> {
        if !(radius > std::f64::consts::SQRT_2) {
            return Err(AetError::Geometry(format!(
                "transducer circle radius {radius} does not enclose the square"
            )));
        }
        if count == 0 || fronts < 2 {
            return Err(AetError::InvalidParameter(format!(
                "need at least one transducer and two fronts, got {count} and {fronts}"
            )));
        }
        if !(width > 0.0) || !(t_max > 0.0) {
            return Err(AetError::InvalidParameter(format!("need w > 0 and T_max > 0, got {width}, {t_max}")));
        }
        Ok(Self { radius, count, fronts, t_max, width })
    }

    /// `count` transducers and `fronts` radii on the circle of radius 1.6,
    /// front half-width w of three cells of `grid`, and T_max = max(3.2, 1.6 + √2 + 2w).
    pub fn standard(count: usize, fronts: usize, grid: &Grid) -> Result<Self> {
        let w = 3.0 * grid.spacing();
        let t_max = (2.0 * DEFAULT_RADIUS).max(DEFAULT_RADIUS + std::f64::consts::SQRT_2 + 2.0 * w);
        Self::new(count, fronts, DEFAULT_RADIUS, t_max, w)
    }

    /// 256 transducers, 257 fronts.
    pub fn default_for(grid: &Grid) -> Result<Self> {
        Self::standard(DEFAULT_TRANSDUCERS, DEFAULT_FRONTS, grid)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn fronts(&self) -> usize {
        self.fronts
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn dt(&self) -> f64 {
        self.t_max / (self.fronts - 1) as f64
    }

    pub fn front_radius(&self, l: usize) -> f64 {
        l as f64 * self.dt()
    }

    pub fn center(&self, m: usize) -> [f64; 2] {
        let th = 2.0 * PI * m as f64 / self.count as f64;
        [self.radius * th.cos(), self.radius * th.sin()]
    }

    /// Indices of fronts whose annulus contains distance `r`.
    fn fronts_near(&self, r: f64) -> std::ops::RangeInclusive<usize> {
        let dt = self.dt();
        let lo = ((r - self.width) / dt).floor().max(0.0) as usize;
        let hi = (((r + self.width) / dt).ceil() as usize).min(self.fronts - 1);
        lo..=hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SinogramKind {
    Physical,
    Linearized,
    Synthetic,
}

impl SinogramKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SinogramKind::Physical => "physical",
            SinogramKind::Linearized => "linearized",
            SinogramKind::Synthetic => "synthetic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "physical" => Ok(Self::Physical),
            "linearized" => Ok(Self::Linearized),
            "synthetic" => Ok(Self::Synthetic),
            _ => Err(AetError::Format(format!("unknown sinogram kind {s:?}"))),
        }
    }
}

/// Measurements M(t_l, z_m) for one current pair, stored transducer-major
/// (`values[m * L + l]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub values: Vec<f64>,
    /// 0-based current axes.
    pub pair: (usize, usize),
    pub geometry: TransducerArray,
    pub kind: SinogramKind,
}

impl Sinogram {
    pub fn zeros(geometry: TransducerArray, pair: (usize, usize), kind: SinogramKind) -> Self {
        Self { values: vec![0.0; geometry.count * geometry.fronts], pair, geometry, kind }
    }

    pub fn get(&self, m: usize, l: usize) -> f64 {
        self.values[m * self.geometry.fronts + l]
    }

    pub fn row(&self, m: usize) -> &[f64] {
        let l = self.geometry.fronts;
        &self.values[m * l..(m + 1) * l]
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| c * v).collect(), ..self.clone() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.geometry != other.geometry {
            return Err(AetError::GridMismatch("sinogram geometries differ".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Self { values, ..self.clone() })
    }
}

impl Samples for Sinogram {
    fn samples(&self) -> &[f64] {
        &self.values
    }

    fn cell_measure(&self) -> f64 {
        2.0 * PI / self.geometry.count as f64 * self.geometry.dt()
    }

    fn shape(&self) -> Vec<usize> {
        vec![self.geometry.count, self.geometry.fronts]
    }
}

/// η_{t,z} sampled on `grid` (2D).
pub fn front_field(z: [f64; 2], t: f64, w: f64, grid: &Grid) -> Result<ScalarField> {
    if grid.dim() != 2 {
        return Err(AetError::InvalidParameter("fronts are defined on 2D grids".into()));
    }
    if !(t > 0.0) || !(w > 0.0) {
        return Err(AetError::InvalidParameter(format!("need t > 0 and w > 0, got {t}, {w}")));
    }
    Ok(ScalarField::from_fn(*grid, |p| {
        let r = (p[0] - z[0]).hypot(p[1] - z[1]);
        mollifier_derivative(t - r, w) / (2.0 * PI * r.max(w))
    }))
}

/// ∫ M η_{t_l,z_m} dx for every front, by trapezoid quadrature on the grid.
pub fn measure_linearized(m_ij: &ScalarField, array: &TransducerArray, pair: (usize, usize)) -> Result<Sinogram> {
    let grid = *m_ij.grid();
    if grid.dim() != 2 {
        return Err(AetError::InvalidParameter("sinograms are simulated on 2D grids".into()));
    }
    let h2 = grid.spacing().powi(2);
    let w = array.width;
    let nl = array.fronts;
    // Quadrature weight times field, with zero entries skipped.
    let nodes: Vec<(f64, f64, f64)> = (0..grid.len())
        .filter_map(|i| {
            let v = m_ij.values()[i] * grid.trapezoid_weight(i) * h2;
            if v == 0.0 {
                None
            } else {
                let p = grid.point(i);
                Some((p[0], p[1], v))
            }
        })
        .collect();
    let mut values = vec![0.0; array.count * nl];
    values.par_chunks_mut(nl).enumerate().for_each(|(m, row)| {
        let z = array.center(m);
        for &(x, y, v) in &nodes {
            let r = (x - z[0]).hypot(y - z[1]);
            let c = v / (2.0 * PI * r.max(w));
            for l in array.fronts_near(r) {
                row[l] += c * mollifier_derivative(array.front_radius(l) - r, w);
            }
        }
    });
    Ok(Sinogram { values, pair, geometry: array.clone(), kind: SinogramKind::Linearized })
}

#[derive(Debug, Clone, Copy)]
pub struct PhysicalOptions {
    /// Front amplitude a in σ exp(a η).
    pub amplitude: f64,
    /// Tolerance of the unperturbed potentials.
    pub tol: f64,
    /// Relative tolerance of each perturbed solve.
    pub cell_tol: f64,
}

impl Default for PhysicalOptions {
    fn default() -> Self {
        Self { amplitude: 1e-3, tol: 1e-10, cell_tol: 1e-4 }
    }
}

/// Simulates the measurement for every front by actually perturbing σ to
/// σ' = σ exp(a η) and re-solving for current `i`.
///
/// The stored value is the change of the boundary functional of current
/// `j`, unperturbed minus perturbed, divided by `a`. By reciprocity this
/// equals `(1/a) ∫ (σ' - σ) ∇u'_i·∇u_j`, which is how it is evaluated: the
/// perturbed potential is u'_i = u_i + δu with
/// `∇·σ'∇δu = -∇·((σ'-σ)∇u_i)` and unchanged boundary currents. To first
/// order the value is ∫ M_ij η.
pub fn measure_physical(
    sigma: &ScalarField,
    pair: (usize, usize),
    array: &TransducerArray,
    opts: PhysicalOptions,
) -> Result<Sinogram> {
    let mut out = measure_physical_amplitudes(sigma, pair, array, &[opts.amplitude], opts)?;
    Ok(out.remove(0))
}

/// [`measure_physical`] for several front amplitudes at once; later
/// amplitudes are warm-started from the rescaled response to the first.
/// `opts.amplitude` is ignored.
pub fn measure_physical_amplitudes(
    sigma: &ScalarField,
    pair: (usize, usize),
    array: &TransducerArray,
    amplitudes: &[f64],
    opts: PhysicalOptions,
) -> Result<Vec<Sinogram>> {
    let grid = *sigma.grid();
    if grid.dim() != 2 {
        return Err(AetError::InvalidParameter("physical sinograms are simulated on 2D grids".into()));
    }
    if amplitudes.is_empty() || amplitudes.iter().any(|a| !(*a > 0.0)) {
        return Err(AetError::InvalidParameter(format!("amplitudes must be positive, got {amplitudes:?}")));
    }
    grid.check_axis(pair.0)?;
    grid.check_axis(pair.1)?;
    check_conductivity(sigma)?;
    let ui = solve_potential(sigma, CurrentPattern::new(pair.0), opts.tol)?;
    let uj = if pair.1 == pair.0 { ui.clone() } else { solve_potential(sigma, CurrentPattern::new(pair.1), opts.tol)? };
    let gi: Vec<&[f64]> = ui.gradient.components().iter().map(|c| c.values()).collect();
    let gj: Vec<&[f64]> = uj.gradient.components().iter().map(|c| c.values()).collect();
    let weights = shared_weights(&grid);
    let h2 = grid.spacing().powi(2);
    let w = array.width;
    let nl = array.fronts;
    let cell_opts = SolverOptions { tol: opts.cell_tol, verify: false, ..Default::default() };
    let pts: Vec<[f64; 3]> = (0..grid.len()).map(|i| grid.point(i)).collect();

    let cells: Vec<(usize, usize)> = (0..array.count).flat_map(|m| (0..nl).map(move |l| (m, l))).collect();
    let per_cell = cells
        .par_iter()
        .map(|&(m, l)| -> Result<Vec<f64>> {
            let z = array.center(m);
            let t = array.front_radius(l);
            let mut eta = vec![0.0; grid.len()];
            let mut support = Vec::new();
            for (k, p) in pts.iter().enumerate() {
                let r = (p[0] - z[0]).hypot(p[1] - z[1]);
                if (t - r).abs() < w {
                    eta[k] = mollifier_derivative(t - r, w) / (2.0 * PI * r.max(w));
                    if eta[k] != 0.0 {
                        support.push(k);
                    }
                }
            }
            if support.is_empty() {
                return Ok(vec![0.0; amplitudes.len()]);
            }
            let mut prev: Option<(f64, Vec<f64>)> = None;
            let mut vals = Vec::with_capacity(amplitudes.len());
            for &a in amplitudes {
                let mut dsigma = vec![0.0; grid.len()];
                for &k in &support {
                    dsigma[k] = sigma.values()[k] * (a * eta[k]).exp_m1();
                }
                let perturbed: Vec<f64> = sigma.values().iter().zip(&dsigma).map(|(s, d)| s + d).collect();
                let mut rhs = vec![0.0; grid.len()];
                for (k, g) in gi.iter().enumerate() {
                    let flux: Vec<f64> = dsigma.iter().zip(g.iter()).map(|(d, g)| d * g).collect();
                    for (r, v) in rhs.iter_mut().zip(d_sin_to_cos(&flux, &grid, k)) {
                        *r += v;
                    }
                }
                let op = operator_with_weights(grid, perturbed, weights.clone());
                let guess = prev.as_ref().map(|(a0, du)| du.iter().map(|v| v * a / a0).collect::<Vec<f64>>());
                let (du, _) = op.solve(&rhs, guess.as_deref(), cell_opts).map_err(|e| AetError::ProbeCell {
                    transducer: m,
                    radius: l,
                    source: Box::new(e),
                })?;
                let mut acc = 0.0;
                for (k, (gik, gjk)) in gi.iter().zip(&gj).enumerate() {
                    let ddu = d_cos_to_sin(&du, &grid, k);
                    for &q in &support {
                        acc += weights[q] * dsigma[q] * (gik[q] + ddu[q]) * gjk[q];
                    }
                }
                vals.push(acc * h2 / a);
                prev = Some((a, du));
            }
            Ok(vals)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(amplitudes
        .iter()
        .enumerate()
        .map(|(q, _)| Sinogram {
            values: per_cell.iter().map(|v| v[q]).collect(),
            pair,
            geometry: array.clone(),
            kind: SinogramKind::Physical,
        })
        .collect())
}

/// Data that can carry additive noise.
pub trait Noisy: Samples + Clone {
    fn samples_mut(&mut self) -> &mut [f64];
}

impl Noisy for Sinogram {
    fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

impl Noisy for ScalarField {
    fn samples_mut(&mut self) -> &mut [f64] {
        self.values_mut()
    }
}

/// Adds Gaussian noise rescaled so that ‖noise‖ = level·‖s‖ exactly.
///
/// Sample k is drawn from its own ChaCha stream (seed, stream k), so the
/// result does not depend on evaluation order.
pub fn add_noise<T: Noisy>(s: &T, level: f64, seed: u64) -> Result<T> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(AetError::InvalidParameter(format!("noise level must be >= 0, got {level}")));
    }
    let mut out = s.clone();
    let target = level * l2_norm(s);
    if level == 0.0 || target == 0.0 {
        return Ok(out);
    }
    let noise: Vec<f64> = (0..s.samples().len())
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            StandardNormal.sample(&mut rng)
        })
        .collect();
    let norm = (noise.iter().map(|v| v * v).sum::<f64>() * s.cell_measure()).sqrt();
    let c = target / norm;
    for (v, e) in out.samples_mut().iter_mut().zip(&noise) {
        *v += c * e;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::rel_l2;

    #[test]
    fn mollifier_has_unit_mass_and_matching_derivative() {
        let w = 0.05;
        let n = 20000;
        let ds = 2.0 * w / n as f64;
        let mass: f64 = (0..n).map(|k| mollifier(-w + (k as f64 + 0.5) * ds, w) * ds).sum();
        assert!((mass - 1.0).abs() < 1e-8);
        for s in [-0.04, -0.01, 0.0, 0.02, 0.049] {
            let fd = (mollifier(s + 1e-7, w) - mollifier(s - 1e-7, w)) / 2e-7;
            assert!((fd - mollifier_derivative(s, w)).abs() < 1e-4 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn array_geometry() {
        let g = Grid::new(2, 129).unwrap();
        let a = TransducerArray::default_for(&g).unwrap();
        assert_eq!(a.center(0), [1.6, 0.0]);
        assert!((a.front_radius(256) - 3.2).abs() < 1e-14);
        assert!((a.width() - 3.0 / 64.0).abs() < 1e-15);
        assert!(TransducerArray::new(8, 9, 1.4, 2.8, 0.1).is_err());
    }

    #[test]
    fn front_support_is_the_annulus() {
        let g = Grid::new(2, 65).unwrap();
        let (z, t, w) = ([1.6, 0.0], 1.2, 0.1);
        let eta = front_field(z, t, w, &g).unwrap();
        for i in 0..g.len() {
            let p = g.point(i);
            let r = (p[0] - z[0]).hypot(p[1] - z[1]);
            if (r - t).abs() >= w {
                assert_eq!(eta.values()[i], 0.0);
            }
        }
        assert!(eta.max_abs() > 0.0);
    }

    #[test]
    fn noise_is_exact_and_reproducible() {
        let g = Grid::new(2, 33).unwrap();
        let f = ScalarField::from_fn(g, |p| (p[0] * 3.0).sin() + 0.5);
        let a = add_noise(&f, 0.5, 7).unwrap();
        assert!((rel_l2(&a, &f).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(a, add_noise(&f, 0.5, 7).unwrap());
        assert_ne!(a, add_noise(&f, 0.5, 8).unwrap());
        assert_eq!(add_noise(&f, 0.0, 7).unwrap(), f);
    }

    #[test]
    fn zero_field_gives_zero_sinogram() {
        let g = Grid::new(2, 33).unwrap();
        let a = TransducerArray::standard(8, 17, &g).unwrap();
        let s = measure_linearized(&ScalarField::zeros(g), &a, (0, 0)).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
    }
}
