//! Synthetic focusing: recover M(x) from its front pairings.
//!
//! A sinogram value is D(t, z) = ∂_t (φ_w * Mf(z, ·))(t), where Mf(z, r) is
//! the mean of f over the circle of radius r about z. For centers on a
//! circle of radius R enclosing the support of f,
//!
//! f(x) = 1/(2πR) ∮ ∫_0^{2R} ∂_r (r ∂_r Mf)(z, r) log|r² - |x-z|²| dr dS(z).
//!
//! Since D already is ∂_r Mf, the inner integrand is ∂_r(r D). With r D
//! interpolated linearly between front radii the r-integral is exact
//! against the logarithm; the outer integral is the transducer average.

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;

use crate::error::{AetError, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::probe::{mollifier_derivative, Sinogram, SinogramKind, TransducerArray};

/// Radial oversampling of the filtered data relative to the front spacing.
const RHO_REFINE: usize = 2;

#[derive(Debug, Clone)]
pub struct FocusedField {
    pub field: ScalarField,
    /// 0-based current axes.
    pub pair: (usize, usize),
    pub source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FocusOptions {
    /// For diagonal pairs, remove the exactly known contribution of the
    /// unit baseline on the square before inverting and add it back after;
    /// outside the mask the baseline δ_ij is written.
    pub baseline: bool,
}

impl Default for FocusOptions {
    fn default() -> Self {
        Self { baseline: true }
    }
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.abs().ln()
    }
}

/// Antiderivative of log|r² - ρ²| in r.
fn log_primitive(r: f64, rho: f64) -> f64 {
    xlogx(r - rho) + xlogx(r + rho) - 2.0 * r
}

/// Fraction of the circle |x - z| = r lying inside the square [-1,1]².
pub fn arc_fraction_in_square(z: [f64; 2], r: f64) -> f64 {
    if r <= 0.0 {
        return if z[0].abs() <= 1.0 && z[1].abs() <= 1.0 { 1.0 } else { 0.0 };
    }
    let mut cuts = vec![0.0, 2.0 * PI];
    for (axis, c) in [(0usize, 1.0f64), (0, -1.0), (1, 1.0), (1, -1.0)] {
        let q = (c - z[axis]) / r;
        if q.abs() <= 1.0 {
            let base = q.acos();
            let (a, b) = if axis == 0 { (base, -base) } else { (PI / 2.0 - base, PI / 2.0 + base) };
            for th in [a, b] {
                cuts.push(th.rem_euclid(2.0 * PI));
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut inside = 0.0;
    for w in cuts.windows(2) {
        if w[1] - w[0] <= 0.0 {
            continue;
        }
        let th = 0.5 * (w[0] + w[1]);
        let (x, y) = (z[0] + r * th.cos(), z[1] + r * th.sin());
        if x.abs() <= 1.0 && y.abs() <= 1.0 {
            inside += w[1] - w[0];
        }
    }
    inside / (2.0 * PI)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Sinogram of the indicator of the square, ∫ φ_w'(t - r) A(r) dr with A
/// the arc fraction, by composite Gauss quadrature across the front.
pub fn square_indicator_sinogram(array: &TransducerArray, pair: (usize, usize)) -> Sinogram {
    let gl = gauss_legendre(8);
    let panels = 16;
    let w = array.width();
    let nl = array.fronts();
    let mut values = vec![0.0; array.count() * nl];
    values.par_chunks_mut(nl).enumerate().for_each(|(m, row)| {
        let z = array.center(m);
        for (l, v) in row.iter_mut().enumerate() {
            let t = array.front_radius(l);
            let mut acc = 0.0;
            for p in 0..panels {
                let a = -w + 2.0 * w * p as f64 / panels as f64;
                let half = w / panels as f64;
                for &(x, wt) in &gl {
                    let s = a + half * (x + 1.0);
                    let r = t - s;
                    if r > 0.0 {
                        acc += half * wt * mollifier_derivative(s, w) * arc_fraction_in_square(z, r);
                    }
                }
            }
            *v = acc;
        }
    });
    Sinogram { values, pair, geometry: array.clone(), kind: SinogramKind::Synthetic }
}

fn check_geometry(array: &TransducerArray, grid: &Grid) -> Result<()> {
    if grid.dim() != 2 {
        return Err(AetError::Geometry("focusing reconstructs 2D fields".into()));
    }
    if array.radius() <= SQRT_2 {
        return Err(AetError::Geometry(format!(
            "transducer circle radius {} does not enclose the square",
            array.radius()
        )));
    }
    let reach = array.radius() + SQRT_2 + array.width();
    if array.t_max() < reach {
        return Err(AetError::Geometry(format!(
            "fronts up to {} do not sweep the square (need {reach:.4})",
            array.t_max()
        )));
    }
    Ok(())
}

/// Filtered data F_m(ρ_k) for every transducer, ρ_k = k Δt / RHO_REFINE.
fn filter(values: &[f64], array: &TransducerArray) -> (Vec<f64>, f64, usize) {
    let nl = array.fronts();
    let dt = array.dt();
    let drho = dt / RHO_REFINE as f64;
    let nrho = (nl - 1) * RHO_REFINE + 1;
    // kernel[k][l] = ∫_{t_l}^{t_{l+1}} log|r² - ρ_k²| dr
    let kernel: Vec<f64> = (0..nrho)
        .into_par_iter()
        .flat_map_iter(|k| {
            let rho = k as f64 * drho;
            let g: Vec<f64> = (0..nl).map(|l| log_primitive(array.front_radius(l), rho)).collect();
            (0..nl - 1).map(move |l| g[l + 1] - g[l])
        })
        .collect();
    let mut out = vec![0.0; array.count() * nrho];
    out.par_chunks_mut(nrho).enumerate().for_each(|(m, fm)| {
        let d = &values[m * nl..(m + 1) * nl];
        let slopes: Vec<f64> = (0..nl - 1)
            .map(|l| (array.front_radius(l + 1) * d[l + 1] - array.front_radius(l) * d[l]) / dt)
            .collect();
        for (k, f) in fm.iter_mut().enumerate() {
            let row = &kernel[k * (nl - 1)..(k + 1) * (nl - 1)];
            *f = row.iter().zip(&slopes).map(|(a, b)| a * b).sum();
        }
    });
    (out, drho, nrho)
}

fn backproject(filtered: &[f64], drho: f64, nrho: usize, array: &TransducerArray, grid: &Grid) -> Vec<f64> {
    let p = array.count();
    let centers: Vec<[f64; 2]> = (0..p).map(|m| array.center(m)).collect();
    let mask = array.radius() - array.width();
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.point(i);
            if x[0].hypot(x[1]) >= mask {
                return f64::NAN;
            }
            let mut acc = 0.0;
            for (m, z) in centers.iter().enumerate() {
                let rho = (x[0] - z[0]).hypot(x[1] - z[1]) / drho;
                let k = (rho.floor() as usize).min(nrho - 2);
                let frac = rho - k as f64;
                let f = &filtered[m * nrho..(m + 1) * nrho];
                acc += (1.0 - frac) * f[k] + frac * f[k + 1];
            }
            acc / p as f64
        })
        .collect()
}

/// Inverts the circular-mean data of `s` onto `grid` with default options.
pub fn focus(s: &Sinogram, grid: &Grid) -> Result<FocusedField> {
    focus_with(s, grid, FocusOptions::default())
}

pub fn focus_with(s: &Sinogram, grid: &Grid, opts: FocusOptions) -> Result<FocusedField> {
    check_geometry(&s.geometry, grid)?;
    let array = &s.geometry;
    let diagonal = s.pair.0 == s.pair.1;
    let base = if opts.baseline && diagonal { 1.0 } else { 0.0 };
    let values: Vec<f64> = if base != 0.0 {
        let ind = square_indicator_sinogram(array, s.pair);
        s.values.iter().zip(&ind.values).map(|(a, b)| a - base * b).collect()
    } else {
        s.values.clone()
    };
    let (filtered, drho, nrho) = filter(&values, array);
    let mut field = backproject(&filtered, drho, nrho, array, grid);
    let outside = if opts.baseline && diagonal { 1.0 } else { 0.0 };
    for v in &mut field {
        if v.is_nan() {
            *v = outside;
        } else {
            *v += base;
        }
    }
    Ok(FocusedField {
        field: ScalarField::from_values(*grid, field)?,
        pair: s.pair,
        source: s.kind.as_str().to_string(),
    })
}

/// Point-spread function of the focusing at `y`: the focused image of the
/// exact data of a point source.
pub fn synthesize_delta(y: [f64; 2], array: &TransducerArray, grid: &Grid) -> Result<ScalarField> {
    if !(y[0].abs() < 1.0 && y[1].abs() < 1.0) {
        return Err(AetError::InvalidParameter(format!("focus point {y:?} is not inside the square")));
    }
    let nl = array.fronts();
    let w = array.width();
    let mut s = Sinogram::zeros(array.clone(), (0, 1), SinogramKind::Synthetic);
    for m in 0..array.count() {
        let z = array.center(m);
        let rho = (y[0] - z[0]).hypot(y[1] - z[1]);
        for l in 0..nl {
            s.values[m * nl + l] = mollifier_derivative(array.front_radius(l) - rho, w) / (2.0 * PI * rho.max(w));
        }
    }
    Ok(focus_with(&s, grid, FocusOptions { baseline: false })?.field)
}
