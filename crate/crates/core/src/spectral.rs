//! Cosine/sine series on the node grid.
//!
//! Along one axis with N = n-1 intervals, a field is expanded either in
//! cos(πk(x+1)/2), k = 0..N (even extension, Neumann) or in sin(πk(x+1)/2),
//! k = 1..N-1 (odd extension, Dirichlet). Both are diagonalized by the type-I
//! transforms. Differentiation maps one family onto the other.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustdct::{Dct1, DctPlanner, Dst1};

use crate::error::Result;
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;

struct Plans {
    /// DCT-I over all n nodes of a line.
    dct: Arc<dyn Dct1<f64>>,
    /// DST-I over the n-2 interior nodes.
    dst: Arc<dyn Dst1<f64>>,
    scratch: usize,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let mut cache = CACHE.get_or_init(Default::default).lock().unwrap();
    cache
        .entry(n)
        .or_insert_with(|| {
            let mut planner = DctPlanner::new();
            let dct = planner.plan_dct1(n);
            let dst = planner.plan_dst1(n - 2);
            let scratch = dct.get_scratch_len().max(dst.get_scratch_len());
            Arc::new(Plans { dct, dst, scratch })
        })
        .clone()
}

#[derive(Default)]
struct Work {
    scratch: Vec<f64>,
    tmp: Vec<f64>,
}

/// Applies `f` to every 1D line along `axis` of a hypercube array with
/// `side` points per axis. Lines are independent, so the result does not
/// depend on scheduling.
fn along_axis<F>(buf: &mut [f64], side: usize, dim: usize, axis: usize, f: F)
where
    F: Fn(&mut [f64], &mut Work) + Sync,
{
    let stride = side.pow((dim - 1 - axis) as u32);
    if stride == 1 {
        buf.par_chunks_mut(side).for_each_init(Work::default, |w, line| f(line, w));
        return;
    }
    let block = side * stride;
    let mut lines = vec![0.0; buf.len()];
    {
        let src: &[f64] = buf;
        lines.par_chunks_mut(side).enumerate().for_each_init(Work::default, |w, (l, line)| {
            let base = (l / stride) * block + l % stride;
            for (k, v) in line.iter_mut().enumerate() {
                *v = src[base + k * stride];
            }
            f(line, w);
        });
    }
    buf.par_chunks_mut(block).zip(lines.par_chunks(block)).for_each(|(dst, src)| {
        for j in 0..stride {
            for k in 0..side {
                dst[j + k * stride] = src[j * side + k];
            }
        }
    });
}

fn ensure(v: &mut Vec<f64>, len: usize) {
    if v.len() < len {
        v.resize(len, 0.0);
    }
}

/// Derivative of a cosine series; the result is a sine series (zero on the
/// two faces normal to `axis`).
pub(crate) fn d_cos_to_sin(values: &[f64], grid: &Grid, axis: usize) -> Vec<f64> {
    let n = grid.n();
    let nn = n - 1;
    let p = plans(n);
    let mut out = values.to_vec();
    along_axis(&mut out, n, grid.dim(), axis, |line, w| {
        ensure(&mut w.scratch, p.scratch);
        ensure(&mut w.tmp, nn - 1);
        p.dct.process_dct1_with_scratch(line, &mut w.scratch[..p.dct.get_scratch_len()]);
        let y = &mut w.tmp[..nn - 1];
        for k in 1..nn {
            y[k - 1] = -(k as f64 * FRAC_PI_2) * (2.0 / nn as f64) * line[k];
        }
        p.dst.process_dst1_with_scratch(y, &mut w.scratch[..p.dst.get_scratch_len()]);
        line[0] = 0.0;
        line[nn] = 0.0;
        line[1..nn].copy_from_slice(y);
    });
    out
}

/// Derivative of a sine series (boundary values along `axis` are ignored);
/// the result is a cosine series without its k = 0 and k = N modes.
pub(crate) fn d_sin_to_cos(values: &[f64], grid: &Grid, axis: usize) -> Vec<f64> {
    let n = grid.n();
    let nn = n - 1;
    let p = plans(n);
    let mut out = values.to_vec();
    along_axis(&mut out, n, grid.dim(), axis, |line, w| {
        ensure(&mut w.scratch, p.scratch);
        ensure(&mut w.tmp, nn - 1);
        let y = &mut w.tmp[..nn - 1];
        y.copy_from_slice(&line[1..nn]);
        p.dst.process_dst1_with_scratch(y, &mut w.scratch[..p.dst.get_scratch_len()]);
        line[0] = 0.0;
        line[nn] = 0.0;
        for k in 1..nn {
            line[k] = (k as f64 * FRAC_PI_2) * (2.0 / nn as f64) * y[k - 1];
        }
        p.dct.process_dct1_with_scratch(line, &mut w.scratch[..p.dct.get_scratch_len()]);
    });
    out
}

/// Multiplies the cosine coefficients of `values` by `symbol(k)` where `k`
/// holds the per-axis mode indices.
fn cosine_multiplier(values: &[f64], grid: &Grid, symbol: impl Fn(&[usize]) -> f64 + Sync) -> Vec<f64> {
    let n = grid.n();
    let d = grid.dim();
    let p = plans(n);
    let mut buf = values.to_vec();
    let line_op = |line: &mut [f64], w: &mut Work| {
        ensure(&mut w.scratch, p.scratch);
        p.dct.process_dct1_with_scratch(line, &mut w.scratch[..p.dct.get_scratch_len()]);
    };
    for axis in 0..d {
        along_axis(&mut buf, n, d, axis, line_op);
    }
    let scale = (2.0 / (n - 1) as f64).powi(d as i32);
    buf.par_iter_mut().enumerate().for_each(|(i, v)| {
        let mut k = [0usize; 3];
        grid.unravel(i, &mut k[..d]);
        *v *= scale * symbol(&k[..d]);
    });
    for axis in 0..d {
        along_axis(&mut buf, n, d, axis, line_op);
    }
    buf
}

/// Pseudo-inverse of the negated discrete Laplacian `-Σ D_sc D_cs`. That
/// operator has symbol `Σ (kπ/2)²` except that the k = N mode of every axis
/// is annihilated by differentiation; modes with no surviving axis are
/// mapped to zero.
pub(crate) fn neumann_preconditioner(values: &[f64], grid: &Grid) -> Vec<f64> {
    let nn = grid.n() - 1;
    cosine_multiplier(values, grid, |k| {
        let lam: f64 = k
            .iter()
            .map(|&k| if k == nn { 0.0 } else { (k as f64 * FRAC_PI_2).powi(2) })
            .sum();
        if lam == 0.0 {
            0.0
        } else {
            1.0 / lam
        }
    })
}

fn check_axis(f: &ScalarField, axis: usize) -> Result<()> {
    f.grid().check_axis(axis)
}

/// ∂f/∂x_axis through the cosine (even) extension of `f` along `axis`.
///
/// Exact for cosine modes; the result vanishes on the faces normal to
/// `axis`.
pub fn spectral_derivative(f: &ScalarField, axis: usize) -> Result<ScalarField> {
    check_axis(f, axis)?;
    let g = *f.grid();
    ScalarField::from_values(g, d_cos_to_sin(f.values(), &g, axis))
}

pub fn spectral_gradient(f: &ScalarField) -> VectorField {
    let comps = (0..f.grid().dim())
        .map(|a| spectral_derivative(f, a).expect("axis in range"))
        .collect();
    VectorField::new(comps).expect("components share the grid")
}

/// Derivative of a field expanded in the sine (odd) basis along `axis`.
/// Values on the two faces normal to `axis` are treated as zero.
pub fn sine_derivative(f: &ScalarField, axis: usize) -> Result<ScalarField> {
    check_axis(f, axis)?;
    let g = *f.grid();
    ScalarField::from_values(g, d_sin_to_cos(f.values(), &g, axis))
}

fn interior(values: &[f64], grid: &Grid) -> Vec<f64> {
    let n = grid.n();
    let m = n - 2;
    let d = grid.dim();
    let mut out = vec![0.0; m.pow(d as u32)];
    let mut k = [0usize; 3];
    for (i, v) in out.iter_mut().enumerate() {
        let mut rem = i;
        for a in (0..d).rev() {
            k[a] = rem % m + 1;
            rem /= m;
        }
        *v = values[grid.index(&k[..d])];
    }
    out
}

fn embed_interior(inner: &[f64], grid: &Grid) -> Vec<f64> {
    let n = grid.n();
    let m = n - 2;
    let d = grid.dim();
    let mut out = vec![0.0; grid.len()];
    let mut k = [0usize; 3];
    for (i, &v) in inner.iter().enumerate() {
        let mut rem = i;
        for a in (0..d).rev() {
            k[a] = rem % m + 1;
            rem /= m;
        }
        out[grid.index(&k[..d])] = v;
    }
    out
}

fn sine_multiplier(values: &[f64], grid: &Grid, symbol: impl Fn(&[usize]) -> f64 + Sync) -> Vec<f64> {
    let n = grid.n();
    let m = n - 2;
    let d = grid.dim();
    let p = plans(n);
    let mut buf = interior(values, grid);
    let line_op = |line: &mut [f64], w: &mut Work| {
        ensure(&mut w.scratch, p.scratch);
        p.dst.process_dst1_with_scratch(line, &mut w.scratch[..p.dst.get_scratch_len()]);
    };
    for axis in 0..d {
        along_axis(&mut buf, m, d, axis, line_op);
    }
    let scale = (2.0 / (n - 1) as f64).powi(d as i32);
    buf.par_iter_mut().enumerate().for_each(|(i, v)| {
        let mut k = [0usize; 3];
        let mut rem = i;
        for a in (0..d).rev() {
            k[a] = rem % m + 1;
            rem /= m;
        }
        *v *= scale * symbol(&k[..d]);
    });
    for axis in 0..d {
        along_axis(&mut buf, m, d, axis, line_op);
    }
    embed_interior(&buf, grid)
}

fn laplace_symbol(k: &[usize]) -> f64 {
    -k.iter().map(|&k| (k as f64 * FRAC_PI_2).powi(2)).sum::<f64>()
}

/// Solves Δu = rhs with u = 0 on the cube boundary by sine-series
/// diagonalization. Boundary values of `rhs` are ignored; boundary values
/// of the result are exactly zero.
pub fn poisson_dirichlet(rhs: &ScalarField) -> ScalarField {
    let g = *rhs.grid();
    let v = sine_multiplier(rhs.values(), &g, |k| 1.0 / laplace_symbol(k));
    ScalarField::from_values(g, v).expect("same grid")
}

/// Spectral Laplacian of the sine-series interpolant of `f` (boundary
/// values treated as zero). Inverse of [`poisson_dirichlet`].
pub fn dirichlet_laplacian(f: &ScalarField) -> ScalarField {
    let g = *f.grid();
    let v = sine_multiplier(f.values(), &g, laplace_symbol);
    ScalarField::from_values(g, v).expect("same grid")
}

/// Solves Δu = rhs - mean(rhs) with zero normal derivative by cosine-series
/// diagonalization. The result has zero (trapezoid) mean.
pub fn poisson_neumann(rhs: &ScalarField) -> ScalarField {
    let g = *rhs.grid();
    let v = cosine_multiplier(rhs.values(), &g, |k| {
        let s = laplace_symbol(k);
        if s == 0.0 {
            0.0
        } else {
            1.0 / s
        }
    });
    ScalarField::from_values(g, v).expect("same grid")
}
