//! Fixtures shared by the kernel benchmarks.

use aet_core::phantom::{builtin_phantom, Output};
use aet_core::{Grid, ScalarField};

pub fn grid(dim: usize, n: usize) -> Grid {
    Grid::new(dim, n).expect("valid grid")
}

/// Conductivity of the 2D disk phantom.
pub fn table1_sigma(n: usize) -> ScalarField {
    builtin_phantom("table1-2d").unwrap().rasterize(&grid(2, n), Output::Sigma).unwrap()
}

/// Smooth right-hand side vanishing on the boundary.
pub fn bump(g: Grid) -> ScalarField {
    ScalarField::from_fn(g, |p| {
        let r2: f64 = p[..g.dim()].iter().map(|x| x * x).sum();
        if r2 < 0.64 {
            (1.0 - r2 / 0.64).powi(4)
        } else {
            0.0
        }
    })
}
