//! Second-order finite differences on the node grid.

use crate::error::{AetError, Result};
use crate::field::ScalarField;

/// Centered differences in the interior, one-sided second-order stencils
/// on the two boundary nodes of each line.
pub fn fd_derivative(f: &ScalarField, axis: usize, order: usize) -> Result<ScalarField> {
    let g = *f.grid();
    g.check_axis(axis)?;
    if order != 1 && order != 2 {
        return Err(AetError::InvalidParameter(format!("derivative order must be 1 or 2, got {order}")));
    }
    let n = g.n();
    let h = g.spacing();
    let st = g.stride(axis);
    let block = n * st;
    let v = f.values();
    let mut out = vec![0.0; v.len()];
    for b in (0..v.len()).step_by(block) {
        for j in 0..st {
            let at = |k: usize| v[b + j + k * st];
            for k in 0..n {
                let d = if order == 1 {
                    if k == 0 {
                        (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
                    } else if k == n - 1 {
                        (3.0 * at(k) - 4.0 * at(k - 1) + at(k - 2)) / (2.0 * h)
                    } else {
                        (at(k + 1) - at(k - 1)) / (2.0 * h)
                    }
                } else if k == 0 {
                    (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / (h * h)
                } else if k == n - 1 {
                    (2.0 * at(k) - 5.0 * at(k - 1) + 4.0 * at(k - 2) - at(k - 3)) / (h * h)
                } else {
                    (at(k + 1) - 2.0 * at(k) + at(k - 1)) / (h * h)
                };
                out[b + j + k * st] = d;
            }
        }
    }
    ScalarField::from_values(g, out)
}

/// ∂²f/∂x_a∂x_b as a composition of first derivatives.
pub fn fd_mixed(f: &ScalarField, a: usize, b: usize) -> Result<ScalarField> {
    if a == b {
        return fd_derivative(f, a, 2);
    }
    fd_derivative(&fd_derivative(f, a, 1)?, b, 1)
}
