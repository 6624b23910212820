use crate::error::{AetError, Result};
use crate::field::ScalarField;

/// Sampled data carrying a uniform quadrature weight per sample.
pub trait Samples {
    fn samples(&self) -> &[f64];
    /// Volume element attached to each sample.
    fn cell_measure(&self) -> f64;
    /// Shape used for compatibility checks.
    fn shape(&self) -> Vec<usize>;
}

impl Samples for ScalarField {
    fn samples(&self) -> &[f64] {
        self.values()
    }

    fn cell_measure(&self) -> f64 {
        self.grid().spacing().powi(self.grid().dim() as i32)
    }

    fn shape(&self) -> Vec<usize> {
        self.grid().shape()
    }
}

pub fn l2_norm<T: Samples + ?Sized>(a: &T) -> f64 {
    let ss: f64 = a.samples().iter().map(|v| v * v).sum();
    (ss * a.cell_measure()).sqrt()
}

pub fn l2_distance<T: Samples + ?Sized>(a: &T, b: &T) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(AetError::GridMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let ss: f64 = a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((ss * b.cell_measure()).sqrt())
}

/// ‖a - b‖ / ‖b‖ in the discrete L² norm.
pub fn rel_l2<T: Samples + ?Sized>(a: &T, b: &T) -> Result<f64> {
    let den = l2_norm(b);
    if den == 0.0 {
        return Err(AetError::ZeroNorm);
    }
    Ok(l2_distance(a, b)? / den)
}

pub fn max_abs_error(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    Ok(a.sub(b)?.max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn relative_error_basics() {
        let g = Grid::new(2, 33).unwrap();
        let b = ScalarField::from_fn(g, |p| (p[0] * 2.0).sin() + p[1]);
        assert_eq!(rel_l2(&b, &b).unwrap(), 0.0);
        let a = b.scale(1.5);
        assert!((rel_l2(&a, &b).unwrap() - 0.5).abs() < 1e-15);
        let e = ScalarField::from_fn(g, |p| (p[0] * 7.0 + 1.0).cos());
        let e = e.scale(0.1 * b.norm_l2() / e.norm_l2());
        assert!((rel_l2(&b.add(&e).unwrap(), &b).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn zero_reference_is_an_error() {
        let g = Grid::new(2, 9).unwrap();
        let z = ScalarField::zeros(g);
        assert!(matches!(rel_l2(&z, &z), Err(AetError::ZeroNorm)));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = ScalarField::zeros(Grid::new(2, 9).unwrap());
        let b = ScalarField::constant(Grid::new(2, 11).unwrap(), 1.0);
        assert!(rel_l2(&a, &b).is_err());
    }
}
