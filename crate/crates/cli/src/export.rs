//! Grayscale images and 1D profiles of fields.

use std::fmt::Write as _;

use aet_core::ScalarField;

use crate::error::CliError;

/// 2D slice of `f`: the field itself in 2D, the plane `index` normal to
/// `axis` in 3D (default: the central plane normal to x₃).
pub fn plane(f: &ScalarField, axis: Option<usize>, index: Option<usize>) -> Result<ScalarField, CliError> {
    let g = f.grid();
    if g.dim() == 2 {
        return Ok(f.clone());
    }
    let axis = axis.unwrap_or(2);
    let index = index.unwrap_or(g.n() / 2);
    if index >= g.n() {
        return Err(CliError::Config(format!("index: {index} outside 0..{}", g.n())));
    }
    Ok(f.section(axis, index)?)
}

/// Binary PGM (P5), 8 bit. Columns run along the first remaining axis,
/// rows along the second with row 0 at its maximum. Values are mapped
/// linearly from `[lo, hi]` (default: field range) and clipped.
pub fn to_pgm(f: &ScalarField, window: Option<(f64, f64)>) -> Result<Vec<u8>, CliError> {
    let g = f.grid();
    if g.dim() != 2 {
        return Err(CliError::Input("pgm export needs a 2D field or plane".into()));
    }
    let (lo, hi) = window.unwrap_or((f.min(), f.max()));
    if !(hi > lo) {
        return Err(CliError::Config(format!("window: degenerate range [{lo}, {hi}]")));
    }
    let n = g.n();
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    for row in 0..n {
        let j = n - 1 - row;
        for i in 0..n {
            let v = (f.at(&[i, j]) - lo) / (hi - lo);
            out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Along `axis` through the grid center.
    Axis(usize),
    /// Along the main diagonal of the first two axes through the center;
    /// the coordinate is the signed arclength.
    Diagonal,
}

/// `coordinate,value` lines.
pub fn to_csv_profile(f: &ScalarField, profile: Profile) -> Result<String, CliError> {
    let g = f.grid();
    let n = g.n();
    let mid = n / 2;
    let mut idx = vec![mid; g.dim()];
    let mut out = String::from("coordinate,value\n");
    for k in 0..n {
        let coordinate = match profile {
            Profile::Axis(axis) => {
                if axis >= g.dim() {
                    return Err(CliError::Config(format!("axis: {axis} out of range for a {}-d field", g.dim())));
                }
                idx[axis] = k;
                g.coord(k)
            }
            Profile::Diagonal => {
                idx[0] = k;
                idx[1] = k;
                std::f64::consts::SQRT_2 * g.coord(k)
            }
        };
        writeln!(out, "{coordinate},{}", f.at(&idx)).expect("string write");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use aet_core::Grid;

    #[test]
    fn constant_field_has_degenerate_window() {
        let f = ScalarField::constant(Grid::new(2, 9).unwrap(), 1.0);
        assert!(matches!(to_pgm(&f, None), Err(CliError::Config(_))));
        assert!(to_pgm(&f, Some((0.0, 2.0))).is_ok());
    }

    #[test]
    fn pgm_top_row_is_max_second_coordinate() {
        let f = ScalarField::from_fn(Grid::new(2, 9).unwrap(), |p| p[1]);
        let img = to_pgm(&f, None).unwrap();
        let header = b"P5\n9 9\n255\n".len();
        assert_eq!(img.len(), header + 81);
        assert_eq!(img[header], 255);
        assert_eq!(img[img.len() - 1], 0);
    }

    #[test]
    fn window_clips() {
        let f = ScalarField::from_fn(Grid::new(2, 9).unwrap(), |p| p[0]);
        let img = to_pgm(&f, Some((0.0, 0.1))).unwrap();
        let header = b"P5\n9 9\n255\n".len();
        assert_eq!(img[header], 0);
        assert_eq!(img[header + 8], 255);
    }

    #[test]
    fn profiles() {
        let f = ScalarField::from_fn(Grid::new(2, 9).unwrap(), |p| p[0] + 10.0 * p[1]);
        let csv = to_csv_profile(&f, Profile::Axis(0)).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[1], "-1,-1");
        let diag = to_csv_profile(&f, Profile::Diagonal).unwrap();
        assert!(diag.lines().last().unwrap().ends_with(",11"));
        assert!(to_csv_profile(&f, Profile::Axis(2)).is_err());
    }
}
