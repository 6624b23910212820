//! Smoothed-inclusion phantoms for ln σ.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{AetError, Result};
use crate::field::ScalarField;
use crate::grid::Grid;

/// Radial profile: 1 for r ≤ r_in, 0 for r ≥ r_out and
/// `exp[2(r_out-r_in)/(r-r_out) · exp((r_out-r_in)/(r_in-r))]` in between.
pub fn smoothed_profile(r: f64, r_in: f64, r_out: f64) -> Result<f64> {
    if !(0.0 < r_in && r_in < r_out) {
        return Err(AetError::Phantom(format!("need 0 < r_in < r_out, got {r_in}, {r_out}")));
    }
    Ok(profile(r, r_in, r_out))
}

#[inline]
fn profile(r: f64, r_in: f64, r_out: f64) -> f64 {
    if r <= r_in {
        1.0
    } else if r >= r_out {
        0.0
    } else {
        let gap = r_out - r_in;
        // Both exponents are negative; underflow yields the adjacent branch value.
        let inner = (gap / (r_in - r)).exp();
        (2.0 * gap / (r - r_out) * inner).exp().clamp(0.0, 1.0)
    }
}

/// Distance used to measure the radius of an inclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallNorm {
    /// Round disks and balls.
    Euclidean,
    /// Axis-aligned squares and cubes with sharp corners.
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedBall {
    pub center: Vec<f64>,
    pub r_in: f64,
    pub r_out: f64,
    pub alpha: f64,
    pub norm: BallNorm,
}

impl SmoothedBall {
    pub fn new(center: &[f64], r_out: f64, r_in: f64, alpha: f64) -> Self {
        Self { center: center.to_vec(), r_in, r_out, alpha, norm: BallNorm::Euclidean }
    }

    pub fn boxed(center: &[f64], r_out: f64, r_in: f64, alpha: f64) -> Self {
        Self { norm: BallNorm::Max, ..Self::new(center, r_out, r_in, alpha) }
    }

    fn radius(&self, x: &[f64]) -> f64 {
        let d = x.iter().zip(&self.center).map(|(a, b)| a - b);
        match self.norm {
            BallNorm::Euclidean => d.map(|t| t * t).sum::<f64>().sqrt(),
            BallNorm::Max => d.fold(0.0, |m, t| m.max(t.abs())),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.alpha * profile(self.radius(x), self.r_in, self.r_out)
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.center.len() != dim {
            return Err(AetError::Phantom(format!(
                "center {:?} does not have {dim} coordinates",
                self.center
            )));
        }
        if !(0.0 < self.r_in && self.r_in < self.r_out) {
            return Err(AetError::Phantom(format!(
                "need 0 < r_in < r_out, got r_in={} r_out={}",
                self.r_in, self.r_out
            )));
        }
        if !self.alpha.is_finite() {
            return Err(AetError::Phantom("non-finite weight".into()));
        }
        if self.center.iter().any(|c| c.abs() + self.r_out >= 1.0) {
            return Err(AetError::Phantom(format!(
                "support of inclusion at {:?} (r_out={}) reaches the boundary",
                self.center, self.r_out
            )));
        }
        Ok(())
    }
}

/// ln σ(x) = Σ α_j h(|x - x_j|, r_in_j, r_out_j).
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    dim: usize,
    balls: Vec<SmoothedBall>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Output {
    LnSigma,
    Sigma,
}

impl FromStr for Output {
    type Err = AetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ln_sigma" => Ok(Output::LnSigma),
            "sigma" => Ok(Output::Sigma),
            _ => Err(AetError::InvalidParameter(format!("unknown output kind {s:?}"))),
        }
    }
}

const TABLE1: [[f64; 5]; 12] = [
    [-0.54, 0.54, 0.26, 0.24, 1.0],
    [0.00, 0.60, 0.24, 0.22, -1.0],
    [0.60, 0.60, 0.16, 0.14, 1.0],
    [-0.60, 0.00, 0.16, 0.14, -1.0],
    [0.60, 0.00, 0.26, 0.24, -1.0],
    [-0.54, -0.54, 0.26, 0.24, 1.0],
    [0.00, -0.60, 0.24, 0.22, -1.0],
    [0.60, -0.60, 0.16, 0.14, 1.0],
    [0.18, 0.18, 0.16, 0.14, -1.0],
    [0.18, -0.18, 0.16, 0.14, 1.0],
    [-0.18, 0.18, 0.16, 0.14, 1.0],
    [-0.18, -0.18, 0.16, 0.14, -1.0],
];

// Reproduced as tabulated, including the coincident rows 2 and 7.
const TABLE2: [[f64; 6]; 16] = [
    [-0.615, -0.54, 0.0, 0.26, 0.22, 0.5],
    [-0.6, 0.0, 0.0, 0.24, 0.20, 1.0],
    [0.6, 0.6, 0.0, 0.16, 0.12, 0.5],
    [0.0, -0.6, 0.0, 0.16, 0.12, 1.0],
    [0.0, 0.6, 0.0, 0.26, 0.22, 1.0],
    [-0.54, -0.54, 0.0, 0.26, 0.22, 0.5],
    [-0.6, 0.0, 0.0, 0.24, 0.20, 1.0],
    [-0.6, 0.6, 0.0, 0.16, 0.12, 0.5],
    [0.18, 0.18, 0.0, 0.16, 0.12, 1.0],
    [-0.18, 0.18, 0.0, 0.16, 0.12, 0.5],
    [0.18, -0.18, 0.0, 0.16, 0.12, 0.5],
    [-0.18, -0.18, 0.0, 0.16, 0.12, 1.0],
    [0.0, 0.0, 0.6, 0.18, 0.14, -1.0],
    [0.0, 0.0, 0.6, 0.30, 0.26, 1.0],
    [0.0, 0.0, -0.46, 0.38, 0.34, 0.5],
    [0.0, 0.0, -0.46, 0.16, 0.12, 0.5],
];

/// Names accepted by [`builtin_phantom`].
pub const BUILTIN_NAMES: [&str; 4] = ["table1-2d", "table2-3d", "corners-2d", "identity-2d"];

/// Built-in phantoms.
///
/// * `table1-2d`: twelve disks, weights ±1.
/// * `table2-3d`: sixteen balls.
/// * `corners-2d`: squares and overlapping squares with sharp corners.
/// * `identity-2d`: empty, σ ≡ 1.
pub fn builtin_phantom(name: &str) -> Result<PhantomSpec> {
    match name {
        "table1-2d" => PhantomSpec::new(
            2,
            TABLE1.iter().map(|r| SmoothedBall::new(&r[..2], r[2], r[3], r[4])).collect(),
        ),
        "table2-3d" => PhantomSpec::new(
            3,
            TABLE2.iter().map(|r| SmoothedBall::new(&r[..3], r[3], r[4], r[5])).collect(),
        ),
        "corners-2d" => PhantomSpec::new(
            2,
            vec![
                SmoothedBall::boxed(&[-0.45, 0.45], 0.27, 0.25, 1.0),
                SmoothedBall::boxed(&[0.45, 0.45], 0.22, 0.20, -1.0),
                SmoothedBall::boxed(&[0.45, -0.45], 0.27, 0.25, 1.0),
                SmoothedBall::boxed(&[0.40, -0.40], 0.12, 0.10, -1.0),
                SmoothedBall::boxed(&[-0.45, -0.45], 0.22, 0.20, -1.0),
                SmoothedBall::new(&[0.0, 0.0], 0.20, 0.18, 0.7),
            ],
        ),
        "identity-2d" => PhantomSpec::new(2, Vec::new()),
        _ => Err(AetError::Phantom(format!(
            "unknown phantom {name:?}; expected one of {}",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

impl PhantomSpec {
    pub fn new(dim: usize, balls: Vec<SmoothedBall>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(AetError::Phantom(format!("dimension must be 2 or 3, got {dim}")));
        }
        for b in &balls {
            b.validate(dim)?;
        }
        Ok(Self { dim, balls })
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn balls(&self) -> &[SmoothedBall] {
        &self.balls
    }

    /// ln σ at a point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.balls.iter().map(|b| b.eval(x)).sum()
    }

    /// Same inclusions with every weight multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let balls = self.balls.iter().map(|b| SmoothedBall { alpha: b.alpha * s, ..b.clone() }).collect();
        Self { dim: self.dim, balls }
    }

    pub fn rasterize(&self, grid: &Grid, output: Output) -> Result<ScalarField> {
        if grid.dim() != self.dim {
            return Err(AetError::GridMismatch(format!(
                "{}d phantom on a {}d grid",
                self.dim,
                grid.dim()
            )));
        }
        let d = self.dim;
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let p = grid.point(i);
                let f = self.eval(&p[..d]);
                match output {
                    Output::LnSigma => f,
                    Output::Sigma => f.exp(),
                }
            })
            .collect();
        ScalarField::from_values(*grid, values)
    }

    /// Parses the text format: one inclusion per line,
    /// `x1 x2 [x3] r_out r_in alpha`, optionally prefixed by `box` for a
    /// square/cube. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut dim = None;
        let mut balls = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut tokens: Vec<&str> = line.split_whitespace().collect();
            let boxed = tokens[0] == "box";
            if boxed {
                tokens.remove(0);
            }
            let nums = tokens
                .iter()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| AetError::Phantom(format!("line {}: {e}", no + 1)))?;
            let d = match nums.len() {
                5 => 2,
                6 => 3,
                k => {
                    return Err(AetError::Phantom(format!(
                        "line {}: expected 5 or 6 numbers, found {k}",
                        no + 1
                    )))
                }
            };
            if *dim.get_or_insert(d) != d {
                return Err(AetError::Phantom(format!("line {}: mixed dimensions", no + 1)));
            }
            let ball = if boxed {
                SmoothedBall::boxed(&nums[..d], nums[d], nums[d + 1], nums[d + 2])
            } else {
                SmoothedBall::new(&nums[..d], nums[d], nums[d + 1], nums[d + 2])
            };
            balls.push(ball);
        }
        let dim = dim.ok_or_else(|| AetError::Phantom("no inclusions; use a builtin identity phantom".into()))?;
        Self::new(dim, balls)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for b in &self.balls {
            if b.norm == BallNorm::Max {
                s.push_str("box ");
            }
            for c in &b.center {
                let _ = write!(s, "{c} ");
            }
            let _ = writeln!(s, "{} {} {}", b.r_out, b.r_in, b.alpha);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_branches() {
        assert_eq!(smoothed_profile(0.20, 0.24, 0.26).unwrap(), 1.0);
        assert_eq!(smoothed_profile(0.30, 0.24, 0.26).unwrap(), 0.0);
        let mid = smoothed_profile(0.25, 0.24, 0.26).unwrap();
        assert!((mid - (-4.0 * (-2.0f64).exp()).exp()).abs() < 1e-15);
        assert!((mid - 0.58200).abs() < 1e-4);
        assert!(smoothed_profile(0.1, 0.3, 0.2).is_err());
    }

    #[test]
    fn profile_near_edges_is_finite() {
        for r in [0.24 + 1e-15, 0.26 - 1e-15, 0.2400001, 0.2599999] {
            let v = smoothed_profile(r, 0.24, 0.26).unwrap();
            assert!(v.is_finite() && (0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn table_rows() {
        let t1 = builtin_phantom("table1-2d").unwrap();
        assert_eq!(t1.balls().len(), 12);
        assert_eq!(t1.balls()[0], SmoothedBall::new(&[-0.54, 0.54], 0.26, 0.24, 1.0));
        let t2 = builtin_phantom("table2-3d").unwrap();
        assert_eq!(t2.balls().len(), 16);
        assert_eq!(t2.balls()[12], SmoothedBall::new(&[0.0, 0.0, 0.6], 0.18, 0.14, -1.0));
        assert!(builtin_phantom("nope").is_err());
    }

    #[test]
    fn support_touching_boundary_rejected() {
        assert!(PhantomSpec::new(2, vec![SmoothedBall::new(&[0.8, 0.0], 0.2, 0.1, 1.0)]).is_err());
        assert!(PhantomSpec::new(2, vec![SmoothedBall::new(&[0.0, 0.0, 0.0], 0.2, 0.1, 1.0)]).is_err());
    }

    #[test]
    fn text_roundtrip() {
        let spec = builtin_phantom("corners-2d").unwrap();
        let back = PhantomSpec::parse(&spec.to_text()).unwrap();
        assert_eq!(spec, back);
        let t = "# x1 x2 r_out r_in alpha\n0.1 0.2 0.3 0.2 -1 # trailing\n\n";
        let p = PhantomSpec::parse(t).unwrap();
        assert_eq!(p.balls()[0], SmoothedBall::new(&[0.1, 0.2], 0.3, 0.2, -1.0));
        assert!(PhantomSpec::parse("0.1 0.2 0.3").is_err());
        assert!(PhantomSpec::parse("0 0 0.3 0.2 1\n0 0 0 0.3 0.2 1").is_err());
    }

    #[test]
    fn empty_spec_is_identity() {
        let g = Grid::new(2, 17).unwrap();
        let s = PhantomSpec::empty(2).unwrap().rasterize(&g, Output::Sigma).unwrap();
        assert!(s.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn boxes_have_corners() {
        let b = SmoothedBall::boxed(&[0.0, 0.0], 0.3, 0.2, 1.0);
        assert_eq!(b.eval(&[0.19, 0.19]), 1.0);
        assert_eq!(b.eval(&[0.31, 0.0]), 0.0);
    }
}
