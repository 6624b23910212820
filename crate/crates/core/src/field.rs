use crate::error::{AetError, Result};
use crate::grid::Grid;

/// Real samples at every node of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(AetError::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    /// Samples `f` at node positions. Unused trailing coordinates are zero.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let d = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                f(&p[..d])
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: f64, other: &Self) -> Result<()> {
        self.grid.ensure_same(&other.grid)?;
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    /// Trapezoid-rule mean over the cube.
    pub fn mean(&self) -> f64 {
        let mut s = 0.0;
        let mut w = 0.0;
        for (i, &v) in self.values.iter().enumerate() {
            let t = self.grid.trapezoid_weight(i);
            s += t * v;
            w += t;
        }
        s / w
    }

    /// Discrete L² norm, `sqrt(h^dim * Σ v²)`.
    pub fn norm_l2(&self) -> f64 {
        let h = self.grid.spacing();
        let ss: f64 = self.values.iter().map(|v| v * v).sum();
        (ss * h.powi(self.grid.dim() as i32)).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        self.values[self.grid.index(idx)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Keeps every `stride`-th node on each axis.
    pub fn restrict(&self, stride: usize) -> Result<Self> {
        let coarse = self.grid.coarsen(stride)?;
        let d = coarse.dim();
        let mut idx = [0usize; 3];
        let mut fine = [0usize; 3];
        let values = (0..coarse.len())
            .map(|i| {
                coarse.unravel(i, &mut idx[..d]);
                for a in 0..d {
                    fine[a] = idx[a] * stride;
                }
                self.values[self.grid.index(&fine[..d])]
            })
            .collect();
        Ok(Self { grid: coarse, values })
    }

    /// Subsamples onto `target`, which must be a coarsening of this grid.
    pub fn restrict_to(&self, target: &Grid) -> Result<Self> {
        if target.dim() != self.grid.dim() || target.n() > self.grid.n() {
            return Err(AetError::GridMismatch("restriction target is not coarser".into()));
        }
        let (nf, nc) = (self.grid.n() - 1, target.n() - 1);
        if nf % nc != 0 {
            return Err(AetError::GridMismatch(format!(
                "n={} does not nest in n={}",
                target.n(),
                self.grid.n()
            )));
        }
        self.restrict(nf / nc)
    }

    /// 2D cross-section of a 3D field at node `k` along `axis`; the two
    /// remaining axes keep their order.
    pub fn section(&self, axis: usize, k: usize) -> Result<Self> {
        if self.grid.dim() != 3 {
            return Err(AetError::InvalidParameter("sections need a 3D field".into()));
        }
        self.grid.check_axis(axis)?;
        let n = self.grid.n();
        if k >= n {
            return Err(AetError::InvalidParameter(format!("section index {k} >= {n}")));
        }
        let plane = Grid::new(2, n)?;
        let mut values = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let idx = match axis {
                    0 => [k, a, b],
                    1 => [a, k, b],
                    _ => [a, b, k],
                };
                values.push(self.values[self.grid.index(&idx)]);
            }
        }
        Ok(Self { grid: plane, values })
    }

    /// Writes a 2D field into the slice `k` along `axis` of a 3D field.
    pub fn set_section(&mut self, axis: usize, k: usize, plane: &Self) -> Result<()> {
        let n = self.grid.n();
        if self.grid.dim() != 3 || plane.grid.dim() != 2 || plane.grid.n() != n {
            return Err(AetError::GridMismatch("section shape".into()));
        }
        for a in 0..n {
            for b in 0..n {
                let idx = match axis {
                    0 => [k, a, b],
                    1 => [a, k, b],
                    _ => [a, b, k],
                };
                let flat = self.grid.index(&idx);
                self.values[flat] = plane.values[a * n + b];
            }
        }
        Ok(())
    }
}

/// `dim` scalar components on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let grid = *components
            .first()
            .ok_or_else(|| AetError::InvalidParameter("vector field needs components".into()))?
            .grid();
        if components.len() != grid.dim() {
            return Err(AetError::GridMismatch(format!(
                "{} components on a {}d grid",
                components.len(),
                grid.dim()
            )));
        }
        for c in &components {
            grid.ensure_same(c.grid())?;
        }
        Ok(Self { grid, components })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, axis: usize) -> &ScalarField {
        &self.components[axis]
    }

    /// Pointwise dot product.
    pub fn dot(&self, other: &Self) -> Result<ScalarField> {
        self.grid.ensure_same(&other.grid)?;
        let mut out = ScalarField::zeros(self.grid);
        for (a, b) in self.components.iter().zip(&other.components) {
            for ((o, &x), &y) in out.values.iter_mut().zip(&a.values).zip(&b.values) {
                *o += x * y;
            }
        }
        Ok(out)
    }

    pub fn norm_l2(&self) -> f64 {
        self.components.iter().map(|c| c.norm_l2().powi(2)).sum::<f64>().sqrt()
    }
}
