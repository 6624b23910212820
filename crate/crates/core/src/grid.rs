use crate::error::{AetError, Result};

/// Uniform node grid on the cube [-1,1]^dim.
///
/// Nodes sit at `-1 + k*h` for `k = 0..n` on every axis, so the boundary
/// faces are sampled. Flat storage is row-major with the last axis fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    dim: usize,
    n: usize,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(AetError::InvalidGrid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if n < 9 {
            return Err(AetError::InvalidGrid(format!("need at least 9 points per axis, got {n}")));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        2.0 / (self.n - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.n; self.dim]
    }

    /// Coordinate of node `k` along any axis.
    pub fn coord(&self, k: usize) -> f64 {
        // Exact at both ends; avoids -1 + (n-1)*h drifting off 1.
        let n1 = (self.n - 1) as f64;
        (2.0 * k as f64 - n1) / n1
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.coord(k)).collect()
    }

    /// Distance between consecutive flat indices along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    pub fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.dim {
            Err(AetError::AxisOutOfRange { axis, dim: self.dim })
        } else {
            Ok(())
        }
    }

    pub fn index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dim);
        idx.iter().fold(0, |acc, &k| acc * self.n + k)
    }

    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.dim).rev() {
            out[a] = flat % self.n;
            flat /= self.n;
        }
    }

    /// Physical position of the node with flat index `flat`.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let mut idx = [0usize; 3];
        self.unravel(flat, &mut idx[..self.dim]);
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = self.coord(idx[a]);
        }
        p
    }

    /// Node nearest to `p` (clamped to the grid).
    pub fn nearest(&self, p: &[f64]) -> usize {
        let h = self.spacing();
        let mut flat = 0;
        for &x in p.iter().take(self.dim) {
            let k = ((x + 1.0) / h).round().clamp(0.0, (self.n - 1) as f64) as usize;
            flat = flat * self.n + k;
        }
        flat
    }

    /// Number of node layers between `flat` and the nearest face (0 on a face).
    pub fn boundary_depth(&self, flat: usize) -> usize {
        let mut idx = [0usize; 3];
        self.unravel(flat, &mut idx[..self.dim]);
        idx[..self.dim]
            .iter()
            .map(|&k| k.min(self.n - 1 - k))
            .min()
            .unwrap_or(0)
    }

    /// Product trapezoid weight of a node (without the h^dim factor).
    pub fn trapezoid_weight(&self, flat: usize) -> f64 {
        let mut idx = [0usize; 3];
        self.unravel(flat, &mut idx[..self.dim]);
        idx[..self.dim]
            .iter()
            .map(|&k| if k == 0 || k == self.n - 1 { 0.5 } else { 1.0 })
            .product()
    }

    /// Coarse grid obtained by keeping every `stride`-th node.
    pub fn coarsen(&self, stride: usize) -> Result<Grid> {
        if stride == 0 || (self.n - 1) % stride != 0 {
            return Err(AetError::GridMismatch(format!(
                "cannot subsample n={} by stride {stride}",
                self.n
            )));
        }
        Grid::new(self.dim, (self.n - 1) / stride + 1)
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            Err(AetError::GridMismatch(format!(
                "{}d n={} vs {}d n={}",
                self.dim, self.n, other.dim, other.n
            )))
        } else {
            Ok(())
        }
    }
}
