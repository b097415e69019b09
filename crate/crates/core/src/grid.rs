//! Periodic-box discretization and the real-space field containers.
//!
//! A [`Grid`] is a cube of side `box_len` centred on the origin with `n`
//! nodes per axis. Node `(i, j, k)` sits at `-L/2 + (i, j, k)·h + offset`
//! and fields store their samples with x slowest and z fastest.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("points per axis must be a power of two >= 8, got {0}")]
    BadResolution(usize),
    #[error("box length must be positive and finite, got {0}")]
    BadBoxLength(f64),
    #[error("non-finite sample {value} at node ({i}, {j}, {k}) = {point:?}")]
    NonFinite {
        i: usize,
        j: usize,
        k: usize,
        point: [f64; 3],
        value: f64,
    },
    #[error("component length {found} does not match grid size {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("fields live on different grids")]
    GridMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    box_len: f64,
    spacing: f64,
    cell_measure: f64,
}

impl Grid {
    pub fn new(n: usize, box_len: f64) -> Result<Self, GridError> {
        if n < 8 || !n.is_power_of_two() {
            return Err(GridError::BadResolution(n));
        }
        if !(box_len.is_finite() && box_len > 0.0) {
            return Err(GridError::BadBoxLength(box_len));
        }
        // n is a power of two so the division is exact
        let spacing = box_len / n as f64;
        Ok(Self {
            n,
            box_len,
            spacing,
            cell_measure: spacing * spacing * spacing,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn box_len(&self) -> f64 {
        self.box_len
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    #[inline]
    pub fn cell_measure(&self) -> f64 {
        self.cell_measure
    }

    /// Total number of nodes, `n³`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    /// Coordinate of node `j` along one axis, without offset.
    #[inline]
    pub fn coord(&self, j: usize) -> f64 {
        -0.5 * self.box_len + j as f64 * self.spacing
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize, offset: [f64; 3]) -> [f64; 3] {
        [
            self.coord(i) + offset[0],
            self.coord(j) + offset[1],
            self.coord(k) + offset[2],
        ]
    }

    /// Same `n`, box scaled by `factor`.
    pub fn rescaled(&self, factor: f64) -> Result<Self, GridError> {
        Self::new(self.n, self.box_len * factor)
    }
}

/// Real 3-component field sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField3 {
    grid: Grid,
    comps: [Vec<f64>; 3],
}

impl VectorField3 {
    pub fn zeros(grid: Grid) -> Self {
        let len = grid.len();
        Self {
            grid,
            comps: [vec![0.0; len], vec![0.0; len], vec![0.0; len]],
        }
    }

    pub fn from_components(grid: Grid, comps: [Vec<f64>; 3]) -> Result<Self, GridError> {
        for c in &comps {
            if c.len() != grid.len() {
                return Err(GridError::LengthMismatch {
                    expected: grid.len(),
                    found: c.len(),
                });
            }
        }
        for c in &comps {
            if let Some((idx, &value)) = c.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                let (i, j, k) = grid.unravel(idx);
                return Err(GridError::NonFinite {
                    i,
                    j,
                    k,
                    point: grid.node(i, j, k, [0.0; 3]),
                    value,
                });
            }
        }
        Ok(Self { grid, comps })
    }

    /// Skips the finiteness scan; used on outputs of finite arithmetic.
    pub(crate) fn from_components_unchecked(grid: Grid, comps: [Vec<f64>; 3]) -> Self {
        debug_assert!(comps.iter().all(|c| c.len() == grid.len()));
        Self { grid, comps }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn component(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    #[inline]
    pub fn components(&self) -> &[Vec<f64>; 3] {
        &self.comps
    }

    pub fn into_components(self) -> [Vec<f64>; 3] {
        self.comps
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [f64; 3] {
        [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]]
    }

    /// Euclidean magnitude per node.
    pub fn magnitudes(&self) -> Vec<f64> {
        let [x, y, z] = &self.comps;
        x.iter()
            .zip(y)
            .zip(z)
            .map(|((a, b), c)| (a * a + b * b + c * c).sqrt())
            .collect()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitudes().into_iter().fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let comps = self
            .comps
            .clone()
            .map(|c| c.into_iter().map(|v| v * s).collect());
        Self::from_components_unchecked(self.grid, comps)
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        let mut comps = self.comps.clone();
        for (c, o) in comps.iter_mut().zip(&other.comps) {
            for (a, b) in c.iter_mut().zip(o) {
                *a += s * b;
            }
        }
        Ok(Self::from_components_unchecked(self.grid, comps))
    }

    /// The same samples reinterpreted on `grid` (which must have the same `n`).
    pub fn with_grid(&self, grid: Grid) -> Result<Self, GridError> {
        if grid.n() != self.grid.n() {
            return Err(GridError::GridMismatch);
        }
        Ok(Self::from_components_unchecked(grid, self.comps.clone()))
    }

    /// Plain `Lᵖ` norm of the magnitude, `(Σ|f|ᵖ h³)^{1/p}`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_sum(&self.magnitudes(), p, self.grid.cell_measure())
    }
}

pub(crate) fn lp_sum(mags: &[f64], p: f64, cell_measure: f64) -> f64 {
    if p == 2.0 {
        return (mags.iter().map(|v| v * v).sum::<f64>() * cell_measure).sqrt();
    }
    (mags.iter().map(|v| v.powf(p)).sum::<f64>() * cell_measure).powf(1.0 / p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some((idx, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (i, j, k) = grid.unravel(idx);
            return Err(GridError::NonFinite {
                i,
                j,
                k,
                point: grid.node(i, j, k, [0.0; 3]),
                value,
            });
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn new_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        Self { grid, values }
    }

    pub fn sample<F>(grid: Grid, offset: [f64; 3], f: F) -> Result<Self, GridError>
    where
        F: Fn([f64; 3]) -> f64,
    {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let x = grid.node(i, j, k, offset);
                    let value = f(x);
                    if !value.is_finite() {
                        return Err(GridError::NonFinite {
                            i,
                            j,
                            k,
                            point: x,
                            value,
                        });
                    }
                    values.push(value);
                }
            }
        }
        Ok(Self { grid, values })
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        let mags: Vec<f64> = self.values.iter().map(|v| v.abs()).collect();
        lp_sum(&mags, p, self.grid.cell_measure())
    }
}

/// Evaluates `f` at every node `-L/2 + j·h + offset`.
///
/// Fails on the first node where `f` is not finite, naming the node; callers
/// are expected to mollify or shift singular closed forms off-node.
pub fn sample_field<F>(grid: Grid, offset: [f64; 3], f: F) -> Result<VectorField3, GridError>
where
    F: Fn([f64; 3]) -> [f64; 3],
{
    let n = grid.n();
    let len = grid.len();
    let mut comps = [
        Vec::with_capacity(len),
        Vec::with_capacity(len),
        Vec::with_capacity(len),
    ];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let x = grid.node(i, j, k, offset);
                let v = f(x);
                if let Some(&bad) = v.iter().find(|c| !c.is_finite()) {
                    return Err(GridError::NonFinite {
                        i,
                        j,
                        k,
                        point: x,
                        value: bad,
                    });
                }
                for c in 0..3 {
                    comps[c].push(v[c]);
                }
            }
        }
    }
    Ok(VectorField3::from_components_unchecked(grid, comps))
}
