//! Grids, discrete fields and cylindrical white-noise increments.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Uniform grid on `[0, a]` including both boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    length: f64,
    dx: f64,
    nodes: Vec<f64>,
}

impl Grid1D {
    /// Builds a grid of `num_points` equally spaced nodes on `[0, length]`.
    pub fn new(length: f64, num_points: usize) -> Result<Self> {
        if num_points < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 points, got {num_points}"
            )));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "domain length must be positive, got {length}"
            )));
        }
        let dx = length / (num_points - 1) as f64;
        let mut nodes: Vec<f64> = (0..num_points).map(|j| j as f64 * dx).collect();
        nodes[num_points - 1] = length;
        Ok(Self { length, dx, nodes })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Trapezoidal quadrature weight of node `j` (without the `dx` factor).
    #[inline]
    pub fn weight(&self, j: usize) -> f64 {
        if j == 0 || j + 1 == self.nodes.len() {
            0.5
        } else {
            1.0
        }
    }

    pub(crate) fn check(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: len,
            });
        }
        Ok(())
    }
}

/// Convenience wrapper mirroring [`Grid1D::new`].
pub fn make_grid(length: f64, num_points: usize) -> Result<Grid1D> {
    Grid1D::new(length, num_points)
}

/// Nodal values of a scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn zeros(n: usize) -> Self {
        Field(vec![0.0; n])
    }

    pub fn from_fn(grid: &Grid1D, f: impl Fn(f64) -> f64) -> Self {
        Field(grid.nodes().iter().map(|&x| f(x)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Field(v)
    }
}

/// Displacement and velocity of a second-order-in-time field.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderState {
    pub y: Field,
    pub v: Field,
}

impl SecondOrderState {
    pub fn zeros(n: usize) -> Self {
        Self {
            y: Field::zeros(n),
            v: Field::zeros(n),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.y.is_finite() && self.v.is_finite()
    }
}

/// One time step of discretized space-time white noise.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrement {
    pub values: Vec<f64>,
    pub dt: f64,
}

impl WienerIncrement {
    pub fn zeros(n: usize, dt: f64) -> Self {
        Self {
            values: vec![0.0; n],
            dt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    DirichletHomogeneous,
    DirichletConstant(f64),
    NeumannHomogeneous,
    SimplySupported,
}

/// Trapezoidal inner product `dx * sum_j w_j f_j g_j`.
pub fn inner_product(f: &[f64], g: &[f64], grid: &Grid1D) -> Result<f64> {
    grid.check(f.len())?;
    grid.check(g.len())?;
    Ok(inner_product_unchecked(f, g, grid))
}

#[inline]
pub(crate) fn inner_product_unchecked(f: &[f64], g: &[f64], grid: &Grid1D) -> f64 {
    let n = f.len();
    let interior: f64 = f[1..n - 1]
        .iter()
        .zip(&g[1..n - 1])
        .map(|(a, b)| a * b)
        .sum();
    grid.dx() * (interior + 0.5 * (f[0] * g[0] + f[n - 1] * g[n - 1]))
}

pub fn l2_norm_sq(f: &[f64], grid: &Grid1D) -> Result<f64> {
    inner_product(f, f, grid)
}

/// Draws one cylindrical Wiener increment: i.i.d. `Normal(0, dt/dx)` per node.
pub fn sample_noise<R: Rng + ?Sized>(
    grid: &Grid1D,
    dt: f64,
    rng: &mut R,
) -> Result<WienerIncrement> {
    if !(dt > 0.0) {
        return Err(Error::NonPositiveTimeStep(dt));
    }
    let mut values = vec![0.0; grid.len()];
    fill_noise(&mut values, grid, dt, rng);
    Ok(WienerIncrement { values, dt })
}

pub(crate) fn fill_noise<R: Rng + ?Sized>(out: &mut [f64], grid: &Grid1D, dt: f64, rng: &mut R) {
    let scale = (dt / grid.dx()).sqrt();
    for v in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = scale * z;
    }
}
