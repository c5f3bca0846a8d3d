//! Finite-difference derivatives on a uniform grid.
//!
//! Interior nodes use centred five-point stencils: fourth order for the
//! first and second derivative, second order for the third derivative.
//! The two outermost nodes on each side use one-sided stencils of the same
//! order. Every stencil reproduces polynomials up to degree four exactly.

use crate::error::{Error, Result};
use crate::model::SpatialGrid;

/// Samples of a function on a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    values: Vec<f64>,
    grid: SpatialGrid,
}

impl Field {
    pub fn new(values: Vec<f64>, grid: SpatialGrid) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.n_points()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite value at node {i}")));
        }
        Ok(Self { values, grid })
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n_points()).map(|i| f(grid.x(i))).collect();
        Self { values, grid }
    }

    pub fn constant(grid: SpatialGrid, c: f64) -> Self {
        Self {
            values: vec![c; grid.n_points()],
            grid,
        }
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

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn at_center(&self) -> f64 {
        self.values[self.grid.center()]
    }

    /// Largest mirror mismatch `max_i |f(x_i) - f(-x_i)|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.values.len();
        (0..n / 2)
            .map(|i| (self.values[i] - self.values[n - 1 - i]).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

const D1_INTERIOR: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
const D1_EDGE0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
const D1_EDGE1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];

const D2_INTERIOR: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
const D2_EDGE0: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
const D2_EDGE1: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];

const D3_INTERIOR: [f64; 5] = [-1.0, 2.0, 0.0, -2.0, 1.0];
const D3_EDGE0: [f64; 5] = [-5.0, 18.0, -24.0, 14.0, -3.0];
const D3_EDGE1: [f64; 5] = [-3.0, 10.0, -12.0, 6.0, -1.0];

/// Derivative of the given order of a gridded field.
pub fn derivative(field: &Field, order: usize) -> Result<Field> {
    if field.grid.n_points() < 7 {
        return Err(Error::InvalidGrid(format!(
            "derivatives need at least 7 nodes, got {}",
            field.grid.n_points()
        )));
    }
    let mut out = vec![0.0; field.values.len()];
    derivative_into(&field.values, field.grid.spacing(), order, &mut out)?;
    Ok(Field {
        values: out,
        grid: field.grid,
    })
}

/// Slice-level form of [`derivative`] writing into a caller-owned buffer.
pub fn derivative_into(values: &[f64], h: f64, order: usize, out: &mut [f64]) -> Result<()> {
    let n = values.len();
    debug_assert_eq!(out.len(), n);
    if n < 7 {
        return Err(Error::InvalidGrid(format!("derivatives need at least 7 nodes, got {n}")));
    }
    match order {
        1 => apply(values, out, 1.0 / (12.0 * h), &D1_INTERIOR, &D1_EDGE0, &D1_EDGE1, -1.0),
        2 => apply(values, out, 1.0 / (12.0 * h * h), &D2_INTERIOR, &D2_EDGE0, &D2_EDGE1, 1.0),
        3 => apply(values, out, 1.0 / (2.0 * h * h * h), &D3_INTERIOR, &D3_EDGE0, &D3_EDGE1, -1.0),
        other => return Err(Error::DerivativeOrder(other)),
    }
    Ok(())
}

/// `mirror` is the sign picked up by the stencil under `x -> -x`: the right
/// edge reuses the left-edge weights on the reversed samples.
fn apply(
    v: &[f64],
    out: &mut [f64],
    scale: f64,
    interior: &[f64; 5],
    edge0: &[f64],
    edge1: &[f64],
    mirror: f64,
) {
    let n = v.len();
    for i in 2..n - 2 {
        let w = &v[i - 2..i + 3];
        // Paired to keep the result exactly (anti)symmetric on mirrored data.
        let s = interior[2] * w[2]
            + (interior[1] * w[1] + interior[3] * w[3])
            + (interior[0] * w[0] + interior[4] * w[4]);
        out[i] = s * scale;
    }
    let left = |c: &[f64]| c.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let right = |c: &[f64]| c.iter().zip(v.iter().rev()).map(|(a, b)| a * b).sum::<f64>();
    out[0] = left(edge0) * scale;
    out[1] = left(edge1) * scale;
    out[n - 1] = mirror * right(edge0) * scale;
    out[n - 2] = mirror * right(edge1) * scale;
}
