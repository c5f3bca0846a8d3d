//! Bare double-well model and the spatial grid every field lives on.

use crate::error::{Error, Result};

/// One physical problem instance: `V(x) = m_squared/2 x^2 + lambda x^4`
/// at UV scale `cutoff`, in `dimension` Euclidean dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub m_squared: f64,
    pub lambda: f64,
    pub cutoff: f64,
    pub dimension: f64,
}

impl ModelParams {
    pub const DEFAULT_CUTOFF: f64 = 1500.0;

    /// Builds and validates a `D = 1` instance.
    pub fn new(m_squared: f64, lambda: f64, cutoff: f64) -> Result<Self> {
        Self::with_dimension(m_squared, lambda, cutoff, 1.0)
    }

    pub fn with_dimension(m_squared: f64, lambda: f64, cutoff: f64, dimension: f64) -> Result<Self> {
        let p = Self {
            m_squared,
            lambda,
            cutoff,
            dimension,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m_squared.is_finite() && self.lambda.is_finite() && self.cutoff.is_finite()) {
            return Err(Error::InvalidParams("non-finite coupling".into()));
        }
        if self.lambda < 0.0 {
            return Err(Error::InvalidParams(format!("lambda = {} < 0", self.lambda)));
        }
        if self.cutoff <= 0.0 {
            return Err(Error::InvalidParams(format!("cutoff = {} <= 0", self.cutoff)));
        }
        if self.cutoff * self.cutoff < 100.0 * self.m_squared.abs() {
            return Err(Error::InvalidParams(format!(
                "cutoff^2 = {} must exceed 100 |m_squared| = {}",
                self.cutoff * self.cutoff,
                100.0 * self.m_squared.abs()
            )));
        }
        if !(self.dimension.is_finite() && self.dimension > 0.0) {
            return Err(Error::InvalidParams(format!("dimension = {}", self.dimension)));
        }
        Ok(())
    }

    pub fn bare_potential(&self, x: f64) -> f64 {
        bare_potential(self, x)
    }

    /// Second derivative of the bare potential.
    pub fn bare_curvature(&self, x: f64) -> f64 {
        self.m_squared + 12.0 * self.lambda * x * x
    }

    pub fn classical_minima(&self) -> Vec<f64> {
        classical_minima(self)
    }
}

pub fn bare_potential(params: &ModelParams, x: f64) -> f64 {
    let x2 = x * x;
    0.5 * params.m_squared * x2 + params.lambda * x2 * x2
}

/// Locations of the minima of the bare potential: `{0}` for a convex
/// potential, `{-x*, +x*}` with `x* = sqrt(-m^2 / (4 lambda))` otherwise.
pub fn classical_minima(params: &ModelParams) -> Vec<f64> {
    if params.m_squared >= 0.0 || params.lambda == 0.0 {
        vec![0.0]
    } else {
        let x = (-params.m_squared / (4.0 * params.lambda)).sqrt();
        vec![-x, x]
    }
}

/// Uniform grid on `[-x_max, x_max]` with an odd number of nodes, so that
/// the centre node sits exactly at `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    x_max: f64,
    n_points: usize,
}

impl SpatialGrid {
    pub const DEFAULT_POINTS: usize = 2001;

    pub fn new(x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_max.is_finite() && x_max > 0.0) {
            return Err(Error::InvalidGrid(format!("x_max = {x_max} must be positive")));
        }
        if n_points < 5 || n_points % 2 == 0 {
            return Err(Error::InvalidGrid(format!(
                "n_points = {n_points} must be odd and at least 5"
            )));
        }
        Ok(Self { x_max, n_points })
    }

    /// Default extent `max(8, 3 x*)` with `n_points` nodes.
    pub fn for_params(params: &ModelParams, n_points: usize) -> Result<Self> {
        Self::new(default_extent(params), n_points)
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.x_max / (self.n_points - 1) as f64
    }

    pub fn center(&self) -> usize {
        (self.n_points - 1) / 2
    }

    /// Coordinate of node `i`, computed symmetrically about the centre so
    /// that mirrored nodes carry exactly opposite coordinates.
    pub fn x(&self, i: usize) -> f64 {
        let c = self.center();
        let h = self.spacing();
        if i >= c {
            (i - c) as f64 * h
        } else {
            -((c - i) as f64 * h)
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }
}

pub fn default_extent(params: &ModelParams) -> f64 {
    let outer = classical_minima(params)
        .into_iter()
        .fold(0.0_f64, |acc, x| acc.max(x.abs()));
    (3.0 * outer).max(8.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dw(m2: f64, lambda: f64) -> ModelParams {
        ModelParams::new(m2, lambda, 1500.0).unwrap()
    }

    #[test]
    fn bare_potential_examples() {
        assert_eq!(dw(-1.0, 0.05).bare_potential(0.0), 0.0);
        assert_abs_diff_eq!(dw(1.0, 1.0).bare_potential(1.0), 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(dw(-1.0, 0.05).bare_potential(5f64.sqrt()), -1.25, epsilon = 1e-12);
    }

    #[test]
    fn minima_examples() {
        assert_eq!(dw(1.0, 0.4).classical_minima(), vec![0.0]);
        assert_eq!(dw(-1.0, 0.25).classical_minima(), vec![-1.0, 1.0]);
        let m = dw(-1.0, 0.05).classical_minima();
        assert_abs_diff_eq!(m[1], 2.23607, epsilon = 1e-5);
        assert_eq!(m[0], -m[1]);
        assert_eq!(dw(-1.0, 0.0).classical_minima(), vec![0.0]);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ModelParams::new(1.0, -0.1, 1500.0).is_err());
        assert!(ModelParams::new(1.0, 0.1, 0.0).is_err());
        assert!(ModelParams::new(-1.0, 0.1, 5.0).is_err());
        assert!(ModelParams::new(-1.0, 0.1, 10.0).is_ok());
    }

    #[test]
    fn grid_layout() {
        let g = SpatialGrid::new(8.0, 2001).unwrap();
        assert_abs_diff_eq!(g.spacing(), 0.008, epsilon = 1e-15);
        assert_eq!(g.x(g.center()), 0.0);
        assert_eq!(g.x(0), -8.0);
        assert_eq!(g.x(2000), 8.0);
        assert!(SpatialGrid::new(8.0, 2000).is_err());
        assert!(SpatialGrid::new(8.0, 3).is_err());
        assert!(SpatialGrid::new(-1.0, 11).is_err());
    }

    #[test]
    fn default_extent_follows_minima() {
        assert_eq!(default_extent(&dw(1.0, 0.4)), 8.0);
        assert_eq!(default_extent(&dw(-1.0, 0.4)), 8.0);
        assert_abs_diff_eq!(
            default_extent(&dw(-1.0, 0.02)),
            3.0 * (12.5f64).sqrt(),
            epsilon = 1e-12
        );
    }

    proptest! {
        #[test]
        fn potential_is_even(m2 in -2.0..2.0f64, lambda in 0.0..2.0f64, x in -10.0..10.0f64) {
            let p = dw(m2, lambda);
            prop_assert_eq!(p.bare_potential(x), p.bare_potential(-x));
        }

        #[test]
        fn minima_lie_below_barrier(lambda in 0.01..1.0f64) {
            let p = dw(-1.0, lambda);
            for x in p.classical_minima() {
                prop_assert!(p.bare_potential(x) < p.bare_potential(0.0));
            }
        }

        #[test]
        fn grid_is_mirror_symmetric(half in 2usize..500, x_max in 0.5..20.0f64) {
            let g = SpatialGrid::new(x_max, 2 * half + 1).unwrap();
            let n = g.n_points();
            for i in 0..n {
                prop_assert_eq!(g.x(i), -g.x(n - 1 - i));
            }
        }
    }
}
