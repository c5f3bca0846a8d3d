//! Reference eigenvalues of `H = -1/2 d^2/dx^2 + V(x)` for the double well.
//!
//! The symmetric potential splits the problem into parity sectors, each
//! solved on the half line `[0, x_max]` with a cell-centred three-point
//! Laplacian (nodes at `(j + 1/2) h`). Reflecting the first ghost node gives
//! the Neumann (even) or Dirichlet (odd) condition at the origin and keeps
//! both matrices symmetric tridiagonal. The lowest eigenvalue of each sector
//! is located by bisection on the Sturm sequence count, and optionally
//! Richardson-extrapolated from grids `h` and `h/2`.

use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenConfig {
    pub x_max: f64,
    /// Nodes on the half line for the coarse grid.
    pub n_points: usize,
    pub refine: bool,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            x_max: 12.0,
            n_points: 8001,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenResult {
    pub e0: f64,
    pub e1: f64,
    pub gap: f64,
    pub e0_parity: Parity,
    pub e1_parity: Parity,
    /// Richardson residual `|gap(h/2) - gap(h)| / 3`, or the raw grid
    /// difference scale when refinement is off.
    pub gap_error: f64,
}

/// Symmetric tridiagonal matrix with constant off-diagonal.
struct Tridiagonal {
    diag: Vec<f64>,
    off: f64,
}

impl Tridiagonal {
    fn sector(params: &ModelParams, x_max: f64, n: usize, parity: Parity) -> Self {
        let h = x_max / n as f64;
        let kin = 1.0 / (h * h);
        let mut diag: Vec<f64> = (0..n)
            .map(|j| kin + params.bare_potential((j as f64 + 0.5) * h))
            .collect();
        diag[0] += match parity {
            Parity::Even => -0.5 * kin,
            Parity::Odd => 0.5 * kin,
        };
        Self {
            diag,
            off: -0.5 * kin,
        }
    }

    /// Number of eigenvalues strictly below `x`.
    fn count_below(&self, x: f64) -> usize {
        let e2 = self.off * self.off;
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut q = 1.0;
        let mut count = 0;
        for (i, d) in self.diag.iter().enumerate() {
            q = if i == 0 { d - x } else { d - x - e2 / q };
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn lowest_eigenvalue(&self) -> f64 {
        let r = 2.0 * self.off.abs();
        let mut lo = self.diag.iter().fold(f64::INFINITY, |m, d| m.min(d - r));
        let mut hi = self.diag.iter().fold(f64::NEG_INFINITY, |m, d| m.max(d + r));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvector for an (approximate) eigenvalue by inverse iteration.
    fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.diag.len();
        let shifted: Vec<f64> = self.diag.iter().map(|d| d - lambda).collect();
        let mut x = vec![1.0; n];
        for _ in 0..3 {
            x = solve_tridiagonal(self.off, &shifted, self.off, &x);
            let norm = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if norm > 0.0 && norm.is_finite() {
                x.iter_mut().for_each(|v| *v /= norm);
            }
        }
        x
    }
}

/// Gaussian elimination with partial pivoting for a tridiagonal system with
/// constant sub- and super-diagonals.
fn solve_tridiagonal(sub: f64, diag: &[f64], sup: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    // Row i after elimination: u0[i] x_i + u1[i] x_{i+1} + u2[i] x_{i+2} = b[i]
    let mut u0 = diag.to_vec();
    let mut u1 = vec![sup; n];
    let mut u2 = vec![0.0; n];
    let mut b = rhs.to_vec();
    let mut lower = vec![sub; n];
    for i in 0..n - 1 {
        let (below_d, below_u) = (lower[i + 1], if i + 1 < n - 1 { sup } else { 0.0 });
        let below_diag = u0[i + 1];
        if below_d.abs() > u0[i].abs() {
            // Swap rows i and i+1.
            let (a0, a1, a2, ab) = (u0[i], u1[i], u2[i], b[i]);
            u0[i] = below_d;
            u1[i] = below_diag;
            u2[i] = below_u;
            b[i] = b[i + 1];
            let f = if u0[i] != 0.0 { a0 / u0[i] } else { 0.0 };
            u0[i + 1] = a1 - f * u1[i];
            u1[i + 1] = a2 - f * u2[i];
            b[i + 1] = ab - f * b[i];
        } else {
            let piv = if u0[i] != 0.0 { u0[i] } else { f64::MIN_POSITIVE };
            u0[i] = piv;
            let f = below_d / piv;
            u0[i + 1] = below_diag - f * u1[i];
            u1[i + 1] = below_u - f * u2[i];
            b[i + 1] -= f * b[i];
        }
        lower[i + 1] = 0.0;
    }
    if u0[n - 1] == 0.0 {
        u0[n - 1] = f64::MIN_POSITIVE;
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        if i + 1 < n {
            s -= u1[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= u2[i] * x[i + 2];
        }
        x[i] = s / u0[i];
    }
    x
}

/// Lowest eigenvalue of one sector on `n` nodes, with the relative boundary
/// amplitude of its eigenvector.
fn sector_ground(params: &ModelParams, x_max: f64, n: usize, parity: Parity) -> (f64, f64) {
    let t = Tridiagonal::sector(params, x_max, n, parity);
    let e = t.lowest_eigenvalue();
    let v = t.eigenvector(e);
    let peak = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let edge = v[n - 1].abs();
    (e, if peak > 0.0 { edge / peak } else { f64::INFINITY })
}

const BOUNDARY_AMPLITUDE_LIMIT: f64 = 1e-8;

fn sector_energy(params: &ModelParams, cfg: &EigenConfig, parity: Parity) -> Result<(f64, f64)> {
    let (coarse, ratio) = sector_ground(params, cfg.x_max, cfg.n_points, parity);
    if ratio > BOUNDARY_AMPLITUDE_LIMIT {
        return Err(Error::DomainTooSmall {
            x_max: cfg.x_max,
            ratio,
        });
    }
    if !cfg.refine {
        return Ok((coarse, 0.0));
    }
    let (fine, _) = sector_ground(params, cfg.x_max, 2 * cfg.n_points, parity);
    Ok(((4.0 * fine - coarse) / 3.0, (fine - coarse) / 3.0))
}

/// Ground and first excited energies of the bare double well.
pub fn schrodinger_gap(params: &ModelParams, cfg: &EigenConfig) -> Result<EigenResult> {
    params.validate()?;
    if !(params.lambda > 0.0 || params.m_squared > 0.0) {
        return Err(Error::NotConfining {
            lambda: params.lambda,
            m_squared: params.m_squared,
        });
    }
    if cfg.n_points < 101 {
        return Err(Error::InvalidConfig(format!(
            "eigensolver needs at least 101 nodes, got {}",
            cfg.n_points
        )));
    }
    let outer = params
        .classical_minima()
        .iter()
        .fold(0.0_f64, |m, x| m.max(x.abs()));
    if !(cfg.x_max > 0.0) || cfg.x_max < 3.0 * outer {
        return Err(Error::InvalidConfig(format!(
            "x_max = {} must cover 3x the outer minimum {outer}",
            cfg.x_max
        )));
    }
    let (even, odd) = rayon::join(
        || sector_energy(params, cfg, Parity::Even),
        || sector_energy(params, cfg, Parity::Odd),
    );
    let (e0, de0) = even?;
    let (e1, de1) = odd?;
    Ok(EigenResult {
        e0,
        e1,
        gap: e1 - e0,
        e0_parity: Parity::Even,
        e1_parity: Parity::Odd,
        gap_error: (de1 - de0).abs(),
    })
}
