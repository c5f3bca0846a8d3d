//! Pointwise right-hand sides of the flow equations.
//!
//! Every function returns `(k dV/dk, k dZ/dk)` at a single grid node given
//! the local derivatives collected in [`PointData`].

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Which flow equation drives the running action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeSpec {
    /// Sharp-cutoff local potential flow; `Z` is frozen at one.
    WegnerHoughton,
    /// `m -> infinity` proper-time flow for `V` alone, `Z` frozen at one.
    ProperTimeLO,
    /// `m -> infinity` proper-time flow for `V` and `Z`.
    ProperTimeNLO,
    /// Proper-time flow for `V` and `Z` with regulator index `m`.
    ProperTimeFiniteM(u32),
}

impl SchemeSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            SchemeSpec::ProperTimeFiniteM(0) => Err(Error::InvalidScheme(
                "regulator index m must be at least 1".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Whether the scheme evolves the wave-function renormalization.
    pub fn runs_z(&self) -> bool {
        matches!(self, SchemeSpec::ProperTimeNLO | SchemeSpec::ProperTimeFiniteM(_))
    }

    pub fn tag(&self) -> &'static str {
        match self {
            SchemeSpec::WegnerHoughton => "wh",
            SchemeSpec::ProperTimeLO => "pt-lo",
            SchemeSpec::ProperTimeNLO => "pt-nlo",
            SchemeSpec::ProperTimeFiniteM(_) => "pt-m",
        }
    }

    pub fn m(&self) -> Option<u32> {
        match self {
            SchemeSpec::ProperTimeFiniteM(m) => Some(*m),
            _ => None,
        }
    }

    /// Evaluates the scheme at one point.
    pub fn rhs(&self, p: &PointData) -> Result<(f64, f64)> {
        kernel_eval(*self, p)
    }

    /// Field-independent part of `k dV/dk`: the value of the potential flow
    /// at vanishing curvature. It shifts `V` uniformly and never feeds back.
    pub fn vacuum_term(&self, k: f64, d: f64) -> f64 {
        Kernel::new(*self, k, d).map_or(f64::NAN, |kn| kn.vacuum())
    }
}

/// Local data entering the flow at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointData {
    pub k: f64,
    /// `V''`
    pub v2: f64,
    /// `V'''`
    pub v3: f64,
    pub z: f64,
    /// `Z'`
    pub z1: f64,
    /// `Z''`
    pub z2: f64,
    pub d: f64,
}

impl PointData {
    /// A point with only curvature and `Z` set; all gradients vanish.
    pub fn flat(k: f64, v2: f64, z: f64, d: f64) -> Self {
        Self {
            k,
            v2,
            v3: 0.0,
            z,
            z1: 0.0,
            z2: 0.0,
            d,
        }
    }
}

/// `Gamma(m + 1 - d/2) / ((4 pi)^(d/2) Gamma(m + 1))`.
pub fn alpha(m: u32, d: f64) -> Result<f64> {
    let m = f64::from(m);
    let a = m + 1.0 - 0.5 * d;
    if a <= 0.0 {
        return Err(Error::GammaPole(a));
    }
    Ok((ln_gamma(a) - ln_gamma(m + 1.0) - 0.5 * d * (4.0 * PI).ln()).exp())
}

fn zk_coefficient(d: f64) -> f64 {
    (4.0 + 18.0 * d - d * d) / 24.0
}

/// A scheme frozen at one scale, with every node-independent factor
/// computed once.
#[derive(Debug, Clone, Copy)]
pub struct Kernel {
    scheme: SchemeSpec,
    k: f64,
    k2: f64,
    /// `alpha (k^2 m)^(d/2)`, `(k^2/4pi)^(d/2)` or `k/2pi` depending on scheme.
    prefactor: f64,
    c1: f64,
    ten_minus_d: f64,
    /// `m + 1 - d/2`, only used at finite `m`.
    e: f64,
    inv_m: f64,
}

impl Kernel {
    pub fn new(scheme: SchemeSpec, k: f64, d: f64) -> Result<Self> {
        scheme.validate()?;
        let k2 = k * k;
        let (prefactor, e, inv_m) = match scheme {
            SchemeSpec::WegnerHoughton => (k / (2.0 * PI), 0.0, 0.0),
            SchemeSpec::ProperTimeLO | SchemeSpec::ProperTimeNLO => {
                ((k2 / (4.0 * PI)).powf(0.5 * d), 0.0, 0.0)
            }
            SchemeSpec::ProperTimeFiniteM(m) => {
                let mf = f64::from(m);
                (alpha(m, d)? * (k2 * mf).powf(0.5 * d), mf + 1.0 - 0.5 * d, 1.0 / mf)
            }
        };
        Ok(Self {
            scheme,
            k,
            k2,
            prefactor,
            c1: zk_coefficient(d),
            ten_minus_d: 10.0 - d,
            e,
            inv_m,
        })
    }

    /// `k dV/dk` at vanishing curvature.
    pub fn vacuum(&self) -> f64 {
        match self.scheme {
            SchemeSpec::WegnerHoughton => 0.0,
            _ => self.prefactor,
        }
    }

    /// `(k dV/dk, k dZ/dk)` from local derivatives.
    #[inline]
    pub fn eval(&self, v2: f64, v3: f64, z: f64, z1: f64, z2: f64) -> Result<(f64, f64)> {
        match self.scheme {
            SchemeSpec::WegnerHoughton => {
                let arg = 1.0 + v2 / self.k2;
                if !(arg > 0.0) {
                    return Err(Error::PositivityViolation(format!(
                        "1 + V''/k^2 = {arg:e} at k = {:e}",
                        self.k
                    )));
                }
                Ok((-self.prefactor * arg.ln(), 0.0))
            }
            SchemeSpec::ProperTimeLO => Ok((self.pt_inf_potential(v2, z), 0.0)),
            SchemeSpec::ProperTimeNLO => {
                let dv = self.pt_inf_potential(v2, z);
                if dv == 0.0 {
                    return Ok((0.0, 0.0));
                }
                let inv = 1.0 / (z * self.k2);
                let inv2 = inv * inv;
                let bracket = -z2 * inv + self.c1 * z1 * z1 * inv / z
                    + self.ten_minus_d * z1 * v3 * inv2 / 6.0
                    - z * v3 * v3 * inv2 * inv / 6.0;
                Ok((dv, dv * bracket))
            }
            SchemeSpec::ProperTimeFiniteM(_) => {
                let zk2 = z * self.k2;
                let base = zk2 + v2 * self.inv_m;
                if !(base > 0.0) {
                    return Err(Error::PositivityViolation(format!(
                        "Z k^2 + V''/m = {base:e} at k = {:e}",
                        self.k
                    )));
                }
                let e = self.e;
                let dv = self.prefactor * (e * (zk2 / base).ln()).exp();
                if dv == 0.0 {
                    return Ok((0.0, 0.0));
                }
                let q = self.inv_m / base;
                let t1 = e * q * (-z2 + self.c1 * z1 * z1 / z);
                let t2 = self.ten_minus_d * e * (e + 1.0) / 6.0 * q * q * z1 * v3;
                let t3 = e * (e + 1.0) * (e + 2.0) / 6.0 * q * q * q * z * v3 * v3;
                Ok((dv, dv * (t1 + t2 - t3)))
            }
        }
    }

    /// Writes `vac - k dV/dk` into `dv` and `-k dZ/dk` into `dz` (when
    /// present) for every node, returning the largest `|k dZ/dk|`. Slices
    /// for `v3`, `z1`, `z2` and `dz` may be empty for schemes that keep `Z`
    /// at one.
    pub fn eval_nodes(
        &self,
        v2: &[f64],
        v3: &[f64],
        z: &[f64],
        z1: &[f64],
        z2: &[f64],
        dv: &mut [f64],
        dz: &mut [f64],
    ) -> Result<f64> {
        let vac = self.vacuum();
        let mut peak = 0.0_f64;
        match self.scheme {
            SchemeSpec::WegnerHoughton | SchemeSpec::ProperTimeLO => {
                for (i, out) in dv.iter_mut().enumerate() {
                    *out = vac - self.eval(v2[i], 0.0, 1.0, 0.0, 0.0)?.0;
                }
            }
            SchemeSpec::ProperTimeNLO => {
                let (c1, t) = (self.c1, self.ten_minus_d / 6.0);
                for i in 0..dv.len() {
                    let inv = 1.0 / (z[i] * self.k2);
                    let x = -v2[i] * inv;
                    let f = if x < -745.0 { 0.0 } else { self.prefactor * x.exp() };
                    let inv2 = inv * inv;
                    let bracket = -z2[i] * inv + c1 * z1[i] * z1[i] * inv / z[i]
                        + t * z1[i] * v3[i] * inv2
                        - z[i] * v3[i] * v3[i] * inv2 * inv / 6.0;
                    let g = f * bracket;
                    dv[i] = vac - f;
                    dz[i] = -g;
                    peak = peak.max(g.abs());
                }
            }
            SchemeSpec::ProperTimeFiniteM(_) => {
                for i in 0..dv.len() {
                    let (f, g) = self.eval(v2[i], v3[i], z[i], z1[i], z2[i])?;
                    dv[i] = vac - f;
                    dz[i] = -g;
                    peak = peak.max(g.abs());
                }
            }
        }
        Ok(peak)
    }

    fn pt_inf_potential(&self, v2: f64, z: f64) -> f64 {
        let x = -v2 / (z * self.k2);
        if x < -745.0 {
            return 0.0;
        }
        self.prefactor * x.exp()
    }
}

fn kernel_eval(scheme: SchemeSpec, p: &PointData) -> Result<(f64, f64)> {
    Kernel::new(scheme, p.k, p.d)?.eval(p.v2, p.v3, p.z, p.z1, p.z2)
}

/// Proper-time flow with finite regulator index `m`.
pub fn rhs_pt_m(p: &PointData, m: u32) -> Result<(f64, f64)> {
    kernel_eval(SchemeSpec::ProperTimeFiniteM(m), p)
}

/// `m -> infinity` proper-time flow.
pub fn rhs_pt_inf(p: &PointData) -> (f64, f64) {
    kernel_eval(SchemeSpec::ProperTimeNLO, p).unwrap_or((f64::NAN, f64::NAN))
}

/// Sharp-cutoff potential flow. `Z` does not run.
pub fn rhs_wh(p: &PointData) -> Result<(f64, f64)> {
    kernel_eval(SchemeSpec::WegnerHoughton, p)
}
