//! Physical observables read off the end of a flow.

use crate::error::{Error, Result};
use crate::flow_rhs::SchemeSpec;
use crate::integrator::FlowResult;

/// Energy gap as the renormalized mass, `sqrt(V''(0,0) / Z(0,0))`.
///
/// A negative curvature at the origin means the barrier has not melted and
/// the gap is undefined, which is reported as an error rather than zero.
pub fn gap_from_flow(v2_origin: f64, z_origin: f64) -> Result<f64> {
    if !(z_origin > 0.0) {
        return Err(Error::GapUndefined(format!("Z(0,0) = {z_origin} is not positive")));
    }
    if !(v2_origin >= 0.0) {
        return Err(Error::GapUndefined(format!("V''(0,0) = {v2_origin} is negative")));
    }
    Ok((v2_origin / z_origin).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapEstimate {
    pub value: f64,
    pub scheme: SchemeSpec,
    pub v2_origin: f64,
    pub z_origin: f64,
}

impl GapEstimate {
    pub fn new(scheme: SchemeSpec, v2_origin: f64, z_origin: f64) -> Result<Self> {
        Ok(Self {
            value: gap_from_flow(v2_origin, z_origin)?,
            scheme,
            v2_origin,
            z_origin,
        })
    }

    /// Gap of a completed flow; aborted runs carry no estimate.
    pub fn from_result(result: &FlowResult) -> Result<Self> {
        if !result.termination.is_success() {
            return Err(Error::GapUndefined(format!("flow ended with {}", result.termination)));
        }
        Self::new(result.scheme, result.v2_origin, result.z_origin)
    }
}
