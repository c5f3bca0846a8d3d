//! Dilute instanton gas estimate of the tunnelling splitting, in the
//! `m^2 = -1` normalization of the double well.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// `2 sqrt(2 sqrt 2 / (pi lambda)) exp(-1 / (3 sqrt 2 lambda))`.
pub fn instanton_gap(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "instanton gap needs lambda > 0, got {lambda}"
        )));
    }
    let prefactor = 2.0 * (2.0 * SQRT_2 / (PI * lambda)).sqrt();
    Ok(prefactor * (-1.0 / (3.0 * SQRT_2 * lambda)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn closed_form_values() {
        assert_relative_eq!(instanton_gap(0.05).unwrap(), 0.0761130, max_relative = 1e-5);
        assert_relative_eq!(instanton_gap(0.04).unwrap(), 0.0261874, max_relative = 1e-5);
        assert_relative_eq!(instanton_gap(0.03).unwrap(), 0.0042416, max_relative = 1e-4);
        assert_relative_eq!(instanton_gap(100.0).unwrap(), 0.189323, max_relative = 1e-5);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(instanton_gap(0.0).is_err());
        assert!(instanton_gap(-0.1).is_err());
        assert!(instanton_gap(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn log_identity(lambda in 0.01..10.0f64) {
            let g = instanton_gap(lambda).unwrap();
            let r = g.ln() + 1.0 / (3.0 * SQRT_2 * lambda)
                - (2.0 * (2.0 * SQRT_2 / (PI * lambda)).sqrt()).ln();
            prop_assert!(r.abs() < 1e-12);
        }
    }
}
