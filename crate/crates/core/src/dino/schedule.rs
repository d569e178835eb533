//! Momentum schedule: half-cosine ramp from lambda_start at step 0 to exactly
//! 1 at the final step, monotone non-decreasing in between.

use crate::error::{Error, Result};

/// lambda(t) = 1 - (1 - lambda_start) * (1 + cos(pi t / T)) / 2.
pub fn cosine_momentum(step: usize, total_steps: usize, lambda_start: f64) -> Result<f64> {
    if total_steps < 1 {
        return Err(Error::InvalidInput("total_steps must be >= 1".into()));
    }
    if step > total_steps {
        return Err(Error::InvalidInput(format!(
            "step {step} out of range 0..={total_steps}"
        )));
    }
    if !(0.0 < lambda_start && lambda_start <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "lambda_start must be in (0,1], got {lambda_start}"
        )));
    }
    if step == 0 {
        return Ok(lambda_start);
    }
    if step == total_steps {
        return Ok(1.0);
    }
    let t = step as f64 / total_steps as f64;
    Ok(1.0 - (1.0 - lambda_start) * (1.0 + (std::f64::consts::PI * t).cos()) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_exact() {
        assert_eq!(cosine_momentum(0, 100, 0.996).unwrap(), 0.996);
        assert_eq!(cosine_momentum(100, 100, 0.996).unwrap(), 1.0);
    }

    #[test]
    fn midpoint_is_average() {
        let mid = cosine_momentum(50, 100, 0.996).unwrap();
        assert!((mid - 0.998).abs() < 1e-12, "{mid}");
    }

    #[test]
    fn monotone_non_decreasing() {
        let mut prev = 0.0;
        for t in 0..=200 {
            let l = cosine_momentum(t, 200, 0.9).unwrap();
            assert!(l >= prev, "schedule decreased at {t}");
            prev = l;
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(cosine_momentum(5, 4, 0.9).is_err());
        assert!(cosine_momentum(0, 0, 0.9).is_err());
        assert!(cosine_momentum(0, 10, 0.0).is_err());
    }
}
