use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::motion::FlowField;

/// Adds `N(0, sigma^2)` noise to both flow components inside `mask` (all
/// pixels when `None`). Draws happen in row-major order, `u` before `v`, so a
/// seed fixes the output.
pub fn perturb_flow(flow: &FlowField, sigma: f64, mask: Option<&[bool]>, seed: u64) -> Result<FlowField> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid(format!("noise sigma must be >= 0, got {sigma}")));
    }
    let n = flow.height * flow.width;
    if mask.is_some_and(|m| m.len() != n) {
        return Err(Error::invalid("noise mask must match the flow field"));
    }
    let mut out = flow.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n {
        if mask.is_none_or(|m| m[i]) {
            out.u[i] += normal.sample(&mut rng);
            out.v[i] += normal.sample(&mut rng);
        }
    }
    Ok(out)
}
