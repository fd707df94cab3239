use crate::error::{Error, Result};
use crate::numerics::linalg::{norm_inf, Vector};

/// Default central-difference step `1e-5 · max(1, ‖x‖∞)`.
pub fn default_step(x: &[f64]) -> f64 {
    1e-5 * norm_inf(x).max(1.0)
}

/// Central-difference gradient of `f` at `x`.
///
/// `h = None` uses [`default_step`].
pub fn finite_diff_gradient<F>(f: F, x: &[f64], h: Option<f64>) -> Result<Vector>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let h = h.unwrap_or_else(|| default_step(x));
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("step h must be positive, got {h}")));
    }
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let xi = x[i];
        // Divide by the representable spacing, not the nominal 2h.
        let (hi, lo) = (xi + h, xi - h);
        probe[i] = hi;
        let fp = eval_probe(&f, &probe, i)?;
        probe[i] = lo;
        let fm = eval_probe(&f, &probe, i)?;
        probe[i] = xi;
        out.push((fp - fm) / (hi - lo));
    }
    Ok(out)
}

/// Central-difference directional derivative of `f` at `x` along `u`.
pub fn directional_derivative<F>(f: F, x: &[f64], u: &[f64], h: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let plus: Vector = x.iter().zip(u).map(|(a, b)| a + h * b).collect();
    let minus: Vector = x.iter().zip(u).map(|(a, b)| a - h * b).collect();
    let fp = eval_probe(&f, &plus, 0)?;
    let fm = eval_probe(&f, &minus, 0)?;
    Ok((fp - fm) / (2.0 * h))
}

fn eval_probe<F>(f: &F, x: &[f64], index: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    match f(x) {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(Error::Probe {
            index,
            reason: format!("objective returned {v}"),
        }),
        Err(e) => Err(Error::Probe {
            index,
            reason: e.to_string(),
        }),
    }
}
