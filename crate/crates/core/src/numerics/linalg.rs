//! Small dense-vector helpers. Vectors are plain `Vec<f64>`.

/// Dense real vector.
pub type Vector = Vec<f64>;

/// Sum of squares, accumulated left to right starting from `0.0`.
///
/// The fixed order matters: trajectory checks compare iterates bitwise against
/// schedules that accumulate the same squares in the same order.
pub fn norm_sq(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |acc, v| acc + v * v)
}

pub fn norm(x: &[f64]) -> f64 {
    norm_sq(x).sqrt()
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).fold(0.0, |acc, (a, b)| acc + a * b)
}

pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .fold(0.0, |acc, (a, b)| acc + (a - b) * (a - b))
        .sqrt()
}

/// `‖x‖` without overflow or underflow in the squares. Equals [`norm`] whenever
/// that is finite and well above the subnormal range.
pub fn norm_scaled(x: &[f64]) -> f64 {
    let n = norm(x);
    if n.is_finite() && n > 1e-150 {
        return n;
    }
    let s = norm_inf(x);
    if s == 0.0 || !s.is_finite() {
        return s;
    }
    s * x.iter().fold(0.0, |acc, v| acc + (v / s) * (v / s)).sqrt()
}

/// `‖x - y‖` with the same scaling as [`norm_scaled`].
pub fn dist_scaled(x: &[f64], y: &[f64]) -> f64 {
    let d = dist(x, y);
    if d.is_finite() && d > 1e-150 {
        return d;
    }
    let s = x.iter().zip(y).fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
    if s == 0.0 || !s.is_finite() {
        return s;
    }
    s * x
        .iter()
        .zip(y)
        .fold(0.0, |acc, (a, b)| acc + ((a - b) / s) * ((a - b) / s))
        .sqrt()
}

pub fn scaled(x: &[f64], c: f64) -> Vector {
    x.iter().map(|v| c * v).collect()
}

pub fn unit_basis(dim: usize, i: usize) -> Vector {
    let mut e = vec![0.0; dim];
    e[i] = 1.0;
    e
}

/// `x / ‖x‖`, or `None` for the zero vector.
pub fn normalized(x: &[f64]) -> Option<Vector> {
    let n = norm(x);
    if n > 0.0 && n.is_finite() {
        Some(x.iter().map(|v| v / n).collect())
    } else {
        None
    }
}

pub fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}
