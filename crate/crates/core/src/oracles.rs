//! Stochastic gradient oracles.
//!
//! Each draw consumes exactly one uniform `u ∈ [0, 1)`, so a trajectory is
//! reproducible from `(seed, step index)` alone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Vector;

/// Coordinate picked for Rademacher noise: the first zero coordinate of `x`
/// in `first..last` (0-based, `last` exclusive).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroSelector {
    pub first: usize,
    pub last: usize,
    /// Coordinate used when no zero is found. `None` means no noise is added.
    pub fallback: Option<usize>,
}

impl ZeroSelector {
    /// `(coordinate, used_fallback)`.
    pub fn select(&self, x: &[f64]) -> (Option<usize>, bool) {
        let last = self.last.min(x.len());
        match (self.first..last).find(|&i| x[i] == 0.0) {
            Some(i) => (Some(i), false),
            None => (self.fallback, true),
        }
    }
}

/// What a single draw did, beyond the returned vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DrawInfo {
    /// The selector found no zero coordinate and took its fallback branch.
    pub fallback: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Oracle {
    /// Returns the exact gradient.
    Deterministic,
    /// Adds `±sigma` (fair sign) on the coordinate chosen by `selector`.
    CoordinateRademacher { sigma: f64, selector: ZeroSelector },
    /// Returns `scale·∇f` with probability `1/scale`, zero otherwise. Unbiased.
    ScalingDropout { scale: f64 },
    /// Outside the valley returns `side·g1` with probability `p`, else `side·g2`;
    /// inside it returns the exact gradient.
    TwoPoint { p: f64, g1: Vector, g2: Vector },
}

impl Oracle {
    /// Writes one stochastic gradient into `out`.
    ///
    /// `side` is only read by [`Oracle::TwoPoint`]: `+1`/`-1` for the two outer
    /// regions, `0` inside the valley.
    pub fn draw_into(
        &self,
        x: &[f64],
        grad: &[f64],
        side: i8,
        u: f64,
        out: &mut [f64],
    ) -> Result<DrawInfo> {
        if out.len() != grad.len() {
            return Err(Error::Structure(format!(
                "output length {} differs from gradient length {}",
                out.len(),
                grad.len()
            )));
        }
        match self {
            Oracle::Deterministic => {
                out.copy_from_slice(grad);
                Ok(DrawInfo::default())
            }
            Oracle::CoordinateRademacher { sigma, selector } => {
                out.copy_from_slice(grad);
                if *sigma == 0.0 {
                    return Ok(DrawInfo::default());
                }
                let (j, fallback) = selector.select(x);
                if let Some(j) = j {
                    out[j] += if u < 0.5 { *sigma } else { -*sigma };
                }
                Ok(DrawInfo { fallback })
            }
            Oracle::ScalingDropout { scale } => {
                if u < 1.0 / scale {
                    for (o, g) in out.iter_mut().zip(grad) {
                        *o = scale * g;
                    }
                } else {
                    out.fill(0.0);
                }
                Ok(DrawInfo::default())
            }
            Oracle::TwoPoint { p, g1, g2 } => {
                if side == 0 {
                    out.copy_from_slice(grad);
                } else {
                    let g = if u < *p { g1 } else { g2 };
                    let s = f64::from(side);
                    for (o, v) in out.iter_mut().zip(g) {
                        *o = s * v;
                    }
                }
                Ok(DrawInfo::default())
            }
        }
    }

    pub fn is_deterministic(&self) -> bool {
        match self {
            Oracle::Deterministic => true,
            Oracle::CoordinateRademacher { sigma, .. } => *sigma == 0.0,
            Oracle::ScalingDropout { scale } => *scale == 1.0,
            Oracle::TwoPoint { .. } => false,
        }
    }
}

/// Gradient plus `±sigma·e_j` on the first zero coordinate chosen by `selector`.
pub fn draw_coordinate_rademacher(
    x: &[f64],
    grad: &[f64],
    sigma: f64,
    selector: ZeroSelector,
    u: f64,
) -> Result<(Vector, DrawInfo)> {
    let mut out = vec![0.0; grad.len()];
    let info = Oracle::CoordinateRademacher { sigma, selector }.draw_into(x, grad, 0, u, &mut out)?;
    Ok((out, info))
}

/// `scale·grad` with probability `1/scale`, else zero. Requires `scale ≥ 1`.
pub fn draw_scaling_dropout(grad: &[f64], scale: f64, u: f64) -> Result<Vector> {
    if !(scale >= 1.0 && scale.is_finite()) {
        return Err(Error::Domain(format!("dropout scale must be >= 1, got {scale}")));
    }
    let mut out = vec![0.0; grad.len()];
    Oracle::ScalingDropout { scale }.draw_into(grad, grad, 0, u, &mut out)?;
    Ok(out)
}

/// `side·g1` with probability `p`, else `side·g2`. Requires `p ∈ (1/2, 1)`.
pub fn draw_two_point(g1: &[f64], g2: &[f64], p: f64, side: i8, u: f64) -> Result<Vector> {
    if !(p > 0.5 && p < 1.0) {
        return Err(Error::Domain(format!("probability must lie in (1/2, 1), got {p}")));
    }
    if g1.len() != g2.len() {
        return Err(Error::Structure("g1 and g2 differ in length".into()));
    }
    if side == 0 {
        return Err(Error::Domain("two-point draw needs side = +1 or -1".into()));
    }
    let oracle = Oracle::TwoPoint {
        p,
        g1: g1.to_vec(),
        g2: g2.to_vec(),
    };
    let mut out = vec![0.0; g1.len()];
    oracle.draw_into(g1, g1, side, u, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rademacher_hits_first_zero_coordinate() {
        let sel = ZeroSelector {
            first: 1,
            last: 4,
            fallback: None,
        };
        let (g, info) =
            draw_coordinate_rademacher(&[0.0, 1.0, 0.0, 0.0], &[0.5, 0.0, 0.0, 0.0], 2.0, sel, 0.1)
                .unwrap();
        assert_eq!(g, vec![0.5, 0.0, 2.0, 0.0]);
        assert!(!info.fallback);
        let (g, _) =
            draw_coordinate_rademacher(&[0.0, 1.0, 0.0, 0.0], &[0.5, 0.0, 0.0, 0.0], 2.0, sel, 0.9)
                .unwrap();
        assert_eq!(g[2], -2.0);
    }

    #[test]
    fn exhausted_selector_flags_fallback() {
        let sel = ZeroSelector {
            first: 0,
            last: 2,
            fallback: Some(1),
        };
        let (g, info) = draw_coordinate_rademacher(&[1.0, 1.0], &[0.0, 0.0], 1.0, sel, 0.2).unwrap();
        assert!(info.fallback);
        assert_eq!(g, vec![0.0, 1.0]);
    }

    #[test]
    fn dropout_is_all_or_nothing() {
        assert_eq!(draw_scaling_dropout(&[1.0, 2.0], 4.0, 0.1).unwrap(), vec![4.0, 8.0]);
        assert_eq!(draw_scaling_dropout(&[1.0, 2.0], 4.0, 0.3).unwrap(), vec![0.0, 0.0]);
        assert!(draw_scaling_dropout(&[1.0], 0.5, 0.1).is_err());
    }

    #[test]
    fn two_point_respects_side() {
        assert_eq!(draw_two_point(&[-1.0], &[3.0], 0.7, -1, 0.5).unwrap(), vec![1.0]);
        assert_eq!(draw_two_point(&[-1.0], &[3.0], 0.7, 1, 0.8).unwrap(), vec![3.0]);
    }

    #[test]
    fn two_point_rejects_degenerate_p() {
        assert!(draw_two_point(&[-1.0], &[3.0], 1.0, 1, 0.5).is_err());
    }

    #[test]
    fn zero_sigma_is_deterministic() {
        let o = Oracle::CoordinateRademacher {
            sigma: 0.0,
            selector: ZeroSelector {
                first: 0,
                last: 1,
                fallback: None,
            },
        };
        assert!(o.is_deterministic());
    }
}
