use std::fmt::Write as _;

use rsmooth_core::analysis::{fit_scaling_exponent, HittingTime};

use crate::error::CliError;

/// Axis names for [`emit_plot_data`].
#[derive(Clone, Copy, Debug)]
pub struct Axes<'a> {
    pub x: &'a str,
    pub y: &'a str,
}

/// Whitespace-separated two-column series. A log-log fit is annotated as a
/// `# slope=` row when at least four points were reached; points that never
/// reached their target are kept as comment rows.
pub fn emit_plot_data(points: &[(f64, HittingTime)], axes: Axes<'_>) -> Result<String, CliError> {
    if points.is_empty() {
        return Err(CliError::User("nothing to plot: the result table is empty".into()));
    }
    let mut s = String::new();
    match fit_scaling_exponent(points) {
        Ok(f) => {
            let _ = writeln!(s, "# slope={:.4} intercept={:.4} r2={:.6} n={}", f.slope, f.intercept, f.r2, f.n);
        }
        Err(e) => {
            let _ = writeln!(s, "# no fit: {e}");
        }
    }
    let _ = writeln!(s, "# {} {}", axes.x, axes.y);
    for &(x, t) in points {
        match t {
            HittingTime::Reached(t) => {
                let _ = writeln!(s, "{x} {t}");
            }
            HittingTime::NotReached => {
                let _ = writeln!(s, "# {x} NOT_REACHED");
            }
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    const AXES: Axes<'static> = Axes { x: "eps", y: "t_eps" };

    #[test]
    fn single_row_has_no_fit() {
        let s = emit_plot_data(&[(0.1, HittingTime::Reached(100))], AXES).unwrap();
        assert!(!s.contains("slope="));
        assert!(s.contains("# no fit"));
        assert!(s.ends_with("0.1 100\n"));
    }

    #[test]
    fn power_law_is_annotated() {
        let pts: Vec<_> = [0.1, 0.05, 0.025, 0.0125]
            .iter()
            .map(|&e: &f64| (e, HittingTime::Reached((1.0 / (e * e)).round() as u64)))
            .collect();
        let s = emit_plot_data(&pts, AXES).unwrap();
        assert!(s.starts_with("# slope=-2.0000"), "{s}");
    }

    #[test]
    fn empty_table_is_rejected() {
        assert!(matches!(emit_plot_data(&[], AXES), Err(CliError::User(_))));
    }
}
