//! Least-squares fits used to read asymptotic statements off ε sweeps.

/// Slope of log|y| against log x, ignoring entries with y == 0.
///
/// Returns `None` when fewer than two usable points remain.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && b.abs() > 0.0 && b.is_finite())
        .map(|(a, b)| (a.ln(), b.abs().ln()))
        .collect();
    linear_fit(&pts).map(|(slope, _)| slope)
}

/// Ordinary least squares y = slope·x + intercept.
pub fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// First-order Richardson extrapolation from the two smallest-ε samples.
///
/// With V(ε) ≈ L + cε, two samples at ε₁ > ε₂ give
/// L ≈ (ε₁V(ε₂) − ε₂V(ε₁)) / (ε₁ − ε₂).
pub fn richardson_first_order(eps: &[f64], values: &[f64]) -> Option<f64> {
    let k = eps.len();
    if k < 2 {
        return None;
    }
    let (e1, v1) = (eps[k - 2], values[k - 2]);
    let (e2, v2) = (eps[k - 1], values[k - 1]);
    if e1 == e2 {
        return None;
    }
    Some((e1 * v2 - e2 * v1) / (e1 - e2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power_law() {
        let x: Vec<f64> = (1..8).map(|k| 2f64.powi(-k)).collect();
        let y: Vec<f64> = x.iter().map(|e| 3.0 * e * e).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&x, &vec![0.0; 7]), None);
    }

    #[test]
    fn richardson_is_exact_for_linear_error() {
        let eps = [0.5, 0.25, 0.125];
        let v: Vec<f64> = eps.iter().map(|e| 4.0 + 0.7 * e).collect();
        assert!((richardson_first_order(&eps, &v).unwrap() - 4.0).abs() < 1e-14);
    }
}
