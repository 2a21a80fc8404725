//! Least-squares lines in log-log coordinates.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

/// Fits `y = slope x + intercept` by least squares.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Fit("need at least two paired points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(LineFit {
        slope,
        intercept,
        residual,
    })
}

/// Slope of `log y` against `log x`, using only pairs with positive entries.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .unzip();
    linear_fit(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power_law() {
        let x: Vec<f64> = (1..8).map(|k| 2f64.powi(-k)).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(0.7)).collect();
        let f = loglog_fit(&x, &y).unwrap();
        assert!((f.slope - 0.7).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.residual < 1e-12);
        assert!(loglog_fit(&[1.0], &[1.0]).is_err());
    }
}
