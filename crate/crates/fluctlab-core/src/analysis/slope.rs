use alloc::vec::Vec;

use super::AnalysisError;
use crate::math;

/// One Monte Carlo estimate at a parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SamplePoint {
    pub eps: f64,
    pub estimate: f64,
    pub stderr: f64,
}

/// Weighted least-squares fit of `log(estimate)` against `log(eps)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub r_squared: f64,
}

/// Fit `log estimate = intercept + slope * log eps` by weighted least
/// squares, weights `1 / sigma_log^2` with `sigma_log = stderr / estimate`
/// (delta method; exact estimates get a tiny floor so they dominate). The
/// confidence interval is `slope +- 1.96 * se` with `se^2` estimated from
/// the weighted residual variance. Needs at least three points with
/// distinct `eps`; estimates must be strictly positive.
pub fn fit_loglog_slope(points: &[SamplePoint]) -> Result<SlopeFit, AnalysisError> {
    let mut distinct: Vec<f64> = Vec::new();
    for p in points {
        if !(p.eps > 0.0) || !p.eps.is_finite() {
            return Err(AnalysisError::NonPositiveEstimate(p.eps));
        }
        if !(p.estimate > 0.0) || !p.estimate.is_finite() {
            return Err(AnalysisError::NonPositiveEstimate(p.estimate));
        }
        if !distinct.iter().any(|&e| e == p.eps) {
            distinct.push(p.eps);
        }
    }
    if distinct.len() < 3 {
        return Err(AnalysisError::TooFewPoints {
            got: distinct.len(),
            min: 3,
        });
    }

    let n = points.len();
    let mut w = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for p in points {
        let sigma_log = (p.stderr / p.estimate).max(1e-12);
        w.push(1.0 / (sigma_log * sigma_log));
        x.push(math::ln(p.eps));
        y.push(math::ln(p.estimate));
    }
    let w_sum: f64 = w.iter().sum();
    let x_bar = w.iter().zip(&x).map(|(wi, xi)| wi * xi).sum::<f64>() / w_sum;
    let y_bar = w.iter().zip(&y).map(|(wi, yi)| wi * yi).sum::<f64>() / w_sum;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        sxx += w[i] * (x[i] - x_bar) * (x[i] - x_bar);
        sxy += w[i] * (x[i] - x_bar) * (y[i] - y_bar);
    }
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;

    let mut rss = 0.0;
    let mut tss = 0.0;
    for i in 0..n {
        let r = y[i] - (intercept + slope * x[i]);
        rss += w[i] * r * r;
        tss += w[i] * (y[i] - y_bar) * (y[i] - y_bar);
    }
    let dof = (n as f64 - 2.0).max(1.0);
    let se = math::sqrt((rss / dof) / sxx);
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    Ok(SlopeFit {
        slope,
        intercept,
        ci_lo: slope - 1.96 * se,
        ci_hi: slope + 1.96 * se,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn exact_line_recovers_unit_slope() {
        let points: Vec<SamplePoint> = [1e-1, 1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&eps| SamplePoint {
                eps,
                estimate: eps,
                stderr: 0.0,
            })
            .collect();
        let fit = fit_loglog_slope(&points).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-9);
    }

    #[test]
    fn noisy_power_law_lands_in_band() {
        // y = 3 eps^{1.5} with ~1% multiplicative perturbation.
        let wiggle = [1.008, 0.994, 1.01, 0.991, 1.006];
        let points: Vec<SamplePoint> = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3]
            .iter()
            .enumerate()
            .map(|(i, &eps)| {
                let estimate = 3.0 * math::pow(eps, 1.5) * wiggle[i];
                SamplePoint {
                    eps,
                    estimate,
                    stderr: 0.01 * estimate,
                }
            })
            .collect();
        let fit = fit_loglog_slope(&points).unwrap();
        assert!(
            fit.slope > 1.4 && fit.slope < 1.6,
            "slope {}",
            fit.slope
        );
        assert!(fit.ci_lo <= 1.5 && 1.5 <= fit.ci_hi);
    }

    #[test]
    fn degenerate_designs_are_rejected() {
        let p = |eps: f64| SamplePoint {
            eps,
            estimate: eps,
            stderr: 0.0,
        };
        assert!(matches!(
            fit_loglog_slope(&[p(0.1), p(0.1)]),
            Err(AnalysisError::TooFewPoints { .. })
        ));
        assert!(matches!(
            fit_loglog_slope(&[p(0.1), p(0.1), p(0.1)]),
            Err(AnalysisError::TooFewPoints { .. })
        ));
        assert!(matches!(
            fit_loglog_slope(&vec![p(0.1), p(0.01)]),
            Err(AnalysisError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn nonpositive_estimates_are_rejected() {
        let points = [
            SamplePoint {
                eps: 0.1,
                estimate: 0.0,
                stderr: 0.0,
            },
            SamplePoint {
                eps: 0.01,
                estimate: 1.0,
                stderr: 0.1,
            },
            SamplePoint {
                eps: 0.001,
                estimate: 1.0,
                stderr: 0.1,
            },
        ];
        assert!(matches!(
            fit_loglog_slope(&points),
            Err(AnalysisError::NonPositiveEstimate(_))
        ));
    }
}
