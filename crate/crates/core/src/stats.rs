//! Aggregate statistics used by the experiment harness.

use crate::error::{Error, Result};

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (`n − 1` denominator); zero for a single value.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Coefficient of determination of `predicted` as a model of `observed`:
/// `1 − SS_res / SS_tot`, with `SS_tot` taken about the observed mean. The
/// prediction is not fitted, so the value can be negative.
pub fn r_squared(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    if observed.len() != predicted.len() || observed.len() < 2 {
        return Err(Error::UndefinedRSquared(format!(
            "need two or more paired values, got {} observed and {} predicted",
            observed.len(),
            predicted.len()
        )));
    }
    let m = mean(observed);
    let ss_tot: f64 = observed.iter().map(|o| (o - m) * (o - m)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedRSquared("observed values are constant".into()));
    }
    let ss_res: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(o, p)| (o - p) * (o - p))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Root-mean-square difference divided by `scale`.
pub fn normalized_rmse(observed: &[f64], predicted: &[f64], scale: f64) -> f64 {
    let ss: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(o, p)| (o - p) * (o - p))
        .sum();
    (ss / observed.len() as f64).sqrt() / scale
}

/// Least-squares slope of `y = k·x` (line through the origin).
pub fn slope_through_origin(x: &[f64], y: &[f64]) -> f64 {
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    sxy / sxx
}

/// Ordinary least-squares fit `y = a + b·x`; returns `(a, b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn perfect_prediction_scores_one() {
        let obs = [1.0, 2.0, 4.0, 8.0];
        assert_eq!(r_squared(&obs, &obs).unwrap(), 1.0);
    }

    #[test]
    fn predicting_the_mean_scores_zero() {
        let obs = [1.0, 2.0, 4.0, 8.0];
        let m = mean(&obs);
        assert_relative_eq!(r_squared(&obs, &[m; 4]).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn small_noise_about_a_line() {
        // theory line through four distances with ±0.1 % perturbations
        let x = [500.0, 1000.0, 2000.0, 4000.0];
        let theory: Vec<f64> = x.iter().map(|l| 1.811e-6 * l).collect();
        let noise = [0.001, -0.001, 0.0007, -0.0004];
        let obs: Vec<f64> = theory.iter().zip(noise).map(|(t, e)| t * (1.0 + e)).collect();
        let r2 = r_squared(&obs, &theory).unwrap();
        assert!(r2 > 0.99 && r2 < 1.0, "{r2}");
        // hand value: SS_res and SS_tot summed directly
        let m = obs.iter().sum::<f64>() / 4.0;
        let ss_res: f64 = obs.iter().zip(&theory).map(|(o, t)| (o - t).powi(2)).sum();
        let ss_tot: f64 = obs.iter().map(|o| (o - m).powi(2)).sum();
        assert_relative_eq!(r2, 1.0 - ss_res / ss_tot, max_relative = 1e-14);
    }

    #[test]
    fn constant_observations_are_rejected() {
        assert!(matches!(
            r_squared(&[3.0, 3.0, 3.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedRSquared(_))
        ));
        assert!(r_squared(&[1.0], &[1.0]).is_err());
        assert!(r_squared(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn fits_recover_exact_relations() {
        let v = [1000.0, 2000.0, 4000.0];
        let k: Vec<f64> = v.iter().map(|v: &f64| 3.0e9 * v.powi(-3)).collect();
        assert_relative_eq!(log_log_slope(&v, &k), -3.0, epsilon = 1e-12);
        assert_relative_eq!(slope_through_origin(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]), 2.0);
        let (a, b) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert_relative_eq!(a, 1.0, epsilon = 1e-12);
        assert_relative_eq!(b, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn spread_statistics() {
        assert_relative_eq!(std_dev(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]), 2.138_089_935_299_395, max_relative = 1e-14);
        assert_eq!(std_dev(&[1.0]), 0.0);
        assert_relative_eq!(normalized_rmse(&[1.0, 3.0], &[0.0, 2.0], 2.0), 0.5);
    }
}
