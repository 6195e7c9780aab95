//! Sample statistics used to compare simulations against analytic budgets.

/// Mean, unbiased variance and the standard errors of both estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSummary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    /// Fourth central moment (biased, 1/n).
    pub fourth_moment: f64,
}

impl SampleSummary {
    /// Two-pass summary; the reduction order is the slice order.
    pub fn from_slice(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return SampleSummary {
                count: 0,
                mean: f64::NAN,
                variance: f64::NAN,
                fourth_moment: f64::NAN,
            };
        }
        let nf = n as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let (mut m2, mut m4) = (0.0, 0.0);
        for &x in xs {
            let d2 = (x - mean) * (x - mean);
            m2 += d2;
            m4 += d2 * d2;
        }
        let variance = if n > 1 { m2 / (nf - 1.0) } else { 0.0 };
        SampleSummary {
            count: n,
            mean,
            variance,
            fourth_moment: m4 / nf,
        }
    }

    pub fn std_error_mean(&self) -> f64 {
        (self.variance / self.count as f64).sqrt()
    }

    /// Large-sample standard error of the variance estimator,
    /// `sqrt((mu4 - s^4 (n-3)/(n-1)) / n)`.
    pub fn std_error_variance(&self) -> f64 {
        let n = self.count as f64;
        if self.count < 4 {
            return f64::INFINITY;
        }
        let s4 = self.variance * self.variance;
        ((self.fourth_moment - s4 * (n - 3.0) / (n - 1.0)) / n)
            .max(0.0)
            .sqrt()
    }
}

/// Weighted least-squares fit of `y = c0 + c1 x + c2 x^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticFit {
    pub coefficients: [f64; 3],
    pub std_errors: [f64; 3],
}

/// Fits a quadratic to `(x, y)` points with standard deviations `sigma`.
///
/// Returns `None` for fewer than three points or a singular design.
pub fn weighted_quadratic_fit(xs: &[f64], ys: &[f64], sigma: &[f64]) -> Option<QuadraticFit> {
    if xs.len() < 3 || xs.len() != ys.len() || xs.len() != sigma.len() {
        return None;
    }
    // x is rescaled to O(1) so the normal matrix stays well conditioned.
    let scale = xs.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if scale == 0.0 {
        return None;
    }
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for ((&x, &y), &s) in xs.iter().zip(ys).zip(sigma) {
        let w = 1.0 / (s * s);
        let u = x / scale;
        let row = [1.0, u, u * u];
        for i in 0..3 {
            atb[i] += w * row[i] * y;
            for j in 0..3 {
                ata[i][j] += w * row[i] * row[j];
            }
        }
    }
    let inv = invert3(&ata)?;
    let mut coefficients = [0.0; 3];
    let mut std_errors = [0.0; 3];
    for i in 0..3 {
        let c: f64 = (0..3).map(|j| inv[i][j] * atb[j]).sum();
        let unscale = scale.powi(i as i32);
        coefficients[i] = c / unscale;
        std_errors[i] = inv[i][i].max(0.0).sqrt() / unscale;
    }
    Some(QuadraticFit {
        coefficients,
        std_errors,
    })
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            // cofactor of m[j][i]
            let (r0, r1) = match j {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let (c0, c1) = match i {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let minor = m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            *v = sign * minor / det;
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn summary_of_small_sample() {
        let s = SampleSummary::from_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert_relative_eq!(s.variance, 5.0 / 3.0, epsilon = 1e-15);
        // central deviations ±0.5, ±1.5
        assert_relative_eq!(s.fourth_moment, (2.0 * 0.0625 + 2.0 * 5.0625) / 4.0);
    }

    #[test]
    fn exact_quadratic_recovered() {
        let xs: Vec<f64> = (1..=6).map(|i| i as f64 * 2e4).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 + 0.04 * x + 1e-7 * x * x).collect();
        let sig = vec![1.0; xs.len()];
        let fit = weighted_quadratic_fit(&xs, &ys, &sig).unwrap();
        assert_relative_eq!(fit.coefficients[0], 3.0, max_relative = 1e-8);
        assert_relative_eq!(fit.coefficients[1], 0.04, max_relative = 1e-9);
        assert_relative_eq!(fit.coefficients[2], 1e-7, max_relative = 1e-9);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn inverse_is_inverse() {
        let m = [[4.0, 1.0, 2.0], [1.0, 3.0, 0.5], [2.0, 0.5, 5.0]];
        let inv = invert3(&m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let p: f64 = (0..3).map(|k| m[i][k] * inv[k][j]).sum();
                assert_relative_eq!(p, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_fit_rejected() {
        assert!(weighted_quadratic_fit(&[1.0, 2.0], &[1.0, 2.0], &[1.0, 1.0]).is_none());
        assert!(weighted_quadratic_fit(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], &[1.0; 3]).is_none());
    }
}
