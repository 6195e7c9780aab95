//! Bayesian state reduction of the Dicke distribution by a homodyne outcome.
//!
//! Given a Dicke state `|N/2, M>` the difference signal is Gaussian with mean
//! `g M` and variance `n_sn`. Combined with the Gaussian CSS prior
//! `exp(-M^2 / (N/2))` the posterior over `M` is again Gaussian, with variance
//! reduced by `1 + kappa^2`, `kappa^2 = g^2 N / (4 n_sn)`.

use std::f64::consts::PI;

use crate::ensemble::{
    css_moments, ln_css_dicke_weight, sample_dicke, DickeProjection, EnsembleSpec,
};
use crate::homodyne::sample_difference;
use crate::par::{try_map_trials, Execution, StreamKey};
use crate::stats::SampleSummary;
use crate::{Error, Result};

/// Below this atom number the Gaussian CSS prior is flagged as approximate.
pub const DEFAULT_GAUSSIAN_PRIOR_MIN_ATOMS: u64 = 100;

/// Largest ensemble [`exact_discrete_posterior`] will tabulate.
pub const EXACT_POSTERIOR_MAX_ATOMS: u64 = 5000;

/// Signal per unit `M` and the shot-noise variance of the difference signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementGain {
    pub g: f64,
    pub n_sn: f64,
}

impl MeasurementGain {
    pub fn new(g: f64, n_sn: f64) -> Result<Self> {
        if !g.is_finite() {
            return Err(Error::domain("g", g, "must be finite"));
        }
        if !n_sn.is_finite() || n_sn <= 0.0 {
            return Err(Error::domain("n_sn", n_sn, "shot noise must be positive"));
        }
        Ok(MeasurementGain { g, n_sn })
    }

    /// Two-color probing: `g = 4 sqrt(n_r n_p) k`, `n_sn = n_r + n_p + m_r + m_p`.
    pub fn from_photons(n_r: f64, n_p: f64, m_r: f64, m_p: f64, mean_k: f64) -> Result<Self> {
        MeasurementGain::new(
            4.0 * (n_r * n_p).sqrt() * mean_k,
            crate::probe::shot_noise(n_r, n_p, m_r, m_p),
        )
    }

    /// The positive gain giving `kappa_squared` for `n_atoms` at shot noise `n_sn`.
    pub fn with_kappa_squared(kappa_squared: f64, n_atoms: u64, n_sn: f64) -> Result<Self> {
        if !kappa_squared.is_finite() || kappa_squared < 0.0 {
            return Err(Error::domain(
                "kappa_squared",
                kappa_squared,
                "must be non-negative",
            ));
        }
        MeasurementGain::new((4.0 * kappa_squared * n_sn / n_atoms as f64).sqrt(), n_sn)
    }
}

/// Gaussian density of outcome `n` given projection `m`.
pub fn likelihood(outcome_n: f64, m: &DickeProjection, gain: &MeasurementGain) -> f64 {
    let d = outcome_n - gain.g * m.m();
    (-d * d / (2.0 * gain.n_sn)).exp() / (2.0 * PI * gain.n_sn).sqrt()
}

/// `kappa^2 = g^2 N / (4 n_sn)`: projection noise over shot noise.
pub fn kappa_squared(gain: &MeasurementGain, n_atoms: u64) -> f64 {
    gain.g * gain.g * n_atoms as f64 / (4.0 * gain.n_sn)
}

/// Strong, equal local oscillators: `kappa^2 = 2 k^2 N n_p`.
pub fn strong_lo_kappa_squared(mean_k: f64, n_atoms: u64, n_probe: f64) -> f64 {
    2.0 * mean_k * mean_k * n_atoms as f64 * n_probe
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorState {
    pub mean_m: f64,
    pub var_m: f64,
    pub kappa_squared: f64,
    /// Set when `N` is below the Gaussian-prior threshold.
    pub prior_approximate: bool,
}

pub fn posterior(outcome_n: f64, spec: &EnsembleSpec, gain: &MeasurementGain) -> PosteriorState {
    posterior_with_threshold(outcome_n, spec, gain, DEFAULT_GAUSSIAN_PRIOR_MIN_ATOMS)
}

pub fn posterior_with_threshold(
    outcome_n: f64,
    spec: &EnsembleSpec,
    gain: &MeasurementGain,
    min_atoms: u64,
) -> PosteriorState {
    let n = spec.n_atoms() as f64;
    let k2 = kappa_squared(gain, spec.n_atoms());
    let slope = gain.g * n / (4.0 * gain.n_sn) / (1.0 + k2);
    PosteriorState {
        mean_m: slope * outcome_n,
        var_m: (n / 4.0) / (1.0 + k2),
        kappa_squared: k2,
        prior_approximate: spec.n_atoms() < min_atoms,
    }
}

/// Posterior over every Dicke projection, exact binomial prior times the
/// Gaussian likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePosterior {
    pub m: Vec<f64>,
    pub probability: Vec<f64>,
}

impl DiscretePosterior {
    pub fn mean(&self) -> f64 {
        self.m
            .iter()
            .zip(&self.probability)
            .map(|(m, p)| m * p)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.m
            .iter()
            .zip(&self.probability)
            .map(|(m, p)| (m - mu) * (m - mu) * p)
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.probability.iter().sum()
    }
}

pub fn exact_discrete_posterior(
    outcome_n: f64,
    spec: &EnsembleSpec,
    gain: &MeasurementGain,
) -> Result<DiscretePosterior> {
    if spec.n_atoms() > EXACT_POSTERIOR_MAX_ATOMS {
        return Err(Error::TooLarge {
            n_atoms: spec.n_atoms(),
            limit: EXACT_POSTERIOR_MAX_ATOMS,
        });
    }
    let mut m = Vec::with_capacity(spec.n_atoms() as usize + 1);
    let mut log_w = Vec::with_capacity(m.capacity());
    for p in spec.projections() {
        let d = outcome_n - gain.g * p.m();
        log_w.push(ln_css_dicke_weight(spec, &p)? - d * d / (2.0 * gain.n_sn));
        m.push(p.m());
    }
    let peak = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probability: Vec<f64> = log_w.iter().map(|l| (l - peak).exp()).collect();
    let z: f64 = probability.iter().sum();
    probability.iter_mut().for_each(|p| *p /= z);
    Ok(DiscretePosterior { m, probability })
}

/// Outcome of the two-probe conditional-variance experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalReport {
    pub trials: usize,
    pub kappa_squared: f64,
    /// `var(n2 / g) - n_sn / g^2`: the unconditional `J_z` variance seen through
    /// the second probe.
    pub prior_var_estimate: f64,
    pub prior_var_se: f64,
    /// `var(n2 / g - mean_post(n1)) - n_sn / g^2`.
    pub conditional_var_estimate: f64,
    pub conditional_var_se: f64,
    /// `var(M - mean_post(n1))` over the simulated latent projections.
    pub latent_conditional_var: f64,
    pub latent_conditional_se: f64,
    /// `(N/4) / (1 + kappa^2)`.
    pub predicted: f64,
    /// Spread of the posterior mean over first-probe outcomes; together with
    /// `predicted` it should add up to `N/4`.
    pub posterior_mean_variance: f64,
}

impl ConditionalReport {
    pub fn reduction_ratio(&self) -> f64 {
        self.prior_var_estimate / self.conditional_var_estimate
    }
}

/// Simulates `trials` QND probe pairs: draw `M` once, detect it twice, predict
/// the second outcome from the posterior built on the first.
///
/// Detector counts are Poisson (Skellam difference), which requires
/// `|g| N / 2 <= n_sn`.
pub fn conditional_experiment(
    spec: &EnsembleSpec,
    gain: &MeasurementGain,
    trials: usize,
    key: StreamKey,
    exec: Execution,
) -> Result<ConditionalReport> {
    if trials < 4 {
        return Err(Error::domain(
            "trials",
            trials as f64,
            "need at least 4 trials",
        ));
    }
    let max_signal = gain.g.abs() * spec.bloch_radius();
    if max_signal > gain.n_sn {
        return Err(Error::DetectorSaturated {
            mean: max_signal,
            shot_noise: gain.n_sn,
        });
    }

    let samples = try_map_trials(trials, key, exec, |rng| -> Result<(f64, f64, f64)> {
        let m = sample_dicke(spec, rng);
        let signal = gain.g * m.m();
        let first = sample_difference(signal, gain.n_sn, rng)?;
        let second = sample_difference(signal, gain.n_sn, rng)?;
        Ok((m.m(), first.difference as f64, second.difference as f64))
    })?;

    let k2 = kappa_squared(gain, spec.n_atoms());
    let predicted = css_moments(spec).var_m / (1.0 + k2);

    let post_means: Vec<f64> = samples
        .iter()
        .map(|&(_, n1, _)| posterior(n1, spec, gain).mean_m)
        .collect();
    let posterior_mean_variance = SampleSummary::from_slice(&post_means).variance;
    let latent_residual: Vec<f64> = samples
        .iter()
        .zip(&post_means)
        .map(|(s, mu)| s.0 - mu)
        .collect();
    let latent = SampleSummary::from_slice(&latent_residual);

    let (prior, conditional) = if gain.g == 0.0 {
        // No signal: the first probe carries no information about M.
        let latent: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let s = SampleSummary::from_slice(&latent);
        (s, s)
    } else {
        let second: Vec<f64> = samples.iter().map(|s| s.2 / gain.g).collect();
        let residual: Vec<f64> = second
            .iter()
            .zip(&post_means)
            .map(|(x, mu)| x - mu)
            .collect();
        (
            SampleSummary::from_slice(&second),
            SampleSummary::from_slice(&residual),
        )
    };
    let detector = if gain.g == 0.0 {
        0.0
    } else {
        gain.n_sn / (gain.g * gain.g)
    };

    Ok(ConditionalReport {
        trials,
        kappa_squared: k2,
        prior_var_estimate: prior.variance - detector,
        prior_var_se: prior.std_error_variance(),
        conditional_var_estimate: conditional.variance - detector,
        conditional_var_se: conditional.std_error_variance(),
        latent_conditional_var: latent.variance,
        latent_conditional_se: latent.std_error_variance(),
        predicted,
        posterior_mean_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec(n: u64) -> EnsembleSpec {
        EnsembleSpec::new(n).unwrap()
    }

    #[test]
    fn likelihood_examples() {
        let s = spec(10);
        let gain = MeasurementGain::new(2.0, 9.0).unwrap();
        let peak = 1.0 / (2.0 * PI * 9.0).sqrt();
        let m0 = DickeProjection::from_m(&s, 0.0).unwrap();
        assert_relative_eq!(likelihood(0.0, &m0, &gain), peak, max_relative = 1e-15);
        let m3 = DickeProjection::from_m(&s, 3.0).unwrap();
        assert_relative_eq!(likelihood(6.0, &m3, &gain), peak, max_relative = 1e-15);
        assert_relative_eq!(
            likelihood(9.0, &m3, &gain),
            peak * (-0.5f64).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(
            kappa_squared(&MeasurementGain::new(0.0, 1.0).unwrap(), 1000),
            0.0
        );

        let gain = MeasurementGain::from_photons(1e4, 1e2, 1e4, 1e2, 1e-4).unwrap();
        assert_relative_eq!(gain.g, 0.4, max_relative = 1e-14);
        assert_eq!(gain.n_sn, 20_200.0);
        let exact = kappa_squared(&gain, 100_000);
        assert_relative_eq!(exact, 16_000.0 / 80_800.0, max_relative = 1e-13);
        let strong = strong_lo_kappa_squared(1e-4, 100_000, 1e2);
        assert_relative_eq!(strong, 0.2, max_relative = 1e-13);
        assert_relative_eq!(exact / strong, 1e4 / (1e4 + 1e2), max_relative = 1e-13);

        assert_eq!(
            strong_lo_kappa_squared(1e-4, 100_000, 2e2),
            2.0 * strong_lo_kappa_squared(1e-4, 100_000, 1e2)
        );
    }

    #[test]
    fn gain_for_target_kappa() {
        let g = MeasurementGain::with_kappa_squared(3.0, 400, 1e4).unwrap();
        assert_relative_eq!(kappa_squared(&g, 400), 3.0, max_relative = 1e-14);
        assert!(MeasurementGain::new(1.0, 0.0).is_err());
        assert!(MeasurementGain::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn posterior_examples() {
        let gain = MeasurementGain::from_photons(1e4, 1e2, 1e4, 1e2, 1e-4).unwrap();
        let s = spec(100_000);
        let p0 = posterior(0.0, &s, &gain);
        assert_eq!(p0.mean_m, 0.0);
        assert_relative_eq!(
            p0.var_m,
            25_000.0 / (1.0 + p0.kappa_squared),
            max_relative = 1e-15
        );

        let p = posterior(50.0, &s, &gain);
        let k2 = 16_000.0 / 80_800.0;
        assert_relative_eq!(
            p.mean_m,
            50.0 * k2 / (0.4 * (1.0 + k2)),
            max_relative = 1e-13
        );
        assert_relative_eq!(p.mean_m, 20.66, max_relative = 1e-3);
        assert_relative_eq!(p.var_m, 20_867.6, max_relative = 1e-5);
        assert!(!p.prior_approximate);
        assert!(posterior(0.0, &spec(50), &gain).prior_approximate);
    }

    #[test]
    fn strong_measurement_centers_on_naive_estimate() {
        let s = spec(1000);
        let gain = MeasurementGain::new(1e4, 1.0).unwrap();
        let p = posterior(3e5, &s, &gain);
        assert_relative_eq!(p.mean_m, 30.0, max_relative = 1e-6);
    }

    #[test]
    fn discrete_posterior_small_and_symmetric() {
        let d = exact_discrete_posterior(0.0, &spec(2), &MeasurementGain::new(1.0, 1.0).unwrap())
            .unwrap();
        assert_eq!(d.m, vec![-1.0, 0.0, 1.0]);
        assert_eq!(d.probability[0], d.probability[2]);
        assert_eq!(d.mean(), 0.0);
        assert!((d.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn discrete_posterior_n1000_matches_gaussian() {
        let s = spec(1000);
        let gain = MeasurementGain::with_kappa_squared(1.0, 1000, 1.0).unwrap();
        let outcome = gain.g * 10.0;
        let d = exact_discrete_posterior(outcome, &s, &gain).unwrap();
        let p = posterior(outcome, &s, &gain);
        assert!((d.mean() / p.mean_m - 1.0).abs() < 0.01);
        assert!((d.variance() / p.var_m - 1.0).abs() < 0.01);
        assert!((d.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn discrete_posterior_refuses_large_ensembles() {
        let g = MeasurementGain::new(1.0, 1.0).unwrap();
        assert!(matches!(
            exact_discrete_posterior(0.0, &spec(5001), &g),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn uninformative_probe_leaves_prior() {
        let s = spec(400);
        let gain = MeasurementGain::new(0.0, 100.0).unwrap();
        let r = conditional_experiment(&s, &gain, 50_000, StreamKey::new(4), Execution::Parallel)
            .unwrap();
        assert_eq!(r.kappa_squared, 0.0);
        assert!((r.conditional_var_estimate / 100.0 - 1.0).abs() < 0.03);
        assert_eq!(r.predicted, 100.0);
    }

    #[test]
    fn saturated_gain_rejected() {
        let s = spec(400);
        let gain = MeasurementGain::new(1.0, 100.0).unwrap();
        assert!(matches!(
            conditional_experiment(&s, &gain, 100, StreamKey::new(0), Execution::Sequential),
            Err(Error::DetectorSaturated { .. })
        ));
    }

    proptest! {
        #[test]
        fn variance_reduction_identity(
            n in 1u64..1_000_000, g in -10.0f64..10.0, n_sn in 1e-3f64..1e6, outcome in -1e4f64..1e4
        ) {
            let s = spec(n);
            let gain = MeasurementGain::new(g, n_sn).unwrap();
            let p = posterior(outcome, &s, &gain);
            let quarter = n as f64 / 4.0;
            prop_assert!((p.var_m * (1.0 + p.kappa_squared) - quarter).abs() <= 1e-12 * quarter);
            prop_assert!(p.var_m <= quarter);
        }

        #[test]
        fn posterior_mean_linear(
            n in 100u64..1_000_000, g in 0.01f64..10.0, n_sn in 1.0f64..1e6
        ) {
            let s = spec(n);
            let gain = MeasurementGain::new(g, n_sn).unwrap();
            let k2 = kappa_squared(&gain, n);
            let slope = k2 / (g * (1.0 + k2));
            for outcome in [-250.0, 3.0, 1700.0] {
                let mu = posterior(outcome, &s, &gain).mean_m;
                prop_assert!((mu - slope * outcome).abs() <= 1e-12 * (slope * outcome).abs().max(1e-300));
            }
        }
    }
}
