//! Balanced homodyne detection of a probe field against a reference.
//!
//! The probe and reference are coherent states with mean photon numbers
//! `n_p`, `n_r` and relative phase `phi`. After a 50/50 beam splitter both
//! outputs are again coherent, so the two detector counts are independent
//! Poisson variables and their difference `I = D2 - D1` is Skellam
//! distributed with mean `2 sqrt(n_r n_p) sin(phi)` and variance `n_r + n_p`.

mod fock;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::ensemble::DickeProjection;
use crate::{Error, Result};

pub use fock::{fock_oracle_moments, FockMoments};

/// Phase standard deviation (rad) above which `sin(phi) ~ phi` is flagged.
pub const DEFAULT_LINEARIZATION_LIMIT: f64 = 0.1;

/// Probe and reference mean photon numbers and their relative phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPair {
    pub n_probe: f64,
    pub n_reference: f64,
    pub phase: f64,
}

impl FieldPair {
    pub fn new(n_probe: f64, n_reference: f64, phase: f64) -> Result<Self> {
        check_photons("n_probe", n_probe)?;
        check_photons("n_reference", n_reference)?;
        if !phase.is_finite() {
            return Err(Error::domain("phase", phase, "must be finite"));
        }
        Ok(FieldPair {
            n_probe,
            n_reference,
            phase,
        })
    }

    fn amplitude_product(&self) -> f64 {
        (self.n_reference * self.n_probe).sqrt()
    }
}

pub(crate) fn check_photons(name: &'static str, n: f64) -> Result<()> {
    if !n.is_finite() || n < 0.0 {
        return Err(Error::domain(
            name,
            n,
            "photon number must be finite and non-negative",
        ));
    }
    Ok(())
}

/// `<I> = 2 sqrt(n_r n_p) sin(phi)`.
pub fn mean_difference(fields: &FieldPair) -> f64 {
    2.0 * fields.amplitude_product() * fields.phase.sin()
}

/// `<I^2> = n_r + n_p + 4 n_r n_p sin^2(phi)`.
pub fn second_moment_difference(fields: &FieldPair) -> f64 {
    let s = fields.phase.sin();
    fields.n_reference + fields.n_probe + 4.0 * fields.n_reference * fields.n_probe * s * s
}

/// Shot noise `n_r + n_p`; the phase drops out.
pub fn variance_fixed_phase(fields: &FieldPair) -> f64 {
    fields.n_reference + fields.n_probe
}

/// Difference-signal variance under a small fluctuating phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctuatingPhaseVariance {
    pub variance: f64,
    /// False when the phase spread exceeds the linearization limit; the
    /// linearized value is still returned.
    pub linearization_reliable: bool,
}

/// `n_r + n_p + 4 n_r n_p var(phi)` for a phase fluctuating about zero.
pub fn variance_fluctuating_phase(
    n_reference: f64,
    n_probe: f64,
    phase_variance: f64,
) -> Result<FluctuatingPhaseVariance> {
    variance_fluctuating_phase_with_limit(
        n_reference,
        n_probe,
        phase_variance,
        DEFAULT_LINEARIZATION_LIMIT,
    )
}

pub fn variance_fluctuating_phase_with_limit(
    n_reference: f64,
    n_probe: f64,
    phase_variance: f64,
    phase_std_limit: f64,
) -> Result<FluctuatingPhaseVariance> {
    check_photons("n_reference", n_reference)?;
    check_photons("n_probe", n_probe)?;
    if !phase_variance.is_finite() || phase_variance < 0.0 {
        return Err(Error::domain(
            "phase_variance",
            phase_variance,
            "must be finite and non-negative",
        ));
    }
    Ok(FluctuatingPhaseVariance {
        variance: n_reference + n_probe + 4.0 * n_reference * n_probe * phase_variance,
        linearization_reliable: phase_variance.sqrt() <= phase_std_limit,
    })
}

/// One homodyne shot: the two detector counts and their difference `D2 - D1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionRecord {
    pub count_d1: u64,
    pub count_d2: u64,
    pub difference: i64,
    /// Dicke projection that produced the signal, when simulated.
    pub latent_m: Option<DickeProjection>,
}

impl DetectionRecord {
    pub fn new(count_d1: u64, count_d2: u64) -> Self {
        DetectionRecord {
            count_d1,
            count_d2,
            difference: count_d2 as i64 - count_d1 as i64,
            latent_m: None,
        }
    }

    pub fn with_latent(mut self, m: DickeProjection) -> Self {
        self.latent_m = Some(m);
        self
    }
}

pub(crate) fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let x: f64 = Poisson::new(mean)
        .expect("positive finite Poisson mean")
        .sample(rng);
    x as u64
}

/// Samples detector counts for a difference signal with the given mean and
/// total shot-noise variance: `D2 ~ Poisson((v + mu)/2)`, `D1 ~ Poisson((v - mu)/2)`.
pub fn sample_difference<R: Rng + ?Sized>(
    mean: f64,
    shot_noise: f64,
    rng: &mut R,
) -> Result<DetectionRecord> {
    if !shot_noise.is_finite() || shot_noise < 0.0 || !mean.is_finite() {
        return Err(Error::domain(
            "shot_noise",
            shot_noise,
            "must be finite and non-negative",
        ));
    }
    if mean.abs() > shot_noise {
        return Err(Error::DetectorSaturated { mean, shot_noise });
    }
    // D1 is drawn first; the ordering is part of the reproducibility contract.
    let d1 = sample_poisson(0.5 * (shot_noise - mean), rng);
    let d2 = sample_poisson(0.5 * (shot_noise + mean), rng);
    Ok(DetectionRecord::new(d1, d2))
}

/// Samples one homodyne shot for the given fields.
pub fn sample_counts<R: Rng + ?Sized>(fields: &FieldPair, rng: &mut R) -> DetectionRecord {
    let total = fields.n_reference + fields.n_probe;
    let interference = mean_difference(fields).clamp(-total, total);
    sample_difference(interference, total, rng)
        .expect("|2 sqrt(n_r n_p) sin phi| <= n_r + n_p by AM-GM")
}
