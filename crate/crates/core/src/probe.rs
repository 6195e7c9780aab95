//! Dispersive probe phase models and their homodyne noise budgets.
//!
//! A probe addressing the `up` state picks up `phi_up = k N_up + phi0`, with
//! `k` the phase shift per atom and `phi0` a background phase unrelated to
//! the atoms. A second probe addressing the `down` state, read out with the
//! opposite local-oscillator sign, picks up `phi_down = -(k N_down + phi0)`.
//! Summing the two homodyne signals leaves `k (N_up - N_down)`: the background
//! and the part of the atom signal quadratic in `N` cancel.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::ensemble::{sample_dicke, EnsembleSpec};
use crate::homodyne::{check_photons, sample_counts, DetectionRecord, FieldPair};
use crate::{Error, Result};

/// Minimum `|detuning| / linewidth` for the `1/detuning` coupling law.
pub const DEFAULT_DISPERSIVE_RATIO: f64 = 10.0;

/// Default strictness for the `var(k) << <k>^2` criteria.
pub const DEFAULT_CRITERION_STRICTNESS: f64 = 0.01;

/// Relative tolerance for the dual-probe matching conditions.
pub const DUAL_MATCH_TOLERANCE: f64 = 1e-6;

/// Mean and variance of the per-atom phase shift `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingStatistics {
    pub mean_k: f64,
    pub var_k: f64,
}

impl CouplingStatistics {
    pub fn new(mean_k: f64, var_k: f64) -> Result<Self> {
        if !mean_k.is_finite() || mean_k < 0.0 {
            return Err(Error::domain(
                "mean_k",
                mean_k,
                "must be finite and non-negative",
            ));
        }
        if !var_k.is_finite() || var_k < 0.0 {
            return Err(Error::domain(
                "var_k",
                var_k,
                "must be finite and non-negative",
            ));
        }
        Ok(CouplingStatistics { mean_k, var_k })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        gaussian(self.mean_k, self.var_k, rng)
    }
}

/// An off-resonant optical transition: `k = c / detuning`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersiveLine {
    pub c_constant: f64,
    pub detuning: f64,
    pub linewidth: f64,
    /// Standard deviation of the probe frequency (same units as `detuning`).
    pub detuning_std: f64,
}

impl DispersiveLine {
    pub fn new(c_constant: f64, detuning: f64, linewidth: f64, detuning_std: f64) -> Result<Self> {
        if !c_constant.is_finite() {
            return Err(Error::domain("c_constant", c_constant, "must be finite"));
        }
        if !detuning.is_finite() || detuning == 0.0 {
            return Err(Error::domain(
                "detuning",
                detuning,
                "must be finite and non-zero",
            ));
        }
        if !linewidth.is_finite() || linewidth <= 0.0 {
            return Err(Error::domain(
                "linewidth",
                linewidth,
                "must be finite and positive",
            ));
        }
        if !detuning_std.is_finite() || detuning_std < 0.0 {
            return Err(Error::domain(
                "detuning_std",
                detuning_std,
                "must be finite and non-negative",
            ));
        }
        Ok(DispersiveLine {
            c_constant,
            detuning,
            linewidth,
            detuning_std,
        })
    }

    pub fn check_dispersive(&self, min_ratio: f64) -> Result<()> {
        check_dispersive(self.detuning, self.linewidth, min_ratio)
    }
}

pub(crate) fn check_dispersive(detuning: f64, linewidth: f64, min_ratio: f64) -> Result<()> {
    if detuning.abs() < min_ratio * linewidth {
        return Err(Error::NotDispersive {
            detuning,
            linewidth,
            min_ratio,
        });
    }
    Ok(())
}

/// Fluctuating background phase `phi0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BackgroundPhase {
    pub mean_phi0: f64,
    pub var_phi0: f64,
}

impl BackgroundPhase {
    pub fn new(mean_phi0: f64, var_phi0: f64) -> Result<Self> {
        if !mean_phi0.is_finite() {
            return Err(Error::domain("mean_phi0", mean_phi0, "must be finite"));
        }
        if !var_phi0.is_finite() || var_phi0 < 0.0 {
            return Err(Error::domain(
                "var_phi0",
                var_phi0,
                "must be finite and non-negative",
            ));
        }
        Ok(BackgroundPhase {
            mean_phi0,
            var_phi0,
        })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        gaussian(self.mean_phi0, self.var_phi0, rng)
    }
}

/// One probe/reference pair together with the phase it measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeChannel {
    pub probe_photons: f64,
    pub reference_photons: f64,
    pub coupling: CouplingStatistics,
    pub background: BackgroundPhase,
}

impl ProbeChannel {
    pub fn new(
        probe_photons: f64,
        reference_photons: f64,
        coupling: CouplingStatistics,
        background: BackgroundPhase,
    ) -> Result<Self> {
        check_photons("probe_photons", probe_photons)?;
        check_photons("reference_photons", reference_photons)?;
        Ok(ProbeChannel {
            probe_photons,
            reference_photons,
            coupling,
            background,
        })
    }

    fn photon_product(&self) -> f64 {
        self.probe_photons * self.reference_photons
    }
}

fn gaussian<R: Rng + ?Sized>(mean: f64, variance: f64, rng: &mut R) -> f64 {
    // Always draws, so the stream position never depends on the parameters.
    Normal::new(mean, variance.sqrt())
        .expect("finite mean, non-negative standard deviation")
        .sample(rng)
}

/// Coupling statistics of a dispersive line.
///
/// `var_k` follows from first-order propagation of the probe frequency noise:
/// `d k / d detuning = -c / detuning^2`.
pub fn coupling_from_line(line: &DispersiveLine) -> Result<CouplingStatistics> {
    coupling_from_line_with_ratio(line, DEFAULT_DISPERSIVE_RATIO)
}

pub fn coupling_from_line_with_ratio(
    line: &DispersiveLine,
    min_ratio: f64,
) -> Result<CouplingStatistics> {
    line.check_dispersive(min_ratio)?;
    let mean_k = line.c_constant / line.detuning;
    let slope = line.c_constant * line.detuning_std / (line.detuning * line.detuning);
    CouplingStatistics::new(mean_k, slope * slope)
}

/// Local-oscillator phase `<phi0> + <k> N / 2` that centers the single-probe
/// signal of a CSS on zero.
pub fn lo_offset(channel: &ProbeChannel, n_atoms: u64) -> f64 {
    channel.background.mean_phi0 + channel.coupling.mean_k * (n_atoms as f64 / 2.0)
}

/// Draws `k` and `phi0` and returns `k n_up + phi0` minus the LO offset.
pub fn single_probe_phase<R: Rng + ?Sized>(
    channel: &ProbeChannel,
    n_up: u64,
    n_atoms: u64,
    rng: &mut R,
) -> f64 {
    let k = channel.coupling.sample(rng);
    let phi0 = channel.background.sample(rng);
    k * n_up as f64 + phi0 - lo_offset(channel, n_atoms)
}

/// `n_r + n_p + n_r n_p {[<k>^2 + var(k) N + var(k)] N + 4 var(phi0)}` for a CSS.
pub fn single_probe_variance(channel: &ProbeChannel, n_atoms: u64) -> f64 {
    let n = n_atoms as f64;
    let CouplingStatistics { mean_k, var_k } = channel.coupling;
    let shot = channel.reference_photons + channel.probe_photons;
    shot + channel.photon_product()
        * ((mean_k * mean_k + var_k * n + var_k) * n + 4.0 * channel.background.var_phi0)
}

/// Total shot noise of both interferometers, `n_r + n_p + m_r + m_p`.
pub fn shot_noise(n_r: f64, n_p: f64, m_r: f64, m_p: f64) -> f64 {
    n_r + n_p + m_r + m_p
}

/// Two channels satisfying the two-color matching conditions: shared
/// coupling statistics, shared background, and `n_r n_p = m_r m_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualProbe {
    up: ProbeChannel,
    down: ProbeChannel,
}

fn relative_mismatch(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

impl DualProbe {
    pub fn new(up: ProbeChannel, down: ProbeChannel) -> Result<Self> {
        let checks = [
            ("mean_k", up.coupling.mean_k, down.coupling.mean_k),
            ("var_k", up.coupling.var_k, down.coupling.var_k),
            (
                "mean_phi0",
                up.background.mean_phi0,
                down.background.mean_phi0,
            ),
            ("var_phi0", up.background.var_phi0, down.background.var_phi0),
            (
                "n_r*n_p vs m_r*m_p",
                up.photon_product(),
                down.photon_product(),
            ),
        ];
        let failed: Vec<String> = checks
            .iter()
            .filter(|(_, a, b)| relative_mismatch(*a, *b) > DUAL_MATCH_TOLERANCE)
            .map(|(name, a, b)| format!("{name}: {a} != {b}"))
            .collect();
        if !failed.is_empty() {
            return Err(Error::DualProbeMismatch(failed.join("; ")));
        }
        Ok(DualProbe { up, down })
    }

    pub fn up(&self) -> &ProbeChannel {
        &self.up
    }

    pub fn down(&self) -> &ProbeChannel {
        &self.down
    }

    pub fn shot_noise(&self) -> f64 {
        shot_noise(
            self.up.reference_photons,
            self.up.probe_photons,
            self.down.reference_photons,
            self.down.probe_photons,
        )
    }

    /// `n_sn + 4 n_r n_p [<k>^2 + var(k)] N`.
    pub fn variance(&self, n_atoms: u64) -> f64 {
        let CouplingStatistics { mean_k, var_k } = self.up.coupling;
        self.shot_noise()
            + 4.0 * self.up.photon_product() * (mean_k * mean_k + var_k) * n_atoms as f64
    }
}

/// Dual-probe difference-signal variance; rejects channels that break the
/// matching conditions.
pub fn dual_probe_variance(
    up_channel: &ProbeChannel,
    down_channel: &ProbeChannel,
    n_atoms: u64,
) -> Result<f64> {
    Ok(DualProbe::new(*up_channel, *down_channel)?.variance(n_atoms))
}

/// Frequency-stability verdict for dual and single probing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeCriterion {
    pub dual_ok: bool,
    pub single_ok: bool,
    /// `var(k) / <k>^2`
    pub dual_ratio: f64,
    /// `var(k) N / <k>^2`
    pub single_ratio: f64,
}

pub fn single_probe_criterion(coupling: &CouplingStatistics, n_atoms: u64) -> ProbeCriterion {
    single_probe_criterion_with_strictness(coupling, n_atoms, DEFAULT_CRITERION_STRICTNESS)
}

pub fn single_probe_criterion_with_strictness(
    coupling: &CouplingStatistics,
    n_atoms: u64,
    strictness: f64,
) -> ProbeCriterion {
    let CouplingStatistics { mean_k, var_k } = *coupling;
    let dual_ratio = if var_k == 0.0 {
        0.0
    } else {
        var_k / (mean_k * mean_k)
    };
    let single_ratio = dual_ratio * n_atoms as f64;
    ProbeCriterion {
        dual_ok: dual_ratio <= strictness,
        single_ok: single_ratio <= strictness,
        dual_ratio,
        single_ratio,
    }
}

/// Draws a CSS, a single-probe phase, and a homodyne shot.
pub fn simulate_single_probe<R: Rng + ?Sized>(
    channel: &ProbeChannel,
    spec: &EnsembleSpec,
    rng: &mut R,
) -> DetectionRecord {
    let m = sample_dicke(spec, rng);
    let phase = single_probe_phase(channel, m.n_up(), spec.n_atoms(), rng);
    let fields = FieldPair {
        n_probe: channel.probe_photons,
        n_reference: channel.reference_photons,
        phase,
    };
    sample_counts(&fields, rng).with_latent(m)
}

/// Both homodyne shots of a two-color measurement and their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualDetection {
    pub up: DetectionRecord,
    pub down: DetectionRecord,
    pub difference: i64,
    pub phase_up: f64,
    pub phase_down: f64,
}

/// One two-color shot. `k` and `phi0` are drawn once and shared by both
/// channels; the combined signal is the sum of the two difference counts.
pub fn simulate_dual_probe<R: Rng + ?Sized>(
    probes: &DualProbe,
    spec: &EnsembleSpec,
    rng: &mut R,
) -> DualDetection {
    let m = sample_dicke(spec, rng);
    let (up, down) = (&probes.up, &probes.down);
    let k = up.coupling.sample(rng);
    let phi0 = up.background.sample(rng);
    let offset = lo_offset(up, spec.n_atoms());

    let phase_up = k * m.n_up() as f64 + phi0 - offset;
    let phase_down = -(k * m.n_down() as f64 + phi0) + offset;

    let up_shot = sample_counts(
        &FieldPair {
            n_probe: up.probe_photons,
            n_reference: up.reference_photons,
            phase: phase_up,
        },
        rng,
    )
    .with_latent(m);
    let down_shot = sample_counts(
        &FieldPair {
            n_probe: down.probe_photons,
            n_reference: down.reference_photons,
            phase: phase_down,
        },
        rng,
    )
    .with_latent(m);

    DualDetection {
        up: up_shot,
        down: down_shot,
        difference: up_shot.difference + down_shot.difference,
        phase_up,
        phase_down,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::SampleSummary;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn channel(
        n_p: f64,
        n_r: f64,
        mean_k: f64,
        var_k: f64,
        mean_phi0: f64,
        var_phi0: f64,
    ) -> ProbeChannel {
        ProbeChannel::new(
            n_p,
            n_r,
            CouplingStatistics::new(mean_k, var_k).unwrap(),
            BackgroundPhase::new(mean_phi0, var_phi0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn coupling_examples() {
        let c = coupling_from_line(&DispersiveLine::new(100.0, 1e6, 1.0, 0.0).unwrap()).unwrap();
        assert_relative_eq!(c.mean_k, 1e-4, max_relative = 1e-15);
        assert_eq!(c.var_k, 0.0);

        let c = coupling_from_line(&DispersiveLine::new(100.0, 1e6, 1.0, 1e3).unwrap()).unwrap();
        assert_relative_eq!(c.var_k, 1e-14, max_relative = 1e-12);

        let near = coupling_from_line(&DispersiveLine::new(100.0, 1e6, 1.0, 0.0).unwrap()).unwrap();
        let far = coupling_from_line(&DispersiveLine::new(100.0, 2e6, 1.0, 0.0).unwrap()).unwrap();
        assert_eq!(far.mean_k * 2.0, near.mean_k);
    }

    #[test]
    fn near_resonance_rejected() {
        let line = DispersiveLine::new(1.0, 5.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            coupling_from_line(&line),
            Err(Error::NotDispersive { .. })
        ));
        assert!(coupling_from_line_with_ratio(&line, 4.0).is_ok());
        assert!(DispersiveLine::new(1.0, 0.0, 1.0, 0.0).is_err());
        assert!(DispersiveLine::new(1.0, 10.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn negative_coupling_statistics_rejected() {
        assert!(CouplingStatistics::new(-1e-4, 0.0).is_err());
        assert!(CouplingStatistics::new(1e-4, -1.0).is_err());
        assert!(BackgroundPhase::new(0.0, -1.0).is_err());
    }

    #[test]
    fn lo_offset_examples() {
        assert_relative_eq!(
            lo_offset(&channel(1.0, 1.0, 1e-4, 0.0, 0.0, 0.0), 100_000),
            5.0,
            max_relative = 1e-15
        );
        assert_eq!(
            lo_offset(&channel(1.0, 1.0, 0.0, 0.0, 0.02, 0.0), 12345),
            0.02
        );
        assert_relative_eq!(
            lo_offset(&channel(1.0, 1.0, 2e-6, 0.0, 0.01, 0.0), 10_000),
            0.02,
            max_relative = 1e-14
        );
    }

    #[test]
    fn noiseless_phase_centered() {
        let ch = channel(1.0, 1.0, 1e-4, 0.0, 0.3, 0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert_eq!(single_probe_phase(&ch, 50_000, 100_000, &mut rng), 0.0);
    }

    #[test]
    fn single_probe_phase_spread() {
        let spec = EnsembleSpec::new(400).unwrap();
        let ch = channel(1.0, 1.0, 1e-4, 0.0, 0.0, 0.0);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| {
                let m = sample_dicke(&spec, &mut rng);
                single_probe_phase(&ch, m.n_up(), 400, &mut rng)
            })
            .collect();
        let s = SampleSummary::from_slice(&xs);
        assert!((s.variance.sqrt() / 1e-3 - 1.0).abs() < 0.02);

        let bg = channel(1.0, 1.0, 0.0, 0.0, 0.0, 1e-6);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| single_probe_phase(&bg, 200, 400, &mut rng))
            .collect();
        let s = SampleSummary::from_slice(&xs);
        assert!((s.variance / 1e-6 - 1.0).abs() < 0.05);
    }

    #[test]
    fn single_probe_variance_examples() {
        let ch = channel(1e2, 1e4, 1e-4, 0.0, 0.0, 0.0);
        assert_relative_eq!(
            single_probe_variance(&ch, 1000),
            1e4 + 1e2 + 1e6 * 1e-8 * 1000.0,
            max_relative = 1e-14
        );
        let ch = channel(1e2, 1e4, 1e-4, 1e-14, 0.0, 1e-8);
        let expected = 10_100.0 + 1e6 * ((1e-8 + 1e-14 * 1e5 + 1e-14) * 1e5 + 4e-8);
        assert_relative_eq!(
            single_probe_variance(&ch, 100_000),
            expected,
            max_relative = 1e-14
        );
        assert_relative_eq!(expected, 11_200.041, max_relative = 1e-9);
        // var(k) N^2 share of the atom noise
        let quadratic = 1e6 * 1e-14 * 1e10;
        assert_relative_eq!(
            quadratic / (expected - 10_100.0),
            0.0909,
            max_relative = 1e-3
        );
    }

    #[test]
    fn dual_probe_variance_examples() {
        let n = 250.0;
        let ch = channel(n, n, 1e-3, 0.0, 0.0, 0.0);
        assert_relative_eq!(
            dual_probe_variance(&ch, &ch, 5000).unwrap(),
            4.0 * n + 4.0 * n * n * 1e-6 * 5000.0,
            max_relative = 1e-14
        );
        let ch = channel(1e2, 1e4, 1e-4, 1e-14, 0.0, 0.0);
        let v = dual_probe_variance(&ch, &ch, 100_000).unwrap();
        assert_relative_eq!(v, 24_200.004, max_relative = 1e-12);
    }

    #[test]
    fn dual_probe_mismatch_rejected() {
        let a = channel(1e2, 1e4, 1e-4, 0.0, 0.0, 0.0);
        let b = channel(1e2, 1e4, 1.1e-4, 0.0, 0.0, 0.0);
        assert!(matches!(
            dual_probe_variance(&a, &b, 10),
            Err(Error::DualProbeMismatch(_))
        ));
        let c = channel(2e2, 1e4, 1e-4, 0.0, 0.0, 0.0);
        assert!(dual_probe_variance(&a, &c, 10).is_err());
        // equal products with different split are accepted
        let d = channel(1e3, 1e3, 1e-4, 0.0, 0.0, 0.0);
        assert!(dual_probe_variance(&a, &d, 10).is_ok());
    }

    #[test]
    fn shot_noise_examples() {
        assert_eq!(shot_noise(1.0, 2.0, 3.0, 4.0), 10.0);
        assert_eq!(shot_noise(1e4, 1e2, 1e4, 1e2), 20_200.0);
        assert_eq!(shot_noise(0.0, 0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn criterion_examples() {
        let c = single_probe_criterion(&CouplingStatistics::new(1e-4, 0.0).unwrap(), 100_000);
        assert!(c.dual_ok && c.single_ok);
        let c = single_probe_criterion(&CouplingStatistics::new(1e-4, 1e-14).unwrap(), 100_000);
        assert!(c.dual_ok && !c.single_ok);
        assert_relative_eq!(c.dual_ratio, 1e-6, max_relative = 1e-12);
        assert_relative_eq!(c.single_ratio, 0.1, max_relative = 1e-12);
        let c = single_probe_criterion(&CouplingStatistics::new(1e-4, 1e-18).unwrap(), 100_000);
        assert!(c.dual_ok && c.single_ok);
        assert_relative_eq!(c.single_ratio, 1e-5, max_relative = 1e-12);
        let c = single_probe_criterion(&CouplingStatistics::new(0.0, 1e-18).unwrap(), 10);
        assert!(!c.dual_ok && !c.single_ok);
    }

    proptest! {
        #[test]
        fn single_budget_matches_phase_variance(
            n_r in 0.0f64..1e6, n_p in 0.0f64..1e4, mean_k in 0.0f64..1e-3,
            var_k in 0.0f64..1e-12, var_phi0 in 0.0f64..1e-4, n_atoms in 1u64..1_000_000
        ) {
            let ch = channel(n_p, n_r, mean_k, var_k, 0.0, var_phi0);
            let n = n_atoms as f64;
            // var(k N_up) with var N_up = N/4, <N_up>^2 = N^2/4
            let var_kn = mean_k * mean_k * n / 4.0 + var_k * n * n / 4.0 + var_k * n / 4.0;
            let expected = n_r + n_p + 4.0 * n_r * n_p * (var_kn + var_phi0);
            let got = single_probe_variance(&ch, n_atoms);
            prop_assert!((got - expected).abs() <= 1e-12 * expected.max(1e-300));
        }

        #[test]
        fn dual_budget_is_linear_and_background_free(
            n_r in 1.0f64..1e6, n_p in 1.0f64..1e4, mean_k in 0.0f64..1e-3,
            var_k in 0.0f64..1e-12, var_phi0 in 0.0f64..1.0, n_atoms in 1u64..1_000_000
        ) {
            let quiet = channel(n_p, n_r, mean_k, var_k, 0.0, 0.0);
            let noisy = channel(n_p, n_r, mean_k, var_k, 0.0, var_phi0);
            let v_quiet = dual_probe_variance(&quiet, &quiet, n_atoms).unwrap();
            prop_assert_eq!(v_quiet, dual_probe_variance(&noisy, &noisy, n_atoms).unwrap());
            let sn = 2.0 * (n_r + n_p);
            let expected_atoms = 4.0 * n_r * n_p * (mean_k * mean_k + var_k) * n_atoms as f64;
            prop_assert!(((v_quiet - sn) - expected_atoms).abs() <= 1e-12 * expected_atoms.max(sn) );
            let v2 = dual_probe_variance(&quiet, &quiet, 2 * n_atoms).unwrap();
            let v3 = dual_probe_variance(&quiet, &quiet, 3 * n_atoms).unwrap();
            // equal steps in N give equal increments
            let (d1, d2) = (v2 - v_quiet, v3 - v2);
            prop_assert!((d1 - d2).abs() <= 1e-9 * d1.abs().max(sn * 1e-3));
        }
    }
}
