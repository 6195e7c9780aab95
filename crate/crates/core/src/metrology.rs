//! Scattering-limited squeezing and the probe photon-number tradeoff.
//!
//! Probing with `n_p` photons per probe gains information at the rate
//! `kappa^2 = A n_p` (strong local oscillators, `A = 2 k^2 N`) while a fraction
//! `eta = B n_p` (`B = Gamma k / Delta`) of the atoms scatters a photon and
//! shrinks the Bloch vector to `(1 - eta)` of its length. The conditional
//! variance is useful for angle estimation only when
//! `(1 + kappa^2)^-1 < (1 - eta)^2`. The figure of merit is
//!
//! ```text
//! xi^2 = 1 / ((1 + kappa^2) (1 - eta)^2)
//! ```
//!
//! reported in dB as `-10 log10(xi^2)`. Since both `A` and `B` scale as
//! `1/Delta^2`, the best achievable `xi^2` does not depend on the detuning.

use crate::conditional::strong_lo_kappa_squared;
use crate::probe::{check_dispersive, DEFAULT_DISPERSIVE_RATIO};
use crate::{Error, Result};

/// Scattering parameters of one probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoherenceModel {
    pub gamma: f64,
    pub detuning: f64,
    pub mean_k: f64,
    pub n_probe: f64,
}

impl DecoherenceModel {
    pub fn new(gamma: f64, detuning: f64, mean_k: f64, n_probe: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(Error::domain("gamma", gamma, "linewidth must be positive"));
        }
        if !detuning.is_finite() || detuning == 0.0 {
            return Err(Error::domain(
                "detuning",
                detuning,
                "must be finite and non-zero",
            ));
        }
        if !mean_k.is_finite() || mean_k < 0.0 {
            return Err(Error::domain(
                "mean_k",
                mean_k,
                "must be finite and non-negative",
            ));
        }
        if !n_probe.is_finite() || n_probe < 0.0 {
            return Err(Error::domain(
                "n_probe",
                n_probe,
                "must be finite and non-negative",
            ));
        }
        Ok(DecoherenceModel {
            gamma,
            detuning,
            mean_k,
            n_probe,
        })
    }

    /// Scattering probability per atom per probe photon, `Gamma k / Delta`.
    pub fn eta_per_photon(&self) -> f64 {
        self.gamma * self.mean_k / self.detuning.abs()
    }
}

/// Fraction of atoms scattering a photon, `eta = Gamma k n_p / Delta`.
pub fn eta(model: &DecoherenceModel) -> Result<f64> {
    let eta = model.eta_per_photon() * model.n_probe;
    if eta >= 1.0 {
        return Err(Error::InvalidOperatingPoint(eta));
    }
    Ok(eta)
}

/// Absorption coefficient `alpha = (Gamma k / Delta)(N / 2)` of each probe.
pub fn absorption_coefficient(model: &DecoherenceModel, n_atoms: u64) -> f64 {
    model.eta_per_photon() * (n_atoms as f64 / 2.0)
}

/// Photons scattered by both probes, `2 n_p alpha = n_p (Gamma k / Delta) N`.
pub fn scattered_photons(model: &DecoherenceModel, n_atoms: u64) -> f64 {
    model.n_probe * model.eta_per_photon() * n_atoms as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezingReport {
    pub kappa_squared: f64,
    pub eta: f64,
    /// `xi^2 = 1 / ((1 + kappa^2)(1 - eta)^2)`
    pub metrological_ratio: f64,
    /// `-10 log10(xi^2)`
    pub squeezing_db: f64,
    pub criterion_met: bool,
}

pub fn evaluate_point(kappa_squared: f64, eta: f64) -> Result<SqueezingReport> {
    if !kappa_squared.is_finite() || kappa_squared < 0.0 {
        return Err(Error::domain(
            "kappa_squared",
            kappa_squared,
            "must be non-negative",
        ));
    }
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::domain("eta", eta, "must be non-negative"));
    }
    if eta >= 1.0 {
        return Err(Error::InvalidOperatingPoint(eta));
    }
    let contraction = (1.0 - eta) * (1.0 - eta);
    let ratio = 1.0 / ((1.0 + kappa_squared) * contraction);
    Ok(SqueezingReport {
        kappa_squared,
        eta,
        metrological_ratio: ratio,
        squeezing_db: -10.0 * ratio.log10(),
        criterion_met: (1.0 + kappa_squared).recip() < contraction,
    })
}

pub fn evaluate_model(kappa_squared: f64, model: &DecoherenceModel) -> Result<SqueezingReport> {
    evaluate_point(kappa_squared, eta(model)?)
}

/// Golden-section search for the minimum of a unimodal `f` on `[a, b]`.
///
/// Returns `(x_min, f_min)`.
pub fn golden_section_minimize(
    f: impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonOptimum {
    /// Stationary point `(A - 2B) / (3AB)`, or 0 when probing cannot help.
    pub n_p_star: f64,
    pub eta_star: f64,
    pub kappa_sq_star: f64,
    pub best_report: SqueezingReport,
    /// Golden-section estimate of the same optimum.
    pub numeric_n_p: f64,
    /// False when `A <= 2B`: `xi^2` increases from `n_p = 0`.
    pub improves: bool,
}

/// `ln xi^2` for `kappa^2 = a x`, `eta = b x`.
fn ln_xi2(a: f64, b: f64, x: f64) -> f64 {
    -(a * x).ln_1p() - 2.0 * (-b * x).ln_1p()
}

/// Minimizes `xi^2(n_p) = 1 / ((1 + A n_p)(1 - B n_p)^2)` over `0 <= n_p < 1/B`.
///
/// `a` is `kappa^2` per photon and `b` is `eta` per photon.
pub fn optimize_photon_number(a: f64, b: f64) -> Result<PhotonOptimum> {
    if !a.is_finite() || a < 0.0 {
        return Err(Error::domain(
            "A",
            a,
            "kappa^2 per photon must be non-negative",
        ));
    }
    if !b.is_finite() || b <= 0.0 {
        return Err(Error::domain("B", b, "eta per photon must be positive"));
    }
    if a <= 2.0 * b {
        return Ok(PhotonOptimum {
            n_p_star: 0.0,
            eta_star: 0.0,
            kappa_sq_star: 0.0,
            best_report: evaluate_point(0.0, 0.0)?,
            numeric_n_p: 0.0,
            improves: false,
        });
    }
    let n_p_star = (a - 2.0 * b) / (3.0 * a * b);
    let (kappa_sq_star, eta_star) = (a * n_p_star, b * n_p_star);
    let numeric_n_p = numeric_optimum(|x| ln_xi2(a, b, x), b);
    Ok(PhotonOptimum {
        n_p_star,
        eta_star,
        kappa_sq_star,
        best_report: evaluate_point(kappa_sq_star, eta_star)?,
        numeric_n_p,
        improves: true,
    })
}

/// Golden-section search in `ln n_p` over `(0, 1/b)`.
fn numeric_optimum(objective: impl Fn(f64) -> f64, b: f64) -> f64 {
    let hi = (1.0 / b).ln();
    let lo = hi - 60.0;
    let (u, _) = golden_section_minimize(|u| objective(u.exp()), lo, hi, 1e-12, 500);
    u.exp()
}

/// How `kappa^2` depends on the probe photon number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaForm {
    /// `2 k^2 N n_p`, strong equal local oscillators.
    StrongLo,
    /// `4 n_r n_p k^2 N / (2 n_r + 2 n_p)` with `m_r = n_r`, `m_p = n_p`.
    Exact { n_reference: f64 },
}

/// Everything needed to trace `xi^2` as a function of `n_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeTradeoff {
    pub n_atoms: u64,
    pub mean_k: f64,
    pub gamma: f64,
    pub detuning: f64,
    pub form: KappaForm,
}

/// One point of the `n_p` sweep: the three variances compared when judging
/// metrological relevance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffPoint {
    pub n_probe: f64,
    /// CSS projection noise `N/4` of `J_z`.
    pub projection_variance: f64,
    /// `(N/4) / (1 + kappa^2)`.
    pub conditional_variance: f64,
    /// `(1 - eta)^2 N/4`.
    pub benchmark_variance: f64,
    pub report: SqueezingReport,
}

impl ProbeTradeoff {
    pub fn new(
        n_atoms: u64,
        mean_k: f64,
        gamma: f64,
        detuning: f64,
        form: KappaForm,
    ) -> Result<Self> {
        DecoherenceModel::new(gamma, detuning, mean_k, 0.0)?;
        if n_atoms == 0 {
            return Err(Error::NoAtoms);
        }
        if let KappaForm::Exact { n_reference } = form {
            if !n_reference.is_finite() || n_reference < 0.0 {
                return Err(Error::domain(
                    "n_reference",
                    n_reference,
                    "must be non-negative",
                ));
            }
        }
        Ok(ProbeTradeoff {
            n_atoms,
            mean_k,
            gamma,
            detuning,
            form,
        })
    }

    /// `(A, B)`: strong-LO `kappa^2` per photon and `eta` per photon.
    pub fn coefficients(&self) -> (f64, f64) {
        (
            strong_lo_kappa_squared(self.mean_k, self.n_atoms, 1.0),
            self.gamma * self.mean_k / self.detuning.abs(),
        )
    }

    pub fn kappa_squared(&self, n_probe: f64) -> f64 {
        match self.form {
            KappaForm::StrongLo => strong_lo_kappa_squared(self.mean_k, self.n_atoms, n_probe),
            KappaForm::Exact { n_reference } => {
                let denom = 2.0 * (n_reference + n_probe);
                if denom == 0.0 {
                    0.0
                } else {
                    4.0 * n_reference * n_probe * self.mean_k * self.mean_k * self.n_atoms as f64
                        / denom
                }
            }
        }
    }

    pub fn decoherence(&self, n_probe: f64) -> Result<DecoherenceModel> {
        DecoherenceModel::new(self.gamma, self.detuning, self.mean_k, n_probe)
    }

    pub fn report(&self, n_probe: f64) -> Result<SqueezingReport> {
        evaluate_model(self.kappa_squared(n_probe), &self.decoherence(n_probe)?)
    }

    pub fn point(&self, n_probe: f64) -> Result<TradeoffPoint> {
        let report = self.report(n_probe)?;
        let quarter = self.n_atoms as f64 / 4.0;
        Ok(TradeoffPoint {
            n_probe,
            projection_variance: quarter,
            conditional_variance: quarter / (1.0 + report.kappa_squared),
            benchmark_variance: (1.0 - report.eta) * (1.0 - report.eta) * quarter,
            report,
        })
    }

    pub fn optimize(&self) -> Result<PhotonOptimum> {
        let (a, b) = self.coefficients();
        match self.form {
            KappaForm::StrongLo => optimize_photon_number(a, b),
            KappaForm::Exact { .. } => {
                let objective = |x: f64| -self.kappa_squared(x).ln_1p() - 2.0 * (-b * x).ln_1p();
                let x = numeric_optimum(objective, b);
                let report = self.report(x)?;
                let zero = self.report(0.0)?;
                if report.metrological_ratio >= zero.metrological_ratio {
                    return Ok(PhotonOptimum {
                        n_p_star: 0.0,
                        eta_star: 0.0,
                        kappa_sq_star: 0.0,
                        best_report: zero,
                        numeric_n_p: 0.0,
                        improves: false,
                    });
                }
                Ok(PhotonOptimum {
                    n_p_star: x,
                    eta_star: report.eta,
                    kappa_sq_star: report.kappa_squared,
                    best_report: report,
                    numeric_n_p: x,
                    improves: true,
                })
            }
        }
    }
}

/// Atomic parameters that stay fixed while the detuning is varied; the
/// coupling follows `k = c / Delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetuningScan {
    pub c_constant: f64,
    pub gamma: f64,
    pub n_atoms: u64,
    pub min_ratio: f64,
}

impl DetuningScan {
    pub fn new(c_constant: f64, gamma: f64, n_atoms: u64) -> Self {
        DetuningScan {
            c_constant,
            gamma,
            n_atoms,
            min_ratio: DEFAULT_DISPERSIVE_RATIO,
        }
    }

    pub fn at(&self, detuning: f64) -> Result<ProbeTradeoff> {
        if !detuning.is_finite() || detuning == 0.0 {
            return Err(Error::domain(
                "detuning",
                detuning,
                "must be finite and non-zero",
            ));
        }
        check_dispersive(detuning, self.gamma, self.min_ratio)?;
        ProbeTradeoff::new(
            self.n_atoms,
            (self.c_constant / detuning).abs(),
            self.gamma,
            detuning,
            KappaForm::StrongLo,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetuningInvariance {
    pub first: PhotonOptimum,
    pub second: PhotonOptimum,
    /// `n_p*(Delta_2) / n_p*(Delta_1)`
    pub n_p_ratio: f64,
    /// `(Delta_2 / Delta_1)^2`
    pub expected_n_p_ratio: f64,
    /// `|xi2_2 - xi2_1| / xi2_1`
    pub xi2_relative_difference: f64,
    pub invariant: bool,
}

/// Tolerance used for the `invariant` verdict.
pub const DETUNING_INVARIANCE_TOLERANCE: f64 = 1e-10;

pub fn detuning_invariance_check(
    scan: &DetuningScan,
    delta_1: f64,
    delta_2: f64,
) -> Result<DetuningInvariance> {
    let first = scan.at(delta_1)?.optimize()?;
    let second = scan.at(delta_2)?.optimize()?;
    let (x1, x2) = (
        first.best_report.metrological_ratio,
        second.best_report.metrological_ratio,
    );
    let xi2_relative_difference = (x2 - x1).abs() / x1;
    let expected_n_p_ratio = (delta_2 / delta_1).powi(2);
    let n_p_ratio = second.n_p_star / first.n_p_star;
    let ratio_ok = if first.improves {
        (n_p_ratio / expected_n_p_ratio - 1.0).abs() <= DETUNING_INVARIANCE_TOLERANCE
    } else {
        !second.improves
    };
    Ok(DetuningInvariance {
        first,
        second,
        n_p_ratio,
        expected_n_p_ratio,
        xi2_relative_difference,
        invariant: ratio_ok && xi2_relative_difference <= DETUNING_INVARIANCE_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn eta_examples() {
        assert_eq!(
            eta(&DecoherenceModel::new(1.0, 100.0, 1e-4, 0.0).unwrap()).unwrap(),
            0.0
        );
        let e = eta(&DecoherenceModel::new(1.0, 100.0, 1e-4, 1e4).unwrap()).unwrap();
        assert_relative_eq!(e, 0.01, max_relative = 1e-12);
        let err = eta(&DecoherenceModel::new(1.0, 100.0, 1e-4, 1e6).unwrap());
        assert!(matches!(err, Err(Error::InvalidOperatingPoint(x)) if (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn scattered_photon_examples() {
        let m = DecoherenceModel::new(1.0, 100.0, 1e-4, 1e4).unwrap();
        assert_eq!(scattered_photons(&m, 0), 0.0);
        assert_relative_eq!(scattered_photons(&m, 100_000), 1e3, max_relative = 1e-12);
        assert_relative_eq!(
            scattered_photons(&m, 100_000),
            2.0 * m.n_probe * absorption_coefficient(&m, 100_000),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            scattered_photons(&m, 100_000) / 1e5,
            eta(&m).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn evaluate_examples() {
        let r = evaluate_point(0.0, 0.0).unwrap();
        assert_eq!(r.metrological_ratio, 1.0);
        assert!(!r.criterion_met);

        let r = evaluate_point(20.0, 0.01).unwrap();
        assert_relative_eq!(
            r.metrological_ratio,
            1.0 / (21.0 * 0.9801),
            max_relative = 1e-14
        );
        assert_relative_eq!(r.metrological_ratio, 0.04859, max_relative = 1e-3);
        assert_relative_eq!(r.squeezing_db, 13.13, max_relative = 1e-3);
        assert!(r.criterion_met);

        let r = evaluate_point(0.5, 0.5).unwrap();
        assert_relative_eq!(
            r.metrological_ratio,
            1.0 / (1.5 * 0.25),
            max_relative = 1e-14
        );
        assert!(!r.criterion_met);
        assert!(r.squeezing_db < 0.0);

        assert!(matches!(
            evaluate_point(1.0, 1.0),
            Err(Error::InvalidOperatingPoint(_))
        ));
    }

    #[test]
    fn optimizer_worked_example() {
        let o = optimize_photon_number(2e-3, 1e-6).unwrap();
        assert!(o.improves);
        assert_relative_eq!(o.n_p_star, 333_000.0, max_relative = 1e-12);
        assert_relative_eq!(o.eta_star, 0.333, max_relative = 1e-12);
        assert_relative_eq!(o.kappa_sq_star, 666.0, max_relative = 1e-12);
        assert_relative_eq!(
            o.best_report.metrological_ratio,
            3.37e-3,
            max_relative = 2e-3
        );
        assert_relative_eq!(o.best_report.squeezing_db, 24.72, max_relative = 1e-3);
        assert!((o.numeric_n_p / o.n_p_star - 1.0).abs() < 1e-6);
    }

    #[test]
    fn optimizer_without_gain() {
        let o = optimize_photon_number(2e-6, 1e-6).unwrap();
        assert!(!o.improves);
        assert_eq!(o.n_p_star, 0.0);
        assert_eq!(o.best_report.metrological_ratio, 1.0);
        assert!(optimize_photon_number(1.0, 0.0).is_err());
    }

    #[test]
    fn eta_star_tends_to_one_third() {
        let o = optimize_photon_number(1.0, 1e-6).unwrap();
        assert!((o.eta_star - 1.0 / 3.0).abs() < 1e-5);
    }

    #[test]
    fn golden_section_on_parabola() {
        let (x, fx) = golden_section_minimize(|x| (x - 1.25).powi(2) + 3.0, -4.0, 9.0, 1e-12, 200);
        assert!((x - 1.25).abs() < 1e-6);
        assert!((fx - 3.0).abs() < 1e-12);
    }

    #[test]
    fn xi2_unimodal_on_grid() {
        let (a, b) = (2e-3, 1e-6);
        let star = (a - 2.0 * b) / (3.0 * a * b);
        let xs: Vec<f64> = (1..2000).map(|i| i as f64 / 2000.0 / b).collect();
        let f: Vec<f64> = xs.iter().map(|&x| ln_xi2(a, b, x)).collect();
        for (w, x) in f.windows(2).zip(&xs) {
            if *x < star - 1.0 / 2000.0 / b {
                assert!(w[1] < w[0]);
            } else if *x > star {
                assert!(w[1] > w[0]);
            }
        }
    }

    #[test]
    fn exact_form_close_to_strong_lo() {
        let strong = ProbeTradeoff::new(100_000, 1e-4, 1.0, 100.0, KappaForm::StrongLo).unwrap();
        let exact = ProbeTradeoff::new(
            100_000,
            1e-4,
            1.0,
            100.0,
            KappaForm::Exact { n_reference: 1e12 },
        )
        .unwrap();
        let (s, e) = (strong.optimize().unwrap(), exact.optimize().unwrap());
        assert!(e.improves);
        assert!((s.n_p_star / e.n_p_star - 1.0).abs() < 1e-3);
        assert!(
            e.best_report.metrological_ratio >= s.best_report.metrological_ratio * (1.0 - 1e-9)
        );
    }

    #[test]
    fn tradeoff_curve_ordering() {
        let t = ProbeTradeoff::new(100_000, 1e-4, 1.0, 100.0, KappaForm::StrongLo).unwrap();
        let opt = t.optimize().unwrap();
        let mut crossings = 0;
        let mut previous: Option<bool> = None;
        for i in 1..400 {
            let p = t.point(i as f64 * 2.5e3).unwrap();
            assert!(p.conditional_variance < p.projection_variance);
            assert!(p.benchmark_variance < p.projection_variance);
            let below = p.conditional_variance < p.benchmark_variance;
            assert_eq!(below, p.report.criterion_met);
            if previous.is_some_and(|b| b != below) {
                crossings += 1;
            }
            previous = Some(below);
        }
        // The two curves meet at n_p = 0 and cross once more inside the sweep.
        let origin = t.point(0.0).unwrap();
        assert_eq!(origin.conditional_variance, origin.benchmark_variance);
        assert!(t.point(opt.n_p_star).unwrap().report.criterion_met);
        assert_eq!(crossings, 1);
    }

    #[test]
    fn detuning_invariance_examples() {
        let scan = DetuningScan::new(0.01, 1.0, 100_000);
        let same = detuning_invariance_check(&scan, 100.0, 100.0).unwrap();
        assert_eq!(same.first, same.second);
        assert!(same.invariant);

        let double = detuning_invariance_check(&scan, 100.0, 200.0).unwrap();
        assert!(double.invariant, "{double:?}");
        assert!((double.n_p_ratio - 4.0).abs() < 1e-12);
        assert!(double.xi2_relative_difference < 1e-10);

        let ten = detuning_invariance_check(&scan, 100.0, 1000.0).unwrap();
        assert!(ten.invariant);
        assert!((ten.n_p_ratio / 100.0 - 1.0).abs() < 1e-12);

        assert!(matches!(
            detuning_invariance_check(&scan, 100.0, 5.0),
            Err(Error::NotDispersive { .. })
        ));
    }

    proptest! {
        #[test]
        fn scale_invariance(
            c in 1e-3f64..1.0, gamma in 0.1f64..10.0, n in 1_000u64..1_000_000,
            delta in 100.0f64..1e4, scale in 0.5f64..20.0, eta_frac in 0.01f64..0.9
        ) {
            let scan = DetuningScan::new(c, gamma, n);
            let base = scan.at(delta).unwrap();
            let (_, b) = base.coefficients();
            let n_p = eta_frac / b;
            let scaled = scan.at(delta * scale).unwrap();
            let r1 = base.report(n_p).unwrap();
            let r2 = scaled.report(n_p * scale * scale).unwrap();
            prop_assert!((r1.kappa_squared / r2.kappa_squared - 1.0).abs() < 1e-12);
            prop_assert!((r1.eta / r2.eta - 1.0).abs() < 1e-12);
            prop_assert!((r1.metrological_ratio / r2.metrological_ratio - 1.0).abs() < 1e-12);
        }

        #[test]
        fn criterion_equivalences(k2 in 0.0f64..1e4, e in 0.0f64..0.999) {
            let r = evaluate_point(k2, e).unwrap();
            prop_assert_eq!(r.criterion_met, r.metrological_ratio < 1.0 || {
                // the two forms may disagree only at the rounding boundary
                ((1.0 + k2) * (1.0 - e) * (1.0 - e) - 1.0).abs() < 1e-12
            });
        }

        #[test]
        fn optimum_met_when_a_dominates(a in 1e-4f64..1.0, ratio in 1e-8f64..1e-3) {
            let o = optimize_photon_number(a, a * ratio).unwrap();
            prop_assert!(o.best_report.criterion_met);
            prop_assert!(o.best_report.squeezing_db > 0.0);
        }
    }
}
