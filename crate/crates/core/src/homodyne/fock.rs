//! Truncated two-mode Fock-space evaluation of the homodyne difference
//! operator `I = i (a_p^dag a_r - a_r^dag a_p)`.
//!
//! Independent of the closed forms in the parent module: the coherent states
//! are expanded in number states, the mode operators act on the product
//! basis directly, and the moments are inner products.

use num_complex::Complex64;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockMoments {
    pub mean: f64,
    pub second_moment: f64,
    /// Probability mass of the product state lost to truncation, `1 - ||psi||^2`
    /// before renormalization.
    pub truncation_error: f64,
}

/// Fock amplitudes `e^{-|a|^2/2} a^n / sqrt(n!)` for `n < dim`, evaluated in
/// log-magnitude with a separate phase so large `n` does not underflow.
fn coherent_amplitudes(alpha: Complex64, dim: usize) -> Vec<Complex64> {
    let r = alpha.norm();
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    if r == 0.0 {
        out[0] = Complex64::new(1.0, 0.0);
        return out;
    }
    let (ln_r, theta) = (r.ln(), alpha.arg());
    let mut ln_fact = 0.0;
    for (n, c) in out.iter_mut().enumerate() {
        if n > 0 {
            ln_fact += (n as f64).ln();
        }
        let ln_mag = -0.5 * r * r + n as f64 * ln_r - 0.5 * ln_fact;
        *c = Complex64::from_polar(ln_mag.exp(), n as f64 * theta);
    }
    out
}

/// Product state indexed `[reference][probe]`, flattened row-major.
struct TwoMode {
    dim: usize,
    amps: Vec<Complex64>,
}

impl TwoMode {
    fn product(reference: &[Complex64], probe: &[Complex64]) -> Self {
        let dim = reference.len();
        let mut amps = Vec::with_capacity(dim * dim);
        for r in reference {
            for p in probe {
                amps.push(r * p);
            }
        }
        TwoMode { dim, amps }
    }

    fn at(&self, r: usize, p: usize) -> Complex64 {
        self.amps[r * self.dim + p]
    }

    /// `a_p^dag a_r`: |r, p> -> sqrt(r) sqrt(p + 1) |r - 1, p + 1>.
    fn probe_up_reference_down(&self) -> Vec<Complex64> {
        let d = self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); d * d];
        for r in 1..d {
            for p in 0..d - 1 {
                let coeff = ((r * (p + 1)) as f64).sqrt();
                out[(r - 1) * d + p + 1] += coeff * self.at(r, p);
            }
        }
        out
    }

    /// `a_r^dag a_p`: |r, p> -> sqrt(r + 1) sqrt(p) |r + 1, p - 1>.
    fn reference_up_probe_down(&self) -> Vec<Complex64> {
        let d = self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); d * d];
        for r in 0..d - 1 {
            for p in 1..d {
                let coeff = (((r + 1) * p) as f64).sqrt();
                out[(r + 1) * d + p - 1] += coeff * self.at(r, p);
            }
        }
        out
    }
}

/// Mean and second moment of the homodyne difference operator for coherent
/// reference and probe amplitudes, in a Fock space truncated at `dimension`
/// levels per mode.
///
/// The state is renormalized after truncation; the lost norm is reported in
/// [`FockMoments::truncation_error`]. A dimension below
/// `10 (max |alpha|^2 + 1)` still runs but the error estimate should be checked.
pub fn fock_oracle_moments(
    alpha_reference: Complex64,
    alpha_probe: Complex64,
    dimension: usize,
) -> Result<FockMoments> {
    if dimension < 2 {
        return Err(Error::domain(
            "dimension",
            dimension as f64,
            "need at least two Fock levels per mode",
        ));
    }
    if !(alpha_reference.is_finite() && alpha_probe.is_finite()) {
        return Err(Error::domain(
            "alpha",
            f64::NAN,
            "amplitudes must be finite",
        ));
    }
    let reference = coherent_amplitudes(alpha_reference, dimension);
    let probe = coherent_amplitudes(alpha_probe, dimension);
    let mut psi = TwoMode::product(&reference, &probe);

    let norm_sq: f64 = psi.amps.iter().map(|c| c.norm_sqr()).sum();
    let scale = norm_sq.sqrt().recip();
    psi.amps.iter_mut().for_each(|c| *c *= scale);

    let raise_p = psi.probe_up_reference_down();
    let raise_r = psi.reference_up_probe_down();
    let i = Complex64::new(0.0, 1.0);
    let applied: Vec<Complex64> = raise_p
        .iter()
        .zip(&raise_r)
        .map(|(a, b)| i * (a - b))
        .collect();

    let mean = psi
        .amps
        .iter()
        .zip(&applied)
        .map(|(s, v)| s.conj() * v)
        .sum::<Complex64>()
        .re;
    // I is Hermitian on the truncated space, so <I^2> = ||I psi||^2.
    let second_moment = applied.iter().map(|v| v.norm_sqr()).sum();

    Ok(FockMoments {
        mean,
        second_moment,
        truncation_error: (1.0 - norm_sq).max(0.0),
    })
}
