//! Coherent spin state of `N` two-level atoms.
//!
//! Only the projection law `|<N/2, M | CSS>|^2 = C(N, N/2 + M) / 2^N` is
//! represented; amplitudes and phases never enter any quantity computed here.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::{Error, Result};

/// Atom number of a coherent spin state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EnsembleSpec {
    n_atoms: u64,
}

impl EnsembleSpec {
    pub fn new(n_atoms: u64) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::NoAtoms);
        }
        Ok(EnsembleSpec { n_atoms })
    }

    pub fn n_atoms(&self) -> u64 {
        self.n_atoms
    }

    /// Radius `N/2` of the Bloch sphere.
    pub fn bloch_radius(&self) -> f64 {
        self.n_atoms as f64 / 2.0
    }

    /// All Dicke projections from `-N/2` to `N/2`.
    pub fn projections(&self) -> impl Iterator<Item = DickeProjection> + '_ {
        (0..=self.n_atoms).map(move |n_up| DickeProjection {
            n_atoms: self.n_atoms,
            n_up,
        })
    }
}

/// A `J_z` eigenvalue `M` of the symmetric Dicke manifold.
///
/// Stored as the number of atoms in the upper state, `N/2 + M`, which keeps
/// half-integer projections (odd `N`) exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DickeProjection {
    n_atoms: u64,
    n_up: u64,
}

impl DickeProjection {
    pub fn from_m(spec: &EnsembleSpec, m: f64) -> Result<Self> {
        let n = spec.n_atoms;
        let invalid = Error::InvalidProjection { n_atoms: n, m };
        let up = m + n as f64 / 2.0;
        if !up.is_finite() || up < 0.0 || up > n as f64 || up.fract() != 0.0 {
            return Err(invalid);
        }
        Ok(DickeProjection {
            n_atoms: n,
            n_up: up as u64,
        })
    }

    pub fn from_up_count(spec: &EnsembleSpec, n_up: u64) -> Result<Self> {
        if n_up > spec.n_atoms {
            return Err(Error::InvalidProjection {
                n_atoms: spec.n_atoms,
                m: n_up as f64 - spec.bloch_radius(),
            });
        }
        Ok(DickeProjection {
            n_atoms: spec.n_atoms,
            n_up,
        })
    }

    /// `M`, possibly half-integer.
    pub fn m(&self) -> f64 {
        self.n_up as f64 - self.n_atoms as f64 / 2.0
    }

    pub fn n_up(&self) -> u64 {
        self.n_up
    }

    pub fn n_down(&self) -> u64 {
        self.n_atoms - self.n_up
    }

    /// `N_up - N_down = 2M`.
    pub fn population_difference(&self) -> i64 {
        self.n_up as i64 - self.n_down() as i64
    }

    pub fn n_atoms(&self) -> u64 {
        self.n_atoms
    }
}

/// `ln C(n, k)` through the log-gamma function.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    // C(n, k) = C(n, n - k) must hold bit for bit
    let k = k.min(n - k);
    let (n, k) = (n as f64, k as f64);
    libm::lgamma(n + 1.0) - libm::lgamma(k + 1.0) - libm::lgamma(n - k + 1.0)
}

/// `ln P(M)` for the coherent spin state.
pub fn ln_css_dicke_weight(spec: &EnsembleSpec, m: &DickeProjection) -> Result<f64> {
    if m.n_atoms != spec.n_atoms {
        return Err(Error::InvalidProjection {
            n_atoms: spec.n_atoms,
            m: m.m(),
        });
    }
    Ok(ln_binomial(spec.n_atoms, m.n_up) - spec.n_atoms as f64 * std::f64::consts::LN_2)
}

/// Probability `C(N, N/2 + M) / 2^N` of finding the CSS in `|N/2, M>`.
pub fn css_dicke_weight(spec: &EnsembleSpec, m: &DickeProjection) -> Result<f64> {
    ln_css_dicke_weight(spec, m).map(f64::exp)
}

/// Analytic projection-noise moments of the CSS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CssMoments {
    pub mean_m: f64,
    pub var_m: f64,
    pub var_population_difference: f64,
    pub mean_population_up: f64,
    pub var_population_up: f64,
}

pub fn css_moments(spec: &EnsembleSpec) -> CssMoments {
    let n = spec.n_atoms as f64;
    CssMoments {
        mean_m: 0.0,
        var_m: n / 4.0,
        var_population_difference: n,
        mean_population_up: n / 2.0,
        var_population_up: n / 4.0,
    }
}

/// Draws `M` from the CSS projection law, `M = B - N/2` with `B ~ Bin(N, 1/2)`.
pub fn sample_dicke<R: Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> DickeProjection {
    let n_up = Binomial::new(spec.n_atoms, 0.5)
        .expect("p = 1/2 is a valid binomial parameter")
        .sample(rng);
    DickeProjection {
        n_atoms: spec.n_atoms,
        n_up,
    }
}
