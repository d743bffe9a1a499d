//! Multi-pair two-mode squeezed priors and their total-photon-number
//! statistics.
//!
//! Every quantity downstream depends on the per-mode photon numbers only
//! through the total `N` on side `A`, so the state space is indexed by `N`
//! and each block carries a multiplicity instead of being enumerated.

use crate::error::{invalid, Error, Result};

/// `p` independent copies of a two-mode squeezed vacuum with squeezing `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezedEnsemble {
    r: f64,
    lambda: f64,
    pairs: usize,
}

impl SqueezedEnsemble {
    pub fn new(r: f64, pairs: usize) -> Result<Self> {
        let lambda = lambda_from_r(r)?;
        if pairs == 0 {
            return Err(invalid("pairs", "at least one entangled pair is required"));
        }
        Ok(Self { r, lambda, pairs })
    }

    /// The two-pair ensemble used throughout the reference figures.
    pub fn two_pairs(r: f64) -> Result<Self> {
        Self::new(r, 2)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// `tanh(r)`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    /// Amplitude `sqrt(1 - lambda^2) lambda^n` of `|n>|n>` in one pair.
    pub fn pair_amplitude(&self, n: usize) -> f64 {
        (1.0 - self.lambda * self.lambda).sqrt() * self.lambda.powi(n as i32)
    }

    /// Probability of a single `p`-tuple of photon numbers with total `n`:
    /// `(1 - lambda^2)^p lambda^(2n)`. This is also every eigenvalue of the
    /// unmeasured reduced state inside block `n`.
    pub fn prior_shape(&self, n: usize) -> f64 {
        let l2 = self.lambda * self.lambda;
        (1.0 - l2).powi(self.pairs as i32) * l2.powi(n as i32)
    }

    /// `ln` of [`prior_shape`](Self::prior_shape), finite for `lambda = 0` only at `n = 0`.
    pub fn ln_prior_shape(&self, n: usize) -> f64 {
        let l2 = self.lambda * self.lambda;
        let base = self.pairs as f64 * (-l2).ln_1p();
        if n == 0 {
            base
        } else {
            base + n as f64 * l2.ln()
        }
    }

    /// Probability that side `A` holds `n` photons in total.
    pub fn total_number_prior(&self, n: usize) -> f64 {
        block_multiplicity(self.pairs, n) as f64 * self.prior_shape(n)
    }

    /// `<N> = p lambda^2 / (1 - lambda^2)`.
    pub fn mean_total_number(&self) -> f64 {
        let l2 = self.lambda * self.lambda;
        self.pairs as f64 * l2 / (1.0 - l2)
    }
}

/// `tanh(r)` for a nonnegative squeezing parameter.
pub fn lambda_from_r(r: f64) -> Result<f64> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(invalid("r", format!("squeezing must be finite and >= 0, got {r}")));
    }
    Ok(r.tanh())
}

/// Number of ways to write `n` as an ordered sum of `pairs` nonnegative
/// integers, `C(n + pairs - 1, pairs - 1)`.
pub fn block_multiplicity(pairs: usize, n: usize) -> u64 {
    assert!(pairs >= 1, "block multiplicity needs at least one pair");
    let mut c: u128 = 1;
    for i in 1..pairs as u128 {
        c = c * (n as u128 + i) / i;
    }
    u64::try_from(c).expect("block multiplicity overflows u64")
}

/// Smallest `n_max` whose prior tail `sum_{N > n_max} P(N)` is below `tail_tol`.
pub fn choose_cutoff(ensemble: &SqueezedEnsemble, tail_tol: f64) -> Result<usize> {
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(invalid("tail_tol", format!("must lie in (0, 1), got {tail_tol}")));
    }
    let l2 = ensemble.lambda * ensemble.lambda;
    if !(ensemble.lambda < 1.0) {
        return Err(Error::CutoffDiverges(ensemble.lambda));
    }
    if l2 == 0.0 {
        return Ok(0);
    }
    let p = ensemble.pairs as f64;

    // Generate P(N) by the exact ratio recurrence until the remainder is
    // bounded by a geometric series far below the tolerance.
    const MAX_TERMS: usize = 50_000_000;
    let mut terms = vec![(1.0 - l2).powf(p)];
    let remainder = loop {
        let n = terms.len() - 1;
        let ratio = l2 * (n as f64 + p) / (n as f64 + 1.0);
        let next = terms[n] * ratio;
        terms.push(next);
        let next_ratio = l2 * (n as f64 + 1.0 + p) / (n as f64 + 2.0);
        if next_ratio < 1.0 {
            let bound = next * next_ratio / (1.0 - next_ratio);
            if bound < tail_tol * 1e-6 || next == 0.0 {
                break bound;
            }
        }
        if terms.len() > MAX_TERMS {
            return Err(Error::CutoffDiverges(ensemble.lambda));
        }
    };

    let mut tail = remainder;
    let mut n_max = terms.len() - 1;
    // Walk down while the tail above n_max - 1 is still below tolerance.
    while n_max > 0 {
        let candidate = tail + terms[n_max];
        if candidate < tail_tol {
            tail = candidate;
            n_max -= 1;
        } else {
            break;
        }
    }
    Ok(n_max)
}

/// Truncation settings shared by the meter, protocol and dynamics modules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    /// Permitted prior mass above the signal cutoff.
    pub tail_tol: f64,
    /// Permitted truncation error of the thermal Hermite series.
    pub series_tol: f64,
    /// Fixed signal cutoff; chosen from `tail_tol` when `None`.
    pub n_max: Option<usize>,
    /// Fixed meter Fock cutoff for dynamics; chosen automatically when `None`.
    pub meter_cut: Option<usize>,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            tail_tol: 1e-13,
            series_tol: 1e-15,
            n_max: None,
            meter_cut: None,
        }
    }
}

impl TruncationPolicy {
    pub fn with_n_max(n_max: usize) -> Self {
        Self {
            n_max: Some(n_max),
            ..Self::default()
        }
    }

    pub fn resolve_n_max(&self, ensemble: &SqueezedEnsemble) -> Result<usize> {
        match self.n_max {
            Some(n) => Ok(n),
            None => choose_cutoff(ensemble, self.tail_tol),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lambda_values() {
        assert_eq!(lambda_from_r(0.0).unwrap(), 0.0);
        assert_relative_eq!(lambda_from_r(0.4).unwrap(), 0.379948962255225, epsilon = 1e-14);
        assert_relative_eq!(lambda_from_r(0.3).unwrap(), 0.291312612451591, epsilon = 1e-14);
        assert!(lambda_from_r(-0.1).is_err());
        assert!(lambda_from_r(f64::NAN).is_err());
    }

    #[test]
    fn amplitudes() {
        let vac = SqueezedEnsemble::two_pairs(0.0).unwrap();
        assert_eq!(vac.pair_amplitude(0), 1.0);
        assert_eq!(vac.pair_amplitude(3), 0.0);
        let e = SqueezedEnsemble::two_pairs(0.4).unwrap();
        assert_relative_eq!(e.pair_amplitude(1), 0.351455621429941, epsilon = 1e-13);
        let total: f64 = (0..200).map(|n| e.pair_amplitude(n).powi(2)).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn priors_at_reference_squeezing() {
        let e = SqueezedEnsemble::two_pairs(0.4).unwrap();
        assert_relative_eq!(e.total_number_prior(0), 0.732117732246471, epsilon = 1e-13);
        assert_relative_eq!(e.total_number_prior(1), 0.211378809117192, epsilon = 1e-13);
        assert_relative_eq!(e.total_number_prior(2), 0.045772352221309, epsilon = 1e-13);
    }

    #[test]
    fn multiplicities() {
        assert_eq!(block_multiplicity(2, 3), 4);
        assert_eq!(block_multiplicity(1, 17), 1);
        assert_eq!(block_multiplicity(3, 2), 6);
        assert_eq!(block_multiplicity(4, 0), 1);
    }

    #[test]
    fn cutoff_values() {
        let vac = SqueezedEnsemble::two_pairs(0.0).unwrap();
        assert_eq!(choose_cutoff(&vac, 1e-3).unwrap(), 0);
        // Tails summed at 30 digits: 13 for r = 0.4, 10 for r = 0.3.
        let e4 = SqueezedEnsemble::two_pairs(0.4).unwrap();
        let e3 = SqueezedEnsemble::two_pairs(0.3).unwrap();
        assert_eq!(choose_cutoff(&e4, 1e-10).unwrap(), 13);
        assert_eq!(choose_cutoff(&e3, 1e-10).unwrap(), 10);
        assert!(choose_cutoff(&e3, 0.0).is_err());
        assert!(choose_cutoff(&e3, 1.0).is_err());
    }

    #[test]
    fn saturated_squeezing_cannot_converge() {
        let e = SqueezedEnsemble::two_pairs(40.0).unwrap();
        assert_eq!(e.lambda(), 1.0);
        assert!(matches!(choose_cutoff(&e, 1e-10), Err(Error::CutoffDiverges(_))));
    }

    #[test]
    fn zero_pairs_rejected() {
        assert!(SqueezedEnsemble::new(0.3, 0).is_err());
    }
}
