//! Conditional post-measurement spectrum, entanglement, increase ratio,
//! success probability and efficiency.
//!
//! Conditioning on outcome `x` leaves side `B` in a state that is diagonal in
//! the photon-number basis. All `d_N` eigenvalues inside block `N` are equal,
//! so a spectrum is stored as one weight per block plus its multiplicity.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fock::{SqueezedEnsemble, TruncationPolicy};
use crate::meter::{Beta, DensityPath, GridSpec, MeterModel, OutcomeDistribution, OutcomeGrid};
use crate::quadrature::{self, CompensatedSum, LegendreRule};

/// Weights below this are treated as exact zeros in the entropy.
const NEGLIGIBLE_WEIGHT: f64 = 1e-300;

/// Success-set boundaries are bisected to this width.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Eigenvalue structure of the reduced `B`-side state after outcome `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalSpectrum {
    outcome: f64,
    weights: Vec<f64>,
    ln_weights: Vec<f64>,
    multiplicities: Vec<f64>,
}

impl ConditionalSpectrum {
    /// Spectrum with block weights `shape_N * e^{offset_N}`, normalised so
    /// that `sum_N d_N w_N = 1`. Identical offsets give bit-identical results
    /// whatever their common value.
    fn from_offsets(outcome: f64, ln_shapes: &[f64], multiplicities: &[f64], offsets: &[f64]) -> Self {
        let ln_terms: Vec<f64> = ln_shapes
            .iter()
            .zip(offsets)
            .zip(multiplicities)
            .map(|((&ls, &off), &d)| d.ln() + ls + off)
            .collect();
        let ln_norm = log_sum_exp(&ln_terms);
        let ln_weights: Vec<f64> = ln_shapes
            .iter()
            .zip(offsets)
            .map(|(&ls, &off)| ls + off - ln_norm)
            .collect();
        let weights = ln_weights.iter().map(|l| l.exp()).collect();
        Self {
            outcome,
            weights,
            ln_weights,
            multiplicities: multiplicities.to_vec(),
        }
    }

    pub fn outcome(&self) -> f64 {
        self.outcome
    }

    /// Common eigenvalue `w_N` of block `N`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn multiplicities(&self) -> &[f64] {
        &self.multiplicities
    }

    /// `sum_N d_N w_N`.
    pub fn normalization(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.multiplicities)
            .map(|(w, d)| w * d)
            .collect::<CompensatedSum>()
            .value()
    }

    /// All eigenvalues, each block weight repeated `d_N` times.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.multiplicities)
            .flat_map(|(&w, &d)| std::iter::repeat_n(w, d as usize))
            .collect()
    }

    /// Von Neumann entropy in bits.
    pub fn entropy(&self) -> f64 {
        let s: CompensatedSum = self
            .weights
            .iter()
            .zip(&self.ln_weights)
            .zip(&self.multiplicities)
            .filter(|((&w, _), _)| w >= NEGLIGIBLE_WEIGHT)
            .map(|((&w, &lw), &d)| -d * w * lw)
            .collect();
        (s.value() / std::f64::consts::LN_2).max(0.0)
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Entanglement `p [cosh^2 r log2 cosh^2 r - sinh^2 r log2 sinh^2 r]` of the
/// unmeasured ensemble.
pub fn initial_entanglement(ensemble: &SqueezedEnsemble) -> f64 {
    let c2 = ensemble.r().cosh().powi(2);
    let s2 = ensemble.r().sinh().powi(2);
    let xlog = |v: f64| if v > 0.0 { v * v.log2() } else { 0.0 };
    ensemble.pairs() as f64 * (xlog(c2) - xlog(s2))
}

/// Region `{x : Gamma(x) > epsilon}` with its outcome mass.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessRegion {
    pub epsilon: f64,
    /// Disjoint accepted intervals in increasing order.
    pub intervals: Vec<(f64, f64)>,
    /// `P_S = int P dx` over the accepted set.
    pub probability: f64,
    /// `int Gamma P dx` over the accepted set.
    pub gamma_mass: f64,
}

impl SuccessRegion {
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Success-weighted mean ratio `Upsilon`; `None` for an empty set.
    pub fn upsilon(&self) -> Option<f64> {
        (!self.is_empty() && self.probability > 0.0).then(|| self.gamma_mass / self.probability)
    }

    /// Efficiency `1 - 1 / Upsilon`.
    pub fn xi(&self) -> Option<f64> {
        self.upsilon().map(|u| 1.0 - 1.0 / u)
    }
}

/// A squeezed ensemble measured by a given meter.
#[derive(Debug, Clone)]
pub struct Purification {
    dist: OutcomeDistribution,
    reference_entropy: f64,
}

impl Purification {
    pub fn new(ensemble: &SqueezedEnsemble, model: &MeterModel, policy: &TruncationPolicy) -> Result<Self> {
        Self::with_path(ensemble, model, policy, DensityPath::Gaussian)
    }

    pub fn with_path(
        ensemble: &SqueezedEnsemble,
        model: &MeterModel,
        policy: &TruncationPolicy,
        path: DensityPath,
    ) -> Result<Self> {
        let dist = OutcomeDistribution::new(ensemble, model, policy, path)?;
        let zeros = vec![0.0; dist.n_max() + 1];
        let reference_entropy =
            ConditionalSpectrum::from_offsets(f64::NAN, dist.ln_shapes(), dist.multiplicities(), &zeros).entropy();
        Ok(Self {
            dist,
            reference_entropy,
        })
    }

    pub fn distribution(&self) -> &OutcomeDistribution {
        &self.dist
    }

    /// Entropy of the truncated prior spectrum. Agrees with
    /// [`initial_entanglement`] up to the truncation tail, and is the
    /// denominator of `Gamma` so that an uninformative meter gives exactly 1.
    pub fn reference_entanglement(&self) -> f64 {
        self.reference_entropy
    }

    fn spectrum_and_density(&self, x: f64) -> Result<(ConditionalSpectrum, f64)> {
        if !x.is_finite() {
            return Err(invalid("x", format!("outcome must be finite, got {x}")));
        }
        let n_blocks = self.dist.n_max() + 1;
        let ln_f: Vec<f64> = (0..n_blocks).map(|n| self.dist.ln_pointer(n, x)).collect();
        let ln_p_terms: Vec<f64> = (0..n_blocks)
            .map(|n| self.dist.multiplicities()[n].ln() + self.dist.ln_shapes()[n] + ln_f[n])
            .collect();
        let ln_p = log_sum_exp(&ln_p_terms);
        if !(ln_p >= f64::MIN_POSITIVE.ln()) {
            return Err(Error::DegenerateOutcome { x });
        }
        let offsets: Vec<f64> = ln_f.iter().map(|&l| l - ln_f[0]).collect();
        let spectrum =
            ConditionalSpectrum::from_offsets(x, self.dist.ln_shapes(), self.dist.multiplicities(), &offsets);
        Ok((spectrum, ln_p.exp()))
    }

    pub fn conditional_spectrum(&self, x: f64) -> Result<ConditionalSpectrum> {
        self.spectrum_and_density(x).map(|(s, _)| s)
    }

    /// Conditional entanglement `E(x)` in ebits.
    pub fn entanglement(&self, x: f64) -> Result<f64> {
        Ok(self.conditional_spectrum(x)?.entropy())
    }

    /// Entanglement increase ratio `Gamma(x) = E(x) / E_0`.
    pub fn gamma(&self, x: f64) -> Result<f64> {
        if self.reference_entropy <= 0.0 {
            return Err(Error::ZeroInitialEntanglement);
        }
        Ok(self.entanglement(x)? / self.reference_entropy)
    }

    fn density_and_gamma(&self, x: f64) -> Result<(f64, f64)> {
        let (s, p) = self.spectrum_and_density(x)?;
        Ok((p, s.entropy() / self.reference_entropy))
    }

    /// Accepted region `Gamma > epsilon` located by a sign scan over the
    /// grid nodes followed by bisection, then integrated panel by panel.
    pub fn success_region(&self, epsilon: f64, grid: &OutcomeGrid) -> Result<SuccessRegion> {
        if !(epsilon >= 1.0) {
            return Err(invalid("epsilon", format!("threshold must be >= 1, got {epsilon}")));
        }
        if self.reference_entropy <= 0.0 {
            return Err(Error::ZeroInitialEntanglement);
        }
        let accepted = |x: f64| -> Result<bool> { Ok(self.gamma(x)? > epsilon) };

        let (lo, hi) = grid.bounds();
        let mut samples = Vec::with_capacity(grid.len() + 2);
        samples.push(lo);
        samples.extend_from_slice(grid.nodes());
        samples.push(hi);
        let flags = samples.iter().map(|&x| accepted(x)).collect::<Result<Vec<bool>>>()?;

        let mut intervals = Vec::new();
        let mut start = flags[0].then_some(lo);
        for k in 1..samples.len() {
            if flags[k] == flags[k - 1] {
                continue;
            }
            let edge = self.bisect(samples[k - 1], samples[k], flags[k - 1], &accepted)?;
            match start.take() {
                Some(a) => intervals.push((a, edge)),
                None => start = Some(edge),
            }
        }
        if let Some(a) = start {
            intervals.push((a, hi));
        }

        let rule = LegendreRule::new(crate::meter::DEFAULT_NODES_PER_PANEL);
        let mut probability = CompensatedSum::default();
        let mut gamma_mass = CompensatedSum::default();
        for &(a, b) in &intervals {
            let mut failure = None;
            let edges = quadrature::panel_edges(a, b, grid.panel_width());
            for w in edges.windows(2) {
                for (x, wt) in rule.mapped(w[0], w[1]) {
                    match self.density_and_gamma(x) {
                        Ok((p, g)) => {
                            probability.add(wt * p);
                            gamma_mass.add(wt * g * p);
                        }
                        Err(e) => failure = Some(e),
                    }
                }
            }
            if let Some(e) = failure {
                return Err(e);
            }
        }
        Ok(SuccessRegion {
            epsilon,
            intervals,
            probability: probability.value(),
            gamma_mass: gamma_mass.value(),
        })
    }

    fn bisect<F>(&self, mut a: f64, mut b: f64, flag_a: bool, accepted: &F) -> Result<f64>
    where
        F: Fn(f64) -> Result<bool>,
    {
        while b - a > BOUNDARY_TOL {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if accepted(mid)? == flag_a {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    }
}

pub fn conditional_spectrum(
    ensemble: &SqueezedEnsemble,
    model: &MeterModel,
    policy: &TruncationPolicy,
    x: f64,
) -> Result<ConditionalSpectrum> {
    Purification::new(ensemble, model, policy)?.conditional_spectrum(x)
}

pub fn entanglement(ensemble: &SqueezedEnsemble, model: &MeterModel, policy: &TruncationPolicy, x: f64) -> Result<f64> {
    Purification::new(ensemble, model, policy)?.entanglement(x)
}

pub fn gamma_ratio(ensemble: &SqueezedEnsemble, model: &MeterModel, policy: &TruncationPolicy, x: f64) -> Result<f64> {
    Purification::new(ensemble, model, policy)?.gamma(x)
}

pub fn success_probability(
    ensemble: &SqueezedEnsemble,
    model: &MeterModel,
    policy: &TruncationPolicy,
    epsilon: f64,
    grid: &OutcomeGrid,
) -> Result<f64> {
    Ok(Purification::new(ensemble, model, policy)?
        .success_region(epsilon, grid)?
        .probability)
}

/// `(Upsilon, Xi)`, or `None` when no outcome passes the threshold.
pub fn efficiency(
    ensemble: &SqueezedEnsemble,
    model: &MeterModel,
    policy: &TruncationPolicy,
    epsilon: f64,
    grid: &OutcomeGrid,
) -> Result<Option<(f64, f64)>> {
    let region = Purification::new(ensemble, model, policy)?.success_region(epsilon, grid)?;
    Ok(region.upsilon().zip(region.xi()))
}

/// One row of a coupling sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub kappa: f64,
    /// `NaN` when the point failed.
    pub success_prob: f64,
    pub upsilon: Option<f64>,
    pub xi: Option<f64>,
    pub error: Option<String>,
}

impl SweepResult {
    /// Whether `Upsilon` and `Xi` exist (non-empty success set).
    pub fn defined(&self) -> bool {
        self.upsilon.is_some()
    }
}

fn sweep_point(
    ensemble: &SqueezedEnsemble,
    beta: Beta,
    epsilon: f64,
    kappa: f64,
    policy: &TruncationPolicy,
    grid: &GridSpec,
) -> Result<SuccessRegion> {
    let model = MeterModel::new(kappa, beta)?;
    let purifier = Purification::new(ensemble, &model, policy)?;
    let grid = purifier.distribution().grid(grid)?;
    purifier.success_region(epsilon, &grid)
}

/// Success probability and efficiency for each coupling, in input order.
pub fn sweep_kappa(
    ensemble: &SqueezedEnsemble,
    beta: Beta,
    epsilon: f64,
    kappas: &[f64],
    policy: &TruncationPolicy,
    grid: &GridSpec,
) -> Result<Vec<SweepResult>> {
    if kappas.is_empty() {
        return Err(invalid("kappa", "sweep needs at least one coupling value"));
    }
    Ok(kappas
        .par_iter()
        .map(
            |&kappa| match sweep_point(ensemble, beta, epsilon, kappa, policy, grid) {
                Ok(region) => SweepResult {
                    kappa,
                    success_prob: region.probability,
                    upsilon: region.upsilon(),
                    xi: region.xi(),
                    error: None,
                },
                Err(e) => SweepResult {
                    kappa,
                    success_prob: f64::NAN,
                    upsilon: None,
                    xi: None,
                    error: Some(e.to_string()),
                },
            },
        )
        .collect())
}
