//! Pointer-state position densities of the displaced thermal meter and the
//! total outcome distribution `P(x)`.
//!
//! A signal block with `N` photons on side `A` leaves the meter in a thermal
//! state displaced to position mean `-sqrt(2) kappa N`. Its position density
//! is evaluated two ways: as the thermal mixture of squared oscillator
//! eigenfunctions (the Hermite series) and in closed form as a Gaussian with
//! variance `coth(beta / 2) / 2`. The Gaussian is the default path.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::fock::{block_multiplicity, SqueezedEnsemble, TruncationPolicy};
use crate::quadrature::LegendreRule;

/// Upper bound on `psi_n(y)^2` over all `n` and `y` (Cramér's inequality).
const EIGENFUNCTION_SQ_BOUND: f64 = 0.666;

const RESCALE_AT: f64 = 1e150;

/// Inverse meter temperature in units of the meter quantum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta {
    Finite(f64),
    /// Zero temperature: the meter relaxes to displaced vacuum.
    Infinite,
}

impl Beta {
    pub fn new(beta: f64) -> Result<Self> {
        if beta.is_nan() || beta <= 0.0 {
            return Err(invalid("beta", format!("must be > 0 or inf, got {beta}")));
        }
        Ok(if beta.is_infinite() {
            Beta::Infinite
        } else {
            Beta::Finite(beta)
        })
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Beta::Infinite)
    }

    pub fn value(&self) -> f64 {
        match *self {
            Beta::Finite(b) => b,
            Beta::Infinite => f64::INFINITY,
        }
    }

    /// `e^{-beta}`.
    pub fn boltzmann_factor(&self) -> f64 {
        match *self {
            Beta::Finite(b) => (-b).exp(),
            Beta::Infinite => 0.0,
        }
    }

    /// Mean thermal occupation `1 / (e^beta - 1)`.
    pub fn mean_occupation(&self) -> f64 {
        match *self {
            Beta::Finite(b) => 1.0 / b.exp_m1(),
            Beta::Infinite => 0.0,
        }
    }

    /// Position-quadrature variance of the thermal state, `coth(beta / 2) / 2`.
    pub fn quadrature_variance(&self) -> f64 {
        match *self {
            Beta::Finite(b) => 0.5 / (0.5 * b).tanh(),
            Beta::Infinite => 0.5,
        }
    }
}

impl FromStr for Beta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(Beta::Infinite);
        }
        let v: f64 = t
            .parse()
            .map_err(|_| invalid("beta", format!("expected a positive number or `inf`, got `{s}`")))?;
        if v.is_infinite() {
            return Err(invalid("beta", "use the `inf` token for zero temperature"));
        }
        Beta::new(v)
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta::Finite(b) => write!(f, "{b}"),
            Beta::Infinite => f.write_str("inf"),
        }
    }
}

/// Coupling ratio `kappa = g / Omega` and meter temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeterModel {
    kappa: f64,
    beta: Beta,
}

impl MeterModel {
    pub fn new(kappa: f64, beta: Beta) -> Result<Self> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(invalid("kappa", format!("must be finite and >= 0, got {kappa}")));
        }
        Ok(Self { kappa, beta })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn beta(&self) -> Beta {
        self.beta
    }

    /// Shift `sqrt(2) kappa N` between the block-`N` pointer and the origin.
    pub fn displacement(&self, n: usize) -> f64 {
        SQRT_2 * self.kappa * n as f64
    }

    /// Standard deviation of every pointer density.
    pub fn pointer_sigma(&self) -> f64 {
        self.beta.quadrature_variance().sqrt()
    }
}

/// Which evaluation of the pointer density to use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityPath {
    Gaussian,
    /// Thermal Hermite series truncated at the given absolute tolerance.
    HermiteSeries {
        tol: f64,
    },
}

/// Unit-normalised oscillator eigenfunction `psi_n(y)` as `mantissa * e^{scale}`.
///
/// The three-term recurrence runs on `psi_n` itself; the mantissa is rescaled
/// whenever it grows past `RESCALE_AT` so neither overflow nor the Gaussian
/// underflow of `psi_0` at large `|y|` can occur.
struct EigenfunctionRecurrence {
    y: f64,
    n: usize,
    prev: f64,
    cur: f64,
    scale: f64,
}

impl EigenfunctionRecurrence {
    fn new(y: f64) -> Self {
        Self {
            y,
            n: 0,
            prev: 0.0,
            cur: 1.0,
            scale: -0.5 * y * y - 0.25 * PI.ln(),
        }
    }

    /// Advance to `n + 1`. Returns the rescale applied to the mantissa (1 if none).
    fn step(&mut self) -> f64 {
        let n = self.n as f64;
        let next = (2.0 / (n + 1.0)).sqrt() * self.y * self.cur - (n / (n + 1.0)).sqrt() * self.prev;
        self.prev = self.cur;
        self.cur = next;
        self.n += 1;
        if self.cur.abs() > RESCALE_AT {
            self.cur /= RESCALE_AT;
            self.prev /= RESCALE_AT;
            self.scale += RESCALE_AT.ln();
            RESCALE_AT
        } else {
            1.0
        }
    }
}

/// `psi_n(y)^2` for the unit-normalised harmonic-oscillator eigenfunction.
pub fn oscillator_eigenfunction_sq(n: usize, y: f64) -> f64 {
    let mut rec = EigenfunctionRecurrence::new(y);
    for _ in 0..n {
        rec.step();
    }
    (rec.cur * rec.cur) * (2.0 * rec.scale).exp()
}

/// `ln` of the thermal mixture `(1 - q) sum_n q^n psi_n(y)^2`, `q = e^{-beta}`,
/// stopped once the bound `0.666 q^{n+1}` on the remaining terms is below `tol`.
fn ln_thermal_series(beta: Beta, y: f64, tol: f64) -> f64 {
    let mut rec = EigenfunctionRecurrence::new(y);
    let q = beta.boltzmann_factor();
    // Sum carried in units of e^{2 scale}.
    let mut acc = rec.cur * rec.cur;
    let mut weight = 1.0;
    while q > 0.0 && EIGENFUNCTION_SQ_BOUND * weight * q > tol {
        let rescale = rec.step();
        if rescale != 1.0 {
            acc /= rescale * rescale;
        }
        weight *= q;
        acc += weight * rec.cur * rec.cur;
    }
    (-q).ln_1p() + acc.ln() + 2.0 * rec.scale
}

fn ln_gaussian(variance: f64, y: f64) -> f64 {
    -0.5 * y * y / variance - 0.5 * (2.0 * PI * variance).ln()
}

/// Pointer density of block `n` at outcome `x`, by the Hermite series.
pub fn pointer_density_series(model: &MeterModel, n: usize, x: f64, series_tol: f64) -> f64 {
    ln_thermal_series(model.beta, x + model.displacement(n), series_tol).exp()
}

/// Pointer density of block `n` at outcome `x`, in closed form.
pub fn pointer_density_gaussian(model: &MeterModel, n: usize, x: f64) -> f64 {
    ln_gaussian(model.beta.quadrature_variance(), x + model.displacement(n)).exp()
}

/// `ln` of the pointer density along the chosen path.
pub fn ln_pointer_density(model: &MeterModel, n: usize, x: f64, path: DensityPath) -> f64 {
    let y = x + model.displacement(n);
    match path {
        DensityPath::Gaussian => ln_gaussian(model.beta.quadrature_variance(), y),
        DensityPath::HermiteSeries { tol } => ln_thermal_series(model.beta, y, tol),
    }
}

pub fn pointer_density(model: &MeterModel, n: usize, x: f64, path: DensityPath) -> f64 {
    ln_pointer_density(model, n, x, path).exp()
}

/// Quadrature scheme behind an [`OutcomeGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridRule {
    CompositeGaussLegendre { nodes_per_panel: usize },
}

/// Optional overrides of the default outcome grid.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GridSpec {
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub panel_width: Option<f64>,
}

/// Quadrature nodes and weights over `[x_lo, x_hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeGrid {
    x_lo: f64,
    x_hi: f64,
    panel_width: f64,
    rule: GridRule,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

pub const DEFAULT_NODES_PER_PANEL: usize = 16;

impl OutcomeGrid {
    pub fn composite_gauss_legendre(x_lo: f64, x_hi: f64, panel_width: f64, nodes_per_panel: usize) -> Result<Self> {
        if !(x_lo < x_hi) || !x_lo.is_finite() || !x_hi.is_finite() {
            return Err(invalid(
                "grid",
                format!("need finite x_lo < x_hi, got [{x_lo}, {x_hi}]"),
            ));
        }
        if !(panel_width > 0.0) || !panel_width.is_finite() {
            return Err(invalid("x_step", format!("panel width must be > 0, got {panel_width}")));
        }
        if nodes_per_panel < 2 {
            return Err(invalid("grid", "at least two nodes per panel are required"));
        }
        let rule = LegendreRule::new(nodes_per_panel);
        let edges = crate::quadrature::panel_edges(x_lo, x_hi, panel_width);
        let (nodes, weights) = edges
            .windows(2)
            .flat_map(|w| rule.mapped(w[0], w[1]).collect::<Vec<_>>())
            .unzip();
        Ok(Self {
            x_lo,
            x_hi,
            panel_width,
            rule: GridRule::CompositeGaussLegendre { nodes_per_panel },
            nodes,
            weights,
        })
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.x_lo, self.x_hi)
    }

    pub fn panel_width(&self) -> f64 {
        self.panel_width
    }

    pub fn rule(&self) -> GridRule {
        self.rule
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// `P(x) = sum_N prior(N) * pointer_density(N, x)` over `N <= n_max`.
#[derive(Debug, Clone)]
pub struct OutcomeDistribution {
    ensemble: SqueezedEnsemble,
    model: MeterModel,
    path: DensityPath,
    n_max: usize,
    ln_shapes: Vec<f64>,
    multiplicities: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn new(
        ensemble: &SqueezedEnsemble,
        model: &MeterModel,
        policy: &TruncationPolicy,
        path: DensityPath,
    ) -> Result<Self> {
        let n_max = policy.resolve_n_max(ensemble)?;
        // lambda = 0 leaves only the vacuum block.
        let n_max = if ensemble.lambda() == 0.0 { 0 } else { n_max };
        let ln_shapes = (0..=n_max).map(|n| ensemble.ln_prior_shape(n)).collect();
        let multiplicities = (0..=n_max)
            .map(|n| block_multiplicity(ensemble.pairs(), n) as f64)
            .collect();
        Ok(Self {
            ensemble: *ensemble,
            model: *model,
            path,
            n_max,
            ln_shapes,
            multiplicities,
        })
    }

    pub fn ensemble(&self) -> &SqueezedEnsemble {
        &self.ensemble
    }

    pub fn model(&self) -> &MeterModel {
        &self.model
    }

    pub fn path(&self) -> DensityPath {
        self.path
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// `ln` of the single-state prior `(1 - lambda^2)^p lambda^{2N}` per block.
    pub fn ln_shapes(&self) -> &[f64] {
        &self.ln_shapes
    }

    pub fn multiplicities(&self) -> &[f64] {
        &self.multiplicities
    }

    /// Prior mass per block, renormalised over the retained blocks.
    pub fn block_priors(&self) -> Vec<f64> {
        let raw: Vec<f64> = self
            .ln_shapes
            .iter()
            .zip(&self.multiplicities)
            .map(|(&ls, &d)| d * ls.exp())
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    }

    pub fn ln_pointer(&self, n: usize, x: f64) -> f64 {
        ln_pointer_density(&self.model, n, x, self.path)
    }

    /// Outcome density `P(x)`.
    pub fn density(&self, x: f64) -> f64 {
        (0..=self.n_max)
            .map(|n| self.multiplicities[n] * (self.ln_shapes[n] + self.ln_pointer(n, x)).exp())
            .sum()
    }

    pub fn mean_total_number(&self) -> f64 {
        self.block_priors().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Grid covering every retained peak with `8 sigma` margins, panels of
    /// `sigma / 2` and 16 Gauss-Legendre nodes per panel, unless overridden.
    pub fn grid(&self, spec: &GridSpec) -> Result<OutcomeGrid> {
        let sigma = self.model.pointer_sigma();
        let lo = spec.x_min.unwrap_or(-self.model.displacement(self.n_max) - 8.0 * sigma);
        let hi = spec.x_max.unwrap_or(8.0 * sigma);
        let width = spec.panel_width.unwrap_or(0.5 * sigma);
        OutcomeGrid::composite_gauss_legendre(lo, hi, width, DEFAULT_NODES_PER_PANEL)
    }

    pub fn default_grid(&self) -> Result<OutcomeGrid> {
        self.grid(&GridSpec::default())
    }
}

/// One-shot evaluation of `P(x)` along the default (Gaussian) path.
pub fn outcome_density(
    ensemble: &SqueezedEnsemble,
    model: &MeterModel,
    policy: &TruncationPolicy,
    x: f64,
) -> Result<f64> {
    Ok(OutcomeDistribution::new(ensemble, model, policy, DensityPath::Gaussian)?.density(x))
}
