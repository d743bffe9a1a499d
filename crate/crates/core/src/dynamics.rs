//! Sector-by-sector integration of the quantum Brownian motion master
//! equation for the meter.
//!
//! The Hamiltonian commutes with the total photon number on side `A`, so the
//! joint density matrix splits into blocks `rho_{N,M}` that act on the meter
//! alone. Block `(N, M)` evolves as
//!
//! ```text
//! d/dt rho = -i (H_N rho - rho H_M) - i (gamma/2) [x, {p, rho}] - D [x, [x, rho]]
//! H_N      = Omega c^dag c + g N (c + c^dag)
//! D        = (gamma / 2) coth(beta / 2)
//! ```
//!
//! in the interaction picture of the signal modes. Each block is a dense
//! matrix on meter Fock levels `0..=meter_cut`; this module never uses the
//! Gaussian form of the solution, so it serves as an independent check that
//! diagonal blocks relax to the displaced thermal state with mean position
//! `-sqrt(2) kappa N` and that coherences between different `N` decay.

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::meter::Beta;

pub type CMatrix = DMatrix<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Physical rates of the meter, in units where `omega` sets the time scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsParams {
    pub omega: f64,
    pub g: f64,
    pub gamma: f64,
    pub beta: Beta,
}

impl DynamicsParams {
    pub fn new(omega: f64, g: f64, gamma: f64, beta: Beta) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(invalid("omega", format!("must be > 0, got {omega}")));
        }
        if !(g >= 0.0) || !g.is_finite() {
            return Err(invalid("g", format!("must be >= 0, got {g}")));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(invalid("gamma", format!("damping rate must be > 0, got {gamma}")));
        }
        Ok(Self { omega, g, gamma, beta })
    }

    /// `omega = 1`, `g = kappa`, `gamma = gamma_over_omega`.
    pub fn from_kappa(kappa: f64, gamma_over_omega: f64, beta: Beta) -> Result<Self> {
        Self::new(1.0, kappa, gamma_over_omega, beta)
    }

    /// The reference point: `kappa = 0.5`, `beta = 1`, `gamma = 0.2 omega`.
    pub fn reference() -> Self {
        Self::from_kappa(0.5, 0.2, Beta::Finite(1.0)).expect("reference parameters are valid")
    }

    pub fn kappa(&self) -> f64 {
        self.g / self.omega
    }

    /// Momentum diffusion coefficient `(gamma / 2) coth(beta / 2)`.
    pub fn diffusion(&self) -> f64 {
        self.gamma * self.beta.quadrature_variance()
    }

    /// Largest step allowed for a sector whose larger photon label is `n`.
    pub fn max_step(&self, n: usize) -> f64 {
        0.01 / self.omega.max(self.gamma).max(self.g * n as f64)
    }
}

/// One `(N, M)` sector of the joint state, as a meter-space matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MeterBlock {
    pub n: usize,
    pub m: usize,
    pub matrix: CMatrix,
}

impl MeterBlock {
    /// The block at `t = 0`: meter vacuum.
    pub fn vacuum(n: usize, m: usize, meter_cut: usize) -> Self {
        let mut matrix = CMatrix::zeros(meter_cut + 1, meter_cut + 1);
        matrix[(0, 0)] = Complex64::new(1.0, 0.0);
        Self { n, m, matrix }
    }

    pub fn is_diagonal(&self) -> bool {
        self.n == self.m
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }
}

/// `D(alpha) rho_th D(alpha)^dag` for real `alpha`, on levels `0..=meter_cut`.
///
/// Columns `D(alpha)|k>` are built by `D|k+1> = (c^dag - alpha) D|k> / sqrt(k+1)`
/// starting from the coherent state. That recursion only feeds lower levels
/// into higher ones, so every retained entry is exact.
pub fn displaced_thermal(alpha: f64, beta: Beta, meter_cut: usize) -> Result<CMatrix> {
    let populations = displaced_thermal_real(alpha, beta, meter_cut);
    let trace: f64 = (0..=meter_cut).map(|i| populations[(i, i)]).sum();
    let deficit = 1.0 - trace;
    if deficit > 1e-8 {
        return Err(Error::MeterCutoff {
            cut: meter_cut,
            deficit,
        });
    }
    Ok(populations.map(|v| Complex64::new(v, 0.0)))
}

fn displaced_thermal_real(alpha: f64, beta: Beta, meter_cut: usize) -> DMatrix<f64> {
    let dim = meter_cut + 1;
    let q = beta.boltzmann_factor();
    let mut column = vec![0.0; dim];
    column[0] = (-0.5 * alpha * alpha).exp();
    for m in 1..dim {
        column[m] = column[m - 1] * alpha / (m as f64).sqrt();
    }
    let mut rho = DMatrix::<f64>::zeros(dim, dim);
    let mut weight = 1.0 - q;
    let mut k = 0usize;
    loop {
        for j in 0..dim {
            let cj = weight * column[j];
            if cj == 0.0 {
                continue;
            }
            for i in 0..dim {
                rho[(i, j)] += cj * column[i];
            }
        }
        // Remaining thermal mass is q^{k+1}.
        let remaining = q.powi(k as i32 + 1);
        if q == 0.0 || remaining < 1e-18 {
            break;
        }
        let norm = ((k + 1) as f64).sqrt();
        for m in (0..dim).rev() {
            let raised = if m > 0 { (m as f64).sqrt() * column[m - 1] } else { 0.0 };
            column[m] = (raised - alpha * column[m]) / norm;
        }
        weight *= q;
        k += 1;
    }
    rho
}

/// Meter cutoff for sectors up to `n_max` photons: at least
/// `(kappa n)^2 + 6 kappa n + 10`, and large enough that the displaced thermal
/// state leaves at most `1e-14` of its population above the cutoff.
pub fn default_meter_cut(kappa: f64, n_max: usize, beta: Beta) -> usize {
    let shift = kappa * n_max as f64;
    let base = (shift * shift + 6.0 * shift + 10.0).ceil() as usize;
    let thermal_span = match beta {
        Beta::Finite(b) => (40.0 / b).ceil() as usize,
        Beta::Infinite => 0,
    };
    let work = base + thermal_span + (4.0 * shift).ceil() as usize + 60;
    let rho = displaced_thermal_real(-shift, beta, work);
    let mut below = 0.0;
    for cut in 0..=work {
        below += rho[(cut, cut)];
        if cut >= base && 1.0 - below <= 1e-14 {
            return cut;
        }
    }
    work
}

fn position(dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |i, j| {
        if j == i + 1 {
            Complex64::new((j as f64).sqrt() / SQRT_2, 0.0)
        } else if i == j + 1 {
            Complex64::new((i as f64).sqrt() / SQRT_2, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn momentum(dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |i, j| {
        if j == i + 1 {
            Complex64::new(0.0, -(j as f64).sqrt() / SQRT_2)
        } else if i == j + 1 {
            Complex64::new(0.0, (i as f64).sqrt() / SQRT_2)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn sector_hamiltonian(params: &DynamicsParams, n: usize, dim: usize) -> CMatrix {
    let number = CMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new(i as f64, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    number * Complex64::new(params.omega, 0.0) + position(dim) * Complex64::new(SQRT_2 * params.g * n as f64, 0.0)
}

/// Generator of one sector as a fused five-point stencil on a zero-padded
/// column-major buffer of side `dim + 4`:
///
/// ```text
/// L(rho) = K_N rho + rho K_M'
///        + sum_{a, b = +-1} x[i][i+a] x[j+b][j] (2D + (a + b) gamma / 2) rho[i+a][j+b]
/// K_N    = -i H_N - i (gamma/2) x p - D x^2
/// K_M'   =  i H_M + i (gamma/2) p x - D x^2
/// ```
///
/// The sandwich terms collect `-i (gamma/2) (x rho p - p rho x) + 2 D x rho x`.
#[derive(Debug, Clone)]
pub struct SectorGenerator {
    n: usize,
    m: usize,
    dim: usize,
    /// `left[o + 2][i] = K_N[i][i + o]`.
    left: [Vec<Complex64>; 5],
    /// `right[o + 2][j] = K_M'[j - o][j]`.
    right: [Vec<Complex64>; 5],
    /// `x[i][i+1]` and `x[i][i-1]` by row.
    x_up: Vec<f64>,
    x_down: Vec<f64>,
    /// `x[j-1][j]` and `x[j+1][j]` by column.
    x_from_below: Vec<f64>,
    x_from_above: Vec<f64>,
    gamma: f64,
    two_d: f64,
}

impl SectorGenerator {
    pub fn new(params: &DynamicsParams, n: usize, m: usize, meter_cut: usize) -> Self {
        let dim = meter_cut + 1;
        let x = position(dim);
        let p = momentum(dim);
        let d = params.diffusion();
        let hg = 0.5 * params.gamma;
        let x2 = &x * &x;
        let left = sector_hamiltonian(params, n, dim) * (-I) - (&x * &p) * (I * hg) - &x2 * Complex64::new(d, 0.0);
        let right = sector_hamiltonian(params, m, dim) * I + (&p * &x) * (I * hg) - &x2 * Complex64::new(d, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let band = |f: &dyn Fn(usize) -> Option<Complex64>| -> Vec<Complex64> {
            (0..dim).map(|k| f(k).unwrap_or(zero)).collect()
        };
        let entry = |a: &CMatrix, i: isize, j: isize| -> Option<Complex64> {
            (i >= 0 && j >= 0 && (i as usize) < dim && (j as usize) < dim).then(|| a[(i as usize, j as usize)])
        };
        let left_bands = std::array::from_fn(|k| {
            let o = k as isize - 2;
            band(&|i| entry(&left, i as isize, i as isize + o))
        });
        let right_bands = std::array::from_fn(|k| {
            let o = k as isize - 2;
            band(&|j| entry(&right, j as isize - o, j as isize))
        });
        let sq = |k: usize| (k as f64).sqrt() / SQRT_2;
        Self {
            n,
            m,
            dim,
            left: left_bands,
            right: right_bands,
            x_up: (0..dim).map(|i| if i + 1 < dim { sq(i + 1) } else { 0.0 }).collect(),
            x_down: (0..dim).map(sq).collect(),
            x_from_below: (0..dim).map(sq).collect(),
            x_from_above: (0..dim).map(|j| if j + 1 < dim { sq(j + 1) } else { 0.0 }).collect(),
            gamma: params.gamma,
            two_d: 2.0 * d,
        }
    }

    pub fn sector(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    fn padded_side(&self) -> usize {
        self.dim + 4
    }

    fn pad(&self, rho: &CMatrix) -> Vec<Complex64> {
        let s = self.padded_side();
        let mut buf = vec![Complex64::new(0.0, 0.0); s * s];
        for j in 0..self.dim {
            for i in 0..self.dim {
                buf[(j + 2) * s + i + 2] = rho[(i, j)];
            }
        }
        buf
    }

    fn unpad(&self, buf: &[Complex64]) -> CMatrix {
        let s = self.padded_side();
        CMatrix::from_fn(self.dim, self.dim, |i, j| buf[(j + 2) * s + i + 2])
    }

    /// `dst = L(src)` on padded buffers; the padding of `dst` is left untouched.
    fn apply_padded(&self, src: &[Complex64], dst: &mut [Complex64]) {
        let s = self.padded_side();
        let d = self.dim;
        let (c_pp, c_mixed, c_mm) = (self.two_d + self.gamma, self.two_d, self.two_d - self.gamma);
        for j in 0..d {
            let base = (j + 2) * s + 2;
            let col = |off: isize| -> &[Complex64] {
                let start = (base as isize + off * s as isize) as usize;
                &src[start - 2..start + d + 2]
            };
            let c0 = col(0);
            let cm1 = col(-1);
            let cp1 = col(1);
            let cm2 = col(-2);
            let cp2 = col(2);
            let r = [
                self.right[0][j],
                self.right[1][j],
                self.right[2][j],
                self.right[3][j],
                self.right[4][j],
            ];
            // rho[i][j - o] for o = -2..=2
            let cols = [cp2, cp1, c0, cm1, cm2];
            let below = self.x_from_below[j];
            let above = self.x_from_above[j];
            let out = &mut dst[base..base + d];
            #[allow(clippy::needless_range_loop)]
            for i in 0..d {
                let k = i + 2;
                let mut acc = self.left[0][i] * c0[k - 2]
                    + self.left[1][i] * c0[k - 1]
                    + self.left[2][i] * c0[k]
                    + self.left[3][i] * c0[k + 1]
                    + self.left[4][i] * c0[k + 2];
                for (coef, c) in r.iter().zip(&cols) {
                    acc += coef * c[k];
                }
                let up = self.x_up[i];
                let down = self.x_down[i];
                acc += cp1[k + 1] * (up * above * c_pp)
                    + cm1[k + 1] * (up * below * c_mixed)
                    + cp1[k - 1] * (down * above * c_mixed)
                    + cm1[k - 1] * (down * below * c_mm);
                out[i] = acc;
            }
        }
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let src = self.pad(rho);
        let mut dst = vec![Complex64::new(0.0, 0.0); src.len()];
        self.apply_padded(&src, &mut dst);
        self.unpad(&dst)
    }

    fn rk4_step(&self, y: &[Complex64], dt: f64, ws: &mut Workspace, out: &mut [Complex64]) {
        let Workspace { k1, k2, k3, k4, tmp } = ws;
        self.apply_padded(y, k1);
        for ((t, &a), &k) in tmp.iter_mut().zip(y).zip(k1.iter()) {
            *t = a + k * (0.5 * dt);
        }
        self.apply_padded(tmp, k2);
        for ((t, &a), &k) in tmp.iter_mut().zip(y).zip(k2.iter()) {
            *t = a + k * (0.5 * dt);
        }
        self.apply_padded(tmp, k3);
        for ((t, &a), &k) in tmp.iter_mut().zip(y).zip(k3.iter()) {
            *t = a + k * dt;
        }
        self.apply_padded(tmp, k4);
        let h = dt / 6.0;
        for (idx, o) in out.iter_mut().enumerate() {
            *o = y[idx] + (k1[idx] + (k2[idx] + k3[idx]) * 2.0 + k4[idx]) * h;
        }
    }
}

struct Workspace {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Workspace {
    fn new(len: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); len];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }
}

/// Time derivative of `block` under the sector generator.
pub fn block_derivative(params: &DynamicsParams, n: usize, m: usize, block: &CMatrix) -> CMatrix {
    SectorGenerator::new(params, n, m, block.nrows() - 1).apply(block)
}

/// Frobenius norm.
pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entry of `a - a^dag`.
pub fn hermiticity_deviation(a: &CMatrix) -> f64 {
    let d = a.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..d {
        for i in 0..=j {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Sum of singular values.
pub fn trace_norm(a: &CMatrix) -> f64 {
    a.clone().svd(false, false).singular_values.iter().sum()
}

fn hermitian_sqrt(a: &CMatrix) -> CMatrix {
    let h = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| Complex64::new(l.max(0.0).sqrt(), 0.0));
    &eig.eigenvectors * CMatrix::from_diagonal(&roots) * eig.eigenvectors.adjoint()
}

/// State fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
pub fn fidelity(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let s = hermitian_sqrt(rho);
    let inner = &s * sigma * &s;
    let h = (&inner + inner.adjoint()) * Complex64::new(0.5, 0.0);
    let root_sum: f64 = h.symmetric_eigen().eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    root_sum * root_sum
}

/// Expectation of the position quadrature.
pub fn position_mean(rho: &CMatrix) -> f64 {
    (position(rho.nrows()) * rho).trace().re
}

pub fn position_variance(rho: &CMatrix) -> f64 {
    let x = position(rho.nrows());
    let mean = (&x * rho).trace().re;
    (&x * &x * rho).trace().re - mean * mean
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub trace: Complex64,
    pub trace_norm: f64,
    /// Fidelity to the displaced thermal target; diagonal sectors only.
    pub fidelity: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BlockTrajectory {
    pub samples: Vec<TrajectorySample>,
    pub final_block: MeterBlock,
    /// Largest `|Tr rho - Tr rho(0)|` over all steps.
    pub max_trace_deviation: f64,
    /// Largest `max |rho - rho^dag|` over the samples (diagonal sectors).
    pub max_hermiticity_deviation: f64,
    /// Largest step-halving difference `|y_dt - y_{dt/2}| / 15` seen.
    pub local_error_estimate: f64,
}

/// Integrate sector `(n, m)` from the meter vacuum with fixed-step RK4.
///
/// `target`, when given, is used for the per-sample fidelity. `samples` is
/// the number of recorded points including both ends.
#[allow(clippy::too_many_arguments)]
pub fn evolve_block(
    params: &DynamicsParams,
    n: usize,
    m: usize,
    meter_cut: usize,
    t_final: f64,
    dt: f64,
    samples: usize,
    target: Option<&CMatrix>,
) -> Result<BlockTrajectory> {
    let bound = params.max_step(n.max(m));
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt, bound });
    }
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(invalid("t_final", format!("must be finite and >= 0, got {t_final}")));
    }
    let generator = SectorGenerator::new(params, n, m, meter_cut);
    let steps = (t_final / dt).ceil() as usize;
    let dt = if steps > 0 { t_final / steps as f64 } else { dt };
    let samples = samples.max(2);
    let sample_at: Vec<usize> = (0..samples).map(|k| k * steps / (samples - 1)).collect();
    let check_every = (steps / 16).max(1);

    let initial = MeterBlock::vacuum(n, m, meter_cut);
    let trace0 = initial.trace();
    let diagonal = initial.is_diagonal();
    let side = generator.padded_side();
    let mut state = generator.pad(&initial.matrix);
    let mut next = state.clone();
    let mut halves = state.clone();
    let mut half_tmp = state.clone();
    let mut ws = Workspace::new(state.len());
    let padded_trace = |buf: &[Complex64]| -> Complex64 { (0..=meter_cut).map(|i| buf[(i + 2) * side + i + 2]).sum() };

    let mut out = BlockTrajectory {
        samples: Vec::with_capacity(samples),
        final_block: initial.clone(),
        max_trace_deviation: 0.0,
        max_hermiticity_deviation: 0.0,
        local_error_estimate: 0.0,
    };
    let mut next_sample = 0;

    for step in 0..=steps {
        let t = step as f64 * dt;
        while next_sample < sample_at.len() && sample_at[next_sample] == step {
            if state.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::NonFinite { n, m, t });
            }
            let matrix = generator.unpad(&state);
            if diagonal {
                out.max_hermiticity_deviation = out.max_hermiticity_deviation.max(hermiticity_deviation(&matrix));
            }
            out.samples.push(TrajectorySample {
                t,
                trace: matrix.trace(),
                trace_norm: trace_norm(&matrix),
                fidelity: target.filter(|_| diagonal).map(|tg| fidelity(&matrix, tg)),
            });
            next_sample += 1;
        }
        if step == steps {
            break;
        }
        generator.rk4_step(&state, dt, &mut ws, &mut next);
        if step % check_every == 0 {
            generator.rk4_step(&state, 0.5 * dt, &mut ws, &mut half_tmp);
            generator.rk4_step(&half_tmp, 0.5 * dt, &mut ws, &mut halves);
            let diff = next
                .iter()
                .zip(&halves)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
                / 15.0;
            out.local_error_estimate = out.local_error_estimate.max(diff);
        }
        std::mem::swap(&mut state, &mut next);
        let trace = padded_trace(&state);
        if !trace.re.is_finite() || !trace.im.is_finite() {
            return Err(Error::NonFinite { n, m, t: t + dt });
        }
        out.max_trace_deviation = out.max_trace_deviation.max((trace - trace0).norm());
    }
    let block = MeterBlock {
        n,
        m,
        matrix: generator.unpad(&state),
    };
    out.final_block = block;
    Ok(out)
}

/// Pass thresholds of the steady-state check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub residual: f64,
    pub fidelity: f64,
    pub trace: f64,
    pub hermiticity: f64,
    /// Final over initial trace norm of coherence sectors.
    pub coherence_ratio: f64,
    /// Required reduction of the fidelity deficit between start and end.
    pub deficit_reduction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual: 1e-8,
            fidelity: 0.999,
            trace: 1e-8,
            hermiticity: 1e-8,
            coherence_ratio: 0.05,
            deficit_reduction: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsSettings {
    pub t_final: f64,
    pub dt: f64,
    pub meter_cut: Option<usize>,
    pub samples: usize,
    pub tolerances: Tolerances,
}

impl DynamicsSettings {
    /// `t = 40 / gamma` with the largest step allowed for sectors up to `n_max`.
    pub fn for_params(params: &DynamicsParams, n_max: usize) -> Self {
        Self {
            t_final: 40.0 / params.gamma,
            dt: params.max_step(n_max),
            meter_cut: None,
            samples: 201,
            tolerances: Tolerances::default(),
        }
    }
}

pub const DEFAULT_SECTORS: [(usize, usize); 5] = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2)];

#[derive(Debug, Clone, PartialEq)]
pub enum SectorCheck {
    Diagonal {
        /// `||L(target)||_F` for the displaced thermal target.
        residual: f64,
        initial_fidelity: f64,
        final_fidelity: f64,
        max_trace_deviation: f64,
        max_hermiticity_deviation: f64,
    },
    Coherence {
        initial_trace_norm: f64,
        final_trace_norm: f64,
    },
}

#[derive(Debug, Clone)]
pub struct SectorOutcome {
    pub n: usize,
    pub m: usize,
    pub passed: bool,
    pub check: SectorCheck,
    pub local_error_estimate: f64,
    pub samples: Vec<TrajectorySample>,
}

#[derive(Debug, Clone)]
pub struct SteadyStateReport {
    pub params: DynamicsParams,
    pub meter_cut: usize,
    pub settings: DynamicsSettings,
    pub sectors: Vec<SectorOutcome>,
}

impl SteadyStateReport {
    pub fn passed(&self) -> bool {
        self.sectors.iter().all(|s| s.passed)
    }
}

fn check_sector(
    params: &DynamicsParams,
    settings: &DynamicsSettings,
    meter_cut: usize,
    (n, m): (usize, usize),
) -> Result<SectorOutcome> {
    let tol = &settings.tolerances;
    if n == m {
        let target = displaced_thermal(-params.kappa() * n as f64, params.beta, meter_cut)?;
        let residual = frobenius(&block_derivative(params, n, n, &target));
        let traj = evolve_block(
            params,
            n,
            m,
            meter_cut,
            settings.t_final,
            settings.dt,
            settings.samples,
            Some(&target),
        )?;
        let initial_fidelity = traj.samples.first().and_then(|s| s.fidelity).unwrap_or(f64::NAN);
        let final_fidelity = traj.samples.last().and_then(|s| s.fidelity).unwrap_or(f64::NAN);
        let initial_deficit = 1.0 - initial_fidelity;
        let final_deficit = 1.0 - final_fidelity;
        let converging = initial_deficit < 1e-12 || final_deficit < initial_deficit / tol.deficit_reduction;
        let passed = residual < tol.residual
            && final_fidelity >= tol.fidelity
            && traj.max_trace_deviation < tol.trace
            && traj.max_hermiticity_deviation < tol.hermiticity
            && converging;
        Ok(SectorOutcome {
            n,
            m,
            passed,
            check: SectorCheck::Diagonal {
                residual,
                initial_fidelity,
                final_fidelity,
                max_trace_deviation: traj.max_trace_deviation,
                max_hermiticity_deviation: traj.max_hermiticity_deviation,
            },
            local_error_estimate: traj.local_error_estimate,
            samples: traj.samples,
        })
    } else {
        let traj = evolve_block(
            params,
            n,
            m,
            meter_cut,
            settings.t_final,
            settings.dt,
            settings.samples,
            None,
        )?;
        let initial_trace_norm = traj.samples.first().map(|s| s.trace_norm).unwrap_or(f64::NAN);
        let final_trace_norm = traj.samples.last().map(|s| s.trace_norm).unwrap_or(f64::NAN);
        Ok(SectorOutcome {
            n,
            m,
            passed: final_trace_norm < tol.coherence_ratio * initial_trace_norm,
            check: SectorCheck::Coherence {
                initial_trace_norm,
                final_trace_norm,
            },
            local_error_estimate: traj.local_error_estimate,
            samples: traj.samples,
        })
    }
}

/// Relax every sector from the meter vacuum and compare against the
/// displaced thermal steady state. The first failing sector aborts with its
/// error; threshold misses are reported per sector.
pub fn steady_state_report(
    params: &DynamicsParams,
    sectors: &[(usize, usize)],
    settings: &DynamicsSettings,
) -> Result<SteadyStateReport> {
    if sectors.is_empty() {
        return Err(invalid("sectors", "at least one sector is required"));
    }
    let n_max = sectors.iter().map(|&(n, m)| n.max(m)).max().unwrap_or(0);
    let meter_cut = settings
        .meter_cut
        .unwrap_or_else(|| default_meter_cut(params.kappa(), n_max, params.beta));
    let outcomes = sectors
        .par_iter()
        .map(|&s| check_sector(params, settings, meter_cut, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(SteadyStateReport {
        params: *params,
        meter_cut,
        settings: settings.clone(),
        sectors: outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn vacuum_target_is_projector() {
        let v = displaced_thermal(0.0, Beta::Infinite, 10).unwrap();
        assert_abs_diff_eq!(v[(0, 0)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(frobenius(&v), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn displaced_thermal_moments() {
        for (alpha, beta) in [
            (-1.0f64, Beta::Finite(1.0)),
            (0.7, Beta::Finite(0.5)),
            (-1.5, Beta::Infinite),
        ] {
            let cut = default_meter_cut(alpha.abs(), 1, beta);
            let rho = displaced_thermal(alpha, beta, cut).unwrap();
            assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-10);
            assert!(hermiticity_deviation(&rho) < 1e-15);
            assert_abs_diff_eq!(position_mean(&rho), SQRT_2 * alpha, epsilon = 1e-10);
            assert_abs_diff_eq!(position_variance(&rho), beta.quadrature_variance(), epsilon = 1e-9);
        }
    }

    #[test]
    fn small_cutoff_is_detected() {
        let err = displaced_thermal(-3.0, Beta::Finite(0.5), 5).unwrap_err();
        assert!(matches!(err, Error::MeterCutoff { cut: 5, .. }));
    }

    #[test]
    fn vacuum_is_stationary_at_zero_temperature() {
        let params = DynamicsParams::from_kappa(0.5, 0.2, Beta::Infinite).unwrap();
        let v = displaced_thermal(0.0, Beta::Infinite, 12).unwrap();
        assert!(frobenius(&block_derivative(&params, 0, 0, &v)) < 1e-14);
    }

    #[test]
    fn derivative_is_traceless_on_diagonal_sectors() {
        let params = DynamicsParams::reference();
        let cut = 30;
        let rho = displaced_thermal(-0.3, Beta::Finite(1.0), cut).unwrap();
        for n in 0..3 {
            assert!(block_derivative(&params, n, n, &rho).trace().norm() < 1e-12);
        }
    }

    #[test]
    fn displaced_thermal_is_stationary() {
        let params = DynamicsParams::reference();
        let cut = default_meter_cut(0.5, 2, params.beta);
        for n in 0..3 {
            let rho = displaced_thermal(-0.5 * n as f64, params.beta, cut).unwrap();
            let r = frobenius(&block_derivative(&params, n, n, &rho));
            assert!(r < 1e-8, "N = {n}: residual {r:e}");
        }
    }

    #[test]
    fn fidelity_basics() {
        let a = displaced_thermal(0.4, Beta::Finite(1.0), 30).unwrap();
        assert_abs_diff_eq!(fidelity(&a, &a), 1.0, epsilon = 1e-10);
        let v0 = displaced_thermal(0.0, Beta::Infinite, 30).unwrap();
        let c = displaced_thermal(1.0, Beta::Infinite, 30).unwrap();
        // |<0|alpha>|^2 = e^{-|alpha|^2}
        assert_abs_diff_eq!(fidelity(&v0, &c), (-1.0f64).exp(), epsilon = 1e-10);
    }

    #[test]
    fn oversized_step_rejected() {
        let params = DynamicsParams::reference();
        let err = evolve_block(&params, 1, 1, 20, 1.0, 0.5, 2, None).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge { .. }));
    }

    #[test]
    fn trace_norm_of_unitary_phase() {
        let mut a = CMatrix::zeros(3, 3);
        a[(0, 1)] = Complex64::new(0.0, 2.0);
        a[(2, 2)] = Complex64::new(-1.0, 0.0);
        assert_abs_diff_eq!(trace_norm(&a), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn meter_cut_covers_population() {
        let cut = default_meter_cut(0.5, 2, Beta::Finite(1.0));
        assert!(cut >= 17);
        let rho = displaced_thermal(-1.0, Beta::Finite(1.0), cut).unwrap();
        assert!(1.0 - rho.trace().re <= 1e-14 + 1e-15);
    }
}
