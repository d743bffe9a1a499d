//! Invariant suite run by `ponder selftest`.

use std::f64::consts::SQRT_2;
use std::time::Instant;

use ponder_core::dynamics::{block_derivative, displaced_thermal, frobenius, steady_state_report, DEFAULT_SECTORS};
use ponder_core::fock::{block_multiplicity, choose_cutoff};
use ponder_core::meter::{pointer_density_gaussian, pointer_density_series, DensityPath, GridSpec};
use ponder_core::protocol::{initial_entanglement, sweep_kappa};
use ponder_core::{
    Beta, DynamicsParams, DynamicsSettings, MeterModel, OutcomeDistribution, Purification, SqueezedEnsemble,
    TruncationPolicy,
};

type Outcome = Result<String, String>;
type SelfCheck = (&'static str, fn(&Constants) -> Outcome);

/// Frozen reference values, computed at 30 digits.
struct Constants {
    e0_r03: f64,
    prior0_r04: f64,
    resolved_p_s: f64,
}

const REFERENCE: Constants = Constants {
    e0_r03: 0.915899591104403,
    prior0_r04: 0.732117732246471,
    resolved_p_s: 0.162524341098727,
};

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fock_priors(c: &Constants) -> Outcome {
    let e = SqueezedEnsemble::two_pairs(0.4).map_err(|e| e.to_string())?;
    let p0 = e.total_number_prior(0);
    let l2 = e.lambda().powi(2);
    let ratio_ok = (0..30).all(|n| {
        let ratio = e.total_number_prior(n + 1) / e.total_number_prior(n);
        (ratio - l2 * (n + 2) as f64 / (n + 1) as f64).abs() < 1e-12
    });
    let n_max = choose_cutoff(&e, 1e-13).map_err(|e| e.to_string())?;
    let kept: f64 = (0..=n_max).map(|n| e.total_number_prior(n)).sum();
    let ok = (p0 - c.prior0_r04).abs() < 1e-12 && ratio_ok && (1.0 - kept) < 1e-13 && block_multiplicity(2, 3) == 4;
    check(ok, format!("P(0) {p0:.12}, n_max {n_max}, kept mass {kept:.15}"))
}

fn meter_series(_: &Constants) -> Outcome {
    let mut worst: f64 = 0.0;
    for beta in [0.5, 1.0, 2.0, f64::INFINITY] {
        for kappa in [0.5, 3.0] {
            let m = MeterModel::new(kappa, Beta::new(beta).unwrap()).unwrap();
            for n in 0..=3 {
                for k in 0..=400 {
                    let x = -15.0 + 0.05 * k as f64;
                    worst =
                        worst.max((pointer_density_series(&m, n, x, 1e-15) - pointer_density_gaussian(&m, n, x)).abs());
                }
            }
        }
    }
    check(worst < 1e-10, format!("max series deviation {worst:.2e}"))
}

fn meter_normalisation(_: &Constants) -> Outcome {
    let mut worst_norm: f64 = 0.0;
    let mut worst_mean: f64 = 0.0;
    for (r, kappa, beta) in [
        (0.4, 3.0, Beta::Infinite),
        (0.3, 1.0, Beta::Finite(1.0)),
        (0.8, 0.0, Beta::Finite(0.5)),
    ] {
        let e = SqueezedEnsemble::two_pairs(r).unwrap();
        let m = MeterModel::new(kappa, beta).unwrap();
        let d = OutcomeDistribution::new(&e, &m, &TruncationPolicy::default(), DensityPath::Gaussian)
            .map_err(|e| e.to_string())?;
        let grid = d.default_grid().map_err(|e| e.to_string())?;
        worst_norm = worst_norm.max((grid.integrate(|x| d.density(x)) - 1.0).abs());
        let mean = grid.integrate(|x| x * d.density(x));
        worst_mean = worst_mean.max((mean + SQRT_2 * kappa * e.mean_total_number()).abs());
    }
    check(
        worst_norm < 1e-6 && worst_mean < 1e-6,
        format!("|int P - 1| {worst_norm:.1e}, mean error {worst_mean:.1e}"),
    )
}

fn protocol_ratio(c: &Constants) -> Outcome {
    let e = SqueezedEnsemble::two_pairs(0.3).unwrap();
    let policy = TruncationPolicy::default();
    let e0 = initial_entanglement(&e);
    let flat = Purification::new(&e, &MeterModel::new(0.0, Beta::Infinite).unwrap(), &policy).unwrap();
    let grid = flat.distribution().default_grid().map_err(|e| e.to_string())?;
    let mut flat_dev: f64 = 0.0;
    let mut norm_dev: f64 = 0.0;
    for &x in grid.nodes() {
        flat_dev = flat_dev.max((flat.gamma(x).map_err(|e| e.to_string())? - 1.0).abs());
    }
    let coupled = Purification::new(&e, &MeterModel::new(3.0, Beta::Infinite).unwrap(), &policy).unwrap();
    for &x in coupled
        .distribution()
        .default_grid()
        .map_err(|e| e.to_string())?
        .nodes()
    {
        norm_dev = norm_dev.max((coupled.conditional_spectrum(x).unwrap().normalization() - 1.0).abs());
    }
    let gamma0 = coupled.gamma(0.0).map_err(|e| e.to_string())?;
    let ok = (e0 - c.e0_r03).abs() < 1e-12 && flat_dev <= 1e-9 && norm_dev < 1e-10 && gamma0 <= 1.0;
    check(
        ok,
        format!("E0 {e0:.12}, kappa=0 |Gamma-1| {flat_dev:.1e}, |sum d w - 1| {norm_dev:.1e}, Gamma(0) {gamma0:.3e}"),
    )
}

fn protocol_sweep(c: &Constants) -> Outcome {
    let e = SqueezedEnsemble::two_pairs(0.3).unwrap();
    let ks: Vec<f64> = (1..=20).map(|k| 0.25 * k as f64).collect();
    let run = |eps| {
        sweep_kappa(
            &e,
            Beta::Infinite,
            eps,
            &ks,
            &TruncationPolicy::default(),
            &GridSpec::default(),
        )
        .map_err(|e| e.to_string())
    };
    let (base, strict) = (run(1.0)?, run(1.5)?);
    let ordered = base.iter().zip(&strict).all(|(a, b)| b.success_prob <= a.success_prob);
    let xi: Vec<f64> = base.iter().map(|r| r.xi.unwrap_or(f64::NAN)).collect();
    let best = xi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let interior = best > xi[0] && best > xi[xi.len() - 1];
    let tail = base.last().unwrap().success_prob;
    check(
        ordered && interior && (tail - c.resolved_p_s).abs() < 5e-3,
        format!("ordered {ordered}, max Xi {best:.4}, P_S(kappa=5) {tail:.6}"),
    )
}

fn dynamics_stationary(_: &Constants) -> Outcome {
    let params = DynamicsParams::reference();
    let mut worst: f64 = 0.0;
    for n in 0..=2 {
        let target = displaced_thermal(-params.kappa() * n as f64, params.beta, 42).map_err(|e| e.to_string())?;
        worst = worst.max(frobenius(&block_derivative(&params, n, n, &target)));
    }
    check(worst < 1e-8, format!("max stationarity residual {worst:.1e}"))
}

fn dynamics_relaxation(_: &Constants) -> Outcome {
    let params = DynamicsParams::reference();
    let mut settings = DynamicsSettings::for_params(&params, 2);
    settings.samples = 3;
    let report = steady_state_report(&params, &DEFAULT_SECTORS, &settings).map_err(|e| e.to_string())?;
    let failed: Vec<String> = report
        .sectors
        .iter()
        .filter(|s| !s.passed)
        .map(|s| format!("({}, {})", s.n, s.m))
        .collect();
    check(
        failed.is_empty(),
        format!(
            "{} sectors, meter cut {}, failing: [{}]",
            report.sectors.len(),
            report.meter_cut,
            failed.join(" ")
        ),
    )
}

/// Run every check; returns whether all passed.
pub fn run(inject_fault: bool) -> bool {
    let mut constants = REFERENCE;
    if inject_fault {
        constants.e0_r03 *= 1.0 + 1e-6;
    }
    let checks: [SelfCheck; 7] = [
        ("fock priors", fock_priors),
        ("meter series", meter_series),
        ("meter normalisation", meter_normalisation),
        ("protocol ratio", protocol_ratio),
        ("protocol sweep", protocol_sweep),
        ("dynamics stationary", dynamics_stationary),
        ("dynamics relaxation", dynamics_relaxation),
    ];
    let start = Instant::now();
    let mut all = true;
    println!("{:<22} {:<6} {:>8}  detail", "check", "status", "seconds");
    for (name, f) in checks {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(|| f(&constants)).unwrap_or_else(|_| Err("panicked".into()));
        let (status, detail) = match outcome {
            Ok(d) => ("ok", d),
            Err(d) => {
                all = false;
                ("FAIL", d)
            }
        };
        println!("{name:<22} {status:<6} {:>8.2}  {detail}", t.elapsed().as_secs_f64());
    }
    println!(
        "selftest {} in {:.1}s",
        if all { "passed" } else { "FAILED" },
        start.elapsed().as_secs_f64()
    );
    all
}
