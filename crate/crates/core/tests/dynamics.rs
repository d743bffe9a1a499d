use ponder_core::dynamics::{
    default_meter_cut, displaced_thermal, evolve_block, fidelity, steady_state_report, DynamicsParams,
    DynamicsSettings, SectorCheck, DEFAULT_SECTORS,
};
use ponder_core::Beta;

fn coherence_final_norm(params: &DynamicsParams, t_final: f64) -> f64 {
    let cut = default_meter_cut(params.kappa(), 1, params.beta);
    let traj = evolve_block(params, 0, 1, cut, t_final, params.max_step(1), 3, None).unwrap();
    traj.samples.last().unwrap().trace_norm
}

#[test]
fn diagonal_sector_relaxes_to_displaced_thermal() {
    let params = DynamicsParams::reference();
    let cut = default_meter_cut(0.5, 1, params.beta);
    let target = displaced_thermal(-0.5, params.beta, cut).unwrap();
    let traj = evolve_block(
        &params,
        1,
        1,
        cut,
        40.0 / params.gamma,
        params.max_step(1),
        21,
        Some(&target),
    )
    .unwrap();
    let f = fidelity(&traj.final_block.matrix, &target);
    println!(
        "N = M = 1: final fidelity {f:.12}, local error {:.2e}",
        traj.local_error_estimate
    );
    assert!(f >= 0.999);
    assert!(traj.max_trace_deviation < 1e-8);
    assert!(traj.max_hermiticity_deviation < 1e-8);
    let first = 1.0 - traj.samples[0].fidelity.unwrap();
    let last = 1.0 - traj.samples.last().unwrap().fidelity.unwrap();
    assert!(last < first / 100.0);
}

#[test]
fn vacuum_sector_stays_vacuum_at_zero_temperature() {
    let params = DynamicsParams::from_kappa(0.5, 0.2, Beta::Infinite).unwrap();
    let target = displaced_thermal(0.0, Beta::Infinite, 12).unwrap();
    let traj = evolve_block(&params, 0, 0, 12, 10.0, 0.01, 11, Some(&target)).unwrap();
    for s in &traj.samples {
        assert!((s.fidelity.unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn coherences_decay_faster_with_stronger_damping() {
    let weak = DynamicsParams::reference();
    let strong = DynamicsParams::from_kappa(0.5, 1.0, Beta::Finite(1.0)).unwrap();
    let t = 40.0;
    let a = coherence_final_norm(&weak, t);
    let b = coherence_final_norm(&strong, t);
    println!("trace norm of (0,1) at t = {t}: gamma = 0.2 -> {a:.3e}, gamma = 1.0 -> {b:.3e}");
    assert!(b < a);
}

#[test]
fn zero_coupling_sectors_thermalise_undisplaced() {
    let params = DynamicsParams::from_kappa(0.0, 0.5, Beta::Finite(1.0)).unwrap();
    let mut settings = DynamicsSettings::for_params(&params, 2);
    settings.samples = 5;
    let report = steady_state_report(&params, &[(0, 0), (1, 1), (2, 2)], &settings).unwrap();
    for s in &report.sectors {
        match s.check {
            SectorCheck::Diagonal {
                final_fidelity,
                residual,
                ..
            } => {
                assert!(final_fidelity > 0.999, "{final_fidelity}");
                assert!(residual < 1e-8);
            }
            _ => unreachable!(),
        }
    }
}

#[test]
fn reference_report_passes() {
    let params = DynamicsParams::reference();
    let settings = DynamicsSettings::for_params(&params, 2);
    let start = std::time::Instant::now();
    let report = steady_state_report(&params, &DEFAULT_SECTORS, &settings).unwrap();
    println!("meter cut {} in {:?}", report.meter_cut, start.elapsed());
    for s in &report.sectors {
        println!("({}, {}) passed={} {:?}", s.n, s.m, s.passed, s.check);
    }
    assert!(report.passed());
}
