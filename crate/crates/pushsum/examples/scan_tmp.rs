use pushsum::engine::{run, run_sweep, Mode, RunConfig};
use pushsum::graphs::paper_example_sequence;
use pushsum::noise::{NoiseKind, NoiseModel};
use pushsum::objectives::paper_suite;
use pushsum::schedule::StepSchedule;
use rayon::prelude::*;

fn cfg(seed: u64, x0: [f64; 3], a: f64, nu: f64, t_max: u64, stride: u64) -> RunConfig {
    RunConfig {
        suite: paper_suite(),
        graphs: paper_example_sequence(seed),
        schedule: StepSchedule::power_law(a, nu).unwrap(),
        noise: NoiseModel::new(NoiseKind::Gaussian, 1),
        mode: Mode::Perturbed,
        x0: x0.iter().map(|&v| vec![v]).collect(),
        t_max,
        seed,
        stride,
        allow_invalid_schedule: false,
        stop: None,
    }
}

fn main() {
    let t = 100_000u64;
    // zero-init: which early seeds put every agent within 0.05 of 2.62?
    println!("== zero-init scan (target 2.62 +- 0.05) ==");
    let hits: Vec<(u64, f64)> = (0u64..32)
        .into_par_iter()
        .filter_map(|seed| {
            let tr = run(cfg(seed, [0.0; 3], 0.05, 1.0, t, t)).unwrap();
            let worst = tr.summary.final_z.iter().map(|z| (z[0] - 2.62f64).abs()).fold(0.0f64, f64::max);
            (worst <= 0.05).then_some((seed, worst))
        })
        .collect();
    for (s, w) in hits.iter().take(8) { println!("seed {s}: worst |z-2.62| = {w:.6}"); }

    println!("== near-max scan (target -2.49 +- 0.05) ==");
    let hits: Vec<(u64, f64)> = (0u64..2048)
        .into_par_iter()
        .filter_map(|seed| {
            let tr = run(cfg(seed, [-1.0, -1.2, -1.1], 0.05, 1.0, t, t)).unwrap();
            let worst = tr.summary.final_z.iter().map(|z| (z[0] + 2.49f64).abs()).fold(0.0f64, f64::max);
            (worst <= 0.05).then_some((seed, worst))
        })
        .collect();
    let mut hits = hits;
    hits.sort_by(|a, b| a.1.total_cmp(&b.1));
    println!("hits: {} / 4096", hits.len());
    for (s, w) in hits.iter().take(12) { println!("seed {s}: worst |z+2.49| = {w:.6}"); }

    println!("== escape sweep (x0 = -1.12, a=0.05, nu=0.6, 200 seeds) ==");
    let template = cfg(0, [-1.12; 3], 0.05, 0.6, t, t);
    let seeds: Vec<u64> = (0..200).collect();
    let traces = run_sweep(&template, &seeds).unwrap();
    let mins = [-2.4940855766017008f64, 2.6174337387195158f64];
    let ok = traces
        .iter()
        .filter(|tr| {
            let xb = tr.summary.final_xbar[0];
            mins.iter().any(|m| (xb - m).abs() <= 0.05)
        })
        .count();
    println!("reached a local minimum: {ok}/200");

    println!("== rate sweep (100 seeds at the recommended step) ==");
    let root = 2.6174337387195158f64;
    let a = pushsum::diagnostics::recommend_stepsize(&paper_suite(), &[root], 2.0).unwrap();
    println!("recommended a = {a}");
    let template = cfg(0, [root; 3], a, 1.0, t, 10);
    let seeds: Vec<u64> = (0..100).collect();
    let traces = run_sweep(&template, &seeds).unwrap();
    let report = pushsum::diagnostics::rate_fit(&traces, &[root], 1_000, 100_000, 0.05).unwrap();
    println!("converged {}/100, slope {:.4}, r2 {:.5}", report.n_converged, report.slope, report.r_squared);
}
