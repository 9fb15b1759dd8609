use oqrw_core::discrete::{final_states, mean_state, run_trajectory};
use oqrw_core::flips::{flip_detector, DEFAULT_HYSTERESIS};
use oqrw_core::{BlochState, KrausPair, KrausParamsUvrs, TrajectoryRecord};

fn pair(u: f64, v: f64, r: f64, s: f64) -> (KrausPair, KrausParamsUvrs) {
    let p = KrausParamsUvrs::new(u, v, r, s).unwrap();
    (KrausPair::from_uvrs(&p).unwrap(), p)
}

fn value_at(rec: &TrajectoryRecord, t: f64) -> f64 {
    let i = rec.times.partition_point(|&s| s < t).min(rec.len() - 1);
    rec.x[i]
}

/// Flip count and time-weighted |slope| over the stretches between flips.
fn seesaw(rec: &TrajectoryRecord) -> (usize, f64) {
    let flips = flip_detector(&rec.times, &rec.q3, DEFAULT_HYSTERESIS);
    let mut cuts = vec![0.0];
    cuts.extend(&flips.times);
    cuts.push(*rec.times.last().unwrap());
    let (mut dx, mut dt) = (0.0, 0.0);
    for w in cuts.windows(2) {
        dx += (value_at(rec, w[1]) - value_at(rec, w[0])).abs();
        dt += w[1] - w[0];
    }
    (flips.len(), dx / dt)
}

fn seesaw_ok(n_steps: u64, seed: u64) -> Vec<bool> {
    let (k, p) = pair(1.1, 1.0, 0.00015, -0.00015);
    let drift = 2.0 * p.continuum_rates().0;
    (0..9)
        .map(|i| {
            let rec = run_trajectory(&k, BlochState::maximally_mixed(), 0, n_steps, seed, i, 50).unwrap();
            let (n, slope) = seesaw(&rec);
            n >= 2 && (slope - drift).abs() <= 0.2 * drift
        })
        .collect()
}

#[test]
fn fig1_seesaw_at_long_runs() {
    let ok = seesaw_ok(400_000, 11);
    assert!(ok.iter().filter(|b| **b).count() >= 5, "{ok:?}");
}

// At 1e5 steps fewer than half the seeds reach a second reversal: the mean
// dwell time is comparable to the run length.
#[test]
#[ignore = "run length too short for two reversals in most seeds"]
fn fig1_seesaw_at_short_runs() {
    let ok = seesaw_ok(100_000, 11);
    assert!(ok.iter().filter(|b| **b).count() >= 5, "{ok:?}");
}

#[test]
fn fig4_rotation_rate() {
    let (k, p) = pair(1.005, 1.0, 0.00015, -0.00015);
    let rate = 2.0 * p.continuum_rates().1;
    let n = 400_000;
    let mut half_turns = 0;
    for i in 0..4 {
        let rec = run_trajectory(&k, BlochState::pure_up(), 0, n, 5, i, 20).unwrap();
        // a half turn of the Bloch vector carries q3 from one pole band to the other
        half_turns += flip_detector(&rec.times, &rec.q3, 0.5).len();
    }
    let measured = half_turns as f64 * std::f64::consts::PI / (4.0 * n as f64);
    assert!((measured - rate).abs() <= 0.2 * rate, "{measured} vs {rate}");
}

#[test]
fn mean_state_follows_recursion() {
    let (k, _) = pair(1.05, 1.0, 0.02, -0.01);
    let rho0 = BlochState::new(0.3, 0.4, -0.5);
    for n in [1, 40, 300] {
        let states = final_states(&k, rho0, n, 100_000, 21).unwrap();
        let exact = mean_state(&k, rho0, n).as_array();
        for c in 1..4 {
            let xs: Vec<f64> = states.iter().map(|s| s.rho.as_array()[c]).collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
            let se = (var / xs.len() as f64).sqrt();
            assert!((m - exact[c]).abs() <= 4.0 * se.max(1e-15), "n={n} component {c}: {m} vs {}", exact[c]);
        }
    }
}
