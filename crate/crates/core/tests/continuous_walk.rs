use std::f64::consts::PI;

use oqrw_core::analysis::deff::{estimate_deff, DeffOptions};
use oqrw_core::ensemble::run_ensemble;
use oqrw_core::rng::{gaussian_increment, seed_stream, StreamRng};
use oqrw_core::sde::{bloch_sde_step, bloch_sde_step_split, theta_sde_step, AngleState, ContinuousRun, ContinuousWalkerState, Scheme};
use oqrw_core::{BlochState, ModelParams};

fn params(a: f64, w: f64) -> ModelParams {
    ModelParams::new(a, w).unwrap()
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn shared_noise_correlates_state_and_position() {
    let p = params(1.3, 0.7);
    let start = ContinuousWalkerState::new(BlochState::new(0.2, 0.0, 0.3), 0.0);
    let dt = 1e-3;
    let expected = 2.0 * p.a * (1.0 - 0.09) * dt;
    let mut rng = seed_stream(3, 0);
    let (mut shared, mut split) = (Vec::new(), Vec::new());
    for _ in 0..100_000 {
        let db = gaussian_increment(&mut rng, dt.sqrt());
        let other = gaussian_increment(&mut rng, dt.sqrt());
        let s = bloch_sde_step(&start, &p, dt, db, Scheme::EulerMaruyama).unwrap();
        shared.push((s.rho.q3 - start.rho.q3) * s.x);
        let s = bloch_sde_step_split(&start, &p, dt, db, other, Scheme::EulerMaruyama).unwrap();
        split.push((s.rho.q3 - start.rho.q3) * s.x);
    }
    // the drift parts contribute O(dt^2) to each product
    let (m, se) = mean_and_se(&shared);
    assert!((m - expected).abs() < 4.0 * se, "{m} vs {expected} (se {se})");
    let (m, se) = mean_and_se(&split);
    assert!(m.abs() < 4.0 * se, "{m} (se {se})");
    assert!(expected > 40.0 * se);
}

/// Runs coupled coarse/fine paths: the coarse increment is the sum of two fine ones.
fn coupled_endpoints(p: &ModelParams, t: f64, dt: f64, n: usize) -> Vec<[f64; 4]> {
    run_ensemble(n, 17, |_, rng: &mut StreamRng| {
        let mut fine = ContinuousWalkerState::new(BlochState::maximally_mixed(), 0.0);
        let mut coarse = fine;
        let h = 0.5 * dt;
        for _ in 0..(t / dt).round() as usize {
            let b1 = gaussian_increment(rng, h.sqrt());
            let b2 = gaussian_increment(rng, h.sqrt());
            fine = bloch_sde_step(&fine, p, h, b1, Scheme::KrausMap).unwrap();
            fine = bloch_sde_step(&fine, p, h, b2, Scheme::KrausMap).unwrap();
            coarse = bloch_sde_step(&coarse, p, dt, b1 + b2, Scheme::KrausMap).unwrap();
        }
        [coarse.rho.q3, fine.rho.q3, coarse.x, fine.x]
    })
}

#[test]
fn halving_dt_is_within_monte_carlo_error() {
    let p = params(0.5, 1.0);
    let n = 10_000;
    let rows = coupled_endpoints(&p, 4.0, 0.01, n);
    let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<_>>();
    for (c, f) in [(0, 1), (2, 3)] {
        let (mc, se) = mean_and_se(&col(c));
        let (mf, _) = mean_and_se(&col(f));
        assert!((mc - mf).abs() < se, "means {mc} vs {mf} (se {se})");
    }
    let var = |xs: &[f64]| {
        let (m, _) = mean_and_se(xs);
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
    };
    let (vc, vf) = (var(&col(2)), var(&col(3)));
    // standard error of a sample variance of near-Gaussian data
    let se = vc * (2.0 / n as f64).sqrt();
    assert!((vc - vf).abs() < se, "Var X {vc} vs {vf} (se {se})");
}

#[test]
fn purity_is_absorbing() {
    let p = params(2.0, 1.0);
    let run = ContinuousRun::new(p, 10.0, 1e-3).unwrap();
    let worst = run_ensemble(200, 4, |_, rng: &mut StreamRng| {
        let mut reached = false;
        let mut low = f64::INFINITY;
        run.integrate(BlochState::maximally_mixed(), 0.0, rng, |_, s| {
            let r2 = s.rho.bloch_norm_sq();
            if reached {
                low = low.min(r2);
            }
            reached |= r2 > 1.0 - 1e-6;
        })
        .unwrap();
        assert!(reached);
        low
    });
    let min = worst.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min >= 1.0 - 1e-4, "{min}");
}

#[test]
fn sectors_are_left_clockwise_only() {
    let p = params(2.0, 1.0);
    let dt = 1e-4;
    let counts = run_ensemble(8, 6, |_, rng: &mut StreamRng| {
        let mut s = AngleState::new(0.5);
        let (mut crossings, mut backwards) = (0usize, 0usize);
        for _ in 0..1_000_000 {
            let next = theta_sde_step(&s, &p, dt, gaussian_increment(rng, dt.sqrt()));
            let (k0, k1) = ((s.winding / PI).floor(), (next.winding / PI).floor());
            if k1 != k0 {
                crossings += 1;
                if k1 > k0 {
                    backwards += 1;
                }
            }
            s = next;
        }
        (crossings, backwards)
    });
    let crossings: usize = counts.iter().map(|c| c.0).sum();
    let backwards: usize = counts.iter().map(|c| c.1).sum();
    assert!(crossings >= 20, "{crossings}");
    assert!((backwards as f64) < 0.01 * crossings as f64, "{backwards} of {crossings}");
}

#[test]
fn weak_noise_winds_at_twice_omega() {
    let p = params(0.3, 1.0);
    let (t, dt) = (100.0, 1e-3);
    let rates = run_ensemble(8, 8, |_, rng: &mut StreamRng| {
        let mut s = AngleState::new(0.0);
        for _ in 0..(t / dt) as usize {
            s = theta_sde_step(&s, &p, dt, gaussian_increment(rng, dt.sqrt()));
        }
        -s.winding / t
    });
    for r in rates {
        assert!((r - 2.0 * p.omega0).abs() <= 0.2 * p.omega0, "{r}");
    }
}

#[test]
fn seesaw_slopes_match_trapped_angle() {
    let p = params(2.0, 1.0);
    let expected = 2.0 * p.a * (PI / 12.0).cos();
    let run = ContinuousRun::new(p, 200.0, 0.0025).unwrap().with_stride(4);
    let (mut dx, mut dt) = (0.0, 0.0);
    for i in 0..4 {
        let (rec, flips) = run.simulate(BlochState::pure_up(), 0.0, 13, i).unwrap();
        let at = |t: f64| rec.x[rec.times.partition_point(|&s| s < t).min(rec.len() - 1)];
        for w in flips.times.windows(2) {
            dx += (at(w[1]) - at(w[0])).abs();
            dt += w[1] - w[0];
        }
    }
    assert!(dt > 100.0, "{dt}");
    let slope = dx / dt;
    assert!((slope - expected).abs() <= 0.15 * expected, "{slope} vs {expected}");
}

#[test]
fn weak_noise_diffusion_constant() {
    let p = params(0.3, 1.0);
    let run = ContinuousRun::new(p, 500.0, 0.01).unwrap();
    let steps: Vec<u64> = (1..=10).map(|k| k * 5000).collect();
    let s = run.sample_ensemble(BlochState::pure_up(), 0.0, 1000, 10, &steps).unwrap();
    let est = estimate_deff(&s.times, &s.x, &DeffOptions::window(100.0, 500.0), None).unwrap();
    let d = p.predicted_deff();
    assert!((est.value - d).abs() <= 0.15 * d, "{} vs {d}", est.value);
}

#[test]
fn mixed_state_purifies_at_twice_a_squared() {
    let p = params(0.8, 1.0);
    let run = ContinuousRun::new(p, 1.5, 1e-3).unwrap();
    let series = run.sqrt_det_decay(BlochState::maximally_mixed(), 10_000, 12, 100).unwrap();
    for pt in &series.points {
        let exact = 0.5 * (-2.0 * p.a * p.a * pt.time).exp();
        assert!((pt.mean - exact).abs() <= 4.0 * pt.stderr.max(1e-12), "t={}: {} vs {exact}", pt.time, pt.mean);
    }
}
