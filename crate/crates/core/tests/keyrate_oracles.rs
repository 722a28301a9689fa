use hdqkd_core::entropy::{SolveStatus, SolverOptions};
use hdqkd_core::keyrate::{
    bbm92_rate, compute_rate, compute_rate_with_noise, conditional_shannon_hab, qber, rescale_frame, solar_threshold,
    sweep, SweepAxis,
};
use hdqkd_core::linalg::shannon_entropy;
use hdqkd_core::model::{isotropic_time_state, Loss, Protocol, ProtocolConfig};
use hdqkd_core::noise::{per_frame_params, NoiseParams};
use hdqkd_core::povm::click_probabilities_p1;
use proptest::prelude::*;

fn cfg(protocol: Protocol, d: usize, m: usize, solar: f64) -> ProtocolConfig {
    ProtocolConfig { quadrature_m: m, solar_rate_hz: solar, ..ProtocolConfig::default_for(protocol, d) }
}

proptest! {
    #[test]
    fn conditional_entropy_matches_joint_table(v in 0.0f64..=1.0, half in 1usize..6) {
        let d = 2 * half;
        let df = d as f64;
        let joint: Vec<f64> = (0..d * d)
            .map(|k| if k / d == k % d { v / df + (1.0 - v) / (df * df) } else { (1.0 - v) / (df * df) })
            .collect();
        let bob: Vec<f64> = (0..d).map(|j| (0..d).map(|i| joint[i * d + j]).sum()).collect();
        let oracle = shannon_entropy(&joint) - shannon_entropy(&bob);
        prop_assert!((conditional_shannon_hab(v, d) - oracle).abs() < 1e-12);
    }

    #[test]
    fn symbol_error_rate_from_clicks(v in 0.0f64..=1.0, half in 1usize..5) {
        let d = 2 * half;
        let c = click_probabilities_p1(&isotropic_time_state(v, d).unwrap()).unwrap();
        let agree: f64 = (0..d).map(|i| c.tt[(i, i)]).sum();
        prop_assert!((qber(v, d) - (1.0 - agree)).abs() < 1e-12);
        prop_assert!((qber(v, d) + agree - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frame_rescaling_scales_means(factor in 0.01f64..10.0) {
        let p = NoiseParams { pair_mean: 0.1, dark_mean: 1e-6, env_mean_a: 0.0, env_mean_b: 0.02, loss_a: 0.0, loss_b: 0.9, eta: 0.8 };
        let q = rescale_frame(&p, factor);
        prop_assert!((q.pair_mean - 0.1 * factor).abs() < 1e-15);
        prop_assert!((q.env_mean_b - 0.02 * factor).abs() < 1e-15);
        prop_assert_eq!((q.loss_b, q.eta), (p.loss_b, p.eta));
    }
}

#[test]
fn entropy_limits() {
    assert_eq!(conditional_shannon_hab(1.0, 4), 0.0);
    assert!((conditional_shannon_hab(0.0, 8) - 3.0).abs() < 1e-12);
    assert_eq!(qber(1.0, 4), 0.0);
    assert!((qber(0.0, 2) - 0.5).abs() < 1e-15);
}

#[test]
fn noiseless_two_bin_rate() {
    let c = cfg(Protocol::P1, 2, 10, 0.0);
    let noise = NoiseParams::source_at_alice(0.1, 0.0, 0.0, 0.0, 1.0);
    let r = compute_rate_with_noise(&c, &noise, &SolverOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.v - 1.0).abs() < 1e-12 && r.h_ab.abs() < 1e-12);
    assert!(r.rate_per_coincidence >= 0.98 && r.rate_per_coincidence <= 1.0 + 1e-6, "{}", r.rate_per_coincidence);
    let expected = r.rate_per_coincidence * r.p_tt11 / c.frame_length_s;
    assert!((r.rate_per_second - expected).abs() <= 1e-12 * expected);
}

#[test]
fn heavy_background_clips_to_zero() {
    let r = compute_rate(&cfg(Protocol::P1, 2, 4, 1e8), &SolverOptions::default()).unwrap();
    assert!(r.status.has_bound());
    assert!(r.rate_unclipped < 0.0);
    assert_eq!(r.rate_per_coincidence, 0.0);
    assert_eq!(r.rate_per_second, 0.0);
    assert!((r.rate_unclipped - (r.s_ae_lb - r.h_ab)).abs() < 1e-15);
}

#[test]
fn diagonal_analyzer_beats_entangled_analyzer() {
    let opts = SolverOptions::default();
    let p1 = compute_rate(&cfg(Protocol::P1, 4, 4, 1e5), &opts).unwrap();
    let p2 = compute_rate(&cfg(Protocol::P2, 4, 4, 1e5), &opts).unwrap();
    assert!(p1.rate_per_coincidence >= p2.rate_per_coincidence, "{} < {}", p1.rate_per_coincidence, p2.rate_per_coincidence);
    assert!(p1.rate_per_coincidence > 0.0);
    assert!(!p1.upper_bound_only && p2.upper_bound_only);
}

#[test]
fn reference_protocol_rescaling() {
    let opts = SolverOptions::default();
    let base = cfg(Protocol::P1, 2, 4, 1e4);
    let direct = compute_rate(&base, &opts).unwrap();
    let reference = bbm92_rate(&base, &opts).unwrap();
    assert_eq!(direct.s_ae_lb, reference.s_ae_lb);
    assert_eq!(direct.rate_per_second, reference.rate_per_second);
    assert_eq!(reference.protocol, Protocol::Bbm92);

    let wide = ProtocolConfig { protocol: Protocol::Bbm92, ..cfg(Protocol::P1, 8, 4, 1e4) };
    let full = per_frame_params(&cfg(Protocol::P1, 8, 4, 1e4));
    let short = per_frame_params(&wide);
    assert!((short.pair_mean - full.pair_mean / 4.0).abs() < 1e-16);
    assert!((short.env_mean_b - full.env_mean_b / 4.0).abs() < 1e-16);
    let r = bbm92_rate(&cfg(Protocol::P1, 8, 4, 1e4), &opts).unwrap();
    assert_eq!(r.d, 2);
    assert!((r.frame_length_s - wide.frame_length_s / 4.0).abs() < 1e-24);
}

#[test]
fn single_point_sweep_is_one_rate() {
    let opts = SolverOptions::default();
    let base = cfg(Protocol::P1, 2, 4, 0.0);
    let rows = sweep(&base, SweepAxis::LossDb, &[20.0], &opts, 1).unwrap();
    assert_eq!(rows.len(), 1);
    let expected = compute_rate(&ProtocolConfig { loss: Loss::Db(20.0), ..base }, &opts).unwrap();
    assert_eq!(rows[0].result.as_ref().unwrap(), &expected);
}

#[test]
fn sweep_is_ordered_and_thread_independent() {
    let opts = SolverOptions::default();
    let base = cfg(Protocol::P1, 2, 3, 0.0);
    let grid = [1e3, 1e4, 1e5, 1e6];
    let serial = sweep(&base, SweepAxis::SolarRate, &grid, &opts, 1).unwrap();
    let parallel = sweep(&base, SweepAxis::SolarRate, &grid, &opts, 3).unwrap();
    for ((a, b), x) in serial.iter().zip(&parallel).zip(grid) {
        assert_eq!(a.config.solar_rate_hz, x);
        assert_eq!(a.result.as_ref().unwrap(), b.result.as_ref().unwrap());
    }
    assert!(sweep(&base, SweepAxis::SolarRate, &[2.0, 1.0], &opts, 1).is_err());
}

#[test]
fn rate_falls_with_solar_background() {
    let opts = SolverOptions::default();
    let grid: Vec<f64> = (0..5).map(|k| 10f64.powf(3.0 + k as f64)).collect();
    let rows = sweep(&cfg(Protocol::P1, 4, 4, 0.0), SweepAxis::SolarRate, &grid, &opts, 1).unwrap();
    let rates: Vec<f64> = rows.iter().map(|r| r.result.as_ref().unwrap().rate_per_coincidence).collect();
    assert!(rates.windows(2).all(|w| w[1] <= w[0]), "{rates:?}");
    for row in &rows {
        let r = row.result.as_ref().unwrap();
        if r.rate_unclipped > 0.0 {
            assert_eq!(r.rate_unclipped, r.rate_per_coincidence);
        }
    }
}

#[test]
fn threshold_bisection_brackets_zero_rate() {
    let opts = SolverOptions::default();
    let c = cfg(Protocol::P1, 2, 3, 0.0);
    let t = solar_threshold(&c, &opts, 1e3, 1e8, 0.1).unwrap();
    assert!(t.above / t.below <= 1.1 && t.below < t.above);
    assert!(t.below <= t.estimate() && t.estimate() <= t.above);
    let at = |x| compute_rate(&SweepAxis::SolarRate.apply(&c, x), &opts).unwrap().rate_unclipped;
    assert!(at(t.below) > 0.0 && at(t.above) <= 0.0);
    assert!(solar_threshold(&c, &opts, 1e7, 1e8, 0.1).is_err());
}
