//! Distributional sanity checks that cut across modules: event-time law,
//! cross-scheme agreement, and the estimator's own error scaling.

use hawkes_heston::model::{HawkesParams, JumpLaw, ModelConfig, TimeGrid};
use hawkes_heston::{exec, hawkes, sde};

/// Asymptotic 1% critical value of the Kolmogorov statistic `sqrt(n) D_n`.
const KS_CRIT_1PCT: f64 = 1.62762;

#[test]
fn inter_event_times_are_exponential_when_excitation_is_off() {
    let params = HawkesParams { lambda0: 1.0, alpha: 0.0, beta: 2.0 };
    let law = JumpLaw::Exponential { rate: 10.0 };
    let mut rng = exec::path_rng(42, 0);
    let path = hawkes::simulate_hawkes(&params, &law, 5_000.0, &mut rng).unwrap();

    let mut gaps = Vec::with_capacity(path.times.len());
    let mut prev = 0.0;
    for &t in &path.times {
        gaps.push(t - prev);
        prev = t;
    }
    assert!(gaps.len() > 4_000, "weak sample: {} gaps", gaps.len());

    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = gaps.len() as f64;
    let mut d = 0.0f64;
    for (i, &g) in gaps.iter().enumerate() {
        let cdf = 1.0 - (-params.lambda0 * g).exp();
        d = d.max(cdf - i as f64 / n);
        d = d.max((i + 1) as f64 / n - cdf);
    }
    let stat = n.sqrt() * d;
    assert!(
        stat < KS_CRIT_1PCT,
        "KS statistic {stat:.4} exceeds the 1% critical value"
    );
}

#[test]
fn exact_and_euler_terminal_means_agree_within_joint_band() {
    let config = ModelConfig::default();
    let n_paths = 20_000;

    let sample = |scheme: sde::Scheme, steps: usize, seed: u64| -> (f64, f64) {
        let grid = TimeGrid::new(0.0, config.model.horizon, steps).unwrap();
        let model = config.model.clone();
        let hawkes_params = config.hawkes;
        let law = config.jump_law.clone();
        let terminal: Vec<f64> = exec::map_paths(n_paths, move |i| {
            let mut rng = exec::path_rng(seed, i as u64);
            let events =
                hawkes::simulate_hawkes(&hawkes_params, &law, model.horizon, &mut rng)
                    .unwrap();
            let path = sde::simulate_variance(&model, &events, &grid, scheme, &mut rng)
                .unwrap();
            path.terminal()
        });
        exec::mean_and_se(&terminal)
    };

    let (m_exact, se_exact) = sample(sde::Scheme::Exact, 50, 7);
    let (m_euler, se_euler) = sample(sde::Scheme::EulerTruncated, 10_000, 8);
    let joint = (se_exact * se_exact + se_euler * se_euler).sqrt();
    assert!(
        (m_exact - m_euler).abs() <= 4.0 * joint,
        "schemes disagree: exact {m_exact:.6} vs euler {m_euler:.6} (joint se {joint:.2e})"
    );
}

#[test]
fn standard_error_shrinks_like_inverse_root_of_path_count() {
    let config = ModelConfig::default();
    let grid = TimeGrid::new(0.0, config.model.horizon, 50).unwrap();

    let se_at = |n_paths: usize| -> f64 {
        let model = config.model.clone();
        let hawkes_params = config.hawkes;
        let law = config.jump_law.clone();
        let grid = grid;
        let terminal: Vec<f64> = exec::map_paths(n_paths, move |i| {
            let mut rng = exec::path_rng(13, i as u64);
            let events =
                hawkes::simulate_hawkes(&hawkes_params, &law, model.horizon, &mut rng)
                    .unwrap();
            sde::simulate_variance(&model, &events, &grid, sde::Scheme::Exact, &mut rng)
                .unwrap()
                .terminal()
        });
        exec::mean_and_se(&terminal).1
    };

    let ratio = se_at(4_000) / se_at(16_000);
    assert!(
        (1.6..=2.4).contains(&ratio),
        "quadrupling paths changed the SE by {ratio:.3}x, expected about 2x"
    );
}
