use dexcatch::sim2real::{add_noise, sample_env_params, LowPassFilter, RandomizationRanges};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn filter_all(alpha: f64, xs: &[f64]) -> Vec<f64> {
    let mut f = LowPassFilter::new(alpha, 1).unwrap();
    xs.iter().map(|x| f.apply(&[*x]).unwrap()[0]).collect()
}

proptest! {
    #[test]
    fn filter_is_linear(alpha in 0.0f64..0.99, a in -3.0f64..3.0, b in -3.0f64..3.0,
                        xz in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..60)) {
        let x: Vec<f64> = xz.iter().map(|p| p.0).collect();
        let z: Vec<f64> = xz.iter().map(|p| p.1).collect();
        let mix: Vec<f64> = xz.iter().map(|(x, z)| a * x + b * z).collect();
        let (fx, fz, fm) = (filter_all(alpha, &x), filter_all(alpha, &z), filter_all(alpha, &mix));
        for t in 0..mix.len() {
            prop_assert!((fm[t] - (a * fx[t] + b * fz[t])).abs() < 1e-9);
        }
    }

    #[test]
    fn filter_contracts_each_change(alpha in 0.0f64..0.99, xs in proptest::collection::vec(-2.0f64..2.0, 1..60)) {
        let ys = filter_all(alpha, &xs);
        let mut prev = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            prop_assert!((y - prev).abs() <= (1.0 - alpha) * (x - prev).abs() + 1e-12);
            prev = *y;
        }
    }

    #[test]
    fn step_response_closed_form(alpha in 0.0f64..0.99, n in 1usize..40) {
        let ys = filter_all(alpha, &vec![1.0; n]);
        prop_assert!((ys[n - 1] - (1.0 - alpha.powi(n as i32))).abs() < 1e-12);
    }

    #[test]
    fn samples_stay_in_range(seed in any::<u64>()) {
        let ranges = RandomizationRanges::default();
        let p = sample_env_params(&mut ChaCha8Rng::seed_from_u64(seed), &ranges, true);
        prop_assert!(ranges.gravity.contains(p.gravity));
        for g in [p.gain_scale.base, p.gain_scale.arm, p.gain_scale.hand] {
            prop_assert!(ranges.gain_scale.contains(g));
        }
        prop_assert!((ranges.throw_offset[0]..=ranges.throw_offset[1]).contains(&p.throw_offset));
        prop_assert!(ranges.obs_sigma.contains(p.obs_sigma));
        prop_assert!(ranges.act_sigma.contains(p.act_sigma));
    }
}

#[test]
fn default_filter_coefficient_gives_the_tenth_step_value() {
    let ys = filter_all(0.9, &[1.0; 10]);
    assert!((ys[9] - (1.0 - 0.9f64.powi(10))).abs() < 1e-12);
    assert!((ys[9] - 0.6513215599).abs() < 1e-9);
}

#[test]
fn randomization_and_noise_streams_are_independent() {
    let ranges = RandomizationRanges::default();
    let mut rand_stream = ChaCha8Rng::seed_from_u64(42);
    rand_stream.set_stream(1);
    let reference: Vec<_> = (0..50).map(|_| sample_env_params(&mut rand_stream, &ranges, true)).collect();

    let mut rand_stream = ChaCha8Rng::seed_from_u64(42);
    rand_stream.set_stream(1);
    let mut noise_stream = ChaCha8Rng::seed_from_u64(42);
    noise_stream.set_stream(0);
    let mut interleaved = Vec::new();
    for _ in 0..50 {
        add_noise(&mut noise_stream, &[0.0; 32], 0.5);
        interleaved.push(sample_env_params(&mut rand_stream, &ranges, true));
    }
    assert_eq!(reference, interleaved);
}
