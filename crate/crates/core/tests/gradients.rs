mod common;

use cegmix::data::{HoldingData, TransitionData};
use cegmix::mixture::{log_posterior, MixtureData, MixturePosterior, MixtureSpec};
use cegmix::sampler::LogDensity;
use common::max_gradient_error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn situations(rng: &mut impl Rng) -> TransitionData {
    let counts: Vec<(u64, u64)> = (0..12)
        .map(|_| {
            let t = rng.random_range(5..200);
            (rng.random_range(0..=t), t)
        })
        .collect();
    TransitionData::from_counts(&counts).unwrap()
}

fn edges(rng: &mut impl Rng) -> HoldingData {
    HoldingData::from_times(
        (0..8).map(|_| (0..rng.random_range(1..20)).map(|_| rng.random_range(0.5..150.0)).collect()).collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn binomial_gradient(seed in any::<u64>(), k in prop::sample::select(vec![1usize, 2, 3, 4])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = situations(&mut rng);
        let post = MixturePosterior::new(MixtureSpec::binomial(k), MixtureData::Situations(&data)).unwrap();
        let x: Vec<f64> = (0..post.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
        prop_assert!(max_gradient_error(&post, &x) < 1e-5);
    }

    #[test]
    fn weibull_gradient(seed in any::<u64>(), k in prop::sample::select(vec![1usize, 2, 3, 4])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = edges(&mut rng);
        let post = MixturePosterior::new(MixtureSpec::weibull(k, 50.0), MixtureData::Edges(&data)).unwrap();
        let x: Vec<f64> = (0..post.dim()).map(|_| rng.random_range(-1.5..1.5)).collect();
        prop_assert!(max_gradient_error(&post, &x) < 1e-5);
    }

    #[test]
    fn log_posterior_evaluates_the_sampled_density(seed in any::<u64>(), k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = situations(&mut rng);
        let spec = MixtureSpec::binomial(k);
        let post = MixturePosterior::new(spec, MixtureData::Situations(&data)).unwrap();
        let x: Vec<f64> = (0..post.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let direct = post.log_density(&x);
        let via_params = log_posterior(&post.constrain(&x), MixtureData::Situations(&data), &spec).unwrap();
        prop_assert!((direct - via_params).abs() < 1e-8 * direct.abs().max(1.0));
    }
}
