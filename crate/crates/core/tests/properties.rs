use actlab_core::actuation::{affine_rescale, ActionBounds};
use actlab_core::gradsim::cosine_similarity;
use actlab_core::landscape::{make_directions, LandscapeConfig, Normalization};
use actlab_core::math::wrap_angle;
use actlab_core::policy::{ActorCritic, NetSpec};
use actlab_core::ppo::{compute_gae, normalize_advantages, PpoConfig};
use actlab_core::rng::Stream;
use proptest::prelude::*;

fn net() -> ActorCritic {
    ActorCritic::new(NetSpec {
        obs_dim: 3,
        act_dim: 2,
        hidden_layers: vec![5, 4],
    })
    .unwrap()
}

proptest! {
    #[test]
    fn gae_returns_are_advantages_plus_values(
        rewards in prop::collection::vec(-5.0f64..5.0, 1..30),
        seed in any::<u64>(),
        gamma in 0.5f64..1.0,
        lambda in 0.0f64..1.0,
    ) {
        let mut rng = Stream::new(seed);
        let n = rewards.len();
        let values: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let ends: Vec<bool> = (0..n).map(|_| rng.uniform() < 0.2).collect();
        let (adv, ret) = compute_gae(&rewards, &values, &ends, rng.normal(), gamma, lambda);
        for t in 0..n {
            prop_assert!((ret[t] - adv[t] - values[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn td0_reduction(rewards in prop::collection::vec(-5.0f64..5.0, 1..20), last in -3.0f64..3.0) {
        let n = rewards.len();
        let values: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let (adv, _) = compute_gae(&rewards, &values, &vec![false; n], last, 0.9, 0.0);
        for t in 0..n {
            let next = if t + 1 < n { values[t + 1] } else { last };
            prop_assert_eq!(adv[t], rewards[t] + 0.9 * next - values[t]);
        }
    }

    #[test]
    fn normalized_advantages_are_standardized(mut adv in prop::collection::vec(-100.0f64..100.0, 2..200)) {
        let spread = adv.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - adv.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-3);
        normalize_advantages(&mut adv);
        let n = adv.len() as f64;
        let mean = adv.iter().sum::<f64>() / n;
        let std = (adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n).sqrt();
        prop_assert!(mean.abs() < 1e-10);
        prop_assert!((std - 1.0).abs() < 1e-8);
    }

    #[test]
    fn cosine_is_bounded_and_scale_free(seed in any::<u64>(), scale in 0.01f64..100.0) {
        let net = net();
        let mut rng = Stream::new(seed);
        let a = net.init_params(&mut rng);
        let b = net.init_params(&mut rng);
        let c = cosine_similarity(&a, &b).unwrap().value;
        prop_assert!((-1.0..=1.0).contains(&c));
        let mut b2 = b.clone();
        b2.scale(scale);
        prop_assert!((cosine_similarity(&a, &b2).unwrap().value - c).abs() < 1e-12);
        prop_assert!((cosine_similarity(&a, &a).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn filter_wise_directions_match_block_norms(seed in any::<u64>(), dseed in any::<u64>()) {
        let net = net();
        let params = net.init_params(&mut Stream::new(seed));
        let (d1, d2) = make_directions(&params, dseed, Normalization::FilterWise).unwrap();
        prop_assert!(d1.dot(&d2).abs() < 1e-9 * d1.norm() * d2.norm());
        for block in params.layout.blocks() {
            let r = block.range();
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let p = norm(&params.data[r.clone()]);
            if p > 0.0 {
                prop_assert!((norm(&d1.data[r]) - p).abs() < 1e-9 * p);
            }
        }
    }

    #[test]
    fn grid_coordinates_are_symmetric(half in 1usize..20, span in 0.1f64..5.0) {
        let cfg = LandscapeConfig { resolution: 2 * half + 1, span, ..LandscapeConfig::default() };
        prop_assert_eq!(cfg.coordinate(half), 0.0);
        prop_assert_eq!(cfg.coordinate(0), -span);
        prop_assert_eq!(cfg.coordinate(2 * half), span);
        for i in 0..cfg.resolution {
            prop_assert_eq!(cfg.coordinate(i), -cfg.coordinate(2 * half - i));
        }
    }

    #[test]
    fn checkpoints_are_strictly_increasing_and_end_at_the_final_update(
        steps in 1u64..2_000_000,
        n_steps in 64usize..4096,
        count in 1usize..40,
    ) {
        let cfg = PpoConfig { total_env_steps: steps, n_steps, checkpoint_count: count, ..PpoConfig::default() };
        let its = cfg.checkpoint_iterations();
        prop_assert!(its.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(*its.last().unwrap(), cfg.total_iterations());
        prop_assert!(its.len() <= count);
    }

    #[test]
    fn rescaled_actions_stay_in_bounds(a in prop::collection::vec(-3.0f64..3.0, 2), lo in -5.0f64..0.0, width in 0.1f64..10.0) {
        let bounds = ActionBounds { low: vec![lo, lo], high: vec![lo + width, lo + width] };
        for v in affine_rescale(&a, &bounds) {
            prop_assert!(v >= lo && v <= lo + width);
        }
    }

    #[test]
    fn wrapped_angles_are_principal(x in -1e3f64..1e3) {
        let w = wrap_angle(x);
        prop_assert!((-std::f64::consts::PI..=std::f64::consts::PI).contains(&w));
        let k = ((x - w) / std::f64::consts::TAU).round();
        prop_assert!((x - w - k * std::f64::consts::TAU).abs() < 1e-9);
    }
}
