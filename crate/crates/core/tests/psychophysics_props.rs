use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use wrapped_haptics::psychophysics::{
    fit_sigmoid, jnd, read_responses_csv, sigmoid_percent, wilcoxon_signed_rank, write_responses_csv, MethodOrder,
    PairProtocol, PsychometricData, SigmoidObserver, TrialResponse, TripletObserver, TripletProtocol, REFERENCE_PSI,
    TEST_PRESSURES,
};

/// Exact two-sided p of W+ by enumerating every sign assignment.
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len();
    let mean = ranks.iter().sum::<f64>() / 2.0;
    let observed = (w_plus - mean).abs();
    let hits = (0u32..1 << n)
        .filter(|mask| {
            let w: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
            (w - mean).abs() >= observed - 1e-9
        })
        .count();
    hits as f64 / (1u64 << n) as f64
}

fn observations(k: f64, reps: usize, seed: u64) -> Vec<(f64, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TEST_PRESSURES
        .iter()
        .flat_map(|&p| std::iter::repeat_n(p, reps))
        .map(|p| (p, rng.random_bool(sigmoid_percent(p, REFERENCE_PSI, k) / 100.0)))
        .collect()
}

proptest! {
    #[test]
    fn jnd_times_k_is_ln3(k in 0.01..100.0f64) {
        prop_assert!((jnd(k).unwrap() * k - 3f64.ln()).abs() <= 1e-12);
    }

    #[test]
    fn sigmoid_midpoint_is_fifty(k in 0.1..50.0f64) {
        prop_assert_eq!(sigmoid_percent(REFERENCE_PSI, REFERENCE_PSI, k), 50.0);
    }

    #[test]
    fn fit_ignores_order_and_duplication(k in 1.0..15.0f64, seed in 0u64..10_000) {
        let obs = observations(k, 10, seed);
        let base = fit_sigmoid(&PsychometricData::from_observations(REFERENCE_PSI, obs.clone()));
        prop_assume!(base.is_ok());
        let base = base.unwrap();

        let mut shuffled = obs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed + 1));
        let s = fit_sigmoid(&PsychometricData::from_observations(REFERENCE_PSI, shuffled)).unwrap();
        prop_assert_eq!(s.k, base.k);

        let doubled: Vec<_> = obs.iter().chain(&obs).copied().collect();
        let d = fit_sigmoid(&PsychometricData::from_observations(REFERENCE_PSI, doubled)).unwrap();
        prop_assert_eq!(d.k, base.k);
        prop_assert_eq!(d.modeled_percent(REFERENCE_PSI), 50.0);
    }

    #[test]
    fn protocols_regenerate_byte_identically(seed in any::<u64>()) {
        prop_assert_eq!(PairProtocol::generate(seed).to_json(), PairProtocol::generate(seed).to_json());
        for order in [MethodOrder::LocalFirst, MethodOrder::GlobalFirst] {
            prop_assert_eq!(TripletProtocol::generate(seed, order).to_json(), TripletProtocol::generate(seed, order).to_json());
        }
    }

    #[test]
    fn responses_round_trip_through_csv(seed in 0u64..10_000, k in 1.0..10.0f64, accuracy in 0.3..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs = PairProtocol::generate(seed);
        let mut observer = SigmoidObserver::new(k, REFERENCE_PSI, seed);
        let mut responses: Vec<TrialResponse> = pairs
            .trials
            .iter()
            .map(|t| TrialResponse::pair(t, observer.answer(t), rng.random_range(0.5..30.0)))
            .collect();
        let triplets = TripletProtocol::generate(seed, MethodOrder::GlobalFirst);
        let mut tri = TripletObserver::new(accuracy, seed);
        responses.extend(triplets.trials().map(|t| TrialResponse::triplet(t, tri.answer(t), rng.random_range(0.5..30.0))));
        let mut buf = Vec::new();
        write_responses_csv(&mut buf, &responses).unwrap();
        let back = read_responses_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, responses);
    }

    #[test]
    fn wilcoxon_tracks_exact_enumeration(seed in any::<u64>(), n in 5usize..=10, shift in -1.5..1.5f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|a| {
                let e: f64 = StandardNormal.sample(&mut rng);
                a - shift - e
            })
            .collect();
        let res = wilcoxon_signed_rank(&x, &y).unwrap();
        let diffs: Vec<f64> = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| diffs[a].total_cmp(&diffs[b]));
        let mut ranks = vec![0.0; n];
        for (r, &i) in order.iter().enumerate() {
            ranks[i] = r as f64 + 1.0;
        }
        let exact = exact_p(&ranks, res.w_plus);
        prop_assert!((res.p - exact).abs() <= 0.02, "n={n}: {} vs {exact}", res.p);
    }
}
