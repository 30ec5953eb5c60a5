use netlogit::analysis::classic_mnl_probabilities;
use netlogit::dynamics::{gumbel_choice, write_trace_csv};
use netlogit::*;
use proptest::prelude::*;

fn example_market() -> (Market, PriceVector) {
    let m = Market::with_uniform_beta(vec![0.993, 0.480, 0.159], 0.1, 0.2).unwrap();
    let p = PriceVector::new(vec![11.461, 9.912, 9.298]).unwrap();
    (m, p)
}

fn assert_within_se(counts: &[u64], draws: u64, expected: &[f64], z: f64) {
    let n = draws as f64;
    for (i, (&c, &pi)) in counts.iter().zip(expected).enumerate() {
        let freq = c as f64 / n;
        let se = (pi * (1.0 - pi) / n).sqrt().max(1.0 / n);
        assert!(
            (freq - pi).abs() <= z * se,
            "slot {i}: frequency {freq} vs {pi} (se {se})"
        );
    }
}

#[test]
fn golden_first_draws_seed_42() {
    let (m, p) = example_market();
    let mut s = SimulationState::new(3, 42);
    let draws: Vec<usize> = (0..10).map(|_| s.step(&m, &p).unwrap()).collect();
    assert_eq!(draws, vec![3, 3, 1, 3, 1, 0, 1, 3, 3, 0]);
    let mut s = SimulationState::new(3, 42);
    let draws: Vec<usize> = (0..10)
        .map(|_| s.step_with(&m, &p, SamplingMode::Gumbel).unwrap())
        .collect();
    assert_eq!(draws, vec![1, 3, 3, 0, 0, 2, 3, 0, 3, 2]);
    assert_eq!(s.counts(), &[4, 2, 3, 5]);
}

#[test]
fn traces_are_reproducible() {
    let (m, p) = example_market();
    let write = |seed| {
        let trace = run(&m, &p, 20_000, seed, 1000).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf, 17).unwrap();
        buf
    };
    assert_eq!(write(7), write(7));
    assert_ne!(write(7), write(8));
}

#[test]
fn gumbel_frequencies_match_choice_probabilities() {
    let m = Market::new(vec![0.4, 1.1, -0.3], vec![0.5, 1.0, 0.2], 0.6).unwrap();
    let p = PriceVector::new(vec![1.0, 1.5, 0.5]).unwrap();
    let mut s = SimulationState::with_initial_counts(vec![5, 3, 8, 2], 11).unwrap();
    let pi = s.choice_probabilities(&m, &p).unwrap();
    let draws = 1_000_000u64;
    let mut counts = vec![0u64; 4];
    for _ in 0..draws {
        counts[gumbel_choice(&mut s, &m, &p).unwrap()] += 1;
    }
    assert_eq!(s.counts(), &[5, 3, 8, 2]);
    assert_within_se(&counts, draws, pi.as_slice(), 3.0);
}

#[test]
fn weak_network_reduces_to_classic_logit() {
    let m = Market::new(vec![0.4, 1.1], vec![0.5, 1.0], 1e-6).unwrap();
    let p = PriceVector::new(vec![1.0, 1.5]).unwrap();
    let classic = classic_mnl_probabilities(&m, &p).unwrap();
    let mut s = SimulationState::with_initial_counts(vec![9, 2, 5], 3).unwrap();
    let draws = 1_000_000u64;
    let mut counts = vec![0u64; 3];
    for _ in 0..draws {
        counts[gumbel_choice(&mut s, &m, &p).unwrap()] += 1;
    }
    assert_within_se(&counts, draws, classic.as_slice(), 3.0);
}

#[test]
fn prohibitive_price_means_no_purchase() {
    let m = Market::new(vec![0.0], vec![1.0], 0.5).unwrap();
    let p = PriceVector::new(vec![100.0]).unwrap();
    let mut s = SimulationState::new(1, 5);
    let draws = 1_000_000u64;
    let bought = (0..draws)
        .filter(|_| gumbel_choice(&mut s, &m, &p).unwrap() == 0)
        .count() as f64;
    assert!(bought / draws as f64 <= 1e-6);
}

#[test]
fn one_step_increment_has_mean_pi() {
    let (m, p) = example_market();
    let counts = vec![40, 25, 10, 60];
    let pi = SimulationState::with_initial_counts(counts.clone(), 0)
        .unwrap()
        .choice_probabilities(&m, &p)
        .unwrap();
    let replays = 200_000u64;
    let mut hits = vec![0u64; 4];
    for seed in 0..replays {
        let mut s = SimulationState::with_initial_counts(counts.clone(), seed).unwrap();
        hits[s.step(&m, &p).unwrap()] += 1;
    }
    assert_within_se(&hits, replays, pi.as_slice(), 3.0);
}

#[test]
fn initial_counts_do_not_change_the_limit() {
    let m = Market::with_uniform_beta(vec![2.0, 1.5, 1.0, 0.5], 1.0, 0.5).unwrap();
    let p = PriceVector::uniform(4, 1.0).unwrap();
    for (seed, counts) in [
        vec![1, 1, 1, 1, 1],
        vec![10, 1, 1, 1, 1],
        vec![1, 1, 1, 1, 10],
        vec![3, 7, 2, 9, 5],
    ]
    .into_iter()
    .enumerate()
    {
        let mut opts = RunOptions::new(200_000, seed as u64, 200_000);
        opts.initial_counts = Some(counts);
        let trace = run_with(&m, &p, &opts).unwrap();
        assert!(trace.final_l1() < 0.05, "seed {seed}: {}", trace.final_l1());
    }
}

#[test]
fn symmetric_duopoly_splits_evenly() {
    let m = Market::new(vec![0.0, 0.0], vec![1.0, 1.0], 0.5).unwrap();
    let p = PriceVector::uniform(2, 0.0).unwrap();
    for seed in 0..10 {
        let s = run(&m, &p, 100_000, seed, 100_000).unwrap().final_shares();
        assert!((s.get(0) - s.get(1)).abs() < 0.05);
    }
}

#[test]
fn simulated_revenue_matches_long_run_revenue() {
    let (m, p) = example_market();
    let exact = total_revenue(&m, &p).unwrap();
    let samples: Vec<f64> = (0..40)
        .map(|seed| {
            let s = run(&m, &p, 100_000, seed, 100_000).unwrap().final_shares();
            p.as_slice().iter().zip(s.products()).map(|(a, b)| a * b).sum()
        })
        .collect();
    let k = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / k;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let se = (var / k).sqrt();
    assert!((mean - exact).abs() <= 3.0 * se, "{mean} vs {exact}, se {se}");
}

#[test]
fn single_precision_simulation() {
    let m = MarketParams::<f32>::with_uniform_beta(vec![1.0, 0.5], 1.0, 0.5).unwrap();
    let p = Prices::<f32>::uniform(2, 1.0).unwrap();
    let trace = run(&m, &p, 50_000, 1, 10_000).unwrap();
    assert_eq!(trace.checkpoints.len(), 5);
    assert!(trace.final_l1() < 0.05);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counts_are_conserved(
        init in prop::collection::vec(1u64..=10, 2..6),
        consumers in 1u64..2000,
        seed in any::<u64>(),
    ) {
        let n = init.len() - 1;
        let m = Market::with_uniform_beta(vec![0.5; n], 0.5, 0.5).unwrap();
        let p = PriceVector::uniform(n, 1.0).unwrap();
        let start: u64 = init.iter().sum();
        let mut opts = RunOptions::new(consumers, seed, 97);
        opts.initial_counts = Some(init.clone());
        let trace = run_with(&m, &p, &opts).unwrap();
        let st = &trace.final_state;
        prop_assert_eq!(st.counts().iter().sum::<u64>(), start + consumers);
        prop_assert!(st.counts().iter().zip(&init).all(|(d, d0)| d >= d0));
        prop_assert!(trace.checkpoints.windows(2).all(|w| w[0].k < w[1].k));
        prop_assert_eq!(trace.checkpoints.last().unwrap().k, consumers);
    }

    #[test]
    fn mean_field_reaches_equilibrium(
        raw in prop::collection::vec(0.05f64..1.0, 4),
        r in 0.05f64..0.95,
    ) {
        let m = Market::new(vec![1.0, 0.2, -0.5], vec![0.3, 1.0, 2.0], r).unwrap();
        let p = PriceVector::new(vec![2.0, 0.5, 0.1]).unwrap();
        let total: f64 = raw.iter().sum();
        let phi0 = ShareVector::new(raw.iter().map(|v| v / total).collect()).unwrap();
        let out = integrate_mean_field(&m, &p, &phi0, 0.1, 10_000).unwrap();
        let star = equilibrium_shares(&m, &p).unwrap();
        prop_assert!(out.l1_distance(&star) < 1e-6);
        prop_assert!((out.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
