use ecg_core::evaluation::{
    delta_hr, evaluate_denoiser, inception_score, mse, nn_distance_self, nn_distance_train, snr_db,
    write_reports, LabelProbs, Method,
};
use ecg_core::synthesis::{make_training_pairs, mcsharry_generate, McSharryParams};
use ecg_core::Signal;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_signals(n: usize, len: usize, seed: u64) -> Vec<Signal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            Signal::new(
                (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
                500.0,
            )
            .unwrap()
        })
        .collect()
}

fn euclid(a: &Signal, b: &Signal) -> f64 {
    a.samples()
        .iter()
        .zip(b.samples())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn brute_self(ds: &[Signal]) -> f64 {
    let mut total = 0.0;
    for i in 0..ds.len() {
        let mut best = f64::INFINITY;
        for j in 0..ds.len() {
            if i != j {
                best = best.min(euclid(&ds[i], &ds[j]));
            }
        }
        total += best;
    }
    total / ds.len() as f64
}

fn brute_train(ds: &[Signal], train: &[Signal]) -> f64 {
    ds.iter()
        .map(|s| {
            train
                .iter()
                .map(|t| euclid(s, t))
                .fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>()
        / ds.len() as f64
}

#[test]
fn distances_match_brute_force() {
    let ds = random_signals(100, 64, 1);
    let train = random_signals(100, 64, 2);
    assert!((nn_distance_self(&ds).unwrap() - brute_self(&ds)).abs() < 1e-12);
    assert!((nn_distance_train(&ds, &train).unwrap() - brute_train(&ds, &train)).abs() < 1e-12);
    assert_eq!(nn_distance_train(&ds, &ds).unwrap(), 0.0);
}

#[test]
fn inception_score_closed_forms() {
    let same = vec![[0.3, 0.1, 0.05, 0.5, 0.05]; 40];
    assert!((inception_score(&same, 1).unwrap().0 - 1.0).abs() < 1e-9);
    let (mean, std) = inception_score(&same, 10).unwrap();
    assert!((mean - 1.0).abs() < 1e-9 && std < 1e-9);

    let mut one_hot = Vec::new();
    for k in 0..5 {
        let mut row = [0.0; 5];
        row[k] = 1.0;
        one_hot.push(row);
    }
    assert!((inception_score(&one_hot, 1).unwrap().0 - 5.0).abs() < 1e-9);
}

#[test]
fn inception_score_bounds_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let rows = rng.random_range(1..50);
        let m: Vec<LabelProbs> = (0..rows)
            .map(|_| {
                let mut r = [0.0; 5];
                for v in r.iter_mut() {
                    *v = rng.random_range(0.0..1.0);
                }
                r[rng.random_range(0..5)] += 1e-3;
                r.map(|v: f64| v.min(1.0))
            })
            .collect();
        let (s, _) = inception_score(&m, 1).unwrap();
        assert!((1.0 - 1e-12..=5.0 + 1e-12).contains(&s), "{s}");
    }
}

#[test]
fn snr_closed_form_and_consistency() {
    let clean = mcsharry_generate(&McSharryParams::default()).unwrap();
    let test = clean.with_samples(clean.samples().iter().map(|v| v * 1.1).collect());
    assert!((snr_db(&clean, &test).unwrap() - 20.0).abs() < 1e-9);
    let power = clean.samples().iter().map(|v| v * v).sum::<f64>() / clean.len() as f64;
    let expected = 10.0 * (power / mse(&clean, &test).unwrap()).log10();
    assert!((snr_db(&clean, &test).unwrap() - expected).abs() < 1e-9);
}

#[test]
fn heart_rate_error_examples() {
    let a = mcsharry_generate(&McSharryParams::with_rate(60.0)).unwrap();
    let b = mcsharry_generate(&McSharryParams::with_rate(90.0)).unwrap();
    assert!((delta_hr(&a, &b).unwrap() - 0.5).abs() < 0.1);
    let flat = Signal::zeros(a.len(), 500.0).unwrap();
    assert!((delta_hr(&a, &flat).unwrap() - 1.0).abs() < 0.05);
    assert_eq!(delta_hr(&a, &a).unwrap(), 0.0);
    assert!(delta_hr(&a, &Signal::zeros(a.len(), 250.0).unwrap()).is_err());
}

#[test]
fn identity_on_clean_pairs_is_perfect() {
    let clean: Vec<Signal> = [60.0, 75.0, 90.0]
        .iter()
        .map(|&bpm| mcsharry_generate(&McSharryParams::with_rate(bpm)).unwrap())
        .collect();
    let pairs = make_training_pairs(&clean, 0.0, 3).unwrap();
    let r = evaluate_denoiser(&mut Method::None, &pairs, "gamma0").unwrap();
    assert_eq!(r.mse, 0.0);
    assert_eq!(r.delta_hr_hz, 0.0);
    assert_eq!(r.snr_db, f64::INFINITY);

    let noisy = make_training_pairs(&clean, 1.0, 3).unwrap();
    let mut rows = Vec::new();
    for mut m in [Method::None, Method::Bandpass, Method::Wavelet] {
        let name = m.name();
        rows.push(evaluate_denoiser(&mut m, &noisy, name).unwrap());
    }
    let mut buf = Vec::new();
    write_reports(&rows, &mut buf).unwrap();
    let mut rdr = csv::Reader::from_reader(&buf[..]);
    let tags: Vec<String> = rdr.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert_eq!(tags, ["none", "bandpass", "wavelet"]);
    assert!(evaluate_denoiser(&mut Method::None, &[], "empty").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shrinking_the_residual_raises_snr(scale in 0.01f64..1.0, factor in 0.05f64..0.95, seed in 0u64..1000) {
        let clean = random_signals(1, 128, seed).remove(0);
        let noise = random_signals(1, 128, seed + 1).remove(0);
        let mk = |k: f64| clean.with_samples(clean.samples().iter().zip(noise.samples()).map(|(c, n)| c + k * n).collect());
        prop_assert!(snr_db(&clean, &mk(scale * factor)).unwrap() > snr_db(&clean, &mk(scale)).unwrap());
    }

    #[test]
    fn metrics_ignore_dataset_order(seed in 0u64..1000) {
        let ds = random_signals(12, 16, seed);
        let train = random_signals(9, 16, seed + 1);
        let mut shuffled = ds.clone();
        shuffled.reverse();
        shuffled.swap(0, 5);
        prop_assert!((nn_distance_self(&ds).unwrap() - nn_distance_self(&shuffled).unwrap()).abs() < 1e-12);
        prop_assert!((nn_distance_train(&ds, &train).unwrap() - nn_distance_train(&shuffled, &train).unwrap()).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let probs: Vec<LabelProbs> = (0..20).map(|_| [0; 5].map(|_| rng.random_range(0.01..1.0))).collect();
        let mut rev = probs.clone();
        rev.reverse();
        let (a, _) = inception_score(&probs, 1).unwrap();
        let (b, _) = inception_score(&rev, 1).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((1.0..=5.0).contains(&a));
    }
}
