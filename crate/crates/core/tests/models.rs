use ecg_core::models::{
    transfer_critic_to_denoiser, ArchConfig, Mode, Network, NetworkKind, NetworkSpec,
};
use ecg_tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn arch(d: usize) -> ArchConfig {
    ArchConfig {
        model_dim: d,
        ..ArchConfig::full_scale()
    }
}

fn generator_shapes(d: usize) -> Vec<Vec<usize>> {
    let mut t = vec![vec![128 * d], vec![8, 16 * d]];
    for (len, c) in [(32, 8 * d), (128, 4 * d), (512, 2 * d), (2048, d)] {
        t.extend([vec![len, c], vec![len, c], vec![len, c]]);
    }
    t.extend([vec![8192, 1], vec![5000, 1], vec![5000, 1]]);
    t
}

fn critic_shapes(d: usize) -> Vec<Vec<usize>> {
    let mut t = Vec::new();
    for (len, c) in [(1250, 1), (313, d), (79, 2 * d), (20, 4 * d), (5, 8 * d)] {
        t.extend([vec![len, c], vec![len, c], vec![len, c]]);
    }
    t.extend([vec![40 * d], vec![1]]);
    t
}

fn inception_shapes() -> Vec<Vec<usize>> {
    let mut t = Vec::new();
    for (conv, pool) in [(32, 16), (8, 4), (2, 1)] {
        t.extend([
            vec![conv, conv, 64],
            vec![conv, conv, 64],
            vec![conv, conv, 64],
            vec![pool, pool, 64],
        ]);
    }
    t.extend([vec![64], vec![5], vec![5]]);
    t
}

fn denoiser_shapes(d: usize) -> Vec<Vec<usize>> {
    let mut t = Vec::new();
    for (len, c) in [
        (1250, 1),
        (313, d),
        (79, 2 * d),
        (20, 4 * d),
        (80, 4 * d),
        (320, 2 * d),
        (1280, d),
        (5120, 1),
    ] {
        t.extend([vec![len, c], vec![len, c]]);
    }
    t.extend([vec![5000, 1], vec![5000, 1]]);
    t
}

fn traced_shapes(net: &mut Network, input: &Tensor, mode: Mode) -> Vec<Vec<usize>> {
    net.trace(input, mode)
        .unwrap()
        .iter()
        .map(|t| t.shape()[1..].to_vec())
        .collect()
}

#[test]
fn layer_shapes_for_several_widths() {
    for d in [2, 4, 16] {
        let a = arch(d);
        assert_eq!(
            NetworkSpec::generator(a).unwrap().output_shapes().unwrap(),
            generator_shapes(d)
        );
        assert_eq!(
            NetworkSpec::critic(a, 2).unwrap().output_shapes().unwrap(),
            critic_shapes(d)
        );
        assert_eq!(
            NetworkSpec::denoiser(a, 0)
                .unwrap()
                .output_shapes()
                .unwrap(),
            denoiser_shapes(d)
        );
    }
    assert_eq!(
        NetworkSpec::inception().output_shapes().unwrap(),
        inception_shapes()
    );
}

#[test]
fn forward_shapes_and_ranges_at_small_width() {
    for d in [2, 4] {
        let a = arch(d);
        let mut g = Network::new(NetworkSpec::generator(a).unwrap(), 1).unwrap();
        let out = traced_shapes(&mut g, &random(&[2, 100], 2), Mode::Train);
        assert_eq!(out, generator_shapes(d));
        let y = g.forward(&random(&[2, 100], 3), Mode::Infer).unwrap();
        assert!(y.data().iter().all(|v| (-1.0..=1.0).contains(v)));

        let mut c = Network::new(NetworkSpec::critic(a, 2).unwrap(), 4).unwrap();
        assert_eq!(
            traced_shapes(&mut c, &random(&[2, 5000, 1], 5), Mode::Train),
            critic_shapes(d)
        );

        let mut den = Network::new(NetworkSpec::denoiser(a, 0).unwrap(), 6).unwrap();
        let trace = den.trace(&random(&[2, 5000, 1], 7), Mode::Infer).unwrap();
        let shapes: Vec<Vec<usize>> = trace.iter().map(|t| t.shape()[1..].to_vec()).collect();
        assert_eq!(shapes, denoiser_shapes(d));
        assert!(trace
            .last()
            .unwrap()
            .data()
            .iter()
            .all(|v| (-1.0..=1.0).contains(v)));
    }
    let mut inc = Network::new(NetworkSpec::inception(), 8).unwrap();
    let p = inc
        .forward(&random(&[2, 64, 64, 1], 9), Mode::Train)
        .unwrap();
    assert_eq!(p.shape(), &[2, 5]);
    assert!(p.data().iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn parameter_counts_follow_layer_arithmetic() {
    let g = Network::new(NetworkSpec::generator(ArchConfig::full_scale()).unwrap(), 0).unwrap();
    assert_eq!(
        g.params().get("generator.dense0.weight").unwrap().numel() + 2048,
        206_848
    );
    let inc = Network::new(NetworkSpec::inception(), 0).unwrap();
    let dense = inc.params().get("inception.dense0.weight").unwrap().numel()
        + inc.params().get("inception.dense0.bias").unwrap().numel();
    assert_eq!(dense, 325);

    // Whole-network oracle for d = 16, written out layer by layer.
    let d = 16;
    let tconv = |i: usize, o: usize| 25 * i * o + o;
    let generator = (100 * 128 * d + 128 * d)
        + tconv(16 * d, 8 * d)
        + tconv(8 * d, 4 * d)
        + tconv(4 * d, 2 * d)
        + tconv(2 * d, d)
        + tconv(d, 1)
        + 2 * (8 * d + 4 * d + 2 * d + d);
    assert_eq!(g.count_params(), generator);
    let critic = tconv(1, 1)
        + tconv(1, d)
        + tconv(d, 2 * d)
        + tconv(2 * d, 4 * d)
        + tconv(4 * d, 8 * d)
        + 40 * d
        + 1;
    assert_eq!(
        NetworkSpec::critic(ArchConfig::full_scale(), 2)
            .unwrap()
            .count_params(),
        critic
    );
}

#[test]
fn count_is_unchanged_by_forward_passes() {
    let mut g = Network::new(NetworkSpec::generator(arch(2)).unwrap(), 0).unwrap();
    let before = g.count_params();
    g.forward(&random(&[2, 100], 1), Mode::Train).unwrap();
    assert_eq!(g.count_params(), before);
}

#[test]
fn transfer_copies_the_encoder_exactly() {
    let a = ArchConfig::for_length(4, 100, 512);
    let critic = Network::new(NetworkSpec::critic(a, 2).unwrap(), 11).unwrap();
    let mut den = Network::new(NetworkSpec::denoiser(a, 0).unwrap(), 12).unwrap();
    let fresh = den.clone();
    transfer_critic_to_denoiser(&critic, &mut den).unwrap();

    let x = random(&[3, 512, 1], 13);
    let mut plain_critic = Network::new(NetworkSpec::critic(a, 0).unwrap(), 99).unwrap();
    for p in critic.params().iter() {
        plain_critic.params_mut().set(&p.name, &p.value).unwrap();
    }
    let c_trace = plain_critic.trace(&x, Mode::Infer).unwrap();
    let d_trace = den.trace(&x, Mode::Infer).unwrap();
    // Conv + LReLU pairs: the fourth shared activation is layer 7 in both.
    for layer in [1, 3, 5, 7] {
        for (u, v) in c_trace[layer].data().iter().zip(d_trace[layer].data()) {
            assert!((u - v).abs() <= 1e-12);
        }
    }

    for p in den.params().iter().filter(|p| p.name.contains("tconv")) {
        assert_eq!(p.value.data(), fresh.params().get(&p.name).unwrap().data());
        assert!(
            p.name.ends_with("bias")
                || critic
                    .params()
                    .iter()
                    .all(|c| c.value.data() != p.value.data())
        );
    }
}

#[test]
fn transfer_rejects_mismatches() {
    let critic = Network::new(NetworkSpec::critic(arch(16), 2).unwrap(), 0).unwrap();
    let mut small = Network::new(NetworkSpec::denoiser(arch(8), 0).unwrap(), 0).unwrap();
    assert!(transfer_critic_to_denoiser(&critic, &mut small).is_err());
    let mut gen = Network::new(NetworkSpec::generator(arch(16)).unwrap(), 0).unwrap();
    assert!(transfer_critic_to_denoiser(&critic, &mut gen).is_err());
    assert_eq!(gen.kind(), NetworkKind::Generator);
}

#[test]
fn checkpoint_restores_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.ecgw");
    let a = ArchConfig::for_length(2, 8, 256);
    let mut g = Network::new(NetworkSpec::generator(a).unwrap(), 5).unwrap();
    g.forward(&random(&[4, 8], 1), Mode::Train).unwrap();
    g.save(&path).unwrap();
    let mut h = Network::new(NetworkSpec::generator(a).unwrap(), 6).unwrap();
    h.load(&path).unwrap();
    let z = random(&[3, 8], 2);
    assert_eq!(
        g.forward(&z, Mode::Infer).unwrap().data(),
        h.forward(&z, Mode::Infer).unwrap().data()
    );
}

#[test]
fn phase_shuffle_only_acts_in_training() {
    let a = ArchConfig::for_length(2, 8, 256);
    let mut c = Network::new(NetworkSpec::critic(a, 2).unwrap(), 1).unwrap();
    let x = random(&[4, 256, 1], 3);
    let first = c.forward(&x, Mode::Infer).unwrap();
    assert_eq!(first.data(), c.forward(&x, Mode::Infer).unwrap().data());
    let trained: Vec<Vec<f64>> = (0..4)
        .map(|_| c.forward(&x, Mode::Train).unwrap().to_vec())
        .collect();
    assert!(trained.iter().any(|t| t != first.data()));
}
