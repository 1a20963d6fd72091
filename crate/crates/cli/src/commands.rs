use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use ecg_core::evaluation::{evaluate_denoiser, write_reports, Method};
use ecg_core::io::{read_dataset, read_pairs, write_dataset, write_pairs, DatasetFormat};
use ecg_core::models::{Mode, Network, NetworkSpec};
use ecg_core::synthesis::{make_training_pairs_with, mcsharry_generate, McSharryParams};
use ecg_core::training::{
    ablation_sweep, train_denoiser, train_gan, train_inception, write_ablation_csv, AblationData,
    Composition, DenoiserVariant, TrainLog,
};
use ecg_core::{LabeledDataset, Signal, SignalPair};
use ecg_tensor::no_grad;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::{Command, CompositionArg, EvalMethod, SynthModel, TrainTarget, Variant};

const GENERATE_BATCH: usize = 64;

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth {
            model,
            count,
            out,
            hr,
            hr_max,
            rate,
            length,
            checkpoint,
            config,
            seed,
        } => {
            let cfg = RunConfig::load(config.as_deref())?;
            let seed = seed.unwrap_or(cfg.seed);
            let signals = match model {
                SynthModel::Mcsharry => {
                    if checkpoint.is_some() {
                        bail!("--checkpoint only applies to --model gan");
                    }
                    synth_mcsharry(count, hr, hr_max, rate, length, seed)?
                }
                SynthModel::Gan => {
                    let Some(path) = checkpoint else {
                        bail!("--model gan requires --checkpoint");
                    };
                    synth_gan(&cfg, &path, count, rate, length, seed)?
                }
            };
            write_dataset(&LabeledDataset::unlabeled(signals)?, &out)
                .with_context(|| out.display().to_string())
        }
        Command::Noise {
            input,
            out,
            gamma,
            config,
            seed,
        } => {
            let cfg = RunConfig::load(config.as_deref())?;
            let gamma = gamma.unwrap_or(cfg.gamma);
            let ds = load_dataset(&input)?;
            let pairs = if ds.is_empty() {
                if !(gamma.is_finite() && gamma >= 0.0) {
                    bail!("gamma must be non-negative, got {gamma}");
                }
                Vec::new()
            } else {
                make_training_pairs_with(
                    ds.signals(),
                    gamma,
                    seed.unwrap_or(cfg.seed),
                    &cfg.noise_ranges(),
                )?
            };
            write_pairs(&pairs, &out).with_context(|| out.display().to_string())
        }
        Command::Train {
            target,
            data,
            out,
            config,
            seed,
            variant,
            critic,
            classifier,
        } => {
            let cfg = RunConfig::load(config.as_deref())?;
            let seed = seed.unwrap_or(cfg.seed);
            if critic.is_some()
                && !(matches!(target, TrainTarget::Denoiser) && variant == Variant::Pretrained)
            {
                bail!("--critic only applies to `train denoiser --variant pretrained`");
            }
            if classifier.is_some() && !matches!(target, TrainTarget::Gan) {
                bail!("--classifier only applies to `train gan`");
            }
            if variant != Variant::Baseline && !matches!(target, TrainTarget::Denoiser) {
                bail!("--variant only applies to `train denoiser`");
            }
            fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
            match target {
                TrainTarget::Gan => train_gan_cmd(&cfg, &data, &out, seed, classifier.as_deref()),
                TrainTarget::Inception => {
                    let ds = load_dataset(&data)?;
                    let (net, log) = train_inception(&ds, &cfg.classifier(), seed)?;
                    net.save(out.join("inception.ecgw"))?;
                    write_logs(&log, &out)
                }
                TrainTarget::Denoiser => {
                    train_denoiser_cmd(&cfg, &data, &out, seed, variant, critic.as_deref())
                }
            }
        }
        Command::Eval {
            pairs,
            method,
            all,
            checkpoint,
            config,
            out,
        } => {
            let cfg = RunConfig::load(config.as_deref())?;
            let pairs = load_pairs(&pairs)?;
            let len = pairs.first().map_or(0, |p| p.clean.len());
            let mut reports = Vec::new();
            let methods: Vec<EvalMethod> = if all {
                vec![EvalMethod::None, EvalMethod::Bandpass, EvalMethod::Wavelet]
            } else {
                method.into_iter().collect()
            };
            for m in methods {
                let mut method = match m {
                    EvalMethod::None => Method::None,
                    EvalMethod::Bandpass => Method::Bandpass,
                    EvalMethod::Wavelet => Method::Wavelet,
                    EvalMethod::Denoiser => continue,
                };
                let tag = method.name();
                reports.push(evaluate_denoiser(&mut method, &pairs, tag)?);
            }
            if all || matches!(method, Some(EvalMethod::Denoiser)) {
                if !all && checkpoint.is_empty() {
                    bail!("--method denoiser requires --checkpoint");
                }
                for path in &checkpoint {
                    let mut net = load_network(NetworkSpec::denoiser(cfg.arch(len), 0)?, path)?;
                    let tag = if checkpoint.len() == 1 {
                        "denoiser".to_string()
                    } else {
                        format!(
                            "denoiser:{}",
                            path.file_stem().unwrap_or_default().to_string_lossy()
                        )
                    };
                    reports.push(evaluate_denoiser(
                        &mut Method::Denoiser(&mut net),
                        &pairs,
                        &tag,
                    )?);
                }
            } else if !checkpoint.is_empty() {
                bail!("--checkpoint only applies to --method denoiser or --all");
            }
            emit(out.as_deref(), |w| Ok(write_reports(&reports, w)?))
        }
        Command::Sweep {
            real,
            synthetic,
            real_test,
            synthetic_test,
            sizes,
            compositions,
            config,
            seed,
            out,
        } => {
            let cfg = RunConfig::load(config.as_deref())?;
            let [real, synthetic, real_test, synthetic_test] =
                [&real, &synthetic, &real_test, &synthetic_test].map(|p| load_pairs(p));
            let (real, synthetic, real_test, synthetic_test) =
                (real?, synthetic?, real_test?, synthetic_test?);
            let len = real
                .first()
                .or(synthetic.first())
                .map_or(0, |p| p.clean.len());
            let data = AblationData {
                real_train: &real,
                synthetic_train: &synthetic,
                real_test: &real_test,
                synthetic_test: &synthetic_test,
            };
            let compositions: Vec<Composition> = compositions
                .iter()
                .map(|c| match c {
                    CompositionArg::RealOnly => Composition::RealOnly,
                    CompositionArg::SyntheticOnly => Composition::SyntheticOnly,
                    CompositionArg::Mixed => Composition::Mixed,
                })
                .collect();
            let rows = ablation_sweep(
                &data,
                &compositions,
                &sizes,
                &cfg.denoiser(len),
                seed.unwrap_or(cfg.seed),
            )?;
            emit(out.as_deref(), |w| Ok(write_ablation_csv(&rows, w)?))
        }
    }
}

fn synth_mcsharry(
    count: usize,
    hr: f64,
    hr_max: Option<f64>,
    rate: f64,
    length: usize,
    seed: u64,
) -> Result<Vec<Signal>> {
    if let Some(hi) = hr_max {
        if hi.is_nan() || hi < hr {
            bail!("--hr-max {hi} is below --hr {hr}");
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let bpm = match hr_max {
                Some(hi) if hi > hr => rng.random_range(hr..hi),
                _ => hr,
            };
            let p = McSharryParams {
                heart_rate_bpm: bpm,
                sample_rate_hz: rate,
                duration_s: length as f64 / rate,
                ..McSharryParams::default()
            };
            let s = mcsharry_generate(&p)?;
            if s.len() < length {
                bail!("generated {} samples, wanted {length}", s.len());
            }
            Ok(s.with_samples(s.samples()[..length].to_vec()))
        })
        .collect()
}

fn synth_gan(
    cfg: &RunConfig,
    checkpoint: &Path,
    count: usize,
    rate: f64,
    length: usize,
    seed: u64,
) -> Result<Vec<Signal>> {
    let arch = cfg.arch(length);
    let mut generator = load_network(NetworkSpec::generator(arch)?, checkpoint)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let _guard = no_grad();
    let mut signals = Vec::with_capacity(count);
    while signals.len() < count {
        let n = GENERATE_BATCH.min(count - signals.len());
        let z = cfg
            .latent_distribution()
            .sample(n, arch.latent_len, &mut rng);
        let y = generator.forward(&z, Mode::Infer)?;
        for chunk in y.data().chunks(length) {
            signals.push(Signal::new(chunk.to_vec(), rate)?);
        }
    }
    Ok(signals)
}

fn train_gan_cmd(
    cfg: &RunConfig,
    data: &Path,
    out: &Path,
    seed: u64,
    classifier: Option<&Path>,
) -> Result<()> {
    let ds = load_dataset(data)?;
    let len = ds.signals().first().map_or(0, Signal::len);
    let mut classifier = match classifier {
        Some(p) => Some(load_network(NetworkSpec::inception(), p)?),
        None => None,
    };
    let outcome = train_gan(ds.signals(), &cfg.gan(len), seed, classifier.as_mut())?;
    outcome.generator.save(out.join("generator.ecgw"))?;
    outcome.critic.save(out.join("critic.ecgw"))?;
    write_logs(&outcome.log, out)
}

fn train_denoiser_cmd(
    cfg: &RunConfig,
    data: &Path,
    out: &Path,
    seed: u64,
    variant: Variant,
    critic: Option<&Path>,
) -> Result<()> {
    let pairs = load_pairs(data)?;
    let len = pairs.first().map_or(0, |p| p.clean.len());
    let dcfg = cfg.denoiser(len);
    let critic_net = match (variant, critic) {
        (Variant::Pretrained, None) => bail!("--variant pretrained requires --critic"),
        (Variant::Pretrained, Some(p)) => Some(load_network(
            NetworkSpec::critic(dcfg.arch, cfg.phase_shuffle)?,
            p,
        )?),
        _ => None,
    };
    let variant = match (variant, &critic_net) {
        (Variant::Pretrained, Some(c)) => DenoiserVariant::Pretrained(c),
        (Variant::PhaseShuffle, _) => DenoiserVariant::PhaseShuffle,
        _ => DenoiserVariant::Baseline,
    };
    let (net, log) = train_denoiser(&pairs, &dcfg, variant, seed)?;
    net.save(out.join("denoiser.ecgw"))?;
    write_logs(&log, out)
}

fn load_network(spec: NetworkSpec, path: &Path) -> Result<Network> {
    let mut net = Network::new(spec, 0)?;
    net.load(path).with_context(|| path.display().to_string())?;
    Ok(net)
}

fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
        _ => DatasetFormat::RawF32,
    };
    read_dataset(path, format).with_context(|| path.display().to_string())
}

fn load_pairs(path: &Path) -> Result<Vec<SignalPair>> {
    read_pairs(path).with_context(|| path.display().to_string())
}

fn write_logs(log: &TrainLog, dir: &Path) -> Result<()> {
    emit(
        Some(&dir.join("steps.csv")),
        |w| Ok(log.write_steps_csv(w)?),
    )?;
    emit(Some(&dir.join("epochs.csv")), |w| {
        Ok(log.write_epochs_csv(w)?)
    })
}

fn emit(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(path) => {
            let mut w =
                BufWriter::new(File::create(path).with_context(|| path.display().to_string())?);
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}
