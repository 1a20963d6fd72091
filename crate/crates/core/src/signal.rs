use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};

/// Number of diagnostic classes per label vector.
pub const LABEL_COUNT: usize = 5;

pub type Label = [bool; LABEL_COUNT];

/// A sampled single-lead ECG waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(CoreError::BadSampleRate(sample_rate_hz));
        }
        Ok(Signal {
            samples,
            sample_rate_hz,
        })
    }

    pub fn zeros(len: usize, sample_rate_hz: f64) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate_hz)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Same rate, new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Signal {
        Signal {
            samples,
            sample_rate_hz: self.sample_rate_hz,
        }
    }

    pub(crate) fn check_compatible(&self, other: &Signal) -> Result<()> {
        if self.len() != other.len() {
            return Err(CoreError::LengthMismatch(self.len(), other.len()));
        }
        if self.sample_rate_hz != other.sample_rate_hz {
            return Err(CoreError::RateMismatch(
                self.sample_rate_hz,
                other.sample_rate_hz,
            ));
        }
        Ok(())
    }
}

/// Affine map sending the minimum to -1 and the maximum to +1.
///
/// Constant signals map to all zeros. Applying the map twice gives exactly
/// the same samples as applying it once.
pub fn scale_to_unit(s: &Signal) -> Result<Signal> {
    if s.is_empty() {
        return Err(CoreError::EmptySignal);
    }
    let (lo, hi) = s
        .samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if lo == hi {
        return Ok(s.with_samples(vec![0.0; s.len()]));
    }
    let (mid2, span) = (hi + lo, hi - lo);
    let samples = s
        .samples
        .iter()
        .map(|&v| {
            if v == lo {
                -1.0
            } else if v == hi {
                1.0
            } else {
                ((2.0 * v - mid2) / span).clamp(-1.0, 1.0)
            }
        })
        .collect();
    Ok(s.with_samples(samples))
}

/// Signals of a common length and rate with one label vector each.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    signals: Vec<Signal>,
    labels: Vec<Label>,
}

impl LabeledDataset {
    pub fn new(signals: Vec<Signal>, labels: Vec<Label>) -> Result<Self> {
        if signals.len() != labels.len() {
            return Err(CoreError::LabelCount {
                signals: signals.len(),
                labels: labels.len(),
            });
        }
        if let Some(first) = signals.first() {
            for s in &signals[1..] {
                first.check_compatible(s)?;
            }
        }
        Ok(LabeledDataset { signals, labels })
    }

    /// All-zero labels.
    pub fn unlabeled(signals: Vec<Signal>) -> Result<Self> {
        let labels = vec![[false; LABEL_COUNT]; signals.len()];
        Self::new(signals, labels)
    }

    pub fn empty() -> Self {
        LabeledDataset {
            signals: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn signals(&self) -> &[Signal] {
        &self.signals
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    pub fn into_parts(self) -> (Vec<Signal>, Vec<Label>) {
        (self.signals, self.labels)
    }

    fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            signals: indices.iter().map(|&i| self.signals[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// A clean signal and its corrupted counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalPair {
    pub clean: Signal,
    pub noisy: Signal,
}

impl SignalPair {
    pub fn new(clean: Signal, noisy: Signal) -> Result<Self> {
        clean.check_compatible(&noisy)?;
        Ok(SignalPair { clean, noisy })
    }
}

/// Partition sizes for `total` items by largest remainder.
pub(crate) fn partition_sizes(total: usize, fractions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut short = total - sizes.iter().sum::<usize>().min(total);
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if short == 0 {
            break;
        }
        sizes[i] += 1;
        short -= 1;
    }
    sizes
}

pub(crate) fn check_fractions(fractions: &[f64]) -> Result<()> {
    let sum: f64 = fractions.iter().sum();
    if fractions.is_empty()
        || fractions.iter().any(|f| f.is_nan() || *f <= 0.0)
        || (sum - 1.0).abs() > 1e-9
    {
        return Err(CoreError::BadFractions(fractions.to_vec()));
    }
    Ok(())
}

/// Seeded shuffle followed by a split into consecutive parts.
pub fn split_dataset(
    ds: &LabeledDataset,
    fractions: &[f64],
    seed: u64,
) -> Result<Vec<LabeledDataset>> {
    check_fractions(fractions)?;
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut start = 0;
    Ok(partition_sizes(ds.len(), fractions)
        .into_iter()
        .map(|n| {
            let part = ds.subset(&order[start..start + n]);
            start += n;
            part
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(v: &[f64]) -> Signal {
        Signal::new(v.to_vec(), 500.0).unwrap()
    }

    #[test]
    fn scaling_examples() {
        assert_eq!(
            scale_to_unit(&sig(&[0.0, 5.0, 10.0])).unwrap().samples(),
            &[-1.0, 0.0, 1.0]
        );
        assert_eq!(
            scale_to_unit(&sig(&[-1.0, 1.0])).unwrap().samples(),
            &[-1.0, 1.0]
        );
        assert_eq!(
            scale_to_unit(&sig(&[3.0, 3.0, 3.0])).unwrap().samples(),
            &[0.0; 3]
        );
        assert!(matches!(
            scale_to_unit(&sig(&[])),
            Err(CoreError::EmptySignal)
        ));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = LabeledDataset::unlabeled((0..10).map(|i| sig(&[i as f64])).collect()).unwrap();
        let parts = split_dataset(&ds, &[0.8, 0.2], 1).unwrap();
        assert_eq!(
            parts.iter().map(LabeledDataset::len).collect::<Vec<_>>(),
            vec![8, 2]
        );
        assert_eq!(parts, split_dataset(&ds, &[0.8, 0.2], 1).unwrap());
        assert!(split_dataset(&ds, &[0.5, 0.6], 1).is_err());
        assert!(split_dataset(&ds, &[1.5, -0.5], 1).is_err());
    }

    #[test]
    fn largest_remainder_is_exhaustive() {
        assert_eq!(partition_sizes(10, &[1.0 / 3.0; 3]), vec![4, 3, 3]);
        assert_eq!(partition_sizes(0, &[0.5, 0.5]), vec![0, 0]);
        assert_eq!(partition_sizes(7, &[0.9, 0.1]), vec![6, 1]);
    }

    #[test]
    fn dataset_rejects_mixed_lengths() {
        let r = LabeledDataset::unlabeled(vec![sig(&[1.0]), sig(&[1.0, 2.0])]);
        assert!(matches!(r, Err(CoreError::LengthMismatch(1, 2))));
    }
}
