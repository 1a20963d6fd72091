//! `ECGD` signal containers and CSV ingestion.
//!
//! `ECGD` version 1, little-endian:
//!
//! ```text
//! magic        b"ECGD"
//! version      u16 = 1
//! count        u32
//! length       u32
//! sample_rate  f32
//! samples      f32 × count × length
//! labels       u8 × count × 5   (each 0 or 1)
//! ```
//!
//! Version 2 stores clean/noisy pairs: the same header, then per record a
//! clean block of `length` samples followed by the noisy block. It carries
//! no labels.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{CoreError, Result};
use crate::signal::{Label, LabeledDataset, Signal, SignalPair, LABEL_COUNT};

pub const DATASET_MAGIC: [u8; 4] = *b"ECGD";
pub const DATASET_VERSION: u16 = 1;
pub const PAIRS_VERSION: u16 = 2;
/// Bytes before the first sample.
pub const HEADER_LEN: usize = 18;
/// Rate assigned to CSV signals, which carry no rate of their own.
pub const CSV_SAMPLE_RATE_HZ: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    RawF32,
    Csv,
}

struct Header {
    version: u16,
    count: usize,
    length: usize,
    sample_rate_hz: f64,
}

fn write_header<W: Write>(
    w: &mut W,
    version: u16,
    count: usize,
    length: usize,
    rate: f64,
) -> Result<()> {
    w.write_all(&DATASET_MAGIC)?;
    w.write_all(&version.to_le_bytes())?;
    w.write_all(&(count as u32).to_le_bytes())?;
    w.write_all(&(length as u32).to_le_bytes())?;
    w.write_all(&(rate as f32).to_le_bytes())?;
    Ok(())
}

fn fill<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => CoreError::Truncated(what.to_string()),
        _ => CoreError::Io(e),
    })
}

fn read_header<R: Read>(r: &mut R, version: u16) -> Result<Header> {
    let mut buf = [0u8; HEADER_LEN];
    fill(r, &mut buf, "header")?;
    let magic: [u8; 4] = buf[0..4].try_into().expect("4 bytes");
    if magic != DATASET_MAGIC {
        return Err(CoreError::BadMagic {
            expected: DATASET_MAGIC,
            found: magic,
        });
    }
    let found = u16::from_le_bytes([buf[4], buf[5]]);
    if found != version {
        return Err(CoreError::UnsupportedVersion(found));
    }
    let word = |i: usize| u32::from_le_bytes(buf[i..i + 4].try_into().expect("4 bytes"));
    Ok(Header {
        version: found,
        count: word(6) as usize,
        length: word(10) as usize,
        sample_rate_hz: f32::from_bits(word(14)) as f64,
    })
}

fn write_samples<W: Write>(w: &mut W, samples: &[f64]) -> Result<()> {
    for &v in samples {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_samples<R: Read>(r: &mut R, length: usize, what: &str) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; length * 4];
    fill(r, &mut buf, what)?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect())
}

fn common_shape<'a>(signals: impl IntoIterator<Item = &'a Signal>) -> (usize, f64) {
    signals
        .into_iter()
        .next()
        .map_or((0, CSV_SAMPLE_RATE_HZ), |s| (s.len(), s.sample_rate_hz()))
}

/// Samples are stored as `f32`; values already representable in `f32`
/// round-trip bit for bit.
pub fn write_dataset_to<W: Write>(ds: &LabeledDataset, w: &mut W) -> Result<()> {
    let (length, rate) = common_shape(ds.signals());
    write_header(w, DATASET_VERSION, ds.len(), length, rate)?;
    for s in ds.signals() {
        write_samples(w, s.samples())?;
    }
    for label in ds.labels() {
        let bytes: Vec<u8> = label.iter().map(|&b| b as u8).collect();
        w.write_all(&bytes)?;
    }
    Ok(())
}

pub fn read_dataset_from<R: Read>(r: &mut R) -> Result<LabeledDataset> {
    let header = read_header(r, DATASET_VERSION)?;
    let mut signals = Vec::with_capacity(header.count);
    for i in 0..header.count {
        let samples = read_samples(r, header.length, &format!("signal {i} of {}", header.count))?;
        signals.push(Signal::new(samples, header.sample_rate_hz)?);
    }
    let mut labels = Vec::with_capacity(header.count);
    for i in 0..header.count {
        let mut bytes = [0u8; LABEL_COUNT];
        fill(r, &mut bytes, &format!("labels of signal {i}")).map_err(|_| {
            CoreError::LabelCount {
                signals: header.count,
                labels: i,
            }
        })?;
        labels.push(decode_label(&bytes)?);
    }
    debug_assert_eq!(header.version, DATASET_VERSION);
    LabeledDataset::new(signals, labels)
}

fn decode_label(bytes: &[u8]) -> Result<Label> {
    let mut label = [false; LABEL_COUNT];
    for (slot, &b) in label.iter_mut().zip(bytes) {
        *slot = match b {
            0 => false,
            1 => true,
            other => return Err(CoreError::InvalidLabel(other)),
        };
    }
    Ok(label)
}

pub fn write_dataset(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset_to(ds, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Sibling label file of a CSV signal file: `a.csv` → `a.labels.csv`.
pub fn csv_labels_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.labels.csv"))
}

pub fn read_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<LabeledDataset> {
    let path = path.as_ref();
    match format {
        DatasetFormat::RawF32 => read_dataset_from(&mut BufReader::new(File::open(path)?)),
        DatasetFormat::Csv => {
            let labels_path = csv_labels_path(path);
            let labels = labels_path.exists().then_some(labels_path);
            read_csv_dataset(path, labels.as_deref(), CSV_SAMPLE_RATE_HZ)
        }
    }
}

fn csv_rows(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    reader
        .records()
        .map(|r| Ok(r?.iter().map(str::to_string).collect()))
        .collect()
}

fn parse_number(field: &str, row: usize) -> Result<f64> {
    field
        .parse()
        .map_err(|_| CoreError::InvalidParameter(format!("row {row}: `{field}` is not a number")))
}

/// One signal per row; labels (five 0/1 fields per row) from `labels`, or
/// all zero when absent.
pub fn read_csv_dataset(
    path: &Path,
    labels: Option<&Path>,
    sample_rate_hz: f64,
) -> Result<LabeledDataset> {
    let signals = csv_rows(path)?
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let samples = row
                .iter()
                .map(|f| parse_number(f, i))
                .collect::<Result<Vec<_>>>()?;
            Signal::new(samples, sample_rate_hz)
        })
        .collect::<Result<Vec<_>>>()?;
    let Some(labels) = labels else {
        return LabeledDataset::unlabeled(signals);
    };
    let labels = csv_rows(labels)?
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            if row.len() != LABEL_COUNT {
                return Err(CoreError::InvalidParameter(format!(
                    "label row {i} has {} fields, expected {LABEL_COUNT}",
                    row.len()
                )));
            }
            let bytes = row
                .iter()
                .map(|f| f.parse::<u8>().unwrap_or(u8::MAX))
                .collect::<Vec<_>>();
            decode_label(&bytes)
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(signals, labels)
}

/// Writes `path` and its sibling label file.
pub fn write_csv_dataset(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for s in ds.signals() {
        w.write_record(s.samples().iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(csv_labels_path(path))?;
    for label in ds.labels() {
        w.write_record(label.iter().map(|&b| if b { "1" } else { "0" }))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_pairs_to<W: Write>(pairs: &[SignalPair], w: &mut W) -> Result<()> {
    let (length, rate) = common_shape(pairs.iter().map(|p| &p.clean));
    for p in pairs {
        if p.clean.len() != length {
            return Err(CoreError::LengthMismatch(length, p.clean.len()));
        }
    }
    write_header(w, PAIRS_VERSION, pairs.len(), length, rate)?;
    for p in pairs {
        write_samples(w, p.clean.samples())?;
        write_samples(w, p.noisy.samples())?;
    }
    Ok(())
}

pub fn read_pairs_from<R: Read>(r: &mut R) -> Result<Vec<SignalPair>> {
    let header = read_header(r, PAIRS_VERSION)?;
    (0..header.count)
        .map(|i| {
            let what = format!("pair {i} of {}", header.count);
            let clean = Signal::new(
                read_samples(r, header.length, &what)?,
                header.sample_rate_hz,
            )?;
            let noisy = Signal::new(
                read_samples(r, header.length, &what)?,
                header.sample_rate_hz,
            )?;
            SignalPair::new(clean, noisy)
        })
        .collect()
}

pub fn write_pairs(pairs: &[SignalPair], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pairs_to(pairs, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<SignalPair>> {
    read_pairs_from(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(count: usize, len: usize) -> LabeledDataset {
        let signals = (0..count)
            .map(|i| {
                Signal::new(
                    (0..len).map(|j| (i * len + j) as f64 * 0.25).collect(),
                    500.0,
                )
                .unwrap()
            })
            .collect();
        let labels = (0..count)
            .map(|i| [i % 2 == 0, false, true, false, i % 3 == 0])
            .collect();
        LabeledDataset::new(signals, labels).unwrap()
    }

    fn bytes(ds: &LabeledDataset) -> Vec<u8> {
        let mut out = Vec::new();
        write_dataset_to(ds, &mut out).unwrap();
        out
    }

    #[test]
    fn round_trip_and_sizes() {
        let ds = dataset(3, 5000);
        assert_eq!(read_dataset_from(&mut bytes(&ds).as_slice()).unwrap(), ds);
        assert_eq!(bytes(&LabeledDataset::empty()).len(), HEADER_LEN);
        assert_eq!(bytes(&dataset(1, 8)).len(), HEADER_LEN + 8 * 4 + 5);
    }

    #[test]
    fn malformed_inputs_have_distinct_errors() {
        let mut raw = bytes(&dataset(2, 8));
        raw.truncate(HEADER_LEN + 8 * 4);
        assert!(matches!(
            read_dataset_from(&mut raw.as_slice()),
            Err(CoreError::Truncated(_))
        ));

        let mut raw = bytes(&dataset(2, 8));
        raw[0] = b'X';
        assert!(matches!(
            read_dataset_from(&mut raw.as_slice()),
            Err(CoreError::BadMagic { .. })
        ));

        let mut raw = bytes(&dataset(2, 8));
        raw.truncate(raw.len() - 3);
        assert!(matches!(
            read_dataset_from(&mut raw.as_slice()),
            Err(CoreError::LabelCount {
                signals: 2,
                labels: 1
            })
        ));
    }

    #[test]
    fn pairs_round_trip() {
        let ds = dataset(2, 16);
        let pairs: Vec<SignalPair> = ds
            .signals()
            .iter()
            .map(|s| {
                SignalPair::new(
                    s.clone(),
                    s.with_samples(s.samples().iter().map(|v| -v).collect()),
                )
                .unwrap()
            })
            .collect();
        let mut out = Vec::new();
        write_pairs_to(&pairs, &mut out).unwrap();
        assert_eq!(out.len(), HEADER_LEN + 2 * 2 * 16 * 4);
        assert_eq!(read_pairs_from(&mut out.as_slice()).unwrap(), pairs);
        assert!(matches!(
            read_dataset_from(&mut out.as_slice()),
            Err(CoreError::UnsupportedVersion(2))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("signals.csv");
        let ds = dataset(4, 7);
        write_csv_dataset(&ds, &path).unwrap();
        assert!(dir.path().join("signals.labels.csv").exists());
        assert_eq!(read_dataset(&path, DatasetFormat::Csv).unwrap(), ds);
    }
}
