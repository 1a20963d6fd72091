//! Named parameter storage and the `ECGW` checkpoint format.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic   b"ECGW"
//! version u16 (= 1)
//! count   u32
//! count × { name_len u32, name utf-8, rank u32, dims u32 × rank, values f64 × ∏dims }
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ECGW";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub trainable: bool,
}

/// Ordered collection of named tensors. Trainable entries are leaves that
/// require grad; buffers are plain constants.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        name: impl Into<String>,
        value: Tensor,
        trainable: bool,
    ) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(TensorError::invalid(
                "param_store",
                format!("duplicate parameter `{name}`"),
            ));
        }
        let value = if trainable {
            value.requiring_grad()
        } else {
            value.detach()
        };
        self.index.insert(name.clone(), self.params.len());
        self.params.push(Param {
            name,
            value,
            trainable,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.index
            .get(name)
            .map(|&i| &self.params[i].value)
            .ok_or_else(|| TensorError::UnknownParameter(name.to_string()))
    }

    /// Replaces the values of `name`, keeping its shape and trainability.
    pub fn set(&mut self, name: &str, value: &Tensor) -> Result<()> {
        let &i = self
            .index
            .get(name)
            .ok_or_else(|| TensorError::UnknownParameter(name.to_string()))?;
        let p = &mut self.params[i];
        if p.value.shape() != value.shape() {
            return Err(TensorError::shape(
                "param_store.set",
                p.value.shape(),
                value.shape(),
            ));
        }
        p.value = if p.trainable {
            value.requiring_grad()
        } else {
            value.detach()
        };
        Ok(())
    }

    pub fn set_values(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        let shape = self.get(name)?.shape().to_vec();
        self.set(name, &Tensor::new(&shape, values)?)
    }

    pub fn trainable(&self) -> Vec<Tensor> {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.clone())
            .collect()
    }

    /// Installs new values for the trainable entries, in [`Self::trainable`]
    /// order.
    pub fn replace_trainable(&mut self, values: Vec<Tensor>) -> Result<()> {
        let mut it = values.into_iter();
        for p in self.params.iter_mut().filter(|p| p.trainable) {
            let v = it.next().ok_or_else(|| {
                TensorError::invalid("replace_trainable", "fewer values than parameters")
            })?;
            if v.shape() != p.value.shape() {
                return Err(TensorError::shape(
                    "replace_trainable",
                    p.value.shape(),
                    v.shape(),
                ));
            }
            p.value = v.requiring_grad();
        }
        if it.next().is_some() {
            return Err(TensorError::invalid(
                "replace_trainable",
                "more values than parameters",
            ));
        }
        Ok(())
    }

    pub fn count_trainable(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.numel())
            .sum()
    }

    pub fn write_checkpoint<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(self.params.len() as u32).to_le_bytes())?;
        for p in &self.params {
            let name = p.name.as_bytes();
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name)?;
            w.write_all(&(p.value.rank() as u32).to_le_bytes())?;
            for &d in p.value.shape() {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            for v in p.value.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_checkpoint(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Overwrites every entry from a checkpoint. The checkpoint must hold
    /// exactly this store's names with matching shapes.
    pub fn load_checkpoint<R: Read>(&mut self, r: &mut R) -> Result<()> {
        let entries = read_checkpoint(r)?;
        if entries.len() != self.params.len() {
            return Err(TensorError::Checkpoint(format!(
                "checkpoint holds {} tensors, network has {}",
                entries.len(),
                self.params.len()
            )));
        }
        for (name, tensor) in entries {
            self.set(&name, &tensor)?;
        }
        Ok(())
    }

    pub fn load(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let mut r = BufReader::new(File::open(path)?);
        self.load_checkpoint(&mut r)
    }
}

fn read_exact<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => TensorError::Checkpoint("truncated checkpoint".into()),
        _ => TensorError::Io(e),
    })?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact::<4, _>(r)?))
}

/// Reads every `(name, tensor)` entry of an `ECGW` stream in file order.
pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Vec<(String, Tensor)>> {
    if &read_exact::<4, _>(r)? != CHECKPOINT_MAGIC {
        return Err(TensorError::Checkpoint("bad magic, expected ECGW".into()));
    }
    let version = u16::from_le_bytes(read_exact::<2, _>(r)?);
    if version != CHECKPOINT_VERSION {
        return Err(TensorError::Checkpoint(format!(
            "unsupported version {version}"
        )));
    }
    let count = read_u32(r)?;
    let mut out = Vec::with_capacity(count.min(1 << 16) as usize);
    for _ in 0..count {
        let name_len = read_u32(r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)
            .map_err(|_| TensorError::Checkpoint("truncated checkpoint".into()))?;
        let name = String::from_utf8(name)
            .map_err(|_| TensorError::Checkpoint("parameter name is not utf-8".into()))?;
        let rank = read_u32(r)? as usize;
        let shape = (0..rank)
            .map(|_| read_u32(r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let values = (0..n)
            .map(|_| read_exact::<8, _>(r).map(f64::from_le_bytes))
            .collect::<Result<Vec<_>>>()?;
        out.push((name, Tensor::new(&shape, values)?));
    }
    Ok(out)
}
