//! Differentiable primitives. Every backward rule is written with these same
//! primitives so gradients can be differentiated again.

use std::sync::Arc;

use crate::error::{Result, TensorError};
use crate::tensor::{numel, BackwardOp, Tensor};

/// Marks a position that reads (gather) or writes (scatter) nothing.
pub const NO_INDEX: u32 = u32::MAX;

fn map(x: &Tensor, f: impl Fn(f64) -> f64) -> Vec<f64> {
    x.data().iter().map(|&v| f(v)).collect()
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect()
}

struct Add;
impl BackwardOp for Add {
    fn name(&self) -> &'static str {
        "add"
    }
    fn backward(
        &self,
        _: &[Tensor],
        _: &Tensor,
        g: &Tensor,
        needs: &[bool],
    ) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![
            needs[0].then(|| g.clone()),
            needs[1].then(|| g.clone()),
        ])
    }
}

struct Sub;
impl BackwardOp for Sub {
    fn name(&self) -> &'static str {
        "sub"
    }
    fn backward(
        &self,
        _: &[Tensor],
        _: &Tensor,
        g: &Tensor,
        needs: &[bool],
    ) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![
            needs[0].then(|| g.clone()),
            needs[1].then(|| g.scale(-1.0)),
        ])
    }
}

struct Mul;
impl BackwardOp for Mul {
    fn name(&self) -> &'static str {
        "mul"
    }
    fn backward(
        &self,
        inputs: &[Tensor],
        _: &Tensor,
        g: &Tensor,
        needs: &[bool],
    ) -> Result<Vec<Option<Tensor>>> {
        let ga = if needs[0] {
            Some(g.mul(&inputs[1])?)
        } else {
            None
        };
        let gb = if needs[1] {
            Some(g.mul(&inputs[0])?)
        } else {
            None
        };
        Ok(vec![ga, gb])
    }
}

struct Scale(f64);
impl BackwardOp for Scale {
    fn name(&self) -> &'static str {
        "scale"
    }
    fn backward(
        &self,
        _: &[Tensor],
        _: &Tensor,
        g: &Tensor,
        _: &[bool],
    ) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(g.scale(self.0))])
    }
}

struct AddScalar;
impl BackwardOp for AddScalar {
    fn name(&self) -> &'static str {
        "add_scalar"
    }
    fn backward(
        &self,
        _: &[Tensor],
        _: &Tensor,
        g: &Tensor,
        _: &[bool],
    ) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(g.clone())])
    }
}

struct Powf(f64);
impl BackwardOp for Powf {
    fn name(&self) -> &'static str {
        "powf"
    }
    fn backward(
        &self,
        inputs: &[Tensor],
        _: &Tensor,
        g: &Tensor,
        _: &[bool],
    ) -> Result<Vec<Option<Tensor>>> {
        let d = inputs[0].powf(self.0 - 1.0).scale(self.0);
        Ok(vec![Some(g.mul(&d)?)])
    }
}

struct Ln;
impl BackwardOp for Ln {
    fn name(&self) -> &'static str {
        "ln"
    }
    fn backward(
        &self,
        inputs: &[Tensor],
        _: &Tensor,
        g: &Tensor,
        _: &[bool],
    ) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(g.mul(&inputs[0].powf(-1.0))?)])
    }
}

struct Tanh;
impl BackwardOp for Tanh {
    fn name(&self) -> &'static str {
        "tanh"
    }
    fn backward(
        &self,
        _: &[Tensor],
        y: &Tensor,
        g: &Tensor,
        _: &[bool],
    ) -> Result<Vec<Option<Tensor>>> {
        let d = y.mul(y)?.scale(-1.0).add_scalar(1.0);
        Ok(vec![Some(g.mul(&d)?)])
    }
}

struct Sigmoid;
impl BackwardOp for Sigmoid {
    fn name(&self) -> &'static str {
        "sigmoid"
    }
    fn backward(
        &self,
        _: &[Tensor],
        y: &Tensor,
        g: &Tensor,
        _: &[bool],
    ) -> Result<Vec<Option<Tensor>>> {
        let d = y.mul(&y.scale(-1.0).add_scalar(1.0))?;
        Ok(vec![Some(g.mul(&d)?)])
    }
}

/// Multiplies the incoming gradient by a fixed mask (piecewise-linear ops).
struct MaskGrad(Tensor, &'static str);
impl BackwardOp for MaskGrad {
    fn name(&self) -> &'static str {
        self.1
    }
    fn backward(
        &self,
        _: &[Tensor],
        _: &Tensor,
        g: &Tensor,
        _: &[bool],
    ) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(g.mul(&self.0)?)])
    }
}

struct MatMul;
impl BackwardOp for MatMul {
    fn name(&self) -> &'static str {
        "matmul"
    }
    fn backward(
        &self,
        inputs: &[Tensor],
        _: &Tensor,
        g: &Tensor,
        needs: &[bool],
    ) -> Result<Vec<Option<Tensor>>> {
        let ga = if needs[0] {
            Some(g.matmul(&inputs[1].transpose()?)?)
        } else {
            None
        };
        let gb = if needs[1] {
            Some(inputs[0].transpose()?.matmul(g)?)
        } else {
            None
        };
        Ok(vec![ga, gb])
    }
}

struct Transpose;
impl BackwardOp for Transpose {
    fn name(&self) -> &'static str {
        "transpose"
    }
    fn backward(
        &self,
        _: &[Tensor],
        _: &Tensor,
        g: &Tensor,
        _: &[bool],
    ) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(g.transpose()?)])
    }
}

struct Reshape(Vec<usize>);
impl BackwardOp for Reshape {
    fn name(&self) -> &'static str {
        "reshape"
    }
    fn backward(
        &self,
        _: &[Tensor],
        _: &Tensor,
        g: &Tensor,
        _: &[bool],
    ) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(g.reshape(&self.0)?)])
    }
}

struct BroadcastTo(Vec<usize>);
impl BackwardOp for BroadcastTo {
    fn name(&self) -> &'static str {
        "broadcast_to"
    }
    fn backward(
        &self,
        _: &[Tensor],
        _: &Tensor,
        g: &Tensor,
        _: &[bool],
    ) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(g.sum_to(&self.0)?)])
    }
}

struct SumTo(Vec<usize>);
impl BackwardOp for SumTo {
    fn name(&self) -> &'static str {
        "sum_to"
    }
    fn backward(
        &self,
        _: &[Tensor],
        _: &Tensor,
        g: &Tensor,
        _: &[bool],
    ) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(g.broadcast_to(&self.0)?)])
    }
}

struct Gather {
    index: Arc<[u32]>,
    source_shape: Vec<usize>,
}
impl BackwardOp for Gather {
    fn name(&self) -> &'static str {
        "gather"
    }
    fn backward(
        &self,
        _: &[Tensor],
        _: &Tensor,
        g: &Tensor,
        _: &[bool],
    ) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(
            g.scatter_add(self.index.clone(), &self.source_shape)?,
        )])
    }
}

struct ScatterAdd {
    index: Arc<[u32]>,
    source_shape: Vec<usize>,
}
impl BackwardOp for ScatterAdd {
    fn name(&self) -> &'static str {
        "scatter_add"
    }
    fn backward(
        &self,
        _: &[Tensor],
        _: &Tensor,
        g: &Tensor,
        _: &[bool],
    ) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(
            g.gather(self.index.clone(), &self.source_shape)?,
        )])
    }
}

/// `c = a · b` for row-major `a: m×k`, `b: k×n`.
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // SAFETY: the slices hold exactly m·k, k·n and m·n elements and the
    // strides describe dense row-major layouts of those sizes.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    c
}

impl Tensor {
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.same_shape(other, "add")?;
        let data = zip(self, other, |a, b| a + b);
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone(), other.clone()],
            Add,
        ))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.same_shape(other, "sub")?;
        let data = zip(self, other, |a, b| a - b);
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone(), other.clone()],
            Sub,
        ))
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.same_shape(other, "mul")?;
        let data = zip(self, other, |a, b| a * b);
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone(), other.clone()],
            Mul,
        ))
    }

    pub fn scale(&self, k: f64) -> Tensor {
        Tensor::from_op(
            self.shape().to_vec(),
            map(self, |v| v * k),
            vec![self.clone()],
            Scale(k),
        )
    }

    pub fn neg(&self) -> Tensor {
        self.scale(-1.0)
    }

    pub fn add_scalar(&self, k: f64) -> Tensor {
        Tensor::from_op(
            self.shape().to_vec(),
            map(self, |v| v + k),
            vec![self.clone()],
            AddScalar,
        )
    }

    pub fn powf(&self, p: f64) -> Tensor {
        Tensor::from_op(
            self.shape().to_vec(),
            map(self, |v| v.powf(p)),
            vec![self.clone()],
            Powf(p),
        )
    }

    pub fn square(&self) -> Tensor {
        self.powf(2.0)
    }

    pub fn sqrt(&self) -> Tensor {
        self.powf(0.5)
    }

    pub fn ln(&self) -> Tensor {
        Tensor::from_op(
            self.shape().to_vec(),
            map(self, f64::ln),
            vec![self.clone()],
            Ln,
        )
    }

    pub fn tanh(&self) -> Tensor {
        Tensor::from_op(
            self.shape().to_vec(),
            map(self, f64::tanh),
            vec![self.clone()],
            Tanh,
        )
    }

    pub fn sigmoid(&self) -> Tensor {
        let data = map(self, |v| {
            if v >= 0.0 {
                1.0 / (1.0 + (-v).exp())
            } else {
                let e = v.exp();
                e / (1.0 + e)
            }
        });
        Tensor::from_op(self.shape().to_vec(), data, vec![self.clone()], Sigmoid)
    }

    /// `x` for `x > 0`, `alpha·x` otherwise.
    pub fn leaky_relu(&self, alpha: f64) -> Tensor {
        let data = map(self, |v| if v > 0.0 { v } else { alpha * v });
        let mask = Tensor::from_raw(
            self.shape().to_vec(),
            map(self, |v| if v > 0.0 { 1.0 } else { alpha }),
        );
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            MaskGrad(mask, "leaky_relu"),
        )
    }

    pub fn relu(&self) -> Tensor {
        self.leaky_relu(0.0)
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Tensor {
        let data = map(self, |v| v.clamp(lo, hi));
        let mask = Tensor::from_raw(
            self.shape().to_vec(),
            map(self, |v| if (lo..=hi).contains(&v) { 1.0 } else { 0.0 }),
        );
        Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            MaskGrad(mask, "clamp"),
        )
    }

    /// Multiplies by a constant tensor of the same shape (no gradient to it).
    pub fn mul_const(&self, mask: &Tensor) -> Result<Tensor> {
        self.same_shape(mask, "mul_const")?;
        let data = zip(self, mask, |a, b| a * b);
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            MaskGrad(mask.detach(), "mul_const"),
        ))
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (&[m, k], &[k2, n]) = (self.shape(), other.shape()) else {
            return Err(TensorError::shape("matmul", self.shape(), other.shape()));
        };
        if k != k2 {
            return Err(TensorError::shape("matmul", self.shape(), other.shape()));
        }
        let data = gemm(m, k, n, self.data(), other.data());
        Ok(Tensor::from_op(
            vec![m, n],
            data,
            vec![self.clone(), other.clone()],
            MatMul,
        ))
    }

    pub fn transpose(&self) -> Result<Tensor> {
        let &[m, n] = self.shape() else {
            return Err(TensorError::invalid(
                "transpose",
                format!("expected a matrix, got {:?}", self.shape()),
            ));
        };
        let src = self.data();
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = src[i * n + j];
            }
        }
        Ok(Tensor::from_op(
            vec![n, m],
            data,
            vec![self.clone()],
            Transpose,
        ))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if numel(shape) != self.numel() {
            return Err(TensorError::shape("reshape", self.shape(), shape));
        }
        Ok(Tensor::from_op(
            shape.to_vec(),
            self.to_vec(),
            vec![self.clone()],
            Reshape(self.shape().to_vec()),
        ))
    }

    /// Repeats `self` over new leading axes; `self.shape()` must be a suffix
    /// of `shape`.
    pub fn broadcast_to(&self, shape: &[usize]) -> Result<Tensor> {
        if shape.len() < self.rank() || !shape.ends_with(self.shape()) {
            return Err(TensorError::shape("broadcast_to", self.shape(), shape));
        }
        let reps = numel(&shape[..shape.len() - self.rank()]);
        let mut data = Vec::with_capacity(reps * self.numel());
        for _ in 0..reps {
            data.extend_from_slice(self.data());
        }
        Ok(Tensor::from_op(
            shape.to_vec(),
            data,
            vec![self.clone()],
            BroadcastTo(self.shape().to_vec()),
        ))
    }

    /// Sums over leading axes down to `shape`, which must be a suffix of
    /// `self.shape()`. `sum_to(&[])` sums everything.
    pub fn sum_to(&self, shape: &[usize]) -> Result<Tensor> {
        if shape.len() > self.rank() || !self.shape().ends_with(shape) {
            return Err(TensorError::shape("sum_to", self.shape(), shape));
        }
        let block = numel(shape);
        let mut data = vec![0.0; block];
        if block > 0 {
            for chunk in self.data().chunks_exact(block) {
                for (acc, v) in data.iter_mut().zip(chunk) {
                    *acc += v;
                }
            }
        }
        Ok(Tensor::from_op(
            shape.to_vec(),
            data,
            vec![self.clone()],
            SumTo(self.shape().to_vec()),
        ))
    }

    pub fn sum(&self) -> Tensor {
        self.sum_to(&[])
            .expect("empty shape is a suffix of every shape")
    }

    pub fn mean(&self) -> Tensor {
        let n = self.numel().max(1) as f64;
        self.sum().scale(1.0 / n)
    }

    /// `out[i] = self[index[i]]`, or zero where `index[i] == NO_INDEX`.
    pub fn gather(&self, index: Arc<[u32]>, out_shape: &[usize]) -> Result<Tensor> {
        if index.len() != numel(out_shape) {
            return Err(TensorError::invalid(
                "gather",
                format!("{} indices for output shape {:?}", index.len(), out_shape),
            ));
        }
        let src = self.data();
        let mut data = Vec::with_capacity(index.len());
        for &i in index.iter() {
            data.push(if i == NO_INDEX {
                0.0
            } else {
                *src.get(i as usize).ok_or_else(|| {
                    TensorError::invalid("gather", format!("index {i} out of range"))
                })?
            });
        }
        Ok(Tensor::from_op(
            out_shape.to_vec(),
            data,
            vec![self.clone()],
            Gather {
                index,
                source_shape: self.shape().to_vec(),
            },
        ))
    }

    /// `out[index[i]] += self[i]`, skipping `NO_INDEX`; the adjoint of
    /// [`Tensor::gather`].
    pub fn scatter_add(&self, index: Arc<[u32]>, out_shape: &[usize]) -> Result<Tensor> {
        if index.len() != self.numel() {
            return Err(TensorError::invalid(
                "scatter_add",
                format!("{} indices for {} values", index.len(), self.numel()),
            ));
        }
        let len = numel(out_shape);
        let mut data = vec![0.0; len];
        for (&i, &v) in index.iter().zip(self.data()) {
            if i == NO_INDEX {
                continue;
            }
            let slot = data.get_mut(i as usize).ok_or_else(|| {
                TensorError::invalid("scatter_add", format!("index {i} out of range"))
            })?;
            *slot += v;
        }
        Ok(Tensor::from_op(
            out_shape.to_vec(),
            data,
            vec![self.clone()],
            ScatterAdd {
                index,
                source_shape: self.shape().to_vec(),
            },
        ))
    }

    /// Adds a per-channel vector along the last axis.
    pub fn add_channel(&self, bias: &Tensor) -> Result<Tensor> {
        self.add(&bias.broadcast_to(self.shape())?)
    }

    /// Multiplies by a per-channel vector along the last axis.
    pub fn mul_channel(&self, scale: &Tensor) -> Result<Tensor> {
        self.mul(&scale.broadcast_to(self.shape())?)
    }
}
