use crate::autodiff::{numel, Tensor, TensorError};

/// Splits `shape` around `axis` into (outer, len, inner) extents.
pub(crate) fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn check_axis(t: &Tensor, axis: usize) -> Result<(), TensorError> {
    if axis >= t.rank() {
        return Err(TensorError::Shape(format!("axis {axis} out of range for {:?}", t.shape())));
    }
    Ok(())
}

impl Tensor {
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor, TensorError> {
        if numel(shape) != self.numel() {
            return Err(TensorError::Shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape()
            )));
        }
        Ok(Tensor::from_op(
            "reshape",
            self.to_vec(),
            shape.to_vec(),
            vec![self.clone()],
            Box::new(|ctx| vec![Some(ctx.grad_out.to_vec())]),
        ))
    }

    /// Swaps two axes (materialised copy).
    pub fn transpose(&self, a: usize, b: usize) -> Result<Tensor, TensorError> {
        check_axis(self, a)?;
        check_axis(self, b)?;
        if a == b {
            return self.reshape(self.shape());
        }
        let (a, b) = (a.min(b), a.max(b));
        let shape = self.shape().to_vec();
        let mut out_shape = shape.clone();
        out_shape.swap(a, b);

        // View the tensor as [outer, A, mid, B, inner] and swap A with B.
        let outer: usize = shape[..a].iter().product();
        let (da, db) = (shape[a], shape[b]);
        let mid: usize = shape[a + 1..b].iter().product();
        let inner: usize = shape[b + 1..].iter().product();
        let permute = move |src: &[f64], forward: bool| -> Vec<f64> {
            let mut dst = vec![0.0; src.len()];
            for o in 0..outer {
                for i in 0..da {
                    for m in 0..mid {
                        for j in 0..db {
                            let s = (((o * da + i) * mid + m) * db + j) * inner;
                            let d = (((o * db + j) * mid + m) * da + i) * inner;
                            let (from, to) = if forward { (s, d) } else { (d, s) };
                            dst[to..to + inner].copy_from_slice(&src[from..from + inner]);
                        }
                    }
                }
            }
            dst
        };
        let data = permute(&self.data(), true);
        Ok(Tensor::from_op(
            "transpose",
            data,
            out_shape,
            vec![self.clone()],
            Box::new(move |ctx| vec![Some(permute(ctx.grad_out, false))]),
        ))
    }

    pub fn sum(&self) -> Tensor {
        let n = self.numel();
        let s = self.data().iter().sum();
        Tensor::from_op(
            "sum",
            vec![s],
            Vec::new(),
            vec![self.clone()],
            Box::new(move |ctx| vec![Some(vec![ctx.grad_out[0]; n])]),
        )
    }

    pub fn mean(&self) -> Tensor {
        let n = self.numel();
        self.sum().mul_scalar(1.0 / n as f64)
    }

    /// Mean over one axis; the axis is removed.
    pub fn mean_axis(&self, axis: usize) -> Result<Tensor, TensorError> {
        check_axis(self, axis)?;
        let (outer, len, inner) = split_axis(self.shape(), axis);
        let mut out_shape = self.shape().to_vec();
        out_shape.remove(axis);
        let scale = 1.0 / len as f64;
        let mut data = vec![0.0; outer * inner];
        {
            let x = self.data();
            for o in 0..outer {
                let dst = &mut data[o * inner..(o + 1) * inner];
                for l in 0..len {
                    let src = &x[(o * len + l) * inner..(o * len + l + 1) * inner];
                    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
                }
                dst.iter_mut().for_each(|d| *d *= scale);
            }
        }
        Ok(Tensor::from_op(
            "mean_axis",
            data,
            out_shape,
            vec![self.clone()],
            Box::new(move |ctx| {
                let mut g = vec![0.0; outer * len * inner];
                for o in 0..outer {
                    let src = &ctx.grad_out[o * inner..(o + 1) * inner];
                    for l in 0..len {
                        let dst = &mut g[(o * len + l) * inner..(o * len + l + 1) * inner];
                        dst.iter_mut().zip(src).for_each(|(d, s)| *d = s * scale);
                    }
                }
                vec![Some(g)]
            }),
        ))
    }
}

/// Concatenates along `axis`; all other extents must agree.
pub fn concat(tensors: &[Tensor], axis: usize) -> Result<Tensor, TensorError> {
    let first = tensors.first().ok_or_else(|| TensorError::Shape("concat of nothing".into()))?;
    check_axis(first, axis)?;
    for t in tensors {
        let same_rank = t.rank() == first.rank();
        let same_other = same_rank
            && t.shape().iter().zip(first.shape()).enumerate().all(|(i, (a, b))| i == axis || a == b);
        if !same_other {
            return Err(TensorError::Shape(format!(
                "concat along {axis}: {:?} vs {:?}",
                t.shape(),
                first.shape()
            )));
        }
    }
    let (outer, _, inner) = split_axis(first.shape(), axis);
    let lens: Vec<usize> = tensors.iter().map(|t| t.shape()[axis]).collect();
    let total: usize = lens.iter().sum();
    let mut out_shape = first.shape().to_vec();
    out_shape[axis] = total;

    let mut data = vec![0.0; outer * total * inner];
    let mut start = 0;
    for (t, &len) in tensors.iter().zip(&lens) {
        let x = t.data();
        for o in 0..outer {
            let src = &x[o * len * inner..(o + 1) * len * inner];
            let dst = (o * total + start) * inner;
            data[dst..dst + len * inner].copy_from_slice(src);
        }
        start += len;
    }
    Ok(Tensor::from_op(
        "concat",
        data,
        out_shape,
        tensors.to_vec(),
        Box::new(move |ctx| {
            let mut start = 0;
            lens.iter()
                .zip(ctx.needs)
                .map(|(&len, &need)| {
                    let g = need.then(|| {
                        let mut g = Vec::with_capacity(outer * len * inner);
                        for o in 0..outer {
                            let s = (o * total + start) * inner;
                            g.extend_from_slice(&ctx.grad_out[s..s + len * inner]);
                        }
                        g
                    });
                    start += len;
                    g
                })
                .collect()
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transpose_2d() {
        let x = Tensor::new((0..6).map(f64::from).collect(), &[2, 3]).unwrap();
        let y = x.transpose(0, 1).unwrap();
        assert_eq!(y.shape(), &[3, 2]);
        assert_eq!(y.to_vec(), vec![0.0, 3.0, 1.0, 4.0, 2.0, 5.0]);
    }

    #[test]
    fn transpose_involution_4d() {
        let x = Tensor::new((0..120).map(f64::from).collect(), &[2, 3, 4, 5]).unwrap();
        let y = x.transpose(1, 3).unwrap();
        assert_eq!(y.shape(), &[2, 5, 4, 3]);
        // y[0, 4, 2, 1] = x[0, 1, 2, 4]
        assert_eq!(y.data()[((4 * 4) + 2) * 3 + 1], x.data()[(4 + 2) * 5 + 4]);
        assert_eq!(y.transpose(1, 3).unwrap().to_vec(), x.to_vec());
    }

    #[test]
    fn mean_axis_values() {
        let x = Tensor::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 3]).unwrap();
        assert_eq!(x.mean_axis(1).unwrap().to_vec(), vec![2.0, 5.0]);
        assert_eq!(x.mean_axis(0).unwrap().to_vec(), vec![2.5, 3.5, 4.5]);
    }

    #[test]
    fn concat_middle_axis() {
        let a = Tensor::new(vec![1.0, 2.0], &[2, 1]).unwrap();
        let b = Tensor::new(vec![3.0, 4.0, 5.0, 6.0], &[2, 2]).unwrap();
        let c = concat(&[a, b], 1).unwrap();
        assert_eq!(c.shape(), &[2, 3]);
        assert_eq!(c.to_vec(), vec![1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
    }

    #[test]
    fn reshape_rejects_wrong_size() {
        let x = Tensor::zeros(&[2, 3]);
        assert!(x.reshape(&[4]).is_err());
    }
}
