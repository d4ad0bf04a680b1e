use rayon::prelude::*;

use crate::autodiff::{Tensor, TensorError};

/// `out[r, :] = a[r, :] @ b` for row-major `a: [rows, k]`, `b: [k, n]`.
fn gemm(a: &[f64], b: &[f64], rows: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * n];
    out.par_chunks_mut(n.max(1)).enumerate().for_each(|(r, row)| {
        let ar = &a[r * k..(r + 1) * k];
        for (kk, &av) in ar.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let br = &b[kk * n..(kk + 1) * n];
            row.iter_mut().zip(br).for_each(|(o, &bv)| *o += av * bv);
        }
    });
    out
}

/// `out = a @ b^T` for `a: [rows, n]`, `b: [k, n]` (row dot products).
fn gemm_bt(a: &[f64], b: &[f64], rows: usize, n: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * k];
    out.par_chunks_mut(k.max(1)).enumerate().for_each(|(r, row)| {
        let ar = &a[r * n..(r + 1) * n];
        for (kk, o) in row.iter_mut().enumerate() {
            *o = ar.iter().zip(&b[kk * n..(kk + 1) * n]).map(|(x, y)| x * y).sum();
        }
    });
    out
}

/// `out = a^T @ g` for `a: [rows, k]`, `g: [rows, n]`; rows summed in order.
fn gemm_at(a: &[f64], g: &[f64], rows: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * n];
    out.par_chunks_mut(n.max(1)).enumerate().for_each(|(kk, row)| {
        for r in 0..rows {
            let av = a[r * k + kk];
            if av == 0.0 {
                continue;
            }
            row.iter_mut().zip(&g[r * n..(r + 1) * n]).for_each(|(o, &gv)| *o += av * gv);
        }
    });
    out
}

impl Tensor {
    /// `[..., k] @ [k, n] -> [..., n]`.
    pub fn matmul(&self, w: &Tensor) -> Result<Tensor, TensorError> {
        let (Some(&k), [wk, n]) = (self.shape().last(), w.shape()) else {
            return Err(TensorError::Shape(format!(
                "matmul {:?} @ {:?}: weight must be 2-D",
                self.shape(),
                w.shape()
            )));
        };
        let (wk, n) = (*wk, *n);
        if k != wk {
            return Err(TensorError::Shape(format!(
                "matmul inner dims {:?} @ {:?}",
                self.shape(),
                w.shape()
            )));
        }
        let rows = self.numel() / k.max(1);
        let data = gemm(&self.data(), &w.data(), rows, k, n);
        let mut shape = self.shape().to_vec();
        *shape.last_mut().unwrap() = n;
        let (xc, wc) = (self.clone(), w.clone());
        Ok(Tensor::from_op(
            "matmul",
            data,
            shape,
            vec![self.clone(), w.clone()],
            Box::new(move |ctx| {
                let gx = ctx.needs[0].then(|| gemm_bt(ctx.grad_out, &wc.data(), rows, n, k));
                let gw = ctx.needs[1].then(|| gemm_at(&xc.data(), ctx.grad_out, rows, k, n));
                vec![gx, gw]
            }),
        ))
    }

    /// Batched `[b, m, k] @ [b, k, n] -> [b, m, n]`.
    pub fn bmm(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        let (&[b, m, k], &[b2, k2, n]) = (self.shape(), other.shape()) else {
            return Err(TensorError::Shape(format!(
                "bmm needs 3-D operands, got {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        };
        if b != b2 || k != k2 {
            return Err(TensorError::Shape(format!(
                "bmm {:?} @ {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let per_batch = |f: &dyn Fn(usize) -> Vec<f64>| -> Vec<f64> {
            (0..b).flat_map(f).collect()
        };
        let data = {
            let (x, y) = (self.data(), other.data());
            per_batch(&|i| gemm(&x[i * m * k..(i + 1) * m * k], &y[i * k * n..(i + 1) * k * n], m, k, n))
        };
        let (xc, yc) = (self.clone(), other.clone());
        Ok(Tensor::from_op(
            "bmm",
            data,
            vec![b, m, n],
            vec![self.clone(), other.clone()],
            Box::new(move |ctx| {
                let g = ctx.grad_out;
                let gx = ctx.needs[0].then(|| {
                    let y = yc.data();
                    (0..b)
                        .flat_map(|i| {
                            gemm_bt(&g[i * m * n..(i + 1) * m * n], &y[i * k * n..(i + 1) * k * n], m, n, k)
                        })
                        .collect()
                });
                let gy = ctx.needs[1].then(|| {
                    let x = xc.data();
                    (0..b)
                        .flat_map(|i| {
                            gemm_at(&x[i * m * k..(i + 1) * m * k], &g[i * m * n..(i + 1) * m * n], m, k, n)
                        })
                        .collect()
                });
                vec![gx, gy]
            }),
        ))
    }
}

/// Affine map over the last axis: `x @ weight + bias`.
pub fn dense(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor, TensorError> {
    x.matmul(weight)?.add(bias)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_hand_example() {
        let x = Tensor::new(vec![1.0, 2.0], &[2]).unwrap();
        let w = Tensor::new(vec![1.0, 0.0, 0.0, 2.0], &[2, 2]).unwrap();
        let b = Tensor::new(vec![3.0, 4.0], &[2]).unwrap();
        assert_eq!(dense(&x, &w, &b).unwrap().to_vec(), vec![4.0, 8.0]);
    }

    #[test]
    fn dense_identity() {
        let x = Tensor::new((0..12).map(|v| v as f64 * 0.5).collect(), &[2, 2, 3]).unwrap();
        let mut eye = vec![0.0; 9];
        (0..3).for_each(|i| eye[i * 3 + i] = 1.0);
        let w = Tensor::new(eye, &[3, 3]).unwrap();
        let y = dense(&x, &w, &Tensor::zeros(&[3])).unwrap();
        assert_eq!(y.to_vec(), x.to_vec());
        assert_eq!(y.shape(), x.shape());
    }

    #[test]
    fn bmm_values() {
        let a = Tensor::new(vec![1.0, 2.0, 3.0, 4.0], &[1, 2, 2]).unwrap();
        let b = Tensor::new(vec![5.0, 6.0, 7.0, 8.0], &[1, 2, 2]).unwrap();
        assert_eq!(a.bmm(&b).unwrap().to_vec(), vec![19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn shape_errors() {
        let x = Tensor::zeros(&[2, 3]);
        assert!(x.matmul(&Tensor::zeros(&[2, 2])).is_err());
        assert!(x.matmul(&Tensor::zeros(&[3])).is_err());
        assert!(x.bmm(&Tensor::zeros(&[1, 3, 2])).is_err());
    }
}
