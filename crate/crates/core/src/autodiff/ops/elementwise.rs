use crate::autodiff::{Tensor, TensorError};

/// Right-aligned broadcast of two shapes.
pub(crate) fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>, TensorError> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i + a.len() >= rank { a[i + a.len() - rank] } else { 1 };
        let db = if i + b.len() >= rank { b[i + b.len() - rank] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return Err(TensorError::Shape(format!("cannot broadcast {a:?} with {b:?}"))),
        };
    }
    Ok(out)
}

/// For each flat output index, the flat index into an input of `shape`
/// broadcast to `out_shape`.
fn broadcast_index(shape: &[usize], out_shape: &[usize]) -> Vec<usize> {
    let rank = out_shape.len();
    let offset = rank - shape.len();
    let mut strides = vec![0usize; rank];
    let mut acc = 1;
    for i in (0..shape.len()).rev() {
        strides[i + offset] = if shape[i] == 1 { 0 } else { acc };
        acc *= shape[i];
    }
    let total: usize = out_shape.iter().product();
    let mut idx = vec![0usize; total];
    let mut counter = vec![0usize; rank];
    let mut flat = 0usize;
    for slot in idx.iter_mut() {
        *slot = flat;
        for d in (0..rank).rev() {
            counter[d] += 1;
            flat += strides[d];
            if counter[d] < out_shape[d] {
                break;
            }
            flat -= strides[d] * counter[d];
            counter[d] = 0;
        }
    }
    idx
}

fn reduce_to(grad: &[f64], index: &[usize], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (g, &i) in grad.iter().zip(index) {
        out[i] += g;
    }
    out
}

#[derive(Clone, Copy)]
enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

fn binary(a: &Tensor, b: &Tensor, kind: Binary) -> Result<Tensor, TensorError> {
    let name = match kind {
        Binary::Add => "add",
        Binary::Sub => "sub",
        Binary::Mul => "mul",
        Binary::Div => "div",
    };
    let f = move |x: f64, y: f64| match kind {
        Binary::Add => x + y,
        Binary::Sub => x - y,
        Binary::Mul => x * y,
        Binary::Div => x / y,
    };

    if a.shape() == b.shape() {
        let data: Vec<f64> = a.data().iter().zip(b.data().iter()).map(|(&x, &y)| f(x, y)).collect();
        let (ac, bc) = (a.clone(), b.clone());
        return Ok(Tensor::from_op(
            name,
            data,
            a.shape().to_vec(),
            vec![a.clone(), b.clone()],
            Box::new(move |ctx| {
                let g = ctx.grad_out;
                let ga = ctx.needs[0].then(|| match kind {
                    Binary::Add | Binary::Sub => g.to_vec(),
                    Binary::Mul => g.iter().zip(bc.data().iter()).map(|(g, y)| g * y).collect(),
                    Binary::Div => g.iter().zip(bc.data().iter()).map(|(g, y)| g / y).collect(),
                });
                let gb = ctx.needs[1].then(|| match kind {
                    Binary::Add => g.to_vec(),
                    Binary::Sub => g.iter().map(|g| -g).collect(),
                    Binary::Mul => g.iter().zip(ac.data().iter()).map(|(g, x)| g * x).collect(),
                    Binary::Div => g
                        .iter()
                        .zip(ctx.out)
                        .zip(bc.data().iter())
                        .map(|((g, o), y)| -g * o / y)
                        .collect(),
                });
                vec![ga, gb]
            }),
        ));
    }

    let out_shape = broadcast_shape(a.shape(), b.shape())?;
    let ia = broadcast_index(a.shape(), &out_shape);
    let ib = broadcast_index(b.shape(), &out_shape);
    let data: Vec<f64> = {
        let (ad, bd) = (a.data(), b.data());
        ia.iter().zip(&ib).map(|(&i, &j)| f(ad[i], bd[j])).collect()
    };
    let (ac, bc) = (a.clone(), b.clone());
    let (na, nb) = (a.numel(), b.numel());
    Ok(Tensor::from_op(
        name,
        data,
        out_shape,
        vec![a.clone(), b.clone()],
        Box::new(move |ctx| {
            let g = ctx.grad_out;
            let (ad, bd) = (ac.data(), bc.data());
            let ga = ctx.needs[0].then(|| {
                let local: Vec<f64> = match kind {
                    Binary::Add | Binary::Sub => g.to_vec(),
                    Binary::Mul => g.iter().zip(&ib).map(|(g, &j)| g * bd[j]).collect(),
                    Binary::Div => g.iter().zip(&ib).map(|(g, &j)| g / bd[j]).collect(),
                };
                reduce_to(&local, &ia, na)
            });
            let gb = ctx.needs[1].then(|| {
                let local: Vec<f64> = match kind {
                    Binary::Add => g.to_vec(),
                    Binary::Sub => g.iter().map(|g| -g).collect(),
                    Binary::Mul => g.iter().zip(&ia).map(|(g, &i)| g * ad[i]).collect(),
                    Binary::Div => g
                        .iter()
                        .zip(ctx.out)
                        .zip(&ib)
                        .map(|((g, o), &j)| -g * o / bd[j])
                        .collect(),
                };
                reduce_to(&local, &ib, nb)
            });
            vec![ga, gb]
        }),
    ))
}

fn unary(
    x: &Tensor,
    name: &'static str,
    f: impl Fn(f64) -> f64,
    // Derivative from (input, output).
    df: impl Fn(f64, f64) -> f64 + 'static,
) -> Tensor {
    let data: Vec<f64> = x.data().iter().map(|&v| f(v)).collect();
    let xc = x.clone();
    Tensor::from_op(
        name,
        data,
        x.shape().to_vec(),
        vec![x.clone()],
        Box::new(move |ctx| {
            let xd = xc.data();
            let g = ctx
                .grad_out
                .iter()
                .zip(xd.iter())
                .zip(ctx.out)
                .map(|((g, &xi), &yi)| g * df(xi, yi))
                .collect();
            vec![Some(g)]
        }),
    )
}

impl Tensor {
    pub fn add(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        binary(self, other, Binary::Add)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        binary(self, other, Binary::Sub)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        binary(self, other, Binary::Mul)
    }

    pub fn div(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        binary(self, other, Binary::Div)
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        unary(self, "add_scalar", move |v| v + c, |_, _| 1.0)
    }

    pub fn mul_scalar(&self, c: f64) -> Tensor {
        unary(self, "mul_scalar", move |v| v * c, move |_, _| c)
    }

    pub fn neg(&self) -> Tensor {
        self.mul_scalar(-1.0)
    }

    pub fn square(&self) -> Tensor {
        unary(self, "square", |v| v * v, |x, _| 2.0 * x)
    }

    pub fn exp(&self) -> Tensor {
        unary(self, "exp", f64::exp, |_, y| y)
    }

    pub fn relu(&self) -> Tensor {
        unary(self, "relu", |v| v.max(0.0), |x, _| if x > 0.0 { 1.0 } else { 0.0 })
    }

    pub fn leaky_relu(&self, slope: f64) -> Tensor {
        unary(
            self,
            "leaky_relu",
            move |v| if v > 0.0 { v } else { slope * v },
            move |x, _| if x > 0.0 { 1.0 } else { slope },
        )
    }

    pub fn sigmoid(&self) -> Tensor {
        unary(
            self,
            "sigmoid",
            |v| {
                if v >= 0.0 {
                    1.0 / (1.0 + (-v).exp())
                } else {
                    let e = v.exp();
                    e / (1.0 + e)
                }
            },
            |_, y| y * (1.0 - y),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: Vec<f64>, s: &[usize]) -> Tensor {
        Tensor::param(v, s).unwrap()
    }

    #[test]
    fn broadcast_shapes() {
        assert_eq!(broadcast_shape(&[2, 3, 4], &[4]).unwrap(), vec![2, 3, 4]);
        assert_eq!(broadcast_shape(&[2, 1, 1], &[2, 3, 4]).unwrap(), vec![2, 3, 4]);
        assert!(broadcast_shape(&[2, 3], &[4]).is_err());
    }

    #[test]
    fn broadcast_add_and_grad() {
        let a = t(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 3]);
        let b = t(vec![10.0, 20.0, 30.0], &[3]);
        let y = a.add(&b).unwrap();
        assert_eq!(y.to_vec(), vec![11.0, 22.0, 33.0, 14.0, 25.0, 36.0]);
        y.sum().backward().unwrap();
        assert_eq!(b.grad(), vec![2.0, 2.0, 2.0]);
        assert_eq!(a.grad(), vec![1.0; 6]);
    }

    #[test]
    fn broadcast_mul_middle_axis() {
        let a = t((0..12).map(f64::from).collect(), &[2, 3, 2]);
        let w = t(vec![2.0, 3.0], &[2, 1, 1]);
        let y = a.mul(&w).unwrap();
        assert_eq!(y.to_vec()[..6], [0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(y.to_vec()[6..], [18.0, 21.0, 24.0, 27.0, 30.0, 33.0]);
        y.sum().backward().unwrap();
        assert_eq!(w.grad(), vec![15.0, 51.0]);
    }

    #[test]
    fn sigmoid_zero_is_half() {
        assert_eq!(Tensor::scalar(0.0).sigmoid().item(), 0.5);
        let big = Tensor::scalar(-800.0).sigmoid().item();
        assert!(big.is_finite() && big >= 0.0);
    }

    #[test]
    fn leaky_relu_values() {
        let x = Tensor::new(vec![-2.0, 0.0, 3.0], &[3]).unwrap();
        assert_eq!(x.leaky_relu(0.01).to_vec(), vec![-0.02, 0.0, 3.0]);
        assert_eq!(x.relu().to_vec(), vec![0.0, 0.0, 3.0]);
    }
}
