use rayon::prelude::*;

use crate::autodiff::{Tensor, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Output length equals input length; odd total padding goes right.
    Same,
    Valid,
}

/// Index arithmetic shared by the forward and backward kernels.
#[derive(Clone, Copy)]
struct Geometry {
    batch: usize,
    c_in: usize,
    c_out: usize,
    t_in: usize,
    t_out: usize,
    k: usize,
    dilation: usize,
    pad_left: usize,
}

impl Geometry {
    /// Input offset of tap `j` relative to output position.
    fn offset(&self, j: usize) -> isize {
        (j * self.dilation) as isize - self.pad_left as isize
    }

    /// Output positions `t` with `t + offset` inside the input.
    fn valid(&self, offset: isize) -> (usize, usize) {
        let lo = (-offset).max(0) as usize;
        let hi = (self.t_in as isize - offset).clamp(0, self.t_out as isize) as usize;
        (lo.min(hi), hi)
    }
}

/// Cross-correlation over the last axis: `[b, c_in, t] * [c_out, c_in, k]`.
pub fn conv1d(
    input: &Tensor,
    kernel: &Tensor,
    bias: Option<&Tensor>,
    padding: Padding,
    dilation: usize,
) -> Result<Tensor, TensorError> {
    let (&[batch, c_in, t_in], &[c_out, kc_in, k]) = (input.shape(), kernel.shape()) else {
        return Err(TensorError::Shape(format!(
            "conv1d expects [b, c, t] and [c_out, c_in, k], got {:?} and {:?}",
            input.shape(),
            kernel.shape()
        )));
    };
    if kc_in != c_in {
        return Err(TensorError::Shape(format!(
            "conv1d input has {c_in} channels, kernel expects {kc_in}"
        )));
    }
    if dilation == 0 || k == 0 {
        return Err(TensorError::Shape("conv1d needs dilation >= 1 and k >= 1".into()));
    }
    if let Some(b) = bias {
        if b.shape() != [c_out] {
            return Err(TensorError::Shape(format!("conv1d bias shape {:?}", b.shape())));
        }
    }
    let span = dilation * (k - 1);
    let (t_out, pad_left) = match padding {
        Padding::Same => (t_in, span / 2),
        Padding::Valid => {
            if span >= t_in {
                return Err(TensorError::Shape(format!(
                    "conv1d valid: receptive span {} exceeds length {t_in}",
                    span + 1
                )));
            }
            (t_in - span, 0)
        }
    };
    let geo = Geometry { batch, c_in, c_out, t_in, t_out, k, dilation, pad_left };

    let mut out = vec![0.0; batch * c_out * t_out];
    {
        let (xg, wg) = (input.data(), kernel.data());
        let (x, w): (&[f64], &[f64]) = (&xg, &wg);
        let bias_data = bias.map(|b| b.to_vec());
        out.par_chunks_mut(t_out.max(1)).enumerate().for_each(|(row, dst)| {
            let (b, co) = (row / c_out, row % c_out);
            if let Some(bd) = &bias_data {
                dst.iter_mut().for_each(|v| *v = bd[co]);
            }
            for ci in 0..c_in {
                let src = &x[(b * c_in + ci) * t_in..(b * c_in + ci + 1) * t_in];
                for j in 0..k {
                    let wv = w[(co * c_in + ci) * k + j];
                    if wv == 0.0 {
                        continue;
                    }
                    let off = geo.offset(j);
                    let (lo, hi) = geo.valid(off);
                    if lo >= hi {
                        continue;
                    }
                    let s0 = (lo as isize + off) as usize;
                    dst[lo..hi].iter_mut().zip(&src[s0..s0 + (hi - lo)]).for_each(|(d, s)| *d += wv * s);
                }
            }
        });
    }

    let mut parents = vec![input.clone(), kernel.clone()];
    if let Some(b) = bias {
        parents.push(b.clone());
    }
    let (xc, wc) = (input.clone(), kernel.clone());
    let has_bias = bias.is_some();
    Ok(Tensor::from_op(
        "conv1d",
        out,
        vec![batch, c_out, t_out],
        parents,
        Box::new(move |ctx| {
            let g = ctx.grad_out;
            let mut grads = vec![
                ctx.needs[0].then(|| conv1d_grad_input(&geo, g, &wc.data())),
                ctx.needs[1].then(|| conv1d_grad_kernel(&geo, g, &xc.data())),
            ];
            if has_bias {
                grads.push(ctx.needs[2].then(|| {
                    let mut gb = vec![0.0; geo.c_out];
                    for b in 0..geo.batch {
                        for (co, acc) in gb.iter_mut().enumerate() {
                            let row = (b * geo.c_out + co) * geo.t_out;
                            *acc += g[row..row + geo.t_out].iter().sum::<f64>();
                        }
                    }
                    gb
                }));
            }
            grads
        }),
    ))
}

fn conv1d_grad_input(geo: &Geometry, g: &[f64], w: &[f64]) -> Vec<f64> {
    let mut gx = vec![0.0; geo.batch * geo.c_in * geo.t_in];
    gx.par_chunks_mut(geo.t_in.max(1)).enumerate().for_each(|(row, dst)| {
        let (b, ci) = (row / geo.c_in, row % geo.c_in);
        for co in 0..geo.c_out {
            let go = &g[(b * geo.c_out + co) * geo.t_out..(b * geo.c_out + co + 1) * geo.t_out];
            for j in 0..geo.k {
                let wv = w[(co * geo.c_in + ci) * geo.k + j];
                if wv == 0.0 {
                    continue;
                }
                let off = geo.offset(j);
                let (lo, hi) = geo.valid(off);
                if lo >= hi {
                    continue;
                }
                let s0 = (lo as isize + off) as usize;
                dst[s0..s0 + (hi - lo)].iter_mut().zip(&go[lo..hi]).for_each(|(d, s)| *d += wv * s);
            }
        }
    });
    gx
}

fn conv1d_grad_kernel(geo: &Geometry, g: &[f64], x: &[f64]) -> Vec<f64> {
    let mut gw = vec![0.0; geo.c_out * geo.c_in * geo.k];
    gw.par_chunks_mut(geo.c_in * geo.k).enumerate().for_each(|(co, dst)| {
        for b in 0..geo.batch {
            let go = &g[(b * geo.c_out + co) * geo.t_out..(b * geo.c_out + co + 1) * geo.t_out];
            for ci in 0..geo.c_in {
                let src = &x[(b * geo.c_in + ci) * geo.t_in..(b * geo.c_in + ci + 1) * geo.t_in];
                for j in 0..geo.k {
                    let off = geo.offset(j);
                    let (lo, hi) = geo.valid(off);
                    if lo >= hi {
                        continue;
                    }
                    let s0 = (lo as isize + off) as usize;
                    dst[ci * geo.k + j] +=
                        go[lo..hi].iter().zip(&src[s0..s0 + (hi - lo)]).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
    });
    gw
}

/// Non-overlapping max over pairs along the last axis; an odd tail is dropped.
/// Ties route the gradient to the first element.
pub fn max_pool1d(input: &Tensor) -> Result<Tensor, TensorError> {
    let Some(&t) = input.shape().last() else {
        return Err(TensorError::Shape("max_pool1d on a scalar".into()));
    };
    let half = t / 2;
    if half == 0 {
        return Err(TensorError::Shape(format!("max_pool1d on length {t}")));
    }
    let rows = input.numel() / t;
    let mut data = vec![0.0; rows * half];
    let mut pick = vec![0u8; rows * half];
    {
        let x = input.data();
        for r in 0..rows {
            for i in 0..half {
                let (a, b) = (x[r * t + 2 * i], x[r * t + 2 * i + 1]);
                let o = r * half + i;
                if b > a {
                    data[o] = b;
                    pick[o] = 1;
                } else {
                    data[o] = a;
                }
            }
        }
    }
    let mut shape = input.shape().to_vec();
    *shape.last_mut().unwrap() = half;
    Ok(Tensor::from_op(
        "max_pool1d",
        data,
        shape,
        vec![input.clone()],
        Box::new(move |ctx| {
            let mut gx = vec![0.0; rows * t];
            for r in 0..rows {
                for i in 0..half {
                    let o = r * half + i;
                    gx[r * t + 2 * i + pick[o] as usize] = ctx.grad_out[o];
                }
            }
            vec![Some(gx)]
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cross_correlation() {
        let x = Tensor::new(vec![1.0, 2.0, 3.0], &[1, 1, 3]).unwrap();
        let w = Tensor::new(vec![1.0, 0.0, -1.0], &[1, 1, 3]).unwrap();
        let y = conv1d(&x, &w, None, Padding::Valid, 1).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.to_vec(), vec![-2.0]);
    }

    #[test]
    fn same_padding_keeps_length() {
        let x = Tensor::new(vec![1.0, 2.0, 3.0, 4.0], &[1, 1, 4]).unwrap();
        let w = Tensor::new(vec![1.0, 1.0, 1.0], &[1, 1, 3]).unwrap();
        let y = conv1d(&x, &w, None, Padding::Same, 1).unwrap();
        assert_eq!(y.to_vec(), vec![3.0, 6.0, 9.0, 7.0]);
        let y2 = conv1d(&x, &w, None, Padding::Same, 2).unwrap();
        assert_eq!(y2.to_vec(), vec![4.0, 6.0, 4.0, 6.0]);
    }

    #[test]
    fn zeros_in_zeros_out() {
        let x = Tensor::zeros(&[2, 3, 16]);
        let w = Tensor::new((0..3 * 3 * 5).map(|v| v as f64).collect(), &[3, 3, 5]).unwrap();
        let y = conv1d(&x, &w, None, Padding::Same, 2).unwrap();
        assert!(y.to_vec().iter().all(|&v| v == 0.0));
        let yv = conv1d(&x, &w, None, Padding::Valid, 1).unwrap();
        assert_eq!(yv.shape(), &[2, 3, 12]);
    }

    #[test]
    fn shape_mismatch() {
        let x = Tensor::zeros(&[1, 2, 8]);
        assert!(conv1d(&x, &Tensor::zeros(&[1, 3, 3]), None, Padding::Same, 1).is_err());
        assert!(conv1d(&x, &Tensor::zeros(&[1, 2, 5]), None, Padding::Valid, 2).is_err());
    }

    #[test]
    fn pool_pairs() {
        let x = Tensor::param(vec![1.0, 4.0, 2.0, 3.0], &[1, 1, 4]).unwrap();
        let y = max_pool1d(&x).unwrap();
        assert_eq!(y.to_vec(), vec![4.0, 3.0]);
        y.sum().backward().unwrap();
        assert_eq!(x.grad(), vec![0.0, 1.0, 0.0, 1.0]);
    }

    /// Direct zero-padded cross-correlation.
    fn oracle(x: &[f64], w: &[f64], dims: (usize, usize, usize, usize, usize), dil: usize) -> Vec<f64> {
        let (b, ci, co, t, k) = dims;
        let pad = (dil * (k - 1) / 2) as isize;
        let mut y = vec![0.0; b * co * t];
        for bb in 0..b {
            for o in 0..co {
                for tt in 0..t {
                    let mut acc = 0.0;
                    for i in 0..ci {
                        for j in 0..k {
                            let s = tt as isize + (j * dil) as isize - pad;
                            if (0..t as isize).contains(&s) {
                                acc += w[(o * ci + i) * k + j] * x[(bb * ci + i) * t + s as usize];
                            }
                        }
                    }
                    y[(bb * co + o) * t + tt] = acc;
                }
            }
        }
        y
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn same_padding_matches_oracle(
            b in 1usize..3, ci in 1usize..4, co in 1usize..4, t in 1usize..12, k in 1usize..6,
            dil in 1usize..6, seed in 0u64..1000,
        ) {
            let mut rng = crate::rng::SeededRng::new(seed);
            let x: Vec<f64> = (0..b * ci * t).map(|_| rng.normal()).collect();
            let w: Vec<f64> = (0..co * ci * k).map(|_| rng.normal()).collect();
            let xt = Tensor::new(x.clone(), &[b, ci, t]).unwrap();
            let wt = Tensor::new(w.clone(), &[co, ci, k]).unwrap();
            let y = conv1d(&xt, &wt, None, Padding::Same, dil).unwrap().to_vec();
            let r = oracle(&x, &w, (b, ci, co, t, k), dil);
            for (a, e) in y.iter().zip(&r) {
                proptest::prop_assert!((a - e).abs() < 1e-12);
            }
        }
    }
}
