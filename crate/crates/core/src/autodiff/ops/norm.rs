use crate::autodiff::{Tensor, TensorError};

/// Standardises each row along the last axis, then applies `gain` and `bias`.
pub fn layer_norm(x: &Tensor, gain: &Tensor, bias: &Tensor, eps: f64) -> Result<Tensor, TensorError> {
    let Some(&d) = x.shape().last() else {
        return Err(TensorError::Shape("layer_norm on a scalar".into()));
    };
    if gain.shape() != [d] || bias.shape() != [d] {
        return Err(TensorError::Shape(format!(
            "layer_norm over {d} features with gain {:?}, bias {:?}",
            gain.shape(),
            bias.shape()
        )));
    }
    let rows = x.numel() / d;
    let mut xhat = vec![0.0; rows * d];
    let mut inv_std = vec![0.0; rows];
    let mut out = vec![0.0; rows * d];
    {
        let (xd, g, b) = (x.data(), gain.data(), bias.data());
        for r in 0..rows {
            let row = &xd[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[r] = is;
            for i in 0..d {
                let h = (row[i] - mean) * is;
                xhat[r * d + i] = h;
                out[r * d + i] = g[i] * h + b[i];
            }
        }
    }
    let gc = gain.clone();
    Ok(Tensor::from_op(
        "layer_norm",
        out,
        x.shape().to_vec(),
        vec![x.clone(), gain.clone(), bias.clone()],
        Box::new(move |ctx| {
            let go = ctx.grad_out;
            let gx = ctx.needs[0].then(|| {
                let g = gc.data();
                let mut gx = vec![0.0; rows * d];
                for r in 0..rows {
                    let (mut m1, mut m2) = (0.0, 0.0);
                    for i in 0..d {
                        let dh = go[r * d + i] * g[i];
                        m1 += dh;
                        m2 += dh * xhat[r * d + i];
                    }
                    m1 /= d as f64;
                    m2 /= d as f64;
                    for i in 0..d {
                        let dh = go[r * d + i] * g[i];
                        gx[r * d + i] = inv_std[r] * (dh - m1 - xhat[r * d + i] * m2);
                    }
                }
                gx
            });
            let gg = ctx.needs[1].then(|| {
                let mut gg = vec![0.0; d];
                for r in 0..rows {
                    for i in 0..d {
                        gg[i] += go[r * d + i] * xhat[r * d + i];
                    }
                }
                gg
            });
            let gb = ctx.needs[2].then(|| {
                let mut gb = vec![0.0; d];
                for r in 0..rows {
                    gb.iter_mut().zip(&go[r * d..(r + 1) * d]).for_each(|(a, b)| *a += b);
                }
                gb
            });
            vec![gx, gg, gb]
        }),
    ))
}

fn softmax_rows(x: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (src, dst) in x.chunks(n).zip(out.chunks_mut(n)) {
        let max = src.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = (s - max).exp();
            total += *d;
        }
        dst.iter_mut().for_each(|d| *d /= total);
    }
    out
}

/// Softmax over the last axis, stabilised by max subtraction.
pub fn softmax(x: &Tensor) -> Result<Tensor, TensorError> {
    let Some(&n) = x.shape().last() else {
        return Err(TensorError::Shape("softmax on a scalar".into()));
    };
    let out = softmax_rows(&x.data(), n);
    Ok(Tensor::from_op(
        "softmax",
        out,
        x.shape().to_vec(),
        vec![x.clone()],
        Box::new(move |ctx| {
            let mut gx = vec![0.0; ctx.out.len()];
            for ((y, g), dst) in ctx.out.chunks(n).zip(ctx.grad_out.chunks(n)).zip(gx.chunks_mut(n)) {
                let dot: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
                for i in 0..n {
                    dst[i] = y[i] * (g[i] - dot);
                }
            }
            vec![Some(gx)]
        }),
    ))
}

/// Mean of `-log softmax(logits)[label]` over the rows of `[n, classes]`.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<Tensor, TensorError> {
    let &[n, classes] = logits.shape() else {
        return Err(TensorError::Shape(format!(
            "cross_entropy expects [n, classes], got {:?}",
            logits.shape()
        )));
    };
    if labels.len() != n || n == 0 {
        return Err(TensorError::Shape(format!("{} labels for {n} rows", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(TensorError::Label { label: bad, classes });
    }
    let probs = softmax_rows(&logits.data(), classes);
    let loss = labels
        .iter()
        .enumerate()
        .map(|(r, &l)| {
            // log-sum-exp form avoids log(0) for confident wrong predictions.
            let row = &logits.data()[r * classes..(r + 1) * classes];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - row[l]
        })
        .sum::<f64>()
        / n as f64;
    let labels = labels.to_vec();
    Ok(Tensor::from_op(
        "cross_entropy",
        vec![loss],
        Vec::new(),
        vec![logits.clone()],
        Box::new(move |ctx| {
            let scale = ctx.grad_out[0] / n as f64;
            let mut g: Vec<f64> = probs.iter().map(|p| p * scale).collect();
            for (r, &l) in labels.iter().enumerate() {
                g[r * classes + l] -= scale;
            }
            vec![Some(g)]
        }),
    ))
}
