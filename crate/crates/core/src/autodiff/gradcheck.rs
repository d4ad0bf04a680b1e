use super::{no_grad, Tensor, TensorError};

/// Relative finite-difference step: `h = STEP * max(1, |x|)`.
pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOL: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// (input index, element index) of the worst mismatch.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    pub pass: bool,
}

/// Compares backward gradients of the scalar `f()` with respect to each
/// input against central differences. Error per element is
/// `|a - b| / max(1, |a|, |b|)`.
///
/// `f` must rebuild its graph from the (mutated in place) `inputs` on every
/// call.
pub fn grad_check<F>(f: F, inputs: &[Tensor], step: f64, tol: f64) -> Result<GradCheckReport, TensorError>
where
    F: Fn() -> Result<Tensor, TensorError>,
{
    for x in inputs {
        if !x.requires_grad() || !x.is_leaf() {
            return Err(TensorError::Contract("grad_check inputs must be trainable leaves".into()));
        }
        x.zero_grad();
    }
    let loss = f()?;
    loss.backward()?;
    let analytic: Vec<Vec<f64>> = inputs.iter().map(Tensor::grad).collect();
    drop(loss);

    let eval = || -> Result<f64, TensorError> { no_grad(|| f().map(|t| t.item())) };
    let mut report = GradCheckReport { max_rel_err: 0.0, worst: None, checked: 0, pass: true };
    for (ii, x) in inputs.iter().enumerate() {
        for e in 0..x.numel() {
            let orig = x.data()[e];
            let h = step * orig.abs().max(1.0);
            x.update_data(|d| d[e] = orig + h);
            let plus = eval()?;
            x.update_data(|d| d[e] = orig - h);
            let minus = eval()?;
            x.update_data(|d| d[e] = orig);
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[ii][e];
            let err = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            report.checked += 1;
            if err > report.max_rel_err || err.is_nan() {
                report.max_rel_err = err;
                report.worst = Some((ii, e));
            }
        }
        x.zero_grad();
    }
    report.pass = report.max_rel_err <= tol;
    Ok(report)
}
