use super::{Layer, Matrix, Mode};
use crate::{Error, Result};

pub const FD_STEP: f64 = 1e-5;
pub const DEFAULT_PARAM_CAP: usize = 20_000;
/// Pairs where both gradients are below this magnitude count as agreeing;
/// central differences cannot resolve anything smaller.
pub const NOISE_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Name of the tensor (or `input`) holding the worst entry.
    pub worst: String,
    pub checked: usize,
}

/// `|a − n| / max(|a|, |n|, 1e−8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares the layer's analytic gradients (every trainable parameter entry
/// plus the input) with central differences of step [`FD_STEP`].
///
/// `loss` maps the layer output to `(loss, dloss/doutput)`.
pub fn grad_check<L: Layer + ?Sized>(
    layer: &mut L,
    input: &Matrix,
    mode: Mode,
    loss: &dyn Fn(&Matrix) -> (f64, Matrix),
    param_cap: usize,
) -> Result<GradCheckReport> {
    let count = layer.trainable_count();
    if count > param_cap {
        return Err(Error::Config(format!(
            "gradient check limited to {param_cap} parameters, model has {count}"
        )));
    }
    layer.zero_grad();
    let out = layer.forward(input, mode)?;
    let (_, grad_out) = loss(&out);
    let input_grad = layer.backward(&grad_out)?;
    let analytic: Vec<(String, Vec<f64>)> = layer
        .params()
        .into_iter()
        .filter(|p| p.trainable)
        .map(|p| (p.name.clone(), p.grad.data().to_vec()))
        .collect();

    let eval = |layer: &mut L, x: &Matrix| -> Result<f64> { Ok(loss(&layer.forward(x, mode)?).0) };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: String::new(),
        checked: 0,
    };
    let record = |report: &mut GradCheckReport, name: &str, a: f64, n: f64| {
        let e = if a.abs() < NOISE_FLOOR && n.abs() < NOISE_FLOOR {
            0.0
        } else {
            relative_error(a, n)
        };
        report.checked += 1;
        if e > report.max_rel_error {
            report.max_rel_error = e;
            report.worst = name.to_string();
        }
    };

    for (slot, (name, grads)) in analytic.iter().enumerate() {
        for k in 0..grads.len() {
            let original = param_value(layer, slot, k);
            set_param_value(layer, slot, k, original + FD_STEP);
            let plus = eval(layer, input)?;
            set_param_value(layer, slot, k, original - FD_STEP);
            let minus = eval(layer, input)?;
            set_param_value(layer, slot, k, original);
            record(&mut report, name, grads[k], (plus - minus) / (2.0 * FD_STEP));
        }
    }

    let mut x = input.clone();
    for k in 0..x.len() {
        let original = x.data()[k];
        x.data_mut()[k] = original + FD_STEP;
        let plus = eval(layer, &x)?;
        x.data_mut()[k] = original - FD_STEP;
        let minus = eval(layer, &x)?;
        x.data_mut()[k] = original;
        record(&mut report, "input", input_grad.data()[k], (plus - minus) / (2.0 * FD_STEP));
    }
    Ok(report)
}

fn param_value<L: Layer + ?Sized>(layer: &mut L, slot: usize, k: usize) -> f64 {
    layer.params_mut().into_iter().filter(|p| p.trainable).nth(slot).unwrap().value.data()[k]
}

fn set_param_value<L: Layer + ?Sized>(layer: &mut L, slot: usize, k: usize, v: f64) {
    layer.params_mut().into_iter().filter(|p| p.trainable).nth(slot).unwrap().value.data_mut()[k] = v;
}
