use serde::Serialize;

use super::Parameters;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter element with the largest error, as `tensor[index]`.
    pub worst: Option<String>,
    pub checked: usize,
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares every element of `analytic` against a central finite difference
/// of `loss` around `model`.
pub fn gradient_check<M, F>(model: &M, analytic: &M, step: f64, loss: F) -> GradCheckReport
where
    M: Parameters + Clone,
    F: Fn(&M) -> f64,
{
    let mut probe = model.clone();
    let analytic = analytic.params();
    let shapes: Vec<(String, usize)> = model
        .params()
        .iter()
        .map(|(n, p)| (n.clone(), p.len()))
        .collect();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        checked: 0,
    };
    for (k, (name, len)) in shapes.iter().enumerate() {
        for i in 0..*len {
            let original = probe.params()[k].1[i];
            set(&mut probe, k, i, original + step);
            let plus = loss(&probe);
            set(&mut probe, k, i, original - step);
            let minus = loss(&probe);
            set(&mut probe, k, i, original);
            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(analytic[k].1[i], numeric);
            report.checked += 1;
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some(format!("{name}[{i}]"));
            }
        }
    }
    report
}

fn set<M: Parameters>(model: &mut M, tensor: usize, index: usize, value: f64) {
    model.params_mut()[tensor].1[index] = value;
}
