//! Central finite-difference gradient oracle.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Gradients smaller than this are compared absolutely rather than relatively.
pub const DEFAULT_FLOOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug)]
pub struct CheckOptions {
    pub eps: f64,
    pub tol: f64,
    /// Lower bound on the relative-error denominator.
    pub floor: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            eps: 1e-5,
            tol: 1e-4,
            floor: DEFAULT_FLOOR,
        }
    }
}

impl CheckOptions {
    pub fn new(eps: f64, tol: f64) -> Self {
        CheckOptions {
            eps,
            tol,
            ..Default::default()
        }
    }
}

/// One differentiable input: its current value and the analytic gradient
/// of the loss with respect to it.
#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub analytic: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mismatch {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub max_rel_err: f64,
    /// Largest error per parameter, in input order.
    pub per_param: Vec<(String, f64)>,
    pub worst: Option<Mismatch>,
    pub evaluations: usize,
    pub tol: f64,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares analytic gradients against `(f(x+eps·e_i) − f(x−eps·e_i)) / 2eps`
/// for every element of every parameter.
///
/// `loss` receives the full parameter list (in the order given) with one
/// element perturbed.
pub fn finite_diff_check<F>(loss: F, params: &[Param], opts: CheckOptions) -> Result<CheckReport>
where
    F: Fn(&[Tensor]) -> Result<f64>,
{
    if !(opts.eps > 0.0) {
        return Err(Error::Config(format!("eps must be positive, got {}", opts.eps)));
    }
    for p in params {
        if p.value.shape() != p.analytic.shape() {
            return Err(Error::dim("finite_diff_check", p.value.shape(), p.analytic.shape()));
        }
    }
    let mut values: Vec<Tensor> = params.iter().map(|p| p.value.clone()).collect();
    let mut per_param = Vec::with_capacity(params.len());
    let mut worst: Option<Mismatch> = None;
    let mut evaluations = 0;

    for (pi, p) in params.iter().enumerate() {
        let mut param_max = 0.0f64;
        for i in 0..p.value.len() {
            let orig = values[pi].data()[i];
            let mut eval = |v: f64, values: &mut Vec<Tensor>| -> Result<f64> {
                values[pi].data_mut()[i] = v;
                let out = loss(values);
                evaluations += 1;
                let out = out?;
                if !out.is_finite() {
                    return Err(Error::NonFinite {
                        context: format!("loss while perturbing {}", p.name),
                        index: i,
                    });
                }
                Ok(out)
            };
            let plus = eval(orig + opts.eps, &mut values);
            let minus = eval(orig - opts.eps, &mut values);
            values[pi].data_mut()[i] = orig;
            let numeric = (plus? - minus?) / (2.0 * opts.eps);
            let analytic = p.analytic.data()[i];
            if !analytic.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("analytic gradient of {}", p.name),
                    index: i,
                });
            }
            let rel_err = relative_error(analytic, numeric, opts.floor);
            param_max = param_max.max(rel_err);
            if worst.as_ref().map_or(true, |w| rel_err > w.rel_err) {
                worst = Some(Mismatch {
                    param: p.name.clone(),
                    index: i,
                    analytic,
                    numeric,
                    rel_err,
                });
            }
        }
        per_param.push((p.name.clone(), param_max));
    }

    let max_rel_err = worst.as_ref().map_or(0.0, |w| w.rel_err);
    Ok(CheckReport {
        max_rel_err,
        per_param,
        worst,
        evaluations,
        tol: opts.tol,
        passed: max_rel_err <= opts.tol,
    })
}

/// Single-input convenience form of [`finite_diff_check`].
pub fn finite_diff_check_fn<F>(
    f: F,
    x: &Tensor,
    analytic: &Tensor,
    eps: f64,
    tol: f64,
) -> Result<CheckReport>
where
    F: Fn(&Tensor) -> Result<f64>,
{
    let params = [Param {
        name: "x".into(),
        value: x.clone(),
        analytic: analytic.clone(),
    }];
    finite_diff_check(|v| f(&v[0]), &params, CheckOptions::new(eps, tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_has_unit_gradient() {
        let x = Tensor::from_fn(&[3, 2], |i| i as f64 * 0.7 - 1.0).unwrap();
        let ones = Tensor::ones(&[3, 2]).unwrap();
        let r = finite_diff_check_fn(|t| Ok(t.sum()), &x, &ones, 1e-5, 1e-4).unwrap();
        assert!(r.passed);
        assert!(r.max_rel_err < 1e-9, "{}", r.max_rel_err);
        assert_eq!(r.evaluations, 12);
    }

    #[test]
    fn sum_of_squares_closed_form() {
        let x = Tensor::new(&[2], vec![1.0, 2.0]).unwrap();
        let grad = Tensor::new(&[2], vec![2.0, 4.0]).unwrap();
        let r = finite_diff_check_fn(|t| t.dot(t), &x, &grad, 1e-5, 1e-4).unwrap();
        assert!(r.max_rel_err < 1e-8, "{}", r.max_rel_err);
    }

    #[test]
    fn wrong_gradient_fails_and_names_worst() {
        let x = Tensor::new(&[2], vec![1.0, 2.0]).unwrap();
        let grad = Tensor::new(&[2], vec![2.0, 4.5]).unwrap();
        let r = finite_diff_check_fn(|t| t.dot(t), &x, &grad, 1e-5, 1e-4).unwrap();
        assert!(!r.passed);
        let w = r.worst.unwrap();
        assert_eq!((w.param.as_str(), w.index), ("x", 1));
    }

    #[test]
    fn non_finite_loss_reports_index() {
        let x = Tensor::new(&[3], vec![1.0, 0.0, 2.0]).unwrap();
        let grad = Tensor::zeros(&[3]).unwrap();
        let err = finite_diff_check_fn(
            |t| Ok(if t.data()[1] != 0.0 { f64::NAN } else { 0.0 }),
            &x,
            &grad,
            1e-5,
            1e-4,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 1, .. }), "{err}");
    }

    #[test]
    fn rejects_nonpositive_eps() {
        let x = Tensor::new(&[1], vec![1.0]).unwrap();
        assert!(finite_diff_check_fn(|t| Ok(t.sum()), &x, &x, 0.0, 1e-4).is_err());
    }
}
