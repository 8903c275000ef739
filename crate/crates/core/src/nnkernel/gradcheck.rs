//! Central-difference gradient verification.

use super::{KernelError, ParamStore};

/// Loss value of one evaluation plus the tape fingerprint of its discrete
/// forward choices.
#[derive(Debug, Clone, Copy)]
pub struct Evaluation {
    pub loss: f64,
    pub fingerprint: u64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    /// Analytic and numeric derivative at `worst`.
    pub worst_values: (f64, f64),
    pub checked: usize,
    /// Coordinates whose perturbation crossed a non-differentiable point
    /// (maxpool tie, ReLU hinge).
    pub skipped: usize,
}

/// Denominator floor of [`relative_error`]. Derivatives below this size are
/// compared in absolute terms, since central differences of an `O(10)` loss
/// carry roundoff of order `1e-11`.
pub const REL_ERR_FLOOR: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, REL_ERR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Central-difference formula used for the numeric derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// `(f(θ+ε) - f(θ-ε)) / 2ε`, truncation error `O(ε²)`.
    #[default]
    ThreePoint,
    /// `(-f(θ+2ε) + 8f(θ+ε) - 8f(θ-ε) + f(θ-2ε)) / 12ε`, truncation error
    /// `O(ε⁴)`. For deep graphs whose curvature makes `O(ε²)` visible at an
    /// `ε` large enough to keep roundoff down.
    FivePoint,
}

impl Stencil {
    fn taps(self) -> &'static [(f64, f64)] {
        match self {
            Stencil::ThreePoint => &[(1.0, 0.5), (-1.0, -0.5)],
            Stencil::FivePoint => &[(2.0, -1.0 / 12.0), (1.0, 8.0 / 12.0), (-1.0, -8.0 / 12.0), (-2.0, 1.0 / 12.0)],
        }
    }
}

/// Compares analytic parameter gradients against three-point central
/// differences for every scalar in `store`.
///
/// `eval(store, with_grad)` must return the loss; when `with_grad` is true
/// it must also accumulate the analytic gradient into `store`. A coordinate
/// is skipped when any perturbed evaluation reports a different
/// fingerprint from the unperturbed one.
pub fn grad_check<F>(store: &mut ParamStore<f64>, eps: f64, eval: F) -> Result<GradCheckReport, KernelError>
where
    F: FnMut(&mut ParamStore<f64>, bool) -> Result<Evaluation, KernelError>,
{
    grad_check_with(store, eps, Stencil::ThreePoint, eval)
}

/// [`grad_check`] with a chosen stencil.
pub fn grad_check_with<F>(
    store: &mut ParamStore<f64>,
    eps: f64,
    stencil: Stencil,
    mut eval: F,
) -> Result<GradCheckReport, KernelError>
where
    F: FnMut(&mut ParamStore<f64>, bool) -> Result<Evaluation, KernelError>,
{
    store.zero_grads();
    let base = eval(store, true)?;
    if !base.loss.is_finite() {
        return Err(KernelError::NonFinite("loss".into()));
    }
    let analytic: Vec<Vec<f64>> = store.iter().map(|p| p.grad.data().to_vec()).collect();
    let mut report = GradCheckReport::default();
    for (pi, grads) in analytic.iter().enumerate() {
        let id = super::ParamId(pi);
        for (idx, &a) in grads.iter().enumerate() {
            let original = store.get(id).value.data()[idx];
            let (mut numeric, mut crossed) = (0.0, false);
            for &(step, weight) in stencil.taps() {
                store.get_mut(id).value.data_mut()[idx] = original + step * eps;
                let e = eval(store, false)?;
                if !e.loss.is_finite() {
                    store.get_mut(id).value.data_mut()[idx] = original;
                    return Err(KernelError::NonFinite(format!(
                        "perturbed loss at {}[{idx}]",
                        store.get(id).name
                    )));
                }
                crossed |= e.fingerprint != base.fingerprint;
                numeric += weight * e.loss;
            }
            store.get_mut(id).value.data_mut()[idx] = original;
            if crossed {
                report.skipped += 1;
                continue;
            }
            let numeric = numeric / eps;
            let rel = relative_error(a, numeric);
            report.checked += 1;
            if report.worst.is_none() || rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = Some((store.get(id).name.clone(), idx));
                report.worst_values = (a, numeric);
            }
        }
    }
    store.zero_grads();
    Ok(report)
}
