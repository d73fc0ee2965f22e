//! Central finite-difference checking of analytic gradients.

use crate::error::{Error, Result};

/// One objective evaluation.
///
/// `region` fingerprints the piecewise-linear region the evaluation landed in
/// (for example the sign pattern of every PReLU input). A coordinate whose
/// `+h` and `-h` evaluations land in different regions straddles a kink and is
/// skipped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eval {
    pub value: f64,
    pub region: u64,
}

impl Eval {
    pub fn smooth(value: f64) -> Self {
        Eval { value, region: 0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(parameter group, coordinate)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    pub skipped_kinks: usize,
}

impl GradCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.checked > 0 && self.max_rel_error < tolerance
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compare `analytic` against central differences of `objective` over
/// `params`. `coords` restricts the check to the listed `(group, index)`
/// pairs; `None` checks every coordinate.
pub fn grad_check<F>(
    params: &mut [Vec<f64>],
    analytic: &[Vec<f64>],
    coords: Option<&[(usize, usize)]>,
    step: f64,
    mut objective: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&[Vec<f64>]) -> Result<Eval>,
{
    if step <= 0.0 || !step.is_finite() {
        return Err(Error::Config(format!("grad_check step must be > 0, got {step}")));
    }
    if params.len() != analytic.len()
        || params.iter().zip(analytic).any(|(p, a)| p.len() != a.len())
    {
        return Err(Error::Config(
            "grad_check: analytic gradients do not mirror the parameters".into(),
        ));
    }
    if params.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            op: "grad_check input".into(),
        });
    }

    let all: Vec<(usize, usize)>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = params
                .iter()
                .enumerate()
                .flat_map(|(g, p)| (0..p.len()).map(move |i| (g, i)))
                .collect();
            &all
        }
    };

    let mut report = GradCheckReport::default();
    for &(g, i) in coords {
        let orig = params[g][i];
        params[g][i] = orig + step;
        let plus = objective(params)?;
        params[g][i] = orig - step;
        let minus = objective(params)?;
        params[g][i] = orig;
        if !plus.value.is_finite() || !minus.value.is_finite() {
            return Err(Error::NonFinite {
                op: format!("grad_check objective at ({g}, {i})"),
            });
        }
        if plus.region != minus.region {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (plus.value - minus.value) / (2.0 * step);
        let err = relative_error(analytic[g][i], numeric);
        report.checked += 1;
        if report.worst.is_none() || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst = Some((g, i));
        }
    }
    Ok(report)
}
