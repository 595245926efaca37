//! Central finite-difference comparison of analytic gradients.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdReport {
    /// Max of `|analytic - numeric| / max(1, |numeric|)`.
    pub max_deviation: f64,
    pub max_abs_deviation: f64,
    pub coordinates_checked: usize,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares `analytic` (one tensor per store entry) against central
/// differences of `f` at `step`. At most `max_coords` coordinates per tensor
/// are sampled without replacement; tensors that small are checked fully.
pub fn finite_difference_check<F, R>(
    f: F,
    params: &ParamStore,
    analytic: &[Tensor],
    step: f64,
    tol: f64,
    max_coords: usize,
    rng: &mut R,
) -> FdReport
where
    F: Fn(&ParamStore) -> f64,
    R: Rng + ?Sized,
{
    assert!(step > 0.0, "finite-difference step must be positive");
    assert_eq!(analytic.len(), params.len(), "one gradient per parameter");
    let mut work = params.clone();
    let mut report = FdReport {
        max_deviation: 0.0,
        max_abs_deviation: 0.0,
        coordinates_checked: 0,
        worst: None,
        tolerance: tol,
        passed: true,
    };
    for id in params.ids() {
        let base = params.get(id);
        let n = base.numel();
        let coords: Vec<usize> = if n <= max_coords {
            (0..n).collect()
        } else {
            let mut c = sample(rng, n, max_coords).into_vec();
            c.sort_unstable();
            c
        };
        for k in coords {
            let numeric = central_difference(&f, &mut work, id, base, k, step);
            let a = analytic[id.0].data()[k];
            let abs = (a - numeric).abs();
            let dev = abs / numeric.abs().max(1.0);
            report.coordinates_checked += 1;
            report.max_abs_deviation = report.max_abs_deviation.max(abs);
            if dev > report.max_deviation || report.worst.is_none() {
                report.max_deviation = report.max_deviation.max(dev);
                report.worst = Some((params.name(id).to_string(), k));
            }
            if !dev.is_finite() {
                report.max_deviation = f64::INFINITY;
            }
        }
    }
    report.passed = report.max_deviation <= tol;
    report
}

fn central_difference<F: Fn(&ParamStore) -> f64>(
    f: &F,
    work: &mut ParamStore,
    id: ParamId,
    base: &Tensor,
    k: usize,
    step: f64,
) -> f64 {
    let mut shifted = base.data().to_vec();
    shifted[k] = base.data()[k] + step;
    work.set(id, Tensor::new(base.shape().to_vec(), shifted.clone()).unwrap())
        .unwrap();
    let plus = f(work);
    shifted[k] = base.data()[k] - step;
    work.set(id, Tensor::new(base.shape().to_vec(), shifted).unwrap())
        .unwrap();
    let minus = f(work);
    work.set(id, base.clone()).unwrap();
    (plus - minus) / (2.0 * step)
}
