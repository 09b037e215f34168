/// Outcome of a central-difference sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst_index: usize,
}

/// Compares `analytic` with `(f(θ+h·eᵢ) − f(θ−h·eᵢ)) / 2h` coordinate by
/// coordinate. The relative error of a coordinate is
/// `|a − n| / max(1e-12, |a| + |n|)`; the maximum is returned.
pub fn finite_diff_check<F>(mut f: F, theta: &[f64], analytic: &[f64], h: f64) -> GradCheck
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(theta.len(), analytic.len());
    assert!(h > 0.0);
    let mut probe = theta.to_vec();
    let mut out = GradCheck {
        max_rel_error: 0.0,
        worst_index: 0,
    };
    for i in 0..theta.len() {
        probe[i] = theta[i] + h;
        let up = f(&probe);
        probe[i] = theta[i] - h;
        let down = f(&probe);
        probe[i] = theta[i];
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        let denom = f64::max(1e-12, libm::fabs(a) + libm::fabs(numeric));
        let rel = libm::fabs(a - numeric) / denom;
        if rel > out.max_rel_error {
            out = GradCheck {
                max_rel_error: rel,
                worst_index: i,
            };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let theta = [0.3, -1.2, 2.5, 0.0, 7.0];
        let f = |t: &[f64]| 0.5 * t.iter().map(|x| x * x).sum::<f64>();
        let r = finite_diff_check(f, &theta, &theta, 1e-5);
        assert!(r.max_rel_error <= 1e-9, "{r:?}");
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        let theta = [1.0, 2.0];
        let f = |t: &[f64]| t[0] * t[1];
        let r = finite_diff_check(f, &theta, &[2.0, 2.0], 1e-5);
        assert_eq!(r.worst_index, 1);
        assert!(r.max_rel_error > 0.3);
    }
}
