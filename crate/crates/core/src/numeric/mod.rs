//! Dense linear algebra and training primitives.

mod gradcheck;
mod loss;
mod matrix;
mod optim;
mod param;
mod rng;

pub use gradcheck::{finite_diff_check, GradCheck};
pub use loss::{log_softmax_row, softmax_cross_entropy};
pub use matrix::{matmul_acc, matmul_nt_acc, matmul_tn_acc, DenseMatrix};
pub use optim::{rmsprop_step, RmsProp};
pub use param::Parameter;
pub use rng::{standard_normal_init, Rng};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Hyperbolic tangent with a running time that does not depend on the
/// argument's magnitude (libm's short-circuits saturated inputs, which makes
/// step cost drift as a model trains). Accurate to a few ulp.
#[inline]
pub fn tanh(x: f64) -> f64 {
    let a = libm::fabs(x);
    let t = if a < 0.55 {
        let em = libm::expm1(-2.0 * a);
        -em / (2.0 + em)
    } else {
        let e = libm::exp(-2.0 * a);
        (1.0 - e) / (1.0 + e)
    };
    libm::copysign(t, x)
}
