use alloc::string::ToString;

use super::Parameter;
use crate::error::{Error, Result};

/// RMSProp hyper-parameters. Defaults: learning rate 0.001, decay 0.9,
/// epsilon 1e-8 (added inside the square root).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RmsProp {
    pub lr: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl Default for RmsProp {
    fn default() -> Self {
        RmsProp {
            lr: 0.001,
            decay: 0.9,
            epsilon: 1e-8,
        }
    }
}

impl RmsProp {
    // Negated comparisons so that NaN is rejected.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || !(0.0..1.0).contains(&self.decay) || !(self.epsilon > 0.0) {
            return Err(Error::config(alloc::format!(
                "rmsprop needs lr > 0, 0 <= decay < 1, epsilon > 0 (got {:?})",
                self
            )));
        }
        Ok(())
    }
}

/// `acc ← decay·acc + (1−decay)·g²`, `value ← value − lr·g/√(acc+ε)`, then
/// the gradient is cleared. Nothing is modified when the gradient holds a
/// non-finite entry.
pub fn rmsprop_step(p: &mut Parameter, opt: &RmsProp) -> Result<()> {
    opt.validate()?;
    if !p.grad.is_finite() {
        return Err(Error::Numeric(p.name.to_string()));
    }
    let value = p.value.as_mut_slice();
    let acc = p.rms.as_mut_slice();
    let grad = p.grad.as_mut_slice();
    for ((v, a), g) in value.iter_mut().zip(acc.iter_mut()).zip(grad.iter_mut()) {
        *a = opt.decay * *a + (1.0 - opt.decay) * *g * *g;
        *v -= opt.lr * *g / libm::sqrt(*a + opt.epsilon);
        *g = 0.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::DenseMatrix;
    use alloc::vec;

    fn scalar(v: f64, g: f64, acc: f64) -> Parameter {
        let mut p = Parameter::new("w", DenseMatrix::from_vec(1, 1, vec![v]).unwrap());
        p.grad.set(0, 0, g);
        p.rms.set(0, 0, acc);
        p
    }

    #[test]
    fn zero_gradient_only_decays_accumulator() {
        let mut p = scalar(0.7, 0.0, 0.5);
        rmsprop_step(&mut p, &RmsProp::default()).unwrap();
        assert_eq!(p.value.get(0, 0), 0.7);
        assert_eq!(p.rms.get(0, 0), 0.9 * 0.5);
    }

    #[test]
    fn hand_evaluated_update() {
        let mut p = scalar(1.0, 2.0, 0.0);
        rmsprop_step(&mut p, &RmsProp::default()).unwrap();
        let acc = (1.0 - 0.9) * 2.0 * 2.0;
        assert!((p.rms.get(0, 0) - 0.4).abs() < 1e-15);
        assert_eq!(p.rms.get(0, 0), acc);
        assert_eq!(p.value.get(0, 0), 1.0 - 0.001 * 2.0 / libm::sqrt(acc + 1e-8));
        assert_eq!(p.grad.get(0, 0), 0.0);
    }

    #[test]
    fn accumulator_grows_under_repeated_gradient() {
        let mut p = scalar(1.0, 2.0, 0.0);
        rmsprop_step(&mut p, &RmsProp::default()).unwrap();
        let first = p.rms.get(0, 0);
        p.grad.set(0, 0, 2.0);
        rmsprop_step(&mut p, &RmsProp::default()).unwrap();
        assert!(p.rms.get(0, 0) > first);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = scalar(1.0, f64::NAN, 0.0);
        match rmsprop_step(&mut p, &RmsProp::default()) {
            Err(Error::Numeric(name)) => assert_eq!(name, "w"),
            other => panic!("{other:?}"),
        }
        assert_eq!(p.value.get(0, 0), 1.0);
    }

    #[test]
    fn rejects_bad_hyper_parameters() {
        let mut p = scalar(1.0, 1.0, 0.0);
        let bad = RmsProp { decay: 1.0, ..RmsProp::default() };
        assert!(matches!(rmsprop_step(&mut p, &bad), Err(Error::Config(_))));
    }
}
