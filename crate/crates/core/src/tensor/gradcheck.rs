use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Maximum over components of `|autodiff - central difference| / (|central difference| + 1e-12)`.
///
/// `f` must build a scalar from `x` on the tape it is handed.
pub fn grad_check<T, F>(f: F, x: &Tensor<T>, h: T) -> Result<T>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, Var) -> Result<Var>,
{
    grad_check_with(f, x, h, T::lit(1e-12))
}

/// [`grad_check`] with an explicit denominator floor.
pub fn grad_check_with<T, F>(f: F, x: &Tensor<T>, h: T, floor: T) -> Result<T>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let xv = tape.param(x.clone());
    let root = f(&mut tape, xv)?;
    let grads = tape.backward(root)?;
    let zeros = Tensor::zeros(x.shape());
    let analytic = grads.get(xv).unwrap_or(&zeros);

    let eval = |probe: Tensor<T>| -> Result<T> {
        let mut tape = Tape::new();
        let v = tape.constant(probe);
        let out = f(&mut tape, v)?;
        let value = tape.value(out).data()[0];
        if !value.is_finite() {
            return Err(Error::NonFinite { op: "grad_check" });
        }
        Ok(value)
    };

    let mut worst = T::zero();
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += h;
        let mut minus = x.clone();
        minus.data_mut()[i] -= h;
        let fd = (eval(plus)? - eval(minus)?) / (h + h);
        let err = (analytic.data()[i] - fd).abs() / (fd.abs() + floor);
        worst = worst.max(err);
    }
    Ok(worst)
}
