//! Small numerical helpers shared across modules.

use crate::Matrix;

/// Compensated (Neumaier) summation.
pub(crate) fn stable_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

pub(crate) fn matrix_sum(m: &Matrix) -> f64 {
    stable_sum(m.iter().copied())
}

pub(crate) fn frobenius_sq(m: &Matrix) -> f64 {
    stable_sum(m.iter().map(|x| x * x))
}
