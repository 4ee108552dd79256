//! Scalar helpers that stay valid without `std`.

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// Logistic function, evaluated on the branch that cannot overflow.
#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    // below this the result would be subnormal
    if z < -700.0 {
        0.0
    } else if z >= 0.0 {
        1.0 / (1.0 + exp(-z))
    } else {
        let e = exp(z);
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(Σ exp(x_i))`.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| exp(x - max)).sum();
    max + ln(sum)
}

/// In-place softmax of `xs / temperature`.
pub(crate) fn softmax_into(xs: &[f64], temperature: f64, out: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) / temperature;
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(xs) {
        *o = exp(x / temperature - max);
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Index of the largest value; ties resolve to the lowest index.
pub(crate) fn argmax<T: PartialOrd + Copy>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
