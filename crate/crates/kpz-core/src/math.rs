//! Thin wrappers over `libm` so the rest of the crate reads like ordinary float code.

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}
#[inline]
pub fn cbrt(x: f64) -> f64 {
    libm::cbrt(x)
}
#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}
#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}
#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}
#[inline]
pub fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}
#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}
#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}
#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}
#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}
#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}
#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}
#[inline]
pub fn lgamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Signed real cube-type power `sign(x)|x|^e`, used for the `t^(2/3)` style weights.
#[inline]
pub fn spow(x: f64, e: f64) -> f64 {
    if x < 0.0 {
        -powf(-x, e)
    } else {
        powf(x, e)
    }
}

/// `ln C(n, k)` for nonnegative integers.
pub fn ln_binom(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    if n < 60 {
        // exact product is fine here and keeps small cases at full precision
        let mut v = 1.0f64;
        for i in 0..k {
            v = v * (n - i) as f64 / (i + 1) as f64;
        }
        return ln(v);
    }
    lgamma(n as f64 + 1.0) - lgamma(k as f64 + 1.0) - lgamma((n - k) as f64 + 1.0)
}

/// Binomial coefficient as a float (exact for small arguments).
pub fn binom(n: i64, k: i64) -> f64 {
    if k < 0 || n < 0 || k > n {
        return 0.0;
    }
    let k = k.min(n - k) as u64;
    let n = n as u64;
    if n < 60 {
        let mut v = 1.0f64;
        for i in 0..k {
            v = v * (n - i) as f64 / (i + 1) as f64;
        }
        round_if_small(v)
    } else {
        exp(ln_binom(n, k))
    }
}

fn round_if_small(v: f64) -> f64 {
    if v < 9.0e15 {
        round(v)
    } else {
        v
    }
}

pub const PI: f64 = core::f64::consts::PI;
