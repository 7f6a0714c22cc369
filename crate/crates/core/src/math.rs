//! Float helpers backed by `libm` so the crate builds without `std`.

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// Floor used inside `ln` wherever a probability may be exactly zero.
pub const LOG_FLOOR: f64 = 1e-300;

/// Fixed-point rendering with six decimals. Negative zero is printed as zero
/// so golden files stay byte-stable.
pub fn fixed6(x: f64) -> alloc::string::String {
    let s = alloc::format!("{x:.6}");
    if s == "-0.000000" {
        alloc::string::String::from("0.000000")
    } else {
        s
    }
}
