//! Shared CSV number formatting.

/// 17 significant digits in scientific notation; round-trips any `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        // avoid "-0e0" for negative zero so repeated runs diff cleanly
        return "0".to_string();
    }
    format!("{v:.16e}")
}
