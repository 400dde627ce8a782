//! Deterministic number formatting for CSV emission: 12 significant digits,
//! scientific notation, locale-independent.

/// Format with 12 significant digits in scientific notation. Non-finite
/// values render as `inf`, `-inf`, `nan`.
pub fn sci(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.11e}")
    }
}

#[cfg(test)]
mod tests {
    use super::sci;

    #[test]
    fn formats_are_stable() {
        assert_eq!(sci(0.0), "0.00000000000e0");
        assert_eq!(sci(1.0), "1.00000000000e0");
        assert_eq!(sci(-28.91), "-2.89100000000e1");
        assert_eq!(sci(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(sci(f64::INFINITY), "inf");
        assert_eq!(sci(f64::NEG_INFINITY), "-inf");
        assert_eq!(sci(f64::NAN), "nan");
    }
}
