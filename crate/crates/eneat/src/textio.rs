//! Decimal formatting shared by the text file formats.

/// Render an f64 with 17 significant digits, enough to round-trip any
/// finite value exactly. Loading and re-saving a file therefore
/// reproduces it byte for byte.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_exactly() {
        let values = [
            0.0,
            1.0,
            -1.0,
            0.1,
            std::f64::consts::PI,
            1e-300,
            -3.33e300,
            f64::MIN_POSITIVE,
        ];
        for v in values {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v} -> {s}");
            assert_eq!(fmt_f64(back), s, "formatting must be stable");
        }
    }
}
