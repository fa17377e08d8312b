//! Deterministic number formatting for the CSV and SVG writers.
//!
//! Every float printed by this crate goes through [`float`], which uses the
//! standard shortest round-trip representation: the printed string parses
//! back to exactly the same f64, and identical inputs always produce
//! byte-identical output files.

/// Shortest decimal string that round-trips to the same f64, switching to
/// scientific notation outside [1e-4, 1e16) to keep extreme magnitudes
/// readable.
///
/// Non-finite values print as `NaN`, `inf`, and `-inf`.
pub fn float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else if v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e16) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Fixed two-decimal pixel coordinate for SVG attributes.
pub fn pixel(v: f64) -> String {
    format!("{v:.2}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [
            0.1_f64,
            -1.0 / 3.0,
            1e-300,
            6.02e23,
            0.0,
            -0.0,
            2.5,
            1e15,
            1e16,
            -2.7e-5,
        ] {
            let s = float(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v} printed as {s}");
        }
    }

    #[test]
    fn non_finite_values_have_fixed_names() {
        assert_eq!(float(f64::NAN), "NaN");
        assert_eq!(float(f64::INFINITY), "inf");
        assert_eq!(float(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn shortest_form_has_no_trailing_noise() {
        assert_eq!(float(1.0), "1");
        assert_eq!(float(0.5), "0.5");
        assert_eq!(float(1e-10), "1e-10");
        assert_eq!(float(2.5e-11), "2.5e-11");
        assert_eq!(float(1e300), "1e300");
        assert_eq!(float(123456.75), "123456.75");
    }
}
