//! Number formatting for exact binary round-trip through text.

/// 17 significant digits in scientific notation.
pub fn sig17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn sig17_round_trips(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(sig17(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn non_finite_values_parse_back() {
        assert!(sig17(f64::NAN).parse::<f64>().unwrap().is_nan());
        assert_eq!(sig17(f64::INFINITY).parse::<f64>().unwrap(), f64::INFINITY);
    }
}
