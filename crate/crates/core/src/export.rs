//! Number formatting shared by CSV and JSON artifacts.

/// Formats `v` with 12 significant digits, `%.12g` style: fixed notation for
/// moderate magnitudes, scientific otherwise, trailing zeros removed.
pub fn fmt_sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.11e}", v);
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, v))
    } else {
        format!("{}e{}", trim_zeros(mant.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".into()
    } else {
        t.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt_sig12(2f64.sqrt()), "1.41421356237");
        assert_eq!(fmt_sig12(1.0 / (1.0 + 2f64.sqrt())), "0.414213562373");
        assert_eq!(fmt_sig12(2.0), "2");
        assert_eq!(fmt_sig12(-0.25), "-0.25");
        assert_eq!(fmt_sig12(1234567.0), "1234567");
        assert_eq!(fmt_sig12(1e-9), "1e-9");
        assert_eq!(fmt_sig12(6.02214076e23), "6.02214076e23");
        assert_eq!(fmt_sig12(0.0), "0");
        assert_eq!(fmt_sig12(-1e-17), "-1e-17");
        assert_eq!(fmt_sig12(123456789012.4), "123456789012");
    }
}
