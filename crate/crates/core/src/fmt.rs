//! Number formatting for reports and CSV.

/// `%g`-style formatting with `sig` significant digits.
pub fn sig(v: f64, sig: usize) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    // exponent taken after rounding, so 999999.7 becomes 1e6
    let s = format!("{:.*e}", sig.saturating_sub(1), v);
    let (mant, e) = s.split_once('e').expect("exponent form");
    let e: i32 = e.parse().expect("integer exponent");
    if e < -4 || e >= sig as i32 {
        format!("{}e{}", trim_zeros(mant), e)
    } else {
        let decimals = (sig as i32 - 1 - e).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

/// Fixed notation (no exponent) rounded to `sig` significant digits.
pub fn fixed(v: f64, sig: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let s = format!("{:.*e}", sig.saturating_sub(1), v);
    let e: i32 = s.split_once('e').unwrap().1.parse().unwrap();
    let decimals = (sig as i32 - 1 - e).max(0) as usize;
    let out = format!("{:.*}", decimals, v);
    if out.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        "0".into()
    } else {
        out
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
