//! Precision flags: `0.25`, `2^-2` and `1/4` all name the grid exponent 2.

use qticket_core::dyadic::MAX_GRID_EXPONENT;

/// Parse a power of two in `(0, 1]` into its exponent `k` (`δ = 2^-k`).
pub fn parse_delta(s: &str) -> Result<u32, String> {
    let s = s.trim();
    let bad = || format!("`{s}` is not an exact power of two in (0, 1] (use 0.25, 2^-2 or 1/4)");
    let k = if let Some(e) = s.strip_prefix("2^") {
        let e: i64 = e.trim_start_matches('(').trim_end_matches(')').parse().map_err(|_| bad())?;
        if e > 0 {
            return Err(bad());
        }
        e.unsigned_abs()
    } else if let Some(d) = s.strip_prefix("1/") {
        let d: u64 = d.parse().map_err(|_| bad())?;
        if !d.is_power_of_two() {
            return Err(bad());
        }
        u64::from(d.trailing_zeros())
    } else {
        let v: f64 = s.parse().map_err(|_| bad())?;
        if !(v > 0.0 && v <= 1.0) {
            return Err(bad());
        }
        let k = -v.log2();
        if k.fract() != 0.0 || 2f64.powi(-(k as i32)) != v {
            return Err(bad());
        }
        k as u64
    };
    if k > u64::from(MAX_GRID_EXPONENT) {
        return Err(format!("`{s}` is finer than 2^-{MAX_GRID_EXPONENT}"));
    }
    Ok(k as u32)
}

/// Canonical spelling used in echoed configs.
pub fn format_delta(k: u32) -> String {
    format!("2^-{k}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepted_spellings() {
        for s in ["0.25", "2^-2", "1/4", " 0.250 ", "2^(-2)"] {
            assert_eq!(parse_delta(s), Ok(2), "{s}");
        }
        assert_eq!(parse_delta("1"), Ok(0));
        assert_eq!(parse_delta("2^0"), Ok(0));
        assert_eq!(parse_delta("0.015625"), Ok(6));
        assert_eq!(parse_delta("2^-30"), Ok(30));
        assert_eq!(parse_delta(&format_delta(7)), Ok(7));
    }

    #[test]
    fn rejected_spellings() {
        for s in ["0.3", "0", "-0.25", "2", "2^3", "1/3", "1/0", "abc", "", "2^-31", "0.1"] {
            assert!(parse_delta(s).is_err(), "{s}");
        }
    }
}
