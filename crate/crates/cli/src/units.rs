//! Numeric arguments with optional unit suffixes.
//!
//! A bare number is taken in the option's own unit. Suffixes are case
//! insensitive and may be separated from the number by spaces.

fn split(s: &str) -> (&str, String) {
    let s = s.trim();
    let at = s
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '+' | '-' | 'e' | 'E')))
        .unwrap_or(s.len());
    // An exponent marker directly before the suffix belongs to the suffix ("5e" is not a number).
    let (num, unit) = s.split_at(at);
    (num.trim(), unit.trim().to_ascii_lowercase())
}

fn scaled(s: &str, units: &[(&str, f64)], what: &str) -> Result<f64, String> {
    let (num, unit) = split(s);
    let value: f64 = num.parse().map_err(|_| format!("`{s}` is not a {what}"))?;
    let factor = units
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|&(_, f)| f)
        .ok_or_else(|| {
            let known: Vec<_> = units.iter().map(|(u, _)| *u).filter(|u| !u.is_empty()).collect();
            format!("unknown unit `{unit}` in `{s}`, expected one of {}", known.join(", "))
        })?;
    let v = value * factor;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("`{s}` must be a finite non-negative {what}"));
    }
    Ok(v)
}

/// Distance in kilometres.
pub fn km(s: &str) -> Result<f64, String> {
    scaled(s, &[("", 1.0), ("km", 1.0), ("m", 1e-3)], "distance")
}

/// Duration in microseconds.
pub fn micros(s: &str) -> Result<f64, String> {
    scaled(s, &[("", 1.0), ("us", 1.0), ("µs", 1.0), ("ns", 1e-3), ("ms", 1e3), ("s", 1e6)], "duration")
}

/// Duration in seconds.
pub fn seconds(s: &str) -> Result<f64, String> {
    scaled(s, &[("", 1.0), ("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("min", 60.0)], "duration")
}

/// Bitrate in Gbps.
pub fn gbps(s: &str) -> Result<f64, String> {
    scaled(s, &[("", 1.0), ("gbps", 1.0), ("mbps", 1e-3), ("kbps", 1e-6), ("bps", 1e-9)], "bitrate")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes_scale_to_the_option_unit() {
        assert_eq!(km("25"), Ok(25.0));
        assert_eq!(km("25km"), Ok(25.0));
        assert_eq!(km("2500 m"), Ok(2.5));
        assert_eq!(micros("66.7us"), Ok(66.7));
        assert_eq!(micros("40000ns"), Ok(40.0));
        assert_eq!(micros("1e2 US"), Ok(100.0));
        assert_eq!(gbps("10Gbps"), Ok(10.0));
        assert_eq!(gbps("500 mbps"), Ok(0.5));
        assert_eq!(seconds("90"), Ok(90.0));
        assert_eq!(seconds("1min"), Ok(60.0));
    }

    #[test]
    fn bad_inputs_explain_themselves() {
        assert!(km("25 furlongs").unwrap_err().contains("km"));
        assert!(km("-3").is_err());
        assert!(gbps("fast").is_err());
        assert!(micros("").is_err());
    }
}
