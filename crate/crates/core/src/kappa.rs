//! Exact rational confidence thresholds.

use num_integer::Integer;
use num_rational::Rational64;

use crate::error::{Error, Result};

pub type Kappa = Rational64;

/// Parses `P/Q` or a plain decimal (`0.75`) into an exact rational.
pub fn parse_kappa(text: &str) -> Result<Kappa> {
    let text = text.trim();
    let bad = || {
        Error::Value(format!(
            "invalid threshold `{text}` (expected P/Q or decimal)"
        ))
    };
    let k = if let Some((p, q)) = text.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| bad())?;
        let q: i64 = q.trim().parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(bad());
        }
        Kappa::new(p, q)
    } else {
        let (int, frac) = text.split_once('.').unwrap_or((text, ""));
        if frac.len() > 15 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let whole: i64 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        let scale = 10i64.pow(frac.len() as u32);
        let f: i64 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| bad())?
        };
        Kappa::new(whole * scale + f, scale)
    };
    check_unit(k)?;
    Ok(k)
}

pub fn check_unit(k: Kappa) -> Result<()> {
    if k < Kappa::from_integer(0) || k > Kappa::from_integer(1) {
        return Err(Error::KappaRange(k.to_string()));
    }
    Ok(())
}

/// `⌊i·k⌋` in exact integer arithmetic, for `k ≥ 0`.
pub fn floor_mul(i: u64, k: Kappa) -> u64 {
    let num = i as i128 * *k.numer() as i128;
    Integer::div_floor(&num, &(*k.denom() as i128)) as u64
}

pub fn to_f64(k: Kappa) -> f64 {
    *k.numer() as f64 / *k.denom() as f64
}
