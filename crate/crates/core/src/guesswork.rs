//! Attacker effort implied by a min-entropy value.
//!
//! An adversary guessing in order of decreasing probability succeeds within
//! `q` guesses with probability at most `q · 2^(−H∞)`, needs about
//! `2^(H∞ − 1)` guesses on average, and at `r` guesses per second takes
//! about `2^(H∞ − 1) / r` seconds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `min(1, q · 2^(−hmin))`.
pub fn success_bound(hmin: f64, q: u64) -> f64 {
    (q as f64 * (-hmin).exp2()).min(1.0)
}

/// `2^(hmin − 1)`, unfloored.
pub fn expected_guesses(hmin: f64) -> f64 {
    (hmin - 1.0).exp2()
}

/// Expected seconds to success at `rate` guesses per second.
pub fn time_to_success(hmin: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::NonPositiveRate(rate));
    }
    Ok(expected_guesses(hmin) / rate)
}

/// Significant-figure rendering that keeps trailing zeros: `9.10`, `0.128`,
/// `128`.
fn sig3(x: f64) -> String {
    if x == 0.0 {
        return "0.00".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    // Rounding can carry into the next decade (e.g. 9.996 -> 10.0).
    let rounded_mag = {
        let scale = 10f64.powi(2 - magnitude);
        let r = (x * scale).round() / scale;
        r.abs().log10().floor() as i32
    };
    let decimals = (2 - rounded_mag).max(0) as usize;
    format!("{x:.decimals$}")
}

fn scientific(x: f64) -> String {
    let exp = x.abs().log10().floor() as i32;
    let mut mantissa = x / 10f64.powi(exp);
    let mut exp = exp;
    if (mantissa * 100.0).round() >= 1000.0 {
        mantissa /= 10.0;
        exp += 1;
    }
    format!("{mantissa:.2}×10^{exp}")
}

const UNITS: [(&str, f64); 4] = [("s", 1.0), ("min", 60.0), ("h", 3600.0), ("d", 86_400.0)];

/// Mantissa at which a duration moves up to the next unit.
const PROMOTE_AT: f64 = 2.25;

/// Human-readable duration with three significant figures.
///
/// Below one second the value is shown in seconds down to 0.1 s and in
/// milliseconds below that. From one second up, the value moves to the next
/// larger unit (min, h, d) only once it reaches 2.25 of that unit, so 128 s
/// stays in seconds while 2048 s becomes 34.1 min.
pub fn format_duration(seconds: f64) -> Result<String> {
    if !(seconds >= 0.0 && seconds.is_finite()) {
        return Err(Error::InvalidDuration(seconds.to_string()));
    }
    if seconds < 0.1 {
        return Ok(format!("{} ms", sig3(seconds * 1000.0)));
    }
    let mut unit = 0;
    while unit + 1 < UNITS.len() && seconds / UNITS[unit + 1].1 >= PROMOTE_AT {
        unit += 1;
    }
    let value = seconds / UNITS[unit].1;
    let text = if value >= 1000.0 { scientific(value) } else { sig3(value) };
    Ok(format!("{text} {}", UNITS[unit].0))
}

/// Parses `"<number> <unit>"` with unit ms, s, min, h or d back to seconds.
pub fn parse_duration(text: &str) -> Result<f64> {
    let bad = || Error::InvalidDuration(text.to_string());
    let (number, unit) = text.trim().rsplit_once(' ').ok_or_else(bad)?;
    let value = match number.split_once("×10^") {
        Some((m, e)) => m.parse::<f64>().map_err(|_| bad())? * 10f64.powi(e.parse::<i32>().map_err(|_| bad())?),
        None => number.parse::<f64>().map_err(|_| bad())?,
    };
    let scale = match unit {
        "ms" => 1e-3,
        other => UNITS.iter().find(|u| u.0 == other).ok_or_else(bad)?.1,
    };
    Ok(value * scale)
}

/// Guess counts: grouped integers below a million (`2,048`), three
/// significant figures in scientific form above (`8.39×10^6`).
pub fn format_guesses(guesses: f64) -> String {
    if guesses >= 1e6 {
        return scientific(guesses);
    }
    if guesses < 1.0 {
        return sig3(guesses);
    }
    let digits = (guesses.round() as u64).to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Column label for a rate: `1/s`, `10/s`, `10^3/s`, `10^6/s`.
pub fn format_rate(rate: f64) -> String {
    let exp = rate.log10().round();
    if rate >= 100.0 && (10f64.powf(exp) - rate).abs() < 1e-9 * rate {
        format!("10^{}/s", exp as i32)
    } else {
        format!("{rate}/s")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessworkRow {
    pub hmin: f64,
    pub expected_guesses: f64,
    pub seconds: Vec<f64>,
    pub expected_label: String,
    pub time_labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessworkTable {
    pub rates: Vec<f64>,
    pub rows: Vec<GuessworkRow>,
}

/// One row per min-entropy value, one time column per rate.
pub fn guesswork_table(hmins: &[f64], rates: &[f64]) -> Result<GuessworkTable> {
    if hmins.is_empty() || rates.is_empty() {
        return Err(Error::InvalidGrid("guesswork table needs at least one hmin and one rate".into()));
    }
    let rows = hmins
        .iter()
        .map(|&hmin| {
            let seconds = rates.iter().map(|&r| time_to_success(hmin, r)).collect::<Result<Vec<_>>>()?;
            let time_labels = seconds.iter().map(|&s| format_duration(s)).collect::<Result<Vec<_>>>()?;
            let expected_guesses = expected_guesses(hmin);
            Ok(GuessworkRow {
                hmin,
                expected_guesses,
                expected_label: format_guesses(expected_guesses),
                seconds,
                time_labels,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GuessworkTable {
        rates: rates.to_vec(),
        rows,
    })
}
