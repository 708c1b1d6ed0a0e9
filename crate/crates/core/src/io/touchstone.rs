use std::path::Path;

use num_complex::Complex64;

use crate::spectrum::{FrequencyGrid, SpectrumTrace};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    MagnitudeAngle,
    DbAngle,
    RealImaginary,
}

/// Reads the S21 column of a two-port Touchstone (`.s2p`) file as one trace.
///
/// The option line's frequency unit and data format (`MA`, `DB` or `RI`) are
/// honoured; defaults are `GHZ S MA R 50`. Frequencies must be uniformly spaced.
pub fn read_touchstone_s21(path: impl AsRef<Path>, sweep_value: Option<f64>) -> Result<SpectrumTrace> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_touchstone_s21(&text, path, sweep_value)
}

pub fn parse_touchstone_s21(text: &str, origin: &Path, sweep_value: Option<f64>) -> Result<SpectrumTrace> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line: line as u64,
        message,
    };
    let mut unit_ghz = 1.0;
    let mut format = Format::MagnitudeAngle;
    let mut seen_options = false;
    let mut numbers: Vec<(f64, usize)> = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('!').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(opts) = line.strip_prefix('#') {
            if seen_options {
                return Err(err(line_no, "second option line".into()));
            }
            seen_options = true;
            let mut tokens = opts.split_whitespace().map(str::to_ascii_uppercase);
            while let Some(t) = tokens.next() {
                match t.as_str() {
                    "HZ" => unit_ghz = 1e-9,
                    "KHZ" => unit_ghz = 1e-6,
                    "MHZ" => unit_ghz = 1e-3,
                    "GHZ" => unit_ghz = 1.0,
                    "S" => {}
                    "Y" | "Z" | "H" | "G" => {
                        return Err(err(line_no, format!("{t}-parameters are not supported, only S")))
                    }
                    "MA" => format = Format::MagnitudeAngle,
                    "DB" => format = Format::DbAngle,
                    "RI" => format = Format::RealImaginary,
                    "R" => {
                        tokens.next();
                    }
                    other => return Err(err(line_no, format!("unknown option {other:?}"))),
                }
            }
            continue;
        }
        if line.starts_with('[') {
            return Err(err(line_no, "Touchstone 2.0 keywords are not supported".into()));
        }
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| err(line_no, format!("cannot parse {tok:?} as a number")))?;
            if !v.is_finite() {
                return Err(err(line_no, format!("{tok:?} is not finite")));
            }
            numbers.push((v, line_no));
        }
    }

    // frequency followed by S11, S21, S12, S22 as pairs
    const RECORD: usize = 9;
    if numbers.is_empty() {
        return Err(err(0, "no data".into()));
    }
    if !numbers.len().is_multiple_of(RECORD) {
        let last = numbers.last().map_or(0, |n| n.1);
        return Err(err(
            last,
            format!("{} numbers do not form whole two-port records of {RECORD}", numbers.len()),
        ));
    }
    let mut freqs = Vec::with_capacity(numbers.len() / RECORD);
    let mut s21 = Vec::with_capacity(numbers.len() / RECORD);
    for rec in numbers.chunks(RECORD) {
        let f = rec[0].0 * unit_ghz;
        if let Some(&prev) = freqs.last() {
            if f <= prev {
                return Err(err(rec[0].1, format!("frequency {f} GHz is not increasing")));
            }
        }
        freqs.push(f);
        let (a, b) = (rec[3].0, rec[4].0);
        s21.push(match format {
            Format::MagnitudeAngle => Complex64::from_polar(a, b.to_radians()),
            Format::DbAngle => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
            Format::RealImaginary => Complex64::new(a, b),
        });
    }
    let grid = FrequencyGrid::from_samples(&freqs).map_err(|e| err(0, e.to_string()))?;
    SpectrumTrace::new(grid, s21, sweep_value)
}
