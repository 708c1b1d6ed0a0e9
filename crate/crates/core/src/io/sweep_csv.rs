use std::collections::BTreeMap;
use std::path::Path;

use crate::analysis::BranchSet;
use crate::spectrum::{FrequencyGrid, SpectrumTrace, SweepResult};
use crate::{Error, Result};

/// How `|S21|` is stored. Always declared, never guessed from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MagnitudeScale {
    Linear,
    /// `20 log10 |S21|`.
    Db,
}

impl MagnitudeScale {
    pub fn column_name(&self) -> &'static str {
        match self {
            MagnitudeScale::Linear => "mag",
            MagnitudeScale::Db => "mag_dB",
        }
    }
}

/// Long-format sweep file: one row per `(L, frequency)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCsvLayout {
    pub l_column: usize,
    pub frequency_column: usize,
    pub magnitude_column: usize,
    pub scale: MagnitudeScale,
    pub header: bool,
    pub delimiter: u8,
    /// Significant digits written for every number. `None` writes the
    /// shortest text that reads back to the same `f64`.
    pub precision: Option<usize>,
}

impl Default for SweepCsvLayout {
    fn default() -> Self {
        SweepCsvLayout {
            l_column: 0,
            frequency_column: 1,
            magnitude_column: 2,
            scale: MagnitudeScale::Linear,
            header: true,
            delimiter: b',',
            precision: None,
        }
    }
}

impl SweepCsvLayout {
    pub fn with_scale(mut self, scale: MagnitudeScale) -> Self {
        self.scale = scale;
        self
    }

    fn validate(&self) -> Result<()> {
        let cols = [self.l_column, self.frequency_column, self.magnitude_column];
        if cols[0] == cols[1] || cols[0] == cols[2] || cols[1] == cols[2] {
            return Err(Error::invalid("L, frequency and magnitude need distinct columns"));
        }
        if self.precision == Some(0) || self.precision.is_some_and(|p| p > 17) {
            return Err(Error::invalid("precision must be between 1 and 17 significant digits"));
        }
        if self.delimiter == b'.' || self.delimiter == b'-' || self.delimiter.is_ascii_alphanumeric() {
            return Err(Error::invalid("delimiter clashes with number syntax"));
        }
        Ok(())
    }

    fn width(&self) -> usize {
        self.l_column.max(self.frequency_column).max(self.magnitude_column) + 1
    }
}

/// Writes `v` with `precision` significant digits, or shortest round-trip text.
pub(crate) fn format_number(v: f64, precision: Option<usize>) -> String {
    match precision {
        None => format!("{v}"),
        Some(p) => {
            let rounded: f64 = format!("{:.*e}", p - 1, v).parse().expect("formatted float parses");
            format!("{rounded}")
        }
    }
}

/// Reads a long-format sweep. Rows may come in any order; traces are grouped
/// by exact `L` and sorted by frequency, and every `L` must share one grid.
pub fn read_sweep_csv(path: impl AsRef<Path>, layout: &SweepCsvLayout) -> Result<SweepResult> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sweep_csv(&text, path, layout)
}

pub fn parse_sweep_csv(text: &str, origin: &Path, layout: &SweepCsvLayout) -> Result<SweepResult> {
    layout.validate()?;
    let parse_err = |line: u64, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(layout.header)
        .delimiter(layout.delimiter)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());

    if layout.header {
        let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
        if let Some(name) = header.get(layout.magnitude_column) {
            let other = match layout.scale {
                MagnitudeScale::Linear => MagnitudeScale::Db,
                MagnitudeScale::Db => MagnitudeScale::Linear,
            };
            if name == other.column_name() {
                return Err(parse_err(
                    1,
                    format!(
                        "magnitude column is named {name:?} but the layout declares {}",
                        layout.scale.column_name()
                    ),
                ));
            }
        }
    }

    let mut groups: BTreeMap<u64, (f64, Vec<(f64, f64, u64)>)> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() < layout.width() {
            return Err(parse_err(
                line,
                format!("expected at least {} fields, found {}", layout.width(), record.len()),
            ));
        }
        let field = |col: usize, what: &str| -> Result<f64> {
            let raw = &record[col];
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_err(line, format!("{what}: cannot parse {raw:?} as a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("{what}: {raw:?} is not finite")));
            }
            Ok(v)
        };
        let l = field(layout.l_column, "L")?;
        let f = field(layout.frequency_column, "frequency")?;
        let raw_mag = field(layout.magnitude_column, "magnitude")?;
        let mag = match layout.scale {
            MagnitudeScale::Linear => raw_mag,
            MagnitudeScale::Db => 10f64.powf(raw_mag / 20.0),
        };
        if mag < 0.0 {
            return Err(parse_err(line, format!("negative linear magnitude {raw_mag}")));
        }
        // −0.0 and 0.0 are the same size
        let key = if l == 0.0 { 0.0f64 } else { l };
        groups.entry(order_key(key)).or_insert((key, Vec::new())).1.push((f, mag, line));
    }
    if groups.is_empty() {
        return Err(parse_err(0, "no data rows".into()));
    }

    let mut traces = Vec::with_capacity(groups.len());
    let mut reference: Option<FrequencyGrid> = None;
    for (_, (l, mut rows)) in groups {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(parse_err(
                w[0].2.max(w[1].2),
                format!("frequency {} appears twice at L = {l}", w[0].0),
            ));
        }
        let freqs: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let grid = FrequencyGrid::from_samples(&freqs).map_err(|e| Error::InconsistentGrid {
            l,
            message: e.to_string(),
        })?;
        match &reference {
            None => reference = Some(grid),
            Some(r) => {
                if !r.matches(&grid, 1e-9) {
                    return Err(Error::InconsistentGrid {
                        l,
                        message: format!(
                            "{} points over [{}, {}] GHz, expected {} points over [{}, {}] GHz",
                            grid.points(),
                            grid.start(),
                            grid.stop(),
                            r.points(),
                            r.start(),
                            r.stop()
                        ),
                    });
                }
            }
        }
        let mags: Vec<f64> = rows.iter().map(|r| r.1).collect();
        traces.push(SpectrumTrace::from_magnitudes(
            reference.expect("set above"),
            &mags,
            Some(l),
        )?);
    }
    SweepResult::from_traces(traces)
}

/// Total order on finite floats as an integer key.
fn order_key(v: f64) -> u64 {
    let bits = v.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

/// Rows are `L` ascending, then frequency ascending. Output depends only on
/// the sweep and the layout.
pub fn write_sweep_csv(sweep: &SweepResult, path: impl AsRef<Path>, layout: &SweepCsvLayout) -> Result<()> {
    let path = path.as_ref();
    let text = sweep_csv_string(sweep, layout)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn sweep_csv_string(sweep: &SweepResult, layout: &SweepCsvLayout) -> Result<String> {
    layout.validate()?;
    if sweep.traces().iter().any(|t| t.is_empty()) || sweep.is_empty() {
        return Err(Error::invalid("cannot write an empty sweep"));
    }
    let width = layout.width();
    let mut fields = vec![String::new(); width];
    let delimiter = char::from(layout.delimiter);
    let mut out = String::new();
    let push_row = |fields: &[String], out: &mut String| {
        for (k, f) in fields.iter().enumerate() {
            if k > 0 {
                out.push(delimiter);
            }
            out.push_str(f);
        }
        out.push('\n');
    };
    if layout.header {
        fields[layout.l_column] = "L_mm".into();
        fields[layout.frequency_column] = "freq_GHz".into();
        fields[layout.magnitude_column] = layout.scale.column_name().into();
        push_row(&fields, &mut out);
        for f in &mut fields {
            f.clear();
        }
    }
    let grid = sweep.grid();
    for (l, trace) in sweep.l_values().iter().zip(sweep.traces()) {
        let l_text = format_number(*l, layout.precision);
        for (k, s) in trace.s21().iter().enumerate() {
            let mag = match layout.scale {
                MagnitudeScale::Linear => s.norm(),
                MagnitudeScale::Db => 20.0 * s.norm().log10(),
            };
            if !mag.is_finite() {
                return Err(Error::NonFinite("magnitude written as dB"));
            }
            fields[layout.l_column] = l_text.clone();
            fields[layout.frequency_column] = format_number(grid.frequency(k), layout.precision);
            fields[layout.magnitude_column] = format_number(mag, layout.precision);
            push_row(&fields, &mut out);
        }
    }
    Ok(out)
}

/// One row per branch sample: `branch,L_mm,freq_GHz,depth,width_GHz`.
pub fn write_tracks_csv(set: &BranchSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, tracks_csv_string(set)).map_err(|e| Error::io(path, e))
}

pub fn tracks_csv_string(set: &BranchSet) -> String {
    let mut out = String::from("branch,L_mm,freq_GHz,depth,width_GHz\n");
    for (b, branch) in set.branches.iter().enumerate() {
        for s in &branch.samples {
            out.push_str(&format!("{b},{},{},{},{}\n", s.l, s.frequency, s.depth, s.width));
        }
    }
    out
}
