//! CSV formats for observations, feedback models, predictions, histograms and
//! Monte Carlo sample dumps.
//!
//! All files are UTF-8 with LF line endings and `.` as decimal separator.
//! Floats are written in their shortest round-trip form.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, StringRecord};

use crate::error::{Error, Result};
use crate::feedback::{
    FeedbackDataset, FeedbackKey, ObservationSet, PredictionSet, RatingObservation, RatingScale,
    UncertainFeedback,
};
use crate::simulate::HistogramBin;

pub const OBSERVATION_HEADER: [&str; 4] = ["user_id", "item_id", "trial", "rating"];
pub const FEEDBACK_HEADER: [&str; 4] = ["user_id", "item_id", "mu", "sigma"];
pub const PREDICTION_HEADER: [&str; 3] = ["user_id", "item_id", "prediction"];
pub const HISTOGRAM_HEADER: [&str; 3] = ["bin_lo", "bin_hi", "count"];
pub const SAMPLE_HEADER: [&str; 2] = ["sample_index", "score"];

struct Table<R> {
    name: String,
    reader: csv::Reader<R>,
    columns: Vec<usize>,
}

impl<R: Read> Table<R> {
    fn open(reader: R, name: &str, wanted: &[&str]) -> Result<Self> {
        let mut reader = ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = reader.headers().map_err(|e| csv_error(name, &e))?.clone();
        let columns = wanted
            .iter()
            .map(|&col| {
                header
                    .iter()
                    .position(|h| h == col)
                    .ok_or_else(|| Error::MissingColumn {
                        column: col.to_string(),
                        source_name: name.to_string(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Table {
            name: name.to_string(),
            reader,
            columns,
        })
    }

    /// Visits every record with its 1-based line number.
    fn for_each(mut self, mut f: impl FnMut(Row<'_>) -> Result<()>) -> Result<()> {
        let mut record = StringRecord::new();
        loop {
            match self.reader.read_record(&mut record) {
                Ok(false) => return Ok(()),
                Ok(true) => {
                    let line = record.position().map_or(0, |p| p.line());
                    f(Row {
                        name: &self.name,
                        line,
                        record: &record,
                        columns: &self.columns,
                    })?;
                }
                Err(e) => return Err(csv_error(&self.name, &e)),
            }
        }
    }
}

struct Row<'a> {
    name: &'a str,
    line: u64,
    record: &'a StringRecord,
    columns: &'a [usize],
}

impl Row<'_> {
    fn malformed(&self, message: String) -> Error {
        Error::Malformed {
            source_name: self.name.to_string(),
            line: self.line,
            message,
        }
    }

    fn text(&self, col: usize, what: &str) -> Result<&str> {
        let v = self.record.get(self.columns[col]).unwrap_or("");
        if v.is_empty() {
            return Err(self.malformed(format!("empty {what}")));
        }
        Ok(v)
    }

    fn parse<T: std::str::FromStr>(&self, col: usize, what: &str) -> Result<T> {
        let raw = self.text(col, what)?;
        raw.parse()
            .map_err(|_| self.malformed(format!("cannot parse {what} `{raw}`")))
    }

    fn number(&self, col: usize, what: &str) -> Result<f64> {
        let v: f64 = self.parse(col, what)?;
        if !v.is_finite() {
            return Err(self.malformed(format!("{what} must be finite")));
        }
        Ok(v)
    }

    fn key(&self) -> Result<FeedbackKey> {
        Ok(FeedbackKey::new(
            self.text(0, "user_id")?,
            self.text(1, "item_id")?,
        ))
    }
}

fn csv_error(name: &str, e: &csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Malformed {
        source_name: name.to_string(),
        line,
        message: e.to_string(),
    }
}

fn open_file(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        Error::InvalidInput(format!("cannot open {}: {e}", path.display()))
    })
}

pub fn read_observations<R: Read>(reader: R, name: &str) -> Result<ObservationSet> {
    let mut rows = Vec::new();
    Table::open(reader, name, &OBSERVATION_HEADER)?.for_each(|row| {
        rows.push(RatingObservation {
            key: row.key()?,
            trial: row.parse(2, "trial")?,
            value: row.number(3, "rating")?,
        });
        Ok(())
    })?;
    if rows.is_empty() {
        return Err(Error::invalid(format!("{name}: no observations")));
    }
    ObservationSet::new(RatingScale::unbounded(), rows)
}

pub fn read_observations_path(path: &Path) -> Result<ObservationSet> {
    read_observations(open_file(path)?, &path.display().to_string())
}

pub fn read_feedback<R: Read>(reader: R, name: &str) -> Result<FeedbackDataset> {
    let mut entries = Vec::new();
    Table::open(reader, name, &FEEDBACK_HEADER)?.for_each(|row| {
        let sigma = row.number(3, "sigma")?;
        if sigma < 0.0 {
            return Err(row.malformed("sigma must be non-negative".into()));
        }
        entries.push(UncertainFeedback::new(row.key()?, row.number(2, "mu")?, sigma));
        Ok(())
    })?;
    if entries.is_empty() {
        return Err(Error::invalid(format!("{name}: no feedback rows")));
    }
    FeedbackDataset::new(None, entries)
}

pub fn read_feedback_path(path: &Path) -> Result<FeedbackDataset> {
    read_feedback(open_file(path)?, &path.display().to_string())
}

pub fn read_predictions<R: Read>(reader: R, name: &str) -> Result<PredictionSet> {
    let mut entries = BTreeMap::new();
    Table::open(reader, name, &PREDICTION_HEADER)?.for_each(|row| {
        let key = row.key()?;
        let value = row.number(2, "prediction")?;
        if entries.insert(key.clone(), value).is_some() {
            return Err(row.malformed(format!("duplicate prediction for {key}")));
        }
        Ok(())
    })?;
    PredictionSet::new(entries)
}

pub fn read_predictions_path(path: &Path) -> Result<PredictionSet> {
    read_predictions(open_file(path)?, &path.display().to_string())
}

fn header_line<W: Write>(w: &mut W, header: &[&str]) -> Result<()> {
    writeln!(w, "{}", header.join(","))?;
    Ok(())
}

// Identifiers are written verbatim; quote only when they would break the row.
fn field(s: &str) -> std::borrow::Cow<'_, str> {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\"")).into()
    } else {
        s.into()
    }
}

pub fn write_observations<W: Write>(w: &mut W, obs: &ObservationSet) -> Result<()> {
    header_line(w, &OBSERVATION_HEADER)?;
    for o in obs.observations() {
        writeln!(
            w,
            "{},{},{},{}",
            field(&o.key.user_id),
            field(&o.key.item_id),
            o.trial,
            o.value
        )?;
    }
    Ok(())
}

pub fn write_feedback<W: Write>(w: &mut W, data: &FeedbackDataset) -> Result<()> {
    header_line(w, &FEEDBACK_HEADER)?;
    for e in data.entries() {
        writeln!(
            w,
            "{},{},{},{}",
            field(&e.key.user_id),
            field(&e.key.item_id),
            e.mu,
            e.sigma
        )?;
    }
    Ok(())
}

pub fn write_predictions<W: Write>(w: &mut W, preds: &PredictionSet) -> Result<()> {
    header_line(w, &PREDICTION_HEADER)?;
    for (k, v) in preds.entries() {
        writeln!(w, "{},{},{}", field(&k.user_id), field(&k.item_id), v)?;
    }
    Ok(())
}

pub fn write_histogram<W: Write>(w: &mut W, bins: &[HistogramBin]) -> Result<()> {
    header_line(w, &HISTOGRAM_HEADER)?;
    for b in bins {
        writeln!(w, "{},{},{}", b.lo, b.hi, b.count)?;
    }
    Ok(())
}

pub fn write_samples<W: Write>(w: &mut W, samples: &[f64]) -> Result<()> {
    header_line(w, &SAMPLE_HEADER)?;
    for (i, s) in samples.iter().enumerate() {
        writeln!(w, "{i},{s}")?;
    }
    Ok(())
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}
