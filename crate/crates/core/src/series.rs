//! Time series, label and detection containers plus CSV ingestion.
//!
//! Timestamps are 0-based. A breakpoint at index `b` marks the boundary
//! between sample `b - 1` and sample `b`, so valid breakpoints lie in
//! `1..T`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::DistanceCurve;
use crate::error::{Error, Result};

/// An `Nc x T` matrix of finite samples, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    channels: usize,
    len: usize,
    values: Vec<f64>,
    channel_names: Option<Vec<String>>,
    origin: String,
}

impl TimeSeries {
    /// Build from channel-major values (`values[c * len + t]`).
    pub fn new(channels: usize, len: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidInput("series needs at least one channel".into()));
        }
        if len < 2 {
            return Err(Error::InvalidInput(format!(
                "series needs at least 2 timestamps, got {len}"
            )));
        }
        if values.len() != channels * len {
            return Err(Error::DimensionMismatch {
                expected: channels * len,
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                channel: i / len,
                timestamp: i % len,
                value: values[i],
            });
        }
        Ok(Self {
            channels,
            len,
            values,
            channel_names: None,
            origin: "synthetic".to_string(),
        })
    }

    /// Build a single-channel series.
    pub fn univariate(values: Vec<f64>) -> Result<Self> {
        let len = values.len();
        Self::new(1, len, values)
    }

    /// Build from one `Vec` per channel.
    pub fn from_channels(rows: Vec<Vec<f64>>) -> Result<Self> {
        let channels = rows.len();
        let len = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != len) {
            return Err(Error::DimensionMismatch {
                expected: len,
                actual: bad.len(),
            });
        }
        Self::new(channels, len, rows.into_iter().flatten().collect())
    }

    pub fn with_channel_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.channels {
            return Err(Error::DimensionMismatch {
                expected: self.channels,
                actual: names.len(),
            });
        }
        self.channel_names = Some(names);
        Ok(self)
    }

    pub fn with_origin(mut self, origin: impl Into<String>) -> Self {
        self.origin = origin.into();
        self
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.len
    }

    /// Always false: a valid series has at least two samples.
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.values[c * self.len..(c + 1) * self.len]
    }

    pub fn get(&self, channel: usize, t: usize) -> f64 {
        self.values[channel * self.len + t]
    }

    pub fn channel_names(&self) -> Option<&[String]> {
        self.channel_names.as_deref()
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    /// Collapse channels into one by the per-timestamp Euclidean norm.
    /// A single-channel series is returned unchanged.
    pub fn reduce_l2(&self) -> Vec<f64> {
        if self.channels == 1 {
            return self.values.clone();
        }
        (0..self.len)
            .map(|t| {
                (0..self.channels)
                    .map(|c| self.get(c, t).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }
}

/// Orientation of a series CSV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsvLayout {
    /// One column per channel, one row per timestamp.
    #[default]
    ChannelsAsColumns,
    /// One row per channel, one column per timestamp.
    ChannelsAsRows,
}

pub fn load_csv(path: impl AsRef<Path>, layout: CsvLayout, header: bool) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .comment(None)
        .from_reader(BufReader::new(file));

    let names: Option<Vec<String>> = if header && layout == CsvLayout::ChannelsAsColumns {
        let h = reader.headers().map_err(|e| csv_error(path, e))?;
        Some(h.iter().map(str::to_string).collect())
    } else {
        None
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                column: col + 1,
                message: format!("not a number: {field:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    column: col + 1,
                    message: format!("non-finite value {field:?}"),
                });
            }
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }

    let series = match layout {
        CsvLayout::ChannelsAsRows => TimeSeries::from_channels(rows)?,
        CsvLayout::ChannelsAsColumns => {
            let channels = rows[0].len();
            let len = rows.len();
            let mut values = vec![0.0; channels * len];
            for (t, row) in rows.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    values[c * len + t] = *v;
                }
            }
            TimeSeries::new(channels, len, values)?
        }
    };
    let series = match names {
        Some(n) => series.with_channel_names(n)?,
        None => series,
    };
    Ok(series.with_origin(path.display().to_string()))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let (line, column) = match e.kind() {
        csv::ErrorKind::UnequalLengths { pos, len, .. } => {
            (pos.as_ref().map_or(0, |p| p.line()), *len as usize + 1)
        }
        _ => (e.position().map_or(0, |p| p.line()), 0),
    };
    Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: e.to_string(),
    }
}

/// Write a series in the given layout. Values use the shortest decimal
/// representation that parses back to the identical `f64`.
pub fn write_csv(
    series: &TimeSeries,
    path: impl AsRef<Path>,
    layout: CsvLayout,
    header: bool,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    match layout {
        CsvLayout::ChannelsAsColumns => {
            if header {
                let names: Vec<String> = match series.channel_names() {
                    Some(n) => n.to_vec(),
                    None => (0..series.channels()).map(|c| format!("ch{c}")).collect(),
                };
                writeln!(w, "{}", names.join(",")).map_err(io)?;
            }
            for t in 0..series.len() {
                let row: Vec<String> = (0..series.channels())
                    .map(|c| series.get(c, t).to_string())
                    .collect();
                writeln!(w, "{}", row.join(",")).map_err(io)?;
            }
        }
        CsvLayout::ChannelsAsRows => {
            if header {
                let idx: Vec<String> = (0..series.len()).map(|t| t.to_string()).collect();
                writeln!(w, "{}", idx.join(",")).map_err(io)?;
            }
            for c in 0..series.channels() {
                let row: Vec<String> = series.channel(c).iter().map(f64::to_string).collect();
                writeln!(w, "{}", row.join(",")).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

/// Ground-truth breakpoints with optional per-segment labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    breakpoints: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segment_labels: Option<Vec<String>>,
}

impl LabelSet {
    /// Validate strictly increasing breakpoints inside `1..len`.
    pub fn new(breakpoints: Vec<usize>, len: usize) -> Result<Self> {
        validate_breakpoints(&breakpoints, len)?;
        Ok(Self {
            breakpoints,
            segment_labels: None,
        })
    }

    /// Sort and deduplicate before validating.
    pub fn from_unsorted(mut breakpoints: Vec<usize>, len: usize) -> Result<Self> {
        breakpoints.sort_unstable();
        breakpoints.dedup();
        Self::new(breakpoints, len)
    }

    pub fn with_segment_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.breakpoints.len() + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.breakpoints.len() + 1,
                actual: labels.len(),
            });
        }
        self.segment_labels = Some(labels);
        Ok(self)
    }

    pub fn breakpoints(&self) -> &[usize] {
        &self.breakpoints
    }

    pub fn segment_labels(&self) -> Option<&[String]> {
        self.segment_labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }
}

pub(crate) fn validate_breakpoints(breakpoints: &[usize], len: usize) -> Result<()> {
    for (i, &b) in breakpoints.iter().enumerate() {
        if b == 0 || b >= len {
            return Err(Error::InvalidInput(format!(
                "breakpoint {b} outside 1..{len}"
            )));
        }
        if i > 0 && breakpoints[i - 1] >= b {
            return Err(Error::InvalidInput(format!(
                "breakpoints not strictly increasing at {b}"
            )));
        }
    }
    Ok(())
}

/// Read a label file: one breakpoint index per line with an optional
/// `,label` suffix naming the segment that starts there. Blank lines and
/// lines starting with `#` are skipped. Duplicates are dropped with a
/// warning.
pub fn load_labels(path: impl AsRef<Path>, len: usize) -> Result<LabelSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut entries: Vec<(usize, Option<String>)> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (index, label) = match trimmed.split_once(',') {
            Some((i, l)) => (i.trim(), Some(l.trim().to_string())),
            None => (trimmed, None),
        };
        let b: usize = index.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: i as u64 + 1,
            column: 1,
            message: format!("not a non-negative integer: {index:?}"),
        })?;
        if b == 0 || b >= len {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i as u64 + 1,
                column: 1,
                message: format!("breakpoint {b} outside 1..{len}"),
            });
        }
        entries.push((b, label));
    }

    entries.sort_by_key(|e| e.0);
    let before = entries.len();
    entries.dedup_by_key(|e| e.0);
    if entries.len() != before {
        log::warn!(
            "{}: dropped {} duplicate breakpoint(s)",
            path.display(),
            before - entries.len()
        );
    }

    let any_label = entries.iter().any(|e| e.1.is_some());
    let mut labels = vec![String::new()];
    let mut breakpoints = Vec::with_capacity(entries.len());
    for (b, l) in entries {
        breakpoints.push(b);
        labels.push(l.unwrap_or_default());
    }
    let set = LabelSet::new(breakpoints, len)?;
    if any_label {
        set.with_segment_labels(labels)
    } else {
        Ok(set)
    }
}

pub fn write_labels(labels: &LabelSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for (i, b) in labels.breakpoints().iter().enumerate() {
        match labels.segment_labels() {
            Some(l) if !l[i + 1].is_empty() => writeln!(w, "{b},{}", l[i + 1]).map_err(io)?,
            _ => writeln!(w, "{b}").map_err(io)?,
        }
    }
    w.flush().map_err(io)
}

/// Segment lengths implied by the breakpoints, with 0 and `len` as
/// sentinels. The result has `k + 1` entries summing to `len`.
pub fn true_segment_sizes(labels: &LabelSet, len: usize) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(labels.len() + 1);
    let mut prev = 0;
    for &b in labels.breakpoints().iter().chain(std::iter::once(&len)) {
        sizes.push(b - prev);
        prev = b;
    }
    sizes
}

/// Output of any detector: the alarm set plus an optional score curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub detector_id: String,
    pub breakpoints: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<DistanceCurve>,
}

impl DetectionResult {
    pub fn new(detector_id: impl Into<String>, breakpoints: Vec<usize>, len: usize) -> Result<Self> {
        validate_breakpoints(&breakpoints, len)?;
        Ok(Self {
            detector_id: detector_id.into(),
            breakpoints,
            curve: None,
        })
    }

    pub fn with_curve(mut self, curve: DistanceCurve) -> Self {
        self.curve = Some(curve);
        self
    }

    /// Check the alarms against a series length.
    pub fn validate(&self, len: usize) -> Result<()> {
        validate_breakpoints(&self.breakpoints, len)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn columns_layout_shape() {
        let mut text = String::new();
        for t in 0..100 {
            text.push_str(&format!("{t},{},{}\n", t * 2, t * 3));
        }
        let f = write_tmp(&text);
        let s = load_csv(f.path(), CsvLayout::ChannelsAsColumns, false).unwrap();
        assert_eq!((s.channels(), s.len()), (3, 100));
        assert_eq!(s.get(2, 10), 30.0);
    }

    #[test]
    fn minimum_series() {
        let f = write_tmp("1.5\n2.5\n");
        let s = load_csv(f.path(), CsvLayout::ChannelsAsColumns, false).unwrap();
        assert_eq!((s.channels(), s.len()), (1, 2));
        let f = write_tmp("1.5\n");
        assert!(load_csv(f.path(), CsvLayout::ChannelsAsColumns, false).is_err());
    }

    #[test]
    fn rows_layout_and_header() {
        let f = write_tmp("a,b,c\n1,2,3\n4,5,6\n");
        let s = load_csv(f.path(), CsvLayout::ChannelsAsRows, true).unwrap();
        assert_eq!((s.channels(), s.len()), (2, 3));
        assert_eq!(s.channel(1), &[4.0, 5.0, 6.0]);

        let f = write_tmp("x,y\n1,2\n3,4\n");
        let s = load_csv(f.path(), CsvLayout::ChannelsAsColumns, true).unwrap();
        assert_eq!(s.channel_names().unwrap(), &["x".to_string(), "y".to_string()]);
    }

    #[test]
    fn nan_cell_is_reported() {
        let f = write_tmp("1,2\n3,NaN\n5,6\n");
        let err = load_csv(f.path(), CsvLayout::ChannelsAsColumns, false).unwrap_err();
        match err {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn garbage_and_empty() {
        let f = write_tmp("1,2\n3,x\n");
        let err = load_csv(f.path(), CsvLayout::ChannelsAsColumns, false).unwrap_err();
        assert!(err.to_string().contains("line 2, column 2"), "{err}");
        let f = write_tmp("");
        assert!(matches!(
            load_csv(f.path(), CsvLayout::ChannelsAsColumns, false),
            Err(Error::EmptyFile(_))
        ));
        let f = write_tmp("1,2\n3\n");
        assert!(matches!(
            load_csv(f.path(), CsvLayout::ChannelsAsColumns, false),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn labels_sorted_and_validated() {
        let f = write_tmp("10\n40\n");
        assert_eq!(load_labels(f.path(), 100).unwrap().breakpoints(), &[10, 40]);
        let f = write_tmp("40\n# comment\n\n10\n");
        assert_eq!(load_labels(f.path(), 100).unwrap().breakpoints(), &[10, 40]);
        let f = write_tmp("120\n");
        assert!(load_labels(f.path(), 100).is_err());
        let f = write_tmp("0\n");
        assert!(load_labels(f.path(), 100).is_err());
        let f = write_tmp("1.5\n");
        assert!(matches!(load_labels(f.path(), 100), Err(Error::Parse { .. })));
    }

    #[test]
    fn labels_dedup_and_segment_names() {
        let f = write_tmp("40,run\n10,walk\n40,run\n");
        let l = load_labels(f.path(), 100).unwrap();
        assert_eq!(l.breakpoints(), &[10, 40]);
        assert_eq!(l.segment_labels().unwrap(), &["", "walk", "run"]);
    }

    #[test]
    fn segment_sizes() {
        let l = LabelSet::new(vec![10, 40], 100).unwrap();
        assert_eq!(true_segment_sizes(&l, 100), vec![10, 30, 60]);
        let l = LabelSet::new(vec![], 100).unwrap();
        assert_eq!(true_segment_sizes(&l, 100), vec![100]);
        let l = LabelSet::new(vec![1, 2, 3], 4).unwrap();
        assert_eq!(true_segment_sizes(&l, 4), vec![1, 1, 1, 1]);
    }

    #[test]
    fn reduce_l2_norm() {
        let s = TimeSeries::from_channels(vec![vec![3.0, 0.0], vec![4.0, 1.0]]).unwrap();
        assert_eq!(s.reduce_l2(), vec![5.0, 1.0]);
    }

    #[test]
    fn detection_json_shape() {
        let d = DetectionResult::new("pelt", vec![3, 7], 10).unwrap();
        let v: serde_json::Value = serde_json::from_str(&d.to_json().unwrap()).unwrap();
        assert_eq!(v["breakpoints"], serde_json::json!([3, 7]));
        assert!(v.get("curve").is_none());
        assert!(DetectionResult::new("x", vec![7, 3], 10).is_err());
    }

    proptest::proptest! {
        #[test]
        fn csv_round_trip(
            channels in 1usize..4,
            len in 2usize..30,
            seed in proptest::prelude::any::<u64>(),
            rows in proptest::prelude::any::<bool>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<f64> = (0..channels * len)
                .map(|_| rng.random_range(-1e6..1e6) * rng.random::<f64>().powi(7))
                .collect();
            let s = TimeSeries::new(channels, len, values).unwrap();
            let layout = if rows { CsvLayout::ChannelsAsRows } else { CsvLayout::ChannelsAsColumns };
            let f = tempfile::NamedTempFile::new().unwrap();
            write_csv(&s, f.path(), layout, true).unwrap();
            let back = load_csv(f.path(), layout, true).unwrap();
            proptest::prop_assert_eq!(back.channels(), channels);
            proptest::prop_assert_eq!(back.len(), len);
            for (a, b) in s.values().iter().zip(back.values()) {
                proptest::prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn segment_sizes_sum(mut bps in proptest::collection::vec(1usize..500, 0..20)) {
            bps.sort_unstable();
            bps.dedup();
            let l = LabelSet::new(bps.clone(), 500).unwrap();
            let sizes = true_segment_sizes(&l, 500);
            proptest::prop_assert_eq!(sizes.len(), bps.len() + 1);
            proptest::prop_assert_eq!(sizes.iter().sum::<usize>(), 500);
        }
    }
}
