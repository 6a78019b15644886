//! Ideal (reference) time series read from one-column text files.
//!
//! One decimal number per line; blank lines and lines starting with `#` are
//! skipped.

use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("{label}: no values")]
    EmptySeries { label: String },
    #[error("{label}: line {line}: not a number: {token:?}")]
    NonNumericToken {
        label: String,
        line: usize,
        token: String,
    },
    #[error("{label}: line {line}: non-finite value")]
    NonFiniteValue { label: String, line: usize },
    #[error("{label}: only {len} value(s), need at least 2")]
    TooShort { label: String, len: usize },
    #[error("{label}: every value is equal, correlation would be undefined")]
    ConstantSeries { label: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

/// A user-supplied reference signal.
#[derive(Debug, Clone, PartialEq)]
pub struct IdealSeries {
    label: String,
    values: Vec<f64>,
}

impl IdealSeries {
    /// Validate an in-memory series against the same rules as [`parse_1d`].
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self, SeriesError> {
        let label = label.into();
        if values.is_empty() {
            return Err(SeriesError::EmptySeries { label });
        }
        if let Some(n) = values.iter().position(|v| !v.is_finite()) {
            return Err(SeriesError::NonFiniteValue { label, line: n + 1 });
        }
        if values.len() < 2 {
            return Err(SeriesError::TooShort {
                label,
                len: values.len(),
            });
        }
        if values.iter().all(|&v| v == values[0]) {
            return Err(SeriesError::ConstantSeries { label });
        }
        Ok(Self { label, values })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One value per line, shortest round-tripping decimal form.
    pub fn render(&self) -> String {
        self.values.iter().map(|v| format!("{v:?}\n")).collect()
    }
}

pub fn parse_1d(text: &str, label: &str) -> Result<IdealSeries, SeriesError> {
    let mut values = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let value: f64 = line.parse().map_err(|_| SeriesError::NonNumericToken {
            label: label.to_string(),
            line: n + 1,
            token: line.to_string(),
        })?;
        if !value.is_finite() {
            return Err(SeriesError::NonFiniteValue {
                label: label.to_string(),
                line: n + 1,
            });
        }
        values.push(value);
    }
    IdealSeries::new(label, values)
}

/// Read an ideal file; its label is the file stem.
pub fn read_1d(path: impl AsRef<Path>) -> Result<IdealSeries, SeriesError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| SeriesError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    parse_1d(&text, &label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn square_wave() {
        let s = parse_1d("0\n0\n1\n1\n", "block").unwrap();
        assert_eq!(s.values(), &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(s.label(), "block");
    }

    #[test]
    fn comments_and_blanks_skipped() {
        let s = parse_1d("# stimulus\n\n  1.5 \n#x\n-2\n", "s").unwrap();
        assert_eq!(s.values(), &[1.5, -2.0]);
    }

    #[test]
    fn bad_token_reports_line() {
        assert_eq!(
            parse_1d("1\nx\n2\n", "s"),
            Err(SeriesError::NonNumericToken {
                label: "s".into(),
                line: 2,
                token: "x".into()
            })
        );
        assert!(matches!(
            parse_1d("1 2\n3\n", "s"),
            Err(SeriesError::NonNumericToken { line: 1, .. })
        ));
    }

    #[test]
    fn rejects_degenerate_series() {
        assert!(matches!(
            parse_1d("5\n5\n5\n", "s"),
            Err(SeriesError::ConstantSeries { .. })
        ));
        assert!(matches!(
            parse_1d("# nothing\n\n", "s"),
            Err(SeriesError::EmptySeries { .. })
        ));
        assert!(matches!(
            parse_1d("3\n", "s"),
            Err(SeriesError::TooShort { len: 1, .. })
        ));
        assert!(matches!(
            parse_1d("1\ninf\n", "s"),
            Err(SeriesError::NonFiniteValue { line: 2, .. })
        ));
        assert!(matches!(
            parse_1d("1\nNaN\n", "s"),
            Err(SeriesError::NonFiniteValue { line: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn render_round_trips(values in prop::collection::vec(-1e6f64..1e6, 2..60)) {
            prop_assume!(values.iter().any(|&v| v != values[0]));
            let s = IdealSeries::new("p", values).unwrap();
            let text = s.render();
            prop_assert_eq!(text.lines().count(), s.len());
            prop_assert_eq!(parse_1d(&text, "p").unwrap(), s);
        }
    }
}
