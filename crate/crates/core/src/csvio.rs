//! CSV ingestion and egress.
//!
//! The first row is the header. Cells equal to the configured marker load as
//! [`Cell::Suppressed`], and suppressed cells are written back as the marker.
//! A dataset round-trips exactly as long as no concrete value equals the
//! marker.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Cell, Dataset};

pub const DEFAULT_MARKER: &str = "*";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub marker: String,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            marker: DEFAULT_MARKER.to_owned(),
        }
    }
}

impl CsvOptions {
    pub fn with_marker(marker: impl Into<String>) -> Self {
        Self {
            marker: marker.into(),
            ..Self::default()
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::UnequalLengths { pos, .. } => Error::RaggedRow(pos.as_ref().map_or(0, |p| p.line())),
        _ => Error::Csv(e.to_string()),
    }
}

pub fn read_table<R: Read>(input: R, options: &CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .flexible(false)
        .from_reader(input);
    let schema: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        rows.push(
            record
                .iter()
                .map(|v| {
                    if v == options.marker {
                        Cell::Suppressed
                    } else {
                        Cell::value(v)
                    }
                })
                .collect(),
        );
    }
    if schema.len() == 1 && schema[0].is_empty() && rows.is_empty() {
        return Err(Error::EmptySchema);
    }
    Dataset::new(schema, rows)
}

pub fn read_table_csv(path: &Path, options: &CsvOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    read_table(std::io::BufReader::new(file), options)
}

pub fn write_table<W: Write>(d: &Dataset, output: W, options: &CsvOptions) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(options.delimiter)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(output);
    writer.write_record(d.schema()).map_err(csv_error)?;
    for row in d.rows() {
        writer
            .write_record(row.iter().map(|c| match c {
                Cell::Value(v) => v.as_str(),
                Cell::Suppressed => options.marker.as_str(),
            }))
            .map_err(csv_error)?;
    }
    writer.flush().map_err(|e| Error::Csv(e.to_string()))
}

/// Serializes to an in-memory string.
pub fn table_to_string(d: &Dataset, options: &CsvOptions) -> Result<String> {
    let mut buf = Vec::new();
    write_table(d, &mut buf, options)?;
    String::from_utf8(buf).map_err(|e| Error::Csv(e.to_string()))
}

pub fn write_table_csv(d: &Dataset, path: &Path, options: &CsvOptions) -> Result<()> {
    let text = table_to_string(d, options)?;
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_file_is_empty_dataset() {
        let d = read_table("a,b\n".as_bytes(), &CsvOptions::default()).unwrap();
        assert_eq!(d.schema(), ["a", "b"]);
        assert_eq!(d.row_count(), 0);
        assert_eq!(table_to_string(&d, &CsvOptions::default()).unwrap(), "a,b\n");
    }

    #[test]
    fn quoted_comma_survives() {
        let text = "name,city\n\"Doe, Jane\",Kampala\n";
        let d = read_table(text.as_bytes(), &CsvOptions::default()).unwrap();
        assert_eq!(d.cell(0, "name").unwrap(), &Cell::value("Doe, Jane"));
        assert_eq!(table_to_string(&d, &CsvOptions::default()).unwrap(), text);
    }

    #[test]
    fn marker_configuration() {
        let d = Dataset::new(
            vec!["a".into(), "b".into()],
            vec![vec![Cell::value("x"), Cell::Suppressed]],
        )
        .unwrap();
        assert_eq!(table_to_string(&d, &CsvOptions::default()).unwrap(), "a,b\nx,*\n");
        assert_eq!(
            table_to_string(&d, &CsvOptions::with_marker("")).unwrap(),
            "a,b\nx,\n"
        );
        let back = read_table("a,b\nx,*\n".as_bytes(), &CsvOptions::default()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn ragged_and_duplicate() {
        assert!(matches!(
            read_table("a,b\n1,2\n3\n".as_bytes(), &CsvOptions::default()),
            Err(Error::RaggedRow(3))
        ));
        assert!(matches!(
            read_table("a,a\n1,2\n".as_bytes(), &CsvOptions::default()),
            Err(Error::DuplicateAttribute(_))
        ));
    }

    #[test]
    fn semicolon_delimiter() {
        let opts = CsvOptions {
            delimiter: b';',
            ..CsvOptions::default()
        };
        let d = read_table("a;b\n1,5;2\n".as_bytes(), &opts).unwrap();
        assert_eq!(d.cell(0, "a").unwrap(), &Cell::value("1,5"));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_table_csv(Path::new("/nonexistent/x.csv"), &CsvOptions::default()),
            Err(Error::Io { .. })
        ));
    }
}
