//! Delimited text tables with a header row.

use std::fs;
use std::path::Path;

use crate::error::{Error, IngestError};
use crate::model::{Column, Table};

const DELIMITERS: [u8; 3] = *b",\t;";

/// Picks the delimiter that occurs most often in the first line; comma wins ties.
pub fn detect_delimiter(text: &str) -> u8 {
    let first = text.lines().next().unwrap_or("");
    let mut best = b',';
    let mut best_count = 0usize;
    for d in DELIMITERS {
        let count = first.bytes().filter(|&b| b == d).count();
        if count > best_count {
            best = d;
            best_count = count;
        }
    }
    best
}

/// Header cells plus column-major cell text; may have zero data rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<String>>,
}

impl RawTable {
    pub fn row_count(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn into_table(self) -> Result<Table, Error> {
        let columns = self
            .headers
            .into_iter()
            .zip(self.columns)
            .map(|(h, values)| {
                let header = (!h.trim().is_empty()).then_some(h);
                Column::new(header, values)
            })
            .collect();
        Ok(Table::new(columns)?)
    }
}

pub fn parse_delimited(text: &str, origin: &Path) -> Result<RawTable, IngestError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let malformed = |reason: String| IngestError::MalformedFile {
        path: origin.to_path_buf(),
        reason,
    };
    if text.trim().is_empty() {
        return Err(malformed("no header row".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(text))
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| malformed(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut columns: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for record in reader.records() {
        let record = record.map_err(|e| malformed(e.to_string()))?;
        for (col, cell) in columns.iter_mut().zip(record.iter()) {
            col.push(cell.to_string());
        }
    }
    Ok(RawTable { headers, columns })
}

pub fn read_delimited(path: &Path) -> Result<RawTable, IngestError> {
    let bytes = fs::read(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let text = String::from_utf8(bytes).map_err(|e| IngestError::MalformedFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    parse_delimited(&text, path)
}

/// Reads a query table; at least one data row is required.
pub fn read_table(path: &Path) -> Result<Table, Error> {
    read_delimited(path)?.into_table()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ModelError;

    #[test]
    fn delimiter_majority() {
        assert_eq!(detect_delimiter("a,b,c\n1,2,3"), b',');
        assert_eq!(detect_delimiter("a\tb\tc,d"), b'\t');
        assert_eq!(detect_delimiter("a;b;c"), b';');
        assert_eq!(detect_delimiter("single"), b',');
    }

    #[test]
    fn parses_column_major() {
        let raw = parse_delimited("city;pop\nParis;2,100,000\nRome;2,800,000\n", Path::new("t")).unwrap();
        assert_eq!(raw.headers, vec!["city", "pop"]);
        assert_eq!(raw.columns[1], vec!["2,100,000", "2,800,000"]);
    }

    #[test]
    fn ragged_rows_are_malformed() {
        let err = parse_delimited("a,b\n1,2\n3\n", Path::new("t")).unwrap_err();
        assert!(matches!(err, IngestError::MalformedFile { .. }));
    }

    #[test]
    fn header_only_is_not_a_query_table() {
        let raw = parse_delimited("a,b\n", Path::new("t")).unwrap();
        assert_eq!(raw.row_count(), 0);
        assert!(matches!(
            raw.into_table(),
            Err(Error::Model(ModelError::EmptyTable))
        ));
    }

    #[test]
    fn empty_headers_become_none() {
        let t = parse_delimited("a,\nx,y\n", Path::new("t"))
            .unwrap()
            .into_table()
            .unwrap();
        assert_eq!(t.columns()[0].header.as_deref(), Some("a"));
        assert_eq!(t.columns()[1].header, None);
    }
}
