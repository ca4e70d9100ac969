//! FRED-MD style panel ingestion.
//!
//! Layout: first row holds headers (first cell names the date column), second
//! row holds the transformation codes (first cell is a free label such as
//! `Transform:`), remaining rows hold one month each. Missing cells are empty
//! or one of `NA`, `NaN`, `.`.

use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;

use crate::date::Month;
use crate::error::{Error, Result};

/// Minimum number of observed values per series.
pub const MIN_OBSERVATIONS: usize = 24;

/// A dated monthly matrix of raw series with per-series transformation codes.
/// Missing entries are stored as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPanel {
    pub dates: Vec<Month>,
    pub names: Vec<String>,
    pub tcodes: Vec<u8>,
    pub values: DMatrix<f64>,
}

impl RawPanel {
    pub fn n_series(&self) -> usize {
        self.names.len()
    }

    pub fn n_periods(&self) -> usize {
        self.dates.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn series(&self, name: &str) -> Option<Vec<f64>> {
        self.column_index(name)
            .map(|j| self.values.column(j).iter().copied().collect())
    }

    /// Row index of `date`, if inside the sample.
    pub fn row_of(&self, date: Month) -> Option<usize> {
        let first = *self.dates.first()?;
        let i = date.since(first);
        (i >= 0 && (i as usize) < self.dates.len()).then_some(i as usize)
    }

    /// Restrict the panel to `[start, end]`.
    pub fn slice(&self, start: Month, end: Month) -> Result<RawPanel> {
        let a = self
            .row_of(start)
            .ok_or_else(|| Error::Argument(format!("start {start} outside panel")))?;
        let b = self
            .row_of(end)
            .ok_or_else(|| Error::Argument(format!("end {end} outside panel")))?;
        if b < a {
            return Err(Error::Argument(format!("empty slice {start}..{end}")));
        }
        Ok(RawPanel {
            dates: self.dates[a..=b].to_vec(),
            names: self.names.clone(),
            tcodes: self.tcodes.clone(),
            values: self.values.rows(a, b - a + 1).into_owned(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.tcodes.len() != self.names.len() || self.values.ncols() != self.names.len() {
            return Err(Error::Validation {
                series: "<panel>".into(),
                message: format!(
                    "{} names, {} codes, {} columns",
                    self.names.len(),
                    self.tcodes.len(),
                    self.values.ncols()
                ),
            });
        }
        for w in self.dates.windows(2) {
            if w[1].since(w[0]) != 1 {
                return Err(Error::Validation {
                    series: "<dates>".into(),
                    message: format!("dates not consecutive months: {} then {}", w[0], w[1]),
                });
            }
        }
        for (j, name) in self.names.iter().enumerate() {
            if !(1..=7).contains(&self.tcodes[j]) {
                return Err(Error::Validation {
                    series: name.clone(),
                    message: format!("transformation code {} outside 1..7", self.tcodes[j]),
                });
            }
            let observed = self.values.column(j).iter().filter(|v| v.is_finite()).count();
            if observed < MIN_OBSERVATIONS {
                return Err(Error::Validation {
                    series: name.clone(),
                    message: format!("only {observed} observations, need {MIN_OBSERVATIONS}"),
                });
            }
        }
        Ok(())
    }

    /// Write in the same layout `ingest` reads, with ISO dates.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["date".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        let mut codes = vec!["Transform:".to_string()];
        codes.extend(self.tcodes.iter().map(|c| c.to_string()));
        w.write_record(&codes)?;
        for (i, d) in self.dates.iter().enumerate() {
            let mut rec = vec![format!("{d}-01")];
            rec.extend(self.values.row(i).iter().map(|v| {
                if v.is_finite() {
                    format!("{v:?}")
                } else {
                    String::new()
                }
            }));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Read a panel from a CSV file.
pub fn ingest_fredmd(csv_path: impl AsRef<Path>) -> Result<RawPanel> {
    let path = csv_path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file)
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "NaN" | "nan" | ".")
}

/// Read a panel from any reader holding the CSV layout.
pub fn ingest_reader<R: Read>(reader: R) -> Result<RawPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = records
        .next()
        .ok_or(Error::Parse { row: 1, message: "empty file".into() })??;
    let names: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    if names.is_empty() {
        return Err(Error::Parse { row: 1, message: "no series columns".into() });
    }

    let code_row = records
        .next()
        .ok_or(Error::Parse { row: 2, message: "missing transformation-code row".into() })??;
    let mut tcodes = Vec::with_capacity(names.len());
    for (j, name) in names.iter().enumerate() {
        let cell = code_row.get(j + 1).unwrap_or("").trim();
        let code: f64 = cell.parse().map_err(|_| Error::Validation {
            series: name.clone(),
            message: format!("unparseable transformation code '{cell}'"),
        })?;
        if code.fract() != 0.0 || !(1.0..=7.0).contains(&code) {
            return Err(Error::Validation {
                series: name.clone(),
                message: format!("transformation code {cell} outside 1..7"),
            });
        }
        tcodes.push(code as u8);
    }

    let mut dates = Vec::new();
    let mut data: Vec<f64> = Vec::new();
    for (k, rec) in records.enumerate() {
        let row = k + 3;
        let rec = rec?;
        if rec.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let cell = rec.get(0).unwrap_or("").trim();
        let date = Month::parse(cell).ok_or_else(|| Error::Parse {
            row,
            message: format!("malformed date '{cell}'"),
        })?;
        dates.push(date);
        for j in 0..names.len() {
            let c = rec.get(j + 1).unwrap_or("").trim();
            let v = if is_missing(c) {
                f64::NAN
            } else {
                c.parse::<f64>().map_err(|_| Error::Parse {
                    row,
                    message: format!("bad number '{c}' in column {}", names[j]),
                })?
            };
            data.push(v);
        }
    }
    if dates.is_empty() {
        return Err(Error::Parse { row: 3, message: "no data rows".into() });
    }
    for (i, w) in dates.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(Error::Parse {
                row: i + 4,
                message: format!("date {} not after {}", w[1], w[0]),
            });
        }
    }
    let values = DMatrix::from_row_slice(dates.len(), names.len(), &data);
    let panel = RawPanel { dates, names, tcodes, values };
    panel.validate()?;
    Ok(panel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(codes: &str) -> String {
        let mut s = format!("sasdate,A,B,C\nTransform:,{codes}\n");
        for i in 0..30 {
            let m = i % 12 + 1;
            let y = 1960 + i / 12;
            s.push_str(&format!("{m}/1/{y},{},{},{}\n", 1.0 + i as f64, 2.0 + i as f64, i));
        }
        s
    }

    #[test]
    fn toy_panel_echoes_codes() {
        let p = ingest_reader(toy("1,5,2").as_bytes()).unwrap();
        assert_eq!(p.n_series(), 3);
        assert_eq!(p.tcodes, vec![1, 5, 2]);
        assert_eq!(p.dates[0].to_string(), "1960-01");
        assert_eq!(p.n_periods(), 30);
    }

    #[test]
    fn out_of_range_code_names_series() {
        match ingest_reader(toy("1,9,2").as_bytes()) {
            Err(Error::Validation { series, .. }) => assert_eq!(series, "B"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_date_names_row() {
        let s = toy("1,5,2").replace("3/1/1960", "March 1960");
        match ingest_reader(s.as_bytes()) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn leading_missing_values_are_masked() {
        let s = toy("1,5,2").replacen("1/1/1960,1,2,0", "1/1/1960,,2,0", 1);
        let p = ingest_reader(s.as_bytes()).unwrap();
        assert!(p.values[(0, 0)].is_nan());
        assert_eq!(p.values[(1, 0)], 2.0);
    }

    #[test]
    fn gap_in_dates_rejected() {
        let s = toy("1,5,2").replace("2/1/1960,2,3,1\n", "");
        assert!(ingest_reader(s.as_bytes()).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let p = ingest_reader(toy("1,5,2").as_bytes()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        p.write_csv(&path).unwrap();
        assert_eq!(ingest_fredmd(&path).unwrap(), p);
    }
}
