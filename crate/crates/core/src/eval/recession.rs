//! NBER recession months.

use std::collections::BTreeSet;
use std::path::Path;

use crate::date::Month;
use crate::error::{Error, Result};

/// Month after each peak through the trough, 1960 onwards.
const NBER_EPISODES: [((i32, u32), (i32, u32)); 9] = [
    ((1960, 5), (1961, 2)),
    ((1970, 1), (1970, 11)),
    ((1973, 12), (1975, 3)),
    ((1980, 2), (1980, 7)),
    ((1981, 8), (1982, 11)),
    ((1990, 8), (1991, 3)),
    ((2001, 4), (2001, 11)),
    ((2008, 1), (2009, 6)),
    ((2020, 3), (2020, 4)),
];

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RecessionCalendar {
    months: BTreeSet<Month>,
}

impl RecessionCalendar {
    pub fn nber() -> Self {
        let mut months = BTreeSet::new();
        for ((y0, m0), (y1, m1)) in NBER_EPISODES {
            let (a, b) = (Month::new(y0, m0).expect("valid"), Month::new(y1, m1).expect("valid"));
            months.extend((0..=b.since(a)).map(|k| a.add(k)));
        }
        RecessionCalendar { months }
    }

    /// One entry per line: `YYYY-MM` or `YYYY-MM,YYYY-MM` (inclusive range).
    /// Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut months = BTreeSet::new();
        for (row, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |m: String| Error::Parse { row: row + 1, message: m };
            let mut parts = line.split(',').map(str::trim);
            let a = Month::parse(parts.next().unwrap_or("")).ok_or_else(|| bad(format!("bad month in {line:?}")))?;
            let b = match parts.next() {
                Some(s) => Month::parse(s).ok_or_else(|| bad(format!("bad month in {line:?}")))?,
                None => a,
            };
            if b < a || parts.next().is_some() {
                return Err(bad(format!("malformed recession entry {line:?}")));
            }
            months.extend((0..=b.since(a)).map(|k| a.add(k)));
        }
        Ok(RecessionCalendar { months })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn contains(&self, m: Month) -> bool {
        self.months.contains(&m)
    }

    pub fn len(&self) -> usize {
        self.months.len()
    }

    pub fn is_empty(&self) -> bool {
        self.months.is_empty()
    }
}
