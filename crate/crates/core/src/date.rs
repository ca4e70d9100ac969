//! Monthly calendar arithmetic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A calendar month, stored as months since year 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month(i32);

impl Month {
    pub fn new(year: i32, month: u32) -> Option<Self> {
        if (1..=12).contains(&month) {
            Some(Month(year * 12 + month as i32 - 1))
        } else {
            None
        }
    }

    pub fn year(self) -> i32 {
        self.0.div_euclid(12)
    }

    /// Month of year in 1..=12.
    pub fn month(self) -> u32 {
        (self.0.rem_euclid(12) + 1) as u32
    }

    pub fn add(self, months: i32) -> Self {
        Month(self.0 + months)
    }

    /// Signed number of months from `earlier` to `self`.
    pub fn since(self, earlier: Month) -> i32 {
        self.0 - earlier.0
    }

    /// Accepts `YYYY-MM-DD`, `YYYY-MM`, `YYYY:MM` and the `M/D/YYYY` form used by
    /// FRED-MD vintages. The day component is ignored.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some((y, m)) = s.split_once(':') {
            return Month::new(y.parse().ok()?, m.parse().ok()?);
        }
        if s.contains('/') {
            let parts: Vec<&str> = s.split('/').collect();
            if parts.len() != 3 {
                return None;
            }
            let m: u32 = parts[0].parse().ok()?;
            let d: u32 = parts[1].parse().ok()?;
            if !(1..=31).contains(&d) {
                return None;
            }
            return Month::new(parts[2].parse().ok()?, m);
        }
        let parts: Vec<&str> = s.split('-').collect();
        match parts.as_slice() {
            [y, m] => Month::new(y.parse().ok()?, m.parse().ok()?),
            [y, m, d] => {
                let d: u32 = d.parse().ok()?;
                if !(1..=31).contains(&d) {
                    return None;
                }
                Month::new(y.parse().ok()?, m.parse().ok()?)
            }
            _ => None,
        }
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year(), self.month())
    }
}

impl FromStr for Month {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Month::parse(s).ok_or_else(|| format!("unparseable month '{s}'"))
    }
}

impl Serialize for Month {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Month {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Month::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("bad month '{s}'")))
    }
}
