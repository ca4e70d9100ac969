//! Forecast records, the keyed store, and its binary/CSV persistence.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::date::Month;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"HRFS";
pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: [&str; 8] = ["date", "horizon", "variable", "model", "yhat", "y", "e", "tune_vintage"];

/// One forecast: target date `date`, made `horizon` months earlier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub date: Month,
    pub horizon: u32,
    pub variable: String,
    pub model: String,
    pub yhat: f64,
    pub y: f64,
    pub e: f64,
    pub tune_vintage: Month,
}

impl ForecastRecord {
    pub fn new(date: Month, horizon: u32, variable: &str, model: &str, yhat: f64, y: f64, tune_vintage: Month) -> Self {
        ForecastRecord {
            date,
            horizon,
            variable: variable.to_string(),
            model: model.to_string(),
            yhat,
            y,
            e: y - yhat,
            tune_vintage,
        }
    }

    pub fn key(&self) -> RecordKey {
        RecordKey { variable: self.variable.clone(), horizon: self.horizon, model: self.model.clone(), date: self.date }
    }
}

/// Store ordering: variable, horizon, model, target date.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordKey {
    pub variable: String,
    pub horizon: u32,
    pub model: String,
    pub date: Month,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForecastStore {
    records: BTreeMap<RecordKey, ForecastRecord>,
}

impl ForecastStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Insert, returning `true` when an existing record was replaced.
    pub fn insert(&mut self, r: ForecastRecord) -> bool {
        self.records.insert(r.key(), r).is_some()
    }

    /// Last-write-wins union; returns the number of overwritten keys.
    pub fn merge(&mut self, other: ForecastStore) -> usize {
        let n = other.records.into_values().map(|r| self.insert(r) as usize).sum();
        if n > 0 {
            log::info!("merge overwrote {n} existing records");
        }
        n
    }

    pub fn get(&self, key: &RecordKey) -> Option<&ForecastRecord> {
        self.records.get(key)
    }

    pub fn contains(&self, key: &RecordKey) -> bool {
        self.records.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ForecastRecord> {
        self.records.values()
    }

    pub fn models(&self) -> Vec<String> {
        let mut m: Vec<String> = self.records.keys().map(|k| k.model.clone()).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn variables(&self) -> Vec<String> {
        let mut v: Vec<String> = self.records.keys().map(|k| k.variable.clone()).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn horizons(&self) -> Vec<u32> {
        let mut h: Vec<u32> = self.records.keys().map(|k| k.horizon).collect();
        h.sort_unstable();
        h.dedup();
        h
    }

    /// Records of one (variable, horizon, model), in date order.
    pub fn series(&self, variable: &str, horizon: u32, model: &str) -> Vec<&ForecastRecord> {
        self.records
            .values()
            .filter(|r| r.variable == variable && r.horizon == horizon && r.model == model)
            .collect()
    }

    /// Columnar binary encoding (little endian).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut strings: Vec<&str> = Vec::new();
        let mut index: BTreeMap<&str, u32> = BTreeMap::new();
        for r in self.records.values() {
            for s in [r.variable.as_str(), r.model.as_str()] {
                if !index.contains_key(s) {
                    index.insert(s, strings.len() as u32);
                    strings.push(s);
                }
            }
        }
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&SCHEMA_VERSION.to_le_bytes());
        out.extend_from_slice(&(strings.len() as u32).to_le_bytes());
        for s in &strings {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        let rs: Vec<&ForecastRecord> = self.records.values().collect();
        for r in &rs {
            out.extend_from_slice(&month_code(r.date).to_le_bytes());
        }
        for r in &rs {
            out.extend_from_slice(&r.horizon.to_le_bytes());
        }
        for r in &rs {
            out.extend_from_slice(&index[r.variable.as_str()].to_le_bytes());
        }
        for r in &rs {
            out.extend_from_slice(&index[r.model.as_str()].to_le_bytes());
        }
        for f in [|r: &ForecastRecord| r.yhat, |r: &ForecastRecord| r.y, |r: &ForecastRecord| r.e] {
            for r in &rs {
                out.extend_from_slice(&f(r).to_le_bytes());
            }
        }
        for r in &rs {
            out.extend_from_slice(&month_code(r.tune_vintage).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor { b: bytes, at: 0 };
        if c.take(4)? != MAGIC {
            return Err(Error::Schema("not a forecast store file".into()));
        }
        let version = c.u32()?;
        if version != SCHEMA_VERSION {
            return Err(Error::Schema(format!("store schema version {version}, expected {SCHEMA_VERSION}")));
        }
        let n_str = c.u32()? as usize;
        let mut strings = Vec::with_capacity(n_str);
        for _ in 0..n_str {
            let len = c.u32()? as usize;
            let s = std::str::from_utf8(c.take(len)?).map_err(|e| Error::Schema(e.to_string()))?;
            strings.push(s.to_string());
        }
        let n = c.u64()? as usize;
        let dates: Vec<i32> = (0..n).map(|_| c.i32()).collect::<Result<_>>()?;
        let hs: Vec<u32> = (0..n).map(|_| c.u32()).collect::<Result<_>>()?;
        let vs: Vec<u32> = (0..n).map(|_| c.u32()).collect::<Result<_>>()?;
        let ms: Vec<u32> = (0..n).map(|_| c.u32()).collect::<Result<_>>()?;
        let yhat: Vec<f64> = (0..n).map(|_| c.f64()).collect::<Result<_>>()?;
        let y: Vec<f64> = (0..n).map(|_| c.f64()).collect::<Result<_>>()?;
        let e: Vec<f64> = (0..n).map(|_| c.f64()).collect::<Result<_>>()?;
        let tv: Vec<i32> = (0..n).map(|_| c.i32()).collect::<Result<_>>()?;
        if c.at != bytes.len() {
            return Err(Error::Schema("trailing bytes in store file".into()));
        }
        let name = |i: u32| -> Result<String> {
            strings.get(i as usize).cloned().ok_or_else(|| Error::Schema(format!("string index {i} out of range")))
        };
        let mut store = ForecastStore::new();
        for i in 0..n {
            store.insert(ForecastRecord {
                date: month_from_code(dates[i]),
                horizon: hs[i],
                variable: name(vs[i])?,
                model: name(ms[i])?,
                yhat: yhat[i],
                y: y[i],
                e: e[i],
                tune_vintage: month_from_code(tv[i]),
            });
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }

    /// Load if the file exists, otherwise start empty.
    pub fn load_or_new(path: impl AsRef<Path>) -> Result<Self> {
        if path.as_ref().exists() {
            Self::load(path)
        } else {
            Ok(Self::new())
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(CSV_HEADER)?;
        for r in self.records.values() {
            w.write_record([
                r.date.to_string(),
                r.horizon.to_string(),
                r.variable.clone(),
                r.model.clone(),
                format!("{:?}", r.yhat),
                format!("{:?}", r.y),
                format!("{:?}", r.e),
                r.tune_vintage.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        if header != CSV_HEADER {
            return Err(Error::Schema(format!("unexpected CSV header {header:?}")));
        }
        let mut store = ForecastStore::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::Parse { row: i + 2, message: format!("bad {what}") };
            let num = |k: usize, what: &str| rec[k].parse::<f64>().map_err(|_| bad(what));
            store.insert(ForecastRecord {
                date: rec[0].parse().map_err(|_| bad("date"))?,
                horizon: rec[1].parse().map_err(|_| bad("horizon"))?,
                variable: rec[2].to_string(),
                model: rec[3].to_string(),
                yhat: num(4, "yhat")?,
                y: num(5, "y")?,
                e: num(6, "e")?,
                tune_vintage: rec[7].parse().map_err(|_| bad("tune_vintage"))?,
            });
        }
        Ok(store)
    }
}

fn month_code(m: Month) -> i32 {
    m.year() * 12 + m.month() as i32 - 1
}

fn month_from_code(c: i32) -> Month {
    Month::new(c.div_euclid(12), (c.rem_euclid(12) + 1) as u32).expect("month in range")
}

struct Cursor<'a> {
    b: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.b.len());
        let end = end.ok_or_else(|| Error::Schema("truncated store file".into()))?;
        let s = &self.b[self.at..end];
        self.at = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    Squared,
    Absolute,
}

impl LossKind {
    pub fn apply(self, e: f64) -> f64 {
        match self {
            LossKind::Squared => e * e,
            LossKind::Absolute => e.abs(),
        }
    }
}

/// A loss lookup that never turns an absent record into a zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossEntry {
    Value(f64),
    Missing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorPanel {
    pub loss: LossKind,
    values: BTreeMap<RecordKey, f64>,
}

impl ErrorPanel {
    pub fn get(&self, key: &RecordKey) -> LossEntry {
        self.values.get(key).map_or(LossEntry::Missing, |&v| LossEntry::Value(v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RecordKey, f64)> {
        self.values.iter().map(|(k, v)| (k, *v))
    }
}

pub fn compute_error_panel(store: &ForecastStore, loss: LossKind) -> ErrorPanel {
    ErrorPanel { loss, values: store.records.iter().map(|(k, r)| (k.clone(), loss.apply(r.e))).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_store(n: usize, seed: u64) -> ForecastStore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ForecastStore::new();
        let base = Month::new(1980, 1).unwrap();
        while s.len() < n {
            let d = base.add(rng.gen_range(0..456));
            let yhat = rng.gen_range(-1.0..1.0);
            let y = rng.gen_range(-1.0..1.0);
            s.insert(ForecastRecord::new(
                d,
                [1, 3, 12][rng.gen_range(0..3)],
                ["INDPRO", "UNRATE"][rng.gen_range(0..2)],
                ["AR,BIC", "KRR-ARDI,K-fold", "RFARDI,K-fold"][rng.gen_range(0..3)],
                yhat,
                y,
                d.add(-rng.gen_range(0..24)),
            ));
        }
        s
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let s = random_store(1000, 1);
        assert_eq!(ForecastStore::from_bytes(&s.to_bytes()).unwrap(), s);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"date,horizon,variable,model,yhat,y,e,tune_vintage\n"));
        assert_eq!(ForecastStore::read_csv(&buf[..]).unwrap(), s);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("store.bin");
        s.save(&p).unwrap();
        assert_eq!(ForecastStore::load(&p).unwrap(), s);
    }

    #[test]
    fn schema_mismatch_refused() {
        let mut b = random_store(5, 2).to_bytes();
        b[4] = 9;
        assert!(matches!(ForecastStore::from_bytes(&b), Err(Error::Schema(_))));
        assert!(ForecastStore::from_bytes(b"nope").is_err());
    }

    #[test]
    fn merge_is_union_with_overwrite_count() {
        let a = random_store(50, 3);
        let mut b = ForecastStore::new();
        let d = Month::new(2030, 1).unwrap();
        b.insert(ForecastRecord::new(d, 1, "X", "AR,BIC", 0.0, 1.0, d));
        let mut u = a.clone();
        assert_eq!(u.merge(b.clone()), 0);
        assert_eq!(u.len(), 51);
        let mut changed = a.iter().next().unwrap().clone();
        changed.yhat += 1.0;
        let mut c = ForecastStore::new();
        c.insert(changed.clone());
        assert_eq!(u.merge(c), 1);
        assert_eq!(u.get(&changed.key()).unwrap(), &changed);
    }

    #[test]
    fn losses_and_missing_marker() {
        let d = Month::new(2000, 1).unwrap();
        let mut s = ForecastStore::new();
        s.insert(ForecastRecord::new(d, 1, "V", "M", 3.0, 1.0, d));
        s.insert(ForecastRecord::new(d.add(1), 1, "V", "M", 1.0, 1.0, d));
        let sq = compute_error_panel(&s, LossKind::Squared);
        let ab = compute_error_panel(&s, LossKind::Absolute);
        let k = |m: Month| RecordKey { variable: "V".into(), horizon: 1, model: "M".into(), date: m };
        assert_eq!(sq.get(&k(d)), LossEntry::Value(4.0));
        assert_eq!(ab.get(&k(d)), LossEntry::Value(2.0));
        assert_eq!(sq.get(&k(d.add(1))), LossEntry::Value(0.0));
        assert_eq!(sq.get(&k(d.add(2))), LossEntry::Missing);
    }
}
