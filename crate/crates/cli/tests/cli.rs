use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use horserace_core::harness::{synthetic_panel, ForecastRecord, ForecastStore};
use horserace_core::Month;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

fn horserace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_horserace")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn month(y: i32, m: u32) -> Month {
    Month::new(y, m).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TOY: &str = "\
sasdate,A,B,C
Transform:,1,2,5
";

fn toy_csv(code_b: &str) -> String {
    let mut text = TOY.replace(",1,2,5", &format!(",1,{code_b},5"));
    for i in 0..36 {
        let d = month(2000, 1).add(i);
        text.push_str(&format!("{}/1/{},{},{},{}\n", d.month(), d.year(), i, 2 * i + 1, 100.0 + i as f64));
    }
    text
}

#[test]
fn ingest_toy_panel() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    std::fs::write(&data, toy_csv("2")).unwrap();
    let out = dir.path().join("panel.csv");
    let o = horserace(&["ingest", "--data", s(&data), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "3 series, 2000-01..2002-12");
    // the cache reads back to the same summary
    let again = dir.path().join("again.csv");
    let o = horserace(&["ingest", "--data", s(&out), "--out", s(&again)]);
    assert_eq!(stdout(&o).trim(), "3 series, 2000-01..2002-12");
}

#[test]
fn bad_tcode_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    std::fs::write(&data, toy_csv("9")).unwrap();
    let o = horserace(&["ingest", "--data", s(&data), "--out", s(&dir.path().join("p.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains('B'), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

fn write_config(dir: &Path, models: &[&str]) -> PathBuf {
    let data = dir.join("panel.csv");
    if !data.exists() {
        synthetic_panel(10, 300, month(1960, 1), 5).write_csv(&data).unwrap();
    }
    let list: Vec<String> = models.iter().map(|m| format!("{m:?}")).collect();
    let text = format!(
        r#"
data = {data:?}
variables = ["INDPRO"]
horizons = [1]
models = [{}]
sample_start = "1960-01"
sample_end = "1984-12"
oos_start = "1980-01"
oos_end = "1980-12"

[grid]
p_y = [1, 3]
p_f = [1]
k = [3]

[settings]
n_trees = 20
cv_trees = 10
"#,
        list.join(", ")
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn run_minimal_config_then_resume() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &["AR,BIC"]);
    let store = dir.path().join("store.bin");
    let o = horserace(&["run", "--config", s(&cfg), "--store", s(&store), "--jobs", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(ForecastStore::load(&store).unwrap().len(), 12);
    assert!(dir.path().join("store.bin.manifest.json").exists());
    let before = std::fs::read(&store).unwrap();

    let o = horserace(&["run", "--config", s(&cfg), "--store", s(&store)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("0 new records, 12 skipped"), "{}", stdout(&o));
    assert_eq!(std::fs::read(&store).unwrap(), before);
}

#[test]
fn schema_errors_listed_together() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "variables = []\nhorizons = [2]\nmodels = [\"NOPE\"]\noos_start = \"1980-01\"\noos_end = \"1980-12\"\n").unwrap();
    let o = horserace(&["run", "--config", s(&cfg), "--store", s(&dir.path().join("s.bin"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for needle in ["no variables", "horizon 2", "NOPE"] {
        assert!(err.contains(needle), "{err}");
    }
}

#[test]
fn store_bytes_do_not_depend_on_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &["AR,BIC", "RFARDI,K-fold"]);
    let (a, b) = (dir.path().join("a.bin"), dir.path().join("b.bin"));
    for (store, jobs) in [(&a, "1"), (&b, "4")] {
        let o = horserace(&["run", "--config", s(&cfg), "--store", s(store), "--jobs", jobs]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

/// Two models on 120 dates; the second has squared errors lower by 5% of the
/// benchmark loss on average.
fn planted_store(path: &Path) -> ForecastStore {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let n01 = Normal::new(0.0, 1.0).unwrap();
    let jitter = Uniform::new(-0.5, 0.5);
    let dates: Vec<Month> = (0..120).map(|i| month(1990, 1).add(i)).collect();
    let ys: Vec<f64> = dates.iter().map(|_| n01.sample(&mut rng)).collect();
    let ybar = ys.iter().sum::<f64>() / ys.len() as f64;
    let den = ys.iter().map(|y| (y - ybar).powi(2)).sum::<f64>() / ys.len() as f64;
    let mut store = ForecastStore::new();
    for (d, y) in dates.iter().zip(&ys) {
        let e_nl: f64 = 0.5 * n01.sample(&mut rng);
        let e_lin = (e_nl * e_nl + 0.05 * den * (1.0 + jitter.sample(&mut rng))).sqrt();
        store.insert(ForecastRecord::new(*d, 1, "INDPRO", "ARDI,K-fold", y - e_lin, *y, *d));
        store.insert(ForecastRecord::new(*d, 1, "INDPRO", "KRR-ARDI,K-fold", y - e_nl, *y, *d));
    }
    store.save(path).unwrap();
    store
}

fn read_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn treatment_recovers_planted_gap() {
    let dir = tempfile::tempdir().unwrap();
    let store_path = dir.path().join("planted.bin");
    let store = planted_store(&store_path);
    let out = dir.path().join("out");
    let o = horserace(&["eval", "--store", s(&store_path), "--spec", "treatment", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let file = out.join("treatment_r2_NL.csv");
    assert_eq!(stdout(&o).trim(), file.display().to_string());
    let rows = read_rows(&file);
    assert_eq!(&rows[0][0], "NL");
    let b: f64 = rows[0][1].parse().unwrap();
    let se: f64 = rows[0][2].parse().unwrap();

    // with two models and date effects, the coefficient is the mean R² gap
    let ys: Vec<f64> = store.series("INDPRO", 1, "ARDI,K-fold").iter().map(|r| r.y).collect();
    let ybar = ys.iter().sum::<f64>() / ys.len() as f64;
    let den = ys.iter().map(|y| (y - ybar).powi(2)).sum::<f64>() / ys.len() as f64;
    let lin = store.series("INDPRO", 1, "ARDI,K-fold");
    let nl = store.series("INDPRO", 1, "KRR-ARDI,K-fold");
    let gap = lin.iter().zip(&nl).map(|(a, b)| 100.0 * (a.e * a.e - b.e * b.e) / den).sum::<f64>() / ys.len() as f64;
    assert!((b - gap).abs() < 1e-5, "{b} vs {gap}");
    assert!((b - 5.0).abs() < 2.0 * se, "{b} ± {se}");
}

#[test]
fn dm_of_model_against_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let store_path = dir.path().join("planted.bin");
    planted_store(&store_path);
    let out = dir.path().join("out");
    let o = horserace(&[
        "eval", "--store", s(&store_path), "--spec", "dm", "--out", s(&out),
        "--reference", "ARDI,K-fold", "--models", "ARDI,K-fold",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_rows(&out.join("dm_r2_vs_ARDI_K_fold.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][5].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[0][6].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn unknown_model_lists_available() {
    let dir = tempfile::tempdir().unwrap();
    let store_path = dir.path().join("planted.bin");
    planted_store(&store_path);
    let o = horserace(&[
        "eval", "--store", s(&store_path), "--spec", "mcs", "--out", s(&dir.path().join("out")),
        "--models", "AR,BIC",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("AR,BIC") && err.contains("KRR-ARDI,K-fold"), "{err}");
}

#[test]
fn mcs_and_fluctuation_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let store_path = dir.path().join("planted.bin");
    planted_store(&store_path);
    let out = dir.path().join("out");
    let o = horserace(&["eval", "--store", s(&store_path), "--spec", "mcs", "--out", s(&out), "--reps", "199"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_rows(&out.join("mcs_r2_a0_25.csv"));
    let kept: Vec<&str> = rows.iter().filter(|r| &r[4] == "1").map(|r| &r[2]).collect();
    assert_eq!(kept, vec!["KRR-ARDI,K-fold"]);

    let o = horserace(&[
        "eval", "--store", s(&store_path), "--spec", "fluctuation", "--out", s(&out),
        "--reference", "ARDI,K-fold", "--window", "48",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_rows(&out.join("fluctuation_r2_vs_ARDI_K_fold_w48.csv"));
    assert_eq!(rows.len(), 120 - 48 + 1);
    assert_eq!(&rows[0][3], "1993-12");
}

#[test]
fn tables_one_file_per_variable() {
    let dir = tempfile::tempdir().unwrap();
    let store_path = dir.path().join("planted.bin");
    planted_store(&store_path);
    let out = dir.path().join("out");
    let o = horserace(&[
        "eval", "--store", s(&store_path), "--spec", "tables", "--out", s(&out),
        "--reference", "ARDI,K-fold", "--reps", "99",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("table_INDPRO.csv")).unwrap();
    assert!(text.starts_with("model,full_h1,"), "{text}");
    // header, reference RMSPE, one row per model
    assert_eq!(text.lines().count(), 4);
}
