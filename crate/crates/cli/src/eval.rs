//! `horserace eval`: evaluation specs over a forecast store.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use horserace_core::eval::{
    appendix_tables, dm_test, fluctuation_test, heterogeneity_regression, model_confidence_set, pseudo_r2,
    to_percent, treatment_regression, Bandwidth, EvalRegressionResult, Feature, FeatureDummies, LossMatrix, McsOptions,
    RecessionCalendar, RegressionSpec, TableOptions,
};
use horserace_core::harness::{ForecastStore, LossKind};
use horserace_core::models::spec::{find_model, ModelSpec};
use horserace_core::{Error, Month, Result};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Spec {
    Tables,
    Treatment,
    Heterogeneity,
    Mcs,
    Dm,
    Fluctuation,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Loss {
    Squared,
    Absolute,
}

impl Loss {
    fn kind(self) -> LossKind {
        match self {
            Loss::Squared => LossKind::Squared,
            Loss::Absolute => LossKind::Absolute,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Loss::Squared => "r2",
            Loss::Absolute => "r1",
        }
    }
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long, value_enum)]
    spec: Spec,
    #[arg(long)]
    out: PathBuf,
    /// Models to include, separated by ';' (default: every model in the store).
    #[arg(long, value_delimiter = ';')]
    models: Vec<String>,
    /// Benchmark model for tables, dm and fluctuation.
    #[arg(long, default_value = "AR,BIC")]
    reference: String,
    /// Rolling window (months) for the fluctuation test.
    #[arg(long, default_value_t = 60)]
    window: usize,
    /// Treatment features, comma separated from NL, SH, CV, LF, X (default: all that vary).
    #[arg(long, value_delimiter = ',')]
    features: Vec<String>,
    /// CSV with a date column and one column per conditioning series.
    #[arg(long)]
    xi: Option<PathBuf>,
    /// Recession months file overriding the built-in NBER calendar.
    #[arg(long)]
    recessions: Option<PathBuf>,
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
    #[arg(long, default_value_t = 999)]
    reps: usize,
    #[arg(long, default_value_t = 12)]
    block_length: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Loss::Squared)]
    loss: Loss,
}

fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))?;
    println!("{}", path.display());
    Ok(())
}

fn unknown(name: &str, store: &ForecastStore) -> Error {
    Error::UnknownModel { name: name.to_string(), available: store.models().join("; ") }
}

/// Requested models, each checked against the store.
fn selected(args: &EvalArgs, store: &ForecastStore) -> Result<Vec<String>> {
    let present = store.models();
    if args.models.is_empty() {
        return Ok(present);
    }
    let mut out = Vec::new();
    for m in args.models.iter().map(|m| m.trim()).filter(|m| !m.is_empty()) {
        let name = present
            .iter()
            .find(|p| p.as_str() == m)
            .cloned()
            .or_else(|| find_model(m).ok().map(|s| s.name).filter(|n| present.contains(n)))
            .ok_or_else(|| unknown(m, store))?;
        if !out.contains(&name) {
            out.push(name);
        }
    }
    Ok(out)
}

fn check_reference(args: &EvalArgs, store: &ForecastStore) -> Result<String> {
    let present = store.models();
    if present.contains(&args.reference) {
        return Ok(args.reference.clone());
    }
    find_model(&args.reference)
        .ok()
        .map(|s| s.name)
        .filter(|n| present.contains(n))
        .ok_or_else(|| unknown(&args.reference, store))
}

fn filtered(store: &ForecastStore, models: &[String]) -> ForecastStore {
    let mut out = ForecastStore::new();
    for r in store.iter().filter(|r| models.contains(&r.model)) {
        out.insert(r.clone());
    }
    out
}

type Losses = BTreeMap<Month, f64>;

fn losses(store: &ForecastStore, variable: &str, h: u32, model: &str, loss: LossKind) -> Losses {
    store.series(variable, h, model).into_iter().map(|r| (r.date, loss.apply(r.e))).collect()
}

/// Pair of loss sequences on their common dates.
fn aligned(a: &Losses, b: &Losses) -> (Vec<Month>, Vec<f64>, Vec<f64>) {
    let dates: Vec<Month> = a.keys().filter(|d| b.contains_key(d)).copied().collect();
    let xa = dates.iter().map(|d| a[d]).collect();
    let xb = dates.iter().map(|d| b[d]).collect();
    (dates, xa, xb)
}

fn targets(store: &ForecastStore) -> Vec<(String, u32)> {
    let mut out: Vec<(String, u32)> = store.iter().map(|r| (r.variable.clone(), r.horizon)).collect();
    out.dedup();
    out
}

fn specs(models: &[String]) -> Result<Vec<ModelSpec>> {
    models.iter().map(|m| find_model(m)).collect()
}

fn features(args: &EvalArgs, models: &[ModelSpec]) -> Result<Vec<Feature>> {
    if !args.features.is_empty() {
        return args.features.iter().map(|f| Feature::parse(f.trim())).collect();
    }
    let mut out = Vec::new();
    for f in [Feature::Nl, Feature::Sh, Feature::Cv, Feature::Lf, Feature::X] {
        let d = FeatureDummies::new(models, &[f])?;
        let varies = (0..d.columns.len()).any(|j| {
            let mut vals = models.iter().filter_map(|m| d.row(&m.name)).map(|r| r[j]);
            let first = vals.next();
            vals.any(|v| Some(v) != first)
        });
        if varies {
            out.push(f);
        }
    }
    if out.is_empty() {
        return Err(Error::Argument("no feature varies across the selected models".into()));
    }
    Ok(out)
}

fn feature_tag(fs: &[Feature]) -> String {
    fs.iter().map(|f| format!("{f:?}").to_ascii_uppercase()).collect::<Vec<_>>().join("-")
}

fn write_regression(res: &EvalRegressionResult, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    res.write_csv(BufWriter::new(f))?;
    if res.degenerate {
        log::warn!("regression residuals vanish; standard errors are void");
    }
    if res.dropped_rows > 0 {
        log::info!("{} rows dropped (missing interaction values or singleton groups)", res.dropped_rows);
    }
    println!("{}", path.display());
    Ok(())
}

fn read_xi(path: &Path) -> Result<BTreeMap<String, BTreeMap<Month, f64>>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let names: Vec<String> = rdr.headers()?.iter().skip(1).map(|s| s.trim().to_string()).collect();
    if names.is_empty() {
        return Err(Error::Parse { row: 1, message: "conditioning file has no series columns".into() });
    }
    let mut out: BTreeMap<String, BTreeMap<Month, f64>> = names.iter().map(|n| (n.clone(), BTreeMap::new())).collect();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let date = Month::parse(rec.get(0).unwrap_or(""))
            .ok_or_else(|| Error::Parse { row, message: format!("bad date {:?}", rec.get(0).unwrap_or("")) })?;
        for (j, n) in names.iter().enumerate() {
            let cell = rec.get(j + 1).unwrap_or("").trim();
            if cell.is_empty() || cell == "NA" {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse { row, message: format!("bad value {cell:?} for {n}") })?;
            out.get_mut(n).expect("column present").insert(date, v);
        }
    }
    Ok(out)
}

fn tables(args: &EvalArgs, store: &ForecastStore) -> Result<()> {
    let reference = check_reference(args, store)?;
    let mut models = selected(args, store)?;
    if !models.contains(&reference) {
        models.push(reference.clone());
    }
    let store = filtered(store, &models);
    let opts = TableOptions {
        reference,
        mcs: McsOptions { alpha: args.alpha, reps: args.reps, block_length: args.block_length, seed: args.seed },
        recessions: match &args.recessions {
            Some(p) => RecessionCalendar::from_file(p)?,
            None => RecessionCalendar::nber(),
        },
    };
    for t in appendix_tables(&store, &opts)? {
        let path = args.out.join(format!("table_{}.csv", slug(&t.variable)));
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        t.write_csv(BufWriter::new(f))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn treatment(args: &EvalArgs, store: &ForecastStore) -> Result<()> {
    let models = selected(args, store)?;
    let specs = specs(&models)?;
    let fs = features(args, &specs)?;
    let panel = to_percent(&pseudo_r2(&filtered(store, &models), args.loss.kind())?);
    let spec = RegressionSpec { features: fs.clone(), interactions: Vec::new(), bandwidth: Bandwidth::NeweyWest };
    let res = treatment_regression(&panel, &specs, &spec)?;
    write_regression(&res, &args.out.join(format!("treatment_{}_{}.csv", args.loss.tag(), feature_tag(&fs))))
}

fn heterogeneity(args: &EvalArgs, store: &ForecastStore) -> Result<()> {
    let path = args.xi.as_ref().ok_or_else(|| Error::Argument("heterogeneity needs --xi FILE".into()))?;
    let xi = read_xi(path)?;
    let models = selected(args, store)?;
    let specs = specs(&models)?;
    let panel = to_percent(&pseudo_r2(&filtered(store, &models), args.loss.kind())?);
    let res = heterogeneity_regression(&panel, &specs, &xi, Bandwidth::NeweyWest)?;
    let stem = path.file_stem().map_or("xi".to_string(), |s| slug(&s.to_string_lossy()));
    write_regression(&res, &args.out.join(format!("heterogeneity_{}_{stem}.csv", args.loss.tag())))
}

fn mcs(args: &EvalArgs, store: &ForecastStore) -> Result<()> {
    let models = selected(args, store)?;
    let opts = McsOptions { alpha: args.alpha, reps: args.reps, block_length: args.block_length, seed: args.seed };
    let path = args.out.join(format!("mcs_{}_a{}.csv", args.loss.tag(), slug(&args.alpha.to_string())));
    let mut w = writer(&path)?;
    w.write_record(["variable", "horizon", "model", "p_value", "in_set", "elimination_rank", "n"])?;
    for (v, h) in targets(store) {
        let per: Vec<Losses> = models.iter().map(|m| losses(store, &v, h, m, args.loss.kind())).collect();
        let present: Vec<usize> = (0..models.len()).filter(|&j| !per[j].is_empty()).collect();
        if present.is_empty() {
            continue;
        }
        let dates: Vec<Month> =
            per[present[0]].keys().filter(|d| present.iter().all(|&j| per[j].contains_key(d))).copied().collect();
        let names: Vec<String> = present.iter().map(|&j| models[j].clone()).collect();
        let mat = loss_matrix(&dates, &present, &per);
        let r = model_confidence_set(&names, &mat, &opts)?;
        for n in &names {
            let rank = r.elimination_order.iter().position(|m| m == n).map_or(0, |i| i + 1);
            let p = r.p_values[n];
            w.write_record([
                v.clone(),
                h.to_string(),
                n.clone(),
                format!("{p:.6}"),
                u8::from(p >= args.alpha).to_string(),
                rank.to_string(),
                dates.len().to_string(),
            ])?;
        }
    }
    finish(w, &path)
}

fn loss_matrix(dates: &[Month], cols: &[usize], per: &[Losses]) -> LossMatrix {
    LossMatrix::from_fn(dates.len(), cols.len(), |i, j| per[cols[j]][&dates[i]])
}

fn dm(args: &EvalArgs, store: &ForecastStore) -> Result<()> {
    let reference = check_reference(args, store)?;
    let models = selected(args, store)?;
    let path = args.out.join(format!("dm_{}_vs_{}.csv", args.loss.tag(), slug(&reference)));
    let mut w = writer(&path)?;
    w.write_record(["variable", "horizon", "model", "reference", "n", "statistic", "p_value", "bandwidth"])?;
    for (v, h) in targets(store) {
        let base = losses(store, &v, h, &reference, args.loss.kind());
        for m in &models {
            let l = losses(store, &v, h, m, args.loss.kind());
            if l.is_empty() || base.is_empty() {
                continue;
            }
            let (dates, a, b) = aligned(&l, &base);
            let r = dm_test(&a, &b, h as usize)?;
            w.write_record([
                v.clone(),
                h.to_string(),
                m.clone(),
                reference.clone(),
                dates.len().to_string(),
                format!("{:.6}", r.statistic),
                format!("{:.6}", r.p_value),
                r.auxiliary.bandwidth.map_or(String::new(), |b| b.to_string()),
            ])?;
        }
    }
    finish(w, &path)
}

fn fluctuation(args: &EvalArgs, store: &ForecastStore) -> Result<()> {
    let reference = check_reference(args, store)?;
    let models = selected(args, store)?;
    let path = args.out.join(format!("fluctuation_{}_vs_{}_w{}.csv", args.loss.tag(), slug(&reference), args.window));
    let mut w = writer(&path)?;
    w.write_record(["variable", "horizon", "model", "window_end", "statistic", "critical_5", "critical_10"])?;
    for (v, h) in targets(store) {
        let base = losses(store, &v, h, &reference, args.loss.kind());
        for m in models.iter().filter(|m| **m != reference) {
            let l = losses(store, &v, h, m, args.loss.kind());
            if l.is_empty() || base.is_empty() {
                continue;
            }
            let (dates, a, b) = aligned(&l, &base);
            let path = fluctuation_test(&a, &b, args.window, h as usize)?;
            for (j, s) in path.statistics.iter().enumerate() {
                w.write_record([
                    v.clone(),
                    h.to_string(),
                    m.clone(),
                    dates[j + path.window - 1].to_string(),
                    format!("{s:.6}"),
                    format!("{:.4}", path.critical_5),
                    format!("{:.4}", path.critical_10),
                ])?;
            }
        }
    }
    finish(w, &path)
}

pub fn run(args: EvalArgs) -> Result<()> {
    if !args.store.exists() {
        return Err(Error::Argument(format!("store {} does not exist", args.store.display())));
    }
    let store = ForecastStore::load(&args.store)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    match args.spec {
        Spec::Tables => tables(&args, &store),
        Spec::Treatment => treatment(&args, &store),
        Spec::Heterogeneity => heterogeneity(&args, &store),
        Spec::Mcs => mcs(&args, &store),
        Spec::Dm => dm(&args, &store),
        Spec::Fluctuation => fluctuation(&args, &store),
    }
}
