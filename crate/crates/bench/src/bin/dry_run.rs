//! Times a desk-scale run on a synthetic FRED-MD-shaped panel.
//!
//! Usage: dry_run [oos_months] [jobs] [models separated by ';']

use std::time::Instant;

use horserace_core::harness::{run_experiment_with_jobs, synthetic_panel, Dataset, ExperimentConfig, ForecastStore};
use horserace_core::Month;

fn main() {
    env_logger::init();
    let args: Vec<String> = std::env::args().collect();
    let months: i32 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(456);
    let jobs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let start = Month::new(1959, 1).unwrap();
    let raw = synthetic_panel(128, 708, start, 7);
    let models = args.get(3).cloned().unwrap_or_else(|| "AR,BIC;ARDI,BIC;KRR-ARDI,K-fold;RFARDI,K-fold".into());
    let cfg = ExperimentConfig {
        models: models.split(';').map(str::to_string).collect(),
        oos_end: Month::new(1980, 1).unwrap().add(months - 1),
        ..ExperimentConfig::default()
    };
    let data = Dataset::build(&raw, &cfg).expect("dataset");
    let t = Instant::now();
    let rep = run_experiment_with_jobs(&cfg, &data, &ForecastStore::new(), jobs).expect("run");
    println!(
        "{} records, {} tuning events, {:.1}s on {jobs} thread(s)",
        rep.store.len(),
        rep.tune_events,
        t.elapsed().as_secs_f64()
    );
    for (m, c) in &rep.counts {
        println!("  {m}: {} attempted, {} failed", c.attempted, c.failed);
    }
}
