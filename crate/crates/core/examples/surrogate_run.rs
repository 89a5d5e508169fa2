//! Trains on a synthetic collaboration graph and prints per-mode aggregates.
//!
//! `cargo run --release -p fgat-core --example surrogate_run -- [netscience|sandi] [seeds] [crisp]`

use std::time::Instant;

use fgat_core::experiment::{run_experiment, ExperimentConfig};
use fgat_core::synth;
use fgat_core::{DecisionClass, SamplingMode};

fn main() -> fgat_core::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(String::as_str).unwrap_or("netscience");
    let seeds: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let graph = match which {
        "sandi" => synth::sandi_like(0),
        _ => synth::netscience_like(0),
    };
    let mut cfg = ExperimentConfig {
        seeds: (0..seeds).collect(),
        modes: vec![SamplingMode::Fuzzy, SamplingMode::Random],
        ..ExperimentConfig::default()
    };
    if args.get(3).map(String::as_str) == Some("crisp") {
        cfg.train.fns.decision = DecisionClass::Crisp;
        cfg.modes = vec![SamplingMode::Fuzzy];
    }
    let start = Instant::now();
    let report = run_experiment::<f64>(&graph, &cfg)?;
    for run in &report.runs {
        let first = run.history.first().map(|h| h.train_loss).unwrap_or(f64::NAN);
        let last = run.history.last().map(|h| h.train_loss).unwrap_or(f64::NAN);
        println!(
            "{} seed {} epochs {} best {} loss {first:.4}->{last:.4} {:?}",
            run.sampling,
            run.seed,
            run.epochs_trained(),
            run.best_epoch,
            run.test
        );
    }
    for agg in &report.aggregates {
        println!("{agg:?} mean4 {:.4}", agg.mean_of_four());
    }
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
