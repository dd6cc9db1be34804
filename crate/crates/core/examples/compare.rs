//! Trains on the default synthetic corpus and prints the comparison table.
//!
//!     cargo run --release --example compare -- [master_seed]

use std::time::Instant;

use wildgen::metrics::MetricsReport;
use wildgen::pipeline::{evaluate_sets, generate, run_baseline, train_pipeline, BaselineKind, Mode, PipelineConfig};

fn main() -> wildgen::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let cfg = PipelineConfig {
        seed,
        ..Default::default()
    };
    let t0 = Instant::now();
    let real = cfg.synth_corpus()?;
    let (ckpt, history) = train_pipeline(&real, &cfg)?;
    let (first, last) = (history.first().unwrap(), history.last().unwrap());
    eprintln!(
        "trained in {:.1?}: mse {:.4} -> {:.6}",
        t0.elapsed(),
        first.reconstruction_mse,
        last.reconstruction_mse
    );
    println!("{}", MetricsReport::table_header());
    for mode in Mode::ALL {
        let out = generate(&ckpt, mode, cfg.generation.count, cfg.generation.max_attempts_factor, &cfg.savgol)?;
        let report = evaluate_sets(&real, &out.trajectories, &cfg)?;
        println!(
            "{}  discard {:.3}",
            report.table_row(&format!("WildGEN ({mode})")),
            out.manifest.discard_rate
        );
    }
    for (kind, label) in [(BaselineKind::Levy, "Levy"), (BaselineKind::Hgpr, "HGPR")] {
        let (out, label) = match run_baseline(&real, kind, cfg.generation.count, &cfg) {
            Err(wildgen::Error::Shortfall { attempts, .. }) => {
                eprintln!("{label}: no region-filter survivors in {attempts} attempts; smoothing only");
                let mut relaxed = cfg.clone();
                relaxed.postprocess.mbr = false;
                (run_baseline(&real, kind, cfg.generation.count, &relaxed)?.0, format!("{label} (smoothed)"))
            }
            other => (other?.0, label.to_string()),
        };
        let report = evaluate_sets(&real, &out.trajectories, &cfg)?;
        println!("{}  discard {:.3}", report.table_row(&label), out.manifest.discard_rate);
    }
    eprintln!("total {:.1?}", t0.elapsed());
    Ok(())
}
