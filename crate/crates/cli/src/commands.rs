use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use wildgen::ingest::{flatten, read_trajectory_set, write_trajectory_set, NormalizedMatrix};
use wildgen::metrics::MetricsReport;
use wildgen::pipeline::{
    evaluate_sets, generate, run_baseline, train_pipeline, BaselineKind, Checkpoint, Mode,
};
use wildgen::vae::latent_codes;
use wildgen::TrajectorySet;

use crate::config::Settings;
use crate::plot::{self, Layer, SetKind};
use crate::{BaselineArg, Cli, Command, ModeArg};

pub fn run(cli: Cli) -> Result<()> {
    let mut settings = Settings::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        settings.pipeline.seed = seed;
    }
    if let Some(out) = cli.out {
        settings.paths.out_dir = Some(out);
    }
    match &cli.command {
        Command::Train { epochs: Some(e), .. } => settings.pipeline.train.epochs = *e,
        Command::Baseline { toggles, .. } => {
            let t = &mut settings.pipeline.postprocess;
            t.smoothing &= !toggles.no_smoothing;
            t.mbr &= !toggles.no_mbr;
        }
        _ => {}
    }
    settings.pipeline.validate()?;
    let out = settings.out_dir();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    match cli.command {
        Command::Synth => synth(&settings),
        Command::Train { corpus, .. } => train(&settings, corpus.unwrap_or_else(|| settings.corpus())),
        Command::Generate {
            checkpoint,
            mode,
            count,
        } => {
            let mode = match mode {
                ModeArg::Raw => Mode::Raw,
                ModeArg::Smoothed => Mode::Smoothed,
                ModeArg::Mbr => Mode::Mbr,
                ModeArg::Full => Mode::Full,
            };
            let count = count.unwrap_or(settings.pipeline.generation.count);
            generate_cmd(&settings, checkpoint.unwrap_or_else(|| settings.checkpoint()), mode, count)
        }
        Command::Baseline {
            which,
            corpus,
            count,
            ..
        } => {
            let kind = match which {
                BaselineArg::Levy => BaselineKind::Levy,
                BaselineArg::Hgpr => BaselineKind::Hgpr,
            };
            let count = count.unwrap_or(settings.pipeline.generation.count);
            baseline(&settings, corpus.unwrap_or_else(|| settings.corpus()), kind, count)
        }
        Command::Evaluate { real, generated } => {
            evaluate_cmd(&settings, real.unwrap_or_else(|| settings.corpus()), &generated)
        }
        Command::Plot {
            real,
            generated,
            baseline,
            checkpoint,
        } => plot_cmd(
            &settings,
            real.unwrap_or_else(|| settings.corpus()),
            &generated,
            &baseline,
            checkpoint.as_deref(),
        ),
    }
}

fn read_set(path: &Path) -> Result<TrajectorySet> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_trajectory_set(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn write_set(path: &Path, set: &TrajectorySet) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    write_trajectory_set(&mut w, set)?;
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "set".into(), |s| s.to_string_lossy().into_owned())
}

fn synth(s: &Settings) -> Result<()> {
    let set = s.pipeline.synth_corpus()?;
    let path = s.corpus();
    write_set(&path, &set)?;
    println!("synth: {} trajectories x {} days -> {}", set.len(), set.horizon(), path.display());
    Ok(())
}

fn train(s: &Settings, corpus: PathBuf) -> Result<()> {
    let real = read_set(&corpus)?;
    let (ckpt, history) = train_pipeline(&real, &s.pipeline)?;
    let out = s.out_dir();
    let ckpt_path = s.checkpoint();
    let file = File::create(&ckpt_path).with_context(|| format!("creating {}", ckpt_path.display()))?;
    let mut w = BufWriter::new(file);
    ckpt.write(&mut w)?;
    w.flush()?;
    fs::write(out.join("loss_history.csv"), history.to_csv())?;

    if let (Some(first), Some(last)) = (history.first(), history.last()) {
        println!(
            "train: {} epochs, reconstruction mse {:.6} -> {:.6} ({:.2}% of initial), kl {:.6}",
            history.len(),
            first.reconstruction_mse,
            last.reconstruction_mse,
            100.0 * last.reconstruction_mse / first.reconstruction_mse,
            last.kl_term
        );
    }
    println!(
        "train: gmm k = {}, {} EM iterations, log-likelihood {:.4} -> {}",
        ckpt.gmm.k,
        ckpt.gmm.iterations,
        ckpt.gmm.fit_log_likelihood,
        ckpt_path.display()
    );
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Checkpoint::read(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn generate_cmd(s: &Settings, ckpt_path: PathBuf, mode: Mode, count: usize) -> Result<()> {
    let ckpt = load_checkpoint(&ckpt_path)?;
    let g = &s.pipeline.generation;
    let output = generate(&ckpt, mode, count, g.max_attempts_factor, &s.pipeline.savgol)?;
    let out = s.out_dir();
    let path = out.join(format!("generated_{mode}.csv"));
    write_set(&path, &output.trajectories)?;
    write_json(&out.join(format!("manifest_{mode}.json")), &output.manifest)?;
    let m = &output.manifest;
    println!(
        "generate: {} trajectories ({mode}) from {} attempts, discard rate {:.1}% (reference {:.1}%) -> {}",
        m.produced,
        m.attempts,
        100.0 * m.discard_rate,
        100.0 * m.reference_discard_rate,
        path.display()
    );
    Ok(())
}

fn baseline(s: &Settings, corpus: PathBuf, kind: BaselineKind, count: usize) -> Result<()> {
    let real = read_set(&corpus)?;
    let (output, fit) = run_baseline(&real, kind, count, &s.pipeline)?;
    let name = match kind {
        BaselineKind::Levy => "levy",
        BaselineKind::Hgpr => "hgpr",
    };
    let out = s.out_dir();
    let path = out.join(format!("{name}.csv"));
    write_set(&path, &output.trajectories)?;
    write_json(&out.join(format!("{name}_params.json")), &fit)?;
    write_json(&out.join(format!("{name}_manifest.json")), &output.manifest)?;
    println!(
        "baseline: {} {name} trajectories from {} attempts, discard rate {:.1}% -> {}",
        output.manifest.produced,
        output.manifest.attempts,
        100.0 * output.manifest.discard_rate,
        path.display()
    );
    Ok(())
}

fn evaluate_cmd(s: &Settings, real_path: PathBuf, generated: &[String]) -> Result<()> {
    let real = read_set(&real_path)?;
    let out = s.out_dir();
    let mut table = vec![MetricsReport::table_header()];
    for spec in generated {
        let (label, path) = match spec.split_once('=') {
            Some((l, p)) => (l.to_string(), PathBuf::from(p)),
            None => (stem(Path::new(spec)), PathBuf::from(spec)),
        };
        let set = read_set(&path)?;
        let report = evaluate_sets(&real, &set, &s.pipeline).with_context(|| format!("evaluating {label}"))?;
        write_json(&out.join(format!("metrics_{label}.json")), &report)?;
        table.push(report.table_row(&label));
    }
    let text = table.join("\n") + "\n";
    fs::write(out.join("comparison.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn plot_cmd(
    s: &Settings,
    real_path: PathBuf,
    generated: &[PathBuf],
    baselines: &[PathBuf],
    checkpoint: Option<&Path>,
) -> Result<()> {
    let real = read_set(&real_path)?;
    let mut layers = vec![Layer {
        kind: SetKind::Real,
        name: stem(&real_path),
        set: real.clone(),
    }];
    for (kind, paths) in [(SetKind::Generated, generated), (SetKind::Baseline, baselines)] {
        for p in paths {
            layers.push(Layer {
                kind,
                name: stem(p),
                set: read_set(p)?,
            });
        }
    }
    let out = s.out_dir();
    write_json(&out.join("trajectories.geojson"), &plot::geojson(&layers))?;
    fs::write(out.join("trajectories.svg"), plot::svg(&layers))?;
    let features: usize = layers.iter().map(|l| l.set.len()).sum();
    println!("plot: {features} trajectories -> {}", out.join("trajectories.svg").display());

    if let Some(path) = checkpoint {
        let ckpt = load_checkpoint(path)?;
        if real.horizon() != ckpt.horizon {
            anyhow::bail!(wildgen::Error::Shape(format!(
                "corpus horizon {} does not match checkpoint horizon {}",
                real.horizon(),
                ckpt.horizon
            )));
        }
        let data = NormalizedMatrix {
            values: flatten(&real) / ckpt.normalization.scale,
        };
        let codes = latent_codes(&ckpt.params, &data)?;
        // A one-dimensional latent space is drawn along a line.
        let pts: Vec<(f64, f64)> = codes
            .rows()
            .into_iter()
            .map(|r| (r[0], r.get(1).copied().unwrap_or(0.0)))
            .collect();
        let means: Vec<(f64, f64)> = ckpt
            .gmm
            .means
            .iter()
            .map(|m| (m[0], m.get(1).copied().unwrap_or(0.0)))
            .collect();
        fs::write(out.join("latent.svg"), plot::latent_svg(&pts, &means))?;
        println!("plot: {} latent codes -> {}", pts.len(), out.join("latent.svg").display());
    }
    Ok(())
}
