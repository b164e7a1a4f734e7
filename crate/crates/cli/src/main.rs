//! Command-line front end for the IDRL engine.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use idrl_core::datagen::{generate, load_dataset, save_dataset, segment_mi, Dataset, SyntheticSpec};
use idrl_core::engine::{
    ablate, default_toggle_sets, evaluate, extract, make_batch, run_gradcheck_suite, train,
    Checkpoint, TrainConfig,
};

#[derive(Parser)]
#[command(name = "idrl", about = "Two-modality disentangled representation learning engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write MMFEAT/MMLAB files.
    Gen {
        /// Plain-text key=value spec file; see `--explain-spec`.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a generated dataset directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Optional key=value config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint and write a metrics CSV.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Train once per loss-toggle set and write the comparison CSV.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full gradient-check suite; exits nonzero on any failure.
    Gradcheck {
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Dump per-sample attention weights over the four stacked features.
    DumpAttn {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump per-sample disentangled embeddings for external plotting.
    DumpEmbed {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-segment video-audio mutual information diagnostic.
    AnalyzeMi {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 8)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen { spec, out } => cmd_gen(&spec, &out)?,
        Command::Train { data, config, out } => cmd_train(&data, config.as_deref(), &out)?,
        Command::Eval { ckpt, data, report } => cmd_eval(&ckpt, &data, &report)?,
        Command::Ablate { data, config, out } => cmd_ablate(&data, config.as_deref(), &out)?,
        Command::Gradcheck { seed } => return cmd_gradcheck(seed),
        Command::DumpAttn { ckpt, data, out } => cmd_dump_attn(&ckpt, &data, &out)?,
        Command::DumpEmbed { ckpt, data, out } => cmd_dump_embed(&ckpt, &data, &out)?,
        Command::AnalyzeMi { data, bins, out } => cmd_analyze_mi(&data, bins, &out)?,
    }
    Ok(ExitCode::SUCCESS)
}

/// Parses a key=value spec file. Unknown keys are errors; `label_weights`
/// is a comma-separated list.
fn parse_spec(text: &str) -> Result<SyntheticSpec> {
    let mut spec = SyntheticSpec::recovery_default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("line {}: expected key=value", lineno + 1))?;
        let (key, value) = (key.trim(), value.trim());
        let ctx = || format!("line {}: bad value for {key}", lineno + 1);
        match key {
            "n_samples" => spec.n_samples = value.parse().with_context(ctx)?,
            "d_common" => spec.d_common = value.parse().with_context(ctx)?,
            "d_specific" => spec.d_specific = value.parse().with_context(ctx)?,
            "d_nuisance" => spec.d_nuisance = value.parse().with_context(ctx)?,
            "d_v" => spec.d_v = value.parse().with_context(ctx)?,
            "d_a" => spec.d_a = value.parse().with_context(ctx)?,
            "segments" => spec.segments = value.parse().with_context(ctx)?,
            "noise_std" => spec.noise_std = value.parse().with_context(ctx)?,
            "seed" => spec.seed = value.parse().with_context(ctx)?,
            "label_weights" => {
                spec.label_weights = value
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .with_context(ctx)?;
            }
            other => bail!("line {}: unknown spec key '{other}'", lineno + 1),
        }
    }
    Ok(spec)
}

fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        None => Ok(TrainConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            Ok(TrainConfig::parse(&text)?)
        }
    }
}

fn load_data(dir: &Path) -> Result<Dataset> {
    Ok(load_dataset(dir).with_context(|| format!("loading dataset from {}", dir.display()))?)
}

fn cmd_gen(spec_path: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(spec_path)
        .with_context(|| format!("reading spec {}", spec_path.display()))?;
    let spec = parse_spec(&text)?;
    let data = generate(&spec)?;
    fs::create_dir_all(out)?;
    save_dataset(&data, out)?;
    let n_pos: usize = data.labels.iter().map(|l| l.y_aux as usize).sum();
    println!(
        "wrote {} samples ({} positive) to {}",
        data.len(),
        n_pos,
        out.display()
    );
    Ok(())
}

fn cmd_train(data_dir: &Path, config: Option<&Path>, out: &Path) -> Result<()> {
    let data = load_data(data_dir)?;
    let cfg = load_config(config)?;
    let outcome = train(&data, &cfg)?;
    for log in &outcome.log {
        println!(
            "epoch {:3}  train {:.6}  val {:.6}  val_mae {:.4}",
            log.epoch, log.train.total, log.val.total, log.val_mae
        );
    }
    outcome.checkpoint.save(out)?;
    println!(
        "saved best checkpoint (epoch {}, val loss {:.6}) to {}",
        outcome.checkpoint.epoch,
        outcome.checkpoint.best_val,
        out.display()
    );
    Ok(())
}

fn cmd_eval(ckpt: &Path, data_dir: &Path, report: &Path) -> Result<()> {
    let ckpt = Checkpoint::load(ckpt)?;
    let data = load_data(data_dir)?;
    let metrics = evaluate(&ckpt, &data)?;
    let mut csv = String::from("metric,value\n");
    csv.push_str(&format!("mae,{}\n", metrics.mae));
    csv.push_str(&format!("rmse,{}\n", metrics.rmse));
    if let Some(acc) = metrics.accuracy {
        csv.push_str(&format!("accuracy,{acc}\n"));
    }
    if let Some(f1) = metrics.macro_f1 {
        csv.push_str(&format!("macro_f1,{f1}\n"));
    }
    fs::write(report, &csv)?;
    print!("{csv}");
    Ok(())
}

fn cmd_ablate(data_dir: &Path, config: Option<&Path>, out: &Path) -> Result<()> {
    let data = load_data(data_dir)?;
    let cfg = load_config(config)?;
    let rows = ablate(&data, &cfg, &default_toggle_sets())?;
    let mut csv = String::from("config,val_mae,val_rmse\n");
    for (name, report) in &rows {
        csv.push_str(&format!("{name},{},{}\n", report.mae, report.rmse));
    }
    fs::write(out, &csv)?;
    print!("{csv}");
    Ok(())
}

fn cmd_gradcheck(seed: u64) -> Result<ExitCode> {
    let outcomes = run_gradcheck_suite(seed)?;
    let mut ok = true;
    for o in &outcomes {
        let status = if o.passed() { "PASS" } else { "FAIL" };
        println!("{status}  {:<32} max_rel_err {:.3e} (tol {:.1e})", o.name, o.max_err, o.tol);
        ok &= o.passed();
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn full_batch(data: &Dataset) -> idrl_core::engine::BatchData {
    let (pv, pa) = data.pooled();
    let idx: Vec<usize> = (0..data.len()).collect();
    make_batch(&pv, &pa, data, &idx)
}

fn cmd_dump_attn(ckpt: &Path, data_dir: &Path, out: &Path) -> Result<()> {
    let ckpt = Checkpoint::load(ckpt)?;
    let data = load_data(data_dir)?;
    let batch = full_batch(&data);
    let feats = extract(&ckpt.params, &ckpt.config, &batch)?;
    let w = &feats.fusion.w_attn;
    let mut csv = String::from("sample_id,w_Fc_v,w_Fc_a,w_Fs_v,w_Fs_a\n");
    for i in 0..w.rows {
        let r = w.row(i);
        csv.push_str(&format!("{i},{},{},{},{}\n", r[0], r[1], r[2], r[3]));
    }
    fs::write(out, &csv)?;
    println!("wrote attention weights for {} samples to {}", w.rows, out.display());
    Ok(())
}

fn cmd_dump_embed(ckpt: &Path, data_dir: &Path, out: &Path) -> Result<()> {
    let ckpt = Checkpoint::load(ckpt)?;
    let data = load_data(data_dir)?;
    let batch = full_batch(&data);
    let feats = extract(&ckpt.params, &ckpt.config, &batch)?;

    let d = feats.bundle_v.f_c.cols;
    let mut header = String::from("sample_id");
    for (tag, _) in embed_parts(&feats) {
        for j in 0..d {
            header.push_str(&format!(",{tag}_{j}"));
        }
    }
    header.push('\n');

    let mut csv = header;
    for i in 0..data.len() {
        csv.push_str(&i.to_string());
        for (_, m) in embed_parts(&feats) {
            for v in m.row(i) {
                csv.push_str(&format!(",{v}"));
            }
        }
        csv.push('\n');
    }
    fs::write(out, &csv)?;
    println!("wrote embeddings for {} samples to {}", data.len(), out.display());
    Ok(())
}

fn embed_parts(
    feats: &idrl_core::engine::ExtractedFeatures,
) -> Vec<(&'static str, &idrl_core::Tensor2)> {
    vec![
        ("Fc_v", &feats.bundle_v.f_c),
        ("Fc_a", &feats.bundle_a.f_c),
        ("Fs_v", &feats.bundle_v.f_s),
        ("Fs_a", &feats.bundle_a.f_s),
        ("Nc_v", &feats.bundle_v.n_c),
        ("Nc_a", &feats.bundle_a.n_c),
        ("Ns_v", &feats.bundle_v.n_s),
        ("Ns_a", &feats.bundle_a.n_s),
    ]
}

fn cmd_analyze_mi(data_dir: &Path, bins: usize, out: &Path) -> Result<()> {
    let data = load_data(data_dir)?;
    let scores = segment_mi(&data.v, &data.a, bins)?;
    let mut csv = String::from("segment,mi_nats\n");
    for (l, mi) in scores.iter().enumerate() {
        csv.push_str(&format!("{l},{mi}\n"));
    }
    fs::write(out, &csv)?;
    print!("{csv}");
    Ok(())
}
