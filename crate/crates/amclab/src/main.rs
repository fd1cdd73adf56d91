//! Command-line pipeline: generate datasets, train policies, evaluate them,
//! and dump label histograms. Exit codes: 0 ok, 2 config error, 3 data/io
//! error, 4 numeric failure.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use amclab::baselines::{calibrate_lut, dqn_train, write_dqn_curve, QNet};
use amclab::config::RunConfig;
use amclab::datastore::{generate_dataset, label_histogram, split_dataset, write_histogram_csv, Dataset};
use amclab::evalreport::{compare_policies, emit_report_files, lstm_ablation_delta};
use amclab::models::{
    build_cnn_lstm, build_cnn_only, load_model, save_model, Policy, SequenceModel,
};
use amclab::{Error, Result};

#[derive(Parser)]
#[command(name = "amclab", version, about = "Link-adaptation laboratory: simulate channels, label them, train and compare MCS policies")]
struct Cli {
    /// Worker threads for generation and batched math (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Replace every seed in the config (dataset, split, init, train, agent).
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate the configured catalog; write dataset.amcd plus split files.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one policy on the configured split of a dataset.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Full (unsplit) dataset file; defaults to data.dataset from config.
        #[arg(long)]
        data: Option<PathBuf>,
        /// cnn_lstm | cnn_only | dqn
        #[arg(long)]
        model: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score checkpoints plus the calibrated lookup table on the test split.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Full (unsplit) dataset file; defaults to data.dataset from config.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Checkpoint file; repeatable. The kind is read from the .arch sidecar.
        #[arg(long = "checkpoint")]
        checkpoints: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label histogram of a dataset, optionally restricted to one scenario.
    Histogram {
        #[arg(long)]
        data: PathBuf,
        /// Scenario tag as listed in the manifest.
        #[arg(long)]
        scenario: Option<u16>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.cmd {
        Cmd::Generate { config, out } => cmd_generate(&load(&config, cli.seed_override)?, &out),
        Cmd::Train { config, data, model, out } => {
            cmd_train(&load(&config, cli.seed_override)?, data.as_deref(), &model, &out)
        }
        Cmd::Eval { config, data, checkpoints, out } => {
            cmd_eval(&load(&config, cli.seed_override)?, data.as_deref(), &checkpoints, &out)
        }
        Cmd::Histogram { data, scenario, out } => cmd_histogram(&data, scenario, &out),
    }
}

fn load(path: &Path, seed_override: Option<u64>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = seed_override {
        cfg.override_seeds(seed);
    }
    Ok(cfg)
}

/// Every command leaves the effective config and tool version next to its
/// outputs so a run can be reproduced from the directory alone.
fn echo_run_context(out: &Path, cfg: Option<&RunConfig>) -> Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("version.txt"), format!("{}\n", amclab::version_string()))?;
    if let Some(cfg) = cfg {
        std::fs::write(out.join("config.txt"), cfg.render())?;
    }
    Ok(())
}

fn cmd_generate(cfg: &RunConfig, out: &Path) -> Result<()> {
    echo_run_context(out, Some(cfg))?;
    let ds = generate_dataset(&cfg.catalog(), &cfg.link, cfg.data.window)?;
    ds.save(&out.join("dataset.amcd"))?;
    std::fs::write(out.join("manifest.txt"), ds.manifest.render())?;
    let (train, test) = split_dataset(&ds, cfg.data.train_fraction, cfg.data.split_seed)?;
    train.save(&out.join("train.amcd"))?;
    test.save(&out.join("test.amcd"))?;
    println!(
        "generated {} samples across {} scenarios ({} skipped frames); split {}/{}",
        ds.len(),
        ds.manifest.scenarios.len(),
        ds.manifest.skipped_frames,
        train.len(),
        test.len()
    );
    Ok(())
}

fn resolve_data<'a>(cfg: &'a RunConfig, flag: Option<&'a Path>) -> Result<&'a Path> {
    if let Some(p) = flag {
        return Ok(p);
    }
    if cfg.data.dataset.is_empty() {
        return Err(Error::Config("no dataset given: pass --data or set data.dataset".into()));
    }
    Ok(Path::new(&cfg.data.dataset))
}

/// Loads the full dataset and applies the configured split. Commands always
/// re-derive the split so train and eval agree byte for byte.
fn load_split(cfg: &RunConfig, path: &Path) -> Result<(Dataset, Dataset)> {
    let ds = Dataset::load(path)?;
    if let Some(split) = &ds.manifest.split {
        return Err(Error::Config(format!(
            "{} is already a {} split; pass the full dataset",
            path.display(),
            split.role
        )));
    }
    if ds.manifest.n_bs != cfg.channel.n_bs
        || ds.manifest.n_ue != cfg.channel.n_ue
        || ds.manifest.t != cfg.data.window
    {
        return Err(Error::Config(format!(
            "dataset geometry {}x{} window {} does not match config {}x{} window {}",
            ds.manifest.n_bs,
            ds.manifest.n_ue,
            ds.manifest.t,
            cfg.channel.n_bs,
            cfg.channel.n_ue,
            cfg.data.window
        )));
    }
    split_dataset(&ds, cfg.data.train_fraction, cfg.data.split_seed)
}

fn cmd_train(cfg: &RunConfig, data: Option<&Path>, model: &str, out: &Path) -> Result<()> {
    echo_run_context(out, Some(cfg))?;
    let data_path = resolve_data(cfg, data)?;
    let (train, test) = load_split(cfg, data_path)?;
    match model {
        "cnn_lstm" => {
            let mut m = build_cnn_lstm(&cfg.model_config())?;
            train_sequence_model(&mut m, &train, &test, cfg, out, "cnn_lstm")
        }
        "cnn_only" => {
            let mut m = build_cnn_only(&cfg.model_config())?;
            train_sequence_model(&mut m, &train, &test, cfg, out, "cnn_only")
        }
        "dqn" => {
            let (net, curve) = dqn_train(&train.samples, &cfg.dqn)?;
            net.save(&out.join("dqn.amcw"))?;
            write_dqn_curve(&out.join("dqn_curve.csv"), &curve)?;
            let accuracy = policy_accuracy(&net, &test)?;
            println!("dqn: {} steps, test accuracy {accuracy:.4}", cfg.dqn.train_steps);
            Ok(())
        }
        other => Err(Error::Config(format!(
            "unknown model {other:?}, expected cnn_lstm|cnn_only|dqn"
        ))),
    }
}

fn train_sequence_model<M: SequenceModel + Policy>(
    model: &mut M,
    train: &Dataset,
    test: &Dataset,
    cfg: &RunConfig,
    out: &Path,
    name: &str,
) -> Result<()> {
    let report = amclab::models::train_supervised(model, &train.samples, &test.samples, &cfg.train)?;
    save_model(model, &out.join(format!("{name}.amcw")))?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(out.join(format!("{name}_curve.csv")))?);
    report.write_csv(&mut f)?;
    let final_test = report.test_acc.iter().rev().find(|a| !a.is_nan()).copied().unwrap_or(f64::NAN);
    println!(
        "{name}: {} epochs, final train accuracy {:.4}, test accuracy {final_test:.4}",
        cfg.train.epochs,
        report.train_acc.last().copied().unwrap_or(f64::NAN),
    );
    Ok(())
}

fn policy_accuracy(policy: &dyn Policy, ds: &Dataset) -> Result<f64> {
    let mut hits = 0usize;
    for s in &ds.samples {
        if amclab::phy::McsTable::class_of(policy.choose(s)?) == s.y as usize {
            hits += 1;
        }
    }
    Ok(hits as f64 / ds.len() as f64)
}

/// Reads the `model=` field of a checkpoint's architecture sidecar.
fn checkpoint_kind(path: &Path) -> Result<String> {
    let arch = path.with_extension("arch");
    let text = std::fs::read_to_string(&arch)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", arch.display())))?;
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            if k.trim() == "model" {
                if let Some(kind) = v.trim().split_whitespace().next() {
                    return Ok(kind.to_string());
                }
            }
        }
    }
    Err(Error::Data(format!("{} does not name its model kind", arch.display())))
}

fn cmd_eval(cfg: &RunConfig, data: Option<&Path>, checkpoints: &[PathBuf], out: &Path) -> Result<()> {
    echo_run_context(out, Some(cfg))?;
    let data_path = resolve_data(cfg, data)?;
    let (train, test) = load_split(cfg, data_path)?;

    // The lookup table carries no checkpoint; it is recalibrated from the
    // training split, which is deterministic given config and dataset.
    let lut = calibrate_lut(&train.samples)?;
    let mut policies: Vec<Box<dyn Policy>> = vec![Box::new(lut)];
    for path in checkpoints {
        match checkpoint_kind(path)?.as_str() {
            "cnn_lstm" => {
                let mut m = build_cnn_lstm(&cfg.model_config())?;
                load_model(&mut m, path)?;
                policies.push(Box::new(m));
            }
            "cnn_only" => {
                let mut m = build_cnn_only(&cfg.model_config())?;
                load_model(&mut m, path)?;
                policies.push(Box::new(m));
            }
            "dqn" => {
                let net = QNet::load(path)?;
                if net.state_len() != cfg.dqn_state_len() {
                    return Err(Error::Data(format!(
                        "agent checkpoint consumes {} inputs, config implies {}",
                        net.state_len(),
                        cfg.dqn_state_len()
                    )));
                }
                policies.push(Box::new(net));
            }
            other => {
                return Err(Error::Data(format!(
                    "{}: unknown checkpoint kind {other:?}",
                    path.display()
                )))
            }
        }
    }

    let refs: Vec<&dyn Policy> = policies.iter().map(|b| b.as_ref()).collect();
    let report = compare_policies(&refs, &test)?;
    emit_report_files(out, &report)?;
    for sc in &test.manifest.scenarios {
        if sc.records == 0 {
            continue;
        }
        let hist = label_histogram(&test, Some(sc.tag));
        write_histogram_csv(&out.join(format!("histogram_{}.csv", sc.name)), &hist)?;
    }
    for p in &report.policies {
        println!("{}: accuracy {:.4} (n={})", p.name, p.accuracy, p.n);
    }
    if let Ok(delta) = lstm_ablation_delta(&report) {
        println!("cnn_lstm - cnn_only: {delta:+.4}");
    }
    Ok(())
}

fn cmd_histogram(data: &Path, scenario: Option<u16>, out: &Path) -> Result<()> {
    echo_run_context(out, None)?;
    let ds = Dataset::load(data)?;
    let name = match scenario {
        Some(tag) => {
            let sc = ds
                .manifest
                .scenarios
                .iter()
                .find(|s| s.tag == tag)
                .ok_or_else(|| Error::Config(format!("dataset has no scenario tag {tag}")))?;
            sc.name.clone()
        }
        None => "all".to_string(),
    };
    let hist = label_histogram(&ds, scenario);
    let path = out.join(format!("histogram_{name}.csv"));
    write_histogram_csv(&path, &hist)?;
    let total: u64 = hist.iter().sum();
    let modal = hist.iter().enumerate().max_by_key(|&(_, &n)| n).map(|(c, _)| c).unwrap_or(0);
    println!(
        "{name}: {total} samples, modal scheme index {}",
        amclab::phy::McsTable::index_of(modal)
    );
    Ok(())
}
