use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use segssl::experiment::{self, ExperimentConfig, EXIT_CONFIG, EXIT_OK};
use segssl::ssl::Mode;
use segssl::{Error, Result};

#[derive(Parser)]
#[command(name = "segssl", version, about = "Semi-supervised segmentation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset and its split.
    Gen {
        #[arg(long)]
        config: PathBuf,
        /// Dataset directory (defaults to `data_dir` from the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one mode and write checkpoint, history and filter log.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a checkpoint on the test split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// CNR / SNR / FBR of the labeled images.
    Analyze {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// SL vs SSL vs SSL_AL over several training seeds.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn pick(flag: Option<PathBuf>, from_config: Option<&PathBuf>, what: &str) -> Result<PathBuf> {
    flag.or_else(|| from_config.cloned())
        .ok_or_else(|| Error::InvalidArgument(format!("no {what} given (flag or config)")))
}

fn load_opt(config: Option<&Path>) -> Result<Option<ExperimentConfig>> {
    config.map(ExperimentConfig::load).transpose()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = pick(out, cfg.data_dir.as_ref(), "output directory")?;
            let c = experiment::run_gen(&cfg, &out)?;
            println!(
                "labeled {} unlabeled {} validation {} test {} -> {}",
                c.labeled,
                c.unlabeled,
                c.validation,
                c.test,
                out.display()
            );
        }
        Command::Train {
            config,
            mode,
            data,
            out,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(m) = mode {
                cfg.train.mode = m.parse::<Mode>()?;
            }
            let data = pick(data, cfg.data_dir.as_ref(), "dataset directory")?;
            let out = pick(out, cfg.out_dir.as_ref(), "output directory")?;
            let o = experiment::run_train(&cfg.train, &data, &out, |r| {
                eprintln!(
                    "epoch {:>4}  loss {:.4}  active {:>4}  val_dice {}",
                    r.epoch,
                    r.total_loss,
                    r.active_unlabeled,
                    r.val_dice.map(|d| format!("{d:.2}")).unwrap_or_else(|| "-".into())
                );
            })?;
            println!(
                "{} done: {} epochs, {} filter events -> {}",
                cfg.train.mode,
                o.history.len(),
                o.filter_events.len(),
                out.display()
            );
        }
        Command::Eval {
            checkpoint,
            data,
            config,
            out,
        } => {
            let cfg = load_opt(config.as_deref())?;
            let data = pick(data, cfg.as_ref().and_then(|c| c.data_dir.as_ref()), "dataset directory")?;
            let a = experiment::run_eval(&checkpoint, &data, &out)?;
            println!(
                "test cases {}  dice {:.2}  iou {:.2}  hd95 {}  asd {}",
                a.cases,
                a.dice,
                a.iou,
                a.hd95.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into()),
                a.asd.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into())
            );
        }
        Command::Analyze { data, config, out } => {
            let cfg = load_opt(config.as_deref())?;
            let data = pick(data, cfg.as_ref().and_then(|c| c.data_dir.as_ref()), "dataset directory")?;
            let name = cfg.map(|c| c.dataset_name).unwrap_or_else(|| {
                data.file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "dataset".into())
            });
            let s = experiment::run_analyze(&data, &name, &out)?;
            match s.mean {
                Some(m) => println!("{name}: cnr {:.3}  snr {:.3}  fbr {:.2}%", m.cnr, m.snr, m.fbr),
                None => println!("{name}: no image with defined statistics"),
            }
        }
        Command::Ablate { config, seeds, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = pick(out, cfg.out_dir.as_ref(), "output directory")?;
            experiment::run_ablate(&cfg, &seeds, &out, |row| println!("{}", row.csv()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { EXIT_OK as u8 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(experiment::exit_code(&e) as u8)
        }
    }
}
