use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mmg_teleop::classifier::{evaluate, train, ModelCheckpoint};
use mmg_teleop::config::{AppConfig, Experiment, ExperimentConfig};
use mmg_teleop::gesture::GestureClass;
use mmg_teleop::harness::serve::{bind, serve_connection};
use mmg_teleop::harness::session::read_log;
use mmg_teleop::harness::{replay, report, run_navigation, run_recognition, run_transfer, Session};
use mmg_teleop::synth::{generate_dataset, Dataset};
use mmg_teleop::{Error, Result};

#[derive(Parser)]
#[command(name = "mmg-teleop", version, about = "MMG gesture teleoperation: data, training, experiments and live sessions")]
struct Cli {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed for data generation, training and experiments.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the synthetic train/test windows as CSV.
    GenData,
    /// Train the classifier and write the checkpoint.
    Train {
        /// Read windows written by gen-data instead of generating them.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the held-out windows.
    Eval {
        /// Checkpoint to evaluate; defaults to `<out>/model.ckpt`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Read windows written by gen-data instead of generating them.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Re-run a logged live session and compare it with the log.
    Replay {
        /// Session log written by serve.
        log: PathBuf,
    },
    /// Run one of the experiments and write its report.
    RunExp {
        experiment: ExpArg,
        /// Classifier checkpoint; defaults to `<out>/model.ckpt` when present.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Serve live sessions over WebSocket.
    Serve {
        /// Listen port; overrides `serve.port` from the config.
        #[arg(long)]
        port: Option<u16>,
        /// Exit after this many sessions.
        #[arg(long)]
        sessions: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExpArg {
    Recognition,
    Navigation,
    Transfer,
}

impl From<ExpArg> for Experiment {
    fn from(e: ExpArg) -> Self {
        match e {
            ExpArg::Recognition => Experiment::Recognition,
            ExpArg::Navigation => Experiment::Navigation,
            ExpArg::Transfer => Experiment::Transfer,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
        cfg.dataset.seed = s;
    }
    cfg.validate()?;
    let seed = cfg.seed.unwrap_or(1);
    let out = cli.out.as_path();
    match cli.command {
        Cmd::GenData => {
            let ds = generate_dataset(&cfg.dataset)?;
            let dir = out.join("dataset");
            ds.write_csv(&dir)?;
            println!("{} train / {} test windows written to {}", ds.train.len(), ds.test.len(), dir.display());
        }
        Cmd::Train { data } => {
            let ds = load_dataset(&cfg, data.as_deref())?;
            create_dir(out)?;
            let (ckpt, log) = train(&cfg.model(), &cfg.train, &ds.train, &GestureClass::ALL)?;
            let path = out.join("model.ckpt");
            ckpt.save(&path)?;
            log.write_csv(&out.join("training_log.csv"))?;
            let mut summary = Vec::new();
            log.write_summary(&mut summary).map_err(|e| Error::io(out, e))?;
            report::write_text(&out.join("training.txt"), &String::from_utf8_lossy(&summary))?;
            print!("{}", String::from_utf8_lossy(&summary));
            println!("checkpoint written to {}", path.display());
        }
        Cmd::Eval { checkpoint, data } => {
            let ckpt = ModelCheckpoint::load(&resolve_checkpoint(checkpoint, &cfg, out)?)?;
            let ds = load_dataset(&cfg, data.as_deref())?;
            let ev = evaluate(&ckpt, &ds.test)?;
            create_dir(out)?;
            let mut text = format!("windows {}\naccuracy {:.4}\n", ev.confusion.total(), ev.accuracy);
            if let Some(f) = ev.confusion.intra_category_error_fraction(&ckpt.labels) {
                text += &format!("intra-category errors {f:.4}\n");
            }
            for (label, f1) in ckpt.labels.iter().zip(&ev.f1) {
                text += &format!("f1 {label} {f1:.4}\n");
            }
            report::write_text(&out.join("eval.txt"), &text)?;
            print!("{text}");
        }
        Cmd::Replay { log } => {
            let records = read_log(&log)?;
            let r = replay(&records)?;
            create_dir(out)?;
            let json = serde_json::to_string_pretty(&r)?;
            report::write_text(&out.join("replay.json"), &(json.clone() + "\n"))?;
            println!("{json}");
            if !r.identical() {
                return Err(Error::Session(format!(
                    "replay diverged from the log (first differing output {:?})",
                    r.first_mismatch
                )));
            }
        }
        Cmd::RunExp { experiment, checkpoint } => {
            let mut exp = ExperimentConfig::new(experiment.into(), &cfg, seed, out.to_path_buf());
            exp.checkpoint = checkpoint.or(exp.checkpoint).or_else(|| {
                let p = out.join("model.ckpt");
                p.is_file().then_some(p)
            });
            exp.validate(&cfg)?;
            run_experiment(&exp, &cfg)?;
        }
        Cmd::Serve { port, sessions } => {
            let port = port.unwrap_or(cfg.serve.port);
            let scenario = cfg.scenario()?;
            let setup = cfg.setup();
            create_dir(out)?;
            let rt = tokio::runtime::Builder::new_current_thread()
                .enable_all()
                .build()
                .map_err(|e| Error::Session(e.to_string()))?;
            rt.block_on(async {
                let listener = bind(port).await?;
                println!("listening on ws://127.0.0.1:{port}");
                let mut n = 0;
                while sessions.is_none_or(|max| n < max) {
                    let (stream, peer) = listener.accept().await.map_err(|e| Error::Session(e.to_string()))?;
                    let log = match &cfg.serve.log {
                        Some(p) if n == 0 => p.clone(),
                        _ => out.join(format!("session-{n}.jsonl")),
                    };
                    let session = Session::new(&setup, &scenario, seed.wrapping_add(n as u64), cfg.serve.telemetry_hz)?;
                    match serve_connection(stream, session, &log).await {
                        Ok(m) => println!("{peer}: session ended after {} ms, log {}", m.duration_ms, log.display()),
                        Err(e) => eprintln!("{peer}: {e}"),
                    }
                    n += 1;
                }
                Ok::<_, Error>(())
            })?;
        }
    }
    std::io::stdout().flush().ok();
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_dataset(cfg: &AppConfig, data: Option<&Path>) -> Result<Dataset> {
    match data {
        Some(dir) => Dataset::read_csv(dir, cfg.dataset.placement.sample_rate_hz, cfg.dataset.window_len()),
        None => generate_dataset(&cfg.dataset),
    }
}

fn resolve_checkpoint(flag: Option<PathBuf>, cfg: &AppConfig, out: &Path) -> Result<PathBuf> {
    flag.or_else(|| cfg.checkpoint.clone())
        .or_else(|| Some(out.join("model.ckpt")))
        .filter(|p| p.is_file())
        .ok_or_else(|| Error::Config("no checkpoint: pass --checkpoint or run train first".into()))
}

fn run_experiment(exp: &ExperimentConfig, cfg: &AppConfig) -> Result<()> {
    let setup = cfg.setup();
    let ckpt = exp.checkpoint.as_deref().map(ModelCheckpoint::load).transpose()?;
    let (table, files) = match exp.experiment {
        Experiment::Recognition => {
            let r = run_recognition(&setup, ckpt.as_ref(), &cfg.dataset, &cfg.recognition, exp.seed)?;
            (r.table(), r.write(&exp.out)?)
        }
        Experiment::Navigation => {
            let course = cfg.scenario()?.course;
            let r = run_navigation(&setup, &course, &cfg.navigation, exp.seed)?;
            (r.table(), r.write(&exp.out)?)
        }
        Experiment::Transfer => {
            let catalog = cfg.scenario()?.catalog;
            let r = run_transfer(
                &setup,
                &catalog,
                &cfg.transfer,
                ckpt.as_ref(),
                &cfg.dataset,
                &cfg.recognition,
                exp.seed,
            )?;
            (r.table(), r.write(&exp.out)?)
        }
    };
    print!("{table}");
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
