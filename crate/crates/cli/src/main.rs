use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use twistbeam::bandit::{parse_episodes, ConstantTrigger, TriggerHandle};
use twistbeam::decoder::{parse_traces_jsonl, trace_statistics};
use twistbeam::lm::{LanguageModel, LoopbackServer, NgramModel};
use twistbeam::pipeline::{
    evaluate, load_prompts, parse_stories_jsonl, regret_summary, run_ablation, train_bandit,
    write_ablation, Generator, Variant,
};
use twistbeam::twist::load_labels;
use twistbeam::{Assets, Config, Error};

#[derive(Parser)]
#[command(
    name = "twistbeam",
    version,
    about = "Story generation with a bandit-sized twist beam"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// JSON config file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set decode.fixed_beam=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the built-in n-gram model on a corpus with one story per line.
    TrainLm {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, default_value_t = 0.1)]
        k: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the LinUCB width policy online over a prompt file.
    TrainBandit {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate one story.
    Generate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        prompt: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "full", value_parser = parse_variant)]
        variant: Variant,
        /// Print the story as JSON instead of plain text.
        #[arg(long)]
        json: bool,
    },
    /// Run paired ablation variants over a prompt file.
    Ablate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "full,fixed10,fixed30,fixed60,no_rerank", value_parser = parse_variant)]
        variants: Vec<Variant>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Perplexity and arousal of a story JSONL file.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        stories: PathBuf,
    },
    /// Build a twist-position histogram from a labels CSV.
    BuildTwistHist {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean width per position and width transitions from a traces JSONL file.
    TraceStats {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "10,30,60")]
        beam_sizes: Vec<usize>,
    },
    /// Regret of recorded and constant-width policies over an episodes JSONL file.
    Regret {
        #[arg(long)]
        episodes: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "10,30,60")]
        beam_sizes: Vec<usize>,
    },
    /// Serve a trained n-gram model over the HTTP wire protocol.
    ServeLm {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Also answer trigger queries with this constant.
        #[arg(long)]
        trigger: Option<f64>,
    },
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn load_config(args: &ConfigArgs) -> Result<Config, Failure> {
    let mut cfg = match &args.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn write_file(path: &Path, body: &str) -> Result<(), Failure> {
    std::fs::write(path, body).map_err(|e| {
        Failure::Lib(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| {
        Failure::Lib(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn json<T: serde::Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(v).map_err(|e| Failure::Lib(e.into()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::TrainLm {
            corpus,
            order,
            k,
            out,
        } => {
            let model = NgramModel::train_file(&corpus, order, k)?;
            model.save(&out)?;
            eprintln!("trained {}", model.describe());
        }
        Command::TrainBandit {
            cfg,
            prompts,
            epochs,
            seed,
            out,
        } => {
            if epochs == 0 {
                return Err(Failure::Usage("--epochs must be at least 1".into()));
            }
            let cfg = load_config(&cfg)?;
            let mut assets = Assets::load(&cfg)?;
            let prompts = load_prompts(&prompts)?;
            let mut state = assets.bandit.clone();
            let log = {
                let gen = Generator::new(&assets, &cfg)?;
                train_bandit(&gen, &prompts, epochs, seed, &mut state)?
            };
            assets.bandit = state;
            assets.bandit.save(&out)?;
            println!("{}", json(&log)?);
        }
        Command::Generate {
            cfg,
            prompt,
            seed,
            variant,
            json: as_json,
        } => {
            let cfg = load_config(&cfg)?;
            let assets = Assets::load(&cfg)?;
            let gen = Generator::new(&assets, &cfg)?;
            let mut state = assets.bandit.clone();
            let draft = gen
                .generate(&prompt, seed, variant, &mut state, false, false)?
                .draft;
            if as_json {
                println!("{}", draft.to_json()?);
            } else {
                print!("{}", draft.to_plain_text());
            }
        }
        Command::Ablate {
            cfg,
            prompts,
            variants,
            seed,
            out_dir,
        } => {
            let cfg = load_config(&cfg)?;
            let assets = Assets::load(&cfg)?;
            let gen = Generator::new(&assets, &cfg)?;
            let prompts = load_prompts(&prompts)?;
            let runs = run_ablation(&gen, &prompts, &variants, seed, &assets.bandit)?;
            write_ablation(&runs, &cfg.decode.beam_sizes, &out_dir)?;
            for run in &runs {
                println!(
                    "{}\tppl={:.6}\tarousal={:.6}",
                    run.variant, run.report.mean_perplexity, run.report.mean_arousal
                );
            }
        }
        Command::Eval { cfg, stories } => {
            let cfg = load_config(&cfg)?;
            let assets = Assets::load(&cfg)?;
            let stories = parse_stories_jsonl(&read_file(&stories)?)?;
            let report = evaluate(
                &stories,
                &*assets.provider,
                &assets.lexicon,
                &cfg.decode_config(),
            )?;
            println!("{}", json(&report)?);
        }
        Command::BuildTwistHist { labels, out } => {
            let dist = load_labels(&labels)?;
            dist.save(&out)?;
            println!("{}", dist.to_json()?);
        }
        Command::TraceStats {
            traces,
            out_dir,
            beam_sizes,
        } => {
            let traces = parse_traces_jsonl(&read_file(&traces)?)?;
            let stats = trace_statistics(&traces, &beam_sizes)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| {
                Failure::Lib(Error::Io {
                    path: out_dir.clone(),
                    source: e,
                })
            })?;
            stats.write_csvs(&out_dir)?;
            write_file(&out_dir.join("trace_stats.json"), &json(&stats)?)?;
        }
        Command::Regret {
            episodes,
            beam_sizes,
        } => {
            let steps = parse_episodes(&read_file(&episodes)?)?;
            println!("{}", json(&regret_summary(&steps, &beam_sizes)?)?);
        }
        Command::ServeLm {
            model,
            addr,
            trigger,
        } => {
            let model: Arc<dyn LanguageModel> = Arc::new(NgramModel::load(&model)?);
            let trigger = match trigger {
                Some(p) if !(0.0..=1.0).contains(&p) => {
                    return Err(Failure::Usage(format!("--trigger {p} outside [0, 1]")));
                }
                Some(p) => Some(Arc::new(ConstantTrigger(p)) as TriggerHandle),
                None => None,
            };
            let server = LoopbackServer::start(&addr, model, trigger)?;
            eprintln!("serving on {}", server.url());
            server.join();
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 3 })
        }
    }
}
