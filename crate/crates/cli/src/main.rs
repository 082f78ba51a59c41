//! `icscore` command-line entry point.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use icscore::assembly::InputAblation;
use icscore::corpus::SynthConfig;
use icscore::harness::{self, Approach, RunConfig, ScoreOptions};
use icscore::metrics::Grouping;
use icscore::trainer::Variant;

#[derive(Parser)]
#[command(
    name = "icscore",
    version,
    about = "Automated short-answer scoring with in-context examples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with a planted scoring rule.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// K-fold evaluation of the configured approaches and baselines.
    Crossval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Add the full baseline grid to the configured approaches.
        #[arg(long)]
        baseline_grid: bool,
    },
    /// Train one model and write a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Score a responses file with a checkpoint.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        /// Refuse to score unless the checkpoint was trained with this template.
        #[arg(long)]
        template: Option<PathBuf>,
    },
    /// Per-group prediction bias of a prediction table.
    Audit {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        items: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long, value_enum, default_value = "combined")]
        grouping: GroupingArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, value_enum)]
    spellcheck: Option<Toggle>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long, value_enum)]
    ablation: Option<AblationArg>,
    #[arg(long)]
    resamples: Option<usize>,
    #[arg(long)]
    condition_demographics: bool,
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long)]
    items: Option<PathBuf>,
    #[arg(long)]
    responses: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    PerItem,
    MultiTask,
    SharedInContext,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::PerItem => Variant::PerItem,
            VariantArg::MultiTask => Variant::MultiTask,
            VariantArg::SharedInContext => Variant::SharedInContext,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AblationArg {
    ResponseOnly,
    ResponsePassageQuestion,
    FullInContext,
}

impl From<AblationArg> for InputAblation {
    fn from(a: AblationArg) -> Self {
        match a {
            AblationArg::ResponseOnly => InputAblation::ResponseOnly,
            AblationArg::ResponsePassageQuestion => InputAblation::ResponsePassageQuestion,
            AblationArg::FullInContext => InputAblation::FullInContext,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupingArg {
    Gender,
    Ethnicity,
    Combined,
}

impl From<GroupingArg> for Grouping {
    fn from(g: GroupingArg) -> Self {
        match g {
            GroupingArg::Gender => Grouping::Gender,
            GroupingArg::Ethnicity => Grouping::Ethnicity,
            GroupingArg::Combined => Grouping::Combined,
        }
    }
}

fn run_config(common: &Common, corpus: &CorpusArgs) -> icscore::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = Some(s);
    }
    if let Some(p) = &corpus.items {
        cfg.items = Some(p.clone());
    }
    if let Some(p) = &corpus.responses {
        cfg.responses = Some(p.clone());
    }
    if let Some(t) = common.spellcheck {
        cfg.train.spellcheck = matches!(t, Toggle::On);
    }
    if let Some(r) = common.resamples {
        cfg.train.resamples = r;
    }
    if common.condition_demographics {
        cfg.train.condition_demographics = true;
    }
    if let Some(v) = common.variant {
        cfg.train.variant = v.into();
    }
    if let Some(a) = common.ablation {
        cfg.train.input_ablation = a.into();
    }
    if common.variant.is_some() || common.ablation.is_some() {
        cfg.approaches = vec![Approach::new(cfg.train.variant, cfg.train.input_ablation)];
    }
    Ok(cfg)
}

fn run(cli: Cli) -> icscore::Result<()> {
    match cli.command {
        Command::Synth { common } => {
            let mut cfg = match &common.config {
                Some(p) => SynthConfig::load(p)?,
                None => SynthConfig::default(),
            };
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            let s = harness::cmd_synth(&cfg, &common.out)?;
            println!(
                "wrote {} items and {} responses ({} shared pairs) to {}",
                s.n_items,
                s.n_responses,
                s.shared_pairs,
                common.out.display()
            );
        }
        Command::Crossval {
            common,
            corpus,
            baseline_grid,
        } => {
            let mut cfg = run_config(&common, &corpus)?;
            cfg.baseline_grid |= baseline_grid;
            let report = harness::cmd_crossval(&cfg, &common.out, common.threads)?;
            print!("{}", report.summary_table());
        }
        Command::Train { common, corpus } => {
            let cfg = run_config(&common, &corpus)?;
            let (path, scorer) = harness::cmd_train(&cfg, &common.out)?;
            println!(
                "trained {} ({} parameters); checkpoint at {}",
                scorer.variant.name(),
                scorer.total_parameters(),
                path.display()
            );
        }
        Command::Score {
            common,
            checkpoint,
            responses,
            template,
        } => {
            let opts = ScoreOptions {
                resamples: common.resamples.unwrap_or(8),
                condition_demographics: common.condition_demographics,
                template,
            };
            let rows = harness::cmd_score(&checkpoint, &responses, &common.out, &opts)?;
            let fallbacks = rows.iter().filter(|r| r.conditioning_fallback).count();
            println!(
                "scored {} responses to {}",
                rows.len(),
                common.out.display()
            );
            if fallbacks > 0 {
                println!("{fallbacks} rows lacked demographics and were scored unconditioned");
            }
        }
        Command::Audit {
            predictions,
            items,
            responses,
            grouping,
            out,
        } => {
            let report =
                harness::cmd_audit(&predictions, &items, &responses, grouping.into(), &out)?;
            for (name, entry) in &report.approaches {
                println!(
                    "{name}: overall bias {:+.4} over {}",
                    entry.overall.overall_bias, entry.overall.overall_count
                );
                for g in &entry.overall.groups {
                    println!("  {:<24} {:>6} {:+.4}", g.group, g.count, g.bias);
                }
            }
            println!("wrote {}", display(&out));
        }
    }
    Ok(())
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
