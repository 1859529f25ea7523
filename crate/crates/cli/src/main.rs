//! Command-line front end: fuse, run, sweep, simulate, report.
//!
//! All results go to the declared paths; progress and summaries go to
//! standard error. Exit code is 0 on success and nonzero with a
//! diagnostic otherwise.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use recon_fusion::decision::LossTable;
use recon_fusion::evaluation::{
    build_confusion, probability_histogram, sweep_loss_params, AccuracyMode, ConfusionMatrix,
    SweepSpec,
};
use recon_fusion::evidence::{apply_overview_gate, BuildingCase};
use recon_fusion::fusion::{
    fuse_post_event, fuse_pre_event, CoverageModel, ProbabilitySequence,
};
use recon_fusion::io::{
    emit_evidence, emit_truths, parse_evidence, parse_outcomes, parse_truths, records_to_cases,
    write_bias_report, write_confusion, write_histograms, write_outcomes, write_sweep,
    write_visibility_ledger, EvidenceRecord, ReportFormat, TruthRecord,
};
use recon_fusion::pipeline::{
    run_post_event_stream, run_pre_event_stream, BuildingOutcome, PreEventLosses,
};
use recon_fusion::synth::{
    bias_report, generate_mission, BetaSpec, ImageCountSpec, ScoreModel, SynthConfig,
};
use recon_fusion::task::{Stream, TaskId};

#[derive(Parser)]
#[command(
    name = "recon-fusion",
    version,
    about = "Fuse per-image classifier scores into building-level decisions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse one building's scores for one task and print the fused probability
    Fuse(FuseArgs),
    /// Run both analysis streams; write outcomes and per-task confusion reports
    Run(RunArgs),
    /// Sweep loss parameters over an (alpha1, alpha2) grid and write per-cell metrics
    Sweep(SweepArgs),
    /// Generate a seeded synthetic mission as evidence/truth files
    Simulate(SimulateArgs),
    /// Rebuild confusion matrices and histograms from an outcomes file
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    /// CSV tables
    DelimitedTable,
    /// JSON documents
    Structured,
}

impl FormatArg {
    fn to_format(self) -> ReportFormat {
        match self {
            FormatArg::DelimitedTable => ReportFormat::DelimitedTable,
            FormatArg::Structured => ReportFormat::Structured,
        }
    }

    fn extension(self) -> &'static str {
        match self {
            FormatArg::DelimitedTable => "csv",
            FormatArg::Structured => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AccuracyModeArg {
    OverDecided,
    OverPermissible,
    Both,
}

/// Coverage and gating knobs shared by the post-event commands.
#[derive(Args)]
struct FusionOpts {
    /// Coverage probabilities q1,q2,...,tail (the last value is the tail)
    #[arg(long, default_value = "1")]
    coverage: ProbabilitySequence,
    /// Hidden-damage probabilities t1,t2,...,tail
    #[arg(long, default_value = "0.5")]
    theta: ProbabilitySequence,
    /// Overview-gate threshold
    #[arg(long, default_value_t = 0.5, value_parser = parse_unit_interval)]
    gate_threshold: f64,
}

impl FusionOpts {
    fn coverage_model(&self) -> CoverageModel {
        CoverageModel::new(self.coverage.clone(), self.theta.clone())
    }
}

#[derive(Args)]
struct FuseArgs {
    /// Evidence records file
    #[arg(long)]
    evidence: PathBuf,
    /// Building to fuse
    #[arg(long)]
    building: String,
    /// Task to fuse (damage, elevation, stories, material)
    #[arg(long, value_parser = parse_task)]
    task: TaskId,
    #[command(flatten)]
    fusion: FusionOpts,
}

#[derive(Args)]
struct RunArgs {
    /// Evidence records file
    #[arg(long)]
    evidence: PathBuf,
    /// Truth records file
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Abstention cost against a truly positive building
    #[arg(long, default_value_t = 0.3)]
    alpha1: f64,
    /// Abstention cost against a truly negative building
    #[arg(long, default_value_t = 0.3)]
    alpha2: f64,
    #[command(flatten)]
    fusion: FusionOpts,
    #[arg(long, value_enum, default_value_t = FormatArg::DelimitedTable)]
    format: FormatArg,
    #[arg(long, value_enum, default_value_t = AccuracyModeArg::Both)]
    accuracy_mode: AccuracyModeArg,
}

#[derive(Args)]
struct SweepArgs {
    /// Evidence records file
    #[arg(long)]
    evidence: PathBuf,
    /// Truth records file
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Output file
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated ascending alpha1 grid
    #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9", value_parser = parse_value_list)]
    alpha1: ValueList,
    /// Comma-separated ascending alpha2 grid
    #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9", value_parser = parse_value_list)]
    alpha2: ValueList,
    #[command(flatten)]
    fusion: FusionOpts,
    #[arg(long, value_enum, default_value_t = FormatArg::DelimitedTable)]
    format: FormatArg,
}

#[derive(Args)]
struct SimulateArgs {
    /// Output directory (evidence.csv, truth.csv, visibility.csv)
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    buildings: usize,
    /// Fraction of buildings with true major damage
    #[arg(long, default_value_t = 0.3, value_parser = parse_unit_interval)]
    md_prevalence: f64,
    #[arg(long, default_value_t = 1)]
    images_min: u32,
    #[arg(long, default_value_t = 6)]
    images_max: u32,
    /// Collector-bias cap on images of undamaged buildings
    #[arg(long)]
    nmd_images_max: Option<u32>,
    /// Probability an image of a damaged building shows the damage
    #[arg(long, default_value_t = 0.7, value_parser = parse_unit_interval)]
    damage_visibility: f64,
    /// Probability an image is non-overview quality
    #[arg(long, default_value_t = 0.2, value_parser = parse_unit_interval)]
    nov_rate: f64,
    /// Damage-score distribution for images showing damage, as mean,concentration
    #[arg(long, default_value = "0.92,14", value_parser = parse_beta_spec)]
    score_visible: BetaSpec,
    /// Damage-score distribution for images showing no damage
    #[arg(long, default_value = "0.12,14", value_parser = parse_beta_spec)]
    score_hidden: BetaSpec,
    /// Overview-score distribution for overview images
    #[arg(long, default_value = "0.85,10", value_parser = parse_beta_spec)]
    score_overview: BetaSpec,
    /// Overview-score distribution for non-overview images
    #[arg(long, default_value = "0.15,10", value_parser = parse_beta_spec)]
    score_nonoverview: BetaSpec,
}

#[derive(Args)]
struct ReportArgs {
    /// Outcomes file produced by `run` (delimited form)
    #[arg(long)]
    outcomes: PathBuf,
    /// Truth records file
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Histogram bin count
    #[arg(long, default_value = "10")]
    bins: NonZeroUsize,
    #[arg(long, value_enum, default_value_t = FormatArg::DelimitedTable)]
    format: FormatArg,
    #[arg(long, value_enum, default_value_t = AccuracyModeArg::Both)]
    accuracy_mode: AccuracyModeArg,
}

#[derive(Debug, Clone)]
struct ValueList(Vec<f64>);

fn parse_value_list(raw: &str) -> Result<ValueList, String> {
    raw.split(',')
        .map(|part| part.trim().parse::<f64>().map_err(|e| format!("{part:?}: {e}")))
        .collect::<Result<Vec<f64>, String>>()
        .map(ValueList)
}

fn parse_task(raw: &str) -> Result<TaskId, String> {
    TaskId::parse(raw).ok_or_else(|| {
        let names: Vec<&str> = TaskId::ALL.iter().map(|t| t.name()).collect();
        format!("unknown task {raw:?} (expected one of {})", names.join(", "))
    })
}

fn parse_unit_interval(raw: &str) -> Result<f64, String> {
    let value: f64 = raw.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(format!("{value} is outside [0, 1]"))
    }
}

fn parse_beta_spec(raw: &str) -> Result<BetaSpec, String> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 2 {
        return Err("expected mean,concentration".to_string());
    }
    let mean: f64 = parts[0].trim().parse().map_err(|e| format!("mean: {e}"))?;
    let concentration: f64 = parts[1].trim().parse().map_err(|e| format!("concentration: {e}"))?;
    BetaSpec::new(mean, concentration).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    match run_cli(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}

fn run_cli(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fuse(args) => cmd_fuse(args),
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn open_reader(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot open {}", path.display()))
}

fn create_writer(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("cannot create {}", path.display()))
}

fn load_cases(evidence: &Path, truth: Option<&Path>) -> Result<Vec<BuildingCase>> {
    let evidence_records = parse_evidence(open_reader(evidence)?)
        .with_context(|| format!("while parsing {}", evidence.display()))?;
    let truth_records = match truth {
        Some(path) => parse_truths(open_reader(path)?)
            .with_context(|| format!("while parsing {}", path.display()))?,
        None => Vec::new(),
    };
    records_to_cases(&evidence_records, &truth_records).context("while grouping records")
}

fn loss_table(alpha1: f64, alpha2: f64) -> Result<LossTable> {
    let loss = LossTable::new(alpha1, alpha2)?;
    for note in loss.validation_notes() {
        eprintln!("note: {note}");
    }
    Ok(loss)
}

fn cmd_fuse(args: FuseArgs) -> Result<()> {
    let cases = load_cases(&args.evidence, None)?;
    let case = cases
        .iter()
        .find(|c| c.building_id == args.building)
        .with_context(|| format!("building {} not found in evidence", args.building))?;
    let fused = match args.task.stream() {
        Stream::Gate => bail!("task {} is the gate, not a fusable attribute", args.task),
        Stream::PostEvent => {
            let (gated, _) = apply_overview_gate(case, args.fusion.gate_threshold);
            let scores = gated.scores_for(args.task);
            if scores.is_empty() {
                bail!("no gated {} scores for building {}", args.task, args.building);
            }
            fuse_post_event(&scores, &args.fusion.coverage_model())?
        }
        Stream::PreEvent => {
            let scores = case.scores_for(args.task);
            if scores.is_empty() {
                bail!("no {} scores for building {}", args.task, args.building);
            }
            fuse_pre_event(&scores)?
        }
    };
    println!("{fused:.6}");
    Ok(())
}

fn accuracy_summary(matrix: &ConfusionMatrix, mode: AccuracyModeArg) -> String {
    let fmt = |value: Result<f64, _>| match value {
        Ok(v) => format!("{v:.6}"),
        Err(_) => "nan".to_string(),
    };
    let nd = fmt(matrix.nd_rate());
    match mode {
        AccuracyModeArg::OverDecided => format!(
            "accuracy(over_decided)={} nd_rate={nd}",
            fmt(matrix.accuracy(AccuracyMode::OverDecided))
        ),
        AccuracyModeArg::OverPermissible => format!(
            "accuracy(over_permissible)={} nd_rate={nd}",
            fmt(matrix.accuracy(AccuracyMode::OverPermissible))
        ),
        AccuracyModeArg::Both => format!(
            "accuracy(over_decided)={} accuracy(over_permissible)={} nd_rate={nd}",
            fmt(matrix.accuracy(AccuracyMode::OverDecided)),
            fmt(matrix.accuracy(AccuracyMode::OverPermissible))
        ),
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let cases = load_cases(&args.evidence, args.truth.as_deref())?;
    let loss = loss_table(args.alpha1, args.alpha2)?;
    let coverage = args.fusion.coverage_model();

    let mut outcomes = run_post_event_stream(&cases, &coverage, &loss, args.fusion.gate_threshold)?;
    outcomes.extend(run_pre_event_stream(&cases, &PreEventLosses::uniform(loss))?);
    outcomes.sort_by(|a, b| (&a.building_id, a.task).cmp(&(&b.building_id, b.task)));

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let format = args.format.to_format();
    let ext = args.format.extension();

    let outcomes_path = args.out.join(format!("outcomes.{ext}"));
    write_outcomes(&outcomes, format, create_writer(&outcomes_path)?)?;

    for task in [TaskId::Damage, TaskId::Elevation, TaskId::Stories, TaskId::Material] {
        let matrix = build_confusion(&outcomes, &cases, task);
        let path = args.out.join(format!("confusion_{task}.{ext}"));
        write_confusion(&matrix, task, format, create_writer(&path)?)?;
        eprintln!("{task}: {}", accuracy_summary(&matrix, args.accuracy_mode));
    }
    eprintln!("wrote outcomes and confusion reports to {}", args.out.display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let cases = load_cases(&args.evidence, args.truth.as_deref())?;
    let spec = SweepSpec::new(args.alpha1.0.clone(), args.alpha2.0.clone())?;
    let grid = sweep_loss_params(&cases, &args.fusion.coverage_model(), args.fusion.gate_threshold, &spec)?;
    write_sweep(&grid, args.format.to_format(), create_writer(&args.out)?)?;
    eprintln!(
        "wrote {} sweep cells to {}",
        grid.cells.len(),
        args.out.display()
    );
    Ok(())
}

fn mission_to_records(cases: &[BuildingCase]) -> (Vec<EvidenceRecord>, Vec<TruthRecord>) {
    let mut evidence = Vec::new();
    let mut truths = Vec::new();
    for case in cases {
        for image in &case.images {
            for (&task, &p_positive) in &image.scores {
                evidence.push(EvidenceRecord {
                    building_id: case.building_id.clone(),
                    image_id: image.image_id.clone(),
                    task,
                    p_positive,
                });
            }
        }
        for (&task, &label) in &case.truth {
            truths.push(TruthRecord { building_id: case.building_id.clone(), task, label });
        }
    }
    (evidence, truths)
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut images_per_building = ImageCountSpec::uniform(args.images_min, args.images_max);
    if let Some(cap) = args.nmd_images_max {
        images_per_building = images_per_building.with_negative_cap(cap);
    }
    let config = SynthConfig {
        seed: args.seed,
        n_buildings: args.buildings,
        md_prevalence: args.md_prevalence,
        images_per_building,
        damage_visibility: args.damage_visibility,
        score_model: ScoreModel {
            damage_visible: args.score_visible,
            damage_hidden: args.score_hidden,
            overview: args.score_overview,
            non_overview: args.score_nonoverview,
        },
        nov_rate: args.nov_rate,
    };
    let mission = generate_mission(&config)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let (evidence, truths) = mission_to_records(&mission.cases);
    emit_evidence(&evidence, create_writer(&args.out.join("evidence.csv"))?)?;
    emit_truths(&truths, create_writer(&args.out.join("truth.csv"))?)?;
    write_visibility_ledger(&mission.visibility, create_writer(&args.out.join("visibility.csv"))?)?;

    let report = bias_report(&mission.cases, TaskId::Damage);
    write_bias_report(
        &report,
        ReportFormat::DelimitedTable,
        create_writer(&args.out.join("bias.csv"))?,
    )?;
    eprint!("{report}");
    eprintln!(
        "wrote {} evidence rows for {} buildings to {}",
        evidence.len(),
        mission.cases.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let outcomes: Vec<BuildingOutcome> = parse_outcomes(open_reader(&args.outcomes)?)
        .with_context(|| format!("while parsing {}", args.outcomes.display()))?;
    let truth_records = match args.truth.as_deref() {
        Some(path) => parse_truths(open_reader(path)?)
            .with_context(|| format!("while parsing {}", path.display()))?,
        None => Vec::new(),
    };
    let cases = records_to_cases(&[], &truth_records).context("while grouping truth records")?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let format = args.format.to_format();
    let ext = args.format.extension();

    let mut tasks: Vec<TaskId> = outcomes.iter().map(|o| o.task).collect();
    tasks.sort();
    tasks.dedup();
    if tasks.is_empty() {
        eprintln!("no outcomes found; nothing to report");
        return Ok(());
    }
    for task in tasks {
        let matrix = build_confusion(&outcomes, &cases, task);
        write_confusion(
            &matrix,
            task,
            format,
            create_writer(&args.out.join(format!("confusion_{task}.{ext}")))?,
        )?;
        let histograms = probability_histogram(&outcomes, &cases, task, args.bins);
        write_histograms(
            &histograms,
            task,
            format,
            create_writer(&args.out.join(format!("histogram_{task}.{ext}")))?,
        )?;
        eprintln!("{task}: {}", accuracy_summary(&matrix, args.accuracy_mode));
    }
    eprintln!("wrote reports to {}", args.out.display());
    Ok(())
}
