//! Command-line front end: oracle construction, protocol evaluation,
//! synthetic fixtures, document validation, and proposal statistics.
//!
//! Exit codes: 0 success, 1 validation failure, 2 I/O or format error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use deteval::{
    accumulate, detections_to_docs, evaluate_detections, load_detections_from_path, oracle_select,
    per_category_ap, render_summary, summarize, Dataset, DetectionDoc, Error, EvalParams,
    GtDocument, ProposalDoc, ProposalSet, ProposalStats, SummaryTable, SynthConfig, Task,
};

#[derive(Parser)]
#[command(
    name = "deteval",
    version,
    about = "Oracle proposal detectors and COCO-protocol detection evaluation"
)]
struct Cli {
    /// Worker threads for the parallel stages (0 = automatic). Output is
    /// identical for any worker count.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the oracle detection set: best-overlap proposal per annotated
    /// object, constant score 1.
    Oracle {
        /// Ground-truth annotation document
        #[arg(long)]
        gt: PathBuf,
        /// Class-agnostic proposals document
        #[arg(long)]
        proposals: PathBuf,
        /// Geometry to select on: box or mask
        #[arg(long)]
        task: Task,
        /// Where to write the results document
        #[arg(long)]
        out: PathBuf,
        /// Do not treat crowd annotations as oracle targets
        #[arg(long)]
        skip_crowd: bool,
        /// Truncate each image's proposal list before selection
        #[arg(long)]
        max_proposals: Option<usize>,
    },
    /// Evaluate a results document and print the 12-line summary.
    Evaluate {
        #[arg(long)]
        gt: PathBuf,
        /// Detection results document
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        task: Task,
        /// Also write a machine-readable summary here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a deterministic synthetic fixture (ground truth + proposals).
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        images: u32,
        /// Objects per image, each in its own category
        #[arg(long, default_value_t = 3)]
        objects: u32,
        /// Relative jitter of the perturbed proposal copies; 0 keeps exact
        /// copies only
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        /// Directory for ground_truth.json and proposals.json
        #[arg(long)]
        out: PathBuf,
    },
    /// Check documents against the structural invariants and list violations.
    Validate {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(long)]
        proposals: Option<PathBuf>,
    },
    /// Report per-image proposal counts.
    Stats {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        proposals: PathBuf,
        #[arg(long)]
        max_proposals: Option<usize>,
        /// Also write the counts as JSON here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> ExitCode {
    match e {
        Error::Referential(_) | Error::Validation(_) | Error::Dimension(_) => ExitCode::from(1),
        _ => ExitCode::from(2),
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    if cli.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build()
            .expect("thread pool");
        pool.install(|| dispatch(cli.command))
    } else {
        dispatch(cli.command)
    }
}

fn dispatch(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Oracle {
            gt,
            proposals,
            task,
            out,
            skip_crowd,
            max_proposals,
        } => cmd_oracle(&gt, &proposals, task, &out, skip_crowd, max_proposals),
        Command::Evaluate {
            gt,
            results,
            task,
            out,
        } => cmd_evaluate(&gt, &results, task, out.as_deref()),
        Command::Synth {
            seed,
            images,
            objects,
            jitter,
            out,
        } => cmd_synth(seed, images, objects, jitter, &out),
        Command::Validate {
            gt,
            results,
            proposals,
        } => cmd_validate(&gt, results.as_deref(), proposals.as_deref()),
        Command::Stats {
            gt,
            proposals,
            max_proposals,
            out,
        } => cmd_stats(&gt, &proposals, max_proposals, out.as_deref()),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let json = serde_json::to_string(value).expect("serializable value");
    std::fs::write(path, json).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn load_dataset(path: &Path) -> Result<Dataset, Error> {
    let ds = Dataset::from_path(path)?;
    for w in ds.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(ds)
}

fn load_proposal_set(
    path: &Path,
    dataset: &Dataset,
    max_proposals: Option<usize>,
) -> Result<ProposalSet, Error> {
    let docs: Vec<ProposalDoc> = read_json(path)?;
    let mut set = ProposalSet::from_docs(&docs, dataset)?;
    if let Some(n) = max_proposals {
        set.truncate_per_image(n);
    }
    Ok(set)
}

fn print_stats(stats: &ProposalStats) {
    println!("proposal statistics:");
    println!("  images with proposals: {}", stats.image_count);
    println!("  total proposals:       {}", stats.total);
    println!("  mean per image:        {:.3}", stats.mean_per_image);
    println!("  min per image:         {}", stats.min);
    println!("  max per image:         {}", stats.max);
}

fn cmd_oracle(
    gt: &Path,
    proposals: &Path,
    task: Task,
    out: &Path,
    skip_crowd: bool,
    max_proposals: Option<usize>,
) -> Result<ExitCode, Error> {
    let dataset = load_dataset(gt)?;
    let set = load_proposal_set(proposals, &dataset, max_proposals)?;
    print_stats(&set.stats());
    let detections = oracle_select(&dataset, &set, task, skip_crowd)?;
    write_json(out, &detections_to_docs(&detections))?;
    println!("oracle detections:     {}", detections.len());
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct MetricRow {
    metric: &'static str,
    iou: String,
    area: String,
    max_dets: usize,
    value: f64,
}

#[derive(Serialize)]
struct CategoryAp {
    category_id: i64,
    name: String,
    ap: f64,
}

#[derive(Serialize)]
struct MachineSummary {
    task: String,
    metrics: Vec<MetricRow>,
    per_category_ap: Vec<CategoryAp>,
}

fn machine_summary(
    table: &SummaryTable,
    dataset: &Dataset,
    params: &EvalParams,
    accum: &deteval::EvalAccum,
) -> MachineSummary {
    MachineSummary {
        task: params.task.to_string(),
        metrics: table
            .entries
            .iter()
            .map(|e| MetricRow {
                metric: e.kind.short(),
                iou: e.iou_label.clone(),
                area: e.area_label.clone(),
                max_dets: e.max_dets,
                value: e.value,
            })
            .collect(),
        per_category_ap: per_category_ap(accum, params)
            .into_iter()
            .map(|(category_id, ap)| CategoryAp {
                category_id,
                name: dataset
                    .category(category_id)
                    .map(|c| c.name.clone())
                    .unwrap_or_default(),
                ap,
            })
            .collect(),
    }
}

fn cmd_evaluate(
    gt: &Path,
    results: &Path,
    task: Task,
    out: Option<&Path>,
) -> Result<ExitCode, Error> {
    let dataset = load_dataset(gt)?;
    let detections = load_detections_from_path(results, &dataset, task)?;
    let params = EvalParams::new(task, &dataset);
    let grid = evaluate_detections(&dataset, &detections, &params)?;
    let accum = accumulate(&grid, &params);
    let table = summarize(&accum, &params);
    print!("{}", render_summary(&table));
    if let Some(path) = out {
        write_json(path, &machine_summary(&table, &dataset, &params, &accum))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth(
    seed: u64,
    images: u32,
    objects: u32,
    jitter: f64,
    out: &Path,
) -> Result<ExitCode, Error> {
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.display().to_string(),
        source: e,
    })?;
    let fixture = deteval::generate(&SynthConfig {
        seed,
        images,
        objects_per_image: objects,
        jitter,
    });
    let gt_path = out.join("ground_truth.json");
    let props_path = out.join("proposals.json");
    write_json(&gt_path, &fixture.ground_truth)?;
    write_json(&props_path, &fixture.proposals)?;
    println!("wrote {}", gt_path.display());
    println!("wrote {}", props_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(
    gt: &Path,
    results: Option<&Path>,
    proposals: Option<&Path>,
) -> Result<ExitCode, Error> {
    let gt_doc: GtDocument = read_json(gt)?;
    let (mut violations, warnings) = deteval::model::validate_gt_document(&gt_doc);
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    if violations.is_empty() {
        let dataset = Dataset::from_document(gt_doc)?;
        if let Some(path) = results {
            let docs: Vec<DetectionDoc> = read_json(path)?;
            violations.extend(deteval::model::validate_detection_docs(&docs, &dataset));
        }
        if let Some(path) = proposals {
            let docs: Vec<ProposalDoc> = read_json(path)?;
            violations.extend(deteval::model::validate_proposal_docs(&docs, &dataset));
        }
    } else if results.is_some() || proposals.is_some() {
        eprintln!("note: ground truth has violations; dependent documents not checked");
    }

    for v in &violations {
        println!("violation: {v}");
    }
    let n = violations.len();
    println!("{n} violation{}", if n == 1 { "" } else { "s" });
    Ok(if n == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_stats(
    gt: &Path,
    proposals: &Path,
    max_proposals: Option<usize>,
    out: Option<&Path>,
) -> Result<ExitCode, Error> {
    let dataset = load_dataset(gt)?;
    let set = load_proposal_set(proposals, &dataset, max_proposals)?;
    let stats = set.stats();
    print_stats(&stats);
    if let Some(path) = out {
        write_json(path, &stats)?;
    }
    Ok(ExitCode::SUCCESS)
}
