use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use merge_ted::diagram::{bottleneck, diagram_of, wasserstein1};
use merge_ted::field::{
    decode_grid_binary, gen_gaussian_sum, parse_graph_text, parse_grid_text, save_grid,
    smooth_laplacian, subsample, subsample_schedule,
};
use merge_ted::matrix::{detect_period, distance_matrix};
use merge_ted::mergetree::{deserialize, extract_subtrees, serialize, simplify};
use merge_ted::oracle::brute_force_dc;
use merge_ted::synth::{six_blob_field, two_gaussian_field, PeriodicSequence};
use merge_ted::ted::{ted, LabeledTree};
use merge_ted::{
    CostModel, DistanceMatrix, GaussianSpec, GridFormat, MergeTree, Orientation, ScalarGrid,
    StabilizationConfig,
};

#[derive(Parser, Debug)]
#[command(
    name = "merge-ted",
    version,
    about = "Merge trees and tree edit distances between them"
)]
struct Cli {
    #[command(flatten)]
    run: RunConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct RunConfig {
    /// Merge tree orientation.
    #[arg(long = "tree", global = true, default_value = "split")]
    orientation: Orientation,
    #[arg(long, global = true, default_value = "winf")]
    cost: CostModel,
    /// Stabilization threshold as a fraction of maximum persistence.
    #[arg(long, global = true, default_value_t = 0.0, value_parser = fraction)]
    eps: f64,
    /// Fixed cost added to a distance when stabilization merged any saddle.
    #[arg(long, global = true)]
    stab_cost: Option<f64>,
    /// Persistence simplification threshold, as a fraction.
    #[arg(long, global = true, value_parser = fraction)]
    simplify: Option<f64>,
    #[arg(long, global = true, env = "MERGE_TED_THREADS",
          value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// Output path; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

fn fraction(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not in [0, 1]"))
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    #[command(subcommand)]
    Tree(TreeCmd),
    #[command(subcommand)]
    Dist(DistCmd),
    /// Lag-mean period detection on a distance matrix CSV.
    Periodicity { matrix: PathBuf },
    /// Distance matrix between the subtrees cut from one tree.
    Symmetry {
        input: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        min_persistence: f64,
        #[arg(long, default_value_t = f64::NEG_INFINITY, allow_hyphen_values = true)]
        min_scalar: f64,
    },
    #[command(subcommand)]
    Gen(GenCmd),
    #[command(subcommand)]
    Field(FieldCmd),
    #[command(subcommand)]
    Diag(DiagCmd),
    /// Brute-force distance between two small trees.
    #[command(hide = true)]
    Oracle { first: PathBuf, second: PathBuf },
}

#[derive(Subcommand, Debug)]
enum TreeCmd {
    /// Build a merge tree from a grid or graph file.
    Build { input: PathBuf },
}

#[derive(Subcommand, Debug)]
enum DistCmd {
    /// Tree edit, 1-Wasserstein and bottleneck distances between two inputs.
    Pair {
        first: PathBuf,
        second: PathBuf,
        #[arg(long)]
        emit_mapping: bool,
    },
    /// All-pairs tree edit distance matrix as CSV.
    Matrix {
        #[arg(required = true, num_args = 2..)]
        inputs: Vec<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum GenCmd {
    /// Sum of gaussians; each spec is `c1,..,cn,amplitude,sigma`.
    Gaussians {
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long = "spec", allow_hyphen_values = true)]
        specs: Vec<String>,
    },
    /// Frames of translating gaussians repeating with a fixed period.
    Periodic {
        #[arg(long, default_value_t = 60)]
        frames: usize,
        #[arg(long, default_value_t = 20)]
        period: usize,
    },
    /// Six blobs, the last two with amplitude raised by `perturb`.
    Blobs {
        #[arg(long, default_value_t = 0.1)]
        perturb: f64,
    },
    /// Two gaussians on a square grid.
    TwoGaussians {
        #[arg(long, default_value_t = 150)]
        size: usize,
    },
}

#[derive(Subcommand, Debug)]
enum FieldCmd {
    /// Keep every `step`-th sample, or run a removal schedule into a directory.
    Subsample {
        input: PathBuf,
        #[arg(long, conflicts_with_all = ["remove", "iterations"])]
        step: Option<usize>,
        #[arg(long, requires = "iterations")]
        remove: Option<usize>,
        #[arg(long, requires = "remove")]
        iterations: Option<usize>,
    },
    Smooth {
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        iters: usize,
    },
}

#[derive(Subcommand, Debug)]
enum DiagCmd {
    /// Persistence diagram as `birth,death` CSV.
    Export { input: PathBuf },
}

impl RunConfig {
    fn stabilization(&self) -> Result<StabilizationConfig> {
        Ok(StabilizationConfig::new(
            self.eps,
            self.stab_cost.is_some(),
            self.stab_cost.unwrap_or(0.0),
        )?)
    }

    fn threads(&self) -> usize {
        self.threads
            .map(|t| t as usize)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn out_path(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| anyhow!("--out is required for this command"))
    }
}

fn grid_format(path: &Path) -> GridFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => GridFormat::Binary,
        _ => GridFormat::Text,
    }
}

enum Input {
    Grid(ScalarGrid),
    Graph(merge_ted::ScalarGraph),
    Tree(MergeTree),
}

/// Sniffs the file content: tree text, graph text, grid text, else binary grid.
fn read_input(path: &Path) -> Result<Input> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let ctx = || format!("parsing {}", path.display());
    let text = std::str::from_utf8(&bytes).ok();
    let first = text.and_then(|t| t.split_whitespace().next()).unwrap_or("");
    Ok(match (text, first) {
        (Some(t), "mergetree") => Input::Tree(deserialize(t).with_context(ctx)?),
        (Some(t), "vertices") => Input::Graph(parse_graph_text(t).with_context(ctx)?),
        (Some(t), "dims") => Input::Grid(parse_grid_text(t).with_context(ctx)?),
        _ => Input::Grid(decode_grid_binary(&bytes).with_context(ctx)?),
    })
}

fn read_grid(path: &Path) -> Result<ScalarGrid> {
    match read_input(path)? {
        Input::Grid(g) => Ok(g),
        _ => bail!("{} is not a grid", path.display()),
    }
}

/// Loads a stored tree as is, or builds one from a field with the configured
/// orientation. Simplification applies in both cases.
fn load_tree(path: &Path, cfg: &RunConfig) -> Result<MergeTree> {
    let tree = match read_input(path)? {
        Input::Tree(t) => t,
        Input::Grid(g) => MergeTree::from_grid(&g, cfg.orientation)?,
        Input::Graph(g) => MergeTree::from_graph(&g, cfg.orientation)?,
    };
    match cfg.simplify {
        Some(s) => Ok(simplify(&tree, s)?),
        None => Ok(tree),
    }
}

fn label_of(path: &Path) -> String {
    path.file_stem().map_or_else(
        || path.display().to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

fn write_frames(dir: &Path, stem: &str, grids: &[ScalarGrid]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let width = grids.len().saturating_sub(1).to_string().len().max(2);
    for (k, g) in grids.iter().enumerate() {
        let p = dir.join(format!("{stem}_{k:0width$}.txt"));
        save_grid(g, &p, GridFormat::Text)?;
    }
    println!("wrote {} grids to {}", grids.len(), dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = &cli.run;
    match cli.command {
        Command::Tree(TreeCmd::Build { input }) => {
            let tree = load_tree(&input, cfg)?;
            cfg.emit(&serialize(&tree))?;
            let summary = format!(
                "nodes {} max_persistence {}",
                tree.len(),
                tree.max_persistence()
            );
            if cfg.out.is_some() {
                println!("{summary}");
            } else {
                eprintln!("{summary}");
            }
        }
        Command::Dist(DistCmd::Pair {
            first,
            second,
            emit_mapping,
        }) => {
            let (a, b) = (load_tree(&first, cfg)?, load_tree(&second, cfg)?);
            let r = ted(&a, &b, cfg.cost, &cfg.stabilization()?)?;
            let (pa, pb) = (diagram_of(&a)?, diagram_of(&b)?);
            println!("D {}", r.distance);
            println!("W1 {}", wasserstein1(&pa, &pb));
            println!("DB {}", bottleneck(&pa, &pb));
            if r.stabilization_surcharge > 0.0 {
                println!("stabilization_surcharge {}", r.stabilization_surcharge);
            }
            if emit_mapping {
                let json = r.mapping_json() + "\n";
                match &cfg.out {
                    Some(p) => {
                        fs::write(p, json).with_context(|| format!("writing {}", p.display()))?
                    }
                    None => print!("{json}"),
                }
            }
        }
        Command::Dist(DistCmd::Matrix { inputs }) => {
            let trees = inputs
                .iter()
                .map(|p| load_tree(p, cfg).with_context(|| format!("loading {}", p.display())))
                .collect::<Result<Vec<_>>>()?;
            let labels = inputs.iter().map(|p| label_of(p)).collect();
            let m = distance_matrix(
                labels,
                &trees,
                cfg.cost,
                &cfg.stabilization()?,
                cfg.threads(),
            )?;
            cfg.emit(&m.to_csv())?;
        }
        Command::Periodicity { matrix } => {
            let text = fs::read_to_string(&matrix)
                .with_context(|| format!("reading {}", matrix.display()))?;
            let m = DistanceMatrix::from_csv(&text)
                .with_context(|| format!("parsing {}", matrix.display()))?;
            let r = detect_period(&m)?;
            let mut out = String::new();
            match r.period {
                Some(p) => out.push_str(&format!("period {p}\n")),
                None => out.push_str("period none\n"),
            }
            let minima: Vec<String> = r.local_minima.iter().map(|l| l.to_string()).collect();
            out.push_str(&format!("local_minima {}\n", minima.join(",")));
            out.push_str("lag,mean\n");
            for (lag, mean) in &r.lag_means {
                out.push_str(&format!("{lag},{mean}\n"));
            }
            cfg.emit(&out)?;
        }
        Command::Symmetry {
            input,
            min_persistence,
            min_scalar,
        } => {
            let tree = load_tree(&input, cfg)?;
            let subs = extract_subtrees(&tree, min_persistence, min_scalar)?;
            if subs.len() < 2 {
                bail!(
                    "only {} subtrees pass the thresholds, need at least 2",
                    subs.len()
                );
            }
            // Attachment nodes can be shared, so label by the component top.
            let labels = subs
                .iter()
                .map(|t| t.node(t.root()).unwrap().children[0].to_string())
                .collect();
            let m = distance_matrix(
                labels,
                &subs,
                cfg.cost,
                &cfg.stabilization()?,
                cfg.threads(),
            )?;
            cfg.emit(&m.to_csv())?;
        }
        Command::Gen(cmd) => run_gen(cmd, cfg)?,
        Command::Field(cmd) => run_field(cmd, cfg)?,
        Command::Diag(DiagCmd::Export { input }) => {
            let tree = load_tree(&input, cfg)?;
            cfg.emit(&diagram_of(&tree)?.to_csv())?;
        }
        Command::Oracle { first, second } => {
            let a = LabeledTree::from_merge_tree(&load_tree(&first, cfg)?)?;
            let b = LabeledTree::from_merge_tree(&load_tree(&second, cfg)?)?;
            let r = brute_force_dc(&a, &b, cfg.cost)?;
            println!("distance {}", r.distance);
            println!("mappings_enumerated {}", r.mappings_enumerated);
            println!("{}", serde_json::to_string(&r.witness)?);
        }
    }
    Ok(())
}

fn run_gen(cmd: GenCmd, cfg: &RunConfig) -> Result<()> {
    match cmd {
        GenCmd::Gaussians { dims, specs } => {
            let parsed = specs
                .iter()
                .map(|s| {
                    let nums = s
                        .split(',')
                        .map(|x| x.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .with_context(|| format!("bad gaussian spec '{s}'"))?;
                    if nums.len() != dims.len() + 2 {
                        bail!("spec '{s}' needs {} numbers", dims.len() + 2);
                    }
                    let (center, rest) = nums.split_at(dims.len());
                    Ok(GaussianSpec::new(center.to_vec(), rest[0], rest[1])?)
                })
                .collect::<Result<Vec<_>>>()?;
            let grid = gen_gaussian_sum(&dims, &parsed)?;
            let out = cfg.out_path()?;
            save_grid(&grid, out, grid_format(out))?;
        }
        GenCmd::Periodic { frames, period } => {
            let seq = PeriodicSequence {
                frames,
                period,
                ..Default::default()
            };
            write_frames(cfg.out_path()?, "frame", &seq.generate()?)?;
        }
        GenCmd::Blobs { perturb } => {
            let out = cfg.out_path()?;
            save_grid(&six_blob_field(perturb).0, out, grid_format(out))?;
        }
        GenCmd::TwoGaussians { size } => {
            if size < 2 {
                bail!("size must be at least 2");
            }
            let out = cfg.out_path()?;
            save_grid(&two_gaussian_field(size), out, grid_format(out))?;
        }
    }
    Ok(())
}

fn run_field(cmd: FieldCmd, cfg: &RunConfig) -> Result<()> {
    match cmd {
        FieldCmd::Subsample {
            input,
            step,
            remove,
            iterations,
        } => {
            let grid = read_grid(&input)?;
            match (step, remove, iterations) {
                (Some(step), _, _) => {
                    let out = cfg.out_path()?;
                    save_grid(&subsample(&grid, step)?, out, grid_format(out))?;
                }
                (None, Some(r), Some(n)) => {
                    let grids = subsample_schedule(&grid, r, n)?;
                    write_frames(cfg.out_path()?, &label_of(&input), &grids)?;
                }
                _ => bail!("give either --step or both --remove and --iterations"),
            }
        }
        FieldCmd::Smooth { input, iters } => {
            let grid = read_grid(&input)?;
            let out = cfg.out_path()?;
            save_grid(&smooth_laplacian(&grid, iters), out, grid_format(out))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
