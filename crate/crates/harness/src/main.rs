//! Command-line front end: graph/tree/path generation, metric utilities,
//! named experiments and the self-test suite.
//!
//! Exit codes: 0 success, 1 criterion or self-test failure, 2 usage or I/O
//! errors.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use critgraph::graphgen::sample_nr_graph;
use critgraph::icrt::{sample_icrt, ThetaSequence};
use critgraph::levy::{build_levy_path, excursions, reflect};
use critgraph::metric::{dim_estimate, gh_exact, MeasuredMetricSpace};
use critgraph::ptree::{sample_ordered_ptree, sample_tilted_ptree, TiltedMode};
use critgraph::rng::rng_from_seed;
use critgraph::weights::{entrance_boundary, nr_to_mc_params, power_law_weights};
use critgraph_harness::{find_experiment, registry, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "critgraph",
    about = "Critical inhomogeneous random graphs and their continuum limits",
    version
)]
struct Cli {
    /// Master seed; every replica derives its own generator from it.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Worker threads (0 = automatic).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Output directory for experiment artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 3.5)]
    tau: f64,
    /// Weight floor; "critical" selects the value with unit mean forward
    /// degree.
    #[arg(long, default_value = "critical")]
    iota: String,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
}

impl ModelArgs {
    fn iota_value(&self) -> anyhow::Result<f64> {
        if self.iota == "critical" {
            Ok(critgraph::weights::critical_iota(self.tau))
        } else {
            Ok(self.iota.parse()?)
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample a rank-one random graph and write its edge list.
    GenGraph {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out_file: PathBuf,
    },
    /// Run the size-biased breadth-first exploration and dump the walk.
    Explore {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out_file: PathBuf,
    },
    /// Sample a (tilted) ordered p-tree on a uniform pmf.
    Ptree {
        #[arg(long, default_value_t = 10)]
        m: usize,
        #[arg(long, default_value_t = 0.0)]
        a: f64,
        /// plain | exact | rejection
        #[arg(long, default_value = "plain")]
        mode: String,
        #[arg(long)]
        out_file: Option<PathBuf>,
    },
    /// Stick-breaking continuum-tree approximation; writes the segment CSV.
    Icrt {
        #[arg(long, default_value_t = 64)]
        hubs: usize,
        #[arg(long, default_value_t = 3.5)]
        tau: f64,
        #[arg(long, default_value_t = 0.6)]
        alpha: f64,
        #[arg(long, default_value_t = 10.0)]
        horizon: f64,
        #[arg(long)]
        out_file: PathBuf,
    },
    /// Jump-drift limit path: event CSV plus excursion CSV.
    Levy {
        #[arg(long, default_value_t = 3.5)]
        tau: f64,
        #[arg(long, default_value_t = 0.6)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, default_value_t = 10_000)]
        terms: usize,
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
        #[arg(long)]
        out_path: PathBuf,
        #[arg(long)]
        out_excursions: PathBuf,
    },
    /// Metric utilities over space CSV files.
    Metric {
        #[command(subcommand)]
        action: MetricAction,
    },
    /// Run a named experiment (or one configured in a file).
    Experiment {
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// List available experiments and exit.
        #[arg(long, default_value_t = false)]
        list: bool,
    },
    /// Run the fast closed-form check suite.
    Selftest,
}

#[derive(Subcommand)]
enum MetricAction {
    /// Exact Gromov-Hausdorff distance between two tiny spaces.
    Gh {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Box-counting dimension estimate over a comma-separated radius grid.
    Dim {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        deltas: String,
    },
}

fn read_space(path: &PathBuf) -> anyhow::Result<MeasuredMetricSpace> {
    let f = File::open(path)
        .map_err(|e| anyhow::anyhow!("cannot open {}: {e}", path.display()))?;
    Ok(MeasuredMetricSpace::read_csv(BufReader::new(f))?)
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .ok();
    }
    match cli.command {
        Command::GenGraph { model, out_file } => {
            let w = power_law_weights(model.n, model.tau, model.iota_value()?)?;
            let mut rng = rng_from_seed(cli.seed);
            let g = sample_nr_graph(&w, model.lambda, model.tau, &mut rng)?;
            let mut out = BufWriter::new(File::create(&out_file)?);
            g.write_edge_list(&mut out)?;
            out.flush()?;
            println!(
                "wrote {} vertices / {} edges to {}",
                g.n,
                g.edges.len(),
                out_file.display()
            );
            Ok(0)
        }
        Command::Explore { model, out_file } => {
            let w = power_law_weights(model.n, model.tau, model.iota_value()?)?;
            let (x, t) = nr_to_mc_params(&w, model.lambda, model.tau)?;
            let mut rng = rng_from_seed(cli.seed);
            let (trace, comps) = critgraph::exploration::explore(&x, t, &mut rng)?;
            let mut out = BufWriter::new(File::create(&out_file)?);
            trace.write_csv(&mut out)?;
            out.flush()?;
            println!(
                "explored {} components; largest mass {:.6}; walk written to {}",
                comps.len(),
                comps[0].mass,
                out_file.display()
            );
            Ok(0)
        }
        Command::Ptree { m, a, mode, out_file } => {
            let p = vec![1.0 / m as f64; m];
            let mut rng = rng_from_seed(cli.seed);
            let tree = match mode.as_str() {
                "plain" => sample_ordered_ptree(&p, &mut rng)?,
                "exact" => sample_tilted_ptree(&p, a, TiltedMode::ExactEnum, &mut rng)?,
                "rejection" => sample_tilted_ptree(&p, a, TiltedMode::Rejection, &mut rng)?,
                other => anyhow::bail!("unknown mode `{other}` (plain|exact|rejection)"),
            };
            match out_file {
                Some(path) => {
                    let mut out = BufWriter::new(File::create(&path)?);
                    tree.write_text(&mut out)?;
                    out.flush()?;
                    println!("tree written to {}", path.display());
                }
                None => {
                    let mut buf = Vec::new();
                    tree.write_text(&mut buf)?;
                    print!("{}", String::from_utf8_lossy(&buf));
                }
            }
            Ok(0)
        }
        Command::Icrt {
            hubs,
            tau,
            alpha,
            horizon,
            out_file,
        } => {
            let theta =
                ThetaSequence::from_entrance(&entrance_boundary(alpha, tau, hubs)?, hubs)?;
            let tree = sample_icrt(&theta, horizon, cli.seed)?;
            let mut out = BufWriter::new(File::create(&out_file)?);
            tree.write_segments_csv(&mut out)?;
            out.flush()?;
            println!(
                "{} segments, {} cutpoints written to {}",
                tree.segments.len(),
                tree.n_cutpoints(),
                out_file.display()
            );
            Ok(0)
        }
        Command::Levy {
            tau,
            alpha,
            lambda,
            terms,
            horizon,
            out_path,
            out_excursions,
        } => {
            let c = entrance_boundary(alpha, tau, terms)?;
            let mut rng = rng_from_seed(cli.seed);
            let path = build_levy_path(&c, lambda, horizon, &mut rng)?;
            let set = excursions(&reflect(&path));
            let mut out = BufWriter::new(File::create(&out_path)?);
            path.write_events_csv(&mut out)?;
            out.flush()?;
            let mut out = BufWriter::new(File::create(&out_excursions)?);
            set.write_csv(&mut out)?;
            out.flush()?;
            println!(
                "{} jumps, {} excursions ({} complete)",
                path.jumps.len(),
                set.excursions.len(),
                set.complete().count()
            );
            Ok(0)
        }
        Command::Metric { action } => match action {
            MetricAction::Gh { a, b } => {
                let d = gh_exact(&read_space(&a)?, &read_space(&b)?)?;
                println!("gh = {d}");
                Ok(0)
            }
            MetricAction::Dim { space, deltas } => {
                let s = read_space(&space)?;
                let grid: Vec<f64> = deltas
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<Result<_, _>>()?;
                let (slope, counts) = dim_estimate(&s, &grid)?;
                for (d, n) in counts {
                    println!("delta {d}: cover {n}");
                }
                println!("dimension slope = {slope}");
                Ok(0)
            }
        },
        Command::Experiment { name, config, list } => {
            if list {
                for e in registry() {
                    println!("{:28} {}", e.name(), e.describe());
                }
                return Ok(0);
            }
            let mut cfg = match (&name, &config) {
                (_, Some(path)) => ExperimentConfig::from_file(path)?,
                (Some(n), None) => ExperimentConfig::named(n),
                (None, None) => anyhow::bail!("need --name or --config"),
            };
            if let Some(n) = name {
                cfg.experiment = n;
            }
            cfg.seed = cli.seed;
            if let Some(dir) = &cli.out {
                cfg.out_dir = Some(dir.clone());
            }
            let exp = find_experiment(&cfg.experiment).ok_or_else(|| {
                anyhow::anyhow!(
                    "unknown experiment `{}`; try `experiment --list`",
                    cfg.experiment
                )
            })?;
            let report = exp.run(&cfg)?;
            report.print_lines();
            if let Some(dir) = &cfg.out_dir {
                report.write_to_dir(dir)?;
                println!("artifacts under {}", dir.display());
            }
            Ok(if report.passed { 0 } else { 1 })
        }
        Command::Selftest => {
            let failures = critgraph_harness::selftest::run(cli.seed);
            if failures.is_empty() {
                println!("selftest: all checks passed");
                Ok(0)
            } else {
                println!("selftest: {} failure(s)", failures.len());
                Ok(1)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
