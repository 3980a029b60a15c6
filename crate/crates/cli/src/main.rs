use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fmod_core::bench::{self, ExperimentConfig, ExportFormat};
use fmod_core::fdiv::{f_divergence, f_mutual_information, DistributionMatrix, DivergenceFamily};
use fmod_core::io::{self, LabeledGraph};
use fmod_core::modularity::{self, EstimatorConfig, Method, ModularityReport, Partition};
use fmod_core::netcore::{self, BipartiteMultigraph, NullVariant};
use fmod_core::synth::{self, BlockGroups, BlockModelConfig};
use fmod_core::{Error, Result};

#[derive(Parser)]
#[command(name = "fmod", version, about = "f-modularity of networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// f-mutual information of a joint distribution given as CSV.
    Mi {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "kl")]
        family: DivergenceFamily,
    },
    /// f-divergence between two distributions of the same shape.
    Divergence {
        #[arg(long)]
        p: PathBuf,
        #[arg(long)]
        q: PathBuf,
        #[arg(long, default_value = "kl")]
        family: DivergenceFamily,
    },
    /// Estimate f-modularity of a graph.
    Modularity(ModularityArgs),
    /// Newman's modularity of a partition of an undirected graph.
    Newman {
        #[arg(long)]
        adjacency: PathBuf,
        /// One community label per line, one line per vertex.
        #[arg(long)]
        partition: PathBuf,
        #[arg(long, default_value = "newman")]
        null: NullVariant,
    },
    /// Two-community split maximizing sᵀ(F − J)s.
    Bipartition {
        #[arg(long)]
        adjacency: PathBuf,
        #[arg(long, default_value = "newman")]
        null: NullVariant,
    },
    /// Sample a graph from a planted block model.
    SbmGen {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        edges: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the underlying distribution.
        #[arg(long)]
        dist: Option<PathBuf>,
    },
    /// Merge two block groups of a distribution.
    Contract {
        #[arg(long)]
        dist: PathBuf,
        /// JSON with `block_sizes` and `groups`.
        #[arg(long)]
        groups: PathBuf,
        #[arg(long, num_args = 2, value_names = ["I", "J"])]
        merge: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the merged group structure.
        #[arg(long)]
        groups_out: Option<PathBuf>,
    },
    /// Run a contraction experiment described by a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        heatmaps: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides the config's baseline reference (empirical|unbiased).
        #[arg(long)]
        baseline_null: Option<bench::BaselineReference>,
    },
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["edges", "adjacency"])))]
struct ModularityArgs {
    /// Edge list: `u<TAB>v[<TAB>count]` per line.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Adjacency matrix CSV of a non-bipartite graph.
    #[arg(long)]
    adjacency: Option<PathBuf>,
    /// Skip the symmetry check on the adjacency matrix.
    #[arg(long)]
    directed: bool,
    #[arg(long, default_value = "js")]
    family: DivergenceFamily,
    #[arg(long, default_value_t = 0.9)]
    theta: f64,
    #[arg(long, default_value_t = 1e-9)]
    epsilon: f64,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long, default_value = "auto")]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    nmf_max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    nmf_tol: f64,
    /// Report destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ReportWithConfig<'a> {
    #[serde(flatten)]
    report: &'a ModularityReport,
    config: &'a EstimatorConfig,
}

fn read_adjacency(path: &Path, undirected: bool) -> Result<BipartiteMultigraph> {
    let m = io::read_matrix_csv(path)?;
    netcore::induce_bipartite(&io::to_integer_matrix(&m)?, undirected)
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn labels_path(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".labels.tsv");
    out.with_file_name(name)
}

fn run_modularity(args: ModularityArgs) -> Result<()> {
    let (graph, labels) = match (&args.edges, &args.adjacency) {
        (Some(edges), _) => {
            let LabeledGraph {
                graph,
                u_labels,
                v_labels,
            } = io::read_edge_list(edges)?;
            (graph, Some((u_labels, v_labels)))
        }
        (None, Some(adj)) => (read_adjacency(adj, !args.directed)?, None),
        (None, None) => unreachable!("clap enforces one input"),
    };
    let cfg = EstimatorConfig {
        family: args.family,
        theta: args.theta,
        epsilon: args.epsilon,
        rank_override: args.rank,
        method: args.method,
        nmf_max_iter: args.nmf_max_iter,
        nmf_tol: args.nmf_tol,
        seed: args.seed,
    };
    let fm = netcore::frequency_from_graph(&graph)?;
    let report = modularity::f_modularity(&fm, &cfg)?;
    let json = serde_json::to_string_pretty(&ReportWithConfig {
        report: &report,
        config: &cfg,
    })?;
    write_or_print(args.out.as_deref(), &(json + "\n"))?;
    if let (Some(out), Some((u_labels, v_labels))) = (&args.out, labels) {
        let mut text = String::from("side\tindex\tlabel\n");
        for (side, labels) in [("u", u_labels), ("v", v_labels)] {
            for (i, l) in labels.iter().enumerate() {
                text.push_str(&format!("{side}\t{i}\t{l}\n"));
            }
        }
        write_or_print(Some(&labels_path(out)), &text)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Mi { input, family } => {
            let p = DistributionMatrix::new(io::read_matrix_csv(&input)?)?;
            println!("{}", f_mutual_information(family, &p)?);
        }
        Command::Divergence { p, q, family } => {
            let p = DistributionMatrix::new(io::read_matrix_csv(&p)?)?;
            let q = DistributionMatrix::new(io::read_matrix_csv(&q)?)?;
            println!("{}", f_divergence(family, &p, &q)?);
        }
        Command::Modularity(args) => run_modularity(args)?,
        Command::Newman {
            adjacency,
            partition,
            null,
        } => {
            let fm = netcore::frequency_from_graph(&read_adjacency(&adjacency, true)?)?;
            let part = Partition::from_raw_labels(&io::read_partition_labels(&partition)?)?;
            println!("{}", modularity::newman_modularity(&fm, &part, null)?);
        }
        Command::Bipartition { adjacency, null } => {
            let fm = netcore::frequency_from_graph(&read_adjacency(&adjacency, true)?)?;
            let b = modularity::tvd_bipartition(&fm, null)?;
            let signs: Vec<String> = b.signs.iter().map(|s| s.to_string()).collect();
            println!("signs: {}", signs.join(" "));
            println!("objective: {}", b.objective);
        }
        Command::SbmGen {
            m,
            n,
            alpha,
            edges,
            seed,
            out,
            dist,
        } => {
            let p = synth::sbm_distribution(&BlockModelConfig { m, n, alpha })?;
            let g = synth::sample_graph(&p, edges, seed)?;
            write_or_print(Some(&out), &io::format_edge_list(&g))?;
            if let Some(d) = dist {
                io::write_matrix_csv(d, p.matrix())?;
            }
        }
        Command::Contract {
            dist,
            groups,
            merge,
            out,
            groups_out,
        } => {
            let p = DistributionMatrix::new(io::read_matrix_csv(&dist)?)?;
            let text = fs::read_to_string(&groups).map_err(|e| Error::Io {
                path: groups.clone(),
                source: e,
            })?;
            let g: BlockGroups = serde_json::from_str(&text)?;
            g.validate()?;
            let (q, merged) = synth::contract(&p, &g, merge[0], merge[1])?;
            io::write_matrix_csv(&out, q.matrix())?;
            if let Some(path) = groups_out {
                write_or_print(
                    Some(&path),
                    &(serde_json::to_string_pretty(&merged)? + "\n"),
                )?;
            }
        }
        Command::Experiment {
            config,
            out,
            json,
            heatmaps,
            threads,
            baseline_null,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.output = out.or(cfg.output);
            cfg.json = json.or(cfg.json);
            cfg.heatmaps = heatmaps.or(cfg.heatmaps);
            cfg.threads = threads.or(cfg.threads);
            if let Some(b) = baseline_null {
                cfg.baseline_reference = b;
            }
            let results = bench::run_experiment(&cfg)?;
            for f in &results.failures {
                eprintln!(
                    "trial failed: family={} alpha#{} stage={} trial={}: {}",
                    f.family, f.alpha_index, f.stage, f.trial, f.error
                );
            }
            match &cfg.output {
                Some(path) => bench::export(&results, ExportFormat::Csv, path)?,
                None => print!("{}", bench::results_csv(&results)),
            }
            if let Some(path) = &cfg.json {
                bench::export(&results, ExportFormat::Json, path)?;
            }
            if let Some(dir) = &cfg.heatmaps {
                let stages = bench::stage_distributions(&cfg)?;
                bench::export_heatmaps(dir, &cfg.alphas, &stages)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
