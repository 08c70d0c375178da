use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use hcm::experiment::{self, Check, Manifest};
use hcm::exploration::{component_sizes, components_csv, explore};
use hcm::generator::{generate, HcmGraph, SequenceMode};
use hcm::kernel::KernelCache;
use hcm::percolation::{percolate_hcm, PercolationConfig, PercolationMode};
use hcm::window::solve_pi_critical_with;
use hcm::CommunityDistribution;

#[derive(Parser, Debug)]
#[command(name = "hcm", version, about = "Experiments on the hierarchical configuration model")]
struct Cli {
    /// Distribution file, catalog name or built-in shape (e.g. `star:5`).
    #[arg(long, global = true)]
    dist: Option<String>,
    /// Number of communities; comma-separated list, `1e5` notation allowed.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_count)]
    n: Vec<u64>,
    /// Window parameter(s), comma-separated.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Vec<f64>,
    #[arg(long, global = true)]
    replicas: Option<usize>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; data goes to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Critical percolation parameters for star(5) communities.
    TableStar,
    /// Critical percolation parameters for the line(5)/single-vertex mix.
    TableLine,
    /// pi_out as a function of pi_in.
    FigurePinout {
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Largest component sizes across n.
    Scaling,
    /// Compare percolation algorithms on the largest component fraction.
    PercEquiv {
        #[arg(long, default_value_t = 0.7)]
        pi: f64,
    },
    /// Tail sum of squared component sizes beyond the largest ten.
    L2Diag {
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
    },
    /// Generate one graph and write it in text form.
    Generate {
        #[arg(long, default_value = "iid")]
        mode: SequenceMode,
    },
    /// Run the exploration on a graph and write the walk and components.
    Explore {
        /// Read the graph from a file instead of generating it.
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Percolate a generated graph and report component sizes.
    Percolate {
        #[arg(long)]
        pi: f64,
        #[arg(long, default_value = "clones")]
        mode: PercolationMode,
    },
    /// Solve for the critical percolation parameter.
    CriticalWindow,
}

fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|_| format!("not a count: {s}"))?;
    if f < 0.0 || f.fract() != 0.0 || f > u64::MAX as f64 {
        return Err(format!("not a count: {s}"));
    }
    Ok(f as u64)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn setup_pool(jobs: Option<usize>) -> Result<()> {
    #[cfg(feature = "parallel")]
    if let Some(j) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .context("building thread pool")?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = jobs;
    Ok(())
}

impl Cli {
    fn dist_or(&self, default: &str) -> Result<CommunityDistribution> {
        let spec = self.dist.as_deref().unwrap_or(default);
        CommunityDistribution::from_spec(spec).with_context(|| format!("loading distribution {spec}"))
    }

    fn n_list(&self, default: &[u64]) -> Result<Vec<u64>> {
        let list = if self.n.is_empty() { default.to_vec() } else { self.n.clone() };
        if let Some(bad) = list.iter().find(|&&n| n < 10) {
            bail!("n must be at least 10 (got {bad})");
        }
        Ok(list)
    }

    fn single_n(&self, default: u64) -> Result<u64> {
        let list = self.n_list(&[default])?;
        if list.len() != 1 {
            bail!("this command takes a single --n");
        }
        Ok(list[0])
    }

    fn lambda_list(&self, default: &[f64]) -> Vec<f64> {
        if self.lambda.is_empty() {
            default.to_vec()
        } else {
            self.lambda.clone()
        }
    }

    fn replicas(&self, default: usize) -> Result<usize> {
        let r = self.replicas.unwrap_or(default);
        if r == 0 {
            bail!("--replicas must be at least 1");
        }
        Ok(r)
    }
}

fn report_checks(checks: &[Check]) -> bool {
    for c in checks.iter().filter(|c| !c.pass) {
        let status = if c.soft { "WARN" } else { "FAIL" };
        eprintln!("{status} {}: observed {:.6} expected {}", c.name, c.observed, c.expected);
    }
    let passed = checks.iter().filter(|c| c.pass).count();
    eprintln!("{passed}/{} checks passed", checks.len());
    experiment::all_pass(checks)
}

fn emit(cli: &Cli, name: &str, csv: &str, report: &impl serde::Serialize, config: serde_json::Value, passed: bool) -> Result<()> {
    match &cli.out {
        Some(dir) => {
            let manifest = Manifest::new(name, &config, cli.seed, passed)?;
            experiment::write_outputs(dir, name, csv, report, &manifest)?;
            eprintln!("wrote {}/{name}.{{csv,json,manifest.json}}", dir.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
}

fn load_or_generate(cli: &Cli, graph: Option<&Path>) -> Result<HcmGraph> {
    if let Some(path) = graph {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(HcmGraph::from_text(&text)?);
    }
    let dist = cli.dist_or("household-critical")?;
    let n = cli.single_n(1000)?;
    Ok(generate(&dist, n as usize, SequenceMode::Iid, cli.seed)?)
}

fn run(cli: &Cli) -> Result<bool> {
    setup_pool(cli.jobs)?;
    match &cli.command {
        Command::TableStar | Command::TableLine => {
            let n = cli.n_list(&experiment::TABLE_N)?;
            let lambda = cli.lambda_list(&experiment::TABLE_LAMBDA);
            let star = matches!(cli.command, Command::TableStar);
            let report = if star {
                experiment::run_table_star(&n, &lambda)?
            } else {
                experiment::run_table_line(&n, &lambda)?
            };
            let passed = report_checks(&report.checks);
            let config = json!({ "n": n, "lambda": lambda });
            emit(cli, &report.name.clone(), &report.to_csv(), &report, config, passed)?;
            Ok(passed)
        }
        Command::FigurePinout { points } => {
            let dist = cli.dist_or("star5")?;
            let n = cli.single_n(100_000)?;
            let lambda = cli.lambda_list(&[-10.0, 0.0, 10.0]);
            let grid = experiment::unit_grid(*points);
            let report = experiment::run_figure_pinout(&dist, n, &lambda, &grid)?;
            let passed = report_checks(&report.checks);
            let config = json!({ "dist": cli.dist, "n": n, "lambda": lambda, "points": points });
            emit(cli, "figure-pinout", &report.to_csv(), &report, config, passed)?;
            Ok(passed)
        }
        Command::Scaling => {
            let dist = cli.dist_or("cm-critical")?;
            let n = cli.n_list(&[10_000, 30_000, 100_000])?;
            let lambda = cli.lambda_list(&[0.0]);
            if lambda.len() != 1 {
                bail!("scaling takes a single --lambda");
            }
            let replicas = cli.replicas(200)?;
            let report = experiment::run_scaling(&dist, &n, lambda[0], replicas, cli.seed)?;
            for r in &report.rows {
                eprintln!(
                    "n={} N={:.0} v1 median {} [{}, {}] v2 median {} ratio {:.4}",
                    r.n, r.mean_vertices, r.v1_median, r.v1_q1, r.v1_q3, r.v2_median, r.size_ratio_mean
                );
            }
            let passed = report_checks(&report.checks);
            let config = json!({ "dist": cli.dist, "n": n, "lambda": lambda, "replicas": replicas });
            emit(cli, "scaling", &report.to_csv(), &report, config, passed)?;
            Ok(passed)
        }
        Command::PercEquiv { pi } => {
            let dist = cli.dist_or("household-critical")?;
            let n = cli.single_n(10_000)?;
            let replicas = cli.replicas(200)?;
            let report = experiment::run_percolation_equivalence(&dist, *pi, n, replicas, cli.seed)?;
            let passed = report_checks(&report.checks);
            let config = json!({ "dist": cli.dist, "n": n, "pi": pi, "replicas": replicas });
            emit(cli, "perc-equiv", &report.to_csv(), &report, config, passed)?;
            Ok(passed)
        }
        Command::L2Diag { epsilon } => {
            let dist = cli.dist_or("household-small")?;
            let n = cli.n_list(&[10_000, 30_000, 100_000])?;
            let replicas = cli.replicas(50)?;
            let report = experiment::run_l2_diagnostic(&dist, *epsilon, &n, replicas, cli.seed)?;
            let passed = report_checks(&report.checks);
            let config = json!({ "dist": cli.dist, "n": n, "epsilon": epsilon, "replicas": replicas });
            emit(cli, "l2-diag", &report.to_csv(), &report, config, passed)?;
            Ok(passed)
        }
        Command::Generate { mode } => {
            let dist = cli.dist_or("household-critical")?;
            let n = cli.single_n(1000)?;
            let g = generate(&dist, n as usize, *mode, cli.seed)?;
            eprintln!(
                "{} communities, {} vertices, {} half-edges",
                g.sequence.len(),
                g.vertex_graph.node_count,
                g.sequence.half_edge_count()
            );
            match &cli.out {
                Some(dir) => write_file(dir, "graph.txt", &g.to_text())?,
                None => print!("{}", g.to_text()),
            }
            Ok(true)
        }
        Command::Explore { graph } => {
            let g = load_or_generate(cli, graph.as_deref())?;
            let trace = explore(&g, cli.seed);
            let comps = components_csv(&trace)?;
            match &cli.out {
                Some(dir) => {
                    write_file(dir, "walk.csv", &trace.walk_csv())?;
                    write_file(dir, "components.csv", &comps)?;
                }
                None => print!("{comps}"),
            }
            Ok(true)
        }
        Command::Percolate { pi, mode } => {
            let g = load_or_generate(cli, None)?;
            let cfg = PercolationConfig::new(*pi, *mode, cli.seed.wrapping_add(1))?;
            let out = percolate_hcm(&g, &cfg)?;
            let mut csv = String::from("rank,v\n");
            for (i, v) in component_sizes(&out.graph).iter().enumerate() {
                csv.push_str(&format!("{},{v}\n", i + 1));
            }
            eprintln!(
                "{} vertices after percolation, {} clone vertices deleted",
                out.graph.vertex_graph.node_count, out.deleted_vertices
            );
            match &cli.out {
                Some(dir) => {
                    write_file(dir, "percolated.txt", &out.graph.to_text())?;
                    write_file(dir, "components.csv", &csv)?;
                }
                None => print!("{csv}"),
            }
            Ok(true)
        }
        Command::CriticalWindow => {
            let dist = cli.dist_or("star5")?;
            let n = cli.n_list(&[100_000])?;
            let lambda = cli.lambda_list(&[0.0]);
            let cache = KernelCache::default();
            let mut rows = Vec::new();
            let mut csv = String::from("n,lambda,pi,pi_approx,c_star,nu_at_pi,residual\n");
            for &nn in &n {
                for &l in &lambda {
                    let s = solve_pi_critical_with(&dist, nn, l, &cache)?;
                    csv.push_str(&format!(
                        "{nn},{l},{:.9},{:.9},{:.9},{:.9},{:.3e}\n",
                        s.pi, s.pi_approx, s.c_star, s.nu_at_pi, s.residual
                    ));
                    rows.push(s);
                }
            }
            let config = json!({ "dist": cli.dist, "n": n, "lambda": lambda });
            emit(cli, "critical-window", &csv, &rows, config, true)?;
            Ok(true)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_accept_exponents() {
        assert_eq!(parse_count("100000"), Ok(100_000));
        assert_eq!(parse_count("1e5"), Ok(100_000));
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
    }

    #[test]
    fn cli_definition_is_valid() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn negative_lambda_list() {
        let cli = Cli::try_parse_from(["hcm", "table-star", "--lambda", "-10,-1,0", "--n", "1e5"]).unwrap();
        assert_eq!(cli.lambda, vec![-10.0, -1.0, 0.0]);
        assert_eq!(cli.n, vec![100_000]);
    }

    #[test]
    fn catalog_default_resolves() {
        assert!(hcm::catalog::named("star5").is_some());
    }
}
