use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use persot::barycenter::{exact_barycenter_lp, frechet_mean_multistart, BarycenterProblem, DEFAULT_MAX_ITER};
use persot::experiments::{convergence_experiment, plot_script, rows_to_csv, Density, ExperimentConfig};
use persot::io::{format_measure, read_measure, Columns};
use persot::representations::{
    betti_curve, curve_to_csv, persistence_surface, silhouette, Grid1d, Grid2d, SurfaceConfig,
};
use persot::{bottleneck_distance, optimal_plan, ot_distance, Error, Exponent, PersistenceMeasure};

/// Relative `--out` paths are resolved against this directory when it is set.
const OUT_DIR_VAR: &str = "PERSOT_OUT_DIR";

#[derive(Parser)]
#[command(name = "persot", version, about = "Optimal partial transport between persistence measures")]
struct Cli {
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Input columns: measure (birth death mass), diagram (birth death) or auto.
    #[arg(long, global = true, default_value = "auto", value_parser = parse_columns)]
    columns: Columns,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// OT_p distance between two measures (`--p inf` gives the bottleneck distance).
    Dist {
        #[arg(long, default_value = "2")]
        p: Exponent,
        /// Print the optimal plan as JSON instead of the distance.
        #[arg(long)]
        plan: bool,
        a: PathBuf,
        b: PathBuf,
    },
    /// Bottleneck distance between two diagrams.
    Bottleneck { a: PathBuf, b: PathBuf },
    /// Fréchet mean of a family of measures.
    Barycenter {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        /// One weight per input, summing to 1 (uniform when omitted).
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Solve the exact linear program (small integer diagrams only).
        #[arg(long)]
        exact: bool,
        /// Random starts on top of one start per input.
        #[arg(long, default_value_t = 4)]
        starts: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
    },
    /// Persistence surface on a grid over (birth, death).
    Surface {
        input: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        weight_power: f64,
        #[arg(long)]
        x_min: f64,
        #[arg(long)]
        x_max: f64,
        #[arg(long)]
        y_min: f64,
        #[arg(long)]
        y_max: f64,
        #[arg(long, default_value_t = 50)]
        nx: usize,
        #[arg(long, default_value_t = 50)]
        ny: usize,
    },
    /// Weighted silhouette.
    Silhouette {
        input: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[command(flatten)]
        grid: CurveGrid,
    },
    /// Weighted Betti curve.
    Betti {
        input: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[command(flatten)]
        grid: CurveGrid,
    },
    /// Convergence of rescaled 1D Rips diagrams of uniform samples.
    Lln {
        /// Sample sizes as `a:b` (inclusive) or a comma list.
        #[arg(long, default_value = "2:50", value_parser = parse_range)]
        n: SizeList,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Atoms of the discretized limit measure.
        #[arg(long, default_value_t = 1000)]
        m: usize,
        /// Also write a matplotlib script plotting the CSV (requires --out).
        #[arg(long)]
        plot_script: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CurveGrid {
    #[arg(long)]
    t_min: f64,
    #[arg(long)]
    t_max: f64,
    #[arg(long, default_value_t = 100)]
    samples: usize,
}

fn parse_columns(s: &str) -> Result<Columns, String> {
    match s {
        "measure" => Ok(Columns::Measure),
        "diagram" => Ok(Columns::Diagram),
        "auto" => Ok(Columns::Auto),
        _ => Err(format!("expected measure, diagram or auto, got {s:?}")),
    }
}

#[derive(Clone)]
struct SizeList(Vec<usize>);

fn parse_range(s: &str) -> Result<SizeList, String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    if let Some((a, b)) = s.split_once(':') {
        let (a, b) = (num(a)?, num(b)?);
        if a > b {
            return Err(format!("empty range {s}"));
        }
        Ok(SizeList((a..=b).collect()))
    } else {
        s.split(',').map(num).collect::<Result<_, _>>().map(SizeList)
    }
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical(_) => Failure::Numerical(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let out = cli.out.as_deref().map(resolve_out);
    let read = |path: &Path| read_measure(path, cli.columns).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())));
    let text = match cli.command {
        Command::Dist { p, plan, a, b } => {
            let (a, b) = (read(&a)?, read(&b)?);
            match (p, plan) {
                (Exponent::Infinity, true) => return Err(Failure::Usage("--plan needs a finite p".into())),
                (Exponent::Infinity, false) => format!("{}\n", bottleneck_distance(&a, &b)?),
                (Exponent::Finite(p), true) => format!("{:#}\n", optimal_plan(&a, &b, p)?.to_json()),
                (Exponent::Finite(p), false) => format!("{}\n", ot_distance(&a, &b, p)?),
            }
        }
        Command::Bottleneck { a, b } => format!("{}\n", bottleneck_distance(&read(&a)?, &read(&b)?)?),
        Command::Barycenter { input, weights, p, exact, starts, max_iter } => {
            let inputs = input.iter().map(|f| read(f)).collect::<Result<Vec<_>, _>>()?;
            let problem = match weights {
                Some(w) => BarycenterProblem::new(inputs, w, p)?,
                None => BarycenterProblem::uniform(inputs, p)?,
            };
            if exact {
                let sol = exact_barycenter_lp(&problem)?;
                let info = json!({ "method": "exact", "energy": sol.energy, "integral": sol.integral });
                with_header(&info, &sol.measure)
            } else {
                let state = frechet_mean_multistart(&problem, starts, cli.seed, max_iter)?;
                let info = json!({
                    "method": "alternating",
                    "energy": state.energy,
                    "iterations": state.iterations,
                    "converged": state.converged,
                    "energy_trace": state.energy_trace,
                });
                with_header(&info, &state.candidate)
            }
        }
        Command::Surface { input, sigma, weight_power, x_min, x_max, y_min, y_max, nx, ny } => {
            let mu = read(&input)?;
            let cfg = SurfaceConfig::new(sigma, weight_power)?;
            let grid = Grid2d::new(x_min, x_max, y_min, y_max, nx, ny)?;
            persistence_surface(&mu, &cfg, &grid).to_csv()
        }
        Command::Silhouette { input, p, grid } => {
            let grid = Grid1d::new(grid.t_min, grid.t_max, grid.samples)?;
            curve_to_csv(&grid, &silhouette(&read(&input)?, p, &grid)?)
        }
        Command::Betti { input, p, q, grid } => {
            let grid = Grid1d::new(grid.t_min, grid.t_max, grid.samples)?;
            curve_to_csv(&grid, &betti_curve(&read(&input)?, p, q, &grid)?)
        }
        Command::Lln { n, trials, p, m, plot_script: script } => {
            let cfg = ExperimentConfig {
                n_values: n.0,
                trials,
                p,
                density: Density::Uniform,
                limit_atoms: m,
                seed: cli.seed,
            };
            let rows = convergence_experiment(&cfg)?;
            if let Some(script) = script {
                let csv = out.as_ref().ok_or_else(|| Failure::Usage("--plot-script needs --out".into()))?;
                std::fs::write(resolve_out(&script), plot_script(&csv.to_string_lossy()))?;
            }
            rows_to_csv(&cfg, &rows)
        }
    };
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn resolve_out(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_VAR) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Measure text preceded by a one-line `#` JSON comment, so the output still
/// parses as a measure file.
fn with_header(info: &serde_json::Value, mu: &PersistenceMeasure) -> String {
    format!("# {info}\n{}", format_measure(mu))
}
