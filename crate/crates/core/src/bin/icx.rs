use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use icx_core::criteria::select_fit;
use icx_core::estimate::{fit_values, Binding, BindingTable, Estimator};
use icx_core::experiment::{emit_report, run_experiment, ExperimentConfig, ReportFormat};
use icx_core::io::{read_series, write_atomic};
use icx_core::limits::{limit_probability, Branch, LimitCase, TauCase, Theorem, DEFAULT_STEPS};
use icx_core::model::{ErrorSpec, InitSpec, ModelSpec, PenaltySpec};
use icx_core::simulate::{gen_path, trajectory_data};
use icx_core::{Error, Result};

const GRAMMAR: &str = "\
Specs are written `kind` or `kind:key=value,...`:
  models     ur | ltue:c=1 | me:alpha=0.3 | ex:rho=1.05
  errors     iid[:sigma2=1] | ma:f=1/0.5[,sigma2=1]
  init       zero | recent:theta=0.5 | distant:tau=0.5 | infinite[:growth=1.5]
  criteria   aic | bic | hqic | pow:gamma=0.5

Exit codes: 0 success, 1 invalid input or domain error, 2 I/O error.";

#[derive(Parser)]
#[command(name = "icx", version, about = "Unit-root vs. explosive AR(1) selection by information criteria")]
#[command(after_help = GRAMMAR)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SeedArg {
    /// Random seed.
    #[arg(long, env = "ICX_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TableArg {
    /// Cached binding table; built in memory when omitted.
    #[arg(long)]
    table: Option<PathBuf>,
}

impl TableArg {
    fn load(&self) -> Result<BindingTable> {
        match &self.table {
            Some(p) => BindingTable::load(p),
            None => BindingTable::build_default(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one sample path and write it as `t,x` rows.
    #[command(after_help = GRAMMAR)]
    Simulate {
        model: ModelSpec,
        #[arg(short = 'n', long)]
        n: usize,
        #[arg(long, default_value = "iid")]
        error: ErrorSpec,
        #[arg(long, default_value = "zero")]
        init: InitSpec,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Fit the AR coefficient of a path file by OLS and/or indirect inference.
    Fit {
        input: PathBuf,
        /// `ols`, `iie` or `all`.
        #[arg(long, default_value = "all")]
        estimator: String,
        #[command(flatten)]
        table: TableArg,
    },
    /// Print IC_0, IC_1 and the selected model for a path file.
    #[command(after_help = GRAMMAR)]
    Select {
        input: PathBuf,
        #[arg(long, default_value = "ols")]
        estimator: Estimator,
        /// A criterion spec, or `all` for AIC, BIC and HQIC.
        #[arg(long, default_value = "all")]
        criterion: String,
        #[command(flatten)]
        table: TableArg,
    },
    /// Build, cache or verify the binding-function table.
    Binding {
        /// Recompute the table and write it to `--path`.
        #[arg(long)]
        rebuild: bool,
        /// Compare the cached table at `--path` against fresh quadrature.
        #[arg(long)]
        check: bool,
        #[arg(long, default_value = "icx_binding.csv")]
        path: PathBuf,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Asymptotic probability of correct selection.
    Limits {
        /// t1, t2a, t2b, t2c, t3, t4a, t4b, t4c or p5.
        #[arg(long)]
        case: Theorem,
        /// `aic` or `divergent` (p_n -> inf) for t1, t2a, t3 and t4a.
        #[arg(long, default_value = "aic")]
        branch: Branch,
        /// Limit of p_n / rho_n^{2n}; `inf` allowed.
        #[arg(long, default_value_t = 0.0)]
        pi: f64,
        #[arg(long, default_value_t = 1.0)]
        omega2: f64,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value_t = 1.05)]
        rho: f64,
        /// 0, a positive number, or `inf`.
        #[arg(long, default_value = "0")]
        tau: TauCase,
        #[arg(long, default_value_t = 20_000)]
        draws: usize,
        #[arg(long, default_value_t = DEFAULT_STEPS)]
        steps: usize,
        #[command(flatten)]
        seed: SeedArg,
        #[command(flatten)]
        table: TableArg,
        /// Also write the row to this file.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment from a TOML config (or a shipped name such as `table1`).
    Experiment {
        config: String,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
        /// Worker threads; 0 uses every core.
        #[arg(long)]
        workers: Option<usize>,
        /// Override the config's base seed.
        #[arg(long, env = "ICX_SEED")]
        seed: Option<u64>,
        /// Write JSON instead of CSV.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        table: TableArg,
    },
    /// Write aligned UR / LTUE / ME trajectories for plotting.
    Figures {
        #[arg(long, value_delimiter = ',', default_values_t = [100, 200, 500, 1000])]
        n: Vec<usize>,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    if e.is_io() {
        2
    } else {
        1
    }
}

fn read_path(input: &Path) -> Result<Vec<f64>> {
    let values = read_series(input)?;
    if values.len() < 4 {
        return Err(Error::Domain(format!("{} holds {} values, need at least 4", input.display(), values.len())));
    }
    Ok(values)
}

fn criteria(arg: &str) -> Result<Vec<PenaltySpec>> {
    if arg.eq_ignore_ascii_case("all") {
        Ok(PenaltySpec::STANDARD.to_vec())
    } else {
        Ok(vec![arg.parse()?])
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate { model, n, error, init, seed, out } => {
            let path = gen_path(&model, &error, &init, n, seed.seed)?;
            write_atomic(&out, path.to_csv().as_bytes())?;
            println!("wrote {} rows of {model} (n = {n}, seed = {}) to {}", n + 1, seed.seed, out.display());
        }
        Command::Fit { input, estimator, table } => {
            let values = read_path(&input)?;
            let estimators = match estimator.to_ascii_lowercase().as_str() {
                "all" => Estimator::ALL.to_vec(),
                s => vec![s.parse()?],
            };
            let table = if estimators.contains(&Estimator::IndirectInference) { Some(table.load()?) } else { None };
            let mut rows = vec!["estimator,rho_hat,sigma2_k0,sigma2_k1,saturated".to_string()];
            for est in estimators {
                let fit = fit_values(&values, est, table.as_ref().map(|t| t as &dyn Binding))?;
                rows.push(format!("{est},{},{},{},{}", fit.rho_hat, fit.sigma2_k0, fit.sigma2_k1, fit.saturated));
            }
            println!("{}", rows.join("\n"));
        }
        Command::Select { input, estimator, criterion, table } => {
            let values = read_path(&input)?;
            let specs = criteria(&criterion)?;
            let table = if estimator == Estimator::IndirectInference { Some(table.load()?) } else { None };
            let fit = fit_values(&values, estimator, table.as_ref().map(|t| t as &dyn Binding))?;
            let mut rows = vec!["criterion,estimator,ic0,ic1,k_hat".to_string()];
            for spec in specs {
                let s = select_fit(&fit, spec)?;
                rows.push(format!("{spec},{estimator},{},{},{}", s.ic0, s.ic1, s.k_hat));
            }
            println!("{}", rows.join("\n"));
        }
        Command::Binding { rebuild, check, path, points, tolerance, seed } => {
            if rebuild {
                let table = BindingTable::build_default()?;
                table.save(&path)?;
                println!("wrote {} points on [{}, {}] to {}", table.c_grid().len(), table.c_min(), table.c_max(), path.display());
            }
            if check {
                let table = BindingTable::load(&path)?;
                let report = table.check(points, seed.seed)?;
                if report.max_deviation >= tolerance {
                    return Err(Error::NumericRange(format!(
                        "cached table deviates by {:e} at c = {} (tolerance {tolerance:e})",
                        report.max_deviation, report.worst_c
                    )));
                }
                println!(
                    "ok: {} points, max deviation {:e} (tolerance {tolerance:e})",
                    report.points, report.max_deviation
                );
            }
            if !rebuild && !check {
                let table = if path.exists() { BindingTable::load(&path)? } else { BindingTable::build_default()? };
                println!("c,h");
                for c in [-40.0, -10.0, -1.0, 0.0, 1.0, 10.0, 40.0] {
                    println!("{c},{}", table.interpolate(c));
                }
            }
        }
        Command::Limits { case, branch, pi, omega2, c, rho, tau, draws, steps, seed, table, out } => {
            let lc = LimitCase { theorem: case, branch, pi, omega2, c, rho, tau };
            let needs_table = lc.closed_form()?.is_none() && matches!(case, Theorem::T3 | Theorem::T4a);
            let table = if needs_table { Some(table.load()?) } else { None };
            let est = limit_probability(&lc, draws, steps, seed.seed, table.as_ref())?;
            let header = "case,branch,pi,omega2,probability,draws,se";
            let row = format!("{case},{branch},{pi},{omega2},{:.6},{},{:.6}", est.probability, est.draws, est.se);
            println!("{header}\n{row}");
            if est.saturated > 0 {
                println!("note: {} draws hit the lower edge of the binding table", est.saturated);
            }
            if let Some(out) = out {
                write_atomic(&out, format!("{header}\n{row}\n").as_bytes())?;
            }
        }
        Command::Experiment { config, out, reps, workers, seed, json, table } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(r) = reps {
                cfg.reps = r;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            let cached = match &table.table {
                Some(p) => Some(BindingTable::load(p)?),
                None => None,
            };
            let report = run_experiment(&cfg, cached.as_ref())?;
            let format = if json { ReportFormat::Json } else { ReportFormat::Csv };
            emit_report(&report, format, &out)?;
            println!("{:<14} {:>5} {:<4} {:<6} {:>7}", "model", "n", "est", "ic", "freq");
            for c in &report.cells {
                println!("{:<14} {:>5} {:<4} {:<6} {:>7.4}", c.model.to_string(), c.n, c.estimator.to_string(), c.criterion.to_string(), c.freq);
            }
            println!("{} cells, {} reps each, {:.1}s; report in {}", report.cells.len(), cfg.reps, report.wall_seconds, out.display());
        }
        Command::Figures { n, seed, out } => {
            let models = [
                ModelSpec::UnitRoot,
                ModelSpec::LocalToUnity { c: 1.0 },
                ModelSpec::MildlyExplosive { alpha: 0.1 },
                ModelSpec::MildlyExplosive { alpha: 0.5 },
            ];
            for size in n {
                let data = trajectory_data(&models, size, seed.seed)?;
                let file = out.join(format!("trajectories_n{size}.csv"));
                write_atomic(&file, data.to_csv().as_bytes())?;
                println!("wrote {}", file.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
