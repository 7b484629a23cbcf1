//! Config-driven Monte Carlo of correct-selection frequencies.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::criteria::select_fit;
use crate::error::{Error, Result};
use crate::estimate::{fit_values, Binding, BindingTable, Estimator};
use crate::limits::penalty_ratio;
use crate::model::{rho_n_of, ErrorSpec, InitSpec, ModelSpec, PenaltySpec};
use crate::rng::{label_id, mix};
use crate::simulate::gen_path;

pub const DEFAULT_REPS: usize = 10_000;
/// Largest share of degenerate draws a cell tolerates before failing.
pub const MAX_DEGENERATE_SHARE: f64 = 0.01;

const SHIPPED: [(&str, &str); 4] = [
    ("table1", include_str!("../configs/table1.toml")),
    ("table2", include_str!("../configs/table2.toml")),
    ("table3", include_str!("../configs/table3.toml")),
    ("table4", include_str!("../configs/table4.toml")),
];

/// Names of the configs compiled into the library.
pub fn shipped_names() -> impl Iterator<Item = &'static str> {
    SHIPPED.iter().map(|(name, _)| *name)
}

pub fn shipped_config(name: &str) -> Option<&'static str> {
    SHIPPED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub models: Vec<ModelSpec>,
    pub n: Vec<usize>,
    pub estimators: Vec<Estimator>,
    pub criteria: Vec<PenaltySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub error: ErrorSpec,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub grid: Vec<GridBlock>,
}

fn default_reps() -> usize {
    DEFAULT_REPS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub model: ModelSpec,
    pub n: usize,
    pub estimator: Estimator,
    pub criterion: PenaltySpec,
}

impl Cell {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.criterion.validate()?;
        if self.n < 3 {
            return Err(Error::domain(format!("cell n must be at least 3, got {}", self.n)));
        }
        crate::criteria::penalty(&self.criterion, self.n).map(|_| ())
    }

    /// Seed family of the simulated paths. It depends only on `(rho_n, n)`, so
    /// every estimator and criterion in a block, and any two models with the
    /// same `rho_n`, see the same paths.
    pub fn path_family(&self) -> Result<u64> {
        let rho = rho_n_of(&self.model, self.n)?;
        Ok(mix(label_id("path"), &[rho.to_bits(), self.n as u64]))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse(format!("experiment config: {}", e.message())))
    }

    /// Reads a config file, falling back to a shipped config of that name.
    pub fn load(path_or_name: &str) -> Result<Self> {
        let path = Path::new(path_or_name);
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            return Self::from_toml(&text);
        }
        match shipped_config(path_or_name) {
            Some(text) => Self::from_toml(text),
            None => Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound))),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Cells in model, n, estimator, criterion order within each block.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for block in &self.grid {
            for &model in &block.models {
                for &n in &block.n {
                    for &estimator in &block.estimators {
                        for &criterion in &block.criteria {
                            cells.push(Cell { model, n, estimator, criterion });
                        }
                    }
                }
            }
        }
        cells
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::domain("reps must be at least 1"));
        }
        self.error.validate()?;
        self.init.validate()?;
        let cells = self.cells();
        if cells.is_empty() {
            return Err(Error::domain("experiment has no cells"));
        }
        cells.iter().try_for_each(Cell::validate)
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .fold(String::with_capacity(64), |mut s, b| {
                write!(s, "{b:02x}").unwrap();
                s
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub model: ModelSpec,
    pub n: usize,
    pub estimator: Estimator,
    pub criterion: PenaltySpec,
    /// `p_n / rho_n^{2n}`; absent for the unit root.
    pub penalty_ratio: Option<f64>,
    /// Correct selections over non-degenerate draws.
    pub freq: f64,
    pub reps: usize,
    pub correct: usize,
    pub excluded: usize,
    /// Draws whose binding inversion saturated (kept in the count).
    pub saturated: usize,
    /// Seed of the cell's path family.
    pub seed: u64,
}

/// Runs one cell; replication `r` uses seed `mix(base_seed, [family, r])`.
pub fn run_cell(
    cell: &Cell,
    reps: usize,
    error: &ErrorSpec,
    init: &InitSpec,
    base_seed: u64,
    binding: Option<&dyn Binding>,
) -> Result<CellReport> {
    cell.validate()?;
    if reps == 0 {
        return Err(Error::domain("reps must be at least 1"));
    }
    if cell.estimator == Estimator::IndirectInference && binding.is_none() {
        return Err(Error::domain("indirect inference cells need a binding table"));
    }
    let family = cell.path_family()?;
    let truth = cell.model.true_k();

    #[derive(Default, Clone, Copy)]
    struct Tally {
        correct: usize,
        excluded: usize,
        saturated: usize,
    }
    let one = |r: usize| -> Result<Tally> {
        let seed = mix(base_seed, &[family, r as u64]);
        let outcome = gen_path(&cell.model, error, init, cell.n, seed)
            .and_then(|path| fit_values(&path.values, cell.estimator, binding))
            .and_then(|fit| Ok((select_fit(&fit, cell.criterion)?, fit.saturated)));
        match outcome {
            Ok((sel, sat)) => Ok(Tally {
                correct: (sel.k_hat == truth) as usize,
                excluded: 0,
                saturated: sat as usize,
            }),
            Err(e) if e.is_degenerate_draw() => Ok(Tally { excluded: 1, ..Tally::default() }),
            Err(e) => Err(e),
        }
    };
    let tally = (0..reps).into_par_iter().map(one).try_reduce(Tally::default, |a, b| {
        Ok(Tally {
            correct: a.correct + b.correct,
            excluded: a.excluded + b.excluded,
            saturated: a.saturated + b.saturated,
        })
    })?;
    if tally.excluded as f64 > MAX_DEGENERATE_SHARE * reps as f64 {
        return Err(Error::Degenerate(format!(
            "{} of {reps} draws degenerate in cell {} n={} {} {}",
            tally.excluded, cell.model, cell.n, cell.estimator, cell.criterion
        )));
    }
    let counted = reps - tally.excluded;
    let penalty_ratio = match cell.model {
        ModelSpec::UnitRoot => None,
        _ => Some(penalty_ratio(&cell.model, &cell.criterion, cell.n)?),
    };
    Ok(CellReport {
        model: cell.model,
        n: cell.n,
        estimator: cell.estimator,
        criterion: cell.criterion,
        penalty_ratio,
        freq: if counted == 0 { 0.0 } else { tally.correct as f64 / counted as f64 },
        reps,
        correct: tally.correct,
        excluded: tally.excluded,
        saturated: tally.saturated,
        seed: mix(base_seed, &[family]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub config_hash: String,
    pub base_seed: u64,
    pub wall_seconds: f64,
    pub cells: Vec<CellReport>,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::domain(format!("cannot start {workers} workers: {e}")))
}

/// Runs every cell, building the default binding table when the config uses
/// indirect inference and none is supplied.
pub fn run_experiment(config: &ExperimentConfig, table: Option<&BindingTable>) -> Result<ExperimentReport> {
    config.validate()?;
    let start = Instant::now();
    let cells = config.cells();
    pool(config.workers)?.install(|| {
        let built;
        let table = match table {
            Some(t) => Some(t),
            None if cells.iter().any(|c| c.estimator == Estimator::IndirectInference) => {
                built = BindingTable::build_default()?;
                Some(&built)
            }
            None => None,
        };
        let binding = table.map(|t| t as &dyn Binding);
        let reports = cells
            .par_iter()
            .map(|cell| run_cell(cell, config.reps, &config.error, &config.init, config.base_seed, binding))
            .collect::<Vec<_>>();
        let failures: Vec<String> = reports
            .iter()
            .filter_map(|r| r.as_ref().err().map(|e| e.to_string()))
            .collect();
        if failures.len() == 1 {
            return Err(reports.into_iter().find_map(|r| r.err()).unwrap());
        }
        if !failures.is_empty() {
            return Err(Error::Degenerate(format!("{} cells failed: {}", failures.len(), failures.join("; "))));
        }
        Ok(ExperimentReport {
            name: config.name.clone(),
            config_hash: config.hash(),
            base_seed: config.base_seed,
            wall_seconds: start.elapsed().as_secs_f64(),
            cells: reports.into_iter().map(|r| r.unwrap()).collect(),
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

pub const CSV_HEADER: &str = "model,n,estimator,criterion,penalty_ratio,freq,reps,excluded,seed";

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            let ratio = c.penalty_ratio.map(|r| r.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                c.model, c.n, c.estimator, c.criterion, ratio, c.freq, c.reps, c.excluded, c.seed
            )
            .unwrap();
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(format!("report json: {e}")))
    }

    pub fn find(&self, model: &ModelSpec, n: usize, estimator: Estimator, criterion: PenaltySpec) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.model == *model && c.n == n && c.estimator == estimator && c.criterion == criterion)
    }
}

/// One parsed row of a CSV report.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub model: ModelSpec,
    pub n: usize,
    pub estimator: Estimator,
    pub criterion: PenaltySpec,
    pub penalty_ratio: Option<f64>,
    pub freq: f64,
    pub reps: usize,
    pub excluded: usize,
    pub seed: u64,
}

impl From<&CellReport> for CsvRow {
    fn from(c: &CellReport) -> Self {
        CsvRow {
            model: c.model,
            n: c.n,
            estimator: c.estimator,
            criterion: c.criterion,
            penalty_ratio: c.penalty_ratio,
            freq: c.freq,
            reps: c.reps,
            excluded: c.excluded,
            seed: c.seed,
        }
    }
}

/// Rows are split from the right so the model field may contain commas.
pub fn parse_report_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(Error::parse("report csv header mismatch"));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let bad = |what: &str| Error::parse(format!("report row {}: bad {what}", i + 2));
            let mut right: Vec<&str> = line.rsplitn(9, ',').collect();
            if right.len() != 9 {
                return Err(bad("field count"));
            }
            right.reverse();
            Ok(CsvRow {
                model: right[0].parse()?,
                n: right[1].parse().map_err(|_| bad("n"))?,
                estimator: right[2].parse()?,
                criterion: right[3].parse()?,
                penalty_ratio: match right[4] {
                    "" => None,
                    s => Some(s.parse().map_err(|_| bad("penalty_ratio"))?),
                },
                freq: right[5].parse().map_err(|_| bad("freq"))?,
                reps: right[6].parse().map_err(|_| bad("reps"))?,
                excluded: right[7].parse().map_err(|_| bad("excluded"))?,
                seed: right[8].parse().map_err(|_| bad("seed"))?,
            })
        })
        .collect()
}

pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: &Path) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Json => report.to_json(),
    };
    crate::io::write_atomic(path, text.as_bytes())
}
