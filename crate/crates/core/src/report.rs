//! Run configuration and the CSV-producing commands behind the CLI.
//!
//! All numeric fields use `.` decimals, no thousands separators and LF line
//! endings. Every command is a pure function of its configuration.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::baseline::compare_lengths;
use crate::decision::{build_decision_matrix, DecisionMatrix, TestConfig};
use crate::error::{Error, Result};
use crate::grid::ParameterGrid;
use crate::mc::{mc_validate_binomial, BinomialBetaModel, McAgreement, McConfig};
use crate::power::{average_power_report, mixed_power_given_eta, power_curve, table1, Table1};
use crate::procedure::procedures;
use crate::special::{BetaPrior, BinomialModel};
use crate::util::{format_sig, parse_field};
use crate::weighting::weightings;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: u64,
    pub level: f64,
    pub prior_a: f64,
    pub prior_b: f64,
    pub grid_points: usize,
    pub grid_min: f64,
    pub grid_max: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 100,
            level: 0.05,
            prior_a: 0.5,
            prior_b: 0.5,
            grid_points: ParameterGrid::DEFAULT_COUNT,
            grid_min: ParameterGrid::DEFAULT_MIN,
            grid_max: ParameterGrid::DEFAULT_MAX,
            seed: 1,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Applies one `key=value` setting. Keys match the long flag names
    /// without dashes (`n`, `alpha`, `prior-a`, ..., `out`); `_` may replace `-`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match key.as_str() {
            "n" => self.n = parse_field(value, "n")?,
            "alpha" | "level" => self.level = parse_field(value, "alpha")?,
            "prior-a" => self.prior_a = parse_field(value, "prior-a")?,
            "prior-b" => self.prior_b = parse_field(value, "prior-b")?,
            "grid-points" => self.grid_points = parse_field(value, "grid-points")?,
            "grid-min" => self.grid_min = parse_field(value, "grid-min")?,
            "grid-max" => self.grid_max = parse_field(value, "grid-max")?,
            "seed" => self.seed = parse_field(value, "seed")?,
            "out" | "output-dir" => self.output_dir = PathBuf::from(value),
            other => return Err(Error::Parse(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    /// Reads `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_file(&fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    pub fn prior(&self) -> Result<BetaPrior> {
        BetaPrior::new(self.prior_a, self.prior_b)
    }

    pub fn grid(&self) -> Result<ParameterGrid> {
        ParameterGrid::uniform(self.grid_points, self.grid_min, self.grid_max)
    }

    pub fn test_config(&self) -> Result<TestConfig> {
        self.test_config_with(self.prior()?)
    }

    pub fn test_config_with(&self, prior: BetaPrior) -> Result<TestConfig> {
        TestConfig::new(self.level, BinomialModel::new(self.n)?, prior, self.grid()?)
    }

    fn create(&self, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
        fs::create_dir_all(&self.output_dir)?;
        let path = self.output_dir.join(name);
        let file = File::create(&path)?;
        Ok((path, BufWriter::new(file)))
    }
}

fn finish(mut w: BufWriter<File>) -> Result<()> {
    w.flush()?;
    Ok(())
}

pub struct ConstructOutput {
    pub matrix: DecisionMatrix,
    pub files: Vec<PathBuf>,
}

/// Writes `decision.csv` (long form) and `decision_rows.csv` (per-null summary).
pub fn cmd_construct(cfg: &RunConfig) -> Result<ConstructOutput> {
    let matrix = build_decision_matrix(&cfg.test_config()?);
    let (decision_path, mut w) = cfg.create("decision.csv")?;
    matrix.write_csv(&mut w)?;
    finish(w)?;
    let (rows_path, mut w) = cfg.create("decision_rows.csv")?;
    matrix.write_row_summary(&mut w)?;
    finish(w)?;
    Ok(ConstructOutput {
        matrix,
        files: vec![decision_path, rows_path],
    })
}

pub struct CiOutput {
    pub file: PathBuf,
    pub summary: Vec<String>,
}

/// Writes `ci.csv` with `method,x,lower,upper,contiguous`, one line per
/// requested outcome (all outcomes when `x` is `None`).
pub fn cmd_ci(cfg: &RunConfig, x: Option<u64>, method: &str) -> Result<CiOutput> {
    let test = cfg.test_config()?;
    let registry = procedures();
    let procedure = registry.get(method)?(&test);
    let xs: Vec<u64> = match x {
        Some(x) => {
            test.model().check_outcome(x)?;
            vec![x]
        }
        None => test.model().outcomes().collect(),
    };
    let (file, mut w) = cfg.create("ci.csv")?;
    writeln!(w, "method,x,lower,upper,contiguous")?;
    let mut summary = Vec::with_capacity(xs.len());
    for x in xs {
        match procedure.interval(x)? {
            Some(iv) => {
                writeln!(
                    w,
                    "{},{},{:.6},{:.6},{}",
                    procedure.name(),
                    x,
                    iv.lower,
                    iv.upper,
                    iv.contiguous
                )?;
                summary.push(format!(
                    "x={x}: [{:.4}, {:.4}]{}",
                    iv.lower,
                    iv.upper,
                    if iv.contiguous { "" } else { " (has gaps)" }
                ));
            }
            None => {
                writeln!(w, "{},{},,,false", procedure.name(), x)?;
                summary.push(format!("x={x}: empty region"));
            }
        }
    }
    finish(w)?;
    Ok(CiOutput { file, summary })
}

/// Default data-generating parameters for power curves.
pub const DEFAULT_POWER_THETAS: [f64; 3] = [0.5, 0.55, 0.6];

/// Writes `power_curves.csv` (`theta,eta,power`), `mixed_power.csv`
/// (`eta,mixed_power`, closed form) and `avg_power.csv` (`theta,avg_power`
/// over grid nulls, by `weighting`).
pub fn cmd_power(cfg: &RunConfig, thetas: &[f64], weighting: &str) -> Result<Vec<PathBuf>> {
    if thetas.is_empty() {
        return Err(Error::config("at least one theta is required"));
    }
    let weights = weightings();
    let weighting = weights.get(weighting)?;
    let test = cfg.test_config()?;
    let matrix = build_decision_matrix(&test);

    let (curves_path, mut w) = cfg.create("power_curves.csv")?;
    writeln!(w, "theta,eta,power")?;
    for &theta in thetas {
        power_curve(&matrix, theta)?.write_rows(&mut w)?;
    }
    finish(w)?;

    let (mixed_path, mut w) = cfg.create("mixed_power.csv")?;
    writeln!(w, "eta,mixed_power")?;
    for (i, row) in matrix.rows().iter().enumerate() {
        writeln!(
            w,
            "{:.6},{}",
            row.eta,
            format_sig(mixed_power_given_eta(&matrix, i)?, 12)
        )?;
    }
    finish(w)?;

    let report = average_power_report(&matrix, test.prior(), weighting);
    let (avg_path, mut w) = cfg.create("avg_power.csv")?;
    writeln!(w, "theta,avg_power")?;
    for (theta, v) in report.thetas.iter().zip(&report.per_theta) {
        writeln!(w, "{:.6},{}", theta, format_sig(*v, 12))?;
    }
    finish(w)?;
    Ok(vec![curves_path, mixed_path, avg_path])
}

pub struct Table1Output {
    pub table: Table1,
    pub file: PathBuf,
}

/// Writes the 2x2 `table1.csv` crossing two tests with two averaging priors.
pub fn cmd_table1(
    cfg: &RunConfig,
    informative: BetaPrior,
    non_informative: BetaPrior,
    weighting: &str,
) -> Result<Table1Output> {
    let weights = weightings();
    let weighting = weights.get(weighting)?;
    let inf = build_decision_matrix(&cfg.test_config_with(informative)?);
    let non = build_decision_matrix(&cfg.test_config_with(non_informative)?);
    let table = table1(
        [("informative", &inf), ("non_informative", &non)],
        weighting,
    )?;
    let (file, mut w) = cfg.create("table1.csv")?;
    table.write_csv(&mut w)?;
    finish(w)?;
    Ok(Table1Output { table, file })
}

pub struct CompareOutput {
    pub file: PathBuf,
    pub mean_cp_length: f64,
    pub mean_proposed_length: f64,
    pub grid_step: f64,
}

/// Writes `compare_cp.csv` with `x,cp_lower,cp_upper,prop_lower,prop_upper`.
pub fn cmd_compare_cp(cfg: &RunConfig) -> Result<CompareOutput> {
    let test = cfg.test_config()?;
    let matrix = build_decision_matrix(&test);
    let cmp = compare_lengths(&matrix, test.level())?;
    let (file, mut w) = cfg.create("compare_cp.csv")?;
    cmp.write_csv(&mut w)?;
    finish(w)?;
    Ok(CompareOutput {
        file,
        mean_cp_length: cmp.mean_cp_length,
        mean_proposed_length: cmp.mean_proposed_length,
        grid_step: cmp.grid_step,
    })
}

pub struct McValidateOutput {
    pub file: PathBuf,
    pub agreement: McAgreement,
    pub passed: bool,
}

/// Writes `mc_validate.csv` (`eta,agreement`, blank where the row failed
/// its precision floor) and checks the overall agreement against `min_agreement`.
/// Seed and level come from `cfg`; `mc` supplies sample counts and the floor.
pub fn cmd_mc_validate(
    cfg: &RunConfig,
    mc: &McConfig,
    min_agreement: f64,
) -> Result<McValidateOutput> {
    let test = cfg.test_config()?;
    let exact = build_decision_matrix(&test);
    let model = BinomialBetaModel::new(*test.model(), *test.prior());
    let mc = McConfig {
        seed: cfg.seed,
        level: test.level(),
        ..*mc
    };
    let agreement = mc_validate_binomial(&exact, &model, &mc)?;
    let (file, mut w) = cfg.create("mc_validate.csv")?;
    writeln!(w, "eta,agreement")?;
    for (eta, a) in agreement.etas.iter().zip(&agreement.per_row) {
        match a {
            Some(a) => writeln!(w, "{:.6},{}", eta, format_sig(*a, 12))?,
            None => writeln!(w, "{:.6},", eta)?,
        }
    }
    finish(w)?;
    let passed = agreement.overall >= min_agreement;
    Ok(McValidateOutput {
        file,
        agreement,
        passed,
    })
}
