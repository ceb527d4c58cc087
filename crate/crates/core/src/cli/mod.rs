//! The `run`, `sweep`, `compare` and `check` commands.
//!
//! Commands render their CSV output in memory; [`write_outputs`] puts it on
//! disk. Floats are written in their shortest round-trip form (powers in
//! scientific notation, watts), with LF line endings and fixed column order,
//! so identical inputs give identical bytes.

pub mod config;

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

pub use config::{parse_config, serialize_config, Config, ConfigError, OutputFormat};

use crate::analysis::{
    check_standard_function, closed_form_jacobian, diagonal_mismatch, jacobian_at,
};
use crate::baselines::RuleRegistry;
use crate::error::Error;
use crate::experiments::{compare_rules, generate_scenario, run_sweep, MetricsRow};
use crate::game::{run_from_default_start, UtilityKind};

pub const RUN_HEADER: [&str; 5] = ["k", "device_id", "power_w", "sinr", "utility"];
pub const SWEEP_HEADER: [&str; 10] = [
    "axis",
    "value",
    "repetition",
    "seed",
    "mean_power_w",
    "mean_sinr",
    "iterations",
    "converged",
    "admitted",
    "energy_efficiency_proxy",
];
pub const COMPARE_HEADER: [&str; 6] = [
    "rule",
    "mean_power_w",
    "iterations",
    "mean_sinr",
    "converged_runs",
    "repetitions",
];
pub const CHECK_HEADER: [&str; 15] = [
    "rule",
    "samples",
    "seed",
    "positivity_ok",
    "monotonicity_ok",
    "scalability_ok",
    "clamp_activations",
    "counterexample_condition",
    "counterexample_device",
    "counterexample_lambda",
    "jacobian_n",
    "jacobian_determinant",
    "jacobian_scaled_determinant",
    "jacobian_nonsingular",
    "jacobian_diag_mismatch",
];
pub const JACOBIAN_HEADER: [&str; 3] = ["row", "col", "value"];

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Sim(Error),
    Io(String),
}

impl CliError {
    /// Process exit status: 1 for a run that diverged, 2 for configuration
    /// problems, 3 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Sim(Error::Diverged { .. }) => 1,
            CliError::Config(_) | CliError::Sim(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Sim(e) => write!(f, "error: {e}"),
            CliError::Io(e) => write!(f, "I/O error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Sim(e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutput {
    pub files: Vec<OutputFile>,
    /// Human-readable summary.
    pub summary: String,
    /// False when a check failed.
    pub success: bool,
}

impl CommandOutput {
    pub fn exit_code(&self) -> i32 {
        if self.success {
            0
        } else {
            1
        }
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|f| f.name == name)
            .map(|f| f.contents.as_str())
    }
}

fn sci(x: f64) -> String {
    format!("{x:e}")
}

fn csv_table<const N: usize>(
    header: [&str; N],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

fn text_table(csv: &str) -> String {
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    let cols = rows.first().map_or(0, Vec::len);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .map(|r| r.get(c).map_or(0, |s| s.len()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    rows.iter()
        .map(|r| {
            r.iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

pub fn cmd_run(cfg: &Config, registry: &RuleRegistry) -> Result<CommandOutput, CliError> {
    let rule = registry.get(&cfg.rule)?;
    let scenario = generate_scenario(&cfg.scenario)?;
    let run = run_from_default_start(&scenario, &cfg.game, rule.as_ref())?;

    let rows = run.trace.iter().flat_map(|rec| {
        (0..rec.powers.len()).map(move |i| {
            vec![
                rec.k.to_string(),
                i.to_string(),
                sci(rec.powers[i]),
                rec.sinrs[i].to_string(),
                sci(rec.utilities[i]),
            ]
        })
    });
    let csv = csv_table(RUN_HEADER, rows);
    let summary =
        format!(
        "rule {}: {} after {} iterations; mean power {} W, mean SINR {} (effective target {})\n",
        run.rule,
        if run.converged { "converged" } else { "not converged" },
        run.iterations_used,
        sci(run.mean_power()),
        run.mean_sinr(),
        cfg.game.effective_target(),
    );
    Ok(CommandOutput {
        files: vec![OutputFile {
            name: "run.csv".into(),
            contents: csv,
        }],
        summary,
        success: true,
    })
}

pub fn metrics_csv(axis: &str, rows: &[MetricsRow]) -> String {
    csv_table(
        SWEEP_HEADER,
        rows.iter().map(|r| {
            vec![
                axis.to_string(),
                r.axis_value.to_string(),
                r.repetition.to_string(),
                r.seed.to_string(),
                sci(r.mean_power_w),
                r.mean_sinr.to_string(),
                r.iterations.to_string(),
                r.converged.to_string(),
                r.admitted.to_string(),
                sci(r.energy_efficiency),
            ]
        }),
    )
}

pub fn cmd_sweep(cfg: &Config, registry: &RuleRegistry) -> Result<CommandOutput, CliError> {
    let spec = cfg.sweep_spec().ok_or_else(|| {
        CliError::Config(ConfigError {
            line: None,
            key: "sweep.axis".into(),
            message: "the sweep command needs sweep.axis and sweep.values".into(),
        })
    })?;
    let rows = run_sweep(&spec, &cfg.scenario, registry)?;
    let csv = metrics_csv(spec.axis.as_str(), &rows);
    let mut summary = format!(
        "sweep over {} with rule {}\n",
        spec.axis.as_str(),
        spec.rule
    );
    for &v in &spec.values {
        let cell: Vec<&MetricsRow> = rows.iter().filter(|r| r.axis_value == v).collect();
        let k = cell.len() as f64;
        summary.push_str(&format!(
            "  {} = {}: mean power {} W, mean SINR {}, mean iterations {}\n",
            spec.axis.as_str(),
            v,
            sci(cell.iter().map(|r| r.mean_power_w).sum::<f64>() / k),
            cell.iter().map(|r| r.mean_sinr).sum::<f64>() / k,
            cell.iter().map(|r| r.iterations as f64).sum::<f64>() / k,
        ));
    }
    Ok(CommandOutput {
        files: vec![OutputFile {
            name: "sweep.csv".into(),
            contents: csv,
        }],
        summary,
        success: true,
    })
}

pub fn cmd_compare(cfg: &Config, registry: &RuleRegistry) -> Result<CommandOutput, CliError> {
    let rows = compare_rules(
        &cfg.compare.rules,
        &cfg.scenario,
        &cfg.game,
        cfg.compare.repetitions,
        registry,
    )?;
    let csv = csv_table(
        COMPARE_HEADER,
        rows.iter().map(|r| {
            vec![
                r.rule.clone(),
                sci(r.mean_power_w),
                r.iterations.to_string(),
                r.mean_sinr.to_string(),
                r.converged_runs.to_string(),
                r.repetitions.to_string(),
            ]
        }),
    );
    let summary = text_table(&csv);
    Ok(CommandOutput {
        files: vec![OutputFile {
            name: "compare.csv".into(),
            contents: csv,
        }],
        summary,
        success: true,
    })
}

pub fn cmd_check(cfg: &Config, registry: &RuleRegistry) -> Result<CommandOutput, CliError> {
    let rule = registry.get(&cfg.rule)?;
    let scenario = generate_scenario(&cfg.scenario)?;
    let report = check_standard_function(
        &scenario,
        &cfg.game,
        rule.as_ref(),
        cfg.check.samples,
        cfg.check.seed,
    )?;

    let run = run_from_default_start(&scenario, &cfg.game, rule.as_ref())?;
    let jac = jacobian_at(
        &scenario,
        &cfg.game,
        rule.as_ref(),
        &run.final_powers,
        cfg.check.h_step,
    )?;
    let kind = match cfg.rule.as_str() {
        "unpriced" => Some(UtilityKind::Base),
        "priced" => Some(UtilityKind::Priced),
        _ => None,
    };
    let mismatch = match kind {
        Some(kind) => {
            let closed = closed_form_jacobian(&scenario, &cfg.game, kind, &run.final_powers)?;
            Some(diagonal_mismatch(&jac.matrix, &closed))
        }
        None => None,
    };

    let cx = report.counterexample.as_ref();
    let check_csv = csv_table(
        CHECK_HEADER,
        [vec![
            cfg.rule.clone(),
            report.samples.to_string(),
            cfg.check.seed.to_string(),
            report.positivity_ok.to_string(),
            report.monotonicity_ok.to_string(),
            report.scalability_ok.to_string(),
            report.clamp_activations.to_string(),
            cx.map_or(String::new(), |c| c.condition.as_str().to_string()),
            cx.map_or(String::new(), |c| c.device.to_string()),
            cx.and_then(|c| c.lambda)
                .map_or(String::new(), |l| l.to_string()),
            jac.n().to_string(),
            sci(jac.determinant),
            sci(jac.scaled_determinant),
            jac.nonsingular.to_string(),
            mismatch.map_or(String::new(), sci),
        ]],
    );
    let n = jac.n();
    let jac_csv = csv_table(
        JACOBIAN_HEADER,
        (0..n).flat_map(|i| {
            let m = &jac.matrix;
            (0..n).map(move |j| vec![i.to_string(), j.to_string(), sci(m[(i, j)])])
        }),
    );

    let success = report.all_ok() && jac.nonsingular;
    let summary = format!(
        "rule {}: positivity {}, monotonicity {}, scalability {} over {} samples; \
         Jacobian at the {} point is {} (scaled det {})\n",
        cfg.rule,
        report.positivity_ok,
        report.monotonicity_ok,
        report.scalability_ok,
        report.samples,
        if run.converged { "converged" } else { "final" },
        if jac.nonsingular {
            "non-singular"
        } else {
            "singular"
        },
        sci(jac.scaled_determinant),
    );
    Ok(CommandOutput {
        files: vec![
            OutputFile {
                name: "check.csv".into(),
                contents: check_csv,
            },
            OutputFile {
                name: "jacobian.csv".into(),
                contents: jac_csv,
            },
        ],
        summary,
        success,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Sweep,
    Compare,
    Check,
}

pub fn execute(
    command: Command,
    cfg: &Config,
    registry: &RuleRegistry,
) -> Result<CommandOutput, CliError> {
    match command {
        Command::Run => cmd_run(cfg, registry),
        Command::Sweep => cmd_sweep(cfg, registry),
        Command::Compare => cmd_compare(cfg, registry),
        Command::Check => cmd_check(cfg, registry),
    }
}

/// Writes CSV files into `dir`, or renders them as text tables when the
/// configured format is `text`. Returns what should be printed to stdout.
pub fn write_outputs(
    out: &CommandOutput,
    dir: &Path,
    format: OutputFormat,
) -> Result<String, CliError> {
    match format {
        OutputFormat::Csv => {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            let mut printed = out.summary.clone();
            for f in &out.files {
                let path = dir.join(&f.name);
                fs::write(&path, &f.contents).map_err(|e| io_err(&path, e))?;
                printed.push_str(&format!("wrote {}\n", path.display()));
            }
            Ok(printed)
        }
        OutputFormat::Text => {
            let mut printed = out.summary.clone();
            for f in &out.files {
                printed.push_str(&format!("\n{}\n", f.name));
                printed.push_str(&text_table(&f.contents));
            }
            Ok(printed)
        }
    }
}

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
