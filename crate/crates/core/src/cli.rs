//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification or runtime failure, 2 usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::estimation::{
    c_opt_closed, c_tomo_closed, classical_fisher, indicatrix_points, mub_bounds_at, qcr_min_trace, rot_weight,
    weighted_trace_inverse, RotWeight,
};
use crate::measurement::{mub_bases, qubit_tomography_povm, MeasurementError};
use crate::simulator::{format_number, monte_carlo, summaries_to_csv, EstimatorKind, RunConfig, WeightSelector};
use crate::state::{qubit_qfi, qubit_slds, MubModelPoint, StokesPoint};
use crate::verify::{run_suite, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Largest allowed disagreement between closed forms and numeric Fisher values.
pub const BOUNDS_DISCREPANCY_TOL: f64 = 1e-6;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => m,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn failure(msg: impl std::fmt::Display) -> CliError {
    CliError::Failure(msg.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "qest", version, about = "Cramér–Rao bounds, optimal qubit measurements and adaptive tomography")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Write data here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a polyline SVG plot to this path.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundsWeight {
    Identity,
    Qfi,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimWeight {
    Identity,
    Qfi,
    Tomography,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorChoice {
    Both,
    Tomo,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteChoice {
    All,
    Lemmas,
    Bounds,
    McSmoke,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal and tomography bounds along a ray for a rotationally symmetric weight.
    Bounds {
        #[arg(long, value_enum, default_value = "identity")]
        weight: BoundsWeight,
        /// Transverse value f of a custom weight.
        #[arg(long)]
        f: Option<f64>,
        /// Radial value g of a custom weight.
        #[arg(long)]
        g: Option<f64>,
        #[arg(long, default_value = "1,1,1")]
        dir: String,
        #[arg(long, default_value_t = 0.99)]
        rmax: f64,
        /// Number of grid intervals between 0 and rmax.
        #[arg(long, default_value_t = 99)]
        steps: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo comparison of tomography and adaptive estimation.
    Simulate {
        #[arg(long, default_value = "0.55,0.55,0.55")]
        x0: String,
        #[arg(long, value_enum, default_value = "qfi")]
        weight: SimWeight,
        #[arg(long, default_value_t = 4000)]
        m: usize,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value = "both")]
        estimator: EstimatorChoice,
        /// Re-derive the adaptive measurement every this many steps.
        #[arg(long, default_value_t = 1)]
        adapt_every: usize,
        /// JSON run configuration; replaces x0, weight, m, reps, seed and adapt-every.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Points of the indicatrix vᵀHv = 1 in a coordinate plane.
    Indicatrix {
        #[arg(long, default_value = "0,0,0")]
        x: String,
        #[arg(long, value_enum, default_value = "identity")]
        weight: SimWeight,
        #[arg(long, default_value = "1,2")]
        plane: String,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Mutually unbiased bases: dump a family or sweep the bounds.
    Mub {
        #[arg(long)]
        q: usize,
        #[arg(long, conflicts_with = "bounds")]
        dump: bool,
        #[arg(long)]
        bounds: bool,
        /// Model direction (q²−1 comma-separated coordinates); defaults to v₁₁.
        #[arg(long)]
        dir: Option<String>,
        #[arg(long, default_value_t = 0.99)]
        rmax: f64,
        #[arg(long, default_value_t = 99)]
        steps: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run the self-check suites.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: SuiteChoice,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the JSON report instead of text.
        #[arg(long)]
        json: bool,
    },
}

/// Parses `a,b,c` into floats.
pub fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| usage(format!("'{t}' is not a number: {e}")))).collect()
}

fn parse_point(s: &str, flag: &str) -> Result<StokesPoint, CliError> {
    let v = parse_list(s)?;
    let arr: [f64; 3] = v.try_into().map_err(|_| usage(format!("{flag} needs three coordinates")))?;
    StokesPoint::new(arr).map_err(|e| usage(format!("{flag}: {e}")))
}

fn parse_direction(s: &str, len: usize) -> Result<Vec<f64>, CliError> {
    let v = parse_list(s)?;
    if v.len() != len {
        return Err(usage(format!("--dir needs {len} coordinates, got {}", v.len())));
    }
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(usage("--dir must be a nonzero finite vector"));
    }
    Ok(v.iter().map(|a| a / n).collect())
}

fn radius_grid(rmax: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    if !(0.0..1.0).contains(&rmax) {
        return Err(usage(format!("--rmax {rmax} must lie in [0, 1)")));
    }
    if steps == 0 {
        return Err(usage("--steps must be positive"));
    }
    Ok((0..=steps).map(|k| rmax * k as f64 / steps as f64).collect())
}

/// A data table that renders as CSV or JSON (array of records).
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let records: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|row| self.columns.iter().cloned().zip(row.iter().map(|v| serde_json::json!(v))).collect())
            .collect();
        serde_json::to_string_pretty(&records).expect("finite numbers serialize")
    }

    fn column(&self, name: &str) -> Vec<f64> {
        let i = self.columns.iter().position(|c| c == name).expect("known column");
        self.rows.iter().map(|r| r[i]).collect()
    }
}

/// Minimal SVG with one polyline per series, scaled to the joint bounding box.
pub fn svg_polylines(title: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const PAD: f64 = 40.0;
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let pts = series.iter().flat_map(|(_, p)| p.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let sx = if x1 > x0 { (W - 2.0 * PAD) / (x1 - x0) } else { 1.0 };
    let sy = if y1 > y0 { (H - 2.0 * PAD) / (y1 - y0) } else { 1.0 };
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <title>{title}</title>\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    );
    let _ = writeln!(
        out,
        "<text x=\"{PAD}\" y=\"{}\" font-size=\"12\">x: [{x0:.4}, {x1:.4}]  y: [{y0:.4}, {y1:.4}]</text>",
        H - 10.0
    );
    for (k, (name, points)) in series.iter().enumerate() {
        let coords: Vec<String> = points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", PAD + (x - x0) * sx, H - PAD - (y - y0) * sy))
            .collect();
        let color = COLORS[k % COLORS.len()];
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"><title>{name}</title></polyline>",
            coords.join(" ")
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{name}</text>",
            W - 150.0,
            20.0 + 15.0 * k as f64
        );
    }
    out.push_str("</svg>\n");
    out
}

fn emit(output: &OutputArgs, data: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &output.out {
        Some(path) => write_file(path, data),
        None => stdout.write_all(data.as_bytes()).map_err(failure),
    }
}

fn write_file(path: &Path, data: &str) -> Result<(), CliError> {
    std::fs::write(path, data).map_err(|e| failure(format!("cannot write {}: {e}", path.display())))
}

fn emit_table(
    table: &Table,
    output: &OutputArgs,
    svg: impl FnOnce(&Table) -> String,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let data = match output.format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    };
    emit(output, &data, stdout)?;
    if let Some(path) = &output.svg {
        write_file(path, &svg(table))?;
    }
    Ok(())
}

/// Rows `(r, c, cT, discrepancy)`; the discrepancy compares the closed forms
/// with a numeric Fisher computation at the same point.
pub fn bounds_table(spec: RotWeight, dir: &[f64], radii: &[f64]) -> Result<Table, CliError> {
    let mut table = Table::new(&["r", "c", "cT", "discrepancy"]);
    let tomo = qubit_tomography_povm();
    for &r in radii {
        let x = StokesPoint::new([dir[0] * r, dir[1] * r, dir[2] * r]).map_err(|e| usage(e.to_string()))?;
        let h = rot_weight(spec, &x);
        let c = c_opt_closed(spec, r);
        let ct = c_tomo_closed(spec, &x);
        let c_num = qcr_min_trace(&qubit_qfi(&x), &h, 2).map_err(failure)?.bound;
        let g = classical_fisher(&qubit_slds(&x), &tomo).map_err(failure)?;
        let ct_num = weighted_trace_inverse(&h, &g).map_err(failure)?;
        let discrepancy = (c - c_num).abs().max((ct - ct_num).abs());
        table.rows.push(vec![r, c, ct, discrepancy]);
    }
    Ok(table)
}

fn cmd_bounds(
    weight: BoundsWeight,
    f: Option<f64>,
    g: Option<f64>,
    dir: &str,
    rmax: f64,
    steps: usize,
    output: &OutputArgs,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let spec = match weight {
        BoundsWeight::Identity => RotWeight::Identity,
        BoundsWeight::Qfi => RotWeight::Qfi,
        BoundsWeight::Custom => {
            let (f, g) = f.zip(g).ok_or_else(|| usage("--weight custom needs --f and --g"))?;
            if !(f > 0.0 && g > 0.0 && f.is_finite() && g.is_finite()) {
                return Err(usage("--f and --g must be positive"));
            }
            RotWeight::Constant { f, g }
        }
    };
    if weight != BoundsWeight::Custom && (f.is_some() || g.is_some()) {
        return Err(usage("--f and --g only apply to --weight custom"));
    }
    let dir = parse_direction(dir, 3)?;
    let radii = radius_grid(rmax, steps)?;
    let table = bounds_table(spec, &dir, &radii)?;
    emit_table(
        &table,
        output,
        |t| {
            let r = t.column("r");
            let line = |name: &str| r.iter().copied().zip(t.column(name)).collect::<Vec<_>>();
            svg_polylines("bounds", &[("c", line("c")), ("cT", line("cT"))])
        },
        stdout,
    )?;
    let worst = table.column("discrepancy").into_iter().fold(0.0, f64::max);
    if worst >= BOUNDS_DISCREPANCY_TOL {
        return Err(failure(format!("closed forms disagree with numeric values by {worst:e}")));
    }
    Ok(())
}

fn sim_weight(w: SimWeight) -> WeightSelector {
    match w {
        SimWeight::Identity => WeightSelector::Identity,
        SimWeight::Qfi => WeightSelector::Qfi,
        SimWeight::Tomography => WeightSelector::Tomography,
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    x0: &str,
    weight: SimWeight,
    m: usize,
    reps: usize,
    seed: u64,
    estimator: EstimatorChoice,
    adapt_every: usize,
    config: Option<&Path>,
    output: &OutputArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let cfg = match config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<RunConfig>(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => {
            let mut cfg = RunConfig::new(parse_point(x0, "--x0")?, sim_weight(weight), m, reps, seed);
            cfg.adapt_update_every = adapt_every;
            cfg
        }
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let kinds: &[EstimatorKind] = match estimator {
        EstimatorChoice::Both => &[EstimatorKind::Tomography, EstimatorKind::Adaptive],
        EstimatorChoice::Tomo => &[EstimatorKind::Tomography],
        EstimatorChoice::Adaptive => &[EstimatorKind::Adaptive],
    };
    let summaries = monte_carlo(&cfg, kinds, None).map_err(failure)?;
    for s in &summaries {
        if s.opt_warnings as f64 > 0.01 * s.total_steps as f64 {
            let _ = writeln!(
                stderr,
                "warning: {} MLE warnings in {} steps ({} estimator)",
                s.opt_warnings,
                s.total_steps,
                s.estimator.name()
            );
        }
    }
    let data = match output.format {
        Format::Csv => summaries_to_csv(&summaries),
        Format::Json => serde_json::to_string_pretty(&summaries).map_err(failure)? + "\n",
    };
    emit(output, &data, stdout)?;
    if let Some(path) = &output.svg {
        let mut series = Vec::new();
        let names: Vec<String> = summaries.iter().map(|s| format!("{} 2mB", s.estimator.name())).collect();
        for (s, name) in summaries.iter().zip(&names) {
            let pts = s.checkpoints.iter().map(|&m| (m as f64).log10()).zip(s.mean_bures.iter().copied()).collect();
            series.push((name.as_str(), pts));
        }
        if let Some(s) = summaries.first() {
            let lo = 0.0;
            let hi = (cfg.m_max as f64).log10();
            series.push(("cOpt", vec![(lo, s.theoretical_opt), (hi, s.theoretical_opt)]));
            series.push(("cTomo", vec![(lo, s.theoretical_tomo), (hi, s.theoretical_tomo)]));
        }
        write_file(path, &svg_polylines("simulate (x: log10 m)", &series))?;
    }
    Ok(())
}

fn cmd_indicatrix(
    x: &str,
    weight: SimWeight,
    plane: &str,
    n: usize,
    output: &OutputArgs,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let point = parse_point(x, "--x")?;
    let axes: Vec<usize> = plane
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| usage(format!("bad --plane '{plane}'"))))
        .collect::<Result<_, _>>()?;
    let (a, b) = match axes.as_slice() {
        [a, b] if (1..=3).contains(a) && (1..=3).contains(b) && a != b => (a - 1, b - 1),
        _ => return Err(usage(format!("--plane must name two distinct axes in 1..3, got '{plane}'"))),
    };
    if n == 0 {
        return Err(usage("--n must be positive"));
    }
    let h = sim_weight(weight).resolve(&point);
    let pts = indicatrix_points(&h, (a, b), n).map_err(failure)?;
    let mut table = Table::new(&["v1", "v2"]);
    table.rows = pts.iter().map(|p| vec![p[0], p[1]]).collect();
    emit_table(
        &table,
        output,
        |t| {
            let mut closed: Vec<(f64, f64)> = t.rows.iter().map(|r| (r[0], r[1])).collect();
            if let Some(first) = closed.first().copied() {
                closed.push(first);
            }
            svg_polylines("indicatrix", &[("vᵀHv = 1", closed)])
        },
        stdout,
    )
}

#[derive(Serialize)]
struct MubDump {
    #[serde(flatten)]
    family: crate::measurement::MubJson,
    passed: bool,
}

fn cmd_mub(
    q: usize,
    dump: bool,
    bounds: bool,
    dir: Option<&str>,
    rmax: f64,
    steps: usize,
    output: &OutputArgs,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let family = mub_bases(q).map_err(|e| match e {
        MeasurementError::UnsupportedDimension(_) => usage(e.to_string()),
        other => failure(other),
    })?;
    if dump == bounds {
        return Err(usage("choose exactly one of --dump or --bounds"));
    }
    if dump {
        let (ortho, overlap) = family.overlap_errors();
        let passed = ortho <= 1e-9 && overlap <= 1e-9;
        let data = match output.format {
            Format::Json => {
                serde_json::to_string_pretty(&MubDump { family: family.to_json(), passed }).map_err(failure)? + "\n"
            }
            Format::Csv => {
                let mut s = String::from("basis,vector,component,re,im\n");
                for (alpha, basis) in family.bases().iter().enumerate() {
                    for i in 0..q {
                        for k in 0..q {
                            let z = basis[(k, i)];
                            let _ = writeln!(
                                s,
                                "{},{},{},{},{}",
                                alpha + 1,
                                i + 1,
                                k + 1,
                                format_number(z.re),
                                format_number(z.im)
                            );
                        }
                    }
                }
                s
            }
        };
        emit(output, &data, stdout)?;
        if !passed {
            return Err(failure(format!("overlap check failed: orthonormality {ortho:e}, unbiasedness {overlap:e}")));
        }
        return Ok(());
    }
    let n = MubModelPoint::n_params(q);
    let direction = match dir {
        Some(s) => parse_direction(s, n)?,
        None => {
            let mut v = vec![0.0; n];
            v[MubModelPoint::index(q, 1, 1)] = 1.0;
            v
        }
    };
    let radii = radius_grid(rmax, steps)?;
    let mut table = Table::new(&["r", "cGM", "cT"]);
    for r in radii {
        let row = mub_bounds_at(&family, &direction, r).map_err(|e| usage(format!("r = {r}: {e}")))?;
        table.rows.push(vec![row.r, row.c_gm, row.c_tomo]);
    }
    emit_table(
        &table,
        output,
        |t| {
            let r = t.column("r");
            let line = |name: &str| r.iter().copied().zip(t.column(name)).collect::<Vec<_>>();
            svg_polylines("mub bounds", &[("cGM", line("cGM")), ("cT", line("cT"))])
        },
        stdout,
    )
}

fn cmd_verify(
    suite: SuiteChoice,
    seed: u64,
    out: Option<&Path>,
    json: bool,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let suite = match suite {
        SuiteChoice::All => Suite::All,
        SuiteChoice::Lemmas => Suite::Lemmas,
        SuiteChoice::Bounds => Suite::Bounds,
        SuiteChoice::McSmoke => Suite::McSmoke,
    };
    let report = run_suite(suite, seed);
    let json_text = serde_json::to_string_pretty(&report).map_err(failure)? + "\n";
    let text = if json { json_text.clone() } else { report.text() };
    stdout.write_all(text.as_bytes()).map_err(failure)?;
    if let Some(path) = out {
        write_file(path, &json_text)?;
    }
    if report.passed {
        Ok(())
    } else {
        Err(failure("verification failed"))
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if code == EXIT_OK {
                let _ = stdout.write_all(rendered.as_bytes());
            } else {
                let _ = stderr.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Bounds { weight, f, g, dir, rmax, steps, output } => {
            cmd_bounds(*weight, *f, *g, dir, *rmax, *steps, output, stdout)
        }
        Command::Simulate { x0, weight, m, reps, seed, estimator, adapt_every, config, output } => cmd_simulate(
            x0,
            *weight,
            *m,
            *reps,
            *seed,
            *estimator,
            *adapt_every,
            config.as_deref(),
            output,
            stdout,
            stderr,
        ),
        Command::Indicatrix { x, weight, plane, n, output } => cmd_indicatrix(x, *weight, plane, *n, output, stdout),
        Command::Mub { q, dump, bounds, dir, rmax, steps, output } => {
            cmd_mub(*q, *dump, *bounds, dir.as_deref(), *rmax, *steps, output, stdout)
        }
        Command::Verify { suite, seed, out, json } => cmd_verify(*suite, *seed, out.as_deref(), *json, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.exit_code()
        }
    }
}
