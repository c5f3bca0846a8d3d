//! Command-line front end. Every command writes a UTF-8 CSV with a single
//! header line, to stdout or to `--out`.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 when a flow aborts.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::{schrodinger_gap, EigenConfig};
use crate::flow_rhs::SchemeSpec;
use crate::instanton::instanton_gap;
use crate::integrator::{integrate, sweep_m, FlowResult, SteppingConfig, Termination};
use crate::model::{ModelParams, SpatialGrid};
use crate::stencil::derivative;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_ABORT: i32 = 2;

/// The sixteen `(m^2, lambda)` rows of the reference table.
pub const TABLE1_ROWS: [(f64, f64); 16] = [
    (1.0, 1.0),
    (1.0, 0.4),
    (1.0, 0.1),
    (1.0, 0.05),
    (1.0, 0.03),
    (1.0, 0.02),
    (-1.0, 0.4),
    (-1.0, 0.3),
    (-1.0, 0.2),
    (-1.0, 0.1),
    (-1.0, 0.07),
    (-1.0, 0.06),
    (-1.0, 0.05),
    (-1.0, 0.04),
    (-1.0, 0.03),
    (-1.0, 0.02),
];

pub const FIG1_PAIRS: [(f64, f64); 2] = [(1.0, 0.4), (-1.0, 0.05)];
pub const FIG1_DEFAULT_M: [u32; 7] = [5, 8, 10, 15, 20, 30, 50];
pub const FIG2_DEFAULT_KS: [f64; 7] = [1500.0, 10.0, 1.0, 0.5, 0.2, 0.1, 0.0];

#[derive(Debug, Parser)]
#[command(name = "dwflow", version, about = "RG flows and exact gaps for the quantum double well")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one flow and print its run record.
    Flow(FlowArgs),
    /// Exact ground/first-excited energies from the eigensolver.
    Exact(ExactArgs),
    /// Dilute instanton gas gap (m^2 = -1 normalization).
    Instanton(InstantonArgs),
    /// Reproduce the table of gap determinations.
    Table1(Table1Args),
    /// V''(0,0) and Z(0,0) against 1/m.
    Fig1(Fig1Args),
    /// Snapshots of V''(k,x) and Z(k,x).
    Fig2(Fig2Args),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Wh,
    PtLo,
    PtNlo,
    PtM,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = ModelParams::DEFAULT_CUTOFF)]
    pub cutoff: f64,
    /// Half-width of the spatial domain; defaults to max(8, 3 x*).
    #[arg(long)]
    pub xmax: Option<f64>,
    #[arg(long, default_value_t = SpatialGrid::DEFAULT_POINTS)]
    pub nx: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub kmin: f64,
    #[arg(long = "rel-tol", default_value_t = 1e-7)]
    pub rel_tol: f64,
    #[arg(long = "abs-tol", default_value_t = 1e-9)]
    pub abs_tol: f64,
    #[arg(long = "max-steps", default_value_t = 1_000_000)]
    pub max_steps: usize,
}

impl GridArgs {
    pub fn stepping(&self) -> SteppingConfig {
        SteppingConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            k_min: self.kmin,
            max_steps: self.max_steps,
            ..SteppingConfig::default()
        }
    }

    pub fn grid(&self, params: &ModelParams) -> Result<SpatialGrid> {
        match self.xmax {
            Some(x) => SpatialGrid::new(x, self.nx),
            None => SpatialGrid::for_params(params, self.nx),
        }
    }

    pub fn params(&self, m2: f64, lambda: f64) -> Result<ModelParams> {
        ModelParams::new(m2, lambda, self.cutoff)
    }
}

#[derive(Debug, Clone, Args)]
pub struct FlowArgs {
    #[arg(long, value_enum)]
    pub scheme: SchemeArg,
    /// Regulator index for `pt-m`.
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    pub m2: f64,
    #[arg(long)]
    pub lambda: f64,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Print step statistics to stderr.
    #[arg(long, short)]
    pub verbose: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExactArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub m2: f64,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 12.0)]
    pub xmax: f64,
    #[arg(long, default_value_t = 8001)]
    pub nx: usize,
    /// Skip Richardson extrapolation.
    #[arg(long)]
    pub no_refine: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct InstantonArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub lambda: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Table1Args {
    /// Restrict to rows, e.g. `--only m2=-1,lambda=0.06` (repeatable).
    #[arg(long)]
    pub only: Vec<String>,
    /// Columns to compute, from wh, pt-lo, exact, pt-nlo.
    #[arg(long, value_delimiter = ',', default_value = "wh,pt-lo,exact,pt-nlo")]
    pub schemes: Vec<String>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Fig1Args {
    /// Comma-separated regulator indices; an empty string keeps only m = inf.
    #[arg(long = "m-list", value_delimiter = ',', default_value = "5,8,10,15,20,30,50")]
    pub m_list: Vec<String>,
    /// Single parameter pair instead of the two default ones.
    #[arg(long, allow_hyphen_values = true, requires = "lambda")]
    pub m2: Option<f64>,
    #[arg(long, requires = "m2")]
    pub lambda: Option<f64>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Fig2Args {
    #[arg(long, allow_hyphen_values = true, default_value_t = -1.0)]
    pub m2: f64,
    #[arg(long, default_value_t = 0.06)]
    pub lambda: f64,
    /// Snapshot scales, descending; 0 stands for the end of the flow.
    #[arg(long, value_delimiter = ',', default_value = "1500,10,1,0.5,0.2,0.1,0")]
    pub ks: Vec<f64>,
    /// Emit every n-th grid node.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Formats with six significant digits.
pub fn fmt6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-5..6).contains(&e) {
        format!("{:.*}", (5 - e) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt6).unwrap_or_default()
}

/// One flow run, serialized as a CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scheme: SchemeSpec,
    pub m2: f64,
    pub lambda: f64,
    pub delta_e: Option<f64>,
    pub v2_origin: f64,
    pub z_origin: f64,
    pub termination: Termination,
    pub wall_seconds: f64,
}

impl RunRecord {
    pub const HEADER: &'static str =
        "scheme,m,m2,lambda,delta_e,v2_origin,z_origin,termination,wall_seconds";

    pub fn from_result(params: &ModelParams, result: &FlowResult, wall_seconds: f64) -> Self {
        Self {
            scheme: result.scheme,
            m2: params.m_squared,
            lambda: params.lambda,
            delta_e: result.delta_e,
            v2_origin: result.v2_origin,
            z_origin: result.z_origin,
            termination: result.termination,
            wall_seconds,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{:.3}",
            self.scheme.tag(),
            self.scheme.m().map(|m| m.to_string()).unwrap_or_default(),
            fmt6(self.m2),
            fmt6(self.lambda),
            opt(self.delta_e),
            fmt6(self.v2_origin),
            fmt6(self.z_origin),
            self.termination,
            self.wall_seconds
        )
    }
}

fn scheme_from(arg: SchemeArg, m: Option<u32>) -> Result<SchemeSpec> {
    let s = match arg {
        SchemeArg::Wh => SchemeSpec::WegnerHoughton,
        SchemeArg::PtLo => SchemeSpec::ProperTimeLO,
        SchemeArg::PtNlo => SchemeSpec::ProperTimeNLO,
        SchemeArg::PtM => SchemeSpec::ProperTimeFiniteM(
            m.ok_or_else(|| Error::InvalidScheme("--scheme pt-m requires --m".into()))?,
        ),
    };
    s.validate()?;
    Ok(s)
}

fn emit(out: &Option<PathBuf>, text: &str) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

/// Output of a command: CSV text plus the exit code it warrants.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub csv: String,
    pub exit_code: i32,
}

pub fn cmd_flow(args: &FlowArgs) -> Result<Output> {
    let scheme = scheme_from(args.scheme, args.m)?;
    let params = args.grid.params(args.m2, args.lambda)?;
    let grid = args.grid.grid(&params)?;
    let start = Instant::now();
    let result = integrate(&params, scheme, &grid, &args.grid.stepping(), &[])?;
    let record = RunRecord::from_result(&params, &result, start.elapsed().as_secs_f64());
    if args.verbose {
        eprintln!("{:#?}", result.diagnostics);
    }
    let exit_code = if result.termination.is_success() { EXIT_OK } else { EXIT_ABORT };
    Ok(Output {
        csv: format!("{}\n{}\n", RunRecord::HEADER, record.csv_row()),
        exit_code,
    })
}

pub fn cmd_exact(args: &ExactArgs) -> Result<Output> {
    let params = ModelParams::new(args.m2, args.lambda, ModelParams::DEFAULT_CUTOFF)?;
    let cfg = EigenConfig {
        x_max: args.xmax,
        n_points: args.nx,
        refine: !args.no_refine,
    };
    let r = schrodinger_gap(&params, &cfg)?;
    Ok(Output {
        csv: format!(
            "m2,lambda,e0,e1,gap,gap_error\n{},{},{},{},{},{:.2e}\n",
            fmt6(args.m2),
            fmt6(args.lambda),
            fmt6(r.e0),
            fmt6(r.e1),
            fmt6(r.gap),
            r.gap_error
        ),
        exit_code: EXIT_OK,
    })
}

pub fn cmd_instanton(args: &InstantonArgs) -> Result<Output> {
    let mut csv = String::from("lambda,delta_e_instanton\n");
    for &l in &args.lambda {
        writeln!(csv, "{},{}", fmt6(l), fmt6(instanton_gap(l)?)).expect("string write");
    }
    Ok(Output {
        csv,
        exit_code: EXIT_OK,
    })
}

/// Column selector for `table1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Wh,
    PtLo,
    Exact,
    PtNlo,
}

impl Column {
    fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "wh" => Ok(Column::Wh),
            "pt-lo" => Ok(Column::PtLo),
            "exact" => Ok(Column::Exact),
            "pt-nlo" => Ok(Column::PtNlo),
            other => Err(Error::InvalidConfig(format!("unknown table column '{other}'"))),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Column::Wh => "wh",
            Column::PtLo => "pt_lo",
            Column::Exact => "exact",
            Column::PtNlo => "pt_nlo",
        }
    }

    fn scheme(&self) -> Option<SchemeSpec> {
        match self {
            Column::Wh => Some(SchemeSpec::WegnerHoughton),
            Column::PtLo => Some(SchemeSpec::ProperTimeLO),
            Column::PtNlo => Some(SchemeSpec::ProperTimeNLO),
            Column::Exact => None,
        }
    }
}

/// Parses a `--only` filter of the form `m2=-1,lambda=0.06`.
pub fn parse_row_filter(s: &str) -> Result<(Option<f64>, Option<f64>)> {
    let mut m2 = None;
    let mut lambda = None;
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("bad filter term '{part}'")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad number in '{part}'")))?;
        match key.trim() {
            "m2" => m2 = Some(value),
            "lambda" => lambda = Some(value),
            other => return Err(Error::InvalidConfig(format!("unknown filter key '{other}'"))),
        }
    }
    Ok((m2, lambda))
}

fn matches(filter: &(Option<f64>, Option<f64>), row: (f64, f64)) -> bool {
    let close = |a: Option<f64>, b: f64| a.is_none_or(|a| (a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    close(filter.0, row.0) && close(filter.1, row.1)
}

/// One cell of the table: a flow run or the oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Flow {
        delta_e: Option<f64>,
        z_origin: f64,
        termination: Termination,
    },
    Exact(f64),
    Failed(String),
}

/// Computed table, kept structured so callers can inspect values.
#[derive(Debug, Clone, PartialEq)]
pub struct Table1 {
    pub columns: Vec<Column>,
    pub rows: Vec<((f64, f64), Vec<Cell>)>,
}

impl Table1 {
    pub fn cell(&self, row: (f64, f64), column: Column) -> Option<&Cell> {
        let ci = self.columns.iter().position(|c| *c == column)?;
        self.rows
            .iter()
            .find(|(r, _)| matches(&(Some(r.0), Some(r.1)), row))
            .map(|(_, cells)| &cells[ci])
    }

    pub fn to_csv(&self) -> String {
        let mut header = vec!["m2".to_string(), "lambda".to_string()];
        for c in &self.columns {
            header.push(format!("de_{}", c.name()));
            if *c == Column::PtNlo {
                header.push("z00".into());
            }
        }
        for c in self.columns.iter().filter(|c| c.scheme().is_some()) {
            header.push(format!("term_{}", c.name()));
        }
        let mut csv = header.join(",");
        csv.push('\n');
        for ((m2, lambda), cells) in &self.rows {
            let mut fields = vec![fmt6(*m2), fmt6(*lambda)];
            let mut tags = Vec::new();
            for (c, cell) in self.columns.iter().zip(cells) {
                match cell {
                    Cell::Exact(g) => fields.push(fmt6(*g)),
                    Cell::Flow {
                        delta_e,
                        z_origin,
                        termination,
                    } => {
                        fields.push(opt(*delta_e));
                        if *c == Column::PtNlo {
                            fields.push(if termination.is_success() {
                                fmt6(*z_origin)
                            } else {
                                String::new()
                            });
                        }
                        tags.push(termination.tag().to_string());
                    }
                    Cell::Failed(_) => {
                        fields.push(String::new());
                        if *c == Column::PtNlo {
                            fields.push(String::new());
                        }
                        if c.scheme().is_some() {
                            tags.push("Error".into());
                        }
                    }
                }
            }
            fields.extend(tags);
            csv.push_str(&fields.join(","));
            csv.push('\n');
        }
        csv
    }

    /// Whether any flow cell ended without a gap.
    pub fn has_aborts(&self) -> bool {
        self.rows.iter().flat_map(|(_, c)| c).any(|c| match c {
            Cell::Flow { termination, .. } => !termination.is_success(),
            Cell::Failed(_) => true,
            Cell::Exact(_) => false,
        })
    }
}

pub fn compute_table1(args: &Table1Args) -> Result<Table1> {
    let columns: Vec<Column> = args
        .schemes
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| Column::parse(s))
        .collect::<Result<_>>()?;
    if columns.is_empty() {
        return Err(Error::InvalidConfig("no table columns selected".into()));
    }
    let filters: Vec<_> = args
        .only
        .iter()
        .map(|s| parse_row_filter(s))
        .collect::<Result<_>>()?;
    let rows: Vec<(f64, f64)> = TABLE1_ROWS
        .iter()
        .copied()
        .filter(|r| filters.is_empty() || filters.iter().any(|f| matches(f, *r)))
        .collect();
    if rows.is_empty() {
        return Err(Error::InvalidConfig("--only matched no table rows".into()));
    }
    let stepping = args.grid.stepping();
    let tasks: Vec<((f64, f64), Column)> = rows
        .iter()
        .flat_map(|r| columns.iter().map(move |c| (*r, *c)))
        .collect();

    let run = |&((m2, lambda), column): &((f64, f64), Column)| -> Cell {
        let go = || -> Result<Cell> {
            let params = args.grid.params(m2, lambda)?;
            match column.scheme() {
                None => Ok(Cell::Exact(schrodinger_gap(&params, &EigenConfig::default())?.gap)),
                Some(scheme) => {
                    let grid = args.grid.grid(&params)?;
                    let r = integrate(&params, scheme, &grid, &stepping, &[])?;
                    Ok(Cell::Flow {
                        delta_e: r.delta_e,
                        z_origin: r.z_origin,
                        termination: r.termination,
                    })
                }
            }
        };
        go().unwrap_or_else(|e| Cell::Failed(e.to_string()))
    };
    let cells: Vec<Cell> = pool(args.jobs)?.install(|| tasks.par_iter().map(run).collect());

    let width = columns.len();
    let rows = rows
        .into_iter()
        .zip(cells.chunks(width))
        .map(|(r, c)| (r, c.to_vec()))
        .collect();
    Ok(Table1 { columns, rows })
}

pub fn cmd_table1(args: &Table1Args) -> Result<Output> {
    let table = compute_table1(args)?;
    Ok(Output {
        csv: table.to_csv(),
        exit_code: if table.has_aborts() { EXIT_ABORT } else { EXIT_OK },
    })
}

fn parse_m_list(raw: &[String]) -> Result<Vec<u32>> {
    raw.iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u32>()
                .ok()
                .filter(|m| *m >= 1)
                .ok_or_else(|| Error::InvalidConfig(format!("bad regulator index '{s}'")))
        })
        .collect()
}

pub fn cmd_fig1(args: &Fig1Args) -> Result<Output> {
    let m_list = parse_m_list(&args.m_list)?;
    let pairs: Vec<(f64, f64)> = match (args.m2, args.lambda) {
        (Some(m2), Some(l)) => vec![(m2, l)],
        _ => FIG1_PAIRS.to_vec(),
    };
    let stepping = args.grid.stepping();
    let mut csv = String::from("m2,lambda,m,inv_m,v2_origin,z_origin,termination\n");
    let pool = pool(args.jobs)?;
    for (m2, lambda) in pairs {
        let params = args.grid.params(m2, lambda)?;
        let grid = args.grid.grid(&params)?;
        let points = pool.install(|| sweep_m(&params, &m_list, &grid, &stepping))?;
        for p in points {
            writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                fmt6(m2),
                fmt6(lambda),
                p.m.map(|m| m.to_string()).unwrap_or_else(|| "inf".into()),
                fmt6(p.inverse_m()),
                fmt6(p.v2_origin),
                fmt6(p.z_origin),
                p.termination
            )
            .expect("string write");
        }
    }
    Ok(Output {
        csv,
        exit_code: EXIT_OK,
    })
}

pub fn cmd_fig2(args: &Fig2Args) -> Result<Output> {
    let params = args.grid.params(args.m2, args.lambda)?;
    let grid = args.grid.grid(&params)?;
    let stepping = args.grid.stepping();
    let ks: Vec<f64> = args
        .ks
        .iter()
        .map(|&k| if k <= 0.0 { stepping.k_min } else { k.min(params.cutoff) })
        .collect();
    let result = integrate(&params, SchemeSpec::ProperTimeNLO, &grid, &stepping, &ks)?;
    let stride = args.stride.max(1);
    let mut csv = String::from("k_requested,k,x,v2,z\n");
    for (req, snap) in ks.iter().zip(&result.snapshots) {
        let v2 = derivative(&snap.v, 2)?;
        for i in (0..grid.n_points()).step_by(stride) {
            writeln!(
                csv,
                "{},{},{},{},{}",
                fmt6(*req),
                fmt6(snap.k),
                fmt6(grid.x(i)),
                fmt6(v2.values()[i]),
                fmt6(snap.z.values()[i])
            )
            .expect("string write");
        }
    }
    let exit_code = if result.termination.is_success() { EXIT_OK } else { EXIT_ABORT };
    Ok(Output { csv, exit_code })
}

/// Parses arguments, runs the command, writes its CSV and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let (out, result) = match &cli.command {
        Command::Flow(a) => (&a.out, cmd_flow(a)),
        Command::Exact(a) => (&a.out, cmd_exact(a)),
        Command::Instanton(a) => (&a.out, cmd_instanton(a)),
        Command::Table1(a) => (&a.out, cmd_table1(a)),
        Command::Fig1(a) => (&a.out, cmd_fig1(a)),
        Command::Fig2(a) => (&a.out, cmd_fig2(a)),
    };
    match result {
        Ok(output) => {
            if let Err(e) = emit(out, &output.csv) {
                eprintln!("error: writing output: {e}");
                return EXIT_USAGE;
            }
            output.exit_code
        }
        Err(e @ Error::SweepRun { .. }) => {
            eprintln!("error: {e}");
            EXIT_ABORT
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
