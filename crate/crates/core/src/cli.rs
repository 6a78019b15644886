//! `fimcorr analyze | verify | gsn-check`.
//!
//! Exit codes: 0 success, 1 usage error, 2 assumption checks refused the run,
//! 3 unreadable or malformed input, 4 internal consistency error, 5 oracle
//! discrepancy, 6 GSN validation issues, 7 violated GSN evidence.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::engine::{self, CorrelationMap, EngineError, ExtremaReport, Statistic, Workers};
use crate::evidence::{EvidenceResults, Outcome};
use crate::guard::{self, AssumptionReport};
use crate::gsn;
use crate::nifti::{self, NiftiHeader, VolumeGrid4D};
use crate::oracle::{self, MapDiscrepancy};
use crate::timeseries::{self, IdealSeries};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_REFUSED: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;
pub const EXIT_DISCREPANCY: i32 = 5;
pub const EXIT_GSN_ISSUES: i32 = 6;
pub const EXIT_GSN_VIOLATED: i32 = 7;

/// Oracle agreement required by `verify`.
pub const VERIFY_TOLERANCE: f64 = 1e-12;

const QUADRANT_NOTE: &str = "quadrant = mean of sgn(rank(a)-(n+1)/2)*sgn(rank(b)-(n+1)/2), \
sgn(0)=0; this median-centred definition is an interpretation";

#[derive(Debug, Parser)]
#[command(name = "fimcorr", version, about = "Voxel-wise correlation maps for fMRI volumes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Correlate every voxel with the best of the ideal time series and write maps.
    Analyze(RunArgs),
    /// Recompute maps with the independent oracle and report the largest discrepancy.
    Verify(VerifyArgs),
    /// Validate a GSN assurance case and link its evidence to test results.
    GsnCheck(GsnArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutSelection {
    Pearson,
    Spearman,
    Quadrant,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Text,
    Structured,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// 4D NIfTI-1 volume (.nii)
    #[arg(long)]
    pub input: PathBuf,
    /// Ideal time series file, one value per line; repeat for several ideals
    #[arg(long = "ideal", required = true)]
    pub ideals: Vec<PathBuf>,
    /// Statistics to map
    #[arg(long = "out", value_enum, value_delimiter = ',', default_value = "pearson")]
    pub out: Vec<OutSelection>,
    /// Output path prefix; maps are written to <prefix>_<statistic>.nii
    #[arg(long, default_value = "fim")]
    pub prefix: PathBuf,
    /// Confirm that assumptions A1-A3 hold for this data
    #[arg(long)]
    pub ack_assumptions: bool,
    /// Worker threads, or "auto"
    #[arg(long, default_value = "auto")]
    pub workers: Workers,
    #[arg(long, value_enum, default_value = "text")]
    pub report: ReportFormat,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Check the map files already written at --prefix instead of recomputing
    /// them; values must agree to within one float32 ulp
    #[arg(long)]
    pub check_maps: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GsnArgs {
    /// GSN case text file
    #[arg(long)]
    pub case: PathBuf,
    /// Results document with an "evidence" object (e.g. a structured run report)
    #[arg(long)]
    pub results: PathBuf,
    /// Also write a Graphviz rendering of the annotated case
    #[arg(long)]
    pub dot: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub report: ReportFormat,
}

/// Validated settings for one analysis or verification run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input_path: PathBuf,
    pub ideal_paths: Vec<PathBuf>,
    pub statistics: Vec<Statistic>,
    pub output_prefix: PathBuf,
    pub acknowledged: bool,
    pub workers: Workers,
    pub report_format: ReportFormat,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, ideals: Vec<PathBuf>) -> Self {
        Self {
            input_path: input.into(),
            ideal_paths: ideals,
            statistics: vec![Statistic::Pearson],
            output_prefix: PathBuf::from("fim"),
            acknowledged: false,
            workers: Workers::Auto,
            report_format: ReportFormat::Text,
        }
    }

    pub fn map_path(&self, statistic: Statistic) -> PathBuf {
        suffixed(&self.output_prefix, &format!("_{}.nii", statistic.name()))
    }

    pub fn report_path(&self) -> PathBuf {
        let ext = match self.report_format {
            ReportFormat::Text => "_report.txt",
            ReportFormat::Structured => "_report.json",
        };
        suffixed(&self.output_prefix, ext)
    }
}

impl From<RunArgs> for RunConfig {
    fn from(args: RunArgs) -> Self {
        let mut statistics = Vec::new();
        for sel in args.out {
            let add: &[Statistic] = match sel {
                OutSelection::Pearson => &[Statistic::Pearson],
                OutSelection::Spearman => &[Statistic::Spearman],
                OutSelection::Quadrant => &[Statistic::Quadrant],
                OutSelection::All => &Statistic::ALL,
            };
            for s in add {
                if !statistics.contains(s) {
                    statistics.push(*s);
                }
            }
        }
        Self {
            input_path: args.input,
            ideal_paths: args.ideals,
            statistics,
            output_prefix: args.prefix,
            acknowledged: args.ack_assumptions,
            workers: args.workers,
            report_format: args.report,
        }
    }
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Parse arguments and dispatch; returns the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match cli.command {
        Command::Analyze(args) => run_analyze(&args.into(), out, err),
        Command::Verify(args) => run_verify(&args.run.clone().into(), args.check_maps, out, err),
        Command::GsnCheck(args) => run_gsn_check(&args, out, err),
    }
}

#[derive(Debug, Serialize)]
struct ToolInfo {
    name: &'static str,
    version: &'static str,
}

const TOOL: ToolInfo = ToolInfo {
    name: env!("CARGO_PKG_NAME"),
    version: env!("CARGO_PKG_VERSION"),
};

#[derive(Debug, Serialize)]
struct IdealInfo {
    label: String,
    path: PathBuf,
    length: usize,
}

#[derive(Debug, Serialize)]
struct MapSummary {
    statistic: Statistic,
    #[serde(skip_serializing_if = "Option::is_none")]
    file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sidecar: Option<PathBuf>,
    defined_voxels: usize,
    undefined_voxels: usize,
    extrema: Option<ExtremaReport>,
}

/// Everything a run produced, rendered as text or JSON.
#[derive(Debug, Serialize)]
struct RunReport {
    tool: ToolInfo,
    command: &'static str,
    input: PathBuf,
    ideals: Vec<IdealInfo>,
    dims: (usize, usize, usize, usize),
    voxel_convention: String,
    index_convention: &'static str,
    quadrant_definition: &'static str,
    workers: String,
    assumptions: AssumptionReport,
    maps: Vec<MapSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleSummary>,
    evidence: BTreeMap<String, Outcome>,
}

#[derive(Debug, Serialize)]
struct OracleSummary {
    tolerance: f64,
    source: &'static str,
    max_discrepancy: f64,
    maps: Vec<MapDiscrepancy>,
}

impl RunReport {
    fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Structured => {
                let mut s = serde_json::to_string_pretty(self).expect("report serialises");
                s.push('\n');
                s
            }
            ReportFormat::Text => self.to_text(),
        }
    }

    fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "{} {} {}\ninput: {} dims {:?}\n",
            self.tool.name,
            self.tool.version,
            self.command,
            self.input.display(),
            self.dims
        ));
        for (n, e) in self.ideals.iter().enumerate() {
            s.push_str(&format!(
                "ideal #{n}: {} ({} values) from {}\n",
                e.label,
                e.length,
                e.path.display()
            ));
        }
        s.push_str(&format!(
            "voxel order: {}\nindices: {}\nworkers: {}\n{}\n",
            self.voxel_convention, self.index_convention, self.workers, self.quadrant_definition
        ));
        s.push_str(&self.assumptions.to_string());
        for m in &self.maps {
            s.push_str(&format!(
                "map {}: {} defined, {} undefined",
                m.statistic, m.defined_voxels, m.undefined_voxels
            ));
            if let Some(f) = &m.file {
                s.push_str(&format!(" -> {}", f.display()));
            }
            s.push('\n');
            if let Some(x) = &m.extrema {
                s.push_str(&x.to_string());
            }
        }
        if let Some(o) = &self.oracle {
            s.push_str(&format!(
                "oracle ({}): max discrepancy {:e} (tolerance {:e})\n",
                o.source, o.max_discrepancy, o.tolerance
            ));
            for m in &o.maps {
                s.push_str(&format!(
                    "  {}: {:e}{}\n",
                    m.statistic,
                    m.max_discrepancy,
                    match m.first_offender {
                        Some(v) => format!(" FIRST OFFENDER at {v:?}"),
                        None => String::new(),
                    }
                ));
            }
        }
        s
    }
}

struct Inputs {
    header: NiftiHeader,
    volume: VolumeGrid4D,
    ideals: Vec<IdealSeries>,
}

fn load_inputs(config: &RunConfig) -> Result<Inputs, String> {
    let bytes = fs::read(&config.input_path)
        .map_err(|e| format!("{}: {e}", config.input_path.display()))?;
    let header = nifti::parse_header(&bytes).map_err(|e| format!("{}: {e}", config.input_path.display()))?;
    let volume =
        nifti::decode_volume(&bytes).map_err(|e| format!("{}: {e}", config.input_path.display()))?;
    let ideals = config
        .ideal_paths
        .iter()
        .map(timeseries::read_1d)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    Ok(Inputs {
        header,
        volume,
        ideals,
    })
}

fn base_report(config: &RunConfig, command: &'static str, inputs: &Inputs, guard: AssumptionReport) -> RunReport {
    let evidence = guard.evidence();
    RunReport {
        tool: TOOL,
        command,
        input: config.input_path.clone(),
        ideals: inputs
            .ideals
            .iter()
            .zip(&config.ideal_paths)
            .map(|(e, p)| IdealInfo {
                label: e.label().to_string(),
                path: p.clone(),
                length: e.len(),
            })
            .collect(),
        dims: inputs.volume.dims(),
        voxel_convention: inputs.volume.orientation().to_string(),
        index_convention: "(i,j,k) zero-based; one-based shown alongside",
        quadrant_definition: QUADRANT_NOTE,
        workers: match config.workers {
            Workers::Auto => "auto".to_string(),
            Workers::Fixed(n) => n.to_string(),
        },
        assumptions: guard,
        maps: Vec::new(),
        oracle: None,
        evidence,
    }
}

fn summarize(map: &CorrelationMap, file: Option<PathBuf>) -> MapSummary {
    let defined = map.defined_count();
    MapSummary {
        statistic: map.statistic,
        sidecar: file.as_deref().map(nifti::sidecar_path),
        file,
        defined_voxels: defined,
        undefined_voxels: map.defined.len() - defined,
        extrema: engine::extrema(map).ok(),
    }
}

enum Prepared {
    Exit(i32),
    Ready(Inputs, RunReport),
}

/// Load, warn and guard; shared by analyze and verify.
fn prepare(config: &RunConfig, command: &'static str, out: &mut dyn Write, err: &mut dyn Write) -> Prepared {
    let _ = err.write_all(guard::warning_text().as_bytes());
    let inputs = match load_inputs(config) {
        Ok(i) => i,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return Prepared::Exit(EXIT_INPUT);
        }
    };
    let report = guard::check_inputs(&inputs.volume, &inputs.ideals, config.acknowledged);
    let proceed = report.proceeds();
    let run_report = base_report(config, command, &inputs, report);
    if !proceed {
        let _ = out.write_all(run_report.render(config.report_format).as_bytes());
        let _ = writeln!(err, "refusing to run: operational assumption checks did not pass");
        return Prepared::Exit(EXIT_REFUSED);
    }
    Prepared::Ready(inputs, run_report)
}

fn engine_exit(e: &EngineError) -> i32 {
    match e {
        EngineError::GuardNotPassed => EXIT_REFUSED,
        EngineError::LengthMismatch { .. } | EngineError::NoDefinedVoxels => EXIT_INPUT,
        EngineError::Internal { .. } | EngineError::Pool(_) => EXIT_INTERNAL,
    }
}

/// Write every output into a scratch directory next to the prefix, then
/// move them into place. Nothing is left behind on failure.
fn publish(config: &RunConfig, files: Vec<(PathBuf, Vec<u8>)>, maps: &[(PathBuf, &CorrelationMap)], header: &NiftiHeader) -> Result<(), String> {
    let dir = match config.output_prefix.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let scratch = tempfile::Builder::new()
        .prefix(".fimcorr-")
        .tempdir_in(&dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?;
    let staged = |final_path: &Path| scratch.path().join(final_path.file_name().expect("file name"));

    let mut moves = Vec::new();
    for (path, map) in maps {
        let tmp = staged(path);
        let sidecar = nifti::write_map(*map, header, &tmp).map_err(|e| e.to_string())?;
        moves.push((tmp, path.clone()));
        moves.push((sidecar, nifti::sidecar_path(path)));
    }
    for (path, bytes) in files {
        let tmp = staged(&path);
        fs::write(&tmp, bytes).map_err(|e| format!("{}: {e}", tmp.display()))?;
        moves.push((tmp, path));
    }
    let mut done: Vec<&PathBuf> = Vec::new();
    for (from, to) in &moves {
        if let Err(e) = fs::rename(from, to) {
            for p in done {
                let _ = fs::remove_file(p);
            }
            return Err(format!("{}: {e}", to.display()));
        }
        done.push(to);
    }
    Ok(())
}

pub fn run_analyze(config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let (inputs, mut report) = match prepare(config, "analyze", out, err) {
        Prepared::Exit(code) => return code,
        Prepared::Ready(i, r) => (i, r),
    };
    let maps = match engine::analyze(
        &inputs.volume,
        &inputs.ideals,
        &config.statistics,
        &report.assumptions,
        config.workers,
    ) {
        Ok(m) => m,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return engine_exit(&e);
        }
    };
    let targets: Vec<(PathBuf, &CorrelationMap)> =
        maps.iter().map(|m| (config.map_path(m.statistic), m)).collect();
    report.maps = targets
        .iter()
        .map(|(p, m)| summarize(m, Some(p.clone())))
        .collect();
    report.evidence.insert("analysis.completed".into(), Outcome::Pass);
    let rendered = report.render(config.report_format);

    let files = vec![(config.report_path(), rendered.clone().into_bytes())];
    if let Err(e) = publish(config, files, &targets, &inputs.header) {
        let _ = writeln!(err, "error: writing outputs: {e}");
        return EXIT_INTERNAL;
    }
    let _ = out.write_all(rendered.as_bytes());
    EXIT_OK
}

fn read_map_file(path: &Path, statistic: Statistic, dims: (usize, usize, usize)) -> Result<CorrelationMap, String> {
    let volume = nifti::read_volume(path).map_err(|e| e.to_string())?;
    let (nx, ny, nz, nt) = volume.dims();
    if (nx, ny, nz) != dims || nt != 1 {
        return Err(format!(
            "{}: map dims {:?} do not match input {dims:?}",
            path.display(),
            volume.dims()
        ));
    }
    let mut defined = vec![true; nx * ny * nz];
    for (i, j, k) in nifti::read_sidecar(nifti::sidecar_path(path)).map_err(|e| e.to_string())? {
        if i >= nx || j >= ny || k >= nz {
            return Err(format!("{}: sidecar index ({i},{j},{k}) out of range", path.display()));
        }
        defined[i + nx * (j + ny * k)] = false;
    }
    Ok(CorrelationMap {
        dims,
        statistic,
        values: volume.samples().to_vec(),
        defined,
        best_ideal: vec![None; nx * ny * nz],
    })
}

/// Spacing between `x` rounded to float32 and its next float32 neighbour.
fn f32_ulp(x: f64) -> f64 {
    let f = (x as f32).abs();
    (f32::from_bits(f.to_bits() + 1) - f) as f64
}

pub fn run_verify(config: &RunConfig, check_maps: bool, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let (inputs, mut report) = match prepare(config, "verify", out, err) {
        Prepared::Exit(code) => return code,
        Prepared::Ready(i, r) => (i, r),
    };
    let maps: Vec<CorrelationMap> = if check_maps {
        let loaded: Result<Vec<_>, String> = config
            .statistics
            .iter()
            .map(|&s| read_map_file(&config.map_path(s), s, inputs.volume.spatial_dims()))
            .collect();
        match loaded {
            Ok(m) => m,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_INPUT;
            }
        }
    } else {
        match engine::analyze(
            &inputs.volume,
            &inputs.ideals,
            &config.statistics,
            &report.assumptions,
            config.workers,
        ) {
            Ok(m) => m,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return engine_exit(&e);
            }
        }
    };

    let mut discrepancies = Vec::new();
    for map in &maps {
        let expected = match oracle::oracle_map(&inputs.volume, &inputs.ideals, map.statistic) {
            Ok(v) => v,
            Err(e) => {
                let _ = writeln!(err, "error: oracle: {e}");
                return EXIT_INTERNAL;
            }
        };
        let d = if check_maps {
            oracle::compare_map(map, &expected, VERIFY_TOLERANCE, f32_ulp)
        } else {
            oracle::compare_map(map, &expected, VERIFY_TOLERANCE, |_| 0.0)
        };
        report
            .evidence
            .insert(format!("oracle.{}", map.statistic), Outcome::from_pass(d.passes()));
        discrepancies.push(d);
    }
    let all_pass = discrepancies.iter().all(MapDiscrepancy::passes);
    report.evidence.insert("oracle.all".into(), Outcome::from_pass(all_pass));
    report.maps = maps
        .iter()
        .map(|m| summarize(m, check_maps.then(|| config.map_path(m.statistic))))
        .collect();
    report.oracle = Some(OracleSummary {
        tolerance: VERIFY_TOLERANCE,
        source: if check_maps { "map files" } else { "recomputed maps" },
        max_discrepancy: discrepancies
            .iter()
            .map(|d| d.max_discrepancy)
            .fold(0.0, f64::max),
        maps: discrepancies.clone(),
    });
    let _ = out.write_all(report.render(config.report_format).as_bytes());
    match discrepancies.iter().find(|d| !d.passes()) {
        None => EXIT_OK,
        Some(d) => {
            let _ = writeln!(
                err,
                "oracle discrepancy in {} map at voxel {:?}",
                d.statistic,
                d.first_offender.unwrap()
            );
            EXIT_DISCREPANCY
        }
    }
}

#[derive(Debug, Serialize)]
struct GsnReport<'a> {
    issues: &'a [gsn::Issue],
    warnings: &'a [gsn::Warning],
    annotated: &'a gsn::AnnotatedCase,
}

pub fn run_gsn_check(args: &GsnArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let text = match fs::read_to_string(&args.case) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", args.case.display());
            return EXIT_INPUT;
        }
    };
    let case = match gsn::parse_case(&text) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", args.case.display());
            return EXIT_INPUT;
        }
    };
    let results = match EvidenceResults::read(&args.results) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let issues = gsn::validate(&case);
    let warnings = gsn::warnings(&case);
    let annotated = gsn::link_evidence(&case, &results);

    if let Some(dot) = &args.dot {
        if let Err(e) = fs::write(dot, annotated.to_dot()) {
            let _ = writeln!(err, "error: {}: {e}", dot.display());
            return EXIT_INPUT;
        }
    }
    match args.report {
        ReportFormat::Structured => {
            let doc = GsnReport {
                issues: &issues,
                warnings: &warnings,
                annotated: &annotated,
            };
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("serialises"));
        }
        ReportFormat::Text => {
            let _ = writeln!(out, "{} nodes, roots: {}", case.nodes().len(), case.roots().join(", "));
            for i in &issues {
                let _ = writeln!(out, "issue: {i}");
            }
            for w in &warnings {
                let _ = writeln!(out, "warning: {}", w.message);
            }
            for (label, status) in &annotated.status {
                let _ = writeln!(out, "evidence {label}: {status:?}");
            }
            let s = annotated.summary;
            let _ = writeln!(
                out,
                "evidence: {} satisfied, {} violated, {} missing, {} without key",
                s.satisfied, s.violated, s.missing, s.unkeyed
            );
        }
    }
    if !issues.is_empty() {
        EXIT_GSN_ISSUES
    } else if annotated.summary.violated > 0 {
        EXIT_GSN_VIOLATED
    } else {
        EXIT_OK
    }
}
