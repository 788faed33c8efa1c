//! Command-line front end. The binary only forwards to [`run`].

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::bench::run_bench;
use crate::engine::Tool;
use crate::error::{Error, Result};
use crate::params::{Params, Segmentation};
use crate::protocol::Server;
use crate::raster::RasterImage;
use crate::regions::{load_sidecar, save_sidecar, MeanShiftParams};
use crate::replay::{compare, replay_with_map, Script};

#[derive(Parser, Debug)]
#[command(name = "region-smudge", version, about = "Region-aware smudging: segment, replay, compare and benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Partition an image into regions and write the label sidecar.
    Segment(SegmentArgs),
    /// Replay a stroke script onto its canvas.
    Replay(ReplayArgs),
    /// Time selection updates and smudge frames on a synthetic painting.
    Bench(BenchArgs),
    /// Run a scenario's script with every tool and score the results.
    Compare(CompareArgs),
    /// Serve the session protocol over stdin/stdout.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ToolArg {
    Ss,
    Bs,
    Ts,
}

impl From<ToolArg> for Tool {
    fn from(t: ToolArg) -> Tool {
        match t {
            ToolArg::Ss => Tool::Ss,
            ToolArg::Bs => Tool::Bs,
            ToolArg::Ts => Tool::Ts,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Flat,
    Meanshift,
}

/// Parameter sources shared by the commands; flags win over `--params`.
#[derive(Args, Debug, Default)]
pub struct ParamArgs {
    /// JSON file with parameter values.
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub ts_fraction: Option<f64>,
    /// Minimum brush radius in pixels.
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub stroke_width: Option<f64>,
    #[arg(long)]
    pub stroke_length: Option<f64>,
    #[arg(long)]
    pub strength: Option<f64>,
}

impl ParamArgs {
    fn flag_patch(&self) -> Value {
        let mut m = Map::new();
        let fields = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("ts_fraction", self.ts_fraction),
            ("theta", self.theta),
            ("stroke_width", self.stroke_width),
            ("stroke_length", self.stroke_length),
            ("strength", self.strength),
        ];
        for (k, v) in fields {
            if let Some(v) = v {
                m.insert(k.into(), json!(v));
            }
        }
        Value::Object(m)
    }

    /// `base` overlaid with the params file, then with the flags.
    pub fn resolve(&self, base: Params) -> Result<Params> {
        let mut p = base;
        if let Some(path) = &self.params {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
            p = p.merged(&v)?;
        }
        p.merged(&self.flag_patch())
    }
}

#[derive(Args, Debug)]
pub struct SegmentArgs {
    pub image: PathBuf,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub spatial_bandwidth: Option<f64>,
    #[arg(long)]
    pub color_bandwidth: Option<f64>,
    #[arg(long)]
    pub min_region: Option<usize>,
    /// Output prefix; writes PREFIX.labels.png and PREFIX.regions.json.
    #[arg(long, value_name = "PREFIX")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    pub script: PathBuf,
    /// Override the tool of every stroke.
    #[arg(long, value_enum)]
    pub tool: Option<ToolArg>,
    /// Output image (default: SCRIPT.out.png).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report JSON (default: SCRIPT.report.json).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Selection trace as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Reuse a saved segmentation (PREFIX.labels.png + PREFIX.regions.json)
    /// instead of segmenting the script canvas.
    #[arg(long, value_name = "PREFIX")]
    pub regions: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 512)]
    pub size: u32,
    #[arg(long, default_value_t = 200)]
    pub iterations: usize,
    #[arg(long, value_enum, default_value = "ss")]
    pub tool: ToolArg,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Directory holding the scenario script and its canvas.
    pub scenario: PathBuf,
    #[arg(long, default_value = "script.json")]
    pub script: String,
    /// Output directory (default: SCENARIO/compare).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[command(flatten)]
    pub params: ParamArgs,
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.with_extension("").into_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn cmd_segment(a: &SegmentArgs, out: &mut dyn Write) -> Result<()> {
    let mut params = a.params.resolve(Params::default())?;
    let method = a.method.or(match params.segmentation {
        Segmentation::Flat => None,
        Segmentation::MeanShift(_) => Some(MethodArg::Meanshift),
    });
    if method == Some(MethodArg::Meanshift) {
        let mut ms = match params.segmentation {
            Segmentation::MeanShift(m) => m,
            Segmentation::Flat => MeanShiftParams::default(),
        };
        ms.spatial_bandwidth = a.spatial_bandwidth.unwrap_or(ms.spatial_bandwidth);
        ms.color_bandwidth = a.color_bandwidth.unwrap_or(ms.color_bandwidth);
        ms.min_region = a.min_region.unwrap_or(ms.min_region);
        params.segmentation = Segmentation::MeanShift(ms);
    } else {
        params.segmentation = Segmentation::Flat;
    }
    let image = RasterImage::load_png(&a.image)?;
    let map = params.segment(&image)?;
    let prefix = a.out.clone().unwrap_or_else(|| a.image.with_extension(""));
    let labels = with_suffix(&prefix, ".labels.png");
    let index = with_suffix(&prefix, ".regions.json");
    save_sidecar(&map, &labels, &index)?;
    writeln!(out, "{} regions -> {} + {}", map.len(), labels.display(), index.display()).ok();
    Ok(())
}

fn cmd_replay(a: &ReplayArgs, out: &mut dyn Write) -> Result<()> {
    let script = Script::load(&a.script)?;
    let params = a.params.resolve(script.params_over(&Params::default())?)?;
    let canvas = RasterImage::load_png(script.canvas_path(&a.script))?;
    let map = match &a.regions {
        Some(prefix) => load_sidecar(
            with_suffix(prefix, ".labels.png"),
            with_suffix(prefix, ".regions.json"),
        )?,
        None => params.segment(&canvas)?,
    };
    let mut run = replay_with_map(&script, canvas, map, &params, a.tool.map(Tool::from))?;

    let image_path = a.out.clone().unwrap_or_else(|| with_suffix(&a.script, ".out.png"));
    let report_path = a.report.clone().unwrap_or_else(|| with_suffix(&a.script, ".report.json"));
    run.image.save_png(&image_path)?;
    if let Some(t) = &a.trace {
        write_file(t, run.trace_jsonl()?.as_bytes())?;
    }
    run.report.output = Some(image_path.clone());
    run.report.trace = a.trace.clone();
    write_file(&report_path, serde_json::to_string_pretty(&run.report)?.as_bytes())?;

    for s in &run.report.strokes {
        writeln!(
            out,
            "stroke {:>3} {}: {} samples, {} stamps, selection {:.2} ms, smudge {:.2} ms, {} changed, {} outside selection",
            s.index, s.tool, s.samples, s.stamps, s.selection_ms, s.smudge_ms, s.changed_pixels, s.changed_outside_selection
        )
        .ok();
    }
    writeln!(
        out,
        "wrote {} ({} pixels changed outside selection); report {}",
        image_path.display(),
        run.report.pixels_changed_outside_selection,
        report_path.display()
    )
    .ok();
    Ok(())
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    let params = a.params.resolve(Params::default())?;
    let report = run_bench(a.size, a.iterations, a.tool.into(), &params)?;
    write!(out, "{}", report.table()).ok();
    if let Some(p) = &a.json {
        write_file(p, serde_json::to_string_pretty(&report)?.as_bytes())?;
    }
    Ok(())
}

fn cmd_compare(a: &CompareArgs, out: &mut dyn Write) -> Result<()> {
    let script_path = a.scenario.join(&a.script);
    let script = Script::load(&script_path)?;
    let params = a.params.resolve(script.params_over(&Params::default())?)?;
    let canvas = RasterImage::load_png(script.canvas_path(&script_path))?;
    let result = compare(&script, &canvas, &params)?;
    let dir = a.out.clone().unwrap_or_else(|| a.scenario.join("compare"));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for (tool, run) in &result.outputs {
        run.image.save_png(dir.join(format!("{tool}.png")))?;
        write_file(&dir.join(format!("{tool}.trace.jsonl")), run.trace_jsonl()?.as_bytes())?;
    }
    write_file(&dir.join("metrics.json"), serde_json::to_string_pretty(&result.metrics)?.as_bytes())?;
    writeln!(out, "{:<5} {:>8} {:>14} {:>11} {:>14}", "tool", "changed", "outside-intent", "continuity", "boundary-blur").ok();
    for m in &result.metrics {
        let oi = m.outside_intent_pixels.map_or("-".into(), |v| v.to_string());
        let c = m.continuity.map_or("-".into(), |v| v.to_string());
        writeln!(out, "{:<5} {:>8} {:>14} {:>11} {:>14.4}", m.tool, m.changed_pixels, oi, c, m.boundary_blur).ok();
    }
    writeln!(out, "outputs in {}", dir.display()).ok();
    Ok(())
}

fn cmd_serve(a: &ServeArgs) -> Result<()> {
    let params = a.params.resolve(Params::default())?;
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    Server::new(params).serve(stdin.lock(), stdout.lock())
}

/// Exit code for an error: 2 for bad input, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        2
    } else {
        1
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Segment(a) => cmd_segment(a, out),
        Command::Replay(a) => cmd_replay(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Compare(a) => cmd_compare(a, out),
        Command::Serve(a) => cmd_serve(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            e.print().ok();
            return code;
        }
    };
    let mut stdout = std::io::stdout();
    match execute(&cli, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
