use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pontryagin::dividing::{AttachingArc, DividingSet, GradedDividingSet};
use pontryagin::extraction::{extract, frame_by_jacobian, frame_by_pushoff, PontryaginSet};
use pontryagin::fields::{RegularValue, SampledField};
use pontryagin::invariants::{hopf_invariant, linking_gauss, obstruction_o3, self_linking};
use pontryagin::models::{
    bypass_slab, hopf_domain, hopf_field, stack_triangles, standard_slab, triangle_slab, BypassModelParams,
    DEFAULT_HOPF_EXCLUSION_DEGREES,
};
use pontryagin::verify::{self, ExportFormat, Pipeline, PipelineConfig};
use pontryagin::{BoxDomain, Vec3};

#[derive(Parser)]
#[command(name = "pontryagin", version, about = "Framed preimages, linking numbers and Hopf invariants of plane fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a model field
    Model {
        #[command(subcommand)]
        action: ModelAction,
    },
    /// Extract the framed preimage of a regular value
    Extract(ExtractArgs),
    /// Compute an invariant
    Invariant {
        #[command(subcommand)]
        which: InvariantCmd,
    },
    /// Dividing-set operations
    Dividing {
        #[command(subcommand)]
        action: DividingCmd,
    },
    /// Run a verification pipeline; exits non-zero unless every check passes
    Verify(VerifyArgs),
}

#[derive(Subcommand)]
enum ModelAction {
    /// Build the field, print its header and digest, and optionally save it
    Build(ModelArgs),
    /// Build the field and write it to a file
    Export(ModelArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Standard,
    Bypass,
    Triangle,
    Stack,
    Hopf,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Standard => "standard",
            Kind::Bypass => "bypass",
            Kind::Triangle => "triangle",
            Kind::Stack => "stack",
            Kind::Hopf => "hopf",
        }
    }
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Cells per axis, `a,b,c` (per slab for slab models, first entry for hopf)
    #[arg(long, value_parser = parse_resolution)]
    resolution: Option<[usize; 3]>,
    /// Model parameters as a `key = value` file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of stacked triangles for `--kind stack`
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameMethod {
    Tet,
    Jacobian,
    Pushoff,
}

#[derive(Args)]
struct ExtractArgs {
    field: PathBuf,
    /// Regular value `x,y,z`
    #[arg(long, value_parser = parse_vec3, default_value = "1,0,0")]
    p: Vec3,
    #[arg(long, value_enum, default_value = "tet")]
    frame: FrameMethod,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "json")]
    format: Vec<Format>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Obj,
    Csv,
}

impl From<Format> for ExportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ExportFormat::Json,
            Format::Obj => ExportFormat::Obj,
            Format::Csv => ExportFormat::Csv,
        }
    }
}

#[derive(Subcommand)]
enum InvariantCmd {
    /// Hopf invariant of a field with no open preimage arcs
    Hopf {
        field: PathBuf,
        #[arg(long, value_parser = parse_vec3, default_value = "1,0,0")]
        p: Vec3,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Pairwise linking numbers of the closed components in a curve file
    Link { curves: PathBuf },
    /// Self-linking of each closed component in a curve file
    Selflink { curves: PathBuf },
    /// Obstruction class of two fields agreeing outside a box
    O3 {
        f1: PathBuf,
        f2: PathBuf,
        /// Box `x0,y0,z0,x1,y1,z1`; defaults to the whole domain
        #[arg(long)]
        ball: Option<String>,
        #[arg(long, default_value_t = 0)]
        d: u64,
        #[arg(long, value_parser = parse_vec3, default_value = "1,0,0")]
        p: Vec3,
    },
}

#[derive(Subcommand)]
enum DividingCmd {
    /// Attach a bypass along an arc given by two gaps
    Attach(DividingArgs),
    /// Attach a bypass triangle and report the grading change
    Triangle(DividingArgs),
    /// Print the normal form
    Normalize { input: String },
    /// Draw the dividing set
    Render { input: String },
}

#[derive(Args)]
struct DividingArgs {
    /// Diagram file, `-` for stdin, or `standard`
    input: String,
    /// Gaps `from,to`
    #[arg(long, default_value = "0,3")]
    arc: String,
    /// Repeat count (triangle only)
    #[arg(long, default_value_t = 1)]
    times: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_enum)]
    pipeline: PipelineArg,
    #[arg(long, value_parser = parse_resolution)]
    resolution: Option<[usize; 3]>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    format: Vec<Format>,
    #[arg(long)]
    delta: Option<f64>,
    /// Pipeline configuration as a `key = value` file
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PipelineArg {
    Thm1,
    Thm2,
    Hopf,
    Roundtrip,
    Dividing,
}

impl From<PipelineArg> for Pipeline {
    fn from(p: PipelineArg) -> Self {
        match p {
            PipelineArg::Thm1 => Pipeline::Thm1,
            PipelineArg::Thm2 => Pipeline::Thm2,
            PipelineArg::Hopf => Pipeline::Hopf,
            PipelineArg::Roundtrip => Pipeline::Roundtrip,
            PipelineArg::Dividing => Pipeline::Dividing,
        }
    }
}

fn parse_numbers(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let v = parse_numbers(s, 3)?;
    Ok(Vec3::new(v[0], v[1], v[2]))
}

fn parse_resolution(s: &str) -> Result<[usize; 3], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [a, b, c] => Ok([*a, *b, *c]),
        [a] => Ok([*a, *a, *a]),
        _ => Err("expected a,b,c".into()),
    }
}

fn load_params(config: Option<&Path>) -> Result<BypassModelParams> {
    match config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
        }
        None => Ok(BypassModelParams::default()),
    }
}

fn read_field(path: &Path) -> Result<SampledField> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(SampledField::read_from(file)?)
}

fn read_curves(path: &Path) -> Result<PontryaginSet> {
    Ok(PontryaginSet::from_json(&fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)?)
}

fn regular_value(p: Vec3, delta: Option<f64>) -> Result<RegularValue> {
    let rv = RegularValue::new(p)?;
    Ok(match delta {
        Some(d) => rv.with_delta(d),
        None => rv,
    })
}

fn build_model(args: &ModelArgs) -> Result<SampledField> {
    let mut params = load_params(args.config.as_deref())?;
    if let Some(r) = args.resolution {
        params.resolution = r;
    }
    Ok(match args.kind {
        Kind::Standard => standard_slab(&pontryagin::models::slab_domain(0.0, params.resolution))?,
        Kind::Bypass => bypass_slab(&params)?,
        Kind::Triangle => triangle_slab(&params)?.merged()?,
        Kind::Stack => stack_triangles(args.n, &params)?.merged()?,
        Kind::Hopf => {
            let n = args.resolution.map_or(64, |r| r[0]);
            hopf_field(&hopf_domain(n), DEFAULT_HOPF_EXCLUSION_DEGREES)?.field
        }
    })
}

fn write_field(field: &SampledField, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    field.write_to(std::io::BufWriter::new(file))?;
    Ok(())
}

fn cmd_model(action: ModelAction) -> Result<()> {
    let (args, always_write) = match action {
        ModelAction::Build(a) => (a, false),
        ModelAction::Export(a) => (a, true),
    };
    let field = build_model(&args)?;
    print!("{}", field.header());
    println!("digest {}", field.digest());
    if always_write || args.out.is_some() {
        let dir = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
        let path = dir.join(format!("{}.field", args.kind.name()));
        write_field(&field, &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn export_set(set: &PontryaginSet, dir: &Path, stem: &str, formats: &[ExportFormat]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for f in formats {
        let (ext, body) = match f {
            ExportFormat::Json => ("json", set.to_json()?),
            ExportFormat::Obj => ("obj", set.to_obj()),
            ExportFormat::Csv => ("csv", set.to_csv()),
        };
        let path = dir.join(format!("{stem}.{ext}"));
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

fn describe(set: &PontryaginSet) {
    println!("closed {} arcs {}", set.closed_count(), set.arc_count());
    for (i, c) in set.components.iter().enumerate() {
        let kind = if c.closed { "closed" } else { "arc" };
        println!("  {i}: {kind} vertices {} length {:.4}", c.len(), c.length());
    }
}

fn cmd_extract(args: ExtractArgs) -> Result<()> {
    let field = read_field(&args.field)?;
    let rv = regular_value(args.p, args.delta)?;
    let set = match args.frame {
        FrameMethod::Tet => extract(&field, &rv)?,
        FrameMethod::Jacobian => frame_by_jacobian(&extract(&field, &rv)?, &field)?,
        FrameMethod::Pushoff => frame_by_pushoff(&field, &rv)?.0,
    };
    describe(&set);
    let formats: Vec<ExportFormat> = args.format.into_iter().map(Into::into).collect();
    for path in export_set(&set, &args.out, "curves", &formats)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn parse_ball(s: &str) -> Result<BoxDomain> {
    let v = parse_numbers(s, 6).map_err(anyhow::Error::msg)?;
    Ok(BoxDomain::new(Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5]), [1, 1, 1])?)
}

fn cmd_invariant(which: InvariantCmd) -> Result<()> {
    match which {
        InvariantCmd::Hopf { field, p, delta } => {
            let f = read_field(&field)?;
            let h = hopf_invariant(&f, &regular_value(p, delta)?)?;
            println!("{}", serde_json::to_string_pretty(&h)?);
        }
        InvariantCmd::Link { curves } => {
            let set = read_curves(&curves)?;
            let closed: Vec<_> = set.closed_components().collect();
            for i in 0..closed.len() {
                let row: Vec<String> = (0..closed.len())
                    .map(|j| if i == j { Ok("-".to_string()) } else { linking_gauss(closed[i], closed[j]).map(|l| l.to_string()) })
                    .collect::<Result<_, _>>()?;
                println!("{}", row.join(" "));
            }
        }
        InvariantCmd::Selflink { curves } => {
            let set = read_curves(&curves)?;
            for (i, c) in set.closed_components().enumerate() {
                println!("{i}: {}", self_linking(c)?);
            }
        }
        InvariantCmd::O3 { f1, f2, ball, d, p } => {
            let (a, b) = (read_field(&f1)?, read_field(&f2)?);
            let ball = match ball {
                Some(s) => parse_ball(&s)?,
                None => b.domain().clone(),
            };
            let r = obstruction_o3(&a, &b, &ball, &RegularValue::new(p)?, d)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
    }
    Ok(())
}

fn read_diagram(input: &str) -> Result<DividingSet> {
    if input == "standard" {
        return Ok(DividingSet::standard());
    }
    let text = if input == "-" {
        std::io::read_to_string(std::io::stdin())?
    } else {
        fs::read_to_string(input).with_context(|| format!("reading {input}"))?
    };
    Ok(DividingSet::parse(&text)?)
}

fn parse_arc(s: &str) -> Result<AttachingArc> {
    let v: Vec<usize> = s.split(',').map(|t| t.trim().parse()).collect::<Result<_, _>>()?;
    match v.as_slice() {
        [a, b] => Ok(AttachingArc::new(*a, *b)),
        _ => bail!("arc must be `from,to`"),
    }
}

fn cmd_dividing(action: DividingCmd) -> Result<()> {
    match action {
        DividingCmd::Attach(a) => {
            let out = read_diagram(&a.input)?.attach_bypass(parse_arc(&a.arc)?)?;
            print!("{}", out.to_text());
        }
        DividingCmd::Triangle(a) => {
            let arc = parse_arc(&a.arc)?;
            let start = read_diagram(&a.input)?;
            let mut g = GradedDividingSet::new(start.clone());
            for _ in 0..a.times {
                g = g.attach_triangle(arc)?;
            }
            print!("{}", g.set.to_text());
            println!("# grading {}", g.grading);
            println!("# isotopic to input: {}", pontryagin::dividing::isotopy_equal(&g.set, &start));
        }
        DividingCmd::Normalize { input } => {
            let nf = read_diagram(&input)?.normal_form();
            println!("{}", serde_json::to_string(&nf)?);
        }
        DividingCmd::Render { input } => print!("{}", read_diagram(&input)?.render()),
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<bool> {
    let mut config: PipelineConfig = match &args.config {
        Some(path) => toml::from_str(&fs::read_to_string(path)?).with_context(|| format!("parsing {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    let pipeline: Pipeline = args.pipeline.into();
    config.command = format!("verify {}", pipeline.name());
    if let Some(r) = args.resolution {
        if matches!(pipeline, Pipeline::Hopf) {
            config.hopf_resolution = r[0];
        } else {
            config.model.resolution = r;
        }
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(d) = args.delta {
        config.delta = d;
    }
    if !args.format.is_empty() {
        config.formats = args.format.iter().copied().map(Into::into).collect();
    }
    config.out = args.out.as_ref().map(|p| p.display().to_string());
    let report = verify::run(pipeline, &config);
    print!("{}", report.summary());
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}_report.json", pipeline.name()));
        fs::write(&path, serde_json::to_string_pretty(&report)?)?;
        println!("wrote {}", path.display());
        for (name, set) in &report.sets {
            export_set(set, dir, name, &config.formats)?;
        }
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Model { action } => cmd_model(action).map(|_| true),
        Command::Extract(a) => cmd_extract(a).map(|_| true),
        Command::Invariant { which } => cmd_invariant(which).map(|_| true),
        Command::Dividing { action } => cmd_dividing(action).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
