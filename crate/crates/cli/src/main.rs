//! `procgen` command-line interface.

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use procgen::analytics::{analyze, normal_variation, DEFAULT_WINDOW};
use procgen::dataset::{generate_dataset, write_frame, DatasetConfig, Format};
use procgen::eval::bake_texture;
use procgen::gt::render_gt;
use procgen::io::{read_pfm, write_pfm, write_png};
use procgen::materials::{library, make_material, Params, BASE_NAMES};
use procgen::math::Vec3;
use procgen::scene::{path_to_cameras, rrt_star, sample_room, RoomParams, RrtParams, Scene, DEFAULT_FOV};
use procgen::tracer::{trace_distribution, trace_instance};
use procgen::transpiler::{emit, exec_script, graph_isomorphic, EmitOptions};
use procgen::{Graph, RandomStream};
use serde_json::{json, Value};
use std::error::Error;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

type Res<T> = Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(name = "procgen", version, about = "Procedural materials, rooms and ground-truth frames")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Image format for files whose extension does not decide it.
    #[arg(long, global = true, value_enum, default_value_t = ImageFormat::Pfm)]
    format: ImageFormat,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ImageFormat {
    Pfm,
    Png,
}

impl From<ImageFormat> for Format {
    fn from(f: ImageFormat) -> Format {
        match f {
            ImageFormat::Pfm => Format::Pfm,
            ImageFormat::Png => Format::Png,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Channel {
    Surface,
    Roughness,
    Displacement,
}

impl Channel {
    fn name(self) -> &'static str {
        match self {
            Channel::Surface => "surface",
            Channel::Roughness => "roughness",
            Channel::Displacement => "displacement",
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Mode {
    Instance,
    Distribution,
}

#[derive(Subcommand)]
enum Cmd {
    /// Operator catalog.
    Ops {
        #[command(subcommand)]
        cmd: OpsCmd,
    },
    /// Bake one material channel to an image.
    Bake(BakeArgs),
    /// Run a sampler and write the asset graph as JSON.
    Sample {
        #[arg(long, value_parser = sampler_id)]
        sampler: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Instance trace of one seed, or the distribution graph of a sampler.
    Trace {
        /// Every sampler when omitted in distribution mode.
        #[arg(long, value_parser = sampler_id)]
        sampler: Option<String>,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Diversity report (parameters, cyclomatic complexity, entropy).
    Analyze {
        /// Every sampler when omitted.
        #[arg(long, value_parser = sampler_id)]
        sampler: Option<String>,
    },
    /// Normal-variation map of a PFM normal map, plus a JSON summary next to it.
    Normalvar {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
    },
    /// Emit builder source for a graph.
    Transpile {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write colors as hsv(...) where exact.
        #[arg(long)]
        hsv: bool,
        /// Call arithmetic builders instead of infix operators.
        #[arg(long)]
        no_operators: bool,
        /// Execute the emitted source and compare with the input graph.
        #[arg(long)]
        check: bool,
    },
    /// Sample a furnished room with cameras.
    Room {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 12)]
        cams: usize,
        #[arg(long, default_value_t = 128)]
        res: usize,
        #[arg(long, default_value_t = 0.05)]
        quad_size: f64,
    },
    /// Plan a collision-free camera path through a scene.
    Campath(CampathArgs),
    /// Render depth, normal and disparity maps for every camera of a scene.
    Rendergt {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rooms, cameras and ground-truth frames end to end.
    Dataset {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        scenes: usize,
        #[arg(long, default_value_t = 12)]
        cams: usize,
        #[arg(long, default_value_t = 128)]
        res: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum OpsCmd {
    /// Print every operator signature as JSON.
    List,
}

#[derive(Args)]
struct BakeArgs {
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(BASE_NAMES), required_unless_present = "graph", conflicts_with = "graph")]
    material: Option<String>,
    /// Bake a serialized graph instead of a base material.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// JSON object of material parameters.
    #[arg(long, requires = "material")]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 512)]
    res: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Channel::Surface)]
    channel: Channel,
    /// Report NaN counts in the baked buffer.
    #[arg(long)]
    validate_output: bool,
}

#[derive(Args)]
struct CampathArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    start: Vec3,
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    goal: Vec3,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5000)]
    iters: usize,
    /// Clearance kept from walls and furniture.
    #[arg(long, default_value_t = 0.3)]
    margin: f64,
    /// Camera spacing along the path.
    #[arg(long, default_value_t = 0.5)]
    spacing: f64,
    #[arg(long, default_value_t = 128)]
    res: usize,
    /// Write the scene with its cameras replaced by the path cameras.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn sampler_id(s: &str) -> Result<String, String> {
    let lib = library();
    if lib.sampler(s).is_ok() {
        Ok(s.to_string())
    } else {
        Err(format!("unknown sampler; expected one of: {}", lib.sampler_ids().collect::<Vec<_>>().join(", ")))
    }
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let xs: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    match xs[..] {
        [x, y, z] if xs.iter().all(|v| v.is_finite()) => Ok(Vec3::new(x, y, z)),
        _ => Err("expected three finite numbers x,y,z".into()),
    }
}

fn format_for(path: &Path, fallback: Format) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("png") => Format::Png,
        Some(e) if e.eq_ignore_ascii_case("pfm") => Format::Pfm,
        _ => fallback,
    }
}

fn write_text(path: Option<&Path>, text: &str) -> Res<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display()))?,
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
    }
    Ok(())
}

fn write_json(path: Option<&Path>, v: &Value) -> Res<()> {
    write_text(path, &(serde_json::to_string_pretty(v)? + "\n"))
}

fn read(path: &Path) -> Res<String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn bake(a: &BakeArgs, fallback: Format) -> Res<()> {
    let g = match (&a.material, &a.graph) {
        (Some(m), _) => {
            let params: Params = match &a.params {
                Some(p) => serde_json::from_str(&read(p)?)?,
                None => Params::new(),
            };
            make_material(m, &params)?
        }
        (None, Some(p)) => Graph::from_json(&read(p)?)?,
        (None, None) => unreachable!("clap requires one source"),
    };
    let channel = a.channel.name();
    let img = bake_texture(&g, channel, a.res)?;
    match format_for(&a.out, fallback) {
        Format::Pfm => write_pfm(&a.out, &img)?,
        Format::Png => write_png(&a.out, &img, a.channel == Channel::Surface)?,
    }
    if a.validate_output {
        let nan = img.data.chunks(img.channels).filter(|p| p.iter().any(|x| x.is_nan())).count();
        let inf = img.data.chunks(img.channels).filter(|p| p.iter().any(|x| x.is_infinite())).count();
        write_json(None, &json!({ "channel": channel, "pixels": img.width * img.height, "nan_pixels": nan, "inf_pixels": inf }))?;
    }
    Ok(())
}

fn trace(sampler: Option<String>, mode: Mode, seed: u64, out: Option<&Path>) -> Res<()> {
    let lib = library();
    let v = match (mode, sampler) {
        (Mode::Instance, None) => {
            Cli::command()
                .error(ErrorKind::MissingRequiredArgument, "--sampler is required with --mode instance")
                .exit();
        }
        (Mode::Instance, Some(id)) => trace_instance(&lib, &id, seed)?.to_json(),
        (Mode::Distribution, id) => {
            let start = Instant::now();
            let ids: Vec<String> = match id {
                Some(id) => vec![id],
                None => lib.sampler_ids().map(String::from).collect(),
            };
            let mut all = serde_json::Map::new();
            for id in &ids {
                all.insert(id.clone(), trace_distribution(&lib, id)?.to_json());
            }
            eprintln!("traced {} sampler(s) in {:.1} ms", ids.len(), start.elapsed().as_secs_f64() * 1e3);
            if ids.len() == 1 {
                all.remove(&ids[0]).unwrap_or_default()
            } else {
                Value::Object(all)
            }
        }
    };
    write_json(out, &v)
}

fn analyze_cmd(sampler: Option<String>) -> Res<()> {
    let lib = library();
    let report = |id: &str| -> Res<Value> { Ok(serde_json::to_value(analyze(&trace_distribution(&lib, id)?)?)?) };
    let v = match sampler {
        Some(id) => report(&id)?,
        None => {
            let mut all = serde_json::Map::new();
            for id in lib.sampler_ids() {
                all.insert(id.to_string(), report(id)?);
            }
            Value::Object(all)
        }
    };
    write_json(None, &v)
}

fn normalvar(input: &Path, out: &Path, window: usize) -> Res<()> {
    let nv = normal_variation(&read_pfm(input).map_err(|e| format!("{}: {e}", input.display()))?, window)?;
    write_pfm(out, &nv.v)?;
    let summary = json!({
        "input": input.display().to_string(),
        "window": window,
        "mean": nv.mean,
        "valid_pixels": nv.valid,
        "histogram": nv.histogram,
    });
    write_json(Some(&out.with_extension("json")), &summary)?;
    write_json(None, &summary)
}

fn transpile(input: &Path, out: &Path, hsv: bool, no_operators: bool, check: bool) -> Res<()> {
    let g = Graph::from_json(&read(input)?)?;
    let opts = EmitOptions { use_operators: !no_operators, hsv_colors: hsv, ..EmitOptions::default() };
    let src = emit(&g, &opts);
    if check && !graph_isomorphic(&exec_script(&src)?, &g) {
        return Err("emitted source does not rebuild the input graph".into());
    }
    write_text(Some(out), &src)?;
    Ok(())
}

fn campath(a: &CampathArgs) -> Res<()> {
    let mut scene = Scene::from_json(&read(&a.scene)?)?;
    let world = scene.box_world(None, a.margin);
    let params = RrtParams { max_iters: a.iters, ..RrtParams::default() };
    let r = rrt_star(a.start, a.goal, &world, &params, &mut RandomStream::new(a.seed))?;
    let cams = path_to_cameras(&r.path, a.spacing, 2.0 * a.spacing, DEFAULT_FOV, a.res)?;
    let summary = json!({
        "path": r.path.iter().map(|p| [p.x, p.y, p.z]).collect::<Vec<_>>(),
        "cost": r.cost,
        "straight_line": a.start.distance(a.goal),
        "iterations": r.cost_trace.len(),
        "tree_size": r.tree_size,
        "cameras": cams.len(),
    });
    if let Some(out) = &a.out {
        scene.cameras = cams;
        write_text(Some(out), &scene.to_json())?;
    }
    write_json(None, &summary)
}

fn rendergt(scene: &Path, out: &Path, format: Format) -> Res<()> {
    let scene = Scene::from_json(&read(scene)?)?;
    std::fs::create_dir_all(out)?;
    let mut files = Vec::new();
    for (k, cam) in scene.cameras.iter().enumerate() {
        let frame = render_gt(&scene, cam)?;
        for (name, _) in write_frame(out, &format!("scene{}_cam{k}", scene.seed), &frame, format)? {
            files.push(name);
        }
    }
    write_json(None, &json!({ "files": files }))
}

fn run(cli: Cli) -> Res<()> {
    let format = Format::from(cli.format);
    match cli.cmd {
        Cmd::Ops { cmd: OpsCmd::List } => write_json(None, &procgen::catalog::manifest_json()),
        Cmd::Bake(a) => bake(&a, format),
        Cmd::Sample { sampler, seed, out } => {
            let r = procgen::sampler::run_sampler(&library(), &sampler, RandomStream::new(seed))?;
            write_text(out.as_deref(), &r.graph.to_json())
        }
        Cmd::Trace { sampler, mode, seed, out } => trace(sampler, mode, seed, out.as_deref()),
        Cmd::Analyze { sampler } => analyze_cmd(sampler),
        Cmd::Normalvar { input, out, window } => normalvar(&input, &out, window),
        Cmd::Transpile { input, out, hsv, no_operators, check } => transpile(&input, &out, hsv, no_operators, check),
        Cmd::Room { seed, out, cams, res, quad_size } => {
            let params = RoomParams { cameras: cams, resolution: res, quad_size, ..RoomParams::default() };
            write_text(Some(&out), &sample_room(seed, &params)?.to_json())
        }
        Cmd::Campath(a) => campath(&a),
        Cmd::Rendergt { scene, out } => rendergt(&scene, &out, format),
        Cmd::Dataset { seed, scenes, cams, res, out } => {
            let start = Instant::now();
            let m = generate_dataset(&DatasetConfig::new(seed, scenes, cams, res, format), &out)?;
            eprintln!("wrote {} files in {:.2} s", m.files.len() + 1, start.elapsed().as_secs_f64());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            Cli::command().error(ErrorKind::InvalidValue, "--threads must be at least 1").exit();
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
