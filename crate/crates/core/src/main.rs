use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use roadnav::apf::{Directive, ForceVec, Point};
use roadnav::destination::find_destination;
use roadnav::flow_warp::{propagate_feature, ScaleGrid};
use roadnav::metrics::{hausdorff, instance_counts, nofp, odr, ConfusionMatrix, InstanceMatch};
use roadnav::morphology::smooth;
use roadnav::motion_blur::{apply_blur, psf_kernel, random_blur, BlurSpec};
use roadnav::pipeline::{
    generate_scene, overlay, run_episode, run_frame, Frame, FrameResult, PipelineConfig, SceneSource, SceneSpec,
    VecSource,
};
use roadnav::raster::{
    read_flo, read_ften, read_pgm, write_ften, write_pgm, write_ppm, BinaryImage, FeatureTensor, Grid, FTEN_MAGIC,
};
use roadnav::segmap::{binarize, Category, ClassMap};
use roadnav::{Error, Result};

const EXIT_FAILURE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NO_PATH: u8 = 3;

#[derive(Parser)]
#[command(
    name = "roadnav",
    version,
    about = "Road map smoothing, destination setting and local path planning"
)]
struct Cli {
    /// Pipeline configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for random scene and blur generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write outputs into this directory instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for data-parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a path on a class-map PGM ("-" reads stdin).
    Plan {
        #[arg(default_value = "-")]
        input: PathBuf,
    },
    /// Binarize and smooth a class-map PGM; writes a 0/255 PGM.
    Smooth {
        #[arg(default_value = "-")]
        input: PathBuf,
        /// Input is already a road map (non-zero = road).
        #[arg(long)]
        binary: bool,
    },
    /// Find the local destination of a class-map PGM.
    Destination {
        #[arg(default_value = "-")]
        input: PathBuf,
        /// Input is an already smoothed road map (non-zero = road).
        #[arg(long)]
        binary: bool,
    },
    /// Motion-blur a PGM or FTEN image. Without --length, length and angle
    /// are drawn from --seed.
    Blur {
        #[arg(default_value = "-")]
        input: PathBuf,
        #[arg(long)]
        length: Option<usize>,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        angle: f64,
    },
    /// Warp pre-frame features (FTEN or PGM) into the current frame with a
    /// .flo flow field; writes FTEN.
    Warp {
        features: PathBuf,
        flow: PathBuf,
        /// Per-pixel scale, channel 0 of an FTEN file.
        #[arg(long)]
        scale: Option<PathBuf>,
    },
    /// Score predicted class maps against ground truth.
    Metrics {
        /// Predicted class-map PGM, one per frame.
        #[arg(long, required = true)]
        pred: Vec<PathBuf>,
        /// Ground-truth class-map PGM, one per frame.
        #[arg(long, required = true)]
        gt: Vec<PathBuf>,
        /// Number of label ids for mIoU.
        #[arg(long, default_value_t = 256)]
        classes: usize,
        /// Planned path (path JSON or [[x, y], ...]).
        #[arg(long, requires = "reference")]
        path: Option<PathBuf>,
        /// Reference path, same formats as --path.
        #[arg(long, requires = "path")]
        reference: Option<PathBuf>,
    },
    /// Run a closed-loop episode over PGM frames, or over synthetic scenes
    /// when no frames are given.
    Episode {
        inputs: Vec<PathBuf>,
        /// Synthetic frame count.
        #[arg(long, default_value_t = 10)]
        frames: usize,
        /// Scene specification (JSON) for synthetic frames.
        #[arg(long)]
        scene: Option<PathBuf>,
    },
    /// Generate a synthetic class-map PGM (labels 0 others, 1 road, 2 obstacle).
    GenScene {
        /// Scene specification (JSON).
        #[arg(long)]
        scene: Option<PathBuf>,
    },
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    if path == Path::new("-") {
        let mut buf = Vec::new();
        std::io::stdin().lock().read_to_end(&mut buf)?;
        Ok(buf)
    } else {
        Ok(std::fs::read(path)?)
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    match &cli.config {
        Some(path) => PipelineConfig::load(path),
        None => Ok(PipelineConfig::default()),
    }
}

fn load_scene_spec(path: Option<&Path>) -> Result<SceneSpec> {
    let spec: SceneSpec = match path {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => SceneSpec::default(),
    };
    spec.validate()?;
    Ok(spec)
}

fn read_class_map(path: &Path, cfg: &PipelineConfig) -> Result<ClassMap> {
    ClassMap::new(read_pgm(&read_input(path)?)?, cfg.load_class_table()?)
}

fn read_road_map(path: &Path, cfg: &PipelineConfig, binary: bool) -> Result<BinaryImage> {
    if binary {
        Ok(read_pgm(&read_input(path)?)?.map(|&v| u8::from(v != 0)))
    } else {
        Ok(binarize(&read_class_map(path, cfg)?))
    }
}

fn read_tensor(bytes: &[u8]) -> Result<(FeatureTensor, bool)> {
    if bytes.starts_with(FTEN_MAGIC) {
        Ok((read_ften(bytes)?, false))
    } else {
        Ok((FeatureTensor::from_grid(&read_pgm(bytes)?), true))
    }
}

fn tensor_to_pgm(t: &FeatureTensor) -> Result<Vec<u8>> {
    let grid = Grid::from_vec(t.width(), t.height(), t.plane(0).to_vec())?;
    Ok(write_pgm(&grid.map(|v| v.round().clamp(0.0, 255.0) as u8)))
}

fn json_text(value: &impl Serialize) -> Result<Vec<u8>> {
    let mut text = serde_json::to_vec_pretty(value)?;
    text.push(b'\n');
    Ok(text)
}

/// Write `bytes` to `<out>/<name>` when an output directory is set,
/// otherwise to stdout.
fn emit(out: Option<&Path>, name: &str, bytes: &[u8]) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(name), bytes)?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn path_document(result: &FrameResult, with_forces: bool) -> Value {
    let status = match (&result.path, result.destination, result.roi_area) {
        (Some(p), _, _) => serde_json::to_value(p.status).expect("plain enum"),
        (None, _, None) => json!("no_road"),
        (None, None, _) => json!("no_destination"),
        (None, Some(_), _) => json!("start_not_road"),
    };
    let waypoints: Vec<[f64; 2]> = result
        .path
        .as_ref()
        .map(|p| p.positions.iter().map(|&(x, y)| [x, y]).collect())
        .unwrap_or_default();
    let directive = match &result.directive {
        Directive::Proceed(wps) => json!({ "proceed": wps.len() }),
        Directive::RotateAndRescan(deg) => json!({ "rotate_deg": deg }),
    };
    let mut doc = json!({
        "status": status,
        "waypoints": waypoints,
        "destination": result.destination.map(|d| [d.col, d.row]),
        "directive": directive,
    });
    if with_forces {
        let forces: Vec<ForceVec> = result.path.as_ref().map(|p| p.forces.clone()).unwrap_or_default();
        doc["forces"] = json!(forces);
    }
    doc
}

/// Accept either a path document with "waypoints" or a bare point array.
fn read_points(path: &Path) -> Result<Vec<Point>> {
    let value: Value = serde_json::from_slice(&read_input(path)?)?;
    let points = value.get("waypoints").cloned().unwrap_or(value);
    let pairs: Vec<[f64; 2]> = serde_json::from_value(points)?;
    Ok(pairs.into_iter().map(|[x, y]| (x, y)).collect())
}

fn cmd_plan(cli: &Cli, input: &Path) -> Result<u8> {
    let cfg = load_config(cli)?;
    let map = read_class_map(input, &cfg)?;
    let result = run_frame(&map, &cfg)?;
    log::info!("stage timings (ms): {:?}", result.timings);
    let doc = json_text(&path_document(&result, cfg.output.forces))?;
    if let Some(dir) = &cli.out {
        emit(Some(dir), "path.json", &doc)?;
        if cfg.output.overlay {
            emit(Some(dir), "overlay.ppm", &write_ppm(&overlay::render(&result)))?;
        }
    }
    emit(None, "", &doc)?;
    Ok(match result.directive {
        Directive::Proceed(_) => 0,
        Directive::RotateAndRescan(_) => EXIT_NO_PATH,
    })
}

fn cmd_smooth(cli: &Cli, input: &Path, binary: bool) -> Result<u8> {
    let cfg = load_config(cli)?;
    let smoothed = smooth(&read_road_map(input, &cfg, binary)?, &cfg.morph)?;
    emit(
        cli.out.as_deref(),
        "smoothed.pgm",
        &write_pgm(&smoothed.map(|&v| v * 255)),
    )?;
    Ok(0)
}

fn cmd_destination(cli: &Cli, input: &Path, binary: bool) -> Result<u8> {
    let cfg = load_config(cli)?;
    let road = read_road_map(input, &cfg, binary)?;
    let road = if binary { road } else { smooth(&road, &cfg.morph)? };
    let dest = find_destination(&road, &cfg.destination);
    let doc = json!({ "destination": dest.map(|d| [d.col, d.row]) });
    emit(cli.out.as_deref(), "destination.json", &json_text(&doc)?)?;
    Ok(if dest.is_some() { 0 } else { EXIT_NO_PATH })
}

fn cmd_blur(cli: &Cli, input: &Path, length: Option<usize>, angle: f64) -> Result<u8> {
    let (image, was_pgm) = read_tensor(&read_input(input)?)?;
    let (blurred, spec) = match length {
        Some(length) => {
            let spec = BlurSpec::new(length, angle)?;
            (apply_blur(&image, &psf_kernel(&spec)), spec)
        }
        None => random_blur(&image, cli.seed.unwrap_or(0)),
    };
    log::info!("blur length {} angle {}", spec.length, spec.angle_deg);
    if was_pgm {
        emit(cli.out.as_deref(), "blurred.pgm", &tensor_to_pgm(&blurred)?)?;
    } else {
        emit(cli.out.as_deref(), "blurred.ften", &write_ften(&blurred))?;
    }
    Ok(0)
}

fn cmd_warp(cli: &Cli, features: &Path, flow: &Path, scale: Option<&Path>) -> Result<u8> {
    let (f_p, _) = read_tensor(&read_input(features)?)?;
    let flow = read_flo(&read_input(flow)?)?;
    let scale = match scale {
        Some(p) => ScaleGrid::from_tensor(&read_ften(&read_input(p)?)?)?,
        None => ScaleGrid::uniform(),
    };
    let warped = propagate_feature(&f_p, &flow, &scale)?;
    emit(cli.out.as_deref(), "warped.ften", &write_ften(&warped))?;
    Ok(0)
}

fn cmd_metrics(
    cli: &Cli,
    pred: &[PathBuf],
    gt: &[PathBuf],
    classes: usize,
    paths: Option<(&Path, &Path)>,
) -> Result<u8> {
    if pred.len() != gt.len() {
        return Err(Error::InvalidParameter(format!(
            "{} predictions for {} ground-truth maps",
            pred.len(),
            gt.len()
        )));
    }
    let cfg = load_config(cli)?;
    let mut confusion = ConfusionMatrix::new(classes)?;
    let mut matches = Vec::new();
    for (p, g) in pred.iter().zip(gt) {
        let pm = read_class_map(p, &cfg)?;
        let gm = read_class_map(g, &cfg)?;
        confusion.accumulate(pm.labels(), gm.labels())?;
        matches.push(InstanceMatch::from_masks(
            &pm.mask_of(Category::Obstacle),
            &gm.mask_of(Category::Obstacle),
        )?);
    }
    let counts = instance_counts(&matches);
    let hausdorff_px = match paths {
        Some((a, b)) => Some(hausdorff(&read_points(a)?, &read_points(b)?)?),
        None => None,
    };
    let doc = json!({
        "miou": confusion.miou(),
        "odr": odr(&matches).ok(),
        "nofp": nofp(&matches, matches.len())?,
        "hausdorff_px": hausdorff_px,
        "counts": {
            "frames": matches.len(),
            "pixels": confusion.total(),
            "successes": counts.successes,
            "gt_instances": counts.gt_instances,
            "false_positives": counts.false_positives,
        },
    });
    emit(cli.out.as_deref(), "metrics.json", &json_text(&doc)?)?;
    Ok(0)
}

fn cmd_episode(cli: &Cli, inputs: &[PathBuf], frames: usize, scene: Option<&Path>) -> Result<u8> {
    let cfg = load_config(cli)?;
    let report = if inputs.is_empty() {
        let spec = load_scene_spec(scene)?;
        run_episode(&mut SceneSource::new(cli.seed.unwrap_or(0), spec, frames), &cfg)?
    } else {
        let frames = inputs
            .iter()
            .map(|p| {
                Ok(Frame {
                    map: read_class_map(p, &cfg)?,
                    reference: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        run_episode(&mut VecSource::new(frames), &cfg)?
    };
    emit(cli.out.as_deref(), "episode.json", &json_text(&report)?)?;
    Ok(0)
}

fn cmd_gen_scene(cli: &Cli, scene: Option<&Path>) -> Result<u8> {
    let spec = load_scene_spec(scene)?;
    let generated = generate_scene(cli.seed.unwrap_or(0), &spec)?;
    emit(cli.out.as_deref(), "scene.pgm", &write_pgm(generated.map.labels()))?;
    if let (Some(dir), Some(reference)) = (&cli.out, &generated.reference) {
        let pairs: Vec<[f64; 2]> = reference.iter().map(|&(x, y)| [x, y]).collect();
        emit(Some(dir), "reference.json", &json_text(&pairs)?)?;
    }
    Ok(0)
}

fn run(cli: &Cli) -> Result<u8> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Plan { input } => cmd_plan(cli, input),
        Command::Smooth { input, binary } => cmd_smooth(cli, input, *binary),
        Command::Destination { input, binary } => cmd_destination(cli, input, *binary),
        Command::Blur { input, length, angle } => cmd_blur(cli, input, *length, *angle),
        Command::Warp { features, flow, scale } => cmd_warp(cli, features, flow, scale.as_deref()),
        Command::Metrics {
            pred,
            gt,
            classes,
            path,
            reference,
        } => cmd_metrics(cli, pred, gt, *classes, path.as_deref().zip(reference.as_deref())),
        Command::Episode { inputs, frames, scene } => cmd_episode(cli, inputs, *frames, scene.as_deref()),
        Command::GenScene { scene } => cmd_gen_scene(cli, scene.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("roadnav: {e}");
            ExitCode::from(if e.is_input_error() { EXIT_INPUT } else { EXIT_FAILURE })
        }
    }
}
