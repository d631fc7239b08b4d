use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use woundpatch::capture::{load_bundle, save_bundle};
use woundpatch::eval::{default_intrinsics, render_depth, run_sweep, NoiseModel, SweepConfig, SyntheticScene, WoundType};
use woundpatch::fabricate::SlicerConfig;
use woundpatch::pipeline::{generate_patch, preview, CancelToken};
use woundpatch::prep::{oversample_plan, write_plan_csv, PatientCensus, DEFAULT_CLAMP};
use woundpatch::segmentation::{BoundaryPolygon, Threshold};
use woundpatch_service::wire::BoundaryRequest;

#[derive(Parser)]
#[command(name = "woundpatch", version, about = "RGB-D wound capture to printable patch")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-patient oversampling plan from a census CSV (patient_id,count).
    Prep {
        #[arg(long)]
        census: PathBuf,
        /// Per-patient target cap.
        #[arg(long, default_value_t = DEFAULT_CLAMP)]
        clamp: u32,
        /// Plan CSV (patient_id,oversample); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruct, flatten and slice a patch from a capture bundle.
    Fabricate(FabricateArgs),
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Run the HTTP session service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Persist sessions under this directory.
        #[arg(long)]
        state_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct FabricateArgs {
    /// Bundle directory (manifest.json, rgb.png, depth.png, optional score.f32).
    #[arg(long)]
    bundle: PathBuf,
    /// JSON file holding the confirmed boundary: {"vertices": [[x, y], ...]} in depth pixels.
    #[arg(long, conflicts_with = "seed")]
    boundary: Option<PathBuf>,
    /// Select the region under this pixel instead, as X,Y.
    #[arg(long, value_parser = parse_pixel)]
    seed: Option<(i64, i64)>,
    /// Threshold for --seed; defaults to the bundle's.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    thickness_mm: f64,
    #[arg(long)]
    stl: PathBuf,
    #[arg(long)]
    gcode: PathBuf,
    /// Also write the lifted surface mesh as OBJ (meters).
    #[arg(long)]
    obj: Option<PathBuf>,
    #[command(flatten)]
    slicer: SlicerArgs,
}

#[derive(Args)]
struct SlicerArgs {
    #[arg(long)]
    layer_height: Option<f64>,
    #[arg(long)]
    extrusion_width: Option<f64>,
    #[arg(long)]
    filament_diameter: Option<f64>,
    #[arg(long)]
    perimeters: Option<u32>,
    #[arg(long)]
    infill_spacing: Option<f64>,
    #[arg(long)]
    feed_rate: Option<f64>,
}

impl SlicerArgs {
    fn config(&self) -> SlicerConfig {
        let mut c = SlicerConfig::default();
        if let Some(v) = self.layer_height {
            c.layer_height = v;
        }
        if let Some(v) = self.extrusion_width {
            c.extrusion_width = v;
        }
        if let Some(v) = self.filament_diameter {
            c.filament_diameter = v;
        }
        if let Some(v) = self.perimeters {
            c.perimeter_count = v;
        }
        if let Some(v) = self.infill_spacing {
            c.infill_spacing = v;
        }
        if let Some(v) = self.feed_rate {
            c.feed_rate = v;
        }
        c
    }
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Area accuracy over wound types and camera tilts on synthetic scenes.
    Sweep {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        sigma_mm: f64,
        #[arg(long, default_value_t = 3.0)]
        rim_amplification: f64,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        /// Comma-separated tilts in degrees.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 10.0, 20.0, 30.0])]
        angles: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one synthetic scene as a capture bundle.
    Render {
        #[arg(long, value_enum)]
        wound: Wound,
        #[arg(long, default_value_t = 0.0)]
        tilt: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        sigma_mm: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Wound {
    A,
    B,
    C,
}

impl From<Wound> for WoundType {
    fn from(w: Wound) -> Self {
        match w {
            Wound::A => WoundType::A,
            Wound::B => WoundType::B,
            Wound::C => WoundType::C,
        }
    }
}

fn parse_pixel(s: &str) -> Result<(i64, i64), String> {
    let (x, y) = s.split_once(',').ok_or("expected X,Y")?;
    let p = |v: &str| v.trim().parse::<i64>().map_err(|e| format!("{v:?}: {e}"));
    Ok((p(x)?, p(y)?))
}

fn noise(sigma_mm: f64, rim_amplification: f64) -> NoiseModel {
    if sigma_mm == 0.0 {
        return NoiseModel::none();
    }
    NoiseModel {
        sigma_mm,
        rim_amplification,
        ..NoiseModel::default()
    }
}

fn prep(census: PathBuf, clamp: u32, out: Option<PathBuf>) -> Result<()> {
    let file = File::open(&census).with_context(|| format!("opening {}", census.display()))?;
    let census = PatientCensus::read_csv(BufReader::new(file), clamp)?;
    let plan = oversample_plan(&census);
    match out {
        Some(path) => write_plan_csv(&plan, File::create(&path).with_context(|| format!("creating {}", path.display()))?)?,
        None => write_plan_csv(&plan, io::stdout().lock())?,
    }
    Ok(())
}

fn fabricate(a: FabricateArgs) -> Result<()> {
    let bundle = load_bundle(&a.bundle).with_context(|| format!("loading {}", a.bundle.display()))?;
    let (boundary, seed) = match (&a.boundary, a.seed) {
        (Some(path), _) => {
            let f: BoundaryRequest = serde_json::from_slice(&fs::read(path)?).with_context(|| format!("parsing {}", path.display()))?;
            (BoundaryPolygon::redraw(f.vertices)?, None)
        }
        (None, Some(seed)) => {
            let score = bundle.score.as_ref().context("bundle has no score map; pass --boundary")?;
            let t = Threshold::new(a.threshold.unwrap_or(bundle.default_threshold))?;
            (preview(score, seed, t)?.boundary, Some([seed.0 as f64, seed.1 as f64]))
        }
        (None, None) => bail!("pass --boundary or --seed"),
    };
    let start = Instant::now();
    let patch = generate_patch(&bundle, &boundary, seed, a.thickness_mm, &a.slicer.config(), &CancelToken::new())?;
    fs::write(&a.stl, &patch.artifacts.stl).with_context(|| format!("writing {}", a.stl.display()))?;
    fs::write(&a.gcode, &patch.artifacts.gcode).with_context(|| format!("writing {}", a.gcode.display()))?;
    if let Some(obj) = &a.obj {
        fs::write(obj, patch.mesh.to_obj()).with_context(|| format!("writing {}", obj.display()))?;
    }
    println!(
        "surface {:.3} cm², {} triangles; patch {:.3} cm² x {} mm; {} STL bytes, {} G-code lines ({:.2} s)",
        patch.mesh_area_cm2(),
        patch.mesh.triangles.len(),
        patch.flat_area_cm2(),
        a.thickness_mm,
        patch.artifacts.stl.len(),
        patch.artifacts.gcode.lines().count(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn eval(cmd: EvalCommand) -> Result<()> {
    match cmd {
        EvalCommand::Sweep {
            seed,
            sigma_mm,
            rim_amplification,
            repeats,
            angles,
            out,
        } => {
            let cfg = SweepConfig {
                seed,
                noise: noise(sigma_mm, rim_amplification),
                angles_deg: angles,
                repeats,
                ..SweepConfig::default()
            };
            let start = Instant::now();
            let report = run_sweep(&cfg);
            print!("{}", report.to_table());
            println!(
                "grand accuracy {:.2}%, angle spread {:.2} pp, {} failed runs, {:.1} s",
                report.grand_accuracy_pct,
                report.angle_spread(),
                report.failures(),
                start.elapsed().as_secs_f64()
            );
            if let Some(path) = out {
                fs::write(&path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        EvalCommand::Render {
            wound,
            tilt,
            seed,
            sigma_mm,
            out,
        } => {
            let wound = WoundType::from(wound);
            let scene = SyntheticScene::new(wound.shape(), tilt, noise(sigma_mm, 3.0), seed);
            let r = render_depth(&scene, &default_intrinsics())?;
            save_bundle(&r.bundle, &out)?;
            println!(
                "wound {} at {tilt}°: true area {:.3} cm², seed pixel {},{}",
                wound.label(),
                scene.truth_area_cm2(),
                r.seed.0,
                r.seed.1
            );
        }
    }
    Ok(())
}

#[tokio::main]
async fn serve(addr: SocketAddr, state_dir: Option<PathBuf>) -> Result<()> {
    let state = match state_dir {
        Some(dir) => woundpatch_service::AppState::with_state_dir(dir)?,
        None => woundpatch_service::AppState::in_memory(),
    };
    woundpatch_service::serve(addr, state).await?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Prep { census, clamp, out } => prep(census, clamp, out),
        Command::Fabricate(a) => fabricate(a),
        Command::Eval(cmd) => eval(cmd),
        Command::Serve { addr, state_dir } => {
            tracing_subscriber::fmt()
                .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
                .init();
            serve(addr, state_dir)
        }
    }?;
    io::stdout().flush()?;
    Ok(())
}
