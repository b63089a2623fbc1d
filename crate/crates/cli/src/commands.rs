use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::Args;
use pcscale::io::{
    format_significant, read_groups, read_point_cloud, read_pose_log, read_sieve_series,
    write_cloud_ply, write_mesh_ply, write_pose_log, write_scale_report, PlyEncoding, PoseLogEntry,
};
use pcscale::mesh::{triangulate, MeshOptions, TerrainMesh};
use pcscale::scale::{batch_scales, GroundPlane, LinearScan, RaySurface};
use pcscale::stats::{fit_swebrec, one_way_anova_at, percent_error_residuals, FitOptions};
use pcscale::synth::{
    camera_layout, marched_scale, oracle_scale, sample_cloud, Plane, Region, SurfaceKind,
    SyntheticSurface,
};
use pcscale::{CameraIntrinsics, ImageGeometry};

use crate::settings::{usage, Settings};
use crate::{CameraArgs, Cli, Command, MeshArgs};

const DIGITS: usize = 9;

fn g(v: f64) -> String {
    format_significant(v, DIGITS)
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let settings = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Mesh { mesh, dump, ascii } => mesh_command(&settings, mesh, dump, ascii),
        Command::Scale {
            mesh,
            camera,
            poses,
            output,
            linear,
        } => {
            let mesh = build_mesh(&settings, mesh)?;
            if linear {
                scale_command(&settings, &LinearScan(&mesh), camera, poses, output, true)
            } else {
                scale_command(&settings, &mesh, camera, poses, output, true)
            }
        }
        Command::GroundplaneScale {
            camera,
            poses,
            output,
        } => scale_command(&settings, &GroundPlane, camera, poses, output, false),
        Command::Fit {
            sieve,
            max_iterations,
        } => fit_command(&settings, sieve, max_iterations),
        Command::Anova { groups, alpha } => anova_command(&settings, groups, alpha),
        Command::Synth(args) => synth_command(&settings, args),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn build_mesh(settings: &Settings, args: MeshArgs) -> Result<TerrainMesh> {
    let path = settings.require_path(args.cloud, "cloud")?;
    let defaults = MeshOptions::default();
    let dedup_tolerance = settings.or(
        args.dedup_tolerance,
        "mesh.dedup_tolerance",
        defaults.dedup_tolerance,
    )?;
    if !(dedup_tolerance >= 0.0) {
        return Err(usage(format!(
            "dedup tolerance must be non-negative, got {dedup_tolerance}"
        )));
    }
    let grid_resolution = settings.get(args.grid_resolution, "mesh.grid_resolution")?;
    if grid_resolution == Some(0) {
        return Err(usage("grid resolution must be positive"));
    }
    let cloud = read_point_cloud(&path)
        .with_context(|| format!("reading point cloud {}", path.display()))?;
    let options = MeshOptions {
        dedup_tolerance,
        grid_resolution,
    };
    triangulate(&cloud, &options).with_context(|| format!("triangulating {}", path.display()))
}

fn mesh_command(
    settings: &Settings,
    args: MeshArgs,
    dump: Option<PathBuf>,
    ascii: bool,
) -> Result<ExitCode> {
    let mesh = build_mesh(settings, args)?;
    let stats = mesh.stats();
    let [gx, gy] = mesh.grid_dims();
    let mut out = io::stdout().lock();
    writeln!(out, "input_points={}", stats.input_points)?;
    writeln!(out, "merged_duplicates={}", stats.merged_duplicates)?;
    writeln!(out, "dropped_degenerate={}", stats.dropped_degenerate)?;
    writeln!(out, "vertices={}", mesh.vertices().len())?;
    writeln!(out, "triangles={}", mesh.triangles().len())?;
    writeln!(out, "grid={gx}x{gy}")?;
    writeln!(out, "projected_area={}", g(mesh.projected_area()))?;
    if let Some(path) = dump {
        let encoding = if ascii {
            PlyEncoding::Ascii
        } else {
            PlyEncoding::BinaryLittleEndian
        };
        let mut w = create(&path)?;
        write_mesh_ply(&mut w, &mesh, encoding)?;
        w.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}

fn intrinsics(settings: &Settings, args: &CameraArgs) -> Result<(CameraIntrinsics, u32, u32)> {
    let width: u32 = settings.require(args.width, "image.width", "width")?;
    let height: u32 = settings.require(args.height, "image.height", "height")?;
    let fx: f64 = settings.require(args.fx, "camera.fx", "fx")?;
    let fy = settings.or(args.fy, "camera.fy", fx)?;
    let cx = settings.or(args.cx, "camera.cx", f64::from(width) / 2.0)?;
    let cy = settings.or(args.cy, "camera.cy", f64::from(height) / 2.0)?;
    let skew = settings.or(args.skew, "camera.skew", 0.0)?;
    let k = CameraIntrinsics::new(fx, fy, cx, cy, skew)
        .map_err(|e| usage(format!("camera intrinsics: {e}")))?;
    if width == 0 || height == 0 {
        return Err(usage("image width and height must be positive"));
    }
    Ok((k, width, height))
}

fn scale_command<S: RaySurface + ?Sized>(
    settings: &Settings,
    surface: &S,
    camera: CameraArgs,
    poses: Option<PathBuf>,
    output_path: Option<PathBuf>,
    warn_fallback: bool,
) -> Result<ExitCode> {
    let (k, width, height) = intrinsics(settings, &camera)?;
    let poses_path = settings.require_path(poses, "poses")?;
    let output_path = settings.path(output_path, "output");
    let entries = read_pose_log(&poses_path)
        .with_context(|| format!("reading pose log {}", poses_path.display()))?;
    let geoms = entries
        .into_iter()
        .map(|e| ImageGeometry::new(e.image_id, width, height, k, e.pose))
        .collect::<Result<Vec<_>, _>>()?;

    let outcome = batch_scales(surface, &geoms);
    let mut out = output(output_path.as_deref())?;
    write_scale_report(&mut out, &outcome.records)?;
    out.flush()?;
    for r in outcome
        .records
        .iter()
        .filter(|r| warn_fallback && r.any_fallback)
    {
        let corners: Vec<&str> = pcscale::scale::Corner::ALL
            .iter()
            .filter(|&&c| r.corner(c).is_fallback())
            .map(|c| c.name())
            .collect();
        eprintln!(
            "warning[fallback]: image {}: corners {} missed the mesh and used z = 0",
            r.image_id,
            corners.join(",")
        );
    }
    if outcome.failures.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    for f in &outcome.failures {
        eprintln!(
            "error[data]: image {} (pose {}): {}",
            f.image_id,
            f.index + 1,
            f.error
        );
    }
    bail!(
        "{} of {} images could not be scaled",
        outcome.failures.len(),
        geoms.len()
    )
}

fn fit_command(
    settings: &Settings,
    sieve: Option<PathBuf>,
    max_iterations: Option<usize>,
) -> Result<ExitCode> {
    let path = settings.require_path(sieve, "sieve")?;
    let defaults = FitOptions::default();
    let options = FitOptions {
        max_iterations: settings.or(
            max_iterations,
            "fit.max_iterations",
            defaults.max_iterations,
        )?,
        ..defaults
    };
    let series = read_sieve_series(&path)
        .with_context(|| format!("reading sieve series {}", path.display()))?;
    let fit = fit_swebrec(&series, &options)?;
    let residuals = percent_error_residuals(&series, &fit.curve)?;
    let mut out = io::stdout().lock();
    writeln!(out, "x_max_mm={}", g(fit.curve.x_max()))?;
    writeln!(out, "x_50_mm={}", g(fit.curve.x_50()))?;
    writeln!(out, "b={}", g(fit.curve.b()))?;
    writeln!(out, "residual_norm={}", g(fit.residual_norm))?;
    writeln!(out, "iterations={}", fit.iterations)?;
    writeln!(out, "size_mm,residual_percent")?;
    for (size, r) in residuals {
        writeln!(out, "{},{}", g(size), g(r))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn anova_command(
    settings: &Settings,
    groups: Option<PathBuf>,
    alpha: Option<f64>,
) -> Result<ExitCode> {
    let path = settings.require_path(groups, "groups")?;
    let alpha = settings.or(alpha, "anova.alpha", pcscale::stats::DEFAULT_ALPHA)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(usage(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let groups =
        read_groups(&path).with_context(|| format!("reading groups {}", path.display()))?;
    let values: Vec<&[f64]> = groups.iter().map(|(_, v)| v.as_slice()).collect();
    let t = one_way_anova_at(&values, alpha)?;
    let mut out = io::stdout().lock();
    writeln!(out, "source,df,ss,ms,f,critical,p_value")?;
    writeln!(
        out,
        "factor,{},{},{},{},{},{}",
        t.df_factor,
        g(t.ss_factor),
        g(t.ms_factor),
        g(t.f),
        g(t.critical),
        g(t.p_value)
    )?;
    writeln!(
        out,
        "residual,{},{},{},,,",
        t.df_residual,
        g(t.ss_residual),
        g(t.ms_residual)
    )?;
    writeln!(out, "total,{},{},,,,", t.df_total(), g(t.ss_total()))?;
    writeln!(out, "alpha={}", g(t.alpha))?;
    writeln!(out, "reject={}", t.reject)?;
    Ok(if t.reject {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    })
}

#[derive(Debug, Clone, Copy)]
pub struct RegionArg(Region);

impl FromStr for RegionArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad number '{p}'"))
            })
            .collect::<Result<_, _>>()?;
        let [x0, y0, x1, y1] = v[..] else {
            return Err("expected x0,y0,x1,y1".into());
        };
        Region::new(x0, y0, x1, y1)
            .map(Self)
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceArg {
    Plane,
    Sinusoid,
}

impl FromStr for SurfaceArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "plane" => Ok(Self::Plane),
            "sinusoid" => Ok(Self::Sinusoid),
            other => Err(format!("unknown surface '{other}' (plane or sinusoid)")),
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    camera: CameraArgs,
    /// Directory for cloud.ply, poses.csv, oracle.csv and run.conf.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Sampling seed [synth.seed].
    #[arg(long)]
    seed: Option<u64>,
    /// plane or sinusoid [synth.surface].
    #[arg(long)]
    surface: Option<SurfaceArg>,
    /// Plane slope along x [synth.plane.a].
    #[arg(long)]
    plane_a: Option<f64>,
    /// Plane slope along y [synth.plane.b].
    #[arg(long)]
    plane_b: Option<f64>,
    /// Plane offset [synth.plane.c].
    #[arg(long)]
    plane_c: Option<f64>,
    /// [synth.sinusoid.amplitude]
    #[arg(long)]
    amplitude: Option<f64>,
    /// [synth.sinusoid.wavelength]
    #[arg(long)]
    wavelength: Option<f64>,
    /// [synth.sinusoid.base]
    #[arg(long)]
    base: Option<f64>,
    /// Sampling rectangle x0,y0,x1,y1 in meters [synth.region].
    #[arg(long, allow_hyphen_values = true)]
    region: Option<RegionArg>,
    /// Samples per axis [synth.density].
    #[arg(long)]
    density: Option<usize>,
    /// Gaussian position noise sigma [synth.noise].
    #[arg(long)]
    noise: Option<f64>,
    /// Number of camera poses [synth.cameras].
    #[arg(long)]
    cameras: Option<usize>,
    /// Camera height above the surface at the region center [synth.altitude].
    #[arg(long)]
    altitude: Option<f64>,
    /// Depression of the optical axis below the horizon, degrees [synth.tilt].
    #[arg(long)]
    tilt: Option<f64>,
    /// Azimuth the image top faces, degrees [synth.heading].
    #[arg(long)]
    heading: Option<f64>,
    /// Write the cloud as ASCII PLY.
    #[arg(long)]
    ascii: bool,
}

fn synth_command(settings: &Settings, args: SynthArgs) -> Result<ExitCode> {
    let s = settings;
    let kind = match s.or(args.surface, "synth.surface", SurfaceArg::Plane)? {
        SurfaceArg::Plane => SurfaceKind::Plane(Plane {
            a: s.or(args.plane_a, "synth.plane.a", 0.05)?,
            b: s.or(args.plane_b, "synth.plane.b", -0.03)?,
            c: s.or(args.plane_c, "synth.plane.c", 0.0)?,
        }),
        SurfaceArg::Sinusoid => SurfaceKind::Sinusoid {
            amplitude: s.or(args.amplitude, "synth.sinusoid.amplitude", 0.05)?,
            wavelength: s.or(args.wavelength, "synth.sinusoid.wavelength", 0.8)?,
            base: s.or(args.base, "synth.sinusoid.base", 0.0)?,
        },
    };
    let region = match s.get(args.region, "synth.region")? {
        Some(RegionArg(r)) => r,
        None => Region::new(0.0, 0.0, 2.0, 2.0)?,
    };
    let density = s.or(args.density, "synth.density", 32)?;
    let noise = s.or(args.noise, "synth.noise", 0.0)?;
    let surface = SyntheticSurface::new(kind, region, density)
        .and_then(|sf| sf.with_noise(noise))
        .map_err(|e| usage(format!("synthetic surface: {e}")))?;
    let seed = s.or(args.seed, "synth.seed", 1)?;
    let cameras = s.or(args.cameras, "synth.cameras", 9)?;
    let altitude = s.or(args.altitude, "synth.altitude", 0.5)?;
    let tilt = s.or(args.tilt, "synth.tilt", 83.0)?;
    let heading = s.or(args.heading, "synth.heading", 90.0)?;
    let camera = CameraArgs {
        fx: Some(s.or(args.camera.fx, "camera.fx", 1000.0)?),
        width: Some(s.or(args.camera.width, "image.width", 1280)?),
        height: Some(s.or(args.camera.height, "image.height", 720)?),
        ..args.camera
    };
    let (k, width, height) = intrinsics(s, &camera)?;

    let cloud = sample_cloud(&surface, seed);
    let center_height = kind.height(0.5 * (region.x0 + region.x1), 0.5 * (region.y0 + region.y1));
    let poses = camera_layout(&region, cameras, center_height, altitude, tilt, heading);
    let entries: Vec<PoseLogEntry> = poses
        .iter()
        .enumerate()
        .map(|(i, pose)| PoseLogEntry {
            image_id: format!("synth_{i:03}"),
            pose: *pose,
            timestamp: None,
        })
        .collect();

    let mut oracle = String::from("image_id,top_scale_px_per_m,bottom_scale_px_per_m\n");
    for e in &entries {
        let geom = ImageGeometry::new(e.image_id.clone(), width, height, k, e.pose)?;
        let (top, bottom) = match kind {
            SurfaceKind::Plane(plane) => {
                oracle_scale(&plane, &geom).with_context(|| format!("oracle for {}", e.image_id))?
            }
            SurfaceKind::Sinusoid { .. } => {
                marched_scale(&kind, &geom, 1e-4, 20.0 * altitude.abs().max(1.0))
                    .with_context(|| format!("ray march found no surface for {}", e.image_id))?
            }
        };
        oracle.push_str(&format!("{},{top},{bottom}\n", e.image_id));
    }

    let dir = &args.out_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let encoding = if args.ascii {
        PlyEncoding::Ascii
    } else {
        PlyEncoding::BinaryLittleEndian
    };
    let mut w = create(&dir.join("cloud.ply"))?;
    write_cloud_ply(&mut w, cloud.points(), encoding)?;
    w.flush()?;
    let mut w = create(&dir.join("poses.csv"))?;
    write_pose_log(&mut w, &entries)?;
    w.flush()?;
    fs::write(dir.join("oracle.csv"), oracle)?;
    let conf = format!(
        "# generated by pcscale synth (seed {seed})\ncloud = cloud.ply\nposes = poses.csv\n\
         output = scales.csv\ncamera.fx = {}\ncamera.fy = {}\ncamera.cx = {}\ncamera.cy = {}\n\
         camera.skew = {}\nimage.width = {width}\nimage.height = {height}\n",
        k.fx(),
        k.fy(),
        k.cx(),
        k.cy(),
        k.skew()
    );
    fs::write(dir.join("run.conf"), conf)?;

    let mut out = io::stdout().lock();
    writeln!(out, "points={}", cloud.len())?;
    writeln!(out, "cameras={}", entries.len())?;
    writeln!(out, "config={}", dir.join("run.conf").display())?;
    Ok(ExitCode::SUCCESS)
}
