//! `pcscale`: image scale from camera poses and a point cloud, plus the
//! size-distribution statistics used to check the results.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use settings::Usage;

#[derive(Debug, Parser)]
#[command(name = "pcscale", version, about)]
struct Cli {
    /// Flat key=value config file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct MeshArgs {
    /// Point cloud (PLY).
    #[arg(long)]
    cloud: Option<PathBuf>,
    /// xy distance below which points are merged [mesh.dedup_tolerance].
    #[arg(long)]
    dedup_tolerance: Option<f64>,
    /// Spatial index cells along the longer extent [mesh.grid_resolution].
    #[arg(long)]
    grid_resolution: Option<usize>,
}

#[derive(Debug, Args)]
struct CameraArgs {
    /// Focal length along x in pixels [camera.fx].
    #[arg(long)]
    fx: Option<f64>,
    /// Focal length along y; defaults to fx [camera.fy].
    #[arg(long)]
    fy: Option<f64>,
    /// Principal point x; defaults to width/2 [camera.cx].
    #[arg(long)]
    cx: Option<f64>,
    /// Principal point y; defaults to height/2 [camera.cy].
    #[arg(long)]
    cy: Option<f64>,
    /// Axis skew [camera.skew].
    #[arg(long)]
    skew: Option<f64>,
    /// Image width in pixels [image.width].
    #[arg(long)]
    width: Option<u32>,
    /// Image height in pixels [image.height].
    #[arg(long)]
    height: Option<u32>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Triangulate a point cloud and report mesh statistics.
    Mesh {
        #[command(flatten)]
        mesh: MeshArgs,
        /// Write the mesh as PLY.
        #[arg(long, value_name = "FILE")]
        dump: Option<PathBuf>,
        /// Write the dump as ASCII instead of binary.
        #[arg(long)]
        ascii: bool,
    },
    /// Per-image edge scales by casting corner rays onto the meshed cloud.
    Scale {
        #[command(flatten)]
        mesh: MeshArgs,
        #[command(flatten)]
        camera: CameraArgs,
        /// Pose log CSV [poses].
        #[arg(long)]
        poses: Option<PathBuf>,
        /// Scale report CSV; stdout when absent [output].
        #[arg(long)]
        output: Option<PathBuf>,
        /// Test every triangle instead of using the spatial index.
        #[arg(long)]
        linear: bool,
    },
    /// Per-image edge scales assuming flat ground at z = 0.
    GroundplaneScale {
        #[command(flatten)]
        camera: CameraArgs,
        #[arg(long)]
        poses: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit a Swebrec curve to a sieve series and print residuals.
    Fit {
        /// CSV with columns size_mm,percent_passing [sieve].
        #[arg(long)]
        sieve: Option<PathBuf>,
        /// Iteration budget per start [fit.max_iterations].
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// One-way ANOVA over grouped observations; exits 3 when the null
    /// hypothesis is rejected.
    Anova {
        /// CSV with columns group_id,value [groups].
        #[arg(long)]
        groups: Option<PathBuf>,
        /// Significance level [anova.alpha].
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Generate a synthetic cloud, poses and oracle scales.
    Synth(commands::SynthArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => code,
        Err(err) => {
            let usage = err.chain().any(|e| e.is::<Usage>());
            let kind = if usage { "usage" } else { "data" };
            eprintln!("error[{kind}]: {err}");
            for cause in err.chain().skip(1) {
                eprintln!("  caused by: {cause}");
            }
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
