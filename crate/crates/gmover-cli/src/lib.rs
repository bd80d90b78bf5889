//! Command-line wiring for the gmover library: anchor generation,
//! panorama decomposition, transport losses, Gaussian map projection,
//! metrics, and synthetic fixtures.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/format error, 3 solver
//! non-convergence. Results go to stdout or `--out` files; diagnostics to
//! stderr.

pub mod fixtures;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use gmover::decompose::{decompose, IlluminationParams};
use gmover::error::{Error, Result};
use gmover::hdr::{read_pfm, read_rgbe, write_pfm, Panorama};
use gmover::metrics;
use gmover::ot::{
    geometric_cost, sinkhorn_gml, sinkhorn_unbalanced_gml, spherical_cost, SinkhornConfig,
};
use gmover::projection::{
    gaussian_map, progressive_maps, spatially_varying_map, PositionOffset, ProjectionConfig,
};
use gmover::sphere::{generate_anchors, AnchorSet};

#[derive(Parser)]
#[command(
    name = "gmover",
    version,
    about = "Anchor-based illumination decomposition, geometric transport losses, and Gaussian map reconstruction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a spherical Fibonacci anchor lattice as JSON.
    Anchors {
        /// Number of anchor directions.
        #[arg(long)]
        n: usize,
        /// Output JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Decompose an HDR panorama into illumination parameters.
    Decompose {
        /// Input panorama (.pfm or .hdr).
        #[arg(long)]
        pano: PathBuf,
        /// Optional depth raster (.pfm), same dimensions as the panorama.
        #[arg(long)]
        depth: Option<PathBuf>,
        /// Anchor count for the lattice.
        #[arg(long, default_value_t = 128)]
        n: usize,
        /// Fraction of pixels treated as light sources.
        #[arg(long, default_value_t = 0.05)]
        fraction: f64,
        /// Output params JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Geometric mover's loss between two parameter files.
    Gml {
        /// First params JSON (row side of the plan).
        #[arg(long)]
        a: PathBuf,
        /// Second params JSON (column side).
        #[arg(long)]
        b: PathBuf,
        /// Compare depth vectors with the KL-relaxed unbalanced solver
        /// instead of the distributions with the balanced one.
        #[arg(long)]
        unbalanced: bool,
        /// Entropic regularization ε.
        #[arg(long, default_value_t = 1e-4)]
        epsilon: f64,
        /// KL marginal weight ρ (unbalanced mode).
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        /// Use unit-sphere radian costs instead of depth-aware costs.
        #[arg(long)]
        spherical_cost: bool,
        /// Build the cost from one side's depth for both sides.
        #[arg(long, value_parser = ["a", "b"])]
        shared_depth: Option<String>,
    },
    /// Render a Gaussian map from params + anchors.
    Project {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        anchors: PathBuf,
        #[arg(long, default_value_t = 256)]
        width: usize,
        #[arg(long, default_value_t = 128)]
        height: usize,
        /// Lobe angular size; defaults to 0.0025 (or the schedule's last entry).
        #[arg(long)]
        s: Option<f64>,
        /// Comma-separated coarse-to-fine schedule, e.g. 0.04,0.01,0.0025.
        /// Writes one map per level as <out stem>.<level>.pfm plus the
        /// finest to --out itself.
        #[arg(long, value_parser = parse_schedule)]
        schedule: Option<ScheduleArg>,
        /// Output PFM path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the Gaussian map at a displaced insertion position.
    Reproject {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        anchors: PathBuf,
        /// Scene-space offset of the new position, e.g. 0.2,0,-0.1.
        #[arg(long, value_parser = parse_vec3)]
        offset: Vec3Arg,
        #[arg(long, default_value_t = 256)]
        width: usize,
        #[arg(long, default_value_t = 128)]
        height: usize,
        #[arg(long, default_value_t = gmover::projection::DEFAULT_ANGULAR_SIZE)]
        s: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Geometric mover's distance between two panoramas.
    Gmd {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Anchor JSON; defaults to a generated lattice of --n anchors.
        #[arg(long)]
        anchors: Option<PathBuf>,
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[arg(long)]
        depth_a: Option<PathBuf>,
        #[arg(long)]
        depth_b: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-4)]
        epsilon: f64,
    },
    /// Full metric report between a prediction and ground truth.
    Metrics {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Anchor JSON enabling the GMD entry of the report.
        #[arg(long)]
        anchors: Option<PathBuf>,
        #[arg(long)]
        depth_pred: Option<PathBuf>,
        #[arg(long)]
        depth_gt: Option<PathBuf>,
    },
    /// Write deterministic synthetic panoramas (and depth rasters).
    Fixture {
        #[command(subcommand)]
        kind: FixtureKind,
    },
}

#[derive(Clone, Copy, Debug)]
struct Vec3Arg([f64; 3]);

fn parse_vec3(s: &str) -> std::result::Result<Vec3Arg, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got {s:?}"));
    }
    let mut v = [0.0; 3];
    for (k, p) in parts.iter().enumerate() {
        v[k] = p
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("bad component {p:?}: {e}"))?;
    }
    Ok(Vec3Arg(v))
}

#[derive(Clone, Debug)]
struct ScheduleArg(Vec<f64>);

fn parse_schedule(s: &str) -> std::result::Result<ScheduleArg, String> {
    let vals: std::result::Result<Vec<f64>, String> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad entry {p:?}: {e}"))
        })
        .collect();
    let vals = vals?;
    if vals.is_empty() {
        return Err("schedule must contain at least one entry".into());
    }
    Ok(ScheduleArg(vals))
}

#[derive(Args)]
struct FixtureCommon {
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 128)]
    height: usize,
    /// Output panorama PFM path.
    #[arg(long)]
    out: PathBuf,
    /// Also write a depth raster here.
    #[arg(long)]
    depth_out: Option<PathBuf>,
    /// Constant depth value for --depth-out.
    #[arg(long)]
    depth_const: Option<f64>,
    /// Row-linear depth from top to bottom for --depth-out, e.g. 1.5,4.0.
    #[arg(long, value_parser = parse_pair)]
    depth_linear: Option<(f64, f64)>,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected start,end, got {s:?}"));
    }
    let a = parts[0].trim().parse::<f64>().map_err(|e| e.to_string())?;
    let b = parts[1].trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((a, b))
}

#[derive(Subcommand)]
enum FixtureKind {
    /// One bright pixel at the pixel nearest --dir.
    Delta {
        #[arg(long, value_parser = parse_vec3)]
        dir: Vec3Arg,
        #[arg(long)]
        value: f64,
        #[arg(long, default_value_t = 0.0)]
        ambient: f64,
        #[command(flatten)]
        common: FixtureCommon,
    },
    /// Two bright pixels at two directions.
    TwoLights {
        #[arg(long, value_parser = parse_vec3)]
        dir_a: Vec3Arg,
        #[arg(long)]
        value_a: f64,
        #[arg(long, value_parser = parse_vec3)]
        dir_b: Vec3Arg,
        #[arg(long)]
        value_b: f64,
        #[arg(long, default_value_t = 0.0)]
        ambient: f64,
        #[command(flatten)]
        common: FixtureCommon,
    },
    /// Constant map.
    Uniform {
        #[arg(long)]
        value: f64,
        #[command(flatten)]
        common: FixtureCommon,
    },
    /// Row-linear map from --start (top) to --end (bottom).
    Gradient {
        #[arg(long)]
        start: f64,
        #[arg(long)]
        end: f64,
        #[command(flatten)]
        common: FixtureCommon,
    },
}

/// Parses argv and runs one subcommand, mapping errors to exit codes.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version arrive here too; they are not usage errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NotConverged { .. } => 3,
                _ => 2,
            }
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Anchors { n, out } => {
            let anchors = generate_anchors(n)?;
            std::fs::write(&out, anchors_to_json(&anchors))?;
            Ok(0)
        }
        Command::Decompose {
            pano,
            depth,
            n,
            fraction,
            out,
        } => {
            let p = read_panorama(&pano)?;
            let d = depth.map(|path| read_panorama(&path)).transpose()?;
            let anchors = generate_anchors(n)?;
            let result = decompose(&p, d.as_ref(), &anchors, fraction)?;
            if result.uniform_fallback {
                eprintln!(
                    "warning: masked region carries no luminance; distribution set to uniform"
                );
            }
            std::fs::write(&out, result.params.to_json())?;
            Ok(0)
        }
        Command::Gml {
            a,
            b,
            unbalanced,
            epsilon,
            rho,
            spherical_cost: spherical,
            shared_depth,
        } => {
            let pa = read_params(&a)?;
            let pb = read_params(&b)?;
            if pa.n != pb.n {
                return Err(Error::invalid(format!(
                    "params disagree on anchor count: {} vs {}",
                    pa.n, pb.n
                )));
            }
            let anchors = generate_anchors(pa.n)?.with_angles();
            let cost = if spherical {
                spherical_cost(&anchors)
            } else {
                let (du, dv): (&[f64], &[f64]) = match shared_depth.as_deref() {
                    Some("a") => (&pa.depth, &pa.depth),
                    Some("b") => (&pb.depth, &pb.depth),
                    _ => (&pa.depth, &pb.depth),
                };
                geometric_cost(&anchors, du, dv)?
            };
            let cfg = SinkhornConfig {
                epsilon,
                kl_weight: rho,
                ..Default::default()
            };
            let (value, converged, iterations) = if unbalanced {
                let sol = sinkhorn_unbalanced_gml(&pa.depth, &pb.depth, &cost, &cfg)?;
                (sol.value, sol.converged, sol.iterations)
            } else {
                let sol = sinkhorn_gml(&pa.distribution, &pb.distribution, &cost, &cfg)?;
                (sol.value, sol.converged, sol.iterations)
            };
            println!(
                "{}",
                serde_json::json!({
                    "value": value,
                    "converged": converged,
                    "iterations": iterations,
                })
            );
            Ok(if converged { 0 } else { 3 })
        }
        Command::Project {
            params,
            anchors,
            width,
            height,
            s,
            schedule,
            out,
        } => {
            let p = read_params(&params)?;
            let a = read_anchors_json(&anchors)?;
            match schedule {
                None => {
                    let cfg = projection_config(width, height, s, None)?;
                    let map = gaussian_map(&p, &a, &cfg)?;
                    std::fs::write(&out, write_pfm(&map))?;
                }
                Some(sched) => {
                    let cfg = projection_config(width, height, s, Some(sched.0))?;
                    let maps = progressive_maps(&p, &a, &cfg)?;
                    for (level, map) in maps.iter().enumerate() {
                        std::fs::write(level_path(&out, level), write_pfm(map))?;
                    }
                    std::fs::write(&out, write_pfm(maps.last().unwrap()))?;
                }
            }
            Ok(0)
        }
        Command::Reproject {
            params,
            anchors,
            offset,
            width,
            height,
            s,
            out,
        } => {
            let p = read_params(&params)?;
            let a = read_anchors_json(&anchors)?;
            let cfg = projection_config(width, height, Some(s), None)?;
            let off = PositionOffset::new(offset.0)?;
            let map = spatially_varying_map(&p, &a, &off, &cfg)?;
            std::fs::write(&out, write_pfm(&map))?;
            Ok(0)
        }
        Command::Gmd {
            a,
            b,
            anchors,
            n,
            depth_a,
            depth_b,
            epsilon,
        } => {
            let pa = read_panorama(&a)?;
            let pb = read_panorama(&b)?;
            let set = match anchors {
                Some(path) => read_anchors_json(&path)?,
                None => generate_anchors(n)?,
            }
            .with_angles();
            let da = depth_a.map(|p| read_panorama(&p)).transpose()?;
            let db = depth_b.map(|p| read_panorama(&p)).transpose()?;
            let cfg = SinkhornConfig {
                epsilon,
                ..Default::default()
            };
            let value = metrics::gmd(&pa, &pb, &set, da.as_ref(), db.as_ref(), &cfg)?;
            println!("{}", serde_json::json!({ "gmd": value }));
            Ok(0)
        }
        Command::Metrics {
            pred,
            gt,
            anchors,
            depth_pred,
            depth_gt,
        } => {
            let p = read_panorama(&pred)?;
            let g = read_panorama(&gt)?;
            let set = anchors
                .map(|path| read_anchors_json(&path).map(AnchorSet::with_angles))
                .transpose()?;
            let dp = depth_pred.map(|p| read_panorama(&p)).transpose()?;
            let dg = depth_gt.map(|p| read_panorama(&p)).transpose()?;
            let report = metrics::report(
                &p,
                &g,
                set.as_ref(),
                dp.as_ref(),
                dg.as_ref(),
                &SinkhornConfig::default(),
            )?;
            println!("{}", report_to_json(&report));
            Ok(0)
        }
        Command::Fixture { kind } => run_fixture(kind),
    }
}

fn run_fixture(kind: FixtureKind) -> Result<i32> {
    let (map, common) = match kind {
        FixtureKind::Delta {
            dir,
            value,
            ambient,
            common,
        } => (
            fixtures::delta(common.width, common.height, dir.0, value, ambient)?,
            common,
        ),
        FixtureKind::TwoLights {
            dir_a,
            value_a,
            dir_b,
            value_b,
            ambient,
            common,
        } => (
            fixtures::two_lights(
                common.width,
                common.height,
                dir_a.0,
                value_a,
                dir_b.0,
                value_b,
                ambient,
            )?,
            common,
        ),
        FixtureKind::Uniform { value, common } => (
            fixtures::uniform(common.width, common.height, value)?,
            common,
        ),
        FixtureKind::Gradient { start, end, common } => (
            fixtures::gradient(common.width, common.height, start, end)?,
            common,
        ),
    };
    std::fs::write(&common.out, write_pfm(&map))?;
    if let Some(depth_path) = &common.depth_out {
        let depth = match (common.depth_const, common.depth_linear) {
            (Some(v), None) => fixtures::uniform(common.width, common.height, v)?,
            (None, Some((a, b))) => fixtures::gradient(common.width, common.height, a, b)?,
            (None, None) => fixtures::uniform(common.width, common.height, 1.0)?,
            (Some(_), Some(_)) => {
                return Err(Error::invalid(
                    "--depth-const and --depth-linear are mutually exclusive",
                ))
            }
        };
        std::fs::write(depth_path, write_pfm(&depth))?;
    }
    Ok(0)
}

fn projection_config(
    width: usize,
    height: usize,
    s: Option<f64>,
    schedule: Option<Vec<f64>>,
) -> Result<ProjectionConfig> {
    let cfg = match schedule {
        Some(sched) => {
            let last = *sched.last().unwrap();
            if let Some(explicit) = s {
                if explicit != last {
                    return Err(Error::invalid(format!(
                        "--s {explicit} disagrees with the schedule's finest level {last}"
                    )));
                }
            }
            ProjectionConfig {
                width,
                height,
                angular_size: last,
                s_schedule: sched,
            }
        }
        None => {
            let size = s.unwrap_or(gmover::projection::DEFAULT_ANGULAR_SIZE);
            ProjectionConfig {
                width,
                height,
                angular_size: size,
                s_schedule: vec![size],
            }
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

fn level_path(out: &Path, level: usize) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("map");
    let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("pfm");
    out.with_file_name(format!("{stem}.{level}.{ext}"))
}

/// Reads a panorama, dispatching on the file extension.
pub fn read_panorama(path: &Path) -> Result<Panorama> {
    let bytes = std::fs::read(path)?;
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("pfm") => read_pfm(&bytes),
        Some("hdr") | Some("pic") => read_rgbe(&bytes),
        other => Err(Error::invalid(format!(
            "unsupported panorama extension {other:?} for {}; use .pfm or .hdr",
            path.display()
        ))),
    }
}

fn read_params(path: &Path) -> Result<IlluminationParams> {
    IlluminationParams::from_json(&std::fs::read(path)?)
}

#[derive(Deserialize)]
struct AnchorsFile {
    n: usize,
    directions: Vec<[f64; 3]>,
}

/// Parses the anchors JSON written by the `anchors` subcommand.
pub fn read_anchors_json(path: &Path) -> Result<AnchorSet> {
    let bytes = std::fs::read(path)?;
    let file: AnchorsFile = serde_json::from_slice(&bytes)
        .map_err(|e| Error::invalid(format!("anchors JSON: {e}")))?;
    if file.directions.len() != file.n {
        return Err(Error::invalid(format!(
            "anchors JSON claims n={} but lists {} directions",
            file.n,
            file.directions.len()
        )));
    }
    AnchorSet::new(file.directions)
}

/// Serializes an anchor set with 17 significant digits per coordinate.
pub fn anchors_to_json(anchors: &AnchorSet) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{{\n  \"n\": {},\n  \"directions\": [\n",
        anchors.len()
    ));
    for (k, d) in anchors.directions().iter().enumerate() {
        out.push_str(&format!(
            "    [{:.16e}, {:.16e}, {:.16e}]{}\n",
            d[0],
            d[1],
            d[2],
            if k + 1 < anchors.len() { "," } else { "" }
        ));
    }
    out.push_str("  ]\n}\n");
    out
}

/// Metric report as JSON with 6 significant digits per value.
pub fn report_to_json(r: &metrics::MetricReport) -> String {
    let mut fields = vec![
        format!("\"rmse\": {:.5e}", r.rmse),
        format!("\"si_rmse\": {:.5e}", r.si_rmse),
        format!("\"angular_error_degrees\": {:.5e}", r.angular_error_degrees),
        format!("\"cosine_distance\": {:.5e}", r.cosine_distance),
    ];
    if let Some(g) = r.gmd {
        fields.push(format!("\"gmd\": {:.5e}", g));
    }
    format!("{{{}}}", fields.join(", "))
}
