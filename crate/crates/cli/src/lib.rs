//! Batch command-line surface over the lighting toolkit: extract, project,
//! relocate, warp, refine, fit, render, evaluate and crop.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. Every output file is
//! written to a temporary sibling first and renamed only after the whole
//! command has succeeded, so a failing run leaves no partial artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use lumiparam::io::{self, HdrFormat};
use lumiparam::optimize::{FitOptions, LossConfig};
use lumiparam::render_eval::{self, ProbeImage};
use lumiparam::spatial::Translation;
use lumiparam::{extract, optimize, project, spatial};

/// Environment variable that caps internal data parallelism.
pub const THREADS_ENV_VAR: &str = "LUMIPARAM_THREADS";

/// Outcome of one invocation.
#[derive(Debug)]
pub struct CommandResult {
    /// 0 success, 1 usage error, 2 data error.
    pub exit_code: i32,
    /// Files written, in the order they were committed.
    pub artifacts: Vec<PathBuf>,
}

impl CommandResult {
    fn success(artifacts: Vec<PathBuf>) -> Self {
        CommandResult { exit_code: 0, artifacts }
    }

    fn usage() -> Self {
        CommandResult { exit_code: 1, artifacts: Vec::new() }
    }

    fn data_error() -> Self {
        CommandResult { exit_code: 2, artifacts: Vec::new() }
    }
}

#[derive(Parser)]
#[command(
    name = "lumiparam",
    about = "Parametric 3D lights from HDR panoramas: extraction, projection, fitting, evaluation",
    version,
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect light sources in a panorama and write a light-set document.
    Extract {
        /// Input HDR panorama (.hdr or color .pfm, 2:1 aspect).
        pano: PathBuf,
        /// Companion depth map (single-channel .pfm, meters, 0 = unknown).
        #[arg(long)]
        depth: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Render a light set to an environment map.
    Project {
        lights: PathBuf,
        /// Output size as WxH (width must be twice the height).
        #[arg(long, value_parser = parse_size)]
        size: (usize, usize),
        /// Add the ambient term to every pixel.
        #[arg(long)]
        ambient: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Re-express a light set for an observer displaced by --t.
    Relocate {
        lights: PathBuf,
        /// Displacement in meters, e.g. "-1,0,0" for 1 m to the left.
        #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
        t: (f64, f64, f64),
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Depth-warp a panorama to an observer displaced by --t.
    Warp {
        pano: PathBuf,
        #[arg(long)]
        depth: PathBuf,
        #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
        t: (f64, f64, f64),
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Refine light intensities against a panorama with a rendering-based
    /// non-negative least-squares fit.
    Refine {
        lights: PathBuf,
        pano: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Fit a fixed number of lights to a panorama by gradient descent.
    Fit {
        pano: PathBuf,
        /// Number of lights.
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value_t = 0.001)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
        /// Write the per-iteration loss trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Render a diffuse probe sphere under a light set or environment map.
    Render {
        /// Light-set document, or an .hdr/.pfm environment map.
        input: PathBuf,
        /// Probe resolution in pixels.
        #[arg(long, default_value_t = 64)]
        res: usize,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write a tonemapped PNG preview.
        #[arg(long)]
        png: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        exposure: f64,
    },
    /// Score a predicted light set against a ground-truth panorama at
    /// several insertion offsets; writes a CSV report.
    Evaluate {
        lights: PathBuf,
        pano: PathBuf,
        #[arg(long)]
        depth: PathBuf,
        /// Semicolon-separated offsets, e.g. "0,0,0;-1,0,0;1,0,0".
        /// Defaults to the center and 1 m to either side.
        #[arg(long, value_parser = parse_offsets, allow_hyphen_values = true)]
        offsets: Option<Vec<Translation>>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Extract a rectilinear crop from a panorama.
    Crop {
        pano: PathBuf,
        /// View azimuth, degrees (0 = forward, +Z).
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        az: f64,
        /// View elevation, degrees.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        el: f64,
        /// Horizontal field of view, degrees.
        #[arg(long, default_value_t = 90.0)]
        fov: f64,
        #[arg(long, value_parser = parse_crop_size)]
        size: (usize, usize),
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = parse_crop_size(s)?;
    if w != 2 * h {
        return Err(format!("environment maps are 2:1; {w}x{h} is not"));
    }
    Ok((w, h))
}

fn parse_crop_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    if w == 0 || h == 0 {
        return Err("size must be positive".into());
    }
    Ok((w, h))
}

fn parse_triple(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got {s:?}"));
    }
    let mut v = [0.0f64; 3];
    for (slot, part) in v.iter_mut().zip(&parts) {
        *slot = part.trim().parse().map_err(|_| format!("bad number {part:?}"))?;
    }
    Ok((v[0], v[1], v[2]))
}

fn parse_offsets(s: &str) -> Result<Vec<Translation>, String> {
    let offsets: Vec<Translation> = s
        .split(';')
        .filter(|part| !part.trim().is_empty())
        .map(|part| parse_triple(part).map(|(x, y, z)| Translation::new(x, y, z)))
        .collect::<Result<_, _>>()?;
    if offsets.is_empty() {
        return Err("at least one offset is required".into());
    }
    Ok(offsets)
}

struct DataError(String);

type CmdResult<T> = Result<T, DataError>;

fn ctx<T>(path: &Path, r: lumiparam::Result<T>) -> CmdResult<T> {
    r.map_err(|e| DataError(format!("{}: {e}", path.display())))
}

/// Pending output files; everything is renamed into place only when the
/// whole command has succeeded.
#[derive(Default)]
struct StagedOutputs {
    staged: Vec<(tempfile::NamedTempFile, PathBuf)>,
}

impl StagedOutputs {
    fn stage(&mut self, target: &Path) -> CmdResult<PathBuf> {
        let dir = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let tmp = tempfile::Builder::new()
            .prefix(".lumiparam.")
            .tempfile_in(dir)
            .map_err(|e| DataError(format!("{}: cannot stage output: {e}", target.display())))?;
        let path = tmp.path().to_path_buf();
        self.staged.push((tmp, target.to_path_buf()));
        Ok(path)
    }

    fn commit(self) -> CmdResult<Vec<PathBuf>> {
        let mut written = Vec::new();
        for (tmp, target) in self.staged {
            tmp.persist(&target)
                .map_err(|e| DataError(format!("{}: cannot write: {e}", target.display())))?;
            written.push(target);
        }
        Ok(written)
    }
}

fn configure_threads() {
    if let Ok(value) = std::env::var(THREADS_ENV_VAR) {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                // Ignore the error if a global pool already exists.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
            }
        }
    }
}

/// Parse and execute one invocation. `argv` includes the program name.
pub fn run<I, S>(argv: I) -> CommandResult
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    configure_threads();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = err.print();
                return CommandResult::success(Vec::new());
            }
            eprint!("{err}");
            return CommandResult::usage();
        }
    };
    match dispatch(cli.command) {
        Ok(artifacts) => CommandResult::success(artifacts),
        Err(DataError(msg)) => {
            eprintln!("error: {msg}");
            CommandResult::data_error()
        }
    }
}

fn dispatch(command: Command) -> CmdResult<Vec<PathBuf>> {
    match command {
        Command::Extract { pano, depth, output } => {
            let map = ctx(&pano, io::load_envmap(&pano))?;
            let depth_map = match &depth {
                Some(path) => Some(ctx(path, io::load_depthmap(path))?),
                None => None,
            };
            let set = extract::extract_lightset(&map, depth_map.as_ref());
            let mut staged = StagedOutputs::default();
            let tmp = staged.stage(&output)?;
            ctx(&output, io::save_lightset(&set, &tmp))?;
            staged.commit()
        }
        Command::Project { lights, size, ambient, output } => {
            let set = ctx(&lights, io::load_lightset(&lights))?;
            let map = project::project_lightset(&set, size.0, size.1, ambient);
            let mut staged = StagedOutputs::default();
            let tmp = staged.stage(&output)?;
            ctx(&output, io::save_envmap(&map, &tmp, hdr_format_for(&output)))?;
            staged.commit()
        }
        Command::Relocate { lights, t, output } => {
            let set = ctx(&lights, io::load_lightset(&lights))?;
            let moved = ctx(
                &lights,
                spatial::relocate_lightset(&set, Translation::new(t.0, t.1, t.2)),
            )?;
            let mut staged = StagedOutputs::default();
            let tmp = staged.stage(&output)?;
            ctx(&output, io::save_lightset(&moved, &tmp))?;
            staged.commit()
        }
        Command::Warp { pano, depth, t, output } => {
            let map = ctx(&pano, io::load_envmap(&pano))?;
            let depth_map = ctx(&depth, io::load_depthmap(&depth))?;
            let warped = ctx(
                &pano,
                spatial::warp_envmap(&map, &depth_map, Translation::new(t.0, t.1, t.2)),
            )?;
            let mut staged = StagedOutputs::default();
            let tmp = staged.stage(&output)?;
            ctx(&output, io::save_envmap(&warped, &tmp, hdr_format_for(&output)))?;
            staged.commit()
        }
        Command::Refine { lights, pano, output } => {
            let set = ctx(&lights, io::load_lightset(&lights))?;
            let map = ctx(&pano, io::load_envmap(&pano))?;
            let masks = extract::detect_lights(&map);
            if masks.len() != set.len() {
                return Err(DataError(format!(
                    "{}: detected {} sources but {} holds {} lights; refine needs matching \
                     extraction output",
                    pano.display(),
                    masks.len(),
                    lights.display(),
                    set.len()
                )));
            }
            let refined = ctx(&pano, optimize::refine_intensities(&set, &map, &masks))?;
            let mut staged = StagedOutputs::default();
            let tmp = staged.stage(&output)?;
            ctx(&output, io::save_lightset(&refined, &tmp))?;
            staged.commit()
        }
        Command::Fit { pano, n, iters, lr, seed, output, trace } => {
            let map = ctx(&pano, io::load_envmap(&pano))?;
            let cfg = LossConfig::default();
            let opts = FitOptions {
                iterations: iters,
                learning_rate: lr,
                seed,
                ..FitOptions::default()
            };
            let (set, loss_trace) = ctx(&pano, optimize::fit_lightset(&map, n, &cfg, &opts))?;
            let mut staged = StagedOutputs::default();
            let tmp = staged.stage(&output)?;
            ctx(&output, io::save_lightset(&set, &tmp))?;
            if let Some(trace_path) = &trace {
                let mut csv = String::from("iteration,loss\n");
                for (i, loss) in loss_trace.iter().enumerate() {
                    let _ = writeln!(csv, "{i},{loss}");
                }
                let tmp = staged.stage(trace_path)?;
                fs::write(&tmp, csv)
                    .map_err(|e| DataError(format!("{}: {e}", trace_path.display())))?;
            }
            staged.commit()
        }
        Command::Render { input, res, output, png, exposure } => {
            if res < 16 {
                return Err(DataError(format!("probe resolution {res} must be at least 16")));
            }
            let probe = if is_image_path(&input) {
                let map = ctx(&input, io::load_envmap(&input))?;
                render_eval::render_sphere_from_map(&map, res)
            } else {
                let set = ctx(&input, io::load_lightset(&input))?;
                render_eval::render_sphere_from_lights(&set, res)
            };
            let mut staged = StagedOutputs::default();
            let tmp = staged.stage(&output)?;
            write_probe(&probe, &tmp, hdr_format_for(&output))
                .map_err(|e| DataError(format!("{}: {e}", output.display())))?;
            if let Some(png_path) = &png {
                let tmp = staged.stage(png_path)?;
                ctx(
                    png_path,
                    io::save_preview_rgb(
                        probe.resolution(),
                        probe.resolution(),
                        probe.data(),
                        &tmp,
                        exposure,
                    ),
                )?;
            }
            staged.commit()
        }
        Command::Evaluate { lights, pano, depth, offsets, output } => {
            let set = ctx(&lights, io::load_lightset(&lights))?;
            let map = ctx(&pano, io::load_envmap(&pano))?;
            let depth_map = ctx(&depth, io::load_depthmap(&depth))?;
            let offsets = offsets.unwrap_or_else(render_eval::default_offsets);
            let report = ctx(
                &pano,
                render_eval::evaluate_at_positions(&set, &map, &depth_map, &offsets),
            )?;
            let mut csv = String::from("offset_x,offset_y,offset_z,rmse,si_rmse\n");
            for entry in &report.entries {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    entry.offset.x, entry.offset.y, entry.offset.z, entry.rmse, entry.si_rmse
                );
            }
            let mut staged = StagedOutputs::default();
            let tmp = staged.stage(&output)?;
            fs::write(&tmp, csv).map_err(|e| DataError(format!("{}: {e}", output.display())))?;
            staged.commit()
        }
        Command::Crop { pano, az, el, fov, size, output } => {
            if !(fov > 0.0 && fov < 180.0) {
                return Err(DataError(format!("fov {fov} must lie in (0, 180)")));
            }
            let map = ctx(&pano, io::load_envmap(&pano))?;
            let crop = spatial::crop_view(&map, az, el, fov, size.0, size.1);
            let mut staged = StagedOutputs::default();
            let tmp = staged.stage(&output)?;
            write_image(crop.width(), crop.height(), crop.data(), &tmp, hdr_format_for(&output))
                .map_err(|e| DataError(format!("{}: {e}", output.display())))?;
            staged.commit()
        }
    }
}

fn is_image_path(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
        Some("hdr") | Some("pfm") | Some("pic")
    )
}

fn hdr_format_for(path: &Path) -> HdrFormat {
    match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref() {
        Some("pfm") => HdrFormat::Pfm,
        _ => HdrFormat::Rgbe,
    }
}

fn write_probe(probe: &ProbeImage, path: &Path, format: HdrFormat) -> lumiparam::Result<()> {
    write_image(probe.resolution(), probe.resolution(), probe.data(), path, format)
}

fn write_image(
    width: usize,
    height: usize,
    pixels: &[lumiparam::Rgb],
    path: &Path,
    format: HdrFormat,
) -> lumiparam::Result<()> {
    let file = fs::File::create(path)?;
    let mut writer = std::io::BufWriter::new(file);
    io::write_hdr_image(&mut writer, width, height, pixels, format)
}
