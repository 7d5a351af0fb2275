//! Command-line front end.
//!
//! Exit status: 0 on success or a feasible verdict, 1 on an infeasible
//! verdict or any validation or I/O failure, 2 on a usage error.

pub mod cache;
pub mod config;
pub mod render;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::decomposition::{
    build_quadtree, catalog_mode, catalog_number, AspectId, AspectMap, Bounds, BuildParams,
    CellLabel, DecompositionError, Space,
};
use crate::geometry::Point2;
use crate::kinematics::Sign;
use crate::moveability::{check_path, moveability, BlockReason, MoveabilityError, Trajectory};
use cache::{cache_key, Cache};
use config::{ConfigError, ErrorCode, ProjectConfig};
use render::{render_svg, RenderStyle};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Config file read when `--config` is not given; absent means reference defaults.
pub const DEFAULT_CONFIG: &str = "mvkit.json";

#[derive(Parser, Debug)]
#[command(name = "mvkit", version, about = "Free-aspect and moveability analysis of a planar five-bar")]
struct Cli {
    /// Project configuration (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SpaceArg {
    W,
    Q,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load and validate a configuration.
    Validate {
        #[arg(value_name = "CFG")]
        path: PathBuf,
    },
    /// Build one sheet's map; writes an SVG and the quadtree JSON beside it.
    Map {
        #[arg(value_enum)]
        space: SpaceArg,
        /// Working mode, 1..4.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        mode: u8,
        /// Sign of det A: + or -.
        #[arg(long, allow_hyphen_values = true, value_parser = parse_sign)]
        sign: Sign,
        /// Minimum cell size; length units in W, degrees in Q.
        #[arg(long)]
        min_cell: Option<f64>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// List the free workspace aspects of every sheet.
    Aspects {
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Check a trajectory document against one sheet.
    CheckPath {
        #[arg(value_name = "FILE")]
        file: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        mode: u8,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_sign)]
        sign: Sign,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// List the sheets and aspects holding both points.
    Moveability {
        #[arg(long, allow_hyphen_values = true, value_parser = parse_point, value_name = "X,Y")]
        from: Point2,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_point, value_name = "X,Y")]
        to: Point2,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

fn parse_sign(s: &str) -> Result<Sign, String> {
    match s {
        "+" | "+1" | "1" => Ok(Sign::Positive),
        "-" | "-1" => Ok(Sign::Negative),
        _ => Err(format!("expected + or -, got `{s}`")),
    }
}

fn parse_point(s: &str) -> Result<Point2, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [x, y] = parts.as_slice() else {
        return Err(format!("expected X,Y, got `{s}`"));
    };
    let x: f64 = x.parse().map_err(|_| format!("bad x in `{s}`"))?;
    let y: f64 = y.parse().map_err(|_| format!("bad y in `{s}`"))?;
    Point2::try_new(x, y).map_err(|e| e.to_string())
}

#[derive(Debug)]
enum CliError {
    Config(ConfigError),
    Io { path: PathBuf, source: std::io::Error },
    Build(DecompositionError),
    Trajectory { path: PathBuf, source: MoveabilityError },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Io { path, source } => {
                write!(f, "error[{}]: {}: {source}", ErrorCode::Io.as_str(), path.display())
            }
            CliError::Build(e) => write!(f, "error[{}]: {e}", ErrorCode::BadDecomposition.as_str()),
            CliError::Trajectory { path, source } => {
                write!(f, "error[{}]: {}: {source}", ErrorCode::Malformed.as_str(), path.display())
            }
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(cli, &mut stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            EXIT_FAILURE
        }
    }
}

fn load_config(explicit: Option<&Path>) -> Result<ProjectConfig, CliError> {
    match explicit {
        Some(path) => ProjectConfig::load(path).map_err(CliError::Config),
        None if Path::new(DEFAULT_CONFIG).exists() => {
            ProjectConfig::load(Path::new(DEFAULT_CONFIG)).map_err(CliError::Config)
        }
        None => Ok(ProjectConfig::reference()),
    }
}

/// One sheet: cache lookup or build.
fn sheet_map(
    cfg: &ProjectConfig,
    cache: &Cache,
    space: Space,
    number: usize,
    sign: Sign,
    min_cell: Option<f64>,
) -> Result<AspectMap, CliError> {
    let mode = catalog_mode(number, sign).expect("mode number validated by the parser");
    let d = &cfg.decomposition;
    let (bounds, params) = match space {
        Space::Workspace => {
            let mc = min_cell.unwrap_or(d.min_cell);
            (
                d.workspace_bounds(&cfg.scene.geometry, mc),
                BuildParams {
                    min_cell: mc,
                    ..d.params()
                },
            )
        }
        Space::JointSpace => (
            Bounds::joint_space(),
            BuildParams {
                min_cell: min_cell.map_or(d.joint_min_cell, f64::to_radians),
                ..d.joint_params()
            },
        ),
    };
    let key = cache_key(&cfg.scene, space, bounds, mode, sign, params);
    let tree = cache
        .get_or_build(&key, || build_quadtree(&cfg.scene, space, bounds, mode, sign, params))
        .map_err(io_err(cache.dir()))?
        .map_err(CliError::Build)?;
    Ok(AspectMap::new(tree))
}

/// All eight workspace sheets in catalog order, `+` first.
fn all_workspace_maps(cfg: &ProjectConfig, cache: &Cache) -> Result<Vec<AspectMap>, CliError> {
    let mut maps = Vec::with_capacity(8);
    for sign in Sign::BOTH {
        for number in 1..=4 {
            maps.push(sheet_map(cfg, cache, Space::Workspace, number, sign, None)?);
        }
    }
    Ok(maps)
}

fn aspect_json(id: AspectId) -> serde_json::Value {
    json!({
        "mode": catalog_number(id.mode, id.det_sign),
        "working_mode": id.mode.to_string(),
        "sign": id.det_sign.to_string(),
        "serial": id.serial,
    })
}

fn aspect_text(id: AspectId) -> String {
    format!(
        "mode {} {} det A {} aspect {}",
        catalog_number(id.mode, id.det_sign),
        id.mode,
        id.det_sign,
        id.serial
    )
}

fn located_json(r: Result<AspectId, CellLabel>) -> serde_json::Value {
    match r {
        Ok(id) => json!({ "aspect": aspect_json(id) }),
        Err(label) => json!({ "label": label.name() }),
    }
}

fn located_text(r: Result<AspectId, CellLabel>) -> String {
    match r {
        Ok(id) => format!("aspect {}", id.serial),
        Err(label) => label.name().to_string(),
    }
}

fn execute(cli: Cli, out: &mut impl Write) -> Result<i32, CliError> {
    let stdout_err = |e| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    };
    match cli.command {
        Command::Validate { path } => {
            let cfg = ProjectConfig::load(&path).map_err(CliError::Config)?;
            let g = &cfg.scene.geometry;
            writeln!(
                out,
                "ok: {} (L0={} L1={} L2={} L3={} L4={}, {} obstacle(s), min_cell {})",
                path.display(),
                g.l0,
                g.l1,
                g.l2,
                g.l3,
                g.l4,
                cfg.scene.obstacles.len(),
                cfg.decomposition.min_cell
            )
            .map_err(stdout_err)?;
            Ok(EXIT_OK)
        }
        Command::Map {
            space,
            mode,
            sign,
            min_cell,
            out: svg_path,
        } => {
            let cfg = load_config(cli.config.as_deref())?;
            let cache = Cache::from_env(&cfg.output);
            let space = match space {
                SpaceArg::W => Space::Workspace,
                SpaceArg::Q => Space::JointSpace,
            };
            let map = sheet_map(&cfg, &cache, space, mode as usize, sign, min_cell)?;
            if let Some(dir) = svg_path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(io_err(dir))?;
            }
            let svg = render_svg(&map, &cfg.scene.geometry, &RenderStyle::default());
            std::fs::write(&svg_path, svg).map_err(io_err(&svg_path))?;
            let json_path = svg_path.with_extension("json");
            std::fs::write(&json_path, map.tree().to_json()).map_err(io_err(&json_path))?;
            writeln!(
                out,
                "wrote {} and {}: {} aspect(s)",
                svg_path.display(),
                json_path.display(),
                map.aspects().len()
            )
            .map_err(stdout_err)?;
            Ok(EXIT_OK)
        }
        Command::Aspects { format } => {
            let cfg = load_config(cli.config.as_deref())?;
            let cache = Cache::from_env(&cfg.output);
            let maps = all_workspace_maps(&cfg, &cache)?;
            match format {
                Format::Json => {
                    let rows: Vec<_> = maps
                        .iter()
                        .map(|m| {
                            let t = m.tree();
                            json!({
                                "mode": catalog_number(t.mode, t.det_sign),
                                "working_mode": t.mode.to_string(),
                                "sign": t.det_sign.to_string(),
                                "count": m.aspects().len(),
                                "areas": m.aspects().iter().map(|a| a.area).collect::<Vec<_>>(),
                            })
                        })
                        .collect();
                    writeln!(out, "{}", serde_json::to_string_pretty(&rows).expect("json")).map_err(stdout_err)?;
                }
                Format::Table => {
                    writeln!(out, "mode  working  sign  count  areas").map_err(stdout_err)?;
                    for m in &maps {
                        let t = m.tree();
                        let areas: Vec<String> = m.aspects().iter().map(|a| format!("{:.3}", a.area)).collect();
                        writeln!(
                            out,
                            "{:<4}  {:<7}  {:<4}  {:<5}  {}",
                            catalog_number(t.mode, t.det_sign),
                            t.mode.to_string(),
                            t.det_sign.to_string(),
                            m.aspects().len(),
                            areas.join(" ")
                        )
                        .map_err(stdout_err)?;
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Command::CheckPath {
            file,
            mode,
            sign,
            format,
        } => {
            let cfg = load_config(cli.config.as_deref())?;
            let text = std::fs::read_to_string(&file).map_err(io_err(&file))?;
            let trajectory = Trajectory::from_json(&text, cfg.decomposition.min_cell / 2.0)
                .map_err(|source| CliError::Trajectory {
                    path: file.clone(),
                    source,
                })?;
            let cache = Cache::from_env(&cfg.output);
            let map = sheet_map(&cfg, &cache, Space::Workspace, mode as usize, sign, None)?;
            let v = check_path(&cfg.scene, &map, &trajectory);
            match format {
                Format::Json => {
                    let blocker = v.first_blocker.map(|b| {
                        let reason = match b.reason {
                            BlockReason::Cell { label } => json!({ "kind": "cell", "label": label.name() }),
                            BlockReason::AspectChange { from, to } => {
                                json!({ "kind": "aspect-change", "from": aspect_json(from), "to": aspect_json(to) })
                            }
                        };
                        json!({ "arc_length": b.arc_length, "position": [b.position.x, b.position.y], "reason": reason })
                    });
                    let doc = json!({
                        "feasible": v.feasible,
                        "mode": mode,
                        "working_mode": v.mode.to_string(),
                        "sign": v.det_sign.to_string(),
                        "aspect": v.aspect.map(aspect_json),
                        "first_blocker": blocker,
                        "start": located_json(v.start),
                        "end": located_json(v.end),
                    });
                    writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("json")).map_err(stdout_err)?;
                }
                Format::Table => {
                    let verdict = if v.feasible { "feasible" } else { "infeasible" };
                    writeln!(out, "verdict: {verdict}").map_err(stdout_err)?;
                    writeln!(out, "sheet: mode {mode} {} det A {}", v.mode, v.det_sign).map_err(stdout_err)?;
                    writeln!(out, "start: {}", located_text(v.start)).map_err(stdout_err)?;
                    writeln!(out, "end: {}", located_text(v.end)).map_err(stdout_err)?;
                    if let Some(id) = v.aspect {
                        writeln!(out, "aspect: {}", aspect_text(id)).map_err(stdout_err)?;
                    }
                    if let Some(b) = v.first_blocker {
                        let reason = match b.reason {
                            BlockReason::Cell { label } => label.name().to_string(),
                            BlockReason::AspectChange { from, to } => {
                                format!("ASPECT_CHANGE {} -> {}", from.serial, to.serial)
                            }
                        };
                        writeln!(
                            out,
                            "blocker: {reason} at s={:.4} ({:.4}, {:.4})",
                            b.arc_length, b.position.x, b.position.y
                        )
                        .map_err(stdout_err)?;
                    }
                }
            }
            Ok(if v.feasible { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Moveability { from, to, format } => {
            let cfg = load_config(cli.config.as_deref())?;
            let cache = Cache::from_env(&cfg.output);
            let maps = all_workspace_maps(&cfg, &cache)?;
            let shared = moveability(&maps, from, to);
            match format {
                Format::Json => {
                    let rows: Vec<_> = shared.iter().map(|&id| aspect_json(id)).collect();
                    writeln!(out, "{}", serde_json::to_string_pretty(&rows).expect("json")).map_err(stdout_err)?;
                }
                Format::Table => {
                    if shared.is_empty() {
                        writeln!(out, "no shared aspect").map_err(stdout_err)?;
                    }
                    for id in &shared {
                        writeln!(out, "{}", aspect_text(*id)).map_err(stdout_err)?;
                    }
                }
            }
            Ok(if shared.is_empty() { EXIT_FAILURE } else { EXIT_OK })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argument_parsers() {
        assert_eq!(parse_sign("+"), Ok(Sign::Positive));
        assert_eq!(parse_sign("-"), Ok(Sign::Negative));
        assert!(parse_sign("x").is_err());
        assert_eq!(parse_point("-3.5, 4"), Ok(Point2::new(-3.5, 4.0)));
        assert!(parse_point("1,2,3").is_err());
        assert!(parse_point("a,2").is_err());
    }

    #[test]
    fn grammar() {
        let cli = Cli::try_parse_from(["mvkit", "map", "w", "--mode", "2", "--sign", "-", "--out", "m.svg"]).unwrap();
        assert!(matches!(cli.command, Command::Map { mode: 2, sign: Sign::Negative, .. }));
        let cli = Cli::try_parse_from(["mvkit", "moveability", "--from", "-4,4", "--to", "4,-4"]).unwrap();
        assert!(matches!(cli.command, Command::Moveability { .. }));
        assert!(Cli::try_parse_from(["mvkit", "map", "w", "--mode", "5", "--sign", "+", "--out", "x"]).is_err());
        assert_eq!(run(["mvkit", "bogus"]), EXIT_USAGE);
        assert_eq!(run(["mvkit", "--help"]), EXIT_OK);
    }
}
