//! Project configuration document.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::decomposition::{Bounds, BuildParams, Scene};
use crate::geometry::{ObstaclePolygon, Point2};
use crate::kinematics::{KinematicsError, MechanismGeometry};

/// Stable diagnostic codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCode {
    FileMissing,
    Malformed,
    BadLength,
    BadRadius,
    GeometryInconsistent,
    BadObstacle,
    BadDecomposition,
    Io,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::FileMissing => "FILE-MISSING",
            ErrorCode::Malformed => "MALFORMED",
            ErrorCode::BadLength => "BAD-LENGTH",
            ErrorCode::BadRadius => "BAD-RADIUS",
            ErrorCode::GeometryInconsistent => "GEOMETRY-INCONSISTENT",
            ErrorCode::BadObstacle => "BAD-OBSTACLE",
            ErrorCode::BadDecomposition => "BAD-DECOMPOSITION",
            ErrorCode::Io => "IO",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub code: ErrorCode,
    pub message: String,
}

impl ConfigError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.code.as_str(), self.message)
    }
}

impl std::error::Error for ConfigError {}

fn default_radius() -> f64 {
    MechanismGeometry::DEFAULT_RADIUS
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryDocument {
    l0: f64,
    l1: f64,
    l2: f64,
    l3: f64,
    l4: f64,
    #[serde(default)]
    a1: Option<Point2>,
    #[serde(default)]
    a2: Option<Point2>,
    #[serde(default = "default_radius")]
    link_radius: f64,
    #[serde(default = "default_radius")]
    base_radius: f64,
    #[serde(default = "default_radius")]
    platform_radius: f64,
}

impl Default for GeometryDocument {
    fn default() -> Self {
        let g = MechanismGeometry::reference();
        Self {
            l0: g.l0,
            l1: g.l1,
            l2: g.l2,
            l3: g.l3,
            l4: g.l4,
            a1: None,
            a2: None,
            link_radius: g.link_radius,
            base_radius: g.base_radius,
            platform_radius: g.platform_radius,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObstacleDocument {
    id: String,
    vertices: Vec<Point2>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecompositionDocument {
    /// Workspace cell size in length units.
    min_cell: Option<f64>,
    /// Joint-space cell size in degrees.
    joint_min_cell_deg: Option<f64>,
    samples_per_cell: Option<usize>,
    bounds: Option<Bounds>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDocument {
    #[serde(default)]
    geometry: GeometryDocument,
    #[serde(default)]
    obstacles: Vec<ObstacleDocument>,
    #[serde(default)]
    decomposition: DecompositionDocument,
    output: Option<PathBuf>,
}

/// Decomposition settings with defaults applied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecompositionSettings {
    pub min_cell: f64,
    /// Radians.
    pub joint_min_cell: f64,
    pub samples_per_cell: usize,
    /// Workspace square from the document, if given.
    pub bounds_override: Option<Bounds>,
}

impl DecompositionSettings {
    /// Workspace cell size: a 512-cell tiling of the default square.
    pub const DEFAULT_MIN_CELL: f64 = 13.0 / 256.0;
    pub const DEFAULT_JOINT_MIN_CELL_DEG: f64 = 360.0 / 512.0;

    pub fn params(&self) -> BuildParams {
        BuildParams {
            min_cell: self.min_cell,
            samples_per_cell: self.samples_per_cell,
        }
    }

    /// Workspace square for cell size `min_cell`.
    pub fn workspace_bounds(&self, geometry: &MechanismGeometry, min_cell: f64) -> Bounds {
        self.bounds_override
            .unwrap_or_else(|| Bounds::default_workspace(geometry, min_cell))
    }

    pub fn joint_params(&self) -> BuildParams {
        BuildParams {
            min_cell: self.joint_min_cell,
            samples_per_cell: self.samples_per_cell,
        }
    }
}

/// Validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectConfig {
    pub scene: Scene,
    pub decomposition: DecompositionSettings,
    pub output: PathBuf,
}

impl ProjectConfig {
    pub const DEFAULT_OUTPUT: &'static str = "mvkit-out";

    /// Reference five-bar, no obstacles, default decomposition.
    pub fn reference() -> Self {
        Self::from_document(ConfigDocument::default(), Path::new("."))
            .expect("reference configuration is valid")
    }

    pub fn with_output(mut self, output: impl Into<PathBuf>) -> Self {
        self.output = output.into();
        self
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            let code = if e.kind() == std::io::ErrorKind::NotFound {
                ErrorCode::FileMissing
            } else {
                ErrorCode::Io
            };
            ConfigError::new(code, format!("{}: {e}", path.display()))
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| ConfigError {
            message: format!("{}: {}", path.display(), e.message),
            ..e
        })
    }

    /// Parses a document; relative output paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let doc: ConfigDocument =
            serde_json::from_str(text).map_err(|e| ConfigError::new(ErrorCode::Malformed, e.to_string()))?;
        Self::from_document(doc, base)
    }

    fn from_document(doc: ConfigDocument, base: &Path) -> Result<Self, ConfigError> {
        let gd = doc.geometry;
        let geometry = MechanismGeometry {
            l0: gd.l0,
            l1: gd.l1,
            l2: gd.l2,
            l3: gd.l3,
            l4: gd.l4,
            a1: gd.a1.unwrap_or(Point2::ORIGIN),
            a2: match gd.a2 {
                Some(p) => p,
                None => {
                    let a1 = gd.a1.unwrap_or(Point2::ORIGIN);
                    Point2::try_new(a1.x + gd.l0, a1.y).map_err(|_| {
                        ConfigError::new(ErrorCode::BadLength, format!("geometry.l0 must be finite, got {}", gd.l0))
                    })?
                }
            },
            link_radius: gd.link_radius,
            base_radius: gd.base_radius,
            platform_radius: gd.platform_radius,
        };
        geometry.validate().map_err(|e| {
            let code = match e {
                KinematicsError::BadLength { .. } => ErrorCode::BadLength,
                KinematicsError::BadRadius { .. } => ErrorCode::BadRadius,
                _ => ErrorCode::GeometryInconsistent,
            };
            ConfigError::new(code, format!("geometry: {e}"))
        })?;

        let mut obstacles = Vec::with_capacity(doc.obstacles.len());
        for (i, o) in doc.obstacles.into_iter().enumerate() {
            if obstacles.iter().any(|p: &ObstaclePolygon| p.id == o.id) {
                return Err(ConfigError::new(
                    ErrorCode::BadObstacle,
                    format!("obstacles[{i}]: duplicate id `{}`", o.id),
                ));
            }
            let polygon = ObstaclePolygon::new(o.id, o.vertices)
                .map_err(|e| ConfigError::new(ErrorCode::BadObstacle, format!("obstacles[{i}]: {e}")))?;
            obstacles.push(polygon);
        }

        let dd = doc.decomposition;
        let bad = |msg: String| ConfigError::new(ErrorCode::BadDecomposition, msg);
        let min_cell = dd.min_cell.unwrap_or(DecompositionSettings::DEFAULT_MIN_CELL);
        if !(min_cell.is_finite() && min_cell > 0.0) {
            return Err(bad(format!("decomposition.min_cell must be finite and > 0, got {min_cell}")));
        }
        let joint_deg = dd
            .joint_min_cell_deg
            .unwrap_or(DecompositionSettings::DEFAULT_JOINT_MIN_CELL_DEG);
        let joint_min_cell = joint_deg.to_radians();
        Bounds::joint_space()
            .depth_for(joint_min_cell)
            .map_err(|e| bad(format!("decomposition.joint_min_cell_deg: {e}")))?;
        let samples_per_cell = dd.samples_per_cell.unwrap_or(BuildParams::DEFAULT_SAMPLES);
        if samples_per_cell < 5 {
            return Err(bad(format!(
                "decomposition.samples_per_cell must be >= 5, got {samples_per_cell}"
            )));
        }
        let bounds = dd.bounds.unwrap_or_else(|| Bounds::default_workspace(&geometry, min_cell));
        bounds
            .depth_for(min_cell)
            .map_err(|e| bad(format!("decomposition.bounds: {e}")))?;

        let output = doc.output.unwrap_or_else(|| PathBuf::from(Self::DEFAULT_OUTPUT));
        let output = if output.is_absolute() {
            output
        } else {
            base.join(output)
        };
        Ok(Self {
            scene: Scene::new(geometry, obstacles),
            decomposition: DecompositionSettings {
                min_cell,
                joint_min_cell,
                samples_per_cell,
                bounds_override: dd.bounds,
            },
            output,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ProjectConfig, ConfigError> {
        ProjectConfig::parse(text, Path::new("/tmp"))
    }

    fn code(text: &str) -> ErrorCode {
        parse(text).unwrap_err().code
    }

    #[test]
    fn reference_document_loads() {
        let cfg = parse(r#"{"geometry": {"l0": 8, "l1": 7, "l2": 7, "l3": 5, "l4": 5}}"#).unwrap();
        assert_eq!(cfg.scene.geometry, MechanismGeometry::reference());
        assert_eq!(cfg, ProjectConfig::reference().with_output("/tmp/mvkit-out"));
        let b = cfg.decomposition.workspace_bounds(&cfg.scene.geometry, cfg.decomposition.min_cell);
        assert_eq!(b.side, 26.0);
    }

    #[test]
    fn diagnostics_are_coded() {
        assert_eq!(code("{"), ErrorCode::Malformed);
        assert_eq!(code(r#"{"colour": 1}"#), ErrorCode::Malformed);
        assert_eq!(
            code(r#"{"geometry": {"l0": 8, "l1": -7, "l2": 7, "l3": 5, "l4": 5}}"#),
            ErrorCode::BadLength
        );
        assert_eq!(
            code(r#"{"geometry": {"l0": 8, "l1": 7, "l2": 7, "l3": 5, "l4": 5, "a2": [9, 0]}}"#),
            ErrorCode::GeometryInconsistent
        );
        assert_eq!(
            code(r#"{"geometry": {"l0": 8, "l1": 7, "l2": 7, "l3": 5, "l4": 5, "link_radius": -1}}"#),
            ErrorCode::BadRadius
        );
        assert_eq!(
            code(r#"{"obstacles": [{"id": "bow", "vertices": [[0,0],[2,2],[2,0],[0,1]]}]}"#),
            ErrorCode::BadObstacle
        );
        assert_eq!(
            code(r#"{"decomposition": {"min_cell": 0.3, "bounds": {"min": [-13, -13], "side": 26}}}"#),
            ErrorCode::BadDecomposition
        );
        assert_eq!(code(r#"{"decomposition": {"min_cell": -1}}"#), ErrorCode::BadDecomposition);
        assert_eq!(code(r#"{"decomposition": {"samples_per_cell": 2}}"#), ErrorCode::BadDecomposition);
        let e = ProjectConfig::load(Path::new("/nonexistent/mvkit.json")).unwrap_err();
        assert_eq!(e.code, ErrorCode::FileMissing);
        assert!(e.to_string().starts_with("error[FILE-MISSING]"));
    }

    #[test]
    fn malformed_reports_position() {
        let e = parse("{\n  \"geometry\": {\"l0\": 8}\n}").unwrap_err();
        assert!(e.message.contains("l1") && e.message.contains("line 2"), "{}", e.message);
    }
}
