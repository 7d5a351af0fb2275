//! Workspace and joint-space decomposition into free aspects.
//!
//! A *sheet* is one `(working mode, sign of det A)` pair. Within a sheet the
//! mechanism configuration is a function of either the platform position or
//! the joint vector, so the four-dimensional free aspects can be built as
//! planar cell sets in `W` and mapped to `Q` (and back) branch by branch.

mod aspects;
mod free_space;
mod projection;
mod quadtree;

pub use aspects::{extract_aspects, AspectId, AspectMap, FreeAspect};
pub use free_space::{free_jointspace, free_workspace, FreeSpace};
pub use projection::{project_aspect, project_grid, CellGrid, GridSpec};
pub use quadtree::{build_quadtree, BuildParams, CellIndex, Leaf, Quadtree};

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::collides;
use crate::geometry::{ObstaclePolygon, Point2};
use crate::kinematics::{
    branch_for_mode, forward_kinematics, jacobians, working_mode_of, ForwardSolution, JointVector,
    Leg, MechanismGeometry, ModeBranch, Sign, WorkingMode,
};

/// User-facing working-mode numbering for `det A > 0`, matching the printed catalog.
pub const CATALOG: [WorkingMode; 4] = [
    WorkingMode::new(Sign::Negative, Sign::Positive),
    WorkingMode::new(Sign::Positive, Sign::Positive),
    WorkingMode::new(Sign::Positive, Sign::Negative),
    WorkingMode::new(Sign::Negative, Sign::Negative),
];

/// Working mode numbered `number` (1..=4) on the `det_sign` sheet.
///
/// For `det A < 0` the number refers to the x-axis mirror of the positive
/// sheet, so sheets with equal numbers are mirror images.
pub fn catalog_mode(number: usize, det_sign: Sign) -> Option<WorkingMode> {
    let base = *CATALOG.get(number.checked_sub(1)?)?;
    Some(match det_sign {
        Sign::Positive => base,
        Sign::Negative => base.mirrored(),
    })
}

/// Inverse of [`catalog_mode`].
pub fn catalog_number(mode: WorkingMode, det_sign: Sign) -> usize {
    let base = match det_sign {
        Sign::Positive => mode,
        Sign::Negative => mode.mirrored(),
    };
    CATALOG.iter().position(|&m| m == base).expect("catalog lists every mode") + 1
}

/// Deepest supported tree: `2^12` finest cells per side.
pub const MAX_DEPTH: u8 = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecompositionError {
    #[error("min_cell must be finite and > 0, got {0}")]
    BadMinCell(f64),
    #[error("bounds side {side} is not a power-of-two multiple of min_cell {min_cell}")]
    NotPowerOfTwo { side: f64, min_cell: f64 },
    #[error("tree depth {0} exceeds the supported maximum of {MAX_DEPTH}")]
    TooDeep(u32),
    #[error("joint-space bounds must be [0, 2π)^2")]
    BadJointBounds,
    #[error("samples_per_cell must be >= 5, got {0}")]
    TooFewSamples(usize),
    #[error("malformed quadtree document: {0}")]
    Malformed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Space {
    #[serde(rename = "w")]
    Workspace,
    #[serde(rename = "q")]
    JointSpace,
}

impl Space {
    pub fn is_periodic(self) -> bool {
        matches!(self, Space::JointSpace)
    }

    pub fn name(self) -> &'static str {
        match self {
            Space::Workspace => "w",
            Space::JointSpace => "q",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CellLabel {
    Free,
    Collision,
    SerialSingular,
    ParallelSingular,
    Unreachable,
    Mixed,
}

impl CellLabel {
    pub const ALL: [CellLabel; 6] = [
        CellLabel::Free,
        CellLabel::Collision,
        CellLabel::SerialSingular,
        CellLabel::ParallelSingular,
        CellLabel::Unreachable,
        CellLabel::Mixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CellLabel::Free => "FREE",
            CellLabel::Collision => "COLLISION",
            CellLabel::SerialSingular => "SERIAL_SINGULAR",
            CellLabel::ParallelSingular => "PARALLEL_SINGULAR",
            CellLabel::Unreachable => "UNREACHABLE",
            CellLabel::Mixed => "MIXED",
        }
    }
}

impl fmt::Display for CellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Mechanism plus environment; everything a classifier needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub geometry: MechanismGeometry,
    #[serde(default)]
    pub obstacles: Vec<ObstaclePolygon>,
}

impl Scene {
    pub fn new(geometry: MechanismGeometry, obstacles: Vec<ObstaclePolygon>) -> Self {
        Self {
            geometry,
            obstacles,
        }
    }

    pub fn obstacle_free(geometry: MechanismGeometry) -> Self {
        Self::new(geometry, Vec::new())
    }
}

/// Axis-aligned square `[min.x, min.x + side) x [min.y, min.y + side)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 2],
    pub side: f64,
}

impl Bounds {
    pub fn new(min: [f64; 2], side: f64) -> Self {
        Self { min, side }
    }

    pub fn joint_space() -> Self {
        Self::new([0.0, 0.0], TAU)
    }

    /// Square covering both reach disks' overlap with a unit margin, centred on
    /// that region and grown to a power-of-two multiple of `min_cell`.
    pub fn default_workspace(g: &MechanismGeometry, min_cell: f64) -> Self {
        let (_, r1) = g.reach_annulus(Leg::One);
        let (_, r2) = g.reach_annulus(Leg::Two);
        let lo_x = (g.a1.x - r1).max(g.a2.x - r2) - 1.0;
        let hi_x = (g.a1.x + r1).min(g.a2.x + r2) + 1.0;
        let lo_y = (g.a1.y - r1).max(g.a2.y - r2) - 1.0;
        let hi_y = (g.a1.y + r1).min(g.a2.y + r2) + 1.0;
        let needed = (hi_x - lo_x).max(hi_y - lo_y).max(min_cell);
        let cells = (needed / min_cell * (1.0 - 1e-12)).ceil().max(1.0);
        let side = min_cell * cells.log2().ceil().exp2();
        let cx = (lo_x + hi_x) / 2.0;
        let cy = (lo_y + hi_y) / 2.0;
        Self::new([cx - side / 2.0, cy - side / 2.0], side)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|k| p[k] >= self.min[k] && p[k] < self.min[k] + self.side)
    }

    /// `log2(side / min_cell)` if it is a whole number.
    pub fn depth_for(&self, min_cell: f64) -> Result<u8, DecompositionError> {
        if !(min_cell.is_finite() && min_cell > 0.0) {
            return Err(DecompositionError::BadMinCell(min_cell));
        }
        let ratio = self.side / min_cell;
        let depth = ratio.log2().round();
        if !(ratio.is_finite() && depth >= 0.0) || (depth.exp2() - ratio).abs() > 1e-9 * ratio {
            return Err(DecompositionError::NotPowerOfTwo {
                side: self.side,
                min_cell,
            });
        }
        if depth > MAX_DEPTH as f64 {
            return Err(DecompositionError::TooDeep(depth as u32));
        }
        Ok(depth as u8)
    }
}

/// Pointwise workspace classification for one working mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PointClass {
    pub label: CellLabel,
    /// Sign of `det A` on the mode's branch when it is regular.
    pub det_sign: Option<Sign>,
}

/// Which singular boundary separates an `Unreachable` sample from the sheet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Boundary {
    Serial,
    Parallel,
}

/// Classification of a single sample against one sheet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Sample {
    Free,
    Collision,
    Serial,
    Parallel,
    Unreachable(Boundary),
}

impl Sample {
    pub(crate) fn label(self) -> CellLabel {
        match self {
            Sample::Free => CellLabel::Free,
            Sample::Collision => CellLabel::Collision,
            Sample::Serial => CellLabel::SerialSingular,
            Sample::Parallel => CellLabel::ParallelSingular,
            Sample::Unreachable(_) => CellLabel::Unreachable,
        }
    }
}

/// UNREACHABLE, then SERIAL_SINGULAR / PARALLEL_SINGULAR, then COLLISION, else FREE.
pub fn classify_point_w(scene: &Scene, p: Point2, mode: WorkingMode) -> PointClass {
    let g = &scene.geometry;
    match branch_for_mode(g, p, mode) {
        ModeBranch::Unreachable => PointClass {
            label: CellLabel::Unreachable,
            det_sign: None,
        },
        ModeBranch::SerialSingular => PointClass {
            label: CellLabel::SerialSingular,
            det_sign: None,
        },
        ModeBranch::Regular(c, jp) => match Sign::of(jp.det_a, g.singularity_threshold()) {
            None => PointClass {
                label: CellLabel::ParallelSingular,
                det_sign: None,
            },
            Some(sign) => PointClass {
                label: if collides(g, &c, &scene.obstacles) {
                    CellLabel::Collision
                } else {
                    CellLabel::Free
                },
                det_sign: Some(sign),
            },
        },
    }
}

pub(crate) fn sample_w(scene: &Scene, p: Point2, mode: WorkingMode, det_sign: Sign) -> Sample {
    let class = classify_point_w(scene, p, mode);
    match class.label {
        CellLabel::Unreachable => Sample::Unreachable(Boundary::Serial),
        CellLabel::SerialSingular => Sample::Serial,
        CellLabel::ParallelSingular => Sample::Parallel,
        _ if class.det_sign != Some(det_sign) => Sample::Unreachable(Boundary::Parallel),
        CellLabel::Collision => Sample::Collision,
        _ => Sample::Free,
    }
}

/// Label of a sheet-restricted workspace point (opposite `det A` sign maps to UNREACHABLE).
pub fn classify_point_w_sheet(scene: &Scene, p: Point2, mode: WorkingMode, det_sign: Sign) -> CellLabel {
    sample_w(scene, p, mode, det_sign).label()
}

pub(crate) fn sample_q(scene: &Scene, q: JointVector, mode: WorkingMode, det_sign: Sign) -> Sample {
    let g = &scene.geometry;
    let fk = forward_kinematics(g, q);
    let branches = match &fk {
        ForwardSolution::Degenerate => return Sample::Parallel,
        ForwardSolution::Branches(b) if b.is_empty() => {
            return Sample::Unreachable(Boundary::Parallel)
        }
        ForwardSolution::Branches(b) => b,
    };
    if branches.iter().any(|b| b.det_sign(g).is_none()) {
        return Sample::Parallel;
    }
    let Some(branch) = fk.with_sign(g, det_sign) else {
        return Sample::Unreachable(Boundary::Parallel);
    };
    match working_mode_of(g, &jacobians(g, &branch.config)) {
        None => Sample::Serial,
        Some(m) if m != mode => Sample::Unreachable(Boundary::Serial),
        Some(_) if collides(g, &branch.config, &scene.obstacles) => Sample::Collision,
        Some(_) => Sample::Free,
    }
}

/// Joint-space classification against one sheet: the assembly mode with the
/// requested `det A` sign must exist and lie in `mode`.
pub fn classify_point_q(scene: &Scene, q: JointVector, mode: WorkingMode, det_sign: Sign) -> CellLabel {
    sample_q(scene, q, mode, det_sign).label()
}

pub(crate) fn sample_at(
    scene: &Scene,
    space: Space,
    point: [f64; 2],
    mode: WorkingMode,
    det_sign: Sign,
) -> Sample {
    match space {
        Space::Workspace => sample_w(scene, Point2::new(point[0], point[1]), mode, det_sign),
        Space::JointSpace => sample_q(scene, JointVector::new(point[0], point[1]), mode, det_sign),
    }
}

/// Sheet label at an arbitrary point of either space.
pub fn classify_sheet(scene: &Scene, space: Space, point: [f64; 2], mode: WorkingMode, det_sign: Sign) -> CellLabel {
    sample_at(scene, space, point, mode, det_sign).label()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn scene(r: f64) -> Scene {
        Scene::obstacle_free(MechanismGeometry::reference().with_radii(r))
    }

    const PM: WorkingMode = WorkingMode::new(Sign::Positive, Sign::Negative);
    const PP: WorkingMode = WorkingMode::new(Sign::Positive, Sign::Positive);

    #[test]
    fn workspace_points() {
        let s = scene(0.05);
        let c = classify_point_w(&s, Point2::new(4.0, 4.0), PM);
        assert_eq!(c.label, CellLabel::Free);
        assert_eq!(c.det_sign, Some(Sign::Negative));
        for m in WorkingMode::ALL {
            assert_eq!(classify_point_w(&s, Point2::new(12.0, 0.0), m).label, CellLabel::SerialSingular);
            assert_eq!(classify_point_w(&s, Point2::new(100.0, 0.0), m).label, CellLabel::Unreachable);
        }
        assert_eq!(classify_point_w_sheet(&s, Point2::new(4.0, 4.0), PM, Sign::Positive), CellLabel::Unreachable);
    }

    #[test]
    fn joint_points() {
        let s = scene(0.05);
        let q = JointVector::new(FRAC_PI_2, FRAC_PI_2);
        assert_eq!(classify_point_q(&s, q, PM, Sign::Negative), CellLabel::Free);
        assert_eq!(classify_point_q(&s, q, PP, Sign::Negative), CellLabel::Unreachable);
        let t = (4.0f64 / 7.0).acos();
        assert_eq!(
            classify_point_q(&s, JointVector::new(t, PI - t), PM, Sign::Positive),
            CellLabel::ParallelSingular
        );
    }

    #[test]
    fn catalog_round_trips() {
        for sign in Sign::BOTH {
            for n in 1..=4 {
                let m = catalog_mode(n, sign).unwrap();
                assert_eq!(catalog_number(m, sign), n);
            }
        }
        assert_eq!(catalog_mode(0, Sign::Positive), None);
        assert_eq!(catalog_mode(5, Sign::Positive), None);
        assert_eq!(catalog_mode(1, Sign::Negative), Some(PM));
    }

    #[test]
    fn default_bounds_cover_reach() {
        let g = MechanismGeometry::reference();
        let b = Bounds::default_workspace(&g, 13.0 / 256.0);
        assert_eq!(b.depth_for(13.0 / 256.0).unwrap(), 9);
        assert!((b.side - 26.0).abs() < 1e-12);
        assert!(b.contains([-4.0, -12.0]) && b.contains([12.0, 12.0]));
        assert!(Bounds::new([0.0, 0.0], 26.0).depth_for(0.3).is_err());
        assert!(Bounds::new([0.0, 0.0], 26.0).depth_for(-1.0).is_err());
    }
}
