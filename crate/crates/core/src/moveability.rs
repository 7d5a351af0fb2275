//! Trajectory feasibility and point-to-point moveability over free aspects.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decomposition::{classify_point_w_sheet, AspectId, AspectMap, CellLabel, Scene};
use crate::geometry::Point2;
use crate::kinematics::{Sign, WorkingMode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MoveabilityError {
    #[error("a trajectory needs at least 2 waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("waypoint {0} repeats the one before it")]
    RepeatedWaypoint(usize),
    #[error("sampling step must be finite and > 0, got {0}")]
    BadStep(f64),
    #[error("malformed trajectory document: {0}")]
    Malformed(String),
}

/// Polyline in the workspace with a sampling step.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    waypoints: Vec<Point2>,
    step: f64,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryDocument {
    waypoints: Vec<Point2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    step: Option<f64>,
}

impl Trajectory {
    pub fn new(waypoints: Vec<Point2>, step: f64) -> Result<Self, MoveabilityError> {
        if waypoints.len() < 2 {
            return Err(MoveabilityError::TooFewWaypoints(waypoints.len()));
        }
        if let Some(i) = waypoints.windows(2).position(|w| w[0] == w[1]) {
            return Err(MoveabilityError::RepeatedWaypoint(i + 1));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(MoveabilityError::BadStep(step));
        }
        Ok(Self { waypoints, step })
    }

    /// Parses `{waypoints: [[x, y], ...], step}`; a missing step takes `default_step`.
    pub fn from_json(text: &str, default_step: f64) -> Result<Self, MoveabilityError> {
        let doc: TrajectoryDocument =
            serde_json::from_str(text).map_err(|e| MoveabilityError::Malformed(e.to_string()))?;
        Self::new(doc.waypoints, doc.step.unwrap_or(default_step))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TrajectoryDocument {
            waypoints: self.waypoints.clone(),
            step: Some(self.step),
        })
        .expect("trajectory serializes")
    }

    pub fn waypoints(&self) -> &[Point2] {
        &self.waypoints
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    pub fn reversed(&self) -> Self {
        let mut waypoints = self.waypoints.clone();
        waypoints.reverse();
        Self {
            waypoints,
            step: self.step,
        }
    }

    pub fn with_step(&self, step: f64) -> Result<Self, MoveabilityError> {
        Self::new(self.waypoints.clone(), step)
    }

    /// `(arc length, point)` samples.
    ///
    /// Each segment is cut into the fewest power-of-two pieces no longer than
    /// the step, so a halved step samples a superset of the points and the
    /// reversed path samples the same points.
    pub fn samples(&self) -> Vec<(f64, Point2)> {
        let mut out = Vec::new();
        let mut arc = 0.0;
        for w in self.waypoints.windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = a.distance(b);
            let mut n: u64 = 1;
            while len / n as f64 > self.step {
                n *= 2;
            }
            for i in 0..n {
                let t = i as f64 / n as f64;
                out.push((arc + len * t, a * (1.0 - t) + b * t));
            }
            arc += len;
        }
        out.push((arc, *self.waypoints.last().expect("at least two waypoints")));
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BlockReason {
    /// The sample or its cell is not FREE.
    Cell { label: CellLabel },
    /// The sample lies in a different aspect from the path start.
    AspectChange { from: AspectId, to: AspectId },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Blocker {
    pub arc_length: f64,
    pub position: Point2,
    pub reason: BlockReason,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityVerdict {
    pub feasible: bool,
    pub mode: WorkingMode,
    pub det_sign: Sign,
    /// Aspect holding the whole path; set iff feasible.
    pub aspect: Option<AspectId>,
    pub first_blocker: Option<Blocker>,
    /// Aspect of each endpoint, or the label of its cell.
    pub start: Result<AspectId, CellLabel>,
    pub end: Result<AspectId, CellLabel>,
}

/// Checks that every sample is FREE pointwise and that all samples share one aspect.
pub fn check_path(scene: &Scene, map: &AspectMap, trajectory: &Trajectory) -> FeasibilityVerdict {
    let tree = map.tree();
    let (mode, det_sign) = (tree.mode, tree.det_sign);
    let at = |p: Point2| map.locate([p.x, p.y]);
    let ends = trajectory.waypoints();
    let mut verdict = FeasibilityVerdict {
        feasible: false,
        mode,
        det_sign,
        aspect: None,
        first_blocker: None,
        start: at(ends[0]),
        end: at(ends[ends.len() - 1]),
    };
    let mut current: Option<AspectId> = None;
    for (arc_length, position) in trajectory.samples() {
        let block = |reason| {
            Some(Blocker {
                arc_length,
                position,
                reason,
            })
        };
        let pointwise = classify_point_w_sheet(scene, position, mode, det_sign);
        let blocker = if pointwise != CellLabel::Free {
            block(BlockReason::Cell { label: pointwise })
        } else {
            match (at(position), current) {
                (Err(label), _) => block(BlockReason::Cell { label }),
                (Ok(id), None) => {
                    current = Some(id);
                    None
                }
                (Ok(id), Some(from)) if id != from => block(BlockReason::AspectChange { from, to: id }),
                (Ok(_), Some(_)) => None,
            }
        };
        if blocker.is_some() {
            verdict.first_blocker = blocker;
            return verdict;
        }
    }
    verdict.feasible = true;
    verdict.aspect = current;
    verdict
}

/// Every aspect, over all supplied maps, that contains both points.
pub fn moveability(maps: &[AspectMap], start: Point2, goal: Point2) -> Vec<AspectId> {
    let mut out: Vec<AspectId> = maps
        .iter()
        .filter_map(|map| match (map.locate([start.x, start.y]), map.locate([goal.x, goal.y])) {
            (Ok(a), Ok(b)) if a == b => Some(a),
            _ => None,
        })
        .collect();
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{build_quadtree, Bounds, BuildParams, Space};
    use crate::kinematics::MechanismGeometry;

    const PM: WorkingMode = WorkingMode::new(Sign::Positive, Sign::Negative);

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn setup() -> (Scene, AspectMap) {
        let g = MechanismGeometry::reference().with_radii(0.05);
        let scene = Scene::obstacle_free(g);
        let tree = build_quadtree(
            &scene,
            Space::Workspace,
            Bounds::new([-13.0, -13.0], 26.0),
            PM,
            Sign::Negative,
            BuildParams::new(26.0 / 128.0),
        )
        .unwrap();
        (scene, AspectMap::new(tree))
    }

    #[test]
    fn trajectory_validation() {
        assert_eq!(
            Trajectory::new(vec![p(0.0, 0.0)], 0.1),
            Err(MoveabilityError::TooFewWaypoints(1))
        );
        assert_eq!(
            Trajectory::new(vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 0.0)], 0.1),
            Err(MoveabilityError::RepeatedWaypoint(2))
        );
        assert!(matches!(
            Trajectory::new(vec![p(0.0, 0.0), p(1.0, 0.0)], 0.0),
            Err(MoveabilityError::BadStep(_))
        ));
        let t = Trajectory::from_json(r#"{"waypoints": [[0, 0], [3, 4]]}"#, 0.5).unwrap();
        assert_eq!(t.step(), 0.5);
        assert_eq!(Trajectory::from_json(&t.to_json(), 9.0).unwrap(), t);
        assert!(matches!(Trajectory::from_json("[]", 1.0), Err(MoveabilityError::Malformed(_))));
    }

    #[test]
    fn samples_are_dyadic() {
        let t = Trajectory::new(vec![p(0.0, 0.0), p(3.0, 4.0)], 1.0).unwrap();
        let s = t.samples();
        // 5 / 8 <= 1 < 5 / 4
        assert_eq!(s.len(), 9);
        assert_eq!(s[8], (5.0, p(3.0, 4.0)));
        let mut back: Vec<Point2> = t.reversed().samples().into_iter().map(|x| x.1).collect();
        back.reverse();
        assert_eq!(back, s.iter().map(|x| x.1).collect::<Vec<_>>());
    }

    #[test]
    fn locate_examples() {
        let (_, map) = setup();
        assert!(map.locate([4.0, 4.0]).is_ok());
        assert_eq!(map.locate([12.0, 0.0]).err().map(|l| l != CellLabel::Free), Some(true));
        assert_eq!(map.locate([100.0, 0.0]), Err(CellLabel::Unreachable));
    }

    #[test]
    fn short_path_inside_aspect_is_feasible() {
        let (scene, map) = setup();
        let t = Trajectory::new(vec![p(4.0, 4.0), p(4.5, 4.5), p(3.5, 5.0)], 0.05).unwrap();
        let v = check_path(&scene, &map, &t);
        assert!(v.feasible, "{v:?}");
        assert_eq!(v.aspect, v.start.ok());
        assert!(v.first_blocker.is_none());
        assert_eq!(moveability(std::slice::from_ref(&map), p(4.0, 4.0), p(3.5, 5.0)), vec![v.aspect.unwrap()]);
    }

    #[test]
    fn unreachable_goal_blocks() {
        let (scene, map) = setup();
        let t = Trajectory::new(vec![p(4.0, 4.0), p(4.0, 20.0)], 0.05).unwrap();
        let v = check_path(&scene, &map, &t);
        assert!(!v.feasible && v.aspect.is_none());
        assert_eq!(v.end, Err(CellLabel::Unreachable));
        assert!(moveability(&[map], p(4.0, 4.0), p(4.0, 20.0)).is_empty());
    }
}
