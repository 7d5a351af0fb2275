use std::collections::BTreeSet;

use rayon::prelude::*;

use super::aspects::FreeAspect;
use super::quadtree::{fine_neighbors, Quadtree};
use super::{Bounds, Scene, Space};
use crate::geometry::Point2;
use crate::kinematics::{
    forward_kinematics, jacobians, loose_branch, JointVector, Leg, Sign, WorkingMode,
};

/// Uniform `n x n` grid over `bounds` in `space`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub space: Space,
    pub bounds: Bounds,
    pub n: u32,
}

impl GridSpec {
    pub fn of_tree(tree: &Quadtree) -> Self {
        Self {
            space: tree.space,
            bounds: tree.bounds,
            n: tree.resolution(),
        }
    }

    pub fn cell_side(&self) -> f64 {
        self.bounds.side / f64::from(self.n)
    }

    pub fn cell_center(&self, ix: u32, iy: u32) -> [f64; 2] {
        let s = self.cell_side();
        [
            self.bounds.min[0] + s * (f64::from(ix) + 0.5),
            self.bounds.min[1] + s * (f64::from(iy) + 0.5),
        ]
    }

    /// Cell of `point`; periodic spaces wrap, others return `None` outside.
    pub fn cell_of(&self, point: [f64; 2]) -> Option<(u32, u32)> {
        let mut idx = [0u32; 2];
        for k in 0..2 {
            let mut t = (point[k] - self.bounds.min[k]) / self.cell_side();
            if self.space.is_periodic() {
                t = t.rem_euclid(f64::from(self.n));
            }
            if !(t >= 0.0 && t < f64::from(self.n)) {
                return None;
            }
            idx[k] = (t.floor() as u32).min(self.n - 1);
        }
        Some((idx[0], idx[1]))
    }

    /// Equal or edge-adjacent cells, with wrap in periodic spaces.
    fn touching(&self, a: (u32, u32), b: (u32, u32)) -> bool {
        let d = |u: u32, v: u32| {
            let diff = u.abs_diff(v);
            if self.space.is_periodic() {
                diff.min(self.n - diff)
            } else {
                diff
            }
        };
        d(a.0, b.0) + d(a.1, b.1) <= 1
    }
}

/// Set of cells of a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct CellGrid {
    pub spec: GridSpec,
    cells: Vec<bool>,
}

impl CellGrid {
    pub fn new(spec: GridSpec) -> Self {
        Self {
            spec,
            cells: vec![false; (spec.n as usize) * (spec.n as usize)],
        }
    }

    fn slot(&self, ix: u32, iy: u32) -> usize {
        (iy as usize) * (self.spec.n as usize) + ix as usize
    }

    pub fn insert(&mut self, ix: u32, iy: u32) {
        let s = self.slot(ix, iy);
        self.cells[s] = true;
    }

    pub fn contains(&self, ix: u32, iy: u32) -> bool {
        self.cells[self.slot(ix, iy)]
    }

    pub fn contains_point(&self, point: [f64; 2]) -> bool {
        self.spec
            .cell_of(point)
            .is_some_and(|(x, y)| self.contains(x, y))
    }

    pub fn len(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.cells.contains(&true)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let n = self.spec.n;
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(move |(i, _)| (i as u32 % n, i as u32 / n))
    }

    pub fn area(&self) -> f64 {
        self.len() as f64 * self.spec.cell_side().powi(2)
    }

    /// Area of cells present in both grids; the specs must match.
    pub fn overlap_area(&self, other: &CellGrid) -> f64 {
        assert_eq!(self.spec, other.spec, "grids must share a spec");
        let count = self
            .cells
            .iter()
            .zip(&other.cells)
            .filter(|(a, b)| **a && **b)
            .count();
        count as f64 * self.spec.cell_side().powi(2)
    }

    /// Number of edge-connected components, wrap-aware.
    pub fn component_count(&self) -> usize {
        let n = self.spec.n;
        let periodic = self.spec.space.is_periodic();
        let mut seen = vec![false; self.cells.len()];
        let mut count = 0;
        for (x, y) in self.iter() {
            if seen[self.slot(x, y)] {
                continue;
            }
            count += 1;
            let mut stack = vec![(x, y)];
            seen[self.slot(x, y)] = true;
            while let Some((cx, cy)) = stack.pop() {
                for (nx, ny) in fine_neighbors(n, periodic, cx, cy) {
                    let s = self.slot(nx, ny);
                    if self.cells[s] && !seen[s] {
                        seen[s] = true;
                        stack.push((nx, ny));
                    }
                }
            }
        }
        count
    }
}

/// Branch-consistent map of one sheet from `from` to its partner space.
fn map_point(
    scene: &Scene,
    from: Space,
    point: [f64; 2],
    mode: WorkingMode,
    det_sign: Sign,
) -> Option<[f64; 2]> {
    let g = &scene.geometry;
    match from {
        Space::Workspace => {
            let c = loose_branch(g, Point2::new(point[0], point[1]), mode)?;
            Some(c.q.as_array())
        }
        Space::JointSpace => {
            let fk = forward_kinematics(g, JointVector::new(point[0], point[1]));
            fk.branches()
                .iter()
                .filter(|b| (b.det_a > 0.0) == (det_sign == Sign::Positive))
                .find(|b| {
                    let diag = jacobians(g, &b.config).b_diag();
                    Leg::BOTH
                        .iter()
                        .all(|&leg| (diag[leg.index()] > 0.0) == (mode.sign(leg) == Sign::Positive))
                })
                .map(|b| [b.config.p().x, b.config.p().y])
        }
    }
}

/// Refinement budget per source cell, in halvings of its side.
const REFINE_DEPTH: u32 = 10;
/// Budget once part of a square falls outside the map's domain.
const EDGE_DEPTH: u32 = 4;

type Image = Option<(u32, u32)>;

struct Projector<'a> {
    scene: &'a Scene,
    source: Space,
    target: GridSpec,
    mode: WorkingMode,
    det_sign: Sign,
}

impl Projector<'_> {
    fn image(&self, p: [f64; 2]) -> Image {
        map_point(self.scene, self.source, p, self.mode, self.det_sign).and_then(|m| self.target.cell_of(m))
    }

    /// Records the images of a square's corners, halving the square until
    /// they are pairwise equal or edge-adjacent.
    fn refine(&self, lo: [f64; 2], side: f64, corners: [Image; 4], depth: u32, out: &mut Vec<(u32, u32)>) {
        out.extend(corners.iter().flatten());
        let complete = corners.iter().all(Option::is_some);
        let settled = complete
            && corners
                .iter()
                .flatten()
                .all(|&a| corners.iter().flatten().all(|&b| self.target.touching(a, b)));
        let budget = if complete { depth } else { depth.min(EDGE_DEPTH) };
        if settled || budget == 0 {
            return;
        }
        let h = side / 2.0;
        let at = |i: u32, j: u32| self.image([lo[0] + h * f64::from(i), lo[1] + h * f64::from(j)]);
        // corners are ordered (0,0), (1,0), (0,1), (1,1)
        let [c00, c20, c02, c22] = corners;
        let (c10, c01, c11, c21, c12) = (at(1, 0), at(0, 1), at(1, 1), at(2, 1), at(1, 2));
        let next = budget - 1;
        self.refine(lo, h, [c00, c10, c01, c11], next, out);
        self.refine([lo[0] + h, lo[1]], h, [c10, c20, c11, c21], next, out);
        self.refine([lo[0], lo[1] + h], h, [c01, c11, c02, c12], next, out);
        self.refine([lo[0] + h, lo[1] + h], h, [c11, c21, c12, c22], next, out);
    }
}

/// Image of `source` under the sheet's kinematic map, accumulated on `target`.
///
/// Each source cell is halved recursively until the images of every
/// sub-square's corners are equal or edge-adjacent target cells, so the image
/// is covered without holes and connected sources give connected images.
/// Squares straddling the edge of the map's domain stop early.
pub fn project_grid(
    scene: &Scene,
    source: &CellGrid,
    mode: WorkingMode,
    det_sign: Sign,
    target: GridSpec,
) -> CellGrid {
    let spec = source.spec;
    let s = spec.cell_side();
    let projector = Projector {
        scene,
        source: spec.space,
        target,
        mode,
        det_sign,
    };
    let cells: Vec<(u32, u32)> = source.iter().collect();
    let hits: Vec<Vec<(u32, u32)>> = cells
        .par_iter()
        .map(|&(cx, cy)| {
            let lo = [
                spec.bounds.min[0] + s * f64::from(cx),
                spec.bounds.min[1] + s * f64::from(cy),
            ];
            let at = |i: u32, j: u32| projector.image([lo[0] + s * f64::from(i), lo[1] + s * f64::from(j)]);
            let mut out = Vec::new();
            projector.refine(lo, s, [at(0, 0), at(1, 0), at(0, 1), at(1, 1)], REFINE_DEPTH, &mut out);
            out
        })
        .collect();
    let mut grid = CellGrid::new(target);
    let unique: BTreeSet<(u32, u32)> = hits.into_iter().flatten().collect();
    for (x, y) in unique {
        grid.insert(x, y);
    }
    grid
}

/// Default partner grid: same cells per side as the source tree.
fn partner_spec(tree: &Quadtree, workspace_bounds: Bounds) -> GridSpec {
    match tree.space {
        Space::Workspace => GridSpec {
            space: Space::JointSpace,
            bounds: Bounds::joint_space(),
            n: tree.resolution(),
        },
        Space::JointSpace => GridSpec {
            space: Space::Workspace,
            bounds: workspace_bounds,
            n: tree.resolution(),
        },
    }
}

/// Fill `projection` with the aspect's image in the partner space.
///
/// `workspace_bounds` is only used for joint-space aspects.
pub fn project_aspect(
    scene: &Scene,
    tree: &Quadtree,
    aspect: &FreeAspect,
    workspace_bounds: Bounds,
) -> FreeAspect {
    let source = aspect.to_grid(tree);
    let target = partner_spec(tree, workspace_bounds);
    let projection = project_grid(scene, &source, tree.mode, tree.det_sign, target);
    FreeAspect {
        projection: Some(projection),
        ..aspect.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::MechanismGeometry;

    const PM: WorkingMode = WorkingMode::new(Sign::Positive, Sign::Negative);

    fn wspec(n: u32) -> GridSpec {
        GridSpec {
            space: Space::Workspace,
            bounds: Bounds::new([-13.0, -13.0], 26.0),
            n,
        }
    }

    #[test]
    fn cell_lookup_wraps_in_joint_space() {
        let q = GridSpec {
            space: Space::JointSpace,
            bounds: Bounds::joint_space(),
            n: 8,
        };
        assert_eq!(q.cell_of([-0.1, 7.0]), Some((7, 0)));
        assert_eq!(wspec(8).cell_of([20.0, 0.0]), None);
        assert!(q.touching((0, 3), (7, 3)));
        assert!(!wspec(8).touching((0, 3), (7, 3)));
    }

    #[test]
    fn components_wrap() {
        let q = GridSpec {
            space: Space::JointSpace,
            bounds: Bounds::joint_space(),
            n: 8,
        };
        let mut g = CellGrid::new(q);
        g.insert(0, 2);
        g.insert(7, 2);
        assert_eq!(g.component_count(), 1);
        let mut w = CellGrid::new(wspec(8));
        w.insert(0, 2);
        w.insert(7, 2);
        assert_eq!(w.component_count(), 2);
    }

    #[test]
    fn empty_source_projects_to_empty() {
        let scene = Scene::obstacle_free(MechanismGeometry::reference());
        let target = GridSpec {
            space: Space::JointSpace,
            bounds: Bounds::joint_space(),
            n: 32,
        };
        let img = project_grid(&scene, &CellGrid::new(wspec(32)), PM, Sign::Negative, target);
        assert!(img.is_empty());
    }

    #[test]
    fn single_cell_maps_near_ik_image() {
        let scene = Scene::obstacle_free(MechanismGeometry::reference());
        let spec = wspec(64);
        let mut src = CellGrid::new(spec);
        let (x, y) = spec.cell_of([4.0, 4.0]).unwrap();
        src.insert(x, y);
        let target = GridSpec {
            space: Space::JointSpace,
            bounds: Bounds::joint_space(),
            n: 64,
        };
        let img = project_grid(&scene, &src, PM, Sign::Negative, target);
        assert!(!img.is_empty());
        assert_eq!(img.component_count(), 1);
        // the cell centre maps close to (π/2, π/2)
        let c = spec.cell_center(x, y);
        let q = loose_branch(&scene.geometry, Point2::new(c[0], c[1]), PM).unwrap().q;
        assert!(img.contains_point(q.as_array()));
    }
}
