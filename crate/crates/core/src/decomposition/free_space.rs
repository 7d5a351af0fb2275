use rayon::prelude::*;

use super::projection::{CellGrid, GridSpec};
use super::{Bounds, DecompositionError, Scene, Space};
use crate::collision::collides;
use crate::geometry::Point2;
use crate::kinematics::{forward_kinematics, loose_branch, JointVector, WorkingMode};

/// Pointwise collision-free set over a uniform grid, ignoring singularities.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeSpace {
    /// Cells whose centre admits a collision-free configuration.
    pub free: CellGrid,
    /// Cells whose centre admits any configuration.
    pub reachable: CellGrid,
}

impl FreeSpace {
    pub fn free_area(&self) -> f64 {
        self.free.area()
    }

    /// Free area over reachable area; 0 when nothing is reachable.
    pub fn reachable_fraction(&self) -> f64 {
        let r = self.reachable.area();
        if r == 0.0 {
            0.0
        } else {
            self.free.area() / r
        }
    }

    /// Free area over the area of the whole grid.
    pub fn total_fraction(&self) -> f64 {
        self.free.area() / self.free.spec.bounds.side.powi(2)
    }
}

fn grid_spec(space: Space, bounds: Bounds, min_cell: f64) -> Result<GridSpec, DecompositionError> {
    let depth = bounds.depth_for(min_cell)?;
    Ok(GridSpec {
        space,
        bounds,
        n: 1 << depth,
    })
}

fn sweep(spec: GridSpec, classify: impl Fn([f64; 2]) -> (bool, bool) + Sync) -> FreeSpace {
    let n = spec.n;
    let flags: Vec<(bool, bool)> = (0..n * n)
        .into_par_iter()
        .map(|i| classify(spec.cell_center(i % n, i / n)))
        .collect();
    let mut free = CellGrid::new(spec);
    let mut reachable = CellGrid::new(spec);
    for (i, (r, f)) in flags.into_iter().enumerate() {
        let (x, y) = (i as u32 % n, i as u32 / n);
        if r {
            reachable.insert(x, y);
        }
        if f {
            free.insert(x, y);
        }
    }
    FreeSpace { free, reachable }
}

/// Workspace points with a collision-free configuration in at least one mode.
pub fn free_workspace(scene: &Scene, bounds: Bounds, min_cell: f64) -> Result<FreeSpace, DecompositionError> {
    let spec = grid_spec(Space::Workspace, bounds, min_cell)?;
    let g = &scene.geometry;
    Ok(sweep(spec, |c| {
        let p = Point2::new(c[0], c[1]);
        let mut reachable = false;
        for mode in WorkingMode::ALL {
            if let Some(config) = loose_branch(g, p, mode) {
                reachable = true;
                if !collides(g, &config, &scene.obstacles) {
                    return (true, true);
                }
            }
        }
        (reachable, false)
    }))
}

/// Joint vectors with a collision-free assembly; the grid covers `[0, 2π)^2`.
pub fn free_jointspace(scene: &Scene, min_cell: f64) -> Result<FreeSpace, DecompositionError> {
    let spec = grid_spec(Space::JointSpace, Bounds::joint_space(), min_cell)?;
    let g = &scene.geometry;
    Ok(sweep(spec, |c| {
        let fk = forward_kinematics(g, JointVector::new(c[0], c[1]));
        let branches = fk.branches();
        let free = branches
            .iter()
            .any(|b| !collides(g, &b.config, &scene.obstacles));
        (!branches.is_empty(), free)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ObstaclePolygon;
    use crate::kinematics::MechanismGeometry;
    use std::f64::consts::TAU;

    #[test]
    fn covering_obstacle_empties_both_spaces() {
        let g = MechanismGeometry::reference();
        let wall = ObstaclePolygon::square("wall", Point2::new(-50.0, -50.0), 100.0).unwrap();
        let scene = Scene::new(g, vec![wall]);
        let w = free_workspace(&scene, Bounds::new([-13.0, -13.0], 26.0), 26.0 / 32.0).unwrap();
        assert!(w.free.is_empty());
        assert!(!w.reachable.is_empty());
        let q = free_jointspace(&scene, TAU / 32.0).unwrap();
        assert!(q.free.is_empty());
    }

    #[test]
    fn free_within_reachable() {
        let scene = Scene::obstacle_free(MechanismGeometry::reference());
        let w = free_workspace(&scene, Bounds::new([-13.0, -13.0], 26.0), 26.0 / 64.0).unwrap();
        assert_eq!(w.free.overlap_area(&w.reachable), w.free.area());
        assert!(w.reachable_fraction() > 0.5 && w.reachable_fraction() <= 1.0);
        assert!(!w.reachable.contains_point([-12.5, 12.5]));
    }
}
