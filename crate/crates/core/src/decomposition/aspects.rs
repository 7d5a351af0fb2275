use std::fmt;

use serde::{Deserialize, Serialize};

use super::quadtree::{CellIndex, Quadtree};
use super::{CellLabel, CellGrid, GridSpec, Space};
use crate::kinematics::{Sign, WorkingMode};

/// `(working mode, det A sign, serial)`; serials start at 1 in descending-area order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AspectId {
    pub mode: WorkingMode,
    pub det_sign: Sign,
    pub serial: u32,
}

impl fmt::Display for AspectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}#{}", self.mode, self.det_sign, self.serial)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FreeAspect {
    pub id: AspectId,
    pub space: Space,
    /// FREE leaves of the component in depth-first order.
    pub cells: Vec<CellIndex>,
    pub area: f64,
    /// Image in the partner space, filled by [`super::project_aspect`].
    pub projection: Option<CellGrid>,
}

impl FreeAspect {
    /// The aspect rasterised on the tree's finest grid.
    pub fn to_grid(&self, tree: &Quadtree) -> CellGrid {
        let mut grid = CellGrid::new(GridSpec::of_tree(tree));
        let depth = tree.max_depth();
        for cell in &self.cells {
            let (x0, y0, w) = cell.span(depth);
            for y in y0..y0 + w {
                for x in x0..x0 + w {
                    grid.insert(x, y);
                }
            }
        }
        grid
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller index as root so roots follow DFS order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Component index per leaf (`None` for non-FREE leaves) plus the aspects.
fn components(tree: &Quadtree) -> (Vec<Option<usize>>, Vec<FreeAspect>) {
    let leaves = tree.leaves();
    let mut uf = UnionFind::new(leaves.len());
    let n = tree.resolution();
    let periodic = tree.space.is_periodic();
    let free = |i: usize| leaves[i].label == CellLabel::Free;
    for fy in 0..n {
        for fx in 0..n {
            let i = tree.leaf_index_at_fine(fx, fy);
            if !free(i) {
                continue;
            }
            let right = if fx + 1 < n { Some((fx + 1, fy)) } else if periodic { Some((0, fy)) } else { None };
            let up = if fy + 1 < n { Some((fx, fy + 1)) } else if periodic { Some((fx, 0)) } else { None };
            for (x, y) in right.into_iter().chain(up) {
                let j = tree.leaf_index_at_fine(x, y);
                if j != i && free(j) {
                    uf.union(i, j);
                }
            }
        }
    }

    // root -> (fine-cell count, first leaf index, members)
    let mut groups: Vec<(u64, usize, Vec<CellIndex>)> = Vec::new();
    let mut group_of_root = vec![usize::MAX; leaves.len()];
    for (i, leaf) in leaves.iter().enumerate() {
        if leaf.label != CellLabel::Free {
            continue;
        }
        let r = uf.find(i);
        if group_of_root[r] == usize::MAX {
            group_of_root[r] = groups.len();
            groups.push((0, i, Vec::new()));
        }
        let g = &mut groups[group_of_root[r]];
        let (_, _, w) = leaf.cell.span(tree.max_depth());
        g.0 += u64::from(w) * u64::from(w);
        g.2.push(leaf.cell);
    }
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| groups[b].0.cmp(&groups[a].0).then(groups[a].1.cmp(&groups[b].1)));
    let mut rank = vec![0usize; groups.len()];
    for (k, &g) in order.iter().enumerate() {
        rank[g] = k;
    }

    let fine_area = tree.min_cell * tree.min_cell;
    let mut aspects: Vec<Option<FreeAspect>> = vec![None; groups.len()];
    for (g, (count, _, cells)) in groups.into_iter().enumerate() {
        aspects[rank[g]] = Some(FreeAspect {
            id: AspectId {
                mode: tree.mode,
                det_sign: tree.det_sign,
                serial: rank[g] as u32 + 1,
            },
            space: tree.space,
            cells,
            area: count as f64 * fine_area,
            projection: None,
        });
    }
    let mut leaf_aspect = vec![None; leaves.len()];
    for (i, leaf) in leaves.iter().enumerate() {
        if leaf.label == CellLabel::Free {
            leaf_aspect[i] = Some(rank[group_of_root[uf.find(i)]]);
        }
    }
    (leaf_aspect, aspects.into_iter().map(|a| a.expect("every rank filled")).collect())
}

/// Edge-connected components of FREE leaves, largest first.
pub fn extract_aspects(tree: &Quadtree) -> Vec<FreeAspect> {
    components(tree).1
}

/// A finished tree with its aspects and a point-to-aspect lookup.
#[derive(Clone, Debug)]
pub struct AspectMap {
    tree: Quadtree,
    aspects: Vec<FreeAspect>,
    leaf_aspect: Vec<Option<usize>>,
}

impl AspectMap {
    pub fn new(tree: Quadtree) -> Self {
        let (leaf_aspect, aspects) = components(&tree);
        Self {
            tree,
            aspects,
            leaf_aspect,
        }
    }

    pub fn tree(&self) -> &Quadtree {
        &self.tree
    }

    pub fn aspects(&self) -> &[FreeAspect] {
        &self.aspects
    }

    pub fn aspect(&self, id: AspectId) -> Option<&FreeAspect> {
        if id.mode != self.tree.mode || id.det_sign != self.tree.det_sign || id.serial == 0 {
            return None;
        }
        self.aspects.get(id.serial as usize - 1)
    }

    /// Aspect containing `point`, or the label of its cell; outside the bounds is UNREACHABLE.
    pub fn locate(&self, point: [f64; 2]) -> Result<AspectId, CellLabel> {
        let Some(i) = self.tree.leaf_index_at(point) else {
            return Err(CellLabel::Unreachable);
        };
        match self.leaf_aspect[i] {
            Some(k) => Ok(self.aspects[k].id),
            None => Err(self.tree.leaves()[i].label),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{build_quadtree, Bounds, BuildParams, Scene};
    use crate::kinematics::MechanismGeometry;

    const PM: WorkingMode = WorkingMode::new(Sign::Positive, Sign::Negative);

    fn small_map() -> AspectMap {
        let scene = Scene::obstacle_free(MechanismGeometry::reference().with_radii(0.05));
        let tree = build_quadtree(
            &scene,
            Space::Workspace,
            Bounds::new([-13.0, -13.0], 26.0),
            PM,
            Sign::Negative,
            BuildParams::new(26.0 / 64.0),
        )
        .unwrap();
        AspectMap::new(tree)
    }

    #[test]
    fn union_find_joins_chains() {
        let mut uf = UnionFind::new(5);
        uf.union(3, 4);
        uf.union(4, 1);
        assert_eq!(uf.find(3), 1);
        assert_ne!(uf.find(0), uf.find(1));
    }

    #[test]
    fn aspects_sorted_and_located() {
        let map = small_map();
        let aspects = map.aspects();
        assert!(!aspects.is_empty());
        for (k, a) in aspects.iter().enumerate() {
            assert_eq!(a.id.serial as usize, k + 1);
            assert!(a.area > 0.0);
            if k > 0 {
                assert!(aspects[k - 1].area >= a.area);
            }
        }
        let id = map.locate([4.0, 4.0]).unwrap();
        assert_eq!(map.aspect(id).unwrap().id, id);
        assert_eq!(map.locate([100.0, 0.0]), Err(CellLabel::Unreachable));
    }

    #[test]
    fn empty_tree_has_no_aspects() {
        let g = MechanismGeometry::reference().with_radii(50.0);
        let tree = build_quadtree(
            &Scene::obstacle_free(g),
            Space::Workspace,
            Bounds::new([-13.0, -13.0], 26.0),
            PM,
            Sign::Negative,
            BuildParams::new(26.0 / 16.0),
        )
        .unwrap();
        assert!(extract_aspects(&tree).is_empty());
    }
}
