use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sample_at, Boundary, Bounds, CellLabel, DecompositionError, Sample, Scene, Space};
use crate::kinematics::{Sign, WorkingMode};

/// Subtrees above this depth are classified on the rayon pool.
const PARALLEL_DEPTH: u8 = 4;
/// Enrichment re-samples with this many times the base sample count.
const ENRICHMENT_FACTOR: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuildParams {
    pub min_cell: f64,
    pub samples_per_cell: usize,
}

impl BuildParams {
    pub const DEFAULT_SAMPLES: usize = 9;

    pub fn new(min_cell: f64) -> Self {
        Self {
            min_cell,
            samples_per_cell: Self::DEFAULT_SAMPLES,
        }
    }
}

/// Cell at `depth` with integer coordinates `(ix, iy)` in a `2^depth` grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub depth: u8,
    pub ix: u32,
    pub iy: u32,
}

impl CellIndex {
    pub const ROOT: CellIndex = CellIndex {
        depth: 0,
        ix: 0,
        iy: 0,
    };

    /// Quadrant digits: `0` low-x low-y, `1` high-x low-y, `2` low-x high-y, `3` high-x high-y.
    pub fn children(self) -> [CellIndex; 4] {
        let (x, y, d) = (self.ix * 2, self.iy * 2, self.depth + 1);
        [
            CellIndex { depth: d, ix: x, iy: y },
            CellIndex { depth: d, ix: x + 1, iy: y },
            CellIndex { depth: d, ix: x, iy: y + 1 },
            CellIndex { depth: d, ix: x + 1, iy: y + 1 },
        ]
    }

    pub fn path(self) -> String {
        (0..self.depth)
            .rev()
            .map(|level| {
                let digit = ((self.ix >> level) & 1) + 2 * ((self.iy >> level) & 1);
                char::from(b'0' + digit as u8)
            })
            .collect()
    }

    pub fn from_path(path: &str) -> Option<CellIndex> {
        let mut cell = CellIndex::ROOT;
        for ch in path.chars() {
            let digit = ch.to_digit(10).filter(|&d| d < 4)? as usize;
            if cell.depth >= super::MAX_DEPTH {
                return None;
            }
            cell = cell.children()[digit];
        }
        Some(cell)
    }

    /// Range of finest-grid cells covered at `max_depth`.
    pub fn span(self, max_depth: u8) -> (u32, u32, u32) {
        let shift = max_depth - self.depth;
        (self.ix << shift, self.iy << shift, 1 << shift)
    }

    /// Morton-style key giving depth-first order among non-overlapping cells.
    fn dfs_key(self, max_depth: u8) -> (u64, u8) {
        let (x, y, _) = self.span(max_depth);
        let mut key = 0u64;
        for bit in (0..max_depth).rev() {
            key = (key << 2) | (((y >> bit) & 1) << 1 | ((x >> bit) & 1)) as u64;
        }
        (key, self.depth)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Leaf {
    pub cell: CellIndex,
    pub label: CellLabel,
    /// Pointwise label at the cell centre.
    pub center: CellLabel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Quadtree {
    pub space: Space,
    pub bounds: Bounds,
    pub mode: WorkingMode,
    pub det_sign: Sign,
    pub min_cell: f64,
    max_depth: u8,
    leaves: Vec<Leaf>,
    /// Leaf index for each finest-grid cell, row-major in `y`.
    raster: Vec<u32>,
}

impl Quadtree {
    fn assemble(
        space: Space,
        bounds: Bounds,
        mode: WorkingMode,
        det_sign: Sign,
        min_cell: f64,
        max_depth: u8,
        mut leaves: Vec<Leaf>,
    ) -> Result<Self, DecompositionError> {
        leaves.sort_by_key(|l| l.cell.dfs_key(max_depth));
        let raster = rasterize(&leaves, max_depth)?;
        Ok(Self {
            space,
            bounds,
            mode,
            det_sign,
            min_cell,
            max_depth,
            leaves,
            raster,
        })
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    pub fn max_depth(&self) -> u8 {
        self.max_depth
    }

    /// Finest cells per side.
    pub fn resolution(&self) -> u32 {
        1 << self.max_depth
    }

    pub fn cell_side(&self, cell: CellIndex) -> f64 {
        self.bounds.side / f64::from(1u32 << cell.depth)
    }

    pub fn cell_min(&self, cell: CellIndex) -> [f64; 2] {
        let side = self.cell_side(cell);
        [
            self.bounds.min[0] + side * f64::from(cell.ix),
            self.bounds.min[1] + side * f64::from(cell.iy),
        ]
    }

    pub fn cell_center(&self, cell: CellIndex) -> [f64; 2] {
        let [x, y] = self.cell_min(cell);
        let h = self.cell_side(cell) / 2.0;
        [x + h, y + h]
    }

    pub fn cell_area(&self, cell: CellIndex) -> f64 {
        self.cell_side(cell).powi(2)
    }

    /// Index into [`Quadtree::leaves`] of the finest cell `(fx, fy)`.
    pub fn leaf_index_at_fine(&self, fx: u32, fy: u32) -> usize {
        self.raster[(fy * self.resolution() + fx) as usize] as usize
    }

    /// Finest-grid coordinates of a point, wrapping periodic spaces.
    pub fn fine_cell_of(&self, point: [f64; 2]) -> Option<(u32, u32)> {
        let n = self.resolution();
        let fine = self.min_cell;
        let mut idx = [0u32; 2];
        for k in 0..2 {
            let mut t = (point[k] - self.bounds.min[k]) / fine;
            if self.space.is_periodic() {
                t = t.rem_euclid(f64::from(n));
            }
            if !(t >= 0.0 && t < f64::from(n)) {
                return None;
            }
            idx[k] = (t.floor() as u32).min(n - 1);
        }
        Some((idx[0], idx[1]))
    }

    pub fn leaf_index_at(&self, point: [f64; 2]) -> Option<usize> {
        self.fine_cell_of(point)
            .map(|(x, y)| self.leaf_index_at_fine(x, y))
    }

    pub fn leaf_at(&self, point: [f64; 2]) -> Option<&Leaf> {
        self.leaf_index_at(point).map(|i| &self.leaves[i])
    }

    /// Finest-grid neighbours across the four edges, wrapping periodic spaces.
    pub fn fine_neighbors(&self, fx: u32, fy: u32) -> impl Iterator<Item = (u32, u32)> {
        fine_neighbors(self.resolution(), self.space.is_periodic(), fx, fy)
    }

    pub fn label_area(&self, label: CellLabel) -> f64 {
        self.leaves
            .iter()
            .filter(|l| l.label == label)
            .map(|l| self.cell_area(l.cell))
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TreeDocument::from(self)).expect("tree serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DecompositionError> {
        let doc: TreeDocument =
            serde_json::from_str(text).map_err(|e| DecompositionError::Malformed(e.to_string()))?;
        doc.into_tree()
    }
}

pub(crate) fn fine_neighbors(
    n: u32,
    periodic: bool,
    fx: u32,
    fy: u32,
) -> impl Iterator<Item = (u32, u32)> {
    let step = move |v: u32, d: i64| -> Option<u32> {
        let t = i64::from(v) + d;
        if periodic {
            Some(t.rem_euclid(i64::from(n)) as u32)
        } else if t < 0 || t >= i64::from(n) {
            None
        } else {
            Some(t as u32)
        }
    };
    [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)]
        .into_iter()
        .filter_map(move |(dx, dy)| Some((step(fx, dx)?, step(fy, dy)?)))
}

fn rasterize(leaves: &[Leaf], max_depth: u8) -> Result<Vec<u32>, DecompositionError> {
    let n = 1u32 << max_depth;
    let mut raster = vec![u32::MAX; (n as usize) * (n as usize)];
    for (i, leaf) in leaves.iter().enumerate() {
        if leaf.cell.depth > max_depth {
            return Err(DecompositionError::Malformed(format!(
                "leaf `{}` is deeper than the minimum cell",
                leaf.cell.path()
            )));
        }
        let (x0, y0, w) = leaf.cell.span(max_depth);
        for y in y0..y0 + w {
            for x in x0..x0 + w {
                let slot = &mut raster[(y * n + x) as usize];
                if *slot != u32::MAX {
                    return Err(DecompositionError::Malformed(format!(
                        "leaf `{}` overlaps another leaf",
                        leaf.cell.path()
                    )));
                }
                *slot = i as u32;
            }
        }
    }
    if raster.contains(&u32::MAX) {
        return Err(DecompositionError::Malformed(
            "leaves do not tile the bounds".into(),
        ));
    }
    Ok(raster)
}

/// Relative sample positions: centre, four corners, then stratified interior points.
pub(crate) fn sample_offsets(count: usize) -> Vec<[f64; 2]> {
    let mut out = vec![[0.5, 0.5], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
    let interior = count.saturating_sub(5);
    if interior > 0 {
        let m = (interior as f64).sqrt().ceil() as usize;
        let strata = m * m;
        for k in 0..interior {
            let s = k * strata / interior;
            let (i, j) = (s % m, s / m);
            out.push([(i as f64 + 0.5) / m as f64, (j as f64 + 0.5) / m as f64]);
        }
    }
    out
}

/// Label for a mixed cell that cannot be refined further; never FREE.
fn conservative_label(samples: &[Sample]) -> CellLabel {
    let has = |pred: fn(&Sample) -> bool| samples.iter().any(pred);
    if has(|s| matches!(s, Sample::Parallel | Sample::Unreachable(Boundary::Parallel))) {
        CellLabel::ParallelSingular
    } else if has(|s| matches!(s, Sample::Serial | Sample::Unreachable(Boundary::Serial))) {
        CellLabel::SerialSingular
    } else {
        CellLabel::Collision
    }
}

struct Builder<'a> {
    scene: &'a Scene,
    space: Space,
    bounds: Bounds,
    mode: WorkingMode,
    det_sign: Sign,
    max_depth: u8,
    base_offsets: Vec<[f64; 2]>,
    dense_offsets: Vec<[f64; 2]>,
}

impl Builder<'_> {
    fn samples(&self, cell: CellIndex, offsets: &[[f64; 2]]) -> Vec<Sample> {
        let side = self.bounds.side / f64::from(1u32 << cell.depth);
        let x0 = self.bounds.min[0] + side * f64::from(cell.ix);
        let y0 = self.bounds.min[1] + side * f64::from(cell.iy);
        offsets
            .iter()
            .map(|o| {
                let point = [x0 + o[0] * side, y0 + o[1] * side];
                sample_at(self.scene, self.space, point, self.mode, self.det_sign)
            })
            .collect()
    }

    fn build(&self, cell: CellIndex) -> Vec<Leaf> {
        let samples = self.samples(cell, &self.base_offsets);
        let first = samples[0];
        let center = first.label();
        if cell.depth >= self.max_depth {
            let label = if samples.iter().all(|s| s.label() == center) {
                center
            } else {
                conservative_label(&samples)
            };
            return vec![Leaf {
                cell,
                label,
                center,
            }];
        }
        // Unreachable samples on different sides of a singular boundary still
        // split the cell, and sparse agreement is confirmed at enrichment density.
        let uniform = |set: &[Sample]| set.iter().all(|s| *s == first);
        if uniform(&samples) && uniform(&self.samples(cell, &self.dense_offsets)) {
            return vec![Leaf {
                cell,
                label: center,
                center,
            }];
        }
        self.subdivide(cell)
    }

    fn subdivide(&self, cell: CellIndex) -> Vec<Leaf> {
        let children = cell.children();
        if cell.depth < PARALLEL_DEPTH {
            children
                .par_iter()
                .map(|&c| self.build(c))
                .collect::<Vec<_>>()
                .into_iter()
                .flatten()
                .collect()
        } else {
            children.iter().flat_map(|&c| self.build(c)).collect()
        }
    }

    /// Outcome of re-sampling a FREE leaf at enrichment density.
    fn enrich(&self, leaf: Leaf) -> Option<Vec<Leaf>> {
        let samples = self.samples(leaf.cell, &self.dense_offsets);
        if samples.iter().all(|s| *s == Sample::Free) {
            return None;
        }
        if leaf.cell.depth >= self.max_depth {
            return Some(vec![Leaf {
                label: conservative_label(&samples),
                ..leaf
            }]);
        }
        Some(self.subdivide(leaf.cell))
    }
}

/// Adaptive decomposition of one sheet over a square region of `space`.
///
/// Cells are sampled at the centre, the four corners and
/// `samples_per_cell - 5` stratified interior points. Cells above `min_cell`
/// become leaves only if they are also uniform at four times that density;
/// mixed cells are split down to `min_cell`, where they take a
/// conservative non-FREE label. FREE leaves bordering a non-FREE leaf are
/// then re-sampled at four times the density; a hit splits the leaf (or
/// demotes it at `min_cell`) and the pass repeats until nothing changes.
/// Finally FREE components narrower than two minimum cells are demoted.
pub fn build_quadtree(
    scene: &Scene,
    space: Space,
    bounds: Bounds,
    mode: WorkingMode,
    det_sign: Sign,
    params: BuildParams,
) -> Result<Quadtree, DecompositionError> {
    if params.samples_per_cell < 5 {
        return Err(DecompositionError::TooFewSamples(params.samples_per_cell));
    }
    if !(bounds.side.is_finite() && bounds.side > 0.0 && bounds.min.iter().all(|v| v.is_finite())) {
        return Err(DecompositionError::NotPowerOfTwo {
            side: bounds.side,
            min_cell: params.min_cell,
        });
    }
    if space == Space::JointSpace {
        let full = Bounds::joint_space();
        if bounds.min != full.min || (bounds.side - full.side).abs() > 1e-12 {
            return Err(DecompositionError::BadJointBounds);
        }
    }
    let max_depth = bounds.depth_for(params.min_cell)?;
    let builder = Builder {
        scene,
        space,
        bounds,
        mode,
        det_sign,
        max_depth,
        base_offsets: sample_offsets(params.samples_per_cell),
        dense_offsets: sample_offsets(ENRICHMENT_FACTOR * params.samples_per_cell),
    };
    let mut leaves = builder.build(CellIndex::ROOT);
    let mut enriched: HashSet<CellIndex> = HashSet::new();
    loop {
        let tree = Quadtree::assemble(space, bounds, mode, det_sign, params.min_cell, max_depth, leaves)?;
        let candidates: Vec<usize> = tree
            .leaves
            .iter()
            .enumerate()
            .filter(|(_, l)| l.label == CellLabel::Free && !enriched.contains(&l.cell))
            .filter(|(i, l)| borders_non_free(&tree, *i, l.cell))
            .map(|(i, _)| i)
            .collect();
        if candidates.is_empty() {
            return demote_unresolved(tree);
        }
        let outcomes: Vec<(usize, Option<Vec<Leaf>>)> = candidates
            .par_iter()
            .map(|&i| (i, builder.enrich(tree.leaves[i])))
            .collect();
        let mut replaced: Vec<Option<Vec<Leaf>>> = vec![None; tree.leaves.len()];
        for (i, outcome) in outcomes {
            match outcome {
                None => {
                    enriched.insert(tree.leaves[i].cell);
                }
                Some(new) => replaced[i] = Some(new),
            }
        }
        leaves = tree
            .leaves
            .iter()
            .zip(replaced)
            .flat_map(|(leaf, r)| r.unwrap_or_else(|| vec![*leaf]))
            .collect();
    }
}

/// Demote FREE components too thin to hold a 2x2 block of minimum cells.
///
/// They are slivers or tips cut off from a larger region by conservative
/// labelling at `min_cell`; each takes the most common label among its
/// non-FREE neighbours.
fn demote_unresolved(tree: Quadtree) -> Result<Quadtree, DecompositionError> {
    let n = tree.resolution();
    let periodic = tree.space.is_periodic();
    let free = |x: u32, y: u32| tree.leaves[tree.leaf_index_at_fine(x, y)].label == CellLabel::Free;
    let wrap = |v: u32| if v + 1 < n { Some(v + 1) } else if periodic { Some(0) } else { None };
    let block_at = |x: u32, y: u32| match (wrap(x), wrap(y)) {
        (Some(x1), Some(y1)) => free(x, y) && free(x1, y) && free(x, y1) && free(x1, y1),
        _ => false,
    };
    let mut seen = vec![false; (n as usize) * (n as usize)];
    let mut demoted: Vec<Option<CellLabel>> = vec![None; tree.leaves.len()];
    for sy in 0..n {
        for sx in 0..n {
            if seen[(sy * n + sx) as usize] || !free(sx, sy) {
                continue;
            }
            let mut stack = vec![(sx, sy)];
            seen[(sy * n + sx) as usize] = true;
            let mut members = Vec::new();
            let mut resolved = false;
            let mut votes = [0usize; CellLabel::ALL.len()];
            while let Some((x, y)) = stack.pop() {
                members.push(tree.leaf_index_at_fine(x, y));
                resolved |= block_at(x, y);
                for (nx, ny) in tree.fine_neighbors(x, y) {
                    let slot = (ny * n + nx) as usize;
                    if free(nx, ny) {
                        if !seen[slot] {
                            seen[slot] = true;
                            stack.push((nx, ny));
                        }
                    } else {
                        let label = tree.leaves[tree.leaf_index_at_fine(nx, ny)].label;
                        votes[CellLabel::ALL.iter().position(|&l| l == label).unwrap_or(0)] += 1;
                    }
                }
            }
            if !resolved {
                let best = (0..votes.len()).max_by_key(|&k| (votes[k], std::cmp::Reverse(k))).unwrap_or(0);
                let label = if votes[best] == 0 { CellLabel::Collision } else { CellLabel::ALL[best] };
                for i in members {
                    demoted[i] = Some(label);
                }
            }
        }
    }
    if demoted.iter().all(Option::is_none) {
        return Ok(tree);
    }
    let leaves = tree
        .leaves
        .iter()
        .zip(demoted)
        .map(|(leaf, d)| Leaf {
            label: d.unwrap_or(leaf.label),
            ..*leaf
        })
        .collect();
    Quadtree::assemble(tree.space, tree.bounds, tree.mode, tree.det_sign, tree.min_cell, tree.max_depth, leaves)
}

fn borders_non_free(tree: &Quadtree, index: usize, cell: CellIndex) -> bool {
    let (x0, y0, w) = cell.span(tree.max_depth);
    let edge = (0..w)
        .flat_map(|k| [(x0 + k, y0), (x0 + k, y0 + w - 1), (x0, y0 + k), (x0 + w - 1, y0 + k)]);
    edge.flat_map(|(x, y)| tree.fine_neighbors(x, y).collect::<Vec<_>>())
        .map(|(x, y)| tree.leaf_index_at_fine(x, y))
        .any(|j| j != index && tree.leaves[j].label != CellLabel::Free)
}

#[derive(Serialize, Deserialize)]
struct NodeDocument {
    path: String,
    label: CellLabel,
    center: CellLabel,
}

#[derive(Serialize, Deserialize)]
struct TreeDocument {
    space: Space,
    bounds: Bounds,
    mode: WorkingMode,
    det_sign: Sign,
    min_cell: f64,
    nodes: Vec<NodeDocument>,
}

impl From<&Quadtree> for TreeDocument {
    fn from(t: &Quadtree) -> Self {
        Self {
            space: t.space,
            bounds: t.bounds,
            mode: t.mode,
            det_sign: t.det_sign,
            min_cell: t.min_cell,
            nodes: t
                .leaves
                .iter()
                .map(|l| NodeDocument {
                    path: l.cell.path(),
                    label: l.label,
                    center: l.center,
                })
                .collect(),
        }
    }
}

impl TreeDocument {
    fn into_tree(self) -> Result<Quadtree, DecompositionError> {
        let max_depth = self.bounds.depth_for(self.min_cell)?;
        let leaves = self
            .nodes
            .into_iter()
            .map(|n| {
                let cell = CellIndex::from_path(&n.path)
                    .ok_or_else(|| DecompositionError::Malformed(format!("bad path `{}`", n.path)))?;
                Ok(Leaf {
                    cell,
                    label: n.label,
                    center: n.center,
                })
            })
            .collect::<Result<Vec<_>, DecompositionError>>()?;
        Quadtree::assemble(
            self.space,
            self.bounds,
            self.mode,
            self.det_sign,
            self.min_cell,
            max_depth,
            leaves,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ObstaclePolygon, Point2};
    use crate::kinematics::MechanismGeometry;

    const PM: WorkingMode = WorkingMode::new(Sign::Positive, Sign::Negative);

    #[test]
    fn paths_round_trip() {
        let c = CellIndex {
            depth: 3,
            ix: 5,
            iy: 2,
        };
        assert_eq!(c.path(), "121");
        assert_eq!(CellIndex::from_path("121"), Some(c));
        assert_eq!(CellIndex::from_path(""), Some(CellIndex::ROOT));
        assert_eq!(CellIndex::from_path("4"), None);
    }

    #[test]
    fn offsets_are_stratified() {
        let o = sample_offsets(9);
        assert_eq!(o.len(), 9);
        assert_eq!(&o[5..], &[[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]]);
        let dense = sample_offsets(36);
        assert_eq!(dense.len(), 36);
        assert!(dense.iter().all(|p| p.iter().all(|v| (0.0..=1.0).contains(v))));
    }

    #[test]
    fn rejects_bad_granularity() {
        let scene = Scene::obstacle_free(MechanismGeometry::reference());
        let err = build_quadtree(
            &scene,
            Space::Workspace,
            Bounds::new([-13.0, -13.0], 26.0),
            PM,
            Sign::Negative,
            BuildParams::new(0.3),
        );
        assert!(matches!(err, Err(DecompositionError::NotPowerOfTwo { .. })));
        let err = build_quadtree(
            &scene,
            Space::JointSpace,
            Bounds::new([-1.0, 0.0], std::f64::consts::TAU),
            PM,
            Sign::Negative,
            BuildParams::new(std::f64::consts::TAU / 8.0),
        );
        assert_eq!(err, Err(DecompositionError::BadJointBounds));
    }

    #[test]
    fn covering_obstacle_leaves_nothing_free() {
        // sliver-free geometry: legs reach everywhere, the obstacle swallows all
        let g = MechanismGeometry::with_lengths(1.0, 3.0, 3.0, 3.0, 3.0).unwrap();
        let wall = ObstaclePolygon::square("wall", Point2::new(-100.0, -100.0), 200.0).unwrap();
        let scene = Scene::new(g, vec![wall]);
        for sign in Sign::BOTH {
            let t = build_quadtree(
                &scene,
                Space::JointSpace,
                Bounds::joint_space(),
                WorkingMode::ALL[0],
                sign,
                BuildParams::new(std::f64::consts::TAU / 64.0),
            )
            .unwrap();
            assert!(t.leaves().iter().all(|l| l.label != CellLabel::Free));
        }
    }

    #[test]
    fn json_round_trip_small_tree() {
        let scene = Scene::obstacle_free(MechanismGeometry::reference());
        let t = build_quadtree(
            &scene,
            Space::Workspace,
            Bounds::new([-13.0, -13.0], 26.0),
            PM,
            Sign::Negative,
            BuildParams::new(26.0 / 32.0),
        )
        .unwrap();
        let back = Quadtree::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        assert!(Quadtree::from_json("{}").is_err());
    }
}
