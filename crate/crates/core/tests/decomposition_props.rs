use std::collections::BTreeMap;
use std::sync::OnceLock;

use proptest::prelude::*;

use mvkit::decomposition::{
    build_quadtree, catalog_mode, classify_sheet, extract_aspects, project_aspect, project_grid, AspectMap, Bounds,
    BuildParams, CellLabel, GridSpec, Quadtree, Scene, Space,
};
use mvkit::kinematics::{MechanismGeometry, Sign, WorkingMode};

const MIN_CELL: f64 = 13.0 / 128.0;

fn scene() -> &'static Scene {
    static SCENE: OnceLock<Scene> = OnceLock::new();
    SCENE.get_or_init(|| Scene::obstacle_free(MechanismGeometry::reference()))
}

fn build(mode: WorkingMode, sign: Sign) -> Quadtree {
    let bounds = Bounds::default_workspace(&scene().geometry, MIN_CELL);
    build_quadtree(scene(), Space::Workspace, bounds, mode, sign, BuildParams::new(MIN_CELL)).unwrap()
}

/// All eight sheets keyed by (catalog number, det sign).
fn sheets() -> &'static BTreeMap<(usize, Sign), AspectMap> {
    static SHEETS: OnceLock<BTreeMap<(usize, Sign), AspectMap>> = OnceLock::new();
    SHEETS.get_or_init(|| {
        let mut out = BTreeMap::new();
        for sign in Sign::BOTH {
            for n in 1..=4 {
                out.insert((n, sign), AspectMap::new(build(catalog_mode(n, sign).unwrap(), sign)));
            }
        }
        out
    })
}

fn free_fine(tree: &Quadtree, fx: u32, fy: u32) -> bool {
    tree.leaves()[tree.leaf_index_at_fine(fx, fy)].label == CellLabel::Free
}

/// Component id of every FREE fine cell, by flood fill over edge neighbours.
fn flood(tree: &Quadtree) -> Vec<Option<usize>> {
    let n = tree.resolution();
    let mut comp = vec![None; (n * n) as usize];
    let mut next = 0;
    for start in 0..n * n {
        let (sx, sy) = (start % n, start / n);
        if comp[start as usize].is_some() || !free_fine(tree, sx, sy) {
            continue;
        }
        let mut stack = vec![(sx, sy)];
        comp[start as usize] = Some(next);
        while let Some((x, y)) = stack.pop() {
            let around = [(x.wrapping_sub(1), y), (x + 1, y), (x, y.wrapping_sub(1)), (x, y + 1)];
            for (nx, ny) in around {
                if nx >= n || ny >= n {
                    continue;
                }
                let k = (ny * n + nx) as usize;
                if comp[k].is_none() && free_fine(tree, nx, ny) {
                    comp[k] = Some(next);
                    stack.push((nx, ny));
                }
            }
        }
        next += 1;
    }
    comp
}

#[test]
fn leaves_tile_and_are_never_mixed() {
    for map in sheets().values() {
        let tree = map.tree();
        let area: f64 = tree.leaves().iter().map(|l| tree.cell_area(l.cell)).sum();
        assert!((area - tree.bounds.side * tree.bounds.side).abs() < 1e-9);
        assert!(tree.leaves().iter().all(|l| l.label != CellLabel::Mixed));
        for (fx, fy) in [(0, 0), (tree.resolution() - 1, 7)] {
            assert_eq!(tree.fine_neighbors(fx, fy).count(), if fx == 0 { 2 } else { 3 });
        }
        for a in map.aspects() {
            assert!(a.area > 0.0);
        }
    }
}

#[test]
fn free_leaves_are_conservative() {
    let mut rng_state = 0x2545_f491_4f6c_dd1du64;
    let mut uniform = || {
        // xorshift keeps the spot check reproducible
        rng_state ^= rng_state << 13;
        rng_state ^= rng_state >> 7;
        rng_state ^= rng_state << 17;
        (rng_state >> 11) as f64 / (1u64 << 53) as f64
    };
    let (mut checked, mut violations) = (0, Vec::new());
    let maps: Vec<_> = sheets().values().collect();
    while checked < 10_000 {
        let map = maps[checked % maps.len()];
        let tree = map.tree();
        let free: Vec<_> = tree.leaves().iter().filter(|l| l.label == CellLabel::Free).collect();
        let leaf = free[(uniform() * free.len() as f64) as usize];
        let [x0, y0] = tree.cell_min(leaf.cell);
        let side = tree.cell_side(leaf.cell);
        let (u, v) = (uniform(), uniform());
        let point = [x0 + u * side, y0 + v * side];
        checked += 1;
        if classify_sheet(scene(), Space::Workspace, point, tree.mode, tree.det_sign) != CellLabel::Free {
            // enrichment lattice is 6 x 6 per leaf
            let edge = u.min(1.0 - u).min(v).min(1.0 - v) * side;
            violations.push((point, edge, side / 6.0));
        }
    }
    for (point, edge, spacing) in &violations {
        assert!(edge <= spacing, "non-free point {point:?} sits {edge} inside a free leaf");
    }
}

#[test]
fn aspects_of_one_sheet_are_separated() {
    let map = &sheets()[&(1, Sign::Positive)];
    let tree = map.tree();
    let aspects = map.aspects();
    assert!(aspects.len() >= 2);
    let step = MIN_CELL / 4.0;
    for (i, a) in aspects.iter().enumerate() {
        for b in &aspects[i + 1..] {
            for ca in a.cells.iter().step_by(a.cells.len().div_ceil(25)) {
                for cb in b.cells.iter().step_by(b.cells.len().div_ceil(25)) {
                    let (pa, pb) = (tree.cell_center(*ca), tree.cell_center(*cb));
                    let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
                    let n = (len / step).ceil() as usize;
                    let blocked = (0..=n).any(|k| {
                        let t = k as f64 / n as f64;
                        let p = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                        tree.leaf_at(p).is_none_or(|l| l.label != CellLabel::Free)
                    });
                    assert!(blocked, "{pa:?} -> {pb:?} stays free");
                }
            }
        }
    }
}

#[test]
fn mirror_sheets_have_mirrored_free_sets() {
    for n in 1..=4 {
        let plus = sheets()[&(n, Sign::Positive)].tree();
        let minus = sheets()[&(n, Sign::Negative)].tree();
        assert_eq!(minus.mode, plus.mode.mirrored());
        let res = plus.resolution();
        assert_eq!(plus.bounds.min[1], -plus.bounds.side / 2.0, "bounds must straddle the base line");
        for fy in 0..res {
            for fx in 0..res {
                let a = free_fine(plus, fx, fy);
                let b = free_fine(minus, fx, res - 1 - fy);
                if a != b {
                    // a mismatch has to touch the FREE boundary of both sheets
                    let near = |t: &Quadtree, x: u32, y: u32, free: bool| {
                        t.fine_neighbors(x, y).any(|(nx, ny)| free_fine(t, nx, ny) != free)
                    };
                    assert!(
                        near(plus, fx, fy, a) && near(minus, fx, res - 1 - fy, b),
                        "catalog {n}: fine cell ({fx}, {fy}) differs from its mirror"
                    );
                }
            }
        }
    }
}

#[test]
fn build_is_deterministic_across_thread_counts() {
    let mode = catalog_mode(2, Sign::Positive).unwrap();
    let reference = build(mode, Sign::Positive);
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| build(mode, Sign::Positive));
    assert_eq!(reference, single);
    assert_eq!(reference.to_json(), build(mode, Sign::Positive).to_json());
}

#[test]
fn aspect_projections_round_trip() {
    for ((n, sign), map) in sheets() {
        let tree = map.tree();
        for aspect in map.aspects() {
            let original = aspect.to_grid(tree);
            let projected = project_aspect(scene(), tree, aspect, tree.bounds);
            let q = projected.projection.expect("projection filled");
            assert_eq!(q.spec.space, Space::JointSpace);
            assert_eq!(q.component_count(), 1, "catalog {n}{sign} aspect {} splits in Q", aspect.id.serial);
            let back = project_grid(scene(), &q, tree.mode, tree.det_sign, GridSpec::of_tree(tree));
            let covered = original.overlap_area(&back) / original.area();
            assert!(covered >= 0.99, "catalog {n}{sign} aspect {}: {covered}", aspect.id.serial);
        }
    }
    assert!(extract_aspects(sheets()[&(1, Sign::Positive)].tree()).len() == 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn locate_matches_components(
        key in 0usize..8,
        pairs in prop::collection::vec(((0.0..1.0f64, 0.0..1.0f64), (0.0..1.0f64, 0.0..1.0f64)), 32),
    ) {
        let (&(_, _), map) = sheets().iter().nth(key).unwrap();
        let tree = map.tree();
        let comp = flood(tree);
        let at = |(u, v): (f64, f64)| {
            let p = [tree.bounds.min[0] + u * tree.bounds.side, tree.bounds.min[1] + v * tree.bounds.side];
            let (fx, fy) = tree.fine_cell_of(p).unwrap();
            (map.locate(p), comp[(fy * tree.resolution() + fx) as usize])
        };
        for (a, b) in pairs {
            let ((la, ca), (lb, cb)) = (at(a), at(b));
            prop_assert_eq!(la.is_ok(), ca.is_some());
            prop_assert_eq!(lb.is_ok(), cb.is_some());
            if let (Ok(x), Ok(y)) = (la, lb) {
                prop_assert_eq!(x == y, ca == cb);
            }
        }
    }
}
