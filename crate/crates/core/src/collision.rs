//! Manipulator volume and internal/external collision tests.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{
    capsule_capsule_intersects, capsule_polygon_intersects, Capsule2, ObstaclePolygon, Point2,
    Segment2, DEFAULT_TOL,
};
use crate::kinematics::{MechanismConfiguration, MechanismGeometry};

/// Joint-adjacent bodies are shortened by `JOINT_TRIM_FACTOR * (r1 + r2)` at
/// their shared end before testing. Two trimmed axes meeting at interior
/// angle `φ` still collide iff `φ <= 2 asin(1 / (2 * JOINT_TRIM_FACTOR))`,
/// about 5.7 degrees here, independent of the radii.
pub const JOINT_TRIM_FACTOR: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BodyLabel {
    Base,
    Leg1Proximal,
    Leg1Distal,
    Leg2Proximal,
    Leg2Distal,
    Platform,
}

impl BodyLabel {
    pub const LINKS: [BodyLabel; 4] = [
        BodyLabel::Leg1Proximal,
        BodyLabel::Leg1Distal,
        BodyLabel::Leg2Proximal,
        BodyLabel::Leg2Distal,
    ];

    pub const ALL: [BodyLabel; 6] = [
        BodyLabel::Base,
        BodyLabel::Leg1Proximal,
        BodyLabel::Leg1Distal,
        BodyLabel::Leg2Proximal,
        BodyLabel::Leg2Distal,
        BodyLabel::Platform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BodyLabel::Base => "base",
            BodyLabel::Leg1Proximal => "leg1-proximal",
            BodyLabel::Leg1Distal => "leg1-distal",
            BodyLabel::Leg2Proximal => "leg2-proximal",
            BodyLabel::Leg2Distal => "leg2-distal",
            BodyLabel::Platform => "platform",
        }
    }
}

impl fmt::Display for BodyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Base, four links and platform of the manipulator in one configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodySet {
    pub base: Capsule2,
    /// Leg-1 proximal, leg-1 distal, leg-2 proximal, leg-2 distal.
    pub links: [Capsule2; 4],
    pub platform: Capsule2,
}

impl BodySet {
    pub fn body(&self, label: BodyLabel) -> &Capsule2 {
        match label {
            BodyLabel::Base => &self.base,
            BodyLabel::Leg1Proximal => &self.links[0],
            BodyLabel::Leg1Distal => &self.links[1],
            BodyLabel::Leg2Proximal => &self.links[2],
            BodyLabel::Leg2Distal => &self.links[3],
            BodyLabel::Platform => &self.platform,
        }
    }

    pub fn bodies(&self) -> impl Iterator<Item = (BodyLabel, &Capsule2)> {
        BodyLabel::ALL.into_iter().map(move |l| (l, self.body(l)))
    }

    pub fn map_radii(&self, f: impl Fn(BodyLabel, f64) -> f64) -> BodySet {
        let mut out = *self;
        for label in BodyLabel::ALL {
            let body = match label {
                BodyLabel::Base => &mut out.base,
                BodyLabel::Leg1Proximal => &mut out.links[0],
                BodyLabel::Leg1Distal => &mut out.links[1],
                BodyLabel::Leg2Proximal => &mut out.links[2],
                BodyLabel::Leg2Distal => &mut out.links[3],
                BodyLabel::Platform => &mut out.platform,
            };
            body.radius = f(label, body.radius);
        }
        out
    }
}

fn capsule(a: Point2, b: Point2, r: f64) -> Capsule2 {
    Capsule2 {
        axis: Segment2::new(a, b),
        radius: r,
    }
}

pub fn body_set(g: &MechanismGeometry, c: &MechanismConfiguration) -> BodySet {
    let p = c.p();
    let r = g.link_radius;
    BodySet {
        base: capsule(g.a1, g.a2, g.base_radius),
        links: [
            capsule(g.a1, c.b1, r),
            capsule(c.b1, p, r),
            capsule(g.a2, c.b2, r),
            capsule(c.b2, p, r),
        ],
        platform: capsule(p, p, g.platform_radius),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Joint {
    /// Shared endpoint: `true` selects the axis end `b`, `false` selects `a`.
    Shared { first_at_b: bool, second_at_b: bool },
    /// A disc sitting on the joint of the attached link never collides with it.
    Skip,
}

/// Joint adjacency between two bodies, if any.
fn adjacency(first: BodyLabel, second: BodyLabel) -> Option<Joint> {
    use BodyLabel::*;
    let shared = |first_at_b, second_at_b| {
        Some(Joint::Shared {
            first_at_b,
            second_at_b,
        })
    };
    match (first, second) {
        // base axis runs a1 -> a2; proximal links start at their anchor
        (Leg1Proximal, Base) => shared(false, false),
        (Leg2Proximal, Base) => shared(false, true),
        (Leg1Proximal, Leg1Distal) | (Leg2Proximal, Leg2Distal) => shared(true, false),
        (Leg1Distal, Leg2Distal) => shared(true, true),
        (Leg1Distal, Platform) | (Leg2Distal, Platform) => Some(Joint::Skip),
        _ => None,
    }
}

/// Drop `length` from the chosen end of the axis; `None` if nothing remains.
fn trimmed(c: &Capsule2, at_b: bool, length: f64) -> Option<Segment2> {
    let (shared, other) = if at_b {
        (c.axis.b, c.axis.a)
    } else {
        (c.axis.a, c.axis.b)
    };
    let len = shared.distance(other);
    if len <= length {
        return None;
    }
    Some(Segment2::new(shared.lerp(other, length / len), other))
}

fn pair_collides(bs: &BodySet, first: BodyLabel, second: BodyLabel) -> bool {
    let (p, q) = (bs.body(first), bs.body(second));
    match adjacency(first, second) {
        None => capsule_capsule_intersects(p, q),
        Some(Joint::Skip) => false,
        Some(Joint::Shared {
            first_at_b,
            second_at_b,
        }) => {
            let trim = (JOINT_TRIM_FACTOR * (p.radius + q.radius)).max(DEFAULT_TOL);
            match (trimmed(p, first_at_b, trim), trimmed(q, second_at_b, trim)) {
                (Some(a), Some(b)) => capsule_capsule_intersects(
                    &Capsule2 {
                        axis: a,
                        radius: p.radius,
                    },
                    &Capsule2 {
                        axis: b,
                        radius: q.radius,
                    },
                ),
                _ => false,
            }
        }
    }
}

/// Candidate internal pairs: links x base, links x platform, links x links,
/// and the platform against the base.
pub fn internal_pairs() -> impl Iterator<Item = (BodyLabel, BodyLabel)> {
    let links = BodyLabel::LINKS;
    let with_base = links.into_iter().map(|l| (l, BodyLabel::Base));
    let with_platform = links.into_iter().map(|l| (l, BodyLabel::Platform));
    let between = (0..4).flat_map(move |i| ((i + 1)..4).map(move |j| (links[i], links[j])));
    with_base
        .chain(with_platform)
        .chain(between)
        .chain(std::iter::once((BodyLabel::Platform, BodyLabel::Base)))
}

pub fn internal_collisions(bs: &BodySet) -> BTreeSet<(BodyLabel, BodyLabel)> {
    internal_pairs()
        .filter(|&(a, b)| pair_collides(bs, a, b))
        .collect()
}

fn any_internal_collision(bs: &BodySet) -> bool {
    internal_pairs().any(|(a, b)| pair_collides(bs, a, b))
}

pub fn external_collisions(
    bs: &BodySet,
    obstacles: &[ObstaclePolygon],
) -> BTreeSet<(BodyLabel, String)> {
    let mut out = BTreeSet::new();
    for (label, body) in bs.bodies() {
        for obstacle in obstacles {
            if capsule_polygon_intersects(body, obstacle) {
                out.insert((label, obstacle.id.clone()));
            }
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub internal_pairs: BTreeSet<(BodyLabel, BodyLabel)>,
    pub external_pairs: BTreeSet<(BodyLabel, String)>,
}

impl CollisionReport {
    pub fn is_empty(&self) -> bool {
        self.internal_pairs.is_empty() && self.external_pairs.is_empty()
    }
}

/// Membership of the configuration in the collision-free space, with the
/// offending pairs.
pub fn is_collision_free(
    g: &MechanismGeometry,
    c: &MechanismConfiguration,
    obstacles: &[ObstaclePolygon],
) -> (bool, CollisionReport) {
    let bs = body_set(g, c);
    let report = CollisionReport {
        internal_pairs: internal_collisions(&bs),
        external_pairs: external_collisions(&bs, obstacles),
    };
    (report.is_empty(), report)
}

/// Early-exit variant of [`is_collision_free`] for bulk classification.
pub fn collides(g: &MechanismGeometry, c: &MechanismConfiguration, obstacles: &[ObstaclePolygon]) -> bool {
    let bs = body_set(g, c);
    any_internal_collision(&bs)
        || obstacles
            .iter()
            .any(|o| bs.bodies().any(|(_, body)| capsule_polygon_intersects(body, o)))
}
