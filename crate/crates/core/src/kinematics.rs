//! Five-bar RR-RRR kinematics.
//!
//! Leg `i` is the chain `a_i -> b_i -> p`: a proximal link of length
//! `L1`/`L2` actuated at the base anchor `a_i`, and a distal link of length
//! `L3`/`L4` ending at the platform revolute `p`. Joint angles are measured
//! counterclockwise from +x at the anchor.
//!
//! Differentiating the closure equations `|p - b_i|^2 = L_{i+2}^2` gives the
//! velocity model `A t + B qdot = 0` with
//!
//! * row `i` of `A` equal to `(p - b_i)^T`, and
//! * `B` diagonal, `B_ii = L_i [(p - b_i)_x sin θ_i - (p - b_i)_y cos θ_i]`.
//!
//! `det A = 0` marks parallel singularities (direct-kinematic branches meet),
//! `B_ii = 0` serial ones (leg `i` stretched or folded).

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{circle_circle_intersection, CircleIntersection, Point2, DEFAULT_TOL};

/// Closure tolerance for a [`MechanismConfiguration`].
pub const CLOSURE_TOL: f64 = 1e-7;
/// Relative singularity threshold; multiplied by the squared largest length.
pub const SINGULARITY_REL: f64 = 1e-8;
/// Allowed mismatch between `|a2 - a1|` and `L0`.
pub const BASE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("{field} must be a finite length > 0, got {value}")]
    BadLength { field: &'static str, value: f64 },
    #[error("{field} must be finite and >= 0, got {value}")]
    BadRadius { field: &'static str, value: f64 },
    #[error("|a2 - a1| = {distance} differs from L0 = {l0}")]
    GeometryInconsistent { distance: f64, l0: f64 },
    #[error("closure residual {residual:e} exceeds {CLOSURE_TOL:e}")]
    NotClosed { residual: f64 },
    #[error("parallel singularity: |det A| = {det_a:e} <= {threshold:e}")]
    ParallelSingular { det_a: f64, threshold: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Leg {
    One,
    Two,
}

impl Leg {
    pub const BOTH: [Leg; 2] = [Leg::One, Leg::Two];

    pub fn index(self) -> usize {
        match self {
            Leg::One => 0,
            Leg::Two => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismGeometry {
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub a1: Point2,
    pub a2: Point2,
    pub link_radius: f64,
    pub base_radius: f64,
    pub platform_radius: f64,
}

impl MechanismGeometry {
    /// Default body radius for links, base and platform.
    pub const DEFAULT_RADIUS: f64 = 0.1;

    /// Base frame `a1 = (0,0)`, `a2 = (l0, 0)`, default radii.
    pub fn with_lengths(l0: f64, l1: f64, l2: f64, l3: f64, l4: f64) -> Result<Self, KinematicsError> {
        let g = Self {
            l0,
            l1,
            l2,
            l3,
            l4,
            a1: Point2::ORIGIN,
            a2: Point2::try_new(l0, 0.0).map_err(|_| KinematicsError::BadLength { field: "l0", value: l0 })?,
            link_radius: Self::DEFAULT_RADIUS,
            base_radius: Self::DEFAULT_RADIUS,
            platform_radius: Self::DEFAULT_RADIUS,
        };
        g.validate()?;
        Ok(g)
    }

    /// The illustrative five-bar: `L0 = 8`, `L1 = L2 = 7`, `L3 = L4 = 5`.
    pub fn reference() -> Self {
        Self::with_lengths(8.0, 7.0, 7.0, 5.0, 5.0).expect("reference geometry is valid")
    }

    pub fn with_radii(mut self, radius: f64) -> Self {
        self.link_radius = radius;
        self.base_radius = radius;
        self.platform_radius = radius;
        self
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        for (field, value) in [
            ("l0", self.l0),
            ("l1", self.l1),
            ("l2", self.l2),
            ("l3", self.l3),
            ("l4", self.l4),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(KinematicsError::BadLength { field, value });
            }
        }
        for (field, value) in [
            ("link_radius", self.link_radius),
            ("base_radius", self.base_radius),
            ("platform_radius", self.platform_radius),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(KinematicsError::BadRadius { field, value });
            }
        }
        let distance = self.a1.distance(self.a2);
        if (distance - self.l0).abs() > BASE_TOL {
            return Err(KinematicsError::GeometryInconsistent {
                distance,
                l0: self.l0,
            });
        }
        Ok(())
    }

    pub fn scale(&self) -> f64 {
        [self.l0, self.l1, self.l2, self.l3, self.l4]
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Threshold on `|det A|` and `|B_ii|` below which a configuration is singular.
    pub fn singularity_threshold(&self) -> f64 {
        SINGULARITY_REL * self.scale() * self.scale()
    }

    pub fn anchor(&self, leg: Leg) -> Point2 {
        match leg {
            Leg::One => self.a1,
            Leg::Two => self.a2,
        }
    }

    pub fn proximal(&self, leg: Leg) -> f64 {
        match leg {
            Leg::One => self.l1,
            Leg::Two => self.l2,
        }
    }

    pub fn distal(&self, leg: Leg) -> f64 {
        match leg {
            Leg::One => self.l3,
            Leg::Two => self.l4,
        }
    }

    /// `[|L_i - L_{i+2}|, L_i + L_{i+2}]`: distances from `a_i` at which leg `i` closes.
    pub fn reach_annulus(&self, leg: Leg) -> (f64, f64) {
        let (l, ld) = (self.proximal(leg), self.distal(leg));
        ((l - ld).abs(), l + ld)
    }

    pub fn elbow(&self, leg: Leg, theta: f64) -> Point2 {
        self.anchor(leg) + Point2::from_polar(self.proximal(leg), theta)
    }
}

pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Smallest absolute difference between two angles on the circle.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Actuated joint angles, each normalized to `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointVector {
    theta1: f64,
    theta2: f64,
}

impl JointVector {
    pub fn new(theta1: f64, theta2: f64) -> Self {
        Self {
            theta1: normalize_angle(theta1),
            theta2: normalize_angle(theta2),
        }
    }

    pub fn from_degrees(theta1: f64, theta2: f64) -> Self {
        Self::new(theta1.to_radians(), theta2.to_radians())
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn theta2(&self) -> f64 {
        self.theta2
    }

    pub fn get(&self, leg: Leg) -> f64 {
        match leg {
            Leg::One => self.theta1,
            Leg::Two => self.theta2,
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.theta1, self.theta2]
    }

    /// Max per-joint distance on the circle.
    pub fn distance(&self, other: &JointVector) -> f64 {
        angle_distance(self.theta1, other.theta1).max(angle_distance(self.theta2, other.theta2))
    }
}

/// Position of the platform revolute `P`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseVector {
    pub p: Point2,
}

impl PoseVector {
    pub fn new(x: f64, y: f64) -> Self {
        Self {
            p: Point2::new(x, y),
        }
    }
}

impl From<Point2> for PoseVector {
    fn from(p: Point2) -> Self {
        Self { p }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Positive, Sign::Negative];

    /// `None` when `|value| <= threshold`.
    pub fn of(value: f64, threshold: f64) -> Option<Sign> {
        if value > threshold {
            Some(Sign::Positive)
        } else if value < -threshold {
            Some(Sign::Negative)
        } else {
            None
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Positive => '+',
            Sign::Negative => '-',
        }
    }

    pub fn parse(s: &str) -> Option<Sign> {
        match s {
            "+" | "pos" | "positive" => Some(Sign::Positive),
            "-" | "neg" | "negative" => Some(Sign::Negative),
            _ => None,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// Sign pattern of `(B11, B22)`; fixes the inverse-kinematic branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WorkingMode {
    pub s1: Sign,
    pub s2: Sign,
}

impl WorkingMode {
    /// Enumeration order: `(+,+)`, `(+,-)`, `(-,+)`, `(-,-)` are modes 1 to 4.
    pub const ALL: [WorkingMode; 4] = [
        WorkingMode::new(Sign::Positive, Sign::Positive),
        WorkingMode::new(Sign::Positive, Sign::Negative),
        WorkingMode::new(Sign::Negative, Sign::Positive),
        WorkingMode::new(Sign::Negative, Sign::Negative),
    ];

    pub const fn new(s1: Sign, s2: Sign) -> Self {
        Self { s1, s2 }
    }

    /// 1-based position in [`WorkingMode::ALL`].
    pub fn index(self) -> usize {
        WorkingMode::ALL.iter().position(|&m| m == self).unwrap() + 1
    }

    pub fn from_index(index: usize) -> Option<Self> {
        index.checked_sub(1).and_then(|i| WorkingMode::ALL.get(i).copied())
    }

    pub fn sign(self, leg: Leg) -> Sign {
        match leg {
            Leg::One => self.s1,
            Leg::Two => self.s2,
        }
    }

    /// Mode of the configuration reflected across the base axis: reflection
    /// reverses every `B_ii`.
    pub fn mirrored(self) -> Self {
        Self::new(self.s1.flipped(), self.s2.flipped())
    }
}

impl fmt::Display for WorkingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.s1, self.s2)
    }
}

/// A pose, its joint vector and the passive elbows that close both legs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MechanismConfiguration {
    pub x: PoseVector,
    pub q: JointVector,
    pub b1: Point2,
    pub b2: Point2,
}

impl MechanismConfiguration {
    /// Checks the closure residual of every link.
    pub fn new(g: &MechanismGeometry, x: PoseVector, q: JointVector) -> Result<Self, KinematicsError> {
        let c = Self::assemble(g, x, q);
        let residual = c.closure_error(g);
        if residual > CLOSURE_TOL {
            return Err(KinematicsError::NotClosed { residual });
        }
        Ok(c)
    }

    pub(crate) fn assemble(g: &MechanismGeometry, x: PoseVector, q: JointVector) -> Self {
        Self {
            x,
            q,
            b1: g.elbow(Leg::One, q.theta1),
            b2: g.elbow(Leg::Two, q.theta2),
        }
    }

    pub fn p(&self) -> Point2 {
        self.x.p
    }

    pub fn elbow(&self, leg: Leg) -> Point2 {
        match leg {
            Leg::One => self.b1,
            Leg::Two => self.b2,
        }
    }

    /// Largest link-length violation.
    pub fn closure_error(&self, g: &MechanismGeometry) -> f64 {
        Leg::BOTH
            .iter()
            .map(|&leg| {
                let b = self.elbow(leg);
                let prox = (b.distance(g.anchor(leg)) - g.proximal(leg)).abs();
                let dist = (self.p().distance(b) - g.distal(leg)).abs();
                prox.max(dist)
            })
            .fold(0.0, f64::max)
    }

    /// Reflection across the x axis (valid when the base lies on it).
    pub fn mirrored_x(&self) -> Self {
        Self {
            x: PoseVector::from(self.x.p.mirrored_x()),
            q: JointVector::new(-self.q.theta1, -self.q.theta2),
            b1: self.b1.mirrored_x(),
            b2: self.b2.mirrored_x(),
        }
    }
}

/// `F(X, q)`: `(|p - b1|^2 - L3^2, |p - b2|^2 - L4^2)`.
pub fn closure_residual(g: &MechanismGeometry, x: PoseVector, q: JointVector) -> [f64; 2] {
    let b1 = g.elbow(Leg::One, q.theta1);
    let b2 = g.elbow(Leg::Two, q.theta2);
    [
        (x.p - b1).norm_sq() - g.l3 * g.l3,
        (x.p - b2).norm_sq() - g.l4 * g.l4,
    ]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacobianPair {
    pub a: [[f64; 2]; 2],
    pub b: [[f64; 2]; 2],
    pub det_a: f64,
    pub det_b: f64,
}

impl JacobianPair {
    pub fn b_diag(&self) -> [f64; 2] {
        [self.b[0][0], self.b[1][1]]
    }
}

fn leg_b(g: &MechanismGeometry, leg: Leg, theta: f64, elbow: Point2, p: Point2) -> f64 {
    let w = p - elbow;
    let (s, c) = theta.sin_cos();
    g.proximal(leg) * (w.x * s - w.y * c)
}

pub fn jacobians(g: &MechanismGeometry, c: &MechanismConfiguration) -> JacobianPair {
    let w1 = c.p() - c.b1;
    let w2 = c.p() - c.b2;
    let b11 = leg_b(g, Leg::One, c.q.theta1, c.b1, c.p());
    let b22 = leg_b(g, Leg::Two, c.q.theta2, c.b2, c.p());
    JacobianPair {
        a: [[w1.x, w1.y], [w2.x, w2.y]],
        b: [[b11, 0.0], [0.0, b22]],
        det_a: w1.cross(w2),
        det_b: b11 * b22,
    }
}

/// Working-mode membership, or `None` at a serial singularity.
pub fn working_mode_of(g: &MechanismGeometry, jp: &JacobianPair) -> Option<WorkingMode> {
    let eps = g.singularity_threshold();
    let [b11, b22] = jp.b_diag();
    Some(WorkingMode::new(Sign::of(b11, eps)?, Sign::of(b22, eps)?))
}

/// `t = -A^{-1} B qdot`.
pub fn velocity_transfer(
    g: &MechanismGeometry,
    jp: &JacobianPair,
    qdot: [f64; 2],
) -> Result<[f64; 2], KinematicsError> {
    let threshold = g.singularity_threshold();
    if jp.det_a.abs() <= threshold {
        return Err(KinematicsError::ParallelSingular {
            det_a: jp.det_a,
            threshold,
        });
    }
    let rhs = [-jp.b[0][0] * qdot[0], -jp.b[1][1] * qdot[1]];
    let [[a11, a12], [a21, a22]] = jp.a;
    Ok([
        (a22 * rhs[0] - a12 * rhs[1]) / jp.det_a,
        (-a21 * rhs[0] + a11 * rhs[1]) / jp.det_a,
    ])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FkBranch {
    pub config: MechanismConfiguration,
    pub det_a: f64,
}

impl FkBranch {
    /// `None` at a tangency (the two assembly modes coincide).
    pub fn det_sign(&self, g: &MechanismGeometry) -> Option<Sign> {
        Sign::of(self.det_a, g.singularity_threshold())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ForwardSolution {
    /// Zero, one or two assembly modes.
    Branches(Vec<FkBranch>),
    /// Coincident elbows with equal distal lengths: a continuum of poses.
    Degenerate,
}

impl ForwardSolution {
    pub fn branches(&self) -> &[FkBranch] {
        match self {
            ForwardSolution::Branches(b) => b,
            ForwardSolution::Degenerate => &[],
        }
    }

    /// The assembly mode with the requested sign of `det A`.
    pub fn with_sign(&self, g: &MechanismGeometry, sign: Sign) -> Option<&FkBranch> {
        self.branches().iter().find(|b| b.det_sign(g) == Some(sign))
    }
}

pub fn forward_kinematics(g: &MechanismGeometry, q: JointVector) -> ForwardSolution {
    let b1 = g.elbow(Leg::One, q.theta1);
    let b2 = g.elbow(Leg::Two, q.theta2);
    match circle_circle_intersection(b1, g.l3, b2, g.l4, DEFAULT_TOL) {
        CircleIntersection::Concentric => ForwardSolution::Degenerate,
        hit => ForwardSolution::Branches(
            hit.points()
                .into_iter()
                .map(|p| {
                    let config = MechanismConfiguration {
                        x: PoseVector::from(p),
                        q,
                        b1,
                        b2,
                    };
                    FkBranch {
                        config,
                        det_a: (p - b1).cross(p - b2),
                    }
                })
                .collect(),
        ),
    }
}

/// Elbow solutions of one leg for a given platform position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LegSolutions {
    Unreachable,
    /// Stretched or folded leg: both elbows coincide.
    Singular(f64),
    Two(f64, f64),
}

pub fn leg_solutions(g: &MechanismGeometry, leg: Leg, p: Point2) -> LegSolutions {
    let v = p - g.anchor(leg);
    let d = v.norm();
    let (l, ld) = (g.proximal(leg), g.distal(leg));
    let (inner, outer) = g.reach_annulus(leg);
    let base = v.angle();
    if d <= DEFAULT_TOL {
        // Only closes when l == ld; then every elbow works.
        return if (l - ld).abs() <= DEFAULT_TOL {
            LegSolutions::Singular(0.0)
        } else {
            LegSolutions::Unreachable
        };
    }
    let stretched = LegSolutions::Singular(normalize_angle(base));
    let folded = LegSolutions::Singular(normalize_angle(if l >= ld { base } else { base + std::f64::consts::PI }));
    // Snap only from outside the annulus; inside, the B threshold decides.
    if d > outer {
        return if d - outer <= DEFAULT_TOL { stretched } else { LegSolutions::Unreachable };
    }
    if d < inner {
        return if inner - d <= DEFAULT_TOL { folded } else { LegSolutions::Unreachable };
    }
    let cos_alpha = ((d * d + l * l - ld * ld) / (2.0 * d * l)).clamp(-1.0, 1.0);
    let alpha = cos_alpha.acos();
    if alpha == 0.0 {
        return if d * 2.0 > inner + outer { stretched } else { folded };
    }
    LegSolutions::Two(normalize_angle(base + alpha), normalize_angle(base - alpha))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IkSolution {
    pub q: JointVector,
    /// `None` when a leg sits on a serial singularity.
    pub mode: Option<WorkingMode>,
    pub config: MechanismConfiguration,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InverseSolution {
    pub solutions: Vec<IkSolution>,
    /// At least one leg is stretched or folded, within the B threshold.
    pub serial_singular: bool,
}

impl InverseSolution {
    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn with_mode(&self, mode: WorkingMode) -> Option<&IkSolution> {
        self.solutions.iter().find(|s| s.mode == Some(mode))
    }
}

fn thetas(sol: LegSolutions) -> Vec<f64> {
    match sol {
        LegSolutions::Unreachable => Vec::new(),
        LegSolutions::Singular(t) => vec![t],
        LegSolutions::Two(a, b) => vec![a, b],
    }
}

pub fn inverse_kinematics(g: &MechanismGeometry, x: PoseVector) -> InverseSolution {
    let s1 = leg_solutions(g, Leg::One, x.p);
    let s2 = leg_solutions(g, Leg::Two, x.p);
    let serial_singular =
        matches!(s1, LegSolutions::Singular(_)) || matches!(s2, LegSolutions::Singular(_));
    let mut solutions = Vec::new();
    for &t1 in &thetas(s1) {
        for &t2 in &thetas(s2) {
            let q = JointVector::new(t1, t2);
            let config = MechanismConfiguration::assemble(g, x, q);
            let mode = working_mode_of(g, &jacobians(g, &config));
            solutions.push(IkSolution { q, mode, config });
        }
    }
    let serial_singular = serial_singular || solutions.iter().any(|s| s.mode.is_none());
    InverseSolution {
        solutions,
        serial_singular,
    }
}

/// Result of selecting the inverse-kinematic branch of one working mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModeBranch {
    Unreachable,
    SerialSingular,
    Regular(MechanismConfiguration, JacobianPair),
}

/// The unique configuration of `mode` above `p`, if any.
pub fn branch_for_mode(g: &MechanismGeometry, p: Point2, mode: WorkingMode) -> ModeBranch {
    let eps = g.singularity_threshold();
    let mut chosen = [0.0; 2];
    for leg in Leg::BOTH {
        let want = mode.sign(leg);
        let theta = match leg_solutions(g, leg, p) {
            LegSolutions::Unreachable => return ModeBranch::Unreachable,
            LegSolutions::Singular(_) => return ModeBranch::SerialSingular,
            LegSolutions::Two(ta, tb) => {
                let mut found = None;
                for t in [ta, tb] {
                    let b = leg_b(g, leg, t, g.elbow(leg, t), p);
                    match Sign::of(b, eps) {
                        None => return ModeBranch::SerialSingular,
                        Some(s) if s == want => found = Some(t),
                        Some(_) => {}
                    }
                }
                match found {
                    Some(t) => t,
                    None => return ModeBranch::SerialSingular,
                }
            }
        };
        chosen[leg.index()] = theta;
    }
    let config = MechanismConfiguration::assemble(g, PoseVector::from(p), JointVector::new(chosen[0], chosen[1]));
    let jp = jacobians(g, &config);
    ModeBranch::Regular(config, jp)
}

/// Elbow of `mode` for leg `leg` ignoring singularity thresholds; the
/// nearer-to-sign elbow is returned at a serial singularity.
pub fn loose_branch(g: &MechanismGeometry, p: Point2, mode: WorkingMode) -> Option<MechanismConfiguration> {
    let mut chosen = [0.0; 2];
    for leg in Leg::BOTH {
        let want = mode.sign(leg).as_f64();
        chosen[leg.index()] = match leg_solutions(g, leg, p) {
            LegSolutions::Unreachable => return None,
            LegSolutions::Singular(t) => t,
            LegSolutions::Two(ta, tb) => {
                let ba = leg_b(g, leg, ta, g.elbow(leg, ta), p) * want;
                let bb = leg_b(g, leg, tb, g.elbow(leg, tb), p) * want;
                if ba >= bb {
                    ta
                } else {
                    tb
                }
            }
        };
    }
    Some(MechanismConfiguration::assemble(
        g,
        PoseVector::from(p),
        JointVector::new(chosen[0], chosen[1]),
    ))
}
