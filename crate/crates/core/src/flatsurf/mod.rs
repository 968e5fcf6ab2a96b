//! Half-translation surfaces as horizontal-cylinder diagrams over exact
//! rationals.
//!
//! A surface is a list of flat cylinders plus a tiling of every boundary
//! circle by segments glued in pairs. Cylinder `j` is the rectangle
//! `[0, circ_j] × [0, height_j]` with its vertical edges identified; the
//! bottom circle is parametrized by `x` directly, the top circle is
//! attached after a rotation by `twist_j` (a vertical geodesic entering the
//! bottom at parameter `x` leaves the top at parameter `x - twist_j`).
//!
//! Gluing kinds follow the polygon-double picture: `Translation` matches
//! parameters in the same direction and always joins a bottom circle to a
//! top circle; `Fold` matches them in opposite directions (`d ↔ len-d`),
//! joins boundary arcs of the same side, and is how the two copies of a
//! doubled polygon meet along its edges. Cone points of angle `kπ` appear
//! at segment endpoints and are recovered by walking sectors around an
//! endpoint class; simple poles are `k = 1`, simple zeros `k = 3`.

mod build;
mod iso;
mod ops;

pub use build::{build_pillowcase, build_rect_marked, build_staircase, PillowDims, PillowKind, StaircaseSpec};
pub use iso::{is_isomorphic, normalized_presentation, twist_corrections};
pub use ops::{polydisk_act, rot, saddle_shear_candidates, shear_by, trace_vertical, ChainLink, CylinderDecomposition, NonPeriodic, Strip, UpDown, VerticalCylinder};

use crate::rational::Rat;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bottom,
    Top,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Bottom => Side::Top,
            Side::Top => Side::Bottom,
        }
    }
}

/// One boundary circle of one cylinder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CircleId {
    pub cyl: usize,
    pub side: Side,
}

impl CircleId {
    pub fn bottom(cyl: usize) -> CircleId {
        CircleId { cyl, side: Side::Bottom }
    }
    pub fn top(cyl: usize) -> CircleId {
        CircleId { cyl, side: Side::Top }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GluingKind {
    Translation,
    Fold,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub circle: CircleId,
    pub start: Rat,
    pub len: Rat,
    pub partner: usize,
    pub kind: GluingKind,
}

impl Segment {
    pub fn end(&self) -> Rat {
        &self.start + &self.len
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cylinder {
    pub circ: Rat,
    pub height: Rat,
    pub twist: Rat,
}

/// A point on a boundary circle, used for labels.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct PointRef {
    pub circle: CircleId,
    pub pos: Rat,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct FlatSurface {
    pub cylinders: Vec<Cylinder>,
    pub segments: Vec<Segment>,
    /// marked-point names attached to vertex classes via a representative
    pub labels: BTreeMap<String, PointRef>,
}

#[derive(Debug, Error)]
pub enum FlatError {
    #[error("invalid surface data: {0}")]
    Invalid(String),
    #[error("invalid constructor parameters: {0}")]
    InvalidSpec(String),
    #[error("cylinder index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("polydisk action requires Im λ > 0")]
    NonpositiveImaginaryPart,
    #[error("vertical foliation not recognized as periodic: {0}")]
    VerticalNotPeriodic(#[from] ops::NonPeriodic),
}

/// Stratum signature: cone angles `kπ` recorded as orders `k - 2`;
/// order-0 entries appear only for labeled (marked) regular points.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumSignature(pub Vec<i64>);

impl StratumSignature {
    pub fn sum(&self) -> i64 {
        self.0.iter().sum()
    }
}

/// One cone point: total angle `angle_pi × π` and every circle position
/// belonging to the class.
#[derive(Clone, Debug)]
pub struct VertexClass {
    pub angle_pi: usize,
    pub positions: BTreeSet<PointRef>,
    pub labels: Vec<String>,
}

impl FlatSurface {
    pub fn cyl(&self, j: usize) -> &Cylinder {
        &self.cylinders[j]
    }

    pub fn circumference(&self, circle: CircleId) -> &Rat {
        &self.cylinders[circle.cyl].circ
    }

    /// Doubled flat area `Σ circ_j · height_j` (the underlying polygon has
    /// half this area; circumferences are doubled edge widths).
    pub fn area_total(&self) -> Rat {
        self.cylinders
            .iter()
            .fold(Rat::zero(), |acc, c| acc + &c.circ * &c.height)
    }

    /// Segment indices on `circle`, sorted by start offset.
    pub fn segments_on(&self, circle: CircleId) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.segments.len())
            .filter(|&i| self.segments[i].circle == circle)
            .collect();
        v.sort_by(|&a, &b| self.segments[a].start.cmp(&self.segments[b].start));
        v
    }

    /// Structural validation: exact circle tilings, gluing involution,
    /// the side rule for gluing kinds, twist normalization, label
    /// attachment, and the sphere Gauss-Bonnet count.
    pub fn validate(&self) -> Result<(), FlatError> {
        let bad = |msg: String| Err(FlatError::Invalid(msg));
        if self.cylinders.is_empty() {
            return bad("no cylinders".into());
        }
        for (j, c) in self.cylinders.iter().enumerate() {
            if !c.circ.is_positive() || !c.height.is_positive() {
                return bad(format!("cylinder {j} must have positive circumference and height"));
            }
            if c.twist.is_negative() || c.twist >= c.circ {
                return bad(format!("cylinder {j} twist not reduced into [0, circumference)"));
            }
        }
        // tilings
        for j in 0..self.cylinders.len() {
            for side in [Side::Bottom, Side::Top] {
                let circle = CircleId { cyl: j, side };
                let ids = self.segments_on(circle);
                if ids.is_empty() {
                    return bad(format!("circle {circle:?} has no segments"));
                }
                let mut cursor = Rat::zero();
                for &i in &ids {
                    let seg = &self.segments[i];
                    if seg.start != cursor {
                        return bad(format!(
                            "circle {circle:?} not exactly tiled: gap or overlap at {cursor:?}"
                        ));
                    }
                    if !seg.len.is_positive() {
                        return bad(format!("segment {i} has nonpositive length"));
                    }
                    cursor = seg.end();
                }
                if &cursor != self.circumference(circle) {
                    return bad(format!(
                        "circle {circle:?} tiling sums to {cursor:?}, expected circumference"
                    ));
                }
            }
        }
        // gluing involution and the side rule
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.partner >= self.segments.len() {
                return bad(format!("segment {i} has dangling partner"));
            }
            if seg.partner == i {
                return bad(format!("segment {i} glued to itself"));
            }
            let mate = &self.segments[seg.partner];
            if mate.partner != i {
                return bad(format!("gluing of segment {i} is not an involution"));
            }
            if mate.len != seg.len {
                return bad(format!("glued segments {i} and {} differ in length", seg.partner));
            }
            if mate.kind != seg.kind {
                return bad(format!("glued segments {i} and {} disagree on kind", seg.partner));
            }
            let same_side = mate.circle.side == seg.circle.side;
            let fold = seg.kind == GluingKind::Fold;
            if same_side != fold {
                return bad(format!(
                    "segment {i}: folds join like sides, translations join bottom to top"
                ));
            }
        }
        // labels sit at segment endpoints
        for (name, at) in &self.labels {
            if !self.is_endpoint(at) {
                return bad(format!("label {name} not at a segment endpoint"));
            }
        }
        // Gauss-Bonnet on the six-punctured sphere
        let classes = self.vertex_classes();
        let sum: i64 = classes.iter().map(|c| c.angle_pi as i64 - 2).sum();
        if sum != -4 {
            return bad(format!("cone angles sum to {sum}π-excess, expected -4 (sphere)"));
        }
        Ok(())
    }

    fn is_endpoint(&self, at: &PointRef) -> bool {
        self.segments.iter().any(|s| {
            s.circle == at.circle && (s.start == at.pos || s.end() == at.pos)
        })
    }

    /// All segment-endpoint positions on `circle`, sorted.
    pub fn endpoints_on(&self, circle: CircleId) -> Vec<Rat> {
        let mut set = BTreeSet::new();
        for s in &self.segments {
            if s.circle == circle {
                set.insert(s.start.clone());
                let c = self.circumference(circle);
                set.insert(s.end().rem_euclid(c));
            }
        }
        set.into_iter().collect()
    }

    /// Walk the sectors around every segment-endpoint class and return the
    /// cone points with their total angles.
    pub fn vertex_classes(&self) -> Vec<VertexClass> {
        let tokens: Vec<Token> = (0..self.segments.len())
            .flat_map(|i| [Token { seg: i, end: End::Lo }, Token { seg: i, end: End::Hi }])
            .collect();
        let mut claimed: BTreeSet<PointRef> = BTreeSet::new();
        let mut classes = Vec::new();
        for &t0 in &tokens {
            let p0 = self.token_pos(t0);
            if claimed.contains(&p0) {
                continue;
            }
            let mut positions = BTreeSet::new();
            let mut angle = 0usize;
            let mut t = t0;
            loop {
                positions.insert(self.token_pos(t));
                t = self.adjacent(self.glue_token(t));
                angle += 1;
                if t == t0 {
                    break;
                }
            }
            for p in &positions {
                claimed.insert(p.clone());
            }
            let labels = self
                .labels
                .iter()
                .filter(|(_, at)| positions.contains(at))
                .map(|(name, _)| name.clone())
                .collect();
            classes.push(VertexClass { angle_pi: angle, positions, labels });
        }
        classes
    }

    /// Index of the vertex class containing `at`, if any.
    pub fn class_of<'a>(&self, classes: &'a [VertexClass], at: &PointRef) -> Option<usize> {
        classes.iter().position(|c| c.positions.contains(at))
    }

    /// Cone-angle orders `k - 2`, descending; order 0 kept only when the
    /// class carries a marked-point label.
    pub fn stratum(&self) -> StratumSignature {
        let mut orders: Vec<i64> = self
            .vertex_classes()
            .iter()
            .filter(|c| c.angle_pi != 2 || !c.labels.is_empty())
            .map(|c| c.angle_pi as i64 - 2)
            .collect();
        orders.sort_unstable_by(|a, b| b.cmp(a));
        StratumSignature(orders)
    }

    fn token_pos(&self, t: Token) -> PointRef {
        let seg = &self.segments[t.seg];
        let c = self.circumference(seg.circle);
        let pos = match t.end {
            End::Lo => seg.start.clone(),
            End::Hi => seg.end().rem_euclid(c),
        };
        PointRef { circle: seg.circle, pos }
    }

    /// Cross the gluing: the matching endpoint of the partner segment.
    fn glue_token(&self, t: Token) -> Token {
        let seg = &self.segments[t.seg];
        let end = match seg.kind {
            GluingKind::Translation => t.end,
            GluingKind::Fold => t.end.flip(),
        };
        Token { seg: seg.partner, end }
    }

    /// Cross the π-sector at the token's circle position: the other
    /// segment-end meeting the same point.
    fn adjacent(&self, t: Token) -> Token {
        let at = self.token_pos(t);
        let circle = at.circle;
        let circ = self.circumference(circle).clone();
        let want_end = t.end.flip();
        for (i, s) in self.segments.iter().enumerate() {
            if s.circle != circle || (i == t.seg && want_end == t.end) {
                continue;
            }
            let pos = match want_end {
                End::Lo => s.start.clone(),
                End::Hi => s.end().rem_euclid(&circ),
            };
            if pos == at.pos && !(i == t.seg && want_end == t.end) {
                return Token { seg: i, end: want_end };
            }
        }
        unreachable!("tiled circle: every endpoint is shared by exactly two segment ends");
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum End {
    Lo,
    Hi,
}

impl End {
    fn flip(self) -> End {
        match self {
            End::Lo => End::Hi,
            End::Hi => End::Lo,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Token {
    seg: usize,
    end: End,
}

// ---------------------------------------------------------------------------
// JSON wire format

#[derive(Serialize, Deserialize)]
struct CylinderWire {
    circ: Rat,
    height: Rat,
    twist: Rat,
}

#[derive(Serialize, Deserialize)]
struct SegmentWire {
    id: usize,
    circle: usize,
    side: Side,
    start: Rat,
    len: Rat,
    partner: usize,
    kind: GluingKind,
}

#[derive(Serialize, Deserialize)]
struct LabelWire {
    circle: usize,
    side: Side,
    pos: Rat,
}

#[derive(Serialize, Deserialize)]
struct SurfaceWire {
    cylinders: Vec<CylinderWire>,
    segments: Vec<SegmentWire>,
    labels: BTreeMap<String, LabelWire>,
}

impl FlatSurface {
    pub fn to_json(&self) -> String {
        let wire = SurfaceWire {
            cylinders: self
                .cylinders
                .iter()
                .map(|c| CylinderWire {
                    circ: c.circ.clone(),
                    height: c.height.clone(),
                    twist: c.twist.clone(),
                })
                .collect(),
            segments: self
                .segments
                .iter()
                .enumerate()
                .map(|(id, s)| SegmentWire {
                    id,
                    circle: s.circle.cyl,
                    side: s.circle.side,
                    start: s.start.clone(),
                    len: s.len.clone(),
                    partner: s.partner,
                    kind: s.kind,
                })
                .collect(),
            labels: self
                .labels
                .iter()
                .map(|(k, v)| {
                    (
                        k.clone(),
                        LabelWire {
                            circle: v.circle.cyl,
                            side: v.circle.side,
                            pos: v.pos.clone(),
                        },
                    )
                })
                .collect(),
        };
        serde_json::to_string_pretty(&wire).expect("surface serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<FlatSurface, FlatError> {
        let wire: SurfaceWire =
            serde_json::from_str(json).map_err(|e| FlatError::Invalid(format!("json: {e}")))?;
        let mut segments = vec![None; wire.segments.len()];
        for s in wire.segments {
            if s.id >= segments.len() || segments[s.id].is_some() {
                return Err(FlatError::Invalid(format!("bad segment id {}", s.id)));
            }
            segments[s.id] = Some(Segment {
                circle: CircleId { cyl: s.circle, side: s.side },
                start: s.start,
                len: s.len,
                partner: s.partner,
                kind: s.kind,
            });
        }
        let surface = FlatSurface {
            cylinders: wire
                .cylinders
                .into_iter()
                .map(|c| Cylinder { circ: c.circ, height: c.height, twist: c.twist })
                .collect(),
            segments: segments.into_iter().map(|s| s.unwrap()).collect(),
            labels: wire
                .labels
                .into_iter()
                .map(|(k, v)| {
                    (
                        k,
                        PointRef {
                            circle: CircleId { cyl: v.circle, side: v.side },
                            pos: v.pos,
                        },
                    )
                })
                .collect(),
        };
        surface.validate()?;
        Ok(surface)
    }
}

/// Staircase double with arbitrary bottom width (template for shape
/// recognition): widths strictly decreasing, heights attached in order.
pub fn scaled_staircase(
    w1: &crate::rational::Rat,
    w2: &crate::rational::Rat,
    w3: &crate::rational::Rat,
    a: &crate::rational::Rat,
    b: &crate::rational::Rat,
    c: &crate::rational::Rat,
) -> Result<FlatSurface, FlatError> {
    build::build_staircase_scaled(&build::ScaledStair {
        w1: w1.clone(),
        w2: w2.clone(),
        w3: w3.clone(),
        a: a.clone(),
        b: b.clone(),
        c: c.clone(),
    })
}
