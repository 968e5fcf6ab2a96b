//! Constructors: doubles of left-aligned rectilinear strip stacks.
//!
//! A stack is a list of strips `[0, w_j] × [y_j, y_j+h_j]` sharing the left
//! edge `x = 0`. Doubling produces one horizontal cylinder per strip with
//! circumference `2 w_j`. Boundary circles are parametrized front copy
//! first (`param = x`), then back copy reversed (`param = 2w - x`), so the
//! polygon-edge parts fold with `d ↔ len - d` and the strip interfaces
//! glue front-to-front, back-to-back by parameter-aligned translations.

use super::{CircleId, Cylinder, FlatSurface, FlatError, GluingKind, PointRef, Segment, Side};
use crate::rational::Rat;
use serde::{Deserialize, Serialize};

/// Staircase dimensions: step heights `a, b, c` and top widths `p, q`
/// with the bottom edge normalized to 1.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct StaircaseSpec {
    pub a: Rat,
    pub b: Rat,
    pub c: Rat,
    pub p: Rat,
    pub q: Rat,
}

impl StaircaseSpec {
    pub fn validate(&self) -> Result<(), FlatError> {
        let err = |m: &str| Err(FlatError::InvalidSpec(m.into()));
        if !self.a.is_positive() {
            return err("a must be positive");
        }
        if self.b.is_negative() || self.c.is_negative() {
            return err("b and c must be nonnegative");
        }
        if !self.p.is_positive() || !self.q.is_positive() {
            return err("p and q must be positive");
        }
        if &self.p + &self.q >= Rat::one() {
            return err("p + q must stay below 1");
        }
        Ok(())
    }
}

/// Middle-cylinder comparison for the two pillowcase shapes: `B` has the
/// middle strictly narrowest, `C` strictly widest. Equalities with the
/// middle fall between the named shapes and are rejected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PillowKind {
    B,
    C,
}

struct StripSpec {
    width: Rat,
    height: Rat,
    /// cuts on the exposed part of this strip's top edge (polygon
    /// boundary at that level), strictly inside the exposed range
    top_cuts: Vec<Rat>,
}

/// Assemble the double of a left-aligned stack. `top_cuts` of the last
/// strip subdivide its whole top edge.
fn double_of_stack(strips: Vec<StripSpec>) -> Result<FlatSurface, FlatError> {
    assert!(!strips.is_empty());
    for pair in strips.windows(2) {
        if pair[0].width == pair[1].width {
            return Err(FlatError::InvalidSpec(
                "adjacent strips of equal width merge into one cylinder".into(),
            ));
        }
    }
    let mut surface = FlatSurface::default();
    for s in &strips {
        if !s.width.is_positive() || !s.height.is_positive() {
            return Err(FlatError::InvalidSpec("strip widths and heights must be positive".into()));
        }
        surface.cylinders.push(Cylinder {
            circ: Rat::int(2) * s.width.clone(),
            height: s.height.clone(),
            twist: Rat::zero(),
        });
    }

    // bottom edge of the stack: one fold pair
    let w0 = strips[0].width.clone();
    push_fold_run(
        &mut surface,
        CircleId::bottom(0),
        &w0,
        &[Rat::zero(), w0.clone()],
    );

    // interfaces
    for j in 0..strips.len() - 1 {
        let below = strips[j].width.clone();
        let above = strips[j + 1].width.clone();
        let top = CircleId::top(j);
        let bot = CircleId::bottom(j + 1);
        if below > above {
            // exposed run on the lower strip's top edge, x in [above, below]
            let mut cuts = vec![above.clone()];
            cuts.extend(strips[j].top_cuts.iter().cloned());
            cuts.push(below.clone());
            check_cuts(&cuts)?;
            let i1 = push_pending(&mut surface, top, Rat::zero(), above.clone());
            push_fold_run(&mut surface, top, &below, &cuts);
            let two = Rat::int(2);
            let i2 = push_pending(
                &mut surface,
                top,
                &two * &below - &above,
                above.clone(),
            );
            let k1 = push_pending(&mut surface, bot, Rat::zero(), above.clone());
            let k2 = push_pending(&mut surface, bot, above.clone(), above.clone());
            tie(&mut surface, i1, k1);
            tie(&mut surface, i2, k2);
        } else {
            if !strips[j].top_cuts.is_empty() {
                return Err(FlatError::InvalidSpec(
                    "top cuts given on a fully covered strip edge".into(),
                ));
            }
            // exposed run on the upper strip's bottom edge, x in [below, above]
            let cuts = vec![below.clone(), above.clone()];
            check_cuts(&cuts)?;
            let i1 = push_pending(&mut surface, top, Rat::zero(), below.clone());
            let two = Rat::int(2);
            let i2 = push_pending(&mut surface, top, below.clone(), below.clone());
            let k1 = push_pending(&mut surface, bot, Rat::zero(), below.clone());
            push_fold_run(&mut surface, bot, &above, &cuts);
            let k2 = push_pending(
                &mut surface,
                bot,
                &two * &above - &below,
                below.clone(),
            );
            tie(&mut surface, i1, k1);
            tie(&mut surface, i2, k2);
        }
    }

    // top edge of the stack
    let last = strips.len() - 1;
    let wl = strips[last].width.clone();
    let mut cuts = vec![Rat::zero()];
    cuts.extend(strips[last].top_cuts.iter().cloned());
    cuts.push(wl.clone());
    check_cuts(&cuts)?;
    push_fold_run(&mut surface, CircleId::top(last), &wl, &cuts);

    Ok(surface)
}

fn check_cuts(cuts: &[Rat]) -> Result<(), FlatError> {
    for w in cuts.windows(2) {
        if w[0] >= w[1] {
            return Err(FlatError::InvalidSpec(
                "edge cut positions must be strictly increasing inside their range".into(),
            ));
        }
    }
    Ok(())
}

/// Append an unglued segment; returns its index.
fn push_pending(surface: &mut FlatSurface, circle: CircleId, start: Rat, len: Rat) -> usize {
    surface.segments.push(Segment {
        circle,
        start,
        len,
        partner: usize::MAX,
        kind: GluingKind::Translation,
    });
    surface.segments.len() - 1
}

fn tie(surface: &mut FlatSurface, i: usize, k: usize) {
    surface.segments[i].partner = k;
    surface.segments[k].partner = i;
}

/// Fold-glue the doubled edge run `x ∈ [cuts[0], cuts[last]]` of width-`w`
/// strip boundary: front pieces at `param = x`, back pieces at
/// `param = 2w - x`, matched in reverse.
fn push_fold_run(surface: &mut FlatSurface, circle: CircleId, w: &Rat, cuts: &[Rat]) {
    let two = Rat::int(2);
    let n = cuts.len() - 1;
    let mut fronts = Vec::with_capacity(n);
    let mut backs = Vec::with_capacity(n);
    for i in 0..n {
        let len = &cuts[i + 1] - &cuts[i];
        fronts.push(push_pending(surface, circle, cuts[i].clone(), len));
    }
    for i in (0..n).rev() {
        let len = &cuts[i + 1] - &cuts[i];
        let start = &two * w - &cuts[i + 1];
        backs.push(push_pending(surface, circle, start, len));
    }
    // backs were pushed in reverse cut order; backs[k] mirrors fronts[n-1-k]
    for (k, &b) in backs.iter().enumerate() {
        let f = fronts[n - 1 - k];
        tie(surface, f, b);
        surface.segments[f].kind = GluingKind::Fold;
        surface.segments[b].kind = GluingKind::Fold;
    }
}

/// The double of the staircase polygon with step heights `(a, b, c)` and
/// top widths `(p, q)`; `b` and/or `c` may be zero, in which case the
/// vanished step's reflex corner survives as a marked regular point.
pub fn build_staircase(spec: &StaircaseSpec) -> Result<FlatSurface, FlatError> {
    spec.validate()?;
    let scaled = ScaledStair {
        w1: Rat::one(),
        w2: &spec.p + &spec.q,
        w3: spec.p.clone(),
        a: spec.a.clone(),
        b: spec.b.clone(),
        c: spec.c.clone(),
    };
    build_staircase_scaled(&scaled)
}

/// Staircase with an arbitrary bottom width (used by shape recognition).
pub(super) struct ScaledStair {
    pub w1: Rat,
    pub w2: Rat,
    pub w3: Rat,
    pub a: Rat,
    pub b: Rat,
    pub c: Rat,
}

pub(super) fn build_staircase_scaled(sc: &ScaledStair) -> Result<FlatSurface, FlatError> {
    let ScaledStair { w1, w2, w3, a, b, c } = sc;
    if !(w3 < w2 && w2 < w1) {
        return Err(FlatError::InvalidSpec("staircase widths must strictly decrease".into()));
    }
    let has_b = b.is_positive();
    let has_c = c.is_positive();
    let mut labels: Vec<(&str, (usize, Side, Rat))> = Vec::new();
    let surface = match (has_b, has_c) {
        (true, true) => {
            labels.extend([
                ("P2", (0, Side::Top, w1.clone())),
                ("Q1", (1, Side::Bottom, w2.clone())),
                ("P3", (1, Side::Top, w2.clone())),
                ("Q2", (2, Side::Bottom, w3.clone())),
                ("P4", (2, Side::Top, w3.clone())),
                ("P5", (2, Side::Top, Rat::zero())),
            ]);
            double_of_stack(vec![
                strip(w1, a, vec![]),
                strip(w2, b, vec![]),
                strip(w3, c, vec![]),
            ])?
        }
        (true, false) => {
            labels.extend([
                ("P2", (0, Side::Top, w1.clone())),
                ("Q1", (1, Side::Bottom, w2.clone())),
                ("P3", (1, Side::Top, w2.clone())),
                ("P4", (1, Side::Top, w3.clone())),
                ("P5", (1, Side::Top, Rat::zero())),
            ]);
            double_of_stack(vec![
                strip(w1, a, vec![]),
                strip(w2, b, vec![w3.clone()]),
            ])?
        }
        (false, true) => {
            labels.extend([
                ("P2", (0, Side::Top, w1.clone())),
                ("P3", (0, Side::Top, w2.clone())),
                ("Q2", (1, Side::Bottom, w3.clone())),
                ("P4", (1, Side::Top, w3.clone())),
                ("P5", (1, Side::Top, Rat::zero())),
            ]);
            double_of_stack(vec![
                strip(w1, a, vec![w2.clone()]),
                strip(w3, c, vec![]),
            ])?
        }
        (false, false) => {
            labels.extend([
                ("P2", (0, Side::Top, w1.clone())),
                ("P3", (0, Side::Top, w2.clone())),
                ("P4", (0, Side::Top, w3.clone())),
                ("P5", (0, Side::Top, Rat::zero())),
            ]);
            double_of_stack(vec![strip(w1, a, vec![w3.clone(), w2.clone()])])?
        }
    };
    let mut surface = surface;
    labels.push(("P6", (0, Side::Bottom, Rat::zero())));
    labels.push(("P1", (0, Side::Bottom, w1.clone())));
    for (name, (cyl, side, pos)) in labels {
        surface.labels.insert(
            name.to_string(),
            PointRef { circle: CircleId { cyl, side }, pos },
        );
    }
    surface.validate()?;
    Ok(surface)
}

fn strip(width: &Rat, height: &Rat, top_cuts: Vec<Rat>) -> StripSpec {
    StripSpec {
        width: width.clone(),
        height: height.clone(),
        top_cuts,
    }
}

/// Marked rectangle `S(a, 0, 0, p, q)`: the staircase constructor with both
/// step heights zero, marked points on the top edge at `x = p` and `p + q`.
pub fn build_rect_marked(a: &Rat, p: &Rat, q: &Rat) -> Result<FlatSurface, FlatError> {
    build_staircase(&StaircaseSpec {
        a: a.clone(),
        b: Rat::zero(),
        c: Rat::zero(),
        p: p.clone(),
        q: q.clone(),
    })
}

/// Pillowcase dimensions: widths and heights of the three strips, bottom
/// to top.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PillowDims {
    pub widths: [Rat; 3],
    pub heights: [Rat; 3],
}

/// Double of the three-strip pillowcase polygon of the requested shape.
/// Poles are labeled `P1..P6` in scan order and the two zeros `Q1`, `Q2`.
pub fn build_pillowcase(kind: PillowKind, dims: &PillowDims) -> Result<FlatSurface, FlatError> {
    let [w1, w2, w3] = &dims.widths;
    for h in &dims.heights {
        if !h.is_positive() {
            return Err(FlatError::InvalidSpec("heights must be positive".into()));
        }
    }
    let shape_ok = match kind {
        PillowKind::B => w2 < w1 && w2 < w3,
        PillowKind::C => w2 > w1 && w2 > w3,
    };
    if !shape_ok {
        return Err(FlatError::InvalidSpec(format!(
            "widths {:?} do not satisfy the strict {:?}-shape inequalities for the middle strip",
            dims.widths, kind
        )));
    }
    let mut surface = double_of_stack(vec![
        strip(w1, &dims.heights[0], vec![]),
        strip(w2, &dims.heights[1], vec![]),
        strip(w3, &dims.heights[2], vec![]),
    ])?;
    label_cone_points(&mut surface)?;
    surface.validate()?;
    Ok(surface)
}

/// Attach generic labels: `P1..P6` on the angle-π classes and `Q1, Q2` on
/// the angle-3π classes, in order of their smallest circle position.
fn label_cone_points(surface: &mut FlatSurface) -> Result<(), FlatError> {
    let classes = surface.vertex_classes();
    let mut poles = Vec::new();
    let mut zeros = Vec::new();
    for cls in &classes {
        let rep = cls.positions.iter().next().expect("nonempty class").clone();
        match cls.angle_pi {
            1 => poles.push(rep),
            3 => zeros.push(rep),
            _ => {}
        }
    }
    poles.sort();
    zeros.sort();
    if poles.len() != 6 || zeros.len() != 2 {
        return Err(FlatError::Invalid(format!(
            "expected 6 poles and 2 zeros, found {} and {}",
            poles.len(),
            zeros.len()
        )));
    }
    for (i, rep) in poles.into_iter().enumerate() {
        surface.labels.insert(format!("P{}", i + 1), rep);
    }
    for (i, rep) in zeros.into_iter().enumerate() {
        surface.labels.insert(format!("Q{}", i + 1), rep);
    }
    Ok(())
}
