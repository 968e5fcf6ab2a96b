//! Scripted reductions of pillowcase surfaces into staircases.
//!
//! Both pillowcase shapes reduce by the same engine: make the vertical
//! foliation decompose into three columns (a shear of the middle when the
//! end strips have equal width), order the heights by vertical rescales,
//! then alternate quarter-turns with alignment shears. The alignment
//! amounts are not free parameters: each is the unique twist in
//! `[0, circumference)` that restores the canonical left-aligned gluing
//! pattern, computed by matching segment structures with the twist link
//! relaxed. Every step lands on a full snapshot with invariant checks.

use crate::flatsurf::{
    build_pillowcase, is_isomorphic, polydisk_act, rot, scaled_staircase, shear_by,
    trace_vertical, twist_corrections, CylinderDecomposition, FlatError, FlatSurface, PillowDims,
    PillowKind, StratumSignature,
};
use crate::rational::Rat;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SurgeryError {
    #[error("input is not a pillowcase of the required shape: {0}")]
    WrongShape(String),
    #[error("rotation failed: {0}")]
    RotFailed(String),
    #[error(transparent)]
    Flat(#[from] FlatError),
    #[error("no shear produces the target configuration at step {0}")]
    NoShear(&'static str),
}

/// One recorded operation.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum TraceOp {
    Input,
    PolydiskAct { cyl: usize, re: Rat, im: Rat },
    Rot,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceCheck {
    pub area: Rat,
    pub stratum: StratumSignature,
    /// vertical rescale factor applied by this step (1 otherwise)
    pub area_factor: Rat,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceStep {
    pub label: String,
    #[serde(flatten)]
    pub op: TraceOp,
    #[serde(with = "surface_json")]
    pub snapshot: FlatSurface,
    pub check: TraceCheck,
}

mod surface_json {
    use super::FlatSurface;
    use serde::ser::Serializer;
    use serde::Serialize;

    pub fn serialize<S: Serializer>(s: &FlatSurface, ser: S) -> Result<S::Ok, S::Error> {
        let v: serde_json::Value =
            serde_json::from_str(&s.to_json()).map_err(serde::ser::Error::custom)?;
        v.serialize(ser)
    }
}

/// Ordered snapshots of one reduction.
#[derive(Clone, Debug, Serialize, Default)]
pub struct SurgeryTrace {
    pub steps: Vec<TraceStep>,
}

pub(crate) const ROT_STEP_BOUND: usize = 4096;

impl SurgeryTrace {
    fn push(&mut self, label: impl Into<String>, op: TraceOp, snapshot: &FlatSurface) -> Result<(), SurgeryError> {
        snapshot.validate()?;
        let area_factor = match &op {
            TraceOp::PolydiskAct { im, .. } => im.clone(),
            _ => Rat::one(),
        };
        self.steps.push(TraceStep {
            label: label.into(),
            op,
            snapshot: snapshot.clone(),
            check: TraceCheck {
                area: snapshot.area_total(),
                stratum: snapshot.stratum(),
                area_factor,
            },
        });
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialization cannot fail")
    }

    /// Re-run the recorded operations from the first snapshot; the result
    /// must reproduce the last snapshot bit-exactly.
    pub fn replay(&self) -> Result<FlatSurface, FlatError> {
        let mut cur = self.steps.first().expect("nonempty trace").snapshot.clone();
        for step in &self.steps[1..] {
            cur = match &step.op {
                TraceOp::Input => cur,
                TraceOp::PolydiskAct { cyl, re, im } => polydisk_act(&cur, *cyl, re, im)?,
                TraceOp::Rot => rot(&cur, ROT_STEP_BOUND)?,
            };
        }
        Ok(cur)
    }
}

/// True exactly when the diagram is the double of a staircase polygon:
/// three cylinders with strictly decreasing circumferences whose gluing
/// pattern matches the left-aligned staircase stack.
pub fn is_staircase(surface: &FlatSurface) -> bool {
    if surface.cylinders.len() != 3 {
        return false;
    }
    let mut idx: Vec<usize> = (0..3).collect();
    idx.sort_by(|&a, &b| surface.cylinders[b].circ.cmp(&surface.cylinders[a].circ));
    let w: Vec<Rat> = idx
        .iter()
        .map(|&i| surface.cylinders[i].circ.clone() / Rat::int(2))
        .collect();
    if !(w[2] < w[1] && w[1] < w[0]) {
        return false;
    }
    let template = match scaled_staircase(
        &w[0],
        &w[1],
        &w[2],
        &surface.cylinders[idx[0]].height,
        &surface.cylinders[idx[1]].height,
        &surface.cylinders[idx[2]].height,
    ) {
        Ok(t) => t,
        Err(_) => return false,
    };
    is_isomorphic(surface, &template, false)
}

/// Reduce a pillowcase with strictly narrowest middle cylinder to a
/// staircase. Returns the staircase and the step-by-step trace.
pub fn reduce_pillow_b(surface: &FlatSurface) -> Result<(FlatSurface, SurgeryTrace), SurgeryError> {
    reduce(surface, PillowKind::B)
}

/// Reduce a pillowcase with strictly widest middle cylinder to a
/// staircase.
pub fn reduce_pillow_c(surface: &FlatSurface) -> Result<(FlatSurface, SurgeryTrace), SurgeryError> {
    reduce(surface, PillowKind::C)
}

/// Chain order of a 3-cylinder diagram: `[end, middle, end]` with the
/// middle adjacent to both ends (ends in index order).
fn chain_order(surface: &FlatSurface) -> Option<[usize; 3]> {
    if surface.cylinders.len() != 3 {
        return None;
    }
    let mut touch = [[false; 3]; 3];
    for seg in &surface.segments {
        let mate = &surface.segments[seg.partner];
        let (x, y) = (seg.circle.cyl, mate.circle.cyl);
        if x != y {
            touch[x][y] = true;
            touch[y][x] = true;
        }
    }
    let degree = |i: usize| (0..3).filter(|&k| touch[i][k]).count();
    let mid = (0..3).find(|&i| degree(i) == 2)?;
    let ends: Vec<usize> = (0..3).filter(|&i| i != mid && degree(i) == 1).collect();
    if ends.len() != 2 {
        return None;
    }
    Some([ends[0], mid, ends[1]])
}

/// Extract the strip dimensions if `surface` is (isomorphic to) the given
/// pillowcase shape.
fn recognize_pillow(surface: &FlatSurface, kind: PillowKind) -> Result<PillowDims, SurgeryError> {
    let order = chain_order(surface)
        .ok_or_else(|| SurgeryError::WrongShape("expected a three-cylinder chain".into()))?;
    let dims = PillowDims {
        widths: order.map(|i| surface.cylinders[i].circ.clone() / Rat::int(2)),
        heights: order.map(|i| surface.cylinders[i].height.clone()),
    };
    let canonical = build_pillowcase(kind, &dims)
        .map_err(|e| SurgeryError::WrongShape(format!("{e}")))?;
    if !is_isomorphic(surface, &canonical, false) {
        return Err(SurgeryError::WrongShape(
            "gluing pattern does not match the requested pillowcase shape".into(),
        ));
    }
    Ok(dims)
}

fn columns(surface: &FlatSurface) -> Result<CylinderDecomposition, SurgeryError> {
    trace_vertical(surface, ROT_STEP_BOUND).map_err(|e| SurgeryError::RotFailed(e.to_string()))
}

/// Apply the per-cylinder corrections as recorded polydisk shears.
fn apply_corrections(
    s: &FlatSurface,
    gammas: &[Rat],
    label: &str,
    trace: &mut SurgeryTrace,
) -> Result<FlatSurface, SurgeryError> {
    let mut cur = s.clone();
    for (j, g) in gammas.iter().enumerate() {
        if g.is_zero() {
            continue;
        }
        let re = g / &cur.cylinders[j].height;
        cur = polydisk_act(&cur, j, &re, &Rat::one())?;
        trace.push(
            format!("{label} (cylinder {j} by {g})"),
            TraceOp::PolydiskAct { cyl: j, re, im: Rat::one() },
            &cur,
        )?;
    }
    Ok(cur)
}

/// Shear `s` into the canonical presentation of `target` (same diagram up
/// to cylinder shears), recording the moves.
fn normalize_to(
    s: &FlatSurface,
    target: &FlatSurface,
    label: &str,
    step: &'static str,
    trace: &mut SurgeryTrace,
) -> Result<FlatSurface, SurgeryError> {
    let gammas = twist_corrections(s, target).ok_or(SurgeryError::NoShear(step))?;
    let out = apply_corrections(s, &gammas, label, trace)?;
    if !is_isomorphic(&out, target, false) {
        return Err(SurgeryError::NoShear(step));
    }
    Ok(out)
}

fn reduce(surface: &FlatSurface, kind: PillowKind) -> Result<(FlatSurface, SurgeryTrace), SurgeryError> {
    let dims = recognize_pillow(surface, kind)?;
    let canonical = build_pillowcase(kind, &dims)?;
    let mut trace = SurgeryTrace::default();
    trace.push(
        "input (canonical left-aligned presentation)",
        TraceOp::Input,
        &canonical,
    )?;
    let mut s = canonical;

    // Degenerate proportions w2 = w1 + w3 admit no three-column shear;
    // rescale one vertical cylinder (through a quarter-turn) first.
    let [w1, w2, w3] = &dims.widths;
    if kind == PillowKind::C && *w2 == w1 + w3 && columns(&s)?.cylinders.len() == 2 {
        s = do_rot(&s, "pre: quarter-turn onto the two vertical cylinders", &mut trace)?;
        let j = (0..s.cylinders.len())
            .min_by(|&a, &b| s.cylinders[a].circ.cmp(&s.cylinders[b].circ))
            .expect("two cylinders");
        let im = Rat::new(1, 2);
        s = polydisk_act(&s, j, &Rat::zero(), &im)?;
        trace.push(
            "pre: shorten one vertical cylinder",
            TraceOp::PolydiskAct { cyl: j, re: Rat::zero(), im },
            &s,
        )?;
        s = do_rot(&s, "pre: quarter-turn back", &mut trace)?;
        let dims2 = recognize_pillow(&s, kind)?;
        let canon2 = build_pillowcase(kind, &dims2)?;
        s = normalize_to(&s, &canon2, "pre: re-align presentation", "pre-align", &mut trace)?;
    }

    // (i) make the vertical foliation decompose into three columns. The
    // identity works when the end strips overhang opposite sides already;
    // otherwise the half-turn of the middle (shear by half its
    // circumference) decouples the two zeros' vertical saddle connection.
    // Deeper stages may still fail, so each opening move is tried in turn.
    let mid = chain_order(&s).expect("canonical pillowcase is a 3-chain")[1];
    let half = s.cylinders[mid].circ.clone() / Rat::int(2);
    let mut openings = vec![Rat::zero(), half];
    openings.extend(crate::flatsurf::saddle_shear_candidates(&s, mid, ROT_STEP_BOUND));
    openings.sort();
    openings.dedup();

    let mut last = SurgeryError::NoShear("three-column opening shear");
    for delta in openings {
        let trial = if delta.is_zero() {
            s.clone()
        } else {
            shear_by(&s, mid, &delta)?
        };
        if columns(&trial)?.cylinders.len() != 3 {
            continue;
        }
        let mut t = trace.clone();
        let mut cur = trial;
        if !delta.is_zero() {
            let re = &delta / &s.cylinders[mid].height;
            // re-record the shear onto the cloned trace
            cur.validate()?;
            t.push(
                format!("(i) shear the middle by {delta} onto a three-column vertical decomposition"),
                TraceOp::PolydiskAct { cyl: mid, re, im: Rat::one() },
                &cur,
            )?;
        }
        match tail(cur, &mut t) {
            Ok(out) => return Ok((out, t)),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Stages (ii)-(iv): order the heights, then alternate quarter-turns with
/// alignment shears until the staircase pattern appears.
fn tail(mut s: FlatSurface, trace: &mut SurgeryTrace) -> Result<FlatSurface, SurgeryError> {
    // (ii) heights strictly increasing bottom-to-top (identity when
    // already ordered)
    let ordered = s.cylinders.windows(2).all(|w| w[0].height < w[1].height);
    if !ordered {
        for (j, target) in [(0usize, 1i64), (1, 2), (2, 3)] {
            let target = Rat::int(target);
            if s.cylinders[j].height != target {
                let im = &target / &s.cylinders[j].height;
                s = polydisk_act(&s, j, &Rat::zero(), &im)?;
                trace.push(
                    format!("(ii) rescale cylinder {j} height to {target}"),
                    TraceOp::PolydiskAct { cyl: j, re: Rat::zero(), im },
                    &s,
                )?;
            }
        }
    }

    for round in 0..3 {
        s = do_rot(&s, format!("(iii) quarter-turn {}", round + 1), trace)?;
        let order = chain_order(&s)
            .ok_or(SurgeryError::NoShear("three-cylinder chain after quarter-turn"))?;
        let w = order.map(|i| s.cylinders[i].circ.clone() / Rat::int(2));
        let h = order.map(|i| s.cylinders[i].height.clone());
        let monotone = (w[0] < w[1] && w[1] < w[2]) || (w[2] < w[1] && w[1] < w[0]);
        if monotone {
            let (lo, mi, hi) = if w[0] > w[2] { (0, 1, 2) } else { (2, 1, 0) };
            let template = scaled_staircase(&w[lo], &w[mi], &w[hi], &h[lo], &h[mi], &h[hi])
                .map_err(SurgeryError::Flat)?;
            s = normalize_to(&s, &template, "(iv) final alignment shear", "final alignment", trace)?;
            if !is_staircase(&s) {
                return Err(SurgeryError::NoShear("staircase recognition"));
            }
            return Ok(s);
        }

        // not monotone: either re-align to the canonical pillowcase of the
        // observed pattern, or (when the quarter-turn produced crossed
        // folds outside any pillowcase pattern) half-turn the middle so
        // the columns nest
        let mut advanced = false;
        if let Some(pattern) = match () {
            _ if w[1] > w[0] && w[1] > w[2] => Some(PillowKind::C),
            _ if w[1] < w[0] && w[1] < w[2] => Some(PillowKind::B),
            _ => None,
        } {
            for dims in [
                PillowDims {
                    widths: [w[0].clone(), w[1].clone(), w[2].clone()],
                    heights: [h[0].clone(), h[1].clone(), h[2].clone()],
                },
                PillowDims {
                    widths: [w[2].clone(), w[1].clone(), w[0].clone()],
                    heights: [h[2].clone(), h[1].clone(), h[0].clone()],
                },
            ] {
                if let Ok(target) = build_pillowcase(pattern, &dims) {
                    if let Ok(next) = normalize_to(
                        &s,
                        &target,
                        "(iii) align the columns into the canonical pattern",
                        "column alignment",
                        trace,
                    ) {
                        s = next;
                        advanced = true;
                        break;
                    }
                }
            }
        }
        if !advanced {
            let mid = order[1];
            let half = s.cylinders[mid].circ.clone() / Rat::int(2);
            let trial = shear_by(&s, mid, &half)?;
            let dec = columns(&trial)?;
            let nested = dec.cylinders.len() == 3 && {
                let dg = |i: usize| dec.adjacency.iter().filter(|(a, b)| *a == i || *b == i).count();
                (0..3).find(|&i| dg(i) == 2).map_or(false, |vm| {
                    let ends: Vec<usize> = (0..3).filter(|&i| i != vm).collect();
                    let (e0, m, e1) = (
                        &dec.cylinders[ends[0]].circumference,
                        &dec.cylinders[vm].circumference,
                        &dec.cylinders[ends[1]].circumference,
                    );
                    (e0 < m && m < e1) || (e1 < m && m < e0)
                })
            };
            if !nested {
                return Err(SurgeryError::NoShear("column-nesting half-turn"));
            }
            let re = &half / &s.cylinders[mid].height;
            s = trial;
            trace.push(
                "(iii) half-turn the middle so the vertical columns nest",
                TraceOp::PolydiskAct { cyl: mid, re, im: Rat::one() },
                &s,
            )?;
        }
    }
    Err(SurgeryError::NoShear("reduction rounds exhausted"))
}

fn do_rot(s: &FlatSurface, label: impl Into<String>, trace: &mut SurgeryTrace) -> Result<FlatSurface, SurgeryError> {
    let out = rot(s, ROT_STEP_BOUND).map_err(|e| SurgeryError::RotFailed(e.to_string()))?;
    trace.push(label, TraceOp::Rot, &out)?;
    Ok(out)
}
