//! Cylinder deformations and the vertical-foliation machinery.
//!
//! `polydisk_act` deforms one cylinder (shear and vertical rescale).
//! `trace_vertical` shoots the vertical separatrices from every essential
//! point (cone angle ≠ 2π or marked) until each closes on a singularity,
//! then cuts the surface into vertical strips and chains them into maximal
//! vertical cylinders. `rot` rebuilds the surface in the cylinder
//! coordinates of the vertical foliation, which realizes the quarter-turn
//! that swaps horizontal and vertical.

use super::{CircleId, Cylinder, FlatSurface, FlatError, GluingKind, PointRef, Segment, Side};
use crate::rational::Rat;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug, thiserror::Error)]
#[error("separatrix from {start:?} failed to close within {steps} crossings")]
pub struct NonPeriodic {
    pub start: PointRef,
    pub steps: usize,
}

/// Apply `λ = re + i·im` to cylinder `j`: height scales by `im`, the twist
/// advances by `re · height` (reduced mod circumference), gluings are
/// untouched.
pub fn polydisk_act(
    surface: &FlatSurface,
    j: usize,
    re: &Rat,
    im: &Rat,
) -> Result<FlatSurface, FlatError> {
    if j >= surface.cylinders.len() {
        return Err(FlatError::IndexOutOfRange(j));
    }
    if !im.is_positive() {
        return Err(FlatError::NonpositiveImaginaryPart);
    }
    let mut out = surface.clone();
    let cyl = &mut out.cylinders[j];
    let advance = re * &cyl.height;
    cyl.twist = (&cyl.twist + &advance).rem_euclid(&cyl.circ);
    cyl.height = &cyl.height * im;
    Ok(out)
}

/// Shear cylinder `j` so that its top circle's attachment rotates by
/// `amount`; this is `polydisk_act` with `λ = amount/height + i`.
pub fn shear_by(surface: &FlatSurface, j: usize, amount: &Rat) -> Result<FlatSurface, FlatError> {
    let h = surface.cylinders[j].height.clone();
    polydisk_act(surface, j, &(amount / &h), &Rat::one())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpDown {
    Up,
    Down,
}

/// Maximal vertical strip of one horizontal cylinder: bottom parameters in
/// `[lo, lo + width)` (mod circumference), free of critical verticals in
/// the interior.
#[derive(Clone, Debug)]
pub struct Strip {
    pub cyl: usize,
    pub lo: Rat,
    pub width: Rat,
}

#[derive(Clone, Copy, Debug)]
pub struct ChainLink {
    pub strip: usize,
    pub dir: UpDown,
}

#[derive(Clone, Debug)]
pub struct VerticalCylinder {
    /// length of the closed vertical leaves (sum of strip heights)
    pub circumference: Rat,
    /// transverse width (common width of the chained strips)
    pub width: Rat,
    pub chain: Vec<ChainLink>,
}

#[derive(Clone, Debug)]
pub struct CylinderDecomposition {
    pub strips: Vec<Strip>,
    pub cylinders: Vec<VerticalCylinder>,
    /// unordered pairs of vertical cylinders sharing a critical edge
    pub adjacency: Vec<(usize, usize)>,
}

impl CylinderDecomposition {
    pub fn total_area(&self) -> Rat {
        self.cylinders
            .iter()
            .fold(Rat::zero(), |acc, v| acc + &v.circumference * &v.width)
    }
}

struct Chart {
    /// per circle: segment ids sorted by start
    on: BTreeMap<CircleId, Vec<usize>>,
    /// positions with cone angle ≠ 2π or carrying a label
    essential: BTreeSet<PointRef>,
}

enum Hit {
    Interior(usize, Rat),
    Endpoint,
}

impl Chart {
    fn new(surface: &FlatSurface) -> Chart {
        let mut on: BTreeMap<CircleId, Vec<usize>> = BTreeMap::new();
        for (i, s) in surface.segments.iter().enumerate() {
            on.entry(s.circle).or_default().push(i);
        }
        for ids in on.values_mut() {
            ids.sort_by(|&a, &b| surface.segments[a].start.cmp(&surface.segments[b].start));
        }
        let mut essential = BTreeSet::new();
        for cls in surface.vertex_classes() {
            if cls.angle_pi != 2 || !cls.labels.is_empty() {
                essential.extend(cls.positions.iter().cloned());
            }
        }
        Chart { on, essential }
    }

    fn locate(&self, surface: &FlatSurface, circle: CircleId, pos: &Rat) -> Hit {
        let ids = &self.on[&circle];
        // last segment with start <= pos
        let k = ids.partition_point(|&i| surface.segments[i].start <= *pos);
        let seg = ids[k.checked_sub(1).expect("pos within [0, circ)")];
        let s = &surface.segments[seg];
        if s.start == *pos {
            Hit::Endpoint
        } else {
            Hit::Interior(seg, pos - &s.start)
        }
    }

    /// Continuation of a leaf through a regular junction at `pos`: glue by
    /// the segment ending there.
    fn through_junction(&self, surface: &FlatSurface, circle: CircleId, pos: &Rat) -> (CircleId, Rat) {
        let circ = surface.circumference(circle);
        let target = if pos.is_zero() { circ.clone() } else { pos.clone() };
        let ids = &self.on[&circle];
        let left = ids
            .iter()
            .copied()
            .find(|&i| surface.segments[i].end() == target)
            .expect("tiled circle junction");
        let s = &surface.segments[left];
        let mate = &surface.segments[s.partner];
        let mate_circ = surface.circumference(mate.circle);
        let out = match s.kind {
            GluingKind::Translation => mate.end().rem_euclid(mate_circ),
            GluingKind::Fold => mate.start.clone(),
        };
        (mate.circle, out)
    }

    fn glue_interior(&self, surface: &FlatSurface, seg: usize, d: &Rat) -> (CircleId, Rat) {
        let s = &surface.segments[seg];
        let mate = &surface.segments[s.partner];
        let pos = match s.kind {
            GluingKind::Translation => &mate.start + d,
            GluingKind::Fold => &mate.start + &(&s.len - d),
        };
        (mate.circle, pos)
    }
}

fn cross(surface: &FlatSurface, j: usize, from: Side, pos: &Rat) -> Rat {
    let cyl = &surface.cylinders[j];
    match from {
        Side::Bottom => (pos - &cyl.twist).rem_euclid(&cyl.circ),
        Side::Top => (pos + &cyl.twist).rem_euclid(&cyl.circ),
    }
}

fn bottom_param(surface: &FlatSurface, j: usize, from: Side, pos: &Rat) -> Rat {
    match from {
        Side::Bottom => pos.clone(),
        Side::Top => (pos + &surface.cylinders[j].twist).rem_euclid(&surface.cylinders[j].circ),
    }
}

/// Decompose the vertical foliation into maximal cylinders, or report the
/// separatrix that failed to close within `max_steps` cylinder crossings.
pub fn trace_vertical(
    surface: &FlatSurface,
    max_steps: usize,
) -> Result<CylinderDecomposition, NonPeriodic> {
    let chart = Chart::new(surface);
    let mut crossings: BTreeMap<usize, BTreeSet<Rat>> = BTreeMap::new();

    for start in chart.essential.iter().cloned().collect::<Vec<_>>() {
        let mut j = start.circle.cyl;
        let mut side = start.circle.side;
        let mut pos = start.pos.clone();
        let mut steps = 0usize;
        loop {
            steps += 1;
            if steps > max_steps {
                return Err(NonPeriodic { start, steps: max_steps });
            }
            crossings
                .entry(j)
                .or_default()
                .insert(bottom_param(surface, j, side, &pos));
            let landing = CircleId { cyl: j, side: side.opposite() };
            let lpos = cross(surface, j, side, &pos);
            let at = PointRef { circle: landing, pos: lpos.clone() };
            if chart.essential.contains(&at) {
                break;
            }
            let (next_circle, next_pos) = match chart.locate(surface, landing, &lpos) {
                Hit::Endpoint => chart.through_junction(surface, landing, &lpos),
                Hit::Interior(seg, d) => chart.glue_interior(surface, seg, &d),
            };
            j = next_circle.cyl;
            side = next_circle.side;
            pos = next_pos;
        }
    }

    decompose(surface, &chart, crossings)
        .map_err(|msg| panic!("vertical decomposition invariant violated: {msg}"))
}

fn decompose(
    surface: &FlatSurface,
    chart: &Chart,
    crossings: BTreeMap<usize, BTreeSet<Rat>>,
) -> Result<CylinderDecomposition, String> {
    let n = surface.cylinders.len();
    let mut strips = Vec::new();
    let mut strip_at: BTreeMap<(usize, Rat), usize> = BTreeMap::new();
    for j in 0..n {
        let xs: Vec<Rat> = crossings
            .get(&j)
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default();
        if xs.is_empty() {
            return Err(format!("cylinder {j} carries no critical vertical"));
        }
        let c = &surface.cylinders[j].circ;
        for (k, lo) in xs.iter().enumerate() {
            let next = &xs[(k + 1) % xs.len()];
            let width = if xs.len() == 1 {
                c.clone()
            } else {
                (next - lo).rem_euclid(c)
            };
            strip_at.insert((j, lo.clone()), strips.len());
            strips.push(Strip { cyl: j, lo: lo.clone(), width });
        }
    }

    let succ = |link: ChainLink| -> Result<ChainLink, String> {
        let s = &strips[link.strip];
        let cyl = &surface.cylinders[s.cyl];
        let (circle, arc_start) = match link.dir {
            UpDown::Up => (
                CircleId::top(s.cyl),
                (&s.lo - &cyl.twist).rem_euclid(&cyl.circ),
            ),
            UpDown::Down => (CircleId::bottom(s.cyl), s.lo.clone()),
        };
        let (tcircle, tstart, _rev) = map_arc(surface, chart, circle, &arc_start, &s.width)?;
        let (dir, lo) = match tcircle.side {
            Side::Bottom => (UpDown::Up, tstart),
            Side::Top => (
                UpDown::Down,
                (&tstart + &surface.cylinders[tcircle.cyl].twist)
                    .rem_euclid(&surface.cylinders[tcircle.cyl].circ),
            ),
        };
        let idx = *strip_at
            .get(&(tcircle.cyl, lo.clone()))
            .ok_or_else(|| format!("image arc at {lo:?} is not a strip boundary"))?;
        if strips[idx].width != s.width {
            return Err("chained strips disagree on width".into());
        }
        Ok(ChainLink { strip: idx, dir })
    };

    let mut used = vec![false; strips.len()];
    let mut cylinders = Vec::new();
    for s0 in 0..strips.len() {
        if used[s0] {
            continue;
        }
        let first = ChainLink { strip: s0, dir: UpDown::Up };
        let mut chain = vec![first];
        used[s0] = true;
        let mut link = succ(first)?;
        while link.strip != s0 {
            if used[link.strip] {
                return Err("strip chained twice".into());
            }
            used[link.strip] = true;
            chain.push(link);
            link = succ(link)?;
        }
        if link.dir != UpDown::Up {
            return Err("vertical leaf returned with reversed orientation".into());
        }
        let circumference = chain.iter().fold(Rat::zero(), |acc, l| {
            acc + surface.cylinders[strips[l.strip].cyl].height.clone()
        });
        cylinders.push(VerticalCylinder {
            circumference,
            width: strips[s0].width.clone(),
            chain,
        });
    }

    // adjacency: the two strips meeting along each critical edge
    let strip_of = |key: &(usize, Rat)| strip_at[key];
    let mut vcyl_of_strip = vec![0usize; strips.len()];
    for (vi, v) in cylinders.iter().enumerate() {
        for l in &v.chain {
            vcyl_of_strip[l.strip] = vi;
        }
    }
    let mut adj = BTreeSet::new();
    for (si, s) in strips.iter().enumerate() {
        let c = &surface.cylinders[s.cyl].circ;
        let left_hi = s.lo.clone(); // this strip's lo edge is the hi edge of its left neighbor
        let left_strip = strips
            .iter()
            .position(|t| t.cyl == s.cyl && (&t.lo + &t.width).rem_euclid(c) == left_hi)
            .expect("cyclic strips");
        let (a, b) = (vcyl_of_strip[si], vcyl_of_strip[strip_of(&(s.cyl, strips[left_strip].lo.clone()))]);
        if a != b {
            adj.insert((a.min(b), a.max(b)));
        }
    }
    Ok(CylinderDecomposition {
        strips,
        cylinders,
        adjacency: adj.into_iter().collect(),
    })
}

/// Map the arc `[start, start+width)` of `circle` through the gluings,
/// piece by piece; the image must be one contiguous arc on one circle.
/// Returns (target circle, image arc start, orientation reversed?).
fn map_arc(
    surface: &FlatSurface,
    chart: &Chart,
    circle: CircleId,
    start: &Rat,
    width: &Rat,
) -> Result<(CircleId, Rat, bool), String> {
    let circ = surface.circumference(circle).clone();
    let mut remaining = width.clone();
    let mut cur = start.clone();
    let mut target: Option<(CircleId, bool)> = None;
    let mut img_lo: Option<Rat> = None;
    let mut img_hi: Option<Rat> = None;
    let mut first_img_start: Option<Rat> = None;
    while remaining.is_positive() {
        let (seg, d) = match chart.locate(surface, circle, &cur) {
            Hit::Interior(seg, d) => (seg, d),
            Hit::Endpoint => {
                let ids = &chart.on[&circle];
                let k = ids.partition_point(|&i| surface.segments[i].start <= cur);
                (ids[k - 1], Rat::zero())
            }
        };
        let s = &surface.segments[seg];
        let piece = (&s.len - &d).min(remaining.clone());
        let (mcircle, rev, mlo) = {
            let mate = &surface.segments[s.partner];
            match s.kind {
                GluingKind::Translation => (mate.circle, false, &mate.start + &d),
                GluingKind::Fold => (
                    mate.circle,
                    true,
                    &mate.start + &(&s.len - &(&d + &piece)),
                ),
            }
        };
        let mcirc = surface.circumference(mcircle).clone();
        match &target {
            None => {
                target = Some((mcircle, rev));
                img_lo = Some(mlo.clone());
                img_hi = Some(&mlo + &piece);
                first_img_start = Some(if rev { &mlo + &piece } else { mlo });
            }
            Some((tc, trev)) => {
                if *tc != mcircle || *trev != rev {
                    return Err("strip interval glues to mixed targets".into());
                }
                // contiguity mod circumference: forward images extend at the
                // top, reversed ones at the bottom
                if rev {
                    let prev_lo = img_lo.take().expect("set").rem_euclid(&mcirc);
                    if prev_lo != (&mlo + &piece).rem_euclid(&mcirc) {
                        return Err("reversed strip images not contiguous".into());
                    }
                    img_lo = Some(mlo);
                } else {
                    let prev_hi = img_hi.take().expect("set").rem_euclid(&mcirc);
                    if prev_hi != mlo.rem_euclid(&mcirc) {
                        return Err("strip images not contiguous".into());
                    }
                    img_hi = Some(&mlo + &piece);
                }
            }
        }
        cur = (&cur + &piece).rem_euclid(&circ);
        remaining = &remaining - &piece;
    }
    let (tc, rev) = target.expect("nonempty arc");
    let tcirc = surface.circumference(tc);
    let arc_start = if rev {
        // image runs backwards; its low end is the final img_lo
        img_lo.expect("set").rem_euclid(tcirc)
    } else {
        first_img_start.expect("set").rem_euclid(tcirc)
    };
    Ok((tc, arc_start, rev))
}

/// Twist values for cylinder `mid` that create a vertical saddle
/// connection crossing it exactly once: critical leaves are traced from
/// every essential point, stopping when they would enter `mid`; arrivals
/// on its bottom circle pair with arrivals on its top circle. The traces
/// avoid `mid`, so the arrival sets do not depend on its current twist.
pub fn saddle_shear_candidates(surface: &FlatSurface, mid: usize, max_steps: usize) -> Vec<Rat> {
    let chart = Chart::new(surface);
    let mut arrive_bottom: BTreeSet<Rat> = BTreeSet::new();
    let mut arrive_top: BTreeSet<Rat> = BTreeSet::new();
    for start in chart.essential.iter() {
        if start.circle.cyl == mid {
            match start.circle.side {
                Side::Bottom => arrive_bottom.insert(start.pos.clone()),
                Side::Top => arrive_top.insert(start.pos.clone()),
            };
            continue;
        }
        let mut j = start.circle.cyl;
        let mut side = start.circle.side;
        let mut pos = start.pos.clone();
        for _ in 0..max_steps {
            let landing = CircleId { cyl: j, side: side.opposite() };
            let lpos = cross(surface, j, side, &pos);
            let at = PointRef { circle: landing, pos: lpos.clone() };
            if chart.essential.contains(&at) {
                break;
            }
            let (next_circle, next_pos) = match chart.locate(surface, landing, &lpos) {
                Hit::Endpoint => chart.through_junction(surface, landing, &lpos),
                Hit::Interior(seg, d) => chart.glue_interior(surface, seg, &d),
            };
            if next_circle.cyl == mid {
                match next_circle.side {
                    Side::Bottom => arrive_bottom.insert(next_pos),
                    Side::Top => arrive_top.insert(next_pos),
                };
                break;
            }
            j = next_circle.cyl;
            side = next_circle.side;
            pos = next_pos;
        }
    }
    let circ = &surface.cylinders[mid].circ;
    let mut out: Vec<Rat> = Vec::new();
    for x in &arrive_bottom {
        for u in &arrive_top {
            out.push((x - u).rem_euclid(circ));
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Quarter-turn: rebuild the surface in the cylinder coordinates of the
/// vertical foliation. Labels follow their cone points.
pub fn rot(surface: &FlatSurface, max_steps: usize) -> Result<FlatSurface, FlatError> {
    let dec = trace_vertical(surface, max_steps)?;
    let classes = surface.vertex_classes();
    let class_of = |p: &PointRef| -> Option<usize> {
        classes.iter().position(|c| c.positions.contains(p))
    };
    let label_class: BTreeMap<usize, Vec<String>> = {
        let mut m: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for (name, at) in &surface.labels {
            let cls = class_of(at).expect("label sits on a vertex class");
            m.entry(cls).or_default().push(name.clone());
        }
        m
    };

    // edge key: (cylinder, bottom parameter of the critical vertical)
    let mut side_seg: BTreeMap<(usize, Rat, bool), usize> = BTreeMap::new();

    let mut out = FlatSurface::default();
    let mut pending: Vec<(usize, (usize, Rat, bool))> = Vec::new();
    let mut corner_points: Vec<(CircleId, Rat, PointRef)> = Vec::new();

    for v in &dec.cylinders {
        let vi = out.cylinders.len();
        out.cylinders.push(Cylinder {
            circ: v.circumference.clone(),
            height: v.width.clone(),
            twist: Rat::zero(),
        });
        let mut offset = Rat::zero();
        for link in &v.chain {
            let s = &dec.strips[link.strip];
            let j = s.cyl;
            let cylj = &surface.cylinders[j];
            let h = cylj.height.clone();
            let hi_x = (&s.lo + &s.width).rem_euclid(&cylj.circ);
            // old circle positions of the two edge feet entered first
            let enter_bottom = |x: &Rat| PointRef {
                circle: CircleId::bottom(j),
                pos: x.clone(),
            };
            let enter_top = |x: &Rat| PointRef {
                circle: CircleId::top(j),
                pos: (x - &cylj.twist).rem_euclid(&cylj.circ),
            };
            // (edge-side key, old point at the segment start, old point at its end)
            let (bkey, bcorner, bexit, tkey, tcorner, texit) = match link.dir {
                UpDown::Up => (
                    (j, s.lo.clone(), true),
                    enter_bottom(&s.lo),
                    enter_top(&s.lo),
                    (j, hi_x.clone(), false),
                    enter_bottom(&hi_x),
                    enter_top(&hi_x),
                ),
                UpDown::Down => (
                    (j, hi_x.clone(), false),
                    enter_top(&hi_x),
                    enter_bottom(&hi_x),
                    (j, s.lo.clone(), true),
                    enter_top(&s.lo),
                    enter_bottom(&s.lo),
                ),
            };
            let end_offset = (&offset + &h).rem_euclid(&v.circumference);
            for (circle, key, corner, exit) in [
                (CircleId::bottom(vi), bkey, bcorner, bexit),
                (CircleId::top(vi), tkey, tcorner, texit),
            ] {
                let id = out.segments.len();
                out.segments.push(Segment {
                    circle,
                    start: offset.clone(),
                    len: h.clone(),
                    partner: usize::MAX,
                    kind: GluingKind::Translation,
                });
                let clash = side_seg.insert(key.clone(), id);
                debug_assert!(clash.is_none(), "edge side used twice");
                pending.push((id, (key.0, key.1.clone(), !key.2)));
                corner_points.push((circle, offset.clone(), corner));
                corner_points.push((circle, end_offset.clone(), exit));
            }
            offset = &offset + &h;
        }
    }

    for (id, mate_key) in pending {
        let mate = *side_seg
            .get(&mate_key)
            .expect("both sides of every critical edge appear in some chain");
        out.segments[id].partner = mate;
        let kind = if out.segments[id].circle.side == out.segments[mate].circle.side {
            GluingKind::Fold
        } else {
            GluingKind::Translation
        };
        out.segments[id].kind = kind;
    }

    // labels: first new corner whose old point lies in the label's class
    for (circle, pos, old_point) in corner_points {
        if let Some(cls) = class_of(&old_point) {
            if let Some(names) = label_class.get(&cls) {
                for name in names {
                    out.labels
                        .entry(name.clone())
                        .or_insert_with(|| PointRef { circle, pos: pos.clone() });
                }
            }
        }
    }
    debug_assert_eq!(out.labels.len(), surface.labels.len(), "labels preserved");
    debug_assert_eq!(out.area_total(), surface.area_total());
    out.validate()?;
    Ok(out)
}
