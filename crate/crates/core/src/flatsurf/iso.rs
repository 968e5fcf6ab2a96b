//! Diagram isomorphism.
//!
//! Two diagrams present the same labeled flat surface when some cylinder
//! bijection plus circle re-parametrizations carries one segment structure
//! onto the other. Because gluings propagate orientation, an isomorphism
//! either preserves every cylinder's vertical direction or reverses all of
//! them (the half-turn); per cylinder the only freedom is one rotation
//! offset, with the two circles of a cylinder locked through the twist.
//!
//! Segment subdivisions at regular unlabeled points carry no geometry, so
//! both diagrams are normalized by merging such junctions first.

use super::{CircleId, FlatSurface, GluingKind, PointRef, Side};
use crate::rational::Rat;
use std::collections::BTreeMap;

/// Merge away every junction between two segments that is a plain regular
/// point (cone angle 2π, unlabeled) where the gluings continue each other.
/// Circles are first re-parametrized to start at a singular or labeled
/// endpoint so that origin cuts carry no accidental geometry.
pub(super) fn normalize(surface: &FlatSurface) -> FlatSurface {
    let mut cur = reorigin(surface);
    loop {
        match find_mergeable(&cur) {
            Some((left, right)) => cur = merge_pair(&cur, left, right),
            None => return cur,
        }
    }
}

/// Rotate each circle's parameter origin onto its first essential
/// (cone angle ≠ 2π or labeled) endpoint; a pure re-marking of the same
/// surface, with the twist adjusted accordingly.
fn reorigin(surface: &FlatSurface) -> FlatSurface {
    let classes = surface.vertex_classes();
    let essential = |at: &PointRef| -> bool {
        classes
            .iter()
            .find(|c| c.positions.contains(at))
            .map(|c| c.angle_pi != 2 || !c.labels.is_empty())
            .unwrap_or(false)
    };
    let mut out = surface.clone();
    for cyl in 0..surface.cylinders.len() {
        for side in [Side::Bottom, Side::Top] {
            let circle = CircleId { cyl, side };
            let delta = surface
                .endpoints_on(circle)
                .into_iter()
                .find(|pos| essential(&PointRef { circle, pos: pos.clone() }));
            let delta = match delta {
                Some(d) if !d.is_zero() => d,
                _ => continue,
            };
            let circ = surface.circumference(circle).clone();
            for seg in &mut out.segments {
                if seg.circle == circle {
                    seg.start = (&seg.start - &delta).rem_euclid(&circ);
                }
            }
            for at in out.labels.values_mut() {
                if at.circle == circle {
                    at.pos = (&at.pos - &delta).rem_euclid(&circ);
                }
            }
            let tw = &mut out.cylinders[cyl].twist;
            *tw = match side {
                Side::Bottom => (&*tw - &delta).rem_euclid(&circ),
                Side::Top => (&*tw + &delta).rem_euclid(&circ),
            };
        }
    }
    out
}

fn find_mergeable(surface: &FlatSurface) -> Option<(usize, usize)> {
    let classes = surface.vertex_classes();
    let regular = |at: &PointRef| -> bool {
        classes
            .iter()
            .find(|c| c.positions.contains(at))
            .map(|c| c.angle_pi == 2 && c.labels.is_empty())
            .unwrap_or(false)
    };
    for (l, seg_l) in surface.segments.iter().enumerate() {
        let junction = seg_l.end();
        if junction >= *surface.circumference(seg_l.circle) {
            continue; // merged segment would wrap the origin
        }
        let r = match surface
            .segments
            .iter()
            .position(|s| s.circle == seg_l.circle && s.start == junction)
        {
            Some(r) => r,
            None => continue,
        };
        if r == l || seg_l.kind != surface.segments[r].kind {
            continue;
        }
        if !regular(&PointRef { circle: seg_l.circle, pos: junction }) {
            continue;
        }
        let seg_r = &surface.segments[r];
        let mate_l = &surface.segments[seg_l.partner];
        let mate_r = &surface.segments[seg_r.partner];
        if mate_l.circle != mate_r.circle {
            continue;
        }
        let contiguous = match seg_l.kind {
            GluingKind::Translation => mate_l.end() == mate_r.start,
            GluingKind::Fold => mate_r.end() == mate_l.start,
        };
        // the mates must be a distinct pair so all four segments collapse to two
        if contiguous && seg_l.partner != r && seg_r.partner != l {
            return Some((l, r));
        }
    }
    None
}

fn merge_pair(surface: &FlatSurface, l: usize, r: usize) -> FlatSurface {
    let seg_l = surface.segments[l].clone();
    let seg_r = surface.segments[r].clone();
    let (pl, pr) = (seg_l.partner, seg_r.partner);
    let merged_len = &seg_l.len + &seg_r.len;
    let mate_start = match seg_l.kind {
        GluingKind::Translation => surface.segments[pl].start.clone(),
        GluingKind::Fold => surface.segments[pr].start.clone(),
    };

    let dead = [r, pr];
    let mut remap = BTreeMap::new();
    let mut out = FlatSurface {
        cylinders: surface.cylinders.clone(),
        segments: Vec::new(),
        labels: surface.labels.clone(),
    };
    for (i, s) in surface.segments.iter().enumerate() {
        if dead.contains(&i) {
            continue;
        }
        remap.insert(i, out.segments.len());
        let mut s = s.clone();
        if i == l {
            s.len = merged_len.clone();
        }
        if i == pl {
            s.start = mate_start.clone();
            s.len = merged_len.clone();
        }
        out.segments.push(s);
    }
    for s in &mut out.segments {
        let p = if s.partner == r {
            l
        } else if s.partner == pr {
            pl
        } else {
            s.partner
        };
        s.partner = remap[&p];
    }
    out
}

/// Labeled-diagram isomorphism. With `check_labels` every named point must
/// land in the vertex class of the same name on the other side.
pub fn is_isomorphic(a: &FlatSurface, b: &FlatSurface, check_labels: bool) -> bool {
    let a = normalize(a);
    let b = normalize(b);
    if a.cylinders.len() != b.cylinders.len() || a.segments.len() != b.segments.len() {
        return false;
    }
    let profile = |s: &FlatSurface| {
        let mut v: Vec<(Rat, Rat)> = s
            .cylinders
            .iter()
            .map(|c| (c.circ.clone(), c.height.clone()))
            .collect();
        v.sort();
        v
    };
    if profile(&a) != profile(&b) {
        return false;
    }
    for flip in [false, true] {
        if try_with_flip(&a, &b, flip, check_labels) {
            return true;
        }
    }
    false
}

fn try_with_flip(a: &FlatSurface, b: &FlatSurface, flip: bool, check_labels: bool) -> bool {
    let seg0 = match a.segments_on(CircleId::bottom(0)).first().copied() {
        Some(i) => i,
        None => return false,
    };
    let src0 = &a.segments[seg0];
    let want_side = if flip { Side::Top } else { Side::Bottom };
    for tgt0 in 0..b.cylinders.len() {
        if b.cylinders[tgt0].circ != a.cylinders[0].circ
            || b.cylinders[tgt0].height != a.cylinders[0].height
        {
            continue;
        }
        for cand in b.segments_on(CircleId { cyl: tgt0, side: want_side }) {
            let tseg = &b.segments[cand];
            if tseg.len != src0.len || tseg.kind != src0.kind {
                continue;
            }
            // shift making src0 land on tseg
            let shift = if flip {
                (&tseg.start + &src0.end()).rem_euclid(&b.cylinders[tgt0].circ)
            } else {
                (&tseg.start - &src0.start).rem_euclid(&b.cylinders[tgt0].circ)
            };
            if check_assignment(a, b, flip, tgt0, shift, check_labels) {
                return true;
            }
        }
    }
    false
}

struct Mapping<'s> {
    a: &'s FlatSurface,
    b: &'s FlatSurface,
    flip: bool,
    assign: Vec<Option<(usize, Rat)>>,
}

impl<'s> Mapping<'s> {
    fn map_point(&self, circle: CircleId, pos: &Rat) -> Option<(CircleId, Rat)> {
        let (tgt, shift) = self.assign[circle.cyl].as_ref()?;
        let tw_s = &self.a.cylinders[circle.cyl].twist;
        let tw_t = &self.b.cylinders[*tgt].twist;
        let circ = &self.b.cylinders[*tgt].circ;
        let (side, val) = if self.flip {
            match circle.side {
                Side::Bottom => (Side::Top, shift - pos),
                Side::Top => (Side::Bottom, &(&(shift - tw_s) + tw_t) - pos),
            }
        } else {
            match circle.side {
                Side::Bottom => (Side::Bottom, shift + pos),
                Side::Top => (Side::Top, &(&(shift + tw_s) - tw_t) + pos),
            }
        };
        Some((CircleId { cyl: *tgt, side }, val.rem_euclid(circ)))
    }

    /// Image of a segment as (circle, start) of the image arc.
    fn map_segment(&self, seg: &super::Segment) -> Option<(CircleId, Rat)> {
        if self.flip {
            let (circle, _) = self.map_point(seg.circle, &seg.start)?;
            let (_, start) = self.map_point(seg.circle, &seg.end())?;
            Some((circle, start))
        } else {
            self.map_point(seg.circle, &seg.start)
        }
    }
}

fn check_assignment(
    a: &FlatSurface,
    b: &FlatSurface,
    flip: bool,
    tgt0: usize,
    shift0: Rat,
    check_labels: bool,
) -> bool {
    let n = a.cylinders.len();
    let mut m = Mapping {
        a,
        b,
        flip,
        assign: vec![None; n],
    };
    m.assign[0] = Some((tgt0, shift0));
    let mut queue = vec![0usize];
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut used_tgt = vec![false; n];
    used_tgt[tgt0] = true;

    while let Some(j) = queue.pop() {
        // every segment on cylinder j must map onto an actual segment of b
        for (i, seg) in a.segments.iter().enumerate() {
            if seg.circle.cyl != j {
                continue;
            }
            let (tc, tstart) = match m.map_segment(seg) {
                Some(x) => x,
                None => return false,
            };
            let timg = match b
                .segments
                .iter()
                .position(|t| t.circle == tc && t.start == tstart && t.len == seg.len)
            {
                Some(k) => k,
                None => return false,
            };
            if b.segments[timg].kind != seg.kind {
                return false;
            }
            // partner constraint fixes (or checks) the mate's cylinder
            let mate = &a.segments[seg.partner];
            let tmate = &b.segments[b.segments[timg].partner];
            if mate.len != tmate.len {
                return false;
            }
            let k = mate.circle.cyl;
            let want_side = if flip {
                mate.circle.side.opposite()
            } else {
                mate.circle.side
            };
            if tmate.circle.side != want_side {
                return false;
            }
            let shift_k = derive_shift(a, b, flip, mate, tmate);
            match &m.assign[k] {
                Some((tk, sk)) => {
                    if *tk != tmate.circle.cyl || *sk != shift_k {
                        return false;
                    }
                }
                None => {
                    if used_tgt[tmate.circle.cyl]
                        || a.cylinders[k].circ != b.cylinders[tmate.circle.cyl].circ
                        || a.cylinders[k].height != b.cylinders[tmate.circle.cyl].height
                    {
                        return false;
                    }
                    used_tgt[tmate.circle.cyl] = true;
                    m.assign[k] = Some((tmate.circle.cyl, shift_k));
                    if !seen[k] {
                        seen[k] = true;
                        queue.push(k);
                    }
                }
            }
            let _ = i;
        }
    }
    if m.assign.iter().any(|x| x.is_none()) {
        return false; // disconnected diagram; not produced by this crate
    }
    // final full verification
    for seg in &a.segments {
        let (tc, tstart) = match m.map_segment(seg) {
            Some(x) => x,
            None => return false,
        };
        let timg = match b
            .segments
            .iter()
            .position(|t| t.circle == tc && t.start == tstart && t.len == seg.len && t.kind == seg.kind)
        {
            Some(k) => k,
            None => return false,
        };
        let (mc, mstart) = match m.map_segment(&a.segments[seg.partner]) {
            Some(x) => x,
            None => return false,
        };
        let tmate = &b.segments[b.segments[timg].partner];
        if tmate.circle != mc || tmate.start != mstart {
            return false;
        }
    }
    if check_labels {
        let classes_b = b.vertex_classes();
        for (name, at) in &a.labels {
            let bt = match b.labels.get(name) {
                Some(x) => x,
                None => return false,
            };
            let (tc, tpos) = match m.map_point(at.circle, &at.pos) {
                Some(x) => x,
                None => return false,
            };
            let mapped = PointRef { circle: tc, pos: tpos };
            let ok = classes_b
                .iter()
                .any(|c| c.positions.contains(&mapped) && c.positions.contains(bt));
            if !ok {
                return false;
            }
        }
    }
    true
}

/// Per-cylinder shear amounts after which `src` becomes isomorphic to
/// `target`, if the two differ only by cylinder shears (same segment
/// combinatorics). The matching runs with an independent rotation offset
/// per circle — dropping the twist link between the two circles of a
/// cylinder — and the returned corrections restore that link.
pub fn twist_corrections(src: &FlatSurface, target: &FlatSurface) -> Option<Vec<Rat>> {
    let a = normalize(src);
    let b = normalize(target);
    if a.cylinders.len() != b.cylinders.len() || a.segments.len() != b.segments.len() {
        return None;
    }
    for flip in [false, true] {
        let seg0 = a.segments_on(CircleId::bottom(0)).first().copied()?;
        let src0 = &a.segments[seg0];
        let want_side = if flip { Side::Top } else { Side::Bottom };
        for tgt0 in 0..b.cylinders.len() {
            if b.cylinders[tgt0].circ != a.cylinders[0].circ
                || b.cylinders[tgt0].height != a.cylinders[0].height
            {
                continue;
            }
            for cand in b.segments_on(CircleId { cyl: tgt0, side: want_side }) {
                let tseg = &b.segments[cand];
                if tseg.len != src0.len || tseg.kind != src0.kind {
                    continue;
                }
                let shift = if flip {
                    (&tseg.start + &src0.end()).rem_euclid(&b.cylinders[tgt0].circ)
                } else {
                    (&tseg.start - &src0.start).rem_euclid(&b.cylinders[tgt0].circ)
                };
                if let Some(gammas) = free_shift_match(&a, &b, flip, tgt0, shift) {
                    // corrections are read off the normalized copy, but the
                    // cylinder indexing is shared with `src`
                    return Some(gammas);
                }
            }
        }
    }
    None
}

/// Search state for the free-shift matching.
#[derive(Clone)]
struct FreeState {
    cyl_map: Vec<Option<usize>>,
    used_tgt: Vec<bool>,
    shifts: BTreeMap<CircleId, Rat>,
}

/// Match segment structures with one free rotation per circle; returns the
/// shear correction per source cylinder when a matching exists. Shifts
/// propagate through gluings; circles glued only to themselves need fresh
/// seeds, hence the backtracking.
fn free_shift_match(
    a: &FlatSurface,
    b: &FlatSurface,
    flip: bool,
    tgt0: usize,
    shift0: Rat,
) -> Option<Vec<Rat>> {
    let n = a.cylinders.len();
    let mut cyl_map: Vec<Option<usize>> = vec![None; n];
    let mut used_tgt = vec![false; n];
    cyl_map[0] = Some(tgt0);
    used_tgt[tgt0] = true;
    let mut shifts = BTreeMap::new();
    shifts.insert(CircleId::bottom(0), shift0);
    let state = FreeState { cyl_map, used_tgt, shifts };
    free_search(a, b, flip, state)
}

fn img_side(flip: bool, side: Side) -> Side {
    if flip {
        side.opposite()
    } else {
        side
    }
}

fn free_search(a: &FlatSurface, b: &FlatSurface, flip: bool, mut st: FreeState) -> Option<Vec<Rat>> {
    // propagate to a fixed point
    loop {
        let mut progress = false;
        let mut all_known = true;
        for seg in &a.segments {
            let shift = match st.shifts.get(&seg.circle) {
                Some(s) => s.clone(),
                None => {
                    all_known = false;
                    continue;
                }
            };
            let tgt_cyl = st.cyl_map[seg.circle.cyl].expect("shift implies cylinder mapping");
            let tc = CircleId { cyl: tgt_cyl, side: img_side(flip, seg.circle.side) };
            let circ = &b.cylinders[tc.cyl].circ;
            let tstart = if flip {
                (&shift - &seg.end()).rem_euclid(circ)
            } else {
                (&shift + &seg.start).rem_euclid(circ)
            };
            let timg = b
                .segments
                .iter()
                .position(|t| t.circle == tc && t.start == tstart && t.len == seg.len && t.kind == seg.kind)?;
            let mate = &a.segments[seg.partner];
            let tmate = &b.segments[b.segments[timg].partner];
            if mate.len != tmate.len || mate.kind != tmate.kind {
                return None;
            }
            let k = mate.circle.cyl;
            if tmate.circle.side != img_side(flip, mate.circle.side) {
                return None;
            }
            match st.cyl_map[k] {
                Some(tk) => {
                    if tk != tmate.circle.cyl {
                        return None;
                    }
                }
                None => {
                    if st.used_tgt[tmate.circle.cyl]
                        || a.cylinders[k].circ != b.cylinders[tmate.circle.cyl].circ
                        || a.cylinders[k].height != b.cylinders[tmate.circle.cyl].height
                    {
                        return None;
                    }
                    st.cyl_map[k] = Some(tmate.circle.cyl);
                    st.used_tgt[tmate.circle.cyl] = true;
                    progress = true;
                }
            }
            let mcirc = &b.cylinders[tmate.circle.cyl].circ;
            let mshift = if flip {
                (&tmate.start + &mate.end()).rem_euclid(mcirc)
            } else {
                (&tmate.start - &mate.start).rem_euclid(mcirc)
            };
            match st.shifts.get(&mate.circle) {
                Some(existing) => {
                    if *existing != mshift {
                        return None;
                    }
                }
                None => {
                    st.shifts.insert(mate.circle, mshift);
                    progress = true;
                }
            }
        }
        if all_known {
            return finish_free(a, b, flip, &st);
        }
        if !progress {
            break;
        }
    }

    // stalled: seed the first unassigned circle and branch
    let next = (0..a.cylinders.len())
        .flat_map(|cyl| [CircleId::bottom(cyl), CircleId::top(cyl)])
        .find(|c| !st.shifts.contains_key(c) && a.segments.iter().any(|s| s.circle == *c))?;
    let seg0_idx = a.segments_on(next).first().copied()?;
    let seg0 = &a.segments[seg0_idx];
    // candidate target cylinders: the assigned one, or any unused match
    let tgt_cyls: Vec<usize> = match st.cyl_map[next.cyl] {
        Some(t) => vec![t],
        None => (0..b.cylinders.len())
            .filter(|&t| {
                !st.used_tgt[t]
                    && b.cylinders[t].circ == a.cylinders[next.cyl].circ
                    && b.cylinders[t].height == a.cylinders[next.cyl].height
            })
            .collect(),
    };
    for tgt in tgt_cyls {
        let tc = CircleId { cyl: tgt, side: img_side(flip, next.side) };
        for cand in b.segments_on(tc) {
            let tseg = &b.segments[cand];
            if tseg.len != seg0.len || tseg.kind != seg0.kind {
                continue;
            }
            let circ = &b.cylinders[tgt].circ;
            let shift = if flip {
                (&tseg.start + &seg0.end()).rem_euclid(circ)
            } else {
                (&tseg.start - &seg0.start).rem_euclid(circ)
            };
            let mut branch = st.clone();
            if branch.cyl_map[next.cyl].is_none() {
                branch.cyl_map[next.cyl] = Some(tgt);
                branch.used_tgt[tgt] = true;
            }
            branch.shifts.insert(next, shift);
            if let Some(out) = free_search(a, b, flip, branch) {
                return Some(out);
            }
        }
    }
    None
}

/// Twist corrections restoring the per-cylinder link between circle shifts.
fn finish_free(a: &FlatSurface, b: &FlatSurface, flip: bool, st: &FreeState) -> Option<Vec<Rat>> {
    let n = a.cylinders.len();
    let mut gammas = Vec::with_capacity(n);
    for j in 0..n {
        let beta = st.shifts.get(&CircleId::bottom(j))?.clone();
        let tau = st.shifts.get(&CircleId::top(j))?.clone();
        let tk = st.cyl_map[j]?;
        let tw_s = &a.cylinders[j].twist;
        let tw_t = &b.cylinders[tk].twist;
        let circ = &a.cylinders[j].circ;
        // non-flip: want tau = beta + tw_s' - tw_t; flip: want
        // tau = beta - tw_s' + tw_t; with tw_s' = tw_s + gamma
        let gamma = if flip {
            (&(&beta - &tau) + tw_t) - tw_s
        } else {
            (&(&tau - &beta) + tw_t) - tw_s
        };
        gammas.push(gamma.rem_euclid(circ));
    }
    Some(gammas)
}

/// Shift for the mate's cylinder so that `mate` lands exactly on `tmate`.
fn derive_shift(
    a: &FlatSurface,
    b: &FlatSurface,
    flip: bool,
    mate: &super::Segment,
    tmate: &super::Segment,
) -> Rat {
    let tw_s = &a.cylinders[mate.circle.cyl].twist;
    let tw_t = &b.cylinders[tmate.circle.cyl].twist;
    let circ = &b.cylinders[tmate.circle.cyl].circ;
    let raw = if flip {
        // bottom-side reflection offset: tstart = shift - mate.end()
        match mate.circle.side {
            Side::Bottom => &tmate.start + &mate.end(),
            Side::Top => &(&(&tmate.start + &mate.end()) + tw_s) - tw_t,
        }
    } else {
        match mate.circle.side {
            Side::Bottom => &tmate.start - &mate.start,
            Side::Top => &(&(&tmate.start - &mate.start) - tw_s) + tw_t,
        }
    };
    raw.rem_euclid(circ)
}

/// Test-support: expose the normalized (re-origined, merged) presentation.
pub fn normalized_presentation(surface: &FlatSurface) -> FlatSurface {
    normalize(surface)
}
