//! Piecewise log-linear bilateral weight profiles.
//!
//! A profile is an increasing list of anchors `(index, ln v)`; between two
//! consecutive anchors the ratio `v_j / v_{j-1}` is constant. Anchors
//! alternate between valleys `n_k` and hills `m_k`, with `n_0` the last
//! anchor at a negative index.
//!
//! The bilateral hill/valley construction is generated lazily: its anchor
//! indices grow like `(16 k^3)^{2k}`, so at `k = 10^4` a single index has
//! about 240 000 decimal digits and the full anchor list would not fit in
//! memory. Cursors walk the anchors by exact multiplication or division.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::logcore::BigIndex;
use crate::report::{CheckEntry, CheckReport, Scale};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TbilcamiVariant {
    /// Hills `v_{m_k} = (k+2)^{1/4}`, `v_{m_{-k}} = (k+1)^{1/4}`.
    Original,
    /// All hills flattened to `v_{m_k} = 1`.
    Flattened,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Valley,
    Hill,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub index: BigIndex,
    pub logv: f64,
}

#[derive(Clone, Debug)]
enum Source {
    Explicit(Vec<Anchor>),
    Tbilcami { variant: TbilcamiVariant, k_max: u64, last: BigIndex },
}

/// Piecewise log-linear weight sequence over a finite window of ℤ.
#[derive(Clone, Debug)]
pub struct AnchorProfile {
    source: Source,
}

/// Per-step log slope `rise / span`, kept as a pair so that slopes far
/// below the f64 range stay comparable.
#[derive(Clone, Debug, PartialEq)]
pub struct Slope {
    pub rise: f64,
    pub span: BigIndex,
}

impl Slope {
    /// `(sign, ln |slope|)` ordering key.
    fn key(&self) -> (i8, f64) {
        if self.rise == 0.0 {
            (0, 0.0)
        } else {
            (self.rise.signum() as i8, self.rise.abs().ln() - self.span.ln())
        }
    }

    pub fn cmp_slope(&self, other: &Slope) -> Ordering {
        let (sa, la) = self.key();
        let (sb, lb) = other.key();
        match sa.cmp(&sb) {
            Ordering::Equal => match sa {
                0 => Ordering::Equal,
                1 => la.total_cmp(&lb),
                _ => lb.total_cmp(&la),
            },
            o => o,
        }
    }

    /// `n * slope` as f64.
    pub fn times(&self, n: &BigIndex) -> f64 {
        if self.rise == 0.0 {
            0.0
        } else {
            self.rise * BigIndex::ratio(n, &self.span)
        }
    }

    /// The per-step log ratio as f64 (underflows to 0 for huge spans).
    pub fn per_step(&self) -> f64 {
        self.times(&BigIndex::one())
    }
}

fn tbil_factor(k: i64) -> i64 {
    16 * k * k * k + 1
}

fn tbil_logv(variant: TbilcamiVariant, k: i64, role: Role) -> f64 {
    let flat = variant == TbilcamiVariant::Flattened;
    match (k.cmp(&0), role) {
        (Ordering::Equal, Role::Valley) => 0.0,
        (Ordering::Equal, Role::Hill) => {
            if flat {
                0.0
            } else {
                0.25 * 2f64.ln()
            }
        }
        (Ordering::Greater, Role::Valley) => -((2 * k) as f64).ln() / 3.0,
        (Ordering::Greater, Role::Hill) => {
            if flat {
                0.0
            } else {
                0.25 * ((k + 2) as f64).ln()
            }
        }
        (Ordering::Less, Role::Valley) => -((2 * -k + 1) as f64).ln() / 3.0,
        (Ordering::Less, Role::Hill) => {
            if flat {
                0.0
            } else {
                0.25 * ((-k + 1) as f64).ln()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pos {
    Explicit(usize),
    Tbil { k: i64, role: Role },
}

/// A position on the anchor list that can step up or down.
#[derive(Clone, Debug)]
pub struct AnchorCursor<'a> {
    profile: &'a AnchorProfile,
    pos: Pos,
    anchor: Anchor,
}

impl<'a> AnchorCursor<'a> {
    pub fn anchor(&self) -> &Anchor {
        &self.anchor
    }

    pub fn index(&self) -> &BigIndex {
        &self.anchor.index
    }

    pub fn logv(&self) -> f64 {
        self.anchor.logv
    }

    /// Level and role of the current anchor, if the profile is level-labelled.
    pub fn level(&self) -> Option<(i64, Role)> {
        match self.pos {
            Pos::Tbil { k, role } => Some((k, role)),
            Pos::Explicit(i) => self.profile.explicit_level(i),
        }
    }

    /// Move to the next anchor above; `false` at the top.
    pub fn step_up(&mut self) -> bool {
        self.step_up_take().is_some()
    }

    /// Move to the next anchor below; `false` at the bottom.
    pub fn step_down(&mut self) -> bool {
        self.step_down_take().is_some()
    }

    /// Like [`step_up`](Self::step_up), handing back the anchor just left.
    pub fn step_up_take(&mut self) -> Option<Anchor> {
        match (&self.profile.source, self.pos) {
            (Source::Explicit(v), Pos::Explicit(i)) => {
                if i + 1 >= v.len() {
                    return None;
                }
                self.pos = Pos::Explicit(i + 1);
                Some(std::mem::replace(&mut self.anchor, v[i + 1].clone()))
            }
            (Source::Tbilcami { variant, k_max, .. }, Pos::Tbil { k, role }) => {
                let cur = &self.anchor.index;
                let (nk, nrole, idx) = match role {
                    Role::Valley => {
                        let idx = match k.cmp(&0) {
                            Ordering::Greater => cur * tbil_factor(k),
                            Ordering::Equal => BigIndex::from(1),
                            Ordering::Less => cur
                                .div_exact(&BigIndex::from(tbil_factor(-k)))
                                .expect("anchor divisibility"),
                        };
                        (k, Role::Hill, idx)
                    }
                    Role::Hill => {
                        if k >= *k_max as i64 {
                            return None;
                        }
                        let idx = match k.cmp(&0) {
                            Ordering::Greater => cur * tbil_factor(k),
                            Ordering::Equal => BigIndex::from(4),
                            Ordering::Less => {
                                if k == -1 {
                                    BigIndex::from(-1)
                                } else {
                                    cur.div_exact(&BigIndex::from(tbil_factor(-k - 1)))
                                        .expect("anchor divisibility")
                                }
                            }
                        };
                        (k + 1, Role::Valley, idx)
                    }
                };
                self.pos = Pos::Tbil { k: nk, role: nrole };
                let next = Anchor { index: idx, logv: tbil_logv(*variant, nk, nrole) };
                Some(std::mem::replace(&mut self.anchor, next))
            }
            _ => unreachable!("cursor position does not match profile source"),
        }
    }

    /// Like [`step_down`](Self::step_down), handing back the anchor just left.
    pub fn step_down_take(&mut self) -> Option<Anchor> {
        match (&self.profile.source, self.pos) {
            (Source::Explicit(v), Pos::Explicit(i)) => {
                if i == 0 {
                    return None;
                }
                self.pos = Pos::Explicit(i - 1);
                Some(std::mem::replace(&mut self.anchor, v[i - 1].clone()))
            }
            (Source::Tbilcami { variant, k_max, .. }, Pos::Tbil { k, role }) => {
                let cur = &self.anchor.index;
                let (nk, nrole, idx) = match role {
                    Role::Hill => {
                        // m_k -> n_k
                        let idx = match k.cmp(&0) {
                            Ordering::Greater => cur
                                .div_exact(&BigIndex::from(tbil_factor(k)))
                                .expect("anchor divisibility"),
                            Ordering::Equal => BigIndex::from(-1),
                            Ordering::Less => cur * tbil_factor(-k),
                        };
                        (k, Role::Valley, idx)
                    }
                    Role::Valley => {
                        // n_k -> m_{k-1}
                        if k <= -(*k_max as i64) {
                            return None;
                        }
                        let idx = match k.cmp(&1) {
                            Ordering::Greater => cur
                                .div_exact(&BigIndex::from(tbil_factor(k - 1)))
                                .expect("anchor divisibility"),
                            Ordering::Equal => BigIndex::from(1),
                            Ordering::Less => {
                                if k == 0 {
                                    BigIndex::from(-4)
                                } else {
                                    cur * tbil_factor(-k)
                                }
                            }
                        };
                        (k - 1, Role::Hill, idx)
                    }
                };
                self.pos = Pos::Tbil { k: nk, role: nrole };
                let next = Anchor { index: idx, logv: tbil_logv(*variant, nk, nrole) };
                Some(std::mem::replace(&mut self.anchor, next))
            }
            _ => unreachable!("cursor position does not match profile source"),
        }
    }

    pub fn peek_up(&self) -> Option<AnchorCursor<'a>> {
        let mut c = self.clone();
        c.step_up().then_some(c)
    }

    pub fn peek_down(&self) -> Option<AnchorCursor<'a>> {
        let mut c = self.clone();
        c.step_down().then_some(c)
    }
}

/// `ln v_j` lookups that reuse the previous position, for callers that
/// walk the index one step at a time.
#[derive(Clone, Debug)]
pub struct LogVWalker<'a> {
    profile: &'a AnchorProfile,
    lo: Option<AnchorCursor<'a>>,
    hi: Option<AnchorCursor<'a>>,
}

impl<'a> LogVWalker<'a> {
    pub fn new(profile: &'a AnchorProfile) -> Self {
        LogVWalker { profile, lo: None, hi: None }
    }

    pub fn log_v(&mut self, j: &BigIndex) -> Result<f64> {
        let inside = match (&self.lo, &self.hi) {
            (Some(lo), Some(hi)) => lo.index() <= j && j <= hi.index(),
            _ => false,
        };
        if !inside {
            let lo = self.profile.cursor_at_or_below(j)?;
            let hi = lo.peek_up();
            self.hi = Some(hi.unwrap_or_else(|| lo.clone()));
            self.lo = Some(lo);
        }
        let (lo, hi) = (self.lo.as_ref().unwrap(), self.hi.as_ref().unwrap());
        if lo.index() == j {
            return Ok(lo.logv());
        }
        if hi.index() == j {
            return Ok(hi.logv());
        }
        let t = BigIndex::ratio(&(j - lo.index()), &(hi.index() - lo.index()));
        Ok(lo.logv() + t * (hi.logv() - lo.logv()))
    }
}

/// Anchor pairs `(lo, hi)` walked upward.
pub struct SegmentsUp<'a> {
    cur: Option<AnchorCursor<'a>>,
}

impl<'a> Iterator for SegmentsUp<'a> {
    type Item = (Anchor, Anchor);
    fn next(&mut self) -> Option<Self::Item> {
        let c = self.cur.as_mut()?;
        match c.step_up_take() {
            Some(lo) => Some((lo, c.anchor.clone())),
            None => {
                self.cur = None;
                None
            }
        }
    }
}

/// Anchor pairs `(lo, hi)` walked downward.
pub struct SegmentsDown<'a> {
    cur: Option<AnchorCursor<'a>>,
}

impl<'a> Iterator for SegmentsDown<'a> {
    type Item = (Anchor, Anchor);
    fn next(&mut self) -> Option<Self::Item> {
        let c = self.cur.as_mut()?;
        match c.step_down_take() {
            Some(hi) => Some((c.anchor.clone(), hi)),
            None => {
                self.cur = None;
                None
            }
        }
    }
}

impl AnchorProfile {
    /// Explicit profile; indices must be strictly increasing.
    pub fn from_anchors(anchors: Vec<Anchor>) -> Result<Self> {
        if anchors.len() < 2 {
            return domain("a profile needs at least two anchors");
        }
        for w in anchors.windows(2) {
            if w[0].index >= w[1].index {
                return domain(format!("anchor indices not increasing at {}", w[1].index));
            }
        }
        if anchors.iter().any(|a| !a.logv.is_finite()) {
            return domain("anchor log-weights must be finite");
        }
        Ok(AnchorProfile { source: Source::Explicit(anchors) })
    }

    pub fn tbilcami(variant: TbilcamiVariant, k_max: u64) -> Result<Self> {
        if k_max == 0 {
            return domain("k_max must be at least 1");
        }
        let mut m = BigIndex::from(4) * tbil_factor(1);
        for k in 2..=k_max as i64 {
            m = m * tbil_factor(k - 1) * tbil_factor(k);
        }
        Ok(AnchorProfile { source: Source::Tbilcami { variant, k_max, last: m } })
    }

    /// The generating parameters of a lazily generated hill/valley profile.
    pub fn tbilcami_params(&self) -> Option<(TbilcamiVariant, u64)> {
        match &self.source {
            Source::Tbilcami { variant, k_max, .. } => Some((*variant, *k_max)),
            Source::Explicit(_) => None,
        }
    }

    pub fn first_index(&self) -> BigIndex {
        match &self.source {
            Source::Explicit(v) => v[0].index.clone(),
            Source::Tbilcami { last, .. } => -last,
        }
    }

    pub fn last_index(&self) -> BigIndex {
        match &self.source {
            Source::Explicit(v) => v[v.len() - 1].index.clone(),
            Source::Tbilcami { last, .. } => last.clone(),
        }
    }

    pub fn contains(&self, j: &BigIndex) -> bool {
        *j >= self.first_index() && *j <= self.last_index()
    }

    /// Highest level `k` such that both `n_{±k}` and `m_{±k}` are present.
    pub fn max_level(&self) -> Option<i64> {
        match &self.source {
            Source::Tbilcami { k_max, .. } => Some(*k_max as i64),
            Source::Explicit(v) => {
                let o = self.explicit_origin()? as i64;
                let n = v.len() as i64;
                // n_{k} at o+2k, m_{k} at o+2k+1
                let up = (n - 2 - o).div_euclid(2);
                let down = o.div_euclid(2);
                Some(up.min(down))
            }
        }
    }

    fn explicit_origin(&self) -> Option<usize> {
        match &self.source {
            Source::Explicit(v) => {
                let o = v.iter().rposition(|a| a.index.is_negative())?;
                (o + 1 < v.len()).then_some(o)
            }
            Source::Tbilcami { .. } => None,
        }
    }

    fn explicit_level(&self, i: usize) -> Option<(i64, Role)> {
        let o = self.explicit_origin()? as i64;
        let d = i as i64 - o;
        let role = if d.rem_euclid(2) == 0 { Role::Valley } else { Role::Hill };
        Some((d.div_euclid(2), role))
    }

    fn origin_cursor(&self) -> AnchorCursor<'_> {
        match &self.source {
            Source::Explicit(v) => AnchorCursor { profile: self, pos: Pos::Explicit(0), anchor: v[0].clone() },
            Source::Tbilcami { variant, .. } => AnchorCursor {
                profile: self,
                pos: Pos::Tbil { k: 0, role: Role::Valley },
                anchor: Anchor { index: BigIndex::from(-1), logv: tbil_logv(*variant, 0, Role::Valley) },
            },
        }
    }

    /// Cursor at the greatest anchor with index `<= j`.
    pub fn cursor_at_or_below(&self, j: &BigIndex) -> Result<AnchorCursor<'_>> {
        if !self.contains(j) {
            return domain(format!(
                "index {j} outside profile window [{}, {}]",
                self.first_index(),
                self.last_index()
            ));
        }
        match &self.source {
            Source::Explicit(v) => {
                let i = match v.binary_search_by(|a| a.index.cmp(j)) {
                    Ok(i) => i,
                    Err(i) => i - 1,
                };
                Ok(AnchorCursor { profile: self, pos: Pos::Explicit(i), anchor: v[i].clone() })
            }
            Source::Tbilcami { .. } => {
                let mut c = self.origin_cursor();
                if *j >= *c.index() {
                    while let Some(n) = c.peek_up() {
                        if n.index() <= j {
                            c = n;
                        } else {
                            break;
                        }
                    }
                } else {
                    while c.index() > j {
                        if !c.step_down() {
                            break;
                        }
                    }
                }
                Ok(c)
            }
        }
    }

    /// Cursor at the anchor playing `role` at level `k`.
    pub fn level_cursor(&self, k: i64, role: Role) -> Result<AnchorCursor<'_>> {
        match &self.source {
            Source::Explicit(v) => {
                let o = self
                    .explicit_origin()
                    .ok_or_else(|| Error::Domain("profile has no valley/hill labelling".into()))?;
                let i = o as i64 + 2 * k + if role == Role::Hill { 1 } else { 0 };
                if i < 0 || i >= v.len() as i64 {
                    return domain(format!("anchor {role:?} at level {k} missing from profile"));
                }
                let i = i as usize;
                Ok(AnchorCursor { profile: self, pos: Pos::Explicit(i), anchor: v[i].clone() })
            }
            Source::Tbilcami { k_max, .. } => {
                if k.unsigned_abs() > *k_max {
                    return domain(format!("level {k} beyond k_max = {k_max}"));
                }
                let mut c = self.origin_cursor();
                let target = Pos::Tbil { k, role };
                if k >= 0 {
                    while c.pos != target {
                        c.step_up();
                    }
                } else {
                    while c.pos != target {
                        c.step_down();
                    }
                }
                Ok(c)
            }
        }
    }

    pub fn level_anchor(&self, k: i64, role: Role) -> Result<Anchor> {
        Ok(self.level_cursor(k, role)?.anchor)
    }

    /// `(n_k, m_k)` for each requested positive level, in one upward pass.
    pub fn positive_levels(&self, ks: &[u64]) -> Result<Vec<(BigIndex, BigIndex)>> {
        let want_max = ks.iter().copied().max().unwrap_or(0);
        let mut out = vec![None; ks.len()];
        let mut c = self.level_cursor(0, Role::Hill)?;
        let mut n_k = None;
        loop {
            match c.level() {
                Some((k, Role::Valley)) if k > 0 => n_k = Some(c.index().clone()),
                Some((k, Role::Hill)) if k > 0 => {
                    for (slot, &want) in out.iter_mut().zip(ks) {
                        if want as i64 == k {
                            *slot = Some((n_k.clone().expect("valley precedes hill"), c.index().clone()));
                        }
                    }
                    if k as u64 >= want_max {
                        break;
                    }
                }
                _ => {}
            }
            if !c.step_up() {
                break;
            }
        }
        out.into_iter()
            .zip(ks)
            .map(|(o, k)| o.ok_or_else(|| Error::Domain(format!("level {k} missing from profile"))))
            .collect()
    }

    /// `ln v_j`, interpolated log-linearly between anchors.
    pub fn log_v(&self, j: &BigIndex) -> Result<f64> {
        let c = self.cursor_at_or_below(j)?;
        if c.index() == j {
            return Ok(c.logv());
        }
        let hi = c.peek_up().expect("j below last anchor");
        let t = BigIndex::ratio(&(j - c.index()), &(hi.index() - c.index()));
        Ok(c.logv() + t * (hi.logv() - c.logv()))
    }

    /// Anchor pairs upward, starting with the pair whose half-open window
    /// `[lo, hi)` contains `from`.
    pub fn segments_up(&self, from: &BigIndex) -> Result<SegmentsUp<'_>> {
        let c = self.cursor_at_or_below(from)?;
        Ok(SegmentsUp { cur: Some(c) })
    }

    /// Anchor pairs downward, starting with the pair whose window
    /// `(lo, hi]` contains `from`.
    pub fn segments_down(&self, from: &BigIndex) -> Result<SegmentsDown<'_>> {
        let mut c = self.cursor_at_or_below(from)?;
        if c.index() < from {
            c.step_up();
        }
        Ok(SegmentsDown { cur: Some(c) })
    }

    /// All anchors in increasing order. Only sensible for modest `k_max`.
    pub fn anchors(&self) -> Vec<Anchor> {
        match &self.source {
            Source::Explicit(v) => v.clone(),
            Source::Tbilcami { .. } => {
                let mut c = self.origin_cursor();
                while c.step_down() {}
                let mut out = vec![c.anchor.clone()];
                while c.step_up() {
                    out.push(c.anchor.clone());
                }
                out
            }
        }
    }

    /// Explicit copy with the same anchors.
    pub fn materialize(&self) -> AnchorProfile {
        AnchorProfile { source: Source::Explicit(self.anchors()) }
    }

    /// Copy with the log-weight of one labelled anchor replaced.
    pub fn with_logv(&self, k: i64, role: Role, logv: f64) -> Result<AnchorProfile> {
        let mut m = self.materialize();
        let o = m
            .explicit_origin()
            .ok_or_else(|| Error::Domain("profile has no valley/hill labelling".into()))?;
        let i = o as i64 + 2 * k + if role == Role::Hill { 1 } else { 0 };
        match &mut m.source {
            Source::Explicit(v) if i >= 0 && (i as usize) < v.len() => v[i as usize].logv = logv,
            _ => return domain(format!("anchor {role:?} at level {k} missing")),
        }
        Ok(m)
    }

    /// JSON array of `{"index": "<decimal>", "logv": <float>}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.anchors()).expect("anchors serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let anchors: Vec<Anchor> = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_anchors(anchors)
    }

    /// Largest per-step log ratio `ln(v_{j+1}/v_j)` over the whole profile.
    pub fn max_step_log(&self) -> f64 {
        let first = self.first_index();
        let mut best: Option<Slope> = None;
        for (lo, hi) in self.segments_up(&first).expect("first index is inside") {
            let s = Slope { rise: hi.logv - lo.logv, span: &hi.index - &lo.index };
            if best.as_ref().map_or(true, |b| s.cmp_slope(b) == Ordering::Greater) {
                best = Some(s);
            }
        }
        best.map_or(0.0, |s| s.per_step())
    }
}

/// Anchors for the bilateral hill/valley construction with `n_0 = -1`,
/// `m_0 = 1`, `n_1 = 4`, `m_k = (16k^3+1) n_k`, `n_{k+1} = (16k^3+1) m_k`
/// and the mirrored negative side `m_{-k} = -n_k`, `n_{-k} = -m_k`.
pub fn build_tbilcami(variant: TbilcamiVariant, k_max: u64) -> Result<AnchorProfile> {
    AnchorProfile::tbilcami(variant, k_max)
}

fn segment_slope(lo: &Anchor, hi: &Anchor) -> Slope {
    Slope { rise: hi.logv - lo.logv, span: &hi.index - &lo.index }
}

/// Checks the slope and envelope hypotheses of the forward and backward
/// distributional-irregularity criteria at level `k`.
///
/// Slopes are taken over all segments between `n_{-(k+1)}` and `m_{k+1}`
/// lying outside the relevant central window. Envelope maxima and window
/// minima are read off the anchors: `ln v` is affine between consecutive
/// anchors, so its extremes over any union of whole segments sit on anchors.
pub fn verify_tbilcami(profile: &AnchorProfile, k: u64, m_const: f64) -> Result<CheckReport> {
    if k == 0 {
        return domain("level k must be positive");
    }
    let k = k as i64;
    let bottom = profile.level_cursor(-(k + 1), Role::Valley)?;
    profile.level_anchor(k + 1, Role::Hill)?;

    let n_k = profile.level_anchor(k, Role::Valley)?;
    let m_k = profile.level_anchor(k, Role::Hill)?;
    let n_mk = profile.level_anchor(-k, Role::Valley)?;
    let m_mk = profile.level_anchor(-k, Role::Hill)?;
    let m_km1 = profile.level_anchor(k - 1, Role::Hill)?;

    let mut pairs = Vec::new();
    let mut anchors = vec![bottom.anchor().clone()];
    let mut c = bottom;
    loop {
        let at_top = c.level() == Some((k + 1, Role::Hill));
        if at_top || !c.step_up() {
            break;
        }
        let lo = anchors.last().cloned().expect("nonempty");
        pairs.push((lo, c.anchor().clone()));
        anchors.push(c.anchor().clone());
    }

    let outside = |lo: &Anchor, hi: &Anchor, wlo: &BigIndex, whi: &BigIndex| hi.index <= *wlo || lo.index >= *whi;
    let window_min = |wlo: &BigIndex, whi: &BigIndex| {
        anchors
            .iter()
            .filter(|a| a.index >= *wlo && a.index <= *whi)
            .map(|a| a.logv)
            .fold(f64::INFINITY, f64::min)
    };
    let window_max = |wlo: &BigIndex, whi: &BigIndex| {
        anchors
            .iter()
            .filter(|a| a.index >= *wlo && a.index <= *whi)
            .map(|a| a.logv)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let ln_m = m_const.ln();
    let mut report = CheckReport::new(format!("tbilcami hypotheses at k = {k}"));

    // forward: S_k^{k(n_k - m_{-k})} <= min{M, min_{[m_{-k}, m_{k-1}]} v / v_{n_k}}
    let s_k = pairs
        .iter()
        .filter(|(lo, hi)| outside(lo, hi, &m_mk.index, &m_km1.index))
        .map(|(lo, hi)| segment_slope(lo, hi))
        .max_by(|a, b| a.cmp_slope(b))
        .ok_or_else(|| Error::Domain("no segments outside the forward window".into()))?;
    let expo = (&n_k.index - &m_mk.index) * k;
    let lhs = s_k.times(&expo);
    let rhs = ln_m.min(window_min(&m_mk.index, &m_km1.index) - n_k.logv);
    report.push(CheckEntry::below("forward slope bound", lhs, rhs, Scale::Log));

    // backward: s_k^{k(n_{-k} - m_k)} <= min{M, min_{[m_{-k}, m_k]} v / v_{n_{-k}}}
    let s_low = pairs
        .iter()
        .filter(|(lo, hi)| outside(lo, hi, &m_mk.index, &m_k.index))
        .map(|(lo, hi)| segment_slope(lo, hi))
        .min_by(|a, b| a.cmp_slope(b))
        .ok_or_else(|| Error::Domain("no segments outside the backward window".into()))?;
    let expo = (&n_mk.index - &m_k.index) * k;
    let lhs = s_low.times(&expo);
    let rhs = ln_m.min(window_min(&m_mk.index, &m_k.index) - n_mk.logv);
    report.push(CheckEntry::below("backward slope bound", lhs, rhs, Scale::Log));

    // envelopes: M v_{m_{-k}} >= v_j on [m_{-k}, m_{k-1}], M v_{m_k} >= v_j on [m_{-k}, m_k]
    let lhs = window_max(&m_mk.index, &m_km1.index);
    report.push(CheckEntry::at_most("forward envelope", lhs, ln_m + m_mk.logv, 0.0, Scale::Log));
    let lhs = window_max(&m_mk.index, &m_k.index);
    report.push(CheckEntry::at_most("backward envelope", lhs, ln_m + m_k.logv, 0.0, Scale::Log));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx(i: i64) -> BigIndex {
        BigIndex::from(i)
    }

    #[test]
    fn first_levels_match_recurrence() {
        let p = build_tbilcami(TbilcamiVariant::Original, 2).unwrap();
        let n1 = p.level_anchor(1, Role::Valley).unwrap();
        let m1 = p.level_anchor(1, Role::Hill).unwrap();
        assert_eq!(n1.index, idx(4));
        assert!((n1.logv - (-(2f64.ln()) / 3.0)).abs() < 1e-15);
        assert_eq!(m1.index, idx(68));
        assert!((m1.logv - 0.25 * 3f64.ln()).abs() < 1e-15);
        assert_eq!(p.level_anchor(2, Role::Valley).unwrap().index, idx(1156));
        assert_eq!(p.level_anchor(2, Role::Hill).unwrap().index, idx(149124));
        assert_eq!(p.level_anchor(-1, Role::Hill).unwrap().index, idx(-4));
        assert_eq!(p.level_anchor(-1, Role::Valley).unwrap().index, idx(-68));
        assert_eq!(p.level_anchor(-2, Role::Valley).unwrap().index, idx(-149124));
        assert_eq!(p.level_anchor(0, Role::Valley).unwrap().index, idx(-1));
        assert_eq!(p.level_anchor(0, Role::Hill).unwrap().index, idx(1));
        assert_eq!(p.first_index(), idx(-149124));
        assert_eq!(p.last_index(), idx(149124));
    }

    #[test]
    fn negative_side_values() {
        let p = build_tbilcami(TbilcamiVariant::Original, 3).unwrap();
        for k in 1..=3i64 {
            let n = p.level_anchor(-k, Role::Valley).unwrap();
            let m = p.level_anchor(-k, Role::Hill).unwrap();
            assert!((n.logv + ((2 * k + 1) as f64).ln() / 3.0).abs() < 1e-15);
            assert!((m.logv - 0.25 * ((k + 1) as f64).ln()).abs() < 1e-15);
            assert_eq!(m.index, -p.level_anchor(k, Role::Valley).unwrap().index);
            assert_eq!(n.index, -p.level_anchor(k, Role::Hill).unwrap().index);
        }
    }

    #[test]
    fn flattened_hills_are_one() {
        let p = build_tbilcami(TbilcamiVariant::Flattened, 2).unwrap();
        for k in -2..=2 {
            assert_eq!(p.level_anchor(k, Role::Hill).unwrap().logv, 0.0);
        }
        assert!((p.level_anchor(1, Role::Valley).unwrap().logv + 2f64.ln() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn lazy_and_materialized_agree() {
        let p = build_tbilcami(TbilcamiVariant::Original, 3).unwrap();
        let e = p.materialize();
        let anchors = p.anchors();
        assert_eq!(anchors.len(), 4 * 3 + 2);
        for w in anchors.windows(2) {
            assert!(w[0].index < w[1].index);
        }
        for j in [-200000i64, -5000, -68, -5, -1, 0, 1, 2, 3, 4, 50, 68, 1000, 1156, 20000] {
            let a = p.log_v(&idx(j)).unwrap();
            let b = e.log_v(&idx(j)).unwrap();
            assert!((a - b).abs() < 1e-14, "j = {j}");
        }
        for k in -3..=3 {
            for role in [Role::Valley, Role::Hill] {
                assert_eq!(p.level_anchor(k, role).unwrap(), e.level_anchor(k, role).unwrap());
            }
        }
    }

    #[test]
    fn queries_beyond_window_fail() {
        let p = build_tbilcami(TbilcamiVariant::Original, 1).unwrap();
        assert!(p.log_v(&idx(69)).is_err());
        assert!(p.log_v(&idx(-69)).is_err());
        assert!(p.level_anchor(2, Role::Valley).is_err());
    }

    #[test]
    fn log_linear_between_anchors() {
        let p = build_tbilcami(TbilcamiVariant::Original, 2).unwrap();
        let anchors = p.anchors();
        for w in anchors.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let span = (&b.index - &a.index).to_f64();
            if span < 4.0 {
                continue;
            }
            for frac in [0.25, 0.5, 0.75] {
                let off = (span * frac).floor() as i64;
                let j = &a.index + off;
                let expect = a.logv + (off as f64 / span) * (b.logv - a.logv);
                assert!((p.log_v(&j).unwrap() - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn hill_valley_monotonicity() {
        let p = build_tbilcami(TbilcamiVariant::Original, 4).unwrap();
        let mut c = p.level_cursor(-4, Role::Valley).unwrap();
        let mut prev = c.logv();
        let mut prev_role = Role::Valley;
        while c.step_up() {
            let (_, role) = c.level().unwrap();
            match prev_role {
                Role::Valley => assert!(c.logv() >= prev, "rising into a hill"),
                Role::Hill => assert!(c.logv() <= prev, "falling into a valley"),
            }
            prev = c.logv();
            prev_role = role;
        }
    }

    #[test]
    fn segments_walk_both_ways() {
        let p = build_tbilcami(TbilcamiVariant::Original, 2).unwrap();
        let up: Vec<_> = p.segments_up(&idx(0)).unwrap().map(|(a, b)| (a.index, b.index)).collect();
        assert_eq!(up[0], (idx(-1), idx(1)));
        assert_eq!(up[1], (idx(1), idx(4)));
        assert_eq!(up.last().unwrap().1, idx(149124));
        let down: Vec<_> = p.segments_down(&idx(0)).unwrap().map(|(a, b)| (a.index, b.index)).collect();
        assert_eq!(down[0], (idx(-1), idx(1)));
        assert_eq!(down[1], (idx(-4), idx(-1)));
        assert_eq!(down[2], (idx(-68), idx(-4)));
        let down: Vec<_> = p.segments_down(&idx(-4)).unwrap().map(|(a, b)| (a.index, b.index)).collect();
        assert_eq!(down[0], (idx(-68), idx(-4)));
    }

    #[test]
    fn verify_passes_for_small_levels() {
        let p = build_tbilcami(TbilcamiVariant::Original, 9).unwrap();
        // independent high-precision evaluation of both sides
        let frozen_forward = [0.16361269876631224, 0.07054613739085215, 0.04689034345190325];
        let frozen_backward = [0.043061136968514255, 0.04488659793736187, 0.03616818968313512];
        for k in 1..=8 {
            let r = verify_tbilcami(&p, k, 2.0).unwrap();
            assert!(r.all_passed(), "k = {k}: {r:?}");
            if k <= 3 {
                let f = r.get("forward slope bound").unwrap().margin;
                let b = r.get("backward slope bound").unwrap().margin;
                assert!((f - frozen_forward[k as usize - 1]).abs() < 1e-9, "k={k} f={f}");
                assert!((b - frozen_backward[k as usize - 1]).abs() < 1e-9, "k={k} b={b}");
            }
        }
    }

    #[test]
    fn verify_detects_reversed_valley() {
        let p = build_tbilcami(TbilcamiVariant::Original, 3).unwrap();
        let bad = p.with_logv(2, Role::Valley, 4f64.ln() / 3.0).unwrap();
        let r = verify_tbilcami(&bad, 2, 2.0).unwrap();
        assert!(!r.get("forward slope bound").unwrap().passed);
    }

    #[test]
    fn verify_needs_next_level() {
        let p = build_tbilcami(TbilcamiVariant::Original, 2).unwrap();
        assert!(verify_tbilcami(&p, 2, 2.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = build_tbilcami(TbilcamiVariant::Original, 1).unwrap();
        let s = p.to_json();
        assert!(s.starts_with("[{\"index\":\"-68\""));
        let q = AnchorProfile::from_json(&s).unwrap();
        assert_eq!(q.anchors(), p.anchors());
        assert_eq!(q.level_anchor(1, Role::Hill).unwrap().index, idx(68));
    }

    #[test]
    fn deep_profile_is_lazy() {
        let p = build_tbilcami(TbilcamiVariant::Original, 10_000).unwrap();
        // ~240k decimal digits
        let digits = p.last_index().ln() / std::f64::consts::LN_10;
        assert!(digits > 2.0e5 && digits < 3.0e5, "{digits}");
    }
}
