//! Weighted shifts on sequence spaces and closed-form orbit norms.
//!
//! Unilateral spaces are unweighted `ℓ^p(ℕ)` with 1-based indices and the
//! weights carried by the operator. Bilateral spaces are `ℓ^p(v, ℤ)` with
//! `‖x‖ = (Σ |x_j|^p v_j)^{1/p}` and the unweighted shift `T e_j = e_{j+1}`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::logcore::{BigIndex, LogReal, LogSum};
use crate::weights::{Anchor, AnchorProfile, LogVWalker, Slope, WeightKind, WeightModel};

/// Finitely supported vector. `aux` holds the identity summand of
/// `X ⊕ X` and is empty for plain vectors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    pub entries: Vec<(BigIndex, LogReal)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aux: Vec<(BigIndex, LogReal)>,
}

fn normalize(mut v: Vec<(BigIndex, LogReal)>) -> Vec<(BigIndex, LogReal)> {
    v.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out: Vec<(BigIndex, LogReal)> = Vec::with_capacity(v.len());
    for (i, c) in v {
        match out.last_mut() {
            Some((j, d)) if *j == i => *d = *d + c,
            _ => out.push((i, c)),
        }
    }
    out.retain(|(_, c)| !c.is_zero());
    out
}

impl SparseVec {
    pub fn zero() -> Self {
        SparseVec::default()
    }

    pub fn new(entries: Vec<(BigIndex, LogReal)>) -> Self {
        SparseVec { entries: normalize(entries), aux: Vec::new() }
    }

    pub fn with_aux(mut self, aux: Vec<(BigIndex, LogReal)>) -> Self {
        self.aux = normalize(aux);
        self
    }

    pub fn basis(k: impl Into<BigIndex>) -> Self {
        SparseVec { entries: vec![(k.into(), LogReal::ONE)], aux: Vec::new() }
    }

    pub fn from_pairs(pairs: &[(i64, f64)]) -> Self {
        Self::new(pairs.iter().map(|&(i, c)| (BigIndex::from(i), LogReal::from_f64(c))).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty() && self.aux.is_empty()
    }

    pub fn support_len(&self) -> usize {
        self.entries.len() + self.aux.len()
    }

    pub fn scale(&self, c: LogReal) -> Self {
        let f = |v: &[(BigIndex, LogReal)]| normalize(v.iter().map(|(i, x)| (i.clone(), *x * c)).collect());
        SparseVec { entries: f(&self.entries), aux: f(&self.aux) }
    }

    pub fn add(&self, other: &SparseVec) -> Self {
        let cat = |a: &[(BigIndex, LogReal)], b: &[(BigIndex, LogReal)]| {
            normalize(a.iter().chain(b.iter()).cloned().collect())
        };
        SparseVec { entries: cat(&self.entries, &other.entries), aux: cat(&self.aux, &other.aux) }
    }

    pub fn sub(&self, other: &SparseVec) -> Self {
        self.add(&other.scale(-LogReal::ONE))
    }

    pub fn coeff(&self, k: &BigIndex) -> LogReal {
        self.entries.iter().find(|(i, _)| i == k).map_or(LogReal::ZERO, |(_, c)| *c)
    }
}

#[derive(Clone, Debug)]
pub enum OpKind {
    UnilateralBackward(WeightModel),
    UnilateralForward(WeightModel),
    BilateralForward(Arc<AnchorProfile>),
    BilateralBackward(Arc<AnchorProfile>),
    DirectSumWithIdentity(Box<ShiftOperator>),
    Identity,
}

#[derive(Clone, Debug)]
pub struct ShiftOperator {
    pub kind: OpKind,
    pub p: f64,
}

impl ShiftOperator {
    pub fn new(kind: OpKind, p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return domain(format!("p = {p} must satisfy 1 <= p < inf"));
        }
        if let OpKind::UnilateralBackward(w) | OpKind::UnilateralForward(w) = &kind {
            if w.as_profile().is_some() {
                return domain("unilateral shifts take unilateral weight models");
            }
        }
        Ok(ShiftOperator { kind, p })
    }

    pub fn backward(w: WeightModel) -> Self {
        Self::new(OpKind::UnilateralBackward(w), 1.0).expect("valid")
    }

    pub fn forward(w: WeightModel) -> Self {
        Self::new(OpKind::UnilateralForward(w), 1.0).expect("valid")
    }

    pub fn bilateral_forward(v: AnchorProfile, p: f64) -> Result<Self> {
        Self::new(OpKind::BilateralForward(Arc::new(v)), p)
    }

    pub fn bilateral_backward(v: AnchorProfile, p: f64) -> Result<Self> {
        Self::new(OpKind::BilateralBackward(Arc::new(v)), p)
    }

    pub fn identity() -> Self {
        Self::new(OpKind::Identity, 1.0).expect("valid")
    }

    pub fn sum_identity(inner: ShiftOperator) -> Self {
        let p = inner.p;
        Self::new(OpKind::DirectSumWithIdentity(Box::new(inner)), p).expect("valid")
    }

    pub fn with_p(mut self, p: f64) -> Result<Self> {
        if let OpKind::DirectSumWithIdentity(inner) = &mut self.kind {
            **inner = inner.as_ref().clone().with_p(p)?;
        }
        Self::new(self.kind, p)
    }

    fn profile(&self) -> Option<&AnchorProfile> {
        match &self.kind {
            OpKind::BilateralForward(v) | OpKind::BilateralBackward(v) => Some(v),
            OpKind::DirectSumWithIdentity(inner) => inner.profile(),
            _ => None,
        }
    }

    /// Upper bound for `‖T‖` from single weights (or single steps of `v`).
    pub fn norm_bound(&self) -> f64 {
        match &self.kind {
            OpKind::UnilateralBackward(w) | OpKind::UnilateralForward(w) => w.max_log_weight().exp(),
            OpKind::BilateralForward(v) => (v.max_step_log() / self.p).exp(),
            OpKind::BilateralBackward(v) => (v.materialize_inverse().max_step_log() / self.p).exp(),
            OpKind::DirectSumWithIdentity(inner) => inner.norm_bound().max(1.0),
            OpKind::Identity => 1.0,
        }
    }

    fn check_support(&self, x: &SparseVec) -> Result<()> {
        let bilateral = self.profile().is_some();
        let main_ok = |v: &[(BigIndex, LogReal)]| bilateral || v.iter().all(|(i, _)| i.is_positive());
        if !main_ok(&x.entries) || !main_ok(&x.aux) {
            return domain("unilateral vectors are indexed from 1");
        }
        if !x.aux.is_empty() && !matches!(self.kind, OpKind::DirectSumWithIdentity(_)) {
            return domain("vector has an identity component but the operator is not a direct sum");
        }
        Ok(())
    }

    /// One application of the operator.
    pub fn apply(&self, x: &SparseVec) -> Result<SparseVec> {
        self.check_support(x)?;
        Ok(match &self.kind {
            OpKind::UnilateralBackward(w) => {
                let mut out = Vec::with_capacity(x.entries.len());
                for (k, c) in &x.entries {
                    if *k > 1 {
                        out.push((k.pred(), *c * w.log_weight(k)?));
                    }
                }
                SparseVec::new(out)
            }
            OpKind::UnilateralForward(w) => {
                let mut out = Vec::with_capacity(x.entries.len());
                for (k, c) in &x.entries {
                    let k1 = k.succ();
                    let wk = w.log_weight(&k1)?;
                    out.push((k1, *c * wk));
                }
                SparseVec::new(out)
            }
            OpKind::BilateralForward(_) => {
                SparseVec::new(x.entries.iter().map(|(k, c)| (k.succ(), *c)).collect())
            }
            OpKind::BilateralBackward(_) => {
                SparseVec::new(x.entries.iter().map(|(k, c)| (k.pred(), *c)).collect())
            }
            OpKind::DirectSumWithIdentity(inner) => {
                let main = inner.apply(&SparseVec::new(x.entries.clone()))?;
                SparseVec { entries: main.entries, aux: x.aux.clone() }
            }
            OpKind::Identity => x.clone(),
        })
    }

    /// `T^j x` in closed form.
    pub fn power_apply(&self, x: &SparseVec, j: &BigIndex) -> Result<SparseVec> {
        self.check_support(x)?;
        if j.is_negative() {
            return domain("negative power");
        }
        Ok(match &self.kind {
            OpKind::UnilateralBackward(w) => {
                let mut out = Vec::new();
                for (k, c) in &x.entries {
                    if j < k {
                        let base = k - j;
                        out.push((base.clone(), *c * LogReal::from_ln(w.window_log(&base, j)?)));
                    }
                }
                SparseVec::new(out)
            }
            OpKind::UnilateralForward(w) => {
                let mut out = Vec::new();
                for (k, c) in &x.entries {
                    out.push((k + j, *c * LogReal::from_ln(w.window_log(k, j)?)));
                }
                SparseVec::new(out)
            }
            OpKind::BilateralForward(_) => SparseVec::new(x.entries.iter().map(|(k, c)| (k + j, *c)).collect()),
            OpKind::BilateralBackward(_) => SparseVec::new(x.entries.iter().map(|(k, c)| (k - j, *c)).collect()),
            OpKind::DirectSumWithIdentity(inner) => {
                let main = inner.power_apply(&SparseVec::new(x.entries.clone()), j)?;
                SparseVec { entries: main.entries, aux: x.aux.clone() }
            }
            OpKind::Identity => x.clone(),
        })
    }

    fn entries_norm_p(&self, v: &[(BigIndex, LogReal)], walker: Option<&mut LogVWalker<'_>>) -> Result<LogSum> {
        let mut acc = LogSum::new();
        match walker {
            Some(w) => {
                for (i, c) in v {
                    acc.push(LogReal::from_ln(self.p * c.logmag() + w.log_v(i)?));
                }
            }
            None => {
                for (_, c) in v {
                    acc.push(LogReal::from_ln(self.p * c.logmag()));
                }
            }
        }
        Ok(acc)
    }

    /// Norm of `x` in the operator's space.
    pub fn norm(&self, x: &SparseVec) -> Result<LogReal> {
        let mut walker = self.profile().map(LogVWalker::new);
        let mut acc = self.entries_norm_p(&x.entries, walker.as_mut())?;
        if !x.aux.is_empty() {
            let aux = self.entries_norm_p(&x.aux, walker.as_mut())?;
            acc.push(aux.value());
        }
        Ok(acc.value().powf(1.0 / self.p))
    }

    /// `‖T^j x‖`, computed without iterating the operator.
    pub fn orbit_norm(&self, x: &SparseVec, j: &BigIndex) -> Result<LogReal> {
        self.norm(&self.power_apply(x, j)?)
    }

    /// `‖T^n‖`, the supremum over windows of `n` consecutive weights
    /// (`w_1` never acts).
    pub fn operator_norm(&self, n: &BigIndex) -> Result<LogReal> {
        if n.is_negative() {
            return domain("negative power");
        }
        match &self.kind {
            OpKind::UnilateralBackward(w) | OpKind::UnilateralForward(w) => {
                let l = match &w.kind {
                    WeightKind::Harmonic => n.succ().ln(),
                    WeightKind::BlockHalvesTwos => n.to_f64() * std::f64::consts::LN_2,
                    WeightKind::Constant(c) => n.to_f64() * c.ln(),
                    WeightKind::ExplicitList { logs, prefix } => {
                        let n = n
                            .to_u64()
                            .filter(|&n| (n as usize) < logs.len())
                            .ok_or_else(|| Error::Domain(format!("power {n} exceeds explicit list")))?
                            as usize;
                        (1..=logs.len() - n).map(|k| prefix[k + n] - prefix[k]).fold(f64::NEG_INFINITY, f64::max)
                    }
                    WeightKind::Profile(_) => unreachable!("checked at construction"),
                };
                Ok(LogReal::from_ln(l))
            }
            OpKind::Identity => Ok(LogReal::ONE),
            OpKind::DirectSumWithIdentity(inner) => {
                let t = inner.operator_norm(n)?;
                Ok(if t > LogReal::ONE { t } else { LogReal::ONE })
            }
            OpKind::BilateralForward(_) | OpKind::BilateralBackward(_) => {
                Err(Error::Capability("operator norm is implemented for unilateral shifts only".into()))
            }
        }
    }

    /// Direct evaluation of `‖T^j x‖` for `j = 1, 2, …` by repeated application.
    pub fn orbit_walk<'a>(&'a self, x: &SparseVec) -> Result<OrbitWalk<'a>> {
        self.check_support(x)?;
        Ok(OrbitWalk {
            op: self,
            cur: x.clone(),
            walker: self.profile().map(LogVWalker::new),
            aux_norm_p: None,
        })
    }

    /// Closed-form segment description of `j ↦ ‖T^j x‖` on `[1, horizon]`.
    pub fn orbit_norm_series(&self, x: &SparseVec, horizon: &BigIndex) -> Result<OrbitNormSeries> {
        OrbitNormSeries::build(self, x, horizon)
    }
}

impl AnchorProfile {
    /// Profile of `j ↦ v_{-j}`; the backward shift on `ℓ^p(v)` is conjugate
    /// to the forward shift on the reflected weight.
    fn materialize_inverse(&self) -> AnchorProfile {
        let mut a = self.anchors();
        a.reverse();
        for x in &mut a {
            x.index = -&x.index;
        }
        AnchorProfile::from_anchors(a).expect("reflection keeps order")
    }
}

/// Iterator-like direct evaluation of orbit norms.
pub struct OrbitWalk<'a> {
    op: &'a ShiftOperator,
    cur: SparseVec,
    walker: Option<LogVWalker<'a>>,
    aux_norm_p: Option<LogReal>,
}

impl<'a> OrbitWalk<'a> {
    /// Advances one step and returns the new norm.
    pub fn next_norm(&mut self) -> Result<LogReal> {
        let op = self.op;
        let (main_op, aux) = match &op.kind {
            OpKind::DirectSumWithIdentity(inner) => (inner.as_ref(), true),
            _ => (op, false),
        };
        let next = main_op.apply(&SparseVec::new(std::mem::take(&mut self.cur.entries)))?;
        self.cur.entries = next.entries;
        let mut acc = op.entries_norm_p(&self.cur.entries, self.walker.as_mut())?;
        if aux && !self.cur.aux.is_empty() {
            if self.aux_norm_p.is_none() {
                let a = op.entries_norm_p(&self.cur.aux, self.walker.as_mut())?.value();
                self.aux_norm_p = Some(a);
            }
            acc.push(self.aux_norm_p.unwrap());
        }
        Ok(acc.value().powf(1.0 / op.p))
    }

    /// True once the orbit has reached zero for good.
    pub fn is_dead(&self) -> bool {
        self.cur.is_zero()
    }
}

/// One geometric piece: `ln ‖T^j x‖ = log_a + (j - start) · rate` on
/// `start ..= end`.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub start: BigIndex,
    pub end: BigIndex,
    /// `end - start + 1`.
    pub count: BigIndex,
    pub log_a: f64,
    pub rate: Slope,
}

impl Segment {
    pub fn log_at(&self, j: &BigIndex) -> f64 {
        self.log_a + self.rate.times(&(j - &self.start))
    }
}

#[derive(Clone, Debug)]
enum PartKind {
    Backward { w: WeightModel, k: BigIndex },
    Forward { w: WeightModel, k: BigIndex },
    Profile { v: Arc<AnchorProfile>, s: BigIndex, forward: bool, p: f64 },
    Constant,
}

/// `|c| · ‖T^j e_k‖` for one support point (or a constant orbit).
#[derive(Clone, Debug)]
pub struct Part {
    log_coeff: f64,
    kind: PartKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Tail {
    /// Every term with `j ≥` this index vanishes.
    ZeroAfter(BigIndex),
    Continues,
}

#[derive(Clone, Debug)]
enum Mode {
    /// Sum of closed-form single-support series (`p = 1` or a single part).
    Exact(Vec<Part>),
    /// Only direct per-`j` evaluation is available.
    Loop,
}

/// `j ↦ ‖T^j x‖` on `[1, horizon]`.
#[derive(Clone, Debug)]
pub struct OrbitNormSeries {
    pub op: ShiftOperator,
    pub x: SparseVec,
    pub horizon: BigIndex,
    pub tail: Tail,
    mode: Mode,
}

impl OrbitNormSeries {
    fn build(op: &ShiftOperator, x: &SparseVec, horizon: &BigIndex) -> Result<Self> {
        op.check_support(x)?;
        if !horizon.is_positive() {
            return domain("horizon must be at least 1");
        }
        let (main_op, aux) = match &op.kind {
            OpKind::DirectSumWithIdentity(inner) => (inner.as_ref(), &x.aux),
            _ => (op, &x.aux),
        };
        let mut parts = Vec::new();
        for (k, c) in &x.entries {
            let kind = match &main_op.kind {
                OpKind::UnilateralBackward(w) => PartKind::Backward { w: w.clone(), k: k.clone() },
                OpKind::UnilateralForward(w) => {
                    if let Some(last) = w.last_index() {
                        if &(k + horizon) > &last {
                            return domain(format!("horizon {horizon} runs past the last weight {last}"));
                        }
                    }
                    PartKind::Forward { w: w.clone(), k: k.clone() }
                }
                OpKind::BilateralForward(v) | OpKind::BilateralBackward(v) => {
                    let forward = matches!(main_op.kind, OpKind::BilateralForward(_));
                    let reach = if forward { k + horizon } else { k - horizon };
                    if !v.contains(&reach) || !v.contains(k) {
                        return domain(format!(
                            "orbit of e_{k} to horizon {horizon} leaves the profile window [{}, {}]",
                            v.first_index(),
                            v.last_index()
                        ));
                    }
                    PartKind::Profile { v: v.clone(), s: k.clone(), forward, p: main_op.p }
                }
                OpKind::Identity => PartKind::Constant,
                OpKind::DirectSumWithIdentity(_) => {
                    return Err(Error::Capability("nested direct sums are not supported".into()))
                }
            };
            let log_coeff = match kind {
                PartKind::Profile { .. } | PartKind::Constant if matches!(main_op.kind, OpKind::Identity) => {
                    op.norm(&SparseVec::new(vec![(k.clone(), *c)]))?.logmag()
                }
                _ => c.logmag(),
            };
            parts.push(Part { log_coeff, kind });
        }
        if !aux.is_empty() {
            let n = op.norm(&SparseVec { entries: Vec::new(), aux: aux.clone() })?;
            parts.push(Part { log_coeff: n.logmag(), kind: PartKind::Constant });
        }
        let tail = if !parts.is_empty() && parts.iter().all(|p| matches!(p.kind, PartKind::Backward { .. })) {
            let kmax = x.entries.iter().map(|(k, _)| k).max().expect("nonempty").clone();
            Tail::ZeroAfter(kmax)
        } else if parts.is_empty() {
            Tail::ZeroAfter(BigIndex::one())
        } else {
            Tail::Continues
        };
        let identity_like = matches!(main_op.kind, OpKind::Identity);
        let mode = if op.p == 1.0 || parts.len() <= 1 {
            Mode::Exact(parts)
        } else if identity_like && x.aux.is_empty() {
            let n = op.norm(x)?;
            Mode::Exact(vec![Part { log_coeff: n.logmag(), kind: PartKind::Constant }])
        } else {
            Mode::Loop
        };
        Ok(OrbitNormSeries { op: op.clone(), x: x.clone(), horizon: horizon.clone(), tail, mode })
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.mode, Mode::Exact(_))
    }

    pub fn parts(&self) -> &[Part] {
        match &self.mode {
            Mode::Exact(p) => p,
            Mode::Loop => &[],
        }
    }

    /// Segments of a single-part series, in increasing `j`.
    pub fn segments(&self) -> Result<Vec<Segment>> {
        match self.parts() {
            [] if self.is_exact() => Ok(Vec::new()),
            [p] => p.segments(&self.horizon)?.collect(),
            _ => Err(Error::Capability("segments are listed per part for multi-support vectors".into())),
        }
    }

    /// `‖T^j x‖` for one `j` in `[0, horizon]`.
    pub fn value_at(&self, j: &BigIndex) -> Result<LogReal> {
        if j > &self.horizon {
            return domain(format!("j = {j} beyond horizon {}", self.horizon));
        }
        self.op.orbit_norm(&self.x, j)
    }
}

impl Part {
    pub fn log_coeff(&self) -> f64 {
        self.log_coeff
    }

    /// Streams the geometric segments of this part on `[1, horizon]`.
    pub fn segments<'a>(&'a self, horizon: &BigIndex) -> Result<Box<dyn Iterator<Item = Result<Segment>> + 'a>> {
        let horizon = horizon.clone();
        let c = self.log_coeff;
        Ok(match &self.kind {
            PartKind::Constant => Box::new(std::iter::once(Ok(Segment {
                start: BigIndex::one(),
                count: horizon.clone(),
                end: horizon,
                log_a: c,
                rate: Slope { rise: 0.0, span: BigIndex::one() },
            }))),
            PartKind::Backward { w, k } => {
                let last = if &k.pred() < &horizon { k.pred() } else { horizon };
                let mut a = BigIndex::one();
                Box::new(std::iter::from_fn(move || {
                    if a > last {
                        return None;
                    }
                    let seg = (|| {
                        let base = k - &a;
                        let run = w.run_containing(&base)?;
                        let mut b = k - &run.lo + 1i64;
                        if b > last {
                            b = last.clone();
                        }
                        let log_a = c + w.window_log(&base, &a)?;
                        let count = &(&b - &a) + 1i64;
                        Ok(Segment {
                            start: a.clone(),
                            end: b,
                            count,
                            log_a,
                            rate: Slope { rise: run.log_w, span: BigIndex::one() },
                        })
                    })();
                    match &seg {
                        Ok(s) => a = s.end.succ(),
                        Err(_) => a = last.succ(),
                    }
                    Some(seg)
                }))
            }
            PartKind::Forward { w, k } => {
                let mut a = BigIndex::one();
                Box::new(std::iter::from_fn(move || {
                    if a > horizon {
                        return None;
                    }
                    let seg = (|| {
                        let next = &(k + &a) + 1i64;
                        let run = w.run_containing(&next)?;
                        let mut b = match &run.hi {
                            Some(hi) => hi - k,
                            None => horizon.clone(),
                        };
                        if b > horizon {
                            b = horizon.clone();
                        }
                        let log_a = c + w.window_log(k, &a)?;
                        let count = &(&b - &a) + 1i64;
                        Ok(Segment {
                            start: a.clone(),
                            end: b,
                            count,
                            log_a,
                            rate: Slope { rise: run.log_w, span: BigIndex::one() },
                        })
                    })();
                    match &seg {
                        Ok(s) => a = s.end.succ(),
                        Err(_) => a = horizon.succ(),
                    }
                    Some(seg)
                }))
            }
            PartKind::Profile { v, s, forward: true, p } => {
                let p = *p;
                let mut cur = v.cursor_at_or_below(s)?;
                let s = s.clone();
                let s_zero = s.is_zero();
                Box::new(std::iter::from_fn(move || loop {
                    let lo = cur.step_up_take()?;
                    let hi = cur.anchor();
                    let raw = if s_zero { &lo.index + 1i64 } else { &(&lo.index - &s) + 1i64 };
                    let clipped = !raw.is_positive();
                    let start = if clipped { BigIndex::one() } else { raw };
                    if start > horizon {
                        return None;
                    }
                    let end = if s_zero { hi.index.clone() } else { &hi.index - &s };
                    if end < start {
                        continue;
                    }
                    let span = &hi.index - &lo.index;
                    let off = if clipped { &(&s + &start) - &lo.index } else { BigIndex::one() };
                    return Some(Ok(profile_segment(start, end, &horizon, clipped, &lo, hi, span, off, c, p)));
                }))
            }
            PartKind::Profile { v, s, forward: false, p } => {
                let p = *p;
                let mut cur = v.cursor_at_or_below(s)?;
                if cur.index() < s {
                    cur.step_up();
                }
                let s = s.clone();
                Box::new(std::iter::from_fn(move || loop {
                    let hi = cur.step_down_take()?;
                    let lo = cur.anchor();
                    let raw = &(&s - &hi.index) + 1i64;
                    let clipped = !raw.is_positive();
                    let start = if clipped { BigIndex::one() } else { raw };
                    if start > horizon {
                        return None;
                    }
                    let end = &s - &lo.index;
                    if end < start {
                        continue;
                    }
                    let span = &hi.index - &lo.index;
                    // distance of s - start from the upper anchor
                    let off = if clipped { &hi.index - &(&s - &start) } else { BigIndex::one() };
                    return Some(Ok(profile_segment(start, end, &horizon, clipped, &hi, lo, span, off, c, p)));
                }))
            }
        })
    }
}

/// Segment over anchors `from → to` entered `off` steps past `from`.
#[allow(clippy::too_many_arguments)]
fn profile_segment(
    start: BigIndex,
    end: BigIndex,
    horizon: &BigIndex,
    clipped: bool,
    from: &Anchor,
    to: &Anchor,
    span: BigIndex,
    off: BigIndex,
    c: f64,
    p: f64,
) -> Segment {
    let rise = to.logv - from.logv;
    let logv = from.logv + rise * BigIndex::ratio(&off, &span);
    let (end, count) = if &end > horizon {
        let count = &(horizon - &start) + 1i64;
        (horizon.clone(), count)
    } else if clipped {
        let count = &(&end - &start) + 1i64;
        (end, count)
    } else {
        (end, span.clone())
    };
    Segment { start, end, count, log_a: c + logv / p, rate: Slope { rise: rise / p, span } }
}

/// `x` with `x_{n(n+1)} = 2^{-n}` for `n = 1..=n_max`.
pub fn special_block_vector(n_max: u64) -> Result<SparseVec> {
    if n_max == 0 {
        return domain("n_max must be at least 1");
    }
    let ln2 = std::f64::consts::LN_2;
    Ok(SparseVec::new(
        (1..=n_max).map(|n| (BigIndex::from(n * (n + 1)), LogReal::from_ln(-(n as f64) * ln2))).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{build_tbilcami, Domain, TbilcamiVariant};

    fn idx(i: i64) -> BigIndex {
        BigIndex::from(i)
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    fn tbil(k: u64) -> ShiftOperator {
        ShiftOperator::bilateral_forward(build_tbilcami(TbilcamiVariant::Original, k).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn apply_examples() {
        let b = ShiftOperator::backward(WeightModel::block());
        let y = b.apply(&SparseVec::basis(2)).unwrap();
        assert_eq!(y.entries.len(), 1);
        assert_eq!(y.entries[0].0, idx(1));
        assert!(close(y.entries[0].1.to_f64(), 2.0, 1e-15));
        let h = ShiftOperator::backward(WeightModel::harmonic());
        let y = h.apply(&SparseVec::basis(5)).unwrap();
        assert_eq!(y.entries[0].0, idx(4));
        assert!(close(y.entries[0].1.to_f64(), 1.25, 1e-15));
        assert!(h.apply(&SparseVec::basis(1)).unwrap().is_zero());
        let t = tbil(1);
        assert_eq!(t.apply(&SparseVec::basis(0)).unwrap(), SparseVec::basis(1));
    }

    #[test]
    fn bilateral_inverse() {
        let p = build_tbilcami(TbilcamiVariant::Original, 1).unwrap();
        let f = ShiftOperator::bilateral_forward(p.clone(), 1.0).unwrap();
        let b = ShiftOperator::bilateral_backward(p, 1.0).unwrap();
        let x = SparseVec::from_pairs(&[(-3, 0.5), (0, 2.0), (7, -1.0)]);
        assert_eq!(b.apply(&f.apply(&x).unwrap()).unwrap(), x);
    }

    #[test]
    fn orbit_norm_examples() {
        let h = ShiftOperator::backward(WeightModel::harmonic());
        assert!(close(h.orbit_norm(&SparseVec::basis(5), &idx(4)).unwrap().to_f64(), 5.0, 1e-14));
        for n in [1i64, 10, 1000] {
            let v = h.orbit_norm(&SparseVec::basis(n + 1), &idx(n)).unwrap().to_f64();
            assert!(close(v, (n + 1) as f64, 1e-12));
        }
        let t = tbil(1);
        let v = t.orbit_norm(&SparseVec::basis(0), &idx(4)).unwrap().to_f64();
        assert!(close(v, 2f64.powf(-1.0 / 3.0), 1e-14));
        assert!(close(h.orbit_norm(&SparseVec::basis(5), &idx(0)).unwrap().to_f64(), 1.0, 0.0));
    }

    #[test]
    fn walk_matches_closed_form() {
        let ops = vec![
            ShiftOperator::backward(WeightModel::harmonic()),
            ShiftOperator::backward(WeightModel::block()),
            ShiftOperator::forward(WeightModel::block()),
            tbil(2),
            ShiftOperator::bilateral_backward(build_tbilcami(TbilcamiVariant::Original, 2).unwrap(), 2.0).unwrap(),
            ShiftOperator::sum_identity(ShiftOperator::backward(WeightModel::block())),
        ];
        let x = SparseVec::from_pairs(&[(3, 1.0), (40, -0.25), (77, 2.0)])
            .with_aux(vec![(idx(5), LogReal::from_f64(0.5))]);
        for op in &ops {
            let x = if matches!(op.kind, OpKind::DirectSumWithIdentity(_)) {
                x.clone()
            } else {
                SparseVec::new(x.entries.clone())
            };
            let mut w = op.orbit_walk(&x).unwrap();
            for j in 1..=300i64 {
                let a = w.next_norm().unwrap();
                let b = op.orbit_norm(&x, &idx(j)).unwrap();
                assert!(a.rel_diff(b) < 1e-12, "{:?} j={j}: {a} vs {b}", op.kind);
            }
        }
    }

    #[test]
    fn operator_norms() {
        let h = ShiftOperator::backward(WeightModel::harmonic());
        for n in [1i64, 7, 10000] {
            assert!(close(h.operator_norm(&idx(n)).unwrap().to_f64(), (n + 1) as f64, 1e-12));
        }
        let b = ShiftOperator::backward(WeightModel::block());
        assert!(close(b.operator_norm(&idx(1)).unwrap().to_f64(), 2.0, 1e-15));
        let c = ShiftOperator::backward(WeightModel::constant(1.0, Domain::Unilateral).unwrap());
        assert_eq!(c.operator_norm(&idx(12345)).unwrap().to_f64(), 1.0);
        assert!(matches!(tbil(1).operator_norm(&idx(1)), Err(Error::Capability(_))));
        let e = ShiftOperator::backward(WeightModel::explicit(&[1.0, 3.0, 0.5, 4.0]).unwrap());
        assert!(close(e.operator_norm(&idx(2)).unwrap().to_f64(), 2.0, 1e-15));
    }

    #[test]
    fn block_vector_examples() {
        let x = special_block_vector(1).unwrap();
        assert_eq!(x, SparseVec::from_pairs(&[(2, 0.5)]));
        let x = special_block_vector(3).unwrap();
        assert_eq!(x, SparseVec::from_pairs(&[(2, 0.5), (6, 0.25), (12, 0.125)]));
        let b = ShiftOperator::backward(WeightModel::block());
        let y = b.power_apply(&special_block_vector(6).unwrap(), &idx(3)).unwrap();
        assert!(close(y.coeff(&idx(9)).to_f64(), 1.0, 1e-14));
        assert!(b.norm(&y).unwrap().to_f64() >= 1.0);
    }

    #[test]
    fn tbilcami_segments_follow_anchors() {
        let t = tbil(1);
        let s = t.orbit_norm_series(&SparseVec::basis(0), &idx(68)).unwrap();
        let segs = s.segments().unwrap();
        let bounds: Vec<_> = segs.iter().map(|g| (g.start.to_i64().unwrap(), g.end.to_i64().unwrap())).collect();
        assert_eq!(bounds, vec![(1, 1), (2, 4), (5, 68)]);
        for g in &segs {
            for j in [&g.start, &g.end] {
                let exact = t.orbit_norm(&SparseVec::basis(0), j).unwrap().logmag();
                assert!((g.log_at(j) - exact).abs() < 1e-12);
            }
        }
        assert!(t.orbit_norm_series(&SparseVec::basis(0), &idx(69)).is_err());
    }

    #[test]
    fn backward_bilateral_segments() {
        let p = build_tbilcami(TbilcamiVariant::Original, 2).unwrap();
        let b = ShiftOperator::bilateral_backward(p, 1.0).unwrap();
        for s0 in [0i64, 4, 1156, -4] {
            let x = SparseVec::basis(s0);
            let s = b.orbit_norm_series(&x, &idx(5000)).unwrap();
            let segs = s.segments().unwrap();
            assert_eq!(segs[0].start, idx(1));
            for w in segs.windows(2) {
                assert_eq!(w[0].end.succ(), w[1].start);
            }
            assert_eq!(segs.last().unwrap().end, idx(5000));
            for g in &segs {
                let mid = &g.start + &(&g.end - &g.start).div_floor(&idx(2));
                for j in [&g.start, &mid, &g.end] {
                    let exact = b.orbit_norm(&x, j).unwrap().logmag();
                    assert!((g.log_at(j) - exact).abs() < 1e-12, "s0={s0} j={j}");
                }
            }
        }
    }

    #[test]
    fn unilateral_segments_cover_orbit() {
        let cases = vec![
            (ShiftOperator::backward(WeightModel::harmonic()), 50i64),
            (ShiftOperator::backward(WeightModel::block()), 90),
            (ShiftOperator::forward(WeightModel::block()), 13),
            (ShiftOperator::backward(WeightModel::constant(1.0, Domain::Unilateral).unwrap()), 9),
        ];
        for (op, k) in cases {
            let x = SparseVec::basis(k);
            let s = op.orbit_norm_series(&x, &idx(200)).unwrap();
            let segs = s.segments().unwrap();
            let mut j = idx(1);
            for g in &segs {
                assert_eq!(g.start, j);
                let mut i = g.start.clone();
                while i <= g.end {
                    let exact = op.orbit_norm(&x, &i).unwrap().logmag();
                    assert!((g.log_at(&i) - exact).abs() < 1e-12);
                    i = i.succ();
                }
                j = g.end.succ();
            }
            if matches!(op.kind, OpKind::UnilateralBackward(_)) {
                assert_eq!(s.tail, Tail::ZeroAfter(idx(k)));
                assert_eq!(j, idx(k));
            } else {
                assert_eq!(j, idx(201));
            }
        }
        let c = ShiftOperator::forward(WeightModel::constant(1.0, Domain::Unilateral).unwrap());
        let segs = c.orbit_norm_series(&SparseVec::basis(3), &idx(1000)).unwrap().segments().unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].rate.rise, 0.0);
    }

    #[test]
    fn identity_summand_is_constant() {
        let op = ShiftOperator::sum_identity(ShiftOperator::backward(WeightModel::harmonic()));
        let x = SparseVec::zero().with_aux(vec![(idx(4), LogReal::from_f64(3.0))]);
        for j in [1i64, 10, 1000] {
            assert!(close(op.orbit_norm(&x, &idx(j)).unwrap().to_f64(), 3.0, 1e-15));
        }
        assert!(ShiftOperator::backward(WeightModel::harmonic()).apply(&x).is_err());
    }

    #[test]
    fn p_norm_convention() {
        let p = build_tbilcami(TbilcamiVariant::Original, 1).unwrap();
        let t = ShiftOperator::bilateral_forward(p, 2.0).unwrap();
        let v = t.orbit_norm(&SparseVec::basis(0), &idx(4)).unwrap().to_f64();
        assert!(close(v, 2f64.powf(-1.0 / 6.0), 1e-14));
        let s = t.orbit_norm_series(&SparseVec::from_pairs(&[(0, 1.0), (1, 1.0)]), &idx(10)).unwrap();
        assert!(!s.is_exact());
    }
}
