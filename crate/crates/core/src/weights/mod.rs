//! Weight sequences for weighted shifts.
//!
//! Unilateral models are indexed from 1 and expose prefix sums
//! `L(j) = Σ_{i≤j} ln w_i` in closed form. Bilateral models carry a norm
//! weight `v_j` on ℤ, normally an [`AnchorProfile`].

mod profile;

use std::sync::Arc;

pub use profile::{
    build_tbilcami, verify_tbilcami, Anchor, AnchorCursor, AnchorProfile, LogVWalker, Role, SegmentsDown, SegmentsUp, Slope,
    TbilcamiVariant,
};

use crate::error::{domain, Error, Result};
use crate::logcore::{BigIndex, LogReal};

const LN2: f64 = std::f64::consts::LN_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Unilateral,
    Bilateral,
}

#[derive(Clone, Debug)]
pub enum WeightKind {
    /// `w_1, …, w_n`; stored as logs with their prefix sums.
    ExplicitList { logs: Vec<f64>, prefix: Vec<f64> },
    /// Pair-block `n` spans `(n-1)n+1 ..= n(n+1)`: `n` halves then `n` twos.
    BlockHalvesTwos,
    /// `w_k = k/(k-1)` for `k ≥ 2`, `w_1 = 1`.
    Harmonic,
    Profile(Arc<AnchorProfile>),
    Constant(f64),
}

#[derive(Clone, Debug)]
pub struct WeightModel {
    pub kind: WeightKind,
    pub domain: Domain,
}

/// A maximal run `[lo, hi]` of indices carrying the same weight; `hi` is
/// `None` when the run never ends.
#[derive(Clone, Debug, PartialEq)]
pub struct Run {
    pub lo: BigIndex,
    pub hi: Option<BigIndex>,
    pub log_w: f64,
}

/// Pair-block number `n` with `(n-1)n < j ≤ n(n+1)`, for `j ≥ 1`.
pub fn block_of(j: &BigIndex) -> BigIndex {
    if let Some(ju) = j.to_u64().filter(|&v| v < 1 << 60) {
        let j = ju as u128;
        let mut n = (((4.0 * ju as f64 + 1.0).sqrt() - 1.0) / 2.0).floor() as u128;
        while n * (n + 1) < j {
            n += 1;
        }
        while n > 0 && (n - 1) * n >= j {
            n -= 1;
        }
        return BigIndex::from(n);
    }
    let s = (j * 4i64 + 1i64).isqrt();
    let mut n = (s - 1i64).div_floor(&BigIndex::from(2));
    while &(&n * (&n + 1i64)) < j {
        n = n + 1i64;
    }
    while &(&(&n - 1i64) * &n) >= j {
        n = n - 1i64;
    }
    n
}

fn ln_ratio_succ(j: &BigIndex) -> f64 {
    // ln(j / (j-1)) = ln1p(1/(j-1))
    let d = j.pred();
    match d.to_u64() {
        Some(u) => (1.0 / u as f64).ln_1p(),
        None => (-d.ln()).exp(),
    }
}

impl WeightModel {
    pub fn explicit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return domain("explicit weight list is empty");
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return domain("weights must be finite and strictly positive");
        }
        let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let mut prefix = Vec::with_capacity(logs.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for l in &logs {
            acc += l;
            prefix.push(acc);
        }
        Ok(WeightModel { kind: WeightKind::ExplicitList { logs, prefix }, domain: Domain::Unilateral })
    }

    pub fn block() -> Self {
        WeightModel { kind: WeightKind::BlockHalvesTwos, domain: Domain::Unilateral }
    }

    pub fn harmonic() -> Self {
        WeightModel { kind: WeightKind::Harmonic, domain: Domain::Unilateral }
    }

    pub fn constant(c: f64, domain: Domain) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return self::domain("constant weight must be positive");
        }
        Ok(WeightModel { kind: WeightKind::Constant(c), domain })
    }

    pub fn profile(p: AnchorProfile) -> Self {
        WeightModel { kind: WeightKind::Profile(Arc::new(p)), domain: Domain::Bilateral }
    }

    pub fn as_profile(&self) -> Option<&AnchorProfile> {
        match &self.kind {
            WeightKind::Profile(p) => Some(p),
            _ => None,
        }
    }

    fn check_index(&self, j: &BigIndex) -> Result<()> {
        match self.domain {
            Domain::Unilateral if !j.is_positive() => domain(format!("index {j} outside ℕ")),
            _ => Ok(()),
        }
    }

    /// `ln w_j` (or `ln v_j` on bilateral profiles).
    pub fn log_weight(&self, j: &BigIndex) -> Result<LogReal> {
        self.check_index(j)?;
        let l = match &self.kind {
            WeightKind::ExplicitList { logs, .. } => {
                let i = j.to_u64().filter(|&i| i as usize <= logs.len()).ok_or_else(|| {
                    Error::Domain(format!("index {j} beyond explicit list of length {}", logs.len()))
                })?;
                logs[i as usize - 1]
            }
            WeightKind::BlockHalvesTwos => {
                let n = block_of(j);
                let r = j - &(&n * &(&n - 1i64));
                if r <= n {
                    -LN2
                } else {
                    LN2
                }
            }
            WeightKind::Harmonic => {
                if *j == 1 {
                    0.0
                } else {
                    ln_ratio_succ(j)
                }
            }
            WeightKind::Profile(p) => p.log_v(j)?,
            WeightKind::Constant(c) => c.ln(),
        };
        Ok(LogReal::from_ln(l))
    }

    /// Prefix sum `L(j) = Σ_{i=1}^j ln w_i`, with `L(0) = 0`.
    pub fn cum_log(&self, j: &BigIndex) -> Result<f64> {
        if self.domain == Domain::Bilateral {
            return domain("cumulative log-weights are defined for unilateral models only");
        }
        if j.is_negative() {
            return domain(format!("prefix index {j} is negative"));
        }
        if j.is_zero() {
            return Ok(0.0);
        }
        Ok(match &self.kind {
            WeightKind::ExplicitList { prefix, .. } => {
                let i = j.to_u64().filter(|&i| (i as usize) < prefix.len()).ok_or_else(|| {
                    Error::Domain(format!("index {j} beyond explicit list of length {}", prefix.len() - 1))
                })?;
                prefix[i as usize]
            }
            WeightKind::BlockHalvesTwos => {
                let n = block_of(j);
                let r = j - &(&n * &(&n - 1i64));
                let two_n_minus_r = &(&n * 2i64) - &r;
                let d = std::cmp::min(r, two_n_minus_r);
                -d.to_f64() * LN2
            }
            WeightKind::Harmonic => j.ln(),
            WeightKind::Constant(c) => j.to_f64() * c.ln(),
            WeightKind::Profile(_) => unreachable!("profiles are bilateral"),
        })
    }

    /// `ln Π_{i=k+1}^{k+n} w_i = L(k+n) - L(k)`.
    pub fn window_log(&self, k: &BigIndex, n: &BigIndex) -> Result<f64> {
        if let (WeightKind::Harmonic, Some(ku), Some(nu)) = (&self.kind, k.to_u64(), n.to_u64()) {
            if ku > 0 {
                return Ok((nu as f64 / ku as f64).ln_1p());
            }
        }
        Ok(self.cum_log(&(k + n))? - self.cum_log(k)?)
    }

    /// The run of equal weights containing `j` (unilateral models).
    pub fn run_containing(&self, j: &BigIndex) -> Result<Run> {
        self.check_index(j)?;
        let log_w = self.log_weight(j)?.logmag();
        Ok(match &self.kind {
            WeightKind::BlockHalvesTwos => {
                let n = block_of(j);
                let start = &n * &(&n - 1i64) + 1i64;
                let mid = &start + &(&n - 1i64);
                if j <= &mid {
                    Run { lo: start, hi: Some(mid), log_w }
                } else {
                    Run { lo: mid.succ(), hi: Some(&n * &(&n + 1i64)), log_w }
                }
            }
            WeightKind::Constant(_) => Run {
                lo: if self.domain == Domain::Unilateral { BigIndex::one() } else { j.clone() },
                hi: None,
                log_w,
            },
            WeightKind::ExplicitList { logs, .. } => {
                let i = j.to_u64().unwrap() as usize - 1;
                let mut lo = i;
                while lo > 0 && logs[lo - 1] == logs[i] {
                    lo -= 1;
                }
                let mut hi = i;
                while hi + 1 < logs.len() && logs[hi + 1] == logs[i] {
                    hi += 1;
                }
                Run { lo: BigIndex::from(lo + 1), hi: Some(BigIndex::from(hi + 1)), log_w }
            }
            WeightKind::Harmonic | WeightKind::Profile(_) => Run { lo: j.clone(), hi: Some(j.clone()), log_w },
        })
    }

    /// Largest index with a defined weight, if finite.
    pub fn last_index(&self) -> Option<BigIndex> {
        match &self.kind {
            WeightKind::ExplicitList { logs, .. } => Some(BigIndex::from(logs.len())),
            WeightKind::Profile(p) => Some(p.last_index()),
            _ => None,
        }
    }

    /// `sup_j ln w_j` (single-weight bound on the shift's norm).
    pub fn max_log_weight(&self) -> f64 {
        match &self.kind {
            WeightKind::ExplicitList { logs, .. } => logs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            WeightKind::BlockHalvesTwos | WeightKind::Harmonic => LN2,
            WeightKind::Constant(c) => c.ln(),
            WeightKind::Profile(p) => p.anchors_max_logv(),
        }
    }
}

impl AnchorProfile {
    fn anchors_max_logv(&self) -> f64 {
        let mut c = self.cursor_at_or_below(&self.first_index()).expect("first index inside");
        let mut m = c.logv();
        while c.step_up() {
            m = m.max(c.logv());
        }
        m
    }
}
