//! Finite-horizon densities, distributional functions and pair verdicts.
//!
//! Nothing here decides an asymptotic property. Every verdict reports
//! whether the evidence up to its horizon supports a notion under explicit
//! thresholds, and carries those thresholds with it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cesaro::{cesaro_trace_with_budget, Backend, Schedule, DEFAULT_LOOP_BUDGET};
use crate::error::{domain, Error, Result};
use crate::logcore::{BigIndex, LogReal};
use crate::shiftops::{ShiftOperator, SparseVec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub horizon: BigIndex,
    pub tail_start: BigIndex,
    /// `min_{tail_start ≤ n ≤ horizon} card(A ∩ [1,n]) / n`
    pub low: f64,
    /// the corresponding maximum
    pub high: f64,
}

fn to_u64(n: &BigIndex, what: &str) -> Result<u64> {
    n.to_u64()
        .filter(|&v| v <= DEFAULT_LOOP_BUDGET)
        .ok_or_else(|| Error::Budget(format!("{what} = {n} exceeds the counting budget {DEFAULT_LOOP_BUDGET}")))
}

fn density_of<I: IntoIterator<Item = bool>>(flags: I, horizon: u64, tail_start: u64) -> DensityEstimate {
    let mut count = 0u64;
    let mut low = f64::INFINITY;
    let mut high = f64::NEG_INFINITY;
    for (i, f) in flags.into_iter().take(horizon as usize).enumerate() {
        let n = i as u64 + 1;
        count += f as u64;
        if n >= tail_start {
            let r = count as f64 / n as f64;
            low = low.min(r);
            high = high.max(r);
        }
    }
    DensityEstimate { horizon: horizon.into(), tail_start: tail_start.into(), low, high }
}

fn check_window(horizon: u64, tail_start: u64) -> Result<()> {
    if tail_start == 0 || tail_start > horizon {
        return domain("need 1 <= tail_start <= horizon");
    }
    Ok(())
}

/// Lower/upper density estimate of `{n : member(n)}` on `[tail_start, horizon]`.
pub fn density_estimate(
    member: impl Fn(u64) -> bool,
    horizon: &BigIndex,
    tail_start: &BigIndex,
) -> Result<DensityEstimate> {
    let h = to_u64(horizon, "horizon")?;
    let t = to_u64(tail_start, "tail_start")?;
    check_window(h, t)?;
    Ok(density_of((1..=h).map(member), h, t))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionalProfile {
    pub delta_grid: Vec<f64>,
    /// Lower density of `{j : ‖T^j x - T^j y‖ < δ}` per grid point.
    pub f: Vec<f64>,
    /// Upper density of the same set.
    pub f_star: Vec<f64>,
    pub estimates: Vec<DensityEstimate>,
}

/// `‖T^j d‖` for `j = 1..=horizon`, stopping early once the orbit dies.
pub fn orbit_norms(op: &ShiftOperator, d: &SparseVec, horizon: u64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(horizon.min(1 << 24) as usize);
    if d.is_zero() {
        out.resize(horizon as usize, 0.0);
        return Ok(out);
    }
    let mut walk = op.orbit_walk(d)?;
    for _ in 0..horizon {
        if walk.is_dead() {
            out.push(0.0);
        } else {
            out.push(walk.next_norm()?.to_f64());
        }
    }
    Ok(out)
}

fn profile_from_norms(norms: &[f64], grid: &[f64], horizon: u64, tail: u64) -> DistributionalProfile {
    let estimates: Vec<DensityEstimate> =
        grid.iter().map(|&d| density_of(norms.iter().map(|&v| v < d), horizon, tail)).collect();
    DistributionalProfile {
        delta_grid: grid.to_vec(),
        f: estimates.iter().map(|e| e.low).collect(),
        f_star: estimates.iter().map(|e| e.high).collect(),
        estimates,
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|d| !(*d > 0.0)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return domain("delta grid must be nonempty, positive and strictly increasing");
    }
    Ok(())
}

pub fn distributional_profile(
    op: &ShiftOperator,
    x: &SparseVec,
    y: &SparseVec,
    delta_grid: &[f64],
    horizon: &BigIndex,
    tail_start: &BigIndex,
) -> Result<DistributionalProfile> {
    check_grid(delta_grid)?;
    let h = to_u64(horizon, "horizon")?;
    let t = to_u64(tail_start, "tail_start")?;
    check_window(h, t)?;
    let norms = orbit_norms(op, &x.sub(y), h)?;
    Ok(profile_from_norms(&norms, delta_grid, h, t))
}

/// `n` points per decade from `lo` to `hi`, both included.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).round().max(1.0) as usize;
    (0..=n).map(|i| lo * 10f64.powf(decades * i as f64 / n as f64)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyParams {
    /// Horizon for per-step norms (Li-Yorke and distributional flags).
    pub horizon: BigIndex,
    pub tail_start: BigIndex,
    pub delta_grid: Vec<f64>,
    /// Smallness threshold η.
    pub eta: f64,
    /// Largeness threshold Λ.
    pub lambda: f64,
    /// Density margin.
    pub c: f64,
    /// Horizons for the Cesàro means.
    pub schedule: Schedule,
    pub backend: Backend,
}

impl ClassifyParams {
    pub fn defaults(horizon: BigIndex) -> Result<Self> {
        let tail_start = std::cmp::max(horizon.div_floor(&BigIndex::from(10)), BigIndex::one());
        let schedule = Schedule::geometric(&BigIndex::one(), &horizon, 2.0)?;
        Ok(ClassifyParams {
            horizon,
            tail_start,
            delta_grid: log_grid(1e-6, 1e2, 1),
            eta: 1e-3,
            lambda: 1e3,
            c: 0.5,
            schedule,
            backend: Backend::Auto,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Supported,
    Unsupported,
}

impl From<bool> for Status {
    fn from(b: bool) -> Self {
        if b {
            Status::Supported
        } else {
            Status::Unsupported
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    /// Smallest Cesàro mean over the schedule.
    pub dip: f64,
    pub dip_at: BigIndex,
    /// Largest Cesàro mean over the schedule.
    pub peak: f64,
    pub peak_at: BigIndex,
    pub min_norm: f64,
    pub max_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<DistributionalProfile>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub pair: BTreeMap<String, SparseVec>,
    pub params: ClassifyParams,
    pub flags: BTreeMap<String, Status>,
    pub evidence: Evidence,
}

impl PairVerdict {
    pub fn flag(&self, name: &str) -> Status {
        self.flags.get(name).copied().unwrap_or(Status::Unsupported)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serializes")
    }
}

/// Distributional flags from a profile. DC3 asks for two adjacent grid
/// points with `F < F* - c`; DC2 adds `F* > 1 - η` on the whole grid; DC1
/// adds `F < η` at two adjacent grid points; DC2½ asks for
/// `F < c < F*` at the two smallest grid points.
pub fn dc_flags(p: &DistributionalProfile, eta: f64, c: f64) -> [(&'static str, bool); 4] {
    let n = p.f.len();
    let gap = |i: usize| p.f[i] < p.f_star[i] - c;
    let dc3 = (0..n.saturating_sub(1)).any(|i| gap(i) && gap(i + 1));
    let dc2 = dc3 && p.f_star.iter().all(|&v| v > 1.0 - eta);
    let dc1 = dc2 && (0..n.saturating_sub(1)).any(|i| p.f[i] < eta && p.f[i + 1] < eta);
    let half = n >= 2 && (0..2).all(|i| p.f[i] < c && c < p.f_star[i]);
    [("DC1", dc1), ("DC2", dc2), ("DC2half", half), ("DC3", dc3)]
}

/// Finite-horizon classification of `(x, y)` through the orbit of `x - y`.
pub fn classify_pair(op: &ShiftOperator, x: &SparseVec, y: &SparseVec, params: &ClassifyParams) -> Result<PairVerdict> {
    check_grid(&params.delta_grid)?;
    let d = x.sub(y);
    let mut notes = Vec::new();
    let mut flags = BTreeMap::new();

    // Cesàro means
    let (dip, dip_at, peak, peak_at) = if d.is_zero() {
        (0.0, params.schedule.points[0].clone(), 0.0, params.schedule.points[0].clone())
    } else {
        let series = op.orbit_norm_series(&d, params.schedule.last())?;
        let tr = cesaro_trace_with_budget(&series, &params.schedule, params.backend, DEFAULT_LOOP_BUDGET)?;
        (tr.min.to_f64(), tr.argmin, tr.max.to_f64(), tr.argmax)
    };
    flags.insert("meanLY".to_string(), Status::from(dip < params.eta && peak > params.lambda));

    // per-step norms
    let loopable = params.horizon.to_u64().filter(|&h| h <= DEFAULT_LOOP_BUDGET);
    let (min_norm, max_norm, profile) = match loopable {
        Some(h) => {
            let t = to_u64(&params.tail_start, "tail_start")?;
            check_window(h, t)?;
            let norms = orbit_norms(op, &d, h)?;
            let mn = norms.iter().copied().fold(f64::INFINITY, f64::min);
            let mx = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (mn, mx, Some(profile_from_norms(&norms, &params.delta_grid, h, t)))
        }
        None => {
            // extremes of a piecewise-geometric sequence sit on segment ends
            let series = op.orbit_norm_series(&d, &params.horizon)?;
            let segs = series.segments()?;
            let mut mn = f64::INFINITY;
            let mut mx = f64::NEG_INFINITY;
            for s in &segs {
                for j in [&s.start, &s.end] {
                    let v = LogReal::from_ln(s.log_at(j)).to_f64();
                    mn = mn.min(v);
                    mx = mx.max(v);
                }
            }
            if s_ends_before(&segs, &params.horizon) {
                mn = 0.0;
            }
            notes.push("horizon beyond the counting budget: distributional flags not evaluated".to_string());
            (mn, mx, None)
        }
    };
    flags.insert("LY".to_string(), Status::from(min_norm < params.eta && max_norm > params.lambda));
    match &profile {
        Some(p) => {
            for (name, v) in dc_flags(p, params.eta, params.c) {
                flags.insert(name.to_string(), Status::from(v));
            }
        }
        None => {
            for name in ["DC1", "DC2", "DC2half", "DC3"] {
                flags.insert(name.to_string(), Status::Unsupported);
            }
        }
    }

    let mut pair = BTreeMap::new();
    pair.insert("x".to_string(), x.clone());
    pair.insert("y".to_string(), y.clone());
    Ok(PairVerdict {
        pair,
        params: params.clone(),
        flags,
        evidence: Evidence { dip, dip_at, peak, peak_at, min_norm, max_norm, profile, notes },
    })
}

fn s_ends_before(segs: &[crate::shiftops::Segment], horizon: &BigIndex) -> bool {
    segs.last().map_or(true, |s| &s.end < horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{build_tbilcami, TbilcamiVariant, WeightModel};

    fn idx(i: i64) -> BigIndex {
        BigIndex::from(i)
    }

    #[test]
    fn density_examples() {
        let e = density_estimate(|n| n % 2 == 0, &idx(100_000), &idx(10_000)).unwrap();
        assert!((e.low - 0.5).abs() < 1e-4 && (e.high - 0.5).abs() < 1e-4);
        let e = density_estimate(|_| true, &idx(1000), &idx(100)).unwrap();
        assert_eq!((e.low, e.high), (1.0, 1.0));
        let in_a = |n: u64| {
            let mut k = 1u64;
            while k * 4 <= n {
                k *= 4;
            }
            n < 2 * k
        };
        let h = 4u64.pow(10);
        let e = density_estimate(in_a, &idx(h as i64), &idx(h as i64 / 10)).unwrap();
        assert!((e.low - 1.0 / 3.0).abs() < 0.01, "{}", e.low);
        assert!((e.high - 2.0 / 3.0).abs() < 0.01, "{}", e.high);
        assert!(density_estimate(|_| true, &idx(10), &idx(11)).is_err());
    }

    #[test]
    fn harmonic_dead_orbit_profile() {
        let h = ShiftOperator::backward(WeightModel::harmonic());
        let p = distributional_profile(&h, &SparseVec::basis(100), &SparseVec::zero(), &[0.5], &idx(10_000), &idx(9000))
            .unwrap();
        // {j : ‖T^j e_100‖ < 1/2} = [100, ∞)
        assert!((p.f[0] - 8901.0 / 9000.0).abs() < 1e-12);
        assert!((p.f_star[0] - 0.9901).abs() < 1e-12);
    }

    #[test]
    fn equal_pair() {
        let h = ShiftOperator::backward(WeightModel::harmonic());
        let x = SparseVec::basis(7);
        let p = distributional_profile(&h, &x, &x, &[1e-3, 1.0], &idx(100), &idx(10)).unwrap();
        assert_eq!(p.f, vec![1.0, 1.0]);
        assert_eq!(p.f_star, vec![1.0, 1.0]);
        let v = classify_pair(&h, &x, &x, &ClassifyParams::defaults(idx(100)).unwrap()).unwrap();
        assert!(v.flags.values().all(|s| *s == Status::Unsupported));
    }

    #[test]
    fn identity_constant_difference() {
        let id = ShiftOperator::identity();
        let x = SparseVec::basis(1);
        let p = distributional_profile(&id, &x, &SparseVec::zero(), &[0.5, 2.0], &idx(100), &idx(10)).unwrap();
        assert_eq!(p.f, vec![0.0, 1.0]);
        let v = classify_pair(&id, &x, &SparseVec::basis(2), &ClassifyParams::defaults(idx(1000)).unwrap()).unwrap();
        assert_eq!(v.flag("meanLY"), Status::Unsupported);
        assert_eq!(v.flag("LY"), Status::Unsupported);
    }

    #[test]
    fn tbilcami_pair_is_mean_ly() {
        let p = build_tbilcami(TbilcamiVariant::Original, 100).unwrap();
        let op = ShiftOperator::bilateral_forward(p.clone(), 1.0).unwrap();
        let mut pts = Schedule::tbilcami_dips(&p, &[1, 2, 3]).unwrap().points;
        pts.extend(Schedule::tbilcami_hills(&p, &[10, 100]).unwrap().points);
        let mut params = ClassifyParams::defaults(idx(10_000)).unwrap();
        params.schedule = Schedule::explicit(pts).unwrap();
        params.eta = 0.95 * 0.6138856251780264 + 0.05;
        params.lambda = 1.0;
        let v = classify_pair(&op, &SparseVec::basis(0), &SparseVec::zero(), &params).unwrap();
        assert_eq!(v.flag("meanLY"), Status::Supported);
        assert!((v.evidence.peak - 1.028957951589427).abs() < 1e-9);
        let json = v.to_json();
        assert!(json.contains("\"meanLY\": \"supported\""));
        assert!(json.contains("\"dip\""));
    }

    #[test]
    fn flags_are_nested() {
        let p = DistributionalProfile {
            delta_grid: vec![0.1, 0.2, 0.3],
            f: vec![0.0, 0.0, 0.0],
            f_star: vec![1.0, 1.0, 1.0],
            estimates: Vec::new(),
        };
        let f = dc_flags(&p, 1e-3, 0.5);
        assert!(f.iter().all(|(_, v)| *v));
        // tie at the margin resolves to unsupported
        let p = DistributionalProfile { f: vec![0.5, 0.5, 0.5], ..p };
        let f = dc_flags(&p, 1e-3, 0.5);
        assert!(f.iter().all(|(_, v)| !*v));
    }

    #[test]
    fn grid_shape() {
        let g = log_grid(1e-6, 1e2, 1);
        assert_eq!(g.len(), 9);
        assert!((g[0] - 1e-6).abs() < 1e-20 && (g[8] - 100.0).abs() < 1e-10);
    }
}
