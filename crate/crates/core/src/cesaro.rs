//! Cesàro means `A_N(x) = (1/N) Σ_{j=1}^N ‖T^j x‖`.
//!
//! The loop backend walks the orbit one step at a time. The segment backend
//! sums each geometric piece of an [`OrbitNormSeries`] in closed form, which
//! makes horizons with hundreds of thousands of digits tractable.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::logcore::{BigIndex, LogReal, LogSum};
use crate::shiftops::{OrbitNormSeries, Segment, Tail};
use crate::weights::{AnchorProfile, Slope};

pub const DEFAULT_LOOP_BUDGET: u64 = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Loop,
    Segment,
    Auto,
}

impl std::str::FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "loop" => Ok(Backend::Loop),
            "segment" => Ok(Backend::Segment),
            "auto" => Ok(Backend::Auto),
            _ => Err(Error::Parse(format!("unknown backend {s:?}"))),
        }
    }
}

/// `ln |e^x - 1|` for `x = sign · exp(ln_abs_x)`.
fn ln_abs_expm1(sign: f64, ln_abs_x: f64) -> f64 {
    if ln_abs_x < -20.0 {
        let x = sign * ln_abs_x.exp();
        return ln_abs_x + x / 2.0 + x * x / 24.0;
    }
    let x = sign * ln_abs_x.exp();
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else if x < -30.0 {
        (-x.exp()).ln_1p()
    } else {
        x.exp_m1().abs().ln()
    }
}

/// `Σ_{l=0}^{count-1} a · exp(l · rise / span)`.
pub fn geometric_sum_rate(log_a: f64, rate: &Slope, count: &BigIndex) -> LogReal {
    if !count.is_positive() {
        return LogReal::ZERO;
    }
    if rate.rise == 0.0 {
        return LogReal::from_ln(log_a + count.ln());
    }
    let sign = rate.rise.signum();
    let ln_lambda = rate.rise.abs().ln() - rate.span.ln();
    let num = ln_abs_expm1(sign, ln_lambda + count.ln());
    let den = ln_abs_expm1(sign, ln_lambda);
    LogReal::from_ln(log_a + num - den)
}

/// `Σ_{l=0}^{count-1} a q^l` with `a = exp(log_a)`, `q = exp(log_q)`.
pub fn geometric_segment_sum(log_a: f64, log_q: f64, count: &BigIndex) -> LogReal {
    let rise = if log_q.abs() < 1e-15 { 0.0 } else { log_q };
    geometric_sum_rate(log_a, &Slope { rise, span: BigIndex::one() }, count)
}

fn segment_partial(seg: &Segment, upto: &BigIndex) -> LogReal {
    let count = &(upto - &seg.start) + 1i64;
    geometric_sum_rate(seg.log_a, &seg.rate, &count)
}

fn check_horizon(series: &OrbitNormSeries, n: &BigIndex) -> Result<()> {
    if !n.is_positive() {
        return domain("N must be at least 1");
    }
    if n > &series.horizon {
        return domain(format!("N = {n} beyond series horizon {}", series.horizon));
    }
    Ok(())
}

fn resolve(series: &OrbitNormSeries, backend: Backend) -> Result<Backend> {
    match backend {
        Backend::Auto => Ok(if series.is_exact() { Backend::Segment } else { Backend::Loop }),
        Backend::Segment if !series.is_exact() => Err(Error::Capability(
            "segment summation needs p = 1 or a single-support vector".into(),
        )),
        b => Ok(b),
    }
}

/// Sums `Σ_{j=1}^{N} ‖T^j x‖` for every `N` in an increasing list.
fn segment_sums(series: &OrbitNormSeries, points: &[BigIndex]) -> Result<Vec<LogReal>> {
    let mut totals = vec![LogSum::new(); points.len()];
    let Some(top) = points.last() else { return Ok(Vec::new()) };
    for part in series.parts() {
        let mut acc = LogSum::new();
        let mut next = 0usize;
        for seg in part.segments(top)? {
            let seg = seg?;
            while next < points.len() && points[next] <= seg.end {
                let mut s = acc;
                if points[next] >= seg.start {
                    s.push(segment_partial(&seg, &points[next]));
                }
                totals[next].push(s.value());
                next += 1;
            }
            if next == points.len() {
                break;
            }
            acc.push(geometric_sum_rate(seg.log_a, &seg.rate, &seg.count));
        }
        // points past the last segment (dead orbits) see the full sum
        for t in totals.iter_mut().skip(next) {
            t.push(acc.value());
        }
    }
    Ok(totals.iter().map(|t| t.value()).collect())
}

fn loop_sums(series: &OrbitNormSeries, points: &[BigIndex], budget: u64) -> Result<Vec<LogReal>> {
    let Some(top) = points.last() else { return Ok(Vec::new()) };
    let limit = match &series.tail {
        Tail::ZeroAfter(z) if z < top => z.clone(),
        _ => top.clone(),
    };
    let steps = limit
        .to_u64()
        .filter(|&s| s <= budget)
        .ok_or_else(|| Error::Budget(format!("loop backend needs {limit} terms, budget is {budget}")))?;
    let mut walk = series.op.orbit_walk(&series.x)?;
    let mut out = Vec::with_capacity(points.len());
    let mut acc = LogSum::new();
    let mut next = 0usize;
    let mut j = 0u64;
    while next < points.len() {
        let target = points[next].to_u64().unwrap_or(u64::MAX);
        while j < target.min(steps) && !walk.is_dead() {
            acc.push(walk.next_norm()?);
            j += 1;
        }
        out.push(acc.value());
        next += 1;
    }
    Ok(out)
}

/// `A_N` of a series.
pub fn cesaro_mean(series: &OrbitNormSeries, n: &BigIndex, backend: Backend) -> Result<LogReal> {
    cesaro_mean_with_budget(series, n, backend, DEFAULT_LOOP_BUDGET)
}

pub fn cesaro_mean_with_budget(series: &OrbitNormSeries, n: &BigIndex, backend: Backend, budget: u64) -> Result<LogReal> {
    check_horizon(series, n)?;
    let pts = std::slice::from_ref(n);
    let s = match resolve(series, backend)? {
        Backend::Loop => loop_sums(series, pts, budget)?,
        _ => segment_sums(series, pts)?,
    };
    Ok(s[0] / n.to_log_real())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    GeometricGrid { n_min: BigIndex, n_max: BigIndex, factor: f64 },
    TbilcamiDips { ks: Vec<u64> },
    TbilcamiHills { ks: Vec<u64> },
    Explicit,
}

/// Increasing list of horizons `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub points: Vec<BigIndex>,
}

impl Schedule {
    pub fn explicit(mut points: Vec<BigIndex>) -> Result<Self> {
        points.sort();
        points.dedup();
        if points.is_empty() || !points[0].is_positive() {
            return domain("schedule points must be positive and nonempty");
        }
        Ok(Schedule { kind: ScheduleKind::Explicit, points })
    }

    /// `N_min, ⌊N_min·f⌋, …` (strictly increasing), always ending at `N_max`.
    pub fn geometric(n_min: &BigIndex, n_max: &BigIndex, factor: f64) -> Result<Self> {
        if !n_min.is_positive() || n_max < n_min || !(factor > 1.0) {
            return domain("geometric grid needs 1 <= N_min <= N_max and factor > 1");
        }
        let mut points = vec![n_min.clone()];
        let num = (factor * 1e6).round() as i64;
        let den = BigIndex::from(1_000_000i64);
        loop {
            let last = points.last().unwrap();
            let mut nx = (last * num).div_floor(&den);
            if &nx <= last {
                nx = last.succ();
            }
            if &nx >= n_max {
                break;
            }
            points.push(nx);
        }
        if points.last() != Some(n_max) {
            points.push(n_max.clone());
        }
        Ok(Schedule {
            kind: ScheduleKind::GeometricGrid { n_min: n_min.clone(), n_max: n_max.clone(), factor },
            points,
        })
    }

    /// `N_k = k (n_k - m_{-k})` for each `k`.
    pub fn tbilcami_dips(profile: &AnchorProfile, ks: &[u64]) -> Result<Self> {
        let mut ks = ks.to_vec();
        ks.sort_unstable();
        ks.dedup();
        if ks.is_empty() || ks[0] == 0 {
            return domain("dip levels must be positive");
        }
        let levels = profile.positive_levels(&ks)?;
        let mut points = Vec::new();
        for (k, (n_k, _)) in ks.iter().zip(levels) {
            let m_mk = profile.level_anchor(-(*k as i64), crate::weights::Role::Hill)?.index;
            points.push((&n_k - &m_mk) * (*k as i64));
        }
        Ok(Schedule { kind: ScheduleKind::TbilcamiDips { ks }, points })
    }

    /// `N = m_k` for each `k`.
    pub fn tbilcami_hills(profile: &AnchorProfile, ks: &[u64]) -> Result<Self> {
        let mut ks = ks.to_vec();
        ks.sort_unstable();
        ks.dedup();
        if ks.is_empty() || ks[0] == 0 {
            return domain("hill levels must be positive");
        }
        let points = profile.positive_levels(&ks)?.into_iter().map(|(_, m)| m).collect();
        Ok(Schedule { kind: ScheduleKind::TbilcamiHills { ks }, points })
    }

    pub fn last(&self) -> &BigIndex {
        self.points.last().expect("nonempty")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub n: BigIndex,
    pub mean: LogReal,
    pub backend: Backend,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CesaroTrace {
    pub points: Vec<TracePoint>,
    pub min: LogReal,
    pub max: LogReal,
    pub argmin: BigIndex,
    pub argmax: BigIndex,
}

impl CesaroTrace {
    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean.to_f64()).collect()
    }

    /// CSV with header `N,mean,log10_mean`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("N,mean,log10_mean\n");
        for p in &self.points {
            let log10 = if p.mean.is_zero() { f64::NEG_INFINITY } else { p.mean.log10() };
            writeln!(s, "{},{:e},{}", p.n, p.mean.to_f64(), log10).unwrap();
        }
        s
    }
}

pub fn cesaro_trace(series: &OrbitNormSeries, schedule: &Schedule, backend: Backend) -> Result<CesaroTrace> {
    cesaro_trace_with_budget(series, schedule, backend, DEFAULT_LOOP_BUDGET)
}

pub fn cesaro_trace_with_budget(
    series: &OrbitNormSeries,
    schedule: &Schedule,
    backend: Backend,
    budget: u64,
) -> Result<CesaroTrace> {
    let pts = &schedule.points;
    if pts.is_empty() {
        return domain("empty schedule");
    }
    if pts.windows(2).any(|w| w[0] >= w[1]) {
        return domain("schedule must be strictly increasing");
    }
    check_horizon(series, &pts[0])?;
    check_horizon(series, schedule.last())?;
    let used = resolve(series, backend)?;
    let sums = match used {
        Backend::Loop => loop_sums(series, pts, budget)?,
        _ => segment_sums(series, pts)?,
    };
    let points: Vec<TracePoint> = pts
        .iter()
        .zip(sums)
        .map(|(n, s)| TracePoint { n: n.clone(), mean: s / n.to_log_real(), backend: used })
        .collect();
    let mut imin = 0;
    let mut imax = 0;
    for (i, p) in points.iter().enumerate() {
        if p.mean < points[imin].mean {
            imin = i;
        }
        if p.mean > points[imax].mean {
            imax = i;
        }
    }
    Ok(CesaroTrace {
        min: points[imin].mean,
        max: points[imax].mean,
        argmin: points[imin].n.clone(),
        argmax: points[imax].n.clone(),
        points,
    })
}

/// Markov bound `card{j ≤ N : ‖T^j x‖ ≥ δ} / N ≤ min(1, A_N / δ)`.
pub fn density_bound_from_cesaro(a_n: LogReal, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return domain("delta must be positive");
    }
    Ok((a_n.to_f64() / delta).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shiftops::{ShiftOperator, SparseVec};
    use crate::weights::{build_tbilcami, Domain, TbilcamiVariant, WeightModel};

    fn idx(i: i64) -> BigIndex {
        BigIndex::from(i)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn geometric_examples() {
        let s = geometric_segment_sum(0.0, 2f64.ln(), &idx(10)).to_f64();
        assert!(rel(s, 1023.0) < 1e-14);
        let s = geometric_segment_sum(3f64.ln(), 0.0, &idx(7)).to_f64();
        assert!(rel(s, 21.0) < 1e-15);
        for n in [1i64, 10, 40] {
            assert!(geometric_segment_sum(0.0, -2f64.ln(), &idx(n)).to_f64() < 2.0);
        }
        assert!(geometric_segment_sum(0.0, -2f64.ln(), &idx(1000000)).to_f64() <= 2.0 + 1e-15);
        assert!(geometric_segment_sum(0.0, 1.0, &idx(0)).is_zero());
        let direct: f64 = (0..50).map(|l| 0.3 * (-0.01f64 * l as f64).exp()).sum();
        assert!(rel(geometric_segment_sum(0.3f64.ln(), -0.01, &idx(50)).to_f64(), direct) < 1e-13);
    }

    #[test]
    fn tiny_rates_stay_accurate() {
        // span far beyond f64 range: the sum is count · a to first order
        let span: BigIndex = format!("1{}", "0".repeat(400)).parse().unwrap();
        let r = Slope { rise: 0.5, span: span.clone() };
        let s = geometric_sum_rate(0.0, &r, &span);
        // Σ_{l<span} e^{0.5 l / span} ≈ span (e^{0.5} - 1) / 0.5
        let expect = span.ln() + (0.5f64.exp_m1() / 0.5).ln();
        assert!((s.logmag() - expect).abs() < 1e-12);
        let s = geometric_sum_rate(0.0, &Slope { rise: -0.5, span: span.clone() }, &idx(3));
        assert!((s.to_f64() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn harmonic_mean_example() {
        let h = ShiftOperator::backward(WeightModel::harmonic());
        let s = h.orbit_norm_series(&SparseVec::basis(5), &idx(100)).unwrap();
        for b in [Backend::Loop, Backend::Segment] {
            let a = cesaro_mean(&s, &idx(4), b).unwrap().to_f64();
            assert!(rel(a, 125.0 / 48.0) < 1e-13, "{b:?}");
            // dead after j = 5
            let a = cesaro_mean(&s, &idx(100), b).unwrap().to_f64();
            assert!(rel(a, (125.0 / 12.0) / 100.0) < 1e-13);
        }
    }

    #[test]
    fn tbilcami_first_dip() {
        let p = build_tbilcami(TbilcamiVariant::Original, 2).unwrap();
        let t = ShiftOperator::bilateral_forward(p.clone(), 1.0).unwrap();
        let s = t.orbit_norm_series(&SparseVec::basis(0), &p.last_index()).unwrap();
        let sch = Schedule::tbilcami_dips(&p, &[1, 2]).unwrap();
        assert_eq!(sch.points, vec![idx(8), idx(4624)]);
        let seg = cesaro_trace(&s, &sch, Backend::Segment).unwrap();
        let lp = cesaro_trace(&s, &sch, Backend::Loop).unwrap();
        // independent high-precision summation
        let frozen = [0.896081529515571, 0.711229132760803];
        for i in 0..2 {
            assert!(rel(seg.points[i].mean.to_f64(), frozen[i]) < 1e-12);
            assert!(seg.points[i].mean.rel_diff(lp.points[i].mean) < 1e-9);
        }
        assert_eq!(seg.argmin, idx(4624));
    }

    #[test]
    fn identity_trace_constant() {
        let id = ShiftOperator::identity();
        let x = SparseVec::from_pairs(&[(1, 3.0), (4, -4.0)]);
        let s = id.orbit_norm_series(&x, &idx(1_000_000)).unwrap();
        let sch = Schedule::geometric(&idx(1), &idx(1_000_000), 3.0).unwrap();
        let tr = cesaro_trace(&s, &sch, Backend::Auto).unwrap();
        for m in tr.means() {
            assert!(rel(m, 7.0) < 1e-13);
        }
        let id2 = ShiftOperator::identity().with_p(2.0).unwrap();
        let s = id2.orbit_norm_series(&x, &idx(100)).unwrap();
        assert!(rel(cesaro_mean(&s, &idx(50), Backend::Segment).unwrap().to_f64(), 5.0) < 1e-13);
    }

    #[test]
    fn geometric_schedule_shape() {
        let s = Schedule::geometric(&idx(1), &idx(100), 2.0).unwrap();
        assert_eq!(s.points.iter().map(|p| p.to_i64().unwrap()).collect::<Vec<_>>(), vec![1, 2, 4, 8, 16, 32, 64, 100]);
        assert!(Schedule::geometric(&idx(5), &idx(4), 2.0).is_err());
    }

    #[test]
    fn loop_budget_enforced() {
        let c = ShiftOperator::forward(WeightModel::constant(1.0, Domain::Unilateral).unwrap());
        let s = c.orbit_norm_series(&SparseVec::basis(1), &idx(1000)).unwrap();
        assert!(matches!(cesaro_mean_with_budget(&s, &idx(1000), Backend::Loop, 10), Err(Error::Budget(_))));
        assert!(cesaro_mean(&s, &idx(1001), Backend::Loop).is_err());
    }

    #[test]
    fn markov_bound() {
        assert!((density_bound_from_cesaro(LogReal::from_f64(0.1), 1.0).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(density_bound_from_cesaro(LogReal::from_f64(5.0), 1.0).unwrap(), 1.0);
        assert!((density_bound_from_cesaro(LogReal::from_f64(0.896), 2.0).unwrap() - 0.448).abs() < 1e-15);
        assert!(density_bound_from_cesaro(LogReal::ONE, 0.0).is_err());
    }

    #[test]
    fn csv_header() {
        let id = ShiftOperator::identity();
        let s = id.orbit_norm_series(&SparseVec::basis(1), &idx(10)).unwrap();
        let tr = cesaro_trace(&s, &Schedule::explicit(vec![idx(1), idx(10)]).unwrap(), Backend::Auto).unwrap();
        let csv = tr.to_csv();
        assert!(csv.starts_with("N,mean,log10_mean\n1,1e0,0\n"));
    }
}
