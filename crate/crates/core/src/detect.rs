//! Probes and constructions around Cesàro boundedness and irregular vectors.

use serde::{Deserialize, Serialize};

use crate::cesaro::{cesaro_mean, cesaro_trace, Backend, Schedule};
use crate::error::{domain, Error, Result};
use crate::logcore::{BigIndex, LogReal, LogSum};
use crate::report::{CheckEntry, CheckReport, Scale};
use crate::shiftops::{ShiftOperator, SparseVec, Tail};

/// Candidate vectors, addressed by position.
pub type Candidates<'a> = &'a dyn Fn(u64) -> Option<SparseVec>;

/// `e_1, e_2, …`
pub fn basis_candidates(i: u64) -> Option<SparseVec> {
    Some(SparseVec::basis(i + 1))
}

/// `e_{n(n+1)}` for `n = 1, 2, …`
pub fn block_top_candidates(i: u64) -> Option<SparseVec> {
    let n = i + 1;
    Some(SparseVec::basis(n * (n + 1)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcbSample {
    pub x: SparseVec,
    /// `sup_N A_N(x) / ‖x‖` over the schedule.
    pub ratio: f64,
    pub at: BigIndex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcbReport {
    pub c0: f64,
    pub samples: Vec<AcbSample>,
    pub max_ratio: f64,
    pub verdict: String,
}

/// Largest `A_N(x)/‖x‖` per sample over a schedule (clipped to each orbit's
/// series horizon). Exceeding `c0` is evidence against absolute Cesàro
/// boundedness with constant `c0`; staying below proves nothing.
pub fn acb_probe(op: &ShiftOperator, samples: &[SparseVec], schedule: &Schedule, c0: f64) -> Result<AcbReport> {
    let mut out = Vec::new();
    for x in samples {
        if x.is_zero() {
            return domain("ACB samples must be nonzero");
        }
        let norm = op.norm(x)?;
        let series = op.orbit_norm_series(x, schedule.last())?;
        let tr = cesaro_trace(&series, schedule, Backend::Auto)?;
        out.push(AcbSample { x: x.clone(), ratio: (tr.max / norm).to_f64(), at: tr.argmax });
    }
    let max_ratio = out.iter().map(|s| s.ratio).fold(f64::NEG_INFINITY, f64::max);
    let verdict = if max_ratio > c0 {
        format!("ACB violated beyond C0 = {c0}")
    } else {
        format!("no violation of C0 = {c0} observed")
    };
    Ok(AcbReport { c0, samples: out, max_ratio, verdict })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmiReport {
    pub min_dip: f64,
    pub dip_at: BigIndex,
    pub max_peak: f64,
    pub peak_at: BigIndex,
    pub eta: f64,
    pub lambda: f64,
    pub lambda0: f64,
    pub irregular_candidate: bool,
    pub semi_irregular_candidate: bool,
}

/// Dip/peak probe for absolutely mean (semi-)irregular behaviour.
pub fn ami_probe(
    op: &ShiftOperator,
    x: &SparseVec,
    dips: &Schedule,
    peaks: &Schedule,
    eta: f64,
    lambda: f64,
    lambda0: Option<f64>,
) -> Result<AmiReport> {
    if x.is_zero() {
        return domain("probe vector must be nonzero");
    }
    let horizon = std::cmp::max(dips.last(), peaks.last()).clone();
    let series = op.orbit_norm_series(x, &horizon)?;
    let d = cesaro_trace(&series, dips, Backend::Auto)?;
    let p = cesaro_trace(&series, peaks, Backend::Auto)?;
    let lambda0 = lambda0.unwrap_or(10.0 * eta);
    let (min_dip, max_peak) = (d.min.to_f64(), p.max.to_f64());
    Ok(AmiReport {
        min_dip,
        dip_at: d.argmin,
        max_peak,
        peak_at: p.argmax,
        eta,
        lambda,
        lambda0,
        irregular_candidate: min_dip < eta && max_peak > lambda,
        semi_irregular_candidate: min_dip < eta && max_peak > lambda0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub k: u64,
    pub y: Option<SparseVec>,
    pub n: Option<BigIndex>,
    pub mean: f64,
    pub norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Walks the orbit of `y`, calling `f(N, S_N)` for `N = 1..=upto` until it
/// returns `true`. Dead orbits keep `S_N` constant. Returns the stopping
/// `N`, if any, and the number of steps taken.
fn scan_sums(
    op: &ShiftOperator,
    y: &SparseVec,
    upto: u64,
    budget: &mut u64,
    mut f: impl FnMut(u64, LogReal) -> bool,
) -> Result<Option<u64>> {
    let mut walk = op.orbit_walk(y)?;
    let mut acc = LogSum::new();
    for n in 1..=upto {
        if *budget == 0 {
            return Err(Error::Budget("candidate evaluations exhausted".into()));
        }
        *budget -= 1;
        if !walk.is_dead() {
            acc.push(walk.next_norm()?);
        }
        if f(n, acc.value()) {
            return Ok(Some(n));
        }
        if walk.is_dead() {
            // S_N is frozen, so A_N only decreases from here on
            return Ok(None);
        }
    }
    Ok(None)
}

/// For each `k ≤ k_max`, the first candidate `y` (in order) with some
/// `N ≤ n_cap` such that `A_N(y) > k ‖y‖`.
pub fn mlycc_witness_search(
    op: &ShiftOperator,
    x0: Candidates<'_>,
    k_max: u64,
    max_candidates: u64,
    n_cap: u64,
    budget: u64,
) -> Result<Vec<Witness>> {
    let mut left = budget;
    let mut out = Vec::new();
    for k in 1..=k_max {
        let mut found = None;
        let mut failure = None;
        'cands: for i in 0..max_candidates {
            let Some(y) = x0(i) else { break };
            let norm = op.norm(&y)?;
            let target = LogReal::from_f64(k as f64) * norm;
            let mut mean = LogReal::ZERO;
            let hit = scan_sums(op, &y, n_cap, &mut left, |n, s| {
                mean = s / LogReal::from_f64(n as f64);
                mean > target
            });
            match hit {
                Ok(Some(n)) => {
                    found = Some((y, n, mean.to_f64(), norm.to_f64()));
                    break 'cands;
                }
                Ok(None) => {}
                Err(Error::Budget(m)) => {
                    failure = Some(m);
                    break 'cands;
                }
                Err(e) => return Err(e),
            }
        }
        out.push(match found {
            Some((y, n, mean, norm)) => Witness { k, y: Some(y), n: Some(n.into()), mean, norm, failure: None },
            None => Witness {
                k,
                y: None,
                n: None,
                mean: f64::NAN,
                norm: f64::NAN,
                failure: Some(failure.unwrap_or_else(|| "no witness among the candidates".into())),
            },
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub m: u64,
    pub x: SparseVec,
    pub n: BigIndex,
    /// `A_{N_m}(x_m)`
    pub mean: f64,
    /// `m (2C)^m`
    pub lower: f64,
    /// `max_{k<m} A_{N_m}(x_k)`
    pub earlier_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub c: f64,
    pub stages: Vec<Stage>,
    pub r: Vec<u64>,
    pub x_beta: SparseVec,
    pub evaluations: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl Certificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

const SEARCH_CUSHION: f64 = 1e-9;

/// Prefix sums of `‖T^j x‖` up to the orbit's death (or `cap`).
struct FrozenOrbit {
    prefix: Vec<LogReal>,
}

impl FrozenOrbit {
    fn new(op: &ShiftOperator, x: &SparseVec, cap: u64) -> Result<Self> {
        let mut walk = op.orbit_walk(x)?;
        let mut acc = LogSum::new();
        let mut prefix = Vec::new();
        for _ in 0..cap {
            if walk.is_dead() {
                break;
            }
            acc.push(walk.next_norm()?);
            prefix.push(acc.value());
        }
        Ok(FrozenOrbit { prefix })
    }

    fn mean(&self, n: u64) -> LogReal {
        let i = (n as usize).min(self.prefix.len());
        let s = if i == 0 { LogReal::ZERO } else { self.prefix[i - 1] };
        s / LogReal::from_f64(n as f64)
    }
}

/// Builds normalized `x_1, …, x_stages` from the candidates with
/// `A_{N_m}(x_m) > m (2C)^m` and `A_{N_m}(x_k) < 1/m` for `k < m`, then
/// assembles `x_β = Σ_j (2C)^{-r_j} x_{r_j}` with the minimal admissible
/// spacing `r_1 = 1`, `r_{j+1} = 1 + r_j + N_{r_j + 1}`.
pub fn construct_irregular_vector(
    op: &ShiftOperator,
    c: Option<f64>,
    stages: u64,
    x0: Candidates<'_>,
    max_candidates: u64,
    n_cap: u64,
    budget: u64,
) -> Result<Certificate> {
    let c = c.unwrap_or_else(|| op.norm_bound());
    if !(c > 0.0) {
        return domain("C must be positive");
    }
    let two_c = 2.0 * c;
    let mut left = budget;
    let mut built: Vec<Stage> = Vec::new();
    let mut frozen: Vec<FrozenOrbit> = Vec::new();
    let mut failure = None;
    for m in 1..=stages {
        let lower = m as f64 * two_c.powi(m as i32);
        let prev_n = built.last().map_or(0, |s| s.n.to_u64().unwrap());
        let small = 1.0 / m as f64;
        // strict inequalities are searched with a relative cushion so that
        // exact ties (common for dyadic weights) are not accepted by rounding
        let earlier_ok = |n: u64| frozen.iter().all(|f| f.mean(n).to_f64() < small * (1.0 - SEARCH_CUSHION));
        // first horizon past N_{m-1} where all earlier orbits average below 1/m
        let mut lo = prev_n + 1;
        while lo <= n_cap && !earlier_ok(lo) {
            lo += 1;
        }
        if lo > n_cap {
            failure = Some(format!("stage {m}: earlier orbits do not settle below 1/{m} by N = {n_cap}"));
            break;
        }
        let mut hit = None;
        for i in 0..max_candidates {
            let Some(y) = x0(i) else { break };
            let norm = op.norm(&y)?;
            if norm.is_zero() {
                continue;
            }
            let y = y.scale(norm.recip());
            let mut mean_at = 0.0;
            let r = scan_sums(op, &y, n_cap, &mut left, |n, s| {
                if n < lo {
                    return false;
                }
                let a = (s / LogReal::from_f64(n as f64)).to_f64();
                mean_at = a;
                a > lower * (1.0 + SEARCH_CUSHION) && earlier_ok(n)
            });
            let r = match r {
                Err(Error::Budget(msg)) => {
                    failure = Some(format!("stage {m}: {msg}"));
                    break;
                }
                other => other?,
            };
            // dead orbit before reaching lo: only N = lo remains worth a look
            let r = match r {
                Some(n) => Some((n, mean_at)),
                None => {
                    let f = FrozenOrbit::new(op, &y, lo)?;
                    let a = f.mean(lo).to_f64();
                    (matches!(op.orbit_norm_series(&y, &BigIndex::one())?.tail, Tail::ZeroAfter(_))
                        && f.prefix.len() < lo as usize
                        && a > lower * (1.0 + SEARCH_CUSHION)
                        && earlier_ok(lo))
                    .then_some((lo, a))
                }
            };
            if let Some((n, a)) = r {
                hit = Some((y, n, a));
                break;
            }
        }
        if failure.is_some() {
            break;
        }
        let Some((y, n, a)) = hit else {
            failure = Some(format!("stage {m}: no witness among {max_candidates} candidates"));
            break;
        };
        let earlier_max = frozen.iter().map(|f| f.mean(n).to_f64()).fold(0.0, f64::max);
        frozen.push(FrozenOrbit::new(op, &y, n_cap.max(n))?);
        built.push(Stage { m, x: y, n: n.into(), mean: a, lower, earlier_max });
    }

    // r_1 = 1, r_{j+1} = 1 + r_j + N_{r_j + 1}, kept while x_{r_j} exists
    let mut r = Vec::new();
    let mut rj = 1u64;
    while (rj as usize) <= built.len() {
        r.push(rj);
        let Some(next) = built.get(rj as usize) else { break };
        rj = 1 + rj + next.n.to_u64().unwrap();
    }
    let mut x_beta = SparseVec::zero();
    for &j in &r {
        let coeff = LogReal::from_ln(-(j as f64) * two_c.ln());
        x_beta = x_beta.add(&built[j as usize - 1].x.scale(coeff));
    }
    Ok(Certificate { c, stages: built, r, x_beta, evaluations: budget - left, failure })
}

/// Re-checks a certificate with the closed-form backend: the stage
/// inequalities, and for every `r_k` with stage `r_k + 1` present the
/// bounds `A_{N_{r_k}}(x_β) ≥ r_k - 1` and `A_{N_{r_k+1}}(x_β) ≤ 1/(r_k+1)`.
pub fn verify_certificate(op: &ShiftOperator, cert: &Certificate) -> Result<CheckReport> {
    let mut rep = CheckReport::new("irregular vector certificate");
    let two_c = 2.0 * cert.c;
    let mean = |x: &SparseVec, n: &BigIndex| -> Result<f64> {
        if x.is_zero() {
            return Ok(0.0);
        }
        let s = op.orbit_norm_series(x, n)?;
        Ok(cesaro_mean(&s, n, Backend::Auto)?.to_f64())
    };
    for (i, st) in cert.stages.iter().enumerate() {
        let a = mean(&st.x, &st.n)?;
        let lower = st.m as f64 * two_c.powi(st.m as i32);
        rep.push(CheckEntry::above(format!("stage {} peak", st.m), a, lower, Scale::Linear));
        for (k, prev) in cert.stages[..i].iter().enumerate() {
            let b = mean(&prev.x, &st.n)?;
            rep.push(CheckEntry::below(
                format!("stage {} smallness of x_{}", st.m, k + 1),
                b,
                1.0 / st.m as f64,
                Scale::Linear,
            ));
        }
    }
    let tol = 1e-6;
    let tail = 0.5f64.powi(cert.stages.len() as i32);
    for &rk in &cert.r {
        let Some(next) = cert.stages.get(rk as usize) else { continue };
        let here = &cert.stages[rk as usize - 1];
        let a = mean(&cert.x_beta, &here.n)?;
        let rhs = rk as f64 - 1.0;
        rep.push(
            CheckEntry::at_least(format!("x_beta peak at N_{rk}"), a, rhs, tol * rhs.abs().max(1.0), Scale::Linear)
                .with_note(format!("omitted tail terms bounded by {tail:e}")),
        );
        let a = mean(&cert.x_beta, &next.n)?;
        let rhs = 1.0 / (rk as f64 + 1.0);
        rep.push(
            CheckEntry::at_most(format!("x_beta dip at N_{}", rk + 1), a, rhs, tol, Scale::Linear)
                .with_note(format!("omitted tail terms bounded by {tail:e}")),
        );
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub horizon: u64,
    pub max_ratio: f64,
    pub argmax: u64,
    pub last_ratio: f64,
}

/// `max_{n ≤ horizon} ‖T^n‖ / n`.
pub fn norm_growth_probe(op: &ShiftOperator, horizon: u64) -> Result<GrowthReport> {
    if horizon == 0 {
        return domain("horizon must be at least 1");
    }
    let mut best = (f64::NEG_INFINITY, 0u64);
    let mut last = 0.0;
    for n in 1..=horizon {
        let r = (op.operator_norm(&BigIndex::from(n))? / LogReal::from_f64(n as f64)).to_f64();
        if r > best.0 {
            best = (r, n);
        }
        last = r;
    }
    Ok(GrowthReport { horizon, max_ratio: best.0, argmax: best.1, last_ratio: last })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{build_tbilcami, TbilcamiVariant, WeightModel};

    fn idx(i: i64) -> BigIndex {
        BigIndex::from(i)
    }

    fn harmonic_number(n: u64) -> f64 {
        (1..=n).map(|i| 1.0 / i as f64).sum()
    }

    #[test]
    fn acb_harmonic() {
        let h = ShiftOperator::backward(WeightModel::harmonic());
        for n in [10u64, 100, 1000] {
            let sch = Schedule::geometric(&idx(1), &idx(n as i64 - 1), 1.5).unwrap();
            let r = acb_probe(&h, &[SparseVec::basis(n)], &sch, 1.0).unwrap();
            let expect = n as f64 / (n - 1) as f64 * harmonic_number(n - 1);
            assert!((r.max_ratio - expect).abs() < 1e-9 * expect);
        }
        let sch = Schedule::geometric(&idx(1), &idx(999), 1.5).unwrap();
        let r = acb_probe(&h, &[SparseVec::basis(1000u64).scale(LogReal::from_f64(-7.0))], &sch, 7.0).unwrap();
        assert!((r.max_ratio - 7.4925).abs() < 1e-3);
        assert!(r.verdict.starts_with("ACB violated"));
    }

    #[test]
    fn acb_identity() {
        let id = ShiftOperator::identity();
        let sch = Schedule::geometric(&idx(1), &idx(100), 2.0).unwrap();
        let r = acb_probe(&id, &[SparseVec::basis(3), SparseVec::from_pairs(&[(1, 2.0), (5, -1.0)])], &sch, 1.0)
            .unwrap();
        assert!((r.max_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn acb_block_tops() {
        let b = ShiftOperator::backward(WeightModel::block());
        for n in 1..=20u64 {
            let sch = Schedule::geometric(&idx(1), &idx(n as i64), 1.3).unwrap();
            let r = acb_probe(&b, &[SparseVec::basis(n * (n + 1))], &sch, 1.0).unwrap();
            assert!(r.max_ratio >= 2f64.powi(n as i32 + 1) / (2.0 * n as f64) - 1e-9);
        }
    }

    #[test]
    fn ami_flags() {
        let p = build_tbilcami(TbilcamiVariant::Original, 100).unwrap();
        let op = ShiftOperator::bilateral_forward(p.clone(), 1.0).unwrap();
        let dips = Schedule::tbilcami_dips(&p, &[1, 2, 3]).unwrap();
        let peaks = Schedule::tbilcami_hills(&p, &[10, 100]).unwrap();
        let r = ami_probe(&op, &SparseVec::basis(0), &dips, &peaks, 0.65, 1.0, None).unwrap();
        assert!(r.irregular_candidate);
        let id = ShiftOperator::identity();
        let s = Schedule::geometric(&idx(1), &idx(1000), 2.0).unwrap();
        let r = ami_probe(&id, &SparseVec::basis(1), &s, &s, 1e-3, 10.0, None).unwrap();
        assert!(!r.irregular_candidate && !r.semi_irregular_candidate);
    }

    #[test]
    fn harmonic_witnesses() {
        let h = ShiftOperator::backward(WeightModel::harmonic());
        let w = mlycc_witness_search(&h, &basis_candidates, 5, 10_000, 100_000, 10_000_000).unwrap();
        for wi in &w {
            let y = wi.y.as_ref().unwrap();
            let n = wi.n.as_ref().unwrap();
            let s = h.orbit_norm_series(y, n).unwrap();
            let a = cesaro_mean(&s, n, Backend::Loop).unwrap().to_f64();
            assert!(a > wi.k as f64 * wi.norm);
        }
        // (9/8) H_8 ≈ 3.058 while (8/7) H_7 ≈ 2.964
        assert_eq!(w[2].y, Some(SparseVec::basis(9)));
        assert_eq!(w[2].n, Some(idx(8)));
    }

    #[test]
    fn identity_has_no_witness() {
        let id = ShiftOperator::identity();
        let w = mlycc_witness_search(&id, &basis_candidates, 3, 20, 50, 1_000_000).unwrap();
        assert!(w.iter().all(|wi| wi.y.is_none() && wi.failure.is_some()));
        let cert = construct_irregular_vector(&id, None, 2, &basis_candidates, 20, 50, 1_000_000).unwrap();
        assert!(cert.stages.is_empty());
        assert!(cert.failure.as_deref().unwrap().starts_with("stage 1"));
    }

    #[test]
    fn block_certificate() {
        let b = ShiftOperator::backward(WeightModel::block());
        let cert = construct_irregular_vector(&b, Some(2.0), 2, &basis_candidates, 10_000, 100_000, 1_000_000).unwrap();
        assert_eq!(cert.stages.len(), 2, "{:?}", cert.failure);
        assert_eq!(cert.stages[0].x, SparseVec::basis(12));
        assert_eq!(cert.stages[0].n, idx(3));
        assert_eq!(cert.r, vec![1]);
        let rep = verify_certificate(&b, &cert).unwrap();
        assert!(rep.all_passed(), "{rep:?}");
        assert!(rep.get("x_beta dip at N_2").is_some());
        let back = Certificate::from_json(&cert.to_json()).unwrap();
        assert_eq!(back, cert);
    }

    #[test]
    fn corrupted_certificate_fails_dip() {
        let b = ShiftOperator::backward(WeightModel::block());
        let mut cert = construct_irregular_vector(&b, None, 2, &basis_candidates, 10_000, 100_000, 1_000_000).unwrap();
        // doubling keeps A_{N_2}(x_beta) under 1/2 when C = 2; a factor 8 does not
        let mut doubled = cert.clone();
        doubled.x_beta = doubled.x_beta.scale(LogReal::from_f64(2.0));
        assert!(verify_certificate(&b, &doubled).unwrap().all_passed());
        cert.x_beta = cert.x_beta.scale(LogReal::from_f64(8.0));
        let rep = verify_certificate(&b, &cert).unwrap();
        assert!(rep.get("x_beta peak at N_1").unwrap().passed);
        assert!(!rep.get("x_beta dip at N_2").unwrap().passed);
    }

    #[test]
    fn three_stages() {
        let b = ShiftOperator::backward(WeightModel::block());
        let cert = construct_irregular_vector(&b, None, 3, &basis_candidates, 10_000, 1_000_000, 10_000_000).unwrap();
        assert_eq!(cert.stages.len(), 3, "{:?}", cert.failure);
        let ns: Vec<u64> = cert.stages.iter().map(|s| s.n.to_u64().unwrap()).collect();
        assert!(ns.windows(2).all(|w| w[0] < w[1]));
        assert!(verify_certificate(&b, &cert).unwrap().all_passed());
        let xs: Vec<SparseVec> = cert.stages.iter().map(|s| s.x.clone()).collect();
        assert_eq!(ns, vec![3, 65, 9115]);
        assert_eq!(xs, vec![SparseVec::basis(12), SparseVec::basis(90), SparseVec::basis(380)]);
    }

    #[test]
    fn empty_certificate() {
        let b = ShiftOperator::backward(WeightModel::block());
        let cert = construct_irregular_vector(&b, None, 0, &basis_candidates, 10, 10, 100).unwrap();
        assert!(cert.stages.is_empty() && cert.x_beta.is_zero());
        assert!(verify_certificate(&b, &cert).unwrap().entries.is_empty());
    }

    #[test]
    fn growth() {
        let h = ShiftOperator::backward(WeightModel::harmonic());
        let g = norm_growth_probe(&h, 1000).unwrap();
        assert_eq!(g.argmax, 1);
        assert!((g.max_ratio - 2.0).abs() < 1e-12 && (g.last_ratio - 1.001).abs() < 1e-12);
        let g = norm_growth_probe(&ShiftOperator::identity(), 50).unwrap();
        assert_eq!((g.argmax, g.max_ratio), (1, 1.0));
        let g = norm_growth_probe(&ShiftOperator::backward(WeightModel::block()), 20).unwrap();
        assert_eq!(g.argmax, 20);
        assert!((g.max_ratio - 2f64.powi(20) / 20.0).abs() < 1e-6);
    }
}
