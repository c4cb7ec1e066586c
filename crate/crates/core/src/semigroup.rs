//! Translation-type semigroups on weighted `L^p` spaces, evaluated on step
//! functions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::logcore::BigIndex;
use crate::report::{CheckEntry, CheckReport, Scale};
use crate::weights::{AnchorProfile, LogVWalker};

pub const DEFAULT_TOL: f64 = 1e-8;
const MAX_DEPTH: u32 = 48;
const MAX_CELLS: u64 = 10_000_000;
const MAX_KINKS: usize = 200_000;

/// Finitely many constant pieces; zero outside `[breakpoints[0], last]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() && values.is_empty() {
            return Ok(Self::zero());
        }
        if breakpoints.len() != values.len() + 1 {
            return domain("a step function needs one more breakpoint than values");
        }
        if breakpoints.iter().chain(&values).any(|x| !x.is_finite()) {
            return domain("step function data must be finite");
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return domain("breakpoints must increase strictly");
        }
        Ok(StepFunction { breakpoints, values })
    }

    pub fn zero() -> Self {
        StepFunction { breakpoints: Vec::new(), values: Vec::new() }
    }

    /// Pieces `(a, b, value)`, disjoint, in any order; gaps become zero.
    pub fn from_pieces(pieces: &[(f64, f64, f64)]) -> Result<Self> {
        let mut ps = pieces.to_vec();
        ps.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut bps = Vec::new();
        let mut vals = Vec::new();
        for &(a, b, c) in &ps {
            if !(a < b) {
                return domain(format!("empty piece [{a}, {b}]"));
            }
            match bps.last() {
                Some(&end) if a < end => return domain("pieces overlap"),
                Some(&end) if a > end => {
                    vals.push(0.0);
                    bps.push(a);
                }
                Some(_) => {}
                None => bps.push(a),
            }
            vals.push(c);
            bps.push(b);
        }
        Self::new(bps, vals)
    }

    /// `c · χ_[a,b]`
    pub fn indicator(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::from_pieces(&[(a, b, c)])
    }

    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, &c)| (self.breakpoints[i], self.breakpoints[i + 1], c))
    }

    pub fn is_zero(&self) -> bool {
        self.pieces().next().is_none()
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        let lo = self.pieces().next()?.0;
        let hi = self.pieces().last()?.1;
        Some((lo, hi))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.pieces().find(|&(a, b, _)| a <= x && x < b).map_or(0.0, |p| p.2)
    }

    pub fn scale(&self, c: f64) -> Self {
        StepFunction { breakpoints: self.breakpoints.clone(), values: self.values.iter().map(|v| v * c).collect() }
    }

    /// `x ↦ f(x + t)`
    pub fn shift(&self, t: f64) -> Self {
        StepFunction { breakpoints: self.breakpoints.iter().map(|b| b - t).collect(), values: self.values.clone() }
    }

    /// Restriction to `[x0, ∞)`.
    pub fn clip_below(&self, x0: f64) -> Self {
        let ps: Vec<_> = self.pieces().filter(|p| p.1 > x0).map(|(a, b, c)| (a.max(x0), b, c)).collect();
        Self::from_pieces(&ps).expect("clipping keeps pieces valid")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineDomain {
    /// `[0, ∞)`
    HalfLine,
    Line,
}

#[derive(Clone, Debug)]
pub enum WeightFunction {
    Constant(f64),
    /// `(x, ln v(x))` anchors, log-linear in between, flat outside.
    PiecewiseExponential(Vec<(f64, f64)>),
    /// `v(x) = v_k` for `x ∈ ]k-1, k]`.
    StepFromProfile(Arc<AnchorProfile>),
}

/// Step weight on the line matching a sequence profile at the integers.
pub fn discretized_profile_weight(profile: AnchorProfile) -> WeightFunction {
    WeightFunction::StepFromProfile(Arc::new(profile))
}

fn ln_expm1_ratio(s: f64, len: f64) -> f64 {
    // ∫_0^len e^{s u} du
    if s == 0.0 {
        len
    } else {
        (s * len).exp_m1() / s
    }
}

impl WeightFunction {
    pub fn piecewise_exponential(anchors: Vec<(f64, f64)>) -> Result<Self> {
        if anchors.is_empty() {
            return domain("piecewise exponential weight needs an anchor");
        }
        if anchors.iter().any(|(x, l)| !x.is_finite() || !l.is_finite()) {
            return domain("weight anchors must be finite");
        }
        if anchors.windows(2).any(|w| w[0].0 >= w[1].0) {
            return domain("weight anchors must increase strictly");
        }
        Ok(WeightFunction::PiecewiseExponential(anchors))
    }

    pub fn domain(&self) -> LineDomain {
        match self {
            WeightFunction::StepFromProfile(_) => LineDomain::Line,
            _ => LineDomain::HalfLine,
        }
    }

    fn cell(x: f64) -> BigIndex {
        BigIndex::from(x.ceil() as i64)
    }

    pub fn log_v(&self, x: f64) -> Result<f64> {
        match self {
            WeightFunction::Constant(c) => Ok(c.ln()),
            WeightFunction::PiecewiseExponential(a) => {
                let i = a.partition_point(|&(ax, _)| ax <= x);
                Ok(if i == 0 {
                    a[0].1
                } else if i == a.len() {
                    a[i - 1].1
                } else {
                    let ((x0, l0), (x1, l1)) = (a[i - 1], a[i]);
                    l0 + (l1 - l0) * (x - x0) / (x1 - x0)
                })
            }
            WeightFunction::StepFromProfile(p) => p.log_v(&Self::cell(x)),
        }
    }

    /// `∫_a^b v(x) dx`
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        if !(a < b) {
            return Ok(0.0);
        }
        match self {
            WeightFunction::Constant(c) => Ok(c * (b - a)),
            WeightFunction::PiecewiseExponential(anchors) => {
                let mut cuts = vec![a];
                cuts.extend(anchors.iter().map(|p| p.0).filter(|&x| a < x && x < b));
                cuts.push(b);
                let mut acc = 0.0;
                for w in cuts.windows(2) {
                    let (l0, l1) = (self.log_v(w[0])?, self.log_v(w[1])?);
                    let len = w[1] - w[0];
                    acc += l0.exp() * ln_expm1_ratio((l1 - l0) / len, len);
                }
                Ok(acc)
            }
            WeightFunction::StepFromProfile(p) => {
                let (k0, k1) = (a.floor() as i64 + 1, b.ceil() as i64);
                if (k1 - k0) as u64 > MAX_CELLS {
                    return Err(Error::Budget(format!("{} unit cells exceed the cell budget", k1 - k0)));
                }
                let mut walker = LogVWalker::new(p);
                let mut acc = 0.0;
                for k in k0..=k1 {
                    let len = (k as f64).min(b) - ((k - 1) as f64).max(a);
                    if len > 0.0 {
                        acc += len * walker.log_v(&BigIndex::from(k))?.exp();
                    }
                }
                Ok(acc)
            }
        }
    }

    /// Upper bound for `sup_x ln(v(x)/v(x+t))`, exact except for profiles.
    pub fn max_log_drop(&self, t: f64) -> f64 {
        match self {
            WeightFunction::Constant(_) => 0.0,
            WeightFunction::PiecewiseExponential(a) => {
                // piecewise linear in x with kinks at anchors and anchors - t
                let mut best: f64 = 0.0;
                let cands = a.iter().flat_map(|p| [p.0, p.0 - t]).chain([0.0]);
                for x in cands.filter(|&x| x >= 0.0) {
                    best = best.max(self.log_v(x).unwrap() - self.log_v(x + t).unwrap());
                }
                best
            }
            WeightFunction::StepFromProfile(p) => {
                let first = p.first_index();
                let mut drop: f64 = 0.0;
                for (lo, hi) in p.segments_up(&first).expect("first index is inside") {
                    let span = (&hi.index - &lo.index).to_f64();
                    drop = drop.max((lo.logv - hi.logv) / span);
                }
                t.ceil() * drop
            }
        }
    }

    /// `max v(τ)/v(τ+t)` over the sampled pairs; a surrogate for
    /// admissibility.
    pub fn admissibility_sample(&self, taus: &[f64], ts: &[f64]) -> Result<f64> {
        let mut best = f64::NEG_INFINITY;
        for &tau in taus {
            for &t in ts {
                best = best.max(self.log_v(tau)? - self.log_v(tau + t)?);
            }
        }
        Ok(best.exp())
    }

    fn kink_offsets(&self, span: f64) -> Vec<f64> {
        match self {
            WeightFunction::Constant(_) => Vec::new(),
            WeightFunction::PiecewiseExponential(a) => a.iter().map(|p| p.0).collect(),
            WeightFunction::StepFromProfile(_) => {
                if span > MAX_KINKS as f64 {
                    Vec::new()
                } else {
                    (0..=span.ceil() as i64).map(|k| k as f64).collect()
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum SemigroupFamily {
    /// `T_t f(x) = f(x + t)` on `L^p_v`.
    Translation { v: WeightFunction, p: f64 },
    /// `T_t f(x) = ((x+t)/x)^γ f(x+t)` on `L^p(1, ∞)`.
    MultiplicativeTranslation { gamma: f64, p: f64 },
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        domain(format!("p = {p} is not supported (need 1 ≤ p < ∞)"))
    }
}

impl SemigroupFamily {
    pub fn translation(v: WeightFunction, p: f64) -> Result<Self> {
        check_p(p)?;
        Ok(SemigroupFamily::Translation { v, p })
    }

    pub fn multiplicative(gamma: f64, p: f64) -> Result<Self> {
        check_p(p)?;
        if !(gamma >= 0.0) {
            return domain("γ must be nonnegative");
        }
        Ok(SemigroupFamily::MultiplicativeTranslation { gamma, p })
    }

    /// `γ = (1-ε)/p`
    pub fn mixing_acb(eps: f64, p: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return domain("ε must lie in (0, 1)");
        }
        Self::multiplicative((1.0 - eps) / p, p)
    }

    pub fn p(&self) -> f64 {
        match self {
            SemigroupFamily::Translation { p, .. } | SemigroupFamily::MultiplicativeTranslation { p, .. } => *p,
        }
    }

    /// Left end of the underlying domain, if any.
    pub fn left_end(&self) -> Option<f64> {
        match self {
            SemigroupFamily::Translation { v, .. } => match v.domain() {
                LineDomain::HalfLine => Some(0.0),
                LineDomain::Line => None,
            },
            SemigroupFamily::MultiplicativeTranslation { .. } => Some(1.0),
        }
    }

    /// Exact for unweighted and piecewise exponential translations and the
    /// multiplicative family; an upper bound for profile steps.
    pub fn operator_norm_bound(&self, t: f64) -> f64 {
        match self {
            SemigroupFamily::Translation { v, p } => (v.max_log_drop(t) / p).exp(),
            SemigroupFamily::MultiplicativeTranslation { gamma, .. } => (1.0 + t).powf(*gamma),
        }
    }

    /// `C_s = max ‖T_t‖` over a grid of `[0, s]`.
    pub fn c_s(&self, s: f64) -> f64 {
        (0..=64).map(|i| self.operator_norm_bound(s * i as f64 / 64.0)).fold(1.0, f64::max)
    }

    /// `T_t f` as a step function, when the family keeps steps.
    pub fn translate(&self, f: &StepFunction, t: f64) -> Result<StepFunction> {
        match self {
            SemigroupFamily::Translation { .. } => {
                let g = f.shift(t);
                Ok(match self.left_end() {
                    Some(x0) => g.clip_below(x0),
                    None => g,
                })
            }
            SemigroupFamily::MultiplicativeTranslation { .. } => {
                Err(Error::Capability("multiplicative translates are not step functions".into()))
            }
        }
    }

    /// Values of `t` in `(0, ∞)` where `t ↦ ‖T_t f‖` may kink.
    fn kinks(&self, f: &StepFunction, b: f64) -> Vec<f64> {
        let edges: Vec<f64> = f.pieces().flat_map(|(a, c, _)| [a, c]).collect();
        let offsets = match self {
            SemigroupFamily::Translation { v, .. } => {
                let mut o = v.kink_offsets(b + edges.iter().fold(0.0f64, |m, x| m.max(x.abs())));
                o.extend(self.left_end());
                o
            }
            SemigroupFamily::MultiplicativeTranslation { .. } => vec![1.0],
        };
        let mut ks: Vec<f64> = Vec::new();
        if edges.len() * offsets.len() <= MAX_KINKS {
            ks = edges.iter().flat_map(|e| offsets.iter().map(move |o| e - o)).filter(|&t| t > 0.0 && t < b).collect();
        }
        ks.sort_by(f64::total_cmp);
        ks.dedup();
        ks
    }

    /// Beyond this `t` the orbit of `f` vanishes.
    fn extinction(&self, f: &StepFunction) -> f64 {
        match (self.left_end(), f.support()) {
            (_, None) => 0.0,
            (Some(x0), Some((_, hi))) => (hi - x0).max(0.0),
            (None, Some(_)) => f64::INFINITY,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

fn simpson_rec(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    err: &mut f64,
) -> Result<f64> {
    let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
    let (flm, frm) = (f(lm)?, f(rm)?);
    let h = (b - a) / 12.0;
    let left = h * (fa + 4.0 * flm + fm);
    let right = h * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol || m - a <= f64::EPSILON * m.abs().max(1.0) {
        *err += diff.abs() / 15.0;
        return Ok(left + right + diff / 15.0);
    }
    Ok(simpson_rec(f, a, fa, lm, flm, m, fm, left, tol / 2.0, depth - 1, err)?
        + simpson_rec(f, m, fm, rm, frm, b, fb, right, tol / 2.0, depth - 1, err)?)
}

/// Adaptive Simpson on `[a, b]` split at the given interior points, with
/// absolute tolerance `tol` shared in proportion to panel length.
pub fn adaptive_simpson(f: &mut dyn FnMut(f64) -> Result<f64>, a: f64, b: f64, cuts: &[f64], tol: f64) -> Result<Integral> {
    if !(a < b) {
        return Ok(Integral { value: 0.0, error: 0.0 });
    }
    let mut pts = vec![a];
    pts.extend(cuts.iter().copied().filter(|&c| a < c && c < b));
    pts.push(b);
    let mut value = 0.0;
    let mut error = 0.0;
    for w in pts.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let xm = (x0 + x1) / 2.0;
        let (f0, fm, f1) = (f(x0)?, f(xm)?, f(x1)?);
        let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
        let ptol = tol * (x1 - x0) / (b - a);
        value += simpson_rec(f, x0, f0, xm, fm, x1, f1, whole, ptol, MAX_DEPTH, &mut error)?;
    }
    if error > tol {
        return Err(Error::Quadrature { achieved: error });
    }
    Ok(Integral { value, error })
}

/// `‖T_t f‖` with the default inner tolerance.
pub fn semigroup_norm(family: &SemigroupFamily, f: &StepFunction, t: f64) -> Result<f64> {
    semigroup_norm_tol(family, f, t, DEFAULT_TOL)
}

/// `‖T_t f‖^p`, quadrature relative tolerance `tol` where one is needed.
fn norm_pow(family: &SemigroupFamily, f: &StepFunction, t: f64, tol: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return domain("t must be nonnegative");
    }
    let p = family.p();
    let mut acc = 0.0;
    match family {
        SemigroupFamily::Translation { v, .. } => {
            let x0 = family.left_end().unwrap_or(f64::NEG_INFINITY);
            for (a, b, c) in f.pieces() {
                acc += c.abs().powf(p) * v.integral((a - t).max(x0), b - t)?;
            }
        }
        SemigroupFamily::MultiplicativeTranslation { gamma, .. } => {
            let q = gamma * p;
            for (a, b, c) in f.pieces() {
                let (lo, hi) = ((a - t).max(1.0), b - t);
                if !(lo < hi) {
                    continue;
                }
                let piece = if q == 0.0 || t == 0.0 {
                    hi - lo
                } else {
                    // the integrand lies in [1, (1+t)^q] on x ≥ 1
                    let crude = (hi - lo) * ((lo + t) / lo).powf(q).min(((hi + t) / hi).powf(q));
                    let mut g = |x: f64| Ok(((x + t) / x).powf(q));
                    adaptive_simpson(&mut g, lo, hi, &[], tol * crude)?.value
                };
                acc += c.abs().powf(p) * piece;
            }
        }
    }
    Ok(acc)
}

pub fn semigroup_norm_tol(family: &SemigroupFamily, f: &StepFunction, t: f64, tol: f64) -> Result<f64> {
    Ok(norm_pow(family, f, t, tol)?.powf(1.0 / family.p()))
}

fn mean_integral(family: &SemigroupFamily, f: &StepFunction, b: f64, tol: f64, power: bool) -> Result<Integral> {
    if !(b > 0.0) {
        return domain("b must be positive");
    }
    let end = family.extinction(f).min(b);
    let inner = tol / 10.0;
    let p = family.p();
    let mut g = |t: f64| {
        let s = norm_pow(family, f, t, inner)?;
        Ok(if power { s } else { s.powf(1.0 / p) })
    };
    let cuts = family.kinks(f, end);
    let r = adaptive_simpson(&mut g, 0.0, end, &cuts, tol * b)?;
    Ok(Integral { value: r.value / b, error: r.error / b })
}

/// `(1/b) ∫_0^b ‖T_t f‖ dt`, absolute tolerance `tol`.
pub fn cesaro_integral(family: &SemigroupFamily, f: &StepFunction, b: f64, tol: f64) -> Result<Integral> {
    mean_integral(family, f, b, tol, false)
}

/// `(1/b) ∫_0^b ‖T_t f‖^p dt`
pub fn cesaro_integral_pow(family: &SemigroupFamily, f: &StepFunction, b: f64, tol: f64) -> Result<Integral> {
    mean_integral(family, f, b, tol, true)
}

/// Checks `(1/b) ∫_0^b ‖T_t f‖^p dt ≤ 2 + 2/ε` for the family with
/// `γ = (1-ε)/p`, after normalizing `‖f‖_p = 1`.
pub fn acb_integral_check(eps: f64, p: f64, f: &StepFunction, bs: &[f64], tol: f64) -> Result<CheckReport> {
    let family = SemigroupFamily::mixing_acb(eps, p)?;
    let norm = semigroup_norm(&family, f, 0.0)?;
    if norm == 0.0 {
        return domain("the test function has zero norm");
    }
    let f = f.scale(1.0 / norm);
    let bound = 2.0 + 2.0 / eps;
    let mut rep = CheckReport::new(format!("ACB integral bound, eps = {eps}, p = {p}"));
    for &b in bs {
        let r = cesaro_integral_pow(&family, &f, b, tol)?;
        rep.push(
            CheckEntry::at_most(format!("b = {b}"), r.value, bound, r.error, Scale::Linear)
                .with_note(format!("quadrature error {:e}", r.error)),
        );
    }
    Ok(rep)
}

/// Both sides of the discretization sandwich around the Cesàro integral,
/// with `N = floor(b/s)`.
pub fn sandwich_check(family: &SemigroupFamily, f: &StepFunction, s: f64, bs: &[f64], tol: f64) -> Result<CheckReport> {
    if !(s > 0.0) {
        return domain("s must be positive");
    }
    let cs = family.c_s(s);
    let mut rep = CheckReport::new(format!("discretization sandwich, s = {s}, C_s = {cs}"));
    for &b in bs {
        let n = (b / s).floor() as u64;
        if n == 0 {
            rep.push(CheckEntry::at_most(format!("b = {b} skipped"), 0.0, 0.0, 0.0, Scale::Linear).with_note("N = 0"));
            continue;
        }
        let norms: Vec<f64> =
            (0..=n).map(|j| semigroup_norm_tol(family, f, j as f64 * s, tol / 10.0)).collect::<Result<_>>()?;
        let mid = cesaro_integral(family, f, b, tol)?;
        let lower = norms[1..].iter().sum::<f64>() / ((n + 1) as f64 * cs);
        let upper = cs * norms.iter().sum::<f64>() / n as f64;
        let slack = mid.error + tol;
        rep.push(CheckEntry::at_least(format!("b = {b} lower"), mid.value, lower, slack, Scale::Linear));
        rep.push(CheckEntry::at_most(format!("b = {b} upper"), mid.value, upper, slack, Scale::Linear));
    }
    Ok(rep)
}
