//! Text literals for operators, vectors, schedules, step functions, weights
//! and semigroup families.
//!
//! ```text
//! operator  := base ["+I"]
//! base      := "harmonic" | "block" | "identity" | "const:" c | "explicit:" w,w,…
//!            | "forward:" base | "tbilcami:k=" K [",flat"] | "tbilcami-back:k=" K [",flat"]
//!            | "profile:" path | "profile-back:" path
//! vector    := part ["|" part]               (second part lives in the identity summand)
//! part      := "0" | "e:" i | "sum:" [label "@"] i "=" value, … | "blockspecial:" n
//! schedule  := "geom:" a ".." b [":" factor] | "list:" n,n,… | "dips:" k,k,… | "hills:" k,k,…
//! step      := "step:" piece ";" …,  piece := [label "="] value "@[" a "," b "]"
//! weight    := "const:" c | "pexp:" x "=" ln v, … | "profile:tbilcami:k=" K [",flat"]
//! semigroup := "translation:" weight | "mult:gamma=" g | "l1" | "mixing:eps=" e
//! ```

use std::str::FromStr;

use crate::cesaro::Schedule;
use crate::error::{Error, Result};
use crate::logcore::{BigIndex, LogReal};
use crate::semigroup::{discretized_profile_weight, SemigroupFamily, StepFunction, WeightFunction};
use crate::shiftops::{special_block_vector, OpKind, ShiftOperator, SparseVec};
use crate::weights::{build_tbilcami, AnchorProfile, TbilcamiVariant, WeightModel};

fn bad<T>(what: &str, s: &str) -> Result<T> {
    Err(Error::Parse(format!("invalid {what} literal {s:?}")))
}

fn num<T: FromStr>(what: &str, s: &str) -> Result<T> {
    s.trim().parse().or_else(|_| bad(what, s))
}

fn list<T: FromStr>(what: &str, s: &str) -> Result<Vec<T>> {
    s.split(',').map(|x| num(what, x)).collect()
}

/// `k=K[,flat]`
fn tbil_args(s: &str) -> Result<AnchorProfile> {
    let mut parts = s.split(',');
    let k = parts.next().and_then(|p| p.strip_prefix("k=")).map_or_else(|| bad("profile", s), |k| num("k", k))?;
    let variant = match parts.next() {
        None => TbilcamiVariant::Original,
        Some("flat") => TbilcamiVariant::Flattened,
        Some(_) => return bad("profile", s),
    };
    if parts.next().is_some() {
        return bad("profile", s);
    }
    build_tbilcami(variant, k)
}

/// Parses an operator; `load` reads profile files.
pub fn parse_operator(s: &str, p: f64, load: &dyn Fn(&str) -> Result<String>) -> Result<ShiftOperator> {
    let s = s.trim();
    if let Some(inner) = s.strip_suffix("+I") {
        return Ok(ShiftOperator::sum_identity(parse_operator(inner, p, load)?));
    }
    let op = match s.split_once(':') {
        None => match s {
            "harmonic" => ShiftOperator::backward(WeightModel::harmonic()),
            "block" => ShiftOperator::backward(WeightModel::block()),
            "identity" => ShiftOperator::identity(),
            _ => return bad("operator", s),
        },
        Some(("const", c)) => {
            ShiftOperator::backward(WeightModel::constant(num("weight", c)?, crate::weights::Domain::Unilateral)?)
        }
        Some(("explicit", ws)) => ShiftOperator::backward(WeightModel::explicit(&list::<f64>("weight", ws)?)?),
        Some(("forward", inner)) => match parse_operator(inner, p, load)?.kind {
            OpKind::UnilateralBackward(w) => ShiftOperator::forward(w),
            _ => return bad("forward operator", s),
        },
        Some(("tbilcami", args)) => return ShiftOperator::bilateral_forward(tbil_args(args)?, p),
        Some(("tbilcami-back", args)) => return ShiftOperator::bilateral_backward(tbil_args(args)?, p),
        Some(("profile", path)) => return ShiftOperator::bilateral_forward(AnchorProfile::from_json(&load(path)?)?, p),
        Some(("profile-back", path)) => {
            return ShiftOperator::bilateral_backward(AnchorProfile::from_json(&load(path)?)?, p)
        }
        Some(_) => return bad("operator", s),
    };
    op.with_p(p)
}

fn parse_entries(s: &str) -> Result<Vec<(BigIndex, LogReal)>> {
    let mut out = Vec::new();
    for item in s.split(',') {
        let item = item.trim();
        let body = item.split_once('@').map_or(item, |(_, b)| b);
        let Some((i, v)) = body.split_once('=') else { return bad("vector entry", item) };
        out.push((num("index", i)?, LogReal::from_f64(num("value", v)?)));
    }
    Ok(out)
}

fn parse_part(s: &str) -> Result<Vec<(BigIndex, LogReal)>> {
    let s = s.trim();
    match s.split_once(':') {
        None if s == "0" => Ok(Vec::new()),
        Some(("e", i)) => Ok(vec![(num("index", i)?, LogReal::ONE)]),
        Some(("sum", body)) => parse_entries(body),
        Some(("blockspecial", n)) => Ok(special_block_vector(num("block count", n)?)?.entries),
        _ => bad("vector", s),
    }
}

pub fn parse_vector(s: &str) -> Result<SparseVec> {
    match s.split_once('|') {
        None => Ok(SparseVec::new(parse_part(s)?)),
        Some((a, b)) => Ok(SparseVec::new(parse_part(a)?).with_aux(parse_part(b)?)),
    }
}

/// Schedules; `dips`/`hills` need a hill/valley profile on the operator.
pub fn parse_schedule(s: &str, op: &ShiftOperator) -> Result<Schedule> {
    let s = s.trim();
    let profile = || match &op.kind {
        OpKind::BilateralForward(v) | OpKind::BilateralBackward(v) => Ok(v.as_ref()),
        _ => Err(Error::Capability("dip/hill schedules need a bilateral profile operator".into())),
    };
    match s.split_once(':') {
        Some(("geom", body)) => {
            let (range, factor) = match body.rsplit_once(':') {
                Some((r, f)) => (r, num("factor", f)?),
                None => (body, 2.0),
            };
            let Some((a, b)) = range.split_once("..") else { return bad("schedule", s) };
            Schedule::geometric(&num("horizon", a)?, &num("horizon", b)?, factor)
        }
        Some(("list", ns)) => Schedule::explicit(list("horizon", ns)?),
        Some(("dips", ks)) => Schedule::tbilcami_dips(profile()?, &list::<u64>("level", ks)?),
        Some(("hills", ks)) => Schedule::tbilcami_hills(profile()?, &list::<u64>("level", ks)?),
        _ => bad("schedule", s),
    }
}

pub fn parse_step(s: &str) -> Result<StepFunction> {
    let Some(body) = s.trim().strip_prefix("step:") else { return bad("step function", s) };
    let mut pieces = Vec::new();
    for piece in body.split(';') {
        let Some((head, range)) = piece.split_once('@') else { return bad("step piece", piece) };
        let value = head.rsplit_once('=').map_or(head, |(_, v)| v);
        let Some(range) = range.trim().strip_prefix('[').and_then(|r| r.strip_suffix(']')) else {
            return bad("step range", piece);
        };
        let Some((a, b)) = range.split_once(',') else { return bad("step range", piece) };
        pieces.push((num("breakpoint", a)?, num("breakpoint", b)?, num("value", value)?));
    }
    StepFunction::from_pieces(&pieces)
}

pub fn parse_weight(s: &str) -> Result<WeightFunction> {
    let s = s.trim();
    match s.split_once(':') {
        Some(("const", c)) => {
            let c: f64 = num("weight", c)?;
            if !(c > 0.0 && c.is_finite()) {
                return bad("weight", s);
            }
            Ok(WeightFunction::Constant(c))
        }
        Some(("pexp", body)) => {
            let mut anchors = Vec::new();
            for item in body.split(',') {
                let Some((x, l)) = item.split_once('=') else { return bad("weight anchor", item) };
                anchors.push((num("anchor", x)?, num("log weight", l)?));
            }
            WeightFunction::piecewise_exponential(anchors)
        }
        Some(("profile", rest)) => match rest.split_once(':') {
            Some(("tbilcami", args)) => Ok(discretized_profile_weight(tbil_args(args)?)),
            _ => bad("weight", s),
        },
        _ => bad("weight", s),
    }
}

pub fn parse_semigroup(s: &str, p: f64) -> Result<SemigroupFamily> {
    let s = s.trim();
    match s.split_once(':') {
        None if s == "l1" => SemigroupFamily::multiplicative(1.0, p),
        Some(("translation", w)) => SemigroupFamily::translation(parse_weight(w)?, p),
        Some(("mult", g)) => match g.strip_prefix("gamma=") {
            Some(g) => SemigroupFamily::multiplicative(num("gamma", g)?, p),
            None => bad("semigroup", s),
        },
        Some(("mixing", e)) => match e.strip_prefix("eps=") {
            Some(e) => SemigroupFamily::mixing_acb(num("epsilon", e)?, p),
            None => bad("semigroup", s),
        },
        _ => bad("semigroup", s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_files(_: &str) -> Result<String> {
        Err(Error::Parse("no files".into()))
    }

    #[test]
    fn vectors() {
        assert_eq!(parse_vector("e:5").unwrap(), SparseVec::basis(5));
        assert_eq!(parse_vector("sum:2@2=0.5,6@6=0.25").unwrap(), SparseVec::from_pairs(&[(2, 0.5), (6, 0.25)]));
        assert_eq!(parse_vector("sum:3=1,-4=2").unwrap(), SparseVec::from_pairs(&[(3, 1.0), (-4, 2.0)]));
        assert_eq!(parse_vector("blockspecial:20").unwrap(), special_block_vector(20).unwrap());
        let v = parse_vector("e:9|e:1").unwrap();
        assert_eq!(v.aux, vec![(BigIndex::one(), LogReal::ONE)]);
        assert!(parse_vector("0").unwrap().is_zero());
        let big = parse_vector("e:123456789012345678901234567890").unwrap();
        assert_eq!(big.entries[0].0.to_string(), "123456789012345678901234567890");
        for s in ["f:1", "sum:1", "e:x", ""] {
            assert!(matches!(parse_vector(s), Err(Error::Parse(_))), "{s}");
        }
    }

    #[test]
    fn operators() {
        let h = parse_operator("harmonic", 1.0, &no_files).unwrap();
        assert!((h.operator_norm(&BigIndex::from(4)).unwrap().to_f64() - 5.0).abs() < 1e-12);
        let s = parse_operator("harmonic+I", 1.0, &no_files).unwrap();
        assert!(matches!(s.kind, OpKind::DirectSumWithIdentity(_)));
        assert!(matches!(parse_operator("forward:block", 1.0, &no_files).unwrap().kind, OpKind::UnilateralForward(_)));
        let t = parse_operator("tbilcami:k=3,flat", 2.0, &no_files).unwrap();
        assert_eq!(t.p, 2.0);
        assert!(matches!(t.kind, OpKind::BilateralForward(_)));
        assert!(parse_operator("explicit:2,0.5,1", 1.0, &no_files).is_ok());
        assert!(parse_operator("const:2", 1.0, &no_files).is_ok());
        assert!(parse_operator("profile:x.json", 1.0, &no_files).is_err());
        assert!(parse_operator("nonsense", 1.0, &no_files).is_err());
        assert!(parse_operator("tbilcami:k=3,round", 1.0, &no_files).is_err());
        let json = build_tbilcami(TbilcamiVariant::Original, 2).unwrap().materialize().to_json();
        let load = move |_: &str| Ok(json.clone());
        assert!(parse_operator("profile:any.json", 1.0, &load).is_ok());
    }

    #[test]
    fn schedules() {
        let h = parse_operator("harmonic", 1.0, &no_files).unwrap();
        let s = parse_schedule("geom:1..100:2", &h).unwrap();
        assert_eq!(s.last(), &BigIndex::from(100));
        assert_eq!(parse_schedule("list:3,1,2", &h).unwrap().points.len(), 3);
        assert!(matches!(parse_schedule("dips:1,2", &h), Err(Error::Capability(_))));
        let t = parse_operator("tbilcami:k=4", 1.0, &no_files).unwrap();
        let d = parse_schedule("dips:1,2,3", &t).unwrap();
        assert_eq!(d.points[0], BigIndex::from(8));
        assert!(parse_schedule("geom:1-100", &h).is_err());
    }

    #[test]
    fn steps_weights_families() {
        let f = parse_step("step:1=1@[1,2]").unwrap();
        assert_eq!(f.pieces().collect::<Vec<_>>(), vec![(1.0, 2.0, 1.0)]);
        let g = parse_step("step:2@[0,1];a=-1@[3,4]").unwrap();
        assert_eq!(g.pieces().count(), 2);
        assert!(parse_step("step:1@[2,1]").is_err());
        assert!(parse_step("1@[1,2]").is_err());
        assert!(matches!(parse_weight("const:1").unwrap(), WeightFunction::Constant(c) if c == 1.0));
        assert!(parse_weight("const:-1").is_err());
        let w = parse_weight("profile:tbilcami:k=8").unwrap();
        assert!((w.log_v(4.0).unwrap() + 2f64.ln() / 3.0).abs() < 1e-15);
        assert!(parse_weight("pexp:0=0,2=1").is_ok());
        assert!(parse_semigroup("l1", 1.0).is_ok());
        assert!(parse_semigroup("mixing:eps=0.5", 2.0).is_ok());
        assert!(parse_semigroup("mixing:eps=2", 2.0).is_err());
        assert!(parse_semigroup("translation:const:1", 1.0).is_ok());
        assert!(parse_semigroup("mult:gamma=0.25", 1.0).is_ok());
        assert!(parse_semigroup("l1", 0.5).is_err());
    }
}
