use meanly::shiftops::{special_block_vector, ShiftOperator, SparseVec};
use meanly::weights::{build_tbilcami, Domain, TbilcamiVariant, WeightModel};
use meanly::{BigIndex, LogReal};
use proptest::prelude::*;

const EXPLICIT_LEN: usize = 4000;

fn explicit_weights(seed: u64) -> Vec<f64> {
    // cheap LCG, weights in [0.5, 2]
    let mut s = seed | 1;
    (0..EXPLICIT_LEN)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            0.5 + 1.5 * ((s >> 11) as f64 / (1u64 << 53) as f64)
        })
        .collect()
}

/// (operator, bilateral?)
fn operator(which: u8, seed: u64, p: f64) -> (ShiftOperator, bool) {
    let tb = || build_tbilcami(TbilcamiVariant::Original, 3).unwrap();
    let op = match which % 8 {
        0 => ShiftOperator::backward(WeightModel::harmonic()),
        1 => ShiftOperator::backward(WeightModel::block()),
        2 => ShiftOperator::backward(WeightModel::explicit(&explicit_weights(seed)).unwrap()),
        3 => ShiftOperator::forward(WeightModel::harmonic()),
        4 => ShiftOperator::forward(WeightModel::constant(0.9, Domain::Unilateral).unwrap()),
        5 => ShiftOperator::bilateral_forward(tb(), 1.0).unwrap(),
        6 => ShiftOperator::bilateral_backward(tb(), 1.0).unwrap(),
        _ => ShiftOperator::sum_identity(ShiftOperator::backward(WeightModel::harmonic())),
    };
    let bilateral = matches!(which % 8, 5 | 6);
    (op.with_p(p).unwrap(), bilateral)
}

fn vector(bilateral: bool) -> impl Strategy<Value = SparseVec> {
    let idx = if bilateral { -60i64..60 } else { 1i64..400 };
    prop::collection::vec((idx, -5.0..5.0f64), 1..6).prop_map(|v| SparseVec::from_pairs(&v))
}

fn op_and_vec(p: impl Strategy<Value = f64>) -> impl Strategy<Value = (ShiftOperator, SparseVec)> {
    (any::<u8>(), any::<u64>(), p).prop_flat_map(|(w, seed, p)| {
        let (op, bil) = operator(w, seed, p);
        vector(bil).prop_map(move |x| (op.clone(), x))
    })
}

fn pair_p1() -> impl Strategy<Value = (ShiftOperator, SparseVec, SparseVec)> {
    (any::<u8>(), any::<u64>()).prop_flat_map(|(w, seed)| {
        let (op, bil) = operator(w, seed, 1.0);
        (vector(bil), vector(bil)).prop_map(move |(x, y)| (op.clone(), x, y))
    })
}

fn rel(a: LogReal, b: LogReal) -> f64 {
    if a.is_zero() && b.is_zero() {
        0.0
    } else {
        a.rel_diff(b)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn orbit_norm_matches_repeated_apply((op, x) in op_and_vec(prop_oneof![Just(1.0), 1.0..4.0f64]), j in 0u64..400) {
        let mut y = x.clone();
        for _ in 0..j {
            y = op.apply(&y).unwrap();
        }
        let direct = op.norm(&y).unwrap();
        let closed = op.orbit_norm(&x, &BigIndex::from(j)).unwrap();
        prop_assert!(rel(direct, closed) <= 1e-9, "{} vs {}", direct, closed);
    }

    #[test]
    fn orbit_norm_is_homogeneous((op, x) in op_and_vec(prop_oneof![Just(1.0), 1.0..4.0f64]), j in 0u64..5000, lam in -1e3..1e3f64) {
        prop_assume!(lam != 0.0);
        let l = LogReal::from_f64(lam);
        let j = BigIndex::from(j);
        let a = op.orbit_norm(&x.scale(l), &j).unwrap();
        let b = op.orbit_norm(&x, &j).unwrap();
        if b.is_zero() {
            prop_assert!(a.is_zero());
        } else {
            // ln|λ| + ln‖T^j x‖, up to rounding of the log-sum
            prop_assert!((a.logmag() - (b.logmag() + lam.abs().ln())).abs() <= 1e-12 * (1.0 + b.logmag().abs()));
        }
    }

    #[test]
    fn triangle_inequality_p1((op, x, y) in pair_p1(), j in 0u64..3000) {
        let j = BigIndex::from(j);
        let s = op.orbit_norm(&x.add(&y), &j).unwrap().to_f64();
        let bound = op.orbit_norm(&x, &j).unwrap().to_f64() + op.orbit_norm(&y, &j).unwrap().to_f64();
        prop_assert!(s <= bound + 1e-9 * (1.0 + bound));
    }

    #[test]
    fn bilateral_forward_then_backward(x in vector(true), j in 0u64..1000) {
        let p = build_tbilcami(TbilcamiVariant::Original, 2).unwrap();
        let f = ShiftOperator::bilateral_forward(p.clone(), 1.0).unwrap();
        let b = ShiftOperator::bilateral_backward(p, 1.0).unwrap();
        prop_assert_eq!(&b.apply(&f.apply(&x).unwrap()).unwrap(), &x);
        let j = BigIndex::from(j);
        prop_assert_eq!(&b.power_apply(&f.power_apply(&x, &j).unwrap(), &j).unwrap(), &x);
    }

    #[test]
    fn identity_summand_norm_is_constant(aux in vector(false), j in 0u64..1_000_000, p in 1.0..4.0f64) {
        let op = ShiftOperator::sum_identity(ShiftOperator::backward(WeightModel::block())).with_p(p).unwrap();
        let x = SparseVec::zero().with_aux(aux.entries);
        let n0 = op.norm(&x).unwrap();
        prop_assert_eq!(op.orbit_norm(&x, &BigIndex::from(j)).unwrap(), n0);
    }

    #[test]
    fn block_special_vector_orbit_stays_above_one(m in 1u64..=1000) {
        let op = ShiftOperator::backward(WeightModel::block());
        let x = special_block_vector(2 * m).unwrap();
        prop_assert!(op.orbit_norm(&x, &BigIndex::from(m)).unwrap().to_f64() >= 1.0 - 1e-9);
    }
}
