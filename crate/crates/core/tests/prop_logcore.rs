use meanly::logcore::{log_add, log_mul, log_sum};
use meanly::{BigIndex, LogReal};
use proptest::prelude::*;

fn any_logreal() -> impl Strategy<Value = LogReal> {
    prop_oneof![
        1 => Just(LogReal::ZERO),
        10 => (prop_oneof![Just(-1i8), Just(1i8)], -800.0..800.0f64).prop_map(|(s, l)| LogReal::from_parts(s, l)),
    ]
}

const BOUND: i64 = 1 << 62;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn mul_and_add_commute(a in any_logreal(), b in any_logreal()) {
        let (ab, ba) = (log_mul(a, b), log_mul(b, a));
        prop_assert_eq!(ab.sign(), ba.sign());
        prop_assert_eq!(ab.logmag().to_bits(), ba.logmag().to_bits());
        let (ab, ba) = (log_add(a, b), log_add(b, a));
        prop_assert_eq!(ab.sign(), ba.sign());
        prop_assert_eq!(ab.logmag().to_bits(), ba.logmag().to_bits());
    }

    #[test]
    fn log_sum_matches_native(xs in prop::collection::vec(0.0..1e6f64, 1..60), zeros in 0usize..4) {
        let mut terms: Vec<LogReal> = xs.iter().map(|&x| LogReal::from_f64(x)).collect();
        terms.extend(std::iter::repeat(LogReal::ZERO).take(zeros));
        let native: f64 = xs.iter().sum();
        let got = log_sum(terms).to_f64();
        if native == 0.0 {
            prop_assert_eq!(got, 0.0);
        } else {
            prop_assert!(((got - native) / native).abs() <= 1e-10, "{} vs {}", got, native);
        }
    }

    #[test]
    fn bigindex_matches_i128(a in -BOUND + 1..BOUND, b in -BOUND + 1..BOUND) {
        let (x, y) = (BigIndex::from(a), BigIndex::from(b));
        let (a, b) = (a as i128, b as i128);
        prop_assert_eq!(&x + &y, BigIndex::from(a + b));
        prop_assert_eq!(&x - &y, BigIndex::from(a - b));
        prop_assert_eq!(&x * &y, BigIndex::from(a * b));
        prop_assert_eq!(x.cmp(&y), a.cmp(&b));
        prop_assert_eq!(x.succ(), BigIndex::from(a + 1));
        prop_assert_eq!(x.pred(), BigIndex::from(a - 1));
        prop_assert_eq!(x.to_i64(), Some(a as i64));
        prop_assert_eq!(x.to_string(), a.to_string());
        if b != 0 {
            prop_assert_eq!(x.div_floor(&y), BigIndex::from(a.div_euclid(b) - if b < 0 && a.rem_euclid(b) != 0 { 1 } else { 0 }));
        }
    }

    #[test]
    fn bigindex_isqrt_and_ln(a in 1i64..BOUND) {
        let x = BigIndex::from(a);
        let r = x.isqrt().to_i64().unwrap() as i128;
        prop_assert!(r * r <= a as i128 && (r + 1) * (r + 1) > a as i128);
        prop_assert!((x.ln() - (a as f64).ln()).abs() <= 1e-12 * (a as f64).ln().max(1.0));
    }
}
