mod common;

use common::{close, to_complex};
use num_complex::Complex64;
use proptest::prelude::*;

use factorlab_core::cyclofield::{parse_cyc, CycNum, CyclotomicField, Rational};
use factorlab_core::error::Error;

fn field(n: usize) -> &'static CyclotomicField {
    CyclotomicField::get(n).unwrap()
}

fn cyc(n: usize) -> impl Strategy<Value = CycNum> {
    prop::collection::vec((-9i64..=9, 1i64..=5), n)
        .prop_map(move |cs| {
            let qs: Vec<Rational> = cs.into_iter().map(|(p, q)| Rational::from_signeds(p, q)).collect();
            field(n).make(&qs).unwrap()
        })
}

fn order_and_triple() -> impl Strategy<Value = (CycNum, CycNum, CycNum)> {
    (2usize..=8).prop_flat_map(|n| (cyc(n), cyc(n), cyc(n)))
}

proptest! {
    #[test]
    fn ring_axioms((x, y, z) in order_and_triple()) {
        prop_assert_eq!(&(&x * &y) * &z, &x * &(&y * &z));
        prop_assert_eq!(&x * &y, &y * &x);
        prop_assert_eq!(&x * &(&y + &z), &(&x * &y) + &(&x * &z));
        prop_assert_eq!(&(&x + &y) - &y, x.clone());
    }

    #[test]
    fn products_match_complex_values((x, y, _z) in order_and_triple()) {
        let want = to_complex(&x) * to_complex(&y);
        prop_assert!(close(to_complex(&(&x * &y)), want, 1e-9));
        let s = to_complex(&x) + to_complex(&y);
        prop_assert!(close(to_complex(&(&x + &y)), s, 1e-9));
    }

    #[test]
    fn inverses((x, _y, _z) in order_and_triple()) {
        prop_assume!(!x.is_zero());
        let inv = x.inv().unwrap();
        prop_assert!((&x * &inv).is_one());
        prop_assert!(close(to_complex(&inv) * to_complex(&x), Complex64::new(1.0, 0.0), 1e-9));
    }

    #[test]
    fn display_parses_back((x, _y, _z) in order_and_triple()) {
        let back = parse_cyc(x.field(), &x.to_string()).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn eps_powers_add(n in 2usize..=12, a in -30i64..30, b in -30i64..30) {
        let f = field(n);
        prop_assert_eq!(f.eps_pow(a) * f.eps_pow(b), f.eps_pow(a + b));
        let z = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * a as f64 / n as f64);
        prop_assert!(close(to_complex(&f.eps_pow(a)), z, 1e-12));
    }
}

#[test]
fn documented_values() {
    let f3 = field(3);
    let lhs = f3.eps_pow(1) + f3.eps_pow(2);
    assert!(close(to_complex(&f3.eps_pow(1)) + to_complex(&f3.eps_pow(2)), Complex64::new(-1.0, 0.0), 1e-12));
    assert_eq!(lhs, f3.from_int(-1));
    let f4 = field(4);
    assert!(close(to_complex(&f4.eps_pow(2)), Complex64::new(-1.0, 0.0), 1e-12));
    assert_eq!(f4.eps_pow(2), f4.from_int(-1));
    assert_eq!(field(2).eps_pow(1), field(2).from_int(-1));
    for n in 2..=7 {
        let f = field(n);
        for a in 0..n as i64 {
            assert_eq!(f.eps_pow(a).inv().unwrap(), f.eps_pow(n as i64 - a));
        }
    }
}

#[test]
fn zero_has_no_inverse() {
    assert_eq!(field(5).zero().inv(), Err(Error::DivisionByZero));
}

#[test]
fn literal_syntax() {
    let f = field(6);
    assert_eq!(parse_cyc(f, "e(1) + e(-1)").unwrap(), f.one());
    assert_eq!(parse_cyc(f, "-3/4*e(3)").unwrap(), parse_cyc(f, "3/4").unwrap());
    assert!(parse_cyc(f, "e(x)").is_err());
    assert!(parse_cyc(f, "").is_err());
}
