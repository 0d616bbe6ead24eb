//! Exact arithmetic in the cyclotomic field `Q(ε)`, `ε = exp(2πi/N)`.
//!
//! Elements are stored as residues of `Q[x]` modulo the cyclotomic polynomial
//! `Φ_N`, i.e. as coefficient vectors of length `φ(N)` in the power basis
//! `1, ε, …, ε^{φ(N)-1}`. This residue is unique, so structural equality is
//! field equality. [`CycNum::coeffs`] pads the residue with zeros to length
//! `N`, giving a canonical representative in `Q[x]/(x^N - 1)`.
//!
//! Field descriptors are interned per `N` and live for the whole program, so a
//! [`CycNum`] carries a `&'static` reference to its field and is `Send + Sync`.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::{Mutex, OnceLock};

use malachite_base::num::arithmetic::traits::{Abs, Reciprocal};
use malachite_base::num::basic::traits::{One, Zero};

use crate::error::{Error, Result};

/// Arbitrary precision rational number.
pub type Rational = malachite_q::Rational;

/// Largest supported order of the root of unity.
pub const MAX_ORDER: usize = 64;

/// Descriptor of the field `Q(ε_N)`.
#[derive(Debug)]
pub struct CyclotomicField {
    order: usize,
    degree: usize,
    /// Monic `Φ_N`, low degree first, length `degree + 1`.
    min_poly: Vec<Rational>,
    /// `x^j mod Φ_N` for `j < max(N, 2·degree - 1)`.
    power_table: Vec<Vec<Rational>>,
}

impl PartialEq for CyclotomicField {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order
    }
}

impl Eq for CyclotomicField {}

fn registry() -> &'static Mutex<HashMap<usize, &'static CyclotomicField>> {
    static REGISTRY: OnceLock<Mutex<HashMap<usize, &'static CyclotomicField>>> = OnceLock::new();
    REGISTRY.get_or_init(|| Mutex::new(HashMap::new()))
}

fn rat(n: i64) -> Rational {
    Rational::from(n)
}

fn is_zero(q: &Rational) -> bool {
    *q == Rational::ZERO
}

fn trim(p: &mut Vec<Rational>) {
    while p.last().is_some_and(is_zero) {
        p.pop();
    }
}

/// Exact long division of polynomials (low degree first). Returns `(q, r)`.
fn poly_divmod(num: &[Rational], den: &[Rational]) -> (Vec<Rational>, Vec<Rational>) {
    let mut r = num.to_vec();
    trim(&mut r);
    let mut d = den.to_vec();
    trim(&mut d);
    assert!(!d.is_empty(), "polynomial division by zero");
    if r.len() < d.len() {
        return (Vec::new(), r);
    }
    let lead = d.last().unwrap().clone();
    let mut q = vec![Rational::ZERO; r.len() - d.len() + 1];
    while r.len() >= d.len() {
        let shift = r.len() - d.len();
        let c = r.last().unwrap() / &lead;
        for (i, dc) in d.iter().enumerate() {
            let t = &c * dc;
            r[shift + i] -= t;
        }
        q[shift] = c;
        r.pop();
        trim(&mut r);
    }
    (q, r)
}

fn poly_mul(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Rational::ZERO; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if is_zero(x) {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            if !is_zero(y) {
                out[i + j] += x * y;
            }
        }
    }
    trim(&mut out);
    out
}

fn poly_sub(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let n = a.len().max(b.len());
    let mut out = vec![Rational::ZERO; n];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, y) in b.iter().enumerate() {
        out[i] -= y;
    }
    trim(&mut out);
    out
}

/// `Φ_n` via `x^n - 1 = ∏_{d | n} Φ_d`.
fn cyclotomic_poly(n: usize) -> Vec<Rational> {
    let mut p = vec![Rational::ZERO; n + 1];
    p[0] = rat(-1);
    p[n] = rat(1);
    for d in 1..n {
        if n.is_multiple_of(d) {
            let (q, r) = poly_divmod(&p, &cyclotomic_poly(d));
            debug_assert!(r.is_empty());
            p = q;
        }
    }
    p
}

fn euler_phi(n: usize) -> usize {
    (1..=n).filter(|k| num_integer::gcd(*k, n) == 1).count()
}

impl CyclotomicField {
    /// The interned field of `N`-th roots of unity.
    pub fn get(order: usize) -> Result<&'static CyclotomicField> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(Error::InvalidInput(format!(
                "cyclotomic order {order} outside 1..={MAX_ORDER}"
            )));
        }
        let mut reg = registry().lock().expect("cyclotomic registry poisoned");
        if let Some(f) = reg.get(&order) {
            return Ok(f);
        }
        let field: &'static CyclotomicField = Box::leak(Box::new(Self::build(order)));
        reg.insert(order, field);
        Ok(field)
    }

    fn build(order: usize) -> Self {
        let min_poly = cyclotomic_poly(order);
        let degree = min_poly.len() - 1;
        debug_assert_eq!(degree, euler_phi(order));
        let table_len = order.max(2 * degree);
        let mut power_table = Vec::with_capacity(table_len);
        let mut cur = vec![Rational::ZERO; degree];
        cur[0] = rat(1);
        for _ in 0..table_len {
            power_table.push(cur.clone());
            // multiply by x and reduce the overflow with the monic relation
            let top = cur[degree - 1].clone();
            for i in (1..degree).rev() {
                cur[i] = cur[i - 1].clone();
            }
            cur[0] = Rational::ZERO;
            if !is_zero(&top) {
                for i in 0..degree {
                    let t = &top * &min_poly[i];
                    cur[i] -= t;
                }
            }
        }
        CyclotomicField {
            order,
            degree,
            min_poly,
            power_table,
        }
    }

    /// `N`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// `[Q(ε):Q] = φ(N)`.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Coefficients of `Φ_N`, lowest degree first.
    pub fn min_poly(&self) -> &[Rational] {
        &self.min_poly
    }

    pub fn zero(&'static self) -> CycNum {
        CycNum {
            field: self,
            coeffs: vec![Rational::ZERO; self.degree],
        }
    }

    pub fn one(&'static self) -> CycNum {
        self.from_rational(rat(1))
    }

    pub fn from_int(&'static self, n: i64) -> CycNum {
        self.from_rational(rat(n))
    }

    pub fn from_rational(&'static self, q: Rational) -> CycNum {
        let mut coeffs = vec![Rational::ZERO; self.degree];
        coeffs[0] = q;
        CycNum {
            field: self,
            coeffs,
        }
    }

    /// `ε^a`, with `a` taken modulo `N`.
    pub fn eps_pow(&'static self, a: i64) -> CycNum {
        let k = a.rem_euclid(self.order as i64) as usize;
        CycNum {
            field: self,
            coeffs: self.power_table[k].clone(),
        }
    }

    /// `Σ c_a ε^a` for `coeffs.len() ≤ N`, reduced to canonical form.
    pub fn make(&'static self, coeffs: &[Rational]) -> Result<CycNum> {
        if coeffs.len() > self.order {
            return Err(Error::InvalidInput(format!(
                "{} coefficients given for Q(ε_{})",
                coeffs.len(),
                self.order
            )));
        }
        Ok(self.reduce(coeffs))
    }

    fn reduce(&'static self, poly: &[Rational]) -> CycNum {
        let mut out = vec![Rational::ZERO; self.degree];
        for (j, c) in poly.iter().enumerate() {
            if is_zero(c) {
                continue;
            }
            if j < self.degree {
                out[j] += c;
            } else {
                for (o, t) in out.iter_mut().zip(&self.power_table[j]) {
                    if !is_zero(t) {
                        *o += c * t;
                    }
                }
            }
        }
        CycNum {
            field: self,
            coeffs: out,
        }
    }
}

/// An element of `Q(ε_N)` in canonical form.
#[derive(Clone)]
pub struct CycNum {
    field: &'static CyclotomicField,
    coeffs: Vec<Rational>,
}

impl PartialEq for CycNum {
    fn eq(&self, other: &Self) -> bool {
        self.field.order == other.field.order && self.coeffs == other.coeffs
    }
}

impl Eq for CycNum {}

impl std::hash::Hash for CycNum {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.field.order.hash(state);
        self.coeffs.hash(state);
    }
}

impl CycNum {
    pub fn field(&self) -> &'static CyclotomicField {
        self.field
    }

    /// Canonical coefficients padded to length `N`: the element equals
    /// `Σ_a coeffs[a] ε^a`.
    pub fn coeffs(&self) -> Vec<Rational> {
        let mut c = self.coeffs.clone();
        c.resize(self.field.order, Rational::ZERO);
        c
    }

    /// Coefficients in the power basis of length `φ(N)`.
    pub fn basis_coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.coeffs[0] == Rational::ONE && self.coeffs[1..].iter().all(is_zero)
    }

    /// `Some(q)` when the element lies in `Q`.
    pub fn as_rational(&self) -> Option<&Rational> {
        if self.coeffs[1..].iter().all(is_zero) {
            Some(&self.coeffs[0])
        } else {
            None
        }
    }

    fn check_same(&self, other: &CycNum) {
        assert_eq!(
            self.field.order, other.field.order,
            "mixing elements of Q(ε_{}) and Q(ε_{})",
            self.field.order, other.field.order
        );
    }

    pub fn scale(&self, q: &Rational) -> CycNum {
        CycNum {
            field: self.field,
            coeffs: self.coeffs.iter().map(|c| c * q).collect(),
        }
    }

    /// Multiplicative inverse by the extended Euclidean algorithm against `Φ_N`.
    pub fn inv(&self) -> Result<CycNum> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        if let Some(q) = self.as_rational() {
            return Ok(self.field.from_rational(q.reciprocal()));
        }
        // invariant: s_i · a ≡ r_i (mod Φ)
        let mut r0 = self.field.min_poly.clone();
        let mut r1 = self.coeffs.clone();
        trim(&mut r1);
        let mut s0: Vec<Rational> = Vec::new();
        let mut s1: Vec<Rational> = vec![rat(1)];
        while r1.len() > 1 {
            let (q, r) = poly_divmod(&r0, &r1);
            let s = poly_sub(&s0, &poly_mul(&q, &s1));
            r0 = std::mem::replace(&mut r1, r);
            s0 = std::mem::replace(&mut s1, s);
        }
        // r1 is a nonzero constant because Φ_N is irreducible
        let c = (&r1[0]).reciprocal();
        let s: Vec<Rational> = s1.iter().map(|x| x * &c).collect();
        Ok(self.field.reduce(&s))
    }

    pub fn div(&self, other: &CycNum) -> Result<CycNum> {
        Ok(self * &other.inv()?)
    }

    pub fn pow(&self, e: i64) -> Result<CycNum> {
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut result = self.field.one();
        let mut b = base;
        let mut k = e.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                result = &result * &b;
            }
            b = &b * &b;
            k >>= 1;
        }
        Ok(result)
    }
}

impl fmt::Debug for CycNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for CycNum {
    /// Renders `Σ c_a·e(a)`, the same literal syntax the CLI accepts.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (a, c) in self.coeffs.iter().enumerate() {
            if is_zero(c) {
                continue;
            }
            let negative = *c < Rational::ZERO;
            let sign = if negative { "-" } else { "+" };
            if first {
                if negative {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            let mag = c.abs();
            if a == 0 {
                write!(f, "{mag}")?;
            } else if mag == Rational::ONE {
                write!(f, "e({a})")?;
            } else {
                write!(f, "{mag}*e({a})")?;
            }
            first = false;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl<'a> Add<&'a CycNum> for &'a CycNum {
    type Output = CycNum;
    fn add(self, rhs: &CycNum) -> CycNum {
        self.check_same(rhs);
        CycNum {
            field: self.field,
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl<'a> Sub<&'a CycNum> for &'a CycNum {
    type Output = CycNum;
    fn sub(self, rhs: &CycNum) -> CycNum {
        self.check_same(rhs);
        CycNum {
            field: self.field,
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl<'a> Mul<&'a CycNum> for &'a CycNum {
    type Output = CycNum;
    fn mul(self, rhs: &CycNum) -> CycNum {
        self.check_same(rhs);
        if let Some(q) = rhs.as_rational() {
            return self.scale(q);
        }
        if let Some(q) = self.as_rational() {
            return rhs.scale(q);
        }
        let d = self.field.degree;
        let mut prod = vec![Rational::ZERO; 2 * d - 1];
        for (i, x) in self.coeffs.iter().enumerate() {
            if is_zero(x) {
                continue;
            }
            for (j, y) in rhs.coeffs.iter().enumerate() {
                if !is_zero(y) {
                    prod[i + j] += x * y;
                }
            }
        }
        self.field.reduce(&prod)
    }
}

impl Neg for &CycNum {
    type Output = CycNum;
    fn neg(self) -> CycNum {
        CycNum {
            field: self.field,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

impl Neg for CycNum {
    type Output = CycNum;
    fn neg(mut self) -> CycNum {
        for c in self.coeffs.iter_mut() {
            *c = -std::mem::replace(c, Rational::ZERO);
        }
        self
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<CycNum> for CycNum {
            type Output = CycNum;
            fn $m(self, rhs: CycNum) -> CycNum {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a CycNum> for CycNum {
            type Output = CycNum;
            fn $m(self, rhs: &CycNum) -> CycNum {
                (&self).$m(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl AddAssign<&CycNum> for CycNum {
    fn add_assign(&mut self, rhs: &CycNum) {
        self.check_same(rhs);
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            if !is_zero(b) {
                *a += b;
            }
        }
    }
}

impl SubAssign<&CycNum> for CycNum {
    fn sub_assign(&mut self, rhs: &CycNum) {
        self.check_same(rhs);
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            if !is_zero(b) {
                *a -= b;
            }
        }
    }
}

impl MulAssign<&CycNum> for CycNum {
    fn mul_assign(&mut self, rhs: &CycNum) {
        *self = &*self * rhs;
    }
}

/// Parses `p/q`, `e(a)`, `p/q*e(a)` and sums of those such as `1 + 2*e(1)`.
pub fn parse_cyc(field: &'static CyclotomicField, text: &str) -> Result<CycNum> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(Error::Parse(format!("empty number literal {text:?}")));
    }
    let mut total = field.zero();
    let mut start = 0;
    let bytes = s.as_bytes();
    let mut terms = Vec::new();
    for i in 1..=bytes.len() {
        if i == bytes.len() || ((bytes[i] == b'+' || bytes[i] == b'-') && bytes[i - 1] != b'(') {
            terms.push(&s[start..i]);
            start = i;
        }
    }
    for term in terms {
        let (neg, body) = match term.as_bytes()[0] {
            b'-' => (true, &term[1..]),
            b'+' => (false, &term[1..]),
            _ => (false, term),
        };
        let mut value = field.one();
        for factor in body.split('*') {
            let f = if let Some(inner) = factor.strip_prefix("e(").and_then(|r| r.strip_suffix(')')) {
                let a: i64 = inner
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad exponent in {factor:?}")))?;
                field.eps_pow(a)
            } else {
                let q: Rational = factor
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad rational {factor:?} in {text:?}")))?;
                field.from_rational(q)
            };
            value = &value * &f;
        }
        if neg {
            total -= &value;
        } else {
            total += &value;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(n: usize) -> &'static CyclotomicField {
        CyclotomicField::get(n).unwrap()
    }

    #[test]
    fn cyclotomic_polynomials() {
        let as_ints = |n| {
            cyclotomic_poly(n)
                .iter()
                .map(|c| c.to_string().parse::<i64>().unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(as_ints(2), vec![1, 1]);
        assert_eq!(as_ints(3), vec![1, 1, 1]);
        assert_eq!(as_ints(4), vec![1, 0, 1]);
        assert_eq!(as_ints(6), vec![1, -1, 1]);
        assert_eq!(as_ints(12), vec![1, 0, -1, 0, 1]);
    }

    #[test]
    fn make_examples() {
        let f2 = field(2);
        assert!(f2.make(&[rat(1)]).unwrap().is_one());
        assert_eq!(f2.make(&[rat(0), rat(1)]).unwrap(), -f2.one());
        for n in 2..=7 {
            let f = field(n);
            let ones = vec![rat(1); n];
            assert!(f.make(&ones).unwrap().is_zero(), "N={n}");
        }
        assert!(f2.make(&[rat(1), rat(2), rat(3)]).is_err());
    }

    #[test]
    fn eps_pow_examples() {
        assert!(field(5).eps_pow(0).is_one());
        assert_eq!(field(2).eps_pow(1), -field(2).one());
        assert_eq!(field(4).eps_pow(2), -field(4).one());
        assert_eq!(field(3).eps_pow(-1), field(3).eps_pow(2));
    }

    #[test]
    fn cube_root_relation() {
        let f = field(3);
        assert_eq!(f.eps_pow(1) + f.eps_pow(2), -f.one());
    }

    #[test]
    fn inverse_of_root_of_unity() {
        for n in 2..=8 {
            let f = field(n);
            for a in 0..n as i64 {
                assert_eq!(f.eps_pow(a).inv().unwrap(), f.eps_pow(n as i64 - a));
            }
        }
    }

    #[test]
    fn division_by_zero_is_an_error() {
        assert!(matches!(field(3).zero().inv(), Err(Error::DivisionByZero)));
    }

    #[test]
    fn order_of_eps_is_exact() {
        for n in 2..=12 {
            let f = field(n);
            let e = f.eps_pow(1);
            let mut p = f.one();
            for k in 1..=n {
                p = &p * &e;
                assert_eq!(p.is_one(), k == n, "N={n}, k={k}");
            }
        }
    }

    #[test]
    fn parse_literals() {
        let f = field(3);
        assert_eq!(parse_cyc(f, "e(1)").unwrap(), f.eps_pow(1));
        assert_eq!(parse_cyc(f, "1/2").unwrap(), f.from_rational("1/2".parse().unwrap()));
        assert_eq!(parse_cyc(f, "-2*e(2)").unwrap(), f.eps_pow(2) * f.from_int(-2));
        assert_eq!(parse_cyc(f, "1 + e(1) + e(2)").unwrap(), f.zero());
        let x = f.eps_pow(1) * f.from_rational("3/5".parse().unwrap()) - f.one();
        assert_eq!(parse_cyc(f, &x.to_string()).unwrap(), x);
        assert!(parse_cyc(f, "e(x)").is_err());
        assert!(parse_cyc(f, "").is_err());
    }
}
