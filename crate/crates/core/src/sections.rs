//! Equivariant rational `sl_N`-valued sections on `P¹` and their local data.
//!
//! A section is stored as `f(t) = Σ_{(a,b)} J_{ab} t^a G_{ab}(t^N)`, where each
//! `G_{ab}(s)` is a rational function of `s = t^N` in partial-fraction form: a
//! Laurent polynomial in `s` plus terms `c / (s - t_i^N)^n`. The ansatz makes
//! `f(εt) = Ad γ (f(t))` hold by construction.
//!
//! Local coordinates: `ξ = t` at `0`, `ξ = t - t_i` at the marked point `Q_i`
//! (represented by `t_i` itself, not by another point of its `C_N`-orbit) and
//! `ξ = u = 1/t` at `∞`. Residues are taken of 1-forms, so no coordinate
//! change factors appear; the weight `1/N` at `0` and `∞` is the only
//! normalisation.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;


use crate::cyclofield::{CycNum, CyclotomicField, Rational};
use crate::error::{Error, Result};
use crate::liealg::{LieElem, SlN};

/// Default cap on pole orders of constructed sections.
pub const DEFAULT_POLE_LIMIT: u32 = 6;

/// An insertion site on `P¹`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Site {
    Zero,
    Marked(usize),
    Infinity,
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Site::Zero => write!(f, "0"),
            Site::Marked(i) => write!(f, "Q{}", i + 1),
            Site::Infinity => write!(f, "inf"),
        }
    }
}

/// The Lie algebra together with marked points `t_1, …, t_L`.
#[derive(Debug)]
pub struct Geometry {
    sl: SlN,
    points: Vec<CycNum>,
    powers: Vec<CycNum>,
    pole_limit: u32,
}

impl Geometry {
    /// Validates that the points are nonzero and lie in distinct `C_N`-orbits.
    pub fn new(sl: SlN, points: Vec<CycNum>) -> Result<Arc<Geometry>> {
        Self::with_pole_limit(sl, points, DEFAULT_POLE_LIMIT)
    }

    pub fn with_pole_limit(sl: SlN, points: Vec<CycNum>, pole_limit: u32) -> Result<Arc<Geometry>> {
        let mut problems = Vec::new();
        for (i, t) in points.iter().enumerate() {
            if t.field().order() != sl.n() {
                problems.push(format!("point {} is not in Q(ε_{})", i + 1, sl.n()));
            } else if t.is_zero() {
                problems.push(format!("point {} is 0", i + 1));
            }
        }
        if !problems.is_empty() {
            return Err(Error::InvalidInput(problems.join("; ")));
        }
        let powers: Vec<CycNum> = points.iter().map(|t| t.pow(sl.n() as i64)).collect::<Result<_>>()?;
        for i in 0..powers.len() {
            for j in i + 1..powers.len() {
                if powers[i] == powers[j] {
                    problems.push(format!(
                        "points {} and {} lie in the same C_{}-orbit (t^N = {})",
                        i + 1,
                        j + 1,
                        sl.n(),
                        powers[i]
                    ));
                }
            }
        }
        if !problems.is_empty() {
            return Err(Error::InvalidInput(problems.join("; ")));
        }
        Ok(Arc::new(Geometry {
            sl,
            points,
            powers,
            pole_limit,
        }))
    }

    pub fn sl(&self) -> SlN {
        self.sl
    }

    pub fn n(&self) -> usize {
        self.sl.n()
    }

    pub fn field(&self) -> &'static CyclotomicField {
        self.sl.field()
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn point(&self, i: usize) -> &CycNum {
        &self.points[i]
    }

    pub fn pole_limit(&self) -> u32 {
        self.pole_limit
    }

    pub fn sites(&self) -> Vec<Site> {
        let mut s = vec![Site::Zero];
        s.extend((0..self.points.len()).map(Site::Marked));
        s.push(Site::Infinity);
        s
    }

    fn check_site(&self, site: Site) -> Result<()> {
        match site {
            Site::Marked(i) if i >= self.points.len() => Err(Error::InvalidInput(format!(
                "site {site} is not among the {} marked points",
                self.points.len()
            ))),
            _ => Ok(()),
        }
    }
}

/// `G(s)`: Laurent polynomial in `s` plus partial fractions at `s = t_i^N`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ScalarPart {
    /// `m ↦ coefficient of s^m`.
    pub laurent: BTreeMap<i32, CycNum>,
    /// `(i, n) ↦ coefficient of (s - t_i^N)^{-n}`.
    pub poles: BTreeMap<(usize, u32), CycNum>,
}

impl ScalarPart {
    fn is_zero(&self) -> bool {
        self.laurent.values().all(CycNum::is_zero) && self.poles.values().all(CycNum::is_zero)
    }

    fn add_scaled(&mut self, other: &ScalarPart, c: &CycNum) {
        for (m, v) in &other.laurent {
            let e = self.laurent.entry(*m).or_insert_with(|| c.field().zero());
            *e += &(v * c);
        }
        for (k, v) in &other.poles {
            let e = self.poles.entry(*k).or_insert_with(|| c.field().zero());
            *e += &(v * c);
        }
        self.laurent.retain(|_, v| !v.is_zero());
        self.poles.retain(|_, v| !v.is_zero());
    }
}

/// Which global section algebra.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SectionClass {
    /// Equivariant, poles at `0`, `D`, `∞`.
    Orb,
    /// Additionally regular at `0`, `∞` with `f(∞) = Ad β (f(0))`.
    Trig,
    /// Additionally `f(0) = f(∞) = 0`.
    Zero,
}

impl SectionClass {
    pub fn name(self) -> &'static str {
        match self {
            SectionClass::Orb => "g_out^orb",
            SectionClass::Trig => "g_out^trig",
            SectionClass::Zero => "g_out^0",
        }
    }
}

/// An equivariant meromorphic section.
#[derive(Clone, Debug)]
pub struct Section {
    geom: Arc<Geometry>,
    comps: BTreeMap<(usize, usize), ScalarPart>,
}

impl PartialEq for Section {
    fn eq(&self, other: &Self) -> bool {
        self.comps == other.comps
    }
}

/// Laurent expansion `Σ A_n ξ^n` at a site, exact up to `ξ^order`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LaurentJet {
    pub site: Site,
    order: i32,
    coeffs: BTreeMap<i32, LieElem>,
}

impl LaurentJet {
    pub fn new(site: Site, order: i32) -> Self {
        LaurentJet {
            site,
            order,
            coeffs: BTreeMap::new(),
        }
    }

    /// Builds a jet, dropping zero coefficients; modes above `order` are rejected.
    pub fn from_coeffs(site: Site, order: i32, coeffs: BTreeMap<i32, LieElem>) -> Result<Self> {
        if let Some((&m, _)) = coeffs.iter().next_back() {
            if m > order {
                return Err(Error::InvalidInput(format!("mode {m} above truncation order {order}")));
            }
        }
        let coeffs = coeffs.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        Ok(LaurentJet { site, order, coeffs })
    }

    pub fn order(&self) -> i32 {
        self.order
    }

    /// Coefficient of `ξ^mode`; asking beyond the truncation order is an error.
    pub fn coeff(&self, mode: i32) -> Result<Option<&LieElem>> {
        if mode > self.order {
            return Err(Error::InvalidInput(format!(
                "mode {mode} beyond truncation order {}",
                self.order
            )));
        }
        Ok(self.coeffs.get(&mode))
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, &LieElem)> {
        self.coeffs.iter().map(|(m, v)| (*m, v))
    }

    pub fn pole_order(&self) -> u32 {
        self.coeffs.keys().next().map_or(0, |m| (-m).max(0) as u32)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn has_negative_modes(&self) -> bool {
        self.coeffs.keys().any(|m| *m < 0)
    }

    fn add_term(&mut self, mode: i32, x: &LieElem) {
        if mode > self.order || x.is_zero() {
            return;
        }
        match self.coeffs.get_mut(&mode) {
            Some(v) => {
                *v = v.add(x);
                if v.is_zero() {
                    self.coeffs.remove(&mode);
                }
            }
            None => {
                self.coeffs.insert(mode, x.clone());
            }
        }
    }

    /// `self - other`, truncated at the smaller order.
    pub fn sub(&self, other: &LaurentJet) -> LaurentJet {
        let mut out = LaurentJet::new(self.site, self.order.min(other.order));
        for (m, v) in &self.coeffs {
            out.add_term(*m, v);
        }
        let minus = match other.coeffs.values().next() {
            Some(v) => v.coords[0].field().from_int(-1),
            None => return out,
        };
        for (m, v) in &other.coeffs {
            out.add_term(*m, &v.scale(&minus));
        }
        out
    }

    pub fn add(&self, other: &LaurentJet) -> LaurentJet {
        let mut out = LaurentJet::new(self.site, self.order.min(other.order));
        for (m, v) in self.coeffs.iter().chain(other.coeffs.iter()) {
            out.add_term(*m, v);
        }
        out
    }
}

/// Truncated power series `Σ_{k < len} c_k ξ^k`.
#[derive(Clone, Debug)]
struct PowerSeries {
    c: Vec<CycNum>,
}

impl PowerSeries {
    fn mul(&self, other: &PowerSeries, len: usize) -> PowerSeries {
        let f = self.c[0].field();
        let mut c = vec![f.zero(); len];
        for (i, x) in self.c.iter().enumerate().take(len) {
            if x.is_zero() {
                continue;
            }
            for (j, y) in other.c.iter().enumerate().take(len - i) {
                if !y.is_zero() {
                    c[i + j] += &(x * y);
                }
            }
        }
        PowerSeries { c }
    }

    fn inverse(&self, len: usize) -> Result<PowerSeries> {
        let f = self.c[0].field();
        let inv0 = self.c[0].inv()?;
        let mut c = vec![f.zero(); len];
        c[0] = inv0.clone();
        for k in 1..len {
            let mut acc = f.zero();
            for j in 1..=k.min(self.c.len() - 1) {
                acc += &(&self.c[j] * &c[k - j]);
            }
            c[k] = -(&acc * &inv0);
        }
        Ok(PowerSeries { c })
    }

    fn pow(&self, e: u32, len: usize) -> PowerSeries {
        let f = self.c[0].field();
        let mut r = PowerSeries {
            c: {
                let mut v = vec![f.zero(); len];
                v[0] = f.one();
                v
            },
        };
        for _ in 0..e {
            r = r.mul(self, len);
        }
        r
    }
}

fn binomial(n: i64, k: u32) -> Rational {
    // generalised binomial coefficient n(n-1)…(n-k+1)/k!
    let mut num = Rational::from(1);
    for j in 0..k as i64 {
        num *= Rational::from_signeds(n - j, j + 1);
    }
    num
}

impl Section {
    pub fn zero(geom: &Arc<Geometry>) -> Section {
        Section {
            geom: Arc::clone(geom),
            comps: BTreeMap::new(),
        }
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geom
    }

    pub fn components(&self) -> &BTreeMap<(usize, usize), ScalarPart> {
        &self.comps
    }

    pub fn is_zero(&self) -> bool {
        self.comps.values().all(ScalarPart::is_zero)
    }

    fn check_label(geom: &Geometry, a: usize, b: usize) -> Result<()> {
        let n = geom.n();
        if a >= n || b >= n {
            return Err(Error::InvalidInput(format!("label ({a},{b}) out of range for N={n}")));
        }
        if (a, b) == (0, 0) {
            return Err(Error::InvalidInput("(a,b) = (0,0) is not an sl_N direction".into()));
        }
        Ok(())
    }

    fn single(geom: &Arc<Geometry>, a: usize, b: usize, part: ScalarPart) -> Section {
        let mut comps = BTreeMap::new();
        comps.insert((a, b), part);
        Section {
            geom: Arc::clone(geom),
            comps,
        }
    }

    /// `J_{ab} t^{a + mN}`.
    pub fn orb_monomial(geom: &Arc<Geometry>, a: usize, b: usize, m: i32) -> Result<Section> {
        Self::check_label(geom, a, b)?;
        let e = a as i64 + m as i64 * geom.n() as i64;
        if e.unsigned_abs() > geom.pole_limit as u64 {
            return Err(Error::PoleOrderLimit {
                order: e.unsigned_abs() as u32,
                limit: geom.pole_limit,
            });
        }
        let mut part = ScalarPart::default();
        part.laurent.insert(m, geom.field().one());
        Ok(Self::single(geom, a, b, part))
    }

    /// Orbifold monomial with `t`-exponent `e ≡ a (mod N)`.
    pub fn orb_monomial_with_exponent(geom: &Arc<Geometry>, a: usize, b: usize, e: i32) -> Result<Section> {
        let n = geom.n() as i32;
        if (e - a as i32).rem_euclid(n) != 0 {
            return Err(Error::InvalidInput(format!("exponent {e} is not ≡ {a} mod {n}")));
        }
        Self::orb_monomial(geom, a, b, (e - a as i32).div_euclid(n))
    }

    /// The constant section `J_{0,b}`.
    pub fn constant_cartan(geom: &Arc<Geometry>, b: usize) -> Result<Section> {
        Self::orb_monomial(geom, 0, b, 0)
    }

    /// `J_{ab}(t)`: `J_{ab} t^a / (t^N - t_i^N)` for `a ≠ 0`, and
    /// `J_{0b} (ε^b t^N - t_i^N)/(t^N - t_i^N)` for `a = 0`, followed by
    /// `(t d/dt)^{n-1}`. Pole of order exactly `n` at `Q_i`.
    pub fn trig_basis_element(geom: &Arc<Geometry>, a: usize, b: usize, i: usize, n: u32) -> Result<Section> {
        Self::check_label(geom, a, b)?;
        geom.check_site(Site::Marked(i))?;
        if n == 0 {
            return Err(Error::InvalidInput("pole order must be at least 1".into()));
        }
        if n > geom.pole_limit {
            return Err(Error::PoleOrderLimit {
                order: n,
                limit: geom.pole_limit,
            });
        }
        let f = geom.field();
        let mut part = ScalarPart::default();
        if a == 0 {
            // (ε^b s - s_i)/(s - s_i) = ε^b + (ε^b - 1) s_i / (s - s_i)
            let eb = f.eps_pow(b as i64);
            let c = &(&eb - &f.one()) * &geom.powers[i];
            part.laurent.insert(0, eb);
            part.poles.insert((i, 1), c);
        } else {
            part.poles.insert((i, 1), f.one());
        }
        let mut s = Self::single(geom, a, b, part);
        for _ in 1..n {
            s = s.theta();
        }
        Ok(s)
    }

    /// `h_b(t) = J_{0b} (ε^b t^N - t_i^N)/(t^N - t_i^N)`.
    pub fn h_section(geom: &Arc<Geometry>, b: usize, i: usize) -> Result<Section> {
        if b.is_multiple_of(geom.n()) {
            return Err(Error::InvalidInput("h_b needs b ≢ 0 mod N".into()));
        }
        Self::trig_basis_element(geom, 0, b, i, 1)
    }

    /// `t d/dt` applied componentwise: `G ↦ a G + N s G'`.
    pub fn theta(&self) -> Section {
        let f = self.geom.field();
        let n = self.geom.n() as i64;
        let mut comps = BTreeMap::new();
        for (&(a, b), part) in &self.comps {
            let mut out = ScalarPart::default();
            for (&m, c) in &part.laurent {
                let k = f.from_int(a as i64 + m as i64 * n);
                let v = c * &k;
                if !v.is_zero() {
                    out.laurent.insert(m, v);
                }
            }
            for (&(i, k), c) in &part.poles {
                let same = c * &f.from_int(a as i64 - n * k as i64);
                let up = &(c * &self.geom.powers[i]) * &f.from_int(-n * k as i64);
                for (key, v) in [((i, k), same), ((i, k + 1), up)] {
                    let e = out.poles.entry(key).or_insert_with(|| f.zero());
                    *e += &v;
                }
            }
            out.poles.retain(|_, v| !v.is_zero());
            if !out.is_zero() {
                comps.insert((a, b), out);
            }
        }
        Section {
            geom: Arc::clone(&self.geom),
            comps,
        }
    }

    pub fn scale(&self, c: &CycNum) -> Section {
        Section::zero(&self.geom).add_scaled(self, c)
    }

    /// `self + c · other`.
    pub fn add_scaled(&self, other: &Section, c: &CycNum) -> Section {
        let mut comps = self.comps.clone();
        for (k, part) in &other.comps {
            comps.entry(*k).or_default().add_scaled(part, c);
        }
        comps.retain(|_, p| !p.is_zero());
        Section {
            geom: Arc::clone(&self.geom),
            comps,
        }
    }

    pub fn add(&self, other: &Section) -> Section {
        self.add_scaled(other, &self.geom.field().one())
    }

    pub fn sub(&self, other: &Section) -> Section {
        self.add_scaled(other, &self.geom.field().from_int(-1))
    }

    /// Pole order at a site (0 when regular).
    pub fn pole_order(&self, site: Site) -> u32 {
        let n = self.geom.n() as i64;
        let mut best = 0i64;
        for (&(a, _), part) in &self.comps {
            match site {
                Site::Marked(i) => {
                    for (&(j, k), c) in &part.poles {
                        if j == i && !c.is_zero() {
                            best = best.max(k as i64);
                        }
                    }
                }
                Site::Zero => {
                    for &m in part.laurent.keys() {
                        best = best.max(-(a as i64 + m as i64 * n));
                    }
                }
                Site::Infinity => {
                    for &m in part.laurent.keys() {
                        best = best.max(a as i64 + m as i64 * n);
                    }
                }
            }
        }
        best as u32
    }

    /// Sites where the section has a pole.
    pub fn pole_sites(&self) -> Vec<Site> {
        self.geom.sites().into_iter().filter(|s| self.pole_order(*s) > 0).collect()
    }

    /// Exact Laurent expansion at `site` in its local coordinate, up to `ξ^order`.
    pub fn expand_at(&self, site: Site, order: i32) -> Result<LaurentJet> {
        self.geom.check_site(site)?;
        let sl = self.geom.sl();
        let mut jet = LaurentJet::new(site, order);
        for (&(a, b), part) in &self.comps {
            let basis = sl.basis_elem(a, b);
            for (mode, c) in self.expand_scalar(a, part, site, order)? {
                jet.add_term(mode, &basis.scale(&c));
            }
        }
        Ok(jet)
    }

    /// Expansion of `t^a G(t^N)` as `(mode, coefficient)` pairs.
    fn expand_scalar(&self, a: usize, part: &ScalarPart, site: Site, order: i32) -> Result<Vec<(i32, CycNum)>> {
        let f = self.geom.field();
        let n = self.geom.n() as i64;
        let a = a as i64;
        let mut acc: BTreeMap<i32, CycNum> = BTreeMap::new();
        let mut push = |mode: i64, v: CycNum| {
            if mode <= order as i64 && !v.is_zero() {
                let e = acc.entry(mode as i32).or_insert_with(|| f.zero());
                *e += &v;
            }
        };
        match site {
            Site::Zero => {
                for (&m, c) in &part.laurent {
                    push(a + m as i64 * n, c.clone());
                }
                // (s - s_j)^{-k} = (-s_j)^{-k} Σ_r C(k+r-1, r) (s/s_j)^r
                for (&(j, k), c) in &part.poles {
                    let sj = &self.geom.powers[j];
                    let sj_inv = sj.inv()?;
                    let lead = c * &(-sj).pow(-(k as i64))?;
                    let mut r = 0i64;
                    while a + r * n <= order as i64 {
                        let coeff = &lead * &sj_inv.pow(r)?;
                        push(a + r * n, coeff.scale(&binomial(k as i64 + r - 1, r as u32)));
                        r += 1;
                    }
                }
            }
            Site::Infinity => {
                for (&m, c) in &part.laurent {
                    push(-(a + m as i64 * n), c.clone());
                }
                // t^a (s - s_j)^{-k} = Σ_r C(k+r-1, r) s_j^r u^{N(k+r) - a}
                for (&(j, k), c) in &part.poles {
                    let sj = &self.geom.powers[j];
                    let mut r = 0i64;
                    while n * (k as i64 + r) - a <= order as i64 {
                        let coeff = c * &sj.pow(r)?;
                        push(n * (k as i64 + r) - a, coeff.scale(&binomial(k as i64 + r - 1, r as u32)));
                        r += 1;
                    }
                }
            }
            Site::Marked(i) => {
                let ti = &self.geom.points[i];
                let max_pole = part.poles.keys().filter(|(j, _)| *j == i).map(|(_, k)| *k).max().unwrap_or(0);
                if (order as i64) < -(max_pole as i64) {
                    return Ok(Vec::new());
                }
                // enough terms to reach ξ^order after the deepest pole shift
                let len = (order as i64 + max_pole as i64 + 1) as usize;
                let t_pow = |e: i64| -> Result<PowerSeries> {
                    // (t_i + ξ)^e = Σ_k C(e,k) t_i^{e-k} ξ^k
                    let c = (0..len)
                        .map(|k| Ok(ti.pow(e - k as i64)?.scale(&binomial(e, k as u32))))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(PowerSeries { c })
                };
                // (t_i + ξ)^N as a polynomial in ξ
                let tn: Vec<CycNum> = (0..=n)
                    .map(|k| Ok(ti.pow(n - k)?.scale(&binomial(n, k as u32))))
                    .collect::<Result<_>>()?;
                let ta = t_pow(a)?;
                for (&m, c) in &part.laurent {
                    let s = t_pow(a + m as i64 * n)?;
                    for (k, v) in s.c.iter().enumerate() {
                        push(k as i64, c * v);
                    }
                }
                for (&(j, k), c) in &part.poles {
                    let (shift, unit) = if j == i {
                        // t^N - s_i = ξ · q(ξ), q(0) = N t_i^{N-1}
                        let mut q: Vec<CycNum> = tn[1..].to_vec();
                        q.resize(len.max(1), f.zero());
                        (-(k as i64), PowerSeries { c: q })
                    } else {
                        let mut p = tn.clone();
                        p[0] -= &self.geom.powers[j];
                        p.resize(len.max(p.len()), f.zero());
                        (0, PowerSeries { c: p })
                    };
                    let inv = unit.inverse(len)?.pow(k, len);
                    let total = inv.mul(&ta, len);
                    for (r, v) in total.c.iter().enumerate() {
                        push(shift + r as i64, c * v);
                    }
                }
            }
        }
        Ok(acc.into_iter().collect())
    }

    /// Value at a regular site (`0` or `∞`), i.e. the `ξ^0` coefficient.
    pub fn value_at(&self, site: Site) -> Result<Option<LieElem>> {
        if self.pole_order(site) > 0 {
            return Ok(None);
        }
        let jet = self.expand_at(site, 0)?;
        Ok(Some(jet.coeff(0)?.cloned().unwrap_or_else(|| self.geom.sl().zero_elem())))
    }

    /// Exact value at a point `t` away from the poles.
    pub fn eval(&self, t: &CycNum) -> Result<LieElem> {
        let sl = self.geom.sl();
        let n = self.geom.n() as i64;
        let s = t.pow(n)?;
        let mut out = sl.zero_elem();
        for (&(a, b), part) in &self.comps {
            let mut g = sl.field().zero();
            for (&m, c) in &part.laurent {
                g += &(c * &s.pow(m as i64)?);
            }
            for (&(j, k), c) in &part.poles {
                g += &(c * &(&s - &self.geom.powers[j]).pow(-(k as i64))?);
            }
            out.coords[sl.index(a, b)] = &g * &t.pow(a as i64)?;
        }
        Ok(out)
    }

    /// Membership in one of the global section algebras.
    pub fn check_membership(&self, class: SectionClass) -> bool {
        let orb_ok = self
            .comps
            .values()
            .all(|p| p.poles.keys().all(|(j, _)| *j < self.geom.num_points()));
        if class == SectionClass::Orb || !orb_ok {
            return orb_ok;
        }
        let (Ok(Some(v0)), Ok(Some(vinf))) = (self.value_at(Site::Zero), self.value_at(Site::Infinity)) else {
            return false;
        };
        let sl = self.geom.sl();
        let mut glued = sl.zero_elem();
        for (idx, c) in v0.support() {
            let (_, b) = sl.label(idx);
            glued.coords[idx] = c * &sl.eps(b as i64);
        }
        if glued != vinf {
            return false;
        }
        class == SectionClass::Trig || (v0.is_zero() && vinf.is_zero())
    }
}

/// Normalisation of the cocycle at the fixed points `0` and `∞`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CocycleNorm {
    /// Weight `1/N` at `0` and `∞`.
    Orbifold,
    /// Weight `1` everywhere; the cocycle then fails to vanish on `g_out`.
    Unnormalized,
}

/// `Res_{ξ=0} (df | g)` at a single site.
pub fn local_residue(f: &Section, g: &Section, site: Site) -> Result<CycNum> {
    let sl = f.geometry().sl();
    let pf = f.pole_order(site) as i32;
    let pg = g.pole_order(site) as i32;
    let jf = f.expand_at(site, pg)?;
    let jg = g.expand_at(site, pf)?;
    let mut acc = sl.field().zero();
    for (p, x) in jf.terms() {
        if p == 0 {
            continue;
        }
        if let Some(y) = jg.coeff(-p)? {
            acc += &(&sl.trace_form(x, y) * &sl.field().from_int(p as i64));
        }
    }
    Ok(acc)
}

/// `Σ_{sites} w_site · Res (df | g)`, with `w = 1` at marked points and `1/N`
/// (or `1`, for [`CocycleNorm::Unnormalized`]) at `0` and `∞`.
pub fn cocycle_pair(f: &Section, g: &Section, sites: &[Site], norm: CocycleNorm) -> Result<CycNum> {
    let field = f.geometry().field();
    let inv_n = field.from_rational(Rational::from_signeds(1, f.geometry().n() as i64));
    let mut total = field.zero();
    for &site in sites {
        let r = local_residue(f, g, site)?;
        let w = match (site, norm) {
            (Site::Marked(_), _) | (_, CocycleNorm::Unnormalized) => r,
            _ => &r * &inv_n,
        };
        total += &w;
    }
    Ok(total)
}

/// Splits jets at the marked points as `(germs of s) + p` with
/// `s ∈ g_out^trig` and `p` free of negative modes.
pub fn decompose_gd(geom: &Arc<Geometry>, jets: &[LaurentJet], order: i32) -> Result<(Section, Vec<LaurentJet>)> {
    if jets.len() != geom.num_points() {
        return Err(Error::InvalidInput(format!(
            "expected {} jets, got {}",
            geom.num_points(),
            jets.len()
        )));
    }
    for (i, j) in jets.iter().enumerate() {
        if j.site != Site::Marked(i) {
            return Err(Error::InvalidInput(format!("jet {} sits at {}", i + 1, j.site)));
        }
        if j.order != order {
            return Err(Error::InvalidInput(format!(
                "jet at {} has truncation order {} instead of {order}",
                j.site, j.order
            )));
        }
    }
    let sl = geom.sl();
    let mut section = Section::zero(geom);
    let mut residual: Vec<LaurentJet> = jets.to_vec();
    for i in 0..residual.len() {
        while let Some((&mode, x)) = residual[i].coeffs.iter().next().filter(|(m, _)| **m < 0) {
            let x = x.clone();
            let depth = (-mode) as u32;
            let mut piece = Section::zero(geom);
            for (idx, c) in x.support() {
                let (a, b) = sl.label(idx);
                let basis = Section::trig_basis_element(geom, a, b, i, depth)?;
                let lead = basis.expand_at(Site::Marked(i), mode)?;
                let lead_c = &lead.coeff(mode)?.expect("pole of exact order").coords[idx];
                piece = piece.add_scaled(&basis, &c.div(lead_c)?);
            }
            for (j, r) in residual.iter_mut().enumerate() {
                *r = r.sub(&piece.expand_at(Site::Marked(j), order)?);
            }
            section = section.add(&piece);
        }
    }
    Ok((section, residual))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(n: usize, pts: &[i64]) -> Arc<Geometry> {
        let sl = SlN::new(n).unwrap();
        Geometry::new(sl, pts.iter().map(|p| sl.field().from_int(*p)).collect()).unwrap()
    }

    #[test]
    fn orbit_collision_rejected() {
        let sl = SlN::new(2).unwrap();
        let f = sl.field();
        let err = Geometry::new(sl, vec![f.from_int(1), f.from_int(-1)]).unwrap_err();
        assert!(err.to_string().contains("points 1 and 2"));
        assert!(Geometry::new(sl, vec![f.zero()]).is_err());
    }

    #[test]
    fn h_section_values() {
        let g = geom(2, &[1]);
        let h = Section::h_section(&g, 1, 0).unwrap();
        let sl = g.sl();
        assert_eq!(h.value_at(Site::Zero).unwrap().unwrap(), sl.cartan(1));
        assert_eq!(
            h.value_at(Site::Infinity).unwrap().unwrap(),
            sl.cartan(1).scale(&sl.field().from_int(-1))
        );
        assert!(h.check_membership(SectionClass::Trig));
        assert!(h.check_membership(SectionClass::Orb));
        assert!(!h.check_membership(SectionClass::Zero));
        assert!(Section::h_section(&g, 0, 0).is_err());
    }

    #[test]
    fn constant_is_orb_not_trig() {
        let g = geom(3, &[2]);
        let c = Section::constant_cartan(&g, 1).unwrap();
        assert!(c.check_membership(SectionClass::Orb));
        assert!(!c.check_membership(SectionClass::Trig));
    }

    #[test]
    fn trig_basis_pole_orders() {
        let g = geom(3, &[2, 5]);
        for (a, b) in g.sl().labels().collect::<Vec<_>>() {
            for n in 1..=4 {
                let s = Section::trig_basis_element(&g, a, b, 1, n).unwrap();
                assert_eq!(s.pole_order(Site::Marked(1)), n);
                assert_eq!(s.pole_order(Site::Marked(0)), 0);
                assert_eq!(s.pole_order(Site::Zero), 0);
                assert_eq!(s.pole_order(Site::Infinity), 0);
                assert!(s.check_membership(SectionClass::Trig), "({a},{b}) n={n}");
                let in_zero = a != 0 || n > 1;
                assert_eq!(s.check_membership(SectionClass::Zero), in_zero);
            }
        }
        assert!(Section::trig_basis_element(&g, 0, 0, 0, 1).is_err());
        assert!(matches!(
            Section::trig_basis_element(&g, 1, 0, 0, 7),
            Err(Error::PoleOrderLimit { .. })
        ));
    }

    #[test]
    fn orb_monomial_expansions() {
        let g = geom(2, &[1]);
        let s = Section::orb_monomial(&g, 1, 1, -1).unwrap();
        assert_eq!(s.pole_order(Site::Zero), 1);
        let j0 = s.expand_at(Site::Zero, 4).unwrap();
        assert_eq!(j0.terms().map(|(m, _)| m).collect::<Vec<_>>(), vec![-1]);
        let jinf = s.expand_at(Site::Infinity, 4).unwrap();
        assert_eq!(jinf.terms().map(|(m, _)| m).collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn residue_at_marked_point() {
        // Res_{t_1} t^a/(t^N - t_1^N) = t_1^a / (N t_1^{N-1})
        let g = geom(3, &[2]);
        let sl = g.sl();
        let s = Section::trig_basis_element(&g, 1, 2, 0, 1).unwrap();
        let jet = s.expand_at(Site::Marked(0), 0).unwrap();
        let lead = jet.coeff(-1).unwrap().unwrap();
        let t1 = sl.field().from_int(2);
        let expect = t1.div(&(&sl.field().from_int(3) * &t1.pow(2).unwrap())).unwrap();
        assert_eq!(lead, &sl.basis_elem(1, 2).scale(&expect));
    }

    #[test]
    fn mode_congruences_at_fixed_points() {
        let g = geom(3, &[2]);
        let n = 3;
        for (a, b) in g.sl().labels().collect::<Vec<_>>() {
            let s = Section::trig_basis_element(&g, a, b, 0, 2).unwrap();
            for (m, _) in s.expand_at(Site::Zero, 7).unwrap().terms() {
                assert_eq!((m - a as i32).rem_euclid(n), 0);
            }
            for (m, _) in s.expand_at(Site::Infinity, 7).unwrap().terms() {
                assert_eq!((m + a as i32).rem_euclid(n), 0);
            }
        }
    }

    #[test]
    fn jet_truncation_is_enforced() {
        let g = geom(2, &[1]);
        let s = Section::trig_basis_element(&g, 1, 0, 0, 1).unwrap();
        let j = s.expand_at(Site::Marked(0), 2).unwrap();
        assert!(j.coeff(2).is_ok());
        assert!(j.coeff(3).is_err());
    }

    #[test]
    fn theta_matches_pointwise_derivative_scaling() {
        // θ(J_{ab} t^e) = e J_{ab} t^e
        let g = geom(3, &[2]);
        let s = Section::orb_monomial(&g, 2, 1, -2).unwrap();
        let t = s.theta();
        assert_eq!(t, s.scale(&g.field().from_int(2 - 6)));
    }

    #[test]
    fn decompose_single_pole() {
        let g = geom(2, &[1, 3]);
        let sl = g.sl();
        let mut c = BTreeMap::new();
        c.insert(-1, sl.basis_elem(1, 1));
        let jets = vec![
            LaurentJet::from_coeffs(Site::Marked(0), 3, c).unwrap(),
            LaurentJet::new(Site::Marked(1), 3),
        ];
        let (s, p) = decompose_gd(&g, &jets, 3).unwrap();
        assert!(s.check_membership(SectionClass::Trig));
        assert!(p.iter().all(|j| !j.has_negative_modes()));
        for (i, j) in jets.iter().enumerate() {
            assert_eq!(&s.expand_at(Site::Marked(i), 3).unwrap().add(&p[i]), j);
        }
    }

    #[test]
    fn decompose_rejects_mixed_orders() {
        let g = geom(2, &[1, 3]);
        let jets = vec![LaurentJet::new(Site::Marked(0), 3), LaurentJet::new(Site::Marked(1), 2)];
        assert!(decompose_gd(&g, &jets, 3).is_err());
    }

    #[test]
    fn cocycle_vanishes_on_global_sections() {
        let g = geom(3, &[2, 5]);
        let sites = g.sites();
        let labels: Vec<_> = g.sl().labels().collect();
        let mut secs = Vec::new();
        for &(a, b) in &labels {
            secs.push(Section::trig_basis_element(&g, a, b, 0, 2).unwrap());
            secs.push(Section::trig_basis_element(&g, a, b, 1, 1).unwrap());
            secs.push(Section::orb_monomial_with_exponent(&g, a, b, a as i32 - 3).unwrap());
        }
        let mut nonzero_unnormalized = false;
        for f in &secs {
            for h in &secs {
                assert!(cocycle_pair(f, h, &sites, CocycleNorm::Orbifold).unwrap().is_zero());
                nonzero_unnormalized |= !cocycle_pair(f, h, &sites, CocycleNorm::Unnormalized).unwrap().is_zero();
            }
        }
        assert!(nonzero_unnormalized);
    }
}
