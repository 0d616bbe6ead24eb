//! Randomized and exhaustive invariant suites with exact checks.
//!
//! Every suite counts the identities it checks and records each violation
//! verbatim; a suite passes when the violation list is empty.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coinvariants::{orbifold_triple, total_representation};
use crate::cyclofield::{CycNum, CyclotomicField, Rational};
use crate::error::Result;
use crate::liealg::{LieElem, Representation, SlN, Twist, Weight};
use crate::modules::{extended_bracket, site_cocycle_weight, LoopElem, Mode, ModVector, TensorModule};
use crate::sections::{cocycle_pair, decompose_gd, CocycleNorm, Geometry, LaurentJet, Section, SectionClass, Site};

/// Outcome of one suite.
#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub name: &'static str,
    pub checks: usize,
    pub violations: Vec<String>,
}

impl SuiteResult {
    fn new(name: &'static str) -> Self {
        SuiteResult {
            name,
            checks: 0,
            violations: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.violations.push(what());
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Names of the suites run by [`run_suites`], in order.
pub const SUITES: [&str; 8] = [
    "field_axioms",
    "lie_structure",
    "extended_jacobi",
    "cocycle_vanishing",
    "smoothness_bound",
    "rho_scalar",
    "decomposition",
    "verma_weights",
];

/// Runs every suite for `sl_N` with a fixed seed.
pub fn run_suites(n: usize, seed: u64) -> Result<Vec<SuiteResult>> {
    let sl = SlN::new(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(vec![
        field_axioms(sl.field(), &mut rng),
        lie_structure(&sl, &mut rng)?,
        extended_jacobi(&sl, &mut rng),
        cocycle_vanishing(&sl)?,
        smoothness_bound(&sl, &mut rng)?,
        rho_scalar(&sl, &mut rng)?,
        decomposition(&sl, &mut rng, 200)?,
        verma_weights(&sl, &mut rng)?,
    ])
}

pub fn random_rational(rng: &mut impl Rng) -> Rational {
    Rational::from_signeds(rng.gen_range(-6i64..=6), rng.gen_range(1i64..=4))
}

pub fn random_cyc(field: &'static CyclotomicField, rng: &mut impl Rng) -> CycNum {
    let coeffs: Vec<Rational> = (0..field.order()).map(|_| random_rational(rng)).collect();
    field.make(&coeffs).expect("length within order")
}

pub fn random_lie(sl: &SlN, rng: &mut impl Rng) -> LieElem {
    LieElem {
        coords: (0..sl.dim())
            .map(|_| {
                if rng.gen_bool(0.5) {
                    random_cyc(sl.field(), rng)
                } else {
                    sl.field().zero()
                }
            })
            .collect(),
    }
}

pub fn random_weight(sl: &SlN, rng: &mut impl Rng) -> Weight {
    Weight::new((1..sl.n()).map(|_| random_cyc(sl.field(), rng)).collect())
}

/// Associativity, commutativity, distributivity, inverses and `ε`-powers.
pub fn field_axioms(field: &'static CyclotomicField, rng: &mut impl Rng) -> SuiteResult {
    let mut s = SuiteResult::new("field_axioms");
    for _ in 0..1000 {
        let (x, y, z) = (random_cyc(field, rng), random_cyc(field, rng), random_cyc(field, rng));
        s.check(&(&x * &y) * &z == &x * &(&y * &z), || format!("(xy)z != x(yz) for {x}, {y}, {z}"));
        s.check(&x * &y == &y * &x, || format!("xy != yx for {x}, {y}"));
        s.check(&x + &y == &y + &x, || format!("x+y != y+x for {x}, {y}"));
        s.check(&x * &(&y + &z) == &(&x * &y) + &(&x * &z), || {
            format!("x(y+z) != xy+xz for {x}, {y}, {z}")
        });
    }
    let mut inverses = 0;
    while inverses < 500 {
        let x = random_cyc(field, rng);
        if x.is_zero() {
            continue;
        }
        inverses += 1;
        match x.inv() {
            Ok(y) => s.check((&x * &y).is_one(), || format!("x·x⁻¹ != 1 for {x}")),
            Err(e) => s.check(false, || format!("inverse of {x} failed: {e}")),
        }
    }
    let n = field.order() as i64;
    for a in 0..n {
        for b in 0..n {
            s.check(field.eps_pow(a) * field.eps_pow(b) == field.eps_pow(a + b), || {
                format!("ε^{a}·ε^{b} != ε^{}", a + b)
            });
        }
    }
    let eps = field.eps_pow(1);
    let mut p = field.one();
    for k in 1..=n {
        p *= &eps;
        s.check(p.is_one() == (k == n), || format!("ε^{k} = 1 is {}", p.is_one()));
    }
    s
}

/// Twist relations, `Ad`-eigenvalues, trace forms, matrix Jacobi and twisted weights.
pub fn lie_structure(sl: &SlN, rng: &mut impl Rng) -> Result<SuiteResult> {
    let mut s = SuiteResult::new("lie_structure");
    let f = sl.field();
    let n = sl.n();
    let (beta, gamma) = sl.beta_gamma();
    let id = crate::linalg::Matrix::identity(f, n);
    s.check(beta.pow(n as u32) == id, || "β^N != 1".into());
    s.check(gamma.pow(n as u32) == id, || "γ^N != 1".into());
    s.check(gamma.mul(&beta) == beta.mul(&gamma).scale(&sl.eps(1)), || "γβ != εβγ".into());
    for (a, b) in sl.labels() {
        let j = sl.j_matrix(a as i64, b as i64);
        for which in [Twist::Beta, Twist::Gamma] {
            let lhs = sl.ad_auto(which, &j);
            let rhs = j.scale(&sl.ad_eigenvalue(which, a, b));
            s.check(lhs == rhs, || format!("Ad {which:?} J_{a}{b} is not an eigenvector"));
        }
    }
    let basis: Vec<_> = sl.labels().map(|(a, b)| sl.j_matrix(a as i64, b as i64)).collect();
    let pairs: Vec<(usize, usize)> = if n <= 3 {
        (0..basis.len()).flat_map(|i| (0..basis.len()).map(move |j| (i, j))).collect()
    } else {
        (0..30).map(|_| (rng.gen_range(0..basis.len()), rng.gen_range(0..basis.len()))).collect()
    };
    for (i, j) in pairs {
        let lhs = sl.adjoint_trace_inner(&basis[i], &basis[j])?;
        let rhs = sl.inner(&basis[i], &basis[j]);
        s.check(lhs == rhs, || format!("(1/2N) tr(ad ad) != tr on basis pair ({i}, {j})"));
    }
    for _ in 0..20 {
        let (x, y, z) = (
            sl.to_matrix(&random_lie(sl, rng)),
            sl.to_matrix(&random_lie(sl, rng)),
            sl.to_matrix(&random_lie(sl, rng)),
        );
        let jac = x
            .commutator(&y.commutator(&z))
            .add(&y.commutator(&z.commutator(&x)))
            .add(&z.commutator(&x.commutator(&y)));
        s.check(jac.is_zero(), || "matrix Jacobi identity fails".into());
    }
    for _ in 0..100 {
        let lambda = random_weight(sl, rng);
        let (t, tp) = sl.tilde_weights(&lambda)?;
        s.check(t.add(&tp) == lambda.neg(), || format!("λ̃ + λ̃' != -λ for λ = {lambda}"));
        s.check(lambda.is_zero() || (!t.is_zero() && !tp.is_zero()), || {
            format!("twisted weights of {lambda} vanish")
        });
        if n == 2 {
            let half = f.from_rational(Rational::from_signeds(-1, 2));
            s.check(t == lambda.scale(&half), || format!("λ̃ != -λ/2 for λ = {lambda}"));
        }
    }
    Ok(s)
}

fn random_loop(sl: &SlN, site: Site, rng: &mut impl Rng) -> LoopElem {
    let mut e = LoopElem::zero(sl);
    let terms = rng.gen_range(1..=3);
    let mut placed = 0;
    while placed < terms {
        let label = rng.gen_range(0..sl.dim());
        let exp = rng.gen_range(-3..=3);
        if !Mode::admissible(sl, site, label, exp) {
            continue;
        }
        placed += 1;
        let mut x = sl.zero_elem();
        x.coords[label] = random_cyc(sl.field(), rng);
        e = e.add(&LoopElem::single(sl, x, exp));
    }
    e
}

/// Jacobi identity and antisymmetry of the centrally extended bracket at each site type.
pub fn extended_jacobi(sl: &SlN, rng: &mut impl Rng) -> SuiteResult {
    let mut s = SuiteResult::new("extended_jacobi");
    for site in [Site::Zero, Site::Marked(0), Site::Infinity] {
        let w = site_cocycle_weight(sl, site);
        let br = |x: &LoopElem, y: &LoopElem| extended_bracket(sl, x, y, &w);
        for _ in 0..100 {
            let (x, y, z) = (random_loop(sl, site, rng), random_loop(sl, site, rng), random_loop(sl, site, rng));
            let jac = br(&x, &br(&y, &z)).add(&br(&y, &br(&z, &x))).add(&br(&z, &br(&x, &y)));
            s.check(jac == LoopElem::zero(sl), || format!("Jacobi fails at {site}"));
            let anti = br(&x, &y).add(&br(&y, &x));
            s.check(anti == LoopElem::zero(sl), || format!("antisymmetry fails at {site}"));
        }
    }
    s
}

/// `Σ_sites w · Res (df|g) = 0` on global sections, and the unit weight at
/// `0, ∞` breaks it.
pub fn cocycle_vanishing(sl: &SlN) -> Result<SuiteResult> {
    let f = sl.field();
    cocycle_vanishing_on(&Geometry::new(*sl, vec![f.from_int(1), f.from_int(2)])?)
}

/// [`cocycle_vanishing`] for the marked points of `geom`, pole orders up to 3.
pub fn cocycle_vanishing_on(geom: &Arc<Geometry>) -> Result<SuiteResult> {
    let mut s = SuiteResult::new("cocycle_vanishing");
    let sl = &geom.sl();
    let marked: Vec<Site> = (0..geom.num_points()).map(Site::Marked).collect();
    let all = geom.sites();
    let mut trig = Vec::new();
    for (a, b) in sl.labels() {
        for i in 0..geom.num_points() {
            for n in 1..=3 {
                trig.push(Section::trig_basis_element(geom, a, b, i, n)?);
            }
        }
    }
    for f1 in &trig {
        for f2 in &trig {
            let c = cocycle_pair(f1, f2, &marked, CocycleNorm::Orbifold)?;
            s.check(c.is_zero(), || format!("trig pair gives {c}"));
        }
    }
    let mut orb = Vec::new();
    for (a, b) in sl.labels() {
        for e in -3i32..=3 {
            if (e - a as i32).rem_euclid(sl.n() as i32) == 0 {
                orb.push(Section::orb_monomial_with_exponent(geom, a, b, e)?);
            }
        }
        for i in 0..geom.num_points() {
            orb.push(Section::trig_basis_element(geom, a, b, i, 1 + i as u32 % 3)?);
        }
    }
    let mut control = false;
    for f1 in &orb {
        for f2 in &orb {
            let c = cocycle_pair(f1, f2, &all, CocycleNorm::Orbifold)?;
            s.check(c.is_zero(), || format!("orbifold pair gives {c}"));
            control |= !cocycle_pair(f1, f2, &all, CocycleNorm::Unnormalized)?.is_zero();
        }
    }
    s.check(control, || "dropping 1/N at 0 and ∞ leaves every pair zero".into());
    Ok(s)
}

fn defining_triple(sl: &SlN, lambda: &Weight, mu: &Weight, depth: u32) -> Result<TensorModule> {
    let geom = Geometry::new(*sl, vec![sl.field().from_int(1)])?;
    let (lt, _) = sl.tilde_weights(lambda)?;
    let (_, mt) = sl.tilde_weights(mu)?;
    orbifold_triple(&geom, &[Representation::defining(*sl)], &Rational::from(1), &lt, &mt, depth)
}

fn states_up_to(module: &TensorModule, d: u32) -> Vec<crate::modules::State> {
    (0..=d).flat_map(|k| module.states_of_depth(k)).collect()
}

/// Modes beyond the smoothness bound annihilate, and the truncated section
/// action agrees with the action of the full jets.
pub fn smoothness_bound(sl: &SlN, rng: &mut impl Rng) -> Result<SuiteResult> {
    let mut s = SuiteResult::new("smoothness_bound");
    let depth = 3;
    let module = defining_triple(sl, &random_weight(sl, rng), &random_weight(sl, rng), depth)?;
    let one = sl.field().one();
    let states = states_up_to(&module, 2);
    for st in &states {
        let v = ModVector::from_state(st.clone(), one.clone());
        for site in module.sites() {
            let bound = module.smoothness_bound(&v, site);
            for label in 0..sl.dim() {
                for exp in bound as i32..=bound as i32 + sl.n() as i32 {
                    if !Mode::admissible(sl, site, label, exp) {
                        continue;
                    }
                    let out = module.act_mode(Mode { site, label, exp }, st)?;
                    s.check(out.is_zero(), || format!("mode ({site}, {label}, {exp}) survives on {v}"));
                }
            }
        }
    }
    let geom = module.geometry().clone();
    let mut sections = Vec::new();
    for (a, b) in sl.labels() {
        sections.push(Section::trig_basis_element(&geom, a, b, 0, 1)?);
        let e = a as i32 - sl.n() as i32;
        sections.push(Section::orb_monomial_with_exponent(&geom, a, b, e)?);
    }
    for f in &sections {
        for _ in 0..10 {
            let st = &states[rng.gen_range(0..states.len())];
            if st.depth() + f.pole_sites().iter().map(|p| f.pole_order(*p)).max().unwrap_or(0) > depth {
                continue;
            }
            let v = ModVector::from_state(st.clone(), one.clone());
            let fast = module.act_section(f, &v)?;
            let mut full = ModVector::zero();
            for site in module.sites() {
                let jet = f.expand_at(site, depth as i32)?;
                for (p, x) in jet.terms() {
                    for (label, c) in x.support() {
                        full.add_scaled(&module.act_mode(Mode { site, label, exp: p }, st)?, c);
                    }
                }
            }
            s.check(fast == full, || format!("truncated action differs on {v}"));
        }
    }
    Ok(s)
}

/// `ρ_{1,β}(H_b)` acts on `M_{λ̃} ⊗ M(V) ⊗ M_{μ̃'}` by
/// `ε^b (λ-μ)(H_b) / (1-ε^b)`, which vanishes exactly when `λ = μ`.
pub fn rho_scalar(sl: &SlN, rng: &mut impl Rng) -> Result<SuiteResult> {
    let mut s = SuiteResult::new("rho_scalar");
    let f = sl.field();
    let wts: Vec<Weight> = Representation::defining(*sl)
        .weight_decompose()?
        .into_iter()
        .map(|w| w.weight)
        .collect();
    let mut pairs: Vec<(Weight, Weight)> = Vec::new();
    for l in &wts {
        for m in &wts {
            pairs.push((l.clone(), m.clone()));
        }
    }
    for _ in 0..4 {
        let l = random_weight(sl, rng);
        pairs.push((l.clone(), l));
        pairs.push((random_weight(sl, rng), random_weight(sl, rng)));
    }
    for (lambda, mu) in &pairs {
        let module = defining_triple(sl, lambda, mu, 2)?;
        for b in 1..sl.n() {
            let eb = sl.eps(b as i64);
            let diff = &lambda.values[b - 1] - &mu.values[b - 1];
            let scalar = &(&eb * &diff) * &(&f.one() - &eb).inv()?;
            s.check(scalar.is_zero() == (lambda.values[b - 1] == mu.values[b - 1]), || {
                format!("scalar zero set wrong for {lambda}, {mu}")
            });
            for st in states_up_to(&module, 2) {
                let got = module.rho_1_beta(&st, b)?;
                let want = ModVector::from_state(st.clone(), scalar.clone());
                s.check(got == want, || format!("ρ(H_{b}) is not {scalar} on {st:?} for λ = {lambda}, μ = {mu}"));
            }
        }
    }
    Ok(s)
}

fn random_jet(sl: &SlN, site: Site, depth: i32, order: i32, rng: &mut impl Rng) -> LaurentJet {
    let mut coeffs = BTreeMap::new();
    for p in -depth..=order {
        if rng.gen_bool(0.4) {
            coeffs.insert(p, random_lie(sl, rng));
        }
    }
    LaurentJet::from_coeffs(site, order, coeffs).expect("modes within order")
}

/// Round trip, uniqueness and idempotence of the split `g_out^trig ⊕ g^D_+`.
pub fn decomposition(sl: &SlN, rng: &mut impl Rng, cases: usize) -> Result<SuiteResult> {
    let mut s = SuiteResult::new("decomposition");
    let f = sl.field();
    let geom = Geometry::new(*sl, vec![f.from_int(1), f.from_int(2)])?;
    let order = 3;
    let check_split = |s: &mut SuiteResult, jets: &[LaurentJet], geom: &Arc<Geometry>| -> Result<Vec<LaurentJet>> {
        let (sec, pos) = decompose_gd(geom, jets, order)?;
        s.check(sec.check_membership(SectionClass::Trig), || "split section is not in g_out^trig".into());
        for (i, (x, p)) in jets.iter().zip(&pos).enumerate() {
            s.check(!p.has_negative_modes(), || format!("positive part at Q{} has poles", i + 1));
            let back = sec.expand_at(Site::Marked(i), order)?.add(p);
            s.check(back.sub(x).is_zero(), || format!("round trip fails at Q{}", i + 1));
        }
        Ok(pos)
    };
    for _ in 0..cases {
        let depth = rng.gen_range(0..=order);
        let jets: Vec<LaurentJet> = (0..geom.num_points())
            .map(|i| random_jet(sl, Site::Marked(i), depth, order, rng))
            .collect();
        let pos = check_split(&mut s, &jets, &geom)?;
        let (again, rest) = decompose_gd(&geom, &pos, order)?;
        s.check(again.is_zero(), || "split of a positive jet has a nonzero section".into());
        for (p, r) in pos.iter().zip(&rest) {
            s.check(p.sub(r).is_zero(), || "positive jet changed on a second split".into());
        }
    }
    Ok(s)
}

/// Right `h`-eigenvalues of the universal Verma quotients are `λ̃` (resp.
/// `λ̃'`), pairwise distinct over `wt(V)`.
pub fn verma_weights(sl: &SlN, rng: &mut impl Rng) -> Result<SuiteResult> {
    use crate::modules::UniversalVermaQuot;
    let mut s = SuiteResult::new("verma_weights");
    let reps = [Representation::defining(*sl), Representation::defining(*sl).dual()];
    let v = total_representation(sl, &reps);
    let mut weights: Vec<Weight> = v.weight_decompose()?.into_iter().map(|w| w.weight).collect();
    let extra = loop {
        let w = random_weight(sl, rng);
        if !weights.contains(&w) {
            break w;
        }
    };
    weights.push(extra);
    for site in [Site::Zero, Site::Infinity] {
        let q = UniversalVermaQuot::new(sl, site, weights.clone(), Rational::from(1))?;
        s.check(q.num_components() == weights.len(), || "component count differs from |S|".into());
        let eig = q.right_h_eigenvalues();
        for (w, e) in weights.iter().zip(eig) {
            let (t, tp) = sl.tilde_weights(w)?;
            let want = if site == Site::Zero { t } else { tp };
            s.check(*e == want, || format!("eigenvalue at {site} for {w} is {e}"));
        }
        for i in 0..eig.len() {
            for j in 0..i {
                s.check(eig[i] != eig[j], || format!("eigenvalues {i} and {j} coincide at {site}"));
            }
        }
    }
    Ok(s)
}
