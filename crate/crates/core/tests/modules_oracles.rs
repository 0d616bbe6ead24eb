use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use factorlab_core::coinvariants::{orbifold_triple, weyl_tensor};
use factorlab_core::cyclofield::{CycNum, Rational};
use factorlab_core::error::Error;
use factorlab_core::liealg::{Representation, SlN, Weight};
use factorlab_core::modules::{
    extended_bracket, site_cocycle_weight, LoopElem, Mode, ModVector, State, TensorModule, UniversalVermaQuot,
};
use factorlab_core::properties::{random_cyc, random_weight};
use factorlab_core::sections::{Geometry, Section, Site};

fn geom(n: usize, pts: &[i64]) -> Arc<Geometry> {
    let sl = SlN::new(n).unwrap();
    Geometry::new(sl, pts.iter().map(|p| sl.field().from_int(*p)).collect()).unwrap()
}

fn triple(n: usize, level: i64, seed: u64, depth: u32) -> (TensorModule, Weight, Weight) {
    let g = geom(n, &[1]);
    let sl = g.sl();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (l, m) = (random_weight(&sl, &mut rng), random_weight(&sl, &mut rng));
    let reps = [Representation::defining(sl)];
    let module = orbifold_triple(&g, &reps, &Rational::from(level), &l, &m, depth).unwrap();
    (module, l, m)
}

fn unit(module: &TensorModule) -> CycNum {
    module.geometry().field().one()
}

fn act_vec(module: &TensorModule, m: Mode, v: &ModVector) -> ModVector {
    module.act_local(m, v).unwrap()
}

/// Action of `Σ_p X_p ⊗ ξ^p + c k` with `k` acting by `level`.
fn act_loop(module: &TensorModule, site: Site, e: &LoopElem, v: &ModVector, level: &CycNum) -> ModVector {
    let mut out = v.scale(&(&e.central * level));
    for (p, x) in &e.modes {
        for (label, c) in x.support() {
            out.add_scaled(&act_vec(module, Mode { site, label, exp: *p }, v), c);
        }
    }
    out
}

fn random_mode(sl: &SlN, site: Site, rng: &mut impl Rng) -> Mode {
    loop {
        let label = rng.gen_range(0..sl.dim());
        let exp = rng.gen_range(-2..=2);
        if Mode::admissible(sl, site, label, exp) {
            return Mode { site, label, exp };
        }
    }
}

fn random_state(module: &TensorModule, max: u32, rng: &mut impl Rng) -> State {
    let d = rng.gen_range(0..=max);
    let states = module.states_of_depth(d);
    states[rng.gen_range(0..states.len())].clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn action_respects_the_extended_bracket(n in 2usize..=3, level in -3i64..=3, seed in any::<u64>()) {
        let (module, _, _) = triple(n, level, seed, 5);
        let sl = module.sl();
        let k = sl.field().from_int(level);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for _ in 0..6 {
            let site = [Site::Zero, Site::Marked(0), Site::Infinity][rng.gen_range(0..3)];
            let (x, y) = (random_mode(&sl, site, &mut rng), random_mode(&sl, site, &mut rng));
            let v = ModVector::from_state(random_state(&module, 1, &mut rng), unit(&module));
            let lhs = {
                let mut a = act_vec(&module, x, &act_vec(&module, y, &v));
                a.add_scaled(&act_vec(&module, y, &act_vec(&module, x, &v)), &sl.field().from_int(-1));
                a
            };
            let one = |m: Mode| {
                let mut e = sl.zero_elem();
                e.coords[m.label] = sl.field().one();
                LoopElem::single(&sl, e, m.exp)
            };
            let br = extended_bracket(&sl, &one(x), &one(y), &site_cocycle_weight(&sl, site));
            prop_assert_eq!(lhs, act_loop(&module, site, &br, &v, &k));
        }
    }

    #[test]
    fn modes_at_different_sites_commute(n in 2usize..=3, seed in any::<u64>()) {
        let (module, _, _) = triple(n, 1, seed, 5);
        let sl = module.sl();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..6 {
            let x = random_mode(&sl, Site::Zero, &mut rng);
            let y = random_mode(&sl, [Site::Marked(0), Site::Infinity][rng.gen_range(0..2)], &mut rng);
            let v = ModVector::from_state(random_state(&module, 1, &mut rng), unit(&module));
            prop_assert_eq!(
                act_vec(&module, x, &act_vec(&module, y, &v)),
                act_vec(&module, y, &act_vec(&module, x, &v))
            );
        }
    }

    #[test]
    fn right_action_commutes_with_left_action(n in 2usize..=3, seed in any::<u64>()) {
        let (module, lt, mt) = triple(n, 1, seed, 4);
        let sl = module.sl();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..6 {
            let site = [Site::Zero, Site::Marked(0), Site::Infinity][rng.gen_range(0..3)];
            let x = random_mode(&sl, site, &mut rng);
            let st = random_state(&module, 2, &mut rng);
            let b = rng.gen_range(1..n);
            let right = |v: &ModVector, s: Site| {
                let mut out = ModVector::zero();
                for (st, c) in v.terms() {
                    out.add_scaled(&module.right_h(s, st, b).unwrap(), c);
                }
                out
            };
            let v = ModVector::from_state(st.clone(), unit(&module));
            for (s, w) in [(Site::Zero, &lt), (Site::Infinity, &mt)] {
                prop_assert_eq!(right(&act_vec(&module, x, &v), s), act_vec(&module, x, &right(&v, s)));
                prop_assert_eq!(right(&v, s), v.scale(&w.values[b - 1]));
            }
        }
    }
}

#[test]
fn central_term_two_ways() {
    let g = geom(2, &[1]);
    let sl = g.sl();
    let w = sl.zero_weight();
    let level = Rational::from_signeds(3, 5);
    let module = orbifold_triple(&g, &[Representation::defining(sl)], &level, &w, &w, 2).unwrap();
    let j11 = sl.index(1, 1);
    let up = Mode { site: Site::Zero, label: j11, exp: 1 };
    let down = Mode { site: Site::Zero, label: j11, exp: -1 };
    let v = ModVector::from_state(State::generator(0), sl.field().one());
    let got = act_vec(&module, up, &act_vec(&module, down, &v));
    // [J11 t, J11 t^-1] = (1/N) · 1 · tr(J11²) k, and J11 t kills the generator
    let tr = sl.inner(&sl.j_matrix(1, 1), &sl.j_matrix(1, 1));
    assert_eq!(tr, sl.field().from_int(-2));
    let want = &(&tr * &sl.field().from_rational(Rational::from_signeds(1, 2))) * &sl.field().from_rational(level);
    assert_eq!(got, v.scale(&want));
}

#[test]
fn constant_cartan_acts_by_total_weight() {
    for n in [2, 3] {
        let g = geom(n, &[1]);
        let sl = g.sl();
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let (l, m) = (random_weight(&sl, &mut rng), random_weight(&sl, &mut rng));
        let (lt, _) = sl.tilde_weights(&l).unwrap();
        let (_, mt) = sl.tilde_weights(&m).unwrap();
        let rep = Representation::defining(sl);
        let module = orbifold_triple(&g, std::slice::from_ref(&rep), &Rational::from(1), &lt, &mt, 2).unwrap();
        for ws in rep.weight_decompose().unwrap() {
            let gen = ws.basis[0].iter().position(|c| !c.is_zero()).unwrap();
            let v = ModVector::from_state(State::generator(gen), sl.field().one());
            for b in 1..n {
                let h = Section::constant_cartan(&g, b).unwrap();
                let s = &(&lt.values[b - 1] + &ws.weight.values[b - 1]) + &mt.values[b - 1];
                assert_eq!(module.act_section(&h, &v).unwrap(), v.scale(&s));
            }
        }
    }
}

#[test]
fn section_action_matches_slotwise_sum() {
    let g = geom(3, &[1, 2]);
    let sl = g.sl();
    let reps = [Representation::defining(sl), Representation::defining(sl).dual()];
    let module = weyl_tensor(&g, &reps, &Rational::from(2), 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let (a, b) = sl.labels().nth(rng.gen_range(0..sl.dim())).unwrap();
        let f = Section::trig_basis_element(&g, a, b, rng.gen_range(0..2), 1)
            .unwrap()
            .scale(&random_cyc(sl.field(), &mut rng));
        let st = random_state(&module, 2, &mut rng);
        let v = ModVector::from_state(st.clone(), sl.field().one());
        let mut want = ModVector::zero();
        for site in module.sites() {
            for (p, x) in f.expand_at(site, 4).unwrap().terms() {
                for (label, c) in x.support() {
                    want.add_scaled(&module.act_mode(Mode { site, label, exp: p }, &st).unwrap(), c);
                }
            }
        }
        assert_eq!(module.act_section(&f, &v).unwrap(), want);
    }
}

/// Coefficients of `Π_d (1 - q^d)^{-c(d)}` up to `q^max`.
fn partition_counts(letters: impl Fn(u32) -> usize, max: u32) -> Vec<u64> {
    let mut coeffs = vec![0u64; max as usize + 1];
    coeffs[0] = 1;
    for d in 1..=max {
        for _ in 0..letters(d) {
            for k in d..=max {
                coeffs[k as usize] += coeffs[(k - d) as usize];
            }
        }
    }
    coeffs
}

#[test]
fn pbw_monomial_counts() {
    for n in [2, 3] {
        let (module, _, _) = triple(n, 1, 0, 5);
        let fixed = |d: u32| if (d as usize).is_multiple_of(n) { n - 1 } else { n };
        let marked = |_d: u32| n * n - 1;
        let z = partition_counts(fixed, 5);
        let q = partition_counts(marked, 5);
        for d in 0..=5u32 {
            let mut want = 0u64;
            for i in 0..=d {
                for j in 0..=d - i {
                    want += z[i as usize] * z[j as usize] * q[(d - i - j) as usize];
                }
            }
            assert_eq!(module.monomials_of_depth(d).len() as u64, want, "N={n} d={d}");
            assert_eq!(module.states_of_depth(d).len() as u64, want * n as u64, "N={n} d={d}");
        }
    }
}

#[test]
fn guard_rails() {
    let g = geom(2, &[1]);
    let sl = g.sl();
    let module = weyl_tensor(&g, &[Representation::defining(sl)], &Rational::from(1), 2).unwrap();
    let orb = Section::orb_monomial(&g, 1, 0, -1).unwrap();
    let v = ModVector::from_state(State::generator(0), sl.field().one());
    assert!(matches!(module.act_section(&orb, &v), Err(Error::NotMember { .. })));
    let deep = Mode { site: Site::Marked(0), label: 0, exp: -3 };
    assert!(matches!(module.act_mode(deep, &State::generator(0)), Err(Error::FuelExhausted(_))));
    assert!(UniversalVermaQuot::new(&sl, Site::Marked(0), vec![sl.zero_weight()], Rational::from(1)).is_err());
    let w = sl.zero_weight();
    assert!(UniversalVermaQuot::new(&sl, Site::Zero, vec![w.clone(), w], Rational::from(1)).is_err());
    assert!(Mode::new(&sl, Site::Zero, 1, 0, -2).is_err());
    assert!(Mode::new(&sl, Site::Infinity, 1, 0, -1).is_ok());
}
