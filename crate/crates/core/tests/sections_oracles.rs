mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{close, to_complex};
use factorlab_core::cyclofield::{CycNum, Rational};
use factorlab_core::liealg::{LieElem, SlN};
use factorlab_core::properties::{random_cyc, random_lie};
use factorlab_core::sections::{
    cocycle_pair, decompose_gd, local_residue, CocycleNorm, Geometry, LaurentJet, Section, SectionClass, Site,
};

fn geom(n: usize, pts: &[i64]) -> Arc<Geometry> {
    let sl = SlN::new(n).unwrap();
    Geometry::new(sl, pts.iter().map(|p| sl.field().from_int(*p)).collect()).unwrap()
}

/// Random combination of trig basis elements and orbifold monomials.
fn random_section(g: &Arc<Geometry>, rng: &mut impl Rng, with_fixed_poles: bool) -> Section {
    let sl = g.sl();
    let labels: Vec<_> = sl.labels().collect();
    let mut s = Section::zero(g);
    for _ in 0..rng.gen_range(1..=4) {
        let (a, b) = labels[rng.gen_range(0..labels.len())];
        let c = random_cyc(sl.field(), rng);
        let piece = if with_fixed_poles && rng.gen_bool(0.4) {
            let m = rng.gen_range(-1..=0);
            Section::orb_monomial(g, a, b, m).unwrap()
        } else {
            let i = rng.gen_range(0..g.num_points());
            Section::trig_basis_element(g, a, b, i, rng.gen_range(1..=3)).unwrap()
        };
        s = s.add_scaled(&piece, &c);
    }
    s
}

/// Complex value of `f(t)` straight from the partial-fraction data.
fn eval_complex(f: &Section, t: Complex64) -> Vec<Complex64> {
    let g = f.geometry();
    let sl = g.sl();
    let n = sl.n() as i32;
    let s = t.powi(n);
    let mut coords = vec![Complex64::new(0.0, 0.0); sl.dim()];
    for (&(a, b), part) in f.components() {
        let mut v = Complex64::new(0.0, 0.0);
        for (&m, c) in &part.laurent {
            v += to_complex(c) * s.powi(m);
        }
        for (&(j, k), c) in &part.poles {
            let sj = to_complex(g.point(j)).powi(n);
            v += to_complex(c) / (s - sj).powi(k as i32);
        }
        coords[sl.index(a, b)] = v * t.powi(a as i32);
    }
    coords
}

fn lie_complex(x: &LieElem) -> Vec<Complex64> {
    x.coords.iter().map(to_complex).collect()
}

fn jet_sum(jet: &LaurentJet, xi: Complex64, dim: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    for (p, x) in jet.terms() {
        for (o, c) in out.iter_mut().zip(lie_complex(x)) {
            *o += c * xi.powi(p);
        }
    }
    out
}

fn all_close(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| close(*x, *y, tol))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn expansions_sum_to_values(n in 2usize..=3, seed in any::<u64>()) {
        let g = geom(n, &[1, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_section(&g, &mut rng, true);
        let dim = g.sl().dim();
        let zero = f.expand_at(Site::Zero, 40).unwrap();
        let t = Complex64::new(0.1, 0.03);
        prop_assert!(all_close(&jet_sum(&zero, t, dim), &eval_complex(&f, t), 1e-9));
        let inf = f.expand_at(Site::Infinity, 40).unwrap();
        let t = Complex64::new(9.0, 4.0);
        prop_assert!(all_close(&jet_sum(&inf, t.inv(), dim), &eval_complex(&f, t), 1e-9));
        for i in 0..2 {
            let jet = f.expand_at(Site::Marked(i), 40).unwrap();
            let xi = Complex64::new(0.05, -0.04);
            let t = to_complex(g.point(i)) + xi;
            prop_assert!(all_close(&jet_sum(&jet, xi, dim), &eval_complex(&f, t), 1e-8));
        }
        // exact values at a rational point agree with the numeric evaluator
        let q = g.field().from_rational(Rational::from_signeds(3, 7));
        let exact = lie_complex(&f.eval(&q).unwrap());
        prop_assert!(all_close(&exact, &eval_complex(&f, Complex64::new(3.0 / 7.0, 0.0)), 1e-9));
    }

    #[test]
    fn principal_parts_resum_to_a_constant(n in 2usize..=3, seed in any::<u64>()) {
        let g = geom(n, &[1, 2]);
        let sl = g.sl();
        let f = sl.field();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_section(&g, &mut rng, true);
        let mut parts: Vec<(Site, LaurentJet)> = Vec::new();
        for site in g.sites() {
            parts.push((site, s.expand_at(site, 0).unwrap()));
        }
        let remainder = |t: &CycNum| -> LieElem {
            let mut r = s.eval(t).unwrap();
            for (site, jet) in &parts {
                for (p, x) in jet.terms().filter(|(p, _)| *p < 0) {
                    match site {
                        Site::Zero => r = r.sub(&x.scale(&t.pow(p as i64).unwrap())),
                        Site::Infinity => r = r.sub(&x.scale(&t.pow(-p as i64).unwrap())),
                        Site::Marked(i) => {
                            for k in 0..n as i64 {
                                // near ε^k t_i the section is Ad γ^k of its germ at t_i
                                let xi = &(t * &sl.eps(-k)) - g.point(*i);
                                let mut y = x.scale(&xi.pow(p as i64).unwrap());
                                for (idx, c) in y.coords.iter_mut().enumerate() {
                                    let (a, _) = sl.label(idx);
                                    *c = &*c * &sl.eps(k * a as i64);
                                }
                                r = r.sub(&y);
                            }
                        }
                    }
                }
            }
            r
        };
        let r1 = remainder(&f.from_rational(Rational::from_signeds(3, 7)));
        let r2 = remainder(&f.from_rational(Rational::from_signeds(-5, 11)));
        let r3 = remainder(&(f.from_rational(Rational::from_signeds(1, 3)) + sl.eps(1)));
        prop_assert_eq!(&r1, &r2);
        prop_assert_eq!(&r1, &r3);
    }

    #[test]
    fn residues_match_contour_integrals(n in 2usize..=3, seed in any::<u64>()) {
        let g = geom(n, &[1, 2]);
        let sl = g.sl();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_section(&g, &mut rng, false);
        let h = random_section(&g, &mut rng, false);
        let df = f.theta();
        let trace = |x: &[Complex64], y: &[Complex64]| -> Complex64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, xi) in x.iter().enumerate() {
                for (j, yj) in y.iter().enumerate() {
                    let ((a, b), (c, d)) = (sl.label(i), sl.label(j));
                    acc += xi * yj * to_complex(&sl.trace_pair(a, b, c, d));
                }
            }
            acc
        };
        for i in 0..2 {
            let centre = to_complex(g.point(i));
            let m = 512;
            let r = 0.1;
            let mut integral = Complex64::new(0.0, 0.0);
            let mut scale = 0.0f64;
            for k in 0..m {
                let z = Complex64::from_polar(r, 2.0 * PI * k as f64 / m as f64);
                let t = centre + z;
                // (1/2πi) ∮ (df/dt | g) dt with dt = i z dθ
                let val = trace(&eval_complex(&df, t), &eval_complex(&h, t)) / t;
                integral += val * z / m as f64;
                scale = scale.max((val * z).norm());
            }
            let exact = to_complex(&local_residue(&f, &h, Site::Marked(i)).unwrap());
            prop_assert!((integral - exact).norm() <= 1e-13 * (1.0 + scale), "{integral} vs {exact}");
        }
    }

    #[test]
    fn local_residues_are_antisymmetric(n in 2usize..=4, seed in any::<u64>()) {
        let g = geom(n, &[1, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_section(&g, &mut rng, true);
        let h = random_section(&g, &mut rng, true);
        for site in g.sites() {
            let s = local_residue(&f, &h, site).unwrap() + local_residue(&h, &f, site).unwrap();
            prop_assert!(s.is_zero());
        }
        prop_assert!(cocycle_pair(&f, &h, &g.sites(), CocycleNorm::Orbifold).unwrap().is_zero());
    }

    #[test]
    fn fixed_point_modes_follow_the_twist(n in 2usize..=4, seed in any::<u64>()) {
        let g = geom(n, &[2]);
        let sl = g.sl();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_section(&g, &mut rng, true);
        for (site, sign) in [(Site::Zero, 1i32), (Site::Infinity, -1)] {
            let jet = f.expand_at(site, 8).unwrap();
            for (p, x) in jet.terms() {
                for (idx, _) in x.support() {
                    let (a, _) = sl.label(idx);
                    prop_assert_eq!((p - sign * a as i32).rem_euclid(n as i32), 0);
                }
            }
        }
        prop_assert!(f.check_membership(SectionClass::Orb));
    }
}

#[test]
fn simple_pole_residues() {
    for n in 2..=4 {
        let g = geom(n, &[2, 3]);
        let sl = g.sl();
        let f = sl.field();
        for i in 0..2 {
            let ti = g.point(i);
            for (a, b) in sl.labels() {
                let s = Section::trig_basis_element(&g, a, b, i, 1).unwrap();
                let jet = s.expand_at(Site::Marked(i), 0).unwrap();
                let nf = f.from_int(n as i64);
                let want = if a == 0 {
                    &(&(sl.eps(b as i64) - f.one()) * ti) * &nf.inv().unwrap()
                } else {
                    &ti.pow(a as i64).unwrap() * &(&nf * &ti.pow(n as i64 - 1).unwrap()).inv().unwrap()
                };
                assert_eq!(jet.coeff(-1).unwrap(), Some(&sl.basis_elem(a, b).scale(&want)));
                assert_eq!(s.pole_order(Site::Marked(i)), 1);
                let single: BTreeMap<i32, LieElem> = [(-1, sl.basis_elem(a, b))].into();
                let jets: Vec<LaurentJet> = (0..2)
                    .map(|j| {
                        let c = if j == i { single.clone() } else { BTreeMap::new() };
                        LaurentJet::from_coeffs(Site::Marked(j), 2, c).unwrap()
                    })
                    .collect();
                let (sec, _) = decompose_gd(&g, &jets, 2).unwrap();
                assert_eq!(sec, s.scale(&want.inv().unwrap()));
            }
        }
    }
}

#[test]
fn membership_examples() {
    let g = geom(2, &[1]);
    let sl = g.sl();
    let h = Section::h_section(&g, 1, 0).unwrap();
    assert_eq!(h.value_at(Site::Zero).unwrap(), Some(sl.cartan(1)));
    assert_eq!(h.value_at(Site::Infinity).unwrap(), Some(sl.cartan(1).scale(&sl.field().from_int(-1))));
    assert!(h.check_membership(SectionClass::Trig));
    assert!(h.check_membership(SectionClass::Orb));
    assert!(!h.check_membership(SectionClass::Zero));
    let c = Section::constant_cartan(&g, 1).unwrap();
    assert!(c.check_membership(SectionClass::Orb));
    assert!(!c.check_membership(SectionClass::Trig));
    let z = Section::trig_basis_element(&g, 1, 1, 0, 1).unwrap();
    assert!(z.check_membership(SectionClass::Zero));
    let m = Section::orb_monomial(&g, 1, 0, -1).unwrap();
    assert_eq!(m.pole_order(Site::Zero), 1);
    assert_eq!(m.pole_order(Site::Infinity), 0);
    assert!(!m.check_membership(SectionClass::Trig));
}

#[test]
fn monomial_residue_at_origin() {
    for n in 2..=4 {
        let g = geom(n, &[1]);
        let sl = g.sl();
        for (a, b) in sl.labels() {
            let (c, d) = ((n - a) % n, (n - b) % n);
            for m in -1..=1 {
                for m2 in -1..=1 {
                    let (Ok(f), Ok(h)) = (Section::orb_monomial(&g, a, b, m), Section::orb_monomial(&g, c, d, m2)) else {
                        continue;
                    };
                    let e = a as i64 + m as i64 * n as i64;
                    let e2 = c as i64 + m2 as i64 * n as i64;
                    let tr = sl.inner(&sl.j_matrix(a as i64, b as i64), &sl.j_matrix(c as i64, d as i64));
                    let want = if e + e2 == 0 { &tr * &sl.field().from_int(e) } else { sl.field().zero() };
                    assert_eq!(local_residue(&f, &h, Site::Zero).unwrap(), want);
                }
            }
        }
    }
}

#[test]
fn invalid_geometries_are_reported() {
    let sl = SlN::new(2).unwrap();
    let f = sl.field();
    let e = Geometry::new(sl, vec![f.from_int(1), f.from_int(-1)]).unwrap_err();
    assert!(e.to_string().contains("points 1 and 2"), "{e}");
    let e = Geometry::new(sl, vec![f.from_int(0), f.from_int(3)]).unwrap_err();
    assert!(e.to_string().contains("point 1 is 0"), "{e}");
    let g = geom(2, &[1]);
    assert!(Section::orb_monomial(&g, 0, 1, 7).is_err());
    let j1 = LaurentJet::from_coeffs(Site::Marked(0), 2, BTreeMap::new()).unwrap();
    let g2 = geom(2, &[1, 2]);
    let j2 = LaurentJet::from_coeffs(Site::Marked(1), 3, BTreeMap::new()).unwrap();
    assert!(decompose_gd(&g2, &[j1, j2], 2).is_err());
}

#[test]
fn positive_jets_split_trivially() {
    let g = geom(3, &[1, 2]);
    let sl = g.sl();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let jets: Vec<LaurentJet> = (0..2)
            .map(|i| {
                let c: BTreeMap<i32, LieElem> = (0..=3).map(|p| (p, random_lie(&sl, &mut rng))).collect();
                LaurentJet::from_coeffs(Site::Marked(i), 3, c).unwrap()
            })
            .collect();
        let (s, p) = decompose_gd(&g, &jets, 3).unwrap();
        assert!(s.is_zero());
        assert_eq!(p, jets);
    }
}
