//! Conformal coinvariants by constructive rewriting.
//!
//! Every PBW state `x_1 · w` (with `x_1` the smallest letter) is rewritten with
//! a global section whose principal part at the site of `x_1` is exactly
//! `x_1`: an orbifold monomial for letters at `0` or `∞`, and the output of
//! [`decompose_gd`] for letters at marked points. The remaining modes of that
//! section are nonnegative, so the total depth strictly decreases and every
//! state reduces to the generating slice `V` (or `1 ⊗ V ⊗ 1`). Dimensions are
//! then the corank of the reduced relation span.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap as HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use rayon::prelude::*;

use crate::cyclofield::{CycNum, Rational};
use crate::error::{Error, Result};
use crate::liealg::{Representation, SlN, Weight};
use crate::linalg::{to_sparse, RowEchelon, SparseRow};
use crate::modules::{
    Mode, ModVector, PbwOrder, PreparedSection, SiteModule, State, TensorModule, VermaModule, WeylModule,
};
use crate::sections::{decompose_gd, Geometry, LaurentJet, Section, Site};

/// Default bound on rewriting macro-steps.
pub const DEFAULT_FUEL: u64 = 50_000_000;

/// One rewriting step `x_1 · w ↦ -(other modes of s) · w`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionStep {
    pub state: State,
    pub letter: Mode,
    pub site: Site,
    /// Human-readable description of the section used.
    pub section: String,
    pub depth_before: u32,
    /// Largest depth among the produced states.
    pub depth_after: u32,
}

#[derive(Clone, Debug)]
pub struct ReductionTrace {
    pub input: ModVector,
    pub steps: Vec<ReductionStep>,
    pub output: Vec<CycNum>,
    pub fuel: u64,
}

impl ReductionTrace {
    /// Termination witness: every recorded step strictly lowers the depth.
    pub fn depth_decreases(&self) -> bool {
        self.steps.iter().all(|s| s.depth_after < s.depth_before)
    }
}

struct Rewrite {
    section: PreparedSection,
    label: String,
}

/// Memoised reduction of PBW states to the generating slice.
pub struct Reducer<'a> {
    module: &'a TensorModule,
    memo: RwLock<HashMap<State, Arc<Vec<CycNum>>>>,
    rewrites: RwLock<HashMap<Mode, Arc<Rewrite>>>,
    fuel_used: AtomicU64,
    fuel_limit: u64,
}

impl<'a> Reducer<'a> {
    pub fn new(module: &'a TensorModule) -> Self {
        Self::with_fuel(module, DEFAULT_FUEL)
    }

    pub fn with_fuel(module: &'a TensorModule, fuel_limit: u64) -> Self {
        Reducer {
            module,
            memo: RwLock::default(),
            rewrites: RwLock::default(),
            fuel_used: AtomicU64::new(0),
            fuel_limit,
        }
    }

    pub fn module(&self) -> &TensorModule {
        self.module
    }

    pub fn fuel_used(&self) -> u64 {
        self.fuel_used.load(Ordering::Relaxed)
    }

    fn rewrite_for(&self, x: Mode) -> Result<Arc<Rewrite>> {
        if let Some(r) = self.rewrites.read().expect("lock").get(&x) {
            return Ok(Arc::clone(r));
        }
        let geom = self.module.geometry();
        let sl = geom.sl();
        let (a, b) = sl.label(x.label);
        let (section, label) = match x.site {
            Site::Zero => (
                Section::orb_monomial_with_exponent(geom, a, b, x.exp)?,
                format!("J_({a},{b}) t^{}", x.exp),
            ),
            Site::Infinity => (
                Section::orb_monomial_with_exponent(geom, a, b, -x.exp)?,
                format!("J_({a},{b}) t^{}", -x.exp),
            ),
            Site::Marked(i) => {
                let jets = (0..geom.num_points())
                    .map(|j| {
                        let mut c = BTreeMap::new();
                        if j == i {
                            c.insert(x.exp, sl.basis_elem(a, b));
                        }
                        LaurentJet::from_coeffs(Site::Marked(j), 0, c)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let (s, _) = decompose_gd(geom, &jets, 0)?;
                (s, format!("trig section with principal part J_({a},{b}) ξ_{}^{}", i + 1, x.exp))
            }
        };
        let r = Arc::new(Rewrite {
            section: self.module.prepare(&section)?,
            label,
        });
        self.rewrites.write().expect("lock").insert(x, Arc::clone(&r));
        Ok(r)
    }

    fn unit(&self, gen: usize) -> Vec<CycNum> {
        let f = self.module.geometry().field();
        let mut v = vec![f.zero(); self.module.gen_dim()];
        v[gen] = f.one();
        v
    }

    /// One macro-step: the rewritten vector (without the eliminated state).
    fn step(&self, st: &State) -> Result<(ModVector, ReductionStep)> {
        let used = self.fuel_used.fetch_add(1, Ordering::Relaxed) + 1;
        if used > self.fuel_limit {
            return Err(Error::FuelExhausted(format!("rewriting exceeded {} steps", self.fuel_limit)));
        }
        let (x, rest) = st
            .mono
            .split_smallest(self.module.order())
            .expect("step called on a generator");
        let rw = self.rewrite_for(x)?;
        let w = State {
            mono: rest,
            gen: st.gen,
        };
        let f = self.module.geometry().field();
        let mut r = self.module.act_prepared(&rw.section, &ModVector::from_state(w, f.one()))?;
        let lead = r.remove(st);
        if lead.as_ref().is_none_or(|c| !c.is_one()) {
            return Err(Error::InvalidModule(format!(
                "leading coefficient of the rewrite for {st:?} is {lead:?}, expected 1"
            )));
        }
        let depth_after = r.max_depth();
        if !r.is_zero() && depth_after >= st.depth() {
            return Err(Error::InvalidModule(format!(
                "rewrite of a depth-{} state produced depth {depth_after}",
                st.depth()
            )));
        }
        let info = ReductionStep {
            state: st.clone(),
            letter: x,
            site: x.site,
            section: rw.label.clone(),
            depth_before: st.depth(),
            depth_after,
        };
        Ok((r.scale(&f.from_int(-1)), info))
    }

    /// Representative of a state in the generating slice.
    pub fn reduce_state(&self, st: &State) -> Result<Arc<Vec<CycNum>>> {
        if st.mono.is_empty() {
            return Ok(Arc::new(self.unit(st.gen)));
        }
        if let Some(r) = self.memo.read().expect("lock").get(st) {
            return Ok(Arc::clone(r));
        }
        let (r, _) = self.step(st)?;
        let out = Arc::new(self.reduce_combination(&r)?);
        self.memo.write().expect("lock").insert(st.clone(), Arc::clone(&out));
        Ok(out)
    }

    fn reduce_combination(&self, v: &ModVector) -> Result<Vec<CycNum>> {
        let f = self.module.geometry().field();
        let mut out = vec![f.zero(); self.module.gen_dim()];
        for (st, c) in v.terms() {
            let r = self.reduce_state(st)?;
            for (o, x) in out.iter_mut().zip(r.iter()) {
                if !x.is_zero() {
                    *o += &(x * c);
                }
            }
        }
        Ok(out)
    }

    /// Representative of `v` in the generating slice.
    pub fn reduce(&self, v: &ModVector) -> Result<Vec<CycNum>> {
        if v.max_depth() > self.module.max_depth() {
            return Err(Error::FuelExhausted(format!(
                "input depth {} exceeds the truncation {}",
                v.max_depth(),
                self.module.max_depth()
            )));
        }
        self.reduce_combination(v)
    }

    /// Like [`Reducer::reduce`], recording the first macro-step of every input state.
    pub fn reduce_with_trace(&self, v: &ModVector) -> Result<ReductionTrace> {
        let start = self.fuel_used();
        let mut steps = Vec::new();
        for (st, _) in v.terms() {
            if !st.mono.is_empty() {
                steps.push(self.step(st)?.1);
            }
        }
        let output = self.reduce(v)?;
        Ok(ReductionTrace {
            input: v.clone(),
            steps,
            output,
            fuel: self.fuel_used() - start,
        })
    }

    /// Reduces `f · w` for every job, in parallel; order of results matches `jobs`.
    fn reduce_relations(&self, jobs: &[(Arc<PreparedSection>, State)]) -> Result<Vec<Vec<CycNum>>> {
        let one = self.module.geometry().field().one();
        jobs.par_iter()
            .map(|(f, st)| {
                let r = self.module.act_prepared(f, &ModVector::from_state(st.clone(), one.clone()))?;
                self.reduce(&r)
            })
            .collect()
    }
}

/// Result of a coinvariant computation on the generating slice.
#[derive(Clone, Debug)]
pub struct SliceQuotient {
    pub dim: usize,
    /// Rank of the reduced relations inside the slice.
    pub rank: usize,
    pub relations: usize,
    /// Relation window: `pole(s) + depth(w) ≤ window`.
    pub window: u32,
    /// Generator indices forming a basis of the quotient.
    pub basis: Vec<usize>,
    pub fuel: u64,
}

fn quotient_from(echelon: &RowEchelon, gen_dim: usize, relations: usize, window: u32, fuel: u64) -> SliceQuotient {
    let pivots = echelon.pivots();
    let basis = (0..gen_dim).filter(|g| !pivots.contains(g)).collect();
    SliceQuotient {
        dim: gen_dim - echelon.rank(),
        rank: echelon.rank(),
        relations,
        window,
        basis,
        fuel,
    }
}

/// States of depth at most `d`.
fn states_up_to(module: &TensorModule, d: u32) -> Vec<State> {
    (0..=d).flat_map(|k| module.states_of_depth(k)).collect()
}

fn pair_jobs(
    module: &TensorModule,
    sections: &[(Arc<PreparedSection>, u32)],
    window: u32,
) -> Vec<(Arc<PreparedSection>, State)> {
    let by_depth: Vec<Vec<State>> = (0..=window).map(|k| module.states_of_depth(k)).collect();
    let mut jobs = Vec::new();
    for (s, pole) in sections {
        if *pole > window {
            continue;
        }
        for states in &by_depth[..=(window - pole) as usize] {
            for st in states {
                jobs.push((Arc::clone(s), st.clone()));
            }
        }
    }
    jobs
}

/// Tensor product of Weyl modules at the marked points.
pub fn weyl_tensor(geom: &Arc<Geometry>, reps: &[Representation], level: &Rational, depth: u32) -> Result<TensorModule> {
    if reps.len() != geom.num_points() {
        return Err(Error::InvalidModule(format!(
            "{} representations for {} marked points",
            reps.len(),
            geom.num_points()
        )));
    }
    let modules = reps
        .iter()
        .enumerate()
        .map(|(i, r)| {
            (
                Site::Marked(i),
                SiteModule::Weyl(WeylModule {
                    rep: r.clone(),
                    level: level.clone(),
                }),
            )
        })
        .collect();
    TensorModule::new(geom, modules, depth)
}

/// `M_{λ0} ⊗ M(V_1) ⊗ … ⊗ M(V_L) ⊗ M_{λ∞}`, with the given (already twisted) weights.
pub fn orbifold_triple(
    geom: &Arc<Geometry>,
    reps: &[Representation],
    level: &Rational,
    weight_zero: &Weight,
    weight_inf: &Weight,
    depth: u32,
) -> Result<TensorModule> {
    let mut modules: Vec<(Site, SiteModule)> = reps
        .iter()
        .enumerate()
        .map(|(i, r)| {
            (
                Site::Marked(i),
                SiteModule::Weyl(WeylModule {
                    rep: r.clone(),
                    level: level.clone(),
                }),
            )
        })
        .collect();
    for (site, w) in [(Site::Zero, weight_zero), (Site::Infinity, weight_inf)] {
        modules.push((
            site,
            SiteModule::Verma(VermaModule {
                site,
                weight: w.clone(),
                level: level.clone(),
            }),
        ));
    }
    TensorModule::new(geom, modules, depth)
}

/// Representative of `v ∈ M(V)` in `V` modulo `g_out^trig · M(V)`.
pub fn reduce_trig(module: &TensorModule, v: &ModVector) -> Result<ReductionTrace> {
    if module.has_fixed_point_modules() {
        return Err(Error::InvalidModule("reduce_trig needs Weyl modules at marked points only".into()));
    }
    Reducer::new(module).reduce_with_trace(v)
}

/// Representative of `v` in `1 ⊗ V ⊗ 1` modulo `g_out^orb`-exact terms that
/// remove negative modes (the constant-section relations are not applied).
pub fn reduce_orb(module: &TensorModule, v: &ModVector) -> Result<ReductionTrace> {
    if !module.has_fixed_point_modules() {
        return Err(Error::InvalidModule("reduce_orb needs Verma modules at 0 and ∞".into()));
    }
    Reducer::new(module).reduce_with_trace(v)
}

/// Trig basis sections `J_{ab}(t)` differentiated up to pole order `max_pole`.
fn trig_sections(module: &TensorModule, max_pole: u32) -> Result<Vec<(Arc<PreparedSection>, u32)>> {
    let geom = module.geometry();
    let sl = geom.sl();
    let mut out = Vec::new();
    for i in 0..geom.num_points() {
        for (a, b) in sl.labels() {
            for n in 1..=max_pole {
                let s = Section::trig_basis_element(geom, a, b, i, n)?;
                out.push((Arc::new(module.prepare(&s)?), n));
            }
        }
    }
    Ok(out)
}

/// Orbifold monomials `J_{ab} t^e` with `|e| ≤ max_pole`, constants included.
fn orb_monomials(module: &TensorModule, max_pole: u32) -> Result<Vec<(Arc<PreparedSection>, u32)>> {
    let geom = module.geometry();
    let sl = geom.sl();
    let mut out = Vec::new();
    for (a, b) in sl.labels() {
        for e in -(max_pole as i32)..=max_pole as i32 {
            if (e - a as i32).rem_euclid(sl.n() as i32) != 0 {
                continue;
            }
            let s = Section::orb_monomial_with_exponent(geom, a, b, e)?;
            out.push((Arc::new(module.prepare(&s)?), e.unsigned_abs()));
        }
    }
    Ok(out)
}

/// `CC_trig(M(V))` on the generating slice: `dim V` minus the rank of all
/// reduced relations `s · w` with `pole(s) + depth(w) ≤ window`.
pub fn cc_trig(module: &TensorModule) -> Result<SliceQuotient> {
    if module.has_fixed_point_modules() {
        return Err(Error::InvalidModule("cc_trig needs Weyl modules at marked points only".into()));
    }
    let window = module.max_depth();
    let reducer = Reducer::new(module);
    let jobs = pair_jobs(module, &trig_sections(module, window)?, window);
    let rows = reducer.reduce_relations(&jobs)?;
    let mut ech = RowEchelon::new(module.geometry().field());
    for r in &rows {
        ech.insert(to_sparse(r));
    }
    Ok(quotient_from(&ech, module.gen_dim(), jobs.len(), window, reducer.fuel_used()))
}

/// Raw `CC_orb` and its quotient by `ρ_{1,β}(h)` for one pair of weights.
#[derive(Clone, Debug)]
pub struct OrbComponent {
    pub lambda: Weight,
    pub mu: Weight,
    pub raw: SliceQuotient,
    pub quotient: SliceQuotient,
}

/// `CC_orb(M_{λ̃} ⊗ M(V) ⊗ M_{μ̃'})` and its quotient by `ρ_{1,β}(h)`.
///
/// With `unmatched` set, `μ̃'` is shifted off the twisted weight lattice image
/// (negative control).
#[allow(clippy::too_many_arguments)]
pub fn cc_orb_component_with(
    geom: &Arc<Geometry>,
    reps: &[Representation],
    level: &Rational,
    lambda: &Weight,
    mu: &Weight,
    depth: u32,
    order: PbwOrder,
    unmatched: Option<&Weight>,
) -> Result<OrbComponent> {
    let sl = geom.sl();
    let (lt, _) = sl.tilde_weights(lambda)?;
    let (_, mut mt) = sl.tilde_weights(mu)?;
    if let Some(shift) = unmatched {
        mt = mt.add(shift);
    }
    let module = orbifold_triple(geom, reps, level, &lt, &mt, depth)?.with_order(order);
    let reducer = Reducer::new(&module);
    let window = depth;
    let mut sections = orb_monomials(&module, window)?;
    sections.extend(trig_sections(&module, window)?);
    let jobs = pair_jobs(&module, &sections, window);
    let rows = reducer.reduce_relations(&jobs)?;
    let field = geom.field();
    let mut ech = RowEchelon::new(field);
    for r in &rows {
        ech.insert(to_sparse(r));
    }
    let raw = quotient_from(&ech, module.gen_dim(), jobs.len(), window, reducer.fuel_used());
    // right h-action through ρ_{1,β}, on every state of the window
    let states = states_up_to(&module, window);
    let rho_rows: Vec<Vec<CycNum>> = states
        .par_iter()
        .flat_map_iter(|st| (1..sl.n()).map(move |b| (st.clone(), b)))
        .map(|(st, b)| reducer.reduce(&module.rho_1_beta(&st, b)?))
        .collect::<Result<_>>()?;
    for r in &rho_rows {
        ech.insert(to_sparse(r));
    }
    let quotient = quotient_from(
        &ech,
        module.gen_dim(),
        jobs.len() + rho_rows.len(),
        window,
        reducer.fuel_used(),
    );
    Ok(OrbComponent {
        lambda: lambda.clone(),
        mu: mu.clone(),
        raw,
        quotient,
    })
}

pub fn cc_orb_component(
    geom: &Arc<Geometry>,
    reps: &[Representation],
    level: &Rational,
    lambda: &Weight,
    mu: &Weight,
    depth: u32,
) -> Result<OrbComponent> {
    cc_orb_component_with(geom, reps, level, lambda, mu, depth, PbwOrder::default(), None)
}

/// Representation of `V_1 ⊗ … ⊗ V_L` as a single `g`-module.
pub fn total_representation(sl: &SlN, reps: &[Representation]) -> Representation {
    let mut it = reps.iter();
    match it.next() {
        None => Representation::trivial(*sl),
        Some(first) => it.fold(first.clone(), |acc, r| acc.tensor(r)),
    }
}

#[derive(Clone, Debug)]
pub struct ComponentEntry {
    pub weight: Weight,
    pub dim: usize,
    pub raw_dim: usize,
    pub multiplicity: usize,
}

/// Comparison of `dim CC_trig` with the diagonal orbifold components.
#[derive(Clone, Debug)]
pub struct CoinvReport {
    pub dim_trig: usize,
    pub trig: SliceQuotient,
    pub components: Vec<ComponentEntry>,
    /// `Σ component dims = dim CC_trig`.
    pub verdict: bool,
    /// Each component equals the weight multiplicity in `V`.
    pub multiplicities_match: bool,
    pub fuel: u64,
}

/// Factorization check: `CC_trig(M(V))` against `⊕_λ CC_orb(M_{λ̃} ⊗ M(V) ⊗ M_{λ̃'})`.
pub fn factorization_report(
    geom: &Arc<Geometry>,
    reps: &[Representation],
    level: &Rational,
    depth: u32,
) -> Result<CoinvReport> {
    let sl = geom.sl();
    let trig_module = weyl_tensor(geom, reps, level, depth)?;
    let trig = cc_trig(&trig_module)?;
    let spaces = total_representation(&sl, reps).weight_decompose()?;
    let results: Vec<OrbComponent> = spaces
        .par_iter()
        .map(|ws| cc_orb_component(geom, reps, level, &ws.weight, &ws.weight, depth))
        .collect::<Result<_>>()?;
    let components: Vec<ComponentEntry> = spaces
        .iter()
        .zip(&results)
        .map(|(ws, c)| ComponentEntry {
            weight: ws.weight.clone(),
            dim: c.quotient.dim,
            raw_dim: c.raw.dim,
            multiplicity: ws.multiplicity,
        })
        .collect();
    let total: usize = components.iter().map(|c| c.dim).sum();
    let fuel = trig.fuel + results.iter().map(|c| c.quotient.fuel).sum::<u64>();
    Ok(CoinvReport {
        dim_trig: trig.dim,
        verdict: total == trig.dim,
        multiplicities_match: components.iter().all(|c| c.dim == c.multiplicity),
        components,
        trig,
        fuel,
    })
}

/// The block decomposition of the universal Verma quotient computation.
#[derive(Clone, Debug)]
pub struct SmokeReport {
    pub dim_trig: usize,
    pub weights: Vec<Weight>,
    /// `blocks[i][j]`: quotient dimension for `(λ_i, μ_j)`.
    pub blocks: Vec<Vec<usize>>,
    pub raw_blocks: Vec<Vec<usize>>,
    pub total: usize,
    pub off_diagonal_killed: bool,
    pub verdict: bool,
}

/// Truncated check of the general factorization with `⊕_{λ ∈ wt(V)} M_{λ̃}` at
/// `0` and `⊕ M_{μ̃'}` at `∞`: the `ρ_{1,β}(h)`-quotient has total dimension
/// `dim CC_trig` and vanishes off the diagonal. `unmatched` shifts the weight
/// at `∞` (negative control).
pub fn general_factorization_smoke(
    geom: &Arc<Geometry>,
    reps: &[Representation],
    level: &Rational,
    depth: u32,
    unmatched: Option<&Weight>,
) -> Result<SmokeReport> {
    let sl = geom.sl();
    let trig = cc_trig(&weyl_tensor(geom, reps, level, depth)?)?;
    let weights: Vec<Weight> = total_representation(&sl, reps)
        .weight_decompose()?
        .into_iter()
        .map(|w| w.weight)
        .collect();
    let pairs: Vec<(usize, usize)> = (0..weights.len())
        .flat_map(|i| (0..weights.len()).map(move |j| (i, j)))
        .collect();
    let comps: Vec<OrbComponent> = pairs
        .par_iter()
        .map(|&(i, j)| {
            cc_orb_component_with(
                geom,
                reps,
                level,
                &weights[i],
                &weights[j],
                depth,
                PbwOrder::default(),
                unmatched,
            )
        })
        .collect::<Result<_>>()?;
    let k = weights.len();
    let mut blocks = vec![vec![0; k]; k];
    let mut raw_blocks = vec![vec![0; k]; k];
    for (&(i, j), c) in pairs.iter().zip(&comps) {
        blocks[i][j] = c.quotient.dim;
        raw_blocks[i][j] = c.raw.dim;
    }
    let total = blocks.iter().flatten().sum();
    let off_diagonal_killed = (0..k).all(|i| (0..k).all(|j| i == j || blocks[i][j] == 0));
    Ok(SmokeReport {
        dim_trig: trig.dim,
        weights,
        verdict: off_diagonal_killed && total == trig.dim,
        blocks,
        raw_blocks,
        total,
        off_diagonal_killed,
    })
}

/// Direct elimination over all states of depth `≤ window`, without the
/// rewriting engine: the quotient of their span by every relation `s · w`
/// that fits in the window. Used as a cross-check on small windows.
pub fn brute_force_quotient_dim(module: &TensorModule, window: u32) -> Result<usize> {
    let states = states_up_to(module, window);
    // deeper states first so that pivots prefer them
    let mut order: Vec<usize> = (0..states.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(states[i].depth()));
    let mut column: HashMap<State, usize> = HashMap::default();
    for (col, &i) in order.iter().enumerate() {
        column.insert(states[i].clone(), col);
    }
    let mut sections = trig_sections(module, window)?;
    if module.has_fixed_point_modules() {
        sections.extend(orb_monomials(module, window)?);
    }
    let jobs = pair_jobs(module, &sections, window);
    let one = module.geometry().field().one();
    let rows: Vec<SparseRow> = jobs
        .par_iter()
        .map(|(f, st)| {
            let r = module.act_prepared(f, &ModVector::from_state(st.clone(), one.clone()))?;
            let mut row = SparseRow::new();
            for (s2, c) in r.terms() {
                let col = column.get(s2).ok_or_else(|| {
                    Error::FuelExhausted(format!("relation left the depth-{window} window"))
                })?;
                row.insert(*col, c.clone());
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut ech = RowEchelon::new(module.geometry().field());
    for r in rows {
        ech.insert(r);
    }
    Ok(states.len() - ech.rank())
}
