//! Weyl modules at marked points, twisted Verma modules at `0` and `∞`, and
//! the PBW action engine for local modes with central terms.
//!
//! A vector of the tensor product is a combination of [`State`]s: a PBW
//! monomial of strictly negative modes (letters at different sites commute,
//! so the monomial is stored site by site) applied to a basis vector of the
//! generating space `V_1 ⊗ … ⊗ V_L` (Verma slots contribute their highest
//! weight vector).

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rustc_hash::FxHashMap as HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};


use crate::cyclofield::{CycNum, Rational};
use crate::error::{Error, Result};
use crate::liealg::{LieElem, Representation, SlN, Weight};
use crate::sections::{Geometry, LaurentJet, Section, SectionClass, Site};

/// `J_{label} ⊗ ξ^{exp}` at a site. At `0` the exponent of `t` satisfies
/// `exp ≡ a (mod N)`; at `∞` the exponent of `u = 1/t` satisfies `exp ≡ -a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Mode {
    pub site: Site,
    pub label: usize,
    pub exp: i32,
}

impl Mode {
    pub fn new(sl: &SlN, site: Site, a: usize, b: usize, exp: i32) -> Result<Mode> {
        let n = sl.n() as i32;
        if a >= sl.n() || b >= sl.n() || (a, b) == (0, 0) {
            return Err(Error::InvalidInput(format!("({a},{b}) is not an sl_{n} label")));
        }
        let ok = match site {
            Site::Zero => (exp - a as i32).rem_euclid(n) == 0,
            Site::Infinity => (exp + a as i32).rem_euclid(n) == 0,
            Site::Marked(_) => true,
        };
        if !ok {
            return Err(Error::InvalidInput(format!(
                "mode J_({a},{b}) ξ^{exp} violates the twisted constraint at {site}"
            )));
        }
        Ok(Mode {
            site,
            label: sl.index(a, b),
            exp,
        })
    }

    pub fn depth(&self) -> u32 {
        (-self.exp).max(0) as u32
    }

    /// Whether `(site, label, exp)` is allowed by the twisted mode constraint.
    pub fn admissible(sl: &SlN, site: Site, label: usize, exp: i32) -> bool {
        let (a, _) = sl.label(label);
        let n = sl.n() as i32;
        match site {
            Site::Zero => (exp - a as i32).rem_euclid(n) == 0,
            Site::Infinity => (exp + a as i32).rem_euclid(n) == 0,
            Site::Marked(_) => true,
        }
    }
}

impl Ord for Mode {
    /// Storage order: site, then depth, then label.
    fn cmp(&self, other: &Self) -> Ordering {
        (self.site, -self.exp, self.label).cmp(&(other.site, -other.exp, other.label))
    }
}

impl PartialOrd for Mode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Admissible total orders on letters, used to pick the letter eliminated first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PbwOrder {
    /// Depth, then site (`0 < Q_1 < … < Q_L < ∞`), then label.
    #[default]
    DepthMajor,
    /// Site, then depth, then label.
    SiteMajor,
}

impl PbwOrder {
    pub fn key(self, m: &Mode) -> (u32, u32, usize) {
        match self {
            PbwOrder::DepthMajor => (m.depth(), site_rank(m.site), m.label),
            PbwOrder::SiteMajor => (site_rank(m.site), m.depth(), m.label),
        }
    }
}

fn site_rank(s: Site) -> u32 {
    match s {
        Site::Zero => 0,
        Site::Marked(i) => 1 + i as u32,
        Site::Infinity => u32::MAX,
    }
}

/// A sorted list of negative modes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(Vec<Mode>);

impl Monomial {
    pub fn new(mut letters: Vec<Mode>) -> Result<Monomial> {
        if let Some(m) = letters.iter().find(|m| m.exp >= 0) {
            return Err(Error::InvalidInput(format!("stored letters must be negative modes, got exp {}", m.exp)));
        }
        letters.sort();
        Ok(Monomial(letters))
    }

    pub fn one() -> Monomial {
        Monomial(Vec::new())
    }

    pub fn letters(&self) -> &[Mode] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn depth(&self) -> u32 {
        self.0.iter().map(Mode::depth).sum()
    }

    fn block_range(&self, site: Site) -> std::ops::Range<usize> {
        let start = self.0.partition_point(|m| m.site < site);
        let end = self.0.partition_point(|m| m.site <= site);
        start..end
    }

    pub fn block(&self, site: Site) -> &[Mode] {
        &self.0[self.block_range(site)]
    }

    pub fn site_depth(&self, site: Site) -> u32 {
        self.block(site).iter().map(Mode::depth).sum()
    }

    fn with_block(&self, site: Site, block: &[Mode]) -> Monomial {
        let r = self.block_range(site);
        let mut v = Vec::with_capacity(self.0.len() - r.len() + block.len());
        v.extend_from_slice(&self.0[..r.start]);
        v.extend_from_slice(block);
        v.extend_from_slice(&self.0[r.end..]);
        Monomial(v)
    }

    /// The smallest letter under `order` together with the remaining monomial.
    pub fn split_smallest(&self, order: PbwOrder) -> Option<(Mode, Monomial)> {
        let pos = (0..self.0.len()).min_by_key(|&i| order.key(&self.0[i]))?;
        let mut rest = self.0.clone();
        let x = rest.remove(pos);
        Some((x, Monomial(rest)))
    }
}

/// A PBW monomial applied to a basis vector of the generating space.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    pub mono: Monomial,
    pub gen: usize,
}

impl State {
    pub fn generator(gen: usize) -> State {
        State {
            mono: Monomial::one(),
            gen,
        }
    }

    pub fn depth(&self) -> u32 {
        self.mono.depth()
    }
}

/// Finite linear combination of [`State`]s.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ModVector {
    terms: BTreeMap<State, CycNum>,
}

impl ModVector {
    pub fn zero() -> ModVector {
        ModVector::default()
    }

    pub fn from_state(st: State, c: CycNum) -> ModVector {
        let mut v = ModVector::zero();
        v.add_term(st, c);
        v
    }

    pub fn add_term(&mut self, st: State, c: CycNum) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&st) {
            Some(x) => {
                *x += &c;
                if x.is_zero() {
                    self.terms.remove(&st);
                }
            }
            None => {
                self.terms.insert(st, c);
            }
        }
    }

    pub fn add_scaled(&mut self, other: &ModVector, c: &CycNum) {
        if c.is_zero() {
            return;
        }
        for (st, x) in &other.terms {
            self.add_term(st.clone(), x * c);
        }
    }

    pub fn scale(&self, c: &CycNum) -> ModVector {
        let mut v = ModVector::zero();
        v.add_scaled(self, c);
        v
    }

    pub fn terms(&self) -> impl Iterator<Item = (&State, &CycNum)> {
        self.terms.iter()
    }

    pub fn coeff(&self, st: &State) -> Option<&CycNum> {
        self.terms.get(st)
    }

    pub fn remove(&mut self, st: &State) -> Option<CycNum> {
        self.terms.remove(st)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_depth(&self) -> u32 {
        self.terms.keys().map(State::depth).max().unwrap_or(0)
    }
}

impl fmt::Display for ModVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(st, c)| {
                let letters: Vec<String> = st
                    .mono
                    .letters()
                    .iter()
                    .map(|m| format!("J{}[{}]^{}", m.label, m.site, m.exp))
                    .collect();
                format!("({c}) {} |{}>", letters.join(" "), st.gen)
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// `M(V_i)`: induced from `V_i` with `ξ^{≥1}` acting by zero and `ξ^0` through `V_i`.
#[derive(Clone, Debug)]
pub struct WeylModule {
    pub rep: Representation,
    pub level: Rational,
}

/// `M_λ` at `0` or `∞`: positive modes kill `1_λ`, `H · 1_λ = λ(H) 1_λ`.
#[derive(Clone, Debug)]
pub struct VermaModule {
    pub site: Site,
    pub weight: Weight,
    pub level: Rational,
}

/// `⊕_{λ ∈ S} M_{λ̃}` at `0` (or `⊕ M_{λ̃'}` at `∞`), the finite quotient of the universal Verma module.
#[derive(Clone, Debug)]
pub struct UniversalVermaQuot {
    pub site: Site,
    pub weights: Vec<Weight>,
    pub level: Rational,
    twisted: Vec<Weight>,
}

impl UniversalVermaQuot {
    pub fn new(sl: &SlN, site: Site, weights: Vec<Weight>, level: Rational) -> Result<Self> {
        for i in 0..weights.len() {
            if weights[..i].contains(&weights[i]) {
                return Err(Error::InvalidModule(format!("weight {} listed twice", weights[i])));
            }
        }
        let twisted = weights
            .iter()
            .map(|w| {
                let (t, tp) = sl.tilde_weights(w)?;
                Ok(match site {
                    Site::Zero => t,
                    Site::Infinity => tp,
                    Site::Marked(_) => {
                        return Err(Error::InvalidModule("universal Verma quotients live at 0 or ∞".into()))
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(UniversalVermaQuot {
            site,
            weights,
            level,
            twisted,
        })
    }

    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    /// The Verma summands `M_{λ̃}` (resp. `M_{λ̃'}`).
    pub fn components(&self) -> Vec<VermaModule> {
        self.twisted
            .iter()
            .map(|w| VermaModule {
                site: self.site,
                weight: w.clone(),
                level: self.level.clone(),
            })
            .collect()
    }

    /// Right `h`-eigenvalues per component, in the order of `weights`.
    pub fn right_h_eigenvalues(&self) -> &[Weight] {
        &self.twisted
    }
}

#[derive(Clone, Debug)]
pub enum SiteModule {
    Weyl(WeylModule),
    Verma(VermaModule),
}

impl SiteModule {
    fn level(&self) -> &Rational {
        match self {
            SiteModule::Weyl(w) => &w.level,
            SiteModule::Verma(v) => &v.level,
        }
    }

    fn dim(&self) -> usize {
        match self {
            SiteModule::Weyl(w) => w.rep.dim(),
            SiteModule::Verma(_) => 1,
        }
    }
}

#[derive(Debug)]
struct Slot {
    site: Site,
    module: SiteModule,
    stride: usize,
    dim: usize,
    /// `k` at marked points, `k/N` at `0` and `∞`.
    central: CycNum,
}

type Block = Vec<Mode>;
type InsertMemo = RwLock<HashMap<(Mode, Block), Arc<Vec<(Block, CycNum)>>>>;
type ActMemo = RwLock<HashMap<(Mode, Block, usize), Arc<Vec<(Block, usize, CycNum)>>>>;

/// Tensor product of modules at a set of sites, with a PBW action engine.
#[derive(Debug)]
pub struct TensorModule {
    geom: Arc<Geometry>,
    slots: Vec<Slot>,
    gen_dim: usize,
    max_depth: u32,
    order: PbwOrder,
    brackets: Vec<Vec<Option<(CycNum, usize)>>>,
    traces: Vec<Vec<CycNum>>,
    insert_memo: InsertMemo,
    act_memo: ActMemo,
}

impl TensorModule {
    /// `modules` pairs sites with modules; every marked point must carry a Weyl
    /// module, and Verma modules may only sit at `0` or `∞`.
    pub fn new(geom: &Arc<Geometry>, mut modules: Vec<(Site, SiteModule)>, max_depth: u32) -> Result<TensorModule> {
        let sl = geom.sl();
        modules.sort_by_key(|(s, _)| *s);
        let mut problems = Vec::new();
        for w in modules.windows(2) {
            if w[0].0 == w[1].0 {
                problems.push(format!("two modules at {}", w[0].0));
            }
        }
        for i in 0..geom.num_points() {
            if !modules.iter().any(|(s, _)| *s == Site::Marked(i)) {
                problems.push(format!("marked point {} has no module", i + 1));
            }
        }
        for (s, m) in &modules {
            match (s, m) {
                (Site::Marked(i), _) if *i >= geom.num_points() => problems.push(format!("no marked point {s}")),
                (Site::Marked(_), SiteModule::Verma(_)) => problems.push(format!("Verma module at marked site {s}")),
                (Site::Zero | Site::Infinity, SiteModule::Weyl(_)) => problems.push(format!("Weyl module at {s}")),
                (_, SiteModule::Weyl(w)) if w.rep.sl() != sl => problems.push(format!("representation at {s} is not over sl_{}", sl.n())),
                (_, SiteModule::Verma(v)) if v.weight.values.len() != sl.n() - 1 => {
                    problems.push(format!("weight at {s} has wrong length"))
                }
                _ => {}
            }
        }
        if let Some((_, first)) = modules.first() {
            if modules.iter().any(|(_, m)| m.level() != first.level()) {
                problems.push("all modules must share one level".into());
            }
        }
        if max_depth > geom.pole_limit() {
            problems.push(format!(
                "depth {max_depth} exceeds the configured pole limit {}",
                geom.pole_limit()
            ));
        }
        if !problems.is_empty() {
            return Err(Error::InvalidModule(problems.join("; ")));
        }
        let f = geom.field();
        let inv_n = f.from_rational(Rational::from_signeds(1, sl.n() as i64));
        let mut stride = 1;
        let mut slots = Vec::new();
        for (site, module) in modules {
            let dim = module.dim();
            let level = f.from_rational(module.level().clone());
            let central = match site {
                Site::Marked(_) => level,
                _ => &level * &inv_n,
            };
            slots.push(Slot {
                site,
                module,
                stride,
                dim,
                central,
            });
            stride *= dim;
        }
        let d = sl.dim();
        let brackets = (0..d)
            .map(|i| {
                let (a, b) = sl.label(i);
                (0..d)
                    .map(|j| {
                        let (c, e) = sl.label(j);
                        sl.bracket_basis(a, b, c, e).map(|(k, (x, y))| (k, sl.index(x, y)))
                    })
                    .collect()
            })
            .collect();
        let traces = (0..d)
            .map(|i| {
                let (a, b) = sl.label(i);
                (0..d)
                    .map(|j| {
                        let (c, e) = sl.label(j);
                        sl.trace_pair(a, b, c, e)
                    })
                    .collect()
            })
            .collect();
        Ok(TensorModule {
            geom: Arc::clone(geom),
            slots,
            gen_dim: stride,
            max_depth,
            order: PbwOrder::default(),
            brackets,
            traces,
            insert_memo: RwLock::default(),
            act_memo: RwLock::default(),
        })
    }

    pub fn with_order(mut self, order: PbwOrder) -> Self {
        self.order = order;
        self
    }

    pub fn order(&self) -> PbwOrder {
        self.order
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geom
    }

    pub fn sl(&self) -> SlN {
        self.geom.sl()
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    /// Dimension of the generating space (product of the Weyl factors).
    pub fn gen_dim(&self) -> usize {
        self.gen_dim
    }

    pub fn sites(&self) -> Vec<Site> {
        self.slots.iter().map(|s| s.site).collect()
    }

    pub fn has_fixed_point_modules(&self) -> bool {
        self.slots.iter().any(|s| !matches!(s.site, Site::Marked(_)))
    }

    /// Section class acting on this tensor product.
    pub fn acting_class(&self) -> SectionClass {
        if self.has_fixed_point_modules() {
            SectionClass::Orb
        } else {
            SectionClass::Trig
        }
    }

    fn slot(&self, site: Site) -> Result<&Slot> {
        self.slots
            .iter()
            .find(|s| s.site == site)
            .ok_or_else(|| Error::InvalidModule(format!("no module at {site}")))
    }

    /// Per-slot factor indices of a generator index.
    pub fn gen_factors(&self, gen: usize) -> Vec<usize> {
        self.slots.iter().map(|s| (gen / s.stride) % s.dim).collect()
    }

    /// Letters of a given depth available at a site.
    pub fn letters(&self, site: Site, depth: u32) -> Vec<Mode> {
        let sl = self.sl();
        (0..sl.dim())
            .filter(|&l| Mode::admissible(&sl, site, l, -(depth as i32)))
            .map(|label| Mode {
                site,
                label,
                exp: -(depth as i32),
            })
            .collect()
    }

    /// All PBW monomials of total depth exactly `d`.
    pub fn monomials_of_depth(&self, d: u32) -> Vec<Monomial> {
        let mut alphabet: Vec<Mode> = Vec::new();
        for s in &self.slots {
            for k in 1..=d {
                alphabet.extend(self.letters(s.site, k));
            }
        }
        alphabet.sort();
        let mut out = Vec::new();
        let mut cur = Vec::new();
        fn rec(alpha: &[Mode], start: usize, left: u32, cur: &mut Vec<Mode>, out: &mut Vec<Monomial>) {
            if left == 0 {
                out.push(Monomial(cur.clone()));
                return;
            }
            for i in start..alpha.len() {
                let m = alpha[i];
                if m.depth() <= left {
                    cur.push(m);
                    rec(alpha, i, left - m.depth(), cur, out);
                    cur.pop();
                }
            }
        }
        rec(&alphabet, 0, d, &mut cur, &mut out);
        out.sort();
        out
    }

    /// All states of total depth exactly `d`.
    pub fn states_of_depth(&self, d: u32) -> Vec<State> {
        let monos = self.monomials_of_depth(d);
        let mut out = Vec::with_capacity(monos.len() * self.gen_dim);
        for m in monos {
            for g in 0..self.gen_dim {
                out.push(State { mono: m.clone(), gen: g });
            }
        }
        out
    }

    fn bracket_label(&self, x: usize, y: usize) -> Option<&(CycNum, usize)> {
        self.brackets[x][y].as_ref()
    }

    /// `y · block` for a negative letter `y`, in normal form.
    fn insert_block(&self, y: Mode, block: &[Mode]) -> Arc<Vec<(Block, CycNum)>> {
        if block.is_empty() || y <= block[0] {
            let mut b = Vec::with_capacity(block.len() + 1);
            b.push(y);
            b.extend_from_slice(block);
            return Arc::new(vec![(b, self.geom.field().one())]);
        }
        let key = (y, block.to_vec());
        if let Some(r) = self.insert_memo.read().expect("memo lock").get(&key) {
            return Arc::clone(r);
        }
        let x1 = block[0];
        let rest = &block[1..];
        let mut acc: BTreeMap<Block, CycNum> = BTreeMap::new();
        // y x1 rest = x1 (y rest) + [y, x1] rest; every letter of y·rest is ≥ x1
        for (b, c) in self.insert_block(y, rest).iter() {
            let mut nb = Vec::with_capacity(b.len() + 1);
            nb.push(x1);
            nb.extend_from_slice(b);
            add_into(&mut acc, nb, c.clone());
        }
        if let Some((k, z)) = self.bracket_label(y.label, x1.label) {
            let z = Mode {
                site: y.site,
                label: *z,
                exp: y.exp + x1.exp,
            };
            for (b, c) in self.insert_block(z, rest).iter() {
                add_into(&mut acc, b.clone(), c * k);
            }
        }
        let r = Arc::new(acc.into_iter().collect::<Vec<_>>());
        self.insert_memo.write().expect("memo lock").insert(key, Arc::clone(&r));
        r
    }

    /// `m · (block ⊗ factor)` for a mode with `exp ≥ 0`.
    fn act_block(&self, slot: &Slot, m: Mode, block: &[Mode], factor: usize) -> Arc<Vec<(Block, usize, CycNum)>> {
        let block_depth: u32 = block.iter().map(Mode::depth).sum();
        if m.exp as u32 > block_depth {
            return Arc::new(Vec::new());
        }
        if block.is_empty() {
            return Arc::new(self.act_generator(slot, m, factor));
        }
        let key = (m, block.to_vec(), factor);
        if let Some(r) = self.act_memo.read().expect("memo lock").get(&key) {
            return Arc::clone(r);
        }
        let x1 = block[0];
        let rest = &block[1..];
        let mut acc: BTreeMap<(Block, usize), CycNum> = BTreeMap::new();
        // m x1 rest = x1 (m rest) + [m, x1] rest + central
        for (b, f, c) in self.act_block(slot, m, rest, factor).iter() {
            for (b2, c2) in self.insert_block(x1, b).iter() {
                add_into(&mut acc, (b2.clone(), *f), c * c2);
            }
        }
        if let Some((k, z)) = self.bracket_label(m.label, x1.label) {
            let z = Mode {
                site: m.site,
                label: *z,
                exp: m.exp + x1.exp,
            };
            if z.exp < 0 {
                for (b, c) in self.insert_block(z, rest).iter() {
                    add_into(&mut acc, (b.clone(), factor), c * k);
                }
            } else {
                for (b, f, c) in self.act_block(slot, z, rest, factor).iter() {
                    add_into(&mut acc, (b.clone(), *f), c * k);
                }
            }
        }
        if m.exp + x1.exp == 0 {
            let t = &self.traces[m.label][x1.label];
            if !t.is_zero() {
                let v = &(t * &slot.central) * &self.geom.field().from_int(m.exp as i64);
                add_into(&mut acc, (rest.to_vec(), factor), v);
            }
        }
        let r = Arc::new(acc.into_iter().map(|((b, f), c)| (b, f, c)).collect::<Vec<_>>());
        self.act_memo.write().expect("memo lock").insert(key, Arc::clone(&r));
        r
    }

    fn act_generator(&self, slot: &Slot, m: Mode, factor: usize) -> Vec<(Block, usize, CycNum)> {
        if m.exp > 0 {
            return Vec::new();
        }
        let sl = self.sl();
        match &slot.module {
            SiteModule::Weyl(w) => {
                let mat = w.rep.matrix_by_index(m.label);
                (0..slot.dim)
                    .filter(|&r| !mat[(r, factor)].is_zero())
                    .map(|r| (Vec::new(), r, mat[(r, factor)].clone()))
                    .collect()
            }
            SiteModule::Verma(v) => {
                let (a, b) = sl.label(m.label);
                debug_assert_eq!(a, 0, "zero modes at fixed points are Cartan");
                let val = v.weight.values[b - 1].clone();
                if val.is_zero() {
                    Vec::new()
                } else {
                    vec![(Vec::new(), factor, val)]
                }
            }
        }
    }

    fn check_mode(&self, m: &Mode) -> Result<()> {
        if !Mode::admissible(&self.sl(), m.site, m.label, m.exp) {
            let (a, b) = self.sl().label(m.label);
            return Err(Error::InvalidInput(format!(
                "mode J_({a},{b}) ξ^{} violates the twisted constraint at {}",
                m.exp, m.site
            )));
        }
        Ok(())
    }

    /// Action of a single mode on a state.
    pub fn act_mode(&self, m: Mode, st: &State) -> Result<ModVector> {
        self.check_mode(&m)?;
        let slot = self.slot(m.site)?;
        let block = st.mono.block(m.site);
        let factor = (st.gen / slot.stride) % slot.dim;
        let base = st.gen - factor * slot.stride;
        let mut out = ModVector::zero();
        if m.exp < 0 {
            let d = st.depth() + m.depth();
            if d > self.max_depth {
                return Err(Error::FuelExhausted(format!(
                    "monomial depth {d} exceeds the truncation {}",
                    self.max_depth
                )));
            }
            for (b, c) in self.insert_block(m, block).iter() {
                out.add_term(
                    State {
                        mono: st.mono.with_block(m.site, b),
                        gen: st.gen,
                    },
                    c.clone(),
                );
            }
        } else {
            for (b, f, c) in self.act_block(slot, m, block, factor).iter() {
                out.add_term(
                    State {
                        mono: st.mono.with_block(m.site, b),
                        gen: base + f * slot.stride,
                    },
                    c.clone(),
                );
            }
        }
        Ok(out)
    }

    /// Action of a local mode on a vector.
    pub fn act_local(&self, m: Mode, v: &ModVector) -> Result<ModVector> {
        let mut out = ModVector::zero();
        for (st, c) in v.terms() {
            out.add_scaled(&self.act_mode(m, st)?, c);
        }
        Ok(out)
    }

    /// Checks membership and expands `f` at every module site up to the truncation depth.
    pub fn prepare(&self, f: &Section) -> Result<PreparedSection> {
        let class = self.acting_class();
        if !f.check_membership(class) {
            return Err(Error::NotMember { class: class.name() });
        }
        let jets = self
            .slots
            .iter()
            .map(|s| f.expand_at(s.site, self.max_depth as i32))
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedSection {
            section: f.clone(),
            jets,
        })
    }

    /// Action of a global section: the sum over module sites of its local
    /// expansion, truncated at the site depth of each state (modes of higher
    /// order annihilate the state).
    pub fn act_section(&self, f: &Section, v: &ModVector) -> Result<ModVector> {
        self.act_prepared(&self.prepare(f)?, v)
    }

    pub fn act_prepared(&self, f: &PreparedSection, v: &ModVector) -> Result<ModVector> {
        let mut out = ModVector::zero();
        for (st, c) in v.terms() {
            for (slot, jet) in self.slots.iter().zip(&f.jets) {
                let d = st.mono.site_depth(slot.site) as i32;
                for (p, x) in jet.terms() {
                    if p > d {
                        break;
                    }
                    for (label, k) in x.support() {
                        let m = Mode {
                            site: slot.site,
                            label,
                            exp: p,
                        };
                        out.add_scaled(&self.act_mode(m, st)?, &(c * k));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Smallest `m` such that every mode of order `≥ m` at `site` kills every
    /// state of `v`.
    pub fn smoothness_bound(&self, v: &ModVector, site: Site) -> u32 {
        v.terms().map(|(st, _)| st.mono.site_depth(site)).max().unwrap_or(0) + 1
    }

    /// Right action of `H_b` on the Verma slot at `site`: `[x H] = H·x - ad_H(x)`,
    /// with `ad_H` applied as a derivation on the letters and the result
    /// brought back to normal form.
    pub fn right_h(&self, site: Site, st: &State, b: usize) -> Result<ModVector> {
        let slot = self.slot(site)?;
        if !matches!(slot.module, SiteModule::Verma(_)) {
            return Err(Error::InvalidModule(format!("no Verma module at {site}")));
        }
        let sl = self.sl();
        let h = sl.index(0, b);
        let mut out = self.act_mode(Mode { site, label: h, exp: 0 }, st)?;
        let block = st.mono.block(site);
        let minus_one = sl.field().from_int(-1);
        for i in 0..block.len() {
            let Some((k, z)) = self.bracket_label(h, block[i].label) else {
                continue;
            };
            let z = Mode {
                site,
                label: *z,
                exp: block[i].exp,
            };
            let mut v = ModVector::from_state(
                State {
                    mono: st.mono.with_block(site, &block[i + 1..]),
                    gen: st.gen,
                },
                k * &minus_one,
            );
            for letter in std::iter::once(z).chain(block[..i].iter().rev().copied()) {
                let mut next = ModVector::zero();
                for (s2, c) in v.terms() {
                    next.add_scaled(&self.act_mode_unchecked(letter, s2), c);
                }
                v = next;
            }
            out.add_scaled(&v, &sl.field().one());
        }
        Ok(out)
    }

    /// Negative-mode insertion without the depth check (depth-preserving rewrites).
    fn act_mode_unchecked(&self, m: Mode, st: &State) -> ModVector {
        let mut out = ModVector::zero();
        for (b, c) in self.insert_block(m, st.mono.block(m.site)).iter() {
            out.add_term(
                State {
                    mono: st.mono.with_block(m.site, b),
                    gen: st.gen,
                },
                c.clone(),
            );
        }
        out
    }

    /// `ρ_{1,β}(H_b)`: `v_0 H_b ⊗ v ⊗ v_∞ + v_0 ⊗ v ⊗ v_∞ Ad β(H_b)`.
    pub fn rho_1_beta(&self, st: &State, b: usize) -> Result<ModVector> {
        let sl = self.sl();
        let mut out = self.right_h(Site::Zero, st, b)?;
        out.add_scaled(&self.right_h(Site::Infinity, st, b)?, &sl.eps(b as i64));
        Ok(out)
    }

    /// Number of cached normal-ordering entries (for diagnostics).
    pub fn cache_size(&self) -> usize {
        self.insert_memo.read().expect("memo lock").len() + self.act_memo.read().expect("memo lock").len()
    }
}

/// A section with its jets at the module sites, ready to act.
#[derive(Clone, Debug)]
pub struct PreparedSection {
    pub section: Section,
    jets: Vec<LaurentJet>,
}

fn add_into<K: Ord>(acc: &mut BTreeMap<K, CycNum>, k: K, c: CycNum) {
    if c.is_zero() {
        return;
    }
    match acc.get_mut(&k) {
        Some(x) => {
            *x += &c;
            if x.is_zero() {
                acc.remove(&k);
            }
        }
        None => {
            acc.insert(k, c);
        }
    }
}

/// Element of the centrally extended loop algebra at one site:
/// `Σ_p X_p ⊗ ξ^p + c·k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopElem {
    pub modes: BTreeMap<i32, LieElem>,
    pub central: CycNum,
}

impl LoopElem {
    pub fn zero(sl: &SlN) -> LoopElem {
        LoopElem {
            modes: BTreeMap::new(),
            central: sl.field().zero(),
        }
    }

    pub fn single(sl: &SlN, x: LieElem, p: i32) -> LoopElem {
        let mut e = LoopElem::zero(sl);
        if !x.is_zero() {
            e.modes.insert(p, x);
        }
        e
    }

    pub fn add(&self, other: &LoopElem) -> LoopElem {
        let mut out = self.clone();
        for (p, x) in &other.modes {
            let e = out.modes.entry(*p).or_insert_with(|| LieElem {
                coords: vec![self.central.field().zero(); x.coords.len()],
            });
            *e = e.add(x);
        }
        out.modes.retain(|_, x| !x.is_zero());
        out.central += &other.central;
        out
    }
}

/// `[X ⊗ ξ^p, Y ⊗ ξ^q] = [X,Y] ⊗ ξ^{p+q} + w · p · δ_{p+q,0} tr(XY) k`, with
/// `w = 1` at marked points and `1/N` at `0` and `∞`.
pub fn extended_bracket(sl: &SlN, x: &LoopElem, y: &LoopElem, weight: &CycNum) -> LoopElem {
    let mut out = LoopElem::zero(sl);
    for (p, a) in &x.modes {
        for (q, b) in &y.modes {
            let term = LoopElem::single(sl, sl.bracket(a, b), p + q);
            out = out.add(&term);
            if p + q == 0 {
                out.central += &(&(weight * &sl.trace_form(a, b)) * &sl.field().from_int(*p as i64));
            }
        }
    }
    out
}

/// Central weight at a site: `1` at marked points, `1/N` at `0` and `∞`.
pub fn site_cocycle_weight(sl: &SlN, site: Site) -> CycNum {
    match site {
        Site::Marked(_) => sl.field().one(),
        _ => sl.field().from_rational(Rational::from_signeds(1, sl.n() as i64)),
    }
}
