//! Natural vocabulary, its contracted hierarchy, coverage/specificity and the
//! exact reduced-vocabulary solver.
//!
//! The solver runs a tree DP whose state per node is `(k, A)`: `k` selected
//! entities in the subtree (no ancestor selected) covering point mass `A`.
//! Each state keeps the largest selected mass `B`. The objective
//! `α·A/|U| + (1−α)·B/A` is only evaluated at the root, with exact rationals.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use num::{BigInt, BigRational, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{EntityId, Ontology};
use crate::postproc::ResolvedPoint;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NaturalVocabulary {
    pub entities: Vec<EntityId>,
    pub point_mass: BTreeMap<EntityId, u64>,
    pub total_points: u64,
}

impl NaturalVocabulary {
    pub fn from_mass(point_mass: BTreeMap<EntityId, u64>) -> Self {
        let point_mass: BTreeMap<_, _> = point_mass.into_iter().filter(|&(_, m)| m > 0).collect();
        NaturalVocabulary {
            entities: point_mass.keys().copied().collect(),
            total_points: point_mass.values().sum(),
            point_mass,
        }
    }

    pub fn from_points(points: &[ResolvedPoint]) -> Self {
        Self::from_mass(crate::postproc::point_mass(points))
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn mass(&self, e: EntityId) -> u64 {
        self.point_mass.get(&e).copied().unwrap_or(0)
    }
}

/// A forest over node indices `0..len` with an integer mass per node. The
/// virtual root sits above every parentless node and is never selectable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabTree {
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    mass: Vec<u64>,
    roots: Vec<usize>,
    /// Children before parents.
    post_order: Vec<usize>,
}

impl VocabTree {
    pub fn new(parent: Vec<Option<usize>>, mass: Vec<u64>) -> Result<Self> {
        let n = parent.len();
        if mass.len() != n {
            return Err(Error::InvalidParameter(format!(
                "{} parents but {} masses",
                n,
                mass.len()
            )));
        }
        let mut children = vec![Vec::new(); n];
        let mut roots = Vec::new();
        for (i, p) in parent.iter().enumerate() {
            match *p {
                Some(p) if p >= n || p == i => {
                    return Err(Error::Inconsistent(format!(
                        "node {i} has invalid parent {p}"
                    )))
                }
                Some(p) => children[p].push(i),
                None => roots.push(i),
            }
        }
        let mut post_order = Vec::with_capacity(n);
        let mut stack: Vec<(usize, bool)> = roots.iter().rev().map(|&r| (r, false)).collect();
        while let Some((u, expanded)) = stack.pop() {
            if expanded {
                post_order.push(u);
            } else {
                stack.push((u, true));
                stack.extend(children[u].iter().rev().map(|&c| (c, false)));
            }
        }
        if post_order.len() != n {
            return Err(Error::Cycle("vocabulary tree".into()));
        }
        Ok(VocabTree {
            parent,
            children,
            mass,
            roots,
            post_order,
        })
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    pub fn mass(&self, i: usize) -> u64 {
        self.mass[i]
    }

    pub fn total_mass(&self) -> u64 {
        self.mass.iter().sum()
    }

    /// `i ≤ j` in the tree.
    pub fn is_under(&self, i: usize, j: usize) -> bool {
        std::iter::successors(Some(i), |&x| self.parent[x]).any(|x| x == j)
    }

    /// Nodes with an ancestor-or-self in `selected`.
    pub fn covered(&self, selected: &[usize]) -> Vec<bool> {
        let mut cov = vec![false; self.len()];
        for &s in selected {
            cov[s] = true;
        }
        // parents come after children in post order
        for &u in self.post_order.iter().rev() {
            if let Some(p) = self.parent[u] {
                if cov[p] {
                    cov[u] = true;
                }
            }
        }
        cov
    }

    /// `(covered mass, selected mass)` of a selection.
    pub fn masses(&self, selected: &[usize]) -> (u64, u64) {
        let cov = self.covered(selected);
        let a = (0..self.len())
            .filter(|&i| cov[i])
            .map(|i| self.mass[i])
            .sum();
        let sel: BTreeSet<usize> = selected.iter().copied().collect();
        let b = sel.iter().map(|&i| self.mass[i]).sum();
        (a, b)
    }
}

/// Value of `0/0` specificity, i.e. of an empty covered set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmptySpecificity {
    #[default]
    One,
    Zero,
}

impl EmptySpecificity {
    fn value(self) -> u64 {
        match self {
            EmptySpecificity::One => 1,
            EmptySpecificity::Zero => 0,
        }
    }
}

pub fn coverage_ratio(covered: u64, total: u64) -> Result<f64> {
    if total == 0 {
        return Err(Error::EmptyCorpus("no unambiguous points".into()));
    }
    Ok(covered as f64 / total as f64)
}

pub fn specificity_ratio(selected: u64, covered: u64, empty: EmptySpecificity) -> f64 {
    if covered == 0 {
        empty.value() as f64
    } else {
        selected as f64 / covered as f64
    }
}

/// `α` as an exact rational; must be finite and in `[0, 1]`.
pub fn exact_alpha(alpha: f64) -> Result<BigRational> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha {alpha} outside [0, 1]"
        )));
    }
    BigRational::from_float(alpha)
        .ok_or_else(|| Error::InvalidParameter(format!("alpha {alpha} is not finite")))
}

/// `α·A/U + (1−α)·B/A`, exactly.
pub fn exact_objective(
    alpha: &BigRational,
    covered: u64,
    selected: u64,
    total: u64,
    empty: EmptySpecificity,
) -> BigRational {
    let r = |a: u64, b: u64| BigRational::new(BigInt::from(a), BigInt::from(b));
    let cov = if total == 0 {
        BigRational::zero()
    } else {
        r(covered, total)
    };
    let spec = if covered == 0 {
        r(empty.value(), 1)
    } else {
        r(selected, covered)
    };
    alpha * cov + (BigRational::from_integer(1.into()) - alpha) * spec
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Bits(Vec<u64>);

impl Bits {
    fn empty(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64).max(1)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn union(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a | b).collect())
    }

    /// Whether `self` wins the set tie-break: it holds the smallest element
    /// of the symmetric difference. Equal to lexicographic order on sorted
    /// sequences of equal length.
    fn lex_before(&self, other: &Bits) -> bool {
        for (a, b) in self.0.iter().zip(&other.0) {
            let diff = a ^ b;
            if diff != 0 {
                let low = diff & diff.wrapping_neg();
                return a & low != 0;
            }
        }
        false
    }

    fn members(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (w, &word) in self.0.iter().enumerate() {
            let mut x = word;
            while x != 0 {
                let t = x.trailing_zeros() as usize;
                out.push(w * 64 + t);
                x &= x - 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
struct Cell {
    selected: u64,
    set: Bits,
}

/// `table[k]`: covered mass → best cell.
type Table = Vec<BTreeMap<u64, Cell>>;

fn offer(map: &mut BTreeMap<u64, Cell>, covered: u64, cand: Cell) {
    match map.get_mut(&covered) {
        None => {
            map.insert(covered, cand);
        }
        Some(cur) => {
            if cand.selected > cur.selected
                || (cand.selected == cur.selected && cand.set.lex_before(&cur.set))
            {
                *cur = cand;
            }
        }
    }
}

fn merge(x: &Table, y: &Table, cap: usize) -> Table {
    let len = (x.len() + y.len() - 1).min(cap + 1);
    let mut out: Table = vec![BTreeMap::new(); len];
    for (k1, m1) in x.iter().enumerate() {
        for (k2, m2) in y.iter().enumerate() {
            if k1 + k2 >= len {
                break;
            }
            for (&a1, c1) in m1 {
                for (&a2, c2) in m2 {
                    let cand = Cell {
                        selected: c1.selected + c2.selected,
                        set: c1.set.union(&c2.set),
                    };
                    offer(&mut out[k1 + k2], a1 + a2, cand);
                }
            }
        }
    }
    out
}

/// One evaluated selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub selected: Vec<usize>,
    pub covered_mass: u64,
    pub selected_mass: u64,
    pub coverage: f64,
    pub specificity: f64,
    pub objective: f64,
    pub exact_objective: BigRational,
}

/// Root-level DP states for every selection size up to a cap. Independent
/// of α, so one table serves a whole sweep.
#[derive(Debug, Clone)]
pub struct VocabSolver {
    root: Table,
    nodes: usize,
    total: u64,
    empty: EmptySpecificity,
}

impl VocabSolver {
    pub fn new(tree: &VocabTree, cap: usize, empty: EmptySpecificity) -> Self {
        let m = tree.len();
        let cap = cap.min(m);
        let mut tables: Vec<Option<Table>> = vec![None; m];
        let mut subtree_mass = vec![0u64; m];
        // strict descendants of each node, sorted by mass desc then index
        let mut below: Vec<Vec<usize>> = vec![Vec::new(); m];
        for &u in &tree.post_order {
            let mut t: Table = vec![BTreeMap::new()];
            t[0].insert(
                0,
                Cell {
                    selected: 0,
                    set: Bits::empty(m),
                },
            );
            let mut desc = Vec::new();
            subtree_mass[u] = tree.mass(u);
            for &c in tree.children(u) {
                let ct = tables[c].take().expect("child table");
                t = merge(&t, &ct, cap);
                subtree_mass[u] += subtree_mass[c];
                desc.push(c);
                desc.extend(std::mem::take(&mut below[c]));
            }
            desc.sort_by(|&a, &b| tree.mass(b).cmp(&tree.mass(a)).then(a.cmp(&b)));
            // u selected: the whole subtree is covered
            let mut set = Bits::empty(m);
            set.set(u);
            let mut selected = tree.mass(u);
            for k in 1..=cap.min(desc.len() + 1) {
                if k > 1 {
                    let d = desc[k - 2];
                    set.set(d);
                    selected += tree.mass(d);
                }
                if t.len() <= k {
                    t.resize_with(k + 1, BTreeMap::new);
                }
                offer(
                    &mut t[k],
                    subtree_mass[u],
                    Cell {
                        selected,
                        set: set.clone(),
                    },
                );
            }
            // keep descendants sorted for the parent
            below[u] = desc;
            tables[u] = Some(t);
        }
        let mut root: Table = vec![BTreeMap::new()];
        root[0].insert(
            0,
            Cell {
                selected: 0,
                set: Bits::empty(m),
            },
        );
        for &r in tree.roots() {
            let t = tables[r].take().expect("root table");
            root = merge(&root, &t, cap);
        }
        VocabSolver {
            root,
            nodes: m,
            total: tree.total_mass(),
            empty,
        }
    }

    pub fn cap(&self) -> usize {
        self.root.len() - 1
    }

    fn choice(&self, alpha: &BigRational, covered: u64, cell: &Cell) -> Choice {
        let exact = exact_objective(alpha, covered, cell.selected, self.total, self.empty);
        Choice {
            selected: cell.set.members(),
            covered_mass: covered,
            selected_mass: cell.selected,
            coverage: if self.total == 0 {
                0.0
            } else {
                covered as f64 / self.total as f64
            },
            specificity: specificity_ratio(cell.selected, covered, self.empty),
            objective: exact.to_f64().unwrap_or(f64::NAN),
            exact_objective: exact,
        }
    }

    /// Order on candidate solutions: objective, then covered mass, then
    /// selected mass, then the set tie-break. `Greater` means `x` wins.
    fn compare(x: &Choice, xs: &Bits, y: &Choice, ys: &Bits) -> Ordering {
        x.exact_objective
            .cmp(&y.exact_objective)
            .then(x.covered_mass.cmp(&y.covered_mass))
            .then(x.selected_mass.cmp(&y.selected_mass))
            .then_with(|| {
                if xs.lex_before(ys) {
                    Ordering::Greater
                } else if ys.lex_before(xs) {
                    Ordering::Less
                } else {
                    Ordering::Equal
                }
            })
    }

    /// `objective · q · U` as a fraction, where `α = p/q`; `None` on
    /// overflow.
    fn scaled(&self, (p, q): (u128, u128), a: u64, b: u64) -> Option<(u128, u128)> {
        let (a, b, u) = (a as u128, b as u128, self.total as u128);
        if a == 0 {
            return Some((
                (q - p)
                    .checked_mul(self.empty.value() as u128)?
                    .checked_mul(u)?,
                1,
            ));
        }
        let n = p
            .checked_mul(a.checked_mul(a)?)?
            .checked_add((q - p).checked_mul(b)?.checked_mul(u)?)?;
        Some((n, a))
    }

    fn cmp_states(
        &self,
        alpha: &BigRational,
        pq: Option<(u128, u128)>,
        x: (u64, &Cell),
        y: (u64, &Cell),
    ) -> Ordering {
        let fast = pq.filter(|_| self.total > 0).and_then(|pq| {
            let (xn, xd) = self.scaled(pq, x.0, x.1.selected)?;
            let (yn, yd) = self.scaled(pq, y.0, y.1.selected)?;
            Some(xn.checked_mul(yd)?.cmp(&yn.checked_mul(xd)?))
        });
        fast.unwrap_or_else(|| {
            exact_objective(alpha, x.0, x.1.selected, self.total, self.empty).cmp(&exact_objective(
                alpha,
                y.0,
                y.1.selected,
                self.total,
                self.empty,
            ))
        })
        .then(x.0.cmp(&y.0))
        .then(x.1.selected.cmp(&y.1.selected))
        .then_with(|| {
            if x.1.set.lex_before(&y.1.set) {
                Ordering::Greater
            } else if y.1.set.lex_before(&x.1.set) {
                Ordering::Less
            } else {
                Ordering::Equal
            }
        })
    }

    fn best_in(
        &self,
        k: usize,
        alpha: &BigRational,
        pq: Option<(u128, u128)>,
    ) -> Option<(Choice, &Bits)> {
        let mut best: Option<(u64, &Cell)> = None;
        for (&a, cell) in &self.root[k] {
            let wins = match best {
                None => true,
                Some(b) => self.cmp_states(alpha, pq, (a, cell), b) == Ordering::Greater,
            };
            if wins {
                best = Some((a, cell));
            }
        }
        best.map(|(a, cell)| (self.choice(alpha, a, cell), &cell.set))
    }

    /// Best selection of exactly `n` nodes, plus the best of size `< n`
    /// when it scores strictly higher.
    pub fn best(&self, n: usize, alpha: f64) -> Result<(Choice, Option<Choice>)> {
        if n == 0 || n > self.nodes {
            return Err(Error::SizeOutOfRange { n, max: self.nodes });
        }
        if n > self.cap() {
            return Err(Error::InvalidParameter(format!(
                "n = {n} exceeds the solver cap {}",
                self.cap()
            )));
        }
        let alpha = exact_alpha(alpha)?;
        let pq = alpha.numer().to_u128().zip(alpha.denom().to_u128());
        let (exact, _) = self
            .best_in(n, &alpha, pq)
            .expect("size-n selection exists");
        let mut smaller: Option<(Choice, &Bits)> = None;
        for k in 0..n {
            if let Some((c, s)) = self.best_in(k, &alpha, pq) {
                let wins = match &smaller {
                    None => true,
                    Some((b, bs)) => Self::compare(&c, s, b, bs) == Ordering::Greater,
                };
                if wins {
                    smaller = Some((c, s));
                }
            }
        }
        let smaller = smaller
            .map(|(c, _)| c)
            .filter(|c| c.exact_objective > exact.exact_objective);
        Ok((exact, smaller))
    }
}

/// Exhaustive search over all size-`n` subsets, same tie-breaks as the DP.
/// Exponential; meant for small trees.
pub fn brute_force(
    tree: &VocabTree,
    n: usize,
    alpha: f64,
    empty: EmptySpecificity,
) -> Result<Choice> {
    let m = tree.len();
    if n == 0 || n > m {
        return Err(Error::SizeOutOfRange { n, max: m });
    }
    let alpha = exact_alpha(alpha)?;
    let total = tree.total_mass();
    let solver = VocabSolver {
        root: Vec::new(),
        nodes: m,
        total,
        empty,
    };
    let mut best: Option<(Choice, Bits)> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let (a, b) = tree.masses(&idx);
        let mut bits = Bits::empty(m);
        idx.iter().for_each(|&i| bits.set(i));
        let c = solver.choice(
            &alpha,
            a,
            &Cell {
                selected: b,
                set: bits.clone(),
            },
        );
        let wins = match &best {
            None => true,
            Some((bc, bb)) => VocabSolver::compare(&c, &bits, bc, bb) == Ordering::Greater,
        };
        if wins {
            best = Some((c, bits));
        }
        // next combination
        let mut i = n;
        while i > 0 && idx[i - 1] == m - n + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..n {
            idx[j] = idx[j - 1] + 1;
        }
    }
    Ok(best.expect("at least one subset").0)
}

/// `N` with parent links rewired to the nearest annotated ancestor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NaturalHierarchy {
    pub nodes: Vec<EntityId>,
    pub tree: VocabTree,
}

impl NaturalHierarchy {
    pub fn contract(nv: &NaturalVocabulary, o: &Ontology) -> Result<Self> {
        let annotated: BTreeSet<EntityId> = nv.entities.iter().copied().collect();
        let pos: BTreeMap<EntityId, usize> = nv
            .entities
            .iter()
            .enumerate()
            .map(|(i, &e)| (e, i))
            .collect();
        let parent = nv
            .entities
            .iter()
            .map(|&e| o.nearest_annotated_ancestor(e, &annotated).map(|p| pos[&p]))
            .collect();
        let mass = nv.entities.iter().map(|&e| nv.mass(e)).collect();
        Ok(NaturalHierarchy {
            nodes: nv.entities.clone(),
            tree: VocabTree::new(parent, mass)?,
        })
    }

    pub fn index_of(&self, e: EntityId) -> Option<usize> {
        self.nodes.binary_search(&e).ok()
    }

    pub fn parent(&self, e: EntityId) -> Option<EntityId> {
        let i = self.index_of(e)?;
        self.tree.parent(i).map(|p| self.nodes[p])
    }

    pub fn children(&self, e: EntityId) -> Vec<EntityId> {
        match self.index_of(e) {
            Some(i) => self
                .tree
                .children(i)
                .iter()
                .map(|&c| self.nodes[c])
                .collect(),
            None => Vec::new(),
        }
    }

    fn indices(&self, v: &BTreeSet<EntityId>) -> Result<Vec<usize>> {
        v.iter()
            .map(|&e| {
                self.index_of(e)
                    .ok_or_else(|| Error::UnknownEntity(format!("{e:?} not in the vocabulary")))
            })
            .collect()
    }

    pub fn covered_set(&self, v: &BTreeSet<EntityId>) -> Result<BTreeSet<EntityId>> {
        let cov = self.tree.covered(&self.indices(v)?);
        Ok((0..self.nodes.len())
            .filter(|&i| cov[i])
            .map(|i| self.nodes[i])
            .collect())
    }

    pub fn coverage(&self, v: &BTreeSet<EntityId>) -> Result<f64> {
        let (a, _) = self.tree.masses(&self.indices(v)?);
        coverage_ratio(a, self.tree.total_mass())
    }

    pub fn specificity(&self, v: &BTreeSet<EntityId>, empty: EmptySpecificity) -> Result<f64> {
        let (a, b) = self.tree.masses(&self.indices(v)?);
        Ok(specificity_ratio(b, a, empty))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedVocabulary {
    pub n: usize,
    pub alpha: f64,
    pub entities: Vec<String>,
    pub coverage: f64,
    pub specificity: f64,
    pub objective: f64,
    /// A smaller vocabulary that scores strictly higher, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub better_smaller: Option<SmallerVocabulary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallerVocabulary {
    pub entities: Vec<String>,
    pub coverage: f64,
    pub specificity: f64,
    pub objective: f64,
}

fn entity_keys(nh: &NaturalHierarchy, o: &Ontology, sel: &[usize]) -> Vec<String> {
    sel.iter()
        .map(|&i| o.key(nh.nodes[i]).to_string())
        .collect()
}

fn to_reduced(
    nh: &NaturalHierarchy,
    o: &Ontology,
    n: usize,
    alpha: f64,
    (c, smaller): (Choice, Option<Choice>),
) -> ReducedVocabulary {
    ReducedVocabulary {
        n,
        alpha,
        entities: entity_keys(nh, o, &c.selected),
        coverage: c.coverage,
        specificity: c.specificity,
        objective: c.objective,
        better_smaller: smaller.map(|s| SmallerVocabulary {
            entities: entity_keys(nh, o, &s.selected),
            coverage: s.coverage,
            specificity: s.specificity,
            objective: s.objective,
        }),
    }
}

pub fn reduce_vocabulary(
    nh: &NaturalHierarchy,
    o: &Ontology,
    n: usize,
    alpha: f64,
    empty: EmptySpecificity,
) -> Result<ReducedVocabulary> {
    if nh.tree.total_mass() == 0 {
        return Err(Error::EmptyCorpus("no unambiguous points".into()));
    }
    if n == 0 || n > nh.nodes.len() {
        return Err(Error::SizeOutOfRange {
            n,
            max: nh.nodes.len(),
        });
    }
    let solver = VocabSolver::new(&nh.tree, n, empty);
    Ok(to_reduced(nh, o, n, alpha, solver.best(n, alpha)?))
}

/// One reduced vocabulary per grid value, from a single DP table.
pub fn sweep_alpha(
    nh: &NaturalHierarchy,
    o: &Ontology,
    n: usize,
    grid: &[f64],
    empty: EmptySpecificity,
) -> Result<Vec<ReducedVocabulary>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty alpha grid".into()));
    }
    if nh.tree.total_mass() == 0 {
        return Err(Error::EmptyCorpus("no unambiguous points".into()));
    }
    if n == 0 || n > nh.nodes.len() {
        return Err(Error::SizeOutOfRange {
            n,
            max: nh.nodes.len(),
        });
    }
    let solver = VocabSolver::new(&nh.tree, n, empty);
    grid.iter()
        .map(|&a| Ok(to_reduced(nh, o, n, a, solver.best(n, a)?)))
        .collect()
}

/// `steps + 1` evenly spaced values from 0 to 1.
pub fn alpha_grid(steps: usize) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}
