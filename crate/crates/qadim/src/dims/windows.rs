//! Five-interval windows (Δᴸ, Δ, Δᴿ) per level and certified μ bounds for
//! their members.
//!
//! With a finite type graph a window is symbolic: each slot holds a vertex
//! and a q-vector scaled so the center's entries sum to 1. Windows with equal
//! slots have equal μ ratios, so each level keeps one window per key together
//! with one concrete position for reporting. Without a graph the windows are
//! read off a full net tree and every slot is bounded by the oracle directly.

use std::collections::HashMap;

use num_traits::Zero;

use crate::field::{FieldElement, Rational};
use crate::finite_type::{vec_mat, TransitionGraph};
use crate::ifs::WeightedIfs;
use crate::measure::{mu_interval_adaptive, MeasureBounds, OracleBudget};
use crate::net::NetTree;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Slot {
    /// beyond 0 or 1
    Outside,
    Gap,
    /// `vertex` is None in tree mode
    Node {
        vertex: Option<usize>,
        q: Vec<Rational>,
    },
}

#[derive(Clone, Debug)]
pub struct Window {
    pub n: usize,
    pub slots: [Slot; 5],
    /// concrete endpoints of each slot (meaningless for Outside)
    pub ends: [(FieldElement, FieldElement); 5],
    /// how many level-n intervals share this key
    pub multiplicity: usize,
}

impl Window {
    pub fn center(&self) -> &(FieldElement, FieldElement) {
        &self.ends[2]
    }

    pub fn center_length(&self) -> FieldElement {
        &self.ends[2].1 - &self.ends[2].0
    }
}

/// All windows of levels 1..=depth whose center is not a gap. If a level
/// needs more than `window_budget` windows, the levels before it are returned
/// with that level's index.
pub fn graph_windows(graph: &TransitionGraph, ifs: &WeightedIfs, depth: usize, window_budget: usize) -> (Vec<Vec<Window>>, Option<usize>) {
    let k = ifs.field();
    let out_end = (FieldElement::zero(k), FieldElement::zero(k));
    let root = Slot::Node { vertex: Some(0), q: vec![Rational::from_integer(1.into())] };
    let mut current = vec![Window {
        n: 0,
        slots: [Slot::Outside, Slot::Outside, root, Slot::Outside, Slot::Outside],
        ends: [out_end.clone(), out_end.clone(), (FieldElement::zero(k), FieldElement::one(k)), out_end.clone(), out_end.clone()],
        multiplicity: 1,
    }];
    let mut levels = Vec::with_capacity(depth);
    for n in 1..=depth {
        let lam = ifs.lambda_pow(n - 1);
        let lam_next = ifs.lambda_pow(n);
        let mut index: HashMap<[Slot; 5], usize> = HashMap::new();
        let mut next: Vec<Window> = Vec::new();
        for w in &current {
            // children of the five parents in order, tagged with whether they come from the center
            let mut seq: Vec<(Slot, (FieldElement, FieldElement), bool)> = Vec::new();
            for (s, slot) in w.slots.iter().enumerate() {
                for (c, e) in slot_children(graph, slot, &w.ends[s], &lam, &lam_next) {
                    seq.push((c, e, s == 2));
                }
            }
            for i in 0..seq.len() {
                if !seq[i].2 || seq[i].0 == Slot::Gap {
                    continue;
                }
                let pick = |j: isize| -> (Slot, (FieldElement, FieldElement)) {
                    if j < 0 || j as usize >= seq.len() {
                        (Slot::Outside, out_end.clone())
                    } else {
                        (seq[j as usize].0.clone(), seq[j as usize].1.clone())
                    }
                };
                let i = i as isize;
                let picked = [pick(i - 2), pick(i - 1), pick(i), pick(i + 1), pick(i + 2)];
                let scale = match &picked[2].0 {
                    Slot::Node { q, .. } => q.iter().sum::<Rational>(),
                    _ => unreachable!(),
                };
                let slots: [Slot; 5] = std::array::from_fn(|s| normalize(&picked[s].0, &scale));
                let ends: [(FieldElement, FieldElement); 5] = std::array::from_fn(|s| picked[s].1.clone());
                match index.get(&slots) {
                    Some(&at) => next[at].multiplicity += w.multiplicity,
                    None => {
                        index.insert(slots.clone(), next.len());
                        next.push(Window { n, slots, ends, multiplicity: w.multiplicity });
                        if next.len() > window_budget {
                            return (levels, Some(n));
                        }
                    }
                }
            }
        }
        // deterministic order: by the concrete center position
        next.sort_by(|a, b| a.ends[2].0.cmp(&b.ends[2].0));
        levels.push(next.clone());
        current = next;
    }
    (levels, None)
}

fn slot_children(
    graph: &TransitionGraph,
    slot: &Slot,
    ends: &(FieldElement, FieldElement),
    lam: &FieldElement,
    lam_next: &FieldElement,
) -> Vec<(Slot, (FieldElement, FieldElement))> {
    match slot {
        Slot::Outside => Vec::new(),
        Slot::Gap => vec![(Slot::Gap, ends.clone())],
        Slot::Node { vertex, q } => {
            let v = vertex.expect("graph windows carry vertices");
            graph.vertices[v]
                .edges
                .iter()
                .map(|e| {
                    let left = &ends.0 + &(lam * &e.left_offset);
                    let right = &left + &(lam_next * &e.normalized_length);
                    let s = match e.child {
                        Some(c) => Slot::Node { vertex: Some(c), q: vec_mat(q, &e.matrix) },
                        None => Slot::Gap,
                    };
                    (s, (left, right))
                })
                .collect()
        }
    }
}

fn normalize(slot: &Slot, scale: &Rational) -> Slot {
    match slot {
        Slot::Node { vertex, q } => Slot::Node { vertex: *vertex, q: q.iter().map(|x| x / scale).collect() },
        s => s.clone(),
    }
}

/// Windows read off a fully built tree, one per non-gap interval.
pub fn tree_windows(tree: &NetTree, depth: usize) -> Vec<Vec<Window>> {
    let k = tree.ifs().field();
    let out_end = (FieldElement::zero(k), FieldElement::zero(k));
    (1..=depth.min(tree.depth()))
        .map(|n| {
            let lvl = tree.level(n);
            let slot = |j: isize| -> (Slot, (FieldElement, FieldElement)) {
                if j < 0 || j as usize >= lvl.len() {
                    return (Slot::Outside, out_end.clone());
                }
                let iv = &lvl[j as usize];
                let s = if iv.is_gap() { Slot::Gap } else { Slot::Node { vertex: None, q: iv.neighbors.iter().map(|nb| nb.mass.clone()).collect() } };
                (s, (iv.left.clone(), iv.right.clone()))
            };
            (0..lvl.len())
                .filter(|&i| !lvl[i].is_gap())
                .map(|i| {
                    let i = i as isize;
                    let picked = [slot(i - 2), slot(i - 1), slot(i), slot(i + 1), slot(i + 2)];
                    Window { n, slots: std::array::from_fn(|s| picked[s].0.clone()), ends: std::array::from_fn(|s| picked[s].1.clone()), multiplicity: 1 }
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct WindowSet {
    pub levels: Vec<Vec<Window>>,
    pub mode: &'static str,
    /// first level left out because of the window budget
    pub truncated_at: Option<usize>,
}

/// Symbolic windows when a graph is given, otherwise windows of a full tree.
pub fn build_windows(ifs: &WeightedIfs, graph: Option<&TransitionGraph>, tree: Option<&NetTree>, depth: usize, window_budget: usize) -> Result<WindowSet, String> {
    match (graph, tree) {
        (Some(g), _) => {
            let (levels, truncated_at) = graph_windows(g, ifs, depth, window_budget);
            Ok(WindowSet { levels, mode: "graph", truncated_at })
        }
        (None, Some(t)) => Ok(WindowSet { levels: tree_windows(t, depth), mode: "tree", truncated_at: (t.depth() < depth).then_some(t.depth() + 1) }),
        (None, None) => Err("neither a transition graph nor a net tree was given".into()),
    }
}

/// Oracle settings for slot masses.
#[derive(Clone, Debug)]
pub struct OraclePolicy {
    pub start: usize,
    pub max_depth: usize,
    pub rel_tol: Rational,
}

impl Default for OraclePolicy {
    fn default() -> Self {
        OraclePolicy { start: 8, max_depth: 24, rel_tol: Rational::new(1.into(), 1000.into()) }
    }
}

/// Certified μ bounds for window slots. In graph mode μ(Δ) = Σᵢ qᵢ·μ(Jᵢ),
/// where Jᵢ is Δ pulled back through its i-th neighbor map, so one oracle run
/// per (vertex, neighbor) serves every interval of that vertex.
pub struct SlotMeasure<'a> {
    ifs: &'a WeightedIfs,
    graph: Option<&'a TransitionGraph>,
    policy: OraclePolicy,
    pullbacks: HashMap<usize, Vec<MeasureBounds>>,
    /// widest oracle depth used so far
    pub deepest: usize,
}

impl<'a> SlotMeasure<'a> {
    pub fn new(ifs: &'a WeightedIfs, graph: Option<&'a TransitionGraph>, policy: OraclePolicy) -> SlotMeasure<'a> {
        SlotMeasure { ifs, graph, policy, pullbacks: HashMap::new(), deepest: 0 }
    }

    fn pullback(&mut self, v: usize) -> Result<&[MeasureBounds], OracleBudget> {
        if !self.pullbacks.contains_key(&v) {
            let cv = &self.graph.expect("graph mode").vertices[v].cv;
            let mut out = Vec::with_capacity(cv.neighbors.len());
            for (o, rho) in &cv.neighbors {
                let inv = rho.inverse().expect("ratios are nonzero");
                let a = o * &inv;
                let b = &(o + &cv.length) * &inv;
                let bnd = mu_interval_adaptive(self.ifs, &a, &b, self.policy.start, self.policy.max_depth, &self.policy.rel_tol)?;
                self.deepest = self.deepest.max(bnd.depth);
                out.push(bnd);
            }
            self.pullbacks.insert(v, out);
        }
        Ok(&self.pullbacks[&v])
    }

    /// Bounds on μ of a slot, in the window's scaled units. None for Outside.
    pub fn slot(&mut self, slot: &Slot, ends: &(FieldElement, FieldElement)) -> Result<Option<MeasureBounds>, OracleBudget> {
        match slot {
            Slot::Outside => Ok(None),
            Slot::Gap => Ok(Some(MeasureBounds::exact(Rational::zero(), 0))),
            Slot::Node { vertex: Some(v), q } => {
                let pb = self.pullback(*v)?;
                let mut lower = Rational::zero();
                let mut upper = Rational::zero();
                let mut depth = usize::MAX;
                for (qi, b) in q.iter().zip(pb) {
                    lower += qi * &b.lower;
                    upper += qi * &b.upper;
                    depth = depth.min(b.depth);
                }
                Ok(Some(MeasureBounds { lower, upper, depth }))
            }
            Slot::Node { vertex: None, .. } => {
                let bnd = mu_interval_adaptive(self.ifs, &ends.0, &ends.1, self.policy.start, self.policy.max_depth, &self.policy.rel_tol)?;
                self.deepest = self.deepest.max(bnd.depth);
                Ok(Some(bnd))
            }
        }
    }
}

/// Sum of slot bounds (a flank union).
pub fn sum_bounds(parts: &[MeasureBounds]) -> MeasureBounds {
    MeasureBounds {
        lower: parts.iter().map(|b| b.lower.clone()).sum(),
        upper: parts.iter().map(|b| b.upper.clone()).sum(),
        depth: parts.iter().map(|b| b.depth).min().unwrap_or(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite_type::{detect_finite_type, FiniteTypeVerdict};
    use crate::presets;

    fn graph(ifs: &WeightedIfs) -> TransitionGraph {
        match detect_finite_type(ifs, 12, 64) {
            FiniteTypeVerdict::Closed(g) => g,
            FiniteTypeVerdict::NotClosed(nc) => panic!("{nc:?}"),
        }
    }

    #[test]
    fn symbolic_windows_match_tree() {
        // every tree window's normalized key appears among the symbolic windows of its level
        for ifs in [presets::notdoubling(), presets::thirds_255(), presets::notfull()] {
            let g = graph(&ifs);
            let sym = graph_windows(&g, &ifs, 5, 10_000).0;
            let tree = NetTree::build(&ifs, 5, 100_000).unwrap();
            let tw = tree_windows(&tree, 5);
            for n in 0..5 {
                let total: usize = sym[n].iter().map(|w| w.multiplicity).sum();
                assert_eq!(total, tw[n].len(), "level {}", n + 1);
                for w in &sym[n] {
                    let t = tw[n].iter().find(|t| t.ends[2] == w.ends[2]).expect("concrete center exists in the tree");
                    for s in 0..5 {
                        assert_eq!(t.ends[s].0, w.ends[s].0);
                        let scale = match (&t.slots[2], &w.slots[2]) {
                            (Slot::Node { q: tq, .. }, Slot::Node { .. }) => tq.iter().sum::<Rational>(),
                            _ => unreachable!(),
                        };
                        match (&t.slots[s], &w.slots[s]) {
                            (Slot::Node { q: tq, .. }, Slot::Node { q: wq, .. }) => {
                                let a: Rational = tq.iter().sum();
                                let b: Rational = wq.iter().sum();
                                assert_eq!(a, b * &scale);
                            }
                            (a, b) => assert_eq!(std::mem::discriminant(a), std::mem::discriminant(b)),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn slot_bounds_bracket_direct_oracle() {
        // graph mode measures in units of the center's Pₙ
        for ifs in [presets::notdoubling(), presets::notfull()] {
            let g = graph(&ifs);
            let sym = graph_windows(&g, &ifs, 3, 10_000).0;
            let tree = NetTree::build(&ifs, 3, 100_000).unwrap();
            let mut sm = SlotMeasure::new(&ifs, Some(&g), OraclePolicy::default());
            let mut direct = SlotMeasure::new(&ifs, None, OraclePolicy::default());
            for w in &sym[2] {
                let p = tree.level(3).iter().find(|iv| iv.left == w.ends[2].0).unwrap().p_n();
                for s in 0..5 {
                    let Some(c) = sm.slot(&w.slots[s], &w.ends[s]).unwrap() else { continue };
                    if w.slots[s] == Slot::Gap {
                        continue;
                    }
                    let d = direct.slot(&Slot::Node { vertex: None, q: vec![] }, &w.ends[s]).unwrap().unwrap();
                    assert!(&c.lower * &p <= d.upper && d.lower <= &c.upper * &p);
                }
            }
        }
    }
}
