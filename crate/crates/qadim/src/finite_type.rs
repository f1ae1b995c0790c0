//! Characteristic vectors, the transition graph they generate, and exact
//! q-vectors along symbolic paths.
//!
//! A non-gap net interval Δ of level n is described by ℓ = λ⁻ⁿ·|Δ| and the
//! canonically ordered list of its neighbors, each as
//! (λ⁻ⁿ·(left(Δ) − S_u(0)), λ⁻ⁿ·r_u). Gap intervals are not vertices; an
//! edge into a gap carries no matrix.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use num_traits::Zero;
use serde_json::{json, Value};
use thiserror::Error;

use crate::field::{FieldElement, Rational};
use crate::ifs::WeightedIfs;
use crate::net::{expand, Neighbor, NetInterval, NetTree};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CharacteristicVector {
    pub length: FieldElement,
    /// (normalized offset, normalized ratio) in canonical neighbor order
    pub neighbors: Vec<(FieldElement, FieldElement)>,
}

impl CharacteristicVector {
    /// `inv_lambda_n` is λ⁻ⁿ for the interval's level. Gaps have none.
    pub fn of(iv_left: &FieldElement, iv_right: &FieldElement, neighbors: &[Neighbor], inv_lambda_n: &FieldElement) -> Option<CharacteristicVector> {
        if neighbors.is_empty() {
            return None;
        }
        Some(CharacteristicVector {
            length: (iv_right - iv_left) * inv_lambda_n,
            neighbors: neighbors.iter().map(|nb| ((iv_left - &nb.map.pos) * inv_lambda_n, &nb.map.ratio * inv_lambda_n)).collect(),
        })
    }
}

impl fmt::Display for CharacteristicVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}; ", self.length)?;
        for (i, (o, r)) in self.neighbors.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{o}:{r}")?;
        }
        write!(f, ")")
    }
}

pub type Matrix = Vec<Vec<Rational>>;

#[derive(Clone, Debug)]
pub struct Edge {
    pub child_order_index: usize,
    /// None for a gap
    pub child: Option<usize>,
    /// rows: parent neighbors, columns: child neighbors; empty for a gap
    pub matrix: Matrix,
    /// λ⁻⁽ⁿ⁺¹⁾·|child|
    pub normalized_length: FieldElement,
    /// λ⁻ⁿ·(left(child) − left(parent))
    pub left_offset: FieldElement,
}

impl Edge {
    pub fn is_gap(&self) -> bool {
        self.child.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct Vertex {
    pub id: usize,
    pub cv: CharacteristicVector,
    /// level of first discovery
    pub level: usize,
    /// the first concrete interval seen with this characteristic vector
    pub representative: NetInterval,
    pub edges: Vec<Edge>,
}

#[derive(Clone, Debug)]
pub struct TransitionGraph {
    pub vertices: Vec<Vertex>,
    /// first level at which no new vertex appeared
    pub closure_level: usize,
    aliases: HashMap<usize, String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NotClosed {
    pub levels_explored: usize,
    /// number of vertices known after each level
    pub growth: Vec<usize>,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub enum FiniteTypeVerdict {
    Closed(TransitionGraph),
    NotClosed(NotClosed),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WalkError {
    #[error("step {step}: vertex {vertex} has no child with order index {index}")]
    NoSuchChild { step: usize, vertex: usize, index: usize },
    #[error("step {step}: child {index} of vertex {vertex} is a gap")]
    IntoGap { step: usize, vertex: usize, index: usize },
    #[error("step {step}: no child of vertex {vertex} is labelled {label}")]
    NoSuchLabel { step: usize, vertex: usize, label: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("level {level}, interval [{left}, {right}]: {msg}")]
pub struct Inconsistency {
    pub level: usize,
    pub left: String,
    pub right: String,
    pub msg: String,
}

fn inverse(x: &FieldElement) -> FieldElement {
    x.inverse().expect("λⁿ is nonzero")
}

fn dense(transfer: &[(usize, usize, Rational)], rows: usize, cols: usize) -> Matrix {
    let mut m = vec![vec![Rational::zero(); cols]; rows];
    for (i, j, v) in transfer {
        m[*i][*j] += v;
    }
    m
}

/// Breadth-first expansion from [0, 1]. Each new vertex is expanded once from
/// its representative interval.
pub fn detect_finite_type(ifs: &WeightedIfs, max_levels: usize, max_vertices: usize) -> FiniteTypeVerdict {
    let k = ifs.field();
    let root_tree = NetTree::new(ifs, 1);
    let root_iv = root_tree.level(0)[0].clone();
    let one = FieldElement::one(k);
    let root_cv = CharacteristicVector::of(&root_iv.left, &root_iv.right, &root_iv.neighbors, &one).unwrap();
    let mut index: HashMap<CharacteristicVector, usize> = HashMap::new();
    index.insert(root_cv.clone(), 0);
    let mut vertices = vec![Vertex { id: 0, cv: root_cv, level: 0, representative: root_iv, edges: Vec::new() }];
    let mut queue = VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        let n = vertices[v].level;
        if n >= max_levels {
            return FiniteTypeVerdict::NotClosed(NotClosed {
                levels_explored: max_levels,
                growth: growth(&vertices),
                reason: format!("vertex {v} discovered at level {n} is still unexpanded at the level budget {max_levels}"),
            });
        }
        let lam_next = ifs.lambda_pow(n + 1);
        let inv_next = inverse(&lam_next);
        let inv_here = inverse(&ifs.lambda_pow(n));
        let rep = vertices[v].representative.clone();
        let rows = rep.neighbors.len();
        let mut edges = Vec::new();
        for (c, child) in expand(ifs, &rep.left, &rep.right, &rep.neighbors, &lam_next).into_iter().enumerate() {
            let normalized_length = (&child.right - &child.left) * &inv_next;
            let left_offset = (&child.left - &rep.left) * &inv_here;
            let Some(cv) = CharacteristicVector::of(&child.left, &child.right, &child.neighbors, &inv_next) else {
                edges.push(Edge { child_order_index: c, child: None, matrix: Vec::new(), normalized_length, left_offset });
                continue;
            };
            let matrix = dense(&child.transfer, rows, child.neighbors.len());
            let id = match index.get(&cv) {
                Some(&id) => id,
                None => {
                    let id = vertices.len();
                    if id >= max_vertices {
                        return FiniteTypeVerdict::NotClosed(NotClosed {
                            levels_explored: n + 1,
                            growth: growth(&vertices),
                            reason: format!("vertex budget {max_vertices} exhausted at level {}", n + 1),
                        });
                    }
                    index.insert(cv.clone(), id);
                    let representative = NetInterval { level: n + 1, left: child.left, right: child.right, neighbors: child.neighbors, parent: None, children: 0..0 };
                    vertices.push(Vertex { id, cv, level: n + 1, representative, edges: Vec::new() });
                    queue.push_back(id);
                    id
                }
            };
            edges.push(Edge { child_order_index: c, child: Some(id), matrix, normalized_length, left_offset });
        }
        vertices[v].edges = edges;
    }
    let closure_level = vertices.iter().map(|v| v.level).max().unwrap_or(0) + 1;
    FiniteTypeVerdict::Closed(TransitionGraph { vertices, closure_level, aliases: HashMap::new() })
}

fn growth(vertices: &[Vertex]) -> Vec<usize> {
    let top = vertices.iter().map(|v| v.level).max().unwrap_or(0);
    (0..=top).map(|n| vertices.iter().filter(|v| v.level <= n).count()).collect()
}

/// One entry of a children signature.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignatureEntry {
    /// None for a gap
    pub label: Option<String>,
    pub normalized_length: FieldElement,
}

impl TransitionGraph {
    pub fn root(&self) -> &Vertex {
        &self.vertices[0]
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Attach names to vertices whose characteristic vector appears in `table`.
    pub fn with_aliases(mut self, table: &[(CharacteristicVector, &str)]) -> TransitionGraph {
        for (cv, name) in table {
            if let Some(v) = self.vertices.iter().find(|v| &v.cv == cv) {
                self.aliases.insert(v.id, name.to_string());
            }
        }
        self
    }

    pub fn label(&self, id: usize) -> String {
        self.aliases.get(&id).cloned().unwrap_or_else(|| id.to_string())
    }

    pub fn vertex_by_label(&self, label: &str) -> Option<usize> {
        (0..self.vertices.len()).find(|&i| self.label(i) == label)
    }

    /// Child labels left to right. A label occurring more than once among the
    /// children gets the suffixes a, b, c, … in order of appearance.
    pub fn children_signature(&self, v: usize) -> Vec<SignatureEntry> {
        let edges = &self.vertices[v].edges;
        let mut totals: HashMap<usize, usize> = HashMap::new();
        for e in edges {
            if let Some(c) = e.child {
                *totals.entry(c).or_default() += 1;
            }
        }
        let mut seen: HashMap<usize, usize> = HashMap::new();
        edges
            .iter()
            .map(|e| SignatureEntry {
                label: e.child.map(|c| {
                    let base = self.label(c);
                    if totals[&c] > 1 {
                        let k = seen.entry(c).or_default();
                        *k += 1;
                        format!("{base}{}", suffix(*k - 1))
                    } else {
                        base
                    }
                }),
                normalized_length: e.normalized_length.clone(),
            })
            .collect()
    }

    /// Labels of [`Self::children_signature`], with "gap" for gaps.
    pub fn signature_labels(&self, v: usize) -> Vec<String> {
        self.children_signature(v).into_iter().map(|e| e.label.unwrap_or_else(|| "gap".into())).collect()
    }

    /// Follow child order indices from the root; returns the vertex sequence.
    pub fn walk(&self, path: &[usize]) -> Result<Vec<usize>, WalkError> {
        let mut at = 0;
        let mut seq = vec![0];
        for (step, &c) in path.iter().enumerate() {
            let e = self.vertices[at].edges.get(c).ok_or(WalkError::NoSuchChild { step, vertex: at, index: c })?;
            at = e.child.ok_or(WalkError::IntoGap { step, vertex: at, index: c })?;
            seq.push(at);
        }
        Ok(seq)
    }

    /// q-vector of the interval reached by `path`: (1)·T₁·T₂·…, exact.
    pub fn q_vector(&self, path: &[usize]) -> Result<Vec<Rational>, WalkError> {
        let mut q = vec![Rational::from_integer(1.into())];
        let mut at = 0;
        for (step, &c) in path.iter().enumerate() {
            let e = self.vertices[at].edges.get(c).ok_or(WalkError::NoSuchChild { step, vertex: at, index: c })?;
            at = e.child.ok_or(WalkError::IntoGap { step, vertex: at, index: c })?;
            q = vec_mat(&q, &e.matrix);
        }
        Ok(q)
    }

    /// Translate signature labels ("3a", "4", …) into child order indices.
    pub fn path_from_labels(&self, labels: &[&str]) -> Result<Vec<usize>, WalkError> {
        let mut at = 0;
        let mut path = Vec::with_capacity(labels.len());
        for (step, l) in labels.iter().enumerate() {
            let sig = self.children_signature(at);
            let c = sig.iter().position(|e| e.label.as_deref() == Some(*l)).ok_or_else(|| WalkError::NoSuchLabel { step, vertex: at, label: l.to_string() })?;
            at = self.vertices[at].edges[c].child.unwrap();
            path.push(c);
        }
        Ok(path)
    }

    pub fn edge(&self, v: usize, child_order_index: usize) -> Option<&Edge> {
        self.vertices.get(v)?.edges.get(child_order_index)
    }

    /// Check every non-gap interval of `tree`: its characteristic vector is a
    /// vertex, it sits at the edge position its parent's vertex predicts, and
    /// its neighbor masses equal the parent's masses times the edge matrix.
    pub fn verify_against(&self, tree: &NetTree) -> Result<usize, Inconsistency> {
        let ifs = tree.ifs();
        let index: HashMap<&CharacteristicVector, usize> = self.vertices.iter().map(|v| (&v.cv, v.id)).collect();
        let mut ids: Vec<Vec<Option<usize>>> = Vec::with_capacity(tree.depth() + 1);
        let mut checked = 0;
        for n in 0..=tree.depth() {
            let inv = inverse(tree.lambda_pow(n));
            let lvl = tree.level(n);
            let mut row = Vec::with_capacity(lvl.len());
            for iv in lvl {
                let bad = |msg: String| Inconsistency { level: n, left: iv.left.to_string(), right: iv.right.to_string(), msg };
                let Some(cv) = CharacteristicVector::of(&iv.left, &iv.right, &iv.neighbors, &inv) else {
                    row.push(None);
                    continue;
                };
                let id = *index.get(&cv).ok_or_else(|| bad(format!("characteristic vector {cv} is not a vertex")))?;
                if let Some(p) = iv.parent {
                    let parent = &tree.level(n - 1)[p];
                    let pid = ids[n - 1][p].ok_or_else(|| bad("non-gap child of a gap".into()))?;
                    let c = (0..parent.children.len())
                        .map(|k| parent.children.start + k)
                        .position(|i| std::ptr::eq(&lvl[i], iv))
                        .ok_or_else(|| bad("not among its parent's children".into()))?;
                    // local trees drop children; recover the order index from the parent's full expansion
                    let c = if tree.is_local() { order_index(ifs, parent, iv, n) } else { c };
                    let e = self.edge(pid, c).ok_or_else(|| bad(format!("vertex {pid} has no edge {c}")))?;
                    if e.child != Some(id) {
                        return Err(bad(format!("expected vertex {:?} from edge {pid}/{c}, found {id}", e.child)));
                    }
                    let q_parent: Vec<Rational> = parent.neighbors.iter().map(|nb| nb.mass.clone()).collect();
                    let q_child: Vec<Rational> = iv.neighbors.iter().map(|nb| nb.mass.clone()).collect();
                    if vec_mat(&q_parent, &e.matrix) != q_child {
                        return Err(bad("masses differ from parent q-vector times edge matrix".into()));
                    }
                }
                row.push(Some(id));
                checked += 1;
            }
            ids.push(row);
        }
        Ok(checked)
    }

    /// Least positive difference between distinct normalized left endpoints,
    /// or between distinct normalized right endpoints, of the neighbors of
    /// vertex `v`. None when all neighbors share both endpoints.
    pub fn min_endpoint_gap(&self, v: usize) -> Option<FieldElement> {
        let nb = &self.vertices[v].cv.neighbors;
        let lefts: Vec<FieldElement> = nb.iter().map(|(o, _)| o.clone()).collect();
        let rights: Vec<FieldElement> = nb.iter().map(|(o, r)| o - r).collect();
        [lefts, rights]
            .into_iter()
            .filter_map(|mut xs| {
                xs.sort();
                xs.dedup();
                xs.windows(2).map(|w| &w[1] - &w[0]).min()
            })
            .min()
    }

    /// The set {oᵢ − oⱼ} of pairwise differences of normalized neighbor offsets over all vertices.
    pub fn offset_differences(&self) -> Vec<FieldElement> {
        let mut out: Vec<FieldElement> = Vec::new();
        for v in &self.vertices {
            for (a, _) in &v.cv.neighbors {
                for (b, _) in &v.cv.neighbors {
                    out.push(a - b);
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    pub fn to_json(&self) -> Value {
        let vertices: Vec<Value> = self
            .vertices
            .iter()
            .map(|v| {
                let mut o = json!({
                    "id": v.id,
                    "normalized_length": v.cv.length.to_string(),
                    "neighbors": v.cv.neighbors.iter().map(|(o, r)| json!([o.to_string(), r.to_string()])).collect::<Vec<_>>(),
                    "level": v.level,
                });
                if let Some(a) = self.aliases.get(&v.id) {
                    o["label"] = json!(a);
                }
                o
            })
            .collect();
        let mut edges = Vec::new();
        for v in &self.vertices {
            for e in &v.edges {
                edges.push(json!({
                    "parent": v.id,
                    "child_order_index": e.child_order_index,
                    "child": e.child,
                    "matrix": e.matrix.iter().map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
                    "is_gap": e.is_gap(),
                }));
            }
        }
        json!({ "vertices": vertices, "edges": edges, "closure_level": self.closure_level })
    }
}

fn order_index(ifs: &WeightedIfs, parent: &NetInterval, iv: &NetInterval, n: usize) -> usize {
    expand(ifs, &parent.left, &parent.right, &parent.neighbors, &ifs.lambda_pow(n))
        .iter()
        .position(|c| c.left == iv.left)
        .expect("child comes from its parent's expansion")
}

fn suffix(k: usize) -> String {
    let mut s = String::new();
    let mut k = k;
    loop {
        s.insert(0, (b'a' + (k % 26) as u8) as char);
        if k < 26 {
            break;
        }
        k = k / 26 - 1;
    }
    s
}

pub fn vec_mat(q: &[Rational], m: &Matrix) -> Vec<Rational> {
    let cols = m.first().map_or(0, |r| r.len());
    let mut out = vec![Rational::zero(); cols];
    for (qi, row) in q.iter().zip(m) {
        if qi.is_zero() {
            continue;
        }
        for (o, x) in out.iter_mut().zip(row) {
            if !x.is_zero() {
                *o += qi * x;
            }
        }
    }
    out
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    a.iter().map(|row| vec_mat(row, b)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn closed(ifs: &WeightedIfs, levels: usize) -> TransitionGraph {
        match detect_finite_type(ifs, levels, 1000) {
            FiniteTypeVerdict::Closed(g) => g,
            FiniteTypeVerdict::NotClosed(nc) => panic!("{nc:?}"),
        }
    }

    #[test]
    fn thirds_single_vertex() {
        let g = closed(&presets::thirds_255(), 10);
        assert_eq!(g.len(), 1);
        assert_eq!(g.closure_level, 1);
        assert_eq!(g.signature_labels(0), ["0a", "0b", "0c"]);
        assert_eq!(g.q_vector(&[1, 1]).unwrap(), vec![q(1, 25)]);
    }

    #[test]
    fn notfull_graph() {
        let ifs = presets::notfull();
        let g = closed(&ifs, 12).with_aliases(&presets::notfull_aliases());
        assert_eq!(g.len(), 4);
        let three = g.vertex_by_label("3").unwrap();
        assert_eq!(g.signature_labels(three), ["3a", "3b", "4", "2", "3c"]);
        assert_eq!(g.signature_labels(0), ["2", "3", "4", "gap", "1a", "gap", "1b"]);
        let m = &g.edge(three, 0).unwrap().matrix;
        assert_eq!(m, &vec![vec![q(1, 6), q(0, 1)], vec![q(0, 1), q(1, 2)]]);
        let k = &g.edge(three, 1).unwrap().matrix;
        assert_eq!(k, &vec![vec![q(1, 6), q(1, 6)], vec![q(0, 1), q(0, 1)]]);
        assert_eq!(g.q_vector(&[1]).unwrap(), vec![q(1, 6), q(1, 6)]);
        assert_eq!(g.q_vector(&[1, 0, 0]).unwrap(), vec![q(1, 216), q(1, 24)]);
        assert_eq!(g.path_from_labels(&["3", "3a", "3b"]).unwrap(), vec![1, 0, 1]);
        let offs: Vec<String> = g.vertices[three].edges.iter().map(|e| e.left_offset.to_string()).collect();
        assert_eq!(offs, ["0", "1/10", "1/5", "3/10", "2/5"]);
    }

    #[test]
    fn notfull_consistency() {
        let ifs = presets::notfull();
        let g = closed(&ifs, 12);
        let t = NetTree::build(&ifs, 6, 1_000_000).unwrap();
        assert!(g.verify_against(&t).unwrap() > 1000);
    }

    #[test]
    fn notdoubling_and_golden_close() {
        let nd = presets::notdoubling();
        let g = closed(&nd, 12);
        g.verify_against(&NetTree::build(&nd, 6, 1_000_000).unwrap()).unwrap();
        let gold = presets::golden_bernoulli();
        let g = closed(&gold, 12);
        assert!(g.closure_level <= 12);
        g.verify_against(&NetTree::build(&gold, 12, 1_000_000).unwrap()).unwrap();
    }

    #[test]
    fn walk_errors_name_the_step() {
        let g = closed(&presets::notfull(), 12);
        assert_eq!(g.q_vector(&[3]).unwrap_err(), WalkError::IntoGap { step: 0, vertex: 0, index: 3 });
        assert!(matches!(g.walk(&[1, 9]), Err(WalkError::NoSuchChild { step: 1, .. })));
    }

    #[test]
    fn q_sum_is_p_n() {
        let ifs = presets::notdoubling();
        let g = closed(&ifs, 12);
        let t = NetTree::build(&ifs, 5, 1_000_000).unwrap();
        for (i, iv) in t.level(5).iter().enumerate() {
            let mut path = Vec::new();
            let mut at = (5, i);
            while let Some(p) = t.level(at.0)[at.1].parent {
                path.push(at.1 - t.level(at.0 - 1)[p].children.start);
                at = (at.0 - 1, p);
            }
            path.reverse();
            let s: Rational = g.q_vector(&path).unwrap().into_iter().sum();
            assert_eq!(s, iv.p_n());
        }
    }

    #[test]
    fn suffixes() {
        assert_eq!(suffix(0), "a");
        assert_eq!(suffix(25), "z");
        assert_eq!(suffix(26), "aa");
    }
}
