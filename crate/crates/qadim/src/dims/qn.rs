//! Qₙ = sup over ancestor/descendant pairs (Δ_N ⊇ Δ_{N+n}) of P_N/P_{N+n}.
//!
//! With a transition graph the pairs are enumerated through states (vertex,
//! q-vector divided by its first nonzero entry); two intervals with the same
//! state have proportional descendant masses. When the reachable state set
//! closes, Qₙ is exact for every N. Otherwise, and in tree mode, each value is
//! a ratio actually attained in the explored part, so a lower bound.

use std::collections::HashMap;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::field::{FieldElement, Rational};
use crate::finite_type::{vec_mat, TransitionGraph};
use crate::net::NetTree;

#[derive(Clone, Debug, Serialize)]
pub struct QSequence {
    /// Q₁..Q_D
    #[serde(serialize_with = "crate::report::ser_rationals")]
    pub q: Vec<Rational>,
    /// the state set closed, so every Qₖ is exact over all N
    pub exact: bool,
    /// the state budget cut exploration short
    pub sampled: bool,
    pub states: usize,
    pub mode: &'static str,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct State {
    vertex: usize,
    q: Vec<Rational>,
}

fn normalize(q: Vec<Rational>) -> Option<(Rational, Vec<Rational>)> {
    let lead = q.iter().find(|x| !x.is_zero())?.clone();
    let v = q.iter().map(|x| x / &lead).collect();
    Some((lead, v))
}

/// Qₖ for k = 1..=depth over states first seen at levels < depth.
pub fn q_sequence_graph(graph: &TransitionGraph, depth: usize, state_budget: usize) -> QSequence {
    let mut index: HashMap<State, usize> = HashMap::new();
    let mut states: Vec<State> = Vec::new();
    // per state: (scale, child state) for every non-gap edge; None until expanded
    let mut children: Vec<Option<Vec<(Rational, usize)>>> = Vec::new();
    let root = State { vertex: 0, q: vec![Rational::one()] };
    index.insert(root.clone(), 0);
    states.push(root);
    children.push(None);
    let mut frontier = vec![0usize];
    let mut closed = false;
    let mut sampled = false;
    for _level in 0..depth {
        if frontier.is_empty() {
            closed = true;
            break;
        }
        let mut fresh: Vec<(State, usize, Rational)> = Vec::new();
        for &s in &frontier {
            let st = states[s].clone();
            let mut kids = Vec::new();
            for e in &graph.vertices[st.vertex].edges {
                let Some(c) = e.child else { continue };
                let Some((scale, q)) = normalize(vec_mat(&st.q, &e.matrix)) else { continue };
                let cs = State { vertex: c, q };
                match index.get(&cs) {
                    Some(&i) => kids.push((scale, i)),
                    None => fresh.push((cs, s, scale)),
                }
            }
            children[s] = Some(kids);
        }
        // new states, deduplicated among themselves in discovery order
        let mut next = Vec::new();
        let mut pending: Vec<(State, Vec<(usize, Rational)>)> = Vec::new();
        let mut local: HashMap<State, usize> = HashMap::new();
        for (cs, parent, scale) in fresh {
            match local.get(&cs) {
                Some(&i) => pending[i].1.push((parent, scale)),
                None => {
                    local.insert(cs.clone(), pending.len());
                    pending.push((cs, vec![(parent, scale)]));
                }
            }
        }
        let room = state_budget.saturating_sub(states.len());
        if pending.len() > room {
            sampled = true;
            // greedy: keep the states whose own mass is smallest relative to their parents
            pending.sort_by(|a, b| {
                let ma = a.1.iter().map(|(_, s)| s.clone()).min().unwrap();
                let mb = b.1.iter().map(|(_, s)| s.clone()).min().unwrap();
                ma.cmp(&mb)
            });
            pending.truncate(room);
        }
        for (cs, parents) in pending {
            let i = states.len();
            index.insert(cs.clone(), i);
            states.push(cs);
            children.push(None);
            for (p, scale) in parents {
                children[p].as_mut().unwrap().push((scale, i));
            }
            next.push(i);
        }
        frontier = next;
    }
    if frontier.is_empty() {
        closed = true;
    }
    // m_k(s): least descendant mass k levels below, in units of the state's q
    let mass0: Vec<Rational> = states.iter().map(|s| s.q.iter().sum()).collect();
    let mut m: Vec<Option<Rational>> = mass0.iter().cloned().map(Some).collect();
    let mut q = Vec::with_capacity(depth);
    for _k in 1..=depth {
        let next: Vec<Option<Rational>> =
            (0..states.len()).map(|s| children[s].as_ref().and_then(|kids| kids.iter().filter_map(|(scale, c)| m[*c].as_ref().map(|v| scale * v)).min())).collect();
        let best = (0..states.len()).filter_map(|s| next[s].as_ref().map(|v| &mass0[s] / v)).max().unwrap_or_else(Rational::zero);
        q.push(best);
        m = next;
    }
    QSequence { q, exact: closed && !sampled, sampled, states: states.len(), mode: "graph" }
}

/// Qₖ over all pairs inside a fully built tree (N + k ≤ tree depth).
pub fn q_sequence_tree(tree: &NetTree, depth: usize) -> QSequence {
    let d = depth.min(tree.depth());
    // min_below[i][k-1]: least Pₙ among non-gap descendants k levels below interval i of the current level
    let mut below: Vec<Vec<Option<Rational>>> = tree.level(d).iter().map(|_| Vec::new()).collect();
    let mut q: Vec<Rational> = vec![Rational::zero(); d];
    for n in (0..d).rev() {
        let lvl = tree.level(n);
        let child_lvl = tree.level(n + 1);
        let mut cur = Vec::with_capacity(lvl.len());
        for iv in lvl {
            let mut mins: Vec<Option<Rational>> = vec![None; d - n];
            for c in iv.children.clone() {
                let cp = &child_lvl[c];
                if cp.is_gap() {
                    continue;
                }
                let p = cp.p_n();
                if mins[0].as_ref().is_none_or(|v| &p < v) {
                    mins[0] = Some(p);
                }
                for (k, v) in below[c].iter().enumerate() {
                    if let Some(v) = v {
                        if mins[k + 1].as_ref().is_none_or(|x| v < x) {
                            mins[k + 1] = Some(v.clone());
                        }
                    }
                }
            }
            if !iv.is_gap() {
                let p = iv.p_n();
                for (k, v) in mins.iter().enumerate() {
                    if let Some(v) = v {
                        let r = &p / v;
                        if r > q[k] {
                            q[k] = r;
                        }
                    }
                }
            }
            cur.push(mins);
        }
        below = cur;
    }
    QSequence { q, exact: false, sampled: false, states: 0, mode: "tree" }
}

#[derive(Clone, Debug, Serialize)]
pub struct QaUpper {
    /// max over the tail window of log Qₙ/(n·|log λ|)
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub value: f64,
    pub window: (usize, usize),
    #[serde(serialize_with = "crate::report::ser_f64s")]
    pub running: Vec<f64>,
    /// true when the Qₙ are exact, so the estimate is not biased low
    pub exact: bool,
}

pub fn qa_upper_bound(seq: &QSequence, lambda: &FieldElement) -> QaUpper {
    let ll = -lambda.ln();
    let running: Vec<f64> = seq.q.iter().enumerate().map(|(i, q)| crate::field::ln_rational(q) / ((i + 1) as f64 * ll)).collect();
    let from = running.len() / 2 + 1;
    let value = running[from - 1..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    QaUpper { value, window: (from, running.len()), running, exact: seq.exact }
}
