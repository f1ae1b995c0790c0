//! Net intervals: the level-n partition of [0,1] cut at the endpoints
//! S_u(0), S_u(1) for u ∈ Λₙ, each carrying the maps that cover it.

use std::collections::HashMap;
use std::io::{self, Write};
use std::ops::Range;

use num_traits::Zero;
use thiserror::Error;

use crate::field::{FieldElement, Rational};
use crate::ifs::{Similarity, WeightedIfs};

pub const DEFAULT_INTERVAL_BUDGET: usize = 2_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetError {
    #[error("interval budget of {cap} exceeded while building level {level}")]
    Budget { cap: usize, level: usize },
    #[error("level {0} has not been built")]
    MissingLevel(usize),
    #[error("point {0} lies outside the built part of level {1}")]
    OutOfRange(String, usize),
    #[error("interval has no child with index {0}")]
    NoSuchChild(usize),
}

/// A distinct covering map of a net interval with the summed mass of the
/// words in Λₙ that realize it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighbor {
    pub map: Similarity,
    pub mass: Rational,
}

/// Canonical neighbor order: decreasing position (so increasing normalized
/// offset from the left endpoint), then increasing ratio.
pub(crate) fn canonical_cmp(a: &Similarity, b: &Similarity) -> std::cmp::Ordering {
    b.pos.cmp(&a.pos).then_with(|| a.ratio.cmp(&b.ratio))
}

#[derive(Clone, Debug)]
pub struct NetInterval {
    pub level: usize,
    pub left: FieldElement,
    pub right: FieldElement,
    pub neighbors: Vec<Neighbor>,
    pub parent: Option<usize>,
    pub children: Range<usize>,
}

impl NetInterval {
    pub fn is_gap(&self) -> bool {
        self.neighbors.is_empty()
    }

    /// Pₙ(Δ): zero for gaps.
    pub fn p_n(&self) -> Rational {
        self.neighbors.iter().map(|n| n.mass.clone()).sum()
    }

    pub fn length(&self) -> FieldElement {
        &self.right - &self.left
    }

    pub fn contains(&self, x: &FieldElement) -> bool {
        &self.left <= x && x <= &self.right
    }
}

/// One child produced by [`expand`], with the sparse transfer entries
/// (parent neighbor, child neighbor, Σ p_w).
#[derive(Clone, Debug)]
pub struct Child {
    pub left: FieldElement,
    pub right: FieldElement,
    pub neighbors: Vec<Neighbor>,
    pub transfer: Vec<(usize, usize, Rational)>,
}

/// Children at level n+1 of the level-n interval [left, right] with the given
/// neighbors. Only extensions of the parent's covering maps are considered.
pub fn expand(ifs: &WeightedIfs, left: &FieldElement, right: &FieldElement, neighbors: &[Neighbor], lambda_next: &FieldElement) -> Vec<Child> {
    if neighbors.is_empty() {
        return vec![Child { left: left.clone(), right: right.clone(), neighbors: Vec::new(), transfer: Vec::new() }];
    }
    let mut ext: Vec<(usize, Similarity, Rational)> = Vec::new();
    for (i, nb) in neighbors.iter().enumerate() {
        let mut stack = vec![(nb.map.clone(), Rational::from_integer(1.into()))];
        while let Some((s, pw)) = stack.pop() {
            for (j, m) in ifs.maps().iter().enumerate() {
                let c = s.compose(m);
                if !(&c.pos < right && &c.right() > left) {
                    continue;
                }
                let cp = &pw * &ifs.probs()[j];
                if &c.ratio <= lambda_next {
                    ext.push((i, c, cp));
                } else {
                    stack.push((c, cp));
                }
            }
        }
    }
    let mut cuts: Vec<FieldElement> = Vec::with_capacity(2 * ext.len() + 2);
    for (_, s, _) in &ext {
        if &s.pos > left {
            cuts.push(s.pos.clone());
        }
        let r = s.right();
        if &r < right {
            cuts.push(r);
        }
    }
    cuts.push(left.clone());
    cuts.push(right.clone());
    cuts.sort();
    cuts.dedup();
    let k = cuts.len() - 1;
    // per child: map -> (slot, contributions)
    let mut slots: Vec<HashMap<Similarity, Vec<(usize, Rational)>>> = vec![HashMap::new(); k];
    for (i, s, pw) in ext {
        let a = if &s.pos <= left { 0 } else { cuts.binary_search(&s.pos).unwrap() };
        let r = s.right();
        let b = if &r >= right { k } else { cuts.binary_search(&r).unwrap() };
        for slot in &mut slots[a..b] {
            slot.entry(s.clone()).or_default().push((i, pw.clone()));
        }
    }
    let mut out = Vec::with_capacity(k);
    for (c, slot) in slots.into_iter().enumerate() {
        let mut entries: Vec<(Similarity, Vec<(usize, Rational)>)> = slot.into_iter().collect();
        entries.sort_by(|a, b| canonical_cmp(&a.0, &b.0));
        let mut nbs = Vec::with_capacity(entries.len());
        let mut transfer: HashMap<(usize, usize), Rational> = HashMap::new();
        for (col, (map, contribs)) in entries.into_iter().enumerate() {
            let mut mass = Rational::zero();
            for (i, pw) in contribs {
                mass += &neighbors[i].mass * &pw;
                *transfer.entry((i, col)).or_insert_with(Rational::zero) += pw;
            }
            nbs.push(Neighbor { map, mass });
        }
        let mut transfer: Vec<(usize, usize, Rational)> = transfer.into_iter().map(|((i, j), v)| (i, j, v)).collect();
        transfer.sort_by_key(|a| (a.0, a.1));
        out.push(Child { left: cuts[c].clone(), right: cuts[c + 1].clone(), neighbors: nbs, transfer });
    }
    out
}

/// Net intervals by level. A local tree keeps, at level n, only the
/// intervals meeting [x − 3λⁿ, x + 3λⁿ]; that always contains Δₙ(x) and its flanks.
#[derive(Clone, Debug)]
pub struct NetTree {
    ifs: WeightedIfs,
    levels: Vec<Vec<NetInterval>>,
    center: Option<FieldElement>,
    lambda_pows: Vec<FieldElement>,
    budget: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Flanks {
    /// index range of the (at most two) intervals immediately to the left, with the union's endpoints
    pub left: Option<(Range<usize>, FieldElement, FieldElement)>,
    pub right: Option<(Range<usize>, FieldElement, FieldElement)>,
}

impl NetTree {
    pub fn new(ifs: &WeightedIfs, budget: usize) -> NetTree {
        let k = ifs.field();
        let root = NetInterval {
            level: 0,
            left: FieldElement::zero(k),
            right: FieldElement::one(k),
            neighbors: vec![Neighbor { map: Similarity::identity(k), mass: Rational::from_integer(1.into()) }],
            parent: None,
            children: 0..0,
        };
        NetTree { ifs: ifs.clone(), levels: vec![vec![root]], center: None, lambda_pows: vec![FieldElement::one(k)], budget }
    }

    pub fn build(ifs: &WeightedIfs, depth: usize, budget: usize) -> Result<NetTree, NetError> {
        let mut t = NetTree::new(ifs, budget);
        while t.depth() < depth {
            t.build_level()?;
        }
        Ok(t)
    }

    pub fn local(ifs: &WeightedIfs, x: &FieldElement, depth: usize, budget: usize) -> Result<NetTree, NetError> {
        let mut t = NetTree::new(ifs, budget);
        t.center = Some(x.clone());
        while t.depth() < depth {
            t.build_level()?;
        }
        Ok(t)
    }

    pub fn ifs(&self) -> &WeightedIfs {
        &self.ifs
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn is_local(&self) -> bool {
        self.center.is_some()
    }

    pub fn level(&self, n: usize) -> &[NetInterval] {
        &self.levels[n]
    }

    pub fn lambda_pow(&self, n: usize) -> &FieldElement {
        &self.lambda_pows[n]
    }

    pub fn build_level(&mut self) -> Result<(), NetError> {
        let n = self.depth() + 1;
        let lam_n = &self.lambda_pows[n - 1] * self.ifs.lambda();
        let window = self.center.as_ref().map(|x| {
            let rad = lam_n.scale(&Rational::from_integer(3.into()));
            (x - &rad, x + &rad)
        });
        let mut next = Vec::new();
        let parents = &mut self.levels[n - 1];
        for (pi, p) in parents.iter_mut().enumerate() {
            let start = next.len();
            for c in expand(&self.ifs, &p.left, &p.right, &p.neighbors, &lam_n) {
                if let Some((lo, hi)) = &window {
                    if &c.right < lo || &c.left > hi {
                        continue;
                    }
                }
                next.push(NetInterval { level: n, left: c.left, right: c.right, neighbors: c.neighbors, parent: Some(pi), children: 0..0 });
                if next.len() > self.budget {
                    return Err(NetError::Budget { cap: self.budget, level: n });
                }
            }
            p.children = start..next.len();
        }
        self.levels.push(next);
        self.lambda_pows.push(lam_n);
        Ok(())
    }

    /// Index of Δₙ(x): the interval with left ≤ x < right, or the last one when x = 1.
    pub fn locate(&self, x: &FieldElement, n: usize) -> Result<usize, NetError> {
        let lvl = self.levels.get(n).ok_or(NetError::MissingLevel(n))?;
        let first = lvl.first().unwrap();
        let last = lvl.last().unwrap();
        if x < &first.left || x > &last.right {
            return Err(NetError::OutOfRange(x.to_string(), n));
        }
        let idx = lvl.partition_point(|iv| &iv.right <= x);
        if idx == lvl.len() {
            if self.is_local() && last.right != FieldElement::one(self.ifs.field()) {
                return Err(NetError::OutOfRange(x.to_string(), n));
            }
            return Ok(lvl.len() - 1);
        }
        Ok(idx)
    }

    /// Both candidates for Δₙ(x) when x is a shared endpoint of two level-n intervals.
    pub fn locate_both(&self, x: &FieldElement, n: usize) -> Result<(usize, Option<usize>), NetError> {
        let i = self.locate(x, n)?;
        let lvl = &self.levels[n];
        if i > 0 && &lvl[i].left == x {
            Ok((i, Some(i - 1)))
        } else {
            Ok((i, None))
        }
    }

    pub fn flanks(&self, n: usize, idx: usize) -> Flanks {
        let lvl = &self.levels[n];
        let at_zero = idx == 0 && lvl[0].left.is_zero();
        let at_one = idx + 1 == lvl.len() && lvl[idx].right == FieldElement::one(self.ifs.field());
        let left = if at_zero || idx == 0 {
            None
        } else {
            let lo = idx.saturating_sub(2);
            Some((lo..idx, lvl[lo].left.clone(), lvl[idx - 1].right.clone()))
        };
        let right = if at_one || idx + 1 >= lvl.len() {
            None
        } else {
            let hi = (idx + 3).min(lvl.len());
            Some((idx + 1..hi, lvl[idx + 1].left.clone(), lvl[hi - 1].right.clone()))
        };
        Flanks { left, right }
    }

    /// Chain of intervals from the root, choosing the child with the given
    /// order index at each step. Works without building whole levels.
    pub fn descend(ifs: &WeightedIfs, path: &[usize]) -> Result<Vec<NetInterval>, NetError> {
        let root = NetTree::new(ifs, usize::MAX).levels.remove(0).remove(0);
        let mut chain = vec![root];
        let mut lam = FieldElement::one(ifs.field());
        for (step, &c) in path.iter().enumerate() {
            lam = &lam * ifs.lambda();
            let p = chain.last().unwrap();
            let mut kids = expand(ifs, &p.left, &p.right, &p.neighbors, &lam);
            if c >= kids.len() {
                return Err(NetError::NoSuchChild(c));
            }
            let k = kids.swap_remove(c);
            chain.push(NetInterval { level: step + 1, left: k.left, right: k.right, neighbors: k.neighbors, parent: None, children: 0..0 });
        }
        Ok(chain)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "level,left,right,length_float,P_n,neighbor_count,is_gap")?;
        for lvl in &self.levels {
            for iv in lvl {
                writeln!(w, "{},{},{},{},{},{},{}", iv.level, iv.left, iv.right, iv.length().to_f64(), iv.p_n(), iv.neighbors.len(), iv.is_gap())?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use num_traits::One;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn fe(ifs: &WeightedIfs, n: i64, d: i64) -> FieldElement {
        FieldElement::from_rational(ifs.field(), q(n, d))
    }

    #[test]
    fn notdoubling_level_one() {
        let ifs = presets::notdoubling();
        let t = NetTree::build(&ifs, 1, 100).unwrap();
        let lvl = t.level(1);
        let ends: Vec<String> = lvl.iter().map(|iv| format!("[{},{}]", iv.left, iv.right)).collect();
        assert_eq!(ends, ["[0,1/6]", "[1/6,1/3]", "[1/3,1/2]", "[1/2,2/3]", "[2/3,1]"]);
        let ps: Vec<Rational> = lvl.iter().map(|iv| iv.p_n()).collect();
        assert_eq!(ps, vec![q(1, 4), q(1, 2), q(1, 2), q(1, 4), q(1, 4)]);
        assert_eq!(t.locate(&fe(&ifs, 1, 2), 1).unwrap(), 3);
        assert_eq!(t.locate(&fe(&ifs, 0, 1), 1).unwrap(), 0);
        assert_eq!(t.locate(&fe(&ifs, 1, 1), 1).unwrap(), 4);
        let fl = t.flanks(1, 0);
        assert!(fl.left.is_none());
        let (_, a, b) = fl.right.unwrap();
        assert_eq!((a, b), (fe(&ifs, 1, 6), fe(&ifs, 1, 2)));
    }

    #[test]
    fn thirds_flanks_truncate() {
        let ifs = presets::thirds_255();
        let t = NetTree::build(&ifs, 2, 100).unwrap();
        let lvl1: Vec<Rational> = t.level(1).iter().map(|iv| iv.p_n()).collect();
        assert_eq!(lvl1, vec![q(2, 5), q(1, 5), q(2, 5)]);
        let fl = t.flanks(1, 1);
        assert_eq!(fl.left.unwrap().1, fe(&ifs, 0, 1));
        assert_eq!(fl.right.unwrap().2, fe(&ifs, 1, 1));
        let mid = t.locate(&fe(&ifs, 1, 2), 2).unwrap();
        assert_eq!(t.level(2)[mid].p_n(), q(1, 25));
        assert_eq!(t.level(0)[0].p_n(), Rational::one());
    }

    #[test]
    fn notfull_has_gaps() {
        let ifs = presets::notfull();
        let t = NetTree::build(&ifs, 2, 1000).unwrap();
        let gaps: Vec<String> = t.level(1).iter().filter(|iv| iv.is_gap()).map(|iv| format!("({},{})", iv.left, iv.right)).collect();
        assert_eq!(gaps, ["(3/10,2/5)", "(3/5,4/5)"]);
        assert_eq!(t.level(1).len(), 7);
        assert_eq!(t.level(2).len(), 29);
    }

    #[test]
    fn partition_and_monotonicity() {
        for ifs in [presets::notdoubling(), presets::golden_bernoulli(), presets::notfull()] {
            let t = NetTree::build(&ifs, 5, 100_000).unwrap();
            let min_theta = ifs.min_prob().pow(ifs.theta() as i32);
            for n in 1..=t.depth() {
                let lvl = t.level(n);
                assert!(lvl[0].left.is_zero());
                assert!(lvl.last().unwrap().right == FieldElement::one(ifs.field()));
                for w in lvl.windows(2) {
                    assert_eq!(w[0].right, w[1].left);
                }
                for iv in lvl {
                    assert!(iv.left < iv.right);
                    // gaps keep their length forever; covered intervals shrink
                    assert!(iv.is_gap() || iv.length() <= *t.lambda_pow(n));
                    for nb in &iv.neighbors {
                        assert!(nb.map.pos <= iv.left && nb.map.right() >= iv.right);
                    }
                    let parent = &t.level(n - 1)[iv.parent.unwrap()];
                    if !iv.is_gap() {
                        assert!(iv.p_n() <= parent.p_n());
                        if ifs.full_support() {
                            assert!(iv.p_n() >= &min_theta * parent.p_n());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn lower_ratio_needs_full_support() {
        // a child lying in the image of a gap of one covering map loses that map's mass
        let ifs = presets::notfull();
        let t = NetTree::build(&ifs, 4, 100_000).unwrap();
        let bound = ifs.min_prob().pow(ifs.theta() as i32);
        let lvl = t.level(4);
        let iv = lvl.iter().find(|iv| iv.left.to_string() == "127/1250").unwrap();
        let parent = &t.level(3)[iv.parent.unwrap()];
        assert_eq!((iv.p_n(), parent.p_n()), (q(1, 1296), q(5, 108)));
        assert!(iv.p_n() < bound * parent.p_n());
    }

    #[test]
    fn local_tree_matches_full_tree() {
        let ifs = presets::notdoubling();
        let full = NetTree::build(&ifs, 6, 100_000).unwrap();
        let x = fe(&ifs, 1, 2);
        let local = NetTree::local(&ifs, &x, 6, 100_000).unwrap();
        for n in 0..=6 {
            let a = &full.level(n)[full.locate(&x, n).unwrap()];
            let li = local.locate(&x, n).unwrap();
            let b = &local.level(n)[li];
            assert_eq!((&a.left, &a.right, a.p_n()), (&b.left, &b.right, b.p_n()));
            let fi = full.locate(&x, n).unwrap();
            let (fl, ll) = (full.flanks(n, fi), local.flanks(n, li));
            assert_eq!(fl.left.map(|f| (f.1, f.2)), ll.left.map(|f| (f.1, f.2)));
            assert_eq!(fl.right.map(|f| (f.1, f.2)), ll.right.map(|f| (f.1, f.2)));
        }
        assert!(local.level(6).len() < full.level(6).len());
    }

    #[test]
    fn descend_follows_child_indices() {
        let ifs = presets::notfull();
        let chain = NetTree::descend(&ifs, &[1, 0, 1]).unwrap();
        assert_eq!(chain[1].left, fe(&ifs, 1, 10));
        assert_eq!(chain[2].right, fe(&ifs, 3, 25));
        assert_eq!(chain[3].length(), fe(&ifs, 1, 250));
        assert!(NetTree::descend(&ifs, &[9]).is_err());
    }

    #[test]
    fn csv_dump_header() {
        let t = NetTree::build(&presets::osc(), 1, 10).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().next().unwrap(), "level,left,right,length_float,P_n,neighbor_count,is_gap");
        assert_eq!(s.lines().nth(2).unwrap(), "1,0,1/2,0.5,2/3,1,false");
    }
}
