//! Endpoint-gap statistics per level and the finite-depth separation
//! diagnostics built on them.
//!
//! Every verdict here is qualified by the depth it was computed to; none of
//! these conditions can be confirmed in the limit by a finite computation.

use std::io::{self, Write};

use serde::Serialize;

use crate::field::FieldElement;
use crate::finite_type::TransitionGraph;
use crate::ifs::{IfsError, WeightedIfs};
use crate::net::NetTree;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GapLevel {
    pub n: usize,
    /// λ⁻ⁿ times the least gap between distinct left endpoints or distinct right endpoints
    pub a_n: FieldElement,
    /// min(λ, min_{k≤n} a_k)
    pub f_n: FieldElement,
    /// least κ with λ^κ ≤ f(n)
    pub kappa_n: usize,
    /// most distinct covering maps of any level-n net interval
    pub g_n: usize,
    /// (3/(λ·min_{k≤n} a_k))²; the counting argument only needs the gaps
    /// themselves, so the envelope here is not capped at λ
    pub awsc_bound: FieldElement,
}

impl GapLevel {
    pub fn margin(&self) -> FieldElement {
        &self.awsc_bound - &FieldElement::from_int(self.awsc_bound.field(), self.g_n as i64)
    }
}

#[derive(Clone, Debug)]
pub struct GapReport {
    pub lambda: FieldElement,
    pub levels: Vec<GapLevel>,
}

/// Where g(n) is read from.
pub enum NeighborSource<'a> {
    Graph(&'a TransitionGraph),
    Tree(&'a NetTree),
}

fn min_gap(mut values: Vec<FieldElement>) -> Option<FieldElement> {
    values.sort();
    values.dedup();
    values.windows(2).map(|w| &w[1] - &w[0]).min()
}

/// Vertices reachable from the root in exactly n steps, for n = 0..=depth.
pub fn reachable_by_level(graph: &TransitionGraph, depth: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0usize]];
    for _ in 0..depth {
        let mut next: Vec<usize> = out.last().unwrap().iter().flat_map(|&v| graph.vertices[v].edges.iter().filter_map(|e| e.child)).collect();
        next.sort_unstable();
        next.dedup();
        out.push(next);
    }
    out
}

/// f(n) = min(λ, min_{k≤n} a_k) for n = 0..=depth read off a closed graph.
///
/// Two consecutive distinct left endpoints closer than λ^{k+1} belong to maps
/// whose images overlap, so both maps cover the net interval just right of
/// the nearer one and the gap shows up inside one characteristic vector; the
/// same holds for right endpoints. Gaps of λ or more never lower the capped envelope.
pub fn graph_envelope(graph: &TransitionGraph, lambda: &FieldElement, depth: usize) -> Vec<FieldElement> {
    let per_vertex: Vec<Option<FieldElement>> = (0..graph.len()).map(|v| graph.min_endpoint_gap(v)).collect();
    let mut f = lambda.clone();
    reachable_by_level(graph, depth)
        .iter()
        .map(|vs| {
            for &v in vs {
                if let Some(g) = &per_vertex[v] {
                    if g < &f {
                        f = g.clone();
                    }
                }
            }
            f.clone()
        })
        .collect()
}

/// Exact a_n for an equicontractive IFS with λ = 1/b and rational
/// translations: scaled by D·bⁿ (D the common denominator) every left
/// endpoint is an integer, and right endpoints are the same set shifted.
fn integer_grid_gaps(ifs: &WeightedIfs, depth: usize, budget: usize) -> Option<Result<Vec<FieldElement>, IfsError>> {
    use num_integer::Integer;
    use num_traits::{One, ToPrimitive};
    if !ifs.is_equicontractive() || !ifs.field().is_rational() {
        return None;
    }
    let lam = ifs.lambda().as_rational()?;
    if !lam.numer().is_one() {
        return None;
    }
    let b = lam.denom().to_u64()?;
    let ds: Vec<crate::field::Rational> = ifs.maps().iter().map(|m| m.pos.as_rational().cloned()).collect::<Option<_>>()?;
    let d = ds.iter().fold(num_bigint::BigInt::from(1), |acc, x| acc.lcm(x.denom())).to_u64()?;
    let steps: Vec<u64> = ds.iter().map(|x| (x * crate::field::Rational::from_integer(d.into())).to_integer().to_u64()).collect::<Option<_>>()?;
    let mut xs: Vec<u64> = vec![0];
    let mut out = Vec::with_capacity(depth);
    for level in 1..=depth {
        // X·b + D·b·d_j must stay within u64
        if (d as u128) * (b as u128).pow(level as u32 + 1) > u64::MAX as u128 {
            return None;
        }
        let mut next = Vec::with_capacity(xs.len() * steps.len());
        for &x in &xs {
            for &s in &steps {
                next.push(x * b + s * b);
            }
        }
        next.sort_unstable();
        next.dedup();
        if next.len() > budget {
            return Some(Err(IfsError::WordBudget { cap: budget, level, found: next.len() }));
        }
        // distinct maps with a common ratio have distinct positions
        let gap = next.windows(2).map(|w| w[1] - w[0]).min().expect("at least two positions");
        // positions are scaled by D·bⁿ and a_n normalizes by bⁿ
        out.push(FieldElement::from_rational(ifs.field(), crate::field::Rational::new(gap.into(), d.into())));
        xs = next;
    }
    Some(Ok(out))
}

/// a_1..a_depth, exact.
pub fn endpoint_gaps(ifs: &WeightedIfs, depth: usize, word_budget: usize) -> Result<Vec<FieldElement>, IfsError> {
    if let Some(r) = integer_grid_gaps(ifs, depth, word_budget) {
        return r;
    }
    (1..=depth)
        .map(|n| {
            let maps = ifs.lambda_n_maps(n, word_budget)?;
            let lefts = min_gap(maps.iter().map(|(s, _)| s.pos.clone()).collect());
            let rights = min_gap(maps.iter().map(|(s, _)| s.right()).collect());
            let raw = match (lefts, rights) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => unreachable!("at least two maps are enforced at load"),
            };
            Ok(raw * ifs.lambda_pow(n).inverse().expect("λ > 0"))
        })
        .collect()
}

pub fn gap_report(ifs: &WeightedIfs, depth: usize, source: NeighborSource<'_>, word_budget: usize) -> Result<GapReport, IfsError> {
    let lambda = ifs.lambda().clone();
    let g_values: Vec<usize> = match source {
        NeighborSource::Graph(g) => reachable_by_level(g, depth).iter().map(|vs| vs.iter().map(|&v| g.vertices[v].cv.neighbors.len()).max().unwrap_or(0)).collect(),
        NeighborSource::Tree(t) => {
            assert!(t.depth() >= depth && !t.is_local(), "gap_report needs a full tree to the requested depth");
            (0..=depth).map(|n| t.level(n).iter().map(|iv| iv.neighbors.len()).max().unwrap_or(0)).collect()
        }
    };
    let three = FieldElement::from_int(ifs.field(), 3);
    let mut levels = Vec::with_capacity(depth);
    let mut envelope = lambda.clone();
    let mut least: Option<FieldElement> = None;
    for (n, a_n) in (1..=depth).zip(endpoint_gaps(ifs, depth, word_budget)?) {
        if a_n < envelope {
            envelope = a_n.clone();
        }
        if least.as_ref().is_none_or(|l| &a_n < l) {
            least = Some(a_n.clone());
        }
        let mut kappa = 0;
        let mut p = FieldElement::one(ifs.field());
        while p > envelope {
            p = &p * &lambda;
            kappa += 1;
        }
        let s = &three / &(&lambda * least.as_ref().unwrap());
        levels.push(GapLevel { n, a_n, f_n: envelope.clone(), kappa_n: kappa, g_n: g_values[n], awsc_bound: &s * &s });
    }
    Ok(GapReport { lambda, levels })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum WscVerdict {
    /// no new a_n value appeared in the last third of the levels
    SatisfiedUpToDepth {
        a_inf: String,
        depth: usize,
    },
    Undetermined {
        sequence: Vec<String>,
    },
}

pub fn wsc_verdict(report: &GapReport) -> WscVerdict {
    let a: Vec<&FieldElement> = report.levels.iter().map(|l| &l.a_n).collect();
    let undetermined = || WscVerdict::Undetermined { sequence: a.iter().map(|x| x.to_string()).collect() };
    if a.len() < 3 {
        return undetermined();
    }
    let tail_start = a.len() - a.len().div_ceil(3);
    if a[tail_start..].iter().all(|x| a[..tail_start].contains(x)) {
        let a_inf = a.iter().min().unwrap().to_string();
        WscVerdict::SatisfiedUpToDepth { a_inf, depth: a.len() }
    } else {
        undetermined()
    }
}

/// g(n) ≤ (3/(λ·min_{k≤n} a_k))² per level.
pub fn awsc_bound_check(report: &GapReport) -> Vec<bool> {
    report.levels.iter().map(|l| !l.margin().is_negative()).collect()
}

impl GapReport {
    /// Distinct a_n values in order of first appearance.
    pub fn distinct_a(&self) -> Vec<FieldElement> {
        let mut out: Vec<FieldElement> = Vec::new();
        for l in &self.levels {
            if !out.contains(&l.a_n) {
                out.push(l.a_n.clone());
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "n,a_n,f_n,kappa_n,g_n,awsc_bound,margin")?;
        for l in &self.levels {
            writeln!(w, "{},{},{},{},{},{},{}", l.n, l.a_n, l.f_n, l.kappa_n, l.g_n, l.awsc_bound, l.margin())?;
        }
        Ok(())
    }
}
