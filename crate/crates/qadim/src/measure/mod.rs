//! Certified bounds on μ of closed intervals and balls.
//!
//! The oracle walks Λ₀, Λ₁, … keeping only maps whose image crosses the
//! target interval's boundary. Images inside the target are banked into both
//! bounds, disjoint ones are dropped, and whatever still crosses at the final
//! depth counts toward the upper bound only. Identical maps are merged at each
//! depth, so the frontier stays small under overlaps.
//!
//! An image meeting the closed target in a single endpoint is treated as
//! disjoint: it contributes μ of one point, which is zero because these
//! measures have no atoms.

pub mod moran;

use std::collections::HashMap;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::field::{FieldElement, Rational};
use crate::ifs::{Similarity, WeightedIfs};

pub const DEFAULT_EXTRA_DEPTH: usize = 10;
pub const DEFAULT_FRONTIER_BUDGET: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeasureBounds {
    pub lower: Rational,
    pub upper: Rational,
    pub depth: usize,
}

impl MeasureBounds {
    pub fn exact(v: Rational, depth: usize) -> MeasureBounds {
        MeasureBounds { lower: v.clone(), upper: v, depth }
    }

    pub fn width(&self) -> Rational {
        &self.upper - &self.lower
    }

    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("oracle frontier exceeded {cap} maps at depth {}; deepest completed bounds [{}, {}]", .partial.depth + 1, .partial.lower, .partial.upper)]
pub struct OracleBudget {
    pub cap: usize,
    pub partial: Box<MeasureBounds>,
}

/// Incremental oracle for μ([a, b]); each [`IntervalOracle::deepen`] call advances one Λ level.
#[derive(Clone, Debug)]
pub struct IntervalOracle<'a> {
    ifs: &'a WeightedIfs,
    a: FieldElement,
    b: FieldElement,
    inside: Rational,
    frontier: Vec<(Similarity, Rational)>,
    depth: usize,
    lambda_pow: FieldElement,
    budget: usize,
}

enum Place {
    Inside,
    Outside,
    Boundary,
}

impl<'a> IntervalOracle<'a> {
    pub fn new(ifs: &'a WeightedIfs, a: FieldElement, b: FieldElement, budget: usize) -> IntervalOracle<'a> {
        let k = ifs.field();
        let mut o = IntervalOracle { ifs, a, b, inside: Rational::zero(), frontier: Vec::new(), depth: 0, lambda_pow: FieldElement::one(k), budget };
        let root = Similarity::identity(k);
        match o.place(&root) {
            Place::Inside => o.inside = Rational::one(),
            Place::Outside => {}
            Place::Boundary => o.frontier.push((root, Rational::one())),
        }
        o
    }

    pub fn ball(ifs: &'a WeightedIfs, x: &FieldElement, r: &FieldElement, budget: usize) -> IntervalOracle<'a> {
        Self::new(ifs, x - r, x + r, budget)
    }

    fn place(&self, s: &Similarity) -> Place {
        let right = s.right();
        if right <= self.a || s.pos >= self.b {
            return Place::Outside;
        }
        if s.pos >= self.a && right <= self.b {
            return Place::Inside;
        }
        Place::Boundary
    }

    pub fn bounds(&self) -> MeasureBounds {
        let pending: Rational = self.frontier.iter().map(|(_, m)| m.clone()).sum();
        MeasureBounds { lower: self.inside.clone(), upper: &self.inside + pending, depth: self.depth }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn deepen(&mut self) -> Result<(), OracleBudget> {
        let target = &self.lambda_pow * self.ifs.lambda();
        let mut next: HashMap<Similarity, Rational> = HashMap::new();
        let mut banked = Rational::zero();
        let mut stack: Vec<(Similarity, Rational)> = self.frontier.clone();
        while let Some((s, mass)) = stack.pop() {
            for (j, m) in self.ifs.maps().iter().enumerate() {
                let c = s.compose(m);
                let cm = &mass * &self.ifs.probs()[j];
                match self.place(&c) {
                    Place::Outside => {}
                    Place::Inside => banked += cm,
                    Place::Boundary => {
                        if c.ratio <= target {
                            *next.entry(c).or_insert_with(Rational::zero) += cm;
                            if next.len() > self.budget {
                                return Err(OracleBudget { cap: self.budget, partial: Box::new(self.bounds()) });
                            }
                        } else {
                            stack.push((c, cm));
                        }
                    }
                }
            }
        }
        let mut frontier: Vec<(Similarity, Rational)> = next.into_iter().collect();
        frontier.sort_by(|x, y| x.0.pos.cmp(&y.0.pos).then_with(|| x.0.ratio.cmp(&y.0.ratio)));
        self.frontier = frontier;
        self.inside += banked;
        self.lambda_pow = target;
        self.depth += 1;
        Ok(())
    }

    pub fn run_to(&mut self, depth: usize) -> Result<MeasureBounds, OracleBudget> {
        while self.depth < depth && !self.frontier.is_empty() {
            self.deepen()?;
        }
        // an empty frontier is final: the bounds hold at every greater depth
        let mut b = self.bounds();
        b.depth = b.depth.max(depth);
        Ok(b)
    }
}

/// Bounds on μ(B(x, r)) for the closed ball, using Λ words down to depth k.
pub fn mu_ball(ifs: &WeightedIfs, x: &FieldElement, r: &FieldElement, k: usize) -> Result<MeasureBounds, OracleBudget> {
    IntervalOracle::ball(ifs, x, r, DEFAULT_FRONTIER_BUDGET).run_to(k)
}

/// Bounds on μ([a, b]) for a closed interval (typically a net interval).
pub fn mu_interval(ifs: &WeightedIfs, a: &FieldElement, b: &FieldElement, k: usize) -> Result<MeasureBounds, OracleBudget> {
    IntervalOracle::new(ifs, a.clone(), b.clone(), DEFAULT_FRONTIER_BUDGET).run_to(k)
}

pub fn mu_net_interval(ifs: &WeightedIfs, iv: &crate::net::NetInterval, k: usize) -> Result<MeasureBounds, OracleBudget> {
    assert!(k > iv.level || iv.level == 0, "oracle depth must exceed the interval level");
    if iv.is_gap() {
        return Ok(MeasureBounds::exact(Rational::zero(), k));
    }
    mu_interval(ifs, &iv.left, &iv.right, k)
}

/// Deepen until upper ≤ (1 + rel_tol)·lower or `max_depth` is reached.
pub fn mu_interval_adaptive(
    ifs: &WeightedIfs,
    a: &FieldElement,
    b: &FieldElement,
    start: usize,
    max_depth: usize,
    rel_tol: &Rational,
) -> Result<MeasureBounds, OracleBudget> {
    let mut o = IntervalOracle::new(ifs, a.clone(), b.clone(), DEFAULT_FRONTIER_BUDGET);
    let mut bnd = o.run_to(start)?;
    let factor = Rational::one() + rel_tol;
    while o.depth() < max_depth && bnd.upper > &bnd.lower * &factor {
        o.deepen()?;
        bnd = o.bounds();
    }
    Ok(bnd)
}

/// Anything that can bound the mass of closed balls at scales λⁿ.
pub trait BallMeasure {
    /// base of the scales R = λᴺ, r = λⁿ
    fn lambda(&self) -> FieldElement;
    fn ball_bounds(&self, x: &FieldElement, r: &FieldElement, level: usize) -> MeasureBounds;
}

/// IFS oracle with depth = level + `extra`.
pub struct IfsBalls<'a> {
    pub ifs: &'a WeightedIfs,
    pub extra: usize,
}

impl BallMeasure for IfsBalls<'_> {
    fn lambda(&self) -> FieldElement {
        self.ifs.lambda().clone()
    }

    fn ball_bounds(&self, x: &FieldElement, r: &FieldElement, level: usize) -> MeasureBounds {
        match mu_ball(self.ifs, x, r, level + self.extra) {
            Ok(b) => b,
            Err(e) => *e.partial,
        }
    }
}
