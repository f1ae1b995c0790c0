//! Dimension quantities: Γ sums, endpoint and local dimensions, Qₙ,
//! regularity and comparability trends, the quasi-net-doubling ledger and
//! the H(δ) witness estimator.
//!
//! Limits are never asserted. Every number is either exact, a certified
//! bound, or a finite-depth trend, and is labelled as such in reports.

pub mod doubling;
pub mod hdelta;
pub mod qn;
pub mod regularity;
pub mod windows;

use std::collections::HashMap;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::field::{ln_rational, FieldElement, Rational};
use crate::ifs::WeightedIfs;
use crate::net::{expand, NetError, NetInterval, NetTree};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Γₙ: total weight of the words in Λₙ whose image keeps 0 (Left) or 1 (Right)
/// fixed. Only letters fixing that endpoint can occur in such words.
pub fn gamma(ifs: &WeightedIfs, n: usize, side: Side) -> Rational {
    let letters = match side {
        Side::Left => ifs.left_fixing(),
        Side::Right => ifs.right_fixing(),
    };
    let target = ifs.lambda_pow(n);
    edge_words(ifs, &letters, &[FieldElement::one(ifs.field())], &target)
}

/// Σ p_w over words w in `letters` such that ρ·r_w ≤ target < ρ·r_{w⁻} for at
/// least one ρ in `prefix_ratios`. Words with equal ratio are merged.
fn edge_words(ifs: &WeightedIfs, letters: &[usize], prefix_ratios: &[FieldElement], target: &FieldElement) -> Rational {
    let mut total = Rational::zero();
    // (r_w, Σ p_w) for words still too large under at least one prefix
    let mut frontier: HashMap<FieldElement, Rational> = HashMap::from([(FieldElement::one(ifs.field()), Rational::one())]);
    while !frontier.is_empty() {
        let mut next: HashMap<FieldElement, Rational> = HashMap::new();
        for (r, p) in frontier {
            for &j in letters {
                let rw = &r * &ifs.maps()[j].ratio;
                let pw = &p * &ifs.probs()[j];
                let member = prefix_ratios.iter().any(|rho| &(rho * &rw) <= target && &(rho * &r) > target);
                if member {
                    total += &pw;
                }
                if prefix_ratios.iter().any(|rho| &(rho * &rw) > target) {
                    *next.entry(rw).or_insert_with(Rational::zero) += pw;
                }
            }
        }
        frontier = next;
    }
    total
}

/// (Γᴸ_{Δ,n}, Γᴿ_{Δ,n}): weight of the edge paths of length scale λⁿ below Δ,
/// continuing the neighbors of Δ that start at left(Δ) (resp. end at right(Δ)).
pub fn gamma_delta(ifs: &WeightedIfs, iv: &NetInterval, n: usize) -> (Rational, Rational) {
    let target = ifs.lambda_pow(iv.level + n);
    let lefts: Vec<FieldElement> = iv.neighbors.iter().filter(|nb| nb.map.pos == iv.left).map(|nb| nb.map.ratio.clone()).collect();
    let rights: Vec<FieldElement> = iv.neighbors.iter().filter(|nb| nb.map.right() == iv.right).map(|nb| nb.map.ratio.clone()).collect();
    let l = if lefts.is_empty() { Rational::zero() } else { edge_words(ifs, &ifs.left_fixing(), &lefts, &target) };
    let r = if rights.is_empty() { Rational::zero() } else { edge_words(ifs, &ifs.right_fixing(), &rights, &target) };
    (l, r)
}

/// Δₙ(0) (Left) or Δₙ(1) (Right) for n = 0..=depth, built by always taking
/// the first (last) child.
pub fn endpoint_chain(ifs: &WeightedIfs, depth: usize, side: Side) -> Vec<NetInterval> {
    let tree = NetTree::new(ifs, 1);
    let mut chain = vec![tree.level(0)[0].clone()];
    for n in 1..=depth {
        let p = chain.last().unwrap();
        let kids = expand(ifs, &p.left, &p.right, &p.neighbors, &ifs.lambda_pow(n));
        let k = match side {
            Side::Left => kids.into_iter().next(),
            Side::Right => kids.into_iter().last(),
        }
        .expect("every interval has a child");
        chain.push(NetInterval { level: n, left: k.left, right: k.right, neighbors: k.neighbors, parent: None, children: 0..0 });
    }
    chain
}

/// Pₙ values for n = 1..=N at one point, with the finite-depth dimension read-outs.
#[derive(Clone, Debug, Serialize)]
pub struct PnSequence {
    /// Pₙ for n = 1..=N, exact
    #[serde(serialize_with = "crate::report::ser_rationals")]
    pub p_n: Vec<Rational>,
    /// log Pₙ/(n log λ) for n = 1..=N
    #[serde(serialize_with = "crate::report::ser_f64s")]
    pub normalized: Vec<f64>,
    /// when P_{n+1}/Pₙ is one constant over the second half of the levels
    #[serde(serialize_with = "crate::report::ser_opt_rational")]
    pub geometric_ratio: Option<Rational>,
}

impl PnSequence {
    pub fn new(p_n: Vec<Rational>, lambda: &FieldElement) -> PnSequence {
        let ll = lambda.ln();
        let normalized = p_n.iter().enumerate().map(|(i, p)| if p.is_zero() { f64::INFINITY } else { ln_rational(p) / ((i + 1) as f64 * ll) }).collect();
        let geometric_ratio = geometric_tail(&p_n);
        PnSequence { p_n, normalized, geometric_ratio }
    }

    /// log ρ/log λ for a geometric tail; otherwise the largest normalized
    /// value (the finite-depth stand-in for a liminf of Pₙ^{1/n}).
    pub fn endpoint_dim(&self, lambda: &FieldElement) -> f64 {
        match &self.geometric_ratio {
            Some(r) => ln_rational(r) / lambda.ln(),
            None => self.normalized.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// (max, min) of the normalized values over the second half of the levels.
    pub fn tail_extremes(&self) -> (f64, f64) {
        let tail = &self.normalized[self.normalized.len() / 2..];
        (tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max), tail.iter().cloned().fold(f64::INFINITY, f64::min))
    }
}

fn geometric_tail(p: &[Rational]) -> Option<Rational> {
    if p.len() < 3 || p.iter().any(|x| x.is_zero()) {
        return None;
    }
    let start = (p.len() / 2).max(1);
    let r = &p[start] / &p[start - 1];
    p[start..].windows(2).all(|w| &w[1] / &w[0] == r).then_some(r)
}

#[derive(Clone, Debug, Serialize)]
pub struct EndpointDims {
    pub at_zero: PnSequence,
    pub at_one: PnSequence,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub dim_at_zero: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub dim_at_one: f64,
}

pub fn endpoint_dims(ifs: &WeightedIfs, depth: usize) -> EndpointDims {
    let seq = |side| {
        let chain = endpoint_chain(ifs, depth, side);
        PnSequence::new(chain[1..].iter().map(|iv| iv.p_n()).collect(), ifs.lambda())
    };
    let at_zero = seq(Side::Left);
    let at_one = seq(Side::Right);
    EndpointDims { dim_at_zero: at_zero.endpoint_dim(ifs.lambda()), dim_at_one: at_one.endpoint_dim(ifs.lambda()), at_zero, at_one }
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalDim {
    pub x: String,
    /// Δₙ(x) chosen to the right at shared endpoints
    pub rightward: PnSequence,
    /// Δₙ(x) chosen to the left, present when x is an endpoint at some level
    pub leftward: Option<PnSequence>,
    /// max over the tail window of log Pₙ/(n log λ), rightward choice
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub upper: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub lower: f64,
}

pub fn local_dim(ifs: &WeightedIfs, x: &FieldElement, depth: usize, budget: usize) -> Result<LocalDim, NetError> {
    let tree = NetTree::local(ifs, x, depth, budget)?;
    let mut right = Vec::with_capacity(depth);
    let mut left = Vec::with_capacity(depth);
    let mut tie = false;
    for n in 1..=depth {
        let (i, other) = tree.locate_both(x, n)?;
        let pr = tree.level(n)[i].p_n();
        let pl = match other {
            Some(j) => {
                tie = true;
                tree.level(n)[j].p_n()
            }
            None => pr.clone(),
        };
        right.push(pr);
        left.push(pl);
    }
    let rightward = PnSequence::new(right, ifs.lambda());
    let (upper, lower) = match &rightward.geometric_ratio {
        Some(_) => {
            let d = rightward.endpoint_dim(ifs.lambda());
            (d, d)
        }
        None => rightward.tail_extremes(),
    };
    Ok(LocalDim { x: x.to_string(), leftward: tie.then(|| PnSequence::new(left, ifs.lambda())), rightward, upper, lower })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn gamma_examples() {
        let nd = presets::notdoubling();
        let osc = presets::osc();
        let th = presets::thirds_255();
        for n in 1..8 {
            assert_eq!(gamma(&nd, n, Side::Left), q(1, 4).pow(n as i32));
            assert_eq!(gamma(&osc, n, Side::Left), q(2, 3).pow(n as i32));
            assert_eq!(gamma(&th, n, Side::Right), q(2, 5).pow(n as i32));
        }
    }

    #[test]
    fn gamma_non_equicontractive() {
        // ratios 1/2 (fixing 0) and 1/4 (fixing 1): λ² = 1/16 needs 0000 on the left, 11 on the right
        let k = crate::field::NumberField::rationals();
        let e = |n, d| FieldElement::from_rational(&k, q(n, d));
        let ifs = WeightedIfs::new(vec![(e(1, 2), e(0, 1)), (e(1, 4), e(3, 4))], vec![q(1, 3), q(2, 3)]).unwrap();
        assert_eq!(gamma(&ifs, 2, Side::Left), q(1, 81));
        assert_eq!(gamma(&ifs, 2, Side::Right), q(4, 9));
        let ch = endpoint_chain(&ifs, 6, Side::Left);
        for (n, iv) in ch.iter().enumerate().skip(1) {
            assert_eq!(gamma(&ifs, n, Side::Left), iv.p_n());
        }
    }

    #[test]
    fn gamma_delta_root_and_regular() {
        let ifs = presets::notdoubling();
        let t = NetTree::build(&ifs, 3, 100_000).unwrap();
        assert_eq!(gamma_delta(&ifs, &t.level(0)[0], 4), (gamma(&ifs, 4, Side::Left), gamma(&ifs, 4, Side::Right)));
        for iv in t.level(3) {
            let (l, r) = gamma_delta(&ifs, iv, 3);
            let has_l = iv.neighbors.iter().any(|nb| nb.map.pos == iv.left);
            assert_eq!(l, if has_l { q(1, 64) } else { q(0, 1) });
            assert!(r.is_zero() || r == q(1, 64));
        }
    }

    #[test]
    fn endpoint_examples() {
        let nd = endpoint_dims(&presets::notdoubling(), 12);
        assert_eq!(nd.at_zero.geometric_ratio, Some(q(1, 4)));
        assert!((nd.dim_at_zero - 4f64.ln() / 3f64.ln()).abs() < 1e-12);
        let osc = endpoint_dims(&presets::osc(), 10);
        assert!((osc.dim_at_zero - 1.5f64.ln() / 2f64.ln()).abs() < 1e-12);
        assert!((osc.dim_at_one - 3f64.ln() / 2f64.ln()).abs() < 1e-12);
        let th = endpoint_dims(&presets::thirds_255(), 8);
        assert!((th.dim_at_zero - 2.5f64.ln() / 3f64.ln()).abs() < 1e-12);
        assert!((th.dim_at_one - th.dim_at_zero).abs() < 1e-15);
    }

    #[test]
    fn local_dim_thirds_half() {
        let ifs = presets::thirds_255();
        let x = FieldElement::from_rational(ifs.field(), q(1, 2));
        let ld = local_dim(&ifs, &x, 10, 100_000).unwrap();
        assert!(ld.leftward.is_none());
        for (n, p) in ld.rightward.p_n.iter().enumerate() {
            assert_eq!(p, &q(1, 5).pow(n as i32 + 1));
        }
        assert!((ld.upper - 5f64.ln() / 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn local_dim_reports_both_ties() {
        let ifs = presets::notdoubling();
        let x = FieldElement::from_rational(ifs.field(), q(1, 2));
        let ld = local_dim(&ifs, &x, 8, 100_000).unwrap();
        let left = ld.leftward.unwrap();
        assert!(left.p_n[7] > ld.rightward.p_n[7]);
    }

    #[test]
    fn local_dim_at_zero_matches_endpoint() {
        let ifs = presets::osc();
        let ld = local_dim(&ifs, &FieldElement::zero(ifs.field()), 10, 100_000).unwrap();
        let ed = endpoint_dims(&ifs, 10);
        assert_eq!(ld.rightward.p_n, ed.at_zero.p_n);
    }
}
