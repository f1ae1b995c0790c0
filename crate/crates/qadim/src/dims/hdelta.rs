//! H(δ) lower estimates from witness triples (x, R = λᴺ, r = λⁿ), n ≥ (1+δ)N.
//!
//! Each triple contributes log(lower μB(x,R) / upper μB(x,r)) / log(R/r),
//! which lower-bounds the exponent that triple forces. Small N are skipped:
//! the constant in the definition of H(δ) absorbs any finite set of coarse
//! scales, so only N ≥ ⌈D/4⌉ is sampled.

use std::collections::HashMap;

use num_traits::Zero;
use serde::Serialize;

use crate::field::{ln_rational, FieldElement, Rational};
use crate::ifs::WeightedIfs;
use crate::measure::moran::MoranMeasure;
use crate::measure::{BallMeasure, MeasureBounds};
use crate::net::{NetError, NetTree};

#[derive(Clone, Debug)]
pub enum Witness {
    /// scan every admissible (N, n) with N_min ≤ N and n ≤ D
    Point(FieldElement),
    /// a fixed triple from a construction
    Triple { x: FieldElement, big: usize, small: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct Triple {
    #[serde(serialize_with = "crate::report::ser_field")]
    pub x: FieldElement,
    /// R = λᴺ
    pub big: usize,
    /// r = λⁿ
    pub small: usize,
    #[serde(serialize_with = "crate::report::ser_rational")]
    pub mass_big_lower: Rational,
    #[serde(serialize_with = "crate::report::ser_rational")]
    pub mass_small_upper: Rational,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub exponent: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HDeltaEstimate {
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub delta: f64,
    pub depth: usize,
    pub n_min: usize,
    /// best certified exponent; 0 when no triple was admissible
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub value: f64,
    pub best: Option<Triple>,
    pub triples_evaluated: usize,
    pub warning: Option<String>,
}

pub fn default_n_min(depth: usize) -> usize {
    depth.div_ceil(4)
}

/// Smallest n with n ≥ (1+δ)N, δ given exactly.
pub fn min_small(big: usize, delta: &Rational) -> usize {
    let need = (Rational::from_integer(1.into()) + delta) * Rational::from_integer(big.into());
    need.ceil().to_integer().try_into().expect("scale index fits usize")
}

struct BallCache<'a, M: BallMeasure + ?Sized> {
    measure: &'a M,
    lambda_pows: Vec<FieldElement>,
    cache: HashMap<(FieldElement, usize), MeasureBounds>,
}

impl<'a, M: BallMeasure + ?Sized> BallCache<'a, M> {
    fn new(measure: &'a M, depth: usize) -> Self {
        let lam = measure.lambda();
        let mut pows = vec![FieldElement::one(lam.field())];
        for _ in 0..depth + 2 {
            let next = pows.last().unwrap() * &lam;
            pows.push(next);
        }
        BallCache { measure, lambda_pows: pows, cache: HashMap::new() }
    }

    fn get(&mut self, x: &FieldElement, level: usize) -> &MeasureBounds {
        let key = (x.clone(), level);
        if !self.cache.contains_key(&key) {
            let b = self.measure.ball_bounds(x, &self.lambda_pows[level], level);
            self.cache.insert(key.clone(), b);
        }
        &self.cache[&key]
    }
}

pub fn h_delta_estimate<M: BallMeasure + ?Sized>(measure: &M, witnesses: &[Witness], delta: &Rational, depth: usize, n_min: usize) -> HDeltaEstimate {
    let ll = -measure.lambda().ln();
    let mut cache = BallCache::new(measure, depth);
    let mut best: Option<Triple> = None;
    let mut evaluated = 0;
    let mut consider = |x: &FieldElement, big: usize, small: usize, cache: &mut BallCache<'_, M>| {
        let lo = cache.get(x, big).lower.clone();
        let hi = cache.get(x, small).upper.clone();
        evaluated += 1;
        if lo.is_zero() || hi.is_zero() {
            return;
        }
        let exponent = (ln_rational(&lo) - ln_rational(&hi)) / ((small - big) as f64 * ll);
        if best.as_ref().is_none_or(|b| exponent > b.exponent) {
            best = Some(Triple { x: x.clone(), big, small, mass_big_lower: lo, mass_small_upper: hi, exponent });
        }
    };
    for w in witnesses {
        match w {
            Witness::Point(x) => {
                for big in n_min..=depth {
                    let from = min_small(big, delta).max(big + 1);
                    for small in from..=depth {
                        consider(x, big, small, &mut cache);
                    }
                }
            }
            Witness::Triple { x, big, small } => {
                if *big >= n_min && *small <= depth && *small >= min_small(*big, delta) && small > big {
                    consider(x, *big, *small, &mut cache);
                }
            }
        }
    }
    let warning = (evaluated == 0).then(|| "no admissible witness triple; reporting 0".to_string());
    let value = best.as_ref().map_or(0.0, |b| b.exponent.max(0.0));
    HDeltaEstimate { delta: crate::field::rational_to_f64(delta), depth, n_min, value, best, triples_evaluated: evaluated, warning }
}

/// Endpoints and midpoints of the level-`level` net intervals.
pub fn net_points(ifs: &WeightedIfs, level: usize, budget: usize) -> Result<Vec<Witness>, NetError> {
    let tree = NetTree::build(ifs, level, budget)?;
    let two = FieldElement::from_int(ifs.field(), 2);
    let mut pts: Vec<FieldElement> = Vec::new();
    for iv in tree.level(level) {
        pts.push(iv.left.clone());
        pts.push(&(&iv.left + &iv.right) / &two);
    }
    pts.push(FieldElement::one(ifs.field()));
    pts.sort();
    pts.dedup();
    Ok(pts.into_iter().map(Witness::Point).collect())
}

/// Midpoint of S_{0 1^{N+k}}[0, 1] with R = λᴺ, r = λ^{N+k+2}, k = ⌊δN⌋, for
/// every N that fits in the depth. Built for two-map systems whose first map
/// fixes 0 and second fixes 1.
pub fn osc_family(ifs: &WeightedIfs, delta: &Rational, depth: usize, n_min: usize) -> Vec<Witness> {
    let two = FieldElement::from_int(ifs.field(), 2);
    let mut out = Vec::new();
    for big in n_min.max(1)..=depth {
        let k: usize = (delta * Rational::from_integer(big.into())).floor().to_integer().try_into().unwrap();
        let small = big + k + 2;
        if small > depth {
            break;
        }
        let mut letters = vec![0u8];
        letters.extend(std::iter::repeat_n(1u8, big + k));
        let w = ifs.word(&letters);
        let x = &(w.left() + &w.right()) / &two;
        out.push(Witness::Triple { x, big, small });
    }
    out
}

/// Witnesses along the net-interval path `[first, stay × (N−1), leave × (n−N+1)]`
/// of child order indices: midpoints of the chain's intervals at levels n−1,
/// n and n+1, paired with R = λᴺ, r = λⁿ for the smallest admissible n and the
/// next two.
pub fn path_family(ifs: &WeightedIfs, first: usize, stay: usize, leave: usize, delta: &Rational, depth: usize, n_min: usize) -> Result<Vec<Witness>, NetError> {
    let two = FieldElement::from_int(ifs.field(), 2);
    let mut out = Vec::new();
    for big in n_min.max(1)..=depth {
        let from = min_small(big, delta).max(big + 1);
        if from > depth {
            break;
        }
        for small in from..=(from + 2).min(depth) {
            let mut path = vec![first];
            path.extend(std::iter::repeat_n(stay, big - 1));
            path.extend(std::iter::repeat_n(leave, small - big + 1));
            let chain = NetTree::descend(ifs, &path)?;
            for m in [small - 1, small, small + 1] {
                let iv = &chain[m];
                out.push(Witness::Triple { x: &(&iv.left + &iv.right) / &two, big, small });
            }
        }
    }
    Ok(out)
}

/// 0 and the endpoints of the level ≤ `level` construction intervals of the
/// middle-third Cantor set.
pub fn cantor_points(level: usize) -> Vec<Witness> {
    let k = crate::field::NumberField::rationals();
    let mut lefts: Vec<Rational> = vec![Rational::zero()];
    let mut pts: Vec<Rational> = vec![Rational::zero(), Rational::from_integer(1.into())];
    let mut len = Rational::from_integer(1.into());
    let three = Rational::from_integer(3.into());
    for _ in 0..level {
        len /= &three;
        lefts = lefts.iter().flat_map(|a| [a.clone(), a + &len * Rational::from_integer(2.into())]).collect();
        for a in &lefts {
            pts.push(a.clone());
            pts.push(a + &len);
        }
    }
    pts.sort();
    pts.dedup();
    pts.into_iter().map(|p| Witness::Point(FieldElement::from_rational(&k, p))).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct AdjacentScale {
    pub n: usize,
    #[serde(serialize_with = "crate::report::ser_rational")]
    pub ratio_lower: Rational,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub exponent: f64,
}

/// μB(x, 3^{−(n−1)}) / μB(x, 3^{−n}) at each given n, as a certified exponent.
pub fn moran_adjacent_scales(m: &MoranMeasure, x: &Rational, ns: &[usize]) -> Vec<AdjacentScale> {
    let third = Rational::new(1.into(), 3.into());
    ns.iter()
        .map(|&n| {
            let big = m.mu_ball(x, &third.pow(n as i32 - 1)).bounds.lower;
            let small = m.mu_ball(x, &third.pow(n as i32)).bounds.upper;
            let ratio_lower = &big / &small;
            AdjacentScale { n, exponent: ln_rational(&ratio_lower) / 3f64.ln(), ratio_lower }
        })
        .collect()
}
