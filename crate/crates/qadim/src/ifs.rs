//! Weighted iterated function systems of orientation-preserving similarities
//! of [0,1], and the scale-λⁿ word sets Λₙ.

use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::field::{FieldElement, NumberField, Rational};

pub const DEFAULT_WORD_BUDGET: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IfsError {
    #[error("an IFS needs at least two maps, got {0}")]
    TooFewMaps(usize),
    #[error("{maps} maps but {probs} probabilities")]
    ProbCount { maps: usize, probs: usize },
    #[error("probabilities sum to {0}")]
    ProbSum(String),
    #[error("probability p{0} = {1} is not positive")]
    NonPositiveProb(usize, String),
    #[error("ratio r{0} = {1} is not in (0, 1)")]
    RatioRange(usize, String),
    #[error("maps {0} and {1} are identical")]
    DuplicateMap(usize, usize),
    #[error("the convex hull of the attractor is not [0,1]: {0}")]
    Hull(String),
    #[error("mixed number fields in one IFS")]
    MixedField,
    #[error("word budget of {cap} exceeded at level {level} ({found} words enumerated)")]
    WordBudget { cap: usize, level: usize, found: usize },
}

/// The similarity x ↦ ratio·x + pos, i.e. the image of [0,1] is [pos, pos + ratio].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Similarity {
    pub pos: FieldElement,
    pub ratio: FieldElement,
}

impl Similarity {
    pub fn identity(field: &Arc<NumberField>) -> Similarity {
        Similarity { pos: FieldElement::zero(field), ratio: FieldElement::one(field) }
    }

    /// self ∘ other
    pub fn compose(&self, other: &Similarity) -> Similarity {
        Similarity { pos: &self.pos + &(&self.ratio * &other.pos), ratio: &self.ratio * &other.ratio }
    }

    pub fn right(&self) -> FieldElement {
        &self.pos + &self.ratio
    }

    pub fn apply(&self, x: &FieldElement) -> FieldElement {
        &self.pos + &(&self.ratio * x)
    }
}

#[derive(Clone, Debug)]
pub struct Word {
    pub letters: Vec<u8>,
    pub map: Similarity,
    pub mass: Rational,
}

impl Word {
    pub fn ratio(&self) -> &FieldElement {
        &self.map.ratio
    }

    pub fn left(&self) -> &FieldElement {
        &self.map.pos
    }

    pub fn right(&self) -> FieldElement {
        self.map.right()
    }
}

#[derive(Clone, Debug)]
pub struct WeightedIfs {
    field: Arc<NumberField>,
    maps: Vec<Similarity>,
    probs: Vec<Rational>,
    lambda: FieldElement,
    r_max: FieldElement,
    theta: usize,
    equicontractive: bool,
    full_support: bool,
}

impl WeightedIfs {
    /// Validates and canonicalizes: maps are sorted by (S_j(0), r_j) with
    /// their probabilities carried along.
    pub fn new(maps: Vec<(FieldElement, FieldElement)>, probs: Vec<Rational>) -> Result<WeightedIfs, IfsError> {
        let m = maps.len();
        if m < 2 {
            return Err(IfsError::TooFewMaps(m));
        }
        if probs.len() != m {
            return Err(IfsError::ProbCount { maps: m, probs: probs.len() });
        }
        let field = maps[0].0.field().clone();
        for (r, d) in &maps {
            if r.field().degree() != field.degree() || d.field().degree() != field.degree() {
                return Err(IfsError::MixedField);
            }
        }
        for (j, p) in probs.iter().enumerate() {
            if !p.is_positive() {
                return Err(IfsError::NonPositiveProb(j, p.to_string()));
            }
        }
        let total: Rational = probs.iter().sum();
        if !total.is_one() {
            return Err(IfsError::ProbSum(total.to_string()));
        }
        let one = FieldElement::one(&field);
        for (j, (r, _)) in maps.iter().enumerate() {
            if !r.is_positive() || r >= &one {
                return Err(IfsError::RatioRange(j, r.to_string()));
            }
        }
        let mut tagged: Vec<(Similarity, Rational, usize)> =
            maps.into_iter().zip(probs).enumerate().map(|(j, ((r, d), p))| (Similarity { pos: d, ratio: r }, p, j)).collect();
        tagged.sort_by(|a, b| a.0.pos.cmp(&b.0.pos).then_with(|| a.0.ratio.cmp(&b.0.ratio)));
        for w in tagged.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(IfsError::DuplicateMap(w[0].2.min(w[1].2), w[0].2.max(w[1].2)));
            }
        }
        let (maps, probs): (Vec<Similarity>, Vec<Rational>) = tagged.into_iter().map(|(s, p, _)| (s, p)).unzip();
        if !maps[0].pos.is_zero() {
            return Err(IfsError::Hull(format!("leftmost image starts at {}", maps[0].pos)));
        }
        if maps.iter().any(|s| s.pos.is_negative()) {
            return Err(IfsError::Hull("an image starts below 0".into()));
        }
        let max_right = maps.iter().map(|s| s.right()).max().unwrap();
        if max_right != one {
            return Err(IfsError::Hull(format!("rightmost image ends at {max_right}")));
        }
        let lambda = maps.iter().map(|s| s.ratio.clone()).min().unwrap();
        let r_max = maps.iter().map(|s| s.ratio.clone()).max().unwrap();
        let equicontractive = lambda == r_max;
        let lambda_sq = &lambda * &lambda;
        let mut theta = 0usize;
        let mut pow = r_max.clone();
        while pow >= lambda_sq {
            pow = &pow * &r_max;
            theta += 1;
        }
        let mut reach = FieldElement::zero(&field);
        let mut full_support = true;
        for s in &maps {
            if s.pos > reach {
                full_support = false;
            }
            let r = s.right();
            if r > reach {
                reach = r;
            }
        }
        Ok(WeightedIfs { field, maps, probs, lambda, r_max, theta, equicontractive, full_support })
    }

    pub fn field(&self) -> &Arc<NumberField> {
        &self.field
    }

    pub fn maps(&self) -> &[Similarity] {
        &self.maps
    }

    pub fn probs(&self) -> &[Rational] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// λ = min r_j
    pub fn lambda(&self) -> &FieldElement {
        &self.lambda
    }

    pub fn lambda_pow(&self, n: usize) -> FieldElement {
        self.lambda.pow(n as u32)
    }

    pub fn r_max(&self) -> &FieldElement {
        &self.r_max
    }

    /// Least Θ with (max r)^(Θ+1) < λ².
    pub fn theta(&self) -> usize {
        self.theta
    }

    pub fn is_equicontractive(&self) -> bool {
        self.equicontractive
    }

    pub fn full_support(&self) -> bool {
        self.full_support
    }

    pub fn min_prob(&self) -> &Rational {
        self.probs.iter().min().unwrap()
    }

    /// p₀ = p_{m−1} = min p and all ratios equal.
    pub fn is_regular(&self) -> bool {
        let min = self.min_prob();
        self.equicontractive && &self.probs[0] == min && &self.probs[self.len() - 1] == min
    }

    /// Letters whose map fixes 0.
    pub fn left_fixing(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.maps[j].pos.is_zero()).collect()
    }

    /// Letters whose map fixes 1.
    pub fn right_fixing(&self) -> Vec<usize> {
        let one = FieldElement::one(&self.field);
        (0..self.len()).filter(|&j| self.maps[j].right() == one).collect()
    }

    pub fn word(&self, letters: &[u8]) -> Word {
        let mut map = Similarity::identity(&self.field);
        let mut mass = Rational::one();
        for &j in letters {
            map = map.compose(&self.maps[j as usize]);
            mass *= &self.probs[j as usize];
        }
        Word { letters: letters.to_vec(), map, mass }
    }

    /// Λₙ = {u : r_u ≤ λⁿ < r_{u⁻}} in lexicographic order.
    pub fn lambda_n_words(&self, n: usize, cap: usize) -> Result<Vec<Word>, IfsError> {
        assert!(n >= 1);
        let target = self.lambda_pow(n);
        let mut out = Vec::new();
        let mut stack = vec![self.word(&[])];
        while let Some(w) = stack.pop() {
            // push children in reverse so the lexicographically first is popped first
            for j in (0..self.len()).rev() {
                let mut letters = w.letters.clone();
                letters.push(j as u8);
                let child = Word { letters, map: w.map.compose(&self.maps[j]), mass: &w.mass * &self.probs[j] };
                if child.map.ratio <= target {
                    out.push(child);
                    if out.len() > cap {
                        return Err(IfsError::WordBudget { cap, level: n, found: out.len() });
                    }
                } else {
                    stack.push(child);
                }
            }
        }
        out.sort_by(|a, b| a.letters.cmp(&b.letters));
        Ok(out)
    }

    /// All distinct (position, ratio) maps of Λₙ with summed masses, ordered by
    /// position then ratio. Much smaller than Λₙ itself under heavy overlap.
    pub fn lambda_n_maps(&self, n: usize, cap: usize) -> Result<Vec<(Similarity, Rational)>, IfsError> {
        let mut frontier: Vec<(Similarity, Rational)> = vec![(Similarity::identity(&self.field), Rational::one())];
        for level in 1..=n {
            let target = self.lambda_pow(level);
            let mut next: std::collections::HashMap<Similarity, Rational> = std::collections::HashMap::new();
            let mut stack = frontier;
            while let Some((s, mass)) = stack.pop() {
                for j in 0..self.len() {
                    let child = s.compose(&self.maps[j]);
                    let cm = &mass * &self.probs[j];
                    if child.ratio <= target {
                        *next.entry(child).or_insert_with(Rational::zero) += cm;
                        if next.len() > cap {
                            return Err(IfsError::WordBudget { cap, level, found: next.len() });
                        }
                    } else {
                        stack.push((child, cm));
                    }
                }
            }
            let mut v: Vec<_> = next.into_iter().collect();
            v.sort_by(|a, b| a.0.pos.cmp(&b.0.pos).then_with(|| a.0.ratio.cmp(&b.0.ratio)));
            frontier = v;
        }
        Ok(frontier)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn rational_ifs(ratios: &[(i64, i64)], trans: &[(i64, i64)], probs: &[(i64, i64)]) -> Result<WeightedIfs, IfsError> {
        let k = NumberField::rationals();
        let maps = ratios.iter().zip(trans).map(|(&(a, b), &(c, d))| (FieldElement::from_rational(&k, q(a, b)), FieldElement::from_rational(&k, q(c, d)))).collect();
        WeightedIfs::new(maps, probs.iter().map(|&(a, b)| q(a, b)).collect())
    }

    #[test]
    fn lambda_n_unequal_ratios() {
        let ifs = rational_ifs(&[(1, 2), (1, 4)], &[(0, 1), (3, 4)], &[(1, 2), (1, 2)]).unwrap();
        let words: Vec<Vec<u8>> = ifs.lambda_n_words(1, 100).unwrap().into_iter().map(|w| w.letters).collect();
        assert_eq!(words, vec![vec![0, 0], vec![0, 1], vec![1]]);
        assert_eq!(ifs.theta(), 4);
    }

    #[test]
    fn equicontractive_words_and_theta() {
        let ifs = presets::osc();
        assert_eq!(ifs.lambda_n_words(3, 100).unwrap().len(), 8);
        assert_eq!(ifs.theta(), 2);
        let thirds = presets::thirds_255();
        assert_eq!(thirds.lambda_n_words(1, 100).unwrap().len(), 3);
        assert_eq!(thirds.theta(), 2);
    }

    #[test]
    fn support_flags() {
        assert!(presets::thirds_255().full_support());
        assert!(presets::osc().full_support());
        assert!(!presets::notfull().full_support());
        assert!(presets::notdoubling().is_regular());
        assert!(!presets::thirds_255().is_regular());
    }

    #[test]
    fn rejects_invalid_systems() {
        let err = rational_ifs(&[(1, 3); 3], &[(0, 1), (1, 3), (2, 3)], &[(1, 2); 3]).unwrap_err();
        assert_eq!(err.to_string(), "probabilities sum to 3/2");
        assert!(matches!(rational_ifs(&[(1, 1), (1, 2)], &[(0, 1), (1, 2)], &[(1, 2); 2]), Err(IfsError::RatioRange(0, _))));
        assert!(matches!(rational_ifs(&[(1, 2), (1, 2)], &[(0, 1), (0, 1)], &[(1, 2); 2]), Err(IfsError::DuplicateMap(0, 1))));
        assert!(matches!(rational_ifs(&[(1, 2), (1, 2)], &[(1, 8), (1, 2)], &[(1, 2); 2]), Err(IfsError::Hull(_))));
        assert!(matches!(rational_ifs(&[(1, 2)], &[(0, 1)], &[(1, 1)]), Err(IfsError::TooFewMaps(1))));
    }

    #[test]
    fn sorting_carries_probabilities() {
        let ifs = rational_ifs(&[(1, 3), (1, 3), (1, 3)], &[(2, 3), (0, 1), (1, 3)], &[(1, 2), (1, 3), (1, 6)]).unwrap();
        assert_eq!(ifs.probs(), &[q(1, 3), q(1, 6), q(1, 2)]);
    }

    #[test]
    fn word_budget_is_reported() {
        let ifs = presets::thirds_255();
        assert_eq!(ifs.lambda_n_words(4, 10).unwrap_err(), IfsError::WordBudget { cap: 10, level: 4, found: 11 });
    }

    #[test]
    fn maps_merge_overlaps() {
        let ifs = presets::notdoubling();
        let maps = ifs.lambda_n_maps(2, 1000).unwrap();
        assert!(maps.len() < 16);
        let total: Rational = maps.iter().map(|(_, m)| m.clone()).sum();
        assert!(total.is_one());
    }
}
