//! Middle-third Cantor measure with level-dependent weights.

use num_traits::{One, Zero};
use serde::Serialize;

use super::{BallMeasure, MeasureBounds};
use crate::field::{FieldElement, NumberField, Rational};

/// Levels at which the override pair replaces the default pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexRule {
    /// 1, 2, 4, 8, …
    PowersOf2,
    Explicit(Vec<usize>),
}

impl IndexRule {
    pub fn contains(&self, n: usize) -> bool {
        match self {
            IndexRule::PowersOf2 => n.is_power_of_two(),
            IndexRule::Explicit(v) => v.contains(&n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MoranMeasure {
    default: (Rational, Rational),
    overrides: Vec<(IndexRule, (Rational, Rational))>,
}

/// Depth cap for non-terminating ternary expansions.
const CDF_DEPTH: usize = 512;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MoranBall {
    pub bounds: MeasureBounds,
    /// true when the decomposition terminated and `bounds` is a single value
    pub exact: bool,
}

impl MoranMeasure {
    /// Each pair must be positive and sum to one.
    pub fn new(default: (Rational, Rational), overrides: Vec<(IndexRule, (Rational, Rational))>) -> Result<MoranMeasure, String> {
        let check = |p: &(Rational, Rational)| {
            if p.0 <= Rational::zero() || p.1 <= Rational::zero() || &p.0 + &p.1 != Rational::one() {
                Err(format!("weight pair ({}, {}) must be positive and sum to 1", p.0, p.1))
            } else {
                Ok(())
            }
        };
        check(&default)?;
        for (_, p) in &overrides {
            check(p)?;
        }
        Ok(MoranMeasure { default, overrides })
    }

    pub fn powers_of_two(default: (Rational, Rational), special: (Rational, Rational)) -> MoranMeasure {
        MoranMeasure::new(default, vec![(IndexRule::PowersOf2, special)]).expect("valid weights")
    }

    /// (p₀⁽ⁿ⁾, p₁⁽ⁿ⁾) for level n ≥ 1; the first matching override wins.
    pub fn weights(&self, n: usize) -> &(Rational, Rational) {
        self.overrides.iter().find(|(rule, _)| rule.contains(n)).map(|(_, p)| p).unwrap_or(&self.default)
    }

    pub fn default_pair(&self) -> &(Rational, Rational) {
        &self.default
    }

    pub fn overrides(&self) -> &[(IndexRule, (Rational, Rational))] {
        &self.overrides
    }

    /// μ([0, y]) for y ∈ [0, 1]: (lower, upper, exact).
    fn cdf(&self, y: &Rational) -> (Rational, Rational, bool) {
        let zero = Rational::zero();
        let one = Rational::one();
        if y <= &zero {
            return (zero.clone(), zero, true);
        }
        if y >= &one {
            return (one.clone(), one, true);
        }
        let third = Rational::new(1.into(), 3.into());
        let two_thirds = Rational::new(2.into(), 3.into());
        let three = Rational::from_integer(3.into());
        let mut acc = Rational::zero();
        let mut weight = Rational::one();
        // y is the position relative to the current construction interval
        let mut y = y.clone();
        for n in 1..=CDF_DEPTH {
            let (p0, p1) = self.weights(n);
            if y <= zero {
                return (acc.clone(), acc, true);
            }
            if y >= one {
                acc += &weight;
                return (acc.clone(), acc, true);
            }
            if y <= third {
                weight *= p0;
                y *= &three;
            } else if y < two_thirds {
                acc += &weight * p0;
                return (acc.clone(), acc, true);
            } else {
                acc += &weight * p0;
                weight *= p1;
                y = (y - &two_thirds) * &three;
            }
        }
        (acc.clone(), acc + weight, false)
    }

    /// μ(B(x, r)) for the closed ball.
    pub fn mu_ball(&self, x: &Rational, r: &Rational) -> MoranBall {
        let a = x - r;
        let b = x + r;
        let (bl, bu, be) = self.cdf(&b);
        let (al, au, ae) = self.cdf(&a);
        // the measure has no atoms, so μ([a, b]) = F(b) − F(a)
        let lower = (&bl - &au).max(Rational::zero());
        let upper = bu - al;
        MoranBall { exact: be && ae, bounds: MeasureBounds { lower, upper, depth: CDF_DEPTH } }
    }

    /// Mass of the leftmost level-n construction interval, Π p₀⁽ⁱ⁾.
    pub fn left_corner(&self, n: usize) -> Rational {
        (1..=n).map(|i| self.weights(i).0.clone()).product()
    }
}

/// Exact ball masses; `x` and `r` must be rational.
impl BallMeasure for MoranMeasure {
    fn lambda(&self) -> FieldElement {
        FieldElement::from_rational(&NumberField::rationals(), Rational::new(1.into(), 3.into()))
    }

    fn ball_bounds(&self, x: &FieldElement, r: &FieldElement, _level: usize) -> MeasureBounds {
        let x = x.as_rational().expect("Moran witnesses are rational");
        let r = r.as_rational().expect("Moran radii are rational");
        self.mu_ball(x, r).bounds
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn third_pow(n: usize) -> Rational {
        Rational::new(BigInt::one(), BigInt::from(3).pow(n as u32))
    }

    #[test]
    fn default_rule_corner() {
        let m = MoranMeasure::new((q(1, 3), q(2, 3)), vec![]).unwrap();
        for n in 1..20 {
            let b = m.mu_ball(&q(0, 1), &third_pow(n));
            assert!(b.exact);
            assert_eq!(b.bounds.lower, q(1, 3).pow(n as i32));
        }
    }

    #[test]
    fn override_levels() {
        let m = MoranMeasure::powers_of_two((q(1, 3), q(2, 3)), (q(1, 4), q(3, 4)));
        assert_eq!(m.weights(1).0, q(1, 4));
        assert_eq!(m.weights(3).0, q(1, 3));
        assert_eq!(m.weights(64).0, q(1, 4));
        let b = m.mu_ball(&q(0, 1), &third_pow(3));
        assert_eq!(b.bounds.lower, q(1, 4) * q(1, 4) * q(1, 3));
        assert!(b.exact);
    }

    #[test]
    fn whole_and_gap_balls() {
        let m = MoranMeasure::powers_of_two((q(1, 3), q(2, 3)), (q(1, 4), q(3, 4)));
        assert_eq!(m.mu_ball(&q(1, 2), &q(1, 1)).bounds.lower, q(1, 1));
        // (4/9, 5/9) sits inside the first gap
        let g = m.mu_ball(&q(1, 2), &q(1, 18));
        assert!(g.exact && g.bounds.upper == q(0, 1));
    }

    #[test]
    fn nonterminating_point_gives_bounds() {
        // 1/4 = 0.0202… in base 3 never reaches a gap or an endpoint
        let m = MoranMeasure::powers_of_two((q(1, 3), q(2, 3)), (q(1, 4), q(3, 4)));
        let b = m.mu_ball(&q(3, 8), &q(1, 8));
        assert!(!b.exact);
        assert!(b.bounds.lower < b.bounds.upper);
        assert!(b.bounds.width() < q(1, 1_000_000));
    }

    #[test]
    fn rejects_bad_pairs() {
        assert!(MoranMeasure::new((q(1, 2), q(1, 3)), vec![]).is_err());
    }
}
