//! Regularity ledger: the exact regular test, the generalized-regular trend
//! Qₙq⁻ⁿ(Γₙᴸ + Γₙᴿ) and the weak comparability trend of adjacent masses.

use num_traits::{One, Zero};
use serde::Serialize;

use super::qn::QSequence;
use super::windows::{Slot, Window};
use super::{gamma, Side};
use crate::field::{ln_rational, Rational};
use crate::ifs::WeightedIfs;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Increasing,
    Decreasing,
    Mixed,
}

/// Strict monotonicity over a slice of exact values.
pub fn trend(v: &[Rational]) -> Trend {
    if v.windows(2).all(|w| w[1] > w[0]) {
        Trend::Increasing
    } else if v.windows(2).all(|w| w[1] < w[0]) {
        Trend::Decreasing
    } else {
        Trend::Mixed
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GenRegularRow {
    #[serde(serialize_with = "crate::report::ser_rational")]
    pub q: Rational,
    /// Qₙ·q⁻ⁿ·(Γₙᴸ + Γₙᴿ) for n = 1..=D
    #[serde(serialize_with = "crate::report::ser_rationals")]
    pub values: Vec<Rational>,
    /// over the second half of the levels
    pub trend: Trend,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GenRegularVerdict {
    /// some q > 1 in the grid gives an increasing sequence
    NotGeneralizedRegular,
    /// every q > 1 in the grid gives a decreasing sequence
    ConsistentWithGeneralizedRegular,
    Undetermined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparability {
    Bounded,
    Unbounded,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparabilityRow {
    #[serde(serialize_with = "crate::report::ser_rational")]
    pub q: Rational,
    /// c(n, q) = R(n)·q⁻ⁿ
    #[serde(serialize_with = "crate::report::ser_f64s")]
    pub values: Vec<f64>,
    pub verdict: Comparability,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityLedger {
    pub regular: bool,
    /// Q values are exact (true) or lower bounds
    pub q_exact: bool,
    pub gen_regular: Vec<GenRegularRow>,
    pub gen_regular_verdict: GenRegularVerdict,
    /// R(n): largest ratio of adjacent non-gap level-n masses
    #[serde(serialize_with = "crate::report::ser_rationals")]
    pub adjacent_ratio: Vec<Rational>,
    pub comparability: Vec<ComparabilityRow>,
}

/// R(n) for each window level: in a window the center has mass 1 in window
/// units, so the right neighbor's scaled q-sum is the exact ratio.
pub fn adjacent_ratios(windows: &[Vec<Window>]) -> Vec<Rational> {
    windows
        .iter()
        .map(|lvl| {
            let mut best = Rational::one();
            for w in lvl {
                let (Slot::Node { q: qc, .. }, Slot::Node { q: qr, .. }) = (&w.slots[2], &w.slots[3]) else { continue };
                let c: Rational = qc.iter().sum();
                let r: Rational = qr.iter().sum();
                if c.is_zero() || r.is_zero() {
                    continue;
                }
                let x = &r / &c;
                let x = if x < Rational::one() { Rational::one() / x } else { x };
                if x > best {
                    best = x;
                }
            }
            best
        })
        .collect()
}

/// Unbounded when ln R(n) grows faster than n·ln q over the tail, read from
/// the same rate/power fit as the doubling ledger.
fn comparability_verdict(r: &[Rational], q: &Rational) -> Comparability {
    let tail = &r[r.len() / 2..];
    if tail.windows(2).all(|w| w[0] == w[1]) {
        return Comparability::Bounded;
    }
    let ns: Vec<f64> = (r.len() / 2..r.len()).map(|i| (i + 1) as f64).collect();
    let ys: Vec<f64> = tail.iter().map(ln_rational).collect();
    let (rate, power) = super::doubling::fit_rate(&ns, &ys);
    let rate = rate - ln_rational(q);
    let tol = super::doubling::RATE_TOL;
    if rate > tol || (rate >= -tol && power > tol) {
        Comparability::Unbounded
    } else {
        Comparability::Bounded
    }
}

pub fn regularity_checks(ifs: &WeightedIfs, qseq: &QSequence, windows: &[Vec<Window>], q_grid: &[Rational]) -> RegularityLedger {
    let depth = qseq.q.len();
    let gammas: Vec<Rational> = (1..=depth).map(|n| gamma(ifs, n, Side::Left) + gamma(ifs, n, Side::Right)).collect();
    let gen_regular: Vec<GenRegularRow> = q_grid
        .iter()
        .map(|q| {
            let values: Vec<Rational> = (1..=depth).map(|n| &qseq.q[n - 1] * &gammas[n - 1] / q.pow(n as i32)).collect();
            let trend = trend(&values[depth / 2..]);
            GenRegularRow { q: q.clone(), values, trend }
        })
        .collect();
    let above_one: Vec<&GenRegularRow> = gen_regular.iter().filter(|r| r.q > Rational::one()).collect();
    let gen_regular_verdict = if above_one.iter().any(|r| r.trend == Trend::Increasing) {
        GenRegularVerdict::NotGeneralizedRegular
    } else if !above_one.is_empty() && above_one.iter().all(|r| r.trend == Trend::Decreasing) {
        GenRegularVerdict::ConsistentWithGeneralizedRegular
    } else {
        GenRegularVerdict::Undetermined
    };
    let adjacent_ratio = adjacent_ratios(windows);
    let comparability = q_grid
        .iter()
        .map(|q| ComparabilityRow {
            q: q.clone(),
            values: adjacent_ratio.iter().enumerate().map(|(i, r)| crate::field::rational_to_f64(&(r / q.pow(i as i32 + 1)))).collect(),
            verdict: comparability_verdict(&adjacent_ratio, q),
        })
        .collect();
    RegularityLedger { regular: ifs.is_regular(), q_exact: qseq.exact, gen_regular, gen_regular_verdict, adjacent_ratio, comparability }
}
