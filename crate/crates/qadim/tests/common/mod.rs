//! Random full-support rational systems and the invariants checked on them.
//! Shared by the property suite and the acceptance runner.
#![allow(dead_code)]

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qadim::dims::qn::q_sequence_tree;
use qadim::dims::{gamma, Side};
use qadim::field::{FieldElement, NumberField, Rational};
use qadim::ifs::WeightedIfs;
use qadim::measure::{mu_ball, mu_net_interval, IntervalOracle};
use qadim::net::NetTree;

pub const BUDGET: usize = 1_000_000;
pub const MAX_DEPTH: usize = 7;

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

/// Ratio menus are kept narrow: cut sets at level n have about
/// m^(n·ln r_min / ln r_max) words.
pub fn ratio_choices(m: usize) -> Vec<Rational> {
    match m {
        2 => vec![q(1, 2), q(3, 5), q(2, 3)],
        3 => vec![q(1, 3), q(2, 5)],
        _ => vec![q(1, 4), q(1, 3)],
    }
}

/// Deepest level used for a system with `m` maps.
pub fn depth_cap(m: usize) -> usize {
    match m {
        2 | 3 => MAX_DEPTH,
        _ => 5,
    }
}

/// Positions dⱼ = c·Σ_{i<j} rᵢ with c chosen so the last image ends at 1;
/// Σ r ≥ 1 makes c ≤ 1, so consecutive images touch or overlap.
pub fn build(ratios: Vec<Rational>, weights: Vec<u32>) -> WeightedIfs {
    let k = NumberField::rationals();
    let m = ratios.len();
    let head: Rational = ratios[..m - 1].iter().sum();
    let c = (Rational::one() - &ratios[m - 1]) / head;
    let mut pos = Rational::zero();
    let mut maps = Vec::new();
    for r in &ratios {
        maps.push((FieldElement::from_rational(&k, r.clone()), FieldElement::from_rational(&k, pos.clone())));
        pos += &c * r;
    }
    let total: u32 = weights.iter().sum();
    let probs = weights.iter().map(|&w| q(w.into(), total.into())).collect();
    WeightedIfs::new(maps, probs).expect("construction is valid")
}

pub fn random_system(rng: &mut ChaCha8Rng) -> WeightedIfs {
    let m = rng.gen_range(2..=4);
    let choices = ratio_choices(m);
    let ratios = (0..m).map(|_| choices[rng.gen_range(0..choices.len())].clone()).collect();
    let weights = (0..m).map(|_| rng.gen_range(1..=6)).collect();
    build(ratios, weights)
}

pub fn check_full_support(ifs: &WeightedIfs) -> Result<(), String> {
    if ifs.full_support() {
        Ok(())
    } else {
        Err("attractor is not [0,1]".into())
    }
}

/// (min p)^Θ·P_{n−1} ≤ Pₙ ≤ P_{n−1} along every parent/child pair.
pub fn check_pn_rel(ifs: &WeightedIfs, depth: usize) -> Result<(), String> {
    let tree = NetTree::build(ifs, depth, BUDGET).map_err(|e| e.to_string())?;
    let c = ifs.min_prob().pow(ifs.theta() as i32);
    for n in 1..=depth {
        for parent in tree.level(n - 1) {
            let pp = parent.p_n();
            for child in &tree.level(n)[parent.children.clone()] {
                let pc = child.p_n();
                if pc > pp {
                    return Err(format!("level {n}: child {pc} > parent {pp}"));
                }
                if pc < &c * &pp {
                    return Err(format!("level {n}: child {pc} < (min p)^Θ·{pp}"));
                }
            }
        }
    }
    Ok(())
}

pub fn check_cut_set_sum(ifs: &WeightedIfs, n: usize) -> Result<(), String> {
    let words = ifs.lambda_n_words(n, BUDGET).map_err(|e| e.to_string())?;
    let total: Rational = words.iter().map(|w| w.mass.clone()).sum();
    if total.is_one() {
        Ok(())
    } else {
        Err(format!("Σ p_u over Λ_{n} = {total}"))
    }
}

/// Oracle bounds for [a, a+len]/100 nest and narrow over ten refinements.
pub fn check_oracle_gap(ifs: &WeightedIfs, a: u32, len: u32) -> Result<(), String> {
    let k = ifs.field().clone();
    let lo = FieldElement::from_rational(&k, q(a.into(), 100));
    let hi = FieldElement::from_rational(&k, q((a + len).min(100).into(), 100));
    let mut o = IntervalOracle::new(ifs, lo, hi, BUDGET);
    let mut prev = o.bounds();
    for step in 0..10 {
        o.deepen().map_err(|e| e.to_string())?;
        let b = o.bounds();
        if b.lower < prev.lower || b.upper > prev.upper || b.width() > prev.width() {
            return Err(format!("step {step}: [{}, {}] after [{}, {}]", b.lower, b.upper, prev.lower, prev.upper));
        }
        prev = b;
    }
    Ok(())
}

/// upper μB(x, λⁿ) ≥ Pₙ(Δₙ(x)) ≥ lower μ(Δₙ(x)) at 20 seeded points.
pub fn check_pn_lower(ifs: &WeightedIfs, depth: usize, seed: u64) -> Result<(), String> {
    let tree = NetTree::build(ifs, depth, BUDGET).map_err(|e| e.to_string())?;
    let k = ifs.field().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..20 {
        let x = FieldElement::from_rational(&k, q(rng.gen_range(0..=997), 997));
        let n = rng.gen_range(1..=depth);
        let iv = &tree.level(n)[tree.locate(&x, n).map_err(|e| e.to_string())?];
        let p = iv.p_n();
        let ball = mu_ball(ifs, &x, &ifs.lambda_pow(n), n + 2).map_err(|e| e.to_string())?;
        let inner = mu_net_interval(ifs, iv, n + 2).map_err(|e| e.to_string())?;
        if ball.upper < p {
            return Err(format!("x = {x}, n = {n}: μB upper {} < Pₙ {p}", ball.upper));
        }
        if p < inner.lower {
            return Err(format!("x = {x}, n = {n}: Pₙ {p} < μ(Δₙ) lower {}", inner.lower));
        }
    }
    Ok(())
}

/// Γₙ on each side equals Pₙ of the extreme net interval.
pub fn check_gamma(ifs: &WeightedIfs, depth: usize) -> Result<(), String> {
    let tree = NetTree::build(ifs, depth, BUDGET).map_err(|e| e.to_string())?;
    for n in 1..=depth {
        let (l, r) = (gamma(ifs, n, Side::Left), gamma(ifs, n, Side::Right));
        if l != tree.level(n)[0].p_n() || r != tree.level(n).last().unwrap().p_n() {
            return Err(format!("level {n}: Γ = ({l}, {r})"));
        }
    }
    Ok(())
}

pub fn check_q1_theta(ifs: &WeightedIfs) -> Result<(), String> {
    let tree = NetTree::build(ifs, 3, BUDGET).map_err(|e| e.to_string())?;
    let s = q_sequence_tree(&tree, 3);
    let bound = ifs.min_prob().pow(-(ifs.theta() as i32));
    if s.q[0] <= bound {
        Ok(())
    } else {
        Err(format!("Q₁ = {} > {bound}", s.q[0]))
    }
}
