//! Built-in systems used by the CLI, the demo page and the acceptance suite.

use num_bigint::BigInt;

use crate::field::{FieldElement, NumberField, Rational};
use crate::finite_type::CharacteristicVector;
use crate::ifs::WeightedIfs;
use crate::measure::moran::MoranMeasure;
use crate::spec::System;

pub const NAMES: [&str; 6] = ["osc", "notdoubling", "thirds-255", "golden-bernoulli", "notfull", "cantor-strictex"];

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn equicontractive(ratio: Rational, translations: &[Rational], probs: &[Rational]) -> WeightedIfs {
    let k = NumberField::rationals();
    let r = FieldElement::from_rational(&k, ratio);
    let maps = translations.iter().map(|d| (r.clone(), FieldElement::from_rational(&k, d.clone()))).collect();
    WeightedIfs::new(maps, probs.to_vec()).expect("preset is valid")
}

/// x/2 and x/2 + 1/2 with p = (2/3, 1/3): open set condition, unequal weights.
pub fn osc() -> WeightedIfs {
    equicontractive(q(1, 2), &[q(0, 1), q(1, 2)], &[q(2, 3), q(1, 3)])
}

/// x/3 + {0, 1/6, 1/3, 2/3} with uniform weights; finite type, not doubling.
pub fn notdoubling() -> WeightedIfs {
    equicontractive(q(1, 3), &[q(0, 1), q(1, 6), q(1, 3), q(2, 3)], &vec![q(1, 4); 4])
}

/// x/3 + {0, 1/3, 2/3} with p = (2/5, 1/5, 2/5).
pub fn thirds_255() -> WeightedIfs {
    equicontractive(q(1, 3), &[q(0, 1), q(1, 3), q(2, 3)], &[q(2, 5), q(1, 5), q(2, 5)])
}

/// x/3 + {0, 1/3, 2/3} with uniform weights (Lebesgue measure).
pub fn thirds_uniform() -> WeightedIfs {
    equicontractive(q(1, 3), &[q(0, 1), q(1, 3), q(2, 3)], &vec![q(1, 3); 3])
}

/// x/5 + {0, 1/10, 2/5, 4/5} with p = (1/6, 1/6, 1/2, 1/6); the attractor
/// misses (3/10, 2/5) and (3/5, 4/5).
pub fn notfull() -> WeightedIfs {
    equicontractive(q(1, 5), &[q(0, 1), q(1, 10), q(2, 5), q(4, 5)], &[q(1, 6), q(1, 6), q(1, 2), q(1, 6)])
}

/// Names for the notfull characteristic vectors: "1" is the class of [0, 1],
/// "2" is covered by one map from its left end, "3" by two maps, "4" by one
/// map from the middle.
pub fn notfull_aliases() -> Vec<(CharacteristicVector, &'static str)> {
    let k = NumberField::rationals();
    let e = |n: i64, d: i64| FieldElement::from_rational(&k, q(n, d));
    let cv =
        |len: (i64, i64), offsets: &[(i64, i64)]| CharacteristicVector { length: e(len.0, len.1), neighbors: offsets.iter().map(|&(n, d)| (e(n, d), e(1, 1))).collect() };
    vec![(cv((1, 1), &[(0, 1)]), "1"), (cv((1, 2), &[(0, 1)]), "2"), (cv((1, 2), &[(0, 1), (1, 2)]), "3"), (cv((1, 2), &[(1, 2)]), "4")]
}

/// The golden field Q(ρ), ρ² + ρ − 1 = 0, ρ ∈ (3/5, 7/10).
pub fn golden_field() -> std::sync::Arc<NumberField> {
    let poly = [BigInt::from(-1), BigInt::from(1), BigInt::from(1)];
    NumberField::new(&poly, q(3, 5), q(7, 10)).expect("golden field is valid")
}

/// Bernoulli convolution ρx and ρx + 1 − ρ with ρ = 1/golden ratio, p = (1/2, 1/2).
pub fn golden_bernoulli() -> WeightedIfs {
    let k = golden_field();
    let rho = FieldElement::generator(&k);
    let one = FieldElement::one(&k);
    let maps = vec![(rho.clone(), FieldElement::zero(&k)), (rho.clone(), &one - &rho)];
    WeightedIfs::new(maps, vec![q(1, 2), q(1, 2)]).expect("preset is valid")
}

/// Middle-third Cantor measure with weights (1/3, 2/3), switched to (1/4, 3/4)
/// at levels 1, 2, 4, 8, …
pub fn cantor_strictex() -> MoranMeasure {
    MoranMeasure::powers_of_two((q(1, 3), q(2, 3)), (q(1, 4), q(3, 4)))
}

pub fn by_name(name: &str) -> Option<System> {
    Some(match name {
        "osc" => System::Ifs(osc()),
        "notdoubling" => System::Ifs(notdoubling()),
        "thirds-255" => System::Ifs(thirds_255()),
        "golden-bernoulli" => System::Ifs(golden_bernoulli()),
        "notfull" => System::Ifs(notfull()),
        "cantor-strictex" => System::Moran(cantor_strictex()),
        _ => return None,
    })
}
