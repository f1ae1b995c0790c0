//! Dense univariate polynomials over Q, little-endian coefficient order.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub(crate) type Poly = Vec<BigRational>;

pub(crate) fn trim(p: &mut Poly) {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
}

pub(crate) fn degree(p: &Poly) -> Option<usize> {
    p.iter().rposition(|c| !c.is_zero())
}

pub(crate) fn eval(p: &[BigRational], x: &BigRational) -> BigRational {
    let mut acc = BigRational::zero();
    for c in p.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

pub(crate) fn sub(a: &Poly, b: &Poly) -> Poly {
    let n = a.len().max(b.len());
    let mut out = vec![BigRational::zero(); n];
    for (i, c) in a.iter().enumerate() {
        out[i] += c;
    }
    for (i, c) in b.iter().enumerate() {
        out[i] -= c;
    }
    trim(&mut out);
    out
}

pub(crate) fn mul(a: &Poly, b: &Poly) -> Poly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trim(&mut out);
    out
}

/// Quotient and remainder of `a / b`; `b` must be nonzero.
pub(crate) fn divrem(a: &Poly, b: &Poly) -> (Poly, Poly) {
    let db = degree(b).expect("division by the zero polynomial");
    let lead = b[db].clone();
    let mut r = a.clone();
    trim(&mut r);
    let mut q = vec![BigRational::zero(); r.len().saturating_sub(db).max(1)];
    while let Some(dr) = degree(&r) {
        if dr < db {
            break;
        }
        let c = &r[dr] / &lead;
        let shift = dr - db;
        for (i, bc) in b.iter().enumerate().take(db + 1) {
            r[shift + i] -= &c * bc;
        }
        q[shift] = c;
        trim(&mut r);
    }
    trim(&mut q);
    (q, r)
}

pub(crate) fn derivative(p: &Poly) -> Poly {
    let mut out: Poly = p.iter().enumerate().skip(1).map(|(i, c)| c * BigRational::from_integer(BigInt::from(i))).collect();
    trim(&mut out);
    out
}

/// Inverse of `a` modulo `m` by the extended Euclidean algorithm, or `None`
/// when the two share a factor.
pub(crate) fn inverse_mod(a: &Poly, m: &Poly) -> Option<Poly> {
    let (mut r0, mut r1) = (m.clone(), a.clone());
    trim(&mut r1);
    let (mut s0, mut s1): (Poly, Poly) = (Vec::new(), vec![BigRational::one()]);
    while degree(&r1).is_some() {
        let (q, r) = divrem(&r0, &r1);
        let s = sub(&s0, &mul(&q, &s1));
        r0 = std::mem::replace(&mut r1, r);
        s0 = std::mem::replace(&mut s1, s);
    }
    if degree(&r0) != Some(0) {
        return None;
    }
    let c = r0[0].clone();
    let mut inv: Poly = s0.into_iter().map(|x| x / &c).collect();
    let (_, rem) = divrem(&inv, m);
    inv = rem;
    Some(inv)
}

/// Number of distinct real roots of a squarefree `p` in the half-open interval (lo, hi].
pub(crate) fn sturm_count(p: &Poly, lo: &BigRational, hi: &BigRational) -> usize {
    let mut seq = vec![p.clone(), derivative(p)];
    loop {
        let n = seq.len();
        if degree(&seq[n - 1]).is_none() {
            seq.pop();
            break;
        }
        let (_, r) = divrem(&seq[n - 2], &seq[n - 1]);
        if degree(&r).is_none() {
            break;
        }
        seq.push(r.into_iter().map(|c| -c).collect());
    }
    let changes = |x: &BigRational| {
        let mut last = 0i8;
        let mut count = 0usize;
        for q in &seq {
            let v = eval(q, x);
            let s = if v.is_positive() {
                1
            } else if v.is_negative() {
                -1
            } else {
                0
            };
            if s != 0 {
                if last != 0 && s != last {
                    count += 1;
                }
                last = s;
            }
        }
        count
    };
    changes(lo).saturating_sub(changes(hi))
}
