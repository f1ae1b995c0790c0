//! Quasi-net doubling ledger: certified bounds on μ(Δ)/μ(Δ*) for each level
//! and the per-q constants qⁿ·min ratio.

use num_traits::Zero;
use serde::Serialize;

use super::windows::{build_windows, sum_bounds, OraclePolicy, SlotMeasure, Window};
use super::Side;
use crate::field::{rational_to_f64, FieldElement, Rational};
use crate::finite_type::TransitionGraph;
use crate::ifs::WeightedIfs;
use crate::measure::{MeasureBounds, OracleBudget};
use crate::net::NetTree;

#[derive(Clone, Debug, Serialize)]
pub struct RatioWitness {
    #[serde(serialize_with = "crate::report::ser_field")]
    pub left: FieldElement,
    #[serde(serialize_with = "crate::report::ser_field")]
    pub right: FieldElement,
    pub flank: Side,
    #[serde(serialize_with = "crate::report::ser_rational")]
    pub lower: Rational,
    #[serde(serialize_with = "crate::report::ser_rational")]
    pub upper: Rational,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelRatio {
    pub n: usize,
    /// distinct windows (symbolic) or intervals (tree) at this level
    pub windows: usize,
    /// windows passing the length condition
    pub checked: usize,
    /// flanks of certified zero mass, where the ratio is +∞
    pub infinite: usize,
    /// certified: every ratio at this level is ≥ m_lo
    #[serde(serialize_with = "crate::report::ser_rational")]
    pub m_lo: Rational,
    /// certified: some ratio at this level is ≤ m_hi
    #[serde(serialize_with = "crate::report::ser_rational")]
    pub m_hi: Rational,
    /// the window attaining m_hi
    pub witness: Option<RatioWitness>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowVerdict {
    /// qⁿ·ratio shows no decay toward 0 over the computed levels
    Bounded,
    /// qⁿ·ratio decays; the witnesses are the windows attaining m_hi
    Fails,
    /// bounds too loose to decide
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct QRow {
    #[serde(serialize_with = "crate::report::ser_rational")]
    pub q: Rational,
    /// qⁿ·m_lo(n)
    #[serde(serialize_with = "crate::report::ser_f64s")]
    pub c_lo: Vec<f64>,
    /// qⁿ·m_hi(n)
    #[serde(serialize_with = "crate::report::ser_f64s")]
    pub c_hi: Vec<f64>,
    /// fitted exponential rate of qⁿ·m(n) over the tail, per level
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub rate: f64,
    /// fitted power of n in the same fit
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub power: f64,
    pub verdict: RowVerdict,
    pub witnesses: Vec<RatioWitness>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DoublingLedger {
    pub mode: &'static str,
    pub levels: Vec<LevelRatio>,
    pub rows: Vec<QRow>,
    pub oracle_depth: usize,
    /// first level left out because of the window budget
    pub truncated_at: Option<usize>,
}

/// Ratio levels 1..=depth. `envelope[n]` is f(n) for n = 0..=depth+1.
pub fn level_ratios(ifs: &WeightedIfs, windows: &[Vec<Window>], envelope: &[FieldElement], measure: &mut SlotMeasure<'_>) -> Result<Vec<LevelRatio>, OracleBudget> {
    let mut out = Vec::with_capacity(windows.len());
    for level in windows {
        let Some(first) = level.first() else { continue };
        let n = first.n;
        let min_len = &envelope[n + 1] * &ifs.lambda_pow(n + 1);
        let mut checked = 0;
        let mut infinite = 0;
        let mut m_lo: Option<Rational> = None;
        let mut m_hi: Option<(Rational, RatioWitness)> = None;
        for w in level {
            if w.center_length() < min_len {
                continue;
            }
            checked += 1;
            let Some(c) = measure.slot(&w.slots[2], &w.ends[2])? else { continue };
            for (side, idx) in [(Side::Left, [1usize, 0]), (Side::Right, [3, 4])] {
                let mut parts: Vec<MeasureBounds> = Vec::new();
                for &s in &idx {
                    match measure.slot(&w.slots[s], &w.ends[s])? {
                        Some(b) => parts.push(b),
                        None => break,
                    }
                }
                if parts.is_empty() {
                    continue;
                }
                let f = sum_bounds(&parts);
                if f.upper.is_zero() {
                    infinite += 1;
                    continue;
                }
                let lo = &c.lower / &f.upper;
                if m_lo.as_ref().is_none_or(|m| &lo < m) {
                    m_lo = Some(lo.clone());
                }
                if f.lower.is_zero() {
                    continue;
                }
                let hi = &c.upper / &f.lower;
                if m_hi.as_ref().is_none_or(|(m, _)| &hi < m) {
                    m_hi = Some((hi.clone(), RatioWitness { left: w.ends[2].0.clone(), right: w.ends[2].1.clone(), flank: side, lower: lo, upper: hi }));
                }
            }
        }
        let (m_hi, witness) = match m_hi {
            Some((m, w)) => (m, Some(w)),
            None => (Rational::zero(), None),
        };
        out.push(LevelRatio { n, windows: level.len(), checked, infinite, m_lo: m_lo.unwrap_or_else(Rational::zero), m_hi, witness });
    }
    Ok(out)
}

/// Least squares for y = a + b·n + c·ln n; returns (b, c).
pub(crate) fn fit_rate(ns: &[f64], ys: &[f64]) -> (f64, f64) {
    let rows: Vec<[f64; 3]> = ns.iter().map(|&n| [1.0, n, n.ln()]).collect();
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for (r, &y) in rows.iter().zip(ys) {
        for i in 0..3 {
            aty[i] += r[i] * y;
            for j in 0..3 {
                ata[i][j] += r[i] * r[j];
            }
        }
    }
    match solve3(ata, aty) {
        Some(x) => (x[1], x[2]),
        None => (0.0, 0.0),
    }
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = a[r][col] / a[col][col];
                let pivot_row = a[col];
                for (x, p) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= f * p;
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some([b[0] / a[0][0], b[1] / a[1][1], b[2] / a[2][2]])
}

/// f(n) = min(λ, min_{k≤n} a_k) for n = 0..=depth from the endpoint gaps.
pub fn tree_envelope(ifs: &WeightedIfs, depth: usize, word_budget: usize) -> Result<Vec<FieldElement>, String> {
    let gaps = crate::separation::endpoint_gaps(ifs, depth, word_budget).map_err(|e| e.to_string())?;
    let mut f = ifs.lambda().clone();
    let mut out = vec![f.clone()];
    for a in gaps {
        if a < f {
            f = a;
        }
        out.push(f.clone());
    }
    Ok(out)
}

/// Fitted (rate, power) of ln m(n) ≈ a + rate·n + power·ln n over the second
/// half of the levels. None if fewer than four usable levels.
fn tail_fit(levels: &[LevelRatio], pick: impl Fn(&LevelRatio) -> &Rational) -> Option<(f64, f64)> {
    let tail = &levels[levels.len() / 2..];
    let pts: Vec<(f64, f64)> = tail.iter().filter(|l| !pick(l).is_zero()).map(|l| (l.n as f64, crate::field::ln_rational(pick(l)))).collect();
    if pts.len() < 4 || pts.len() < tail.len() {
        return None;
    }
    let (ns, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    Some(fit_rate(&ns, &ys))
}

/// Per-level slack below which a fitted rate counts as zero.
pub const RATE_TOL: f64 = 0.005;

fn decays(rate: f64, power: f64) -> bool {
    rate < -RATE_TOL || (rate <= RATE_TOL && power < -RATE_TOL)
}

/// One row per q. The verdict reads the asymptotic model
/// qⁿ·m(n) ≈ A·e^{(rate)n}·n^{power}: Bounded when the certified lower bounds
/// show no decay, Fails when the certified upper bounds do.
pub fn q_rows(levels: &[LevelRatio], qs: &[Rational]) -> Vec<QRow> {
    let lo_fit = tail_fit(levels, |l| &l.m_lo);
    let hi_fit = tail_fit(levels, |l| &l.m_hi);
    qs.iter()
        .map(|q| {
            let lq = crate::field::ln_rational(q);
            let mut c_lo = Vec::with_capacity(levels.len());
            let mut c_hi = Vec::with_capacity(levels.len());
            for l in levels {
                let qn = q.pow(l.n as i32);
                c_lo.push(rational_to_f64(&(&qn * &l.m_lo)));
                c_hi.push(rational_to_f64(&(&qn * &l.m_hi)));
            }
            let lo = lo_fit.map(|(b, c)| (b + lq, c));
            let hi = hi_fit.map(|(b, c)| (b + lq, c));
            let verdict = match (lo, hi) {
                (Some((b, c)), _) if !decays(b, c) => RowVerdict::Bounded,
                (_, Some((b, c))) if decays(b, c) => RowVerdict::Fails,
                _ => RowVerdict::Inconclusive,
            };
            let (rate, power) = lo.or(hi).unwrap_or((f64::NAN, f64::NAN));
            let witnesses = if verdict == RowVerdict::Fails {
                let tail = &levels[levels.len() / 2..];
                tail.iter().filter_map(|l| l.witness.clone()).collect()
            } else {
                Vec::new()
            };
            QRow { q: q.clone(), c_lo, c_hi, rate, power, verdict, witnesses }
        })
        .collect()
}

/// The ledger: ratio levels 1..=depth and one row per q (q = 1 is the doubling row).
#[allow(clippy::too_many_arguments)]
pub fn quasi_net_doubling(
    ifs: &WeightedIfs,
    graph: Option<&TransitionGraph>,
    tree: Option<&NetTree>,
    depth: usize,
    qs: &[Rational],
    policy: OraclePolicy,
    window_budget: usize,
    word_budget: usize,
) -> Result<DoublingLedger, String> {
    let envelope = match graph {
        Some(g) => crate::separation::graph_envelope(g, ifs.lambda(), depth + 1),
        None => tree_envelope(ifs, depth + 1, word_budget)?,
    };
    let ws = build_windows(ifs, graph, tree, depth, window_budget)?;
    let mut ledger = ledger_from_windows(ifs, graph, &ws.levels, ws.mode, &envelope, qs, policy)?;
    ledger.truncated_at = ws.truncated_at;
    Ok(ledger)
}

/// The ledger over precomputed windows; `envelope[n]` is f(n) for n = 0..=depth+1.
pub fn ledger_from_windows(
    ifs: &WeightedIfs,
    graph: Option<&TransitionGraph>,
    windows: &[Vec<Window>],
    mode: &'static str,
    envelope: &[FieldElement],
    qs: &[Rational],
    policy: OraclePolicy,
) -> Result<DoublingLedger, String> {
    let mut measure = SlotMeasure::new(ifs, graph, policy);
    let levels = level_ratios(ifs, windows, envelope, &mut measure).map_err(|e| e.to_string())?;
    let rows = q_rows(&levels, qs);
    Ok(DoublingLedger { mode, levels, rows, oracle_depth: measure.deepest, truncated_at: None })
}

impl DoublingLedger {
    pub fn row(&self, q: &Rational) -> Option<&QRow> {
        self.rows.iter().find(|r| &r.q == q)
    }

    /// CSV rows (n, value-exact, value-float, verdict) for the row `q`, where
    /// value is the certified lower bound qⁿ·m_lo(n).
    pub fn write_csv<W: std::io::Write>(&self, row: &QRow, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,value_exact,value_float,verdict")?;
        let verdict = match row.verdict {
            RowVerdict::Bounded => "bounded",
            RowVerdict::Fails => "fails",
            RowVerdict::Inconclusive => "inconclusive",
        };
        for (l, f) in self.levels.iter().zip(&row.c_lo) {
            let exact = row.q.pow(l.n as i32) * &l.m_lo;
            writeln!(w, "{},{},{},{}", l.n, exact, crate::report::fmt_f64(*f), verdict)?;
        }
        Ok(())
    }
}
