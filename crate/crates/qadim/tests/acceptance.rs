//! Acceptance run: one PASS/FAIL line per criterion, with the individual
//! checks listed above it. Exits nonzero when any criterion fails.
//!
//! Expected values are computed here from closed forms or by independent
//! routes (product formulas, direct oracle runs), never read back from the
//! code under test.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qadim::analysis::{self, AnalysisConfig, Command, Subject};
use qadim::dims::doubling::{quasi_net_doubling, RowVerdict};
use qadim::dims::hdelta::{cantor_points, h_delta_estimate, moran_adjacent_scales, osc_family, path_family};
use qadim::dims::qn::{q_sequence_graph, qa_upper_bound};
use qadim::dims::regularity::{regularity_checks, GenRegularVerdict, Trend};
use qadim::dims::windows::{build_windows, OraclePolicy};
use qadim::dims::{endpoint_chain, endpoint_dims, local_dim, Side};
use qadim::field::{parse_decimal, FieldElement, Rational};
use qadim::finite_type::{detect_finite_type, FiniteTypeVerdict, TransitionGraph};
use qadim::ifs::WeightedIfs;
use qadim::measure::{mu_interval_adaptive, IfsBalls, MeasureBounds};
use qadim::net::NetTree;
use qadim::presets;
use qadim::separation::{awsc_bound_check, gap_report, wsc_verdict, NeighborSource, WscVerdict};

const DIM_TOL: f64 = 1e-12;
const QA_TOL: f64 = 1e-9;
const NOTFULL_H_MIN: f64 = 3.0;
const OSC_H_MIN: f64 = 2.0;
const CANTOR_H_MAX: f64 = 1.1;
const MORAN_SLACK: f64 = 0.01;
const RATIO_GROWTH: i64 = 2;
const RANDOM_SYSTEMS: usize = 64;
const RANDOM_SEED: u64 = 20_240_607;

const WORD_BUDGET: usize = 2_000_000;
const STATE_BUDGET: usize = 100_000;
const WINDOW_BUDGET: usize = 100_000;
const GRAPH_LEVELS: usize = 12;

#[derive(Default)]
struct Criterion {
    lines: Vec<(bool, String)>,
}

impl Criterion {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        self.lines.push((ok, what.into()));
    }

    fn passed(&self) -> bool {
        !self.lines.is_empty() && self.lines.iter().all(|(ok, _)| *ok)
    }
}

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn fe(ifs: &WeightedIfs, r: Rational) -> FieldElement {
    FieldElement::from_rational(ifs.field(), r)
}

fn dec(s: &str) -> Rational {
    parse_decimal(s).unwrap()
}

fn graph(ifs: &WeightedIfs) -> Result<TransitionGraph, String> {
    match detect_finite_type(ifs, GRAPH_LEVELS, STATE_BUDGET) {
        FiniteTypeVerdict::Closed(g) => Ok(g),
        other => Err(format!("{other:?}")),
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn notdoubling_dimensions(c: &mut Criterion) -> Result<(), String> {
    let ifs = presets::notdoubling();
    let chain = endpoint_chain(&ifs, 25, Side::Left);
    let bad: Vec<usize> = (1..=25).filter(|&n| chain[n].p_n() != q(1, 4).pow(n as i32)).collect();
    c.check(bad.is_empty(), format!("Pₙ(Δₙ(0)) = 4⁻ⁿ for n ≤ 25 (mismatch at {bad:?})"));

    let e = endpoint_dims(&ifs, 25);
    let want = 4f64.ln() / 3f64.ln();
    c.check(e.at_zero.geometric_ratio == Some(q(1, 4)), format!("geometric ratio at 0 detected: {:?}", e.at_zero.geometric_ratio.as_ref().map(|r| r.to_string())));
    c.check(close(e.dim_at_zero, want, DIM_TOL), format!("endpoint dim at 0 = {} vs ln4/ln3 = {want} (tol {DIM_TOL:e})", e.dim_at_zero));

    let g = graph(&ifs)?;
    let qs = [q(1, 1), dec("1.05"), dec("1.2"), q(2, 1)];
    let ledger = quasi_net_doubling(&ifs, Some(&g), None, 14, &qs, OraclePolicy::default(), WINDOW_BUDGET, WORD_BUDGET)?;
    c.check(
        ledger.truncated_at.is_none() && ledger.levels.len() == 14,
        format!("ledger covers levels 1..=14 ({} levels, truncated at {:?})", ledger.levels.len(), ledger.truncated_at),
    );
    let half = fe(&ifs, q(1, 2));
    let row = ledger.row(&q(1, 1)).ok_or("no q = 1 row")?;
    let at_half = row.witnesses.iter().any(|w| w.left == half || w.right == half);
    c.check(row.verdict == RowVerdict::Fails, format!("doubling row verdict {:?} (rate {:.4}, power {:.3})", row.verdict, row.rate, row.power));
    c.check(at_half, format!("doubling witness has an endpoint at 1/2 ({} witnesses)", row.witnesses.len()));
    for qv in &qs[1..] {
        let r = ledger.row(qv).ok_or("missing q row")?;
        c.check(r.verdict == RowVerdict::Bounded, format!("q = {} row {:?} (rate {:.4})", analysis::q_label(qv), r.verdict, r.rate));
    }
    Ok(())
}

/// Certified μ of the net intervals left and right of 1/2 at level n.
fn half_ratio(ifs: &WeightedIfs, tree: &NetTree, n: usize) -> Result<(MeasureBounds, MeasureBounds), String> {
    let half = fe(ifs, q(1, 2));
    let (right, left) = tree.locate_both(&half, n).map_err(|e| e.to_string())?;
    let left = left.ok_or("1/2 is not a level-n endpoint")?;
    let mass = |i: usize| {
        let iv = &tree.level(n)[i];
        mu_interval_adaptive(ifs, &iv.left, &iv.right, n + 8, n + 20, &q(1, 10_000)).map_err(|e| e.to_string())
    };
    Ok((mass(left)?, mass(right)?))
}

fn notdoubling_mechanism(c: &mut Criterion) -> Result<(), String> {
    let ifs = presets::notdoubling();
    let tree = NetTree::local(&ifs, &fe(&ifs, q(1, 2)), 12, WORD_BUDGET).map_err(|e| e.to_string())?;
    let mut bounds = Vec::new();
    for n in [4, 8, 12] {
        let (l, r) = half_ratio(&ifs, &tree, n)?;
        if r.lower.is_zero() {
            return Err(format!("level {n}: right interval has zero certified mass"));
        }
        let (lo, hi) = (&l.lower / &r.upper, &l.upper / &r.lower);
        c.check(true, format!("n = {n:2}: ratio in [{:.6}, {:.6}]", qadim::field::rational_to_f64(&lo), qadim::field::rational_to_f64(&hi)));
        bounds.push((n, lo, hi));
    }
    for w in bounds.windows(2) {
        c.check(w[1].1 > w[0].2, format!("certified increase from n = {} to n = {}", w[0].0, w[1].0));
    }
    let (first, last) = (&bounds[0], &bounds[2]);
    c.check(last.1 >= Rational::from_integer(RATIO_GROWTH.into()) * &first.2, format!("n = 12 lower ≥ {RATIO_GROWTH} × n = 4 upper"));
    Ok(())
}

fn thirds_255(c: &mut Criterion) -> Result<(), String> {
    let ifs = presets::thirds_255();
    let g = graph(&ifs)?;
    let s = q_sequence_graph(&g, 10, STATE_BUDGET);
    c.check(s.exact, "Q state set closed (values exact)");
    c.check(s.q[0] == q(5, 1), format!("Q₁ = {}", s.q[0]));
    let bad: Vec<usize> = (1..=10).filter(|&n| s.q[n - 1] != q(5, 1).pow(n as i32)).collect();
    c.check(bad.is_empty(), format!("Qₙ = 5ⁿ for n ≤ 10 (mismatch at {bad:?})"));
    let want = 5f64.ln() / 3f64.ln();
    let qa = qa_upper_bound(&s, ifs.lambda());
    c.check(close(qa.value, want, QA_TOL), format!("qa upper bound {} vs ln5/ln3 = {want} (tol {QA_TOL:e})", qa.value));

    let l = local_dim(&ifs, &fe(&ifs, q(1, 2)), 20, WORD_BUDGET).map_err(|e| e.to_string())?;
    let bad: Vec<usize> = (1..=20).filter(|&n| l.rightward.p_n[n - 1] != q(1, 5).pow(n as i32)).collect();
    c.check(bad.is_empty(), format!("Pₙ(Δₙ(1/2)) = 5⁻ⁿ for n ≤ 20 (mismatch at {bad:?})"));
    c.check(close(l.upper, want, DIM_TOL) && close(l.lower, want, DIM_TOL), format!("local dim at 1/2 in [{}, {}]", l.lower, l.upper));

    let grid = [dec("1.05"), dec("1.1"), dec("1.2"), q(2, 1)];
    let w = build_windows(&ifs, Some(&g), None, 10, WINDOW_BUDGET)?;
    let r = regularity_checks(&ifs, &s, &w.levels, &grid);
    c.check(r.gen_regular_verdict == GenRegularVerdict::NotGeneralizedRegular, format!("regularity verdict {:?}", r.gen_regular_verdict));
    for row in r.gen_regular.iter().filter(|row| row.q <= dec("1.1")) {
        c.check(row.trend == Trend::Increasing, format!("q = {}: QₙΓₙq⁻ⁿ trend {:?}", analysis::q_label(&row.q), row.trend));
    }
    Ok(())
}

fn notfull(c: &mut Criterion) -> Result<(), String> {
    let ifs = presets::notfull();
    let g = graph(&ifs)?.with_aliases(&presets::notfull_aliases());
    c.check(g.len() == 6, format!("transition graph has 6 vertices (got {})", g.len()));
    let three = g.vertex_by_label("3").ok_or("no vertex with the two-map class")?;
    let sig = g.signature_labels(three);
    let want = ["3a", "3b", "4", "gap", "3c"];
    c.check(sig == want, format!("signature {sig:?} vs {want:?}"));
    let lens: Vec<FieldElement> = g.children_signature(three).into_iter().filter(|e| e.label.is_some()).map(|e| e.normalized_length).collect();
    c.check(
        lens.windows(2).all(|w| w[0] == w[1]),
        format!("non-gap children share one normalized length ({})", lens.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(", ")),
    );

    let m_self = vec![vec![q(1, 6), q(0, 1)], vec![q(0, 1), q(1, 2)]];
    let m_b = vec![vec![q(1, 6), q(1, 6)], vec![q(0, 1), q(0, 1)]];
    let ix = |l: &str| sig.iter().position(|s| s == l);
    let edge_matrix = |l: &str| ix(l).and_then(|i| g.edge(three, i)).map(|e| e.matrix.clone());
    c.check(edge_matrix("3a").as_ref() == Some(&m_self), "3 → 3a matrix = [[1/6, 0], [0, 1/2]]");
    c.check(edge_matrix("3b").as_ref() == Some(&m_b), "3 → 3b matrix = [[1/6, 1/6], [0, 0]]");

    let path = g.path_from_labels(&["3"]).map_err(|e| e.to_string())?;
    let q1 = g.q_vector(&path).map_err(|e| e.to_string())?;
    c.check(q1 == vec![q(1, 6), q(1, 6)], format!("q-vector after the step into 3 = {:?}", q1.iter().map(|x| x.to_string()).collect::<Vec<_>>()));
    if let Some(a) = ix("3a") {
        let ok = (1..=8).all(|n| {
            let mut p = path.clone();
            p.extend(std::iter::repeat_n(a, n));
            // diagonal self-edge: (1/6, 1/6)·diag(1/6, 1/2)ⁿ
            g.q_vector(&p).ok() == Some(vec![q(1, 6) * q(1, 6).pow(n as i32), q(1, 6) * q(1, 2).pow(n as i32)])
        });
        c.check(ok, "q-vector along 3a^N = (6^-(N+1), 2^-N/6) for N ≤ 8");
    }

    let balls = IfsBalls { ifs: &ifs, extra: 10 };
    let (depth, n_min) = (40, 10);
    let est = |d: &Rational| -> Result<f64, String> {
        let w = path_family(&ifs, 1, 0, 1, d, depth, n_min).map_err(|e| e.to_string())?;
        Ok(h_delta_estimate(&balls, &w, d, depth, n_min).value)
    };
    let (h_half, h_quarter) = (est(&q(1, 2))?, est(&q(1, 4))?);
    c.check(h_half >= NOTFULL_H_MIN, format!("H(0.5) at depth {depth} = {h_half:.4} ≥ {NOTFULL_H_MIN}"));
    c.check(h_quarter > h_half, format!("H(0.25) = {h_quarter:.4} > H(0.5)"));
    Ok(())
}

fn osc(c: &mut Criterion) -> Result<(), String> {
    let ifs = presets::osc();
    let e = endpoint_dims(&ifs, 30);
    let (w0, w1) = (1.5f64.ln() / 2f64.ln(), 3f64.ln() / 2f64.ln());
    c.check(close(e.dim_at_zero, w0, DIM_TOL), format!("dim at 0 = {} vs ln1.5/ln2 = {w0}", e.dim_at_zero));
    c.check(close(e.dim_at_one, w1, DIM_TOL), format!("dim at 1 = {} vs ln3/ln2 = {w1}", e.dim_at_one));
    let balls = IfsBalls { ifs: &ifs, extra: 10 };
    let (depth, n_min) = (44, 11);
    let est = |d: &Rational| h_delta_estimate(&balls, &osc_family(&ifs, d, depth, n_min), d, depth, n_min).value;
    let (h1, h_half) = (est(&q(1, 1)), est(&q(1, 2)));
    c.check(h1 >= OSC_H_MIN, format!("H(1) at depth {depth} = {h1:.4} ≥ {OSC_H_MIN}"));
    c.check(h_half > h1, format!("H(0.5) = {h_half:.4} > H(1)"));
    Ok(())
}

fn separation(c: &mut Criterion) -> Result<(), String> {
    let t = presets::thirds_255();
    let gt = graph(&t)?;
    let r = gap_report(&t, 12, NeighborSource::Graph(&gt), WORD_BUDGET).map_err(|e| e.to_string())?;
    let one = FieldElement::one(t.field());
    c.check(r.levels.len() == 12 && r.levels.iter().all(|l| l.a_n == one && l.g_n == 1), "thirds-255: aₙ = 1 and g(n) = 1 for n ≤ 12");

    let nd = presets::notdoubling();
    let gn = graph(&nd)?;
    let r = gap_report(&nd, 12, NeighborSource::Graph(&gn), WORD_BUDGET).map_err(|e| e.to_string())?;
    let half = fe(&nd, q(1, 2));
    let gmax = r.levels.iter().map(|l| l.g_n).max().unwrap_or(0);
    c.check(r.levels.len() == 12 && r.levels.iter().all(|l| l.a_n == half), "notdoubling: aₙ = 1/2 for n ≤ 12");
    c.check(gmax <= 3, format!("notdoubling: max g(n) = {gmax} ≤ 3"));

    let gb = presets::golden_bernoulli();
    let gg = graph(&gb)?;
    c.check(gg.closure_level <= GRAPH_LEVELS, format!("golden-bernoulli closes at level {} with {} vertices", gg.closure_level, gg.len()));
    let r = gap_report(&gb, 12, NeighborSource::Graph(&gg), WORD_BUDGET).map_err(|e| e.to_string())?;
    let distinct = r.distinct_a();
    let verdict = wsc_verdict(&r);
    c.check(matches!(verdict, WscVerdict::SatisfiedUpToDepth { .. }), format!("golden-bernoulli: {} distinct aₙ values, verdict {verdict:?}", distinct.len()));
    let held = awsc_bound_check(&r);
    c.check(!held.is_empty() && held.iter().all(|&b| b), format!("golden-bernoulli: g(n) ≤ (3/(λ·f(n)))² at all {} levels", held.len()));
    Ok(())
}

fn properties(c: &mut Criterion) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(RANDOM_SEED);
    let mut failures: Vec<String> = Vec::new();
    let mut by_m = [0usize; 5];
    for i in 0..RANDOM_SYSTEMS {
        let ifs = common::random_system(&mut rng);
        by_m[ifs.len()] += 1;
        let depth = rng.gen_range(1..=common::depth_cap(ifs.len()));
        let (a, len, seed) = (rng.gen_range(0..100), rng.gen_range(1..100), rng.gen());
        let results = [
            ("full support", common::check_full_support(&ifs)),
            ("PnRel sandwich", common::check_pn_rel(&ifs, depth)),
            ("cut-set sum", common::check_cut_set_sum(&ifs, depth)),
            ("oracle gap", common::check_oracle_gap(&ifs, a, len)),
            ("PnLower sandwich", common::check_pn_lower(&ifs, depth, seed)),
            ("Γᴸ = Pₙ(Δₙ(0))", common::check_gamma(&ifs, depth)),
            ("Q₁ bound", common::check_q1_theta(&ifs)),
        ];
        for (name, r) in results {
            if let Err(e) = r {
                failures.push(format!("system {i} ({name}): {e}"));
            }
        }
    }
    c.check(true, format!("{RANDOM_SYSTEMS} systems: {} with 2 maps, {} with 3, {} with 4", by_m[2], by_m[3], by_m[4]));
    c.check(
        failures.is_empty(),
        format!("all 7 properties hold ({} violations{})", failures.len(), failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()),
    );
    Ok(())
}

fn moran(c: &mut Criterion) -> Result<(), String> {
    let m = presets::cantor_strictex();
    let third = q(1, 3);
    let mut mismatches = Vec::new();
    let mut corner = Rational::one();
    for n in 1..=64usize {
        corner *= if n.is_power_of_two() { q(1, 4) } else { q(1, 3) };
        let b = m.mu_ball(&Rational::zero(), &third.pow(n as i32));
        if !b.exact || b.bounds.lower != corner || b.bounds.upper != corner {
            mismatches.push(n);
        }
    }
    c.check(mismatches.is_empty(), format!("μB(0, 3⁻ⁿ) exact and equal to Π p₀⁽ⁱ⁾ for n ≤ 64 (mismatch at {mismatches:?})"));

    let ns: Vec<usize> = (0..7).map(|k| 1usize << k).collect();
    let want = 4f64.ln() / 3f64.ln() - MORAN_SLACK;
    let adj = moran_adjacent_scales(&m, &Rational::zero(), &ns);
    let worst = adj.iter().map(|a| a.exponent).fold(f64::INFINITY, f64::min);
    c.check(worst >= want, format!("adjacent-scale exponent at n = 1, 2, …, 64: min {worst:.6} ≥ {want:.6}"));

    let (depth, n_min) = (64, 16);
    let d = q(1, 2);
    let h = h_delta_estimate(&m, &cantor_points(4), &d, depth, n_min).value;
    c.check(h <= CANTOR_H_MAX, format!("H(0.5) at depth {depth} = {h:.4} ≤ {CANTOR_H_MAX}"));
    Ok(())
}

fn determinism(c: &mut Criterion) -> Result<(), String> {
    for name in presets::NAMES {
        let system = presets::by_name(name).ok_or("unknown preset")?;
        let cfg = AnalysisConfig { depth: if name == "cantor-strictex" { 32 } else { 8 }, seed: 7, ..AnalysisConfig::default() };
        let subject = Subject { name, is_preset: true, system: &system };
        let a = analysis::run(Command::Analyze, &subject, &cfg);
        let b = analysis::run(Command::Analyze, &subject, &cfg);
        c.check(a.files == b.files, format!("{name}: {} files, identical across runs", a.files.len()));
    }
    Ok(())
}

fn main() -> ExitCode {
    type Run = fn(&mut Criterion) -> Result<(), String>;
    let criteria: [(&str, Run); 9] = [
        ("notdoubling endpoint dimension and doubling ledger", notdoubling_dimensions),
        ("notdoubling mass ratio across 1/2 grows", notdoubling_mechanism),
        ("thirds-255 Qₙ, local dimension and regularity", thirds_255),
        ("notfull transition graph and H(δ)", notfull),
        ("osc endpoint dimensions and H(δ)", osc),
        ("separation ledgers", separation),
        ("random-system properties", properties),
        ("Moran measure scales", moran),
        ("report determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (title, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut c = Criterion::default();
        if let Err(e) = run(&mut c) {
            c.check(false, format!("error: {e}"));
        }
        for (ok, line) in &c.lines {
            println!("    [{}] {line}", if *ok { "ok" } else { "XX" });
        }
        let verdict = if c.passed() { "PASS" } else { "FAIL" };
        if !c.passed() {
            failed += 1;
        }
        println!("{verdict} {}: {title} ({:.1}s)", i + 1, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
