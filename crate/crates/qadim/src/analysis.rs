//! The report pipeline behind every subcommand: validated configuration in,
//! a deterministic bundle of named files out.
//!
//! A bundle always holds `<command>.json` (the summary, with the claims
//! header) and, in CSV format, one CSV per table. Budget failures do not
//! abort the run: the failing module is recorded, the sections computed so
//! far stay in the bundle, and the summary is marked `"status": "partial"`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::dims::doubling::{ledger_from_windows, tree_envelope, DoublingLedger, RowVerdict};
use crate::dims::hdelta::{cantor_points, default_n_min, h_delta_estimate, moran_adjacent_scales, net_points, osc_family, path_family, HDeltaEstimate, Witness};
use crate::dims::qn::{q_sequence_graph, q_sequence_tree, qa_upper_bound, QSequence, QaUpper};
use crate::dims::regularity::{regularity_checks, RegularityLedger};
use crate::dims::windows::{build_windows, OraclePolicy};
use crate::dims::{endpoint_chain, endpoint_dims, gamma, local_dim, EndpointDims, LocalDim, Side};
use crate::field::{rational_to_f64, FieldElement, NumberField, Rational};
use crate::finite_type::{detect_finite_type, FiniteTypeVerdict, TransitionGraph};
use crate::ifs::WeightedIfs;
use crate::measure::moran::MoranMeasure;
use crate::measure::IfsBalls;
use crate::net::NetTree;
use crate::presets;
use crate::report::{fmt_f64, CLAIMS_HEADER};
use crate::separation::{awsc_bound_check, gap_report, graph_envelope, wsc_verdict, GapReport, NeighborSource};
use crate::spec::System;

/// Levels explored when looking for a finite-type closure.
pub const FINITE_TYPE_LEVELS: usize = 12;
/// Net-tree depth used inside `analyze` and `checks`.
pub const SUMMARY_TREE_DEPTH: usize = 6;
/// Separation depth used inside `analyze` and `checks`.
pub const SUMMARY_SEPARATION_DEPTH: usize = 10;
/// Level of the net intervals whose endpoints and midpoints seed H(δ) scans.
pub const NET_WITNESS_LEVEL: usize = 2;
/// Extra oracle depth beyond the ball scale.
pub const BALL_EXTRA_DEPTH: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Analyze,
    NetTree,
    Separation,
    FiniteType,
    Dims,
    HDelta,
    Checks,
}

impl Command {
    pub const ALL: [Command; 7] = [Command::Analyze, Command::NetTree, Command::Separation, Command::FiniteType, Command::Dims, Command::HDelta, Command::Checks];

    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::NetTree => "net-tree",
            Command::Separation => "separation",
            Command::FiniteType => "finite-type",
            Command::Dims => "dims",
            Command::HDelta => "hdelta",
            Command::Checks => "checks",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug)]
pub struct AnalysisConfig {
    pub depth: usize,
    /// cap on net intervals, distinct maps and oracle frontiers
    pub word_budget: usize,
    /// cap on Q states and transition-graph vertices
    pub state_budget: usize,
    /// cap on symbolic windows per level in the doubling ledger
    pub window_budget: usize,
    pub q_grid: Vec<Rational>,
    pub deltas: Vec<Rational>,
    pub format: Format,
    pub seed: u64,
    /// random witness points added to each H(δ) scan
    pub random_points: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let dec = |s: &str| crate::field::parse_decimal(s).expect("literal");
        AnalysisConfig {
            depth: 12,
            word_budget: 2_000_000,
            state_budget: 100_000,
            window_budget: 100_000,
            q_grid: ["1.05", "1.1", "1.2", "2"].iter().map(|s| dec(s)).collect(),
            deltas: ["0.5", "1"].iter().map(|s| dec(s)).collect(),
            format: Format::Csv,
            seed: 0,
            random_points: 4,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.depth < 1 {
            return Err("depth must be at least 1".into());
        }
        if self.word_budget < 1 || self.state_budget < 1 || self.window_budget < 1 {
            return Err("budgets must be at least 1".into());
        }
        if self.q_grid.is_empty() || self.q_grid.iter().any(|q| q <= &Rational::one()) {
            return Err("every q must be greater than 1".into());
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|d| d <= &Rational::zero()) {
            return Err("every delta must be positive".into());
        }
        Ok(())
    }

    fn to_json(&self) -> Value {
        json!({
            "depth": self.depth,
            "word_budget": self.word_budget,
            "state_budget": self.state_budget,
            "window_budget": self.window_budget,
            "q_grid": self.q_grid.iter().map(|q| q.to_string()).collect::<Vec<_>>(),
            "deltas": self.deltas.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
            "format": match self.format { Format::Csv => "csv", Format::Json => "json" },
            "seed": self.seed,
            "random_points": self.random_points,
        })
    }
}

/// A module that could not finish.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Failure {
    pub module: &'static str,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct Bundle {
    /// file name → contents, written in name order
    pub files: BTreeMap<String, String>,
    pub failures: Vec<Failure>,
}

impl Bundle {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// The analysed system and where it came from.
pub struct Subject<'a> {
    /// preset name, or the spec file stem
    pub name: &'a str,
    pub is_preset: bool,
    pub system: &'a System,
}

/// `1.05` for terminating decimals, `7_3` otherwise; used in file names.
pub fn q_label(q: &Rational) -> String {
    let mut d = q.denom().clone();
    let mut digits = 0usize;
    for p in [2u32, 5] {
        while (&d % p).is_zero() {
            d /= p;
        }
    }
    if !d.is_one() {
        return format!("{}_{}", q.numer(), q.denom());
    }
    let mut scaled = q.clone();
    while !scaled.is_integer() {
        scaled *= Rational::from_integer(10.into());
        digits += 1;
    }
    let s = scaled.to_integer().to_string();
    if digits == 0 {
        return s;
    }
    let s = format!("{:0>width$}", s, width = digits + 1);
    let (int, frac) = s.split_at(s.len() - digits);
    format!("{int}.{frac}")
}

fn exact_csv(rows: impl IntoIterator<Item = (usize, Rational, String)>) -> String {
    let mut out = String::from("n,value_exact,value_float,verdict\n");
    for (n, v, verdict) in rows {
        writeln!(out, "{n},{v},{},{verdict}", fmt_f64(rational_to_f64(&v))).unwrap();
    }
    out
}

fn system_json(subject: &Subject<'_>) -> Value {
    match subject.system {
        System::Ifs(ifs) => {
            let field = ifs.field();
            let field_json = if field.is_rational() {
                Value::Null
            } else {
                let (lo, hi) = field.root_interval();
                json!({
                    "min_poly": field.min_poly().iter().map(|c| c.to_string()).collect::<Vec<_>>(),
                    "root_interval": [lo.to_string(), hi.to_string()],
                })
            };
            json!({
                "name": subject.name,
                "kind": "ifs",
                "field": field_json,
                "maps": ifs.maps().iter().map(|m| json!({"r": m.ratio.to_string(), "d": m.pos.to_string()})).collect::<Vec<_>>(),
                "probs": ifs.probs().iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                "lambda": ifs.lambda().to_string(),
                "theta": ifs.theta(),
                "equicontractive": ifs.is_equicontractive(),
                "full_support": ifs.full_support(),
                "regular": ifs.is_regular(),
            })
        }
        System::Moran(m) => json!({
            "name": subject.name,
            "kind": "moran",
            "default": [m.default_pair().0.to_string(), m.default_pair().1.to_string()],
            "overrides": m.overrides().iter().map(|(rule, p)| json!({"index_rule": rule, "pair": [p.0.to_string(), p.1.to_string()]})).collect::<Vec<_>>(),
        }),
    }
}

/// Points k/2²⁰ drawn from a ChaCha stream seeded by `seed`.
pub fn random_points(seed: u64, count: usize) -> Vec<Rational> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let den = 1i64 << 20;
    let mut pts: Vec<Rational> = (0..count).map(|_| Rational::new(rng.gen_range(0..=den).into(), den.into())).collect();
    pts.sort();
    pts.dedup();
    pts
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckVerdict {
    Pass,
    Fail,
    NotApplicable,
}

impl CheckVerdict {
    fn as_str(&self) -> &'static str {
        match self {
            CheckVerdict::Pass => "pass",
            CheckVerdict::Fail => "fail",
            CheckVerdict::NotApplicable => "not_applicable",
        }
    }
}

/// One internal consistency check with its per-level evidence.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub verdict: CheckVerdict,
    pub detail: String,
    pub rows: Vec<(usize, Rational, String)>,
}

impl Check {
    fn from_rows(name: &'static str, detail: impl Into<String>, rows: Vec<(usize, Rational, bool)>) -> Check {
        let verdict = if rows.iter().all(|r| r.2) { CheckVerdict::Pass } else { CheckVerdict::Fail };
        Check { name, verdict, detail: detail.into(), rows: rows.into_iter().map(|(n, v, ok)| (n, v, if ok { "pass" } else { "fail" }.to_string())).collect() }
    }

    fn not_applicable(name: &'static str, why: impl Into<String>) -> Check {
        Check { name, verdict: CheckVerdict::NotApplicable, detail: why.into(), rows: Vec::new() }
    }
}

/// Everything computed for one IFS, filled in on demand.
pub struct IfsAnalysis<'a> {
    pub ifs: &'a WeightedIfs,
    pub preset: Option<&'a str>,
    pub cfg: &'a AnalysisConfig,
    pub tree: Option<NetTree>,
    pub finite_type: Option<FiniteTypeVerdict>,
    pub separation: Option<GapReport>,
    pub endpoint: Option<EndpointDims>,
    pub local: Vec<LocalDim>,
    pub qseq: Option<QSequence>,
    pub qa: Option<QaUpper>,
    pub regularity: Option<RegularityLedger>,
    pub doubling: Option<DoublingLedger>,
    pub hdelta: Vec<HDeltaEstimate>,
    pub checks: Vec<Check>,
    pub failures: Vec<Failure>,
    pub notes: Vec<String>,
}

impl<'a> IfsAnalysis<'a> {
    pub fn new(ifs: &'a WeightedIfs, preset: Option<&'a str>, cfg: &'a AnalysisConfig) -> IfsAnalysis<'a> {
        IfsAnalysis {
            ifs,
            preset,
            cfg,
            tree: None,
            finite_type: None,
            separation: None,
            endpoint: None,
            local: Vec::new(),
            qseq: None,
            qa: None,
            regularity: None,
            doubling: None,
            hdelta: Vec::new(),
            checks: Vec::new(),
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn fail(&mut self, module: &'static str, message: impl Into<String>) {
        self.failures.push(Failure { module, message: message.into() });
    }

    pub fn graph(&self) -> Option<&TransitionGraph> {
        match &self.finite_type {
            Some(FiniteTypeVerdict::Closed(g)) => Some(g),
            _ => None,
        }
    }

    /// Full net tree to `depth`, keeping the built levels on budget failure.
    pub fn build_tree(&mut self, depth: usize) {
        let mut tree = NetTree::new(self.ifs, self.cfg.word_budget);
        while tree.depth() < depth {
            if let Err(e) = tree.build_level() {
                self.fail("net-structure", e.to_string());
                break;
            }
        }
        self.tree = Some(tree);
    }

    pub fn detect_finite_type(&mut self) {
        let verdict = detect_finite_type(self.ifs, FINITE_TYPE_LEVELS, self.cfg.state_budget);
        let verdict = match (verdict, self.preset) {
            (FiniteTypeVerdict::Closed(g), Some("notfull")) => FiniteTypeVerdict::Closed(g.with_aliases(&presets::notfull_aliases())),
            (v, _) => v,
        };
        self.finite_type = Some(verdict);
    }

    /// Gap ledger from the graph when one closed, otherwise from the tree.
    pub fn separation(&mut self, depth: usize) {
        let (source, depth) = match (&self.finite_type, &self.tree) {
            (Some(FiniteTypeVerdict::Closed(g)), _) => (NeighborSource::Graph(g), depth),
            (_, Some(t)) => {
                if t.depth() < depth {
                    self.notes.push(format!("separation limited to the net-tree depth {}", t.depth()));
                }
                (NeighborSource::Tree(t), depth.min(t.depth()))
            }
            _ => unreachable!("separation runs after finite-type detection or a tree build"),
        };
        if depth == 0 {
            return;
        }
        match gap_report(self.ifs, depth, source, self.cfg.word_budget) {
            Ok(r) => self.separation = Some(r),
            Err(e) => self.fail("separation", e.to_string()),
        }
    }

    fn point(&self, q: Rational) -> FieldElement {
        FieldElement::from_rational(self.ifs.field(), q)
    }

    pub fn dims(&mut self) {
        let depth = self.cfg.depth;
        let ifs = self.ifs;
        self.endpoint = Some(endpoint_dims(ifs, depth));
        for x in [Rational::zero(), Rational::new(1.into(), 2.into()), Rational::one()] {
            match local_dim(ifs, &self.point(x.clone()), depth, self.cfg.word_budget) {
                Ok(l) => self.local.push(l),
                Err(e) => self.fail("dim-analysis", format!("local dimension at {x}: {e}")),
            }
        }
        let qseq = match (self.graph(), &self.tree) {
            (Some(g), _) => q_sequence_graph(g, depth, self.cfg.state_budget),
            (None, Some(t)) if t.depth() > 0 => q_sequence_tree(t, depth),
            _ => {
                self.fail("dim-analysis", "no transition graph and no net tree for Q");
                return;
            }
        };
        if qseq.sampled {
            self.notes.push(format!("Q states truncated at the state budget {}; Q values are lower bounds", self.cfg.state_budget));
        }
        self.qa = Some(qa_upper_bound(&qseq, ifs.lambda()));
        let windows = match build_windows(ifs, self.graph(), self.tree.as_ref(), depth, self.cfg.window_budget) {
            Ok(w) => w,
            Err(e) => {
                self.fail("dim-analysis", e);
                self.qseq = Some(qseq);
                return;
            }
        };
        if let Some(n) = windows.truncated_at {
            self.notes.push(format!("doubling ledger stops before level {n} (window budget {} or tree depth)", self.cfg.window_budget));
        }
        self.regularity = Some(regularity_checks(ifs, &qseq, &windows.levels, &self.cfg.q_grid));
        let ledger_depth = windows.levels.len();
        let envelope = match self.graph() {
            Some(g) => Ok(graph_envelope(g, ifs.lambda(), ledger_depth + 1)),
            None => tree_envelope(ifs, ledger_depth + 1, self.cfg.word_budget),
        };
        let mut qs = vec![Rational::one()];
        qs.extend(self.cfg.q_grid.iter().cloned());
        let ledger = envelope.and_then(|env| ledger_from_windows(ifs, self.graph(), &windows.levels, windows.mode, &env, &qs, OraclePolicy::default()));
        match ledger {
            Ok(mut l) => {
                l.truncated_at = windows.truncated_at;
                self.doubling = Some(l);
            }
            Err(e) => self.fail("dim-analysis", format!("doubling ledger: {e}")),
        }
        self.qseq = Some(qseq);
    }

    /// The witness plan: the construction families of the presets that have
    /// one, net-interval points, and seeded random points.
    fn witnesses(&mut self, delta: &Rational, n_min: usize) -> Vec<Witness> {
        let depth = self.cfg.depth;
        let ifs = self.ifs;
        let mut w = match self.preset {
            Some("osc") => osc_family(ifs, delta, depth, n_min),
            Some("notfull") => match path_family(ifs, 1, 0, 1, delta, depth, n_min) {
                Ok(w) => w,
                Err(e) => {
                    self.fail("dim-analysis", format!("notfull witness path: {e}"));
                    Vec::new()
                }
            },
            _ => Vec::new(),
        };
        match net_points(ifs, NET_WITNESS_LEVEL.min(depth), self.cfg.word_budget) {
            Ok(p) => w.extend(p),
            Err(e) => self.fail("dim-analysis", format!("net witness points: {e}")),
        }
        w.extend(random_points(self.cfg.seed, self.cfg.random_points).into_iter().map(|x| Witness::Point(self.point(x))));
        w
    }

    pub fn hdelta(&mut self) {
        let depth = self.cfg.depth;
        let n_min = default_n_min(depth);
        let balls = IfsBalls { ifs: self.ifs, extra: BALL_EXTRA_DEPTH };
        for delta in self.cfg.deltas.clone() {
            let w = self.witnesses(&delta, n_min);
            self.hdelta.push(h_delta_estimate(&balls, &w, &delta, depth, n_min));
        }
    }

    pub fn run_checks(&mut self) {
        let ifs = self.ifs;
        let mut checks = Vec::new();
        if let Some(ep) = &self.endpoint {
            let chain_l = endpoint_chain(ifs, ep.at_zero.p_n.len(), Side::Left);
            let chain_r = endpoint_chain(ifs, ep.at_one.p_n.len(), Side::Right);
            let rows = (1..chain_l.len())
                .map(|n| {
                    let gl = gamma(ifs, n, Side::Left);
                    let ok = gl == chain_l[n].p_n() && gamma(ifs, n, Side::Right) == chain_r[n].p_n();
                    (n, gl, ok)
                })
                .collect();
            checks.push(Check::from_rows("gamma_identity", "Γₙᴸ = Pₙ(Δₙ(0)) and Γₙᴿ = Pₙ(Δₙ(1))", rows));
            checks.push(endpoint_lower_check(ifs, &ep.at_zero.p_n));
        }
        if let Some(t) = &self.tree {
            checks.push(tree_chain_check(t, None));
            if ifs.full_support() {
                checks.push(tree_chain_check(t, Some(ifs.min_prob().pow(ifs.theta() as i32))));
            } else {
                checks.push(Check::not_applicable("pn_rel_lower", "needs full support"));
            }
        }
        if let Some(q) = &self.qseq {
            checks.push(submultiplicative_check(q));
            if !ifs.full_support() {
                checks.push(Check::not_applicable("q1_theta_bound", "needs full support"));
            } else {
                let bound = ifs.min_prob().pow(-(ifs.theta() as i32));
                let ok = q.q[0] <= bound;
                checks.push(Check::from_rows("q1_theta_bound", format!("Q₁ ≤ (min p)^-Θ = {bound}"), vec![(1, q.q[0].clone(), ok)]));
            }
            // Qₙ ≥ P₀/Pₙ along the chain of each local-dimension point
            let mut rows = Vec::new();
            for l in &self.local {
                for (i, p) in l.rightward.p_n.iter().enumerate().take(q.q.len()) {
                    if !p.is_zero() {
                        let inv = Rational::one() / p;
                        rows.push((i + 1, inv.clone(), q.q[i] >= inv));
                    }
                }
            }
            checks.push(Check::from_rows("q_dominates_local", "Qₙ ≥ 1/Pₙ(Δₙ(x)) at the local-dimension points", rows));
        }
        if let Some(d) = &self.doubling {
            let doubling_row = d.row(&Rational::one()).map(|r| r.verdict.clone());
            let quasi_fail = d.rows.iter().filter(|r| !r.q.is_one()).any(|r| r.verdict == RowVerdict::Fails);
            let ok = !(doubling_row == Some(RowVerdict::Bounded) && quasi_fail);
            checks.push(Check {
                name: "doubling_implies_quasi",
                verdict: if ok { CheckVerdict::Pass } else { CheckVerdict::Fail },
                detail: "a bounded q = 1 row forces bounded rows for every q > 1".into(),
                rows: Vec::new(),
            });
        }
        if let Some(sep) = &self.separation {
            let rows = sep.levels.iter().zip(awsc_bound_check(sep)).map(|(l, ok)| (l.n, Rational::from_integer(l.g_n.into()), ok)).collect();
            checks.push(Check::from_rows("awsc_bound", "g(n) ≤ (3/(λ·min a_k))²", rows));
        }
        if !self.hdelta.is_empty() {
            checks.push(hdelta_present_check(&self.hdelta));
        }
        self.checks = checks;
    }
}

fn endpoint_lower_check(ifs: &WeightedIfs, p_n: &[Rational]) -> Check {
    let Some(&j) = ifs.left_fixing().first() else {
        return Check::not_applicable("endpoint_lower", "no map fixes 0");
    };
    let r = &ifs.maps()[j].ratio;
    let p = &ifs.probs()[j];
    let mut rk = FieldElement::one(ifs.field());
    let mut k = 0i32;
    let rows = p_n
        .iter()
        .enumerate()
        .map(|(i, v)| {
            // the word jᵏ in Λₙ covers Δₙ(0)
            let lam = ifs.lambda_pow(i + 1);
            while rk > lam {
                rk = &rk * r;
                k += 1;
            }
            let bound = p.pow(k);
            (i + 1, bound.clone(), v >= &bound)
        })
        .collect();
    Check::from_rows("endpoint_lower", "Pₙ(Δₙ(0)) ≥ pⱼᵏ for the 0-fixing map j", rows)
}

/// Upper (factor None) or lower (factor c) parent/child sandwich over the tree.
fn tree_chain_check(tree: &NetTree, factor: Option<Rational>) -> Check {
    let mut rows = Vec::new();
    for n in 1..=tree.depth() {
        let parents = tree.level(n - 1);
        let mut ok = true;
        let mut worst: Option<Rational> = None;
        for parent in parents {
            if parent.is_gap() {
                continue;
            }
            let pp = parent.p_n();
            for c in tree.level(n)[parent.children.clone()].iter() {
                if c.is_gap() {
                    continue;
                }
                let ratio = c.p_n() / &pp;
                let good = match &factor {
                    None => ratio <= Rational::one(),
                    Some(f) => &ratio >= f,
                };
                ok &= good;
                let better = match (&factor, &worst) {
                    (_, None) => true,
                    (None, Some(w)) => &ratio > w,
                    (Some(_), Some(w)) => &ratio < w,
                };
                if better {
                    worst = Some(ratio);
                }
            }
        }
        rows.push((n, worst.unwrap_or_else(Rational::zero), ok));
    }
    match factor {
        None => Check::from_rows("pn_monotone", "largest Pₙ(child)/Pₙ₋₁(parent) ≤ 1", rows),
        Some(f) => Check::from_rows("pn_rel_lower", format!("smallest Pₙ(child)/Pₙ₋₁(parent) ≥ (min p)^Θ = {f}"), rows),
    }
}

fn submultiplicative_check(q: &QSequence) -> Check {
    if !q.exact {
        return Check::not_applicable("q_submultiplicative", "Q values are lower bounds");
    }
    let d = q.q.len();
    let rows = (2..=d)
        .map(|n| {
            let ok = (1..n).all(|a| q.q[n - 1] <= &q.q[a - 1] * &q.q[n - a - 1]);
            (n, q.q[n - 1].clone(), ok)
        })
        .collect();
    Check::from_rows("q_submultiplicative", "Q_{a+b} ≤ Q_a·Q_b", rows)
}

fn hdelta_present_check(est: &[HDeltaEstimate]) -> Check {
    let ok = est.iter().all(|e| e.best.is_some());
    Check {
        name: "hdelta_witness_present",
        verdict: if ok { CheckVerdict::Pass } else { CheckVerdict::Fail },
        detail: "every δ has at least one admissible witness triple".into(),
        rows: Vec::new(),
    }
}

fn checks_json(checks: &[Check]) -> Value {
    Value::Array(
        checks
            .iter()
            .map(|c| {
                json!({
                    "name": c.name,
                    "verdict": c.verdict.as_str(),
                    "detail": c.detail,
                    "levels": c.rows.len(),
                })
            })
            .collect(),
    )
}

fn net_tree_json(tree: &NetTree) -> Value {
    let levels: Vec<Value> = (0..=tree.depth())
        .map(|n| {
            let lvl = tree.level(n);
            let ps: Vec<Rational> = lvl.iter().filter(|iv| !iv.is_gap()).map(|iv| iv.p_n()).collect();
            json!({
                "level": n,
                "intervals": lvl.len(),
                "gaps": lvl.iter().filter(|iv| iv.is_gap()).count(),
                "max_neighbors": lvl.iter().map(|iv| iv.neighbors.len()).max().unwrap_or(0),
                "min_p_n": ps.iter().min().map(|p| p.to_string()),
                "max_p_n": ps.iter().max().map(|p| p.to_string()),
            })
        })
        .collect();
    json!({ "depth": tree.depth(), "levels": levels })
}

fn finite_type_json(v: &FiniteTypeVerdict) -> Value {
    match v {
        FiniteTypeVerdict::Closed(g) => json!({
            "closed": true,
            "vertices": g.len(),
            "closure_level": g.closure_level,
            "signatures": (0..g.len()).map(|i| json!({"vertex": g.label(i), "children": g.signature_labels(i)})).collect::<Vec<_>>(),
        }),
        FiniteTypeVerdict::NotClosed(nc) => json!({
            "closed": false,
            "levels_explored": nc.levels_explored,
            "growth": nc.growth,
            "reason": nc.reason,
        }),
    }
}

fn separation_json(r: &GapReport) -> Value {
    json!({
        "depth": r.levels.len(),
        "distinct_a": r.distinct_a().iter().map(|a| a.to_string()).collect::<Vec<_>>(),
        "max_g": r.levels.iter().map(|l| l.g_n).max(),
        "awsc_bound_holds": awsc_bound_check(r).iter().all(|&b| b),
        "wsc": wsc_verdict(r),
    })
}

fn hdelta_csv(est: &[HDeltaEstimate]) -> String {
    let mut out = String::from("delta,value,big,small,x,triples_evaluated\n");
    for e in est {
        let (big, small, x) = match &e.best {
            Some(b) => (b.big.to_string(), b.small.to_string(), b.x.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        writeln!(out, "{},{},{big},{small},{x},{}", fmt_f64(e.delta), fmt_f64(e.value), e.triples_evaluated).unwrap();
    }
    out
}

struct Writer<'c> {
    cfg: &'c AnalysisConfig,
    bundle: Bundle,
    summary: serde_json::Map<String, Value>,
}

impl Writer<'_> {
    fn csv(&mut self, name: String, contents: String) {
        if self.cfg.format == Format::Csv {
            self.bundle.files.insert(name, contents);
        }
    }

    fn section(&mut self, key: &str, v: Value) {
        self.summary.insert(key.to_string(), v);
    }

    fn sv<T: serde::Serialize>(&mut self, key: &str, v: &T) {
        self.summary.insert(key.to_string(), serde_json::to_value(v).expect("report values serialize"));
    }
}

fn emit_ifs(w: &mut Writer<'_>, a: &IfsAnalysis<'_>, cmd: Command) {
    let full = matches!(cmd, Command::Analyze);
    if let Some(t) = &a.tree {
        if matches!(cmd, Command::Analyze | Command::NetTree) {
            w.section("net_tree", net_tree_json(t));
            let mut buf = Vec::new();
            t.write_csv(&mut buf).expect("write to memory");
            w.csv("net_tree.csv".into(), String::from_utf8(buf).expect("utf8"));
        }
    }
    if let Some(ft) = &a.finite_type {
        if matches!(cmd, Command::Analyze | Command::FiniteType | Command::Separation | Command::Dims) {
            w.section("finite_type", finite_type_json(ft));
        }
        if let FiniteTypeVerdict::Closed(g) = ft {
            if matches!(cmd, Command::Analyze | Command::FiniteType) {
                w.bundle.files.insert("graph.json".into(), serde_json::to_string_pretty(&g.to_json()).expect("json") + "\n");
            }
        }
    }
    if let Some(s) = &a.separation {
        if matches!(cmd, Command::Analyze | Command::Separation) {
            w.section("separation", separation_json(s));
            let mut buf = Vec::new();
            s.write_csv(&mut buf).expect("write to memory");
            w.csv("separation.csv".into(), String::from_utf8(buf).expect("utf8"));
        }
    }
    if full || cmd == Command::Dims {
        if let Some(ep) = &a.endpoint {
            w.sv("endpoint_dims", ep);
            for (label, seq) in [("left", &ep.at_zero), ("right", &ep.at_one)] {
                w.csv(format!("endpoint_{label}.csv"), exact_csv(seq.p_n.iter().enumerate().map(|(i, p)| (i + 1, p.clone(), "exact".to_string()))));
            }
        }
        w.sv("local_dims", &a.local);
        for (l, label) in a.local.iter().zip(["0", "1_2", "1"]) {
            w.csv(format!("local_{label}.csv"), exact_csv(l.rightward.p_n.iter().enumerate().map(|(i, p)| (i + 1, p.clone(), "exact".to_string()))));
        }
        if let Some(q) = &a.qseq {
            w.sv("q_sequence", q);
            let verdict = if q.exact { "exact" } else { "lower_bound" };
            w.csv("q_n.csv".into(), exact_csv(q.q.iter().enumerate().map(|(i, v)| (i + 1, v.clone(), verdict.to_string()))));
        }
        if let Some(qa) = &a.qa {
            w.sv("qa_upper", qa);
        }
        if let Some(r) = &a.regularity {
            w.sv("regularity", r);
            for row in &r.gen_regular {
                let t = serde_json::to_value(row.trend).expect("json").as_str().unwrap_or_default().to_string();
                w.csv(format!("gen_regular_q{}.csv", q_label(&row.q)), exact_csv(row.values.iter().enumerate().map(|(i, v)| (i + 1, v.clone(), t.clone()))));
            }
            for row in &r.comparability {
                let t = serde_json::to_value(row.verdict).expect("json").as_str().unwrap_or_default().to_string();
                let vals = r.adjacent_ratio.iter().enumerate().map(|(i, v)| (i + 1, v / row.q.pow(i as i32 + 1), t.clone()));
                w.csv(format!("comparability_q{}.csv", q_label(&row.q)), exact_csv(vals));
            }
        }
        if let Some(d) = &a.doubling {
            w.sv("doubling", d);
            for row in &d.rows {
                let mut buf = Vec::new();
                d.write_csv(row, &mut buf).expect("write to memory");
                w.csv(format!("doubling_q{}.csv", q_label(&row.q)), String::from_utf8(buf).expect("utf8"));
            }
        }
    }
    if (full || cmd == Command::HDelta) && !a.hdelta.is_empty() {
        w.sv("hdelta", &a.hdelta);
        w.csv("hdelta.csv".into(), hdelta_csv(&a.hdelta));
    }
    if full || cmd == Command::Checks {
        emit_checks(w, &a.checks);
    }
}

fn emit_checks(w: &mut Writer<'_>, checks: &[Check]) {
    w.section("checks", checks_json(checks));
    for c in checks {
        if !c.rows.is_empty() {
            w.csv(format!("check_{}.csv", c.name), exact_csv(c.rows.iter().cloned()));
        }
    }
}

fn run_ifs<'a>(ifs: &'a WeightedIfs, preset: Option<&'a str>, cfg: &'a AnalysisConfig, cmd: Command) -> (IfsAnalysis<'a>, Vec<(String, Value)>) {
    let mut a = IfsAnalysis::new(ifs, preset, cfg);
    let d = cfg.depth;
    let mut depths = Vec::new();
    match cmd {
        Command::NetTree => {
            a.build_tree(d);
        }
        Command::FiniteType => a.detect_finite_type(),
        Command::Separation => {
            a.detect_finite_type();
            if a.graph().is_none() {
                a.build_tree(d);
            }
            a.separation(d);
        }
        Command::Dims => {
            a.detect_finite_type();
            if a.graph().is_none() {
                a.build_tree(d.min(SUMMARY_TREE_DEPTH));
            }
            a.dims();
        }
        Command::HDelta => a.hdelta(),
        Command::Analyze | Command::Checks => {
            let td = d.min(SUMMARY_TREE_DEPTH);
            let sd = d.min(SUMMARY_SEPARATION_DEPTH);
            depths.push(("net_tree".to_string(), json!(td)));
            depths.push(("separation".to_string(), json!(sd)));
            a.build_tree(td);
            a.detect_finite_type();
            a.separation(sd);
            a.dims();
            a.hdelta();
            a.run_checks();
        }
    }
    (a, depths)
}

fn run_moran(m: &MoranMeasure, cfg: &AnalysisConfig, cmd: Command, w: &mut Writer<'_>) {
    let d = cfg.depth;
    let module = match cmd {
        Command::NetTree => Some("net-structure"),
        Command::Separation => Some("separation"),
        Command::FiniteType => Some("finite-type"),
        _ => None,
    };
    if let Some(module) = module {
        w.bundle.failures.push(Failure { module, message: format!("{} is defined for weighted IFS only, not Moran measures", cmd.name()) });
        return;
    }
    let full = cmd == Command::Analyze;
    let mut checks = Vec::new();
    if full || matches!(cmd, Command::Dims | Command::Checks) {
        let third = Rational::new(1.into(), 3.into());
        let rows: Vec<(usize, Rational, bool)> = (1..=d)
            .map(|n| {
                let b = m.mu_ball(&Rational::zero(), &third.pow(n as i32));
                let corner = m.left_corner(n);
                let ok = b.exact && b.bounds.lower == corner && b.bounds.upper == corner;
                (n, b.bounds.lower, ok)
            })
            .collect();
        let ln3 = 3f64.ln();
        let normalized: Vec<f64> = rows.iter().map(|(n, v, _)| -crate::field::ln_rational(v) / (*n as f64 * ln3)).collect();
        let ns: Vec<usize> = (0..usize::BITS).map(|k| 1usize << k).filter(|&n| n >= 2 && n <= d).collect();
        let adjacent = moran_adjacent_scales(m, &Rational::zero(), &ns);
        if cmd != Command::Checks {
            w.section(
                "moran_dims",
                json!({
                    "ball_at_zero": rows.iter().map(|(_, v, _)| v.to_string()).collect::<Vec<_>>(),
                    "normalized": normalized,
                    "adjacent_scales": adjacent,
                }),
            );
            w.csv("moran_ball_0.csv".into(), exact_csv(rows.iter().map(|(n, v, _)| (*n, v.clone(), "exact".to_string()))));
            let mut csv = String::from("n,value_exact,value_float,verdict\n");
            for s in &adjacent {
                writeln!(csv, "{},{},{},certified", s.n, s.ratio_lower, fmt_f64(s.exponent)).unwrap();
            }
            w.csv("moran_adjacent.csv".into(), csv);
        }
        checks.push(Check::from_rows("moran_corner_identity", "μB(0, 3⁻ⁿ) = Π p₀⁽ⁱ⁾", rows));
    }
    if full || matches!(cmd, Command::HDelta | Command::Checks) {
        let n_min = default_n_min(d);
        let k = NumberField::rationals();
        let mut est = Vec::new();
        for delta in &cfg.deltas {
            let mut wit = cantor_points(4);
            wit.extend(random_points(cfg.seed, cfg.random_points).into_iter().map(|x| Witness::Point(FieldElement::from_rational(&k, x))));
            est.push(h_delta_estimate(m, &wit, delta, d, n_min));
        }
        if cmd != Command::Checks {
            w.sv("hdelta", &est);
            w.csv("hdelta.csv".into(), hdelta_csv(&est));
        }
        checks.push(hdelta_present_check(&est));
    }
    if full || cmd == Command::Checks {
        emit_checks(w, &checks);
    }
}

/// Run one subcommand on one system. Never panics on budget exhaustion; see
/// [`Bundle::failures`].
pub fn run(cmd: Command, subject: &Subject<'_>, cfg: &AnalysisConfig) -> Bundle {
    let mut w = Writer { cfg, bundle: Bundle::default(), summary: serde_json::Map::new() };
    w.section("claims", json!(CLAIMS_HEADER.lines().collect::<Vec<_>>()));
    w.section("command", json!(cmd.name()));
    w.section("system", system_json(subject));
    w.section("config", cfg.to_json());
    let mut notes = Vec::new();
    let mut depths = Vec::new();
    match subject.system {
        System::Ifs(ifs) => {
            let preset = subject.is_preset.then_some(subject.name);
            let (a, d) = run_ifs(ifs, preset, cfg, cmd);
            emit_ifs(&mut w, &a, cmd);
            w.bundle.failures.extend(a.failures.iter().cloned());
            notes = a.notes.clone();
            depths = d;
        }
        System::Moran(m) => run_moran(m, cfg, cmd, &mut w),
    }
    if !depths.is_empty() {
        w.section("section_depths", Value::Object(depths.into_iter().collect()));
    }
    let status = if w.bundle.is_partial() { "partial" } else { "complete" };
    w.section("status", json!(status));
    w.section("notes", json!(notes));
    w.section("failures", json!(w.bundle.failures.iter().map(|f| json!({"module": f.module, "message": f.message})).collect::<Vec<_>>()));
    let summary = serde_json::to_string_pretty(&Value::Object(std::mem::take(&mut w.summary))).expect("json") + "\n";
    w.bundle.files.insert(format!("{}.json", cmd.name()), summary);
    if w.bundle.is_partial() {
        let mut marker = String::from("PARTIAL: the files in this bundle stop where these modules failed\n");
        for f in &w.bundle.failures {
            writeln!(marker, "{}: {}", f.module, f.message).unwrap();
        }
        w.bundle.files.insert("PARTIAL.txt".into(), marker);
    }
    w.bundle
}
