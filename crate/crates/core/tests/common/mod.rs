//! Independent oracles shared by the integration and acceptance tests.
//! Nothing here calls the solver, the clustering or the LP writer.

#![allow(dead_code)]

use std::collections::BTreeMap;

use duocover::clustering::CandidateMap;
use duocover::pipeline::{generate_master, seeded_rng, SpatialProfile};
use duocover::{ExchangeSite, Instance};
use rand::Rng;

/// Cost of serving site `i` from position `j`, written out directly.
pub fn oracle_cost(sites: &[ExchangeSite], rf: f64, i: usize, j: usize) -> f64 {
    let (a, b) = (&sites[i], &sites[j]);
    let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
    rf * d * a.alpha * a.load
}

pub fn oracle_matrix(inst: &Instance) -> Vec<Vec<f64>> {
    let n = inst.n();
    (0..n)
        .map(|i| (0..n).map(|j| oracle_cost(inst.sites(), inst.routing_factor(), i, j)).collect())
        .collect()
}

/// All `k`-subsets of `0..n`, lexicographic.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            if n - v < k - cur.len() {
                break;
            }
            cur.push(v);
            rec(v + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Sum over rows of the two smallest allowed entries among `open`, or
/// `None` if a row has fewer than two.
pub fn two_cheapest_total(costs: &[Vec<f64>], open: &[usize], allowed: Option<&CandidateMap>) -> Option<f64> {
    let mut total = 0.0;
    for (i, row) in costs.iter().enumerate() {
        let mut vals: Vec<f64> = open
            .iter()
            .filter(|&&j| allowed.is_none_or(|cm| cm.pos(i).contains(&j)))
            .map(|&j| row[j])
            .collect();
        if vals.len() < 2 {
            return None;
        }
        vals.sort_by(f64::total_cmp);
        total += vals[0] + vals[1];
    }
    Some(total)
}

/// Exhaustive optimum over all `k`-subsets of columns.
pub fn enumerate_optimum(costs: &[Vec<f64>], k: usize, allowed: Option<&CandidateMap>) -> Option<(f64, Vec<usize>)> {
    let cols = costs[0].len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for s in subsets(cols, k) {
        if let Some(v) = two_cheapest_total(costs, &s, allowed) {
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, s));
            }
        }
    }
    best
}

pub fn brute_feasible(n: usize, k: usize, cm: &CandidateMap) -> bool {
    subsets(n, k)
        .iter()
        .any(|s| (0..cm.len()).all(|i| cm.pos(i).iter().filter(|j| s.contains(j)).count() >= 2))
}

/// Smallest single-coverage value over all `k`-subsets of columns.
pub fn enumerate_single_cover(costs: &[Vec<f64>], k: usize) -> f64 {
    subsets(costs[0].len(), k)
        .iter()
        .map(|s| {
            costs
                .iter()
                .map(|row| s.iter().map(|&j| row[j]).fold(f64::INFINITY, f64::min))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Does some subset of at most `m` universe elements hit every set?
pub fn brute_hitting_set(universe: usize, sets: &[Vec<usize>], m: usize) -> bool {
    (0..=m.min(universe)).any(|size| {
        subsets(universe, size)
            .iter()
            .any(|h| sets.iter().all(|s| s.iter().any(|e| h.contains(e))))
    })
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub fn random_instance(seed: u64, n: usize, k: usize, profile: SpatialProfile) -> Instance {
    let master = generate_master(n, profile, &mut seeded_rng(seed)).unwrap();
    master.with_k(k).unwrap()
}

/// Instance with arbitrary small coordinates, loads and alphas.
pub fn scattered_instance<R: Rng>(rng: &mut R, n: usize, k: usize) -> Instance {
    let sites = (0..n)
        .map(|id| {
            ExchangeSite::new(
                id,
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
                rng.random_range(1.0..100.0),
                rng.random_range(0.2..1.0),
            )
        })
        .collect();
    Instance::new(sites, k, 1.6).unwrap()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub terms: BTreeMap<String, f64>,
    pub sense: String,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LpFile {
    pub objective: BTreeMap<String, f64>,
    pub rows: BTreeMap<String, LpRow>,
    pub binaries: Vec<String>,
}

fn parse_linear(tokens: &[String]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for t in tokens {
        match t.as_str() {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => {
                if let Ok(v) = t.parse::<f64>() {
                    coef = Some(v);
                } else if t != "0" {
                    *out.entry(t.clone()).or_insert(0.0) += sign * coef.unwrap_or(1.0);
                    sign = 1.0;
                    coef = None;
                }
            }
        }
    }
    out
}

/// Minimal LP-format reader: objective, named constraints, Binary section.
pub fn parse_lp(text: &str) -> LpFile {
    #[derive(PartialEq)]
    enum Section {
        None,
        Objective,
        Constraints,
        Binary,
    }
    let mut lp = LpFile::default();
    let mut section = Section::None;
    let mut buffer: Vec<String> = Vec::new();
    let mut statements: Vec<(bool, Vec<String>)> = Vec::new();

    for raw in text.lines() {
        let line = raw.split('\\').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        match line.to_ascii_lowercase().as_str() {
            "minimize" | "minimise" => {
                section = Section::Objective;
                continue;
            }
            "subject to" | "st" | "s.t." => {
                if !buffer.is_empty() {
                    statements.push((true, std::mem::take(&mut buffer)));
                }
                section = Section::Constraints;
                continue;
            }
            "binary" | "binaries" => {
                if !buffer.is_empty() {
                    statements.push((false, std::mem::take(&mut buffer)));
                }
                section = Section::Binary;
                continue;
            }
            "end" => break,
            _ => {}
        }
        match section {
            Section::Binary => lp.binaries.extend(line.split_whitespace().map(String::from)),
            Section::Objective | Section::Constraints => {
                // a new "name:" starts a new statement
                if line.contains(':') && !buffer.is_empty() {
                    statements.push((section == Section::Objective, std::mem::take(&mut buffer)));
                }
                buffer.extend(line.split_whitespace().map(String::from));
            }
            Section::None => panic!("content before Minimize: {line}"),
        }
    }
    if !buffer.is_empty() {
        statements.push((false, buffer));
    }

    for (is_objective, tokens) in statements {
        let name = tokens[0].trim_end_matches(':').to_string();
        let body = &tokens[1..];
        if is_objective {
            lp.objective = parse_linear(body);
            continue;
        }
        let pos = body
            .iter()
            .position(|t| t == ">=" || t == "<=" || t == "=")
            .expect("constraint sense");
        let row = LpRow {
            terms: parse_linear(&body[..pos]),
            sense: body[pos].clone(),
            rhs: body[pos + 1].parse().expect("numeric rhs"),
        };
        assert!(lp.rows.insert(name.clone(), row).is_none(), "duplicate row {name}");
    }
    lp
}

/// Value of `name` in a 0/1 assignment given as the set of variables at 1.
fn row_activity(row: &LpRow, ones: &std::collections::BTreeSet<String>) -> f64 {
    row.terms.iter().filter(|(v, _)| ones.contains(*v)).map(|(_, c)| c).sum()
}

pub fn satisfies(lp: &LpFile, ones: &std::collections::BTreeSet<String>) -> bool {
    lp.rows.values().all(|r| {
        let a = row_activity(r, ones);
        match r.sense.as_str() {
            ">=" => a >= r.rhs - 1e-9,
            "<=" => a <= r.rhs + 1e-9,
            _ => (a - r.rhs).abs() <= 1e-9,
        }
    })
}

/// Optimum of a parsed double-coverage LP by enumerating the `y` vector
/// and giving each site its two cheapest available `x` variables.
pub fn brute_force_lp(lp: &LpFile, n_sites: usize, n_positions: usize, k: usize) -> Option<f64> {
    let mut best: Option<f64> = None;
    for open in subsets(n_positions, k) {
        let mut ones: std::collections::BTreeSet<String> = open.iter().map(|j| format!("y_{j}")).collect();
        let mut value = 0.0;
        let mut ok = true;
        for i in 0..n_sites {
            let mut opts: Vec<(f64, String)> = open
                .iter()
                .map(|j| format!("x_{i}_{j}"))
                .filter_map(|v| lp.objective.get(&v).map(|&c| (c, v)))
                .collect();
            opts.sort_by(|a, b| a.0.total_cmp(&b.0));
            if opts.len() < 2 {
                ok = false;
                break;
            }
            value += opts[0].0 + opts[1].0;
            ones.insert(opts[0].1.clone());
            ones.insert(opts[1].1.clone());
        }
        if ok && satisfies(lp, &ones) && best.is_none_or(|b| value < b) {
            best = Some(value);
        }
    }
    best
}
