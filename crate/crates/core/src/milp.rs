//! Integer-programming model of the placement problem and LP-format export.
//!
//! Variables are `x_{i}_{j}` (site `i` is parented by position `j`) and
//! `y_{j}` (a metro node is opened at position `j`), all binary. Rows:
//!
//! * `assign_{i}`: `sum_j x_i_j = 2`
//! * `card`: `sum_j y_j = k`
//! * strong linking `link_{i}_{j}`: `y_j - x_i_j >= 0`, one per `x` variable, or
//! * weak linking `wlink_{j}`: `n y_j - sum_i x_i_j >= 0`, one per position.
//!
//! Nothing forces `x` onto the two cheapest open positions, but a
//! minimising solution always uses them, so the optimum of the model is the
//! optimum of the placement problem. A feasible but suboptimal solution of
//! the model need not be a valid allocation.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::clustering::CandidateMap;
use crate::error::{Error, Result};
use crate::instance::{Allocation, CostMatrix, Instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Linking {
    #[default]
    Strong,
    Weak,
}

/// Coefficient of `y_j` in weak linking rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WeakCoefficient {
    /// Number of sites, whatever the candidate restriction.
    #[default]
    SiteCount,
    /// Number of `x` variables in the column (tighter under restriction).
    ColumnCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    X(usize, usize),
    Y(usize),
}

impl Var {
    pub fn name(&self) -> String {
        match *self {
            Var::X(i, j) => format!("x_{i}_{j}"),
            Var::Y(j) => format!("y_{j}"),
        }
    }

    /// Inverse of [`Var::name`].
    pub fn parse(name: &str) -> Option<Var> {
        let mut parts = name.split('_');
        let kind = parts.next()?;
        let a: usize = parts.next()?.parse().ok()?;
        match (kind, parts.next()) {
            ("y", None) => Some(Var::Y(a)),
            ("x", Some(b)) if parts.next().is_none() => Some(Var::X(a, b.parse().ok()?)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Eq,
    Ge,
    Le,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Eq => "=",
            Sense::Ge => ">=",
            Sense::Le => "<=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(Var, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub n_sites: usize,
    pub n_positions: usize,
    pub k: usize,
    pub linking: Linking,
    /// `(i, j, c_ij)` for every `x` variable, row-major.
    pub x_vars: Vec<(usize, usize, f64)>,
    pub rows: Vec<Row>,
}

impl MilpModel {
    pub fn n_x(&self) -> usize {
        self.x_vars.len()
    }

    pub fn n_y(&self) -> usize {
        self.n_positions
    }

    pub fn n_vars(&self) -> usize {
        self.n_x() + self.n_y()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn variables(&self) -> impl Iterator<Item = Var> + '_ {
        self.x_vars
            .iter()
            .map(|&(i, j, _)| Var::X(i, j))
            .chain((0..self.n_positions).map(Var::Y))
    }

    pub fn objective(&self) -> impl Iterator<Item = (Var, f64)> + '_ {
        self.x_vars.iter().map(|&(i, j, c)| (Var::X(i, j), c))
    }
}

pub fn build_model(instance: &Instance, candidates: Option<&CandidateMap>, linking: Linking) -> Result<MilpModel> {
    build_model_from_costs(
        &instance.cost_matrix(),
        instance.k(),
        candidates,
        linking,
        WeakCoefficient::SiteCount,
    )
}

pub fn build_model_from_costs(
    costs: &CostMatrix,
    k: usize,
    candidates: Option<&CandidateMap>,
    linking: Linking,
    weak: WeakCoefficient,
) -> Result<MilpModel> {
    let rows_n = costs.rows();
    let cols_n = costs.cols();
    if let Some(cm) = candidates {
        if cm.len() != rows_n || cm.n_positions() != cols_n {
            return Err(Error::param("candidate map does not match the cost matrix"));
        }
    }

    let mut x_vars = Vec::new();
    for i in 0..rows_n {
        match candidates {
            Some(cm) => x_vars.extend(cm.pos(i).iter().map(|&j| (i, j, costs.get(i, j)))),
            None => x_vars.extend((0..cols_n).map(|j| (i, j, costs.get(i, j)))),
        }
    }

    let mut rows = Vec::new();
    let mut by_site: Vec<Vec<Var>> = vec![Vec::new(); rows_n];
    let mut by_col: Vec<Vec<Var>> = vec![Vec::new(); cols_n];
    for &(i, j, _) in &x_vars {
        by_site[i].push(Var::X(i, j));
        by_col[j].push(Var::X(i, j));
    }
    for (i, vars) in by_site.iter().enumerate() {
        rows.push(Row {
            name: format!("assign_{i}"),
            terms: vars.iter().map(|&v| (v, 1.0)).collect(),
            sense: Sense::Eq,
            rhs: 2.0,
        });
    }
    rows.push(Row {
        name: "card".into(),
        terms: (0..cols_n).map(|j| (Var::Y(j), 1.0)).collect(),
        sense: Sense::Eq,
        rhs: k as f64,
    });
    match linking {
        Linking::Strong => {
            for &(i, j, _) in &x_vars {
                rows.push(Row {
                    name: format!("link_{i}_{j}"),
                    terms: vec![(Var::Y(j), 1.0), (Var::X(i, j), -1.0)],
                    sense: Sense::Ge,
                    rhs: 0.0,
                });
            }
        }
        Linking::Weak => {
            for (j, vars) in by_col.iter().enumerate() {
                let coef = match weak {
                    WeakCoefficient::SiteCount => rows_n as f64,
                    WeakCoefficient::ColumnCount => vars.len() as f64,
                };
                let mut terms = vec![(Var::Y(j), coef)];
                terms.extend(vars.iter().map(|&v| (v, -1.0)));
                rows.push(Row {
                    name: format!("wlink_{j}"),
                    terms,
                    sense: Sense::Ge,
                    rhs: 0.0,
                });
            }
        }
    }

    Ok(MilpModel {
        n_sites: rows_n,
        n_positions: cols_n,
        k,
        linking,
        x_vars,
        rows,
    })
}

/// Formats `v` with at most 12 significant digits, dropping trailing zeros.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

const TERMS_PER_LINE: usize = 8;

fn write_terms(out: &mut String, terms: &[(Var, f64)]) {
    for (pos, &(var, coef)) in terms.iter().enumerate() {
        if pos > 0 && pos % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if coef < 0.0 { "-" } else { "+" };
        let mag = coef.abs();
        if pos == 0 {
            if coef < 0.0 {
                out.push_str("- ");
            }
        } else {
            let _ = write!(out, " {sign} ");
        }
        if mag != 1.0 {
            let _ = write!(out, "{} ", format_number(mag));
        }
        out.push_str(&var.name());
    }
    if terms.is_empty() {
        out.push('0');
    }
}

/// LP-format text of `model`.
pub fn lp_string(model: &MilpModel) -> String {
    let mut out = String::new();
    let linking = match model.linking {
        Linking::Strong => "strong",
        Linking::Weak => "weak",
    };
    let _ = writeln!(
        out,
        "\\ double-coverage metro placement: sites={} positions={} k={} linking={linking}",
        model.n_sites, model.n_positions, model.k
    );
    out.push_str("\\ x_i_j: site i parented by position j; y_j: metro node opened at j\n");
    out.push_str("Minimize\n obj: ");
    let objective: Vec<(Var, f64)> = model.objective().collect();
    write_terms(&mut out, &objective);
    out.push_str("\nSubject To\n");
    for row in &model.rows {
        let _ = write!(out, " {}: ", row.name);
        write_terms(&mut out, &row.terms);
        let _ = writeln!(out, " {} {}", row.sense.symbol(), format_number(row.rhs));
    }
    out.push_str("Binary\n");
    for (pos, var) in model.variables().enumerate() {
        out.push(' ');
        out.push_str(&var.name());
        if pos % TERMS_PER_LINE == TERMS_PER_LINE - 1 {
            out.push('\n');
        }
    }
    if !model.n_vars().is_multiple_of(TERMS_PER_LINE) {
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

pub fn export_lp<W: Write>(model: &MilpModel, mut sink: W) -> io::Result<()> {
    sink.write_all(lp_string(model).as_bytes())?;
    sink.flush()
}

/// Reads `name value` lines produced by an external solver and maps them
/// back to an allocation. Blank lines and lines starting with `#` or `\`
/// are skipped; names other than `x_*`/`y_*` are ignored.
pub fn import_solution<R: BufRead>(reader: R, model: &MilpModel, costs: &CostMatrix) -> Result<Allocation> {
    let mut open = Vec::new();
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); model.n_sites];
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with('\\') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: "<solution>".into(),
            line: lineno as u64 + 1,
            message,
        };
        let mut it = t.split_whitespace();
        let (Some(name), Some(value)) = (it.next(), it.next()) else {
            return Err(parse_err(format!("expected `name value`, got `{t}`")));
        };
        let value: f64 = value
            .parse()
            .map_err(|_| parse_err(format!("bad value `{value}`")))?;
        if value <= 0.5 {
            continue;
        }
        match Var::parse(name) {
            Some(Var::Y(j)) if j < model.n_positions => open.push(j),
            Some(Var::X(i, j)) if i < model.n_sites && j < model.n_positions => parents[i].push(j),
            Some(_) => return Err(parse_err(format!("variable `{name}` out of range"))),
            None => {}
        }
    }
    open.sort_unstable();
    open.dedup();
    if open.len() != model.k {
        return Err(Error::param(format!(
            "solution opens {} positions, model requires {}",
            open.len(),
            model.k
        )));
    }
    let mut primary = Vec::with_capacity(model.n_sites);
    let mut secondary = Vec::with_capacity(model.n_sites);
    let mut total = 0.0;
    for (i, ps) in parents.iter_mut().enumerate() {
        ps.sort_unstable();
        ps.dedup();
        if ps.len() != 2 {
            return Err(Error::param(format!("site {i} has {} parents, expected 2", ps.len())));
        }
        if let Some(j) = ps.iter().find(|j| open.binary_search(j).is_err()) {
            return Err(Error::param(format!("site {i} is parented by closed position {j}")));
        }
        let (a, b) = (ps[0], ps[1]);
        let (ca, cb) = (costs.get(i, a), costs.get(i, b));
        let (p, s) = if cb < ca { (b, a) } else { (a, b) };
        total += costs.get(i, p) + costs.get(i, s);
        primary.push(p);
        secondary.push(s);
    }
    Ok(Allocation {
        open,
        primary,
        secondary,
        total_cost: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::CandidateSource;
    use crate::instance::ExchangeSite;

    fn three() -> Instance {
        let sites = vec![
            ExchangeSite::new(0, 0.0, 0.0, 2.0, 1.0),
            ExchangeSite::new(1, 3.0, 4.0, 1.0, 0.5),
            ExchangeSite::new(2, 6.0, 0.0, 4.0, 1.0),
        ];
        Instance::new(sites, 2, 1.6).unwrap()
    }

    #[test]
    fn strong_counts() {
        let m = build_model(&three(), None, Linking::Strong).unwrap();
        assert_eq!(m.n_x(), 9);
        assert_eq!(m.n_y(), 3);
        assert_eq!(m.n_rows(), 13);
    }

    #[test]
    fn weak_counts_and_row_text() {
        let m = build_model(&three(), None, Linking::Weak).unwrap();
        assert_eq!(m.n_rows(), 7);
        let lp = lp_string(&m);
        assert!(lp.contains(" wlink_0: 3 y_0 - x_0_0 - x_1_0 - x_2_0 >= 0\n"), "{lp}");
    }

    #[test]
    fn restricted_counts() {
        let sites: Vec<_> = (0..100)
            .map(|i| ExchangeSite::new(i, i as f64, (i % 7) as f64, 1.0, 1.0))
            .collect();
        let inst = Instance::new(sites, 5, 1.6).unwrap();
        let pos = (0..100).map(|i| (0..4).map(|d| (i + d) % 100).collect()).collect();
        let cm = CandidateMap::new(pos, 100, CandidateSource::Imported).unwrap();
        let m = build_model(&inst, Some(&cm), Linking::Strong).unwrap();
        assert_eq!(m.n_x(), 400);
        assert_eq!(m.n_rows(), 100 + 1 + 400);
        let w = build_model(&inst, Some(&cm), Linking::Weak).unwrap();
        assert_eq!(w.n_rows(), 100 + 1 + 100);
    }

    #[test]
    fn objective_coefficient_is_cost() {
        let inst = three();
        let m = build_model(&inst, None, Linking::Strong).unwrap();
        let c01 = m.objective().find(|(v, _)| *v == Var::X(0, 1)).unwrap().1;
        assert_eq!(c01, inst.cost(0, 1).unwrap());
        assert_eq!(c01, 16.0);
    }

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(3.0), "3");
        assert_eq!(format_number(-2.5), "-2.5");
        assert_eq!(format_number(1.6), "1.6");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(123_456_789.123_456_8), "123456789.123");
        assert_eq!(format_number(1e-7), "1e-7");
        assert_eq!(format_number(2.5e15), "2.5e15");
        assert_eq!(format_number(999999999999.9999), "1e12");
    }

    #[test]
    fn var_names_round_trip() {
        for v in [Var::X(0, 0), Var::X(12, 7), Var::Y(3)] {
            assert_eq!(Var::parse(&v.name()), Some(v));
        }
        assert_eq!(Var::parse("z_1"), None);
        assert_eq!(Var::parse("x_1"), None);
        assert_eq!(Var::parse("x_1_2_3"), None);
    }

    #[test]
    fn import_maps_back() {
        let inst = three();
        let m = build_model(&inst, None, Linking::Strong).unwrap();
        let costs = inst.cost_matrix();
        let text = "# solver output\ny_0 1\ny_2 1\ny_1 0\nx_0_0 1\nx_0_2 1\nx_1_0 1\nx_1_2 1\nx_2_2 1\nx_2_0 1\nobj 123\n";
        let a = import_solution(text.as_bytes(), &m, &costs).unwrap();
        assert_eq!(a, costs.allocate(&[0, 2]).unwrap());

        let bad = "y_0 1\ny_2 1\nx_0_0 1\nx_0_1 1\n";
        assert!(import_solution(bad.as_bytes(), &m, &costs).is_err());
        let garbled = "y_0 one\n";
        assert!(matches!(
            import_solution(garbled.as_bytes(), &m, &costs),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
