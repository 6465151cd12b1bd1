//! Parameter grids: every combination of the listed values becomes one row.
//!
//! ```toml
//! verb = "certify"          # or "roots"
//! family = ["even_subgraph"]
//! graph = ["cycle:3"]       # path:n, cycle:n, complete:n, star:k, edges:n:0-1,1-2
//! lambda = [0.5]
//! rho = [0.1, 0.5, 0.9]
//! ```
//!
//! `roots` grids use `beta`, `gamma` and `d`. Rows follow the order of the
//! lists, last key fastest; a failing point is recorded in its row.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use serde_json::json;

use zerofree::stability::{certify_model, check_two_spin_roots};
use zerofree::{Caps, Error, Family, Graph};

use crate::{fmt_f64, CliError, CliResult, Report, Table};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub verb: String,
    #[serde(default)]
    pub family: Vec<String>,
    #[serde(default)]
    pub graph: Vec<String>,
    #[serde(default)]
    pub lambda: Vec<f64>,
    #[serde(default)]
    pub rho: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub gamma: Vec<f64>,
    #[serde(default)]
    pub d: Vec<usize>,
}

/// `path:n`, `cycle:n`, `complete:n`, `star:k` or `edges:n:u-v,u-v`.
pub fn parse_graph(s: &str) -> Result<Graph, Error> {
    let bad = || Error::InvalidGraph(format!("cannot parse graph `{s}`"));
    let mut parts = s.splitn(3, ':');
    let kind = parts.next().ok_or_else(bad)?;
    let n: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    match kind {
        "path" => Ok(Graph::path(n)),
        "cycle" => Ok(Graph::cycle(n)),
        "complete" => Ok(Graph::complete(n)),
        "star" => Ok(Graph::star(n)),
        "edges" => {
            let edges = parts
                .next()
                .ok_or_else(bad)?
                .split(',')
                .map(|e| {
                    let (u, v) = e.split_once('-').ok_or_else(bad)?;
                    Ok((u.trim().parse().map_err(|_| bad())?, v.trim().parse().map_err(|_| bad())?))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            Graph::new(n, edges)
        }
        _ => Err(bad()),
    }
}

fn cartesian(axes: &[(&str, Vec<String>)]) -> Vec<Vec<String>> {
    axes.iter().fold(vec![Vec::new()], |acc, (_, values)| {
        acc.into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect()
    })
}

fn strings<T: ToString>(xs: &[T]) -> Vec<String> {
    xs.iter().map(T::to_string).collect()
}

pub fn run_sweep(path: &Path, caps: &Caps) -> CliResult<Report> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let grid: SweepGrid = toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    sweep_grid(&grid, caps)
}

pub fn sweep_grid(grid: &SweepGrid, caps: &Caps) -> CliResult<Report> {
    let (axes, outcome_header): (Vec<(&str, Vec<String>)>, Vec<&str>) = match grid.verb.as_str() {
        "certify" => {
            let mut axes = vec![("family", grid.family.clone()), ("graph", grid.graph.clone()), ("lambda", strings(&grid.lambda))];
            for (k, v) in [("rho", &grid.rho), ("beta", &grid.beta), ("gamma", &grid.gamma)] {
                if !v.is_empty() {
                    axes.push((k, strings(v)));
                }
            }
            (axes, vec!["delta", "eta", "max_eigmax", "pinnings", "passes", "error"])
        }
        "roots" => (
            vec![("beta", strings(&grid.beta)), ("gamma", strings(&grid.gamma)), ("d", strings(&grid.d))],
            vec!["epsilon_d", "max_ratio", "all_negative_real", "ratios_ok", "error"],
        ),
        v => return Err(CliError::Input(format!("sweep verb must be certify or roots, got `{v}`"))),
    };
    if let Some((k, _)) = axes.iter().find(|(_, v)| v.is_empty()) {
        return Err(Error::Precondition(format!("empty grid: `{k}` has no values")).into());
    }
    let mut rows = Vec::new();
    let mut failures = 0;
    for point in cartesian(&axes) {
        let named: BTreeMap<&str, &str> = axes.iter().map(|a| a.0).zip(point.iter().map(String::as_str)).collect();
        let outcome = match grid.verb.as_str() {
            "certify" => certify_point(&named, caps),
            _ => roots_point(&named),
        };
        let cells = outcome.unwrap_or_else(|e| {
            let mut blank = vec![String::new(); outcome_header.len() - 1];
            blank.push(e.to_string());
            blank
        });
        if cells.last().is_some_and(|e| !e.is_empty()) || cells.iter().any(|c| c == "false") {
            failures += 1;
        }
        rows.push(point.into_iter().chain(cells).collect());
    }
    let header = axes.iter().map(|a| a.0.to_string()).chain(outcome_header.iter().map(|s| s.to_string())).collect();
    let mut r = Report::new("sweep", json!({ "grid": format!("{grid:?}") }));
    r.results = json!({ "points": rows.len(), "failing_points": failures });
    r.passed = Some(failures == 0);
    r.table = Some(Table { header, rows });
    r.tags.push(match grid.verb.as_str() {
        "certify" => "eta = 8/delta against brute-force EigMax over a grid".into(),
        _ => "two-spin local polynomial root structure over a grid".into(),
    });
    Ok(r)
}

fn num(named: &BTreeMap<&str, &str>, k: &str) -> Result<Option<f64>, Error> {
    named
        .get(k)
        .map(|v| v.parse::<f64>().map_err(|_| Error::param(k, "a number", v)))
        .transpose()
}

fn certify_point(named: &BTreeMap<&str, &str>, caps: &Caps) -> Result<Vec<String>, Error> {
    let mut params = BTreeMap::new();
    for k in ["lambda", "rho", "beta", "gamma"] {
        if let Some(x) = num(named, k)? {
            params.insert(k.to_string(), x);
        }
    }
    let family = Family::from_params(named["family"], &params)?;
    let model = family.build(parse_graph(named["graph"])?)?;
    let c = certify_model(&model, family.lambda(), caps)?;
    let cmp = c.comparison.as_ref();
    Ok(vec![
        fmt_f64(c.delta),
        fmt_f64(c.certificate.eta),
        cmp.map(|x| fmt_f64(x.max_eigmax)).unwrap_or_default(),
        cmp.map(|x| x.pinnings.to_string()).unwrap_or_default(),
        cmp.map(|x| x.passes.to_string()).unwrap_or_default(),
        c.skipped.unwrap_or_default(),
    ])
}

fn roots_point(named: &BTreeMap<&str, &str>) -> Result<Vec<String>, Error> {
    let beta = num(named, "beta")?.expect("axis present");
    let gamma = num(named, "gamma")?.expect("axis present");
    let d: usize = named["d"].parse().map_err(|_| Error::param("d", "an integer", named["d"]))?;
    let r = check_two_spin_roots(beta, gamma, d)?;
    Ok(vec![
        r.roots.first().map(|z| fmt_f64(-z.re)).unwrap_or_default(),
        r.max_ratio.map(fmt_f64).unwrap_or_default(),
        r.all_negative_real.to_string(),
        r.ratios_ok.to_string(),
        String::new(),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_specs() {
        assert_eq!(parse_graph("cycle:3").unwrap(), Graph::cycle(3));
        assert_eq!(parse_graph("edges:3:0-1,1-2").unwrap(), Graph::path(3));
        assert!(parse_graph("wheel:4").is_err());
    }

    #[test]
    fn single_point_grid() {
        let grid: SweepGrid = toml::from_str("verb = \"roots\"\nbeta = [0.5]\ngamma = [1.0]\nd = [3]\n").unwrap();
        let r = sweep_grid(&grid, &Caps::default()).unwrap();
        assert_eq!(r.table.unwrap().rows.len(), 1);
        assert_eq!(r.passed, Some(true));
    }

    #[test]
    fn empty_axis_is_refused() {
        let grid: SweepGrid = toml::from_str("verb = \"roots\"\nbeta = []\ngamma = [1.0]\nd = [3]\n").unwrap();
        assert!(sweep_grid(&grid, &Caps::default()).is_err());
        assert!(toml::from_str::<SweepGrid>("verb = \"roots\"\ncolour = [1]\n").is_err());
    }
}
