//! Site spaces, model specifications, named families, configurations and pinnings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::scalar::Scalar;

/// Products below this size are recomputed in log space.
const LOG_SPACE_THRESHOLD: f64 = 1e-300;

/// What the sites of a model are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SiteKind {
    EdgeSites,
    VertexSites,
    CubeSites,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteSpace {
    pub kind: SiteKind,
    pub site_count: usize,
    pub spin_count: usize,
}

/// Enumeration limits. Every exhaustive routine checks these and refuses
/// rather than truncating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    /// Largest number of sites for any exhaustive routine.
    pub max_sites: usize,
    /// Largest `q^n` for full-configuration enumeration.
    pub max_configurations: u128,
    /// Largest `(q+1)^n` for pinning enumeration (3^12 for binary spins).
    pub max_partial_assignments: u128,
    /// Largest number of positive-weight states for dense transition matrices.
    pub max_states: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_sites: 20,
            max_configurations: 1 << 20,
            max_partial_assignments: 531_441,
            max_states: 4096,
        }
    }
}

/// The named families with a binary symmetric Holant form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Matchings { lambda: f64 },
    EdgeCover { lambda: f64, rho: f64 },
    EvenSubgraph { lambda: f64, rho: f64 },
    TwoSpinEdge { beta: f64, gamma: f64, lambda: f64 },
    IsingLine { beta: f64, lambda: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Matchings { .. } => "matchings",
            Family::EdgeCover { .. } => "edge_cover",
            Family::EvenSubgraph { .. } => "even_subgraph",
            Family::TwoSpinEdge { .. } => "two_spin_edge",
            Family::IsingLine { .. } => "ising_line",
        }
    }

    /// Parse a family from its name and a parameter map. Unknown keys are rejected.
    pub fn from_params(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let allowed: &[&str] = match name {
            "matchings" => &["lambda"],
            "edge_cover" | "even_subgraph" => &["lambda", "rho"],
            "two_spin_edge" => &["beta", "gamma", "lambda"],
            "ising_line" => &["beta", "lambda"],
            _ => return Err(Error::UnknownFamily(name.to_string())),
        };
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::param(k, &format!("an allowed key for {name} ({allowed:?})"), "unknown key"));
        }
        let get = |k: &str| params.get(k).copied().ok_or_else(|| Error::MissingParameter(k.to_string()));
        let family = match name {
            "matchings" => Family::Matchings { lambda: get("lambda")? },
            "edge_cover" => Family::EdgeCover { lambda: get("lambda")?, rho: get("rho")? },
            "even_subgraph" => Family::EvenSubgraph { lambda: get("lambda")?, rho: get("rho")? },
            "two_spin_edge" => Family::TwoSpinEdge {
                beta: get("beta")?,
                gamma: get("gamma")?,
                lambda: get("lambda")?,
            },
            _ => Family::IsingLine {
                beta: get("beta")?,
                lambda: params.get("lambda").copied().unwrap_or(1.0),
            },
        };
        family.validate()?;
        Ok(family)
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, x: f64) -> Result<()> {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::param(name, "> 0", x))
            }
        }
        fn unit(name: &str, x: f64) -> Result<()> {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::param(name, "in [0, 1]", x))
            }
        }
        match *self {
            Family::Matchings { lambda } => positive("lambda", lambda),
            Family::EdgeCover { lambda, rho } | Family::EvenSubgraph { lambda, rho } => {
                positive("lambda", lambda)?;
                unit("rho", rho)
            }
            Family::TwoSpinEdge { beta, gamma, lambda } => {
                if !(beta.is_finite() && beta >= 0.0) {
                    return Err(Error::param("beta", ">= 0", beta));
                }
                positive("gamma", gamma)?;
                positive("lambda", lambda)
            }
            Family::IsingLine { beta, lambda } => {
                positive("beta", beta)?;
                positive("lambda", lambda)
            }
        }
    }

    /// The uniform edge field of the family.
    pub fn lambda(&self) -> f64 {
        match *self {
            Family::Matchings { lambda }
            | Family::EdgeCover { lambda, .. }
            | Family::EvenSubgraph { lambda, .. }
            | Family::TwoSpinEdge { lambda, .. }
            | Family::IsingLine { lambda, .. } => lambda,
        }
    }

    /// Same family with the edge field replaced.
    pub fn with_lambda(&self, lambda: f64) -> Family {
        let mut f = *self;
        match &mut f {
            Family::Matchings { lambda: l }
            | Family::EdgeCover { lambda: l, .. }
            | Family::EvenSubgraph { lambda: l, .. }
            | Family::TwoSpinEdge { lambda: l, .. }
            | Family::IsingLine { lambda: l, .. } => *l = lambda,
        }
        f
    }

    /// The vertex function `f_v(k)` for a vertex of degree `d`, `k = 0..=d`.
    pub fn local_function(&self, d: usize) -> Vec<f64> {
        (0..=d)
            .map(|k| match *self {
                Family::Matchings { .. } => {
                    if k <= 1 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Family::EdgeCover { rho, .. } => {
                    if k == 0 {
                        rho
                    } else {
                        1.0
                    }
                }
                Family::EvenSubgraph { rho, .. } => {
                    if k % 2 == 0 {
                        1.0
                    } else {
                        rho
                    }
                }
                Family::TwoSpinEdge { beta, gamma, .. } => two_spin_value(beta, gamma, d, k),
                Family::IsingLine { beta, .. } => two_spin_value(beta, beta, d, k),
            })
            .collect()
    }

    pub fn build(&self, graph: Graph) -> Result<ModelSpec> {
        self.validate()?;
        let local = (0..graph.vertex_count()).map(|v| self.local_function(graph.degree(v))).collect();
        let fields = vec![vec![self.lambda()]; graph.edge_count()];
        let mut model = ModelSpec::new(Interaction::BinarySymmetricHolant { graph, local }, fields)?;
        model.family = Some(*self);
        Ok(model)
    }
}

fn choose2(k: usize) -> i32 {
    (k * k.saturating_sub(1) / 2) as i32
}

/// `β^{C(k,2)} γ^{C(d−k,2)}` with `0^0 = 1`.
pub fn two_spin_value(beta: f64, gamma: f64, d: usize, k: usize) -> f64 {
    beta.powi(choose2(k)) * gamma.powi(choose2(d - k))
}

/// Build a named family from its name and parameters.
pub fn build_named_model(family: &str, graph: Graph, params: &BTreeMap<String, f64>) -> Result<ModelSpec> {
    Family::from_params(family, params)?.build(graph)
}

/// A potential on `{−1, 1}^n` given by its Fourier–Walsh coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierPotential {
    pub n: usize,
    /// Sorted subsets of `0..n` mapped to their coefficient.
    pub coefficients: BTreeMap<Vec<usize>, f64>,
}

impl FourierPotential {
    pub fn new(n: usize, coefficients: BTreeMap<Vec<usize>, f64>) -> Result<Self> {
        if n == 0 || n > 63 {
            return Err(Error::param("n", "in 1..=63", n));
        }
        let mut clean = BTreeMap::new();
        for (s, c) in coefficients {
            let mut s = s;
            s.sort_unstable();
            s.dedup();
            if s.iter().any(|&i| i >= n) {
                return Err(Error::InvalidModel(format!("subset {s:?} has a coordinate outside 0..{n}")));
            }
            if !c.is_finite() {
                return Err(Error::InvalidModel(format!("coefficient of {s:?} is not finite")));
            }
            if c != 0.0 {
                *clean.entry(s).or_insert(0.0) += c;
            }
        }
        Ok(FourierPotential { n, coefficients: clean })
    }

    pub fn from_terms(n: usize, terms: &[(&[usize], f64)]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for &(s, c) in terms {
            *map.entry(s.to_vec()).or_insert(0.0) += c;
        }
        Self::new(n, map)
    }

    /// `f(x)` where spin 1 encodes `x_i = +1` and spin 0 encodes `x_i = −1`.
    pub fn evaluate(&self, spins: &[usize]) -> f64 {
        self.coefficients
            .iter()
            .map(|(s, c)| {
                let negatives = s.iter().filter(|&&i| spins[i] == 0).count();
                if negatives % 2 == 0 {
                    *c
                } else {
                    -c
                }
            })
            .sum()
    }

    /// Largest subset size with a nonzero coefficient (0 for constants).
    pub fn degree(&self) -> usize {
        self.coefficients.keys().map(Vec::len).max().unwrap_or(0)
    }
}

/// The interaction part `w(σ)` of a model; fields are stored separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Interaction {
    /// Edge sites, spins {0,1}; `local[v][k]` is the vertex weight when `k`
    /// incident edges are selected.
    BinarySymmetricHolant { graph: Graph, local: Vec<Vec<f64>> },
    /// Vertex sites, spins `0..q`; `matrices[e]` is row-major `q×q`, indexed
    /// by the spins of the edge's first and second endpoint.
    VertexSpin { graph: Graph, q: usize, matrices: Vec<Vec<f64>> },
    /// Edge sites, spins `0..q`; `tensors[v]` has `q^deg(v)` entries indexed in
    /// mixed radix over the incident edges, first incident edge most significant.
    TensorNetwork { graph: Graph, q: usize, tensors: Vec<Vec<f64>> },
    /// Cube sites with `w(x) = exp(f(x))`.
    CubeFourier { potential: FourierPotential },
}

/// A Gibbs model: interaction plus one field per (site, nonzero spin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    interaction: Interaction,
    /// `fields[site][k - 1]` is the field of spin `k ≥ 1`.
    fields: Vec<Vec<f64>>,
    family: Option<Family>,
    /// Per-site list of (coefficient, subset) for cube models, built on construction.
    #[serde(skip)]
    cube_terms: Vec<Vec<(f64, Vec<usize>)>>,
}

impl ModelSpec {
    pub fn new(interaction: Interaction, fields: Vec<Vec<f64>>) -> Result<Self> {
        let space = site_space(&interaction)?;
        validate_interaction(&interaction)?;
        if fields.len() != space.site_count {
            return Err(Error::InvalidModel(format!(
                "{} field rows for {} sites",
                fields.len(),
                space.site_count
            )));
        }
        for (s, row) in fields.iter().enumerate() {
            if row.len() != space.spin_count - 1 {
                return Err(Error::InvalidModel(format!(
                    "site {s} has {} fields, expected {}",
                    row.len(),
                    space.spin_count - 1
                )));
            }
            if let Some(x) = row.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                return Err(Error::param(&format!("field[{s}]"), "> 0 and finite", x));
            }
        }
        let cube_terms = match &interaction {
            Interaction::CubeFourier { potential } => {
                let mut terms = vec![Vec::new(); potential.n];
                for (s, c) in &potential.coefficients {
                    for &i in s {
                        terms[i].push((*c, s.clone()));
                    }
                }
                terms
            }
            _ => Vec::new(),
        };
        Ok(ModelSpec {
            interaction,
            fields,
            family: None,
            cube_terms,
        })
    }

    /// Model with unit fields.
    pub fn with_unit_fields(interaction: Interaction) -> Result<Self> {
        let space = site_space(&interaction)?;
        Self::new(interaction, vec![vec![1.0; space.spin_count - 1]; space.site_count])
    }

    pub fn interaction(&self) -> &Interaction {
        &self.interaction
    }

    pub fn family(&self) -> Option<&Family> {
        self.family.as_ref()
    }

    pub fn fields(&self) -> &[Vec<f64>] {
        &self.fields
    }

    pub fn field(&self, site: usize, spin: usize) -> f64 {
        if spin == 0 {
            1.0
        } else {
            self.fields[site][spin - 1]
        }
    }

    /// Same interaction with new fields. The family tag is dropped unless the
    /// new fields are uniform, in which case it is updated.
    pub fn with_fields(&self, fields: Vec<Vec<f64>>) -> Result<Self> {
        let mut m = Self::new(self.interaction.clone(), fields)?;
        if let Some(f) = self.family {
            let first = m.fields.first().and_then(|r| r.first()).copied();
            if let Some(l) = first {
                if m.fields.iter().all(|r| r.iter().all(|&x| x == l)) {
                    m.family = Some(f.with_lambda(l));
                }
            }
        }
        Ok(m)
    }

    pub fn with_uniform_field(&self, lambda: f64) -> Result<Self> {
        let s = self.site_space();
        self.with_fields(vec![vec![lambda; s.spin_count - 1]; s.site_count])
    }

    pub fn site_space(&self) -> SiteSpace {
        site_space(&self.interaction).expect("validated on construction")
    }

    pub fn site_count(&self) -> usize {
        self.site_space().site_count
    }

    pub fn spin_count(&self) -> usize {
        self.site_space().spin_count
    }

    pub fn graph(&self) -> Option<&Graph> {
        match &self.interaction {
            Interaction::BinarySymmetricHolant { graph, .. }
            | Interaction::VertexSpin { graph, .. }
            | Interaction::TensorNetwork { graph, .. } => Some(graph),
            Interaction::CubeFourier { .. } => None,
        }
    }

    /// The factors whose product is `w(σ)` (fields excluded).
    fn interaction_factors(&self, spins: &[usize], out: &mut Vec<f64>) {
        out.clear();
        match &self.interaction {
            Interaction::BinarySymmetricHolant { graph, local } => {
                for v in 0..graph.vertex_count() {
                    let k = graph.incident(v).iter().filter(|&&e| spins[e] == 1).count();
                    out.push(local[v][k]);
                }
            }
            Interaction::VertexSpin { graph, q, matrices } => {
                for (e, &(u, v)) in graph.edges().iter().enumerate() {
                    out.push(matrices[e][spins[u] * q + spins[v]]);
                }
            }
            Interaction::TensorNetwork { graph, q, tensors } => {
                for v in 0..graph.vertex_count() {
                    out.push(tensors[v][tensor_index(graph.incident(v), spins, *q)]);
                }
            }
            Interaction::CubeFourier { potential } => out.push(potential.evaluate(spins).exp()),
        }
    }

    /// `w(σ)` without field factors.
    pub fn interaction_weight(&self, config: &Configuration) -> f64 {
        let mut f = Vec::new();
        self.interaction_factors(&config.spins, &mut f);
        product(&f)
    }

    /// `w(σ)` in an arbitrary scalar type (exact mode uses `BigRational`).
    pub fn interaction_weight_as<T: Scalar>(&self, config: &Configuration) -> T {
        let mut f = Vec::new();
        self.interaction_factors(&config.spins, &mut f);
        f.iter().fold(T::one(), |acc, &x| acc * T::from_f64(x))
    }

    /// Unnormalized Gibbs weight `w(σ) λ^σ`; 0 for infeasible configurations.
    pub fn weight(&self, config: &Configuration) -> f64 {
        let mut f = Vec::new();
        self.interaction_factors(&config.spins, &mut f);
        for (s, &k) in config.spins.iter().enumerate() {
            if k != 0 {
                f.push(self.fields[s][k - 1]);
            }
        }
        product(&f)
    }

    pub fn check_configuration(&self, config: &Configuration) -> Result<()> {
        let s = self.site_space();
        if config.spins.len() != s.site_count {
            return Err(Error::Precondition(format!(
                "configuration has {} sites, model has {}",
                config.spins.len(),
                s.site_count
            )));
        }
        if let Some(k) = config.spins.iter().find(|&&k| k >= s.spin_count) {
            return Err(Error::Precondition(format!("spin {k} outside 0..{}", s.spin_count)));
        }
        Ok(())
    }

    /// Weights proportional to the conditional law of `site` given the rest of
    /// `config`, computed from the factors touching `site` only.
    pub fn conditional_weights(&self, config: &Configuration, site: usize) -> Vec<f64> {
        let spins = &config.spins;
        let q = self.spin_count();
        let mut out: Vec<f64> = match &self.interaction {
            Interaction::BinarySymmetricHolant { graph, local } => {
                let (u, v) = graph.edge(site);
                let count = |x: usize| graph.incident(x).iter().filter(|&&e| e != site && spins[e] == 1).count();
                let (cu, cv) = (count(u), count(v));
                (0..2).map(|t| local[u][cu + t] * local[v][cv + t]).collect()
            }
            Interaction::VertexSpin { graph, q, matrices } => (0..*q)
                .map(|t| {
                    graph
                        .incident(site)
                        .iter()
                        .map(|&e| {
                            let (a, b) = graph.edge(e);
                            let sa = if a == site { t } else { spins[a] };
                            let sb = if b == site { t } else { spins[b] };
                            matrices[e][sa * q + sb]
                        })
                        .product()
                })
                .collect(),
            Interaction::TensorNetwork { graph, q, tensors } => {
                let (u, v) = graph.edge(site);
                let mut local = spins.clone();
                (0..*q)
                    .map(|t| {
                        local[site] = t;
                        tensors[u][tensor_index(graph.incident(u), &local, *q)]
                            * tensors[v][tensor_index(graph.incident(v), &local, *q)]
                    })
                    .collect()
            }
            Interaction::CubeFourier { .. } => {
                let exponent = |t: usize| -> f64 {
                    self.cube_terms[site]
                        .iter()
                        .map(|(c, s)| {
                            let neg = s
                                .iter()
                                .filter(|&&i| if i == site { t == 0 } else { spins[i] == 0 })
                                .count();
                            if neg % 2 == 0 {
                                *c
                            } else {
                                -c
                            }
                        })
                        .sum()
                };
                let (a, b) = (exponent(0), exponent(1));
                let m = a.max(b);
                vec![(a - m).exp(), (b - m).exp()]
            }
        };
        for (t, w) in out.iter_mut().enumerate().skip(1) {
            *w *= self.fields[site][t - 1];
        }
        debug_assert_eq!(out.len(), q);
        out
    }

    /// Every configuration in lexicographic order (site 0 most significant).
    pub fn all_configurations(&self, caps: &Caps) -> Result<impl Iterator<Item = Configuration>> {
        let s = self.site_space();
        let total = checked_power(s.spin_count, s.site_count);
        if s.site_count > caps.max_sites {
            return Err(Error::cap("site count", s.site_count as u128, caps.max_sites as u128));
        }
        if total > caps.max_configurations {
            return Err(Error::cap("configuration count", total, caps.max_configurations));
        }
        let (n, q) = (s.site_count, s.spin_count);
        Ok((0..total as u64).map(move |code| Configuration::decode(code, n, q)))
    }

    /// Positive-weight configurations with their weights under the model's fields.
    pub fn valid_configurations(&self, caps: &Caps) -> Result<Vec<(Configuration, f64)>> {
        let out: Vec<_> = self
            .all_configurations(caps)?
            .filter_map(|c| {
                let w = self.weight(&c);
                (w > 0.0).then_some((c, w))
            })
            .collect();
        if out.is_empty() {
            return Err(Error::InvalidModel("every configuration has zero weight".into()));
        }
        Ok(out)
    }

    /// Whether some positive-weight configuration extends the pinning.
    pub fn is_feasible(&self, pinning: &Pinning, caps: &Caps) -> Result<bool> {
        self.check_pinning(pinning)?;
        Ok(self
            .valid_configurations(caps)?
            .iter()
            .any(|(c, _)| pinning.is_extended_by(c)))
    }

    pub fn check_pinning(&self, pinning: &Pinning) -> Result<()> {
        let s = self.site_space();
        if pinning.assignment.len() != s.site_count {
            return Err(Error::Precondition(format!(
                "pinning covers {} sites, model has {}",
                pinning.assignment.len(),
                s.site_count
            )));
        }
        if let Some(k) = pinning.assignment.iter().flatten().find(|&&k| k >= s.spin_count) {
            return Err(Error::Precondition(format!("pinned spin {k} outside 0..{}", s.spin_count)));
        }
        Ok(())
    }

    /// Every feasible pinning with at most `max_pinned` pinned sites, ordered by
    /// pinned count and then lexicographically; the empty pinning comes first.
    pub fn enumerate_pinnings(&self, max_pinned: usize, caps: &Caps) -> Result<Vec<Pinning>> {
        let s = self.site_space();
        let (n, q) = (s.site_count, s.spin_count);
        let partial = checked_power(q + 1, n);
        if partial > caps.max_partial_assignments {
            return Err(Error::cap("partial assignment count", partial, caps.max_partial_assignments));
        }
        let valid = self.valid_configurations(caps)?;
        let mut place = vec![1u64; n];
        for i in (0..n.saturating_sub(1)).rev() {
            place[i] = place[i + 1] * (q as u64 + 1);
        }
        let mut seen = vec![false; partial as usize];
        for (c, _) in &valid {
            for mask in 0u64..(1u64 << n) {
                if mask.count_ones() as usize > max_pinned {
                    continue;
                }
                let code: u64 = (0..n)
                    .filter(|&i| mask >> (n - 1 - i) & 1 == 1)
                    .map(|i| (c.spins[i] as u64 + 1) * place[i])
                    .sum();
                seen[code as usize] = true;
            }
        }
        let mut out: Vec<Pinning> = seen
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(code, _)| {
                let mut code = code as u64;
                let mut assignment = vec![None; n];
                for i in (0..n).rev() {
                    let d = (code % (q as u64 + 1)) as usize;
                    code /= q as u64 + 1;
                    assignment[i] = d.checked_sub(1);
                }
                Pinning {
                    assignment,
                    feasible: Some(true),
                }
            })
            .collect();
        out.sort_by_key(|p| p.pinned_count());
        Ok(out)
    }

    /// Unpinned (site, spin) pairs with a positive-weight extension.
    pub fn feasible_pairs(&self, pinning: &Pinning, caps: &Caps) -> Result<FeasiblePairs> {
        self.check_pinning(pinning)?;
        let s = self.site_space();
        let mut hit = vec![vec![false; s.spin_count]; s.site_count];
        let mut any = false;
        for (c, _) in self.valid_configurations(caps)? {
            if pinning.is_extended_by(&c) {
                any = true;
                for (site, &k) in c.spins.iter().enumerate() {
                    hit[site][k] = true;
                }
            }
        }
        if !any {
            return Err(Error::InfeasiblePinning);
        }
        let pairs = (0..s.site_count)
            .filter(|&v| pinning.assignment[v].is_none())
            .flat_map(|v| (0..s.spin_count).map(move |k| (v, k)))
            .filter(|&(v, k)| hit[v][k])
            .collect();
        Ok(FeasiblePairs { pairs })
    }
}

fn site_space(interaction: &Interaction) -> Result<SiteSpace> {
    let (kind, site_count, spin_count) = match interaction {
        Interaction::BinarySymmetricHolant { graph, .. } => (SiteKind::EdgeSites, graph.edge_count(), 2),
        Interaction::VertexSpin { graph, q, .. } => (SiteKind::VertexSites, graph.vertex_count(), *q),
        Interaction::TensorNetwork { graph, q, .. } => (SiteKind::EdgeSites, graph.edge_count(), *q),
        Interaction::CubeFourier { potential } => (SiteKind::CubeSites, potential.n, 2),
    };
    if site_count == 0 {
        return Err(Error::InvalidModel("model has no sites".into()));
    }
    if spin_count < 2 {
        return Err(Error::param("q", ">= 2", spin_count));
    }
    Ok(SiteSpace {
        kind,
        site_count,
        spin_count,
    })
}

fn check_weights(what: &str, values: &[f64]) -> Result<()> {
    match values.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        Some(x) => Err(Error::InvalidModel(format!("{what} has entry {x}, expected finite and >= 0"))),
        None => Ok(()),
    }
}

fn validate_interaction(interaction: &Interaction) -> Result<()> {
    match interaction {
        Interaction::BinarySymmetricHolant { graph, local } => {
            if local.len() != graph.vertex_count() {
                return Err(Error::InvalidModel(format!(
                    "{} vertex functions for {} vertices",
                    local.len(),
                    graph.vertex_count()
                )));
            }
            for (v, f) in local.iter().enumerate() {
                if f.len() != graph.degree(v) + 1 {
                    return Err(Error::InvalidModel(format!(
                        "f_{v} has {} values, vertex degree is {}",
                        f.len(),
                        graph.degree(v)
                    )));
                }
                check_weights(&format!("f_{v}"), f)?;
                if graph.degree(v) == 0 && f[0] == 0.0 {
                    return Err(Error::InvalidGraph(format!(
                        "vertex {v} is isolated and f_{v}(0) = 0, so every configuration has zero weight"
                    )));
                }
            }
        }
        Interaction::VertexSpin { graph, q, matrices } => {
            if *q > 8 {
                return Err(Error::param("q", "<= 8", q));
            }
            if matrices.len() != graph.edge_count() {
                return Err(Error::InvalidModel(format!(
                    "{} matrices for {} edges",
                    matrices.len(),
                    graph.edge_count()
                )));
            }
            for (e, a) in matrices.iter().enumerate() {
                if a.len() != q * q {
                    return Err(Error::InvalidModel(format!("matrix {e} has {} entries, expected {}", a.len(), q * q)));
                }
                check_weights(&format!("matrix {e}"), a)?;
            }
        }
        Interaction::TensorNetwork { graph, q, tensors } => {
            if *q > 8 {
                return Err(Error::param("q", "<= 8", q));
            }
            if tensors.len() != graph.vertex_count() {
                return Err(Error::InvalidModel(format!(
                    "{} tensors for {} vertices",
                    tensors.len(),
                    graph.vertex_count()
                )));
            }
            for (v, t) in tensors.iter().enumerate() {
                let expected = checked_power(*q, graph.degree(v));
                if t.len() as u128 != expected {
                    return Err(Error::InvalidModel(format!(
                        "tensor {v} has {} entries, expected {expected}",
                        t.len()
                    )));
                }
                check_weights(&format!("tensor {v}"), t)?;
            }
        }
        Interaction::CubeFourier { potential } => {
            if potential.n == 0 {
                return Err(Error::InvalidModel("cube model needs n >= 1".into()));
            }
        }
    }
    Ok(())
}

fn tensor_index(incident: &[usize], spins: &[usize], q: usize) -> usize {
    incident.iter().fold(0, |acc, &e| acc * q + spins[e])
}

pub(crate) fn checked_power(base: usize, exp: usize) -> u128 {
    (0..exp).fold(1u128, |acc, _| acc.saturating_mul(base as u128))
}

/// Product of nonnegative factors, switching to log space when a factor is tiny.
fn product(factors: &[f64]) -> f64 {
    if factors.iter().any(|&x| x == 0.0) {
        return 0.0;
    }
    let direct: f64 = factors.iter().product();
    if direct.is_normal() && direct >= LOG_SPACE_THRESHOLD {
        direct
    } else {
        factors.iter().map(|x| x.ln()).sum::<f64>().exp()
    }
}

/// A full assignment of spins to sites.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration {
    pub spins: Vec<usize>,
}

impl Configuration {
    pub fn new(spins: Vec<usize>) -> Self {
        Configuration { spins }
    }

    pub fn zeros(n: usize) -> Self {
        Configuration { spins: vec![0; n] }
    }

    pub fn decode(mut code: u64, n: usize, q: usize) -> Self {
        let mut spins = vec![0; n];
        for i in (0..n).rev() {
            spins[i] = (code % q as u64) as usize;
            code /= q as u64;
        }
        Configuration { spins }
    }

    pub fn encode(&self, q: usize) -> u64 {
        self.spins.iter().fold(0u64, |acc, &s| acc * q as u64 + s as u64)
    }

    /// Sites with spin 1, which for edge models is the selected edge set.
    pub fn selected(&self) -> Vec<usize> {
        (0..self.spins.len()).filter(|&i| self.spins[i] == 1).collect()
    }

    /// 64-bit FNV-1a hash of the spin vector.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for &s in &self.spins {
            h ^= s as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h
    }
}

/// A partial assignment of spins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Pinning {
    /// `assignment[site]` is the pinned spin, or `None` when the site is free.
    pub assignment: Vec<Option<usize>>,
    /// Set when feasibility has been established by enumeration.
    #[serde(skip)]
    pub feasible: Option<bool>,
}

impl PartialEq for Pinning {
    fn eq(&self, other: &Self) -> bool {
        self.assignment == other.assignment
    }
}

impl Eq for Pinning {}

impl Pinning {
    pub fn empty(n: usize) -> Self {
        Pinning {
            assignment: vec![None; n],
            feasible: None,
        }
    }

    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut p = Pinning::empty(n);
        for &(site, spin) in pairs {
            p.assignment[site] = Some(spin);
        }
        p
    }

    pub fn full(config: &Configuration) -> Self {
        Pinning {
            assignment: config.spins.iter().map(|&s| Some(s)).collect(),
            feasible: None,
        }
    }

    /// This pinning with one more site pinned.
    pub fn extend(&self, site: usize, spin: usize) -> Self {
        let mut p = Pinning {
            assignment: self.assignment.clone(),
            feasible: None,
        };
        p.assignment[site] = Some(spin);
        p
    }

    pub fn pinned_count(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_some()).count()
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.map(|s| (i, s)))
            .collect()
    }

    pub fn is_pinned(&self, site: usize) -> bool {
        self.assignment[site].is_some()
    }

    pub fn is_extended_by(&self, config: &Configuration) -> bool {
        self.assignment
            .iter()
            .zip(&config.spins)
            .all(|(a, s)| a.is_none_or(|a| a == *s))
    }
}

/// The feasible pairs `P^τ` of a pinning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasiblePairs {
    pub pairs: Vec<(usize, usize)>,
}

impl FeasiblePairs {
    /// The pairs with nonzero spin, `P_1^τ`.
    pub fn nonzero(&self) -> Vec<(usize, usize)> {
        self.pairs.iter().copied().filter(|&(_, k)| k != 0).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn matchings_local_function() {
        let m = build_named_model("matchings", Graph::path(2), &params(&[("lambda", 1.0)])).unwrap();
        match m.interaction() {
            Interaction::BinarySymmetricHolant { local, .. } => {
                assert_eq!(local[0], vec![1.0, 1.0]);
                assert_eq!(local[1], vec![1.0, 1.0]);
            }
            _ => panic!("wrong variant"),
        }
        assert_eq!(Family::Matchings { lambda: 1.0 }.local_function(3), vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn exact_edge_cover_local_function() {
        let f = Family::EdgeCover { lambda: 1.0, rho: 0.0 };
        assert_eq!(f.local_function(2), vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn two_spin_star_centre() {
        let f = Family::TwoSpinEdge { beta: 0.5, gamma: 1.0, lambda: 1.0 };
        assert_eq!(f.local_function(2), vec![1.0, 1.0, 0.5]);
    }

    #[test]
    fn unknown_and_out_of_range_parameters() {
        let g = Graph::path(2);
        assert!(matches!(build_named_model("dimers", g.clone(), &params(&[])), Err(Error::UnknownFamily(_))));
        assert!(matches!(
            build_named_model("edge_cover", g.clone(), &params(&[("lambda", 1.0), ("rho", 1.5)])),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            build_named_model("edge_cover", g.clone(), &params(&[("lambda", 1.0)])),
            Err(Error::MissingParameter(_))
        ));
        assert!(build_named_model("matchings", g, &params(&[("lambda", 1.0), ("mu", 2.0)])).is_err());
    }

    #[test]
    fn isolated_vertex_with_hard_cover_is_rejected() {
        let g = Graph::new(3, vec![(0, 1)]).unwrap();
        let f = Family::EdgeCover { lambda: 1.0, rho: 0.0 };
        assert!(matches!(f.build(g.clone()), Err(Error::InvalidGraph(_))));
        assert!(Family::EdgeCover { lambda: 1.0, rho: 0.5 }.build(g).is_ok());
    }

    #[test]
    fn edge_cover_path_weights() {
        let m = Family::EdgeCover { lambda: 1.0, rho: 0.5 }.build(Graph::path(3)).unwrap();
        assert_eq!(m.weight(&Configuration::new(vec![0, 0])), 0.125);
        assert_eq!(m.weight(&Configuration::new(vec![1, 0])), 0.5);
    }

    #[test]
    fn even_triangle_weight() {
        let m = Family::EvenSubgraph { lambda: 1.0, rho: 0.0 }.build(Graph::cycle(3)).unwrap();
        assert_eq!(m.weight(&Configuration::new(vec![1, 1, 1])), 1.0);
        assert_eq!(m.weight(&Configuration::new(vec![1, 1, 0])), 0.0);
    }

    #[test]
    fn tiny_factors_do_not_underflow_early() {
        let w = product(&[1e-200, 1e-200, 1e250]);
        assert!((w / 1e-150 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pinnings_of_exact_edge_cover_on_k2() {
        let m = Family::EdgeCover { lambda: 1.0, rho: 0.0 }.build(Graph::path(2)).unwrap();
        let p = m.enumerate_pinnings(usize::MAX, &Caps::default()).unwrap();
        let got: Vec<_> = p.iter().map(|p| p.assignment.clone()).collect();
        assert_eq!(got, vec![vec![None], vec![Some(1)]]);
        let pairs = m.feasible_pairs(&Pinning::empty(1), &Caps::default()).unwrap();
        assert_eq!(pairs.pairs, vec![(0, 1)]);
    }

    #[test]
    fn pinnings_of_matchings_on_k2() {
        let m = Family::Matchings { lambda: 1.0 }.build(Graph::path(2)).unwrap();
        let p = m.enumerate_pinnings(1, &Caps::default()).unwrap();
        let got: Vec<_> = p.iter().map(|p| p.assignment.clone()).collect();
        assert_eq!(got, vec![vec![None], vec![Some(0)], vec![Some(1)]]);
    }

    #[test]
    fn pinnings_of_soft_edge_cover_path() {
        let m = Family::EdgeCover { lambda: 1.0, rho: 0.5 }.build(Graph::path(3)).unwrap();
        assert_eq!(m.enumerate_pinnings(usize::MAX, &Caps::default()).unwrap().len(), 9);
        let pairs = m.feasible_pairs(&Pinning::empty(2), &Caps::default()).unwrap();
        assert_eq!(pairs.pairs.len(), 4);
        assert_eq!(pairs.nonzero(), vec![(0, 1), (1, 1)]);
    }

    #[test]
    fn matchings_triangle_pinned_edge() {
        let m = Family::Matchings { lambda: 1.0 }.build(Graph::cycle(3)).unwrap();
        let tau = Pinning::from_pairs(3, &[(0, 1)]);
        let pairs = m.feasible_pairs(&tau, &Caps::default()).unwrap();
        assert_eq!(pairs.pairs, vec![(1, 0), (2, 0)]);
    }

    #[test]
    fn pinning_cap_is_refused() {
        let m = Family::Matchings { lambda: 1.0 }.build(Graph::path(14)).unwrap();
        assert!(matches!(
            m.enumerate_pinnings(usize::MAX, &Caps::default()),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn cube_conditional_matches_ratio() {
        let f = FourierPotential::from_terms(1, &[(&[0], 0.5)]).unwrap();
        let m = ModelSpec::with_unit_fields(Interaction::CubeFourier { potential: f }).unwrap();
        let w = m.conditional_weights(&Configuration::zeros(1), 0);
        assert!((w[1] / w[0] - 1f64.exp()).abs() < 1e-12);
    }
}
