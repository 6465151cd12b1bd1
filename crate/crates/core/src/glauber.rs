//! Single-site heat-bath Glauber dynamics, exact mixing diagnostics and the
//! even-subgraph to Ising sample transform.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eigen::DenseMatrix;
use crate::error::{Error, Result};
use crate::exact::Ensemble;
use crate::graph::Graph;
use crate::model::{Caps, Configuration, Family, ModelSpec, Pinning};

/// Words of generator output reserved per step; each step reads from its own
/// block so a step's randomness depends only on `(seed, chain, step)`.
const WORDS_PER_STEP: u128 = 16;
/// Total-variation level defining the mixing time.
pub const MIXING_THRESHOLD: f64 = 0.25;

/// The state of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub config: Configuration,
    pub step_count: u64,
    pub seed: u64,
    /// Stream index, so independent chains share a seed.
    pub chain: u64,
}

impl ChainState {
    pub fn new(config: Configuration, seed: u64, chain: u64) -> Self {
        ChainState {
            config,
            step_count: 0,
            seed,
            chain,
        }
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.chain);
        rng.set_word_pos(WORDS_PER_STEP * self.step_count as u128);
        rng
    }
}

/// One row of a chain trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: u64,
    pub site: usize,
    pub old_spin: usize,
    pub new_spin: usize,
    pub config_hash: u64,
}

/// Draw an index with probability proportional to `weights`.
fn draw<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return Some(i);
        }
    }
    weights.iter().rposition(|&w| w > 0.0)
}

/// One heat-bath update: a uniform site is resampled from its exact
/// conditional law given the other sites.
pub fn glauber_step(model: &ModelSpec, state: &mut ChainState) -> Result<TraceRow> {
    let n = model.site_count();
    let mut rng = state.rng();
    let site = rng.random_range(0..n);
    let weights = model.conditional_weights(&state.config, site);
    let new = draw(&mut rng, &weights).ok_or_else(|| {
        Error::Internal(format!(
            "every spin at site {site} has zero conditional weight in state {:?}",
            state.config.spins
        ))
    })?;
    let old = state.config.spins[site];
    state.config.spins[site] = new;
    state.step_count += 1;
    Ok(TraceRow {
        step: state.step_count,
        site,
        old_spin: old,
        new_spin: new,
        config_hash: state.config.fingerprint(),
    })
}

/// Where a chain starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Start {
    Given(Configuration),
    GreedyFeasible,
}

/// All-zero if it has positive weight, else all-one (every edge selected),
/// else the first positive-weight configuration in lexicographic order.
pub fn greedy_feasible_start(model: &ModelSpec, caps: &Caps) -> Result<Configuration> {
    let n = model.site_count();
    let zeros = Configuration::zeros(n);
    if model.weight(&zeros) > 0.0 {
        return Ok(zeros);
    }
    let ones = Configuration::new(vec![1; n]);
    if model.weight(&ones) > 0.0 {
        return Ok(ones);
    }
    model
        .all_configurations(caps)?
        .find(|c| model.weight(c) > 0.0)
        .ok_or_else(|| Error::InvalidModel("no feasible start: every configuration has zero weight".into()))
}

/// Final state and optional trace of a chain run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRun {
    pub start: Configuration,
    pub end: Configuration,
    pub steps: u64,
    pub trace: Vec<TraceRow>,
}

pub fn run_chain(
    model: &ModelSpec,
    steps: u64,
    seed: u64,
    start: &Start,
    record_trace: bool,
    caps: &Caps,
) -> Result<ChainRun> {
    run_chain_on_stream(model, steps, seed, 0, start, record_trace, caps)
}

pub fn run_chain_on_stream(
    model: &ModelSpec,
    steps: u64,
    seed: u64,
    chain: u64,
    start: &Start,
    record_trace: bool,
    caps: &Caps,
) -> Result<ChainRun> {
    let first = match start {
        Start::Given(c) => {
            model.check_configuration(c)?;
            if model.weight(c) <= 0.0 {
                return Err(Error::Precondition("start configuration has zero weight".into()));
            }
            c.clone()
        }
        Start::GreedyFeasible => greedy_feasible_start(model, caps)?,
    };
    let mut state = ChainState::new(first.clone(), seed, chain);
    let mut trace = Vec::new();
    for _ in 0..steps {
        let row = glauber_step(model, &mut state)?;
        if record_trace {
            trace.push(row);
        }
    }
    Ok(ChainRun {
        start: first,
        end: state.config,
        steps,
        trace,
    })
}

/// The Glauber kernel on positive-weight configurations, stored by rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub states: Vec<Configuration>,
    /// Gibbs probabilities of `states`.
    pub stationary: Vec<f64>,
    /// `rows[i]` lists `(j, P(i, j))` with `j` ascending.
    pub rows: Vec<Vec<(usize, f64)>>,
}

pub fn transition_matrix(model: &ModelSpec, caps: &Caps) -> Result<TransitionMatrix> {
    let valid = model.valid_configurations(caps)?;
    if valid.len() > caps.max_states {
        return Err(Error::cap("positive-weight states", valid.len() as u128, caps.max_states as u128));
    }
    let q = model.spin_count();
    let n = model.site_count();
    let index: HashMap<u64, usize> = valid.iter().enumerate().map(|(i, (c, _))| (c.encode(q), i)).collect();
    let total: f64 = valid.iter().map(|(_, w)| w).sum();
    let mut rows = Vec::with_capacity(valid.len());
    for (i, (c, _)) in valid.iter().enumerate() {
        let mut row: BTreeMap<usize, f64> = BTreeMap::new();
        for site in 0..n {
            let w = model.conditional_weights(c, site);
            let z: f64 = w.iter().sum();
            if !(z > 0.0) {
                return Err(Error::Internal(format!("state {i} has no admissible spin at site {site}")));
            }
            let mut next = c.clone();
            for (t, &wt) in w.iter().enumerate() {
                if wt <= 0.0 {
                    continue;
                }
                next.spins[site] = t;
                let j = *index
                    .get(&next.encode(q))
                    .ok_or_else(|| Error::Internal("conditional weight positive on a zero-weight state".into()))?;
                *row.entry(j).or_insert(0.0) += wt / z / n as f64;
            }
        }
        rows.push(row.into_iter().collect());
    }
    Ok(TransitionMatrix {
        states: valid.iter().map(|(c, _)| c.clone()).collect(),
        stationary: valid.iter().map(|(_, w)| w / total).collect(),
        rows,
    })
}

impl TransitionMatrix {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |e| e.0)
            .map(|k| self.rows[i][k].1)
            .unwrap_or(0.0)
    }

    pub fn dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.len());
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                m.set(i, j, p);
            }
        }
        m
    }

    pub fn index_of(&self, c: &Configuration) -> Option<usize> {
        self.states.binary_search(c).ok()
    }

    /// `max |Σ_j P(i,j) − 1|`.
    pub fn row_sum_residual(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.iter().map(|e| e.1).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max |μ(x)P(x,y) − μ(y)P(y,x)|`.
    pub fn detailed_balance_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                worst = worst.max((self.stationary[i] * p - self.stationary[j] * self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `max_y |(μP)(y) − μ(y)|`.
    pub fn stationarity_residual(&self) -> f64 {
        let next = self.apply(&self.stationary);
        next.iter()
            .zip(&self.stationary)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// The row vector `νP`.
    pub fn apply(&self, nu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; nu.len()];
        for (i, row) in self.rows.iter().enumerate() {
            if nu[i] == 0.0 {
                continue;
            }
            for &(j, p) in row {
                out[j] += nu[i] * p;
            }
        }
        out
    }

    pub fn tv_to_stationary(&self, nu: &[f64]) -> f64 {
        0.5 * nu.iter().zip(&self.stationary).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    /// Exact TV distance from `start` after each step up to `horizon`.
    pub fn tv_curve(&self, start: usize, horizon: usize) -> MixingReport {
        let mut nu = vec![0.0; self.len()];
        nu[start] = 1.0;
        let mut curve = vec![(0, self.tv_to_stationary(&nu))];
        for t in 1..=horizon {
            nu = self.apply(&nu);
            curve.push((t, self.tv_to_stationary(&nu)));
        }
        MixingReport::from_curve(curve)
    }

    /// The pointwise maximum of the TV curves over every start, stopping early
    /// once it is at most 1/4.
    pub fn worst_case_tv_curve(&self, horizon: usize) -> MixingReport {
        let k = self.len();
        let mut dists: Vec<Vec<f64>> = (0..k)
            .map(|s| {
                let mut v = vec![0.0; k];
                v[s] = 1.0;
                v
            })
            .collect();
        let worst = |d: &[Vec<f64>]| d.iter().map(|v| self.tv_to_stationary(v)).fold(0.0, f64::max);
        let mut curve = vec![(0, worst(&dists))];
        for t in 1..=horizon {
            if curve.last().is_some_and(|&(_, tv)| tv <= MIXING_THRESHOLD) {
                break;
            }
            for d in dists.iter_mut() {
                *d = self.apply(d);
            }
            curve.push((t, worst(&dists)));
        }
        MixingReport::from_curve(curve)
    }
}

/// Exact TV curve of a chain started at a given configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub tv_curve: Vec<(usize, f64)>,
    /// First step with TV ≤ 1/4, if reached within the horizon.
    pub t_mix_observed: Option<usize>,
    /// A formula bound for comparison, when the caller has one.
    pub theoretical_bound: Option<f64>,
}

impl MixingReport {
    fn from_curve(tv_curve: Vec<(usize, f64)>) -> Self {
        let t_mix_observed = tv_curve.iter().find(|e| e.1 <= MIXING_THRESHOLD).map(|e| e.0);
        MixingReport {
            tv_curve,
            t_mix_observed,
            theoretical_bound: None,
        }
    }
}

pub fn tv_curve(model: &ModelSpec, start: &Configuration, horizon: usize, caps: &Caps) -> Result<MixingReport> {
    let p = transition_matrix(model, caps)?;
    let i = p
        .index_of(start)
        .ok_or_else(|| Error::Precondition("start configuration has zero weight".into()))?;
    Ok(p.tv_curve(i, horizon))
}

/// Whether single-site moves connect all positive-weight configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityReport {
    pub ergodic: bool,
    pub state_count: usize,
    /// A reachable and an unreachable state when not ergodic.
    pub witness: Option<(Configuration, Configuration)>,
}

pub fn ergodicity_check(model: &ModelSpec, caps: &Caps) -> Result<ErgodicityReport> {
    let p = transition_matrix(model, caps)?;
    Ok(connectivity(&p, |_| true))
}

/// Ergodicity of the chain restricted to the extensions of every feasible
/// pinning with at most `max_pinned` pinned sites. Returns the first failure.
pub fn total_connectivity_check(
    model: &ModelSpec,
    max_pinned: usize,
    caps: &Caps,
) -> Result<Option<(Pinning, ErgodicityReport)>> {
    let p = transition_matrix(model, caps)?;
    for pin in model.enumerate_pinnings(max_pinned, caps)? {
        let r = connectivity(&p, |c| pin.is_extended_by(c));
        if !r.ergodic {
            return Ok(Some((pin, r)));
        }
    }
    Ok(None)
}

fn connectivity(p: &TransitionMatrix, keep: impl Fn(&Configuration) -> bool) -> ErgodicityReport {
    let kept: Vec<bool> = p.states.iter().map(&keep).collect();
    let Some(first) = kept.iter().position(|&k| k) else {
        return ErgodicityReport {
            ergodic: true,
            state_count: 0,
            witness: None,
        };
    };
    let mut seen = vec![false; p.len()];
    seen[first] = true;
    let mut queue = VecDeque::from([first]);
    while let Some(i) = queue.pop_front() {
        for &(j, w) in &p.rows[i] {
            if w > 0.0 && kept[j] && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    let missing = (0..p.len()).find(|&j| kept[j] && !seen[j]);
    ErgodicityReport {
        ergodic: missing.is_none(),
        state_count: kept.iter().filter(|&&k| k).count(),
        witness: missing.map(|j| (p.states[first].clone(), p.states[j].clone())),
    }
}

/// Monte Carlo TV between independent chain endpoints and the Gibbs table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalTv {
    pub tv: f64,
    /// Sum over states of half of a 95% binomial half-width.
    pub half_width: f64,
    pub samples: usize,
    pub steps: u64,
}

pub fn estimate_tv_empirical(
    model: &ModelSpec,
    steps: u64,
    n_samples: usize,
    seed: u64,
    caps: &Caps,
) -> Result<EmpiricalTv> {
    if n_samples == 0 {
        return Err(Error::Precondition("empty sample".into()));
    }
    let table = Ensemble::new(model, caps)?.gibbs_table(&Pinning::empty(model.site_count()))?;
    let start = Start::Given(greedy_feasible_start(model, caps)?);
    let mut counts: BTreeMap<Configuration, usize> = BTreeMap::new();
    for chain in 0..n_samples as u64 {
        let end = run_chain_on_stream(model, steps, seed, chain, &start, false, caps)?.end;
        *counts.entry(end).or_insert(0) += 1;
    }
    let n = n_samples as f64;
    let mut tv = 0.0;
    let mut half_width = 0.0;
    for (c, p) in &table.entries {
        let freq = counts.remove(c).unwrap_or(0) as f64 / n;
        tv += (freq - p).abs();
        half_width += 1.96 * (p * (1.0 - p) / n).sqrt();
    }
    // Any leftover state has zero Gibbs probability.
    tv += counts.values().map(|&k| k as f64 / n).sum::<f64>();
    Ok(EmpiricalTv {
        tv: tv / 2.0,
        half_width: half_width / 2.0,
        samples: n_samples,
        steps,
    })
}

// ---------------------------------------------------------------------------
// Even subgraphs to Ising.

/// Ising parameters `β_I = (1+λ)/(1−λ)`, `λ_I = (1+ρ)/(1−ρ)` of an
/// even-subgraph model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsingParameters {
    pub beta: f64,
    pub field: f64,
}

pub fn ising_parameters(lambda: f64, rho: f64) -> Result<IsingParameters> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::param("lambda", "0 < lambda < 1", lambda));
    }
    if rho == 1.0 {
        return Err(Error::param(
            "rho",
            "0 < rho < 1 (rho = 1 maps to an infinite Ising field)",
            rho,
        ));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::param("rho", "0 < rho < 1", rho));
    }
    Ok(IsingParameters {
        beta: (1.0 + lambda) / (1.0 - lambda),
        field: (1.0 + rho) / (1.0 - rho),
    })
}

fn even_subgraph_parameters(model: &ModelSpec) -> Result<(f64, f64)> {
    match model.family() {
        Some(&Family::EvenSubgraph { lambda, rho }) => {
            let uniform = model.fields().iter().all(|f| f[0] == lambda);
            if !uniform {
                return Err(Error::Precondition("the transform needs the uniform field of the family".into()));
            }
            Ok((lambda, rho))
        }
        _ => Err(Error::Precondition("the transform applies to even-subgraph models only".into())),
    }
}

/// Edges of the graph augmented by a ghost vertex `n` joined to every vertex;
/// ghost edge of vertex `v` has index `m + v`.
struct GhostGraph {
    n: usize,
    m: usize,
    ends: Vec<(usize, usize)>,
}

impl GhostGraph {
    fn new(g: &Graph) -> Self {
        let n = g.vertex_count();
        let mut ends: Vec<(usize, usize)> = g.edges().to_vec();
        ends.extend((0..n).map(|v| (v, n)));
        GhostGraph { n, m: g.edge_count(), ends }
    }

    /// `η`: the selected edges plus the ghost edges of odd-degree vertices.
    fn completed(&self, g: &Graph, sample: &Configuration) -> Vec<bool> {
        let mut open = vec![false; self.ends.len()];
        for e in 0..self.m {
            open[e] = sample.spins[e] == 1;
        }
        for v in 0..self.n {
            let deg = g.incident(v).iter().filter(|&&e| sample.spins[e] == 1).count();
            open[self.m + v] = deg % 2 == 1;
        }
        open
    }

    /// Component label per vertex (ghost included) of the open edges.
    fn components(&self, open: &[bool]) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..=self.n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (e, &(a, b)) in self.ends.iter().enumerate() {
            if open[e] {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra] = rb;
                }
            }
        }
        (0..=self.n).map(|v| find(&mut parent, v)).collect()
    }
}

/// Spin `+1` or `−1` per vertex from an even-subgraph sample.
///
/// The sample is completed to a random-cluster configuration on the graph
/// with a ghost vertex: each original edge not selected is added with
/// probability `λ`, each ghost edge not forced by an odd degree with
/// probability `ρ`. Clusters get independent uniform signs, except that the
/// ghost cluster is `+`.
pub fn even_subgraph_to_ising(model: &ModelSpec, sample: &Configuration, seed: u64) -> Result<Vec<i8>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    even_subgraph_to_ising_with(model, sample, &mut rng)
}

pub fn even_subgraph_to_ising_with<R: Rng + ?Sized>(
    model: &ModelSpec,
    sample: &Configuration,
    rng: &mut R,
) -> Result<Vec<i8>> {
    let (lambda, rho) = even_subgraph_parameters(model)?;
    ising_parameters(lambda, rho)?;
    let g = model.graph().expect("even subgraphs live on a graph");
    model.check_configuration(sample)?;
    if model.interaction_weight(sample) <= 0.0 {
        return Err(Error::Precondition("sample is not an even-subgraph configuration of positive weight".into()));
    }
    let gg = GhostGraph::new(g);
    let mut open = gg.completed(g, sample);
    for (e, o) in open.iter_mut().enumerate() {
        if !*o {
            let p = if e < gg.m { lambda } else { rho };
            *o = rng.random::<f64>() < p;
        }
    }
    let comp = gg.components(&open);
    let ghost = comp[gg.n];
    let mut sign: HashMap<usize, i8> = HashMap::from([(ghost, 1)]);
    Ok((0..gg.n)
        .map(|v| *sign.entry(comp[v]).or_insert_with(|| if rng.random::<bool>() { 1 } else { -1 }))
        .collect())
}

/// The exact output law of [`even_subgraph_to_ising`] for a fixed sample,
/// by enumerating every completion.
pub fn ising_transform_distribution(model: &ModelSpec, sample: &Configuration) -> Result<BTreeMap<Vec<i8>, f64>> {
    let (lambda, rho) = even_subgraph_parameters(model)?;
    ising_parameters(lambda, rho)?;
    let g = model.graph().expect("even subgraphs live on a graph");
    let gg = GhostGraph::new(g);
    let base = gg.completed(g, sample);
    let free: Vec<usize> = (0..base.len()).filter(|&e| !base[e]).collect();
    if free.len() > 24 {
        return Err(Error::cap("free completion edges", free.len() as u128, 24));
    }
    let mut out: BTreeMap<Vec<i8>, f64> = BTreeMap::new();
    for mask in 0u64..(1 << free.len()) {
        let mut open = base.clone();
        let mut prob = 1.0;
        for (b, &e) in free.iter().enumerate() {
            let p = if e < gg.m { lambda } else { rho };
            if mask >> b & 1 == 1 {
                open[e] = true;
                prob *= p;
            } else {
                prob *= 1.0 - p;
            }
        }
        let comp = gg.components(&open);
        let ghost = comp[gg.n];
        let mut roots: Vec<usize> = (0..gg.n).map(|v| comp[v]).filter(|&r| r != ghost).collect();
        roots.sort_unstable();
        roots.dedup();
        let k = roots.len();
        let share = prob / (1u64 << k) as f64;
        for signs in 0u64..(1 << k) {
            let spins: Vec<i8> = (0..gg.n)
                .map(|v| {
                    if comp[v] == ghost {
                        1
                    } else {
                        let r = roots.binary_search(&comp[v]).expect("root listed");
                        if signs >> r & 1 == 1 {
                            1
                        } else {
                            -1
                        }
                    }
                })
                .collect();
            *out.entry(spins).or_insert(0.0) += share;
        }
    }
    Ok(out)
}

/// `μ(σ) ∝ β^{#agreeing edges} · λ^{#plus vertices}` over `{+1,−1}^V`.
pub fn ising_table(graph: &Graph, beta: f64, field: f64) -> BTreeMap<Vec<i8>, f64> {
    let n = graph.vertex_count();
    let mut out = BTreeMap::new();
    let mut z = 0.0;
    for mask in 0u64..(1 << n) {
        let spins: Vec<i8> = (0..n).map(|v| if mask >> v & 1 == 1 { 1 } else { -1 }).collect();
        let agree = graph.edges().iter().filter(|&&(a, b)| spins[a] == spins[b]).count();
        let plus = spins.iter().filter(|&&s| s == 1).count();
        let w = beta.powi(agree as i32) * field.powi(plus as i32);
        z += w;
        out.insert(spins, w);
    }
    out.values_mut().for_each(|w| *w /= z);
    out
}

/// Composition of the transform with the exact even-subgraph law.
pub fn composed_ising_distribution(model: &ModelSpec, caps: &Caps) -> Result<BTreeMap<Vec<i8>, f64>> {
    let table = Ensemble::new(model, caps)?.gibbs_table(&Pinning::empty(model.site_count()))?;
    let mut out: BTreeMap<Vec<i8>, f64> = BTreeMap::new();
    for (c, p) in &table.entries {
        for (s, q) in ising_transform_distribution(model, c)? {
            *out.entry(s).or_insert(0.0) += p * q;
        }
    }
    Ok(out)
}

/// Empirical law of the transform applied to exact even-subgraph draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalIsing {
    pub draws: usize,
    pub tv: f64,
    pub distribution: BTreeMap<Vec<i8>, f64>,
}

pub fn ising_transform_empirical(model: &ModelSpec, draws: usize, seed: u64, caps: &Caps) -> Result<EmpiricalIsing> {
    if draws == 0 {
        return Err(Error::Precondition("empty sample".into()));
    }
    let (lambda, rho) = even_subgraph_parameters(model)?;
    let params = ising_parameters(lambda, rho)?;
    let table = Ensemble::new(model, caps)?.gibbs_table(&Pinning::empty(model.site_count()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<Vec<i8>, usize> = BTreeMap::new();
    for _ in 0..draws {
        let c = table.sample(&mut rng).clone();
        *counts.entry(even_subgraph_to_ising_with(model, &c, &mut rng)?).or_insert(0) += 1;
    }
    let distribution: BTreeMap<Vec<i8>, f64> =
        counts.into_iter().map(|(k, n)| (k, n as f64 / draws as f64)).collect();
    let target = ising_table(model.graph().expect("even subgraphs live on a graph"), params.beta, params.field);
    Ok(EmpiricalIsing {
        draws,
        tv: tv_distance(&distribution, &target),
        distribution,
    })
}

/// Total-variation distance between two laws on the same finite set.
pub fn tv_distance<K: Ord>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut d = 0.0;
    for (k, p) in a {
        d += (p - b.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, q) in b {
        if !a.contains_key(k) {
            d += q;
        }
    }
    d / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn caps() -> Caps {
        Caps::default()
    }

    #[test]
    fn matchings_k2_step_is_fair() {
        let m = Family::Matchings { lambda: 1.0 }.build(Graph::path(2)).unwrap();
        assert_eq!(m.conditional_weights(&Configuration::zeros(1), 0), vec![1.0, 1.0]);
        let p = transition_matrix(&m, &caps()).unwrap();
        assert_eq!(p.len(), 2);
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(p.get(i, j), 0.5, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn hard_edge_cover_stays_put() {
        let m = Family::EdgeCover { lambda: 1.0, rho: 0.0 }.build(Graph::path(2)).unwrap();
        let run = run_chain(&m, 50, 3, &Start::GreedyFeasible, true, &caps()).unwrap();
        assert_eq!(run.end.spins, vec![1]);
        assert!(run.trace.iter().all(|r| r.new_spin == 1));
        let p = transition_matrix(&m, &caps()).unwrap();
        assert_eq!(p.rows, vec![vec![(0, 1.0)]]);
    }

    #[test]
    fn soft_edge_cover_conditional() {
        let m = Family::EdgeCover { lambda: 1.0, rho: 0.5 }.build(Graph::path(3)).unwrap();
        let w = m.conditional_weights(&Configuration::new(vec![1, 0]), 1);
        assert_abs_diff_eq!(w[1] / (w[0] + w[1]), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn path_chain_is_reversible() {
        let m = Family::EdgeCover { lambda: 1.0, rho: 0.5 }.build(Graph::path(3)).unwrap();
        let p = transition_matrix(&m, &caps()).unwrap();
        assert_eq!(p.len(), 4);
        assert!(p.row_sum_residual() < 1e-15);
        assert!(p.detailed_balance_residual() < 1e-15);
        assert!(p.stationarity_residual() < 1e-12);
        assert!(ergodicity_check(&m, &caps()).unwrap().ergodic);
    }

    #[test]
    fn triangle_even_subgraphs_are_not_ergodic() {
        let m = Family::EvenSubgraph { lambda: 1.0, rho: 0.0 }.build(Graph::cycle(3)).unwrap();
        let r = ergodicity_check(&m, &caps()).unwrap();
        assert!(!r.ergodic);
        let (a, b) = r.witness.unwrap();
        assert_eq!(a.spins, vec![0, 0, 0]);
        assert_eq!(b.spins, vec![1, 1, 1]);
        let report = tv_curve(&m, &a, 200, &caps()).unwrap();
        assert!(report.t_mix_observed.is_none());
        assert!(report.tv_curve.iter().all(|e| e.1 > 0.25));
    }

    #[test]
    fn tv_curve_edges() {
        let m = Family::Matchings { lambda: 1.0 }.build(Graph::path(2)).unwrap();
        let c = Configuration::zeros(1);
        let r = tv_curve(&m, &c, 0, &caps()).unwrap();
        assert_eq!(r.tv_curve, vec![(0, 0.5)]);
        let r = tv_curve(&m, &c, 1, &caps()).unwrap();
        assert_abs_diff_eq!(r.tv_curve[1].1, 0.0, epsilon = 1e-15);
        assert_eq!(r.t_mix_observed, Some(1));
    }

    #[test]
    fn chains_are_deterministic() {
        let m = Family::EdgeCover { lambda: 2.0, rho: 0.5 }.build(Graph::cycle(4)).unwrap();
        let a = run_chain(&m, 500, 11, &Start::GreedyFeasible, true, &caps()).unwrap();
        let b = run_chain(&m, 500, 11, &Start::GreedyFeasible, true, &caps()).unwrap();
        assert_eq!(a, b);
        let c = run_chain(&m, 0, 11, &Start::GreedyFeasible, true, &caps()).unwrap();
        assert_eq!(c.end, c.start);
    }

    #[test]
    fn ising_parameter_guards() {
        let p = ising_parameters(0.5, 0.5).unwrap();
        assert_eq!((p.beta, p.field), (3.0, 3.0));
        assert!(ising_parameters(0.5, 1.0).is_err());
        assert!(ising_parameters(1.0, 0.5).is_err());
    }

    #[test]
    fn composed_transform_matches_ising_on_k2() {
        let m = Family::EvenSubgraph { lambda: 0.5, rho: 0.5 }.build(Graph::path(2)).unwrap();
        let composed = composed_ising_distribution(&m, &caps()).unwrap();
        let exact = ising_table(&Graph::path(2), 3.0, 3.0);
        assert!(tv_distance(&composed, &exact) < 1e-12);
    }

    #[test]
    fn empty_sample_is_rejected() {
        let m = Family::Matchings { lambda: 1.0 }.build(Graph::path(2)).unwrap();
        assert!(estimate_tv_empirical(&m, 10, 0, 1, &caps()).is_err());
    }
}
