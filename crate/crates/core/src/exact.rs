//! Exhaustive ground truth: partition functions, Gibbs tables, marginals,
//! influence matrices and the marginal bound.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eigen::{eigmax, DenseMatrix, EigMax};
use crate::error::{Error, Result};
use crate::model::{checked_power, Caps, Configuration, FeasiblePairs, ModelSpec, Pinning};
use crate::scalar::Scalar;

/// Tolerance for the symmetry residual that certifies a real spectrum.
pub const REAL_SPECTRUM_TOLERANCE: f64 = 1e-8;

/// `Z^τ(λ) = Σ_{σ ⊇ τ} w(σ) λ^{σ_U}`, where `U` is the set of unpinned sites.
///
/// `fields[site][k - 1]` is the field of spin `k`. Pinned sites contribute no
/// field factor.
pub fn partition_function(
    model: &ModelSpec,
    pinning: &Pinning,
    fields: &[Vec<Complex64>],
    caps: &Caps,
) -> Result<Complex64> {
    partition_function_as(model, pinning, fields, caps)
}

/// [`partition_function`] in any scalar type; with `BigRational` it is exact.
pub fn partition_function_as<T: Scalar>(
    model: &ModelSpec,
    pinning: &Pinning,
    fields: &[Vec<T>],
    caps: &Caps,
) -> Result<T> {
    model.check_pinning(pinning)?;
    check_field_shape(model, fields.len(), |s| fields[s].len())?;
    let mut total = T::zero();
    for c in model.all_configurations(caps)? {
        if !pinning.is_extended_by(&c) {
            continue;
        }
        let w: T = model.interaction_weight_as(&c);
        if w == T::zero() {
            continue;
        }
        let term = c
            .spins
            .iter()
            .enumerate()
            .filter(|&(s, &k)| k != 0 && !pinning.is_pinned(s))
            .fold(w, |acc, (s, &k)| acc * fields[s][k - 1].clone());
        total = total + term;
    }
    Ok(total)
}

fn check_field_shape(model: &ModelSpec, rows: usize, row_len: impl Fn(usize) -> usize) -> Result<()> {
    let s = model.site_space();
    if rows != s.site_count || (0..rows).any(|r| row_len(r) != s.spin_count - 1) {
        return Err(Error::Precondition(format!(
            "field array must be {} rows of {} values",
            s.site_count,
            s.spin_count - 1
        )));
    }
    Ok(())
}

/// The model's own fields as complex numbers.
pub fn model_fields(model: &ModelSpec) -> Vec<Vec<Complex64>> {
    model
        .fields()
        .iter()
        .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
        .collect()
}

/// Conditional Gibbs distribution as a table over positive-weight extensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsTable {
    pub entries: Vec<(Configuration, f64)>,
    /// Sum of the weights `w(σ) λ^σ` of the listed configurations.
    pub partition_value: f64,
}

impl GibbsTable {
    pub fn probability(&self, config: &Configuration) -> f64 {
        self.entries
            .binary_search_by(|(c, _)| c.cmp(config))
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    /// Smallest probability, `μ_min`.
    pub fn min_probability(&self) -> f64 {
        self.entries.iter().map(|e| e.1).fold(f64::INFINITY, f64::min)
    }

    /// An exact draw by inversion of the cumulative distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &Configuration {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (c, p) in &self.entries {
            acc += p;
            if u < acc {
                return c;
            }
        }
        &self.entries.last().expect("tables are nonempty").0
    }
}

/// Positive-weight configurations of a model, enumerated once and reused
/// across pinnings.
#[derive(Debug, Clone)]
pub struct Ensemble {
    model: ModelSpec,
    configs: Vec<Configuration>,
    weights: Vec<f64>,
    caps: Caps,
}

impl Ensemble {
    pub fn new(model: &ModelSpec, caps: &Caps) -> Result<Self> {
        let (configs, weights) = model.valid_configurations(caps)?.into_iter().unzip();
        Ok(Ensemble {
            model: model.clone(),
            configs,
            weights,
            caps: *caps,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn configurations(&self) -> &[Configuration] {
        &self.configs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn extensions<'a>(&'a self, pinning: &'a Pinning) -> impl Iterator<Item = usize> + 'a {
        (0..self.configs.len()).filter(move |&i| pinning.is_extended_by(&self.configs[i]))
    }

    pub fn gibbs_table(&self, pinning: &Pinning) -> Result<GibbsTable> {
        self.model.check_pinning(pinning)?;
        let idx: Vec<usize> = self.extensions(pinning).collect();
        if idx.is_empty() {
            return Err(Error::InfeasiblePinning);
        }
        let z: f64 = idx.iter().map(|&i| self.weights[i]).sum();
        let entries = idx
            .iter()
            .map(|&i| (self.configs[i].clone(), self.weights[i] / z))
            .collect();
        Ok(GibbsTable {
            entries,
            partition_value: z,
        })
    }

    /// Conditional marginals `μ^τ(σ_v = k)` as a dense `[site][spin]` array.
    pub fn marginals(&self, pinning: &Pinning) -> Result<Vec<Vec<f64>>> {
        let s = self.model.site_space();
        let mut m = vec![vec![0.0; s.spin_count]; s.site_count];
        let mut z = 0.0;
        for i in self.extensions(pinning) {
            z += self.weights[i];
            for (v, &k) in self.configs[i].spins.iter().enumerate() {
                m[v][k] += self.weights[i];
            }
        }
        if z == 0.0 {
            return Err(Error::InfeasiblePinning);
        }
        m.iter_mut().flatten().for_each(|x| *x /= z);
        Ok(m)
    }

    pub fn marginal(&self, pinning: &Pinning, site: usize, spin: usize) -> Result<f64> {
        self.model.check_pinning(pinning)?;
        let m = self.marginals(pinning)?;
        if pinning.is_pinned(site) || spin >= m[site].len() || m[site][spin] == 0.0 {
            return Err(Error::InfeasiblePair { site, spin });
        }
        Ok(m[site][spin])
    }

    pub fn feasible_pairs(&self, pinning: &Pinning) -> Result<FeasiblePairs> {
        let m = self.marginals(pinning)?;
        let pairs = m
            .iter()
            .enumerate()
            .filter(|&(v, _)| !pinning.is_pinned(v))
            .flat_map(|(v, row)| row.iter().enumerate().filter(|(_, &p)| p > 0.0).map(move |(k, _)| (v, k)))
            .collect();
        Ok(FeasiblePairs { pairs })
    }

    /// The influence matrix `Ψ^τ` over the feasible pairs of `pinning`.
    pub fn influence_matrix(&self, pinning: &Pinning) -> Result<InfluenceMatrix> {
        self.model.check_pinning(pinning)?;
        let s = self.model.site_space();
        let idx: Vec<usize> = self.extensions(pinning).collect();
        if idx.is_empty() {
            return Err(Error::InfeasiblePinning);
        }
        // Position of each feasible (site, spin) pair, or usize::MAX.
        let mut hit = vec![vec![false; s.spin_count]; s.site_count];
        for &i in &idx {
            for (v, &k) in self.configs[i].spins.iter().enumerate() {
                if !pinning.is_pinned(v) {
                    hit[v][k] = true;
                }
            }
        }
        let mut index = Vec::new();
        let mut pos = vec![vec![usize::MAX; s.spin_count]; s.site_count];
        for v in 0..s.site_count {
            for k in 0..s.spin_count {
                if hit[v][k] {
                    pos[v][k] = index.len();
                    index.push((v, k));
                }
            }
        }
        let m = index.len();
        let mut joint = vec![0.0; m * m];
        let mut single = vec![0.0; m];
        let mut z = 0.0;
        let mut active = Vec::with_capacity(s.site_count);
        for &i in &idx {
            let w = self.weights[i];
            z += w;
            active.clear();
            active.extend(
                self.configs[i]
                    .spins
                    .iter()
                    .enumerate()
                    .filter(|(v, _)| !pinning.is_pinned(*v))
                    .map(|(v, &k)| pos[v][k]),
            );
            for &a in &active {
                single[a] += w;
                for &b in &active {
                    joint[a * m + b] += w;
                }
            }
        }
        let p: Vec<f64> = single.iter().map(|x| x / z).collect();
        let mut values = DenseMatrix::zeros(m);
        for a in 0..m {
            for b in 0..m {
                if index[a].0 != index[b].0 {
                    if p[a] <= 0.0 {
                        return Err(Error::Internal("conditioning on a zero-probability pair".into()));
                    }
                    values.set(a, b, joint[a * m + b] / z / p[a] - p[b]);
                }
            }
        }
        Ok(InfluenceMatrix {
            index,
            values,
            marginals: p,
        })
    }

    /// `Z^τ` at the model's fields, with pinned sites' fields omitted.
    pub fn partition(&self, pinning: &Pinning) -> Result<f64> {
        partition_function_as::<f64>(&self.model, pinning, self.model.fields(), &self.caps)
    }

    /// Scan all feasible pinnings: largest EigMax, marginal bound and realness evidence.
    ///
    /// Influence matrices come from a table of partial sums over every partial
    /// assignment, so each pinning costs table lookups rather than a pass over
    /// the configurations. Pinnings are visited in the order of
    /// [`ModelSpec::enumerate_pinnings`].
    pub fn spectral_scan(&self) -> Result<SpectralScan> {
        let sums = PartialSums::new(self)?;
        let codes = sums.feasible_codes();
        let mut scan = SpectralScan {
            pinning_count: codes.len(),
            max_eigmax: f64::NEG_INFINITY,
            argmax: Vec::new(),
            max_inf_norm: 0.0,
            marginal_bound: f64::INFINITY,
            max_symmetry_residual: 0.0,
            max_eigmax_minus_norm: f64::NEG_INFINITY,
        };
        for code in codes {
            let psi = sums.influence_matrix(code)?;
            let e = psi.eigmax()?;
            if e.value > scan.max_eigmax {
                scan.max_eigmax = e.value;
                scan.argmax = sums.pinning(code).pairs();
            }
            scan.max_inf_norm = scan.max_inf_norm.max(e.inf_norm);
            scan.max_eigmax_minus_norm = scan.max_eigmax_minus_norm.max(e.value - e.inf_norm);
            scan.max_symmetry_residual = scan.max_symmetry_residual.max(psi.symmetry_residual());
            if let Some(b) = psi.marginals.iter().copied().reduce(f64::min) {
                scan.marginal_bound = scan.marginal_bound.min(b);
            }
        }
        if !scan.marginal_bound.is_finite() {
            scan.marginal_bound = 1.0;
        }
        Ok(scan)
    }

    /// `b`: the smallest conditional marginal over all pinnings and feasible pairs.
    pub fn marginal_bound(&self) -> Result<f64> {
        let sums = PartialSums::new(self)?;
        let mut b = f64::INFINITY;
        for code in sums.feasible_codes() {
            let z = sums.w[code];
            for (_, off) in sums.free_pairs(code) {
                b = b.min(sums.w[code + off] / z);
            }
        }
        // A model whose pinnings are all full has no free pair; b is then 1.
        Ok(if b.is_finite() { b } else { 1.0 })
    }

    /// `count` seeded random feasible pinnings: each restricts a uniformly
    /// chosen positive-weight configuration to a random subset of sites.
    pub fn random_pinnings(&self, count: usize, seed: u64) -> Vec<Pinning> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.model.site_count();
        (0..count)
            .map(|_| {
                let c = &self.configs[rng.random_range(0..self.configs.len())];
                let pairs: Vec<(usize, usize)> =
                    (0..n).filter(|_| rng.random_bool(0.5)).map(|v| (v, c.spins[v])).collect();
                Pinning::from_pairs(n, &pairs)
            })
            .collect()
    }
}

/// `W(τ) = Σ_{σ ⊇ τ} w(σ)` for every partial assignment `τ`, indexed by codes
/// in base `q + 1` with site 0 most significant: digit 0 marks a free site and
/// digit `k + 1` a site pinned to `k`.
struct PartialSums {
    n: usize,
    q: usize,
    place: Vec<usize>,
    w: Vec<f64>,
}

impl PartialSums {
    fn new(ensemble: &Ensemble) -> Result<Self> {
        let s = ensemble.model.site_space();
        let (n, q) = (s.site_count, s.spin_count);
        let size = checked_power(q + 1, n);
        if size > ensemble.caps.max_partial_assignments {
            return Err(Error::cap("partial assignment count", size, ensemble.caps.max_partial_assignments));
        }
        let size = size as usize;
        let mut place = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            place[i] = place[i + 1] * (q + 1);
        }
        let mut w = vec![0.0; size];
        for (c, &x) in ensemble.configs.iter().zip(&ensemble.weights) {
            let code: usize = c.spins.iter().zip(&place).map(|(&k, &p)| (k + 1) * p).sum();
            w[code] += x;
        }
        // Free one site at a time: W(τ with v free) = Σ_k W(τ with v = k).
        for &p in &place {
            for base in (0..size).step_by(p * (q + 1)) {
                for free in base..base + p {
                    w[free] = (1..=q).map(|d| w[free + d * p]).sum();
                }
            }
        }
        Ok(PartialSums { n, q, place, w })
    }

    fn digit(&self, code: usize, site: usize) -> usize {
        code / self.place[site] % (self.q + 1)
    }

    fn pinned_count(&self, code: usize) -> usize {
        (0..self.n).filter(|&v| self.digit(code, v) != 0).count()
    }

    fn feasible_codes(&self) -> Vec<usize> {
        let mut codes: Vec<usize> = (0..self.w.len()).filter(|&c| self.w[c] > 0.0).collect();
        codes.sort_by_key(|&c| self.pinned_count(c));
        codes
    }

    fn pinning(&self, code: usize) -> Pinning {
        Pinning {
            assignment: (0..self.n).map(|v| self.digit(code, v).checked_sub(1)).collect(),
            feasible: Some(true),
        }
    }

    /// Feasible unpinned pairs of `code` with the code offset that pins each.
    fn free_pairs(&self, code: usize) -> Vec<((usize, usize), usize)> {
        (0..self.n)
            .filter(|&v| self.digit(code, v) == 0)
            .flat_map(|v| (0..self.q).map(move |k| ((v, k), (k + 1) * self.place[v])))
            .filter(|&(_, off)| self.w[code + off] > 0.0)
            .collect()
    }

    fn influence_matrix(&self, code: usize) -> Result<InfluenceMatrix> {
        let z = self.w[code];
        let pairs = self.free_pairs(code);
        let m = pairs.len();
        let marginals: Vec<f64> = pairs.iter().map(|&(_, off)| self.w[code + off] / z).collect();
        let mut values = DenseMatrix::zeros(m);
        for (a, &((va, _), oa)) in pairs.iter().enumerate() {
            for (b, &((vb, _), ob)) in pairs.iter().enumerate() {
                if va != vb {
                    values.set(a, b, self.w[code + oa + ob] / self.w[code + oa] - marginals[b]);
                }
            }
        }
        if !marginals.iter().all(|&p| p > 0.0) {
            return Err(Error::Internal("conditioning on a zero-probability pair".into()));
        }
        Ok(InfluenceMatrix {
            index: pairs.into_iter().map(|(pair, _)| pair).collect(),
            values,
            marginals,
        })
    }
}

/// Result of scanning every feasible pinning of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralScan {
    pub pinning_count: usize,
    pub max_eigmax: f64,
    /// Pinned (site, spin) pairs of a pinning attaining `max_eigmax`.
    pub argmax: Vec<(usize, usize)>,
    pub max_inf_norm: f64,
    pub marginal_bound: f64,
    /// Largest asymmetry of `D^{1/2} Ψ D^{-1/2}`; small values certify a real spectrum.
    pub max_symmetry_residual: f64,
    /// Largest `EigMax − ‖Ψ‖_∞`; never positive beyond rounding.
    pub max_eigmax_minus_norm: f64,
}

/// `Ψ^τ` indexed by the feasible pairs `P^τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceMatrix {
    pub index: Vec<(usize, usize)>,
    pub values: DenseMatrix,
    /// Conditional marginal of each indexed pair.
    pub marginals: Vec<f64>,
}

impl InfluenceMatrix {
    pub fn get(&self, from: (usize, usize), to: (usize, usize)) -> Option<f64> {
        let a = self.index.iter().position(|&p| p == from)?;
        let b = self.index.iter().position(|&p| p == to)?;
        Some(self.values.get(a, b))
    }

    /// `D^{1/2} Ψ D^{-1/2}` with `D` the diagonal of marginals.
    pub fn symmetrized(&self) -> DenseMatrix {
        let m = self.index.len();
        let mut s = DenseMatrix::zeros(m);
        for a in 0..m {
            for b in 0..m {
                s.set(a, b, (self.marginals[a] / self.marginals[b]).sqrt() * self.values.get(a, b));
            }
        }
        s
    }

    /// Largest `|S_ab − S_ba|` for the symmetrized matrix. Ψ is similar to a
    /// symmetric matrix exactly when this vanishes, which forces a real spectrum.
    pub fn symmetry_residual(&self) -> f64 {
        let s = self.symmetrized();
        let m = self.index.len();
        let mut r: f64 = 0.0;
        for a in 0..m {
            for b in a + 1..m {
                r = r.max((s.get(a, b) - s.get(b, a)).abs());
            }
        }
        r
    }

    /// EigMax of Ψ, computed on the symmetrized (similar) matrix, with `‖Ψ‖_∞`.
    pub fn eigmax(&self) -> Result<EigMax> {
        if self.symmetry_residual() > REAL_SPECTRUM_TOLERANCE {
            return Err(Error::Internal(format!(
                "influence matrix is not similar to a symmetric matrix (residual {:e})",
                self.symmetry_residual()
            )));
        }
        let mut e = eigmax(&self.symmetrized())?;
        e.inf_norm = self.values.inf_norm();
        Ok(e)
    }
}

/// Free-function form of [`Ensemble::partition`]-style queries, enumerating afresh.
pub fn gibbs_table(model: &ModelSpec, pinning: &Pinning, caps: &Caps) -> Result<GibbsTable> {
    Ensemble::new(model, caps)?.gibbs_table(pinning)
}

pub fn marginal(model: &ModelSpec, pinning: &Pinning, site: usize, spin: usize, caps: &Caps) -> Result<f64> {
    Ensemble::new(model, caps)?.marginal(pinning, site, spin)
}

pub fn influence_matrix(model: &ModelSpec, pinning: &Pinning, caps: &Caps) -> Result<InfluenceMatrix> {
    Ensemble::new(model, caps)?.influence_matrix(pinning)
}

pub fn marginal_bound(model: &ModelSpec, caps: &Caps) -> Result<f64> {
    Ensemble::new(model, caps)?.marginal_bound()
}
