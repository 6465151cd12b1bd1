//! Multi-affine polynomials in the field variables `λ_{v,k}` and the
//! randomized zero scan.

use std::collections::BTreeMap;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Caps, ModelSpec, Pinning};
use crate::region::{Region, SamplerOptions};
use crate::scalar::Scalar;

/// Values below this modulus count as a zero in [`zero_scan`].
pub const ZERO_THRESHOLD: f64 = 1e-12;

/// The field variable `λ_{site,spin}`; `spin ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Var {
    pub site: usize,
    pub spin: usize,
}

impl Var {
    pub fn new(site: usize, spin: usize) -> Result<Self> {
        if spin == 0 {
            return Err(Error::Precondition("spin 0 carries no field variable".into()));
        }
        Ok(Var { site, spin })
    }
}

/// A square-free monomial, variables sorted.
pub type Monomial = Vec<Var>;

/// `Σ_M c_M Π_{x ∈ M} x` with no stored zero coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiAffinePolynomial<C = Complex64> {
    terms: BTreeMap<Monomial, C>,
}

impl<C: Scalar> Default for MultiAffinePolynomial<C> {
    fn default() -> Self {
        MultiAffinePolynomial { terms: BTreeMap::new() }
    }
}

/// The three transforms that preserve stability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    /// `z · P(1/z, …)`.
    Inversion(Var),
    /// `P(0, …)`.
    SpecializeZero(Var),
    /// `∂P/∂z`.
    Derivative(Var),
}

impl<C: Scalar> MultiAffinePolynomial<C> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: C) -> Self {
        let mut p = Self::zero();
        p.add_term(Vec::new(), c);
        p
    }

    /// Build from `(monomial, coefficient)` pairs; repeated monomials add up.
    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, C)>) -> Result<Self> {
        let mut p = Self::zero();
        for (mut m, c) in terms {
            m.sort();
            if m.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Precondition("monomial repeats a variable".into()));
            }
            if m.iter().any(|v| v.spin == 0) {
                return Err(Error::Precondition("spin 0 carries no field variable".into()));
            }
            p.add_term(m, c);
        }
        Ok(p)
    }

    fn add_term(&mut self, m: Monomial, c: C) {
        let zero = C::zero();
        let entry = self.terms.entry(m).or_insert_with(C::zero);
        *entry = entry.clone() + c;
        if *entry == zero {
            self.terms.retain(|_, v| *v != zero);
        }
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, C> {
        &self.terms
    }

    pub fn coefficient(&self, m: &[Var]) -> C {
        let mut key = m.to_vec();
        key.sort();
        self.terms.get(&key).cloned().unwrap_or_else(C::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Variables with a nonzero coefficient somewhere, sorted.
    pub fn variables(&self) -> Vec<Var> {
        let mut v: Vec<Var> = self.terms.keys().flatten().copied().collect();
        v.sort();
        v.dedup();
        v
    }

    /// Evaluate with `value(var)` for each variable.
    pub fn evaluate_with(&self, value: impl Fn(Var) -> C) -> C {
        self.terms.iter().fold(C::zero(), |acc, (m, c)| {
            acc + m.iter().fold(c.clone(), |t, &v| t * value(v))
        })
    }

    /// Evaluate on a dense field array `fields[site][spin - 1]`.
    pub fn evaluate(&self, fields: &[Vec<C>]) -> C {
        self.evaluate_with(|v| fields[v.site][v.spin - 1].clone())
    }

    pub fn transform(&self, which: Transform) -> Self {
        let mut out = Self::zero();
        match which {
            Transform::SpecializeZero(x) => {
                for (m, c) in &self.terms {
                    if !m.contains(&x) {
                        out.add_term(m.clone(), c.clone());
                    }
                }
            }
            Transform::Derivative(x) => {
                for (m, c) in &self.terms {
                    if m.contains(&x) {
                        out.add_term(m.iter().copied().filter(|&v| v != x).collect(), c.clone());
                    }
                }
            }
            Transform::Inversion(x) => {
                for (m, c) in &self.terms {
                    let mut n: Monomial = if m.contains(&x) {
                        m.iter().copied().filter(|&v| v != x).collect()
                    } else {
                        m.iter().copied().chain(std::iter::once(x)).collect()
                    };
                    n.sort();
                    out.add_term(n, c.clone());
                }
            }
        }
        out
    }

    pub fn specialize_zero(&self, x: Var) -> Self {
        self.transform(Transform::SpecializeZero(x))
    }

    pub fn derivative(&self, x: Var) -> Self {
        self.transform(Transform::Derivative(x))
    }

    pub fn inversion(&self, x: Var) -> Self {
        self.transform(Transform::Inversion(x))
    }
}

/// `Z^τ` as a polynomial in the fields of the unpinned sites.
pub fn to_multiaffine(model: &ModelSpec, pinning: &Pinning, caps: &Caps) -> Result<MultiAffinePolynomial> {
    to_multiaffine_as(model, pinning, caps)
}

/// [`to_multiaffine`] with exact rational coefficients.
pub fn to_multiaffine_exact(
    model: &ModelSpec,
    pinning: &Pinning,
    caps: &Caps,
) -> Result<MultiAffinePolynomial<BigRational>> {
    to_multiaffine_as(model, pinning, caps)
}

pub fn to_multiaffine_as<C: Scalar>(
    model: &ModelSpec,
    pinning: &Pinning,
    caps: &Caps,
) -> Result<MultiAffinePolynomial<C>> {
    model.check_pinning(pinning)?;
    let mut p = MultiAffinePolynomial::zero();
    for c in model.all_configurations(caps)? {
        if !pinning.is_extended_by(&c) {
            continue;
        }
        let w: C = model.interaction_weight_as(&c);
        if w == C::zero() {
            continue;
        }
        let m: Monomial = c
            .spins
            .iter()
            .enumerate()
            .filter(|&(s, &k)| k != 0 && !pinning.is_pinned(s))
            .map(|(s, &k)| Var { site: s, spin: k })
            .collect();
        p.add_term(m, w);
    }
    Ok(p)
}

/// `Z^{τ ∪ (v,k)}` obtained from `Z^τ`: the derivative in `λ_{v,k}` for
/// `k ≥ 1`, or all `λ_{v,·}` set to 0 for `k = 0`.
pub fn pin_polynomial<C: Scalar>(p: &MultiAffinePolynomial<C>, site: usize, spin: usize, q: usize) -> MultiAffinePolynomial<C> {
    if spin == 0 {
        (1..q).fold(p.clone(), |acc, k| acc.specialize_zero(Var { site, spin: k }))
    } else {
        let d = p.derivative(Var { site, spin });
        (1..q)
            .filter(|&k| k != spin)
            .fold(d, |acc, k| acc.specialize_zero(Var { site, spin: k }))
    }
}

/// Result of a randomized search for zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroScanReport {
    pub samples: usize,
    pub min_modulus: f64,
    pub argmin: Vec<(Var, Complex64)>,
    pub zero_found: bool,
}

/// A polynomial compiled for fast repeated evaluation.
#[derive(Debug, Clone)]
pub struct CompiledPolynomial {
    vars: Vec<Var>,
    terms: Vec<(Vec<usize>, Complex64)>,
}

impl CompiledPolynomial {
    pub fn new(p: &MultiAffinePolynomial) -> Self {
        let vars = p.variables();
        let terms = p
            .terms()
            .iter()
            .map(|(m, c)| {
                let idx = m.iter().map(|v| vars.binary_search(v).expect("variable listed")).collect();
                (idx, *c)
            })
            .collect();
        CompiledPolynomial { vars, terms }
    }

    pub fn variables(&self) -> &[Var] {
        &self.vars
    }

    /// `values[i]` is the value of `variables()[i]`.
    pub fn evaluate(&self, values: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(idx, c)| idx.iter().fold(*c, |t, &i| t * values[i]))
            .sum()
    }

    /// `(a, b)` with `P = a + b·z_i` when the other variables are fixed.
    pub fn affine_parts(&self, values: &[Complex64], i: usize) -> (Complex64, Complex64) {
        let (mut a, mut b) = (Complex64::zero(), Complex64::zero());
        for (idx, c) in &self.terms {
            let mut t = *c;
            let mut has = false;
            for &j in idx {
                if j == i {
                    has = true;
                } else {
                    t *= values[j];
                }
            }
            if has {
                b += t;
            } else {
                a += t;
            }
        }
        (a, b)
    }
}

/// Evaluate `p` at `samples` points whose coordinates are drawn independently
/// from the region assigned to each variable, and report the smallest modulus.
///
/// The best sample is then refined coordinate by coordinate: `P` is affine in
/// each variable, so the root `−a/b` in that coordinate is computed exactly and
/// accepted when it lies in the variable's region. A falsification probe, not
/// a proof.
pub fn zero_scan(
    p: &MultiAffinePolynomial,
    regions: &BTreeMap<Var, Region>,
    samples: usize,
    seed: u64,
    options: &SamplerOptions,
) -> Result<ZeroScanReport> {
    let compiled = CompiledPolynomial::new(p);
    let assigned: Vec<&Region> = compiled
        .variables()
        .iter()
        .map(|v| {
            regions
                .get(v)
                .ok_or_else(|| Error::Precondition(format!("no region for variable λ_{{{},{}}}", v.site, v.spin)))
        })
        .collect::<Result<_>>()?;
    scan_compiled(&compiled, &assigned, samples, seed, options)
}

/// [`zero_scan`] with the same region for every variable.
pub fn zero_scan_uniform(
    p: &MultiAffinePolynomial,
    region: &Region,
    samples: usize,
    seed: u64,
    options: &SamplerOptions,
) -> Result<ZeroScanReport> {
    let compiled = CompiledPolynomial::new(p);
    let assigned = vec![region; compiled.variables().len()];
    scan_compiled(&compiled, &assigned, samples, seed, options)
}

pub fn scan_compiled(
    compiled: &CompiledPolynomial,
    regions: &[&Region],
    samples: usize,
    seed: u64,
    options: &SamplerOptions,
) -> Result<ZeroScanReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![Complex64::zero(); regions.len()];
    let mut best = f64::INFINITY;
    let mut argmin = Vec::new();
    for _ in 0..samples {
        for (v, r) in values.iter_mut().zip(regions) {
            *v = r.sample(&mut rng, options)?;
        }
        let m = compiled.evaluate(&values).norm();
        if m < best {
            best = m;
            argmin = values.clone();
        }
    }
    if samples > 0 {
        for i in 0..regions.len() {
            let (a, b) = compiled.affine_parts(&argmin, i);
            if b.norm() == 0.0 {
                continue;
            }
            let root = -a / b;
            if regions[i].contains(root) {
                let mut candidate = argmin.clone();
                candidate[i] = root;
                let m = compiled.evaluate(&candidate).norm();
                if m < best {
                    best = m;
                    argmin = candidate;
                }
            }
        }
    }
    let argmin = compiled.variables().iter().copied().zip(argmin).collect();
    Ok(ZeroScanReport {
        samples,
        min_modulus: best,
        argmin,
        zero_found: best < ZERO_THRESHOLD,
    })
}
