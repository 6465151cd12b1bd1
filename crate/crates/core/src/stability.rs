//! Local polynomials and their roots, per-family zero-free regions, and the
//! formulas turning a zero-free region into a spectral-independence constant.

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::Ensemble;
use crate::model::{two_spin_value, Caps, Family, ModelSpec};
use crate::region::{delta, Region};
use crate::scalar::rational;

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 64;
/// Relative residual accepted for a root.
pub const ROOT_RESIDUAL_TOLERANCE: f64 = 1e-8;
/// Imaginary parts up to this size count as real.
pub const REAL_ROOT_TOLERANCE: f64 = 1e-8;
/// Slack in the comparison `EigMax ≤ η`.
pub const CERTIFY_SLACK: f64 = 1e-8;
const ABERTH_MAX_ITERATIONS: usize = 1000;

/// `Σ_k a_k z^k` with real coefficients, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealPolynomial {
    coefficients: Vec<f64>,
}

impl RealPolynomial {
    /// Trailing zeros are trimmed; the zero polynomial and degrees above 64
    /// are rejected.
    pub fn new(mut coefficients: Vec<f64>) -> Result<Self> {
        while coefficients.last() == Some(&0.0) {
            coefficients.pop();
        }
        if coefficients.is_empty() {
            return Err(Error::Precondition("zero polynomial".into()));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Precondition("non-finite coefficient".into()));
        }
        if coefficients.len() - 1 > MAX_DEGREE {
            return Err(Error::param("degree", "<= 64", coefficients.len() - 1));
        }
        Ok(RealPolynomial { coefficients })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coefficients
            .iter()
            .rev()
            .fold(Complex64::zero(), |acc, &c| acc * z + c)
    }

    fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::zero();
        let mut dp = Complex64::zero();
        for &c in self.coefficients.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// `Σ |a_k| |z|^k`, the natural size of the terms summed in `p(z)`.
    pub fn scale_at(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * r + c.abs())
    }
}

/// `P(z) = Σ_k C(d,k) f(k) z^k`.
pub fn local_polynomial(f: &[f64], d: usize) -> Result<RealPolynomial> {
    if d == 0 || d > MAX_DEGREE {
        return Err(Error::param("d", "1 <= d <= 64", d));
    }
    if f.len() != d + 1 {
        return Err(Error::Precondition(format!("f must have {} values, got {}", d + 1, f.len())));
    }
    if let Some(x) = f.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::param("f", ">= 0", x));
    }
    RealPolynomial::new((0..=d).map(|k| binomial(d, k) * f[k]).collect())
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

/// The local polynomial of a family at a vertex of degree `d`. For edge
/// covers this is the polynomial of the complement, `(1+z)^d − (1−ρ)z^d`.
pub fn family_local_polynomial(family: &Family, d: usize) -> Result<RealPolynomial> {
    let mut f = family.local_function(d);
    if matches!(family, Family::EdgeCover { .. }) {
        f.reverse();
    }
    local_polynomial(&f, d)
}

pub fn two_spin_polynomial(beta: f64, gamma: f64, d: usize) -> Result<RealPolynomial> {
    local_polynomial(&(0..=d).map(|k| two_spin_value(beta, gamma, d, k)).collect::<Vec<_>>(), d)
}

/// Coefficients of the two-spin local polynomial in exact arithmetic.
pub fn two_spin_polynomial_exact(beta: &BigRational, gamma: &BigRational, d: usize) -> Vec<BigRational> {
    (0..=d)
        .map(|k| {
            let c = BigRational::from_integer(binomial_big(d, k));
            c * pow(beta, k * k.saturating_sub(1) / 2) * pow(gamma, (d - k) * (d - k).saturating_sub(1) / 2)
        })
        .collect()
}

fn binomial_big(n: usize, k: usize) -> num_bigint::BigInt {
    let mut acc = num_bigint::BigInt::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

fn pow(x: &BigRational, e: usize) -> BigRational {
    (0..e).fold(BigRational::one(), |acc, _| acc * x)
}

/// All complex roots with multiplicity, ordered by real then imaginary part.
///
/// Aberth–Ehrlich iteration started from circles whose radii come from the
/// Newton polygon of `|a_k|`, then two Newton polishing steps per root. If a
/// residual check fails, the eigenvalues of the companion matrix are used
/// instead (and polished the same way).
pub fn poly_roots(p: &RealPolynomial) -> Result<Vec<Complex64>> {
    let n = p.degree();
    if n == 0 {
        return Err(Error::Precondition("constant polynomial has no roots".into()));
    }
    // Roots at zero are split off exactly.
    let zeros = p.coefficients.iter().take_while(|&&c| c == 0.0).count();
    let reduced = RealPolynomial {
        coefficients: p.coefficients[zeros..].to_vec(),
    };
    let mut roots = vec![Complex64::zero(); zeros];
    if reduced.degree() > 0 {
        let found = aberth(&reduced)
            .filter(|r| residuals_ok(&reduced, r))
            .or_else(|| companion_roots(&reduced).filter(|r| residuals_ok(&reduced, r)));
        match found {
            Some(r) => roots.extend(r),
            None => {
                let r = aberth(&reduced).unwrap_or_default();
                let worst = r
                    .iter()
                    .map(|&z| reduced.eval(z).norm() / reduced.scale_at(z))
                    .fold(0.0, f64::max);
                return Err(Error::NonConvergence {
                    what: "polynomial root finder".into(),
                    iterations: ABERTH_MAX_ITERATIONS,
                    residual: worst,
                });
            }
        }
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(roots)
}

fn residuals_ok(p: &RealPolynomial, roots: &[Complex64]) -> bool {
    roots.len() == p.degree()
        && roots
            .iter()
            .all(|&z| z.is_finite() && p.eval(z).norm() <= ROOT_RESIDUAL_TOLERANCE * p.scale_at(z))
}

fn initial_points(p: &RealPolynomial) -> Vec<Complex64> {
    let n = p.degree();
    let logs: Vec<f64> = p
        .coefficients
        .iter()
        .map(|c| if *c == 0.0 { f64::NEG_INFINITY } else { c.abs().ln() })
        .collect();
    // Upper convex hull of (k, log|a_k|).
    let mut hull: Vec<usize> = Vec::new();
    for k in 0..=n {
        if logs[k] == f64::NEG_INFINITY {
            continue;
        }
        while hull.len() >= 2 {
            let (i, j) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (j - i) as f64 * (logs[k] - logs[i]) - (k - i) as f64 * (logs[j] - logs[i]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }
    let mut points = Vec::with_capacity(n);
    for w in hull.windows(2) {
        let (i, j) = (w[0], w[1]);
        let m = j - i;
        let r = ((logs[i] - logs[j]) / m as f64).exp();
        for t in 0..m {
            let angle = 2.0 * std::f64::consts::PI * t as f64 / m as f64 + 0.4 + points.len() as f64 * 0.05;
            points.push(Complex64::from_polar(r, angle));
        }
    }
    points
}

fn aberth(p: &RealPolynomial) -> Option<Vec<Complex64>> {
    let mut z = initial_points(p);
    let n = z.len();
    if n != p.degree() {
        return None;
    }
    for _ in 0..ABERTH_MAX_ITERATIONS {
        let mut moved: f64 = 0.0;
        for i in 0..n {
            let (v, dv) = p.eval_with_derivative(z[i]);
            if v == Complex64::zero() {
                continue;
            }
            let ratio = v / dv;
            let s: Complex64 = (0..n).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
            let w = ratio / (1.0 - ratio * s);
            if !w.is_finite() {
                return None;
            }
            z[i] -= w;
            moved = moved.max(w.norm() / z[i].norm().max(1e-300));
        }
        if moved < 1e-15 {
            break;
        }
    }
    Some(z.into_iter().map(|r| polish(p, r)).collect())
}

fn polish(p: &RealPolynomial, mut z: Complex64) -> Complex64 {
    for _ in 0..2 {
        let (v, dv) = p.eval_with_derivative(z);
        if dv == Complex64::zero() {
            break;
        }
        let next = z - v / dv;
        if !next.is_finite() || p.eval(next).norm() > v.norm() {
            break;
        }
        z = next;
    }
    z
}

fn companion_roots(p: &RealPolynomial) -> Option<Vec<Complex64>> {
    let n = p.degree();
    let lead = p.coefficients[n];
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        if i == 0 {
            -p.coefficients[n - 1 - j] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let eig = m.complex_eigenvalues();
    Some(eig.iter().map(|&z| polish(p, Complex64::new(z.re, z.im))).collect())
}

/// Root structure of the two-spin local polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSpinRootReport {
    pub beta: f64,
    pub gamma: f64,
    pub d: usize,
    /// Sorted by decreasing real part.
    pub roots: Vec<Complex64>,
    pub all_negative_real: bool,
    pub ratios_ok: bool,
    /// Largest `r_i / r_{i+1}` over consecutive roots.
    pub max_ratio: Option<f64>,
}

pub fn check_two_spin_roots(beta: f64, gamma: f64, d: usize) -> Result<TwoSpinRootReport> {
    if !(beta >= 0.0 && gamma > 0.0) {
        return Err(Error::param("beta, gamma", "beta >= 0 and gamma > 0", format!("({beta}, {gamma})")));
    }
    if beta * gamma >= 1.0 {
        return Err(Error::param("beta*gamma", "< 1", beta * gamma));
    }
    let p = two_spin_polynomial(beta, gamma, d)?;
    let mut roots = poly_roots(&p)?;
    roots.reverse();
    let all_negative_real = roots
        .iter()
        .all(|r| r.im.abs() <= REAL_ROOT_TOLERANCE && r.re <= -1e-12);
    let ratios: Vec<f64> = roots.windows(2).map(|w| w[0].re / w[1].re).collect();
    let max_ratio = ratios.iter().copied().reduce(f64::max);
    let ratios_ok = ratios.iter().all(|&r| r < beta * gamma + 1e-10);
    Ok(TwoSpinRootReport {
        beta,
        gamma,
        d,
        roots,
        all_negative_real,
        ratios_ok,
        max_ratio,
    })
}

/// `P_{d+1}(z) − γ^d P_d(z/γ) − z P_d(βz)`.
pub fn two_spin_recursion_residual(beta: f64, gamma: f64, d: usize, z: Complex64) -> Result<Complex64> {
    if d == 0 {
        return Err(Error::param("d", ">= 1", d));
    }
    let pd = two_spin_polynomial(beta, gamma, d)?;
    let pd1 = two_spin_polynomial(beta, gamma, d + 1)?;
    Ok(pd1.eval(z) - gamma.powi(d as i32) * pd.eval(z / gamma) - z * pd.eval(z * beta))
}

/// Both sides of the two-spin recursion as exact coefficient vectors.
pub fn two_spin_recursion_exact(beta: f64, gamma: f64, d: usize) -> (Vec<BigRational>, Vec<BigRational>) {
    let (b, g) = (rational(beta), rational(gamma));
    let lhs = two_spin_polynomial_exact(&b, &g, d + 1);
    let pd = two_spin_polynomial_exact(&b, &g, d);
    let mut rhs = vec![BigRational::zero(); d + 2];
    for (k, c) in pd.iter().enumerate() {
        rhs[k] += c * pow(&g, d - k);
        rhs[k + 1] += c * pow(&b, k);
    }
    (lhs, rhs)
}

/// A zero-free region for a family on graphs of maximum degree `Δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRegion {
    pub family: String,
    pub max_degree: usize,
    pub region: Region,
    /// `ε` of a half-plane-square region.
    pub epsilon: Option<f64>,
    pub notes: Vec<String>,
}

pub fn stability_region_for_family(family: &Family, max_degree: usize) -> Result<StabilityRegion> {
    family.validate()?;
    if max_degree == 0 {
        return Err(Error::param("max_degree", ">= 1", 0));
    }
    let mut notes = Vec::new();
    let half_plane = |eps: f64| Region::half_plane_square_complement(eps);
    let (region, epsilon) = match *family {
        Family::EdgeCover { .. } => {
            notes.push("edge covers: cardioid complement, independent of degree and rho".into());
            (Region::cardioid_complement(), None)
        }
        Family::EvenSubgraph { rho, .. } => {
            if rho <= 0.0 {
                return Err(Error::param("rho", "0 < rho <= 1 for the even-subgraph region", rho));
            }
            let eps = if rho == 1.0 {
                notes.push("rho = 1 gives a product measure; t is infinite and epsilon = 1".into());
                1.0
            } else {
                let t = ((1.0 + rho) / (1.0 - rho)).powf(1.0 / max_degree as f64);
                notes.push(format!("t = ((1+rho)/(1-rho))^(1/Delta) = {t}"));
                (t - 1.0) / (t + 1.0)
            };
            notes.push("the spectral-independence constant of this family grows exponentially in 1/rho".into());
            (half_plane(eps), Some(eps))
        }
        Family::TwoSpinEdge { beta, gamma, .. } => {
            if beta * gamma >= 1.0 {
                return Err(Error::param("beta*gamma", "< 1 for the two-spin region", beta * gamma));
            }
            let mut eps = f64::INFINITY;
            for d in 1..=max_degree {
                let roots = poly_roots(&two_spin_polynomial(beta, gamma, d)?)?;
                let top = roots.iter().map(|r| r.re).fold(f64::NEG_INFINITY, f64::max);
                notes.push(format!("epsilon_{d} = {}", -top));
                eps = eps.min(-top);
            }
            (half_plane(eps), Some(eps))
        }
        Family::Matchings { .. } => {
            let eps = 1.0 / max_degree as f64;
            notes.push("matchings: root -1/d of 1 + d z".into());
            (half_plane(eps), Some(eps))
        }
        Family::IsingLine { .. } => {
            return Err(Error::Precondition("no zero-free region is provided for ising_line".into()));
        }
    };
    Ok(StabilityRegion {
        family: family.name().into(),
        max_degree,
        region,
        epsilon,
        notes,
    })
}

/// Which spectral-independence formula applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaVariant {
    /// The region contains the positive reals: `η = 8/δ`.
    #[serde(rename = "R+")]
    PositiveReals,
    /// `(0, λ*)` lies in the region.
    LambdaCBelow,
    /// `(λ*, ∞)` lies in the region.
    LambdaCAbove,
    /// No real-axis information: `η = 2/(bδ²)`.
    Arb,
}

impl std::str::FromStr for EtaVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "R+" | "r+" | "positive-reals" => Ok(EtaVariant::PositiveReals),
            "lambda_c_below" => Ok(EtaVariant::LambdaCBelow),
            "lambda_c_above" => Ok(EtaVariant::LambdaCAbove),
            "arb" => Ok(EtaVariant::Arb),
            _ => Err(Error::Precondition(format!(
                "unknown variant `{s}` (expected R+, lambda_c_below, lambda_c_above, arb)"
            ))),
        }
    }
}

/// Inputs to [`eta_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaInputs {
    pub variant: EtaVariant,
    pub delta: f64,
    pub b: Option<f64>,
    pub lambda: Option<f64>,
    pub lambda_c: Option<f64>,
    /// `(λ_min, λ_max)` over the nonzero pairs for non-uniform fields.
    pub lambda_extremes: Option<(f64, f64)>,
}

impl EtaInputs {
    pub fn new(variant: EtaVariant, delta: f64) -> Self {
        EtaInputs {
            variant,
            delta,
            b: None,
            lambda: None,
            lambda_c: None,
            lambda_extremes: None,
        }
    }
}

/// A spectral-independence constant with its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaCertificate {
    pub inputs: EtaInputs,
    pub eta: f64,
    pub formula: String,
    pub region: Option<String>,
    pub tags: Vec<String>,
}

pub fn eta_bound(inputs: EtaInputs) -> Result<EtaCertificate> {
    let d = inputs.delta;
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::param("delta", "> 0", d));
    }
    let need_b = || -> Result<f64> {
        let b = inputs.b.ok_or_else(|| Error::MissingParameter("b".into()))?;
        if !(b > 0.0 && b <= 1.0) {
            return Err(Error::param("b", "0 < b <= 1", b));
        }
        Ok(b)
    };
    let need = |name: &str, x: Option<f64>| x.ok_or_else(|| Error::MissingParameter(name.into()));
    let (eta, formula, tag) = match inputs.variant {
        EtaVariant::PositiveReals => (8.0 / d, "8/delta", "zero-free region containing the positive reals"),
        EtaVariant::Arb => {
            let b = need_b()?;
            (2.0 / (b * d * d), "2/(b delta^2)", "zero-free region around lambda only")
        }
        EtaVariant::LambdaCBelow => {
            let b = need_b()?;
            let lc = need("lambda_c", inputs.lambda_c)?;
            let l = match inputs.lambda_extremes {
                Some((_, max)) => max,
                None => need("lambda", inputs.lambda)?,
            };
            if !(l > 0.0 && l < lc) {
                return Err(Error::param("lambda", "0 < lambda < lambda_c", l));
            }
            let m = ((1.0 - b) / b).min(l / (b * (lc - l)) + 1.0);
            (
                8.0 / d * m,
                "(8/delta) min{(1-b)/b, lambda/(b(lambda_c-lambda)) + 1}",
                "zero-free interval (0, lambda_c)",
            )
        }
        EtaVariant::LambdaCAbove => {
            let b = need_b()?;
            let lc = need("lambda_c", inputs.lambda_c)?;
            let l = match inputs.lambda_extremes {
                Some((min, _)) => min,
                None => need("lambda", inputs.lambda)?,
            };
            if !(l > lc && lc > 0.0) {
                return Err(Error::param("lambda", "lambda > lambda_c > 0", l));
            }
            let m = ((1.0 - b) / b).min(lc / (b * (l - lc)) + 1.0);
            (
                8.0 / d * m,
                "(8/delta) min{(1-b)/b, lambda_c/(b(lambda-lambda_c)) + 1}",
                "zero-free interval (lambda_c, infinity)",
            )
        }
    };
    Ok(EtaCertificate {
        inputs,
        eta,
        formula: formula.into(),
        region: None,
        tags: vec![format!("spectral independence from zero-freedom: {tag}")],
    })
}

/// `δ = min 1/λ_{v,k} · dist(λ_{v,k}, ∂Γ_{v,k})` over pairs with their own regions.
pub fn multi_field_delta(pairs: &[(f64, Region)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Precondition("no pairs".into()));
    }
    pairs
        .iter()
        .map(|(l, r)| delta(*l, r))
        .try_fold(f64::INFINITY, |acc, d| d.map(|d| acc.min(d)))
}

/// Whether the bound concerns a nonzero spin or spin 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CSetKind {
    NonzeroSpin,
    ZeroSpin,
}

/// Upper bound on `dist(1, C^τ_{v,k})` from the real extent `(α, β)` of the
/// region; `beta_sup = ∞` uses `1/∞ = 0`. When the region is unbounded
/// (nonzero spin) or has 0 in its closure (zero spin) the bound is 1.
pub fn cset_distance_bound(kind: CSetKind, p: f64, alpha: f64, beta_sup: f64, easy_case: bool) -> Result<f64> {
    if easy_case {
        return Ok(1.0);
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::param("p", "0 < p <= 1", p));
    }
    if !(alpha < 1.0 && beta_sup > 1.0) {
        return Err(Error::param("alpha, beta", "alpha < 1 < beta", format!("({alpha}, {beta_sup})")));
    }
    let inv = if beta_sup.is_infinite() { 0.0 } else { 1.0 / (p * (beta_sup - 1.0)) };
    let a = alpha / (p * (1.0 - alpha));
    let rest = (1.0 - p) / p;
    Ok(match kind {
        CSetKind::NonzeroSpin => (a + rest).min(inv + 1.0),
        CSetKind::ZeroSpin => (a + 1.0).min(inv + rest),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixingKind {
    Generic,
    BoundedDegree,
}

/// A mixing-time shape, valid up to an unspecified constant factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingBound {
    pub value: f64,
    pub formula: String,
    pub caveat: String,
}

pub fn mixing_time_formula(kind: MixingKind, n: usize, eta: f64, mu_min: f64) -> Result<MixingBound> {
    let nf = n as f64;
    Ok(match kind {
        MixingKind::Generic => {
            if !(mu_min > 0.0 && mu_min <= 1.0) {
                return Err(Error::param("mu_min", "0 < mu_min <= 1", mu_min));
            }
            MixingBound {
                value: nf.powf(eta + 1.0) * (1.0 / mu_min).ln(),
                formula: "n^(eta+1) log(1/mu_min)".into(),
                caveat: "up to unspecified universal constant".into(),
            }
        }
        MixingKind::BoundedDegree => MixingBound {
            value: nf * nf.ln(),
            formula: "C n log n".into(),
            caveat: "up to unspecified universal constant; C depends on (Delta, eta, b) and is not explicit".into(),
        },
    })
}

/// Outcome of comparing a certificate against exhaustive enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceComparison {
    pub pinnings: usize,
    pub max_eigmax: f64,
    pub max_inf_norm: f64,
    pub marginal_bound: f64,
    pub max_symmetry_residual: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub family: Family,
    pub lambda: f64,
    pub stability: StabilityRegion,
    pub delta: f64,
    pub certificate: EtaCertificate,
    pub comparison: Option<BruteForceComparison>,
    /// Why the comparison was skipped, if it was.
    pub skipped: Option<String>,
}

/// Certify a named-family model at edge field `λ` through the positive-reals
/// formula and compare with the largest EigMax over all feasible pinnings.
pub fn certify_model(model: &ModelSpec, lambda: f64, caps: &Caps) -> Result<Certification> {
    let family = model
        .family()
        .ok_or_else(|| Error::Precondition("certification needs a named family model".into()))?
        .with_lambda(lambda);
    family.validate()?;
    let graph = model.graph().expect("named families live on graphs").clone();
    let stability = stability_region_for_family(&family, graph.max_degree())?;
    let delta = delta(lambda, &stability.region)?;
    let mut certificate = eta_bound(EtaInputs {
        lambda: Some(lambda),
        ..EtaInputs::new(EtaVariant::PositiveReals, delta)
    })?;
    certificate.region = Some(stability.region.to_string());
    let instance = family.build(graph)?;
    let (comparison, skipped) = match Ensemble::new(&instance, caps).and_then(|e| e.spectral_scan()) {
        Ok(scan) => (
            Some(BruteForceComparison {
                pinnings: scan.pinning_count,
                max_eigmax: scan.max_eigmax,
                max_inf_norm: scan.max_inf_norm,
                marginal_bound: scan.marginal_bound,
                max_symmetry_residual: scan.max_symmetry_residual,
                passes: scan.max_eigmax <= certificate.eta + CERTIFY_SLACK,
            }),
            None,
        ),
        Err(e @ Error::CapExceeded { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    Ok(Certification {
        family,
        lambda,
        stability,
        delta,
        certificate,
        comparison,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn local_polynomial_examples() {
        let m = family_local_polynomial(&Family::Matchings { lambda: 1.0 }, 2).unwrap();
        assert_eq!(m.coefficients(), &[1.0, 2.0]);
        let e = family_local_polynomial(&Family::EdgeCover { lambda: 1.0, rho: 0.0 }, 2).unwrap();
        assert_eq!(e.coefficients(), &[1.0, 2.0]);
        let t = two_spin_polynomial(0.5, 1.0, 2).unwrap();
        assert_eq!(t.coefficients(), &[1.0, 2.0, 0.5]);
        assert!(local_polynomial(&[1.0], 0).is_err());
    }

    #[test]
    fn root_examples() {
        let r = poly_roots(&RealPolynomial::new(vec![1.0, 2.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(r[0].re, -0.5, epsilon = 1e-15);
        let r = poly_roots(&RealPolynomial::new(vec![1.0, 0.0, 1.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(r[0].im, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r[1].im, 1.0, epsilon = 1e-12);
        let r = poly_roots(&RealPolynomial::new(vec![1.0, 2.0, 0.5]).unwrap()).unwrap();
        assert_abs_diff_eq!(r[0].re, -2.0 - 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(r[1].re, -2.0 + 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn zero_roots_and_clusters() {
        // z^2 (z - 1)^3
        let p = RealPolynomial::new(vec![0.0, 0.0, -1.0, 3.0, -3.0, 1.0]).unwrap();
        let r = poly_roots(&p).unwrap();
        assert_eq!(r.len(), 5);
        assert_eq!(r[0], Complex64::zero());
        for z in &r[2..] {
            assert!((z - 1.0).norm() < 1e-4);
        }
    }

    #[test]
    fn two_spin_examples() {
        let r = check_two_spin_roots(0.5, 1.0, 2).unwrap();
        assert!(r.all_negative_real && r.ratios_ok);
        assert_abs_diff_eq!(r.max_ratio.unwrap(), 0.171_572_875_253_809_9, epsilon = 1e-9);
        let r = check_two_spin_roots(0.0, 1.0, 5).unwrap();
        assert_eq!(r.roots.len(), 1);
        assert!(r.all_negative_real && r.ratios_ok);
        assert!(check_two_spin_roots(1.0, 1.0, 3).is_err());
    }

    #[test]
    fn recursion_identity() {
        let z = two_spin_recursion_residual(0.5, 1.0, 2, c(1.0, 1.0)).unwrap();
        assert!(z.norm() < 1e-12);
        let (l, r) = two_spin_recursion_exact(0.3, 1.7, 5);
        assert_eq!(l, r);
    }

    #[test]
    fn family_regions() {
        let r = stability_region_for_family(&Family::EdgeCover { lambda: 1.0, rho: 0.5 }, 4).unwrap();
        assert_eq!(r.region, Region::cardioid_complement());
        let r = stability_region_for_family(&Family::EvenSubgraph { lambda: 0.5, rho: 0.5 }, 3).unwrap();
        let t = 3f64.powf(1.0 / 3.0);
        assert_abs_diff_eq!(r.epsilon.unwrap(), (t - 1.0) / (t + 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(r.epsilon.unwrap(), 0.181083, epsilon = 1e-6);
        assert!(stability_region_for_family(&Family::EvenSubgraph { lambda: 0.5, rho: 0.0 }, 3).is_err());
        let r = stability_region_for_family(&Family::TwoSpinEdge { beta: 0.5, gamma: 1.0, lambda: 1.0 }, 2).unwrap();
        // epsilon_1 = 1, epsilon_2 = 2 - sqrt 2.
        assert_abs_diff_eq!(r.epsilon.unwrap(), 2.0 - 2f64.sqrt(), epsilon = 1e-12);
        let r = stability_region_for_family(&Family::Matchings { lambda: 1.0 }, 4).unwrap();
        assert_eq!(r.epsilon, Some(0.25));
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta_bound(EtaInputs::new(EtaVariant::PositiveReals, 0.5)).unwrap().eta, 16.0);
        let arb = EtaInputs {
            b: Some(0.25),
            ..EtaInputs::new(EtaVariant::Arb, 0.5)
        };
        assert_eq!(eta_bound(arb).unwrap().eta, 32.0);
        let below = EtaInputs {
            b: Some(0.5),
            lambda: Some(1.0),
            lambda_c: Some(2.0),
            ..EtaInputs::new(EtaVariant::LambdaCBelow, 1.0)
        };
        assert_eq!(eta_bound(below).unwrap().eta, 8.0);
        let bad = EtaInputs {
            lambda: Some(3.0),
            ..below
        };
        assert!(eta_bound(bad).is_err());
    }

    #[test]
    fn cset_examples() {
        assert_eq!(cset_distance_bound(CSetKind::NonzeroSpin, 0.3, 0.5, 2.0, true).unwrap(), 1.0);
        assert_eq!(
            cset_distance_bound(CSetKind::NonzeroSpin, 0.5, 0.0, f64::INFINITY, false).unwrap(),
            1.0
        );
        assert_eq!(cset_distance_bound(CSetKind::ZeroSpin, 0.5, 0.0, 2.0, false).unwrap(), 1.0);
    }

    #[test]
    fn mixing_examples() {
        let g = mixing_time_formula(MixingKind::Generic, 10, 2.0, (-5f64).exp()).unwrap();
        assert_abs_diff_eq!(g.value, 5000.0, epsilon = 1e-9);
        let b = mixing_time_formula(MixingKind::BoundedDegree, 100, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(b.value, 100.0 * 100f64.ln(), epsilon = 1e-9);
        assert_eq!(mixing_time_formula(MixingKind::Generic, 7, 3.0, 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn certify_examples() {
        let caps = Caps::default();
        let m = Family::EdgeCover { lambda: 1.0, rho: 0.5 }.build(Graph::path(3)).unwrap();
        let c = certify_model(&m, 1.0, &caps).unwrap();
        let cmp = c.comparison.unwrap();
        assert_eq!(cmp.pinnings, 9);
        assert!(cmp.passes && cmp.max_eigmax < c.certificate.eta / 10.0);
        let m = Family::EvenSubgraph { lambda: 0.5, rho: 0.5 }.build(Graph::cycle(3)).unwrap();
        let c = certify_model(&m, 0.5, &caps).unwrap();
        let cmp = c.comparison.unwrap();
        assert_eq!(cmp.pinnings, 27);
        assert!(cmp.passes);
        let m = Family::EvenSubgraph { lambda: 0.5, rho: 0.0 }.build(Graph::cycle(3)).unwrap();
        assert!(certify_model(&m, 0.5, &caps).is_err());
    }
}
