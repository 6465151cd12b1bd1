//! Graph homomorphisms, tensor networks and potentials on the cube: near-one
//! admissibility thresholds, polydisk radii and the resulting certificates.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::Ensemble;
use crate::graph::Graph;
use crate::model::{Caps, FourierPotential, Interaction, ModelSpec};
use crate::poly::{to_multiaffine, zero_scan_uniform, ZERO_THRESHOLD};
use crate::region::{Region, SamplerOptions};
use crate::stability::{eta_bound, EtaCertificate, EtaInputs, EtaVariant, CERTIFY_SLACK};

/// Absolute constant in the cube condition `√deg · L(f) ≤ C − ε`.
pub const C_FOURIER: f64 = 0.55;
/// Largest spin count accepted for exact verification.
pub const MAX_EXACT_Q: usize = 8;
/// Largest cube dimension accepted for exact verification.
pub const MAX_EXACT_CUBE: usize = 20;
/// Rounding allowance when comparing deviations of stored `1 ± d` entries.
pub const ADMISSIBILITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConstants {
    pub theta_star: f64,
    pub x_star: f64,
    pub gamma: f64,
    pub c_fourier: f64,
}

/// `θ*` solves `2/θ = tan(θ/2)` on `(0, 2π/3)`; `x* = θ* cos(θ*/2)` maximizes
/// `θ cos(θ/2)` there, and `γ = x*/2`.
pub fn solve_threshold_constants() -> ThresholdConstants {
    let g = |t: f64| (t / 2.0).tan() - 2.0 / t;
    let (mut lo, mut hi) = (0.5, 2.0 * std::f64::consts::PI / 3.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let theta = 0.5 * (lo + hi);
    let x = theta * (theta / 2.0).cos();
    ThresholdConstants {
        theta_star: theta,
        x_star: x,
        gamma: x / 2.0,
        c_fourier: C_FOURIER,
    }
}

fn gamma() -> f64 {
    solve_threshold_constants().gamma
}

/// `γ/(Δ+γ)`.
pub fn hom_threshold(max_degree: usize) -> f64 {
    let g = gamma();
    g / (max_degree as f64 + g)
}

/// `γ/(Δ+1+γ)`.
pub fn tensor_threshold(max_degree: usize) -> f64 {
    let g = gamma();
    g / (max_degree as f64 + 1.0 + g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub threshold: f64,
    pub max_deviation: f64,
    /// `threshold − ε − max_deviation`; admissible iff this is `≥ 0` up to rounding.
    pub margin: f64,
}

fn admissibility<'a>(entries: impl Iterator<Item = &'a Complex64>, threshold: f64, eps: f64) -> Result<Admissibility> {
    if !(eps > 0.0) {
        return Err(Error::param("epsilon", "> 0", eps));
    }
    let max_deviation = entries.map(|z| (z - 1.0).norm()).fold(0.0, f64::max);
    let margin = threshold - eps - max_deviation;
    Ok(Admissibility {
        admissible: margin >= -ADMISSIBILITY_TOLERANCE,
        threshold,
        max_deviation,
        margin,
    })
}

/// Every `|A^{uv}(j,k) − 1| ≤ γ/(Δ+γ) − ε`.
pub fn hom_admissible(matrices: &[Vec<Complex64>], max_degree: usize, eps: f64) -> Result<Admissibility> {
    admissibility(matrices.iter().flatten(), hom_threshold(max_degree), eps)
}

/// Every `|f_v(α) − 1| ≤ γ/(Δ+1+γ) − ε`.
pub fn tensor_admissible(tensors: &[Vec<Complex64>], max_degree: usize, eps: f64) -> Result<Admissibility> {
    admissibility(tensors.iter().flatten(), tensor_threshold(max_degree), eps)
}

/// Largest `c` with `(1 + t − ε)(1 + c)^k − 1 ≤ t`.
///
/// Absorbing fields within `c` of 1 into `k` weight factors moves each factor
/// by at most `c` (including square and higher roots), so the reweighted
/// entries stay below the threshold `t`.
fn polydisk_radius(t: f64, eps: f64, k: usize) -> Result<f64> {
    if !(eps > 0.0 && eps <= t) {
        return Err(Error::param("epsilon", "0 < epsilon <= threshold", eps));
    }
    Ok(((1.0 + t) / (1.0 + t - eps)).powf(1.0 / k as f64) - 1.0)
}

/// Polydisk radius for homomorphism fields; two factors per edge.
pub fn hom_polydisk_radius(max_degree: usize, eps: f64) -> Result<f64> {
    polydisk_radius(hom_threshold(max_degree), eps, 2)
}

/// Polydisk radius for tensor-network fields; up to `Δ` factors per vertex.
pub fn tensor_polydisk_radius(max_degree: usize, eps: f64) -> Result<f64> {
    polydisk_radius(tensor_threshold(max_degree), eps, max_degree.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierStats {
    /// `max_i Σ_{S ∋ i} |f̂(S)|`.
    pub l: f64,
    pub degree: usize,
    /// `√deg · L`.
    pub condition_value: f64,
    /// `(deg − 1) · L`, reported for comparison only.
    pub dobrushin_value: f64,
}

pub fn fourier_stats(f: &FourierPotential) -> FourierStats {
    let mut per_site = vec![0.0; f.n];
    for (s, c) in &f.coefficients {
        for &i in s {
            per_site[i] += c.abs();
        }
    }
    let l = per_site.into_iter().fold(0.0, f64::max);
    let degree = f.degree();
    FourierStats {
        l,
        degree,
        condition_value: (degree as f64).sqrt() * l,
        dobrushin_value: degree.saturating_sub(1) as f64 * l,
    }
}

/// `ξ = 2C/√deg − 2L`, infinite for constant potentials.
pub fn fourier_xi(stats: &FourierStats) -> f64 {
    if stats.degree == 0 {
        f64::INFINITY
    } else {
        2.0 * C_FOURIER / (stats.degree as f64).sqrt() - 2.0 * stats.l
    }
}

/// Radius `c = 1 − e^{−ξ}` of a disk about 1 inside `{|log λ| < ξ}`.
pub fn log_disk_radius(xi: f64) -> f64 {
    1.0 - (-xi).exp()
}

/// Certificate for `μ ∝ exp(f)` with fields in the disk `|λ − 1| < 1 − e^{−ξ}`.
pub fn fourier_eta(f: &FourierPotential, b: f64) -> Result<EtaCertificate> {
    let stats = fourier_stats(f);
    if !(stats.condition_value < C_FOURIER) {
        return Err(Error::param("sqrt(deg) * L", "< 0.55", stats.condition_value));
    }
    let xi = fourier_xi(&stats);
    let c = log_disk_radius(xi);
    let mut cert = eta_bound(EtaInputs {
        b: Some(b),
        lambda: Some(1.0),
        ..EtaInputs::new(EtaVariant::Arb, c)
    })?;
    cert.region = Some(Region::open_disk(Complex64::new(1.0, 0.0), c).to_string());
    cert.tags.push(format!("cube potential condition sqrt(deg) L = {} < C = {C_FOURIER}", stats.condition_value));
    Ok(cert)
}

/// Data of the extended families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtendedData {
    Hom { graph: Graph, q: usize, matrices: Vec<Vec<f64>> },
    Tensor { graph: Graph, q: usize, tensors: Vec<Vec<f64>> },
    Fourier { potential: FourierPotential },
}

/// The Gibbs model of extended data with unit fields.
pub fn build_gibbs_from_extended(data: ExtendedData) -> Result<ModelSpec> {
    let interaction = match data {
        ExtendedData::Hom { graph, q, matrices } => Interaction::VertexSpin { graph, q, matrices },
        ExtendedData::Tensor { graph, q, tensors } => Interaction::TensorNetwork { graph, q, tensors },
        ExtendedData::Fourier { potential } => Interaction::CubeFourier { potential },
    };
    ModelSpec::with_unit_fields(interaction)
}

/// The binary tensor that is 1 when at most one incident edge has spin 1.
pub fn at_most_one_tensor(degree: usize) -> Vec<f64> {
    (0..1usize << degree)
        .map(|a| if a.count_ones() <= 1 { 1.0 } else { 0.0 })
        .collect()
}

/// Per-edge `q×q` matrices with entries `1 ± deviation`, signs seeded.
pub fn random_hom_matrices(graph: &Graph, q: usize, deviation: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..graph.edge_count())
        .map(|_| (0..q * q).map(|_| signed(&mut rng, deviation)).collect())
        .collect()
}

/// Per-vertex tensors with entries `1 ± deviation`, signs seeded.
pub fn random_tensors(graph: &Graph, q: usize, deviation: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..graph.vertex_count())
        .map(|v| {
            let size = q.pow(graph.degree(v) as u32);
            (0..size).map(|_| signed(&mut rng, deviation)).collect()
        })
        .collect()
}

fn signed(rng: &mut ChaCha8Rng, deviation: f64) -> f64 {
    if rng.random_bool(0.5) {
        1.0 + deviation
    } else {
        1.0 - deviation
    }
}

/// A seeded sparse potential on `n` coordinates with `terms` subsets of size
/// at most 3, scaled so that `√deg · L = condition`.
pub fn random_fourier_potential(n: usize, terms: usize, condition: f64, seed: u64) -> Result<FourierPotential> {
    if n == 0 || terms == 0 {
        return Err(Error::Precondition("need n >= 1 and at least one term".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut map = BTreeMap::new();
    let sites: Vec<usize> = (0..n).collect();
    for _ in 0..terms {
        let size = rng.random_range(1..=n.min(3));
        let mut s: Vec<usize> = sites.choose_multiple(&mut rng, size).copied().collect();
        s.sort_unstable();
        *map.entry(s).or_insert(0.0) += rng.random_range(-1.0..1.0);
    }
    let raw = FourierPotential::new(n, map)?;
    let stats = fourier_stats(&raw);
    if stats.condition_value == 0.0 {
        return Ok(raw);
    }
    let scale = condition / stats.condition_value;
    FourierPotential::new(n, raw.coefficients.into_iter().map(|(s, c)| (s, c * scale)).collect())
}

/// Zero probe of `Z^τ` over the polydisk `|λ − 1| < radius` for the empty
/// pinning and `pinnings` random feasible pinnings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolydiskProbe {
    pub radius: f64,
    pub scans: usize,
    pub samples_per_scan: usize,
    pub min_modulus: f64,
    pub zero_found: bool,
}

pub fn polydisk_zero_probe(
    model: &ModelSpec,
    radius: f64,
    pinnings: usize,
    samples: usize,
    seed: u64,
    caps: &Caps,
) -> Result<PolydiskProbe> {
    if !(radius > 0.0) {
        return Err(Error::param("radius", "> 0", radius));
    }
    let ensemble = Ensemble::new(model, caps)?;
    let mut all = vec![crate::model::Pinning::empty(model.site_count())];
    all.extend(ensemble.random_pinnings(pinnings, seed));
    let region = Region::open_disk(Complex64::new(1.0, 0.0), radius);
    let mut min_modulus = f64::INFINITY;
    for (i, tau) in all.iter().enumerate() {
        let p = to_multiaffine(model, tau, caps)?;
        let r = zero_scan_uniform(&p, &region, samples, seed.wrapping_add(i as u64), &SamplerOptions::default())?;
        min_modulus = min_modulus.min(r.min_modulus);
    }
    Ok(PolydiskProbe {
        radius,
        scans: all.len(),
        samples_per_scan: samples,
        min_modulus,
        zero_found: min_modulus < ZERO_THRESHOLD,
    })
}

/// Largest EigMax over all pinnings against `η = 2/(bδ²)` with `b` taken from
/// the same enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolydiskComparison {
    pub delta: f64,
    pub marginal_bound: f64,
    pub eta: f64,
    pub max_eigmax: f64,
    pub pinnings: usize,
    pub passes: bool,
}

pub fn polydisk_spectral_comparison(model: &ModelSpec, delta: f64, caps: &Caps) -> Result<PolydiskComparison> {
    let scan = Ensemble::new(model, caps)?.spectral_scan()?;
    let cert = eta_bound(EtaInputs {
        b: Some(scan.marginal_bound),
        ..EtaInputs::new(EtaVariant::Arb, delta)
    })?;
    Ok(PolydiskComparison {
        delta,
        marginal_bound: scan.marginal_bound,
        eta: cert.eta,
        max_eigmax: scan.max_eigmax,
        pinnings: scan.pinning_count,
        passes: scan.max_eigmax <= cert.eta + CERTIFY_SLACK,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Configuration, Family, Pinning};
    use approx::assert_abs_diff_eq;

    #[test]
    fn constants() {
        let c = solve_threshold_constants();
        assert_abs_diff_eq!(c.theta_star, 1.72067, epsilon = 1e-5);
        assert_abs_diff_eq!(c.x_star, 1.12219, epsilon = 1e-5);
        assert_abs_diff_eq!(c.gamma, 0.56, epsilon = 0.005);
        assert_abs_diff_eq!(2.0 / c.theta_star, (c.theta_star / 2.0).tan(), epsilon = 1e-12);
        assert_eq!(c, solve_threshold_constants());
    }

    #[test]
    fn admissibility_examples() {
        let ones = vec![vec![Complex64::new(1.0, 0.0); 4]; 3];
        let a = hom_admissible(&ones, 3, 0.01).unwrap();
        assert!(a.admissible);
        assert_abs_diff_eq!(a.margin, hom_threshold(3) - 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(hom_threshold(3), 0.15757, epsilon = 1e-4);
        let far = vec![vec![Complex64::new(1.2, 0.0); 4]];
        assert!(!hom_admissible(&far, 3, 1e-6).unwrap().admissible);
        let near = vec![vec![Complex64::new(1.1, 0.0); 4]];
        assert!(hom_admissible(&near, 3, 0.01).unwrap().admissible);
        assert_abs_diff_eq!(tensor_threshold(3), 0.12296, epsilon = 1e-4);
        let at = vec![vec![Complex64::new(1.0 + tensor_threshold(3), 0.0); 8]];
        assert!(!tensor_admissible(&at, 3, 1e-9).unwrap().admissible);
        assert!(hom_admissible(&ones, 3, 0.0).is_err());
    }

    #[test]
    fn polydisk_radius_inequality() {
        let t = hom_threshold(3);
        let c = hom_polydisk_radius(3, 0.05).unwrap();
        assert!(c > 0.0);
        // Bisection on the defining inequality.
        let ok = |c: f64| (1.0 + t - 0.05) * (1.0 + c).powi(2) - 1.0 <= t;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_abs_diff_eq!(c, lo, epsilon = 1e-12);
        assert!(hom_polydisk_radius(3, 0.01).unwrap() < c);
        assert!(hom_polydisk_radius(3, 1e-9).unwrap() < 1e-8);
        assert!(tensor_polydisk_radius(3, 0.05).unwrap() < c);
    }

    #[test]
    fn fourier_examples() {
        let f = FourierPotential::from_terms(2, &[(&[0, 1], 0.1)]).unwrap();
        let s = fourier_stats(&f);
        assert_abs_diff_eq!(s.l, 0.1);
        assert_eq!(s.degree, 2);
        assert_abs_diff_eq!(s.condition_value, 0.141_421_356_237_309_5, epsilon = 1e-15);
        let s = fourier_stats(&FourierPotential::from_terms(2, &[(&[], 3.0)]).unwrap());
        assert_eq!((s.l, s.degree, s.condition_value), (0.0, 0, 0.0));
        let f = FourierPotential::from_terms(3, &[(&[0], 0.3), (&[1], 0.3), (&[2], 0.3)]).unwrap();
        let s = fourier_stats(&f);
        assert_abs_diff_eq!(s.l, 0.3);
        assert_abs_diff_eq!(s.condition_value, 0.3);
        assert_abs_diff_eq!(log_disk_radius(2f64.ln()), 0.5, epsilon = 1e-15);
        let big = FourierPotential::from_terms(1, &[(&[0], 0.6)]).unwrap();
        assert!(fourier_eta(&big, 0.5).is_err());
    }

    #[test]
    fn log_disk_containment() {
        for &xi in &[0.05, 0.3, 1.0, 2.5] {
            let c = log_disk_radius(xi);
            for k in 0..1000 {
                let z = Complex64::new(1.0, 0.0) + Complex64::from_polar(c, k as f64 * 0.00628318);
                assert!(z.ln().norm() <= xi + 1e-12);
            }
        }
    }

    #[test]
    fn built_models() {
        let caps = Caps::default();
        let k2 = Graph::path(2);
        let m = build_gibbs_from_extended(ExtendedData::Hom {
            graph: k2.clone(),
            q: 2,
            matrices: vec![vec![1.0; 4]],
        })
        .unwrap();
        let t = Ensemble::new(&m, &caps).unwrap().gibbs_table(&Pinning::empty(2)).unwrap();
        assert_eq!(t.entries.len(), 4);
        assert!(t.entries.iter().all(|e| (e.1 - 0.25).abs() < 1e-15));

        let g = Graph::path(4);
        let tensors = (0..4).map(|v| at_most_one_tensor(g.degree(v))).collect();
        let tm = build_gibbs_from_extended(ExtendedData::Tensor { graph: g.clone(), q: 2, tensors }).unwrap();
        let mm = Family::Matchings { lambda: 1.0 }.build(g).unwrap();
        for s in 0..8u64 {
            let c = Configuration::decode(s, 3, 2);
            assert_eq!(tm.weight(&c), mm.weight(&c));
        }

        let f = FourierPotential::from_terms(1, &[(&[0], 0.5)]).unwrap();
        let fm = build_gibbs_from_extended(ExtendedData::Fourier { potential: f }).unwrap();
        let ratio = fm.weight(&Configuration::new(vec![1])) / fm.weight(&Configuration::new(vec![0]));
        assert_abs_diff_eq!(ratio, 1f64.exp(), epsilon = 1e-12);
    }

    #[test]
    fn admissible_hom_instance_is_certified() {
        let caps = Caps::default();
        let g = Graph::path(3);
        let t = hom_threshold(g.max_degree());
        let eps = 0.2 * t;
        let data = random_hom_matrices(&g, 2, 0.8 * t, 7);
        let complex: Vec<Vec<Complex64>> =
            data.iter().map(|m| m.iter().map(|&x| Complex64::new(x, 0.0)).collect()).collect();
        assert!(hom_admissible(&complex, g.max_degree(), eps).unwrap().admissible);
        let model = build_gibbs_from_extended(ExtendedData::Hom { graph: g.clone(), q: 2, matrices: data }).unwrap();
        let c = hom_polydisk_radius(g.max_degree(), eps).unwrap();
        let probe = polydisk_zero_probe(&model, c, 3, 500, 1, &caps).unwrap();
        assert!(!probe.zero_found);
        let cmp = polydisk_spectral_comparison(&model, c, &caps).unwrap();
        assert!(cmp.passes);
    }

    #[test]
    fn fourier_certificate_passes() {
        let caps = Caps::default();
        let f = FourierPotential::from_terms(2, &[(&[0, 1], 0.1)]).unwrap();
        let model = build_gibbs_from_extended(ExtendedData::Fourier { potential: f.clone() }).unwrap();
        let b = Ensemble::new(&model, &caps).unwrap().marginal_bound().unwrap();
        let cert = fourier_eta(&f, b).unwrap();
        let scan = Ensemble::new(&model, &caps).unwrap().spectral_scan().unwrap();
        assert!(scan.max_eigmax <= cert.eta + CERTIFY_SLACK);
        let r = random_fourier_potential(5, 4, 0.5, 3).unwrap();
        assert_abs_diff_eq!(fourier_stats(&r).condition_value, 0.5, epsilon = 1e-12);
    }
}
