//! Property tests over random small instances, each against an independent
//! enumeration or closed-form oracle.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zerofree::exact::{partition_function, partition_function_as, Ensemble};
use zerofree::extended::solve_threshold_constants;
use zerofree::glauber::{run_chain, transition_matrix, Start};
use zerofree::graph::connected_graphs;
use zerofree::model::{two_spin_value, Interaction};
use zerofree::model_file::{parse_model, write_model};
use zerofree::poly::{pin_polynomial, to_multiaffine, to_multiaffine_exact, Var};
use zerofree::region::delta;
use zerofree::stability::{
    eta_bound, family_local_polynomial, poly_roots, EtaInputs, EtaVariant, RealPolynomial,
};
use zerofree::{Caps, Configuration, Family, Graph, ModelSpec, Pinning, Region};

fn graphs() -> &'static [Graph] {
    static G: OnceLock<Vec<Graph>> = OnceLock::new();
    G.get_or_init(|| connected_graphs(4, 5, 3))
}

fn caps() -> Caps {
    Caps::default()
}

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![
        (0.1..3.0f64).prop_map(|lambda| Family::Matchings { lambda }),
        (0.1..3.0f64, 0.0..=1.0f64).prop_map(|(lambda, rho)| Family::EdgeCover { lambda, rho }),
        (0.1..0.95f64, 0.0..=1.0f64).prop_map(|(lambda, rho)| Family::EvenSubgraph { lambda, rho }),
        (0.0..1.0f64, 0.1..2.0f64, 0.1..3.0f64).prop_map(|(beta, gamma, lambda)| Family::TwoSpinEdge {
            beta,
            gamma,
            lambda
        }),
        (0.1..2.0f64, 0.1..3.0f64).prop_map(|(beta, lambda)| Family::IsingLine { beta, lambda }),
    ]
}

fn instance() -> impl Strategy<Value = (Family, ModelSpec)> {
    (family(), 0..graphs().len()).prop_map(|(f, g)| (f, f.build(graphs()[g].clone()).unwrap()))
}

/// Product-form weight straight from the definition: one vertex factor per
/// vertex, indexed by the number of selected incident edges.
fn product_weight(family: &Family, g: &Graph, c: &Configuration) -> f64 {
    let mut w = 1.0;
    for v in 0..g.vertex_count() {
        let k = g.edges().iter().enumerate().filter(|&(e, &(a, b))| (a == v || b == v) && c.spins[e] == 1).count();
        let f = match *family {
            Family::Matchings { .. } => f64::from(u8::from(k <= 1)),
            Family::EdgeCover { rho, .. } => if k == 0 { rho } else { 1.0 },
            Family::EvenSubgraph { rho, .. } => if k % 2 == 0 { 1.0 } else { rho },
            Family::TwoSpinEdge { beta, gamma, .. } => {
                let d = g.degree(v);
                beta.powi((k * k.saturating_sub(1) / 2) as i32) * gamma.powi(((d - k) * (d - k).saturating_sub(1) / 2) as i32)
            }
            Family::IsingLine { beta, .. } => {
                let d = g.degree(v);
                beta.powi((k * k.saturating_sub(1) / 2) as i32) * beta.powi(((d - k) * (d - k).saturating_sub(1) / 2) as i32)
            }
        };
        w *= f;
    }
    w * family.lambda().powi(c.selected().len() as i32)
}

fn random_pinning(model: &ModelSpec, seed: u64) -> Pinning {
    let e = Ensemble::new(model, &caps()).unwrap();
    e.random_pinnings(1, seed).pop().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weights_match_product_form((family, model) in instance()) {
        let g = model.graph().unwrap().clone();
        for c in model.all_configurations(&caps()).unwrap() {
            let w = model.weight(&c);
            prop_assert!(w >= 0.0);
            let expected = product_weight(&family, &g, &c);
            prop_assert!((w - expected).abs() <= 1e-12 * expected.max(1.0), "{w} vs {expected}");
        }
    }

    #[test]
    fn pinnings_and_feasible_pairs_match_enumeration((_f, model) in instance()) {
        let valid: Vec<Configuration> = model.valid_configurations(&caps()).unwrap().into_iter().map(|x| x.0).collect();
        let pins = model.enumerate_pinnings(usize::MAX, &caps()).unwrap();
        prop_assert!(pins.iter().any(|p| p.pinned_count() == 0));
        for tau in &pins {
            let ext: Vec<&Configuration> = valid.iter().filter(|c| tau.is_extended_by(c)).collect();
            prop_assert!(!ext.is_empty());
            let expected: BTreeSet<(usize, usize)> = ext
                .iter()
                .flat_map(|c| c.spins.iter().enumerate().filter(|&(v, _)| !tau.is_pinned(v)).map(|(v, &k)| (v, k)))
                .collect();
            let got: BTreeSet<(usize, usize)> = model.feasible_pairs(tau, &caps()).unwrap().pairs.into_iter().collect();
            prop_assert_eq!(got, expected);
        }
        // Every restriction of a valid configuration is enumerated.
        let n = model.site_count();
        let set: BTreeSet<Vec<Option<usize>>> = pins.iter().map(|p| p.assignment.clone()).collect();
        for c in valid.iter().take(8) {
            for mask in 0u32..(1 << n) {
                let a: Vec<Option<usize>> = (0..n).map(|v| (mask >> v & 1 == 1).then_some(c.spins[v])).collect();
                prop_assert!(set.contains(&a));
            }
        }
    }

    #[test]
    fn equal_two_spin_parameters_give_the_line_graph_ising(beta in 0.1..2.0f64, lambda in 0.1..3.0f64, g in 0..20usize) {
        let g = graphs()[g % graphs().len()].clone();
        let a = Family::TwoSpinEdge { beta, gamma: beta, lambda }.build(g.clone()).unwrap();
        let b = Family::IsingLine { beta, lambda }.build(g).unwrap();
        for c in a.all_configurations(&caps()).unwrap() {
            prop_assert_eq!(a.weight(&c), b.weight(&c));
        }
    }

    #[test]
    fn total_probability_and_derivatives_are_exact((_f, model) in instance(), seed in any::<u64>()) {
        let tau = random_pinning(&model, seed);
        let n = model.site_count();
        let ones = vec![vec![BigRational::one(); model.spin_count() - 1]; n];
        let z = partition_function_as::<BigRational>(&model, &tau, &ones, &caps()).unwrap();
        let p = to_multiaffine_exact(&model, &tau, &caps()).unwrap();
        for u in (0..n).filter(|&u| !tau.is_pinned(u)) {
            let mut sum = BigRational::zero();
            for j in 0..model.spin_count() {
                let ext = tau.extend(u, j);
                if model.is_feasible(&ext, &caps()).unwrap() {
                    let zj = partition_function_as::<BigRational>(&model, &ext, &ones, &caps()).unwrap();
                    if j >= 1 {
                        let d = p.derivative(Var::new(u, j).unwrap()).evaluate(&ones);
                        prop_assert_eq!(&d, &zj);
                    }
                    sum += zj;
                }
            }
            prop_assert_eq!(&sum, &z);
        }
    }

    #[test]
    fn pinned_polynomials_match_direct_construction((_f, model) in instance(), seed in any::<u64>()) {
        let tau = random_pinning(&model, seed);
        let p = to_multiaffine_exact(&model, &tau, &caps()).unwrap();
        let q = model.spin_count();
        for v in (0..model.site_count()).filter(|&v| !tau.is_pinned(v)) {
            for k in 0..q {
                let ext = tau.extend(v, k);
                let got = pin_polynomial(&p, v, k, q);
                if model.is_feasible(&ext, &caps()).unwrap() {
                    prop_assert_eq!(got, to_multiaffine_exact(&model, &ext, &caps()).unwrap());
                } else {
                    prop_assert!(got.is_zero());
                }
            }
        }
    }

    #[test]
    fn multiaffine_form_evaluates_to_the_partition_function((_f, model) in instance(), seed in any::<u64>()) {
        let tau = random_pinning(&model, seed);
        let p = to_multiaffine(&model, &tau, &caps()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let fields: Vec<Vec<Complex64>> = (0..model.site_count())
                .map(|_| vec![Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))])
                .collect();
            let direct = partition_function(&model, &tau, &fields, &caps()).unwrap();
            let via = p.evaluate(&fields);
            let scale = p.terms().values().map(|c| c.norm()).sum::<f64>() * 4f64.powi(model.site_count() as i32);
            prop_assert!((direct - via).norm() <= 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn influence_rows_balance_and_eigmax_is_bounded((_f, model) in instance(), seed in any::<u64>()) {
        let e = Ensemble::new(&model, &caps()).unwrap();
        let tau = e.random_pinnings(1, seed).pop().unwrap();
        let psi = e.influence_matrix(&tau).unwrap();
        let m = psi.index.len();
        for a in 0..m {
            let sites: BTreeSet<usize> = psi.index.iter().map(|x| x.0).collect();
            for v in sites.into_iter().filter(|&v| v != psi.index[a].0) {
                let s: f64 = (0..m).filter(|&b| psi.index[b].0 == v).map(|b| psi.values.get(a, b)).sum();
                prop_assert!(s.abs() <= 1e-12, "row {a} site {v}: {s}");
            }
            for b in 0..m {
                let x = psi.values.get(a, b);
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&x));
                if psi.index[a].0 == psi.index[b].0 {
                    prop_assert_eq!(x, 0.0);
                }
            }
        }
        let em = psi.eigmax().unwrap();
        prop_assert!(em.value <= em.inf_norm + 1e-9);
    }

    #[test]
    fn chains_are_reversible_local_and_contracting((_f, model) in instance(), seed in any::<u64>()) {
        let p = transition_matrix(&model, &caps()).unwrap();
        let table = Ensemble::new(&model, &caps()).unwrap().gibbs_table(&Pinning::empty(model.site_count())).unwrap();
        let pi: Vec<f64> = p.states.iter().map(|c| table.probability(c)).collect();
        let n = model.site_count();
        for (i, row) in p.rows.iter().enumerate() {
            for &(j, pij) in row {
                prop_assert!((pi[i] * pij - pi[j] * p.get(j, i)).abs() <= 1e-12);
            }
            // Heat-bath locality: the local conditional law matches the Gibbs table.
            let c = &p.states[i];
            for v in 0..n {
                let w = model.conditional_weights(c, v);
                let z: f64 = w.iter().sum();
                let mut oracle = vec![0.0; model.spin_count()];
                for (d, prob) in p.states.iter().zip(&pi) {
                    if (0..n).all(|u| u == v || d.spins[u] == c.spins[u]) {
                        oracle[d.spins[v]] += prob;
                    }
                }
                let oz: f64 = oracle.iter().sum();
                for k in 0..w.len() {
                    prop_assert!((w[k] / z - oracle[k] / oz).abs() <= 1e-12);
                }
            }
        }
        if p.len() > 1 {
            let start = seed as usize % p.len();
            let curve = p.tv_curve(start, 60).tv_curve;
            for w in curve.windows(2) {
                prop_assert!((0.0..=1.0).contains(&w[1].1));
                prop_assert!(w[1].1 <= w[0].1 + 1e-12);
            }
        }
        let run = run_chain(&model, 200, seed, &Start::GreedyFeasible, true, &caps()).unwrap();
        let mut c = run.start.clone();
        prop_assert!(model.weight(&c) > 0.0);
        for row in &run.trace {
            c.spins[row.site] = row.new_spin;
            prop_assert!(model.weight(&c) > 0.0);
        }
        prop_assert_eq!(c, run.end);
    }

    #[test]
    fn roots_have_small_residuals(coeffs in prop::collection::vec(-5.0..5.0f64, 2..12)) {
        prop_assume!(coeffs.last().unwrap().abs() > 1e-3);
        let p = RealPolynomial::new(coeffs.clone()).unwrap();
        let max = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        for r in poly_roots(&p).unwrap() {
            prop_assert!(p.eval(r).norm() <= 1e-8 * max * r.norm().max(1.0).powi(p.degree() as i32));
        }
    }

    #[test]
    fn even_subgraph_roots_follow_the_closed_form(rho in 0.05..0.95f64, d in 1..=6usize) {
        let p = family_local_polynomial(&Family::EvenSubgraph { lambda: 0.5, rho }, d).unwrap();
        let t = ((1.0 + rho) / (1.0 - rho)).powf(1.0 / d as f64);
        let roots = poly_roots(&p).unwrap();
        for j in 0..d {
            let omega = Complex64::from_polar(1.0, std::f64::consts::PI * (2 * j + 1) as f64 / d as f64);
            let z = (omega - t) / (omega + t);
            prop_assert!(roots.iter().any(|r| (r - z).norm() <= 1e-8), "{z} missing from {roots:?}");
        }
    }

    #[test]
    fn eta_formulas_are_exact(dn in 1u32..50, dd in 1u32..50, bn in 1u32..20, lc in 1u32..8, l in 1u32..16) {
        let delta = dn as f64 / dd as f64;
        let b = bn as f64 / 20.0;
        let r = eta_bound(EtaInputs::new(EtaVariant::PositiveReals, delta)).unwrap();
        prop_assert_eq!(r.eta, 8.0 / delta);
        let r = eta_bound(EtaInputs { b: Some(b), ..EtaInputs::new(EtaVariant::Arb, delta) }).unwrap();
        prop_assert_eq!(r.eta, 2.0 / (b * delta * delta));
        let (lc, l) = (lc as f64, l as f64 / 2.0);
        let inputs = EtaInputs { b: Some(b), lambda: Some(l), lambda_c: Some(lc), ..EtaInputs::new(EtaVariant::LambdaCBelow, delta) };
        if l < lc {
            let m = ((1.0 - b) / b).min(l / (b * (lc - l)) + 1.0);
            prop_assert_eq!(eta_bound(inputs).unwrap().eta, 8.0 / delta * m);
        } else {
            prop_assert!(eta_bound(inputs).is_err());
        }
        let inputs = EtaInputs { b: Some(b), lambda: Some(l), lambda_c: Some(lc), ..EtaInputs::new(EtaVariant::LambdaCAbove, delta) };
        if l > lc {
            let m = ((1.0 - b) / b).min(lc / (b * (l - lc)) + 1.0);
            prop_assert_eq!(eta_bound(inputs).unwrap().eta, 8.0 / delta * m);
        } else {
            prop_assert!(eta_bound(inputs).is_err());
        }
    }

    #[test]
    fn distance_disks_stay_inside(which in 0..4usize, re in 0.05..5.0f64, eps in 0.05..1.0f64) {
        let region = match which {
            0 => Region::cardioid_complement(),
            1 => Region::half_plane_square_complement(eps),
            2 => Region::open_disk(Complex64::new(1.0, 0.0), 1.0 + eps),
            _ => Region::h(eps).inverted(),
        };
        let lambda = Complex64::new(re, 0.0);
        prop_assume!(region.contains(lambda));
        let r = region.dist_to_boundary(lambda).unwrap().value - 1e-9;
        prop_assume!(r > 0.0);
        for i in 0..1000 {
            let z = lambda + Complex64::from_polar(r * 0.999_999, std::f64::consts::TAU * i as f64 / 1000.0);
            prop_assert!(region.contains(z), "{z} escapes region {which} (radius {r})");
        }
    }

    #[test]
    fn half_plane_distance_grows_and_scales(eps in 0.05..1.0f64, a in 0.0..4.0f64, b in 0.0..4.0f64) {
        let region = Region::half_plane_square_complement(eps);
        let (lo, hi) = (eps * eps + a.min(b), eps * eps + a.max(b));
        let d = |x: f64| region.dist_to_boundary(Complex64::new(x, 0.0)).unwrap().value;
        prop_assert!(d(lo) <= d(hi) + 1e-12);
        let scaled = region.clone().scaled(1.0 / hi);
        prop_assert!((delta(hi, &region).unwrap() - delta(1.0, &scaled).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn model_files_round_trip((_f, model) in instance()) {
        let text = write_model(&model);
        prop_assert_eq!(parse_model(&text).unwrap(), model);
    }
}

#[test]
fn threshold_constants_are_idempotent() {
    let a = solve_threshold_constants();
    let b = solve_threshold_constants();
    assert_eq!(a, b);
    assert!(((a.theta_star / 2.0).tan() - 2.0 / a.theta_star).abs() <= 1e-12);
    assert_eq!(a.x_star, a.theta_star * (a.theta_star / 2.0).cos());
    assert_eq!(a.gamma, a.x_star / 2.0);
}

#[test]
fn explicit_holant_interaction_matches_family() {
    let g = Graph::star(3);
    let f = Family::TwoSpinEdge { beta: 0.5, gamma: 1.5, lambda: 1.0 };
    let m = f.build(g.clone()).unwrap();
    let local: Vec<Vec<f64>> = (0..g.vertex_count())
        .map(|v| (0..=g.degree(v)).map(|k| two_spin_value(0.5, 1.5, g.degree(v), k)).collect())
        .collect();
    let explicit = ModelSpec::new(Interaction::BinarySymmetricHolant { graph: g, local }, vec![vec![1.0]; 3]).unwrap();
    for c in m.all_configurations(&caps()).unwrap() {
        assert_eq!(m.weight(&c), explicit.weight(&c));
    }
}
