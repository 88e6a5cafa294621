//! Invariants checked on random instances.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{c, compare_terms, criteria_case, random_instance, round_trip_cases, tucker_tensor};
use tdec::algebra::{
    apolar_pairing, evaluation_functional, star_action, MomentFunctional, MomentValue, Point, Polynomial,
    Scalar, Shape,
};
use tdec::decompose::{
    decompose, from_dense, hosvd_reduce, multilinear_rank, rank_lower_bound, rank_upper_bound, to_dense,
    DecomposeOptions, Decomposition,
};
use tdec::eigen::{joint_eigenvectors, solve_weights, MultiplicationFamily};
use tdec::extension::{flat_extension_check, propagate_with, ExtensionOptions, ExtensionStatus};
use tdec::io::{DecompositionFile, Field, Meta, TensorFile};
use tdec::linalg::{numerical_rank, singular_values};
use tdec::Error;
use tdec::moment::{
    build_moment_functional, candidate_bases, enumerate_monomials, functional_from_terms, hankel,
    select_bases, BasisSearch, MonomialBasis, Provenance,
};

const SHAPES: &[(&[usize], &[u32])] = &[
    (&[2], &[3]),
    (&[1, 2], &[2, 1]),
    (&[2, 2], &[1, 2]),
    (&[1, 1, 2], &[1, 2, 1]),
    (&[3, 3], &[1, 1]),
];

fn shape(i: usize) -> Shape {
    let (d, g) = SHAPES[i % SHAPES.len()];
    Shape::new(d.to_vec(), g.to_vec()).unwrap()
}

/// Polynomial within `R_δ` with small integer coefficients, so sums and
/// products of them are exact in floating point.
fn integer_poly(shape: &Shape, rng: &mut ChaCha8Rng, density: f64) -> Polynomial {
    let mut p = Polynomial::zero(shape.clone());
    for m in enumerate_monomials(shape, shape.degrees()) {
        if rng.random_bool(density) {
            p.add_term(m, c(rng.random_range(-5..=5) as f64));
        }
    }
    p
}

fn random_point(shape: &Shape, rng: &mut ChaCha8Rng) -> Point {
    let coords = shape.dims().iter().map(|&n| (0..n).map(|_| c(rng.random_range(-1.0..1.0))).collect()).collect();
    Point::new(shape, coords).unwrap()
}

fn rel_close(a: Scalar, b: Scalar, tol: f64) -> bool {
    (a - b).norm() <= tol * a.norm().max(b.norm()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn star_action_is_linear(si in 0usize..5, seed in any::<u64>()) {
        let s = shape(si);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let all = enumerate_monomials(&s, s.degrees());
        let mut lambda = MomentFunctional::new(s.clone());
        for (i, m) in all.iter().enumerate() {
            if i % 3 == 1 {
                lambda.insert(m.clone(), MomentValue::unknown(i as u32));
            } else {
                lambda.insert_known(m.clone(), c(rng.random_range(-9..=9) as f64));
            }
        }
        let low: Vec<u32> = s.degrees().iter().map(|d| d / 2).collect();
        let high: Vec<u32> = s.degrees().iter().zip(&low).map(|(d, l)| d - l).collect();
        let p = {
            let mut p = Polynomial::zero(s.clone());
            for m in enumerate_monomials(&s, &low) {
                p.add_term(m, c(rng.random_range(-5..=5) as f64));
            }
            p
        };
        let q = {
            let mut q = Polynomial::zero(s.clone());
            for m in enumerate_monomials(&s, &low) {
                q.add_term(m, c(rng.random_range(-5..=5) as f64));
            }
            q
        };
        let domain = enumerate_monomials(&s, &high);
        let sum = star_action(&p.add(&q).unwrap(), &lambda, &domain).unwrap();
        let lp = star_action(&p, &lambda, &domain).unwrap();
        let lq = star_action(&q, &lambda, &domain).unwrap();
        for m in &domain {
            let mut expect = lp.get(m).unwrap().clone();
            expect.add_scaled(lq.get(m).unwrap(), c(1.0));
            prop_assert_eq!(sum.get(m).unwrap(), &expect);
        }
    }

    #[test]
    fn star_action_is_a_module_action(si in 0usize..5, seed in any::<u64>()) {
        let base = shape(si);
        let s = Shape::new(base.dims().to_vec(), base.degrees().iter().map(|d| d + 1).collect()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lambda = {
            let mut l = MomentFunctional::new(s.clone());
            for m in enumerate_monomials(&s, s.degrees()) {
                l.insert_known(m, c(rng.random_range(-1.0..1.0)));
            }
            l
        };
        let ones: Vec<u32> = s.degrees().iter().map(|&d| d.min(1)).collect();
        let rest: Vec<u32> = s.degrees().iter().map(|&d| d.saturating_sub(2)).collect();
        let mut p = Polynomial::zero(s.clone());
        let mut q = Polynomial::zero(s.clone());
        for m in enumerate_monomials(&s, &ones) {
            p.add_term(m.clone(), c(rng.random_range(-1.0..1.0)));
            q.add_term(m, c(rng.random_range(-1.0..1.0)));
        }
        let domain = enumerate_monomials(&s, &rest);
        let inner_domain = enumerate_monomials(
            &s,
            &s.degrees().iter().map(|&d| d.saturating_sub(1)).collect::<Vec<_>>(),
        );
        let pq = star_action(&p.mul(&q).unwrap(), &lambda, &domain).unwrap();
        let q_lambda = star_action(&q, &lambda, &inner_domain).unwrap();
        let nested = star_action(&p, &q_lambda, &domain).unwrap();
        for m in &domain {
            prop_assert!(rel_close(pq.known(m).unwrap(), nested.known(m).unwrap(), 1e-12));
        }
    }

    #[test]
    fn evaluation_is_multiplicative(si in 0usize..5, seed in any::<u64>()) {
        let s = shape(si);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = random_point(&s, &mut rng);
        let all = enumerate_monomials(&s, s.degrees());
        let e = evaluation_functional(&s, &z, &all).unwrap();
        for m1 in &all {
            for m2 in &all {
                if let Ok(m) = m1.mul(m2) {
                    if s.contains(&m) {
                        let lhs = e.known(&m).unwrap();
                        let rhs = e.known(m1).unwrap() * e.known(m2).unwrap();
                        prop_assert!(rel_close(lhs, rhs, 1e-12));
                    }
                }
            }
        }
    }

    #[test]
    fn apolar_pairing_is_symmetric_and_bilinear(si in 0usize..5, seed in any::<u64>()) {
        let s = shape(si);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = integer_poly(&s, &mut rng, 0.7);
        let g = integer_poly(&s, &mut rng, 0.7);
        let h = integer_poly(&s, &mut rng, 0.7);
        let a = c(rng.random_range(-3..=3) as f64);
        prop_assert_eq!(apolar_pairing(&f, &g).unwrap(), apolar_pairing(&g, &f).unwrap());
        let lhs = apolar_pairing(&f.scale(a).add(&h).unwrap(), &g).unwrap();
        let rhs = a * apolar_pairing(&f, &g).unwrap() + apolar_pairing(&h, &g).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn pairing_of_moment_arrays_is_the_functional(si in 0usize..5, seed in any::<u64>()) {
        let s = shape(si);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = integer_poly(&s, &mut rng, 0.8);
        let g = integer_poly(&s, &mut rng, 0.8);
        let (fs, gs) = (build_moment_functional(&f).unwrap(), build_moment_functional(&g).unwrap());
        let as_poly = |l: &MomentFunctional| {
            Polynomial::from_terms(s.clone(), l.entries().iter().map(|(m, v)| (m.clone(), v.constant))).unwrap()
        };
        let lhs = apolar_pairing(&as_poly(&fs), &as_poly(&gs)).unwrap();
        let rhs: Scalar = g.terms().iter().map(|(m, coef)| coef * fs.known(m).unwrap()).sum();
        prop_assert!(rel_close(lhs, rhs, 1e-10));
    }

    #[test]
    fn hankel_entries_depend_on_the_product_only(si in 0usize..5, seed in any::<u64>()) {
        let s = shape(si);
        let (_, t) = random_instance(&s, 2, seed);
        let lambda = build_moment_functional(&t).unwrap();
        let all = enumerate_monomials(&s, s.degrees());
        let rows = MonomialBasis::new(&s, all.clone()).unwrap();
        let h = hankel(&lambda, &rows, &rows).unwrap();
        let ht = hankel(&lambda, &rows, &rows).unwrap().transpose();
        let mut seen = std::collections::BTreeMap::new();
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                prop_assert_eq!(h.entry(i, j), ht.entry(j, i));
                let m = all[i].mul(&all[j]).unwrap();
                let known = h.provenance(i, j) == Provenance::Known;
                prop_assert_eq!(known, s.contains(&m));
                if let Some(prev) = seen.insert(m, h.entry(i, j).clone()) {
                    prop_assert_eq!(&prev, h.entry(i, j));
                }
            }
        }
    }

    #[test]
    fn group_flattenings_match_mode_unfoldings(seed in any::<u64>(), r in 1usize..5) {
        let s = Shape::multilinear(vec![2, 3, 2]).unwrap();
        let (_, t) = random_instance(&s, r, seed);
        let lambda = build_moment_functional(&t).unwrap();
        let ml = multilinear_rank(&t, 1e-8).unwrap();
        for g in 0..3 {
            let mut rows_deg = vec![0; 3];
            rows_deg[g] = 1;
            let cols_deg: Vec<u32> = (0..3).map(|i| u32::from(i != g)).collect();
            let rows = MonomialBasis::new(&s, enumerate_monomials(&s, &rows_deg)).unwrap();
            let cols = MonomialBasis::new(&s, enumerate_monomials(&s, &cols_deg)).unwrap();
            let h = hankel(&lambda, &rows, &cols).unwrap().to_matrix().unwrap();
            prop_assert_eq!(numerical_rank(&h, 1e-8), ml[g]);
        }
    }

    #[test]
    fn hankel_rank_counts_points(seed in any::<u64>(), r in 1usize..6) {
        let s = Shape::new(vec![2], vec![8]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms: Vec<(Scalar, Point)> = (0..r)
            .map(|_| (c(rng.random_range(0.5..2.0)), random_point(&s, &mut rng)))
            .collect();
        let lambda = functional_from_terms(&s, &terms).unwrap();
        let half = MonomialBasis::new(&s, enumerate_monomials(&s, &[4])).unwrap();
        let h = hankel(&lambda, &half, &half).unwrap().to_matrix().unwrap();
        let sv = singular_values(&h);
        let gap = sv[r - 1] / sv[0];
        prop_assume!(gap > 1e-6);
        prop_assert_eq!(numerical_rank(&h, 1e-10), r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn flat_check_agrees_with_commutation(seed in any::<u64>()) {
        let case = criteria_case(seed);
        prop_assert_eq!(case.flat, case.commutator < 1e-8, "{:?}", case);
    }
}

/// Extension of a random rank-`r` instance over the first basis pair.
fn extended(seed: u64, shuffle: Option<u64>) -> (MomentFunctional, tdec::extension::ExtensionResult) {
    let s = Shape::multilinear(vec![3, 3, 3]).unwrap();
    let r = 2 + (seed % 3) as usize;
    let (_, t) = random_instance(&s, r, seed);
    let lambda = build_moment_functional(&t).unwrap();
    let (b, bp) = select_bases(&lambda, r).unwrap();
    let opts = ExtensionOptions { shuffle_seed: shuffle, ..ExtensionOptions::default() };
    let ext = propagate_with(&lambda, &b, &bp, &opts).unwrap();
    (lambda, ext)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn extension_ignores_processing_order(seed in any::<u64>(), shuffle in any::<u64>()) {
        let (_, a) = extended(seed, None);
        let (_, b) = extended(seed, Some(shuffle));
        prop_assert_eq!(a.status, b.status);
        if a.status == ExtensionStatus::Extended {
            for (m, va) in a.functional.entries() {
                let (Some(x), Some(y)) = (va.as_known(), b.functional.known(m)) else { continue };
                prop_assert!(rel_close(x, y, 1e-8), "{m}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn extension_keeps_known_moments_and_basis(seed in any::<u64>()) {
        let (lambda, ext) = extended(seed, None);
        for (m, v) in lambda.entries() {
            prop_assert_eq!(ext.functional.get(m), Some(v));
        }
        for (j, b) in ext.cols.iter().enumerate() {
            let nf = ext.normal_form(b).unwrap();
            for (i, x) in nf.iter().enumerate() {
                prop_assert_eq!(*x, c(if i == j { 1.0 } else { 0.0 }));
            }
        }
    }

    #[test]
    fn eigenvectors_are_evaluations(seed in any::<u64>()) {
        let (lambda, ext) = extended(seed, None);
        let family = MultiplicationFamily::from_extension(&ext);
        prop_assume!(!family.matrices.is_empty());
        let roots = joint_eigenvectors(&family, seed).unwrap();
        prop_assume!(roots.simple);
        let b = &family.basis;
        for (w, vals) in roots.eigvecs.iter().zip(&roots.eigenvalues) {
            for (v, m) in &family.matrices {
                let lhs = m.transpose() * w;
                let rhs = w * vals[v];
                prop_assert!((lhs - &rhs).norm() <= 1e-6 * rhs.norm().max(1.0));
            }
            for (i, m1) in b.iter().enumerate() {
                for (j, m2) in b.iter().enumerate() {
                    if let Some(k) = m1.mul(m2).ok().and_then(|m| b.index_of(&m)) {
                        prop_assert!(rel_close(w[k], w[i] * w[j], 1e-6));
                    }
                }
            }
        }
        let other = joint_eigenvectors(&family, seed ^ 0x5eed).unwrap();
        prop_assume!(other.simple);
        let dist = |a: &tdec::linalg::CVector, b: &tdec::linalg::CVector| {
            a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
        };
        for w in &roots.eigvecs {
            let best = other.eigvecs.iter().map(|u| dist(w, u)).fold(f64::INFINITY, f64::min);
            prop_assert!(best < 1e-6);
        }
        let _ = lambda;
    }

    #[test]
    fn weights_follow_point_permutations(seed in any::<u64>(), r in 1usize..5) {
        let s = Shape::multilinear(vec![2, 2, 3]).unwrap();
        let (terms, t) = random_instance(&s, r, seed);
        let points: Vec<Point> = terms.iter().map(|(_, p)| p.clone()).collect();
        let w = solve_weights(&t, &points).unwrap();
        let mut order: Vec<usize> = (0..r).collect();
        order.rotate_left(seed as usize % r);
        let permuted: Vec<Point> = order.iter().map(|&i| points[i].clone()).collect();
        let wp = solve_weights(&t, &permuted).unwrap();
        for (j, &i) in order.iter().enumerate() {
            prop_assert!((wp[j] - w[i]).norm() < 1e-8);
            prop_assert!((w[i] - terms[i].0).norm() < 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_sums_round_trip(index in 0usize..52, seed in any::<u64>()) {
        let cases = round_trip_cases();
        let (s, r) = cases[index % cases.len()].clone();
        let (terms, t) = random_instance(&s, r, seed);
        let d = decompose(&t, &DecomposeOptions::default()).unwrap();
        prop_assert_eq!(d.rank(), r);
        prop_assert!(d.residual < 1e-6);
        let (dp, dw) = compare_terms(&d.terms, &terms).unwrap();
        prop_assert!(dp < 1e-6 && dw < 1e-6, "{dp} {dw}");

        let lower = rank_lower_bound(&t).unwrap();
        prop_assert!(lower <= d.rank());
        if s.is_multilinear() {
            prop_assert!(d.rank() <= rank_upper_bound(&s.full_dims()).unwrap());
        }
        if d.coordinate_change.is_some() {
            prop_assert!(tdec::decompose::verify(&t, &d).unwrap() <= 1e-6);
        }

        let lambda = build_moment_functional(&t).unwrap();
        for smaller in 1..r {
            let scan = candidate_bases(&lambda, smaller, &BasisSearch::default());
            for cand in &scan.candidates {
                match flat_extension_check(&lambda, &cand.cols, &cand.rows, 1e-8) {
                    Ok(flat) => prop_assert!(!flat),
                    // the border block needs moments beyond the tensor: no certificate either way
                    Err(Error::UnresolvedParameter(_) | Error::MissingMoment(_)) => {}
                    Err(e) => prop_assert!(false, "{e}"),
                }
            }
        }
    }

    #[test]
    fn scaling_scales_the_weights(index in 0usize..52, seed in any::<u64>(), scale in 0.1f64..10.0) {
        let cases = round_trip_cases();
        let (s, r) = cases[index % cases.len()].clone();
        let (_, t) = random_instance(&s, r, seed);
        let d = decompose(&t, &DecomposeOptions::default()).unwrap();
        let ds = decompose(&t.scale(c(scale)), &DecomposeOptions::default()).unwrap();
        let scaled: Vec<(Scalar, Point)> = d.terms.iter().map(|(w, p)| (w * scale, p.clone())).collect();
        let (dp, dw) = compare_terms(&ds.terms, &scaled).unwrap();
        prop_assert!(dp < 1e-8 && dw < 1e-8 * scale.max(1.0), "{dp} {dw}");
    }

    #[test]
    fn tucker_tensors_have_their_multilinear_rank(seed in any::<u64>()) {
        let t = tucker_tensor(&[4, 4, 4], &[2, 3, 2], seed);
        prop_assert_eq!(multilinear_rank(&t, 1e-8).unwrap(), vec![2, 3, 2]);
        let tk = hosvd_reduce(&t, &[2, 3, 2]).unwrap();
        prop_assert!(tk.error < 1e-10);
        let full = hosvd_reduce(&t, &[4, 4, 4]).unwrap();
        prop_assert!(full.error < 1e-10);
    }

    #[test]
    fn truncation_error_tracks_the_singular_value_tail(seed in any::<u64>()) {
        let s = Shape::multilinear(vec![3, 3, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<Scalar> = (0..64).map(|_| c(rng.random_range(-1.0..1.0))).collect();
        let t = from_dense(&s, &data).unwrap();
        let target = [3, 3, 3];
        let tk = hosvd_reduce(&t, &target).unwrap();
        let (dims, data) = to_dense(&t).unwrap();
        let norm2: f64 = data.iter().map(|z| z.norm_sqr()).sum();
        let mut tail2 = 0.0;
        let mut worst_mode = 0.0f64;
        for (mode, &keep) in target.iter().enumerate() {
            let n = dims[mode];
            let inner: usize = dims[mode + 1..].iter().product();
            let a = tdec::linalg::CMatrix::from_fn(n, data.len() / n, |i, j| {
                data[((j / inner) * n + i) * inner + j % inner]
            });
            let sv = singular_values(&a);
            let t2: f64 = sv[keep..].iter().map(|x| x * x).sum();
            tail2 += t2;
            worst_mode = worst_mode.max(t2);
        }
        let err2 = tk.error * tk.error * norm2;
        prop_assert!(err2 >= worst_mode * 0.8, "{err2} vs {worst_mode}");
        prop_assert!(err2 <= tail2 * 1.2, "{err2} vs {tail2}");
    }

    #[test]
    fn files_round_trip_exactly(seed in any::<u64>(), complex in any::<bool>()) {
        let s = Shape::new(vec![2, 1], vec![2, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let field = if complex { Field::Complex } else { Field::Real };
        let draw = |rng: &mut ChaCha8Rng| {
            let re: f64 = rng.random_range(-1e3..1e3) * 10f64.powi(rng.random_range(-20..20));
            Scalar::new(re, if complex { rng.random_range(-1.0..1.0) } else { 0.0 })
        };
        let mut p = Polynomial::zero(s.clone());
        for m in enumerate_monomials(&s, s.degrees()) {
            p.add_term(m, draw(&mut rng));
        }
        let tf = TensorFile::from_polynomial(&p, field);
        prop_assert_eq!(TensorFile::parse(&tf.to_json()).unwrap(), tf.clone());
        prop_assert_eq!(tf.to_polynomial(), p);

        let terms: Vec<(Scalar, Point)> = (0..3)
            .map(|_| {
                let coords = s.dims().iter().map(|&n| (0..n).map(|_| draw(&mut rng)).collect()).collect();
                (draw(&mut rng), Point::new(&s, coords).unwrap())
            })
            .collect();
        let mut d = Decomposition::new(s.clone(), terms.clone());
        d.residual = rng.random_range(0.0..1.0);
        let meta = Meta { seed: Some(seed), tol_rank: Some(1e-8), ..Meta::default() };
        let df = DecompositionFile::from_decomposition(&d, field, meta);
        let back = DecompositionFile::parse(&df.to_json()).unwrap();
        prop_assert_eq!(&back, &df);
        prop_assert_eq!(back.to_terms(&s).unwrap(), terms);
    }
}

#[test]
fn shapes_cover_every_group_count() {
    let ks: BTreeSet<usize> = round_trip_cases().iter().map(|(s, _)| s.k()).collect();
    assert_eq!(ks, BTreeSet::from([1, 2, 3]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn decompositions_after_a_change_of_coordinates_lift_back(seed in any::<u64>(), r in 1usize..5) {
        use tdec::decompose::{change_coordinates, CoordinateChange};
        use tdec::linalg::{CMatrix, CVector};
        let s = Shape::multilinear(vec![3, 3, 3]).unwrap();
        let (_, t) = random_instance(&s, r, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let matrices: Vec<CMatrix> = (0..3)
            .map(|_| CMatrix::from_fn(4, 4, |i, j| c(if i == j { 2.0 } else { 0.0 } + rng.random_range(-0.5..0.5))))
            .collect();
        let change = CoordinateChange { matrices: matrices.clone() };
        let moved = change_coordinates(&t, &change).unwrap();
        let d = decompose(&moved, &DecomposeOptions::default()).unwrap();
        prop_assert_eq!(d.rank(), r);
        let mut lifted = Vec::new();
        for (w, p) in &d.terms {
            let mut weight = *w;
            let mut coords = Vec::new();
            for (g, m) in matrices.iter().enumerate() {
                let h = CVector::from_iterator(4, std::iter::once(c(1.0)).chain(p.coords[g].iter().copied()));
                let l = m.transpose().try_inverse().unwrap() * h;
                weight *= l[0];
                coords.push(l.iter().skip(1).map(|x| x / l[0]).collect());
            }
            lifted.push((weight, Point::new(&s, coords).unwrap()));
        }
        let back = Decomposition::new(s.clone(), lifted);
        prop_assert!(tdec::decompose::verify(&t, &back).unwrap() < 1e-6);
    }
}
