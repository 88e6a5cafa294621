#![allow(dead_code)]

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tdec::algebra::{Point, Polynomial, Scalar, Shape};
use tdec::cli::synth_terms;
use tdec::decompose::Decomposition;
use tdec::io::{DecompositionFile, Field, TensorFile};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn load_tensor(name: &str) -> Polynomial {
    TensorFile::read(&fixture(name)).unwrap().to_polynomial()
}

pub fn load_terms(name: &str, shape: &Shape) -> Vec<(Scalar, Point)> {
    DecompositionFile::read(&fixture(name)).unwrap().to_terms(shape).unwrap()
}

pub fn c(x: f64) -> Scalar {
    Scalar::new(x, 0.0)
}

/// Seeded random terms and their expansion.
pub fn random_instance(shape: &Shape, r: usize, seed: u64) -> (Vec<(Scalar, Point)>, Polynomial) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms = synth_terms(shape, r, Field::Real, &mut rng);
    let t = Decomposition::new(shape.clone(), terms.clone()).to_polynomial().unwrap();
    (terms, t)
}

pub fn point_distance(a: &Point, b: &Point) -> f64 {
    a.coords
        .iter()
        .flatten()
        .zip(b.coords.iter().flatten())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Pairs every found term with the nearest expected point; returns the
/// worst point and weight deviations, or `None` when the pairing is not a
/// permutation.
pub fn compare_terms(found: &[(Scalar, Point)], expected: &[(Scalar, Point)]) -> Option<(f64, f64)> {
    if found.len() != expected.len() {
        return None;
    }
    let mut used = vec![false; expected.len()];
    let (mut dp, mut dw) = (0.0f64, 0.0f64);
    for (w, p) in found {
        let (j, d) = expected
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, (_, q))| (j, point_distance(p, q)))
            .min_by(|a, b| a.1.total_cmp(&b.1))?;
        used[j] = true;
        dp = dp.max(d);
        dw = dw.max((w - expected[j].0).norm());
    }
    Some((dp, dw))
}

pub fn sorted_re(values: impl IntoIterator<Item = Scalar>) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().map(|z| z.re).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// One random complete functional checked by both extension criteria.
#[derive(Debug)]
pub struct CriteriaCase {
    pub label: String,
    pub flat: bool,
    pub commutator: f64,
}

/// Builds `Λ` on `B'⁺·B⁺` for a random shape (`k ≤ 3`, `n_i ≤ 3`), a
/// basis of size `2 ≤ r ≤ 5` made of 1 and variables, and one of three
/// kinds of data: `r` points, more than `r` points, or random moments.
pub fn criteria_case(seed: u64) -> CriteriaCase {
    use rand::Rng;
    use std::collections::BTreeMap;
    use tdec::algebra::{Monomial, MomentFunctional};
    use tdec::eigen::multiplication_matrix;
    use tdec::extension::{commutator_residual, flat_extension_check};
    use tdec::moment::{basis_plus, MonomialBasis};

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = loop {
        let k = rng.random_range(1..=3);
        let dims: Vec<usize> = (0..k).map(|_| rng.random_range(1..=3)).collect();
        if dims.iter().sum::<usize>() >= 2 {
            break Shape::new(dims, vec![4; k]).unwrap();
        }
    };
    let vars = shape.vars();
    let r = rng.random_range(2..=(vars.len() + 1).min(5));
    let cols: Vec<Monomial> = std::iter::once(shape.one())
        .chain(vars.iter().take(r - 1).map(|&v| shape.var(v)))
        .collect();
    let rows: Vec<Monomial> = if rng.random_bool(0.5) {
        cols.clone()
    } else {
        std::iter::once(shape.one())
            .chain(vars.iter().rev().take(r - 1).map(|&v| shape.var(v)))
            .collect()
    };
    let b = MonomialBasis::new(&shape, cols).unwrap();
    let bp = MonomialBasis::new(&shape, rows).unwrap();

    let kind = seed % 3;
    let points = match kind {
        0 => r,
        1 => r + rng.random_range(1..=2),
        _ => 0,
    };
    let terms = synth_terms(&shape, points, Field::Real, &mut rng);
    let mut lambda = MomentFunctional::new(shape.clone());
    let mut random: BTreeMap<Monomial, f64> = BTreeMap::new();
    for p in basis_plus(&bp).iter() {
        for q in basis_plus(&b).iter() {
            let m = p.mul(q).unwrap();
            let value = if kind == 2 {
                c(*random.entry(m.clone()).or_insert_with(|| rng.random_range(-1.0..1.0)))
            } else {
                terms.iter().map(|(w, z)| w * m.eval(z)).sum()
            };
            lambda.insert_known(m, value);
        }
    }
    let flat = flat_extension_check(&lambda, &b, &bp, 1e-8).unwrap();
    let ms: Vec<_> = vars
        .iter()
        .map(|&v| multiplication_matrix(&lambda, &b, &bp, v).unwrap())
        .collect();
    let kinds = ["r points", "more points", "random moments"];
    CriteriaCase {
        label: format!("{:?} r={r} {}", shape.dims(), kinds[kind as usize]),
        flat,
        commutator: commutator_residual(&ms),
    }
}

/// `(U₁,…,U_k)·C` for a random core of size `ranks` and random factors,
/// as a multilinear tensor with full dimensions `full`.
pub fn tucker_tensor(full: &[usize], ranks: &[usize], seed: u64) -> Polynomial {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || c(rng.random_range(-1.0..1.0));
    let core: Vec<Scalar> = (0..ranks.iter().product::<usize>()).map(|_| draw()).collect();
    let factors: Vec<Vec<Scalar>> = full
        .iter()
        .zip(ranks)
        .map(|(&n, &r)| (0..n * r).map(|_| draw()).collect())
        .collect();
    let k = full.len();
    let mut data = vec![c(0.0); full.iter().product()];
    let mut idx = vec![0usize; k];
    for (pos, value) in data.iter_mut().enumerate() {
        let mut rest = pos;
        for i in (0..k).rev() {
            idx[i] = rest % full[i];
            rest /= full[i];
        }
        let mut acc = c(0.0);
        for (cpos, cv) in core.iter().enumerate() {
            let mut prod = *cv;
            let mut crest = cpos;
            for i in (0..k).rev() {
                let j = crest % ranks[i];
                crest /= ranks[i];
                prod *= factors[i][idx[i] * ranks[i] + j];
            }
            acc += prod;
        }
        *value = acc;
    }
    let shape = Shape::multilinear(full.iter().map(|n| n - 1).collect()).unwrap();
    tdec::decompose::from_dense(&shape, &data).unwrap()
}

/// Shapes `(dims, degrees)` with the largest rank used in round trips:
/// below the expected rank and within the reach of one flattening.
pub const ROUND_TRIP_SHAPES: &[(&[usize], &[u32], usize)] = &[
    (&[2], &[2], 1),
    (&[1, 1, 1], &[1, 1, 1], 1),
    (&[2, 3], &[2, 1], 3),
    (&[3, 3], &[2, 1], 4),
    (&[2, 2], &[2, 2], 4),
    (&[3, 3], &[2, 2], 6),
    (&[2, 2, 2], &[1, 1, 1], 3),
    (&[3, 3, 3], &[1, 1, 1], 4),
    (&[2, 3, 3], &[1, 1, 1], 4),
    (&[1, 2, 3], &[2, 1, 1], 4),
    (&[2, 2, 3], &[1, 1, 2], 6),
    (&[3, 3, 3], &[2, 1, 1], 6),
    (&[2, 2, 2], &[2, 2, 2], 6),
];

/// Every `(shape, r)` of the round-trip family, `r` from 1 to the cap.
pub fn round_trip_cases() -> Vec<(Shape, usize)> {
    ROUND_TRIP_SHAPES
        .iter()
        .flat_map(|&(dims, degrees, top)| {
            let shape = Shape::new(dims.to_vec(), degrees.to_vec()).unwrap();
            (1..=top).map(move |r| (shape.clone(), r))
        })
        .collect()
}
