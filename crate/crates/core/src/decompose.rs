//! The rank loop: rank bounds, optional Tucker compression, extension and
//! eigenvector recovery at increasing rank, and verification by expansion.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{Monomial, Point, Polynomial, Scalar, Shape, Var, ONE, ZERO};
use crate::eigen::{
    joint_eigenvectors_with, read_coordinates, recover_missing_coordinates, solve_weights_on,
    EigenOptions, MultiplicationFamily,
};
use crate::error::{Error, Result};
use crate::extension::{propagate_with, ExtensionOptions, ExtensionStatus};
use crate::linalg::{condition_number, numerical_rank, CMatrix};
use crate::moment::{
    build_moment_functional, candidate_bases, enumerate_monomials, known_block, BasisSearch,
};

/// Per-group invertible matrices `G_i` acting on homogeneous coordinates;
/// the decomposed tensor was `T(G y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateChange {
    pub matrices: Vec<CMatrix>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub shape: Shape,
    pub terms: Vec<(Scalar, Point)>,
    pub residual: f64,
    pub coordinate_change: Option<CoordinateChange>,
    /// Dimensions `n_i` of the compressed tensor when Tucker compression ran.
    pub reduced_dims: Option<Vec<usize>>,
}

impl Decomposition {
    pub fn new(shape: Shape, terms: Vec<(Scalar, Point)>) -> Self {
        Decomposition {
            shape,
            terms,
            residual: 0.0,
            coordinate_change: None,
            reduced_dims: None,
        }
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    /// `Σ γ_i ∏_j (1 + Σ_l ζ_{i,j,l} x_{j,l})^{δ_j}`.
    pub fn to_polynomial(&self) -> Result<Polynomial> {
        let mut acc = Polynomial::zero(self.shape.clone());
        for (w, p) in &self.terms {
            acc = acc.add(&Polynomial::rank_one(&self.shape, *w, p)?)?;
        }
        Ok(acc)
    }
}

/// `‖T − Σ γ_i ℓ_i‖ / ‖T‖` over the coefficients (absolute when `T = 0`).
pub fn verify(t: &Polynomial, d: &Decomposition) -> Result<f64> {
    if t.shape() != &d.shape {
        return Err(Error::ShapeMismatch("tensor and decomposition".into()));
    }
    let diff = t.sub(&d.to_polynomial()?)?.norm();
    let n = t.norm();
    Ok(if n > 0.0 { diff / n } else { diff })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankBounds {
    pub lower: usize,
    pub upper: usize,
    pub expected: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kruskal: Option<usize>,
}

pub fn rank_bounds(t: &Polynomial, tol: f64) -> Result<RankBounds> {
    let shape = t.shape();
    let ambient = shape.ambient_size()? as usize;
    Ok(RankBounds {
        lower: rank_lower_bound_with(t, tol)?,
        upper: atkinson_bound(shape).unwrap_or(ambient),
        expected: expected_rank(shape)?,
        kruskal: kruskal_bound(shape),
    })
}

pub fn rank_lower_bound(t: &Polynomial) -> Result<usize> {
    rank_lower_bound_with(t, 1e-8)
}

/// Largest numerical rank of the flattenings "group `i` vs. the others";
/// for a single group, the most square catalecticant.
pub fn rank_lower_bound_with(t: &Polynomial, tol: f64) -> Result<usize> {
    let lambda = build_moment_functional(t)?;
    let shape = t.shape();
    let d = shape.degrees();
    let splits: Vec<(Vec<u32>, Vec<u32>)> = if shape.k() == 1 {
        vec![(vec![d[0] / 2], vec![d[0] - d[0] / 2])]
    } else {
        (0..shape.k())
            .map(|i| {
                let rows = (0..shape.k()).map(|j| if j == i { d[j] } else { 0 }).collect();
                let cols = (0..shape.k()).map(|j| if j == i { 0 } else { d[j] }).collect();
                (rows, cols)
            })
            .collect()
    };
    let mut best = 0;
    for (p, q) in splits {
        let rows = enumerate_monomials(shape, &p);
        let cols = enumerate_monomials(shape, &q);
        let f = known_block(&lambda, &rows, &cols).expect("moments known on R_δ");
        best = best.max(numerical_rank(&f, tol));
    }
    Ok(best)
}

/// `n_1 + n_2 ⌊n_3/2⌋` for full dimensions sorted increasingly.
pub fn rank_upper_bound(full_dims: &[usize]) -> Result<usize> {
    if full_dims.len() != 3 {
        return Err(Error::Unsupported("upper bound needs three modes".into()));
    }
    let mut d = full_dims.to_vec();
    d.sort_unstable();
    Ok(d[0] + d[1] * (d[2] / 2))
}

fn atkinson_bound(shape: &Shape) -> Option<usize> {
    (shape.k() == 3 && shape.is_multilinear()).then(|| {
        rank_upper_bound(&shape.full_dims()).expect("three modes")
    })
}

/// `⌈dim S / (1 + Σ n_i)⌉`: the ambient dimension over the dimension of
/// the affine cone of rank-one tensors.
pub fn expected_rank(shape: &Shape) -> Result<usize> {
    let ambient = shape.ambient_size()? as usize;
    let cone = 1 + shape.dims().iter().sum::<usize>();
    Ok(ambient.div_ceil(cone))
}

/// `⌊Σ (n_i + 1) / 2⌋ − 1` for multilinear tensors of order at least 3.
pub fn kruskal_bound(shape: &Shape) -> Option<usize> {
    (shape.k() >= 3 && shape.is_multilinear()).then(|| kruskal_bound_full(&shape.full_dims()))
}

/// Kruskal bound from full dimensions (generic Kruskal ranks).
pub fn kruskal_bound_full(full_dims: &[usize]) -> usize {
    (full_dims.iter().sum::<usize>() / 2).saturating_sub(1)
}

/// Dense homogeneous array of a multilinear tensor, row-major over the
/// full dimensions; index 0 of each mode is the homogenizing coordinate.
pub fn to_dense(t: &Polynomial) -> Result<(Vec<usize>, Vec<Scalar>)> {
    let shape = t.shape();
    if !shape.is_multilinear() {
        return Err(Error::Unsupported("dense array needs a multilinear tensor".into()));
    }
    let dims = shape.full_dims();
    let mut data = vec![ZERO; dims.iter().product()];
    for (m, c) in t.terms() {
        data[dense_index(m, &dims)] = *c;
    }
    Ok((dims, data))
}

fn dense_index(m: &Monomial, dims: &[usize]) -> usize {
    m.exps().iter().zip(dims).fold(0, |acc, (e, &n)| {
        let i = e.iter().position(|&x| x == 1).map_or(0, |l| l + 1);
        acc * n + i
    })
}

pub fn from_dense(shape: &Shape, data: &[Scalar]) -> Result<Polynomial> {
    let dims = shape.full_dims();
    if data.len() != dims.iter().product::<usize>() || !shape.is_multilinear() {
        return Err(Error::ShapeMismatch("dense array does not match shape".into()));
    }
    let mut p = Polynomial::zero(shape.clone());
    for m in enumerate_monomials(shape, shape.degrees()) {
        p.add_term(m.clone(), data[dense_index(&m, &dims)]);
    }
    Ok(p)
}

fn unfold(data: &[Scalar], dims: &[usize], mode: usize) -> CMatrix {
    let n = dims[mode];
    let inner: usize = dims[mode + 1..].iter().product();
    let cols = data.len() / n;
    CMatrix::from_fn(n, cols, |i, j| {
        let (outer, rest) = (j / inner, j % inner);
        data[(outer * n + i) * inner + rest]
    })
}

/// `A ×_mode U`: replaces mode `mode` (size `U.ncols()`) by `U.nrows()`.
fn mode_product(data: &[Scalar], dims: &[usize], mode: usize, u: &CMatrix) -> (Vec<usize>, Vec<Scalar>) {
    let n = dims[mode];
    assert_eq!(u.ncols(), n);
    let m = u.nrows();
    let inner: usize = dims[mode + 1..].iter().product();
    let outer: usize = dims[..mode].iter().product();
    let mut out = vec![ZERO; outer * m * inner];
    for o in 0..outer {
        for j in 0..m {
            for i in 0..n {
                let c = u[(j, i)];
                if c == ZERO {
                    continue;
                }
                let src = (o * n + i) * inner;
                let dst = (o * m + j) * inner;
                for r in 0..inner {
                    out[dst + r] += c * data[src + r];
                }
            }
        }
    }
    let mut nd = dims.to_vec();
    nd[mode] = m;
    (nd, out)
}

/// Numerical ranks of the mode unfoldings over the full dimensions.
pub fn multilinear_rank(t: &Polynomial, tol: f64) -> Result<Vec<usize>> {
    let (dims, data) = to_dense(t)?;
    Ok((0..dims.len()).map(|i| numerical_rank(&unfold(&data, &dims, i), tol)).collect())
}

#[derive(Clone, Debug)]
pub struct Tucker {
    pub core: Polynomial,
    /// `U^(i)` with orthonormal columns, `(n_i+1) × target_i`.
    pub factors: Vec<CMatrix>,
    /// `‖T − (U^(1),…,U^(k))·C‖ / ‖T‖`.
    pub error: f64,
}

pub fn hosvd_reduce(t: &Polynomial, target: &[usize]) -> Result<Tucker> {
    hosvd_reduce_with(t, target, 0)
}

/// Truncated HOSVD, refined by `max_iter` alternating (HOOI) passes.
pub fn hosvd_reduce_with(t: &Polynomial, target: &[usize], max_iter: usize) -> Result<Tucker> {
    let (dims, data) = to_dense(t)?;
    if target.len() != dims.len() || target.iter().zip(&dims).any(|(&r, &n)| r < 1 || r > n) {
        return Err(Error::InvalidShape(format!("Tucker target {target:?} for dims {dims:?}")));
    }
    if target.iter().any(|&r| r < 2) {
        return Err(Error::Unsupported(
            "a core dimension of 1 has no affine coordinates".into(),
        ));
    }
    let leading = |a: &CMatrix, r: usize| -> CMatrix {
        let svd = a.clone().svd(true, false);
        let u = svd.u.expect("requested left vectors");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        CMatrix::from_fn(a.nrows(), r, |i, j| u[(i, order[j])])
    };
    let mut factors: Vec<CMatrix> = (0..dims.len())
        .map(|i| leading(&unfold(&data, &dims, i), target[i]))
        .collect();
    for _ in 0..max_iter {
        for i in 0..dims.len() {
            let (mut d, mut x) = (dims.clone(), data.clone());
            for j in 0..dims.len() {
                if j != i {
                    (d, x) = mode_product(&x, &d, j, &factors[j].adjoint());
                }
            }
            factors[i] = leading(&unfold(&x, &d, i), target[i]);
        }
    }
    let (mut cd, mut core) = (dims.clone(), data.clone());
    for (i, u) in factors.iter().enumerate() {
        (cd, core) = mode_product(&core, &cd, i, &u.adjoint());
    }
    let (mut rd, mut rec) = (cd.clone(), core.clone());
    for (i, u) in factors.iter().enumerate() {
        (rd, rec) = mode_product(&rec, &rd, i, u);
    }
    debug_assert_eq!(rd, dims);
    let norm: f64 = data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let diff: f64 = data.iter().zip(&rec).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let core_shape = Shape::multilinear(cd.iter().map(|&n| n - 1).collect())?;
    Ok(Tucker {
        core: from_dense(&core_shape, &core)?,
        factors,
        error: if norm > 0.0 { diff / norm } else { diff },
    })
}

/// Lifts a decomposition through per-group linear maps of homogeneous
/// coordinates: `ℓ ↦ U ℓ`, then dehomogenizes. The result has shape
/// `shape` and its residual is measured against `t` when given.
fn transform_terms(
    d: &Decomposition,
    maps: &[CMatrix],
    shape: &Shape,
) -> Result<Vec<(Scalar, Point)>> {
    let mut out = Vec::with_capacity(d.terms.len());
    for (idx, (w, p)) in d.terms.iter().enumerate() {
        let mut weight = *w;
        let mut coords = Vec::with_capacity(shape.k());
        for (g, u) in maps.iter().enumerate() {
            let mut h = Vec::with_capacity(p.coords[g].len() + 1);
            h.push(ONE);
            h.extend(p.coords[g].iter().copied());
            let l = u * crate::linalg::CVector::from_vec(h);
            let l0 = l[0];
            if l0.norm() <= 1e-12 * l.norm() {
                return Err(Error::NonAffineTerm(idx));
            }
            weight *= l0.powu(shape.degrees()[g]);
            coords.push(l.iter().skip(1).map(|x| x / l0).collect());
        }
        out.push((weight, Point::new(shape, coords)?));
    }
    Ok(out)
}

/// Lifts a decomposition of the Tucker core back through the factors and
/// recomputes the residual against the original tensor `t`.
pub fn map_back(core_dec: &Decomposition, factors: &[CMatrix], t: &Polynomial) -> Result<Decomposition> {
    if factors.len() != core_dec.shape.k() {
        return Err(Error::ShapeMismatch("one factor per mode".into()));
    }
    let terms = transform_terms(core_dec, factors, t.shape())?;
    let mut out = Decomposition {
        shape: t.shape().clone(),
        terms,
        residual: 0.0,
        coordinate_change: core_dec.coordinate_change.clone(),
        reduced_dims: core_dec.reduced_dims.clone(),
    };
    out.residual = verify(t, &out)?;
    Ok(out)
}

/// `T(G y)` for per-group homogeneous substitutions `x = G_i y`.
pub fn change_coordinates(t: &Polynomial, change: &CoordinateChange) -> Result<Polynomial> {
    let shape = t.shape();
    // affine form of the homogeneous coordinate x_{i,j} after substitution
    let linear: Vec<Vec<Polynomial>> = change
        .matrices
        .iter()
        .enumerate()
        .map(|(g, m)| {
            (0..m.nrows())
                .map(|j| {
                    let mut p = Polynomial::zero(shape.clone());
                    p.add_term(shape.one(), m[(j, 0)]);
                    for l in 1..m.ncols() {
                        p.add_term(shape.var(Var { group: g, index: l - 1 }), m[(j, l)]);
                    }
                    p
                })
                .collect()
        })
        .collect();
    let mut out = Polynomial::zero(shape.clone());
    for (m, c) in t.terms() {
        let mut term = Polynomial::one(shape.clone()).scale(*c);
        for (g, e) in m.exps().iter().enumerate() {
            let e0 = shape.degrees()[g] - e.iter().sum::<u32>();
            for (j, &power) in std::iter::once(&e0).chain(e.iter()).enumerate() {
                for _ in 0..power {
                    term = term.mul(&linear[g][j])?;
                }
            }
        }
        out = out.add(&term)?;
    }
    Ok(out)
}

fn random_change(shape: &Shape, rng: &mut ChaCha8Rng) -> CoordinateChange {
    let matrices = shape
        .full_dims()
        .iter()
        .map(|&n| loop {
            let m = CMatrix::from_fn(n, n, |i, j| {
                let x: f64 = rng.random_range(-1.0..1.0);
                Scalar::new(if i == j { 1.0 + x.abs() } else { 0.5 * x }, 0.0)
            });
            if condition_number(&m) < 1e3 {
                break m;
            }
        })
        .collect();
    CoordinateChange { matrices }
}

#[derive(Clone, Debug)]
pub struct DecomposeOptions {
    pub max_rank: Option<usize>,
    pub tol_rank: f64,
    pub tol_resid: f64,
    pub seed: u64,
    pub reduce: bool,
    /// Basis pairs tried per rank before giving up on it.
    pub max_candidates: usize,
    /// Random coordinate changes tried per rank after the direct attempt.
    pub max_retries: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            max_rank: None,
            tol_rank: 1e-8,
            tol_resid: 1e-6,
            seed: 0,
            reduce: false,
            max_candidates: 8,
            max_retries: 3,
        }
    }
}

/// `min(upper bound when defined, ⌈ambient/2⌉, 30)`.
pub fn default_max_rank(shape: &Shape) -> Result<usize> {
    let ambient = shape.ambient_size()? as usize;
    let mut m = ambient.div_ceil(2).min(30);
    if let Some(a) = atkinson_bound(shape) {
        m = m.min(a);
    }
    Ok(m.max(1))
}

pub fn decompose(t: &Polynomial, opts: &DecomposeOptions) -> Result<Decomposition> {
    t.check_within_degree()?;
    if t.norm() == 0.0 {
        return Err(Error::ZeroTensor);
    }
    if opts.reduce {
        return decompose_reduced(t, opts);
    }
    let shape = t.shape();
    let lower = rank_lower_bound_with(t, opts.tol_rank)?.max(1);
    let max_rank = opts.max_rank.unwrap_or(default_max_rank(shape)?);
    let lambda = build_moment_functional(t)?;
    let mut best = f64::INFINITY;
    let mut diagnostics = String::from("no rank tried");
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for r in lower..=max_rank {
        log::info!("trying rank {r}");
        match attempt(t, &lambda, r, opts, opts.seed) {
            Attempt::Found(d) => return Ok(d),
            Attempt::Impossible(why) => {
                diagnostics = format!("rank {r}: {why}");
                log::info!("{diagnostics}");
                continue;
            }
            Attempt::Failed(why, res) => {
                best = best.min(res);
                diagnostics = format!("rank {r}: {why}");
                log::info!("{diagnostics}");
            }
        }
        for retry in 0..opts.max_retries {
            let change = random_change(shape, &mut rng);
            let t2 = change_coordinates(t, &change)?;
            let lambda2 = build_moment_functional(&t2)?;
            let seed = opts.seed.wrapping_add(retry as u64 + 1);
            match attempt(&t2, &lambda2, r, opts, seed) {
                Attempt::Found(d2) => {
                    let inverse: Vec<CMatrix> = change
                        .matrices
                        .iter()
                        .map(|g| g.transpose().try_inverse().expect("well-conditioned change"))
                        .collect();
                    let terms = match transform_terms(&d2, &inverse, shape) {
                        Ok(terms) => terms,
                        Err(e) => {
                            diagnostics = format!("rank {r}, change {retry}: {e}");
                            continue;
                        }
                    };
                    let mut d = Decomposition {
                        shape: shape.clone(),
                        terms,
                        residual: 0.0,
                        coordinate_change: Some(change),
                        reduced_dims: None,
                    };
                    d.residual = verify(t, &d)?;
                    if d.residual <= opts.tol_resid {
                        return Ok(d);
                    }
                    best = best.min(d.residual);
                }
                Attempt::Impossible(why) | Attempt::Failed(why, _) => {
                    diagnostics = format!("rank {r}, change {retry}: {why}");
                    log::info!("{diagnostics}");
                }
            }
        }
    }
    Err(Error::NotFound {
        max_rank,
        best_residual: best,
        diagnostics,
    })
}

fn decompose_reduced(t: &Polynomial, opts: &DecomposeOptions) -> Result<Decomposition> {
    let shape = t.shape();
    if !shape.is_multilinear() {
        return Err(Error::Unsupported("reduction needs a multilinear tensor".into()));
    }
    let ranks = multilinear_rank(t, opts.tol_rank)?;
    let target: Vec<usize> = ranks
        .iter()
        .zip(shape.full_dims())
        .map(|(&r, n)| r.max(2).min(n))
        .collect();
    let inner = DecomposeOptions {
        reduce: false,
        ..opts.clone()
    };
    if target == shape.full_dims() {
        return decompose(t, &inner);
    }
    log::info!("compressing {:?} to {target:?}", shape.full_dims());
    let tucker = hosvd_reduce_with(t, &target, 5)?;
    let core_dec = decompose(&tucker.core, &inner)?;
    let mut d = map_back(&core_dec, &tucker.factors, t)?;
    d.reduced_dims = Some(target.iter().map(|&n| n - 1).collect());
    if d.residual > opts.tol_resid {
        return Err(Error::NotFound {
            max_rank: opts.max_rank.unwrap_or(core_dec.rank()),
            best_residual: d.residual,
            diagnostics: "decomposition of the compressed tensor does not lift".into(),
        });
    }
    Ok(d)
}

enum Attempt {
    Found(Decomposition),
    /// No rank-`r` extension can exist (a flattening has larger rank, or no
    /// flattening reaches `r`).
    Impossible(String),
    Failed(String, f64),
}

fn attempt(
    t: &Polynomial,
    lambda: &crate::algebra::MomentFunctional,
    r: usize,
    opts: &DecomposeOptions,
    seed: u64,
) -> Attempt {
    let shape = t.shape();
    let search = BasisSearch {
        tol_rank: opts.tol_rank,
        ..BasisSearch::default()
    };
    let scan = candidate_bases(lambda, r, &search);
    if scan.max_flattening_rank > r {
        return Attempt::Impossible(format!("a flattening has rank {}", scan.max_flattening_rank));
    }
    if scan.candidates.is_empty() {
        return if scan.max_flattening_rank < r {
            Attempt::Impossible("no flattening reaches this rank".into())
        } else {
            Attempt::Failed("no well-conditioned basis pair".into(), f64::INFINITY)
        };
    }
    let loose = opts.tol_resid.max(1e-6);
    let ext_opts = ExtensionOptions {
        tol_rank: opts.tol_rank,
        tol_consistency: loose,
        ..ExtensionOptions::default()
    };
    let eig_opts = EigenOptions {
        tol_cluster: 1e-6,
        tol_eigen: loose,
    };
    let all: BTreeSet<Var> = shape.vars().into_iter().collect();
    let mut best = f64::INFINITY;
    let mut why = String::new();
    for cand in scan.candidates.iter().take(opts.max_candidates) {
        let (b, bp) = (&cand.cols, &cand.rows);
        log::debug!("rank {r}: basis {b} rows {bp} (condition {:e})", cand.condition);
        let ext = match propagate_with(lambda, b, bp, &ext_opts) {
            Ok(e) => e,
            Err(e) => {
                why = e.to_string();
                continue;
            }
        };
        if ext.status == ExtensionStatus::Inconsistent {
            why = format!("extension over {b} inconsistent (residual {:e})", ext.consistency_residual);
            continue;
        }
        let family = MultiplicationFamily::from_extension(&ext);
        if family.matrices.is_empty() && r > 1 {
            why = format!("no multiplication matrix over {b}");
            continue;
        }
        let roots = match joint_eigenvectors_with(&family, seed, &eig_opts) {
            Ok(x) => x,
            Err(e) => {
                why = e.to_string();
                continue;
            }
        };
        if !roots.simple {
            why = format!("roots over {b} are not simple");
            continue;
        }
        let mut roots = read_coordinates(&roots, b, &family);
        let missing = roots.missing();
        if !missing.is_empty() {
            let w0 = match solve_weights_on(lambda, &roots.points, &roots.known) {
                Ok((w, _)) => w,
                Err(e) => {
                    why = e.to_string();
                    continue;
                }
            };
            roots = match recover_missing_coordinates(&ext.functional, &roots, &w0, b, &missing) {
                Ok(x) => x,
                Err(e) => {
                    why = e.to_string();
                    continue;
                }
            };
        }
        let weights = match solve_weights_on(lambda, &roots.points, &all) {
            Ok((w, _)) => w,
            Err(e) => {
                why = e.to_string();
                continue;
            }
        };
        let wmax = weights.iter().map(|w| w.norm()).fold(0.0, f64::max);
        if weights.iter().any(|w| w.norm() <= 1e-10 * wmax) {
            why = "a weight vanishes".into();
            continue;
        }
        let mut d = Decomposition::new(shape.clone(), weights.into_iter().zip(roots.points).collect());
        d.residual = match verify(t, &d) {
            Ok(x) => x,
            Err(e) => {
                why = e.to_string();
                continue;
            }
        };
        log::debug!("rank {r}: residual {:e}", d.residual);
        if d.residual <= opts.tol_resid {
            return Attempt::Found(d);
        }
        best = best.min(d.residual);
        why = format!("residual {:e} above tolerance", d.residual);
    }
    Attempt::Failed(why, best)
}
