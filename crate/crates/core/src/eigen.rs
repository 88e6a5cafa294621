//! Multiplication matrices, their common eigenvectors, and the recovery of
//! points and weights from them.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{MomentFunctional, Monomial, Point, Polynomial, Scalar, Var};
use crate::error::{Error, Result};
use crate::extension::ExtensionResult;
use crate::linalg::{condition_number, eigen, lstsq, numerical_rank, solve, CMatrix, CVector};
use crate::moment::{build_moment_functional, enumerate_monomials, hankel, shifted_hankel, MonomialBasis};

/// Commuting multiplication matrices over a basis `B`; column `j` of `M_v`
/// holds the coordinates of `x_v b_j`.
#[derive(Clone, Debug)]
pub struct MultiplicationFamily {
    pub basis: MonomialBasis,
    pub matrices: BTreeMap<Var, CMatrix>,
}

impl MultiplicationFamily {
    pub fn from_extension(ext: &ExtensionResult) -> Self {
        MultiplicationFamily {
            basis: ext.cols.clone(),
            matrices: ext.multiplication_matrices(),
        }
    }

    pub fn commutator_residual(&self) -> f64 {
        let ms: Vec<CMatrix> = self.matrices.values().cloned().collect();
        crate::extension::commutator_residual(&ms)
    }
}

/// `M_v = (H^{B',B})⁻¹ H^{B',B}_{x_v ⋆ Λ}`.
pub fn multiplication_matrix(
    lambda: &MomentFunctional,
    b: &MonomialBasis,
    bp: &MonomialBasis,
    v: Var,
) -> Result<CMatrix> {
    let h = hankel(lambda, bp, b)?.to_matrix()?;
    let hv = shifted_hankel(lambda, v, bp, b)?.to_matrix()?;
    solve(&h, &hv, 1e12)
}

#[derive(Clone, Debug)]
pub struct RootSet {
    pub points: Vec<Point>,
    /// Evaluations of `B` at each point, normalized on the monomial 1.
    pub eigvecs: Vec<CVector>,
    /// Eigenvalue of every available `M_vᵀ` on each eigenvector.
    pub eigenvalues: Vec<BTreeMap<Var, Scalar>>,
    /// Variables whose coordinates have been filled in `points`.
    pub known: BTreeSet<Var>,
    pub simple: bool,
}

impl RootSet {
    pub fn len(&self) -> usize {
        self.eigvecs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigvecs.is_empty()
    }

    pub fn missing(&self) -> Vec<Var> {
        let shape = self.points.first().map(|p| p.coords.iter().map(Vec::len).collect::<Vec<_>>());
        let Some(dims) = shape else { return Vec::new() };
        let mut out = Vec::new();
        for (g, &n) in dims.iter().enumerate() {
            for index in 0..n {
                let v = Var { group: g, index };
                if !self.known.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    /// Joint eigenvalue tuples closer than `tol_cluster·(1 + max|λ|)` in
    /// every coordinate are treated as equal.
    pub tol_cluster: f64,
    /// Relative eigen-residual `‖M_vᵀ w − λ_v w‖` above which a vector is
    /// not a common eigenvector.
    pub tol_eigen: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol_cluster: 1e-6,
            tol_eigen: 1e-6,
        }
    }
}

pub fn joint_eigenvectors(family: &MultiplicationFamily, seed: u64) -> Result<RootSet> {
    joint_eigenvectors_with(family, seed, &EigenOptions::default())
}

pub fn joint_eigenvectors_with(
    family: &MultiplicationFamily,
    seed: u64,
    opts: &EigenOptions,
) -> Result<RootSet> {
    let b = &family.basis;
    let r = b.len();
    let shape = b.shape();
    let one = b
        .index_of(&shape.one())
        .ok_or_else(|| Error::InvalidShape("basis without 1".into()))?;
    if family.matrices.is_empty() && r > 1 {
        return Err(Error::Unsupported("no multiplication matrix available".into()));
    }
    let transposed: Vec<(Var, CMatrix)> =
        family.matrices.iter().map(|(v, m)| (*v, m.transpose())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut decomposition = None;
    for attempt in 0..2 {
        let mut combo = CMatrix::zeros(r, r);
        for (_, mt) in &transposed {
            let t: f64 = rng.random_range(-1.0..1.0);
            combo += mt * Scalar::new(t, 0.0);
        }
        let e = eigen(&combo);
        let scale = e.values.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let mut gap = f64::INFINITY;
        for i in 0..r {
            for j in i + 1..r {
                gap = gap.min((e.values[i] - e.values[j]).norm() / scale);
            }
        }
        let separated = gap >= 1e-10;
        decomposition = Some(e);
        if separated {
            break;
        }
        log::debug!("eigenvalue gap {gap:e} on attempt {attempt}, redrawing the combination");
    }
    let e = decomposition.expect("at least one attempt");

    let mut simple = condition_number(&e.vectors) < 1e12;
    let mut eigvecs = Vec::with_capacity(r);
    let mut eigenvalues = Vec::with_capacity(r);
    for k in 0..r {
        let mut w: CVector = e.vectors.column(k).into_owned();
        let lead = w[one];
        if lead.norm() <= 1e-12 * w.norm() {
            simple = false;
        } else {
            w /= lead;
        }
        let wn = w.norm_squared();
        let mut vals = BTreeMap::new();
        for (v, mt) in &transposed {
            let mw = mt * &w;
            let lam = w.dotc(&mw) / Scalar::new(wn, 0.0);
            let resid = (&mw - &w * lam).norm() / (mt.norm() * wn.sqrt()).max(f64::MIN_POSITIVE);
            if resid > opts.tol_eigen {
                simple = false;
            }
            vals.insert(*v, lam);
        }
        eigvecs.push(w);
        eigenvalues.push(vals);
    }
    // distinct joint eigenvalue tuples; without matrices (r = 1) trivially simple
    for i in 0..r {
        for j in i + 1..r {
            let same = eigenvalues[i].iter().all(|(v, a)| {
                let bv = eigenvalues[j][v];
                (a - bv).norm() <= opts.tol_cluster * (1.0 + a.norm().max(bv.norm()))
            });
            if same {
                simple = false;
            }
        }
    }
    Ok(RootSet {
        points: vec![Point::origin(shape); r],
        eigvecs,
        eigenvalues,
        known: BTreeSet::new(),
        simple,
    })
}

/// Fills coordinates from eigenvector entries (variables in `B`) or from
/// eigenvalues (variables with a multiplication matrix).
pub fn read_coordinates(
    roots: &RootSet,
    b: &MonomialBasis,
    family: &MultiplicationFamily,
) -> RootSet {
    let mut out = roots.clone();
    for v in b.shape().vars() {
        let xv = b.shape().var(v);
        if let Some(j) = b.index_of(&xv) {
            for (p, w) in out.points.iter_mut().zip(&roots.eigvecs) {
                p.set_coord(v, w[j]);
            }
            out.known.insert(v);
        } else if family.matrices.contains_key(&v) {
            for (p, vals) in out.points.iter_mut().zip(&roots.eigenvalues) {
                p.set_coord(v, vals[&v]);
            }
            out.known.insert(v);
        }
    }
    out
}

/// Solves `Λ(x_v q) = Σ_i γ_i ζ_i^q ζ_{i,v}` for the missing coordinates
/// `ζ_{i,v}`, over the monomials `q` built from already recovered
/// variables. With `q` ranging over `B` this is `H^{B,B} X = H^{B,{x_v}}`.
pub fn recover_missing_coordinates(
    lambda: &MomentFunctional,
    roots: &RootSet,
    weights: &[Scalar],
    b: &MonomialBasis,
    missing: &[Var],
) -> Result<RootSet> {
    let shape = lambda.shape();
    let r = roots.len();
    if weights.len() != r {
        return Err(Error::ShapeMismatch("one weight per root".into()));
    }
    let mut out = roots.clone();
    let candidates = enumerate_monomials(shape, shape.degrees());
    for &v in missing {
        let xv = shape.var(v);
        let mut rows: Vec<Vec<Scalar>> = Vec::new();
        let mut rhs: Vec<Scalar> = Vec::new();
        // rows from B first so the basis block leads the system
        let ordered = b.iter().chain(candidates.iter().filter(|q| !b.contains(q)));
        for q in ordered {
            if !q.support().all(|u| out.known.contains(&u)) {
                continue;
            }
            let Some(val) = lambda.known(&q.mul_unchecked(&xv)) else { continue };
            rows.push(out.points.iter().map(|p| q.eval(p)).collect());
            rhs.push(val);
        }
        let e = CMatrix::from_fn(rows.len(), r, |i, j| rows[i][j] * weights[j]);
        if rows.len() < r || numerical_rank(&e, 1e-10) < r {
            return Err(Error::MissingCoordinate(v.to_string()));
        }
        let (x, _) = lstsq(&e, &CMatrix::from_column_slice(rhs.len(), 1, &rhs), 1e-12);
        for (i, p) in out.points.iter_mut().enumerate() {
            p.set_coord(v, x[(i, 0)]);
        }
        out.known.insert(v);
    }
    Ok(out)
}

/// Least squares `T_α = Σ_i γ_i ∏ C(δ,α) ζ_i^α` over every coefficient.
pub fn solve_weights(t: &Polynomial, points: &[Point]) -> Result<Vec<Scalar>> {
    let lambda = build_moment_functional(t)?;
    let all: BTreeSet<Var> = t.shape().vars().into_iter().collect();
    solve_weights_on(&lambda, points, &all).map(|(w, _)| w)
}

/// Weights from the moments whose monomials only involve `vars`; returns
/// the weights and the relative residual of the system.
pub fn solve_weights_on(
    lambda: &MomentFunctional,
    points: &[Point],
    vars: &BTreeSet<Var>,
) -> Result<(Vec<Scalar>, f64)> {
    let shape = lambda.shape();
    let r = points.len();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for m in enumerate_monomials(shape, shape.degrees()) {
        if !m.support().all(|u| vars.contains(&u)) {
            continue;
        }
        let Some(val) = lambda.known(&m) else { continue };
        rows.push(points.iter().map(|p| m.eval(p)).collect::<Vec<_>>());
        rhs.push(val);
    }
    let a = CMatrix::from_fn(rows.len(), r, |i, j| rows[i][j]);
    let rank = numerical_rank(&a, 1e-12);
    if rank < r {
        return Err(Error::RankDeficientSystem { rank, expected: r });
    }
    let (x, resid) = lstsq(&a, &CMatrix::from_column_slice(rhs.len(), 1, &rhs), 1e-14);
    Ok((x.column(0).iter().copied().collect(), resid))
}

/// Checks `w[m1·m2] = w[m1]·w[m2]` on all triples inside `B`; returns the
/// worst relative deviation.
pub fn evaluation_defect(b: &MonomialBasis, w: &CVector) -> f64 {
    let mut worst = 0.0f64;
    let monos: Vec<&Monomial> = b.iter().collect();
    for (i, m1) in monos.iter().enumerate() {
        for (j, m2) in monos.iter().enumerate() {
            if let Some(k) = b.index_of(&m1.mul_unchecked(m2)) {
                let lhs = w[k];
                let rhs = w[i] * w[j];
                let d = (lhs - rhs).norm() / (1.0 + lhs.norm().max(rhs.norm()));
                worst = worst.max(d);
            }
        }
    }
    worst
}
