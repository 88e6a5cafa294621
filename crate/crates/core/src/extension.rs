//! Extension of a partial moment functional to a rank-`r` functional:
//! the flat-extension rank test, the commutation test and the linear
//! propagation of normal forms through commutation syzygies.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{MomentFunctional, Monomial, Scalar, Var, ONE, ZERO};
use crate::error::{Error, Result};
use crate::linalg::{
    condition_number, lstsq, null_space, numerical_rank, singular_values, CMatrix, CVector,
};
use crate::moment::{basis_plus, hankel, HankelMatrix, MonomialBasis};

/// `lead − Σ_j tail_j b_j` lies in the kernel of the Hankel operator.
#[derive(Clone, Debug, PartialEq)]
pub struct BorderRelation {
    pub lead: Monomial,
    pub tail: CVector,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtensionStatus {
    /// Every border monomial has a normal form and the data is consistent.
    Extended,
    /// The known moments leave some border normal forms undetermined.
    RankDeficient,
    /// The linear systems have no solution within tolerance.
    Inconsistent,
}

#[derive(Clone, Debug)]
pub struct ExtensionOptions {
    pub tol_rank: f64,
    /// Relative residual above which the data is declared inconsistent.
    pub tol_consistency: f64,
    pub max_cond: f64,
    /// Shuffles the syzygy equations; the result must not depend on it.
    pub shuffle_seed: Option<u64>,
}

impl Default for ExtensionOptions {
    fn default() -> Self {
        ExtensionOptions {
            tol_rank: 1e-8,
            tol_consistency: 1e-6,
            max_cond: 1e10,
            shuffle_seed: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExtensionResult {
    pub status: ExtensionStatus,
    /// Original moments plus every moment on `B'⁺·B⁺` (and beyond) that the
    /// derived normal forms determine.
    pub functional: MomentFunctional,
    pub relations: Vec<BorderRelation>,
    pub commutator_residual: f64,
    /// Largest relative residual met in the linear solves and in the
    /// reproduction of the known moments.
    pub consistency_residual: f64,
    pub cols: MonomialBasis,
    pub rows: MonomialBasis,
    normal_forms: BTreeMap<Monomial, CVector>,
}

impl ExtensionResult {
    /// Coordinates of the normal form of `m` over `B`, when derived.
    pub fn normal_form(&self, m: &Monomial) -> Option<CVector> {
        if let Some(j) = self.cols.index_of(m) {
            return Some(unit(self.cols.len(), j));
        }
        self.normal_forms.get(m).cloned()
    }

    /// `M_v` (column `j` = normal form of `x_v b_j`) for every variable whose
    /// border products are all resolved.
    pub fn multiplication_matrices(&self) -> BTreeMap<Var, CMatrix> {
        complete_matrices(&self.cols, &self.normal_forms)
    }
}

fn unit(n: usize, j: usize) -> CVector {
    let mut v = CVector::zeros(n);
    v[j] = ONE;
    v
}

fn complete_matrices(
    b: &MonomialBasis,
    nf: &BTreeMap<Monomial, CVector>,
) -> BTreeMap<Var, CMatrix> {
    let r = b.len();
    let mut out = BTreeMap::new();
    for v in b.shape().vars() {
        let mut m = CMatrix::zeros(r, r);
        let mut complete = true;
        for (j, bj) in b.iter().enumerate() {
            let p = bj.times_var(v);
            if let Some(i) = b.index_of(&p) {
                m[(i, j)] = ONE;
            } else if let Some(col) = nf.get(&p) {
                m.set_column(j, col);
            } else {
                complete = false;
                break;
            }
        }
        if complete {
            out.insert(v, m);
        }
    }
    out
}

fn known_hankel(lambda: &MomentFunctional, rows: &MonomialBasis, cols: &MonomialBasis) -> Result<CMatrix> {
    hankel(lambda, rows, cols)?.to_matrix()
}

/// Rank test: `rank H^{B'⁺,B⁺} = |B|` and `H^{B',B}` invertible.
pub fn flat_extension_check(
    lambda: &MomentFunctional,
    b: &MonomialBasis,
    bp: &MonomialBasis,
    tol: f64,
) -> Result<bool> {
    let r = b.len();
    if bp.len() != r {
        return Err(Error::ShapeMismatch("bases of different sizes".into()));
    }
    let h = known_hankel(lambda, bp, b)?;
    let hp = known_hankel(lambda, &basis_plus(bp), &basis_plus(b))?;
    let s_plus = singular_values(&hp);
    let rank_plus = crate::linalg::rank_of(&s_plus, tol);
    // the block must be invertible on the scale of the whole matrix
    let s = singular_values(&h);
    let block_ok = match (s.last(), s_plus.first()) {
        (Some(&lo), Some(&hi)) => hi > 0.0 && lo > tol * hi,
        _ => false,
    };
    Ok(rank_plus == r && block_ok)
}

/// Solves `H^{B',B} X = H^{B',{m}}` for each target.
pub fn known_column_relations(
    lambda: &MomentFunctional,
    b: &MonomialBasis,
    bp: &MonomialBasis,
    targets: &[Monomial],
) -> Result<Vec<BorderRelation>> {
    let h = known_hankel(lambda, bp, b)?;
    let cond = condition_number(&h);
    if !(cond <= 1e12) {
        return Err(Error::Singular(cond));
    }
    let lu = h.lu();
    let mut out = Vec::with_capacity(targets.len());
    for m in targets {
        let mut col = CVector::zeros(bp.len());
        for (i, q) in bp.iter().enumerate() {
            let p = q.mul_unchecked(m);
            col[i] = match lambda.get(&p) {
                Some(v) => v
                    .as_known()
                    .ok_or_else(|| Error::UnresolvedParameter(p.to_string()))?,
                None => return Err(Error::MissingMoment(p.to_string())),
            };
        }
        let tail = lu.solve(&col).ok_or(Error::Singular(cond))?;
        out.push(BorderRelation {
            lead: m.clone(),
            tail,
        });
    }
    Ok(out)
}

/// Max over pairs of `‖M_i M_j − M_j M_i‖_F / max(1, ‖M_i‖‖M_j‖)`.
pub fn commutator_residual(ms: &[CMatrix]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..ms.len() {
        for j in i + 1..ms.len() {
            let c = &ms[i] * &ms[j] - &ms[j] * &ms[i];
            let scale = (ms[i].norm() * ms[j].norm()).max(1.0);
            worst = worst.max(c.norm() / scale);
        }
    }
    worst
}

/// Factorization test on `H⁺ = [[H, G'], [Gᵀ, J]]`: `G' = H W'`,
/// `G = Hᵀ W` and `J = Wᵀ H W'`.
pub fn rank_factor_check(h_plus: &HankelMatrix, r: usize, tol: f64) -> Result<bool> {
    let full = h_plus.to_matrix()?;
    let (nr, nc) = full.shape();
    if r > nr.min(nc) {
        return Err(Error::ShapeMismatch("block larger than the matrix".into()));
    }
    let h = full.view((0, 0), (r, r)).into_owned();
    let cond = condition_number(&h);
    if !(cond <= 1e12) {
        return Err(Error::Singular(cond));
    }
    if nr == r || nc == r {
        return Ok(true);
    }
    let gp = full.view((0, r), (r, nc - r)).into_owned();
    let g_t = full.view((r, 0), (nr - r, r)).into_owned();
    let j = full.view((r, r), (nr - r, nc - r)).into_owned();
    let (wp, res1) = lstsq(&h, &gp, 1e-14);
    let (w, res2) = lstsq(&h.transpose(), &g_t.transpose(), 1e-14);
    let jj = w.transpose() * &h * &wp;
    let scale = j.norm().max(full.norm() * 1e-300);
    let res3 = if scale > 0.0 { (&j - jj).norm() / scale } else { 0.0 };
    Ok(res1 <= tol && res2 <= tol && res3 <= tol)
}

/// Normal forms over `B` for the border `∂B` derived from the known
/// moments: direct solves where enough moments are known, then commutation
/// syzygies `x_v N(m_1) = x_w N(m_2)` for `x_v m_1 = x_w m_2`.
pub fn propagate_commutation(
    lambda: &MomentFunctional,
    b: &MonomialBasis,
    bp: &MonomialBasis,
) -> Result<ExtensionResult> {
    propagate_with(lambda, b, bp, &ExtensionOptions::default())
}

pub fn propagate_with(
    lambda: &MomentFunctional,
    b: &MonomialBasis,
    bp: &MonomialBasis,
    opts: &ExtensionOptions,
) -> Result<ExtensionResult> {
    let shape = lambda.shape();
    let r = b.len();
    if bp.len() != r {
        return Err(Error::ShapeMismatch("bases of different sizes".into()));
    }
    let h = known_hankel(lambda, bp, b)?;
    let cond = condition_number(&h);
    if !(cond <= opts.max_cond) {
        return Err(Error::Singular(cond));
    }
    let vars = shape.vars();
    let border = b.border();
    let mut worst = 0.0f64;

    // rows q with every Λ(q b_j) known
    let qrows: Vec<(Monomial, Vec<Scalar>)> = crate::moment::enumerate_monomials(shape, shape.degrees())
        .into_iter()
        .filter_map(|q| {
            let row: Option<Vec<Scalar>> =
                b.iter().map(|bj| lambda.known(&q.mul_unchecked(bj))).collect();
            row.map(|row| (q, row))
        })
        .collect();
    let hscale = h.norm();

    let mut nf: BTreeMap<Monomial, CVector> = BTreeMap::new();
    let mut direct_targets: BTreeSet<Monomial> = BTreeSet::new();
    for m in &border {
        direct_targets.insert(m.clone());
        for &v in &vars {
            direct_targets.insert(m.times_var(v));
        }
    }
    let mut solvers: HashMap<Vec<usize>, Option<DirectSolver>> = HashMap::new();
    for m in direct_targets {
        if b.contains(&m) || lambda.known(&m).is_none() {
            continue;
        }
        let mut idx = Vec::new();
        let mut rhs = Vec::new();
        for (i, (q, _)) in qrows.iter().enumerate() {
            if let Some(x) = lambda.known(&q.mul_unchecked(&m)) {
                idx.push(i);
                rhs.push(x);
            }
        }
        if idx.len() < r {
            continue;
        }
        let solver = solvers
            .entry(idx.clone())
            .or_insert_with(|| DirectSolver::new(&qrows, &idx, r, opts.tol_rank, hscale));
        let Some(solver) = solver else { continue };
        let rhs = CVector::from_vec(rhs);
        let x = &solver.pinv * &rhs;
        let resid = (&solver.a * &x - &rhs).norm() / rhs.norm().max(hscale * 1e-300).max(f64::MIN_POSITIVE);
        worst = worst.max(if rhs.norm() == 0.0 { 0.0 } else { resid });
        nf.insert(m, x);
    }

    // commutation syzygies, repeated while they resolve new border monomials
    let mut unknown: BTreeSet<Monomial> = border.iter().filter(|m| !nf.contains_key(*m)).cloned().collect();
    let mut rng = opts.shuffle_seed.map(ChaCha8Rng::seed_from_u64);
    while !unknown.is_empty() {
        let ulist: Vec<Monomial> = unknown.iter().cloned().collect();
        let uidx: HashMap<&Monomial, usize> = ulist.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let mut reps: BTreeMap<Monomial, Vec<Affine>> = BTreeMap::new();
        for (m, n) in &nf {
            for &v in &vars {
                let mut e = Affine::new(r, ulist.len());
                let mut ok = true;
                for (j, bj) in b.iter().enumerate() {
                    if n[j] == ZERO {
                        continue;
                    }
                    let p = bj.times_var(v);
                    if let Some(i) = b.index_of(&p) {
                        e.known[i] += n[j];
                    } else if let Some(pn) = nf.get(&p) {
                        e.known.axpy(n[j], pn, ONE);
                    } else if let Some(&u) = uidx.get(&p) {
                        e.coef[u] += n[j];
                    } else {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    reps.entry(m.times_var(v)).or_default().push(e);
                }
            }
        }
        let mut eqs: Vec<Affine> = Vec::new();
        for (l, list) in reps {
            let anchor = if let Some(n) = nf.get(&l) {
                let mut a = Affine::new(r, ulist.len());
                a.known.copy_from(n);
                Some(a)
            } else if let Some(&u) = uidx.get(&l) {
                let mut a = Affine::new(r, ulist.len());
                a.coef[u] = ONE;
                Some(a)
            } else {
                None
            };
            let (anchor, rest) = match anchor {
                Some(a) => (a, &list[..]),
                None => (list[0].clone(), &list[1..]),
            };
            for e in rest {
                eqs.push(e.minus(&anchor));
            }
        }
        if let Some(rng) = rng.as_mut() {
            eqs.shuffle(rng);
        }
        // keep equations that involve an unknown; the others are checks
        let mut rows_c = Vec::new();
        for e in &eqs {
            if e.coef.iter().all(|c| *c == ZERO) {
                let scale = e.scale.max(f64::MIN_POSITIVE);
                worst = worst.max(e.known.norm() / scale);
            } else {
                rows_c.push(e);
            }
        }
        if rows_c.is_empty() {
            break;
        }
        // Σ_t C_{e,t} u_t = −known_e
        let c = CMatrix::from_fn(rows_c.len(), ulist.len(), |i, t| rows_c[i].coef[t]);
        let d = CMatrix::from_fn(rows_c.len(), r, |i, j| -rows_c[i].known[j]);
        let (x, resid) = lstsq(&c, &d, opts.tol_rank);
        let dscale: f64 = rows_c.iter().map(|e| e.scale).fold(0.0, f64::max);
        if d.norm() > 0.0 {
            let abs = (&c * &x - &d).norm();
            worst = worst.max(abs / dscale.max(d.norm()).max(f64::MIN_POSITIVE));
        }
        let _ = resid;
        let kernel = null_space(&c, opts.tol_rank);
        let mut progress = false;
        for (t, m) in ulist.iter().enumerate() {
            let free = kernel.row(t).norm();
            if free < 1e-6 {
                nf.insert(m.clone(), x.row(t).transpose());
                unknown.remove(m);
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }

    // completed moments along paths of complete multiplication matrices
    let mats = complete_matrices(b, &nf);
    let mlist: Vec<CMatrix> = mats.values().cloned().collect();
    let comm = commutator_residual(&mlist);
    let lambda_b = CVector::from_iterator(r, b.iter().map(|bj| lambda.known(bj).unwrap_or(ZERO)));
    let mut walker = NormalFormWalker::new(b, &nf, &mats);
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for m in crate::moment::enumerate_monomials(shape, shape.degrees()) {
        let Some(known) = lambda.known(&m) else { continue };
        scale = scale.max(known.norm());
        if let Some(n) = walker.normal_form(&m) {
            diff = diff.max((lambda_b.dot(&n) - known).norm());
        }
    }
    if scale > 0.0 {
        worst = worst.max(diff / scale);
    }

    let mut functional = lambda.clone();
    let bp_plus = basis_plus(bp);
    let b_plus = basis_plus(b);
    for q in bp_plus.iter() {
        for c in b_plus.iter() {
            let m = q.mul_unchecked(c);
            if functional.get(&m).is_some() {
                continue;
            }
            if let Some(n) = walker.normal_form(&m) {
                functional.insert_known(m, lambda_b.dot(&n));
            }
        }
    }

    let status = if worst > opts.tol_consistency || comm > opts.tol_consistency {
        ExtensionStatus::Inconsistent
    } else if unknown.is_empty() {
        ExtensionStatus::Extended
    } else {
        ExtensionStatus::RankDeficient
    };
    log::debug!(
        "extension over {b}: {status:?}, residual {worst:e}, commutator {comm:e}, {} unresolved",
        unknown.len()
    );
    let relations = border
        .iter()
        .filter_map(|m| {
            nf.get(m).map(|t| BorderRelation {
                lead: m.clone(),
                tail: t.clone(),
            })
        })
        .collect();
    Ok(ExtensionResult {
        status,
        functional,
        relations,
        commutator_residual: comm,
        consistency_residual: worst,
        cols: b.clone(),
        rows: bp.clone(),
        normal_forms: nf,
    })
}

/// Least-squares solver for `H^{Q,B} x = (Λ(q m))_q` on a fixed row set.
struct DirectSolver {
    a: CMatrix,
    pinv: CMatrix,
}

impl DirectSolver {
    fn new(
        qrows: &[(Monomial, Vec<Scalar>)],
        idx: &[usize],
        r: usize,
        tol: f64,
        hscale: f64,
    ) -> Option<Self> {
        let a = CMatrix::from_fn(idx.len(), r, |i, j| qrows[idx[i]].1[j]);
        let s = singular_values(&a);
        // rank is judged against the invertible block, not the row subset
        let floor = tol * s[0].max(hscale);
        if s.len() < r || s[r - 1] <= floor || numerical_rank(&a, tol) < r {
            return None;
        }
        let svd = a.clone().svd(true, true);
        let pinv = svd.pseudo_inverse(floor).ok()?;
        Some(DirectSolver { a, pinv })
    }
}

/// `known + Σ_t coef_t u_t`, a vector over `B` with unknown normal forms.
#[derive(Clone)]
struct Affine {
    known: CVector,
    coef: Vec<Scalar>,
    scale: f64,
}

impl Affine {
    fn new(r: usize, nu: usize) -> Self {
        Affine {
            known: CVector::zeros(r),
            coef: vec![ZERO; nu],
            scale: 0.0,
        }
    }

    fn minus(&self, other: &Affine) -> Affine {
        let scale = self
            .known
            .norm()
            .max(other.known.norm())
            .max(self.scale)
            .max(other.scale);
        Affine {
            known: &self.known - &other.known,
            coef: self.coef.iter().zip(&other.coef).map(|(a, b)| a - b).collect(),
            scale,
        }
    }
}

/// Normal forms of arbitrary monomials by multiplying along complete
/// multiplication matrices, memoized.
struct NormalFormWalker<'a> {
    b: &'a MonomialBasis,
    nf: &'a BTreeMap<Monomial, CVector>,
    mats: &'a BTreeMap<Var, CMatrix>,
    memo: HashMap<Monomial, Option<CVector>>,
}

impl<'a> NormalFormWalker<'a> {
    fn new(
        b: &'a MonomialBasis,
        nf: &'a BTreeMap<Monomial, CVector>,
        mats: &'a BTreeMap<Var, CMatrix>,
    ) -> Self {
        NormalFormWalker {
            b,
            nf,
            mats,
            memo: HashMap::new(),
        }
    }

    fn normal_form(&mut self, m: &Monomial) -> Option<CVector> {
        if let Some(j) = self.b.index_of(m) {
            return Some(unit(self.b.len(), j));
        }
        if let Some(n) = self.nf.get(m) {
            return Some(n.clone());
        }
        if let Some(hit) = self.memo.get(m) {
            return hit.clone();
        }
        let mut out = None;
        let support: Vec<Var> = m.support().collect();
        for v in support {
            let Some(mv) = self.mats.get(&v) else { continue };
            let prev = m.div_var(v).expect("v divides m");
            if let Some(n) = self.normal_form(&prev) {
                out = Some(mv * n);
                break;
            }
        }
        self.memo.insert(m.clone(), out.clone());
        out
    }
}
