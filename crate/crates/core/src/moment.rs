//! Moment functionals of tensors, monomial bases connected to 1 and
//! quasi-Hankel matrices `H^{B',B}_Λ = (Λ(b'_i b_j))`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use crate::algebra::{
    MomentFunctional, MomentValue, Monomial, ParamId, Polynomial, Scalar, Shape, Var, ZERO,
};
use crate::error::{Error, Result};
use crate::linalg::{condition_number, numerical_rank, singular_values, CMatrix};

/// All monomials with `|α_i| ≤ bounds[i]`, in canonical order.
pub fn enumerate_monomials(shape: &Shape, bounds: &[u32]) -> Vec<Monomial> {
    assert_eq!(bounds.len(), shape.k(), "one bound per variable group");
    let per_group: Vec<Vec<Vec<u32>>> = shape
        .dims()
        .iter()
        .zip(bounds)
        .map(|(&n, &b)| group_exponents(n, b))
        .collect();
    let mut out = vec![Vec::<Vec<u32>>::new()];
    for group in &per_group {
        let mut next = Vec::with_capacity(out.len() * group.len());
        for prefix in &out {
            for e in group {
                let mut m = prefix.clone();
                m.push(e.clone());
                next.push(m);
            }
        }
        out = next;
    }
    let mut monomials: Vec<Monomial> = out.into_iter().map(Monomial::from_exps).collect();
    monomials.sort();
    monomials
}

fn group_exponents(n: usize, bound: u32) -> Vec<Vec<u32>> {
    fn rec(n: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur.push(e);
            rec(n, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, bound, &mut Vec::with_capacity(n), &mut out);
    out
}

/// Ordered set of monomials containing 1 and closed under division by a
/// variable along at least one path ("connected to 1").
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonomialBasis {
    shape: Shape,
    monomials: Vec<Monomial>,
}

impl MonomialBasis {
    pub fn new(shape: &Shape, monomials: Vec<Monomial>) -> Result<Self> {
        let mut seen = HashSet::new();
        for m in &monomials {
            shape.check_monomial(m)?;
            if !seen.insert(m.clone()) {
                return Err(Error::InvalidShape(format!("duplicate monomial {m} in basis")));
            }
        }
        if !seen.contains(&shape.one()) {
            return Err(Error::InvalidShape("basis must contain 1".into()));
        }
        for m in &monomials {
            if !m.is_one() && !m.support().any(|v| m.div_var(v).is_some_and(|d| seen.contains(&d))) {
                return Err(Error::InvalidShape(format!("{m} is not connected to 1")));
            }
        }
        Ok(MonomialBasis {
            shape: shape.clone(),
            monomials,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Monomial> {
        self.monomials.iter()
    }

    pub fn index_of(&self, m: &Monomial) -> Option<usize> {
        self.monomials.iter().position(|b| b == m)
    }

    pub fn contains(&self, m: &Monomial) -> bool {
        self.index_of(m).is_some()
    }

    /// Border `∂B = B⁺ \ B` in canonical order.
    pub fn border(&self) -> Vec<Monomial> {
        let own: BTreeSet<&Monomial> = self.monomials.iter().collect();
        let mut out = BTreeSet::new();
        for m in &self.monomials {
            for v in self.shape.vars() {
                let p = m.times_var(v);
                if !own.contains(&p) {
                    out.insert(p);
                }
            }
        }
        out.into_iter().collect()
    }

    /// `B` followed by `∂B`, so that the leading block is indexed by `B`.
    pub fn plus_ordered(&self) -> MonomialBasis {
        let mut monomials = self.monomials.clone();
        monomials.extend(self.border());
        MonomialBasis {
            shape: self.shape.clone(),
            monomials,
        }
    }
}

impl fmt::Display for MonomialBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, m) in self.monomials.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{m}")?;
        }
        f.write_str(")")
    }
}

/// `B⁺ = B ∪ x_1 B ∪ ⋯ ∪ x_n B` in canonical order.
pub fn basis_plus(b: &MonomialBasis) -> MonomialBasis {
    let mut all: BTreeSet<Monomial> = b.monomials.iter().cloned().collect();
    all.extend(b.border());
    MonomialBasis {
        shape: b.shape.clone(),
        monomials: all.into_iter().collect(),
    }
}

/// `T*`: the coefficient of every monomial of `R_δ` divided by its
/// multinomial weight.
pub fn build_moment_functional(t: &Polynomial) -> Result<MomentFunctional> {
    t.check_within_degree()?;
    let shape = t.shape();
    let mut lambda = MomentFunctional::new(shape.clone());
    for m in enumerate_monomials(shape, shape.degrees()) {
        let w = shape.multinomial_weight(&m)? as f64;
        lambda.insert_known(m.clone(), t.coeff(&m) / w);
    }
    Ok(lambda)
}

/// Inverse of [`build_moment_functional`].
pub fn functional_to_tensor(lambda: &MomentFunctional, shape: &Shape) -> Result<Polynomial> {
    if lambda.shape() != shape {
        return Err(Error::ShapeMismatch("functional and target shape".into()));
    }
    let mut t = Polynomial::zero(shape.clone());
    for m in enumerate_monomials(shape, shape.degrees()) {
        let v = lambda.require(&m)?;
        let w = shape.multinomial_weight(&m)? as f64;
        t.add_term(m, v * w);
    }
    Ok(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Known,
    Parametric,
}

/// Quasi-Hankel matrix `(Λ(rows_i · cols_j))`. Entries outside the support
/// of `Λ` are parameters shared by equal monomial products.
#[derive(Clone, Debug)]
pub struct HankelMatrix {
    pub rows: MonomialBasis,
    pub cols: MonomialBasis,
    entries: Vec<MomentValue>,
    /// Monomials standing behind the fresh parameters, keyed by id.
    pub fresh: BTreeMap<ParamId, Monomial>,
}

impl HankelMatrix {
    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &MomentValue {
        &self.entries[i * self.cols.len() + j]
    }

    pub fn provenance(&self, i: usize, j: usize) -> Provenance {
        if self.entry(i, j).is_known() {
            Provenance::Known
        } else {
            Provenance::Parametric
        }
    }

    pub fn is_known(&self) -> bool {
        self.entries.iter().all(MomentValue::is_known)
    }

    /// Numeric matrix; fails on the first parametric entry.
    pub fn to_matrix(&self) -> Result<CMatrix> {
        let mut out = CMatrix::zeros(self.nrows(), self.ncols());
        for i in 0..self.nrows() {
            for j in 0..self.ncols() {
                out[(i, j)] = self.entry(i, j).as_known().ok_or_else(|| {
                    let m = self.rows.monomials[i].mul_unchecked(&self.cols.monomials[j]);
                    Error::UnresolvedParameter(m.to_string())
                })?;
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> HankelMatrix {
        let (r, c) = (self.nrows(), self.ncols());
        let mut entries = Vec::with_capacity(r * c);
        for j in 0..c {
            for i in 0..r {
                entries.push(self.entry(i, j).clone());
            }
        }
        HankelMatrix {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            entries,
            fresh: self.fresh.clone(),
        }
    }
}

fn build_hankel(
    lambda: &MomentFunctional,
    shift: Option<&Monomial>,
    rows: &MonomialBasis,
    cols: &MonomialBasis,
) -> Result<HankelMatrix> {
    if rows.shape() != lambda.shape() || cols.shape() != lambda.shape() {
        return Err(Error::ShapeMismatch("Hankel bases and functional".into()));
    }
    let product = |r: &Monomial, c: &Monomial| {
        let m = r.mul_unchecked(c);
        match shift {
            Some(s) => m.mul_unchecked(s),
            None => m,
        }
    };
    // fresh parameters are numbered after the functional's own, in canonical
    // monomial order
    let mut missing = BTreeSet::new();
    for r in rows.iter() {
        for c in cols.iter() {
            let m = product(r, c);
            if lambda.get(&m).is_none() {
                missing.insert(m);
            }
        }
    }
    let base = lambda
        .entries()
        .values()
        .flat_map(|v| v.params.keys().copied())
        .max()
        .map_or(0, |id| id + 1);
    let ids: BTreeMap<Monomial, ParamId> = missing
        .into_iter()
        .enumerate()
        .map(|(i, m)| (m, base + i as ParamId))
        .collect();
    let mut entries = Vec::with_capacity(rows.len() * cols.len());
    for r in rows.iter() {
        for c in cols.iter() {
            let m = product(r, c);
            entries.push(match lambda.get(&m) {
                Some(v) => v.clone(),
                None => MomentValue::unknown(ids[&m]),
            });
        }
    }
    Ok(HankelMatrix {
        rows: rows.clone(),
        cols: cols.clone(),
        entries,
        fresh: ids.into_iter().map(|(m, id)| (id, m)).collect(),
    })
}

/// `H^{B',B}_Λ` with rows `B'` and columns `B`.
pub fn hankel(
    lambda: &MomentFunctional,
    rows: &MonomialBasis,
    cols: &MonomialBasis,
) -> Result<HankelMatrix> {
    build_hankel(lambda, None, rows, cols)
}

/// `H^{B',B}_{x_v ⋆ Λ}`: entry `(i, j)` is `Λ(x_v · rows_i · cols_j)`.
pub fn shifted_hankel(
    lambda: &MomentFunctional,
    v: Var,
    rows: &MonomialBasis,
    cols: &MonomialBasis,
) -> Result<HankelMatrix> {
    let shift = lambda.shape().var(v);
    build_hankel(lambda, Some(&shift), rows, cols)
}

/// Numeric Hankel block over arbitrary monomial lists, or `None` when an
/// entry is not known.
pub(crate) fn known_block(
    lambda: &MomentFunctional,
    rows: &[Monomial],
    cols: &[Monomial],
) -> Option<CMatrix> {
    let mut out = CMatrix::from_element(rows.len(), cols.len(), ZERO);
    for (i, r) in rows.iter().enumerate() {
        for (j, c) in cols.iter().enumerate() {
            out[(i, j)] = lambda.known(&r.mul_unchecked(c))?;
        }
    }
    Some(out)
}

/// Options for the basis search.
#[derive(Clone, Copy, Debug)]
pub struct BasisSearch {
    pub tol_rank: f64,
    pub max_cond: f64,
}

impl Default for BasisSearch {
    fn default() -> Self {
        BasisSearch {
            tol_rank: 1e-8,
            max_cond: 1e10,
        }
    }
}

/// Pair of bases with an invertible, fully known block `H^{B',B}_Λ`.
#[derive(Clone, Debug)]
pub struct BasisCandidate {
    /// Column basis `B`.
    pub cols: MonomialBasis,
    /// Row basis `B'`.
    pub rows: MonomialBasis,
    /// Per-group degree bounds of the row and column monomials.
    pub row_bounds: Vec<u32>,
    pub col_bounds: Vec<u32>,
    /// Some group keeps unused degree, so multiplication by its variables
    /// stays inside the known moments.
    pub spare: bool,
    pub condition: f64,
}

/// Result of scanning every row/column degree split.
#[derive(Clone, Debug, Default)]
pub struct CandidateScan {
    pub candidates: Vec<BasisCandidate>,
    /// Largest numerical rank among the catalecticant flattenings; a rank-`r`
    /// extension cannot exist when it exceeds `r`.
    pub max_flattening_rank: usize,
}

/// Row/column degree splits `(p, q)` with `p_i + q_i ≤ δ_i`, ordered with
/// the splits leaving spare degree first, then by column bounds and row
/// bounds in decreasing lexicographic order.
pub fn degree_splits(shape: &Shape) -> Vec<(Vec<u32>, Vec<u32>)> {
    let mut splits = vec![(Vec::new(), Vec::new())];
    for &d in shape.degrees() {
        let mut next = Vec::new();
        for (p, q) in &splits {
            for pi in 0..=d {
                for qi in 0..=(d - pi) {
                    let mut p2: Vec<u32> = p.clone();
                    let mut q2: Vec<u32> = q.clone();
                    p2.push(pi);
                    q2.push(qi);
                    next.push((p2, q2));
                }
            }
        }
        splits = next;
    }
    let spare = |p: &[u32], q: &[u32]| {
        p.iter()
            .zip(q)
            .zip(shape.degrees())
            .any(|((a, b), d)| a + b < *d)
    };
    splits.sort_by(|(p1, q1), (p2, q2)| {
        spare(p2, q2)
            .cmp(&spare(p1, q1))
            .then_with(|| q2.cmp(q1))
            .then_with(|| p2.cmp(p1))
    });
    splits
}

/// Scans every degree split for a basis pair of size `r`.
pub fn candidate_bases(lambda: &MomentFunctional, r: usize, opts: &BasisSearch) -> CandidateScan {
    let shape = lambda.shape();
    let mut scan = CandidateScan::default();
    if r == 0 {
        return scan;
    }
    let mut seen: HashSet<(Vec<Monomial>, Vec<Monomial>)> = HashSet::new();
    for (p, q) in degree_splits(shape) {
        let rows_all = enumerate_monomials(shape, &p);
        let cols_all = enumerate_monomials(shape, &q);
        if rows_all.len() < r || cols_all.len() < r {
            // still informative for the rank bound
            if let Some(f) = known_block(lambda, &rows_all, &cols_all) {
                scan.max_flattening_rank = scan.max_flattening_rank.max(numerical_rank(&f, opts.tol_rank));
            }
            continue;
        }
        let Some(f) = known_block(lambda, &rows_all, &cols_all) else {
            continue;
        };
        let sv = singular_values(&f);
        let rank = crate::linalg::rank_of(&sv, opts.tol_rank);
        scan.max_flattening_rank = scan.max_flattening_rank.max(rank);
        if rank != r {
            continue;
        }
        let smax = sv[0];
        let spare = p
            .iter()
            .zip(&q)
            .zip(shape.degrees())
            .any(|((a, b), d)| a + b < *d);
        let Some(cols) = greedy_columns(&f, &cols_all, r, opts.tol_rank * smax) else {
            continue;
        };
        let sub = select_columns(&f, &cols);
        let col_monos: Vec<Monomial> = cols.iter().map(|&j| cols_all[j].clone()).collect();
        let mut row_monos = None;
        if p == q {
            // prefer the symmetric block B' = B
            if let Some(h) = known_block(lambda, &col_monos, &col_monos) {
                if condition_number(&h) <= opts.max_cond {
                    row_monos = Some(col_monos.clone());
                }
            }
        }
        if row_monos.is_none() {
            let Some(rows) = greedy_columns(&sub.transpose(), &rows_all, r, opts.tol_rank * smax)
            else {
                continue;
            };
            row_monos = Some(rows.iter().map(|&i| rows_all[i].clone()).collect());
        }
        let row_monos = row_monos.expect("set above");
        let key = (col_monos.clone(), row_monos.clone());
        if !seen.insert(key) {
            continue;
        }
        let h = known_block(lambda, &row_monos, &col_monos).expect("inside the known split");
        let condition = condition_number(&h);
        if condition > opts.max_cond {
            log::debug!("split rows {p:?} cols {q:?}: block condition {condition:e} rejected");
            continue;
        }
        let (Ok(cols), Ok(rows)) = (
            MonomialBasis::new(shape, col_monos),
            MonomialBasis::new(shape, row_monos),
        ) else {
            continue;
        };
        scan.candidates.push(BasisCandidate {
            cols,
            rows,
            row_bounds: p,
            col_bounds: q,
            spare,
            condition,
        });
    }
    scan
}

/// Greedy staircase over the columns of `f` in canonical order: a column is
/// accepted when its monomial is connected to the accepted ones and it
/// raises the numerical rank.
fn greedy_columns(f: &CMatrix, monos: &[Monomial], r: usize, abs_tol: f64) -> Option<Vec<usize>> {
    let mut chosen: Vec<usize> = Vec::with_capacity(r);
    let mut chosen_set: HashSet<&Monomial> = HashSet::new();
    for (j, m) in monos.iter().enumerate() {
        if chosen.len() == r {
            break;
        }
        let connected = m.is_one()
            || m.support()
                .any(|v| m.div_var(v).is_some_and(|d| chosen_set.contains(&d)));
        if !connected {
            continue;
        }
        let mut trial = chosen.clone();
        trial.push(j);
        let s = singular_values(&select_columns(f, &trial));
        let rank = s.iter().filter(|&&x| x > abs_tol).count();
        if rank == trial.len() {
            chosen = trial;
            chosen_set.insert(m);
        }
    }
    (chosen.len() == r).then_some(chosen)
}

fn select_columns(f: &CMatrix, cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(f.nrows(), cols.len(), |i, j| f[(i, cols[j])])
}

/// First basis pair `(B, B')` of size `r` found by the staircase search.
pub fn select_bases(
    lambda: &MomentFunctional,
    r: usize,
) -> Result<(MonomialBasis, MonomialBasis)> {
    let scan = candidate_bases(lambda, r, &BasisSearch::default());
    scan.candidates
        .into_iter()
        .next()
        .map(|c| (c.cols, c.rows))
        .ok_or(Error::NoInvertibleBlock(r))
}

/// Convenience: a moment functional evaluated from `Σ γ_i 1_{ζ_i}` on `R_δ`.
pub fn functional_from_terms(
    shape: &Shape,
    terms: &[(Scalar, crate::algebra::Point)],
) -> Result<MomentFunctional> {
    let mut lambda = MomentFunctional::new(shape.clone());
    for m in enumerate_monomials(shape, shape.degrees()) {
        let v: Scalar = terms.iter().map(|(g, z)| g * m.eval(z)).sum();
        lambda.insert_known(m, v);
    }
    for (_, z) in terms {
        crate::algebra::Point::new(shape, z.coords.clone())?;
    }
    Ok(lambda)
}
