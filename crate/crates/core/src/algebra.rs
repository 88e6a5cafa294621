//! Multi-graded monomials and polynomials in dehomogenized form, together
//! with the dual-space operations (star action, evaluation functionals and
//! the apolar pairing) used by the Hankel machinery.
//!
//! Variables are split into `k` groups; group `i` has `n_i` affine variables
//! `x_{i,1..n_i}`, the homogenizing coordinate `x_{i,0}` being set to 1.
//! Monomials are ordered graded-lexicographically (total degree first, then
//! exponents compared group-major with `x_{1,1}` the largest variable).

use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Scalar = Complex64;

pub(crate) const ZERO: Scalar = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Scalar = Complex64::new(1.0, 0.0);

/// The multi-grading: affine dimension and degree of every variable group.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
    degrees: Vec<u32>,
}

impl Shape {
    pub fn new(dims: Vec<usize>, degrees: Vec<u32>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidShape("at least one variable group is required".into()));
        }
        if dims.len() != degrees.len() {
            return Err(Error::InvalidShape(format!(
                "{} dimensions but {} degrees",
                dims.len(),
                degrees.len()
            )));
        }
        if let Some(i) = dims.iter().position(|&n| n == 0) {
            return Err(Error::InvalidShape(format!("group {} has no variables", i + 1)));
        }
        if let Some(i) = degrees.iter().position(|&d| d == 0) {
            return Err(Error::InvalidShape(format!("group {} has degree 0", i + 1)));
        }
        Ok(Shape { dims, degrees })
    }

    /// Multilinear shape (every degree equal to one).
    pub fn multilinear(dims: Vec<usize>) -> Result<Self> {
        let degrees = vec![1; dims.len()];
        Shape::new(dims, degrees)
    }

    pub fn k(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    /// Homogeneous dimensions `n_i + 1`.
    pub fn full_dims(&self) -> Vec<usize> {
        self.dims.iter().map(|n| n + 1).collect()
    }

    pub fn is_multilinear(&self) -> bool {
        self.degrees.iter().all(|&d| d == 1)
    }

    pub fn nvars(&self) -> usize {
        self.dims.iter().sum()
    }

    /// All variables in canonical order (`x_{1,1}` first).
    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::with_capacity(self.nvars());
        for (group, &n) in self.dims.iter().enumerate() {
            for index in 0..n {
                out.push(Var { group, index });
            }
        }
        out
    }

    /// Dimension of `R_δ`, i.e. `∏ C(n_i + δ_i, δ_i)`.
    pub fn ambient_size(&self) -> Result<u64> {
        self.dims
            .iter()
            .zip(&self.degrees)
            .try_fold(1u64, |acc, (&n, &d)| {
                let b = binomial(n as u64 + d as u64, d as u64)?;
                acc.checked_mul(b).ok_or(Error::MultinomialOverflow)
            })
    }

    pub fn one(&self) -> Monomial {
        Monomial {
            exps: self.dims.iter().map(|&n| vec![0; n]).collect(),
        }
    }

    pub fn var(&self, v: Var) -> Monomial {
        let mut m = self.one();
        m.exps[v.group][v.index] = 1;
        m
    }

    pub fn check_monomial(&self, m: &Monomial) -> Result<()> {
        let ok = m.exps.len() == self.k()
            && m.exps.iter().zip(&self.dims).all(|(e, &n)| e.len() == n);
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "monomial {m} does not fit dims {:?}",
                self.dims
            )))
        }
    }

    /// Whether `m` lies in `R_δ` (`|α_i| ≤ δ_i` for every group).
    pub fn contains(&self, m: &Monomial) -> bool {
        m.exps
            .iter()
            .zip(&self.degrees)
            .all(|(e, &d)| e.iter().sum::<u32>() <= d)
    }

    /// `∏_i C(δ_i, α_i)` for a monomial in `R_δ`.
    pub fn multinomial_weight(&self, m: &Monomial) -> Result<u64> {
        if !self.contains(m) {
            return Err(Error::degree_overflow(m));
        }
        m.exps
            .iter()
            .zip(&self.degrees)
            .try_fold(1u64, |acc, (e, &d)| {
                let c = multinomial(d, e)?;
                acc.checked_mul(c).ok_or(Error::MultinomialOverflow)
            })
    }
}

/// Variable `x_{group+1, index+1}` (zero-based fields).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub group: usize,
    pub index: usize,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.group < 26 {
            write!(f, "{}{}", (b'a' + self.group as u8) as char, self.index + 1)
        } else {
            write!(f, "x{}_{}", self.group + 1, self.index + 1)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    exps: Vec<Vec<u32>>,
}

impl Monomial {
    pub fn from_exps(exps: Vec<Vec<u32>>) -> Self {
        Monomial { exps }
    }

    pub fn exps(&self) -> &[Vec<u32>] {
        &self.exps
    }

    pub fn group_degree(&self, group: usize) -> u32 {
        self.exps[group].iter().sum()
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().flatten().sum()
    }

    pub fn is_one(&self) -> bool {
        self.exps.iter().flatten().all(|&e| e == 0)
    }

    pub fn exponent(&self, v: Var) -> u32 {
        self.exps[v.group][v.index]
    }

    fn same_layout(&self, other: &Monomial) -> bool {
        self.exps.len() == other.exps.len()
            && self
                .exps
                .iter()
                .zip(&other.exps)
                .all(|(a, b)| a.len() == b.len())
    }

    pub fn mul(&self, other: &Monomial) -> Result<Monomial> {
        if !self.same_layout(other) {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {self} and {other}"
            )));
        }
        Ok(self.mul_unchecked(other))
    }

    pub(crate) fn mul_unchecked(&self, other: &Monomial) -> Monomial {
        Monomial {
            exps: self
                .exps
                .iter()
                .zip(&other.exps)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
                .collect(),
        }
    }

    pub fn times_var(&self, v: Var) -> Monomial {
        let mut m = self.clone();
        m.exps[v.group][v.index] += 1;
        m
    }

    pub fn div_var(&self, v: Var) -> Option<Monomial> {
        if self.exps[v.group][v.index] == 0 {
            return None;
        }
        let mut m = self.clone();
        m.exps[v.group][v.index] -= 1;
        Some(m)
    }

    /// Quotient `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut exps = self.exps.clone();
        for (a, b) in exps.iter_mut().zip(&other.exps) {
            for (x, y) in a.iter_mut().zip(b) {
                if *x < *y {
                    return None;
                }
                *x -= y;
            }
        }
        Some(Monomial { exps })
    }

    pub fn lcm(&self, other: &Monomial) -> Monomial {
        Monomial {
            exps: self
                .exps
                .iter()
                .zip(&other.exps)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| *x.max(y)).collect())
                .collect(),
        }
    }

    /// Variables with a positive exponent.
    pub fn support(&self) -> impl Iterator<Item = Var> + '_ {
        self.exps.iter().enumerate().flat_map(|(group, e)| {
            e.iter()
                .enumerate()
                .filter(|(_, &x)| x > 0)
                .map(move |(index, _)| Var { group, index })
        })
    }

    /// Value of the monomial at an affine point.
    pub fn eval(&self, point: &Point) -> Scalar {
        let mut acc = ONE;
        for (e, z) in self.exps.iter().zip(&point.coords) {
            for (&p, &c) in e.iter().zip(z) {
                if p > 0 {
                    acc *= c.powu(p);
                }
            }
        }
        acc
    }

    fn flat(&self) -> impl Iterator<Item = u32> + '_ {
        self.exps.iter().flatten().copied()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.flat().cmp(self.flat()))
            .then_with(|| self.exps.len().cmp(&other.exps.len()))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for v in self.support() {
            if !first {
                f.write_str("*")?;
            }
            first = false;
            let e = self.exponent(v);
            if e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        if first {
            f.write_str("1")?;
        }
        Ok(())
    }
}

pub fn monomial_mul(a: &Monomial, b: &Monomial) -> Result<Monomial> {
    a.mul(b)
}

/// Affine point `(ζ_1, …, ζ_k)`; the homogenizing coordinates are implicit.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub coords: Vec<Vec<Scalar>>,
}

impl Point {
    pub fn new(shape: &Shape, coords: Vec<Vec<Scalar>>) -> Result<Self> {
        let ok = coords.len() == shape.k()
            && coords.iter().zip(shape.dims()).all(|(c, &n)| c.len() == n);
        if !ok {
            return Err(Error::ShapeMismatch(format!(
                "point does not fit dims {:?}",
                shape.dims()
            )));
        }
        Ok(Point { coords })
    }

    pub fn from_real(shape: &Shape, coords: Vec<Vec<f64>>) -> Result<Self> {
        Point::new(
            shape,
            coords
                .into_iter()
                .map(|g| g.into_iter().map(|x| Scalar::new(x, 0.0)).collect())
                .collect(),
        )
    }

    pub fn origin(shape: &Shape) -> Self {
        Point {
            coords: shape.dims().iter().map(|&n| vec![ZERO; n]).collect(),
        }
    }

    pub fn coord(&self, v: Var) -> Scalar {
        self.coords[v.group][v.index]
    }

    pub fn set_coord(&mut self, v: Var, value: Scalar) {
        self.coords[v.group][v.index] = value;
    }
}

/// Sparse polynomial over a fixed shape; zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    shape: Shape,
    terms: BTreeMap<Monomial, Scalar>,
}

impl Polynomial {
    pub fn zero(shape: Shape) -> Self {
        Polynomial {
            shape,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(shape: Shape) -> Self {
        let mut p = Polynomial::zero(shape);
        let one = p.shape.one();
        p.add_term(one, ONE);
        p
    }

    /// Builds a polynomial, summing repeated monomials.
    pub fn from_terms<I>(shape: Shape, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Monomial, Scalar)>,
    {
        let mut p = Polynomial::zero(shape);
        for (m, c) in terms {
            p.shape.check_monomial(&m)?;
            p.add_term(m, c);
        }
        Ok(p)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, Scalar> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial) -> Scalar {
        self.terms.get(m).copied().unwrap_or(ZERO)
    }

    pub fn add_term(&mut self, m: Monomial, c: Scalar) {
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                if c != ZERO {
                    e.insert(c);
                }
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if *e.get() == ZERO {
                    e.remove();
                }
            }
        }
    }

    /// Whether every monomial lies in `R_δ`.
    pub fn within_degree(&self) -> bool {
        self.terms.keys().all(|m| self.shape.contains(m))
    }

    pub fn check_within_degree(&self) -> Result<()> {
        match self.terms.keys().find(|m| !self.shape.contains(m)) {
            Some(m) => Err(Error::degree_overflow(m)),
            None => Ok(()),
        }
    }

    pub fn scale(&self, c: Scalar) -> Polynomial {
        let mut out = Polynomial::zero(self.shape.clone());
        for (m, v) in &self.terms {
            out.add_term(m.clone(), v * c);
        }
        out
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        for (m, v) in &other.terms {
            out.add_term(m.clone(), *v);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.add(&other.scale(-ONE))
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same_shape(other)?;
        let mut out = Polynomial::zero(self.shape.clone());
        for (a, x) in &self.terms {
            for (b, y) in &other.terms {
                out.add_term(a.mul_unchecked(b), x * y);
            }
        }
        Ok(out)
    }

    fn check_same_shape(&self, other: &Polynomial) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape.dims(),
                other.shape.dims()
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, point: &Point) -> Result<Scalar> {
        evaluate_poly(self, point)
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm_sqr()).fold(0.0, |a, b| a + b).sqrt()
    }

    /// `γ · ∏_i (1 + ζ_i · x_i)^{δ_i}` expanded over `R_δ`.
    pub fn rank_one(shape: &Shape, weight: Scalar, point: &Point) -> Result<Polynomial> {
        Point::new(shape, point.coords.clone())?;
        let mut out = Polynomial::zero(shape.clone());
        let bounds: Vec<u32> = shape.degrees().to_vec();
        for m in crate::moment::enumerate_monomials(shape, &bounds) {
            let c = shape.multinomial_weight(&m)? as f64;
            out.add_term(m.clone(), weight * c * m.eval(point));
        }
        Ok(out)
    }
}

pub type ParamId = u32;

/// Value of a moment: an affine expression `c + Σ a_j h_j` in the unknown
/// parameters `h_j`. A value with no parameter terms is known.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentValue {
    pub constant: Scalar,
    pub params: BTreeMap<ParamId, Scalar>,
}

impl MomentValue {
    pub fn known(c: Scalar) -> Self {
        MomentValue {
            constant: c,
            params: BTreeMap::new(),
        }
    }

    pub fn unknown(id: ParamId) -> Self {
        let mut params = BTreeMap::new();
        params.insert(id, ONE);
        MomentValue {
            constant: ZERO,
            params,
        }
    }

    pub fn is_known(&self) -> bool {
        self.params.is_empty()
    }

    pub fn as_known(&self) -> Option<Scalar> {
        self.is_known().then_some(self.constant)
    }

    pub fn add_scaled(&mut self, other: &MomentValue, c: Scalar) {
        self.constant += other.constant * c;
        for (&id, &a) in &other.params {
            let e = self.params.entry(id).or_insert(ZERO);
            *e += a * c;
            if *e == ZERO {
                self.params.remove(&id);
            }
        }
    }

    /// Product of two affine expressions; fails when both are parametric.
    pub fn try_mul(&self, other: &MomentValue) -> Result<MomentValue> {
        match (self.as_known(), other.as_known()) {
            (Some(a), _) => {
                let mut out = MomentValue::known(ZERO);
                out.add_scaled(other, a);
                Ok(out)
            }
            (_, Some(b)) => {
                let mut out = MomentValue::known(ZERO);
                out.add_scaled(self, b);
                Ok(out)
            }
            _ => Err(Error::NonAffineProduct),
        }
    }
}

/// Partial linear form on `R`, stored on the monomials it was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentFunctional {
    shape: Shape,
    entries: BTreeMap<Monomial, MomentValue>,
}

impl MomentFunctional {
    pub fn new(shape: Shape) -> Self {
        MomentFunctional {
            shape,
            entries: BTreeMap::new(),
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn entries(&self) -> &BTreeMap<Monomial, MomentValue> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, m: Monomial, v: MomentValue) {
        self.entries.insert(m, v);
    }

    pub fn insert_known(&mut self, m: Monomial, c: Scalar) {
        self.entries.insert(m, MomentValue::known(c));
    }

    pub fn get(&self, m: &Monomial) -> Option<&MomentValue> {
        self.entries.get(m)
    }

    pub fn known(&self, m: &Monomial) -> Option<Scalar> {
        self.entries.get(m).and_then(MomentValue::as_known)
    }

    pub fn is_known(&self, m: &Monomial) -> bool {
        self.known(m).is_some()
    }

    /// Known value or an error naming the monomial.
    pub fn require(&self, m: &Monomial) -> Result<Scalar> {
        match self.entries.get(m) {
            Some(v) => v
                .as_known()
                .ok_or_else(|| Error::UnresolvedParameter(m.to_string())),
            None => Err(Error::missing(m)),
        }
    }

    pub fn scale(&self, c: Scalar) -> MomentFunctional {
        let mut out = MomentFunctional::new(self.shape.clone());
        for (m, v) in &self.entries {
            let mut s = MomentValue::known(ZERO);
            s.add_scaled(v, c);
            out.insert(m.clone(), s);
        }
        out
    }
}

/// `(p ⋆ Λ)(q) = Λ(p q)` on the requested domain. Parameters of `Λ`
/// propagate linearly.
pub fn star_action(
    p: &Polynomial,
    lambda: &MomentFunctional,
    domain: &[Monomial],
) -> Result<MomentFunctional> {
    if p.shape() != lambda.shape() {
        return Err(Error::ShapeMismatch("polynomial and functional".into()));
    }
    let mut out = MomentFunctional::new(lambda.shape().clone());
    for q in domain {
        lambda.shape().check_monomial(q)?;
        let mut acc = MomentValue::known(ZERO);
        for (m, c) in p.terms() {
            let mq = m.mul_unchecked(q);
            let v = lambda.get(&mq).ok_or_else(|| Error::missing(&mq))?;
            acc.add_scaled(v, *c);
        }
        out.insert(q.clone(), acc);
    }
    Ok(out)
}

/// The evaluation functional `1_ζ : p ↦ p(ζ)` restricted to `domain`.
pub fn evaluation_functional(
    shape: &Shape,
    zeta: &Point,
    domain: &[Monomial],
) -> Result<MomentFunctional> {
    Point::new(shape, zeta.coords.clone())?;
    let mut out = MomentFunctional::new(shape.clone());
    for m in domain {
        shape.check_monomial(m)?;
        out.insert_known(m.clone(), m.eval(zeta));
    }
    Ok(out)
}

/// `Σ_α f_α g_α ∏_i C(δ_i, α_i)`.
pub fn apolar_pairing(f: &Polynomial, g: &Polynomial) -> Result<Scalar> {
    if f.shape() != g.shape() {
        return Err(Error::ShapeMismatch("apolar pairing".into()));
    }
    f.check_within_degree()?;
    g.check_within_degree()?;
    let mut acc = ZERO;
    for (m, a) in f.terms() {
        if let Some(b) = g.terms().get(m) {
            acc += a * b * f.shape().multinomial_weight(m)? as f64;
        }
    }
    Ok(acc)
}

pub fn evaluate_poly(p: &Polynomial, zeta: &Point) -> Result<Scalar> {
    Point::new(p.shape(), zeta.coords.clone())?;
    Ok(p.terms().iter().map(|(m, c)| c * m.eval(zeta)).sum())
}

pub fn binomial(n: u64, k: u64) -> Result<u64> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return Err(Error::MultinomialOverflow);
        }
    }
    Ok(acc as u64)
}

/// `δ! / (α_1! ⋯ α_n! (δ − |α|)!)`, or 0 when `|α| > δ`.
pub fn multinomial(delta: u32, alpha: &[u32]) -> Result<u64> {
    let mut rest = delta as u64;
    let mut acc = 1u64;
    for &a in alpha {
        let a = a as u64;
        if a > rest {
            return Ok(0);
        }
        acc = acc
            .checked_mul(binomial(rest, a)?)
            .ok_or(Error::MultinomialOverflow)?;
        rest -= a;
    }
    Ok(acc)
}
