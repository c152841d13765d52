//! Small finite fields GF(q) and canonical projective coordinates.
//!
//! Elements of GF(p^k) are encoded as integers `0..q`: the base-`p` digits of
//! the encoding are the coefficients of a polynomial of degree `< k`, lowest
//! degree first. For GF(4) with modulus `x^2 + x + 1` the element `x` is `2`
//! and `x + 1` is `3`.

use std::fmt;

use thiserror::Error;

/// Field element, encoded as described in the module docs.
pub type Elem = u32;

/// Largest prime order accepted by [`Field::new`].
pub const MAX_PRIME_ORDER: u32 = 65_521;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("{0} is not a prime power")]
    NotAPrimePower(u32),
    #[error("field order {0} is not supported (primes up to {MAX_PRIME_ORDER} and 4, 8, 9)")]
    Unsupported(u32),
    #[error("division by zero")]
    DivisionByZero,
    #[error("element {elem} is not in GF({order})")]
    InvalidElement { elem: Elem, order: u32 },
    #[error("zero vector has no projective point")]
    ZeroVector,
    #[error("field table check failed: {0}")]
    AxiomFailure(String),
}

/// Irreducible moduli for the supported extension fields, as coefficient
/// lists (lowest degree first, monic).
const EXTENSION_MODULI: &[(u32, u32, u32, &[u32])] = &[
    // (q, p, k, modulus)
    (4, 2, 2, &[1, 1, 1]),    // x^2 + x + 1
    (8, 2, 3, &[1, 1, 0, 1]), // x^3 + x + 1
    (9, 3, 2, &[1, 0, 1]),    // x^2 + 1
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FieldOp {
    Add,
    Mul,
    Neg,
    Inv,
}

#[derive(Clone)]
enum Repr {
    Prime,
    Extension { add: Vec<Elem>, mul: Vec<Elem> },
}

/// A finite field of order `q = p^k`.
#[derive(Clone)]
pub struct Field {
    order: u32,
    characteristic: u32,
    degree: u32,
    modulus: Vec<u32>,
    neg: Vec<Elem>,
    inv: Vec<Elem>,
    repr: Repr,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("order", &self.order)
            .field("characteristic", &self.characteristic)
            .field("degree", &self.degree)
            .field("modulus", &self.modulus)
            .finish()
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order && self.modulus == other.modulus
    }
}

impl Eq for Field {}

/// Returns `(p, k)` with `q = p^k`, or `None` when `q` is not a prime power.
pub fn prime_power(q: u32) -> Option<(u32, u32)> {
    if q < 2 {
        return None;
    }
    let mut p = 2;
    while p * p <= q && !q.is_multiple_of(p) {
        p += 1;
    }
    if !q.is_multiple_of(p) {
        // q itself is prime
        return Some((q, 1));
    }
    let mut rest = q;
    let mut k = 0;
    while rest.is_multiple_of(p) {
        rest /= p;
        k += 1;
    }
    (rest == 1).then_some((p, k))
}

impl Field {
    /// Builds GF(q), checking the field axioms on the resulting tables.
    pub fn new(q: u32) -> Result<Self, AlgebraError> {
        let (p, k) = prime_power(q).ok_or(AlgebraError::NotAPrimePower(q))?;
        let field = if k == 1 {
            if q > MAX_PRIME_ORDER {
                return Err(AlgebraError::Unsupported(q));
            }
            Self::prime(p)
        } else {
            let &(_, _, _, modulus) = EXTENSION_MODULI
                .iter()
                .find(|entry| entry.0 == q)
                .ok_or(AlgebraError::Unsupported(q))?;
            Self::extension(p, k, modulus)?
        };
        field.check_axioms()?;
        Ok(field)
    }

    fn prime(p: u32) -> Self {
        let neg = (0..p).map(|a| (p - a) % p).collect();
        let mut inv = vec![0; p as usize];
        for a in 1..p {
            inv[a as usize] = mod_pow(a as u64, (p - 2) as u64, p as u64) as u32;
        }
        Field {
            order: p,
            characteristic: p,
            degree: 1,
            modulus: vec![0, 1],
            neg,
            inv,
            repr: Repr::Prime,
        }
    }

    fn extension(p: u32, k: u32, modulus: &[u32]) -> Result<Self, AlgebraError> {
        let q = p.pow(k);
        let n = q as usize;
        let digits = |a: u32| -> Vec<u32> {
            let mut a = a;
            (0..k)
                .map(|_| {
                    let d = a % p;
                    a /= p;
                    d
                })
                .collect()
        };
        let encode = |ds: &[u32]| -> u32 { ds.iter().rev().fold(0, |acc, &d| acc * p + d) };

        let mut add = vec![0; n * n];
        let mut mul = vec![0; n * n];
        for a in 0..q {
            let da = digits(a);
            for b in 0..q {
                let db = digits(b);
                let sum: Vec<u32> = da.iter().zip(&db).map(|(x, y)| (x + y) % p).collect();
                add[(a * q + b) as usize] = encode(&sum);

                // schoolbook product, then reduce by the monic modulus
                let mut prod = vec![0u32; (2 * k - 1) as usize];
                for (i, x) in da.iter().enumerate() {
                    for (j, y) in db.iter().enumerate() {
                        prod[i + j] = (prod[i + j] + x * y) % p;
                    }
                }
                for deg in (k as usize..prod.len()).rev() {
                    let lead = prod[deg];
                    if lead == 0 {
                        continue;
                    }
                    let shift = deg - k as usize;
                    for (i, m) in modulus.iter().enumerate() {
                        prod[shift + i] = (prod[shift + i] + p * p - lead * m % p) % p;
                    }
                }
                mul[(a * q + b) as usize] = encode(&prod[..k as usize]);
            }
        }

        let neg = (0..q)
            .map(|a| {
                (0..q)
                    .find(|&b| add[(a * q + b) as usize] == 0)
                    .unwrap_or(0)
            })
            .collect();
        let mut inv = vec![0; n];
        for a in 1..q {
            inv[a as usize] = (1..q)
                .find(|&b| mul[(a * q + b) as usize] == 1)
                .ok_or_else(|| AlgebraError::AxiomFailure(format!("{a} has no inverse")))?;
        }
        Ok(Field {
            order: q,
            characteristic: p,
            degree: k,
            modulus: modulus.to_vec(),
            neg,
            inv,
            repr: Repr::Extension { add, mul },
        })
    }

    fn check_axioms(&self) -> Result<(), AlgebraError> {
        let q = self.order;
        for a in 1..q {
            if self.mul(a, self.inv[a as usize]) != 1 {
                return Err(AlgebraError::AxiomFailure(format!("{a} * {a}^-1 != 1")));
            }
        }
        for a in 0..q {
            if self.add(a, self.neg[a as usize]) != 0 {
                return Err(AlgebraError::AxiomFailure(format!("{a} + (-{a}) != 0")));
            }
        }
        if let Repr::Extension { .. } = self.repr {
            for a in 0..q {
                for b in 0..q {
                    if self.add(a, b) >= q || self.mul(a, b) >= q {
                        return Err(AlgebraError::AxiomFailure("closure".into()));
                    }
                    for c in 0..q {
                        if self.mul(self.mul(a, b), c) != self.mul(a, self.mul(b, c)) {
                            return Err(AlgebraError::AxiomFailure(format!(
                                "multiplication not associative at ({a},{b},{c})"
                            )));
                        }
                        if self.add(self.add(a, b), c) != self.add(a, self.add(b, c)) {
                            return Err(AlgebraError::AxiomFailure(format!(
                                "addition not associative at ({a},{b},{c})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn characteristic(&self) -> u32 {
        self.characteristic
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Coefficients of the defining polynomial, lowest degree first.
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    pub fn elements(&self) -> impl Iterator<Item = Elem> {
        0..self.order
    }

    #[inline]
    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        match &self.repr {
            Repr::Prime => (a + b) % self.order,
            Repr::Extension { add, .. } => add[(a * self.order + b) as usize],
        }
    }

    #[inline]
    pub fn sub(&self, a: Elem, b: Elem) -> Elem {
        self.add(a, self.neg[b as usize])
    }

    #[inline]
    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        match &self.repr {
            Repr::Prime => ((a as u64 * b as u64) % self.order as u64) as Elem,
            Repr::Extension { mul, .. } => mul[(a * self.order + b) as usize],
        }
    }

    #[inline]
    pub fn neg(&self, a: Elem) -> Elem {
        self.neg[a as usize]
    }

    pub fn inv(&self, a: Elem) -> Result<Elem, AlgebraError> {
        if a == 0 {
            return Err(AlgebraError::DivisionByZero);
        }
        Ok(self.inv[a as usize])
    }

    /// Applies `op` after validating its operands. `b` is only read by the
    /// binary operations.
    pub fn arith(&self, op: FieldOp, a: Elem, b: Option<Elem>) -> Result<Elem, AlgebraError> {
        self.check(a)?;
        let rhs = || -> Result<Elem, AlgebraError> {
            let b = b.ok_or(AlgebraError::InvalidElement {
                elem: u32::MAX,
                order: self.order,
            })?;
            self.check(b)?;
            Ok(b)
        };
        match op {
            FieldOp::Add => Ok(self.add(a, rhs()?)),
            FieldOp::Mul => Ok(self.mul(a, rhs()?)),
            FieldOp::Neg => Ok(self.neg(a)),
            FieldOp::Inv => self.inv(a),
        }
    }

    fn check(&self, a: Elem) -> Result<(), AlgebraError> {
        if a < self.order {
            Ok(())
        } else {
            Err(AlgebraError::InvalidElement {
                elem: a,
                order: self.order,
            })
        }
    }

    /// Dot product of two coordinate vectors.
    pub fn dot(&self, u: &[Elem], v: &[Elem]) -> Elem {
        u.iter()
            .zip(v)
            .fold(0, |acc, (&a, &b)| self.add(acc, self.mul(a, b)))
    }

    pub fn scale(&self, lambda: Elem, v: &[Elem]) -> Vec<Elem> {
        v.iter().map(|&a| self.mul(lambda, a)).collect()
    }

    /// `a*u + b*v`
    pub fn combine(&self, a: Elem, u: &[Elem], b: Elem, v: &[Elem]) -> Vec<Elem> {
        u.iter()
            .zip(v)
            .map(|(&x, &y)| self.add(self.mul(a, x), self.mul(b, y)))
            .collect()
    }
}

fn mod_pow(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        exp >>= 1;
    }
    acc
}

/// A point of a projective space over a finite field, stored in canonical
/// form: the leftmost nonzero coordinate is 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProjectivePoint {
    coords: Vec<Elem>,
}

impl ProjectivePoint {
    pub fn coords(&self) -> &[Elem] {
        &self.coords
    }

    pub fn dimension(&self) -> usize {
        self.coords.len() - 1
    }
}

impl fmt::Display for ProjectivePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Scales `v` so that its first nonzero coordinate is 1.
pub fn proj_normalize(field: &Field, v: &[Elem]) -> Result<ProjectivePoint, AlgebraError> {
    for &c in v {
        field.check(c)?;
    }
    let lead = *v
        .iter()
        .find(|&&c| c != 0)
        .ok_or(AlgebraError::ZeroVector)?;
    let scale = field.inv(lead)?;
    Ok(ProjectivePoint {
        coords: field.scale(scale, v),
    })
}

/// All points of PG(dim, q) in lexicographic order of canonical coordinates.
pub fn projective_points(field: &Field, dim: usize) -> Vec<ProjectivePoint> {
    let q = field.order();
    let len = dim + 1;
    let mut out = Vec::new();
    for lead in 0..len {
        let free = len - lead - 1;
        let total = (q as usize).pow(free as u32);
        for idx in 0..total {
            let mut coords = vec![0; len];
            coords[lead] = 1;
            let mut rest = idx;
            for slot in (lead + 1..len).rev() {
                coords[slot] = (rest % q as usize) as Elem;
                rest /= q as usize;
            }
            out.push(ProjectivePoint { coords });
        }
    }
    out.sort();
    out
}

/// Dense index from canonical coordinates to a position in a point list.
#[derive(Clone, Debug)]
pub struct PointIndex {
    q: usize,
    slots: Vec<Option<usize>>,
}

impl PointIndex {
    pub fn new(field: &Field, dim: usize, points: &[ProjectivePoint]) -> Self {
        let q = field.order() as usize;
        let mut slots = vec![None; q.pow(dim as u32 + 1)];
        let mut index = PointIndex {
            q,
            slots: Vec::new(),
        };
        for (id, p) in points.iter().enumerate() {
            slots[index.key(p.coords())] = Some(id);
        }
        index.slots = slots;
        index
    }

    fn key(&self, coords: &[Elem]) -> usize {
        coords.iter().fold(0, |acc, &c| acc * self.q + c as usize)
    }

    pub fn get(&self, p: &ProjectivePoint) -> Option<usize> {
        self.slots.get(self.key(p.coords())).copied().flatten()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn rejects_non_prime_powers() {
        assert_eq!(Field::new(6), Err(AlgebraError::NotAPrimePower(6)));
        assert_eq!(Field::new(1), Err(AlgebraError::NotAPrimePower(1)));
        assert_eq!(Field::new(12), Err(AlgebraError::NotAPrimePower(12)));
        assert_eq!(Field::new(16), Err(AlgebraError::Unsupported(16)));
        assert_eq!(Field::new(27), Err(AlgebraError::Unsupported(27)));
    }

    #[test]
    fn prime_field_arithmetic() {
        let f7 = Field::new(7).unwrap();
        assert_eq!(f7.inv(3), Ok(5));
        let f5 = Field::new(5).unwrap();
        assert_eq!(f5.arith(FieldOp::Add, 2, Some(4)), Ok(1));
        let f2 = Field::new(2).unwrap();
        assert_eq!(f2.arith(FieldOp::Add, 1, Some(1)), Ok(0));
        assert_eq!(
            f7.arith(FieldOp::Inv, 0, None),
            Err(AlgebraError::DivisionByZero)
        );
        assert!(matches!(
            f7.arith(FieldOp::Mul, 7, Some(1)),
            Err(AlgebraError::InvalidElement { .. })
        ));
    }

    #[test]
    fn extension_fields_follow_their_modulus() {
        // x = 2, x + 1 = 3 in GF(4)
        let f4 = Field::new(4).unwrap();
        assert_eq!(f4.mul(2, 2), 3);
        // x = 3 in GF(9), -1 = 2
        let f9 = Field::new(9).unwrap();
        assert_eq!(f9.mul(3, 3), 2);
        // x^3 = x + 1 in GF(8): x = 2, x^2 = 4, x + 1 = 3
        let f8 = Field::new(8).unwrap();
        assert_eq!(f8.mul(2, 4), 3);
        assert_eq!(f8.characteristic(), 2);
        assert_eq!(f8.degree(), 3);
    }

    #[test]
    fn exhaustive_axiom_sweep() {
        for q in [2, 3, 4, 5, 7, 8, 9] {
            let f = Field::new(q).unwrap();
            for a in f.elements() {
                assert_eq!(f.add(a, 0), a);
                assert_eq!(f.mul(a, 1), a);
                for b in f.elements() {
                    assert_eq!(f.add(a, b), f.add(b, a), "q={q}");
                    assert_eq!(f.mul(a, b), f.mul(b, a), "q={q}");
                    for c in f.elements() {
                        assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
                        assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                        assert_eq!(
                            f.mul(a, f.add(b, c)),
                            f.add(f.mul(a, b), f.mul(a, c)),
                            "distributivity q={q}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn normalize_examples() {
        let f3 = Field::new(3).unwrap();
        assert_eq!(
            proj_normalize(&f3, &[2, 1, 0]).unwrap().coords(),
            &[1, 2, 0]
        );
        let f5 = Field::new(5).unwrap();
        assert_eq!(
            proj_normalize(&f5, &[0, 0, 3, 0]).unwrap().coords(),
            &[0, 0, 1, 0]
        );
        let f2 = Field::new(2).unwrap();
        assert_eq!(
            proj_normalize(&f2, &[1, 1, 0, 1]).unwrap().coords(),
            &[1, 1, 0, 1]
        );
        assert_eq!(
            proj_normalize(&f2, &[0, 0, 0]),
            Err(AlgebraError::ZeroVector)
        );
    }

    fn all_vectors(q: u32, len: usize) -> Vec<Vec<Elem>> {
        let total = (q as usize).pow(len as u32);
        (0..total)
            .map(|mut idx| {
                let mut v = vec![0; len];
                for slot in v.iter_mut().rev() {
                    *slot = (idx % q as usize) as Elem;
                    idx /= q as usize;
                }
                v
            })
            .collect()
    }

    #[test]
    fn projective_point_counts_by_brute_force() {
        for q in [2u32, 3, 4, 5, 7] {
            let f = Field::new(q).unwrap();
            for dim in [2usize, 3, 4] {
                let distinct: BTreeSet<ProjectivePoint> = all_vectors(q, dim + 1)
                    .into_iter()
                    .filter(|v| v.iter().any(|&c| c != 0))
                    .map(|v| proj_normalize(&f, &v).unwrap())
                    .collect();
                let expected = (q.pow(dim as u32 + 1) - 1) / (q - 1);
                assert_eq!(distinct.len(), expected as usize, "PG({dim},{q})");
                let listed = projective_points(&f, dim);
                assert_eq!(listed.len(), distinct.len());
                assert!(listed.iter().eq(distinct.iter()));
            }
        }
    }

    #[test]
    fn point_index_round_trips() {
        let f = Field::new(3).unwrap();
        let pts = projective_points(&f, 3);
        let index = PointIndex::new(&f, 3, &pts);
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(index.get(p), Some(i));
        }
    }

    #[test]
    fn scaling_invariance_exhaustive() {
        for q in [2u32, 3, 4, 5, 7, 8, 9] {
            let f = Field::new(q).unwrap();
            let dims: &[usize] = if q <= 5 { &[3, 4, 5] } else { &[3] };
            for &len in dims {
                for v in all_vectors(q, len) {
                    if v.iter().all(|&c| c == 0) {
                        continue;
                    }
                    let base = proj_normalize(&f, &v).unwrap();
                    for lambda in 1..q {
                        let scaled = f.scale(lambda, &v);
                        assert_eq!(proj_normalize(&f, &scaled).unwrap(), base);
                    }
                }
            }
        }
    }
}
