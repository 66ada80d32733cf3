//! Truncated series in q whose coefficients are Laurent polynomials in z and
//! lambda and polynomials in the formal symbol Lz = log z.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::One;

use crate::cohring::RatMatrix;
use crate::error::{QsdError, Result};
use crate::scalars::{binomial, factorial, rint, Coeff, Rat};

/// (z exponent, lambda exponent, Lz degree).
pub type Key = (i32, i32, u32);

/// Dense in q up to the truncation, sparse in (z, lambda, Lz).
#[derive(Clone, PartialEq)]
pub struct Series<C> {
    trunc: usize,
    layers: Vec<BTreeMap<Key, C>>,
}

impl<C: Coeff> fmt::Debug for Series<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Series[D={}]({})", self.trunc, self.render())
    }
}

fn add_into<C: Coeff>(map: &mut BTreeMap<Key, C>, k: Key, c: C) {
    if c.is_zero() {
        return;
    }
    match map.get_mut(&k) {
        Some(v) => {
            v.add_assign_ref(&c);
            if v.is_zero() {
                map.remove(&k);
            }
        }
        None => {
            map.insert(k, c);
        }
    }
}

impl<C: Coeff> Series<C> {
    pub fn zero(trunc: usize) -> Self {
        Series { trunc, layers: vec![BTreeMap::new(); trunc + 1] }
    }

    pub fn constant(trunc: usize, c: C) -> Self {
        Self::monomial(trunc, 0, (0, 0, 0), c)
    }

    pub fn one(trunc: usize) -> Self {
        Self::constant(trunc, C::one())
    }

    /// c q^d z^a lambda^b Lz^k; silently zero if d is past the truncation.
    pub fn monomial(trunc: usize, d: usize, key: Key, c: C) -> Self {
        let mut s = Self::zero(trunc);
        if d <= trunc {
            add_into(&mut s.layers[d], key, c);
        }
        s
    }

    pub fn z_power(trunc: usize, a: i32) -> Self {
        Self::monomial(trunc, 0, (a, 0, 0), C::one())
    }

    pub fn lambda(trunc: usize) -> Self {
        Self::monomial(trunc, 0, (0, 1, 0), C::one())
    }

    pub fn q(trunc: usize) -> Self {
        Self::monomial(trunc, 1, (0, 0, 0), C::one())
    }

    /// a + b lambda + c z
    pub fn linear(trunc: usize, a: C, b: C, c: C) -> Self {
        let mut s = Self::zero(trunc);
        add_into(&mut s.layers[0], (0, 0, 0), a);
        add_into(&mut s.layers[0], (0, 1, 0), b);
        add_into(&mut s.layers[0], (1, 0, 0), c);
        s
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn layer(&self, d: usize) -> &BTreeMap<Key, C> {
        &self.layers[d]
    }

    pub fn coeff(&self, d: usize, key: Key) -> C {
        self.layers.get(d).and_then(|l| l.get(&key)).cloned().unwrap_or_else(C::zero)
    }

    pub fn add_term(&mut self, d: usize, key: Key, c: C) {
        if d <= self.trunc {
            add_into(&mut self.layers[d], key, c);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, &Key, &C)> {
        self.layers.iter().enumerate().flat_map(|(d, l)| l.iter().map(move |(k, c)| (d, k, c)))
    }

    pub fn term_count(&self) -> usize {
        self.layers.iter().map(|l| l.len()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.layers.iter().all(|l| l.is_empty())
    }

    pub fn check_trunc(&self, o: &Self) -> Result<()> {
        if self.trunc == o.trunc {
            Ok(())
        } else {
            Err(QsdError::TruncationMismatch { left: self.trunc, right: o.trunc })
        }
    }

    pub fn checked_add(&self, o: &Self) -> Result<Self> {
        self.check_trunc(o)?;
        Ok(self.add_impl(o, false))
    }

    pub fn checked_sub(&self, o: &Self) -> Result<Self> {
        self.check_trunc(o)?;
        Ok(self.add_impl(o, true))
    }

    pub fn checked_mul(&self, o: &Self) -> Result<Self> {
        self.check_trunc(o)?;
        Ok(self.mul_impl(o))
    }

    fn add_impl(&self, o: &Self, negate: bool) -> Self {
        let mut out = self.clone();
        for (d, l) in o.layers.iter().enumerate() {
            for (k, c) in l {
                add_into(&mut out.layers[d], *k, if negate { c.neg_ref() } else { c.clone() });
            }
        }
        out
    }

    fn mul_impl(&self, o: &Self) -> Self {
        let mut out = Self::zero(self.trunc);
        for (d1, l1) in self.layers.iter().enumerate() {
            if l1.is_empty() {
                continue;
            }
            for (d2, l2) in o.layers.iter().enumerate().take(self.trunc + 1 - d1) {
                if l2.is_empty() {
                    continue;
                }
                let target = &mut out.layers[d1 + d2];
                for (k1, c1) in l1 {
                    for (k2, c2) in l2 {
                        let k = (k1.0 + k2.0, k1.1 + k2.1, k1.2 + k2.2);
                        add_into(target, k, c1.mul_ref(c2));
                    }
                }
            }
        }
        out
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Self::zero(self.trunc);
        }
        self.map_terms(|_, k, v| Some((*k, v.mul_ref(c))))
    }

    pub fn scale_rat(&self, r: &Rat) -> Self {
        self.scale(&C::from_rat(r.clone()))
    }

    /// Rebuild term by term; `f` may drop or rekey terms (colliding keys add).
    pub fn map_terms(&self, f: impl Fn(usize, &Key, &C) -> Option<(Key, C)>) -> Self {
        let mut out = Self::zero(self.trunc);
        for (d, l) in self.layers.iter().enumerate() {
            for (k, c) in l {
                if let Some((k2, c2)) = f(d, k, c) {
                    add_into(&mut out.layers[d], k2, c2);
                }
            }
        }
        out
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> Series<D> {
        let mut out = Series::<D>::zero(self.trunc);
        for (d, l) in self.layers.iter().enumerate() {
            for (k, c) in l {
                add_into(&mut out.layers[d], *k, f(c));
            }
        }
        out
    }

    /// Multiply by z^a.
    pub fn shift_z(&self, a: i32) -> Self {
        self.map_terms(|_, k, c| Some(((k.0 + a, k.1, k.2), c.clone())))
    }

    /// Multiply by q^k, dropping what falls past the truncation.
    pub fn shift_q(&self, k: usize) -> Self {
        let mut out = Self::zero(self.trunc);
        for d in 0..=self.trunc {
            if d + k <= self.trunc {
                out.layers[d + k] = self.layers[d].clone();
            }
        }
        out
    }

    /// Same coefficients at a different truncation.
    pub fn retruncate(&self, trunc: usize) -> Self {
        let mut out = Self::zero(trunc);
        for d in 0..=trunc.min(self.trunc) {
            out.layers[d] = self.layers[d].clone();
        }
        out
    }

    /// q d/dq
    pub fn q_derivative(&self) -> Self {
        self.map_terms(|d, k, c| Some((*k, c.mul_ref(&C::from_int(d as i64)))))
    }

    /// d/dz with d(Lz)/dz = 1/z.
    pub fn z_derivative(&self) -> Self {
        let mut out = Self::zero(self.trunc);
        for (d, l) in self.layers.iter().enumerate() {
            for (&(a, b, m), c) in l {
                if a != 0 {
                    add_into(&mut out.layers[d], (a - 1, b, m), c.mul_ref(&C::from_int(a as i64)));
                }
                if m > 0 {
                    add_into(&mut out.layers[d], (a - 1, b, m - 1), c.mul_ref(&C::from_int(m as i64)));
                }
            }
        }
        out
    }

    /// lambda d/dlambda
    pub fn lambda_euler(&self) -> Self {
        self.map_terms(|_, k, c| Some((*k, c.mul_ref(&C::from_int(k.1 as i64)))))
    }

    /// z -> -z, with Lz -> Lz + i*pi.
    pub fn flip_z(&self) -> Result<Self> {
        let mut out = Self::zero(self.trunc);
        let ipi = C::i_pi();
        for (d, l) in self.layers.iter().enumerate() {
            for (&(a, b, m), c) in l {
                let sign = if a.rem_euclid(2) == 1 { c.neg_ref() } else { c.clone() };
                if m == 0 {
                    add_into(&mut out.layers[d], (a, b, 0), sign);
                    continue;
                }
                let ipi = ipi.clone().ok_or_else(|| {
                    QsdError::InvalidArgument("z -> -z on Lz needs i*pi in the coefficients".into())
                })?;
                let mut pw = C::one();
                for j in 0..=m {
                    let bin = C::from_rat(Rat::from_integer(binomial(m as u64, j as u64)));
                    add_into(&mut out.layers[d], (a, b, m - j), sign.mul_ref(&bin).mul_ref(&pw));
                    pw = pw.mul_ref(&ipi);
                }
            }
        }
        Ok(out)
    }

    /// Coefficient of z^a, as a z-free series.
    pub fn z_coeff(&self, a: i32) -> Self {
        self.map_terms(|_, k, c| (k.0 == a).then(|| ((0, k.1, k.2), c.clone())))
    }

    pub fn max_z(&self) -> Option<i32> {
        self.terms().map(|(_, k, _)| k.0).max()
    }

    pub fn min_lambda(&self) -> Option<i32> {
        self.terms().map(|(_, k, _)| k.1).min()
    }

    pub fn has_lz(&self) -> bool {
        self.terms().any(|(_, k, _)| k.2 > 0)
    }

    pub fn has_lambda(&self) -> bool {
        self.terms().any(|(_, k, _)| k.1 != 0)
    }

    /// The lambda^0 layer, refusing if a negative lambda power survives.
    pub fn nonequivariant_limit(&self) -> Result<Self> {
        for (d, k, _) in self.terms() {
            if k.1 < 0 {
                return Err(QsdError::NegativeLambdaPower { q_degree: d, z_exp: k.0, lambda_exp: k.1 });
            }
        }
        Ok(self.map_terms(|_, k, c| (k.1 == 0).then(|| (*k, c.clone()))))
    }

    /// Substitute q -> q u(q); u must have an invertible constant q^0 layer.
    pub fn substitute_q(&self, u: &Self) -> Result<Self> {
        self.check_trunc(u)?;
        let l0 = &u.layers[0];
        if l0.len() != 1 || !l0.contains_key(&(0, 0, 0)) {
            return Err(QsdError::SubstitutionOverflow(
                "q-rescaling factor must start with a nonzero constant".into(),
            ));
        }
        let mut out = Self::zero(self.trunc);
        let mut upow = Self::one(self.trunc);
        for d in 0..=self.trunc {
            if !self.layers[d].is_empty() {
                let mut piece = Self::zero(self.trunc);
                piece.layers[d] = self.layers[d].clone();
                out = out.add_impl(&piece.mul_impl(&upow), false);
            }
            upow = upow.mul_impl(u);
        }
        Ok(out)
    }

    /// exp of a series with vanishing q^0 layer.
    pub fn exp(&self) -> Result<Self> {
        if !self.layers[0].is_empty() {
            return Err(QsdError::SubstitutionOverflow(
                "exp needs a series without q^0 part".into(),
            ));
        }
        let mut out = Self::one(self.trunc);
        let mut pw = Self::one(self.trunc);
        for k in 1..=self.trunc {
            pw = pw.mul_impl(self);
            let inv = C::from_rat(Rat::new(BigInt::one(), factorial(k as u64)));
            out = out.add_impl(&pw.scale(&inv), false);
        }
        Ok(out)
    }

    /// 1/s for s with a unit constant term and otherwise q-positive.
    pub fn inverse(&self) -> Result<Self> {
        let l0 = &self.layers[0];
        let c0 = match (l0.len(), l0.get(&(0, 0, 0))) {
            (1, Some(c)) => c.try_inv(),
            _ => None,
        }
        .ok_or_else(|| QsdError::NotUnipotent("series has no invertible constant term".into()))?;
        let u = self.scale(&c0);
        let nil = u.sub_impl_one();
        let mut out = Self::one(self.trunc);
        let mut pw = Self::one(self.trunc);
        for k in 1..=self.trunc {
            pw = pw.mul_impl(&nil);
            if k % 2 == 1 {
                out = out.add_impl(&pw, true);
            } else {
                out = out.add_impl(&pw, false);
            }
        }
        Ok(out.scale(&c0))
    }

    fn sub_impl_one(&self) -> Self {
        self.add_impl(&Self::one(self.trunc), true)
    }

    pub fn render(&self) -> String {
        let mut parts = Vec::new();
        for (d, k, c) in self.terms() {
            parts.push(format!("({})*{}", c.render(), render_key(d, k)));
        }
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    }
}

pub fn render_key(d: usize, k: &Key) -> String {
    format!("q^{}*z^{}*lambda^{}*Lz^{}", d, k.0, k.1, k.2)
}

impl<C: Coeff> Add for &Series<C> {
    type Output = Series<C>;
    fn add(self, o: &Series<C>) -> Series<C> {
        self.checked_add(o).expect("truncation mismatch")
    }
}

impl<C: Coeff> Sub for &Series<C> {
    type Output = Series<C>;
    fn sub(self, o: &Series<C>) -> Series<C> {
        self.checked_sub(o).expect("truncation mismatch")
    }
}

impl<C: Coeff> Mul for &Series<C> {
    type Output = Series<C>;
    fn mul(self, o: &Series<C>) -> Series<C> {
        self.checked_mul(o).expect("truncation mismatch")
    }
}

impl<C: Coeff> Neg for &Series<C> {
    type Output = Series<C>;
    fn neg(self) -> Series<C> {
        self.map_terms(|_, k, c| Some((*k, c.neg_ref())))
    }
}

/// One located nonzero coefficient in a residual.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Offender {
    pub row: usize,
    pub col: usize,
    pub q: usize,
    pub z: i32,
    pub lambda: i32,
    pub lz: u32,
    pub value: String,
}

impl fmt::Display for Offender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{},{}] q^{} z^{} lambda^{} Lz^{}: {}",
            self.row, self.col, self.q, self.z, self.lambda, self.lz, self.value
        )
    }
}

/// Square or rectangular matrix of series.
#[derive(Clone, PartialEq)]
pub struct SeriesMatrix<C> {
    pub trunc: usize,
    pub entries: Vec<Vec<Series<C>>>,
}

impl<C: Coeff> fmt::Debug for SeriesMatrix<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.iter()).finish()
    }
}

/// Column of series, one per basis element.
pub type SeriesVec<C> = Vec<Series<C>>;

impl<C: Coeff> SeriesMatrix<C> {
    pub fn zero(rows: usize, cols: usize, trunc: usize) -> Self {
        SeriesMatrix { trunc, entries: vec![vec![Series::zero(trunc); cols]; rows] }
    }

    pub fn identity(n: usize, trunc: usize) -> Self {
        let mut m = Self::zero(n, n, trunc);
        for k in 0..n {
            m.entries[k][k] = Series::one(trunc);
        }
        m
    }

    pub fn from_rat_matrix(a: &RatMatrix, trunc: usize) -> Self {
        SeriesMatrix {
            trunc,
            entries: a
                .iter()
                .map(|r| r.iter().map(|x| Series::constant(trunc, C::from_rat(x.clone()))).collect())
                .collect(),
        }
    }

    pub fn from_columns(cols: &[SeriesVec<C>], trunc: usize) -> Self {
        let rows = cols.first().map_or(0, |c| c.len());
        let mut m = Self::zero(rows, cols.len(), trunc);
        for (j, col) in cols.iter().enumerate() {
            for (i, s) in col.iter().enumerate() {
                m.entries[i][j] = s.clone();
            }
        }
        m
    }

    /// Matrix of multiplication by a class-valued series in Q[H]/(H^len).
    pub fn cup_matrix(v: &[Series<C>], trunc: usize) -> Self {
        let n = v.len();
        let mut m = Self::zero(n, n, trunc);
        for j in 0..n {
            for i in j..n {
                m.entries[i][j] = v[i - j].clone();
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn cols(&self) -> usize {
        self.entries.first().map_or(0, |r| r.len())
    }

    pub fn column(&self, j: usize) -> SeriesVec<C> {
        self.entries.iter().map(|r| r[j].clone()).collect()
    }

    pub fn map(&self, f: impl Fn(&Series<C>) -> Series<C>) -> Self {
        SeriesMatrix {
            trunc: self.trunc,
            entries: self.entries.iter().map(|r| r.iter().map(&f).collect()).collect(),
        }
    }

    pub fn try_map(&self, f: impl Fn(&Series<C>) -> Result<Series<C>>) -> Result<Self> {
        let mut entries = Vec::with_capacity(self.rows());
        for r in &self.entries {
            entries.push(r.iter().map(&f).collect::<Result<Vec<_>>>()?);
        }
        Ok(SeriesMatrix { trunc: self.trunc, entries })
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D + Copy) -> SeriesMatrix<D> {
        SeriesMatrix {
            trunc: self.trunc,
            entries: self
                .entries
                .iter()
                .map(|r| r.iter().map(|s| s.map_coeffs(f)).collect())
                .collect(),
        }
    }

    pub fn checked_mul(&self, o: &Self) -> Result<Self> {
        if self.trunc != o.trunc {
            return Err(QsdError::TruncationMismatch { left: self.trunc, right: o.trunc });
        }
        if self.cols() != o.rows() {
            return Err(QsdError::InvalidArgument("matrix shape mismatch".into()));
        }
        let (rows, inner, cols) = (self.rows(), self.cols(), o.cols());
        let mut out = Self::zero(rows, cols, self.trunc);
        for i in 0..rows {
            for j in 0..cols {
                let mut acc = Series::zero(self.trunc);
                for k in 0..inner {
                    let a = &self.entries[i][k];
                    let b = &o.entries[k][j];
                    if a.is_zero() || b.is_zero() {
                        continue;
                    }
                    acc = acc.add_impl(&a.mul_impl(b), false);
                }
                out.entries[i][j] = acc;
            }
        }
        Ok(out)
    }

    pub fn apply(&self, v: &[Series<C>]) -> SeriesVec<C> {
        self.entries
            .iter()
            .map(|row| {
                let mut acc = Series::zero(self.trunc);
                for (a, b) in row.iter().zip(v) {
                    if !a.is_zero() && !b.is_zero() {
                        acc = acc.add_impl(&a.mul_impl(b), false);
                    }
                }
                acc
            })
            .collect()
    }

    fn zip(&self, o: &Self, negate: bool) -> Self {
        SeriesMatrix {
            trunc: self.trunc,
            entries: self
                .entries
                .iter()
                .zip(&o.entries)
                .map(|(ra, rb)| ra.iter().zip(rb).map(|(a, b)| a.add_impl(b, negate)).collect())
                .collect(),
        }
    }

    pub fn checked_add(&self, o: &Self) -> Result<Self> {
        if self.trunc != o.trunc {
            return Err(QsdError::TruncationMismatch { left: self.trunc, right: o.trunc });
        }
        Ok(self.zip(o, false))
    }

    pub fn checked_sub(&self, o: &Self) -> Result<Self> {
        if self.trunc != o.trunc {
            return Err(QsdError::TruncationMismatch { left: self.trunc, right: o.trunc });
        }
        Ok(self.zip(o, true))
    }

    pub fn scale(&self, s: &Series<C>) -> Self {
        self.map(|e| e.mul_impl(s))
    }

    pub fn scale_c(&self, c: &C) -> Self {
        self.map(|e| e.scale(c))
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zero(self.cols(), self.rows(), self.trunc);
        for (i, r) in self.entries.iter().enumerate() {
            for (j, e) in r.iter().enumerate() {
                m.entries[j][i] = e.clone();
            }
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|r| r.iter().all(|e| e.is_zero()))
    }

    /// The q^0 layer only.
    pub fn q0(&self) -> Self {
        self.map(|e| e.map_terms(|d, k, c| (d == 0).then(|| (*k, c.clone()))))
    }

    /// Up to `limit` located nonzero coefficients.
    pub fn offenders(&self, limit: usize) -> Vec<Offender> {
        let mut out = Vec::new();
        for (i, r) in self.entries.iter().enumerate() {
            for (j, e) in r.iter().enumerate() {
                for (d, k, c) in e.terms() {
                    if out.len() >= limit {
                        return out;
                    }
                    out.push(Offender {
                        row: i,
                        col: j,
                        q: d,
                        z: k.0,
                        lambda: k.1,
                        lz: k.2,
                        value: c.render(),
                    });
                }
            }
        }
        out
    }

    pub fn nonequivariant_limit(&self) -> Result<Self> {
        self.try_map(|e| e.nonequivariant_limit())
    }

    /// Sum of powers of a nilpotent-at-q^0 perturbation, weighted by `weight(k)`.
    fn power_series(&self, weight: impl Fn(usize) -> C) -> Result<Self> {
        let n = self.rows();
        let n0 = self.q0();
        let mut p = Self::identity(n, self.trunc);
        for _ in 0..n {
            p = p.checked_mul(&n0)?;
        }
        if !p.is_zero() {
            return Err(QsdError::NotUnipotent("q^0 part is not nilpotent".into()));
        }
        let mut out = Self::identity(n, self.trunc);
        let mut pw = Self::identity(n, self.trunc);
        let bound = (self.trunc + 1) * n + 1;
        for k in 1..=bound {
            pw = pw.checked_mul(self)?;
            if pw.is_zero() {
                return Ok(out);
            }
            out = out.zip(&pw.scale_c(&weight(k)), false);
        }
        Err(QsdError::NotUnipotent("power series did not terminate".into()))
    }

    /// Inverse of Id + N with N nilpotent at q^0.
    pub fn invert_unipotent(&self) -> Result<Self> {
        let n = self.rows();
        if n != self.cols() {
            return Err(QsdError::NotUnipotent("matrix is not square".into()));
        }
        let nil = self.zip(&Self::identity(n, self.trunc), true);
        let neg = nil.scale_c(&C::from_int(-1));
        neg.power_series(|_| C::one())
    }

    /// exp of a matrix nilpotent at q^0.
    pub fn exp(&self) -> Result<Self> {
        self.power_series(|k| C::from_rat(Rat::new(BigInt::one(), factorial(k as u64))))
    }

    pub fn q_derivative(&self) -> Self {
        self.map(|e| e.q_derivative())
    }

    pub fn z_derivative(&self) -> Self {
        self.map(|e| e.z_derivative())
    }

    pub fn lambda_euler(&self) -> Self {
        self.map(|e| e.lambda_euler())
    }

    pub fn flip_z(&self) -> Result<Self> {
        self.try_map(|e| e.flip_z())
    }

    pub fn shift_z(&self, a: i32) -> Self {
        self.map(|e| e.shift_z(a))
    }
}

impl<C: Coeff> Mul for &SeriesMatrix<C> {
    type Output = SeriesMatrix<C>;
    fn mul(self, o: &SeriesMatrix<C>) -> SeriesMatrix<C> {
        self.checked_mul(o).expect("matrix product mismatch")
    }
}

impl<C: Coeff> Add for &SeriesMatrix<C> {
    type Output = SeriesMatrix<C>;
    fn add(self, o: &SeriesMatrix<C>) -> SeriesMatrix<C> {
        self.checked_add(o).expect("truncation mismatch")
    }
}

impl<C: Coeff> Sub for &SeriesMatrix<C> {
    type Output = SeriesMatrix<C>;
    fn sub(self, o: &SeriesMatrix<C>) -> SeriesMatrix<C> {
        self.checked_sub(o).expect("truncation mismatch")
    }
}

impl<C: Coeff> Add for SeriesMatrix<C> {
    type Output = SeriesMatrix<C>;
    fn add(self, o: SeriesMatrix<C>) -> SeriesMatrix<C> {
        &self + &o
    }
}

impl<C: Coeff> Sub for SeriesMatrix<C> {
    type Output = SeriesMatrix<C>;
    fn sub(self, o: SeriesMatrix<C>) -> SeriesMatrix<C> {
        &self - &o
    }
}

/// The solution at t = tau0 + tau2 H, from the one at the base point:
/// L(q e^{tau2}) exp(-(tau0 + tau2 H)/z). `cup_h` is H on the section basis.
pub fn divisor_shift<C: Coeff>(
    l: &SeriesMatrix<C>,
    tau0: &Series<C>,
    tau2: &Series<C>,
    cup_h: &SeriesMatrix<C>,
) -> Result<SeriesMatrix<C>> {
    let trunc = l.trunc;
    for (name, t) in [("tau0", tau0), ("tau2", tau2)] {
        if t.trunc() != trunc {
            return Err(QsdError::TruncationMismatch { left: trunc, right: t.trunc() });
        }
        if t.terms().any(|(_, k, _)| k.0 != 0 || k.2 != 0) {
            return Err(QsdError::InvalidArgument(format!("{name} must be z-free")));
        }
    }
    if !tau0.layer(0).is_empty() {
        return Err(QsdError::SubstitutionOverflow(
            "a constant tau0 needs an infinite tail in 1/z".into(),
        ));
    }
    let l0 = tau2.layer(0);
    let c0 = match l0.len() {
        0 => C::zero(),
        1 if l0.contains_key(&(0, 0, 0)) => l0[&(0, 0, 0)].clone(),
        _ => {
            return Err(QsdError::SubstitutionOverflow(
                "constant part of tau2 must be lambda-free".into(),
            ))
        }
    };
    let sign = c0.exp_const().ok_or_else(|| {
        QsdError::SubstitutionOverflow(format!("exp({}) is not exactly known", c0.render()))
    })?;
    let rest = tau2 - &Series::constant(trunc, c0);
    let u = rest.exp()?.scale(&sign);
    let shifted = l.try_map(|e| e.substitute_q(&u))?;
    let e0 = tau0.shift_z(-1).scale(&C::from_int(-1)).exp()?;
    let nil = cup_h.scale(&tau2.shift_z(-1)).scale_c(&C::from_int(-1));
    let e2 = nil.exp()?.scale(&e0);
    shifted.checked_mul(&e2)
}

/// Constant rational 1/k! as a coefficient.
pub fn inv_factorial<C: Coeff>(k: u64) -> C {
    C::from_rat(Rat::new(BigInt::one(), factorial(k)))
}

pub fn rc<C: Coeff>(n: i64) -> C {
    C::from_rat(rint(n))
}
