//! Chern character, Todd and Gamma classes, equivariant Euler classes, and
//! the grading-type operators that turn classes into flat sections.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::cohring::{BundleModel, CohClass, SpaceModel};
use crate::error::{QsdError, Result};
use crate::scalars::{bernoulli_table, factorial, rint, Coeff, Rat, Scalar};
use crate::series::{inv_factorial, Series, SeriesMatrix, SeriesVec};

/// Truncated product of univariate coefficient vectors.
pub fn poly_mul<C: Coeff>(a: &[C], b: &[C], len: usize) -> Vec<C> {
    let mut out = vec![C::zero(); len];
    for (i, x) in a.iter().enumerate().take(len) {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(len - i) {
            if !y.is_zero() {
                out[i + j].add_assign_ref(&x.mul_ref(y));
            }
        }
    }
    out
}

/// exp of a univariate series with zero constant term, to `len` coefficients.
pub fn poly_exp<C: Coeff>(a: &[C], len: usize) -> Vec<C> {
    assert!(a.first().is_none_or(|c| c.is_zero()), "exp needs a nilpotent argument");
    let mut out = vec![C::zero(); len];
    if len == 0 {
        return out;
    }
    out[0] = C::one();
    let mut pw = out.clone();
    for k in 1..len {
        pw = poly_mul(&pw, a, len);
        let w: C = inv_factorial(k as u64);
        for (o, p) in out.iter_mut().zip(&pw) {
            o.add_assign_ref(&p.mul_ref(&w));
        }
    }
    out
}

/// exp(a H) on P^n.
pub fn ch_line(a: i64, x: &SpaceModel) -> CohClass {
    let len = x.rank();
    CohClass::from_coeffs(
        (0..len)
            .map(|k| rint(a).pow(k as i32) / Rat::from_integer(factorial(k as u64)))
            .collect(),
    )
}

/// ch of the tangent bundle through the Euler sequence.
pub fn ch_tangent(x: &SpaceModel) -> CohClass {
    ch_line(1, x).scale(&rint(x.dim as i64 + 1)).sub(&CohClass::one(x.rank()))
}

pub fn ch_bundle(b: &BundleModel, x: &SpaceModel) -> CohClass {
    b.line_degrees
        .iter()
        .fold(CohClass::zero(x.rank()), |acc, &l| acc.add(&ch_line(l, x)))
}

/// prod x/(1 - e^{-x}) over roots given as multiples of H.
pub fn todd_roots(roots: &[i64], x: &SpaceModel) -> CohClass {
    let len = x.rank();
    let b = bernoulli_table(len);
    roots.iter().fold(CohClass::one(len), |acc, &l| {
        let f = CohClass::from_coeffs(
            (0..len)
                .map(|k| {
                    let sign = if k % 2 == 1 { -Rat::one() } else { Rat::one() };
                    sign * &b[k] * rint(l).pow(k as i32) / Rat::from_integer(factorial(k as u64))
                })
                .collect(),
        );
        acc.cup(&f)
    })
}

pub fn todd(b: &BundleModel, x: &SpaceModel) -> CohClass {
    todd_roots(&b.line_degrees, x)
}

/// Td(TP^n) from n+1 copies of H.
pub fn todd_tangent(x: &SpaceModel) -> CohClass {
    todd_roots(&vec![1; x.dim + 1], x)
}

/// Equivariant Euler class as a class-valued series: prod(lambda + l H), or
/// prod(-lambda - l H) for the dual.
pub fn euler_equiv(b: &BundleModel, dualize: bool, x: &SpaceModel, trunc: usize) -> SeriesVec<Rat> {
    let len = x.rank();
    let mut acc: SeriesVec<Rat> = (0..len)
        .map(|k| if k == 0 { Series::one(trunc) } else { Series::zero(trunc) })
        .collect();
    let s = if dualize { -1 } else { 1 };
    for &l in &b.line_degrees {
        let mut factor = vec![Series::zero(trunc); len];
        factor[0] = Series::monomial(trunc, 0, (0, 1, 0), rint(s));
        if len > 1 {
            factor[1] = Series::constant(trunc, rint(s * l));
        }
        acc = cup_vec(&acc, &factor);
    }
    acc
}

/// Product in Q[H]/(H^len) of class-valued series.
pub fn cup_vec<C: Coeff>(a: &[Series<C>], b: &[Series<C>]) -> SeriesVec<C> {
    let len = a.len();
    let trunc = a.first().map_or(0, |s| s.trunc());
    let mut out = vec![Series::zero(trunc); len];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(len - i) {
            if !y.is_zero() {
                out[i + j] = &out[i + j] + &(x * y);
            }
        }
    }
    out
}

pub fn class_to_vec<C: Coeff>(c: &CohClass<C>, trunc: usize) -> SeriesVec<C> {
    c.coeffs.iter().map(|x| Series::constant(trunc, x.clone())).collect()
}

pub fn rat_class_to<C: Coeff>(c: &CohClass) -> CohClass<C> {
    c.map(|x| C::from_rat(x.clone()))
}

/// Coefficients of log Gamma(1 + x): -g x + sum_{k>=2} (-1)^k zeta(k) x^k / k.
pub fn log_gamma_coeffs(len: usize) -> Vec<Scalar> {
    (0..len)
        .map(|k| match k {
            0 => Scalar::zero(),
            1 => -Scalar::euler_gamma(),
            k => {
                let sign = if k % 2 == 0 { 1 } else { -1 };
                Scalar::zeta(k as u32)
                    .expect("k >= 2")
                    .scale(&Rat::new(BigInt::from(sign), BigInt::from(k)))
            }
        })
        .collect()
}

/// prod Gamma(1 + root) for roots l H.
pub fn gamma_roots(roots: &[i64], x: &SpaceModel) -> CohClass<Scalar> {
    let len = x.rank();
    let lg = log_gamma_coeffs(len);
    let mut log = vec![Scalar::zero(); len];
    for &l in roots {
        for (k, c) in lg.iter().enumerate() {
            log[k] += &c.scale(&rint(l).pow(k as i32));
        }
    }
    CohClass::from_coeffs(poly_exp(&log, len))
}

pub fn gamma_class(b: &BundleModel, x: &SpaceModel) -> CohClass<Scalar> {
    gamma_roots(&b.line_degrees, x)
}

pub fn gamma_tangent(x: &SpaceModel) -> CohClass<Scalar> {
    gamma_roots(&vec![1; x.dim + 1], x)
}

/// Coefficients of Gamma(1+x) Gamma(1-x) (1 - e^{2 pi i x}) - 2 pi i e^{pi i x} (-x)
/// up to x^{order}; all vanish when the reflection formula holds.
pub fn gamma_reflection_residual(order: usize) -> Vec<Scalar> {
    let len = order + 1;
    let lg = log_gamma_coeffs(len);
    let lg_neg: Vec<Scalar> = lg
        .iter()
        .enumerate()
        .map(|(k, c)| if k % 2 == 1 { -c } else { c.clone() })
        .collect();
    let g_plus = poly_exp(&lg, len);
    let g_minus = poly_exp(&lg_neg, len);
    let two_pi_i = Scalar::two_pi_i();
    let lin2: Vec<Scalar> = (0..len).map(|k| if k == 1 { two_pi_i.clone() } else { Scalar::zero() }).collect();
    let e2 = poly_exp(&lin2, len);
    let one_minus: Vec<Scalar> =
        e2.iter().enumerate().map(|(k, c)| if k == 0 { Scalar::one() - c.clone() } else { -c }).collect();
    let lhs = poly_mul(&poly_mul(&g_plus, &g_minus, len), &one_minus, len);
    let lin1: Vec<Scalar> = (0..len).map(|k| if k == 1 { Scalar::i_pi() } else { Scalar::zero() }).collect();
    let e1 = poly_exp(&lin1, len);
    let minus_x: Vec<Scalar> = (0..len).map(|k| if k == 1 { -Scalar::one() } else { Scalar::zero() }).collect();
    let rhs: Vec<Scalar> = poly_mul(&e1, &minus_x, len).iter().map(|c| c * &two_pi_i).collect();
    lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect()
}

/// Operators applied to class-valued series.
#[derive(Clone, Debug, PartialEq)]
pub enum OperatorSpec {
    /// z^{-Gr}: H^k -> z^{-k} H^k, with an extra real-degree offset.
    ZMinusGr { real_offset: i64 },
    /// z^rho = sum Lz^k (rho .)^k / k!.
    ZRho { rho: CohClass },
    /// (2 pi i)^{deg_0 / 2}: H^k -> (2 pi i)^k H^k.
    TwoPiIDeg0,
    /// Multiplication by exp(c / z) for a nilpotent class c.
    ExpOverZ { class: CohClass<Scalar> },
}

pub fn apply_operator<C: Coeff>(spec: &OperatorSpec, v: &[Series<C>]) -> Result<SeriesVec<C>> {
    let len = v.len();
    let trunc = v.first().map_or(0, |s| s.trunc());
    match spec {
        OperatorSpec::ZMinusGr { real_offset } => {
            if real_offset % 2 != 0 {
                return Err(QsdError::OddDegree(*real_offset));
            }
            let off = (*real_offset / 2) as i32;
            Ok(v.iter().enumerate().map(|(k, s)| s.shift_z(-(k as i32) - off)).collect())
        }
        OperatorSpec::ZRho { rho } => {
            if rho.coeffs.first().is_some_and(|c| !c.is_zero()) {
                return Err(QsdError::InvalidArgument("rho must be nilpotent".into()));
            }
            let m = SeriesMatrix::<C>::cup_matrix(&class_to_vec(&rat_class_to::<C>(rho), trunc), trunc)
                .shift_lz(1);
            Ok(m.exp()?.apply(v))
        }
        OperatorSpec::TwoPiIDeg0 => {
            let ipi = C::i_pi().ok_or_else(|| {
                QsdError::InvalidArgument("(2 pi i)^deg needs i*pi in the coefficients".into())
            })?;
            let two_pi_i = ipi.mul_ref(&C::from_int(2));
            let mut pw = C::one();
            let mut out = Vec::with_capacity(len);
            for s in v {
                out.push(s.scale(&pw));
                pw = pw.mul_ref(&two_pi_i);
            }
            Ok(out)
        }
        OperatorSpec::ExpOverZ { class } => {
            let lift: CohClass<C> = CohClass::from_coeffs(
                class
                    .coeffs
                    .iter()
                    .map(scalar_into::<C>)
                    .collect::<Option<Vec<C>>>()
                    .ok_or_else(|| {
                        QsdError::InvalidArgument("coefficient ring lacks a symbol".into())
                    })?,
            );
            if lift.coeffs.first().is_some_and(|c| !c.is_zero()) {
                return Err(QsdError::InvalidArgument("exp(c/z) needs a nilpotent class".into()));
            }
            let m = SeriesMatrix::<C>::cup_matrix(&class_to_vec(&lift, trunc), trunc).shift_z(-1);
            Ok(m.exp()?.apply(v))
        }
    }
}

/// Convert a scalar into `C`, failing when `C` cannot hold its symbols.
pub fn scalar_into<C: Coeff>(s: &Scalar) -> Option<C> {
    C::from_scalar(s)
}

/// Which space a sheaf lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SheafBase {
    /// Combination of O(a) on X.
    OnX,
    /// Combination of i_* O_X(a) on Y.
    OnY,
}

/// Integer combination of line-bundle generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SheafClass {
    pub base: SheafBase,
    pub terms: BTreeMap<i64, i64>,
}

impl SheafClass {
    pub fn line(a: i64) -> Self {
        SheafClass { base: SheafBase::OnX, terms: BTreeMap::from([(a, 1)]) }
    }

    pub fn pushforward_line(a: i64) -> Self {
        SheafClass { base: SheafBase::OnY, terms: BTreeMap::from([(a, 1)]) }
    }

    pub fn combine(&self, o: &Self, mult: i64) -> Result<Self> {
        if self.base != o.base {
            return Err(QsdError::FlavorMismatch("sheaves on different spaces".into()));
        }
        let mut terms = self.terms.clone();
        for (a, m) in &o.terms {
            *terms.entry(*a).or_insert(0) += m * mult;
        }
        terms.retain(|_, m| *m != 0);
        Ok(SheafClass { base: self.base, terms })
    }

    /// The same combination of O(a) on X (the underlying sheaves of i_* O(a)).
    pub fn underlying(&self) -> Self {
        SheafClass { base: SheafBase::OnX, terms: self.terms.clone() }
    }
}

/// ch of a sheaf on X.
pub fn chern_character(f: &SheafClass, x: &SpaceModel) -> Result<CohClass> {
    if f.base != SheafBase::OnX {
        return Err(QsdError::FlavorMismatch("expected a sheaf on X".into()));
    }
    Ok(f.terms.iter().fold(CohClass::zero(x.rank()), |acc, (&a, &m)| {
        acc.add(&ch_line(a, x).scale(&rint(m)))
    }))
}

/// Euler characteristic chi(F, G) = int ch(F^v) ch(G) Td(X).
pub fn euler_characteristic(f: &SheafClass, g: &SheafClass, x: &SpaceModel) -> Result<Rat> {
    let dual = SheafClass {
        base: f.base,
        terms: f.terms.iter().map(|(a, m)| (-a, *m)).collect(),
    };
    Ok(chern_character(&dual, x)?
        .cup(&chern_character(g, x)?)
        .cup(&todd_tangent(x))
        .integrate())
}

impl<C: Coeff> SeriesMatrix<C> {
    /// Multiply every entry by Lz^k.
    pub fn shift_lz(&self, k: u32) -> Self {
        self.map(|e| e.map_terms(|_, key, c| Some(((key.0, key.1, key.2 + k), c.clone()))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalars::rat;

    fn cls(v: &[Rat]) -> CohClass {
        CohClass::from_coeffs(v.to_vec())
    }

    #[test]
    fn chern_characters() {
        let p2 = SpaceModel::projective(2);
        assert_eq!(ch_line(2, &p2), cls(&[rint(1), rint(2), rint(2)]));
        assert_eq!(ch_line(0, &p2), CohClass::one(3));
        let p1 = SpaceModel::projective(1);
        assert_eq!(ch_tangent(&p1), cls(&[rint(1), rint(2)]));
    }

    #[test]
    fn todd_classes() {
        let p2 = SpaceModel::projective(2);
        assert_eq!(todd_tangent(&p2), cls(&[rint(1), rat(3, 2), rint(1)]));
        assert_eq!(todd(&BundleModel::new(vec![]), &p2), CohClass::one(3));
        let p1 = SpaceModel::projective(1);
        assert_eq!(todd(&BundleModel::new(vec![-1]), &p1), cls(&[rint(1), rat(-1, 2)]));
    }

    #[test]
    fn gamma_classes() {
        let p1 = SpaceModel::projective(1);
        let g = Scalar::euler_gamma();
        let one = Scalar::one();
        assert_eq!(gamma_class(&BundleModel::new(vec![1]), &p1).coeffs, vec![one.clone(), -g.clone()]);
        assert_eq!(gamma_tangent(&p1).coeffs, vec![one.clone(), -g.scale(&rint(2))]);
        let p2 = SpaceModel::projective(2);
        let top: Scalar = "9/2*g^2 + 1/4*pi^2".parse().unwrap();
        assert_eq!(gamma_tangent(&p2).coeffs, vec![one, -g.scale(&rint(3)), top]);
    }

    #[test]
    fn reflection() {
        assert!(gamma_reflection_residual(6).iter().all(|c| c.is_zero()));
    }

    #[test]
    fn operators() {
        let d = 0;
        let p2 = SpaceModel::projective(2);
        let h = class_to_vec(&rat_class_to::<Scalar>(&p2.hyperplane()), d);
        let out = apply_operator(&OperatorSpec::ZMinusGr { real_offset: 0 }, &h).unwrap();
        assert_eq!(out[1], Series::z_power(d, -1));
        assert!(apply_operator(&OperatorSpec::ZMinusGr { real_offset: 1 }, &h).is_err());
        let p1 = SpaceModel::projective(1);
        let one = class_to_vec(&CohClass::<Scalar>::one(2), d);
        let rho = p1.c1_tangent();
        let out = apply_operator(&OperatorSpec::ZRho { rho }, &one).unwrap();
        assert_eq!(out[1], Series::monomial(d, 0, (0, 0, 1), Scalar::from_int(2)));
        let h2 = class_to_vec(&CohClass::<Scalar>::monomial(3, 2), d);
        let out = apply_operator(&OperatorSpec::TwoPiIDeg0, &h2).unwrap();
        assert_eq!(out[2], Series::constant(d, Scalar::pi().pow(2).scale(&rint(-4))));
    }

    #[test]
    fn riemann_roch() {
        for n in 1..=3usize {
            let x = SpaceModel::projective(n);
            for a in 0..4i64 {
                let chi = ch_line(a, &x).cup(&todd_tangent(&x)).integrate();
                let expect = crate::scalars::binomial((n as i64 + a) as u64, n as u64);
                assert_eq!(chi, Rat::from_integer(expect));
            }
        }
    }
}
