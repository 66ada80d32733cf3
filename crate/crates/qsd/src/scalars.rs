//! Exact coefficients: rationals, and rationals extended by `i`, `pi`,
//! Euler's constant `g` and the odd zeta values.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{QsdError, Result};

/// Arbitrary precision rational, always in lowest terms.
pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rint(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for j in 0..k {
        acc = acc * BigInt::from(n - j) / BigInt::from(j + 1);
    }
    acc
}

pub fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |a, k| a * BigInt::from(k))
}

/// The m-th Bernoulli number with B_1 = -1/2.
pub fn bernoulli(m: usize) -> Rat {
    bernoulli_table(m).pop().expect("table is nonempty")
}

/// B_0 .. B_m.
pub fn bernoulli_table(m: usize) -> Vec<Rat> {
    let mut b: Vec<Rat> = Vec::with_capacity(m + 1);
    b.push(Rat::one());
    for k in 1..=m {
        let mut s = Rat::zero();
        for (j, bj) in b.iter().enumerate() {
            s += Rat::from_integer(binomial(k as u64 + 1, j as u64)) * bj;
        }
        b.push(-s / rint(k as i64 + 1));
    }
    b
}

/// Exponent vector over the alphabet (i, pi, g, zeta3, zeta5, ...),
/// trailing zeros trimmed.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Mono(Vec<u32>);

const I_SLOT: usize = 0;
const PI_SLOT: usize = 1;
const G_SLOT: usize = 2;

impl Mono {
    pub fn one() -> Self {
        Mono(Vec::new())
    }

    fn from_vec(mut v: Vec<u32>) -> Self {
        while v.last() == Some(&0) {
            v.pop();
        }
        Mono(v)
    }

    fn single(slot: usize, power: u32) -> Self {
        let mut v = vec![0; slot + 1];
        v[slot] = power;
        Mono::from_vec(v)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn exponent(&self, slot: usize) -> u32 {
        self.0.get(slot).copied().unwrap_or(0)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    /// Product with i^2 = -1 applied; returns the sign picked up.
    fn mul(&self, other: &Mono) -> (Mono, bool) {
        let len = self.0.len().max(other.0.len());
        let mut v = vec![0u32; len];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = self.exponent(k) + other.exponent(k);
        }
        let mut negate = false;
        if len > I_SLOT && v[I_SLOT] >= 2 {
            negate = (v[I_SLOT] / 2) % 2 == 1;
            v[I_SLOT] %= 2;
        }
        (Mono::from_vec(v), negate)
    }

    fn slot_name(slot: usize) -> String {
        match slot {
            I_SLOT => "i".to_string(),
            PI_SLOT => "pi".to_string(),
            G_SLOT => "g".to_string(),
            k => format!("zeta{}", 2 * (k - 3) + 3),
        }
    }
}

impl Ord for Mono {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            let len = self.0.len().max(other.0.len());
            for k in 0..len {
                match self.exponent(k).cmp(&other.exponent(k)) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Mono {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (slot, &e) in self.0.iter().enumerate() {
            match e {
                0 => {}
                1 => parts.push(Mono::slot_name(slot)),
                e => parts.push(format!("{}^{}", Mono::slot_name(slot), e)),
            }
        }
        write!(f, "{}", parts.join("*"))
    }
}

/// Rational linear combination of monomials in the symbol alphabet.
/// Zero is the empty map.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Scalar {
    terms: BTreeMap<Mono, Rat>,
}

impl Scalar {
    pub fn from_rat(r: Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !r.is_zero() {
            terms.insert(Mono::one(), r);
        }
        Scalar { terms }
    }

    pub fn from_int(n: i64) -> Self {
        Scalar::from_rat(rint(n))
    }

    fn monomial(m: Mono, c: Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Scalar { terms }
    }

    pub fn i() -> Self {
        Scalar::monomial(Mono::single(I_SLOT, 1), Rat::one())
    }

    pub fn pi() -> Self {
        Scalar::monomial(Mono::single(PI_SLOT, 1), Rat::one())
    }

    /// Euler's constant.
    pub fn euler_gamma() -> Self {
        Scalar::monomial(Mono::single(G_SLOT, 1), Rat::one())
    }

    /// `i*pi`.
    pub fn i_pi() -> Self {
        Scalar::i() * Scalar::pi()
    }

    /// `2*pi*i`.
    pub fn two_pi_i() -> Self {
        Scalar::i_pi() * Scalar::from_int(2)
    }

    /// zeta(k) for k >= 2: even values reduce to powers of pi, odd ones are symbols.
    pub fn zeta(k: u32) -> Result<Self> {
        if k < 2 {
            return Err(QsdError::InvalidArgument(format!("zeta({k}) is not available")));
        }
        if k.is_multiple_of(2) {
            zeta_even(k)
        } else {
            let slot = 3 + ((k - 3) / 2) as usize;
            Ok(Scalar::monomial(Mono::single(slot, 1), Rat::one()))
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Rat)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// The value as a rational if no symbol occurs.
    pub fn as_rat(&self) -> Option<Rat> {
        match self.terms.len() {
            0 => Some(Rat::zero()),
            1 => self.terms.get(&Mono::one()).cloned(),
            _ => None,
        }
    }

    pub fn scale(&self, c: &Rat) -> Self {
        if c.is_zero() {
            return Scalar::default();
        }
        Scalar {
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Scalar::from_int(1);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    fn add_term(&mut self, m: Mono, c: Rat) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                *v += c;
                if v.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    /// Largest i-exponent over stored monomials (0 or 1 by construction).
    pub fn max_i_exponent(&self) -> u32 {
        self.terms.keys().map(|m| m.exponent(I_SLOT)).max().unwrap_or(0)
    }
}

/// zeta(k) for even k >= 2 as a rational multiple of pi^k.
pub fn zeta_even(k: u32) -> Result<Scalar> {
    if k < 2 || k % 2 == 1 {
        return Err(QsdError::InvalidArgument(format!(
            "zeta_even needs an even argument >= 2, got {k}"
        )));
    }
    let m = k / 2;
    let b = bernoulli(k as usize);
    let sign = if m % 2 == 1 { Rat::one() } else { -Rat::one() };
    let two_pow = Rat::from_integer(BigInt::from(2).pow(k));
    let c = sign * b * two_pow / (rint(2) * Rat::from_integer(factorial(k as u64)));
    Ok(Scalar::monomial(Mono::single(PI_SLOT, k), c))
}

impl Zero for Scalar {
    fn zero() -> Self {
        Scalar::default()
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl One for Scalar {
    fn one() -> Self {
        Scalar::from_int(1)
    }
}

impl<'a> Add<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, rhs: &Scalar) {
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), c.clone());
        }
    }
}

impl<'a> Sub<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl<'a> Mul<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        if let Some(r) = rhs.as_rat() {
            return self.scale(&r);
        }
        if let Some(r) = self.as_rat() {
            return rhs.scale(&r);
        }
        let mut out = Scalar::default();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                let (m, negate) = ma.mul(mb);
                let c = ca * cb;
                out.add_term(m, if negate { -c } else { c });
            }
        }
        out
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl $tr<Scalar> for Scalar {
            type Output = Scalar;
            fn $f(self, rhs: Scalar) -> Scalar {
                (&self).$f(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

fn render_rat(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut out = String::new();
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if k == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            if m.is_one() {
                out.push_str(&render_rat(&abs));
            } else if abs.is_one() {
                out.push_str(&m.to_string());
            } else {
                out.push_str(&render_rat(&abs));
                out.push('*');
                out.push_str(&m.to_string());
            }
        }
        write!(f, "{out}")
    }
}

fn parse_factor(tok: &str) -> Result<Scalar> {
    let err = || QsdError::Parse(format!("bad factor `{tok}`"));
    if tok.is_empty() {
        return Err(err());
    }
    if tok.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        let (n, d) = match tok.split_once('/') {
            Some((n, d)) => (n, d),
            None => (tok, "1"),
        };
        let n: BigInt = n.parse().map_err(|_| err())?;
        let d: BigInt = d.parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Scalar::from_rat(Rat::new(n, d)));
    }
    let (name, power) = match tok.split_once('^') {
        Some((n, p)) => (n, p.parse::<u32>().map_err(|_| err())?),
        None => (tok, 1),
    };
    let base = match name {
        "i" => Scalar::i(),
        "pi" => Scalar::pi(),
        "g" => Scalar::euler_gamma(),
        z if z.starts_with("zeta") => {
            let k: u32 = z[4..].parse().map_err(|_| err())?;
            Scalar::zeta(k)?
        }
        _ => return Err(err()),
    };
    Ok(base.pow(power))
}

impl FromStr for Scalar {
    type Err = QsdError;
    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(QsdError::Parse("empty scalar".into()));
        }
        let mut total = Scalar::default();
        let mut rest = s.as_str();
        while !rest.is_empty() {
            let mut negate = false;
            if let Some(r) = rest.strip_prefix('-') {
                negate = true;
                rest = r;
            } else if let Some(r) = rest.strip_prefix('+') {
                rest = r;
            }
            let end = rest.find(['+', '-']).unwrap_or(rest.len());
            let term_src = &rest[..end];
            rest = &rest[end..];
            let mut term = Scalar::from_int(1);
            for tok in term_src.split('*') {
                term = &term * &parse_factor(tok)?;
            }
            if negate {
                term = -term;
            }
            total += &term;
        }
        Ok(total)
    }
}

/// Coefficient ring used by the series engine.
pub trait Coeff:
    Clone + PartialEq + fmt::Debug + Send + Sync + Zero + One + 'static
{
    fn from_rat(r: Rat) -> Self;
    fn add_ref(&self, o: &Self) -> Self;
    fn sub_ref(&self, o: &Self) -> Self;
    fn mul_ref(&self, o: &Self) -> Self;
    fn neg_ref(&self) -> Self;
    fn try_inv(&self) -> Option<Self>;
    /// exp of a constant when it is exactly known (0, or k*i*pi).
    fn exp_const(&self) -> Option<Self>;
    /// The constant i*pi if the ring contains it.
    fn i_pi() -> Option<Self>;
    fn render(&self) -> String;
    /// Exact conversion from the symbolic scalars, when representable.
    fn from_scalar(s: &Scalar) -> Option<Self>;

    fn from_int(n: i64) -> Self {
        Self::from_rat(rint(n))
    }
    fn add_assign_ref(&mut self, o: &Self) {
        *self = self.add_ref(o);
    }
}

impl Coeff for Rat {
    fn from_rat(r: Rat) -> Self {
        r
    }
    fn add_ref(&self, o: &Self) -> Self {
        self + o
    }
    fn sub_ref(&self, o: &Self) -> Self {
        self - o
    }
    fn mul_ref(&self, o: &Self) -> Self {
        self * o
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn try_inv(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(self.recip())
        }
    }
    fn exp_const(&self) -> Option<Self> {
        self.is_zero().then(Rat::one)
    }
    fn i_pi() -> Option<Self> {
        None
    }
    fn render(&self) -> String {
        render_rat(self)
    }
    fn from_scalar(s: &Scalar) -> Option<Self> {
        s.as_rat()
    }
    fn add_assign_ref(&mut self, o: &Self) {
        *self += o;
    }
}

impl Coeff for Scalar {
    fn from_rat(r: Rat) -> Self {
        Scalar::from_rat(r)
    }
    fn add_ref(&self, o: &Self) -> Self {
        self + o
    }
    fn sub_ref(&self, o: &Self) -> Self {
        self - o
    }
    fn mul_ref(&self, o: &Self) -> Self {
        self * o
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn try_inv(&self) -> Option<Self> {
        match self.as_rat() {
            Some(r) if !r.is_zero() => Some(Scalar::from_rat(r.recip())),
            _ => None,
        }
    }
    fn exp_const(&self) -> Option<Self> {
        if self.is_zero() {
            return Some(Scalar::one());
        }
        if self.terms.len() != 1 {
            return None;
        }
        let (m, c) = self.terms.iter().next()?;
        if *m == Mono::from_vec(vec![1, 1]) && c.is_integer() {
            let k = c.numer().mod_floor(&BigInt::from(2)).to_i64()?;
            return Some(Scalar::from_int(if k == 0 { 1 } else { -1 }));
        }
        None
    }
    fn i_pi() -> Option<Self> {
        Some(Scalar::i_pi())
    }
    fn render(&self) -> String {
        self.to_string()
    }
    fn from_scalar(s: &Scalar) -> Option<Self> {
        Some(s.clone())
    }
    fn add_assign_ref(&mut self, o: &Self) {
        *self += o;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_small() {
        assert_eq!(bernoulli(0), rint(1));
        assert_eq!(bernoulli(1), rat(-1, 2));
        assert_eq!(bernoulli(2), rat(1, 6));
        assert_eq!(bernoulli(3), rint(0));
        assert_eq!(bernoulli(4), rat(-1, 30));
        assert_eq!(bernoulli(6), rat(1, 42));
    }

    #[test]
    fn even_zetas() {
        let pi = Scalar::pi();
        assert_eq!(zeta_even(2).unwrap(), pi.pow(2).scale(&rat(1, 6)));
        assert_eq!(zeta_even(4).unwrap(), pi.pow(4).scale(&rat(1, 90)));
        assert_eq!(zeta_even(6).unwrap(), pi.pow(6).scale(&rat(1, 945)));
        assert!(zeta_even(3).is_err());
        assert!(zeta_even(0).is_err());
    }

    #[test]
    fn i_squared() {
        let i = Scalar::i();
        assert_eq!(&i * &i, Scalar::from_int(-1));
        assert_eq!(i.pow(3), -Scalar::i());
        assert_eq!(i.pow(4), Scalar::one());
    }

    #[test]
    fn render_and_parse() {
        let s: Scalar = "3/2*pi^2*zeta3 + i*g".parse().unwrap();
        assert_eq!(s.to_string(), "3/2*pi^2*zeta3 + i*g");
        let t: Scalar = "-pi^2/1 - 1/3".replace("/1", "").parse().unwrap();
        assert_eq!(t.to_string(), "-pi^2 - 1/3");
        assert_eq!("0".parse::<Scalar>().unwrap(), Scalar::zero());
        assert_eq!(Scalar::zero().to_string(), "0");
        assert_eq!("zeta2".parse::<Scalar>().unwrap(), zeta_even(2).unwrap());
        assert!("pie".parse::<Scalar>().is_err());
    }

    #[test]
    fn exp_of_i_pi_multiples() {
        let ipi = Scalar::i_pi();
        assert_eq!(ipi.exp_const(), Some(-Scalar::one()));
        assert_eq!(ipi.scale(&rint(-2)).exp_const(), Some(Scalar::one()));
        assert_eq!(Scalar::pi().exp_const(), None);
        assert_eq!(Rat::one().exp_const(), None);
    }
}
