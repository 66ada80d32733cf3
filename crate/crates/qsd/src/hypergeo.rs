//! Twisted theories of P^n from hypergeometric I-functions: mirror map,
//! J-function, fundamental solution and small quantum product by H.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::charcls::{cup_vec, euler_equiv};
use crate::cohring::GeometryTriple;
use crate::error::{QsdError, Result};
use crate::scalars::{rint, Coeff, Rat};
use crate::series::{Series, SeriesMatrix, SeriesVec};

/// Which Euler-class twist of the Gromov-Witten theory of X.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TwistSpec {
    Untwisted,
    /// Twisted by the equivariant Euler class e_lambda(E).
    EulerTwist,
    /// Twisted by the inverse equivariant Euler class of E^v.
    InverseEulerTwist,
}

impl TwistSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TwistSpec::Untwisted => "untwisted",
            TwistSpec::EulerTwist => "euler",
            TwistSpec::InverseEulerTwist => "inverse-euler",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "untwisted" | "plain" => Ok(TwistSpec::Untwisted),
            "euler" => Ok(TwistSpec::EulerTwist),
            "inverse-euler" => Ok(TwistSpec::InverseEulerTwist),
            _ => Err(QsdError::InvalidArgument(format!("unknown twist `{s}`"))),
        }
    }
}

fn unit_vec(len: usize, trunc: usize) -> SeriesVec<Rat> {
    (0..len).map(|k| if k == 0 { Series::one(trunc) } else { Series::zero(trunc) }).collect()
}

/// a H + b lambda + c z as a class-valued series.
fn linear_class(len: usize, trunc: usize, a: i64, b: i64, c: i64) -> SeriesVec<Rat> {
    let mut v = vec![Series::zero(trunc); len];
    v[0] = Series::linear(trunc, Rat::zero(), rint(b), rint(c));
    if len > 1 {
        v[1] = Series::constant(trunc, rint(a));
    }
    v
}

/// 1/(H + k z) expanded in 1/z.
fn inverse_h_plus_kz(len: usize, trunc: usize, k: i64) -> SeriesVec<Rat> {
    (0..len)
        .map(|j| {
            let sign = if j % 2 == 0 { 1 } else { -1 };
            let c = Rat::new(BigInt::from(sign), BigInt::from(k).pow(j as u32 + 1));
            Series::monomial(trunc, 0, (-(j as i32) - 1, 0, 0), c)
        })
        .collect()
}

/// Multiply every component by q^d.
fn shift_q_vec(v: &[Series<Rat>], d: usize) -> SeriesVec<Rat> {
    v.iter().map(|s| s.shift_q(d)).collect()
}

/// sum_d q^d N_d / prod_{k=1}^d (H + k z)^{n+1}, stored without the leading z.
pub fn i_function(g: &GeometryTriple, twist: TwistSpec, trunc: usize) -> Result<SeriesVec<Rat>> {
    if !g.bundle.is_convex() {
        return Err(QsdError::NonConvex(g.bundle.line_degrees.clone()));
    }
    let len = g.len();
    let n = g.n();
    let mut total: SeriesVec<Rat> = vec![Series::zero(trunc); len];
    let mut denom = unit_vec(len, trunc);
    for d in 0..=trunc {
        if d > 0 {
            let inv = inverse_h_plus_kz(len, trunc, d as i64);
            for _ in 0..=n {
                denom = cup_vec(&denom, &inv);
            }
        }
        let mut numer = unit_vec(len, trunc);
        for &l in &g.bundle.line_degrees {
            let ld = l * d as i64;
            match twist {
                TwistSpec::Untwisted => {}
                TwistSpec::EulerTwist => {
                    for k in 1..=ld {
                        numer = cup_vec(&numer, &linear_class(len, trunc, l, 1, k));
                    }
                }
                TwistSpec::InverseEulerTwist => {
                    for m in 0..ld {
                        numer = cup_vec(&numer, &linear_class(len, trunc, -l, -1, -m));
                    }
                }
            }
        }
        let term = shift_q_vec(&cup_vec(&numer, &denom), d);
        total = total.iter().zip(&term).map(|(a, b)| a + b).collect();
    }
    Ok(total)
}

/// Output of the mirror transform: zI = F z + (tau0 F) 1 + (tau2 F) H + O(1/z).
#[derive(Clone, Debug)]
pub struct MirrorData {
    pub f: Series<Rat>,
    pub tau0: Series<Rat>,
    pub tau2: Series<Rat>,
    /// zI/F as a function of the mirror coordinate q.
    pub j_mirror: SeriesVec<Rat>,
}

pub fn mirror_transform(i: &[Series<Rat>]) -> Result<MirrorData> {
    let trunc = i.first().map_or(0, |s| s.trunc());
    let zi: SeriesVec<Rat> = i.iter().map(|s| s.shift_z(1)).collect();
    for (k, comp) in zi.iter().enumerate() {
        for (d, key, _) in comp.terms() {
            let out_of_range = key.0 > 1 || (key.0 == 1 && k > 0) || (key.0 == 0 && k > 1) || key.2 > 0;
            if out_of_range {
                return Err(QsdError::MirrorMapOutOfRange(format!(
                    "component H^{k} has a term q^{d} z^{} beyond span(1, H)",
                    key.0
                )));
            }
        }
    }
    let f = zi[0].z_coeff(1);
    if f.has_lambda() {
        return Err(QsdError::MirrorMapOutOfRange("leading function depends on lambda".into()));
    }
    let finv = f.inverse()?;
    let g0 = zi[0].z_coeff(0);
    let g2 = zi.get(1).map_or(Series::zero(trunc), |s| s.z_coeff(0));
    let tau0 = &g0 * &finv;
    let tau2 = &g2 * &finv;
    if !tau0.layer(0).is_empty() || !tau2.layer(0).is_empty() {
        return Err(QsdError::MirrorMapOutOfRange("mirror map has a constant term".into()));
    }
    let j_mirror = zi.iter().map(|s| s * &finv).collect();
    Ok(MirrorData { f, tau0, tau2, j_mirror })
}

/// u(Q) with q = Q u(Q) inverting Q = q exp(tau2(q)).
pub fn inverse_mirror_map(tau2: &Series<Rat>) -> Result<Series<Rat>> {
    let trunc = tau2.trunc();
    let mut u = Series::one(trunc);
    for _ in 0..=trunc {
        let t = tau2.substitute_q(&u)?;
        u = (-&t).exp()?;
    }
    Ok(u)
}

/// exp(-(t0 + t2 H)/z) as a matrix on Q[H]/(H^len).
pub fn shift_matrix<C: Coeff>(t0: &Series<C>, t2: &Series<C>, len: usize) -> Result<SeriesMatrix<C>> {
    let trunc = t0.trunc();
    let mut cup_h = SeriesMatrix::zero(len, len, trunc);
    for k in 0..len.saturating_sub(1) {
        cup_h.entries[k + 1][k] = Series::one(trunc);
    }
    let e0 = t0.shift_z(-1).scale(&C::from_int(-1)).exp()?;
    let nil = cup_h.scale(&t2.shift_z(-1)).scale_c(&C::from_int(-1));
    Ok(nil.exp()?.scale(&e0))
}

/// Cup product with H on the monomial basis.
pub fn cup_h_matrix<C: Coeff>(len: usize, trunc: usize) -> SeriesMatrix<C> {
    let mut m = SeriesMatrix::zero(len, len, trunc);
    for k in 0..len.saturating_sub(1) {
        m.entries[k + 1][k] = Series::one(trunc);
    }
    m
}

/// Gram matrix of the twisted pairing on the monomial basis.
pub fn twisted_pairing(g: &GeometryTriple, twist: TwistSpec, trunc: usize) -> SeriesMatrix<Rat> {
    let len = g.len();
    let weight: SeriesVec<Rat> = match twist {
        TwistSpec::Untwisted => unit_vec(len, trunc),
        TwistSpec::EulerTwist => euler_equiv(&g.bundle, false, &g.x, trunc),
        TwistSpec::InverseEulerTwist => inverse_euler_dual(g, trunc),
    };
    let mut m = SeriesMatrix::zero(len, len, trunc);
    for a in 0..len {
        for b in 0..len {
            let top = len - 1;
            if a + b <= top {
                m.entries[a][b] = weight[top - a - b].clone();
            }
        }
    }
    m
}

/// 1/e_lambda(E^v) = prod 1/(-lambda - l H), Laurent in lambda.
pub fn inverse_euler_dual(g: &GeometryTriple, trunc: usize) -> SeriesVec<Rat> {
    let len = g.len();
    let mut acc = unit_vec(len, trunc);
    for &l in &g.bundle.line_degrees {
        // -1/lambda * sum_k (-l H / lambda)^k
        let factor: SeriesVec<Rat> = (0..len)
            .map(|k| {
                let c = -rint(-l).pow(k as i32);
                Series::monomial(trunc, 0, (0, -(k as i32) - 1, 0), c)
            })
            .collect();
        acc = cup_vec(&acc, &factor);
    }
    acc
}

/// A twisted theory at the base point t = 0, in the Novikov variable Q.
#[derive(Clone, Debug)]
pub struct TheoryDatum {
    pub geometry: GeometryTriple,
    pub twist: TwistSpec,
    pub trunc: usize,
    pub i_function: SeriesVec<Rat>,
    pub mirror: MirrorData,
    /// q = Q u(Q).
    pub inverse_map: Series<Rat>,
    /// J(0, z) = z + sum Q^d J_d.
    pub j: SeriesVec<Rat>,
    pub l: SeriesMatrix<Rat>,
    pub product_h: SeriesMatrix<Rat>,
    pub pairing: SeriesMatrix<Rat>,
}

impl TheoryDatum {
    pub fn build(g: &GeometryTriple, twist: TwistSpec, trunc: usize) -> Result<Self> {
        let i = i_function(g, twist, trunc)?;
        let mirror = mirror_transform(&i)?;
        let u = inverse_mirror_map(&mirror.tau2)?;
        let j = normalized_j(&mirror, &u)?;
        let (l, product_h) = fundamental_solution(&j, g.len())?;
        Ok(TheoryDatum {
            geometry: g.clone(),
            twist,
            trunc,
            i_function: i,
            mirror,
            inverse_map: u,
            j,
            l,
            product_h,
            pairing: twisted_pairing(g, twist, trunc),
        })
    }

    /// Assemble from previously computed parts (used by the cache).
    pub fn from_parts(
        g: &GeometryTriple,
        twist: TwistSpec,
        trunc: usize,
        parts: TheoryParts,
    ) -> Self {
        TheoryDatum {
            geometry: g.clone(),
            twist,
            trunc,
            i_function: parts.i_function,
            mirror: MirrorData {
                f: parts.f,
                tau0: parts.tau0,
                tau2: parts.tau2,
                j_mirror: parts.j_mirror,
            },
            inverse_map: parts.inverse_map,
            j: parts.j,
            l: parts.l,
            product_h: parts.product_h,
            pairing: twisted_pairing(g, twist, trunc),
        }
    }

    pub fn parts(&self) -> TheoryParts {
        TheoryParts {
            i_function: self.i_function.clone(),
            f: self.mirror.f.clone(),
            tau0: self.mirror.tau0.clone(),
            tau2: self.mirror.tau2.clone(),
            j_mirror: self.mirror.j_mirror.clone(),
            inverse_map: self.inverse_map.clone(),
            j: self.j.clone(),
            l: self.l.clone(),
            product_h: self.product_h.clone(),
        }
    }

    /// Weight c with deg q = 2c.
    pub fn q_weight(&self) -> i64 {
        q_weight(&self.geometry, self.twist)
    }

    /// sum_i <<alpha, T^i>> T_i, read off as minus the 1/z coefficient of L alpha.
    pub fn two_point(&self, alpha: &[Series<Rat>]) -> SeriesVec<Rat> {
        two_point(&self.l, alpha)
    }
}

/// The computed series of a theory, in a form the cache can store.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoryParts {
    pub i_function: SeriesVec<Rat>,
    pub f: Series<Rat>,
    pub tau0: Series<Rat>,
    pub tau2: Series<Rat>,
    pub j_mirror: SeriesVec<Rat>,
    pub inverse_map: Series<Rat>,
    pub j: SeriesVec<Rat>,
    pub l: SeriesMatrix<Rat>,
    pub product_h: SeriesMatrix<Rat>,
}

pub fn q_weight(g: &GeometryTriple, twist: TwistSpec) -> i64 {
    let base = g.n() as i64 + 1;
    match twist {
        TwistSpec::Untwisted => base,
        _ => base - g.bundle.degree_sum(),
    }
}

/// J at the base point: undo the mirror shift and change to the Novikov variable.
pub fn normalized_j(m: &MirrorData, u: &Series<Rat>) -> Result<SeriesVec<Rat>> {
    let len = m.j_mirror.len();
    let jm: SeriesVec<Rat> = m.j_mirror.iter().map(|s| s.substitute_q(u)).collect::<Result<_>>()?;
    let t0 = m.tau0.substitute_q(u)?;
    let t2 = m.tau2.substitute_q(u)?;
    let j = shift_matrix(&t0, &t2, len)?.apply(&jm);
    for (k, comp) in j.iter().enumerate() {
        for (d, key, c) in comp.terms() {
            let leading = d == 0 && k == 0 && *key == (1, 0, 0) && c.is_one();
            if !leading && (d == 0 || key.0 >= 0) {
                return Err(QsdError::MirrorMapOutOfRange(format!(
                    "J is not of the form z + O(1/z): H^{k} q^{d} z^{}",
                    key.0
                )));
            }
        }
    }
    Ok(j)
}

/// L and the product by H from J. The columns (H + z q d/dq)^k J/z form a
/// matrix M = L^{-1} B with L^{-1} = Id + O(1/z) and B polynomial in z; the
/// factors are split off one q-degree at a time.
pub fn fundamental_solution(j: &[Series<Rat>], len: usize) -> Result<(SeriesMatrix<Rat>, SeriesMatrix<Rat>)> {
    let trunc = j.first().map_or(0, |s| s.trunc());
    let mut cols: Vec<SeriesVec<Rat>> = Vec::with_capacity(len);
    let mut v: SeriesVec<Rat> = j.iter().map(|s| s.shift_z(-1)).collect();
    for _ in 0..len {
        cols.push(v.clone());
        let mut next: SeriesVec<Rat> = v.iter().map(|s| s.q_derivative().shift_z(1)).collect();
        for k in (1..len).rev() {
            next[k] = &next[k] + &v[k - 1];
        }
        v = next;
    }
    let m = SeriesMatrix::from_columns(&cols, trunc);
    let (linv, _b) = birkhoff(&m)?;
    let l = linv.invert_unipotent()?;
    let product = quantum_product_h(&l)?;
    Ok((l, product))
}

/// M = N B with N = Id + O(1/z) and B = Id + O(q) polynomial in z.
pub fn birkhoff(m: &SeriesMatrix<Rat>) -> Result<(SeriesMatrix<Rat>, SeriesMatrix<Rat>)> {
    let n = m.rows();
    let trunc = m.trunc;
    let id = SeriesMatrix::identity(n, trunc);
    if m.q0() != id {
        return Err(QsdError::NotUnipotent("derivative matrix is not Id at q^0".into()));
    }
    let mut neg = id.clone();
    let mut pos = id;
    for d in 1..=trunc {
        let r = m - &(&neg * &pos);
        for (row, entries) in r.entries.iter().enumerate() {
            for (col, e) in entries.iter().enumerate() {
                if let Some((lower, _, _)) = e.terms().find(|(q, _, _)| *q < d) {
                    return Err(QsdError::NotUnipotent(format!(
                        "factorization left a q^{lower} term at [{row},{col}]"
                    )));
                }
                for (key, c) in e.layer(d) {
                    let target = if key.0 < 0 { &mut neg } else { &mut pos };
                    target.entries[row][col].add_term(d, *key, c.clone());
                }
            }
        }
    }
    Ok((neg, pos))
}

/// H* = L (H . L^{-1} + z q d/dq L^{-1}); errors if the result depends on z.
pub fn quantum_product_h(l: &SeriesMatrix<Rat>) -> Result<SeriesMatrix<Rat>> {
    let len = l.rows();
    let trunc = l.trunc;
    let linv = l.invert_unipotent()?;
    let inner = &(&cup_h_matrix(len, trunc) * &linv) + &linv.q_derivative().shift_z(1);
    let a = l * &inner;
    if a.entries.iter().flatten().any(|e| e.terms().any(|(_, k, _)| k.0 != 0 || k.2 != 0)) {
        return Err(QsdError::InvalidArgument("quantum product depends on z".into()));
    }
    Ok(a)
}

pub fn two_point<C: Coeff>(l: &SeriesMatrix<C>, alpha: &[Series<C>]) -> SeriesVec<C> {
    l.apply(alpha).iter().map(|s| s.z_coeff(-1).scale(&C::from_int(-1))).collect()
}

/// Quantum product of Y transported to H*(X): the lambda -> 0 limit of the
/// inverse-Euler twisted product.
pub fn ytox_product(g: &GeometryTriple, trunc: usize) -> Result<SeriesMatrix<Rat>> {
    let t = TheoryDatum::build(g, TwistSpec::InverseEulerTwist, trunc)?;
    t.product_h.nonequivariant_limit()
}

/// Degree-d numbers read from the H^n coefficient of H * H^{n-1} on Y. For a
/// line bundle O(l) this coefficient is -l d^3 N_d on P^2 (two divisor
/// insertions and the zero section), and the returned value is N_d; for other
/// ranks the raw coefficient is returned.
pub fn local_invariants(g: &GeometryTriple, trunc: usize) -> Result<Vec<Rat>> {
    let a = ytox_product(g, trunc)?;
    local_invariants_from_product(g, &a)
}

pub fn local_invariants_from_product(g: &GeometryTriple, a: &SeriesMatrix<Rat>) -> Result<Vec<Rat>> {
    let n = g.n();
    if n == 0 {
        return Ok(Vec::new());
    }
    let entry = &a.entries[n][n - 1];
    let scale = match g.bundle.line_degrees.as_slice() {
        [l] if *l != 0 => Some(rint(-*l)),
        _ => None,
    };
    Ok((1..=a.trunc)
        .map(|d| {
            let c = entry.coeff(d, (0, 0, 0));
            match &scale {
                Some(s) => c / (s * rint(d as i64).pow(3)),
                None => c,
            }
        })
        .collect())
}
