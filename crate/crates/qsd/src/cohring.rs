//! Cohomology of projective space as the truncated ring Q[H]/(H^{n+1}),
//! the total space and compact-support models carried on the same vector
//! space, and the ambient quotient of the zero locus.

use num_traits::{One, Zero};

use crate::error::{QsdError, Result};
use crate::scalars::{rint, Coeff, Rat};

/// Element of Q[H]/(H^{n+1}) with coefficients in `C`, indexed by H-power.
#[derive(Clone, Debug, PartialEq)]
pub struct CohClass<C = Rat> {
    pub coeffs: Vec<C>,
}

impl<C: Coeff> CohClass<C> {
    pub fn zero(len: usize) -> Self {
        CohClass { coeffs: vec![C::zero(); len] }
    }

    pub fn one(len: usize) -> Self {
        Self::monomial(len, 0)
    }

    /// H^k, or zero when k is past the truncation.
    pub fn monomial(len: usize, k: usize) -> Self {
        let mut c = Self::zero(len);
        if k < len {
            c.coeffs[k] = C::one();
        }
        c
    }

    pub fn from_coeffs(coeffs: Vec<C>) -> Self {
        CohClass { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn add(&self, o: &Self) -> Self {
        CohClass {
            coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a.add_ref(b)).collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        CohClass {
            coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a.sub_ref(b)).collect(),
        }
    }

    pub fn scale(&self, c: &C) -> Self {
        CohClass { coeffs: self.coeffs.iter().map(|a| a.mul_ref(c)).collect() }
    }

    pub fn cup(&self, o: &Self) -> Self {
        let n = self.len();
        let mut out = Self::zero(n);
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.coeffs.iter().enumerate().take(n - i) {
                if !b.is_zero() {
                    out.coeffs[i + j].add_assign_ref(&a.mul_ref(b));
                }
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        (0..e).fold(Self::one(self.len()), |acc, _| acc.cup(self))
    }

    /// Integral over P^n: the top coefficient.
    pub fn integrate(&self) -> C {
        self.coeffs.last().cloned().unwrap_or_else(C::zero)
    }

    /// Inverse of a class with invertible constant term.
    pub fn inverse(&self) -> Option<Self> {
        let c0inv = self.coeffs.first()?.try_inv()?;
        let n = self.len();
        // 1/(c0 (1 + x)) with x nilpotent
        let x = self.scale(&c0inv).sub(&Self::one(n));
        let mut acc = Self::one(n);
        let mut pw = Self::one(n);
        for k in 1..n {
            pw = pw.cup(&x);
            if k % 2 == 1 {
                acc = acc.sub(&pw);
            } else {
                acc = acc.add(&pw);
            }
        }
        Some(acc.scale(&c0inv))
    }

    pub fn map<D: Coeff>(&self, f: impl Fn(&C) -> D) -> CohClass<D> {
        CohClass { coeffs: self.coeffs.iter().map(f).collect() }
    }

    pub fn render(&self) -> String {
        let mut parts = Vec::new();
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mono = match k {
                0 => String::new(),
                1 => "H".to_string(),
                k => format!("H^{k}"),
            };
            let coef = c.render();
            parts.push(match (mono.is_empty(), coef.as_str()) {
                (true, _) => format!("({coef})"),
                (false, "1") => mono,
                _ => format!("({coef})*{mono}"),
            });
        }
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    }
}

/// Dense matrix over the rationals.
pub type RatMatrix = Vec<Vec<Rat>>;

pub fn mat_zero(r: usize, c: usize) -> RatMatrix {
    vec![vec![Rat::zero(); c]; r]
}

pub fn mat_identity(n: usize) -> RatMatrix {
    let mut m = mat_zero(n, n);
    for (k, row) in m.iter_mut().enumerate() {
        row[k] = Rat::one();
    }
    m
}

pub fn mat_mul(a: &RatMatrix, b: &RatMatrix) -> RatMatrix {
    let inner = b.len();
    let cols = b.first().map_or(0, |r| r.len());
    let mut out = mat_zero(a.len(), cols);
    for (i, row) in a.iter().enumerate() {
        for (k, aik) in row.iter().enumerate().take(inner) {
            if aik.is_zero() {
                continue;
            }
            for j in 0..cols {
                out[i][j] += aik * &b[k][j];
            }
        }
    }
    out
}

pub fn mat_vec(a: &RatMatrix, v: &[Rat]) -> Vec<Rat> {
    a.iter()
        .map(|row| row.iter().zip(v).fold(Rat::zero(), |s, (x, y)| s + x * y))
        .collect()
}

pub fn transpose(a: &RatMatrix) -> RatMatrix {
    let cols = a.first().map_or(0, |r| r.len());
    (0..cols).map(|j| a.iter().map(|r| r[j].clone()).collect()).collect()
}

/// Reduced row echelon form and pivot columns.
pub fn rref(a: &RatMatrix) -> (RatMatrix, Vec<usize>) {
    let mut m = a.clone();
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..cols {
                    let t = &f * &m[r][j];
                    m[i][j] -= t;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    (m, pivots)
}

pub fn rank(a: &RatMatrix) -> usize {
    rref(a).1.len()
}

pub fn determinant(a: &RatMatrix) -> Rat {
    let n = a.len();
    let mut m = a.clone();
    let mut det = Rat::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !m[i][c].is_zero()) else {
            return Rat::zero();
        };
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= &m[c][c];
        let inv = m[c][c].recip();
        for i in c + 1..n {
            if m[i][c].is_zero() {
                continue;
            }
            let f = &m[i][c] * &inv;
            for j in c..n {
                let t = &f * &m[c][j];
                m[i][j] -= t;
            }
        }
    }
    det
}

pub fn inverse(a: &RatMatrix) -> Option<RatMatrix> {
    let n = a.len();
    let aug: RatMatrix = a
        .iter()
        .zip(mat_identity(n))
        .map(|(r, e)| r.iter().cloned().chain(e).collect())
        .collect();
    let (red, piv) = rref(&aug);
    if piv.len() < n || piv.iter().take(n).enumerate().any(|(k, &p)| p != k) {
        return None;
    }
    Some(red.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// A particular solution of a x = b (free variables set to zero).
pub fn solve(a: &RatMatrix, b: &[Rat]) -> Option<Vec<Rat>> {
    let cols = a.first().map_or(0, |r| r.len());
    let aug: RatMatrix = a
        .iter()
        .zip(b)
        .map(|(r, x)| r.iter().cloned().chain(std::iter::once(x.clone())).collect())
        .collect();
    let (red, piv) = rref(&aug);
    if piv.contains(&cols) {
        return None;
    }
    let mut x = vec![Rat::zero(); cols];
    for (row, &p) in piv.iter().enumerate() {
        x[p] = red[row][cols].clone();
    }
    Some(x)
}

/// Basis of the null space of a.
pub fn kernel(a: &RatMatrix, cols: usize) -> Vec<Vec<Rat>> {
    let (red, piv) = rref(a);
    let free: Vec<usize> = (0..cols).filter(|c| !piv.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Rat::zero(); cols];
            v[f] = Rat::one();
            for (row, &p) in piv.iter().enumerate() {
                v[p] = -red[row][f].clone();
            }
            v
        })
        .collect()
}

/// Matrix of multiplication by a class on the monomial basis.
pub fn mult_matrix(a: &CohClass) -> RatMatrix {
    let n = a.len();
    let mut m = mat_zero(n, n);
    for (j, _) in a.coeffs.iter().enumerate() {
        for i in j..n {
            m[i][j] = a.coeffs[i - j].clone();
        }
    }
    m
}

/// One inertia sector; manifolds carry exactly the untwisted one.
#[derive(Clone, Debug, PartialEq)]
pub struct Sector {
    pub age: Rat,
    pub involution_target: usize,
}

/// P^n.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceModel {
    pub name: String,
    pub dim: usize,
    pub sectors: Vec<Sector>,
}

impl SpaceModel {
    pub fn projective(n: usize) -> Self {
        SpaceModel {
            name: format!("P{n}"),
            dim: n,
            sectors: vec![Sector { age: Rat::zero(), involution_target: 0 }],
        }
    }

    /// Number of basis monomials H^0..H^n.
    pub fn rank(&self) -> usize {
        self.dim + 1
    }

    pub fn c1_tangent(&self) -> CohClass {
        CohClass::monomial(self.rank(), 1).scale(&rint(self.dim as i64 + 1))
    }

    /// Degrees of curve classes carrying invariants.
    pub fn effective_degrees(&self, max: usize) -> Vec<usize> {
        (0..=max).collect()
    }

    /// Gram matrix of the Poincare pairing: the antidiagonal identity.
    pub fn pairing_matrix(&self) -> RatMatrix {
        let n = self.rank();
        let mut m = mat_zero(n, n);
        for (a, row) in m.iter_mut().enumerate() {
            row[n - 1 - a] = Rat::one();
        }
        m
    }

    pub fn hyperplane(&self) -> CohClass {
        CohClass::monomial(self.rank(), 1)
    }
}

/// Split bundle O(l_1) + ... + O(l_r).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BundleModel {
    pub line_degrees: Vec<i64>,
}

impl BundleModel {
    pub fn new(line_degrees: Vec<i64>) -> Self {
        BundleModel { line_degrees }
    }

    pub fn rank(&self) -> usize {
        self.line_degrees.len()
    }

    pub fn degree_sum(&self) -> i64 {
        self.line_degrees.iter().sum()
    }

    pub fn is_convex(&self) -> bool {
        self.line_degrees.iter().all(|&l| l >= 0)
    }

    pub fn dual(&self) -> Self {
        BundleModel { line_degrees: self.line_degrees.iter().map(|l| -l).collect() }
    }

    /// Top Chern class prod(l H) on P^n.
    pub fn euler(&self, x: &SpaceModel) -> CohClass {
        let h = x.hyperplane();
        self.line_degrees.iter().fold(CohClass::one(x.rank()), |acc, &l| {
            acc.cup(&h.scale(&rint(l)))
        })
    }

    pub fn c1(&self, x: &SpaceModel) -> CohClass {
        x.hyperplane().scale(&rint(self.degree_sum()))
    }
}

/// X = P^n, a convex split bundle E, the zero locus Z (through its ambient
/// quotient) and the total space Y of the dual bundle.
#[derive(Clone, Debug)]
pub struct GeometryTriple {
    pub x: SpaceModel,
    pub bundle: BundleModel,
    pub euler_e: CohClass,
    pub euler_edual: CohClass,
    /// Basis of ker(e(E)) on H*(X).
    pub ambient_kernel: Vec<CohClass>,
    /// Monomial exponents whose images form a basis of H*(X)/K.
    pub ambient_basis: Vec<usize>,
    /// Gram matrix of (a, b) -> int a b e(E) on the ambient basis.
    pub ambient_gram: RatMatrix,
}

impl GeometryTriple {
    pub fn new(n: usize, degrees: Vec<i64>) -> Result<Self> {
        let bundle = BundleModel::new(degrees);
        if !bundle.is_convex() {
            return Err(QsdError::NonConvex(bundle.line_degrees.clone()));
        }
        let x = SpaceModel::projective(n);
        let euler_e = bundle.euler(&x);
        let euler_edual = bundle.dual().euler(&x);
        let len = x.rank();
        let kmat = mult_matrix(&euler_e);
        let ambient_kernel: Vec<CohClass> =
            kernel(&kmat, len).into_iter().map(CohClass::from_coeffs).collect();
        // greedy monomial basis of the quotient
        let mut ambient_basis = Vec::new();
        let mut span: Vec<Vec<Rat>> = ambient_kernel.iter().map(|c| c.coeffs.clone()).collect();
        for k in 0..len {
            let mut trial = span.clone();
            trial.push(CohClass::<Rat>::monomial(len, k).coeffs);
            if rank(&trial) == trial.len() {
                span = trial;
                ambient_basis.push(k);
            }
        }
        let ambient_gram: RatMatrix = ambient_basis
            .iter()
            .map(|&a| {
                ambient_basis
                    .iter()
                    .map(|&b| CohClass::<Rat>::monomial(len, a + b).cup(&euler_e).integrate())
                    .collect()
            })
            .collect();
        if !ambient_basis.is_empty() && determinant(&ambient_gram).is_zero() {
            return Err(QsdError::AmbientDegenerate);
        }
        Ok(GeometryTriple {
            x,
            bundle,
            euler_e,
            euler_edual,
            ambient_kernel,
            ambient_basis,
            ambient_gram,
        })
    }

    pub fn n(&self) -> usize {
        self.x.dim
    }

    pub fn len(&self) -> usize {
        self.x.rank()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn rank_e(&self) -> usize {
        self.bundle.rank()
    }

    /// phi = e(E^v) . (-), read from the compact-support model to H*(Y).
    pub fn phi(&self, x: &CohClass) -> CohClass {
        self.euler_edual.cup(x)
    }

    /// i_* a = e(E^v) . a in the Y-model.
    pub fn pushforward(&self, a: &CohClass) -> CohClass {
        self.phi(a)
    }

    pub fn phi_matrix(&self) -> RatMatrix {
        mult_matrix(&self.euler_edual)
    }

    /// Reduced echelon basis of im(phi).
    pub fn narrow_basis(&self) -> Vec<CohClass> {
        let (red, piv) = rref(&transpose(&self.phi_matrix()));
        red.into_iter().take(piv.len()).map(CohClass::from_coeffs).collect()
    }

    /// Some x with phi(x) = alpha.
    pub fn lift(&self, alpha: &CohClass) -> Result<CohClass> {
        solve(&self.phi_matrix(), &alpha.coeffs)
            .map(CohClass::from_coeffs)
            .ok_or(QsdError::NotNarrow)
    }

    pub fn is_narrow(&self, alpha: &CohClass) -> bool {
        self.lift(alpha).is_ok()
    }

    /// Compactly supported product lift(alpha) . beta.
    pub fn cup_c(&self, alpha: &CohClass, beta: &CohClass) -> Result<CohClass> {
        if !self.is_narrow(beta) {
            return Err(QsdError::NotNarrow);
        }
        Ok(self.lift(alpha)?.cup(beta))
    }

    pub fn narrow_pairing(&self, alpha: &CohClass, beta: &CohClass) -> Result<Rat> {
        Ok(self.cup_c(alpha, beta)?.integrate())
    }

    pub fn narrow_gram(&self) -> RatMatrix {
        let b = self.narrow_basis();
        b.iter()
            .map(|u| b.iter().map(|v| self.narrow_pairing(u, v).expect("basis is narrow")).collect())
            .collect()
    }

    pub fn kernel_phi(&self) -> Vec<CohClass> {
        kernel(&self.phi_matrix(), self.len()).into_iter().map(CohClass::from_coeffs).collect()
    }

    /// Coordinates of the image of a in H*(X)/K on the ambient basis.
    pub fn ambient_project(&self, a: &CohClass) -> Vec<Rat> {
        let len = self.len();
        let m = self.ambient_basis.len();
        let mut cols: Vec<Vec<Rat>> = self
            .ambient_basis
            .iter()
            .map(|&k| CohClass::<Rat>::monomial(len, k).coeffs)
            .collect();
        cols.extend(self.ambient_kernel.iter().map(|c| c.coeffs.clone()));
        let sol = solve(&transpose(&cols), &a.coeffs).expect("basis and kernel span H*(X)");
        sol[..m].to_vec()
    }

    /// Projection matrix H*(X) -> ambient coordinates.
    pub fn ambient_projection_matrix(&self) -> RatMatrix {
        let len = self.len();
        let cols: Vec<Vec<Rat>> =
            (0..len).map(|k| self.ambient_project(&CohClass::monomial(len, k))).collect();
        transpose(&cols)
    }

    /// Ambient pairing of two classes on X through their images.
    pub fn ambient_pairing(&self, a: &CohClass, b: &CohClass) -> Rat {
        a.cup(b).cup(&self.euler_e).integrate()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_basis.len()
    }

    pub fn narrow_dim(&self) -> usize {
        rank(&self.phi_matrix())
    }

    /// The linear-algebra facts behind the narrow pairing, each with its outcome:
    /// im(phi) is the annihilator of ker(phi), the narrow Gram matrix is
    /// invertible, i_* and phi have the same image, cup_c ignores the lift.
    pub fn narrow_checks(&self) -> Vec<(&'static str, bool)> {
        let len = self.len();
        let basis = self.narrow_basis();
        let ker = self.kernel_phi();
        let narrow: Vec<Vec<Rat>> = basis.iter().map(|c| c.coeffs.clone()).collect();
        let perp: Vec<Vec<Rat>> = if ker.is_empty() {
            mat_identity(len)
        } else {
            let rows: RatMatrix = ker
                .iter()
                .map(|k| (0..len).map(|i| CohClass::<Rat>::monomial(len, i).cup(k).integrate()).collect())
                .collect();
            kernel(&rows, len)
        };
        let spans_agree = |a: &[Vec<Rat>], b: &[Vec<Rat>]| {
            let both: Vec<Vec<Rat>> = a.iter().chain(b).cloned().collect();
            let r = rank(&both);
            rank(&a.to_vec()) == r && rank(&b.to_vec()) == r
        };
        let pushed: Vec<Vec<Rat>> = (0..len).map(|k| self.pushforward(&CohClass::monomial(len, k)).coeffs).collect();
        let lift_free = basis.iter().all(|u| {
            let lift = self.lift(u).expect("basis is narrow");
            basis.iter().all(|v| {
                let base = lift.cup(v);
                ker.iter().all(|k| lift.add(k).cup(v) == base)
            })
        });
        vec![
            ("narrow subspace is the annihilator of ker(phi)", spans_agree(&narrow, &perp)),
            ("narrow Gram matrix is nondegenerate", basis.is_empty() || !determinant(&self.narrow_gram()).is_zero()),
            ("im i_* equals im e(E^v)", spans_agree(&pushed, &narrow)),
            ("cup_c is independent of the lift", lift_free),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cls(v: &[i64]) -> CohClass {
        CohClass::from_coeffs(v.iter().map(|&x| rint(x)).collect())
    }

    #[test]
    fn narrow_bases() {
        let g = GeometryTriple::new(2, vec![1]).unwrap();
        assert_eq!(g.narrow_basis(), vec![cls(&[0, 1, 0]), cls(&[0, 0, 1])]);
        let g = GeometryTriple::new(1, vec![0, 0]).unwrap();
        assert!(g.narrow_basis().is_empty());
        let g = GeometryTriple::new(3, vec![2]).unwrap();
        assert_eq!(g.narrow_basis().len(), 3);
    }

    #[test]
    fn lifts() {
        let g = GeometryTriple::new(2, vec![1]).unwrap();
        assert_eq!(g.lift(&cls(&[0, 1, 0])).unwrap(), cls(&[-1, 0, 0]));
        assert_eq!(g.lift(&cls(&[1, 0, 0])), Err(QsdError::NotNarrow));
        let g = GeometryTriple::new(1, vec![2]).unwrap();
        assert_eq!(g.lift(&cls(&[0, 2])).unwrap(), cls(&[-1, 0]));
    }

    #[test]
    fn compact_products_and_pairings() {
        let g = GeometryTriple::new(2, vec![1]).unwrap();
        let h = cls(&[0, 1, 0]);
        assert_eq!(g.cup_c(&h, &h).unwrap(), cls(&[0, -1, 0]));
        let i1 = g.pushforward(&cls(&[1, 0, 0]));
        let ih = g.pushforward(&cls(&[0, 1, 0]));
        assert_eq!(g.narrow_pairing(&i1, &ih).unwrap(), rint(-1));
        assert_eq!(g.narrow_pairing(&i1, &i1).unwrap(), rint(0));
        let g = GeometryTriple::new(1, vec![1]).unwrap();
        // the zero section of Tot O(-1) over P^1 has self-intersection -1
        assert_eq!(g.cup_c(&cls(&[0, 1]), &cls(&[0, 1])).unwrap(), cls(&[0, -1]));
        assert_eq!(g.kernel_phi(), vec![cls(&[0, 1])]);
    }

    #[test]
    fn ambient_models() {
        let g = GeometryTriple::new(2, vec![3]).unwrap();
        assert_eq!(g.ambient_basis, vec![0, 1]);
        assert_eq!(g.ambient_gram[0][1], rint(3));
        let g = GeometryTriple::new(2, vec![1]).unwrap();
        assert_eq!(g.ambient_kernel, vec![cls(&[0, 0, 1])]);
        assert_eq!(g.ambient_project(&cls(&[0, 0, 1])), vec![rint(0), rint(0)]);
        assert_eq!(g.ambient_gram[0][1], rint(1));
        assert!(matches!(GeometryTriple::new(2, vec![-1]), Err(QsdError::NonConvex(_))));
    }

    #[test]
    fn class_inverse() {
        let a = cls(&[2, 3, 5]);
        let inv = a.inverse().unwrap();
        assert_eq!(a.cup(&inv), cls(&[1, 0, 0]));
    }
}
