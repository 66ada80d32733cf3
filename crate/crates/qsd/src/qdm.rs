//! Quantum D-modules in six flavors, their pairings, residual checks and
//! Gamma-integral flat sections.

use num_traits::{One, Zero};

use crate::charcls::{
    apply_operator, chern_character, class_to_vec, cup_vec, euler_characteristic, gamma_class,
    gamma_tangent, rat_class_to, todd, OperatorSpec, SheafBase, SheafClass,
};
use crate::cohring::{CohClass, GeometryTriple, RatMatrix};
use crate::error::{QsdError, Result};
use crate::hypergeo::{cup_h_matrix, TheoryDatum, TwistSpec};
use crate::scalars::{rint, Coeff, Rat, Scalar};
use crate::series::{Offender, Series, SeriesMatrix, SeriesVec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Flavor {
    PlainX,
    TwistedE,
    AmbientZ,
    PlainY,
    CompactY,
    NarrowY,
}

impl Flavor {
    pub const ALL: [Flavor; 6] = [
        Flavor::PlainX,
        Flavor::TwistedE,
        Flavor::AmbientZ,
        Flavor::PlainY,
        Flavor::CompactY,
        Flavor::NarrowY,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Flavor::PlainX => "plain-X",
            Flavor::TwistedE => "twisted-e(E)",
            Flavor::AmbientZ => "ambient-Z",
            Flavor::PlainY => "plain-Y",
            Flavor::CompactY => "compact-Y",
            Flavor::NarrowY => "narrow-Y",
        }
    }
}

/// How vectors of the H*(X) model map to section coordinates.
#[derive(Clone, Debug)]
enum SectionMap {
    Identity,
    /// Quotient by the kernel of e(E), with the projection matrix.
    Quotient(RatMatrix),
    /// Subspace spanned by an echelon basis, with pivot positions.
    Sub(Vec<usize>),
}

#[derive(Clone, Debug)]
pub struct QuantumDModule {
    pub flavor: Flavor,
    pub geometry: GeometryTriple,
    pub trunc: usize,
    /// Sections as classes in the H*(X) model.
    pub basis: Vec<CohClass>,
    /// Half real degree of each section.
    pub degrees: Vec<i64>,
    pub solution: SeriesMatrix<Rat>,
    pub product_h: SeriesMatrix<Rat>,
    pub cup_h: SeriesMatrix<Rat>,
    /// Gram matrix of the pairing; for the plain/compact Y pair this is the
    /// cross pairing <pi^* a, i^c_* b> = int a b.
    pub pairing: SeriesMatrix<Rat>,
    /// Exponent of (2 pi i z) in S and of (2 pi i)^{-1} in flat sections.
    pub dim: i64,
    /// deg q = 2 q_weight.
    pub q_weight: i64,
    pub equivariant: bool,
    map: SectionMap,
}

impl QuantumDModule {
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Section coordinates of a vector in the H*(X) model.
    pub fn to_sections<C: Coeff>(&self, v: &[Series<C>]) -> Result<SeriesVec<C>> {
        match &self.map {
            SectionMap::Identity => Ok(v.to_vec()),
            SectionMap::Quotient(p) => Ok(rat_apply(p, v)),
            SectionMap::Sub(piv) => {
                let coords: SeriesVec<C> = piv.iter().map(|&p| v[p].clone()).collect();
                let back = self.from_sections(&coords);
                if v.iter().zip(&back).any(|(a, b)| a != b) {
                    return Err(QsdError::NarrowNotClosed("vector leaves the narrow subspace".into()));
                }
                Ok(coords)
            }
        }
    }

    /// The H*(X)-model representative of section coordinates.
    pub fn from_sections<C: Coeff>(&self, coords: &[Series<C>]) -> SeriesVec<C> {
        let len = self.geometry.len();
        let trunc = coords.first().map_or(self.trunc, |s| s.trunc());
        let mut out = vec![Series::zero(trunc); len];
        for (b, c) in self.basis.iter().zip(coords) {
            for (k, x) in b.coeffs.iter().enumerate() {
                if !x.is_zero() {
                    out[k] = &out[k] + &c.scale(&C::from_rat(x.clone()));
                }
            }
        }
        out
    }

    pub fn gr_matrix(&self) -> SeriesMatrix<Rat> {
        let mut m = SeriesMatrix::zero(self.len(), self.len(), self.trunc);
        for (k, d) in self.degrees.iter().enumerate() {
            m.entries[k][k] = Series::constant(self.trunc, rint(*d));
        }
        m
    }
}

fn rat_apply<C: Coeff>(p: &RatMatrix, v: &[Series<C>]) -> SeriesVec<C> {
    let trunc = v.first().map_or(0, |s| s.trunc());
    p.iter()
        .map(|row| {
            row.iter().zip(v).fold(Series::zero(trunc), |acc, (x, s)| {
                if x.is_zero() {
                    acc
                } else {
                    &acc + &s.scale(&C::from_rat(x.clone()))
                }
            })
        })
        .collect()
}

fn monomials(len: usize) -> Vec<CohClass> {
    (0..len).map(|k| CohClass::monomial(len, k)).collect()
}

fn antidiagonal(len: usize, trunc: usize) -> SeriesMatrix<Rat> {
    let mut g = SeriesMatrix::zero(len, len, trunc);
    for a in 0..len {
        g.entries[a][len - 1 - a] = Series::one(trunc);
    }
    g
}

fn from_theory(t: &TheoryDatum, flavor: Flavor, dim: i64, equivariant: bool) -> QuantumDModule {
    let len = t.geometry.len();
    QuantumDModule {
        flavor,
        geometry: t.geometry.clone(),
        trunc: t.trunc,
        basis: monomials(len),
        degrees: (0..len as i64).collect(),
        solution: t.l.clone(),
        product_h: t.product_h.clone(),
        cup_h: cup_h_matrix(len, t.trunc),
        pairing: t.pairing.clone(),
        dim,
        q_weight: t.q_weight(),
        equivariant,
        map: SectionMap::Identity,
    }
}

fn expect_twist(t: &TheoryDatum, twist: TwistSpec) -> Result<()> {
    if t.twist != twist {
        return Err(QsdError::FlavorMismatch(format!(
            "expected a {} theory, got {}",
            twist.name(),
            t.twist.name()
        )));
    }
    Ok(())
}

pub fn plain_from(t: &TheoryDatum) -> Result<QuantumDModule> {
    expect_twist(t, TwistSpec::Untwisted)?;
    Ok(from_theory(t, Flavor::PlainX, t.geometry.n() as i64, false))
}

pub fn euler_twisted_from(t: &TheoryDatum) -> Result<QuantumDModule> {
    expect_twist(t, TwistSpec::EulerTwist)?;
    let g = &t.geometry;
    Ok(from_theory(t, Flavor::TwistedE, g.n() as i64 - g.rank_e() as i64, true))
}

/// Ambient module of Z: the lambda -> 0 limit of the e(E)-twisted theory on H*(X)/ker e(E).
pub fn ambient_from(t: &TheoryDatum) -> Result<QuantumDModule> {
    expect_twist(t, TwistSpec::EulerTwist)?;
    let g = &t.geometry;
    let len = g.len();
    let trunc = t.trunc;
    let p = g.ambient_projection_matrix();
    let incl: RatMatrix = (0..len)
        .map(|k| g.ambient_basis.iter().map(|&b| if b == k { Rat::one() } else { Rat::zero() }).collect())
        .collect();
    let p_m = SeriesMatrix::from_rat_matrix(&p, trunc);
    let i_m = SeriesMatrix::from_rat_matrix(&incl, trunc);
    let descend = |m: &SeriesMatrix<Rat>| -> Result<SeriesMatrix<Rat>> {
        p_m.checked_mul(&m.checked_mul(&i_m)?)
    };
    let l0 = t.l.nonequivariant_limit()?;
    let a0 = t.product_h.nonequivariant_limit()?;
    Ok(QuantumDModule {
        flavor: Flavor::AmbientZ,
        geometry: g.clone(),
        trunc,
        basis: g.ambient_basis.iter().map(|&k| CohClass::monomial(len, k)).collect(),
        degrees: g.ambient_basis.iter().map(|&k| k as i64).collect(),
        solution: descend(&l0)?,
        product_h: descend(&a0)?,
        cup_h: descend(&cup_h_matrix(len, trunc))?,
        pairing: SeriesMatrix::from_rat_matrix(&g.ambient_gram, trunc),
        dim: g.n() as i64 - g.rank_e() as i64,
        q_weight: t.q_weight(),
        equivariant: false,
        map: SectionMap::Quotient(p),
    })
}

/// The lambda -> 0 limits of the e(E)-twisted solution and product must
/// preserve ker e(E); returns the leaked components.
pub fn ambient_well_defined(t: &TheoryDatum) -> Result<SeriesMatrix<Rat>> {
    let g = &t.geometry;
    let p = SeriesMatrix::from_rat_matrix(&g.ambient_projection_matrix(), t.trunc);
    let kernel = SeriesMatrix::from_rat_matrix(
        &crate::cohring::transpose(&g.ambient_kernel.iter().map(|c| c.coeffs.clone()).collect()),
        t.trunc,
    );
    if g.ambient_kernel.is_empty() {
        return Ok(SeriesMatrix::zero(0, 0, t.trunc));
    }
    let l0 = t.l.nonequivariant_limit()?;
    let a0 = t.product_h.nonequivariant_limit()?;
    let leak_l = p.checked_mul(&l0.checked_mul(&kernel)?)?;
    let leak_a = p.checked_mul(&a0.checked_mul(&kernel)?)?;
    let mut entries = leak_l.entries;
    entries.extend(leak_a.entries);
    Ok(SeriesMatrix { trunc: t.trunc, entries })
}

/// Plain and compactly supported modules of Y from the inverse-Euler twisted theory.
pub fn y_pair_from(t: &TheoryDatum) -> Result<(QuantumDModule, QuantumDModule)> {
    expect_twist(t, TwistSpec::InverseEulerTwist)?;
    let g = &t.geometry;
    let len = g.len();
    let trunc = t.trunc;
    let r = g.rank_e() as i64;
    let dim = g.n() as i64 + r;
    let l = t.l.nonequivariant_limit()?;
    let a = t.product_h.nonequivariant_limit()?;
    let g0 = antidiagonal(len, trunc);
    // G0 is its own inverse
    let adj_inv = l.flip_z()?.transpose().invert_unipotent()?;
    let lc = g0.checked_mul(&adj_inv)?.checked_mul(&g0)?;
    let ac = g0.checked_mul(&a.transpose())?.checked_mul(&g0)?;
    let plain = QuantumDModule {
        flavor: Flavor::PlainY,
        geometry: g.clone(),
        trunc,
        basis: monomials(len),
        degrees: (0..len as i64).collect(),
        solution: l,
        product_h: a,
        cup_h: cup_h_matrix(len, trunc),
        pairing: g0.clone(),
        dim,
        q_weight: t.q_weight(),
        equivariant: false,
        map: SectionMap::Identity,
    };
    let compact = QuantumDModule {
        flavor: Flavor::CompactY,
        degrees: (0..len as i64).map(|k| k + r).collect(),
        solution: lc,
        product_h: ac,
        ..plain.clone()
    };
    Ok((plain, compact))
}

/// Restriction of the plain Y module to the narrow subspace im(phi).
pub fn narrow_from(plain: &QuantumDModule) -> Result<QuantumDModule> {
    if plain.flavor != Flavor::PlainY {
        return Err(QsdError::FlavorMismatch("narrow module restricts plain-Y".into()));
    }
    let g = &plain.geometry;
    let trunc = plain.trunc;
    let basis = g.narrow_basis();
    let mut pivots = Vec::new();
    let mut degrees = Vec::new();
    for b in &basis {
        let p = b.coeffs.iter().position(|c| !c.is_zero()).expect("basis vectors are nonzero");
        if b.coeffs.iter().enumerate().any(|(k, c)| k != p && !c.is_zero()) {
            return Err(QsdError::InvalidArgument("narrow basis is not homogeneous".into()));
        }
        pivots.push(p);
        degrees.push(p as i64);
    }
    let mut m = QuantumDModule {
        flavor: Flavor::NarrowY,
        geometry: g.clone(),
        trunc,
        basis: basis.clone(),
        degrees,
        solution: SeriesMatrix::zero(0, 0, trunc),
        product_h: SeriesMatrix::zero(0, 0, trunc),
        cup_h: SeriesMatrix::zero(0, 0, trunc),
        pairing: SeriesMatrix::from_rat_matrix(&g.narrow_gram(), trunc),
        dim: plain.dim,
        q_weight: plain.q_weight,
        equivariant: false,
        map: SectionMap::Sub(pivots),
    };
    let restrict = |op: &SeriesMatrix<Rat>, what: &str| -> Result<SeriesMatrix<Rat>> {
        let cols = basis
            .iter()
            .map(|b| m.to_sections(&op.apply(&class_to_vec(b, trunc))))
            .collect::<Result<Vec<_>>>()
            .map_err(|_| QsdError::NarrowNotClosed(format!("{what} leaves the narrow subspace")))?;
        Ok(SeriesMatrix::from_columns(&cols, trunc))
    };
    let solution = restrict(&plain.solution, "the solution")?;
    let product_h = restrict(&plain.product_h, "the quantum product")?;
    let cup_h = restrict(&plain.cup_h, "the cup product")?;
    m.solution = solution;
    m.product_h = product_h;
    m.cup_h = cup_h;
    Ok(m)
}

/// Every theory and module of one geometry at one truncation.
#[derive(Clone, Debug)]
pub struct ModuleSet {
    pub untwisted: TheoryDatum,
    pub euler: TheoryDatum,
    pub inverse: TheoryDatum,
    pub plain: QuantumDModule,
    pub twisted: QuantumDModule,
    pub ambient: QuantumDModule,
    pub y: QuantumDModule,
    pub compact: QuantumDModule,
    pub narrow: QuantumDModule,
}

impl ModuleSet {
    pub fn build(g: &GeometryTriple, trunc: usize) -> Result<Self> {
        let (untwisted, (euler, inverse)) = rayon::join(
            || TheoryDatum::build(g, TwistSpec::Untwisted, trunc),
            || {
                rayon::join(
                    || TheoryDatum::build(g, TwistSpec::EulerTwist, trunc),
                    || TheoryDatum::build(g, TwistSpec::InverseEulerTwist, trunc),
                )
            },
        );
        Self::from_theories(untwisted?, euler?, inverse?)
    }

    pub fn from_theories(untwisted: TheoryDatum, euler: TheoryDatum, inverse: TheoryDatum) -> Result<Self> {
        let plain = plain_from(&untwisted)?;
        let twisted = euler_twisted_from(&euler)?;
        let ambient = ambient_from(&euler)?;
        let (y, compact) = y_pair_from(&inverse)?;
        let narrow = narrow_from(&y)?;
        Ok(ModuleSet { untwisted, euler, inverse, plain, twisted, ambient, y, compact, narrow })
    }

    pub fn module(&self, f: Flavor) -> &QuantumDModule {
        match f {
            Flavor::PlainX => &self.plain,
            Flavor::TwistedE => &self.twisted,
            Flavor::AmbientZ => &self.ambient,
            Flavor::PlainY => &self.y,
            Flavor::CompactY => &self.compact,
            Flavor::NarrowY => &self.narrow,
        }
    }
}

pub fn build_plain(g: &GeometryTriple, trunc: usize) -> Result<QuantumDModule> {
    plain_from(&TheoryDatum::build(g, TwistSpec::Untwisted, trunc)?)
}

pub fn build_euler_twisted(g: &GeometryTriple, trunc: usize) -> Result<QuantumDModule> {
    euler_twisted_from(&TheoryDatum::build(g, TwistSpec::EulerTwist, trunc)?)
}

pub fn build_ambient(g: &GeometryTriple, trunc: usize) -> Result<QuantumDModule> {
    ambient_from(&TheoryDatum::build(g, TwistSpec::EulerTwist, trunc)?)
}

pub fn build_y_pair(g: &GeometryTriple, trunc: usize) -> Result<(QuantumDModule, QuantumDModule)> {
    y_pair_from(&TheoryDatum::build(g, TwistSpec::InverseEulerTwist, trunc)?)
}

pub fn build_narrow(g: &GeometryTriple, trunc: usize) -> Result<QuantumDModule> {
    narrow_from(&build_y_pair(g, trunc)?.0)
}

/// A named residual: the check passes when it has no nonzero coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    pub label: String,
    pub nonzero: usize,
    pub offenders: Vec<Offender>,
}

pub const OFFENDER_LIMIT: usize = 8;

impl Residual {
    pub fn from_matrix<C: Coeff>(label: impl Into<String>, m: &SeriesMatrix<C>) -> Self {
        Residual {
            label: label.into(),
            nonzero: m.entries.iter().flatten().map(|s| s.term_count()).sum(),
            offenders: m.offenders(OFFENDER_LIMIT),
        }
    }

    pub fn from_vec<C: Coeff>(label: impl Into<String>, v: &[Series<C>]) -> Self {
        let m = SeriesMatrix { trunc: v.first().map_or(0, |s| s.trunc()), entries: v.iter().map(|s| vec![s.clone()]).collect() };
        Self::from_matrix(label, &m)
    }

    pub fn passed(&self) -> bool {
        self.nonzero == 0
    }
}

pub fn all_passed(rs: &[Residual]) -> bool {
    rs.iter().all(Residual::passed)
}

/// Flatness of the connection on L z^{-Gr} z^{c H} in the H and z directions,
/// and the curvature of the z-direction against H.
pub fn flatness_residual(m: &QuantumDModule) -> Result<Vec<Residual>> {
    let trunc = m.trunc;
    let n = m.len();
    let l = &m.solution;
    let a = &m.product_h;
    let c = rint(m.q_weight);
    let tdir = l.q_derivative() - (l * &m.cup_h).shift_z(-1) + (a * l).shift_z(-1);

    let mut zgr = SeriesMatrix::zero(n, n, trunc);
    for (k, d) in m.degrees.iter().enumerate() {
        zgr.entries[k][k] = Series::z_power(trunc, -(*d as i32));
    }
    let zrho = m.cup_h.scale_c(&c).shift_lz(1).exp()?;
    let phi = &(l * &zgr) * &zrho;
    let gr = m.gr_matrix();
    let mut zdir = &(phi.z_derivative() - (a * &phi).scale_c(&c).shift_z(-2)) + &(&gr * &phi).shift_z(-1);
    if m.equivariant {
        zdir = &zdir + &phi.lambda_euler().shift_z(-1);
    }

    let mut curv = a + &(&(a * &gr) - &(&gr * a));
    curv = &curv - &a.q_derivative().scale_c(&c);
    if m.equivariant {
        curv = &curv - &a.lambda_euler();
    }
    Ok(vec![
        Residual::from_matrix("flatness in H", &tdir),
        Residual::from_matrix("flatness in z", &zdir),
        Residual::from_matrix("curvature", &curv),
    ])
}

/// L(-z)^T G L(z) = G and self-adjointness of H* for self-paired flavors.
pub fn unitarity_residual(m: &QuantumDModule) -> Result<Vec<Residual>> {
    if matches!(m.flavor, Flavor::PlainY | Flavor::CompactY) {
        return Err(QsdError::FlavorMismatch(format!("{} is paired with its partner", m.flavor.name())));
    }
    let l = &m.solution;
    let g = &m.pairing;
    let lhs = &(&l.flip_z()?.transpose() * g) * l;
    let adj = &(&m.product_h.transpose() * g) - &(g * &m.product_h);
    Ok(vec![
        Residual::from_matrix(format!("{} unitarity", m.flavor.name()), &(&lhs - g)),
        Residual::from_matrix(format!("{} product self-adjoint", m.flavor.name()), &adj),
    ])
}

/// <L^Y(-z) a, L^{Y,c}(z) b> = <a, b>, duality of the products, and the
/// intertwining L^Y phi = phi L^{Y,c}.
pub fn pair_unitarity_residual(y: &QuantumDModule, yc: &QuantumDModule) -> Result<Vec<Residual>> {
    let g0 = &y.pairing;
    let lhs = &(&y.solution.flip_z()?.transpose() * g0) * &yc.solution;
    let adj = &(&y.product_h.transpose() * g0) - &(g0 * &yc.product_h);
    let phi = SeriesMatrix::from_rat_matrix(&y.geometry.phi_matrix(), y.trunc);
    let inter_l = &(&y.solution * &phi) - &(&phi * &yc.solution);
    let inter_a = &(&y.product_h * &phi) - &(&phi * &yc.product_h);
    Ok(vec![
        Residual::from_matrix("Y pairing unitarity", &(&lhs - g0)),
        Residual::from_matrix("Y products dual", &adj),
        Residual::from_matrix("phi intertwines solutions", &inter_l),
        Residual::from_matrix("phi intertwines products", &inter_a),
    ])
}

/// A class-valued series times (2 pi i)^power.
#[derive(Clone, Debug, PartialEq)]
pub struct PiScaled {
    pub value: SeriesVec<Scalar>,
    pub power: i64,
}

pub fn two_pi_i_pow(k: i64) -> Scalar {
    assert!(k >= 0, "negative power of 2 pi i");
    Scalar::two_pi_i().pow(k as u32)
}

impl PiScaled {
    /// self - other, both brought to the lower power of 2 pi i.
    pub fn difference(&self, o: &PiScaled) -> SeriesVec<Scalar> {
        let low = self.power.min(o.power);
        let a = two_pi_i_pow(self.power - low);
        let b = two_pi_i_pow(o.power - low);
        self.value.iter().zip(&o.value).map(|(x, y)| &x.scale(&a) - &y.scale(&b)).collect()
    }

    pub fn map(&self, f: impl Fn(&SeriesVec<Scalar>) -> SeriesVec<Scalar>) -> PiScaled {
        PiScaled { value: f(&self.value), power: self.power }
    }
}

/// ch^c(i_* O(a)) = ch(O(a)) Td(E^v)^{-1} in the compact-support model.
pub fn ch_compact(f: &SheafClass, g: &GeometryTriple) -> Result<CohClass> {
    if f.base != SheafBase::OnY {
        return Err(QsdError::FlavorMismatch("compact Chern character needs i_* O(a)".into()));
    }
    let td_inv = todd(&g.bundle.dual(), &g.x)
        .inverse()
        .ok_or_else(|| QsdError::InvalidArgument("Todd class is not invertible".into()))?;
    Ok(chern_character(&f.underlying(), &g.x)?.cup(&td_inv))
}

/// ch on Y: pi^* O(a) -> ch(O(a)); i_* O(a) -> phi(ch^c(i_* O(a))).
pub fn ch_plain(f: &SheafClass, g: &GeometryTriple) -> Result<CohClass> {
    match f.base {
        SheafBase::OnX => chern_character(f, &g.x),
        SheafBase::OnY => Ok(g.phi(&ch_compact(f, g)?)),
    }
}

/// Gamma class and c1 weight of each flavor.
fn gamma_and_weight(m: &QuantumDModule) -> (CohClass<Scalar>, i64) {
    let g = &m.geometry;
    let gx = gamma_tangent(&g.x);
    match m.flavor {
        Flavor::PlainX => (gx, g.n() as i64 + 1),
        Flavor::TwistedE | Flavor::AmbientZ => {
            let ge = gamma_class(&g.bundle, &g.x).inverse().expect("Gamma class is a unit");
            (gx.cup(&ge), m.q_weight)
        }
        Flavor::PlainY | Flavor::CompactY | Flavor::NarrowY => {
            (gx.cup(&gamma_class(&g.bundle.dual(), &g.x)), m.q_weight)
        }
    }
}

/// s(F) = (2 pi i)^{-dim} L z^{-Gr} z^rho Gamma (2 pi i)^{deg/2} ch(F).
pub fn gamma_flat_section(m: &QuantumDModule, f: &SheafClass) -> Result<PiScaled> {
    flat_section_with(m, f, None)
}

/// The same section with the solution replaced, e.g. by one at a shifted parameter.
pub fn flat_section_with(
    m: &QuantumDModule,
    f: &SheafClass,
    solution: Option<&SeriesMatrix<Scalar>>,
) -> Result<PiScaled> {
    let g = &m.geometry;
    let trunc = m.trunc;
    let r = g.rank_e() as i64;
    let (ch, extra) = match (m.flavor, f.base) {
        (Flavor::PlainX | Flavor::TwistedE | Flavor::AmbientZ, SheafBase::OnX) => (chern_character(f, &g.x)?, 0),
        (Flavor::PlainY, _) => (ch_plain(f, g)?, 0),
        (Flavor::NarrowY, SheafBase::OnY) => (ch_plain(f, g)?, 0),
        (Flavor::CompactY, SheafBase::OnY) => (ch_compact(f, g)?, r),
        _ => {
            return Err(QsdError::FlavorMismatch(format!(
                "sheaf on {:?} has no section in {}",
                f.base,
                m.flavor.name()
            )))
        }
    };
    let (gamma, weight) = gamma_and_weight(m);
    let mut v = class_to_vec(&rat_class_to::<Scalar>(&ch), trunc);
    v = apply_operator(&OperatorSpec::TwoPiIDeg0, &v)?;
    v = cup_vec(&v, &class_to_vec(&gamma, trunc));
    let rho = g.x.hyperplane().scale(&rint(weight));
    v = apply_operator(&OperatorSpec::ZRho { rho }, &v)?;
    v = apply_operator(&OperatorSpec::ZMinusGr { real_offset: 2 * extra }, &v)?;
    let coords = m.to_sections(&v)?;
    let value = match solution {
        Some(l) => l.apply(&coords),
        None => to_scalar(&m.solution).apply(&coords),
    };
    Ok(PiScaled { value, power: extra - m.dim })
}

pub fn to_scalar(m: &SeriesMatrix<Rat>) -> SeriesMatrix<Scalar> {
    m.map_coeffs(|c| Scalar::from_rat(c.clone()))
}

/// S(u, v) = (2 pi i z)^dim <u(-z), v(z)> for a Gram matrix `gram`.
pub fn s_pairing(gram: &SeriesMatrix<Rat>, dim: i64, u: &PiScaled, v: &PiScaled) -> Result<PiScaled> {
    let trunc = gram.trunc;
    let gs = to_scalar(gram);
    let uf: SeriesVec<Scalar> = u.value.iter().map(|s| s.flip_z()).collect::<Result<_>>()?;
    let gv = gs.apply(&v.value);
    let mut acc = Series::zero(trunc);
    for (a, b) in uf.iter().zip(&gv) {
        acc = &acc + &(a * b);
    }
    Ok(PiScaled { value: vec![acc.shift_z(dim as i32)], power: u.power + v.power + dim })
}

/// S^X(s(F), s(F')) against e^{pi i n} chi(F', F); the residual must vanish.
pub fn euler_pairing_check(m: &QuantumDModule, f: &SheafClass, f2: &SheafClass) -> Result<Residual> {
    if m.flavor != Flavor::PlainX {
        return Err(QsdError::FlavorMismatch("Euler pairing is checked on plain-X".into()));
    }
    let s1 = gamma_flat_section(m, f)?;
    let s2 = gamma_flat_section(m, f2)?;
    let s = s_pairing(&m.pairing, m.dim, &s1, &s2)?;
    let n = m.geometry.n() as i64;
    let chi = euler_characteristic(f2, f, &m.geometry.x)?;
    let sign = if n % 2 == 0 { Rat::one() } else { -Rat::one() };
    let expected = PiScaled {
        value: vec![Series::constant(m.trunc, Scalar::from_rat(chi * sign))],
        power: 0,
    };
    Ok(Residual::from_vec(
        format!("S(s({}), s({})) - e^(pi i n) chi", sheaf_label(f), sheaf_label(f2)),
        &s.difference(&expected),
    ))
}

pub fn sheaf_label(f: &SheafClass) -> String {
    let parts: Vec<String> = f
        .terms
        .iter()
        .map(|(a, m)| {
            let base = match f.base {
                SheafBase::OnX => format!("O({a})"),
                SheafBase::OnY => format!("i_*O({a})"),
            };
            if *m == 1 { base } else { format!("{m}*{base}") }
        })
        .collect();
    if parts.is_empty() { "0".into() } else { parts.join(" + ") }
}

/// chi(O(b), O(a)) on P^n: the monomial count binom(n + a - b, n), read as a
/// polynomial in a - b so it stays valid below zero.
pub fn chi_lines(n: usize, a: i64, b: i64) -> Rat {
    let m = a - b;
    (1..=n as i64).fold(Rat::one(), |acc, k| acc * rint(m + k) / rint(k))
}

/// Res_z <f(-z), g(z)> for a Gram matrix.
pub fn symplectic_pairing<C: Coeff>(gram: &SeriesMatrix<C>, f: &[Series<C>], g: &[Series<C>]) -> Result<Series<C>> {
    let trunc = gram.trunc;
    let ff: SeriesVec<C> = f.iter().map(|s| s.flip_z()).collect::<Result<_>>()?;
    let gg = gram.apply(g);
    let mut acc = Series::zero(trunc);
    for (a, b) in ff.iter().zip(&gg) {
        acc = &acc + &(a * b);
    }
    Ok(acc.z_coeff(-1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalars::rat;

    #[test]
    fn ambient_p2_o1_basis() {
        let g = GeometryTriple::new(2, vec![1]).unwrap();
        let m = build_ambient(&g, 1).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.pairing.entries[0][1].coeff(0, (0, 0, 0)), rint(1));
    }

    #[test]
    fn q0_flatness_and_plain_connection() {
        let g = GeometryTriple::new(1, vec![]).unwrap();
        let m = build_plain(&g, 0).unwrap();
        assert!(all_passed(&flatness_residual(&m).unwrap()));
        assert_eq!(m.product_h, cup_h_matrix(2, 0));
    }

    #[test]
    fn ch_of_pushforward_on_p1() {
        let g = GeometryTriple::new(1, vec![1]).unwrap();
        let c = ch_plain(&SheafClass::pushforward_line(0), &g).unwrap();
        assert_eq!(c.coeffs, vec![rint(0), rint(-1)]);
        let cc = ch_compact(&SheafClass::pushforward_line(0), &g).unwrap();
        let td = todd(&g.bundle.dual(), &g.x);
        assert_eq!(cc.cup(&td), chern_character(&SheafClass::line(0), &g.x).unwrap());
    }

    #[test]
    fn symplectic_pairing_basics() {
        let g = SeriesMatrix::<Rat>::from_rat_matrix(&vec![vec![rint(0), rint(1)], vec![rint(1), rint(0)]], 0);
        let a = vec![Series::constant(0, rint(1)), Series::zero(0)];
        let b = vec![Series::zero(0), Series::constant(0, rint(1))];
        assert!(symplectic_pairing(&g, &a, &b).unwrap().is_zero());
        let az: Vec<_> = a.iter().map(|s| s.shift_z(-1)).collect();
        // (a/z)(-z) = -a/z
        assert_eq!(symplectic_pairing(&g, &az, &b).unwrap(), Series::constant(0, rint(-1)));
        assert_eq!(symplectic_pairing(&g, &b, &az).unwrap(), Series::constant(0, rint(1)));
    }

    #[test]
    fn p1_structure_section_at_q0() {
        let g = GeometryTriple::new(1, vec![]).unwrap();
        let m = build_plain(&g, 0).unwrap();
        let s = gamma_flat_section(&m, &SheafClass::line(0)).unwrap();
        assert_eq!(s.power, -1);
        // Gamma_X = 1 - 2 g H, so the H-part at z^{-1} is -2g
        let h = s.value[1].coeff(0, (-1, 0, 0));
        assert_eq!(h, Scalar::euler_gamma() * Scalar::from_rat(rat(-2, 1)));
    }
}
