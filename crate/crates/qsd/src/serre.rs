//! Quantum Serre duality: the changes of variables and the verifiers for the
//! twisted cones, the compactly supported modules and the narrow modules.

use num_traits::{One, Zero};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use crate::charcls::{class_to_vec, cup_vec, euler_equiv, SheafClass};
use crate::cohring::{CohClass, GeometryTriple, RatMatrix};
use crate::error::{QsdError, Result};
use crate::hypergeo::{inverse_euler_dual, two_point};
use crate::qdm::{
    flat_section_with, gamma_flat_section, s_pairing, to_scalar, ModuleSet, PiScaled, QuantumDModule,
    Residual,
};
use crate::scalars::{rint, Coeff, Rat, Scalar};
use crate::series::{divisor_shift, Series, SeriesMatrix, SeriesVec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CovKind {
    FhatLambda,
    FhatX,
    FbarX,
    FhatY,
    FbarY,
}

impl CovKind {
    pub const ALL: [CovKind; 5] =
        [CovKind::FhatLambda, CovKind::FhatX, CovKind::FbarX, CovKind::FhatY, CovKind::FbarY];

    pub fn name(&self) -> &'static str {
        match self {
            CovKind::FhatLambda => "fhat_lambda",
            CovKind::FhatX => "fhat_X",
            CovKind::FbarX => "fbar_X",
            CovKind::FhatY => "fhat_Y",
            CovKind::FbarY => "fbar_Y",
        }
    }
}

/// A class-valued parameter series on the H*(X) model.
#[derive(Clone, Debug, PartialEq)]
pub struct ChangeOfVariables {
    pub kind: CovKind,
    pub components: SeriesVec<Scalar>,
}

impl ChangeOfVariables {
    /// The coefficients of 1 and H; anything beyond is out of scope.
    pub fn tau(&self) -> Result<(Series<Scalar>, Series<Scalar>)> {
        if let Some(k) = self.components.iter().skip(2).position(|s| !s.is_zero()) {
            return Err(QsdError::MirrorMapOutOfRange(format!(
                "{} has an H^{} component",
                self.kind.name(),
                k + 2
            )));
        }
        let trunc = self.components[0].trunc();
        let t2 = self.components.get(1).cloned().unwrap_or_else(|| Series::zero(trunc));
        Ok((self.components[0].clone(), t2))
    }
}

/// Maps between the models of Y, its compact-support cohomology and Z.
#[derive(Clone, Debug)]
pub struct DualityData {
    pub geometry: GeometryTriple,
    /// H*(X) (as compact-support model) -> ambient coordinates: j^* pi^c_*.
    pub delta_c: RatMatrix,
    /// A lift through phi, valid on the narrow subspace.
    pub lift: RatMatrix,
    /// delta_c composed with the lift.
    pub delta_nar: RatMatrix,
}

impl DualityData {
    pub fn new(g: &GeometryTriple) -> Result<Self> {
        let len = g.len();
        let mut lift = vec![vec![Rat::zero(); len]; len];
        for b in g.narrow_basis() {
            let piv = b.coeffs.iter().position(|c| !c.is_zero()).expect("basis vectors are nonzero");
            let x = g.lift(&b)?;
            for (k, c) in x.coeffs.iter().enumerate() {
                lift[k][piv] = c.clone();
            }
        }
        let delta_c = g.ambient_projection_matrix();
        let delta_nar = crate::cohring::mat_mul(&delta_c, &lift);
        Ok(DualityData { geometry: g.clone(), delta_c, lift, delta_nar })
    }

    /// delta_c applied to ker(phi); must vanish.
    pub fn kernel_leak(&self) -> Vec<Vec<Rat>> {
        self.geometry
            .kernel_phi()
            .iter()
            .map(|k| crate::cohring::mat_vec(&self.delta_c, &k.coeffs))
            .filter(|v| v.iter().any(|c| !c.is_zero()))
            .collect()
    }
}

fn rat_matrix_series<C: Coeff>(a: &RatMatrix, trunc: usize) -> SeriesMatrix<C> {
    SeriesMatrix::from_rat_matrix(a, trunc)
}

fn c1_bundle(g: &GeometryTriple) -> Rat {
    rint(g.bundle.degree_sum())
}

/// -pi i c1(E) as a scalar coefficient of H.
fn minus_pi_i_c1(g: &GeometryTriple) -> Scalar {
    -(Scalar::i_pi() * Scalar::from_rat(c1_bundle(g)))
}

/// exp(coef H / z) for the cup product matrix by H.
fn exp_h_over_z(cup_h: &SeriesMatrix<Scalar>, coef: &Scalar) -> Result<SeriesMatrix<Scalar>> {
    cup_h.scale_c(coef).shift_z(-1).exp()
}

fn scalar_vec(v: &[Series<Rat>]) -> SeriesVec<Scalar> {
    v.iter().map(|s| s.map_coeffs(|c| Scalar::from_rat(c.clone()))).collect()
}

fn minus_pi_i_c1_shift(g: &GeometryTriple, v: &mut [Series<Scalar>]) {
    if v.len() > 1 {
        let trunc = v[1].trunc();
        v[1] = &v[1] + &Series::constant(trunc, minus_pi_i_c1(g));
    }
}

/// Representative in span{1, H, ...} of an ambient coordinate vector.
fn ambient_representative(g: &GeometryTriple, coords: &[Series<Scalar>]) -> SeriesVec<Scalar> {
    let len = g.len();
    let trunc = coords.first().map_or(0, |s| s.trunc());
    let mut out = vec![Series::zero(trunc); len];
    for (&k, c) in g.ambient_basis.iter().zip(coords) {
        out[k] = c.clone();
    }
    out
}

/// The changes of variables from the inverse-Euler twisted theory.
pub fn change_of_variables(set: &ModuleSet, kind: CovKind) -> Result<ChangeOfVariables> {
    let g = &set.inverse.geometry;
    let trunc = set.inverse.trunc;
    let e_dual = euler_equiv(&g.bundle, true, &g.x, trunc);
    let components = match kind {
        CovKind::FhatLambda => scalar_vec(&two_point(&set.inverse.l, &e_dual)),
        CovKind::FhatX | CovKind::FbarX => {
            let fl = two_point(&set.inverse.l, &e_dual);
            let quotient = cup_vec(&fl, &inverse_euler_dual(g, trunc));
            let lim = quotient.iter().map(|s| s.nonequivariant_limit()).collect::<Result<Vec<_>>>()?;
            let mut v = scalar_vec(&lim);
            if kind == CovKind::FbarX {
                minus_pi_i_c1_shift(g, &mut v);
            }
            v
        }
        CovKind::FhatY => {
            let e0 = class_to_vec(&g.euler_edual, trunc);
            scalar_vec(&two_point(&set.y.solution, &e0))
        }
        CovKind::FbarY => {
            let fy = change_of_variables(set, CovKind::FhatY)?;
            let duality = DualityData::new(g)?;
            let coords = rat_matrix_series::<Scalar>(&duality.delta_nar, trunc).apply(&fy.components);
            let mut v = ambient_representative(g, &coords);
            minus_pi_i_c1_shift(g, &mut v);
            v
        }
    };
    Ok(ChangeOfVariables { kind, components })
}

/// Delta_+(fhat_Y) = j^* fhat_X.
pub fn noncov_residual(set: &ModuleSet) -> Result<Residual> {
    let g = &set.y.geometry;
    let trunc = set.y.trunc;
    let duality = DualityData::new(g)?;
    let fy = change_of_variables(set, CovKind::FhatY)?;
    let fx = change_of_variables(set, CovKind::FhatX)?;
    let lhs = rat_matrix_series::<Scalar>(&duality.delta_nar, trunc).apply(&fy.components);
    let rhs = rat_matrix_series::<Scalar>(&duality.delta_c, trunc).apply(&fx.components);
    let diff: SeriesVec<Scalar> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    Ok(Residual::from_vec("Delta_+(fhat_Y) - j^*(fhat_X)", &diff))
}

/// A solution moved to the parameter tau0 + tau2 H.
fn shifted_solution(
    l: &SeriesMatrix<Rat>,
    cup_h: &SeriesMatrix<Rat>,
    cov: &ChangeOfVariables,
) -> Result<SeriesMatrix<Scalar>> {
    let (t0, t2) = cov.tau()?;
    divisor_shift(&to_scalar(l), &t0, &t2, &to_scalar(cup_h))
}

fn cup_h_of(len: usize, trunc: usize) -> SeriesMatrix<Rat> {
    crate::hypergeo::cup_h_matrix(len, trunc)
}

/// Sample class-valued Laurent series in z and lambda for the symplectic check.
pub fn sample_vectors(len: usize, trunc: usize, count: usize, seed: u64) -> Vec<SeriesVec<Scalar>> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..len)
                .map(|_| {
                    let mut s = Series::zero(trunc);
                    for _ in 0..4 {
                        let d = rng.random_range(0..=trunc);
                        let a: i32 = rng.random_range(-2..=2);
                        let b: i32 = rng.random_range(0..=1);
                        let c: i64 = rng.random_range(-3..=3);
                        s.add_term(d, (a, b, 0), Scalar::from_int(c));
                    }
                    s
                })
                .collect()
        })
        .collect()
}

/// Omega^{e(E)}(Delta f, Delta g) / Omega^{e^{-1}(E^v)}(f, g) where the latter is nonzero:
/// the ratio by which Delta scales the symplectic form.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticReport {
    pub residual: Residual,
    /// Residual of Omega^{e(E)}(Delta f, Delta g) - (-1)^rk Omega^{e^{-1}(E^v)}(f, g).
    pub signed_residual: Residual,
    pub ratio: Option<Rat>,
}

/// Delta = e^{pi i c1(E)/z} / e_lambda(E^v) against the two symplectic forms.
pub fn symplectic_check(set: &ModuleSet, samples: usize, seed: u64) -> Result<SymplecticReport> {
    let g = &set.euler.geometry;
    let trunc = set.euler.trunc;
    let len = g.len();
    let inv_e = scalar_vec(&inverse_euler_dual(g, trunc));
    let cup = to_scalar(&cup_h_of(len, trunc));
    let phase = exp_h_over_z(&cup, &Scalar::i_pi().scale(&c1_bundle(g)))?;
    let delta = |v: &SeriesVec<Scalar>| phase.apply(&cup_vec(v, &inv_e));
    let ge = to_scalar(&set.euler.pairing);
    let gi = to_scalar(&set.inverse.pairing);
    let vs = sample_vectors(len, trunc, 2 * samples, seed);
    let sign = if g.rank_e().is_multiple_of(2) { Scalar::one() } else { -Scalar::one() };
    let mut diffs = Vec::new();
    let mut signed = Vec::new();
    let mut ratio: Option<Rat> = None;
    let mut ratio_consistent = true;
    for pair in vs.chunks(2) {
        let lhs = crate::qdm::symplectic_pairing(&ge, &delta(&pair[0]), &delta(&pair[1]))?;
        let rhs = crate::qdm::symplectic_pairing(&gi, &pair[0], &pair[1])?;
        diffs.push(&lhs - &rhs);
        signed.push(&lhs - &rhs.scale(&sign));
        let first = rhs.terms().next().map(|(d, k, c)| (d, *k, c.clone()));
        if let Some((d, k, c)) = first {
            if let (Some(a), Some(b)) = (lhs.coeff(d, k).as_rat(), c.as_rat()) {
                let r = a / b;
                match &ratio {
                    None => ratio = Some(r),
                    Some(prev) if *prev != r => ratio_consistent = false,
                    _ => {}
                }
            }
        }
    }
    Ok(SymplecticReport {
        residual: Residual::from_vec("Omega(Delta f, Delta g) - Omega(f, g)", &diffs),
        signed_residual: Residual::from_vec("Omega(Delta f, Delta g) - (-1)^rk Omega(f, g)", &signed),
        ratio: if ratio_consistent { ratio } else { None },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeReport {
    pub solutions: Residual,
    pub symplectic: SymplecticReport,
}

impl ConeReport {
    pub fn residuals(&self) -> Vec<Residual> {
        vec![self.solutions.clone(), self.symplectic.residual.clone()]
    }
}

/// L^{e^{-1}}(e_lambda(E^v) a) = e_lambda(E^v) L^{e}(fbar^lambda) e^{-pi i c1/z} a.
pub fn verify_cone_qsd(set: &ModuleSet) -> Result<ConeReport> {
    let g = &set.euler.geometry;
    let trunc = set.euler.trunc;
    let len = g.len();
    let e_dual = euler_equiv(&g.bundle, true, &g.x, trunc);
    let mult_e = to_scalar(&SeriesMatrix::cup_matrix(&e_dual, trunc));
    let fl = change_of_variables(set, CovKind::FhatLambda)?;
    let mut fbar = cup_vec(&fl.components, &scalar_vec(&inverse_euler_dual(g, trunc)));
    minus_pi_i_c1_shift(g, &mut fbar);
    let fbar = ChangeOfVariables { kind: CovKind::FhatLambda, components: fbar };
    let cup = cup_h_of(len, trunc);
    let shifted = shifted_solution(&set.euler.l, &cup, &fbar)?;
    let phase = exp_h_over_z(&to_scalar(&cup), &minus_pi_i_c1(g))?;
    let lhs = &to_scalar(&set.inverse.l) * &mult_e;
    let rhs = &(&mult_e * &shifted) * &phase;
    Ok(ConeReport {
        solutions: Residual::from_matrix("twisted solutions intertwined by e_lambda(E^v)", &(&lhs - &rhs)),
        symplectic: symplectic_check(set, 5, 0x5eed)?,
    })
}

/// The generators i_* O(a) for a in -1, 0, 1.
pub fn generator_sheaves() -> Vec<i64> {
    vec![-1, 0, 1]
}

/// Flat section of the ambient module at a shifted parameter.
fn ambient_section_at(set: &ModuleSet, shifted: &SeriesMatrix<Scalar>, a: i64) -> Result<PiScaled> {
    flat_section_with(&set.ambient, &SheafClass::line(a), Some(shifted))
}

fn delta_bar(amb: &QuantumDModule, delta: &RatMatrix, r: i64, v: &PiScaled) -> PiScaled {
    let coords = rat_matrix_series::<Scalar>(delta, amb.trunc).apply(&v.value);
    PiScaled { value: coords.iter().map(|s| s.shift_z(r as i32)).collect(), power: v.power + r }
}

/// Compact-support level: the solution identity, its image in Z, and the integral square.
pub fn verify_compact_qsd(set: &ModuleSet) -> Result<Vec<Residual>> {
    let g = &set.compact.geometry;
    let trunc = set.compact.trunc;
    let len = g.len();
    let r = g.rank_e() as i64;
    let duality = DualityData::new(g)?;
    let fbar = change_of_variables(set, CovKind::FbarX)?;
    let cup = cup_h_of(len, trunc);
    let phase = exp_h_over_z(&to_scalar(&cup), &minus_pi_i_c1(g))?;

    let le = set.euler.l.nonequivariant_limit()?;
    let rhs = &shifted_solution(&le, &cup, &fbar)? * &phase;
    let lcs = &to_scalar(&set.compact.solution) - &rhs;
    let mut out = vec![Residual::from_matrix("L^{Y,c} against the e(E)-twisted solution", &lcs)];

    let dc = rat_matrix_series::<Scalar>(&duality.delta_c, trunc);
    let lz = shifted_solution(&set.ambient.solution, &set.ambient.cup_h, &fbar)?;
    let left = &dc * &to_scalar(&set.compact.solution);
    let right = &(&lz * &dc) * &phase;
    out.push(Residual::from_matrix("Delta^c L^{Y,c} against L^Z", &(&left - &right)));

    if !duality.kernel_leak().is_empty() {
        out.push(Residual::from_vec(
            "Delta^c on ker(phi)",
            &[Series::constant(trunc, Scalar::one())],
        ));
    }

    for a in generator_sheaves() {
        let s_y = gamma_flat_section(&set.compact, &SheafClass::pushforward_line(a))?;
        let lhs = delta_bar(&set.ambient, &duality.delta_c, r, &s_y);
        let rhs = ambient_section_at(set, &lz, a)?;
        out.push(Residual::from_vec(
            format!("compact integral square for i_*O({a})"),
            &lhs.difference(&rhs),
        ));
    }
    Ok(out)
}

/// Narrow level: solution intertwining, pairing preservation, the integral
/// square, and Delta_+(pi^*(e(E^v) b)) = j^* b.
pub fn verify_narrow_qsd(set: &ModuleSet) -> Result<Vec<Residual>> {
    let g = &set.y.geometry;
    let trunc = set.y.trunc;
    let len = g.len();
    let r = g.rank_e() as i64;
    let duality = DualityData::new(g)?;
    let fbar = change_of_variables(set, CovKind::FbarY)?;
    let lz = shifted_solution(&set.ambient.solution, &set.ambient.cup_h, &fbar)?;
    let dn = rat_matrix_series::<Scalar>(&duality.delta_nar, trunc);
    let phi = rat_matrix_series::<Scalar>(&g.phi_matrix(), trunc);
    let phase = exp_h_over_z(&to_scalar(&cup_h_of(len, trunc)), &minus_pi_i_c1(g))?;
    let left = &(&dn * &to_scalar(&set.y.solution)) * &phi;
    let right = &(&(&lz * &dn) * &phase) * &phi;
    let mut out = vec![Residual::from_matrix("Delta_+ L^Y phi against L^Z", &(&left - &right))];

    // pairings of i_* a, i_* b for monomials a, b
    let mut gram_diff = Vec::new();
    for a in 0..len {
        for b in 0..len {
            let ia = class_to_vec(&g.phi(&CohClass::monomial(len, a)), trunc);
            let ib = class_to_vec(&g.phi(&CohClass::monomial(len, b)), trunc);
            let ua = PiScaled { value: scalar_vec(&ia), power: 0 };
            let ub = PiScaled { value: scalar_vec(&ib), power: 0 };
            let na = PiScaled { value: set.narrow.to_sections(&ua.value)?, power: 0 };
            let nb = PiScaled { value: set.narrow.to_sections(&ub.value)?, power: 0 };
            let s_y = s_pairing(&set.narrow.pairing, set.narrow.dim, &na, &nb)?;
            let za = delta_bar(&set.ambient, &duality.delta_nar, r, &ua);
            let zb = delta_bar(&set.ambient, &duality.delta_nar, r, &ub);
            let s_z = s_pairing(&set.ambient.pairing, set.ambient.dim, &za, &zb)?;
            gram_diff.extend(s_z.difference(&s_y));
        }
    }
    out.push(Residual::from_vec("S^Z(Delta i_*a, Delta i_*b) - S^{Y,nar}(i_*a, i_*b)", &gram_diff));

    for a in generator_sheaves() {
        let s_nar = gamma_flat_section(&set.narrow, &SheafClass::pushforward_line(a))?;
        let model = s_nar.map(|v| set.narrow.from_sections(v));
        let lhs = delta_bar(&set.ambient, &duality.delta_nar, r, &model);
        let rhs = ambient_section_at(set, &lz, a)?;
        out.push(Residual::from_vec(
            format!("narrow integral square for i_*O({a})"),
            &lhs.difference(&rhs),
        ));
    }

    let mut spot = Vec::new();
    for b in 0..len {
        let beta = CohClass::monomial(len, b);
        let lhs = crate::cohring::mat_vec(&duality.delta_nar, &g.phi(&beta).coeffs);
        let rhs = crate::cohring::mat_vec(&duality.delta_c, &beta.coeffs);
        spot.extend(lhs.iter().zip(&rhs).map(|(x, y)| Series::constant(trunc, x - y)));
    }
    out.push(Residual::from_vec("Delta_+(pi^*(e(E^v) b)) - j^*b", &spot));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_spot_identity_p2() {
        let g = GeometryTriple::new(2, vec![1]).unwrap();
        let d = DualityData::new(&g).unwrap();
        let h = CohClass::monomial(3, 1);
        let img = crate::cohring::mat_vec(&d.delta_nar, &g.phi(&h).coeffs);
        assert_eq!(img, g.ambient_project(&h));
        assert!(d.kernel_leak().is_empty());
    }

    #[test]
    fn fbar_minus_fhat_is_the_phase() {
        let g = GeometryTriple::new(1, vec![1]).unwrap();
        let set = ModuleSet::build(&g, 2).unwrap();
        let hat = change_of_variables(&set, CovKind::FhatX).unwrap();
        let bar = change_of_variables(&set, CovKind::FbarX).unwrap();
        assert!(hat.components.iter().all(|s| s.layer(0).is_empty()));
        let d = &bar.components[1] - &hat.components[1];
        assert_eq!(d, Series::constant(2, -Scalar::i_pi()));
    }
}
