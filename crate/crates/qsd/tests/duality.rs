use qsd::cohring::GeometryTriple;
use qsd::qdm::{ModuleSet, Residual};
use qsd::scalars::rint;
use qsd::serre::{
    change_of_variables, noncov_residual, verify_compact_qsd, verify_cone_qsd, verify_narrow_qsd,
    CovKind,
};

fn failures(rs: &[Residual]) -> Vec<String> {
    rs.iter()
        .filter(|r| !r.passed())
        .map(|r| format!("{}: {:?}", r.label, r.offenders.iter().map(|o| o.to_string()).collect::<Vec<_>>()))
        .collect()
}

fn set(n: usize, d: Vec<i64>, trunc: usize) -> ModuleSet {
    ModuleSet::build(&GeometryTriple::new(n, d).unwrap(), trunc).unwrap()
}

#[test]
fn compact_and_narrow_verifiers_pass() {
    for s in [set(1, vec![1], 3), set(2, vec![1], 3), set(2, vec![3], 2)] {
        let f = failures(&verify_compact_qsd(&s).unwrap());
        assert!(f.is_empty(), "{f:?}");
        let f = failures(&verify_narrow_qsd(&s).unwrap());
        assert!(f.is_empty(), "{f:?}");
        assert!(noncov_residual(&s).unwrap().passed());
    }
}

#[test]
fn cone_solutions_intertwine() {
    let s = set(1, vec![1], 3);
    let c = verify_cone_qsd(&s).unwrap();
    assert!(c.solutions.passed());
}

#[test]
fn delta_scales_the_symplectic_form_by_sign_of_rank() {
    let s = set(1, vec![1], 3);
    let c = verify_cone_qsd(&s).unwrap();
    assert!(c.symplectic.signed_residual.passed());
    assert_eq!(c.symplectic.ratio, Some(rint(-1)));
    assert!(!c.symplectic.residual.passed());
}

#[test]
fn changes_of_variables_vanish_at_q0() {
    let s = set(2, vec![3], 2);
    for k in [CovKind::FhatX, CovKind::FhatY] {
        let c = change_of_variables(&s, k).unwrap();
        assert!(c.components.iter().all(|x| x.layer(0).is_empty()), "{}", k.name());
    }
    // local P^2: fbar_X has no constant term in degree 0 and -3 pi i in degree 2
    let bar = change_of_variables(&s, CovKind::FbarX).unwrap();
    let (t0, t2) = bar.tau().unwrap();
    assert!(t0.layer(0).is_empty());
    assert_eq!(t2.coeff(0, (0, 0, 0)), -qsd::Scalar::i_pi() * qsd::Scalar::from_int(3));
}

#[test]
fn perturbed_compact_solution_is_caught() {
    let mut s = set(1, vec![1], 3);
    s.compact.solution.entries[1][0].add_term(2, (-1, 0, 0), rint(1));
    let f = failures(&verify_compact_qsd(&s).unwrap());
    assert!(f.iter().any(|l| l.starts_with("L^{Y,c}")), "{f:?}");
}

#[test]
fn perturbed_narrow_solution_is_caught() {
    let mut s = set(2, vec![1], 2);
    s.narrow.solution.entries[1][0].add_term(1, (-2, 0, 0), rint(1));
    let f = failures(&verify_narrow_qsd(&s).unwrap());
    assert!(f.iter().any(|l| l.starts_with("narrow integral square")), "{f:?}");
}
