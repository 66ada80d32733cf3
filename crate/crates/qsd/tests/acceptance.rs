use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_traits::{One, Zero};
use rayon::prelude::*;

use qsd::charcls::{
    euler_characteristic, gamma_class, gamma_reflection_residual, gamma_roots, gamma_tangent, SheafClass,
};
use qsd::cohring::{determinant, rank, CohClass, GeometryTriple};
use qsd::hypergeo::{local_invariants, TheoryDatum, TwistSpec};
use qsd::qdm::{
    all_passed, build_plain, chi_lines, euler_pairing_check, flatness_residual, pair_unitarity_residual,
    unitarity_residual, Flavor, ModuleSet, Residual,
};
use qsd::serre::{verify_compact_qsd, verify_cone_qsd, verify_narrow_qsd};
use qsd::{QsdError, Rat};

enum Verdict {
    Pass,
    Fail,
    /// Fails exactly as analysed in the decisions ledger.
    KnownFail,
}

struct Outcome {
    verdict: Verdict,
    notes: Vec<String>,
}

impl Outcome {
    fn from_checks(notes: Vec<String>, ok: bool) -> Self {
        Outcome { verdict: if ok { Verdict::Pass } else { Verdict::Fail }, notes }
    }
}

fn describe(rs: &[Residual]) -> Vec<String> {
    rs.iter()
        .filter(|r| !r.passed())
        .map(|r| {
            let first = r.offenders.first().map(|o| o.to_string()).unwrap_or_default();
            format!("{}: {} nonzero, first {}", r.label, r.nonzero, first)
        })
        .collect()
}

fn geometry(n: usize, degrees: &[i64]) -> GeometryTriple {
    GeometryTriple::new(n, degrees.to_vec()).expect("grid geometry is convex")
}

/// P^n for n <= 3 with split bundles of rank 1 or 2 and line degrees in 0..=3.
fn linear_grid() -> Vec<(usize, Vec<i64>)> {
    let mut out = Vec::new();
    for n in 1..=3 {
        for a in 0..=3 {
            out.push((n, vec![a]));
            for b in a..=3 {
                out.push((n, vec![a, b]));
            }
        }
    }
    out
}

fn label(n: usize, d: &[i64]) -> String {
    let parts: Vec<String> = d.iter().map(|a| format!("O({a})")).collect();
    format!("(P{n}, {})", parts.join("+"))
}

fn same_span(a: &[Vec<Rat>], b: &[Vec<Rat>]) -> bool {
    let both: Vec<Vec<Rat>> = a.iter().chain(b).cloned().collect();
    let r = rank(&both);
    rank(&a.to_vec()) == r && rank(&b.to_vec()) == r
}

fn narrow_linear_algebra() -> Outcome {
    let mut notes = Vec::new();
    for (n, d) in linear_grid() {
        let g = geometry(n, &d);
        let len = g.len();
        let narrow: Vec<Vec<Rat>> = g.narrow_basis().into_iter().map(|c| c.coeffs).collect();
        let ker = g.kernel_phi();
        // complement of ker(phi) under the compact-support pairing
        let rows: Vec<Vec<Rat>> = (0..len)
            .map(|i| ker.iter().map(|k| CohClass::<Rat>::monomial(len, i).cup(k).integrate()).collect())
            .collect();
        let perp: Vec<Vec<Rat>> = if ker.is_empty() {
            (0..len).map(|i| CohClass::<Rat>::monomial(len, i).coeffs).collect()
        } else {
            qsd::cohring::kernel(&qsd::cohring::transpose(&rows), len)
        };
        if !same_span(&narrow, &perp) {
            notes.push(format!("{}: narrow subspace differs from ker(phi)^perp", label(n, &d)));
        }
        if !narrow.is_empty() && determinant(&g.narrow_gram()).is_zero() {
            notes.push(format!("{}: narrow Gram matrix is degenerate", label(n, &d)));
        }
        let pushed: Vec<Vec<Rat>> =
            (0..len).map(|k| g.pushforward(&CohClass::monomial(len, k)).coeffs).collect();
        let mult: Vec<Vec<Rat>> = (0..len).map(|k| g.euler_edual.cup(&CohClass::monomial(len, k)).coeffs).collect();
        if !same_span(&pushed, &mult) || !same_span(&pushed, &narrow) {
            notes.push(format!("{}: im i_* differs from im e(E^v)", label(n, &d)));
        }
        let basis = g.narrow_basis();
        for u in &basis {
            let lift = g.lift(u).expect("narrow basis lifts");
            for v in &basis {
                let base = lift.cup(v);
                for k in &ker {
                    if lift.add(k).cup(v) != base {
                        notes.push(format!("{}: cup_c depends on the lift", label(n, &d)));
                    }
                }
            }
        }
    }
    let ok = notes.is_empty();
    notes.insert(0, format!("{} geometries", linear_grid().len()));
    Outcome::from_checks(notes, ok)
}

fn criterion_geometries() -> Vec<(usize, Vec<i64>)> {
    vec![(1, vec![1]), (2, vec![1]), (2, vec![3])]
}

fn build_sets(trunc: usize) -> Vec<(String, Result<ModuleSet, QsdError>)> {
    criterion_geometries()
        .par_iter()
        .map(|(n, d)| (label(*n, d), ModuleSet::build(&geometry(*n, d), trunc)))
        .collect()
}

fn flatness(sets: &[(String, Result<ModuleSet, QsdError>)]) -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, set) in sets {
        let set = match set {
            Ok(s) => s,
            Err(e) => {
                ok = false;
                notes.push(format!("{name}: {e}"));
                continue;
            }
        };
        let results: Vec<_> = Flavor::ALL.par_iter().map(|f| (f, flatness_residual(set.module(*f)))).collect();
        for (f, r) in results {
            match r {
                Ok(rs) if all_passed(&rs) => {}
                Ok(rs) => {
                    ok = false;
                    notes.extend(describe(&rs).into_iter().map(|s| format!("{name} {}: {s}", f.name())));
                }
                Err(e) => {
                    ok = false;
                    notes.push(format!("{name} {}: {e}", f.name()));
                }
            }
        }
    }
    notes.insert(0, format!("{} geometries x {} flavors", sets.len(), Flavor::ALL.len()));
    Outcome::from_checks(notes, ok)
}

fn unitarity(sets: &[(String, Result<ModuleSet, QsdError>)]) -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, set) in sets {
        let Ok(set) = set else {
            ok = false;
            notes.push(format!("{name}: module set did not build"));
            continue;
        };
        let mut checks: Vec<(String, qsd::Result<Vec<Residual>>)> =
            Flavor::ALL
                .iter()
                .filter(|f| !matches!(f, Flavor::PlainY | Flavor::CompactY))
                .map(|f| (f.name().to_string(), unitarity_residual(set.module(*f))))
                .collect();
        checks.push(("Y pair".into(), pair_unitarity_residual(&set.y, &set.compact)));
        for (what, r) in checks {
            match r {
                Ok(rs) if all_passed(&rs) => {}
                Ok(rs) => {
                    ok = false;
                    notes.extend(describe(&rs).into_iter().map(|s| format!("{name} {what}: {s}")));
                }
                Err(e) => {
                    ok = false;
                    notes.push(format!("{name} {what}: {e}"));
                }
            }
        }
    }
    Outcome::from_checks(notes, ok)
}

fn lambda_limits() -> Outcome {
    let cases: Vec<(usize, Vec<i64>, TwistSpec)> = linear_grid()
        .into_iter()
        .flat_map(|(n, d)| {
            [TwistSpec::EulerTwist, TwistSpec::InverseEulerTwist].map(move |t| (n, d.clone(), t))
        })
        .collect();
    let results: Vec<_> = cases
        .par_iter()
        .map(|(n, d, t)| {
            let r = TheoryDatum::build(&geometry(*n, d), *t, 4).and_then(|th| {
                th.l.nonequivariant_limit()?;
                th.product_h.nonequivariant_limit()?;
                Ok(())
            });
            (label(*n, d), *t, r)
        })
        .collect();
    let mut notes = Vec::new();
    let (mut built, mut scoped, mut ok) = (0, 0, true);
    for (name, t, r) in results {
        match r {
            Ok(()) => built += 1,
            Err(e) if e.is_scope() => scoped += 1,
            Err(e) => {
                ok = false;
                notes.push(format!("{name} {}: {e}", t.name()));
            }
        }
    }
    notes.insert(0, format!("{built} theories have limits, {scoped} outside the mirror-map range"));
    Outcome::from_checks(notes, ok)
}

fn compact_solution_identity() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (n, d) in [(1, vec![1]), (2, vec![3])] {
        let name = label(n, &d);
        match ModuleSet::build(&geometry(n, &d), 3).and_then(|s| verify_compact_qsd(&s)) {
            Ok(rs) => {
                let first = &rs[..1];
                if !all_passed(first) {
                    ok = false;
                    notes.extend(describe(first).into_iter().map(|s| format!("{name}: {s}")));
                }
            }
            Err(e) => {
                ok = false;
                notes.push(format!("{name}: {e}"));
            }
        }
    }
    Outcome::from_checks(notes, ok)
}

fn verifiers() -> Outcome {
    let runs: Vec<_> = [(2usize, vec![1i64], 3usize), (2, vec![3], 2)]
        .par_iter()
        .map(|(n, d, trunc)| {
            let r = ModuleSet::build(&geometry(*n, d), *trunc).and_then(|s| {
                let mut rs = verify_compact_qsd(&s)?;
                rs.extend(verify_narrow_qsd(&s)?);
                Ok(rs)
            });
            (format!("{} D={trunc}", label(*n, d)), r)
        })
        .collect();
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, r) in runs {
        match r {
            Ok(rs) => {
                notes.push(format!("{name}: {} residuals", rs.len()));
                if !all_passed(&rs) {
                    ok = false;
                    notes.extend(describe(&rs).into_iter().map(|s| format!("{name}: {s}")));
                }
            }
            Err(e) => {
                ok = false;
                notes.push(format!("{name}: {e}"));
            }
        }
    }
    Outcome::from_checks(notes, ok)
}

fn euler_pairing() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for n in 1..=2 {
        let g = geometry(n, &[]);
        let m = match build_plain(&g, 3) {
            Ok(m) => m,
            Err(e) => {
                notes.push(format!("P{n}: {e}"));
                ok = false;
                continue;
            }
        };
        for a in -1..=1 {
            for b in -1..=1 {
                let chi = euler_characteristic(&SheafClass::line(b), &SheafClass::line(a), &g.x)
                    .expect("sheaves on X");
                if chi != chi_lines(n, a, b) {
                    ok = false;
                    notes.push(format!("P{n}: chi(O({b}), O({a})) = {chi} disagrees with the binomial"));
                }
                match euler_pairing_check(&m, &SheafClass::line(a), &SheafClass::line(b)) {
                    Ok(r) if r.passed() => {}
                    Ok(r) => {
                        ok = false;
                        notes.extend(describe(&[r]).into_iter().map(|s| format!("P{n}: {s}")));
                    }
                    Err(e) => {
                        ok = false;
                        notes.push(format!("P{n} a={a} b={b}: {e}"));
                    }
                }
            }
        }
    }
    notes.insert(0, "18 pairings through q^3".into());
    Outcome::from_checks(notes, ok)
}

fn gamma_identities() -> Outcome {
    let mut notes = Vec::new();
    let residual = gamma_reflection_residual(6);
    let mut ok = residual.iter().all(|c| c.is_zero());
    if !ok {
        notes.push("reflection residual nonzero through x^6".into());
    }
    for (n, d) in linear_grid() {
        let g = geometry(n, &d);
        // tangent roots of Y: n + 1 copies of H from the Euler sequence, then the fibre roots
        let mut roots = vec![1; n + 1];
        roots.extend(d.iter().map(|a| -a));
        let direct = gamma_roots(&roots, &g.x);
        let factored = gamma_tangent(&g.x).cup(&gamma_class(&g.bundle.dual(), &g.x));
        if direct != factored {
            ok = false;
            notes.push(format!("{}: Gamma_Y does not factor", label(n, &d)));
        }
    }
    notes.insert(0, format!("reflection to x^6, factorization on {} geometries", linear_grid().len()));
    Outcome::from_checks(notes, ok)
}

fn local_p2() -> Outcome {
    let expected = [Rat::from_integer(3.into()), Rat::new((-45).into(), 8.into()), Rat::new(244.into(), 9.into())];
    match local_invariants(&geometry(2, &[3]), 3) {
        Ok(found) => {
            let shown: Vec<String> = found.iter().map(|r| r.to_string()).collect();
            let ok = found.len() >= 3 && found[..3] == expected;
            Outcome::from_checks(vec![format!("found {}", shown.join(", "))], ok)
        }
        Err(e) => Outcome::from_checks(vec![e.to_string()], false),
    }
}

fn cone() -> Outcome {
    let report = match ModuleSet::build(&geometry(1, &[1]), 3).and_then(|s| verify_cone_qsd(&s)) {
        Ok(r) => r,
        Err(e) => return Outcome::from_checks(vec![e.to_string()], false),
    };
    let mut notes = Vec::new();
    let solutions_ok = report.solutions.passed();
    notes.push(format!("solution identity: {}", if solutions_ok { "pass" } else { "FAIL" }));
    notes.extend(describe(std::slice::from_ref(&report.solutions)));
    let sym = &report.symplectic;
    let ratio = sym.ratio.as_ref().map(|r| r.to_string()).unwrap_or_else(|| "inconsistent".into());
    notes.push(format!(
        "symplecticity as stated: {} (measured ratio {ratio})",
        if sym.residual.passed() { "pass" } else { "FAIL" }
    ));
    notes.push(format!(
        "symplecticity up to (-1)^rank: {}",
        if sym.signed_residual.passed() { "pass" } else { "FAIL" }
    ));
    let verdict = if !solutions_ok {
        Verdict::Fail
    } else if sym.residual.passed() {
        Verdict::Pass
    } else if sym.signed_residual.passed() && sym.ratio == Some(-Rat::one()) {
        notes.push("sign flip matches the ledger analysis of e(E)/e(E^v) = (-1)^rank".into());
        Verdict::KnownFail
    } else {
        Verdict::Fail
    };
    Outcome { verdict, notes }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn report(id: usize, title: &str, budget: Option<Duration>, outcome: Outcome, took: Duration) -> Verdict {
    let over = budget.is_some_and(|b| took > b);
    let verdict = match (outcome.verdict, over) {
        (_, true) => Verdict::Fail,
        (v, false) => v,
    };
    let tag = match verdict {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::KnownFail => "FAIL (known)",
    };
    let budget_text = budget.map(|b| format!(", budget {} s", b.as_secs())).unwrap_or_default();
    println!("[{tag}] {id:>2} {title} ({:.2} s{budget_text})", took.as_secs_f64());
    if over {
        println!("       over the time budget");
    }
    for n in outcome.notes {
        println!("       {n}");
    }
    verdict
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut verdicts = Vec::new();

    let (o, t) = timed(narrow_linear_algebra);
    verdicts.push(report(1, "narrow linear algebra", Some(Duration::from_secs(1)), o, t));

    let ((sets, o), t) = timed(|| {
        let sets = build_sets(4);
        let o = flatness(&sets);
        (sets, o)
    });
    verdicts.push(report(2, "flatness of all flavors at D=4", Some(Duration::from_secs(30)), o, t));

    let (o, t) = timed(|| unitarity(&sets));
    verdicts.push(report(3, "unitarity and pair unitarity at D=4", None, o, t));
    drop(sets);

    let (o, t) = timed(lambda_limits);
    verdicts.push(report(4, "non-equivariant limits at D=4", None, o, t));

    let (o, t) = timed(compact_solution_identity);
    verdicts.push(report(5, "compact-support solution identity at D=3", None, o, t));

    let (o, t) = timed(verifiers);
    verdicts.push(report(6, "compact and narrow verifiers", None, o, t));

    let (o, t) = timed(euler_pairing);
    verdicts.push(report(7, "pairing of integral flat sections against chi", None, o, t));

    let (o, t) = timed(gamma_identities);
    verdicts.push(report(8, "Gamma class identities", None, o, t));

    let (o, t) = timed(local_p2);
    verdicts.push(report(9, "local P2 invariants", Some(Duration::from_secs(60)), o, t));

    let (o, t) = timed(cone);
    verdicts.push(report(10, "cone identity and symplecticity at D=3", None, o, t));

    let total = start.elapsed();
    let within = total <= Duration::from_secs(180);
    let passed = verdicts.iter().filter(|v| matches!(v, Verdict::Pass)).count();
    let known = verdicts.iter().filter(|v| matches!(v, Verdict::KnownFail)).count();
    let failed = verdicts.len() - passed - known;
    println!(
        "{passed} passed, {known} known failure, {failed} failed in {:.2} s (budget 180 s{})",
        total.as_secs_f64(),
        if within { "" } else { ", exceeded" }
    );
    if failed == 0 && within { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
