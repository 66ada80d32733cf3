use std::cell::OnceCell;
use std::time::{Duration, Instant};

use num_traits::Zero;
use serde::Serialize;

use qsd::charcls::{gamma_class, gamma_reflection_residual, gamma_roots, gamma_tangent, SheafClass};
use qsd::cohring::GeometryTriple;
use qsd::hypergeo::{local_invariants_from_product, TheoryDatum, TwistSpec};
use qsd::qdm::{
    euler_pairing_check, flatness_residual, pair_unitarity_residual, plain_from, unitarity_residual, Flavor,
    ModuleSet, Residual,
};
use qsd::serre::{noncov_residual, verify_compact_qsd, verify_cone_qsd, verify_narrow_qsd};
use qsd::series::Offender;
use qsd::{QsdError, Scalar};

use crate::cache::{load_theory, Cache, Source};
use crate::scenario::{Scenario, Suite};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    ScopeError,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Location {
    pub row: usize,
    pub col: usize,
    pub q: usize,
    pub z: i32,
    pub lambda: i32,
    pub lz: u32,
    pub value: String,
}

impl From<&Offender> for Location {
    fn from(o: &Offender) -> Self {
        Location { row: o.row, col: o.col, q: o.q, z: o.z, lambda: o.lambda, lz: o.lz, value: o.value.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "is_zero")]
    pub nonzero: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub offenders: Vec<Location>,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

impl Check {
    fn flag(label: impl Into<String>, passed: bool) -> Self {
        Check { label: label.into(), passed, nonzero: usize::from(!passed), offenders: Vec::new() }
    }

    fn from_residual(prefix: Option<&str>, r: &Residual) -> Self {
        let label = match prefix {
            Some(p) => format!("{p}: {}", r.label),
            None => r.label.clone(),
        };
        Check { label, passed: r.passed(), nonzero: r.nonzero, offenders: r.offenders.iter().map(Location::from).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Derived {
    pub name: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub derived: Vec<Derived>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub scenario: Scenario,
    pub status: Status,
    pub suites: Vec<SuiteReport>,
}

/// Wall-clock and cache notes; these go to stderr, never into a report.
#[derive(Clone, Debug, Default)]
pub struct RunLog {
    pub lines: Vec<String>,
}

impl RunLog {
    fn timed(&mut self, what: String, took: Duration) {
        self.lines.push(format!("{what}: {:.3} s", took.as_secs_f64()));
    }
}

#[derive(Default)]
struct Body {
    checks: Vec<Check>,
    derived: Vec<Derived>,
}

impl Body {
    fn residuals(prefix: Option<&str>, rs: &[Residual]) -> Self {
        Body { checks: rs.iter().map(|r| Check::from_residual(prefix, r)).collect(), derived: Vec::new() }
    }
}

/// Theories and modules of one scenario, built on first use.
struct Context<'a> {
    g: GeometryTriple,
    order: usize,
    cache: Option<&'a Cache>,
    theories: [OnceCell<Result<TheoryDatum, QsdError>>; 3],
    set: OnceCell<Result<ModuleSet, QsdError>>,
    log: RunLog,
}

const TWISTS: [TwistSpec; 3] = [TwistSpec::Untwisted, TwistSpec::EulerTwist, TwistSpec::InverseEulerTwist];

impl<'a> Context<'a> {
    fn theory(&mut self, twist: TwistSpec) -> Result<&TheoryDatum, QsdError> {
        let slot = TWISTS.iter().position(|t| *t == twist).expect("known twist");
        if self.theories[slot].get().is_none() {
            let start = Instant::now();
            let built = load_theory(self.cache, &self.g, twist, self.order);
            let source = match &built {
                Ok((_, Source::Hit)) => "cache hit",
                Ok((_, Source::Miss)) => "computed, cached",
                Ok((_, Source::Recomputed)) => "recomputed after corrupt entry",
                Ok((_, Source::Uncached)) => "computed",
                Err(_) => "failed",
            };
            self.log.timed(format!("  theory {} ({source})", twist.name()), start.elapsed());
            let _ = self.theories[slot].set(built.map(|(t, _)| t));
        }
        self.theories[slot].get().expect("just set").as_ref().map_err(Clone::clone)
    }

    fn set(&mut self) -> Result<&ModuleSet, QsdError> {
        if self.set.get().is_none() {
            let built = (|| {
                let u = self.theory(TwistSpec::Untwisted)?.clone();
                let e = self.theory(TwistSpec::EulerTwist)?.clone();
                let i = self.theory(TwistSpec::InverseEulerTwist)?.clone();
                ModuleSet::from_theories(u, e, i)
            })();
            let _ = self.set.set(built);
        }
        self.set.get().expect("just set").as_ref().map_err(Clone::clone)
    }
}

fn run_suite(ctx: &mut Context, suite: Suite) -> Result<Body, QsdError> {
    match suite {
        Suite::Narrow => Ok(Body {
            checks: ctx.g.narrow_checks().into_iter().map(|(l, ok)| Check::flag(l, ok)).collect(),
            derived: vec![Derived { name: "narrow dimension".into(), value: ctx.g.narrow_dim().to_string() }],
        }),
        Suite::Flatness => {
            let set = ctx.set()?;
            let mut body = Body::default();
            for f in Flavor::ALL {
                let m = set.module(f);
                body.checks.extend(Body::residuals(Some(f.name()), &flatness_residual(m)?).checks);
                if !matches!(f, Flavor::PlainY | Flavor::CompactY) {
                    body.checks.extend(Body::residuals(Some(f.name()), &unitarity_residual(m)?).checks);
                }
            }
            body.checks.extend(Body::residuals(Some("Y pair"), &pair_unitarity_residual(&set.y, &set.compact)?).checks);
            Ok(body)
        }
        Suite::Cone => {
            let report = verify_cone_qsd(ctx.set()?)?;
            let sym = &report.symplectic;
            let mut body = Body::residuals(None, &[report.solutions.clone(), sym.signed_residual.clone()]);
            let ratio = sym.ratio.as_ref().map(|r| Scalar::from_rat(r.clone()).to_string());
            body.derived.push(Derived {
                name: "symplectic ratio".into(),
                value: ratio.unwrap_or_else(|| "inconsistent".into()),
            });
            Ok(body)
        }
        Suite::Compact => Ok(Body::residuals(None, &verify_compact_qsd(ctx.set()?)?)),
        Suite::Narrowqsd => {
            let set = ctx.set()?;
            let mut rs = verify_narrow_qsd(set)?;
            rs.push(noncov_residual(set)?);
            Ok(Body::residuals(None, &rs))
        }
        Suite::Gamma => {
            let mut body = Body::default();
            let refl = gamma_reflection_residual(6);
            body.checks.push(Check::flag("Gamma reflection through x^6", refl.iter().all(|c| c.is_zero())));
            let g = &ctx.g;
            let mut roots = vec![1; g.n() + 1];
            roots.extend(g.bundle.line_degrees.iter().map(|a| -a));
            let factored = gamma_tangent(&g.x).cup(&gamma_class(&g.bundle.dual(), &g.x));
            body.checks.push(Check::flag("Gamma_Y = pi^*(Gamma_X Gamma(E^v))", gamma_roots(&roots, &g.x) == factored));
            let plain = plain_from(ctx.theory(TwistSpec::Untwisted)?)?;
            for a in -1..=1 {
                for b in -1..=1 {
                    let r = euler_pairing_check(&plain, &SheafClass::line(a), &SheafClass::line(b))?;
                    body.checks.push(Check::from_residual(None, &r));
                }
            }
            Ok(body)
        }
        Suite::Invariants => {
            let g = ctx.g.clone();
            let product = ctx.theory(TwistSpec::InverseEulerTwist)?.product_h.nonequivariant_limit()?;
            let values = local_invariants_from_product(&g, &product)?;
            Ok(Body {
                checks: Vec::new(),
                derived: values
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| Derived { name: format!("d={}", i + 1), value: Scalar::from_rat(v).to_string() })
                    .collect(),
            })
        }
    }
}

fn scope_or_fail(suite: Suite, e: &QsdError) -> SuiteReport {
    SuiteReport {
        suite,
        status: if e.is_scope() { Status::ScopeError } else { Status::Fail },
        error: Some(e.to_string()),
        checks: Vec::new(),
        derived: Vec::new(),
    }
}

fn overall(suites: &[SuiteReport]) -> Status {
    if suites.iter().any(|s| s.status == Status::Fail) {
        Status::Fail
    } else if suites.iter().any(|s| s.status == Status::ScopeError) {
        Status::ScopeError
    } else {
        Status::Pass
    }
}

pub fn run_scenario(s: &Scenario, cache: Option<&Cache>) -> (Report, RunLog) {
    let cache = if s.cache { cache } else { None };
    let bundle: Vec<String> = s.bundle.iter().map(|a| a.to_string()).collect();
    let mut log = RunLog::default();
    log.lines.push(format!("scenario {} [{}] order {}", s.space, bundle.join(","), s.order));
    let g = match GeometryTriple::new(s.dim(), s.bundle.clone()) {
        Ok(g) => g,
        Err(e) => {
            let suites: Vec<SuiteReport> = s.suites.iter().map(|x| scope_or_fail(*x, &e)).collect();
            let status = overall(&suites);
            return (Report { scenario: s.clone(), status, suites }, log);
        }
    };
    let mut ctx = Context {
        g,
        order: s.order,
        cache,
        theories: Default::default(),
        set: OnceCell::new(),
        log,
    };
    let mut suites = Vec::new();
    for &suite in &s.suites {
        let start = Instant::now();
        let report = match run_suite(&mut ctx, suite) {
            Ok(body) => SuiteReport {
                suite,
                status: if body.checks.iter().all(|c| c.passed) { Status::Pass } else { Status::Fail },
                error: None,
                checks: body.checks,
                derived: body.derived,
            },
            Err(e) => scope_or_fail(suite, &e),
        };
        ctx.log.timed(format!("  suite {}", suite.name()), start.elapsed());
        suites.push(report);
    }
    let status = overall(&suites);
    (Report { scenario: s.clone(), status, suites }, ctx.log)
}

/// 0 when everything passed, 1 on any failure, 2 when the only problems are scope errors.
pub fn exit_code(reports: &[Report]) -> u8 {
    match overall_of(reports) {
        Status::Pass => 0,
        Status::Fail => 1,
        Status::ScopeError => 2,
    }
}

fn overall_of(reports: &[Report]) -> Status {
    if reports.iter().any(|r| r.status == Status::Fail) {
        Status::Fail
    } else if reports.iter().any(|r| r.status == Status::ScopeError) {
        Status::ScopeError
    } else {
        Status::Pass
    }
}

pub fn render_text(reports: &[Report]) -> String {
    let mut out = String::new();
    for r in reports {
        let bundle: Vec<String> = r.scenario.bundle.iter().map(|a| format!("O({a})")).collect();
        let bundle = if bundle.is_empty() { "0".to_string() } else { bundle.join(" + ") };
        out.push_str(&format!("{} with {} to order {}: {}\n", r.scenario.space, bundle, r.scenario.order, status_word(r.status)));
        for s in &r.suites {
            out.push_str(&format!("  {}: {}\n", s.suite.name(), status_word(s.status)));
            if let Some(e) = &s.error {
                out.push_str(&format!("    {e}\n"));
            }
            for c in s.checks.iter().filter(|c| !c.passed) {
                out.push_str(&format!("    failed: {} ({} nonzero)\n", c.label, c.nonzero));
                for o in &c.offenders {
                    out.push_str(&format!(
                        "      [{},{}] q^{} z^{} lambda^{} Lz^{}: {}\n",
                        o.row, o.col, o.q, o.z, o.lambda, o.lz, o.value
                    ));
                }
            }
            for d in &s.derived {
                out.push_str(&format!("    {} = {}\n", d.name, d.value));
            }
        }
    }
    out
}

fn status_word(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::Fail => "FAIL",
        Status::ScopeError => "out of scope",
    }
}
