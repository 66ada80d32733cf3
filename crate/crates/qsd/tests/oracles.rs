//! Independent oracles: values computed here never go through the
//! I-function matrix pipeline they are compared with.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use qsd::cohring::GeometryTriple;
use qsd::hypergeo::{local_invariants, TheoryDatum, TwistSpec};
use qsd::scalars::{factorial, rat, rint, Rat};
use qsd::series::Series;
use qsd::Scalar;

fn q_series(trunc: usize, coeffs: impl Fn(usize) -> Rat) -> Series<Rat> {
    let mut s = Series::zero(trunc);
    for d in 0..=trunc {
        s.add_term(d, (0, 0, 0), coeffs(d));
    }
    s
}

/// -1/3 + sum d^3 N_d Q^d from the scalar period and the Yukawa coupling.
fn yukawa_oracle(trunc: usize) -> Vec<Rat> {
    let tau = q_series(trunc, |d| {
        if d == 0 {
            return Rat::zero();
        }
        let sign = if d % 2 == 0 { 1 } else { -1 };
        Rat::new(BigInt::from(3 * sign) * factorial(3 * d as u64 - 1), factorial(d as u64).pow(3))
    });
    // q dT/dq = 1 + q tau'
    let dt = &Series::one(trunc) + &tau.q_derivative();
    let y_q = q_series(trunc, |d| rat(-1, 3) * rint(-27).pow(d as i32));
    let inv = dt.inverse().unwrap();
    let y = &y_q * &(&(&inv * &inv) * &inv);
    // q = Q u(Q) with u = exp(-tau(Q u))
    let mut u = Series::one(trunc);
    for _ in 0..=trunc {
        u = (-&tau.substitute_q(&u).unwrap()).exp().unwrap();
    }
    let y_big_q = y.substitute_q(&u).unwrap();
    assert_eq!(y_big_q.coeff(0, (0, 0, 0)), rat(-1, 3));
    (1..=trunc).map(|d| y_big_q.coeff(d, (0, 0, 0)) / rint(d as i64).pow(3)).collect()
}

fn golden() -> Vec<Rat> {
    include_str!("golden/local_p2.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let v = l.split_whitespace().nth(1).unwrap();
            v.parse::<Rat>().unwrap()
        })
        .collect()
}

#[test]
fn yukawa_oracle_matches_golden() {
    assert_eq!(yukawa_oracle(4), golden());
}

#[test]
fn local_p2_pipeline_matches_golden() {
    let g = GeometryTriple::new(2, vec![3]).unwrap();
    assert_eq!(local_invariants(&g, 4).unwrap(), golden());
}

#[test]
#[ignore]
fn print_local_p2_golden() {
    for (d, n) in yukawa_oracle(4).iter().enumerate() {
        println!("{} {}", d + 1, n);
    }
}

/// Degree-one J coefficient on P^1 by localization: the moduli space of
/// one-pointed lines is P^1 itself with psi = -2H, and the index bundle is trivial.
fn p1_degree_one(twist: TwistSpec, l: i64) -> [Vec<((i32, i32), Rat)>; 2] {
    // returns the 1 and H components as (z, lambda) -> coefficient
    let s = if twist == TwistSpec::InverseEulerTwist { -1 } else { 1 };
    let sl = |k: i32| rint(s).pow(k);
    let li = l as i32;
    [
        vec![((-1, li), sl(li))],
        vec![((-1, li - 1), -rint(l) * sl(li - 1)), ((-2, li), rint(-2) * sl(li))],
    ]
}

#[test]
fn p1_degree_one_localization() {
    for twist in [TwistSpec::EulerTwist, TwistSpec::InverseEulerTwist] {
        for l in [1, 2] {
            let g = GeometryTriple::new(1, vec![l]).unwrap();
            let t = TheoryDatum::build(&g, twist, 1).unwrap();
            let want = p1_degree_one(twist, l);
            for (k, comp) in want.iter().enumerate() {
                let got: Vec<((i32, i32), Rat)> = t.j[k]
                    .layer(1)
                    .iter()
                    .map(|(key, c)| ((key.0, key.1), c.clone()))
                    .collect();
                let mut w = comp.clone();
                w.sort();
                let mut got = got;
                got.sort();
                assert_eq!(got, w, "{twist:?} O({l}) component H^{k}");
            }
        }
    }
}

/// Fixed-point pi by Machin's formula, scaled by 10^digits.
fn pi_fixed(digits: u32) -> BigInt {
    let scale = BigInt::from(10).pow(digits + 10);
    let arctan_inv = |x: i64| {
        let x = BigInt::from(x);
        let x2 = &x * &x;
        let mut term = &scale / &x;
        let mut sum = BigInt::zero();
        let mut k = 0i64;
        while !term.is_zero() {
            let t = &term / BigInt::from(2 * k + 1);
            if k % 2 == 0 { sum += t } else { sum -= t }
            term /= &x2;
            k += 1;
        }
        sum
    };
    (arctan_inv(5) * 16 - arctan_inv(239) * 4) / BigInt::from(10).pow(10)
}

/// zeta(s) by Borwein's accelerated alternating series, as an exact rational.
fn zeta_borwein(s: u32, n: usize) -> Rat {
    let nn = n as u64;
    let mut d = Vec::with_capacity(n + 1);
    let mut acc = Rat::zero();
    for i in 0..=nn {
        let num = factorial(nn + i - 1) * BigInt::from(4).pow(i as u32);
        let den = factorial(nn - i) * factorial(2 * i);
        acc += Rat::new(num, den);
        d.push(&acc * rint(n as i64));
    }
    let dn = d[n].clone();
    let mut eta = Rat::zero();
    for k in 0..n {
        let sign = if k % 2 == 0 { rint(1) } else { rint(-1) };
        eta += sign * (&d[k] - &dn) / Rat::from_integer(BigInt::from(k + 1).pow(s));
    }
    eta = -eta / dn;
    eta / (Rat::one() - Rat::new(BigInt::one(), BigInt::from(2).pow(s - 1)))
}

#[test]
fn even_zeta_values_agree_numerically() {
    let digits = 40u32;
    let scale = Rat::from_integer(BigInt::from(10).pow(digits));
    let pi = Rat::new(pi_fixed(digits + 5), BigInt::from(10).pow(digits + 5));
    for k in [2u32, 4, 6, 8] {
        let z = Scalar::zeta(k).unwrap();
        let (mono, c) = z.terms().next().unwrap();
        assert_eq!(z.len(), 1);
        assert_eq!(mono.to_string(), format!("pi^{k}"));
        let symbolic = c * pi.pow(k as i32);
        let numeric = zeta_borwein(k, 70);
        let err = ((symbolic - numeric) * &scale).abs();
        assert!(err < Rat::one(), "zeta({k}) differs at 1e-{digits}");
    }
}
