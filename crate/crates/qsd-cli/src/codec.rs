//! JSON form of series: every coefficient is a tuple (q, z, lambda, Lz, value)
//! with the value in canonical scalar text.

use serde::{Deserialize, Serialize};

use qsd::hypergeo::TheoryParts;
use qsd::series::{Series, SeriesMatrix};
use qsd::{Rat, Scalar};

use crate::error::CliError;

pub type Term = (usize, i32, i32, u32, String);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRepr {
    pub order: usize,
    pub terms: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartsRepr {
    pub i_function: Vec<SeriesRepr>,
    pub f: SeriesRepr,
    pub tau0: SeriesRepr,
    pub tau2: SeriesRepr,
    pub j_mirror: Vec<SeriesRepr>,
    pub inverse_map: SeriesRepr,
    pub j: Vec<SeriesRepr>,
    pub l: Vec<Vec<SeriesRepr>>,
    pub product_h: Vec<Vec<SeriesRepr>>,
}

pub fn encode_series(s: &Series<Rat>) -> SeriesRepr {
    SeriesRepr {
        order: s.trunc(),
        terms: s
            .terms()
            .map(|(d, k, c)| (d, k.0, k.1, k.2, Scalar::from_rat(c.clone()).to_string()))
            .collect(),
    }
}

pub fn decode_series(r: &SeriesRepr) -> Result<Series<Rat>, CliError> {
    let mut s = Series::zero(r.order);
    for (d, z, l, lz, text) in &r.terms {
        if *d > r.order {
            return Err(CliError::Decode(format!("q^{d} beyond order {}", r.order)));
        }
        let c = text
            .parse::<Scalar>()
            .ok()
            .and_then(|v| v.as_rat())
            .ok_or_else(|| CliError::Decode(format!("`{text}` is not a rational scalar")))?;
        s.add_term(*d, (*z, *l, *lz), c);
    }
    Ok(s)
}

fn encode_vec(v: &[Series<Rat>]) -> Vec<SeriesRepr> {
    v.iter().map(encode_series).collect()
}

fn decode_vec(v: &[SeriesRepr]) -> Result<Vec<Series<Rat>>, CliError> {
    v.iter().map(decode_series).collect()
}

fn encode_matrix(m: &SeriesMatrix<Rat>) -> Vec<Vec<SeriesRepr>> {
    m.entries.iter().map(|row| encode_vec(row)).collect()
}

fn decode_matrix(m: &[Vec<SeriesRepr>], order: usize) -> Result<SeriesMatrix<Rat>, CliError> {
    Ok(SeriesMatrix { trunc: order, entries: m.iter().map(|row| decode_vec(row)).collect::<Result<_, _>>()? })
}

pub fn encode_parts(p: &TheoryParts) -> PartsRepr {
    PartsRepr {
        i_function: encode_vec(&p.i_function),
        f: encode_series(&p.f),
        tau0: encode_series(&p.tau0),
        tau2: encode_series(&p.tau2),
        j_mirror: encode_vec(&p.j_mirror),
        inverse_map: encode_series(&p.inverse_map),
        j: encode_vec(&p.j),
        l: encode_matrix(&p.l),
        product_h: encode_matrix(&p.product_h),
    }
}

pub fn decode_parts(r: &PartsRepr) -> Result<TheoryParts, CliError> {
    let order = r.f.order;
    Ok(TheoryParts {
        i_function: decode_vec(&r.i_function)?,
        f: decode_series(&r.f)?,
        tau0: decode_series(&r.tau0)?,
        tau2: decode_series(&r.tau2)?,
        j_mirror: decode_vec(&r.j_mirror)?,
        inverse_map: decode_series(&r.inverse_map)?,
        j: decode_vec(&r.j)?,
        l: decode_matrix(&r.l, order)?,
        product_h: decode_matrix(&r.product_h, order)?,
    })
}
