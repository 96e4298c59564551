//! JSON forms shared by the CLI files and reports.
//!
//! Laurent polynomials are arrays of terms sorted by exponent. A term is
//! either `[exponent, re, im]` with float parts (taken at their exact binary
//! value) or, losslessly, `[exponent, re_num, re_den, im_num, im_den]`.
//! Integers too large for a JSON number are written as decimal strings.
//! Exact rationals are `[num, den]` pairs.

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::laurent::LaurentPoly;
use crate::scalar::{QComplex, Scalar};

fn bigint_value(n: &BigInt) -> Value {
    match n.to_i64() {
        Some(v) => json!(v),
        None => Value::String(n.to_string()),
    }
}

fn parse_bigint(v: &Value) -> Result<BigInt> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .map(BigInt::from)
            .ok_or_else(|| Error::Parse(format!("expected an integer, got {n}"))),
        Value::String(s) => s
            .parse::<BigInt>()
            .map_err(|e| Error::Parse(format!("bad integer {s:?}: {e}"))),
        other => Err(Error::Parse(format!("expected an integer, got {other}"))),
    }
}

fn parse_f64(v: &Value) -> Result<f64> {
    v.as_f64().ok_or_else(|| Error::Parse(format!("expected a number, got {v}")))
}

pub fn rational_to_json(q: &BigRational) -> Value {
    json!([bigint_value(q.numer()), bigint_value(q.denom())])
}

pub fn rational_from_json(v: &Value) -> Result<BigRational> {
    let arr = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| Error::Parse(format!("expected [num, den], got {v}")))?;
    let den = parse_bigint(&arr[1])?;
    if den.is_zero() {
        return Err(Error::Parse("zero denominator".into()));
    }
    Ok(BigRational::new(parse_bigint(&arr[0])?, den))
}

fn dyadic_f64(q: &BigRational) -> Option<f64> {
    let v = q.to_f64()?;
    (v.is_finite() && BigRational::from_float(v).as_ref() == Some(q)).then_some(v)
}

/// Serializes a term list; float triples when every part is an exact float,
/// 5-tuples otherwise.
pub fn laurent_to_json(p: &LaurentPoly<QComplex>) -> Value {
    let exact_floats = p
        .terms()
        .all(|(_, c)| dyadic_f64(&c.re).is_some() && dyadic_f64(&c.im).is_some());
    let terms: Vec<Value> = p
        .terms()
        .map(|(e, c)| {
            if exact_floats {
                json!([e, dyadic_f64(&c.re).unwrap(), dyadic_f64(&c.im).unwrap()])
            } else {
                json!([
                    e,
                    bigint_value(c.re.numer()),
                    bigint_value(c.re.denom()),
                    bigint_value(c.im.numer()),
                    bigint_value(c.im.denom())
                ])
            }
        })
        .collect();
    Value::Array(terms)
}

pub fn laurent_c64_to_json(p: &LaurentPoly<Complex64>) -> Value {
    Value::Array(p.terms().map(|(e, c)| json!([e, c.re, c.im])).collect())
}

pub fn laurent_from_json(v: &Value) -> Result<LaurentPoly<QComplex>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Parse(format!("expected a term list, got {v}")))?;
    let mut terms = Vec::with_capacity(arr.len());
    for term in arr {
        let t = term
            .as_array()
            .ok_or_else(|| Error::Parse(format!("expected a term array, got {term}")))?;
        let exp = t
            .first()
            .and_then(Value::as_i64)
            .ok_or_else(|| Error::Parse(format!("term {term} lacks an integer exponent")))?;
        let c: QComplex = match t.len() {
            3 => QComplex::from_c64(Complex64::new(parse_f64(&t[1])?, parse_f64(&t[2])?))
                .ok_or_else(|| Error::Parse(format!("non-finite coefficient in {term}")))?,
            5 => {
                let part = |n: &Value, d: &Value| -> Result<BigRational> {
                    let d = parse_bigint(d)?;
                    if d.is_zero() {
                        return Err(Error::Parse(format!("zero denominator in {term}")));
                    }
                    Ok(BigRational::new(parse_bigint(n)?, d))
                };
                Complex::new(part(&t[1], &t[2])?, part(&t[3], &t[4])?)
            }
            n => return Err(Error::Parse(format!("term with {n} entries: {term}"))),
        };
        terms.push((exp, c));
    }
    Ok(LaurentPoly::from_terms(terms))
}

/// `[num, den]` for finite values, the string `"inf"` for +∞.
pub fn ext_rational_to_json(q: Option<&BigRational>) -> Value {
    match q {
        Some(q) => rational_to_json(q),
        None => Value::String("inf".into()),
    }
}

pub fn ext_rational_from_json(v: &Value) -> Result<Option<BigRational>> {
    match v {
        Value::String(s) if s == "inf" => Ok(None),
        Value::Number(n) if n.is_i64() => Ok(Some(BigRational::from_integer(BigInt::from(
            n.as_i64().unwrap(),
        )))),
        _ => rational_from_json(v).map(Some),
    }
}

pub fn is_unit_denominator(q: &BigRational) -> bool {
    q.denom().is_one()
}
