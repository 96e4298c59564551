//! Meromorphic Hénon families `H_t(x, y) = (p_t(x) − a(t)·y, x)` with
//! `p_t(x) = x^d + a_1(t)x^{d−1} + … + a_d(t)`.

use num_complex::Complex64;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::json::{laurent_from_json, laurent_to_json};
use crate::laurent::{HybridNormParams, LaurentPoly, Order};
use crate::scalar::QComplex;

pub type ExactLaurent = LaurentPoly<QComplex>;

/// Filtration constant sufficient for the certified estimates.
pub const DEFAULT_C: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct HenonFamily {
    d: usize,
    coeffs: Vec<ExactLaurent>,
    a: ExactLaurent,
    c: f64,
}

impl HenonFamily {
    /// `coeffs` holds `a_1 … a_d`.
    pub fn new(coeffs: Vec<ExactLaurent>, a: ExactLaurent, c: f64) -> Result<Self> {
        let d = coeffs.len();
        if d < 2 {
            return Err(Error::InvalidFamily(format!("degree {d} < 2")));
        }
        if a.is_zero() {
            return Err(Error::InvalidFamily("a(t) vanishes identically".into()));
        }
        if !(c > 1.0) || !c.is_finite() {
            return Err(Error::InvalidFamily(format!("filtration constant c = {c} must exceed 1")));
        }
        Ok(Self { d, coeffs, a, c })
    }

    /// `x^d + Σ a_i x^{d−i} − a·y` with all-constant coefficients given as floats.
    pub fn constant(coeffs: &[Complex64], a: Complex64) -> Result<Self> {
        let lift = |z: Complex64| {
            use crate::scalar::Scalar;
            QComplex::from_c64(z)
                .map(LaurentPoly::constant)
                .ok_or_else(|| Error::InvalidFamily("non-finite coefficient".into()))
        };
        let cs = coeffs.iter().map(|&z| lift(z)).collect::<Result<Vec<_>>>()?;
        Self::new(cs, lift(a)?, DEFAULT_C)
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    /// `a_1 … a_d`.
    pub fn coeffs(&self) -> &[ExactLaurent] {
        &self.coeffs
    }

    pub fn a(&self) -> &ExactLaurent {
        &self.a
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn with_c(mut self, c: f64) -> Result<Self> {
        if !(c > 1.0) || !c.is_finite() {
            return Err(Error::InvalidFamily(format!("filtration constant c = {c} must exceed 1")));
        }
        self.c = c;
        Ok(self)
    }

    /// t-adic orders of `a_1 … a_d` and of `a`.
    pub fn orders(&self) -> (Vec<Order>, Order) {
        (self.coeffs.iter().map(LaurentPoly::ord).collect(), self.a.ord())
    }

    /// True when no coefficient has a pole and `a` is a unit of `ℂ[[t]]`.
    pub fn is_non_degenerating(&self) -> bool {
        self.coeffs.iter().all(LaurentPoly::is_integral) && self.a.ord() == Order::Finite(0)
    }

    pub fn to_json(&self, r: Option<HybridNormParams>) -> Value {
        let mut m = Map::new();
        m.insert("d".into(), json!(self.d));
        m.insert(
            "coeffs".into(),
            Value::Array(self.coeffs.iter().map(laurent_to_json).collect()),
        );
        m.insert("a".into(), laurent_to_json(&self.a));
        m.insert("c".into(), json!(self.c));
        if let Some(r) = r {
            m.insert("r".into(), json!(r.r()));
        }
        Value::Object(m)
    }
}

/// Family file contents: the family plus the hybrid base `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilySpec {
    pub family: HenonFamily,
    pub r: HybridNormParams,
}

impl FamilySpec {
    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Parse("family spec must be a JSON object".into()))?;
        let d = obj
            .get("d")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Parse("missing integer field \"d\"".into()))? as usize;
        let coeffs = obj
            .get("coeffs")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("missing array field \"coeffs\"".into()))?;
        if coeffs.len() != d {
            return Err(Error::Parse(format!(
                "\"coeffs\" has {} entries, expected d = {d}",
                coeffs.len()
            )));
        }
        let coeffs = coeffs.iter().map(laurent_from_json).collect::<Result<Vec<_>>>()?;
        let a = laurent_from_json(
            obj.get("a").ok_or_else(|| Error::Parse("missing field \"a\"".into()))?,
        )?;
        if a.is_zero() {
            return Err(Error::Parse("\"a\" must have nonempty support".into()));
        }
        let c = match obj.get("c") {
            None | Some(Value::Null) => DEFAULT_C,
            Some(v) => v.as_f64().ok_or_else(|| Error::Parse("\"c\" must be a number".into()))?,
        };
        let r = match obj.get("r") {
            None | Some(Value::Null) => 0.5,
            Some(v) => v.as_f64().ok_or_else(|| Error::Parse("\"r\" must be a number".into()))?,
        };
        let family = HenonFamily::new(coeffs, a, c).map_err(|e| Error::Parse(e.to_string()))?;
        let r = HybridNormParams::new(r).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(Self { family, r })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json(&v)
    }

    pub fn to_json(&self) -> Value {
        self.family.to_json(Some(self.r))
    }
}
