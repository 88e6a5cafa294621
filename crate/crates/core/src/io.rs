//! JSON file formats for tensors and decompositions.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{Monomial, Point, Polynomial, Scalar, Shape};
use crate::decompose::{Decomposition, RankBounds};

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

impl FileError {
    fn from_json(e: serde_json::Error) -> Self {
        FileError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    #[default]
    Real,
    Complex,
}

/// A real number or a `[re, im]` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Real(f64),
    Complex([f64; 2]),
}

impl Number {
    pub fn to_scalar(self) -> Scalar {
        match self {
            Number::Real(x) => Scalar::new(x, 0.0),
            Number::Complex([re, im]) => Scalar::new(re, im),
        }
    }

    /// Plain number when the field is real and the imaginary part is
    /// negligible (or exactly zero in the complex field).
    pub fn from_scalar(z: Scalar, field: Field) -> Self {
        let negligible = z.im == 0.0 || (field == Field::Real && z.im.abs() <= 1e-9 * z.norm().max(1.0));
        if negligible {
            Number::Real(z.re)
        } else {
            Number::Complex([z.re, z.im])
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorTerm {
    pub exp: Vec<Vec<u32>>,
    pub coef: Number,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorFile {
    pub dims: Vec<usize>,
    pub degrees: Vec<u32>,
    #[serde(default)]
    pub field: Field,
    pub terms: Vec<TensorTerm>,
}

impl TensorFile {
    pub fn parse(text: &str) -> Result<Self, FileError> {
        let file: TensorFile = serde_json::from_str(text).map_err(FileError::from_json)?;
        file.validate(text)?;
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self, FileError> {
        Self::parse(&read_text(path)?)
    }

    fn validate(&self, text: &str) -> Result<(), FileError> {
        let shape = Shape::new(self.dims.clone(), self.degrees.clone()).map_err(|e| FileError::Invalid {
            line: key_line(text, "dims"),
            message: e.to_string(),
        })?;
        let mut seen = std::collections::HashSet::new();
        for (j, t) in self.terms.iter().enumerate() {
            let fail = |message: String| FileError::Invalid {
                line: element_line(text, "terms", j),
                message,
            };
            if t.exp.len() != shape.k() || t.exp.iter().zip(shape.dims()).any(|(e, &n)| e.len() != n) {
                return Err(fail(format!(
                    "term {j}: exponent lists do not match dims {:?}",
                    shape.dims()
                )));
            }
            let m = Monomial::from_exps(t.exp.clone());
            if !shape.contains(&m) {
                return Err(fail(format!("term {j}: {m} exceeds degrees {:?}", shape.degrees())));
            }
            if !seen.insert(m.clone()) {
                return Err(fail(format!("term {j}: duplicate exponent {m}")));
            }
            if self.field == Field::Real && matches!(t.coef, Number::Complex(_)) {
                return Err(fail(format!("term {j}: complex coefficient in a real tensor")));
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.dims.clone(), self.degrees.clone()).expect("validated on parse")
    }

    pub fn to_polynomial(&self) -> Polynomial {
        let mut p = Polynomial::zero(self.shape());
        for t in &self.terms {
            p.add_term(Monomial::from_exps(t.exp.clone()), t.coef.to_scalar());
        }
        p
    }

    /// All non-zero coefficients, in canonical monomial order.
    pub fn from_polynomial(p: &Polynomial, field: Field) -> Self {
        TensorFile {
            dims: p.shape().dims().to_vec(),
            degrees: p.shape().degrees().to_vec(),
            field,
            terms: p
                .terms()
                .iter()
                .map(|(m, c)| TensorTerm {
                    exp: m.exps().to_vec(),
                    coef: Number::from_scalar(*c, field),
                })
                .collect(),
        }
    }

    /// One term per line.
    pub fn to_json(&self) -> String {
        let mut s = String::from("{\n");
        s += &format!(" \"dims\": {},\n", to_json(&self.dims));
        s += &format!(" \"degrees\": {},\n", to_json(&self.degrees));
        s += &format!(" \"field\": {},\n", to_json(&self.field));
        s += " \"terms\": [";
        for (j, t) in self.terms.iter().enumerate() {
            s += if j == 0 { "\n  " } else { ",\n  " };
            s += &to_json(t);
        }
        s += if self.terms.is_empty() { "]\n}\n" } else { "\n ]\n}\n" };
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTerm {
    pub weight: Number,
    pub points: Vec<Vec<Number>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_rank: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_resid: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<RankBounds>,
    #[serde(default)]
    pub coordinate_change_applied: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced_dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionFile {
    pub rank: usize,
    pub terms: Vec<DecompositionTerm>,
    pub residual: f64,
    #[serde(default)]
    pub meta: Meta,
}

impl DecompositionFile {
    pub fn parse(text: &str) -> Result<Self, FileError> {
        let file: DecompositionFile = serde_json::from_str(text).map_err(FileError::from_json)?;
        if file.rank != file.terms.len() {
            return Err(FileError::Invalid {
                line: key_line(text, "rank"),
                message: format!("rank {} but {} terms", file.rank, file.terms.len()),
            });
        }
        if !(file.residual >= 0.0) {
            return Err(FileError::Invalid {
                line: key_line(text, "residual"),
                message: "residual must be non-negative".into(),
            });
        }
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self, FileError> {
        Self::parse(&read_text(path)?)
    }

    pub fn from_decomposition(d: &Decomposition, field: Field, meta: Meta) -> Self {
        DecompositionFile {
            rank: d.terms.len(),
            terms: d
                .terms
                .iter()
                .map(|(w, p)| DecompositionTerm {
                    weight: Number::from_scalar(*w, field),
                    points: p
                        .coords
                        .iter()
                        .map(|g| g.iter().map(|&z| Number::from_scalar(z, field)).collect())
                        .collect(),
                })
                .collect(),
            residual: d.residual,
            meta: Meta {
                coordinate_change_applied: d.coordinate_change.is_some() || meta.coordinate_change_applied,
                ..meta
            },
        }
    }

    /// Terms as `(weight, point)` pairs checked against `shape`.
    pub fn to_terms(&self, shape: &Shape) -> crate::Result<Vec<(Scalar, Point)>> {
        self.terms
            .iter()
            .map(|t| {
                let coords = t
                    .points
                    .iter()
                    .map(|g| g.iter().map(|x| x.to_scalar()).collect())
                    .collect();
                Ok((t.weight.to_scalar(), Point::new(shape, coords)?))
            })
            .collect()
    }

    /// One term per line.
    pub fn to_json(&self) -> String {
        let mut s = String::from("{\n");
        s += &format!(" \"rank\": {},\n", self.rank);
        s += " \"terms\": [";
        for (j, t) in self.terms.iter().enumerate() {
            s += if j == 0 { "\n  " } else { ",\n  " };
            s += &to_json(t);
        }
        s += if self.terms.is_empty() { "],\n" } else { "\n ],\n" };
        s += &format!(" \"residual\": {},\n", to_json(&self.residual));
        s += &format!(" \"meta\": {}\n}}\n", to_json(&self.meta));
        s
    }
}

fn to_json<T: Serialize>(x: &T) -> String {
    serde_json::to_string(x).expect("plain data serializes")
}

fn read_text(path: &Path) -> Result<String, FileError> {
    std::fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Byte offsets of the top-level structure of a JSON text, skipping string
/// contents. Yields `(offset, byte, depth before the byte)`.
fn structural(text: &str) -> impl Iterator<Item = (usize, u8, usize)> + '_ {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    bytes.iter().enumerate().filter_map(move |(i, &c)| {
        if in_str {
            if escaped {
                escaped = false;
            } else if c == b'\\' {
                escaped = true;
            } else if c == b'"' {
                in_str = false;
            }
            return None;
        }
        let d = depth;
        match c {
            b'"' => in_str = true,
            b'{' | b'[' => depth += 1,
            b'}' | b']' => depth = depth.saturating_sub(1),
            _ => {}
        }
        Some((i, c, d))
    })
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Line of the top-level key `key`, or 1 when absent.
fn key_line(text: &str, key: &str) -> usize {
    key_offset(text, key).map_or(1, |o| line_of(text, o))
}

fn key_offset(text: &str, key: &str) -> Option<usize> {
    let pattern = format!("\"{key}\"");
    structural(text)
        .filter(|&(_, c, d)| c == b'"' && d == 1)
        .map(|(i, _, _)| i)
        .find(|&i| text[i..].starts_with(&pattern))
}

/// Line where element `index` of the top-level array `key` starts.
fn element_line(text: &str, key: &str, index: usize) -> usize {
    let Some(start) = key_offset(text, key) else {
        return 1;
    };
    let mut seen = 0usize;
    let mut array_open = false;
    for (i, c, d) in structural(text).skip_while(|&(i, _, _)| i < start) {
        if !array_open {
            if c == b'[' && d == 1 {
                array_open = true;
            }
            continue;
        }
        if d == 1 {
            break;
        }
        if d == 2 && !c.is_ascii_whitespace() && c != b',' {
            if seen == index {
                return line_of(text, i);
            }
            seen += 1;
        }
    }
    line_of(text, start)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
 "dims": [2],
 "degrees": [2],
 "field": "real",
 "terms": [
  {"exp": [[0, 0]], "coef": 1},
  {"exp": [[1, 0]], "coef": -2.5},
  {"exp": [[2, 1]], "coef": 3}
 ]
}
"#;

    #[test]
    fn validation_errors_point_at_the_term() {
        match TensorFile::parse(SMALL) {
            Err(FileError::Invalid { line, message }) => {
                assert_eq!(line, 8);
                assert!(message.contains("term 2"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let bad = "{\n \"dims\": [2],\n \"degrees\": [2,\n}";
        assert!(matches!(TensorFile::parse(bad), Err(FileError::Syntax { line: 4, .. })));
    }

    #[test]
    fn tensor_round_trip() {
        let ok = SMALL.replace("[[2, 1]]", "[[1, 1]]");
        let f = TensorFile::parse(&ok).unwrap();
        let text = f.to_json();
        assert_eq!(TensorFile::parse(&text).unwrap(), f);
        let p = f.to_polynomial();
        assert_eq!(TensorFile::from_polynomial(&p, Field::Real).to_polynomial(), p);
    }

    #[test]
    fn duplicate_and_complex_terms_rejected() {
        let dup = SMALL.replace("[[2, 1]]", "[[1, 0]]");
        assert!(matches!(TensorFile::parse(&dup), Err(FileError::Invalid { line: 8, .. })));
        let cplx = SMALL.replace("[[2, 1]], \"coef\": 3", "[[1, 1]], \"coef\": [3, 1]");
        assert!(TensorFile::parse(&cplx).is_err());
        let cplx = cplx.replace("\"real\"", "\"complex\"");
        assert!(TensorFile::parse(&cplx).is_ok());
    }

    #[test]
    fn numbers_serialize_exactly() {
        let x = 0.1 + 0.2;
        let f = DecompositionFile {
            rank: 1,
            terms: vec![DecompositionTerm {
                weight: Number::Real(x),
                points: vec![vec![Number::Complex([1.0 / 3.0, -2e-300])]],
            }],
            residual: 1.5e-17,
            meta: Meta {
                seed: Some(3),
                ..Meta::default()
            },
        };
        assert_eq!(DecompositionFile::parse(&f.to_json()).unwrap(), f);
    }
}
