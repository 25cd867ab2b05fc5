//! JSON encodings shared by every exported structure.
//!
//! Matrices are written as `{"rows": r, "cols": c, "data": [...]}` with `data`
//! in row-major order. On input a nested array of rows is accepted as well.
//! Vectors are plain arrays.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &Matrix) -> Self {
        let data = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect();
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Dimension(format!(
                "matrix declares {}x{} but carries {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

/// Either the explicit object form or a nested array of rows.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MatrixInput {
    Object(MatrixJson),
    Rows(Vec<Vec<f64>>),
}

impl MatrixInput {
    pub fn to_matrix(&self) -> Result<Matrix> {
        match self {
            MatrixInput::Object(m) => m.to_matrix(),
            MatrixInput::Rows(rows) => {
                let r = rows.len();
                let c = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|row| row.len() != c) {
                    return Err(Error::Dimension("ragged matrix rows".into()));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                Ok(DMatrix::from_row_slice(r, c, &flat))
            }
        }
    }
}

pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from_matrix(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Matrix, D::Error> {
        MatrixInput::deserialize(d)?.to_matrix().map_err(D::Error::custom)
    }
}

pub mod opt_matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Option<Matrix>, s: S) -> std::result::Result<S::Ok, S::Error> {
        m.as_ref().map(MatrixJson::from_matrix).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Matrix>, D::Error> {
        Option::<MatrixInput>::deserialize(d)?
            .map(|m| m.to_matrix())
            .transpose()
            .map_err(D::Error::custom)
    }
}

pub mod vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> std::result::Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vector, D::Error> {
        Ok(Vector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

pub mod opt_vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<Vector>, s: S) -> std::result::Result<S::Ok, S::Error> {
        v.as_ref().map(|v| v.as_slice().to_vec()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Vector>, D::Error> {
        Ok(Option::<Vec<f64>>::deserialize(d)?.map(Vector::from_vec))
    }
}

/// Complex numbers as `[re, im]` pairs.
pub mod spectrum {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Complex64>, D::Error> {
        Ok(Vec::<[f64; 2]>::deserialize(d)?.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct Holder {
        #[serde(with = "matrix")]
        m: Matrix,
        #[serde(with = "vector")]
        v: Vector,
    }

    #[test]
    fn row_major_round_trip() {
        let h = Holder { m: Matrix::from_row_slice(2, 3, &[1., 2., 3., 4., 5., 6.]), v: Vector::from_vec(vec![7., 8.]) };
        let text = serde_json::to_string(&h).unwrap();
        assert_eq!(text, r#"{"m":{"rows":2,"cols":3,"data":[1.0,2.0,3.0,4.0,5.0,6.0]},"v":[7.0,8.0]}"#);
        let back: Holder = serde_json::from_str(&text).unwrap();
        assert_eq!(back.m, h.m);
    }

    #[test]
    fn nested_rows_accepted() {
        let back: Holder = serde_json::from_str(r#"{"m":[[1,2],[3,4]],"v":[]}"#).unwrap();
        assert_eq!(back.m, Matrix::from_row_slice(2, 2, &[1., 2., 3., 4.]));
        assert!(serde_json::from_str::<Holder>(r#"{"m":[[1,2],[3]],"v":[]}"#).is_err());
        assert!(serde_json::from_str::<Holder>(r#"{"m":{"rows":2,"cols":2,"data":[1]},"v":[]}"#).is_err());
    }
}
