use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::NetError;

/// Row-major matrix; rows index the batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, NetError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(NetError::Shape(format!(
                    "row {i} has length {}, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// A single-column matrix.
    pub fn column(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

/// Well-known data dictionary keys.
pub mod keys {
    pub const STATES: &str = "states";
    pub const ACTIONS: &str = "actions";
    pub const TARGETS: &str = "targets";
    pub const RETURNS: &str = "returns";
    pub const NEXT_STATES: &str = "next_states";
    pub const TERMINALS: &str = "terminals";
    pub const GLOBAL_STEP: &str = "global_step";
    pub const OBJECTIVE_WEIGHTS: &str = "objective_weights";
}

/// Training inputs: batch arrays sharing one leading dimension, plus
/// free-form miscellaneous vectors (global step, objective weights, ...).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DataDict {
    batch: BTreeMap<String, Matrix>,
    misc: BTreeMap<String, Vec<f64>>,
}

impl DataDict {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a batch array. All batch arrays must agree on row count.
    pub fn insert(&mut self, key: impl Into<String>, value: Matrix) -> Result<(), NetError> {
        let key = key.into();
        if let Some(rows) = self.batch_size() {
            let other = self.batch.keys().find(|k| **k != key);
            if value.rows != rows && other.is_some() {
                return Err(NetError::Shape(format!(
                    "`{key}` has {} rows, other entries have {rows}",
                    value.rows
                )));
            }
        }
        self.batch.insert(key, value);
        Ok(())
    }

    pub fn with(mut self, key: impl Into<String>, value: Matrix) -> Result<Self, NetError> {
        self.insert(key, value)?;
        Ok(self)
    }

    pub fn set_misc(&mut self, key: impl Into<String>, value: Vec<f64>) {
        self.misc.insert(key.into(), value);
    }

    pub fn get(&self, key: &str) -> Option<&Matrix> {
        self.batch.get(key)
    }

    pub fn misc(&self, key: &str) -> Option<&[f64]> {
        self.misc.get(key).map(Vec::as_slice)
    }

    pub fn require(&self, key: &str) -> Result<&Matrix, NetError> {
        self.get(key)
            .ok_or_else(|| NetError::MissingKey(key.to_string()))
    }

    /// Looks up `{scope}.{key}` first, then the bare key.
    pub fn require_scoped(&self, scope: &str, key: &str) -> Result<&Matrix, NetError> {
        self.get(&format!("{scope}.{key}"))
            .or_else(|| self.get(key))
            .ok_or_else(|| NetError::MissingKey(key.to_string()))
    }

    pub fn batch_size(&self) -> Option<usize> {
        self.batch.values().next().map(|m| m.rows)
    }

    /// Reads an action column as indices.
    pub fn actions(&self, key: &str, limit: usize) -> Result<Vec<usize>, NetError> {
        let m = self.require(key)?;
        if m.cols != 1 {
            return Err(NetError::Shape(format!("`{key}` must have one column")));
        }
        m.data
            .iter()
            .map(|&a| {
                if a >= 0.0 && a.fract() == 0.0 && (a as usize) < limit {
                    Ok(a as usize)
                } else {
                    Err(NetError::Shape(format!("action {a} outside [0, {limit})")))
                }
            })
            .collect()
    }
}
