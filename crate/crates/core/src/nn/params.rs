use std::collections::HashMap;

use crate::linalg::Matrix;

use super::{NnError, Result};

/// Handle to an entry of a [`ParameterSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
    /// `false` freezes the whole tensor (running statistics, frozen embeddings).
    pub trainable: bool,
    /// Rows excluded from optimizer updates even when `trainable` is set.
    pub frozen_rows: Vec<bool>,
}

impl Param {
    pub fn row_frozen(&self, r: usize) -> bool {
        self.frozen_rows.get(r).copied().unwrap_or(false)
    }
}

/// Named trainable tensors with their gradients, in insertion order.
#[derive(Debug, Clone, Default)]
pub struct ParameterSet {
    entries: Vec<Param>,
    by_name: HashMap<String, usize>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> Result<ParamId> {
        self.insert(name.into(), value, true)
    }

    /// Registers a tensor the optimizer never touches.
    pub fn add_frozen(&mut self, name: impl Into<String>, value: Matrix) -> Result<ParamId> {
        self.insert(name.into(), value, false)
    }

    fn insert(&mut self, name: String, value: Matrix, trainable: bool) -> Result<ParamId> {
        if self.by_name.contains_key(&name) {
            return Err(NnError::DuplicateParameter(name));
        }
        let id = self.entries.len();
        self.by_name.insert(name.clone(), id);
        self.entries.push(Param {
            name,
            grad: Matrix::zeros(value.rows(), value.cols()),
            value,
            trainable,
            frozen_rows: Vec::new(),
        });
        Ok(ParamId(id))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).map(|&i| ParamId(i))
    }

    pub fn require(&self, name: &str) -> Result<ParamId> {
        self.id(name).ok_or_else(|| NnError::UnknownParameter(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.entries[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.entries[id.0]
    }

    #[inline]
    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.entries[id.0].value
    }

    #[inline]
    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.entries[id.0].value
    }

    #[inline]
    pub fn grad(&self, id: ParamId) -> &Matrix {
        &self.entries[id.0].grad
    }

    #[inline]
    pub fn grad_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.entries[id.0].grad
    }

    /// Disjoint borrow of one entry's value and gradient.
    #[inline]
    pub fn value_and_grad(&mut self, id: ParamId) -> (&Matrix, &mut Matrix) {
        let p = &mut self.entries[id.0];
        (&p.value, &mut p.grad)
    }

    /// Replaces a value, keeping the shape invariant.
    pub fn set_value(&mut self, id: ParamId, value: Matrix) -> Result<()> {
        let p = &mut self.entries[id.0];
        if p.value.shape() != value.shape() {
            return Err(NnError::DimensionMismatch {
                what: "parameter value",
                expected: p.value.len(),
                got: value.len(),
            });
        }
        p.value = value;
        Ok(())
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.entries[id.0].trainable = trainable;
    }

    pub fn freeze_rows(&mut self, id: ParamId, rows: &[usize]) {
        let p = &mut self.entries[id.0];
        if p.frozen_rows.len() != p.value.rows() {
            p.frozen_rows = vec![false; p.value.rows()];
        }
        for &r in rows {
            if r < p.frozen_rows.len() {
                p.frozen_rows[r] = true;
            }
        }
    }

    pub fn zero_gradients(&mut self) {
        for p in &mut self.entries {
            p.grad.fill(0.0);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.entries.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.entries.iter_mut()
    }

    pub fn scale_gradients(&mut self, factor: f64) {
        for p in &mut self.entries {
            p.grad.as_mut_slice().iter_mut().for_each(|g| *g *= factor);
        }
    }
}
