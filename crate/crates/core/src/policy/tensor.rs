//! Dense row-major matrices and the named parameter store backing the
//! denoising policy. Shapes are static per configuration, so a flat `Vec`
//! per tensor is all the structure training needs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// A dense `rows × cols` matrix of f64, row-major. Vectors are `1 × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Tensor {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
        assert_eq!(data.len(), rows * cols, "shape/data mismatch");
        Tensor { rows, cols, data }
    }

    pub fn row_vec(data: Vec<f64>) -> Tensor {
        Tensor {
            rows: 1,
            cols: data.len(),
            data,
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Xavier-uniform initialization for a `fan_out × fan_in` weight.
    pub fn xavier(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Tensor { rows, cols, data }
    }
}

/// Named, ordered collection of trainable tensors. Order is fixed at
/// construction, which fixes checkpoint layout and gradient-reduction order.
#[derive(Debug, Clone)]
pub struct ParamStore {
    tensors: Vec<(String, Tensor)>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> ParamStore {
        ParamStore {
            tensors: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, t: Tensor) -> usize {
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter {name}"
        );
        let id = self.tensors.len();
        self.index.insert(name.to_string(), id);
        self.tensors.push((name.to_string(), t));
        id
    }

    pub fn id(&self, name: &str) -> usize {
        *self
            .index
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn get(&self, id: usize) -> &Tensor {
        &self.tensors[id].1
    }

    pub fn get_mut(&mut self, id: usize) -> &mut Tensor {
        &mut self.tensors[id].1
    }

    pub fn by_name(&self, name: &str) -> &Tensor {
        self.get(self.id(name))
    }

    pub fn by_name_mut(&mut self, name: &str) -> &mut Tensor {
        let id = self.id(name);
        self.get_mut(id)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|(_, t)| t.is_finite())
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        ParamStore::new()
    }
}

/// Per-tensor gradient accumulator aligned with a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct GradStore {
    pub grads: Vec<Tensor>,
}

impl GradStore {
    pub fn zeros_like(params: &ParamStore) -> GradStore {
        GradStore {
            grads: params
                .iter()
                .map(|(_, t)| Tensor::zeros(t.rows, t.cols))
                .collect(),
        }
    }

    pub fn accumulate(&mut self, other: &GradStore) {
        for (dst, src) in self.grads.iter_mut().zip(&other.grads) {
            for (d, s) in dst.data.iter_mut().zip(&src.data) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.grads {
            for v in &mut g.data {
                *v *= factor;
            }
        }
    }
}
