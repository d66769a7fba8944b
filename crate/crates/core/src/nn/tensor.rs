use serde::{Deserialize, Serialize};

use crate::error::{Result, TrajkitError};
use crate::matrix::Matrix;

/// Per-sample tensor shape; the engine processes one sample at a time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    Vector(usize),
    Sequence { steps: usize, features: usize },
}

impl Shape {
    pub fn seq(steps: usize, features: usize) -> Self {
        Shape::Sequence { steps, features }
    }

    pub fn len(self) -> usize {
        match self {
            Shape::Vector(n) => n,
            Shape::Sequence { steps, features } => steps * features,
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shape::Vector(n) => write!(f, "[{n}]"),
            Shape::Sequence { steps, features } => write!(f, "[{steps}x{features}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Shape,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if shape.len() != data.len() {
            return Err(TrajkitError::Shape(format!(
                "{} values do not fit shape {shape}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Tensor {
            shape,
            data: vec![0.0; shape.len()],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: Shape::Vector(data.len()),
            data,
        }
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        Tensor {
            shape: Shape::seq(m.rows(), m.cols()),
            data: m.as_slice().to_vec(),
        }
    }

    pub fn to_matrix(&self) -> Matrix {
        let (r, c) = match self.shape {
            Shape::Vector(n) => (1, n),
            Shape::Sequence { steps, features } => (steps, features),
        };
        Matrix::from_vec(r, c, self.data.clone()).expect("tensor length matches its shape")
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.data)
    }
}

/// Index of the largest value; the first one wins on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
