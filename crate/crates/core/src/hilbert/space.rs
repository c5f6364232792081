use super::{CMatrix, ONE, ZERO};
use crate::{Error, Result};
use num_complex::Complex64;

/// Tensor-product space of truncated oscillators.
///
/// Basis index `k` maps to a multi-index in row-major order: the first
/// subsystem has the largest stride.
#[derive(Debug, Clone, PartialEq)]
pub struct HilbertSpace {
    dims: Vec<usize>,
    labels: Vec<String>,
    strides: Vec<usize>,
    dim: usize,
}

pub fn compose_space(subsystem_dims: &[usize]) -> Result<HilbertSpace> {
    let labels = (0..subsystem_dims.len()).map(|k| format!("s{k}")).collect();
    HilbertSpace::new(subsystem_dims.to_vec(), labels)
}

impl HilbertSpace {
    pub fn new(dims: Vec<usize>, labels: Vec<String>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::invalid("a space needs at least one subsystem"));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::invalid(format!("subsystem dimension {d} is below 2")));
        }
        if labels.len() != dims.len() {
            return Err(Error::DimensionMismatch { expected: dims.len(), actual: labels.len() });
        }
        let mut strides = vec![1; dims.len()];
        for k in (0..dims.len() - 1).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let dim = strides[0] * dims[0];
        Ok(Self { dims, labels, strides, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn subsystem_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_subsystems(&self) -> usize {
        self.dims.len()
    }

    pub fn multi_index(&self, mut index: usize) -> Vec<usize> {
        debug_assert!(index < self.dim);
        self.strides
            .iter()
            .map(|&s| {
                let digit = index / s;
                index %= s;
                digit
            })
            .collect()
    }

    pub fn index(&self, levels: &[usize]) -> Result<usize> {
        if levels.len() != self.dims.len() {
            return Err(Error::DimensionMismatch { expected: self.dims.len(), actual: levels.len() });
        }
        let mut idx = 0;
        for ((&l, &d), &s) in levels.iter().zip(&self.dims).zip(&self.strides) {
            if l >= d {
                return Err(Error::invalid(format!("level {l} out of range for dimension {d}")));
            }
            idx += l * s;
        }
        Ok(idx)
    }

    /// Total excitation number of a basis state.
    pub fn excitations(&self, index: usize) -> usize {
        self.multi_index(index).iter().sum()
    }

    /// Basis state with a single subsystem excited to `level`.
    pub fn excited(&self, subsystem: usize, level: usize) -> Result<usize> {
        let mut levels = vec![0; self.dims.len()];
        *levels
            .get_mut(subsystem)
            .ok_or_else(|| Error::invalid(format!("no subsystem {subsystem}")))? = level;
        self.index(&levels)
    }

    /// Places `local` on `subsystem`, identity elsewhere.
    pub fn embed(&self, subsystem: usize, local: &CMatrix) -> Result<CMatrix> {
        let d = *self
            .dims
            .get(subsystem)
            .ok_or_else(|| Error::invalid(format!("no subsystem {subsystem}")))?;
        if local.nrows() != d || local.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: local.nrows() });
        }
        let mut out = CMatrix::zeros(self.dim, self.dim);
        let stride = self.strides[subsystem];
        for col in 0..self.dim {
            let lc = (col / stride) % d;
            let base = col - lc * stride;
            for lr in 0..d {
                let v = local[(lr, lc)];
                if v != ZERO {
                    out[(base + lr * stride, col)] += v;
                }
            }
        }
        Ok(out)
    }

    /// Truncated annihilation operator on `subsystem`.
    pub fn annihilation(&self, subsystem: usize) -> Result<CMatrix> {
        let d = *self
            .dims
            .get(subsystem)
            .ok_or_else(|| Error::invalid(format!("no subsystem {subsystem}")))?;
        self.embed(subsystem, &local_annihilation(d))
    }

    /// `a_raise^dagger a_lower`, built entry by entry. Equal subsystems give
    /// the number operator.
    pub fn hop(&self, raise: usize, lower: usize) -> Result<CMatrix> {
        if raise >= self.dims.len() || lower >= self.dims.len() {
            return Err(Error::invalid(format!("no subsystem {}", raise.max(lower))));
        }
        if raise == lower {
            return self.number(raise);
        }
        let (sr, sl) = (self.strides[raise], self.strides[lower]);
        let dr = self.dims[raise];
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for col in 0..self.dim {
            let l = (col / sl) % self.dims[lower];
            let r = (col / sr) % dr;
            if l > 0 && r + 1 < dr {
                out[(col - sl + sr, col)] = Complex64::new(((l * (r + 1)) as f64).sqrt(), 0.0);
            }
        }
        Ok(out)
    }

    /// Diagonal operator `f(level)` on `subsystem`.
    pub fn level_function(&self, subsystem: usize, f: impl Fn(usize) -> f64) -> Result<CMatrix> {
        let d = *self
            .dims
            .get(subsystem)
            .ok_or_else(|| Error::invalid(format!("no subsystem {subsystem}")))?;
        let local = CMatrix::from_fn(d, d, |r, c| if r == c { Complex64::new(f(r), 0.0) } else { ZERO });
        self.embed(subsystem, &local)
    }

    /// Number operator on `subsystem`.
    pub fn number(&self, subsystem: usize) -> Result<CMatrix> {
        self.level_function(subsystem, |l| l as f64)
    }

    /// Total excitation number operator (diagonal).
    pub fn total_number(&self) -> CMatrix {
        CMatrix::from_fn(self.dim, self.dim, |r, c| {
            if r == c {
                Complex64::new(self.excitations(r) as f64, 0.0)
            } else {
                ZERO
            }
        })
    }

    pub fn identity(&self) -> CMatrix {
        CMatrix::from_fn(self.dim, self.dim, |r, c| if r == c { ONE } else { ZERO })
    }
}

pub(crate) fn local_annihilation(d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |r, c| if c == r + 1 { Complex64::new((c as f64).sqrt(), 0.0) } else { ZERO })
}
