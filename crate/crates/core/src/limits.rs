use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DIM_CAP: usize = 4096;
pub const DEFAULT_TYPE_CLASS_CAP: usize = 200_000;
pub const DEFAULT_EIG_TOL: f64 = 1e-9;

/// Size caps and the eigenvalue sign cut shared by every numerical routine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    /// Largest operator dimension (`d^n`) that may be materialized.
    pub dim_cap: usize,
    /// Largest type class or sequence set that may be enumerated.
    pub type_class_cap: usize,
    /// Eigenvalues `>= -eig_tol` count as non-negative; `<= eig_tol` count as zero.
    pub eig_tol: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            dim_cap: DEFAULT_DIM_CAP,
            type_class_cap: DEFAULT_TYPE_CLASS_CAP,
            eig_tol: DEFAULT_EIG_TOL,
        }
    }
}

impl Limits {
    /// Dimension of `(C^d)^{⊗n}`, or a capacity error if it exceeds `dim_cap`.
    pub fn tensor_dim(&self, d: usize, n: usize) -> Result<usize> {
        let mut dim: u128 = 1;
        for _ in 0..n {
            dim = dim.saturating_mul(d as u128);
            if dim > self.dim_cap as u128 {
                // report the full size, not the partial product
                let full = (d as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
                return Err(Error::Capacity {
                    what: "tensor dimension",
                    requested: full,
                    cap: self.dim_cap as u128,
                });
            }
        }
        Ok(dim as usize)
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if dim > self.dim_cap {
            return Err(Error::Capacity {
                what: "tensor dimension",
                requested: dim as u128,
                cap: self.dim_cap as u128,
            });
        }
        Ok(())
    }

    pub(crate) fn check_enumeration(&self, what: &'static str, size: u128) -> Result<()> {
        if size > self.type_class_cap as u128 {
            return Err(Error::Capacity {
                what,
                requested: size,
                cap: self.type_class_cap as u128,
            });
        }
        Ok(())
    }
}
