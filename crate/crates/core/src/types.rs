//! Vector and trajectory types shared by every module.
//!
//! The hot path works on plain `f32` slices; these wrappers are the checked
//! boundary types. Every public constructor rejects NaN and infinities.

use crate::error::{Error, Result};

/// State, control and output dimensions of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelDims {
    pub n_x: usize,
    pub n_u: usize,
    pub n_y: usize,
}

impl ModelDims {
    pub fn new(n_x: usize, n_u: usize, n_y: usize) -> Result<Self> {
        for (name, v) in [("n_x", n_x), ("n_u", n_u), ("n_y", n_y)] {
            if v == 0 {
                return Err(Error::invalid(name, "dimension must be at least 1"));
            }
        }
        Ok(Self { n_x, n_u, n_y })
    }
}

pub(crate) fn check_finite(what: &'static str, values: &[f32]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

macro_rules! real_vector {
    ($(#[$meta:meta])* $name:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(Vec<f32>);

        impl $name {
            pub fn new(values: Vec<f32>) -> Result<Self> {
                check_finite($what, &values)?;
                Ok(Self(values))
            }

            pub fn from_slice(values: &[f32]) -> Result<Self> {
                Self::new(values.to_vec())
            }

            pub fn zeros(dim: usize) -> Self {
                Self(vec![0.0; dim])
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn as_slice(&self) -> &[f32] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f32> {
                self.0
            }

            pub(crate) fn expect_dim(&self, expected: usize) -> Result<()> {
                if self.0.len() != expected {
                    return Err(Error::DimensionMismatch {
                        what: $what,
                        expected,
                        actual: self.0.len(),
                    });
                }
                Ok(())
            }

            #[allow(dead_code)]
            pub(crate) fn from_vec_unchecked(values: Vec<f32>) -> Self {
                Self(values)
            }
        }

        impl std::ops::Index<usize> for $name {
            type Output = f32;
            fn index(&self, i: usize) -> &f32 {
                &self.0[i]
            }
        }

        impl AsRef<[f32]> for $name {
            fn as_ref(&self) -> &[f32] {
                &self.0
            }
        }
    };
}

real_vector!(
    /// A model state `x`.
    StateVector,
    "state"
);
real_vector!(
    /// A control input `u`.
    ControlVector,
    "control"
);
real_vector!(
    /// An observation `y = G(x, u)`.
    OutputVector,
    "output"
);

/// A time-indexed control sequence of `horizon` steps spaced `dt` apart,
/// stored row-major as `horizon × n_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTrajectory {
    dt: f32,
    n_u: usize,
    controls: Vec<f32>,
}

impl ControlTrajectory {
    pub fn new(dt: f32, n_u: usize, controls: Vec<f32>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        if n_u == 0 {
            return Err(Error::invalid("n_u", "dimension must be at least 1"));
        }
        if controls.is_empty() || controls.len() % n_u != 0 {
            return Err(Error::invalid(
                "controls",
                format!(
                    "length {} is not a positive multiple of n_u = {n_u}",
                    controls.len()
                ),
            ));
        }
        check_finite("control trajectory", &controls)?;
        Ok(Self { dt, n_u, controls })
    }

    pub fn zeros(dt: f32, horizon: usize, n_u: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("horizon", "must be at least 1"));
        }
        Self::new(dt, n_u, vec![0.0; horizon * n_u])
    }

    pub fn from_rows(dt: f32, rows: &[Vec<f32>]) -> Result<Self> {
        let n_u = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_u) {
            return Err(Error::invalid("controls", "ragged control rows"));
        }
        Self::new(dt, n_u, rows.concat())
    }

    pub fn horizon(&self) -> usize {
        self.controls.len() / self.n_u
    }

    pub fn dt(&self) -> f32 {
        self.dt
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn at(&self, t: usize) -> &[f32] {
        &self.controls[t * self.n_u..(t + 1) * self.n_u]
    }

    pub fn control(&self, t: usize) -> ControlVector {
        ControlVector::from_vec_unchecked(self.at(t).to_vec())
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.controls
    }

    pub(crate) fn from_parts_unchecked(dt: f32, n_u: usize, controls: Vec<f32>) -> Self {
        Self { dt, n_u, controls }
    }
}

/// Outputs produced by rolling a control trajectory through a model,
/// stored row-major as `len × n_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputTrajectory {
    n_y: usize,
    outputs: Vec<f32>,
}

impl OutputTrajectory {
    pub fn new(n_y: usize, outputs: Vec<f32>) -> Result<Self> {
        if n_y == 0 || outputs.len() % n_y != 0 {
            return Err(Error::invalid(
                "outputs",
                format!("length {} is not a multiple of n_y = {n_y}", outputs.len()),
            ));
        }
        check_finite("output trajectory", &outputs)?;
        Ok(Self { n_y, outputs })
    }

    pub fn len(&self) -> usize {
        self.outputs.len() / self.n_y
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn at(&self, t: usize) -> &[f32] {
        &self.outputs[t * self.n_y..(t + 1) * self.n_y]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.outputs
    }

    pub(crate) fn from_parts_unchecked(n_y: usize, outputs: Vec<f32>) -> Self {
        Self { n_y, outputs }
    }
}
