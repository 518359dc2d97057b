//! Row-major 2-D grid of 32-bit scalars.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marker stored in pixels that carry no valid value.
pub const INVALID: f32 = f32::NEG_INFINITY;

/// Physical meaning of the values held in a [`ScalarMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    DepthM,
    ParallaxPx,
    InvParallax,
    Sigma,
    Delta,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
    quantity: Quantity,
}

#[inline]
pub fn is_valid(v: f32) -> bool {
    v.is_finite()
}

impl ScalarMap {
    /// Builds a map, rejecting wrong lengths and any value other than a
    /// finite number or the [`INVALID`] marker.
    pub fn new(width: usize, height: usize, data: Vec<f32>, quantity: Quantity) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ShapeMismatch(format!("empty map {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {width}x{height} map",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !(v.is_finite() || *v == INVALID)) {
            return Err(Error::Format(format!(
                "pixel {i} holds {} which is neither finite nor the invalid marker",
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            data,
            quantity,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32, quantity: Quantity) -> Result<Self> {
        Self::new(width, height, vec![value; width * height], quantity)
    }

    pub fn from_fn<F: FnMut(usize, usize) -> f32>(
        width: usize,
        height: usize,
        quantity: Quantity,
        mut f: F,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                data.push(f(i, j));
            }
        }
        Self::new(width, height, data, quantity)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn quantity(&self) -> Quantity {
        self.quantity
    }

    pub fn with_quantity(mut self, quantity: Quantity) -> Self {
        self.quantity = quantity;
        self
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Value at column `i`, row `j`.
    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[j * self.width + i]
    }

    pub fn count_invalid(&self) -> usize {
        self.data.iter().filter(|v| !is_valid(**v)).count()
    }

    pub fn same_shape(&self, other: &ScalarMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_shape(&self, other: &ScalarMap, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    pub(crate) fn check_quantity(&self, expected: Quantity) -> Result<()> {
        if self.quantity == expected {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "expected a {expected:?} map, got {:?}",
                self.quantity
            )))
        }
    }
}
