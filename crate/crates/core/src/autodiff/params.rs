use ndarray::{ArrayView1, ArrayView2, ArrayViewMut2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of one dense layer: an `inputs x outputs` weight matrix followed by
/// an `outputs`-long bias.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
}

impl LayerShape {
    pub fn weight_len(&self) -> usize {
        self.inputs * self.outputs
    }

    pub fn len(&self) -> usize {
        self.weight_len() + self.outputs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flat parameter storage for a stack of dense layers.
///
/// Layer `l` occupies a contiguous slice: its weights in row-major order,
/// then its bias.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: Vec<LayerShape>,
}

impl ParamVector {
    pub fn zeros(layout: Vec<LayerShape>) -> Self {
        let n = layout.iter().map(LayerShape::len).sum();
        Self {
            values: vec![0.0; n],
            layout,
        }
    }

    pub fn from_parts(layout: Vec<LayerShape>, values: Vec<f64>) -> Result<Self> {
        let n: usize = layout.iter().map(LayerShape::len).sum();
        if n != values.len() {
            return Err(Error::Layout(format!(
                "layout describes {n} values but {} were given",
                values.len()
            )));
        }
        Ok(Self { values, layout })
    }

    pub fn layout(&self) -> &[LayerShape] {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn offset(&self, layer: usize) -> usize {
        self.layout[..layer].iter().map(LayerShape::len).sum()
    }

    pub fn weight(&self, layer: usize) -> ArrayView2<'_, f64> {
        let shape = self.layout[layer];
        let off = self.offset(layer);
        ArrayView2::from_shape(
            (shape.inputs, shape.outputs),
            &self.values[off..off + shape.weight_len()],
        )
        .expect("layout consistent with storage")
    }

    pub fn weight_mut(&mut self, layer: usize) -> ArrayViewMut2<'_, f64> {
        let shape = self.layout[layer];
        let off = self.offset(layer);
        ArrayViewMut2::from_shape(
            (shape.inputs, shape.outputs),
            &mut self.values[off..off + shape.weight_len()],
        )
        .expect("layout consistent with storage")
    }

    pub fn bias(&self, layer: usize) -> ArrayView1<'_, f64> {
        let shape = self.layout[layer];
        let off = self.offset(layer) + shape.weight_len();
        ArrayView1::from(&self.values[off..off + shape.outputs])
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        let shape = self.layout[layer];
        let off = self.offset(layer) + shape.weight_len();
        &mut self.values[off..off + shape.outputs]
    }

    pub fn check_layout(&self, other: &ParamVector) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::Layout(format!(
                "{:?} vs {:?}",
                self.layout, other.layout
            )));
        }
        Ok(())
    }

    /// `self <- (1 - tau) * self + tau * online`, elementwise.
    pub fn polyak(&mut self, online: &ParamVector, tau: f64) -> Result<()> {
        self.check_layout(online)?;
        for (t, &o) in self.values.iter_mut().zip(&online.values) {
            *t = (1.0 - tau) * *t + tau * o;
        }
        Ok(())
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
