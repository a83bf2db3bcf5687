use std::ops::Range;
use std::sync::Arc;

use crate::autodiff::Array;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A named parameter tensor inside a flat vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Ordered, contiguous, non-overlapping segments covering `0..total`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    segments: Vec<Segment>,
    total: usize,
}

impl Layout {
    pub fn new(parts: Vec<(String, Vec<usize>)>) -> Result<Self> {
        let mut offset = 0;
        let mut segments = Vec::with_capacity(parts.len());
        for (name, shape) in parts {
            if shape.contains(&0) {
                return Err(Error::arg(format!("segment `{name}` has an empty dimension")));
            }
            let seg = Segment { name, offset, shape };
            offset += seg.len();
            segments.push(seg);
        }
        Ok(Layout {
            segments,
            total: offset,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }
}

/// Flat parameter-shaped vector: weights, gradients, corruptions and updates
/// all share this type so they can be combined coordinate-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector<S> {
    layout: Arc<Layout>,
    data: Vec<S>,
}

impl<S: Scalar> ParamVector<S> {
    pub fn zeros(layout: Arc<Layout>) -> Self {
        let data = vec![S::zero(); layout.total()];
        ParamVector { layout, data }
    }

    pub fn from_vec(layout: Arc<Layout>, data: Vec<S>) -> Result<Self> {
        if data.len() != layout.total() {
            return Err(Error::arg(format!(
                "layout has {} parameters, got {}",
                layout.total(),
                data.len()
            )));
        }
        Ok(ParamVector { layout, data })
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    pub fn segment(&self, seg: &Segment) -> &[S] {
        &self.data[seg.range()]
    }

    /// The segment as an [`Array`] with its declared shape.
    pub fn segment_array(&self, seg: &Segment) -> Array<S> {
        Array::new(seg.shape.clone(), self.segment(seg).to_vec()).expect("segment shape")
    }

    pub fn same_layout(&self, other: &ParamVector<S>) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout) || *self.layout == *other.layout
    }

    pub fn check_layout(&self, other: &ParamVector<S>) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::arg("parameter layouts differ"))
        }
    }

    pub fn l2_norm(&self) -> S {
        crate::scalar::l2_norm(&self.data)
    }

    pub fn zip_map(&self, other: &ParamVector<S>, f: impl Fn(S, S) -> S) -> Result<Self> {
        self.check_layout(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(ParamVector {
            layout: self.layout.clone(),
            data,
        })
    }

    pub fn add(&self, other: &ParamVector<S>) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ParamVector<S>) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scaled(&self, s: S) -> Self {
        ParamVector {
            layout: self.layout.clone(),
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Converts element type through `f64`.
    pub fn cast<T: Scalar>(&self) -> ParamVector<T> {
        ParamVector {
            layout: self.layout.clone(),
            data: self.data.iter().map(|x| T::c(x.as_f64())).collect(),
        }
    }

    /// Mean of equally-laid-out vectors, accumulated in order.
    pub fn mean_of(items: &[ParamVector<S>]) -> Result<Self> {
        let first = items.first().ok_or_else(|| Error::arg("mean of no vectors"))?;
        let mut acc = vec![S::zero(); first.len()];
        for it in items {
            first.check_layout(it)?;
            for (a, &x) in acc.iter_mut().zip(&it.data) {
                *a += x;
            }
        }
        let n = S::from_usize_lossy(items.len());
        Ok(ParamVector {
            layout: first.layout.clone(),
            data: acc.into_iter().map(|a| a / n).collect(),
        })
    }
}
