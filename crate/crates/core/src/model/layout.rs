//! Flat parameter storage. Every tensor of a model lives in one `Vec<f64>`;
//! a [`Span`] names a row-major block of it. Gradients, optimizer moments and
//! checkpoints all share the same layout.

use ndarray::{ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::seed::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }

    pub fn mat<'a>(&self, p: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape((self.rows, self.cols), &p[self.range()]).expect("span shape")
    }

    pub fn mat_mut<'a>(&self, p: &'a mut [f64]) -> ArrayViewMut2<'a, f64> {
        ArrayViewMut2::from_shape((self.rows, self.cols), &mut p[self.range()]).expect("span shape")
    }

    pub fn vec<'a>(&self, p: &'a [f64]) -> ArrayView1<'a, f64> {
        ArrayView1::from(&p[self.range()])
    }

    pub fn vec_mut<'a>(&self, p: &'a mut [f64]) -> ArrayViewMut1<'a, f64> {
        ArrayViewMut1::from(&mut p[self.range()])
    }

    pub fn row<'a>(&self, p: &'a [f64], r: usize) -> &'a [f64] {
        let start = self.offset + r * self.cols;
        &p[start..start + self.cols]
    }

    pub fn row_mut<'a>(&self, p: &'a mut [f64], r: usize) -> &'a mut [f64] {
        let start = self.offset + r * self.cols;
        &mut p[start..start + self.cols]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Normal(f64),
    Zeros,
    Ones,
}

/// Sequential allocator recording each span's initializer.
#[derive(Debug, Default)]
pub struct Allocator {
    next: usize,
    inits: Vec<(Span, Init)>,
}

impl Allocator {
    pub fn alloc(&mut self, rows: usize, cols: usize, init: Init) -> Span {
        let span = Span {
            offset: self.next,
            rows,
            cols,
        };
        self.next += rows * cols;
        self.inits.push((span, init));
        span
    }

    pub fn total(&self) -> usize {
        self.next
    }

    pub fn initialize(&self, rng: &mut Rng) -> Vec<f64> {
        let mut p = vec![0.0; self.next];
        for (span, init) in &self.inits {
            match init {
                Init::Zeros => {}
                Init::Ones => p[span.range()].fill(1.0),
                Init::Normal(std) => {
                    let dist = Normal::new(0.0, *std).expect("positive std");
                    for x in &mut p[span.range()] {
                        *x = dist.sample(rng);
                    }
                }
            }
        }
        p
    }
}
