#![allow(dead_code)]

use prodform::estimators::{DiscreteBlock, DiscreteProductTarget, TestFunction};
use proptest::prelude::*;
use std::sync::Arc;

/// A random discrete product target whose block `k` takes the values
/// `0, 1, .., S_k - 1`, with `phi` an arbitrary table over those values.
#[derive(Debug, Clone)]
pub struct Instance {
    pub probs: Vec<Vec<f64>>,
    pub table: Vec<f64>,
    pub n: Vec<usize>,
}

impl Instance {
    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn support(&self) -> Vec<usize> {
        self.probs.iter().map(Vec::len).collect()
    }

    pub fn target(&self) -> DiscreteProductTarget {
        let blocks = self
            .probs
            .iter()
            .map(|p| {
                let values = (0..p.len()).map(|i| i as f64).collect();
                DiscreteBlock::scalar(values, p.clone()).unwrap()
            })
            .collect();
        DiscreteProductTarget::new(blocks).unwrap()
    }

    pub fn phi(&self) -> TestFunction {
        let table = Arc::new(self.table.clone());
        let support = self.support();
        TestFunction::black_box(move |x| table[flat_index(&support, x)])
    }

    /// `mu(phi)` by direct enumeration.
    pub fn mean(&self) -> f64 {
        let support = self.support();
        let mut acc = 0.0;
        for (flat, v) in self.table.iter().enumerate() {
            let mut rem = flat;
            let mut p = 1.0;
            for k in (0..support.len()).rev() {
                p *= self.probs[k][rem % support[k]];
                rem /= support[k];
            }
            acc += p * v;
        }
        acc
    }
}

pub fn flat_index(support: &[usize], x: &[&[f64]]) -> usize {
    support.iter().zip(x).fold(0, |acc, (&s, p)| acc * s + p[0] as usize)
}

fn probs(s: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, s).prop_map(|w| {
        let total: f64 = w.iter().sum();
        w.iter().map(|x| x / total).collect()
    })
}

/// `K <= max_k`, `S_k <= max_s`, `N_k <= max_n`; `equal_n` forces one shared `N`.
pub fn instances(max_k: usize, max_s: usize, max_n: usize, equal_n: bool) -> impl Strategy<Value = Instance> {
    (1..=max_k)
        .prop_flat_map(move |k| (prop::collection::vec(1..=max_s, k), prop::collection::vec(1..=max_n, k)))
        .prop_flat_map(move |(support, n)| {
            let cells: usize = support.iter().product();
            let probs: Vec<_> = support.iter().map(|&s| probs(s)).collect();
            let n = if equal_n { vec![n[0]; n.len()] } else { n };
            (probs, prop::collection::vec(-3.0f64..3.0, cells), Just(n))
        })
        .prop_map(|(probs, table, n)| Instance { probs, table, n })
}
