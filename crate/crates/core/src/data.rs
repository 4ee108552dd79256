//! Binarized datasets: thermometer encoding, splitting and synthetic tasks.
//!
//! File formats live in the `warplut` crate; everything here is pure.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::layers::Shape;
use crate::rng::stream;
use crate::{Error, Result};

/// Boolean-valued examples with class labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    shape: Shape,
    /// Row-major `[N × shape.dim()]`, every entry 0 or 1.
    inputs: Vec<u8>,
    labels: Vec<u32>,
    classes: usize,
}

impl Dataset {
    pub fn new(shape: Shape, inputs: Vec<u8>, labels: Vec<u32>, classes: usize) -> Result<Self> {
        let dim = shape.dim();
        if dim == 0 || inputs.len() != labels.len() * dim {
            return Err(Error::Length {
                expected: labels.len() * dim,
                actual: inputs.len(),
            });
        }
        if let Some(&b) = inputs.iter().find(|&&b| b > 1) {
            return Err(Error::Config(alloc::format!("input value {b} is not Boolean")));
        }
        if let Some(&l) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(Error::Label {
                label: l as usize,
                classes,
            });
        }
        Ok(Self {
            shape,
            inputs,
            labels,
            classes,
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn inputs(&self) -> &[u8] {
        &self.inputs
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn example(&self, i: usize) -> &[u8] {
        &self.inputs[i * self.dim()..(i + 1) * self.dim()]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut inputs = Vec::with_capacity(indices.len() * self.dim());
        for &i in indices {
            inputs.extend_from_slice(self.example(i));
        }
        Self {
            shape: self.shape,
            inputs,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    /// First `n` examples (or all, if fewer).
    pub fn take(&self, n: usize) -> Self {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    pub fn label_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.classes];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }
}

/// 8-bit images, channel-major per record (`[N × C × H × W]`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImages {
    pub shape: Shape,
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
    pub classes: usize,
}

impl RawImages {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Per-channel thresholds of a thermometer code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSpec {
    pub thresholds: Vec<f64>,
}

impl EncoderSpec {
    /// Thresholds `t / (n_bits + 1)` for `t = 1..=n_bits`.
    pub fn uniform(n_bits: usize) -> Self {
        Self {
            thresholds: (1..=n_bits).map(|t| t as f64 / (n_bits + 1) as f64).collect(),
        }
    }

    pub fn n_bits(&self) -> usize {
        self.thresholds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.thresholds.is_empty() {
            return Err(Error::Config("thermometer code needs at least one threshold".into()));
        }
        let in_range = self.thresholds.iter().all(|&t| t > 0.0 && t < 1.0);
        let increasing = self.thresholds.windows(2).all(|w| w[0] < w[1]);
        if in_range && increasing {
            Ok(())
        } else {
            Err(Error::Config(alloc::format!(
                "thresholds must be strictly increasing in (0, 1): {:?}",
                self.thresholds
            )))
        }
    }

    /// Bits of one normalized pixel value.
    pub fn encode_value(&self, p: f64) -> impl Iterator<Item = u8> + '_ {
        self.thresholds.iter().map(move |&t| (p > t) as u8)
    }
}

impl Default for EncoderSpec {
    fn default() -> Self {
        Self::uniform(3)
    }
}

/// Channel `c`, bit `t` fires iff `pixel / 255 > thresholds[t]`. Output
/// channels are ordered channel-major, threshold-minor.
pub fn thermometer_encode(raw: &RawImages, spec: &EncoderSpec) -> Result<Dataset> {
    spec.validate()?;
    let Shape {
        channels,
        height,
        width,
    } = raw.shape;
    let plane = height * width;
    let n_bits = spec.n_bits();
    let out_shape = Shape::image(channels * n_bits, height, width);
    let mut inputs = vec![0u8; raw.len() * out_shape.dim()];
    for (img, out) in raw
        .pixels
        .chunks(raw.shape.dim())
        .zip(inputs.chunks_mut(out_shape.dim()))
    {
        for c in 0..channels {
            for p in 0..plane {
                let v = img[c * plane + p] as f64 / 255.0;
                for (t, bit) in spec.encode_value(v).enumerate() {
                    out[(c * n_bits + t) * plane + p] = bit;
                }
            }
        }
    }
    Dataset::new(
        out_shape,
        inputs,
        raw.labels.iter().map(|&l| l as u32).collect(),
        raw.classes,
    )
}

/// Seeded shuffle, then the first `round(fraction · N)` examples train.
pub fn split_train_val(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(alloc::format!("split fraction must be in (0, 1), got {fraction}")));
    }
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    idx.shuffle(&mut stream(seed, 0));
    let cut = libm::round(fraction * dataset.len() as f64) as usize;
    Ok((dataset.subset(&idx[..cut]), dataset.subset(&idx[cut..])))
}

/// All `2^k` Boolean vectors labelled by parity; input 0 is the most
/// significant bit of the example index.
pub fn make_parity_dataset(k: usize) -> Result<Dataset> {
    if !(1..=16).contains(&k) {
        return Err(Error::Config(alloc::format!("parity width must be in 1..=16, got {k}")));
    }
    let n = 1usize << k;
    let mut inputs = Vec::with_capacity(n * k);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        inputs.extend((0..k).map(|j| ((i >> (k - 1 - j)) & 1) as u8));
        labels.push(i.count_ones() % 2);
    }
    Dataset::new(Shape::flat(k), inputs, labels, 2)
}

/// Uniform random bits with uniform random labels.
pub fn make_random_dataset(n: usize, dim: usize, classes: usize, seed: u64) -> Result<Dataset> {
    let mut rng = stream(seed, 0);
    let inputs = (0..n * dim).map(|_| rng.random::<bool>() as u8).collect();
    let labels = (0..n).map(|_| rng.random_range(0..classes as u32)).collect();
    Dataset::new(Shape::flat(dim), inputs, labels, classes)
}

/// Class-biased bits: the input is split into `classes` contiguous blocks and
/// the block of the example's class fires with probability `p_on`, all other
/// bits with probability 1/2.
pub fn make_biased_bits_dataset(n: usize, dim: usize, classes: usize, p_on: f64, seed: u64) -> Result<Dataset> {
    if !dim.is_multiple_of(classes) {
        return Err(Error::GroupSize { len: dim, classes });
    }
    let block = dim / classes;
    let mut rng = stream(seed, 0);
    let mut inputs = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let label = rng.random_range(0..classes);
        for i in 0..dim {
            let p = if i / block == label { p_on } else { 0.5 };
            inputs.push(rng.random_bool(p) as u8);
        }
        labels.push(label as u32);
    }
    Dataset::new(Shape::flat(dim), inputs, labels, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thermometer_examples() {
        let spec = EncoderSpec::uniform(3);
        assert_eq!(spec.thresholds, [0.25, 0.5, 0.75]);
        assert_eq!(spec.encode_value(0.0).collect::<Vec<_>>(), [0, 0, 0]);
        assert_eq!(spec.encode_value(1.0).collect::<Vec<_>>(), [1, 1, 1]);
        assert_eq!(spec.encode_value(0.6).collect::<Vec<_>>(), [1, 1, 0]);
        assert!(EncoderSpec { thresholds: vec![0.5, 0.5] }.validate().is_err());
        assert!(EncoderSpec { thresholds: vec![0.0, 0.5] }.validate().is_err());
    }

    #[test]
    fn thermometer_layout() {
        // 2 channels, 1x2 image
        let raw = RawImages {
            shape: Shape::image(2, 1, 2),
            pixels: vec![0, 255, 153, 64],
            labels: vec![1],
            classes: 2,
        };
        let ds = thermometer_encode(&raw, &EncoderSpec::uniform(3)).unwrap();
        assert_eq!(ds.shape(), Shape::image(6, 1, 2));
        // channel 0: pixels (0, 1.0); channel 1: (0.6, 0.251)
        assert_eq!(ds.example(0), [0, 1, 0, 1, 0, 1, 1, 1, 1, 0, 0, 0]);
    }

    #[test]
    fn parity_sets() {
        let p2 = make_parity_dataset(2).unwrap();
        assert_eq!(p2.labels(), [0, 1, 1, 0]);
        let p4 = make_parity_dataset(4).unwrap();
        assert_eq!(p4.len(), 16);
        assert_eq!(p4.label_histogram(), [8, 8]);
        let p1 = make_parity_dataset(1).unwrap();
        assert_eq!(p1.inputs(), [0, 1]);
        assert_eq!(p1.labels(), [0, 1]);
        assert!(make_parity_dataset(17).is_err());
    }

    #[test]
    fn split_is_seeded_partition() {
        let ds = make_random_dataset(1000, 4, 3, 1).unwrap();
        let (a, b) = split_train_val(&ds, 0.8, 5).unwrap();
        assert_eq!((a.len(), b.len()), (800, 200));
        let (a2, _) = split_train_val(&ds, 0.8, 5).unwrap();
        assert_eq!(a, a2);
        assert!(split_train_val(&ds, 1.0, 5).is_err());
    }

    #[test]
    fn rejects_non_boolean_inputs() {
        assert!(Dataset::new(Shape::flat(2), vec![0, 2], vec![0], 1).is_err());
        assert!(Dataset::new(Shape::flat(2), vec![0, 1], vec![3], 2).is_err());
    }
}
