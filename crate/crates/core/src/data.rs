//! Datasets: labeled tensors in `[0, 1]^d` with stable sample indices.
//!
//! Two synthetic generators cover verification and benchmarking. The linear
//! oracle places samples at exactly known l-infinity distances from a ground
//! truth hyperplane (the distance to a hyperplane under the l-inf norm is
//! `|w.x + b| / ||w||_1`). The overlap-moons generator produces two
//! interleaved crescents whose class manifolds can be pushed into each other,
//! creating a genuine robustness-accuracy tradeoff at small epsilon. A small
//! corruption suite (noise and blur at five severities) rounds things off.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

/// Labeled dataset; samples are addressed by their stable index in `[0, n)`.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub name: String,
    pub n_classes: usize,
    samples: Vec<Tensor>,
    labels: Vec<usize>,
    /// Exact l-infinity distance to the ground-truth decision boundary,
    /// when the generator knows it.
    margins: Option<Vec<f64>>,
}

impl LabeledDataset {
    pub fn new(
        name: impl Into<String>,
        n_classes: usize,
        samples: Vec<Tensor>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if samples.is_empty() || samples.len() != labels.len() {
            return Err(Error::InvalidConfig(format!(
                "dataset needs matching nonempty samples/labels, got {}/{}",
                samples.len(),
                labels.len()
            )));
        }
        if n_classes < 2 {
            return Err(Error::InvalidConfig("datasets need >= 2 classes".into()));
        }
        let shape = samples[0].shape().to_vec();
        for (i, s) in samples.iter().enumerate() {
            if s.shape() != shape {
                return Err(Error::ShapeMismatch {
                    context: format!("dataset sample {}", i),
                    expected: crate::tensor::shape_string(&shape),
                    got: crate::tensor::shape_string(s.shape()),
                });
            }
            if s.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::InvalidConfig(format!(
                    "sample {} has pixels outside [0, 1]",
                    i
                )));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidConfig(format!(
                "label {} out of range for {} classes",
                bad, n_classes
            )));
        }
        Ok(Self { name: name.into(), n_classes, samples, labels, margins: None })
    }

    pub fn with_margins(mut self, margins: Vec<f64>) -> Result<Self> {
        if margins.len() != self.samples.len() {
            return Err(Error::InvalidConfig("margin table length mismatch".into()));
        }
        self.margins = Some(margins);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_shape(&self) -> &[usize] {
        self.samples[0].shape()
    }

    pub fn sample(&self, index: usize) -> (&Tensor, usize) {
        (&self.samples[index], self.labels[index])
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// True l-inf margin of a sample, when the generator provides one.
    pub fn margin(&self, index: usize) -> Option<f64> {
        self.margins.as_ref().map(|m| m[index])
    }

    pub fn margins(&self) -> Option<&[f64]> {
        self.margins.as_deref()
    }

    /// Stack the given sample indices into one batch.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Vec<usize>, Vec<usize>)> {
        let refs: Vec<&Tensor> = indices.iter().map(|&i| &self.samples[i]).collect();
        let x = Tensor::stack(&refs)?;
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Ok((x, labels, indices.to_vec()))
    }

    /// Contiguous index chunks covering the dataset in order.
    pub fn index_chunks(&self, chunk: usize) -> Vec<Vec<usize>> {
        (0..self.len())
            .collect::<Vec<_>>()
            .chunks(chunk.max(1))
            .map(|c| c.to_vec())
            .collect()
    }
}

/// Ground-truth hyperplane `w.x + b = 0`; label 1 on the positive side.
#[derive(Debug, Clone)]
pub struct LinearProblem {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearProblem {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + self.b
    }

    pub fn label(&self, x: &[f64]) -> usize {
        usize::from(self.score(x) > 0.0)
    }

    pub fn l1_norm(&self) -> f64 {
        self.w.iter().map(|v| libm::fabs(*v)).sum()
    }

    /// Exact l-infinity distance from `x` to the hyperplane.
    pub fn margin(&self, x: &[f64]) -> f64 {
        libm::fabs(self.score(x)) / self.l1_norm()
    }
}

/// Dataset drawn around a random hyperplane with exactly controlled
/// l-infinity margins, uniform in `[margin_lo, margin_hi]`.
///
/// Samples stay well inside the pixel box so that epsilon balls up to
/// `margin_hi` do not collide with the `[0, 1]` clamp.
pub fn make_linear_oracle(
    n: usize,
    d: usize,
    weight_seed: u64,
    margin_lo: f64,
    margin_hi: f64,
) -> Result<(LabeledDataset, LinearProblem)> {
    if d < 2 {
        return Err(Error::InvalidConfig("linear oracle needs d >= 2".into()));
    }
    if !(0.0 <= margin_lo && margin_lo <= margin_hi) {
        return Err(Error::InvalidConfig("need 0 <= margin_lo <= margin_hi".into()));
    }
    let mut rng = rng::chacha(rng::mix(weight_seed, 0x11ea));
    // Random direction, l1-normalized so scores are margins directly; each
    // coordinate is kept away from zero so sign corners stay informative.
    let mut w: Vec<f64> = (0..d)
        .map(|_| {
            let mag = rng::uniform(&mut rng, 0.2, 1.0);
            if rng::uniform_pm1(&mut rng) >= 0.0 {
                mag
            } else {
                -mag
            }
        })
        .collect();
    let l1: f64 = w.iter().map(|v| libm::fabs(*v)).sum();
    for wi in &mut w {
        *wi /= l1;
    }
    let center = vec![0.5; d];
    let b = -w.iter().zip(&center).map(|(wi, ci)| wi * ci).sum::<f64>();
    let problem = LinearProblem { w, b };

    let l2sq: f64 = problem.w.iter().map(|v| v * v).sum();
    let mut samples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut margins = Vec::with_capacity(n);
    let mut guard = 0usize;
    while samples.len() < n {
        guard += 1;
        if guard > 200 * n {
            return Err(Error::InvalidConfig(
                "linear oracle sampling failed; margins too large for the box".into(),
            ));
        }
        let m = rng::uniform(&mut rng, margin_lo, margin_hi);
        let side = if samples.len() % 2 == 0 { 1.0 } else { -1.0 };
        // Project a random interior point onto the hyperplane, then step m
        // along the sign corner; that lands exactly at l-inf distance m.
        let p: Vec<f64> = (0..d).map(|_| rng::uniform(&mut rng, 0.25, 0.75)).collect();
        let s = problem.score(&p);
        let x: Vec<f64> = p
            .iter()
            .zip(&problem.w)
            .map(|(pi, wi)| {
                let on_plane = pi - s * wi / l2sq;
                on_plane + side * m * if *wi >= 0.0 { 1.0 } else { -1.0 }
            })
            .collect();
        if x.iter().any(|&v| !(0.05..=0.95).contains(&v)) {
            continue;
        }
        let exact_margin = problem.margin(&x);
        labels.push(problem.label(&x));
        margins.push(exact_margin);
        samples.push(Tensor::from_slice(&x));
    }
    let ds = LabeledDataset::new(format!("linear-oracle-d{}", d), 2, samples, labels)?
        .with_margins(margins)?;
    Ok((ds, problem))
}

/// Raw two-moons coordinates are mapped into the pixel box by this fixed
/// affine transform, shared by train and test splits.
const MOONS_OFFSET: [f64; 2] = [-1.25, -1.25];
const MOONS_EXTENT: f64 = 3.5;

/// Uninformative coordinates appended to every moons sample.
pub const MOONS_NUISANCE_DIMS: usize = 16;

/// Two interleaved crescents in the first two coordinates, padded with
/// [`MOONS_NUISANCE_DIMS`] pure-noise coordinates. `noise` is the
/// per-coordinate jitter scale and `overlap` the upward shift of the lower
/// crescent, both in raw moon units (the raw picture is about 3 units wide;
/// one raw unit is `1 / 3.5` in pixel units). Larger overlap mixes the
/// classes.
///
/// The crescent jitter is a two-component Gaussian mixture: one sample in
/// ten gets triple scale, planting a minority of genuinely ambiguous points
/// inside the other class's territory. The nuisance coordinates are
/// identically distributed for both classes; they carry no label signal but
/// models that overfit them hand an l-infinity attacker one budget-sized
/// lever per coordinate, the way natural-image classifiers leak gradient
/// onto irrelevant pixels.
pub fn make_overlap_moons(n: usize, noise: f64, overlap: f64, seed: u64) -> Result<LabeledDataset> {
    if n < 2 {
        return Err(Error::InvalidConfig("moons needs n >= 2".into()));
    }
    let mut rng = rng::chacha(rng::mix(seed, 0x3007));
    let mut samples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let dim = 2 + MOONS_NUISANCE_DIMS;
    for i in 0..n {
        let t = rng::uniform(&mut rng, 0.0, core::f64::consts::PI);
        let upper = i % 2 == 0;
        let (mut x, mut y) = if upper {
            (libm::cos(t), libm::sin(t))
        } else {
            (1.0 - libm::cos(t), 0.5 - libm::sin(t) + overlap)
        };
        let scale = if rng::uniform(&mut rng, 0.0, 1.0) < 0.1 { 3.0 * noise } else { noise };
        x += scale * rng::standard_normal(&mut rng);
        y += scale * rng::standard_normal(&mut rng);
        let mut coords = Vec::with_capacity(dim);
        coords.push(((x - MOONS_OFFSET[0]) / MOONS_EXTENT).clamp(0.0, 1.0));
        coords.push(((y - MOONS_OFFSET[1]) / MOONS_EXTENT).clamp(0.0, 1.0));
        for _ in 0..MOONS_NUISANCE_DIMS {
            let v = 0.5 + (noise / MOONS_EXTENT) * rng::standard_normal(&mut rng);
            coords.push(v.clamp(0.0, 1.0));
        }
        samples.push(Tensor::from_slice(&coords));
        labels.push(usize::from(!upper));
    }
    LabeledDataset::new("overlap-moons", 2, samples, labels)
}

/// Corruption transform kinds of the mini suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CorruptionKind {
    GaussianNoise,
    UniformNoise,
    BoxBlur,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 3] = [
        CorruptionKind::GaussianNoise,
        CorruptionKind::UniformNoise,
        CorruptionKind::BoxBlur,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::GaussianNoise => "gaussian_noise",
            CorruptionKind::UniformNoise => "uniform_noise",
            CorruptionKind::BoxBlur => "box_blur",
        }
    }
}

/// A corruption kind at a severity in `1..=5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub severity: u8,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, severity: u8) -> Result<Self> {
        if !(1..=5).contains(&severity) {
            return Err(Error::InvalidConfig(format!(
                "corruption severity must be 1..=5, got {}",
                severity
            )));
        }
        Ok(Self { kind, severity })
    }
}

/// Apply a corruption; deterministic given the seed, output clipped to
/// `[0, 1]`, distortion energy grows with severity.
pub fn corrupt(x: &Tensor, spec: &CorruptionSpec, seed: u64) -> Result<Tensor> {
    CorruptionSpec::new(spec.kind, spec.severity)?;
    let s = spec.severity as f64;
    let mut rng = rng::chacha(rng::mix(seed, 0xc0)); // one stream per call
    let mut out = x.clone();
    match spec.kind {
        CorruptionKind::GaussianNoise => {
            let sigma = 0.04 * s;
            for v in out.data_mut() {
                *v = (*v + sigma * rng::standard_normal(&mut rng)).clamp(0.0, 1.0);
            }
        }
        CorruptionKind::UniformNoise => {
            let amp = 0.05 * s;
            for v in out.data_mut() {
                *v = (*v + amp * rng::uniform_pm1(&mut rng)).clamp(0.0, 1.0);
            }
        }
        CorruptionKind::BoxBlur => {
            let radius = spec.severity as isize;
            out = box_blur(x, radius);
        }
    }
    Ok(out)
}

/// Box average with clamp-to-edge sampling; a constant image is a fixed
/// point. Rank-3 tensors blur over the two trailing (spatial) axes, other
/// ranks blur along the last axis.
fn box_blur(x: &Tensor, radius: isize) -> Tensor {
    let shape = x.shape().to_vec();
    let mut out = x.clone();
    if shape.len() == 3 {
        let (c, h, w) = (shape[0], shape[1], shape[2]);
        let src = x.data();
        let dst = out.data_mut();
        for ch in 0..c {
            for i in 0..h as isize {
                for j in 0..w as isize {
                    let mut acc = 0.0;
                    let mut count = 0.0;
                    for di in -radius..=radius {
                        for dj in -radius..=radius {
                            let ii = (i + di).clamp(0, h as isize - 1) as usize;
                            let jj = (j + dj).clamp(0, w as isize - 1) as usize;
                            acc += src[(ch * h + ii) * w + jj];
                            count += 1.0;
                        }
                    }
                    dst[(ch * h + i as usize) * w + j as usize] = acc / count;
                }
            }
        }
    } else {
        let n = x.len() as isize;
        let src = x.data();
        let dst = out.data_mut();
        for i in 0..n {
            let mut acc = 0.0;
            let mut count = 0.0;
            for di in -radius..=radius {
                let ii = (i + di).clamp(0, n - 1) as usize;
                acc += src[ii];
                count += 1.0;
            }
            dst[i as usize] = acc / count;
        }
    }
    out
}

/// Corrupt an entire dataset with per-sample derived seeds.
pub fn corrupt_dataset(
    ds: &LabeledDataset,
    spec: &CorruptionSpec,
    seed: u64,
) -> Result<LabeledDataset> {
    let mut samples = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        let (x, _) = ds.sample(i);
        samples.push(corrupt(x, spec, rng::mix(seed, i as u64))?);
    }
    LabeledDataset::new(
        format!("{}+{}@{}", ds.name, spec.kind.name(), spec.severity),
        ds.n_classes,
        samples,
        ds.labels().to_vec(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_oracle_margins_are_exact() {
        let (ds, problem) = make_linear_oracle(200, 4, 9, 0.01, 0.1).unwrap();
        assert_eq!(ds.len(), 200);
        for i in 0..ds.len() {
            let (x, label) = ds.sample(i);
            assert_eq!(label, problem.label(x.data()));
            let stored = ds.margin(i).unwrap();
            assert!((stored - problem.margin(x.data())).abs() < 1e-12);
            assert!((0.01 - 1e-9..=0.1 + 1e-9).contains(&stored));
        }
    }

    #[test]
    fn axis_aligned_margin_closed_form() {
        let problem = LinearProblem { w: vec![1.0, 0.0], b: 0.0 };
        assert!((problem.margin(&[0.3, 0.9]) - 0.3).abs() < 1e-15);
        // A point on the hyperplane has margin zero.
        assert!(problem.margin(&[0.0, 0.42]).abs() < 1e-15);
    }

    #[test]
    fn moons_is_deterministic_and_in_box() {
        let a = make_overlap_moons(128, 0.1, 0.3, 5).unwrap();
        let b = make_overlap_moons(128, 0.1, 0.3, 5).unwrap();
        for i in 0..a.len() {
            assert_eq!(a.sample(i).0.data(), b.sample(i).0.data());
            assert_eq!(a.sample(i).1, b.sample(i).1);
            assert!(a.sample(i).0.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        let c = make_overlap_moons(128, 0.1, 0.3, 6).unwrap();
        assert_ne!(a.sample(0).0.data(), c.sample(0).0.data());
    }

    #[test]
    fn moons_classes_are_balanced() {
        let ds = make_overlap_moons(100, 0.05, 0.0, 3).unwrap();
        let ones = ds.labels().iter().filter(|&&l| l == 1).count();
        assert_eq!(ones, 50);
    }

    #[test]
    fn corruption_severity_orders_distortion() {
        let ds = make_overlap_moons(16, 0.1, 0.2, 1).unwrap();
        for kind in CorruptionKind::ALL {
            let mut prev = 0.0;
            for severity in 1..=5u8 {
                let spec = CorruptionSpec::new(kind, severity).unwrap();
                let mut energy = 0.0;
                for trial in 0..100u64 {
                    for i in 0..ds.len() {
                        let (x, _) = ds.sample(i);
                        let c = corrupt(x, &spec, trial).unwrap();
                        energy += x
                            .data()
                            .iter()
                            .zip(c.data())
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>();
                    }
                }
                assert!(
                    energy >= prev,
                    "{} severity {} energy {} < {}",
                    kind.name(),
                    severity,
                    energy,
                    prev
                );
                prev = energy;
            }
        }
    }

    #[test]
    fn gaussian_noise_stays_clipped() {
        let x = Tensor::from_slice(&[0.5; 64]);
        let spec = CorruptionSpec::new(CorruptionKind::GaussianNoise, 1).unwrap();
        for seed in 0..50 {
            let c = corrupt(&x, &spec, seed).unwrap();
            assert!(c.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn blur_fixes_constant_images() {
        let flat = Tensor::from_slice(&[0.37; 12]);
        let img = Tensor::new(vec![1, 4, 4], vec![0.37; 16]).unwrap();
        for severity in 1..=5u8 {
            let spec = CorruptionSpec::new(CorruptionKind::BoxBlur, severity).unwrap();
            for t in [&flat, &img] {
                let c = corrupt(t, &spec, 0).unwrap();
                for (a, b) in t.data().iter().zip(c.data()) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn severity_out_of_range_rejected() {
        assert!(CorruptionSpec::new(CorruptionKind::BoxBlur, 0).is_err());
        assert!(CorruptionSpec::new(CorruptionKind::BoxBlur, 6).is_err());
    }

    #[test]
    fn dataset_validation() {
        let good = vec![Tensor::from_slice(&[0.5, 0.5])];
        assert!(LabeledDataset::new("x", 2, good.clone(), vec![0]).is_ok());
        assert!(LabeledDataset::new("x", 2, good.clone(), vec![2]).is_err());
        let bad = vec![Tensor::from_slice(&[1.5, 0.5])];
        assert!(LabeledDataset::new("x", 2, bad, vec![0]).is_err());
        assert!(LabeledDataset::new("x", 2, good, vec![0, 1]).is_err());
    }
}
