//! Procedural image classification data: geometric shape classes with noise.
//!
//! A deterministic, class-balanced stand-in for a real image test set. Classes
//! cycle through horizontal bars, vertical bars, filled disks, checkerboards,
//! diagonal stripes, crosses, rings and corner blobs, each drawn with a random
//! phase/position, per-channel tint and additive noise, clipped to [0, 1].

use super::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthDataset {
    channels: usize,
    height: usize,
    width: usize,
    num_classes: usize,
    seed: u64,
    train_images: Vec<f64>,
    train_labels: Vec<usize>,
    test_images: Vec<f64>,
    test_labels: Vec<usize>,
}

fn dataset_rng(seed: u64, split: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(b"synth/");
    hasher.update(split.as_bytes());
    let digest = hasher.finalize();
    let mut s = [0u8; 32];
    s.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(s)
}

fn draw_pattern(class: usize, h: usize, w: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut img = vec![0.0; h * w];
    let fg = rng.gen_range(0.7..1.0);
    let bg = rng.gen_range(0.05..0.25);
    for v in img.iter_mut() {
        *v = bg;
    }
    match class % 8 {
        0 => {
            // horizontal bars
            let period = rng.gen_range(3..5);
            let phase = rng.gen_range(0..period);
            for y in 0..h {
                if (y + phase) % period < period / 2 + 1 {
                    for x in 0..w {
                        img[y * w + x] = fg;
                    }
                }
            }
        }
        1 => {
            // vertical bars
            let period = rng.gen_range(3..5);
            let phase = rng.gen_range(0..period);
            for x in 0..w {
                if (x + phase) % period < period / 2 + 1 {
                    for y in 0..h {
                        img[y * w + x] = fg;
                    }
                }
            }
        }
        2 => {
            // filled disk
            let r = h as f64 * rng.gen_range(0.22..0.34);
            let cy = rng.gen_range(r..h as f64 - r);
            let cx = rng.gen_range(r..w as f64 - r);
            for y in 0..h {
                for x in 0..w {
                    let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                    if d2 <= r * r {
                        img[y * w + x] = fg;
                    }
                }
            }
        }
        3 => {
            // checkerboard
            let sq = rng.gen_range(2..4);
            let phase = rng.gen_range(0..2);
            for y in 0..h {
                for x in 0..w {
                    if (y / sq + x / sq + phase) % 2 == 0 {
                        img[y * w + x] = fg;
                    }
                }
            }
        }
        4 => {
            // diagonal stripes
            let period = rng.gen_range(3..6);
            let phase = rng.gen_range(0..period);
            for y in 0..h {
                for x in 0..w {
                    if (y + x + phase) % period < period / 2 + 1 {
                        img[y * w + x] = fg;
                    }
                }
            }
        }
        5 => {
            // cross
            let cy = rng.gen_range(h / 4..3 * h / 4);
            let cx = rng.gen_range(w / 4..3 * w / 4);
            let t = rng.gen_range(1..3);
            for y in 0..h {
                for x in 0..w {
                    if y.abs_diff(cy) < t || x.abs_diff(cx) < t {
                        img[y * w + x] = fg;
                    }
                }
            }
        }
        6 => {
            // ring
            let r = h as f64 * rng.gen_range(0.26..0.36);
            let cy = h as f64 / 2.0 + rng.gen_range(-1.5..1.5);
            let cx = w as f64 / 2.0 + rng.gen_range(-1.5..1.5);
            for y in 0..h {
                for x in 0..w {
                    let d = ((y as f64 - cy).powi(2) + (x as f64 - cx).powi(2)).sqrt();
                    if (d - r).abs() <= 1.2 {
                        img[y * w + x] = fg;
                    }
                }
            }
        }
        _ => {
            // bright corner blob
            let corner = rng.gen_range(0..4usize);
            let (cy, cx) = match corner {
                0 => (h / 4, w / 4),
                1 => (h / 4, 3 * w / 4),
                2 => (3 * h / 4, w / 4),
                _ => (3 * h / 4, 3 * w / 4),
            };
            let r = (h as f64 * 0.3) as usize;
            for y in 0..h {
                for x in 0..w {
                    if y.abs_diff(cy) + x.abs_diff(cx) <= r {
                        img[y * w + x] = fg;
                    }
                }
            }
        }
    }
    img
}

fn generate_split(
    n: usize,
    channels: usize,
    h: usize,
    w: usize,
    num_classes: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<usize>) {
    let mut images = Vec::with_capacity(n * channels * h * w);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % num_classes; // balanced within +-1
        let base = draw_pattern(class, h, w, rng);
        for _ in 0..channels {
            let tint = rng.gen_range(0.6..1.0);
            for v in &base {
                let noisy = v * tint + rng.gen_range(-0.05..0.05);
                images.push(noisy.clamp(0.0, 1.0));
            }
        }
        labels.push(class);
    }
    (images, labels)
}

/// Deterministic class-balanced dataset of geometric shapes.
pub fn synth_dataset(
    channels: usize,
    image_size: usize,
    num_classes: usize,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> SynthDataset {
    assert!(num_classes >= 2);
    let (h, w) = (image_size, image_size);
    let mut rng_train = dataset_rng(seed, "train");
    let (train_images, train_labels) = generate_split(n_train, channels, h, w, num_classes, &mut rng_train);
    let mut rng_test = dataset_rng(seed, "test");
    let (test_images, test_labels) = generate_split(n_test, channels, h, w, num_classes, &mut rng_test);
    SynthDataset {
        channels,
        height: h,
        width: w,
        num_classes,
        seed,
        train_images,
        train_labels,
        test_images,
        test_labels,
    }
}

impl SynthDataset {
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn image_dims(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn train_labels(&self) -> &[usize] {
        &self.train_labels
    }

    pub fn test_labels(&self) -> &[usize] {
        &self.test_labels
    }

    pub fn train_image(&self, idx: usize) -> &[f64] {
        let per = self.channels * self.height * self.width;
        &self.train_images[idx * per..(idx + 1) * per]
    }

    pub fn train_batch(&self, lo: usize, hi: usize) -> Tensor {
        let per = self.channels * self.height * self.width;
        Tensor::from_vec(
            &[hi - lo, self.channels, self.height, self.width],
            self.train_images[lo * per..hi * per].to_vec(),
        )
    }

    pub fn test_batch(&self, lo: usize, hi: usize) -> Tensor {
        let per = self.channels * self.height * self.width;
        Tensor::from_vec(
            &[hi - lo, self.channels, self.height, self.width],
            self.test_images[lo * per..hi * per].to_vec(),
        )
    }

    pub fn n_train(&self) -> usize {
        self.train_labels.len()
    }

    pub fn n_test(&self) -> usize {
        self.test_labels.len()
    }
}

/// Horizontal flip (p = 1/2) and random crop from a 2-pixel zero pad.
pub fn augment<R: Rng>(img: &[f64], c: usize, h: usize, w: usize, rng: &mut R) -> Vec<f64> {
    let flip = rng.gen_bool(0.5);
    let pad = 2usize;
    let dy = rng.gen_range(0..=2 * pad);
    let dx = rng.gen_range(0..=2 * pad);
    let mut out = vec![0.0; img.len()];
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                let sx = if flip { w - 1 - x } else { x };
                // coordinates in the padded source
                let py = y + dy;
                let px = sx + dx;
                let v = if py >= pad && py < h + pad && px >= pad && px < w + pad {
                    img[ch * h * w + (py - pad) * w + (px - pad)]
                } else {
                    0.0
                };
                out[ch * h * w + y * w + x] = v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_and_in_range() {
        let ds = synth_dataset(3, 8, 4, 102, 41, 7);
        let mut counts = [0usize; 4];
        for l in ds.train_labels() {
            counts[*l] += 1;
        }
        let (min, max) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(max - min <= 1, "{counts:?}");
        assert!(ds.train_images.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(ds.test_images.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn deterministic() {
        let a = synth_dataset(3, 8, 4, 16, 8, 3);
        let b = synth_dataset(3, 8, 4, 16, 8, 3);
        assert_eq!(a.train_images, b.train_images);
        assert_eq!(a.test_labels, b.test_labels);
    }

    #[test]
    fn linearly_separable_above_chance() {
        // multinomial logistic regression on raw pixels must beat guessing
        let ds = synth_dataset(3, 8, 4, 240, 80, 11);
        let d = 3 * 8 * 8;
        let c = 4;
        let mut w = vec![0.0; c * d];
        let mut b = vec![0.0; c];
        let lr = 0.5;
        for _epoch in 0..60 {
            let mut gw = vec![0.0; c * d];
            let mut gb = vec![0.0; c];
            for i in 0..ds.n_train() {
                let x = ds.train_image(i);
                let mut z: Vec<f64> = (0..c)
                    .map(|k| b[k] + x.iter().zip(&w[k * d..(k + 1) * d]).map(|(a, b)| a * b).sum::<f64>())
                    .collect();
                let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = z.iter().map(|v| (v - m).exp()).sum();
                for k in 0..c {
                    z[k] = (z[k] - m).exp() / sum;
                }
                for k in 0..c {
                    let g = z[k] - if k == ds.train_labels()[i] { 1.0 } else { 0.0 };
                    gb[k] += g;
                    for (j, xv) in x.iter().enumerate() {
                        gw[k * d + j] += g * xv;
                    }
                }
            }
            let n = ds.n_train() as f64;
            for k in 0..c * d {
                w[k] -= lr * gw[k] / n;
            }
            for k in 0..c {
                b[k] -= lr * gb[k] / n;
            }
        }
        let mut correct = 0;
        for i in 0..ds.n_test() {
            let per = d;
            let x = &ds.test_images[i * per..(i + 1) * per];
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for k in 0..c {
                let z = b[k] + x.iter().zip(&w[k * d..(k + 1) * d]).map(|(a, b)| a * b).sum::<f64>();
                if z > best_v {
                    best_v = z;
                    best = k;
                }
            }
            if best == ds.test_labels()[i] {
                correct += 1;
            }
        }
        let acc = correct as f64 / ds.n_test() as f64;
        assert!(acc > 0.25, "linear probe accuracy {acc} not above chance");
    }
}
