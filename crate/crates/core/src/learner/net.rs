use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::LearnError;

/// Fully connected ReLU network with a scalar output. Parameters are stored
/// flat, layer by layer, as a row-major weight matrix followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    pub params: Vec<f64>,
}

/// Activations of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Post-activation values per layer, starting with the input.
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> f64 {
        self.acts.last().expect("non-empty")[0]
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Kaiming-normal weights, zero biases.
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Result<Mlp, LearnError> {
        if sizes.len() < 2 || sizes.contains(&0) || *sizes.last().unwrap() != 1 {
            return Err(LearnError::Architecture(format!("{sizes:?}")));
        }
        let mut params = Vec::with_capacity(param_count(sizes));
        for w in sizes.windows(2) {
            let normal = Normal::new(0.0, (2.0 / w[0] as f64).sqrt()).expect("positive std");
            params.extend((0..w[0] * w[1]).map(|_| normal.sample(rng)));
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Mlp, LearnError> {
        if sizes.len() < 2 || *sizes.last().unwrap() != 1 || params.len() != param_count(sizes) {
            return Err(LearnError::Architecture(format!(
                "{sizes:?} with {} parameters",
                params.len()
            )));
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    /// First-layer pre-activation contribution of the inputs starting at `offset`, without bias.
    pub fn partial(&self, x: &[f64], offset: usize) -> Vec<f64> {
        let n_in = self.sizes[0];
        assert!(offset + x.len() <= n_in, "input slice out of range");
        (0..self.sizes[1])
            .map(|o| {
                let row = &self.params[o * n_in + offset..o * n_in + offset + x.len()];
                row.iter().zip(x).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// Output given the summed first-layer partials of a full input.
    pub fn finish(&self, z1: &[f64]) -> f64 {
        let n_in = self.sizes[0];
        let n1 = self.sizes[1];
        let bias = &self.params[n_in * n1..n_in * n1 + n1];
        let last = self.sizes.len() - 2;
        let mut a: Vec<f64> = z1
            .iter()
            .zip(bias)
            .map(|(z, b)| if last == 0 { z + b } else { (z + b).max(0.0) })
            .collect();
        let mut off = n_in * n1 + n1;
        for (l, w) in self.sizes.windows(2).enumerate().skip(1) {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[off..off + n_in * n_out];
            let bias = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            a = (0..n_out)
                .map(|o| {
                    let z = bias[o]
                        + weights[o * n_in..(o + 1) * n_in]
                            .iter()
                            .zip(&a)
                            .map(|(p, q)| p * q)
                            .sum::<f64>();
                    if l == last {
                        z
                    } else {
                        z.max(0.0)
                    }
                })
                .collect();
            off += n_in * n_out + n_out;
        }
        a[0]
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        self.trace(x).output()
    }

    pub fn trace(&self, x: &[f64]) -> Trace {
        assert_eq!(x.len(), self.sizes[0], "input length");
        let mut acts = vec![x.to_vec()];
        let mut off = 0;
        let last = self.sizes.len() - 2;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[off..off + n_in * n_out];
            let bias = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let input = acts.last().unwrap();
            let out: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &weights[o * n_in..(o + 1) * n_in];
                    let z = bias[o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                    if l == last {
                        z
                    } else {
                        z.max(0.0)
                    }
                })
                .collect();
            acts.push(out);
            off += n_in * n_out + n_out;
        }
        Trace { acts }
    }

    /// Adds `d_out * d(output)/d(params)` into `grad`.
    pub fn backward(&self, trace: &Trace, d_out: f64, grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len());
        let n_layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for w in self.sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let mut delta = vec![d_out];
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input = &trace.acts[l];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let g = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                for (gi, xi) in g.iter_mut().zip(input) {
                    *gi += d * xi;
                }
                grad[off + n_in * n_out + o] += d;
            }
            if l > 0 {
                let weights = &self.params[off..off + n_in * n_out];
                let mut prev = vec![0.0; n_in];
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    for (p, w) in prev.iter_mut().zip(&weights[o * n_in..(o + 1) * n_in]) {
                        *p += d * w;
                    }
                }
                for (p, a) in prev.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&(self.sizes.len() as u32).to_le_bytes())?;
        for s in &self.sizes {
            w.write_all(&(*s as u32).to_le_bytes())?;
        }
        w.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Mlp, LearnError> {
        let n = read_u32(r)? as usize;
        if !(2..=16).contains(&n) {
            return Err(LearnError::Checkpoint(format!(
                "implausible layer count {n}"
            )));
        }
        let sizes = (0..n)
            .map(|_| read_u32(r).map(|v| v as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let len = read_u64(r)? as usize;
        if len != param_count(&sizes) {
            return Err(LearnError::Checkpoint(format!(
                "parameter count {len} does not match layers {sizes:?}"
            )));
        }
        let mut buf = [0u8; 8];
        let mut params = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut buf).map_err(io_err)?;
            params.push(f64::from_le_bytes(buf));
        }
        Mlp::from_params(&sizes, params)
    }
}

fn io_err(e: std::io::Error) -> LearnError {
    LearnError::Checkpoint(e.to_string())
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32, LearnError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64, LearnError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(u64::from_le_bytes(b))
}

/// Adaptive moment estimation over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

/// Huber loss of an absolute TD error.
pub fn huber(delta: f64) -> f64 {
    if delta < 1.0 {
        0.5 * delta * delta
    } else {
        delta - 0.5
    }
}

/// Derivative of `huber(|y - q|)` with respect to `q`.
pub fn huber_grad_q(y: f64, q: f64) -> f64 {
    (q - y).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn huber_branches() {
        assert_eq!(huber(0.5), 0.125);
        assert_eq!(huber(1.0), 0.5);
        assert_eq!(huber(2.0), 1.5);
        assert_eq!(huber_grad_q(0.0, 0.5), 0.5);
        assert_eq!(huber_grad_q(0.0, 2.0), 1.0);
        assert_eq!(huber_grad_q(2.0, 0.0), -1.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[6, 5, 4, 1], &mut rng).unwrap();
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut grad = vec![0.0; net.params.len()];
        net.backward(&net.trace(&x), 1.0, &mut grad);
        for i in 0..net.params.len() {
            let h = 1e-6;
            let mut p = net.clone();
            p.params[i] += h;
            let up = p.forward(&x);
            p.params[i] -= 2.0 * h;
            let down = p.forward(&x);
            let fd = (up - down) / (2.0 * h);
            assert!(
                (fd - grad[i]).abs() <= 1e-6 * (1.0 + fd.abs()),
                "param {i}: {fd} vs {}",
                grad[i]
            );
        }
    }

    #[test]
    fn partials_sum_to_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::new(&[8, 5, 3, 1], &mut rng).unwrap();
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = net.partial(&x[..3], 0);
        let b = net.partial(&x[3..], 3);
        let z: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p + q).collect();
        assert!((net.finish(&z) - net.forward(&x)).abs() < 1e-12);
    }

    #[test]
    fn adam_moves_against_gradient() {
        let mut p = vec![1.0, -1.0];
        let mut opt = Adam::new(2, 0.1);
        opt.step(&mut p, &[2.0, -3.0]);
        assert!((p[0] - 0.9).abs() < 1e-6 && (p[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[3, 2, 1], &mut rng).unwrap();
        let mut buf = Vec::new();
        net.write_to(&mut buf).unwrap();
        assert_eq!(Mlp::read_from(&mut buf.as_slice()).unwrap(), net);
        assert!(Mlp::read_from(&mut &buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn rejects_bad_architecture() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(Mlp::new(&[3, 2], &mut rng).is_err());
        assert!(Mlp::new(&[3], &mut rng).is_err());
        assert!(Mlp::from_params(&[2, 1], vec![0.0; 2]).is_err());
    }
}
