//! Minimal dense-network toolkit over one flat `f64` parameter vector:
//! matrices are views into it, gradients live in a vector of the same shape.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};

/// A `rows × cols` row-major view at `off` in a flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mat {
    pub off: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Mat {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.off..self.off + self.len()]
    }

    pub fn slice_mut<'a>(&self, p: &'a mut [f64]) -> &'a mut [f64] {
        &mut p[self.off..self.off + self.len()]
    }

    pub fn row<'a>(&self, p: &'a [f64], r: usize) -> &'a [f64] {
        let s = self.off + r * self.cols;
        &p[s..s + self.cols]
    }

    pub fn row_mut<'a>(&self, p: &'a mut [f64], r: usize) -> &'a mut [f64] {
        let s = self.off + r * self.cols;
        &mut p[s..s + self.cols]
    }

    /// `y += W x`, with `x` split over consecutive column blocks.
    pub fn mv_add(&self, p: &[f64], xs: &[&[f64]], y: &mut [f64]) {
        debug_assert_eq!(xs.iter().map(|x| x.len()).sum::<usize>(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        let w = self.slice(p);
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &w[i * self.cols..(i + 1) * self.cols];
            let mut acc = 0.0;
            let mut c = 0;
            for x in xs {
                acc += dot(&row[c..c + x.len()], x);
                c += x.len();
            }
            *yi += acc;
        }
    }

    /// Backward of [`Mat::mv_add`]: `dW += dy xᵀ` and `dx += Wᵀ dy` for the
    /// blocks whose gradient is requested.
    pub fn mv_back(&self, p: &[f64], xs: &[&[f64]], dy: &[f64], g: &mut [f64], dxs: &mut [Option<&mut [f64]>]) {
        let w = self.slice(p);
        let gw = self.slice_mut(g);
        for (i, &d) in dy.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &w[i * self.cols..(i + 1) * self.cols];
            let grow = &mut gw[i * self.cols..(i + 1) * self.cols];
            let mut c = 0;
            for (x, dx) in xs.iter().zip(dxs.iter_mut()) {
                axpy(d, x, &mut grow[c..c + x.len()]);
                if let Some(dx) = dx {
                    axpy(d, &row[c..c + x.len()], dx);
                }
                c += x.len();
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Softmax over the entries where `mask` is true; masked entries are exactly 0.
pub fn masked_softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    let max = logits.iter().zip(mask).filter(|(_, m)| **m).map(|(l, _)| *l).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::AllMasked);
    }
    let mut out: Vec<f64> = logits.iter().zip(mask).map(|(l, m)| if *m { (l - max).exp() } else { 0.0 }).collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= z);
    Ok(out)
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Uniform(f64),
    Zero,
}

/// Named parameter blocks over one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub data: Vec<f64>,
    pub blocks: Vec<(String, Mat)>,
}

impl Params {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn zeros_like(&self) -> Vec<f64> {
        vec![0.0; self.data.len()]
    }

    pub fn block(&self, name: &str) -> Option<Mat> {
        self.blocks.iter().find(|(n, _)| n == name).map(|(_, m)| *m)
    }

    /// Text dump: one `param name rows cols` line followed by a line of values.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, m) in &self.blocks {
            writeln!(out, "param {name} {} {}", m.rows, m.cols).unwrap();
            let vals: Vec<String> = m.slice(&self.data).iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&vals.join(" "));
            out.push('\n');
        }
        out
    }

    /// Loads values into an already laid-out parameter set; shapes must match.
    pub fn load_text(&mut self, text: &str) -> Result<()> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut seen = 0;
        while let Some(head) = lines.next() {
            let parts: Vec<&str> = head.split_whitespace().collect();
            let [tag, name, rows, cols] = parts[..] else {
                return Err(Error::Parse(format!("bad parameter header {head:?}")));
            };
            if tag != "param" {
                return Err(Error::Parse(format!("bad parameter header {head:?}")));
            }
            let m = self.block(name).ok_or_else(|| Error::Parse(format!("unknown parameter {name}")))?;
            if rows.parse::<usize>().ok() != Some(m.rows) || cols.parse::<usize>().ok() != Some(m.cols) {
                return Err(Error::Parse(format!("shape mismatch for {name}")));
            }
            let vals = lines.next().ok_or_else(|| Error::Parse(format!("missing values for {name}")))?;
            let vals: Vec<f64> = vals
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|_| Error::Parse(format!("bad value {v:?} in {name}"))))
                .collect::<Result<_>>()?;
            if vals.len() != m.len() {
                return Err(Error::Parse(format!("{name} has {} values, expected {}", vals.len(), m.len())));
            }
            m.slice_mut(&mut self.data).copy_from_slice(&vals);
            seen += 1;
        }
        if seen != self.blocks.len() {
            return Err(Error::Parse(format!("checkpoint has {seen} blocks, model has {}", self.blocks.len())));
        }
        Ok(())
    }
}

pub struct ParamBuilder<'r, R: Rng> {
    params: Params,
    rng: &'r mut R,
}

impl<'r, R: Rng> ParamBuilder<'r, R> {
    pub fn new(rng: &'r mut R) -> Self {
        ParamBuilder { params: Params { data: Vec::new(), blocks: Vec::new() }, rng }
    }

    pub fn mat(&mut self, name: &str, rows: usize, cols: usize, init: Init) -> Mat {
        let m = Mat { off: self.params.data.len(), rows, cols };
        for _ in 0..rows * cols {
            let v = match init {
                Init::Uniform(a) => self.rng.random_range(-a..a),
                Init::Zero => 0.0,
            };
            self.params.data.push(v);
        }
        self.params.blocks.push((name.to_string(), m));
        m
    }

    pub fn gru(&mut self, name: &str, input: usize, hidden: usize, scale: f64) -> Gru {
        Gru {
            wi: self.mat(&format!("{name}.wi"), 3 * hidden, input, Init::Uniform(scale)),
            wh: self.mat(&format!("{name}.wh"), 3 * hidden, hidden, Init::Uniform(scale)),
            bi: self.mat(&format!("{name}.bi"), 3 * hidden, 1, Init::Uniform(scale)),
            bh: self.mat(&format!("{name}.bh"), 3 * hidden, 1, Init::Uniform(scale)),
            input,
            hidden,
        }
    }

    pub fn finish(self) -> Params {
        self.params
    }
}

/// Gated recurrent unit with separate input and hidden biases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gru {
    pub wi: Mat,
    pub wh: Mat,
    pub bi: Mat,
    pub bh: Mat,
    pub input: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    hn: Vec<f64>,
}

impl Gru {
    pub fn forward(&self, p: &[f64], x: &[f64], h: &[f64]) -> (Vec<f64>, GruCache) {
        let n_h = self.hidden;
        let mut gi = self.bi.slice(p).to_vec();
        self.wi.mv_add(p, &[x], &mut gi);
        let mut gh = self.bh.slice(p).to_vec();
        self.wh.mv_add(p, &[h], &mut gh);
        let r: Vec<f64> = (0..n_h).map(|i| sigmoid(gi[i] + gh[i])).collect();
        let z: Vec<f64> = (0..n_h).map(|i| sigmoid(gi[n_h + i] + gh[n_h + i])).collect();
        let hn = gh[2 * n_h..].to_vec();
        let n: Vec<f64> = (0..n_h).map(|i| (gi[2 * n_h + i] + r[i] * hn[i]).tanh()).collect();
        let out = (0..n_h).map(|i| (1.0 - z[i]) * n[i] + z[i] * h[i]).collect();
        (out, GruCache { x: x.to_vec(), h_prev: h.to_vec(), r, z, n, hn })
    }

    /// Accumulates parameter gradients into `g`; adds input and previous-state
    /// gradients into `dx` and `dh_prev`.
    pub fn backward(&self, p: &[f64], c: &GruCache, dh: &[f64], g: &mut [f64], dx: Option<&mut [f64]>, dh_prev: &mut [f64]) {
        let n_h = self.hidden;
        let mut d_gi = vec![0.0; 3 * n_h];
        let mut d_gh = vec![0.0; 3 * n_h];
        for i in 0..n_h {
            let (r, z, n, hn) = (c.r[i], c.z[i], c.n[i], c.hn[i]);
            let dn = dh[i] * (1.0 - z);
            let dz = dh[i] * (c.h_prev[i] - n);
            dh_prev[i] += dh[i] * z;
            let dan = dn * (1.0 - n * n);
            let dr = dan * hn;
            let daz = dz * z * (1.0 - z);
            let dar = dr * r * (1.0 - r);
            d_gi[i] = dar;
            d_gi[n_h + i] = daz;
            d_gi[2 * n_h + i] = dan;
            d_gh[i] = dar;
            d_gh[n_h + i] = daz;
            d_gh[2 * n_h + i] = dan * r;
        }
        axpy(1.0, &d_gi, self.bi.slice_mut(g));
        axpy(1.0, &d_gh, self.bh.slice_mut(g));
        self.wi.mv_back(p, &[&c.x], &d_gi, g, &mut [dx]);
        self.wh.mv_back(p, &[&c.h_prev], &d_gh, g, &mut [Some(dh_prev)]);
    }
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
    pub fn new(n: usize, lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
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

/// Rescales `g` to at most `max_norm` in L2; returns the norm before clipping.
pub fn clip_grad(g: &mut [f64], max_norm: f64) -> f64 {
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        g.iter_mut().for_each(|x| *x *= s);
    }
    norm
}

pub fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}
