use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Observation length of the default 21-segment network.
pub const OBS_DIM: usize = 42;

const LN_2PI: f64 = 1.8378770664093453;
/// Mean bias of a fresh policy: the midpoint of the headway range.
const INITIAL_MEAN: f64 = 3.75;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub input: usize,
    pub hidden: usize,
    pub actions: usize,
}

impl NetShape {
    pub fn new(input: usize, hidden: usize, actions: usize) -> Self {
        Self { input, hidden, actions }
    }

    /// `(rows, cols)` of each weight matrix followed by its bias: trunk 1,
    /// trunk 2, policy head (means then log-stds), value head.
    pub fn layers(&self) -> [(usize, usize); 4] {
        [(self.hidden, self.input), (self.hidden, self.hidden), (2 * self.actions, self.hidden), (1, self.hidden)]
    }

    pub fn num_params(&self) -> usize {
        self.layers().iter().map(|(r, c)| r * c + r).sum()
    }

    fn offsets(&self) -> [usize; 5] {
        let mut out = [0; 5];
        for (i, (r, c)) in self.layers().iter().enumerate() {
            out[i + 1] = out[i] + r * c + r;
        }
        out
    }
}

/// Dual-head network: a shared two-layer tanh trunk feeding a diagonal
/// Gaussian policy head and a scalar value head. All weights live in one
/// flat vector, layer by layer, each matrix row-major followed by its bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParameters {
    pub format: u32,
    pub shape: NetShape,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutput {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    pub value: f64,
}

/// Log-density of `x` under a diagonal Gaussian.
pub fn gaussian_log_prob(x: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    x.iter()
        .zip(mean)
        .zip(log_std)
        .map(|((x, m), ls)| {
            let z = (x - m) / ls.exp();
            -0.5 * z * z - ls - 0.5 * LN_2PI
        })
        .sum()
}

impl PolicyOutput {
    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| {
                let z: f64 = rng.sample(StandardNormal);
                m + ls.exp() * z
            })
            .collect()
    }

    pub fn log_prob(&self, x: &[f64]) -> f64 {
        gaussian_log_prob(x, &self.mean, &self.log_std)
    }
}

/// Activations kept for the backward pass of a batch.
pub(crate) struct BatchForward {
    x: Array2<f64>,
    h1: Array2<f64>,
    h2: Array2<f64>,
    /// `B x 2k`: means then log-stds.
    pub head: Array2<f64>,
    pub value: Array1<f64>,
}

impl PolicyParameters {
    pub const FORMAT: u32 = 1;

    pub fn zeros(shape: NetShape) -> Self {
        Self { format: Self::FORMAT, shape, weights: vec![0.0; shape.num_params()] }
    }

    /// Orthogonal trunk, near-zero policy head, mean bias at the middle of
    /// the headway range and log-std 0.
    pub fn init(shape: NetShape, seed: u64) -> Self {
        let mut rng = stream_rng(seed, Stream::Init);
        let mut p = Self::zeros(shape);
        let gains = [1.0, 1.0, 0.01, 1.0];
        for (layer, ((rows, cols), gain)) in shape.layers().iter().zip(gains).enumerate() {
            let w = orthogonal(*rows, *cols, gain, &mut rng);
            let (mut wv, _) = p.layer_mut(layer);
            wv.assign(&w);
        }
        let (_, mut b) = p.layer_mut(2);
        b.slice_mut(s![..shape.actions]).fill(INITIAL_MEAN);
        p
    }

    pub fn num_params(&self) -> usize {
        self.weights.len()
    }

    pub(crate) fn layer(&self, i: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let (rows, cols) = self.shape.layers()[i];
        let off = self.shape.offsets()[i];
        let w = ArrayView2::from_shape((rows, cols), &self.weights[off..off + rows * cols]).expect("layer shape");
        let b = ArrayView1::from(&self.weights[off + rows * cols..off + rows * cols + rows]);
        (w, b)
    }

    fn layer_mut(&mut self, i: usize) -> (ndarray::ArrayViewMut2<'_, f64>, ndarray::ArrayViewMut1<'_, f64>) {
        let (rows, cols) = self.shape.layers()[i];
        let off = self.shape.offsets()[i];
        let (w, rest) = self.weights[off..off + rows * cols + rows].split_at_mut(rows * cols);
        (ndarray::ArrayViewMut2::from_shape((rows, cols), w).expect("layer shape"), ndarray::ArrayViewMut1::from(rest))
    }

    fn check(&self) -> Result<()> {
        if self.weights.len() != self.shape.num_params() {
            return Err(Error::Dimension { expected: self.shape.num_params(), actual: self.weights.len() });
        }
        Ok(())
    }

    pub fn forward(&self, obs: &[f64]) -> Result<PolicyOutput> {
        if obs.len() != self.shape.input {
            return Err(Error::Dimension { expected: self.shape.input, actual: obs.len() });
        }
        let x = Array2::from_shape_vec((1, obs.len()), obs.to_vec()).expect("row");
        let f = self.forward_batch(x)?;
        let k = self.shape.actions;
        let head = f.head.row(0);
        Ok(PolicyOutput {
            mean: head.slice(s![..k]).to_vec(),
            log_std: head.slice(s![k..]).to_vec(),
            value: f.value[0],
        })
    }

    pub(crate) fn forward_batch(&self, x: Array2<f64>) -> Result<BatchForward> {
        self.check()?;
        if x.ncols() != self.shape.input {
            return Err(Error::Dimension { expected: self.shape.input, actual: x.ncols() });
        }
        let dense = |i: usize, input: &Array2<f64>| {
            let (w, b) = self.layer(i);
            input.dot(&w.t()) + b
        };
        let h1 = dense(0, &x).mapv_into(f64::tanh);
        let h2 = dense(1, &h1).mapv_into(f64::tanh);
        let head = dense(2, &h2);
        let value = dense(3, &h2).index_axis_move(Axis(1), 0);
        Ok(BatchForward { x, h1, h2, head, value })
    }

    /// Flat gradient given the loss derivatives with respect to the head
    /// outputs (`B x 2k`) and the values (`B`).
    pub(crate) fn backward(&self, f: &BatchForward, d_head: &Array2<f64>, d_value: &Array1<f64>) -> Vec<f64> {
        let mut grad = Self::zeros(self.shape);
        let d_value = d_value.view().insert_axis(Axis(1)).to_owned();

        let (w_head, _) = self.layer(2);
        let (w_value, _) = self.layer(3);
        let mut d_h2 = d_head.dot(&w_head) + d_value.dot(&w_value);
        d_h2.zip_mut_with(&f.h2, |d, h| *d *= 1.0 - h * h);
        let (w2, _) = self.layer(1);
        let mut d_h1 = d_h2.dot(&w2);
        d_h1.zip_mut_with(&f.h1, |d, h| *d *= 1.0 - h * h);

        for (i, (d_out, input)) in
            [(&d_h1, &f.x), (&d_h2, &f.h1), (d_head, &f.h2), (&d_value, &f.h2)].into_iter().enumerate()
        {
            let (mut gw, mut gb) = grad.layer_mut(i);
            gw.assign(&d_out.t().dot(input));
            gb.assign(&d_out.sum_axis(Axis(0)));
        }
        grad.weights
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if p.format != Self::FORMAT {
            return Err(Error::Config(format!("unsupported parameter format {}", p.format)));
        }
        p.check()?;
        if p.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("policy weights"));
        }
        Ok(p)
    }
}

/// `rows x cols` matrix with orthonormal rows (or columns, whichever are
/// fewer) scaled by `gain`, from Gram-Schmidt on a Gaussian draw.
fn orthogonal<R: Rng>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Array2<f64> {
    let (n, m) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut q = Array2::<f64>::zeros((n, m));
    for i in 0..n {
        let mut v: Array1<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for j in 0..i {
            let qj = q.row(j);
            let proj = v.dot(&qj);
            v.scaled_add(-proj, &qj);
        }
        let norm = v.dot(&v).sqrt();
        q.row_mut(i).assign(&(v / norm));
    }
    let q = q * gain;
    if rows <= cols {
        q
    } else {
        q.reversed_axes().as_standard_layout().into_owned()
    }
}
