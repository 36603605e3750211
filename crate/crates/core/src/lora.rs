//! Low-rank adaptation of a single linear map.
//!
//! A [`LoraLinear`] holds a frozen base matrix `W` (`d_out × d_in`) and two
//! trainable factors `A` (`d_out × r`) and `B` (`r × d_in`). The output is
//! `W·x + s·A·(B·x)` with adapter scale `s` (1 by default).

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Half-width of the uniform range `A` is drawn from at initialization.
pub const DEFAULT_INIT_RANGE: f64 = 0.01;

/// Gradients of a scalar loss with respect to the trainable factors.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraGrad {
    pub da: Array2<f64>,
    pub db: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoraLinear {
    w: Array2<f64>,
    a: Array2<f64>,
    b: Array2<f64>,
    scale: f64,
}

fn check_finite(name: &str, m: &Array2<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} has non-finite entries")))
    }
}

impl LoraLinear {
    /// Builds a layer from explicit matrices, checking that shapes conform
    /// and that `1 <= r <= min(d_out, d_in)`.
    pub fn new(w: Array2<f64>, a: Array2<f64>, b: Array2<f64>) -> Result<Self> {
        let (d_out, d_in) = w.dim();
        let r = a.ncols();
        if a.nrows() != d_out {
            return Err(Error::invalid(format!("A has {} rows, W has {d_out}", a.nrows())));
        }
        if b.dim() != (r, d_in) {
            return Err(Error::invalid(format!(
                "B is {}x{}, expected {r}x{d_in}",
                b.nrows(),
                b.ncols()
            )));
        }
        if r == 0 || r > d_out.min(d_in) {
            return Err(Error::invalid(format!(
                "rank {r} outside 1..={}",
                d_out.min(d_in)
            )));
        }
        check_finite("W", &w)?;
        check_finite("A", &a)?;
        check_finite("B", &b)?;
        Ok(LoraLinear {
            w,
            a,
            b,
            scale: 1.0,
        })
    }

    /// Wraps a frozen `w` with rank-`r` factors: `A` uniform in
    /// `±DEFAULT_INIT_RANGE`, `B` zero, so the layer starts out equal to `W`.
    pub fn init(w: Array2<f64>, r: usize, seed: u64) -> Result<Self> {
        let (d_out, d_in) = w.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_simple_fn((d_out, r), || {
            rng.gen_range(-DEFAULT_INIT_RANGE..=DEFAULT_INIT_RANGE)
        });
        Self::new(w, a, Array2::zeros((r, d_in)))
    }

    /// Sets the adapter-path multiplier.
    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !scale.is_finite() {
            return Err(Error::invalid("adapter scale must be finite"));
        }
        self.scale = scale;
        Ok(self)
    }

    pub fn w(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn a(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn b(&self) -> &Array2<f64> {
        &self.b
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn d_in(&self) -> usize {
        self.w.ncols()
    }

    pub fn d_out(&self) -> usize {
        self.w.nrows()
    }

    /// Number of trainable entries, `r·(d_in + d_out)`.
    pub fn trainable_params(&self) -> usize {
        self.a.len() + self.b.len()
    }

    fn check_input(&self, x: ArrayView1<f64>) -> Result<()> {
        if x.len() != self.d_in() {
            return Err(Error::invalid(format!(
                "input has length {}, layer expects {}",
                x.len(),
                self.d_in()
            )));
        }
        Ok(())
    }

    /// `W·x + s·A·(B·x)`.
    pub fn forward(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_input(x)?;
        let bx = self.b.dot(&x);
        let mut out = self.w.dot(&x);
        out.scaled_add(self.scale, &self.a.dot(&bx));
        Ok(out)
    }

    /// Gradients of a loss whose gradient with respect to the output is
    /// `upstream`. `W` is frozen and gets none.
    pub fn grad(&self, x: ArrayView1<f64>, upstream: ArrayView1<f64>) -> Result<LoraGrad> {
        self.check_input(x)?;
        if upstream.len() != self.d_out() {
            return Err(Error::invalid(format!(
                "upstream has length {}, layer output is {}",
                upstream.len(),
                self.d_out()
            )));
        }
        let bx = self.b.dot(&x);
        let at_up = self.a.t().dot(&upstream);
        Ok(LoraGrad {
            da: outer(upstream, bx.view()) * self.scale,
            db: outer(at_up.view(), x) * self.scale,
        })
    }

    /// Plain gradient-descent step on `A` and `B`.
    pub fn apply(&mut self, grad: &LoraGrad, lr: f64) -> Result<()> {
        if grad.da.dim() != self.a.dim() || grad.db.dim() != self.b.dim() {
            return Err(Error::invalid("gradient shapes do not match the layer"));
        }
        if !lr.is_finite() {
            return Err(Error::invalid("learning rate must be finite"));
        }
        self.a.scaled_add(-lr, &grad.da);
        self.b.scaled_add(-lr, &grad.db);
        Ok(())
    }

    /// One descent step on `0.5·|forward(x) - target|²`; returns the loss
    /// before the step.
    pub fn train_step(&mut self, x: ArrayView1<f64>, target: ArrayView1<f64>, lr: f64) -> Result<f64> {
        let y = self.forward(x)?;
        if target.len() != y.len() {
            return Err(Error::invalid("target length does not match layer output"));
        }
        let residual = &y - &target;
        let loss = 0.5 * residual.dot(&residual);
        let g = self.grad(x, residual.view())?;
        self.apply(&g, lr)?;
        Ok(loss)
    }

    /// `W + s·A·B`, the dense matrix equivalent to this layer.
    pub fn merge(&self) -> Array2<f64> {
        let mut merged = self.w.clone();
        merged.scaled_add(self.scale, &self.a.dot(&self.b));
        merged
    }
}

fn outer(u: ArrayView1<f64>, v: ArrayView1<f64>) -> Array2<f64> {
    Array2::from_shape_fn((u.len(), v.len()), |(i, j)| u[i] * v[j])
}

/// Trainable-parameter accounting for adapting a set of matrices at rank `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCount {
    pub trainable: u64,
    pub rank: usize,
    /// `Σ (d_in + d_out)` over the adapted matrices.
    pub dim_sum: u64,
}

/// `r · Σ (d_in + d_out)` over `shapes` given as `(d_out, d_in)`.
pub fn param_count(shapes: &[(usize, usize)], r: usize) -> Result<ParamCount> {
    if r == 0 {
        return Err(Error::invalid("rank must be at least 1"));
    }
    if shapes.is_empty() {
        return Err(Error::invalid("no matrices to adapt"));
    }
    let dim_sum: u64 = shapes.iter().map(|&(o, i)| (o + i) as u64).sum();
    Ok(ParamCount {
        trainable: dim_sum * r as u64,
        rank: r,
        dim_sum,
    })
}

/// Trainable parameters as a percentage of the model total.
pub fn trainable_pct(trainable: f64, total: f64) -> Result<f64> {
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::invalid("total parameter count must be positive"));
    }
    if !trainable.is_finite() || trainable < 0.0 {
        return Err(Error::invalid("trainable parameter count must be non-negative"));
    }
    Ok(100.0 * trainable / total)
}

/// Outcome of [`demo_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct DemoFit {
    /// Mean loss over the sample set before each step, then after the last.
    pub losses: Vec<f64>,
    pub trainable: usize,
    /// Frozen plus trainable parameters.
    pub total: usize,
    /// Maximum absolute change of `W` over training (always 0).
    pub w_drift: f64,
}

/// Fits a rank-`r` adapter on a random frozen `W` so that the layer matches
/// a target map `W + Δ` with `Δ` of rank `r`, using 32 random inputs.
pub fn demo_fit(d_out: usize, d_in: usize, r: usize, steps: usize, lr: f64, seed: u64) -> Result<DemoFit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = |shape: (usize, usize), scale: f64| {
        Array2::from_shape_simple_fn(shape, || scale * rng.gen_range(-1.0..1.0))
    };
    let w = uniform((d_out, d_in), 1.0);
    let delta = uniform((d_out, r), 0.5).dot(&uniform((r, d_in), 0.5));
    let inputs = uniform((32, d_in), 1.0);
    let target_map = &w + &delta;
    let mut layer = LoraLinear::init(w.clone(), r, seed)?;
    // start B away from zero so both factors receive gradient
    layer.b = uniform((r, d_in), DEFAULT_INIT_RANGE);

    let mean_loss = |layer: &LoraLinear| -> Result<f64> {
        let mut total = 0.0;
        for x in inputs.rows() {
            let residual = layer.forward(x)? - target_map.dot(&x);
            total += 0.5 * residual.dot(&residual);
        }
        Ok(total / inputs.nrows() as f64)
    };
    let mut losses = Vec::with_capacity(steps + 1);
    for step in 0..steps {
        losses.push(mean_loss(&layer)?);
        let x = inputs.row(step % inputs.nrows());
        let target = target_map.dot(&x);
        layer.train_step(x, target.view(), lr)?;
    }
    losses.push(mean_loss(&layer)?);
    let w_drift = (layer.w() - &w).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(DemoFit {
        losses,
        trainable: layer.trainable_params(),
        total: layer.trainable_params() + d_out * d_in,
        w_drift,
    })
}
