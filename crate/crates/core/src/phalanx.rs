//! Forward pass of a gated sliding-window recurrence layer.
//!
//! Per head `h`: `a = sigmoid(W u)`, `q = Q u`, `k = sigmoid(K u)`, `v = V u`;
//! the mixer solves the recurrence with coefficients `a` on `k * v` under a
//! window, then `y_head = q * x + v` and `y = O y_head`. Q and K may be shared
//! across groups of consecutive heads.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SwrError};
use crate::numerics::SeededRng;
use crate::recurrence::{CoefficientSequence, InputSequence};
use crate::window::{window_solve, WindowSpec};

pub const DEFAULT_HEAD_DIM: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub d_model: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub block_size: usize,
    pub q_groups: usize,
    pub k_groups: usize,
}

impl LayerConfig {
    /// Ungrouped gates (one slice per head).
    pub fn new(d_model: usize, heads: usize, block_size: usize) -> Result<Self> {
        if heads == 0 || d_model % heads != 0 {
            return Err(SwrError::Shape(format!("{heads} heads do not divide D = {d_model}")));
        }
        Self {
            d_model,
            heads,
            head_dim: d_model / heads,
            block_size,
            q_groups: heads,
            k_groups: heads,
        }
        .validated()
    }

    pub fn with_groups(mut self, q_groups: usize, k_groups: usize) -> Result<Self> {
        self.q_groups = q_groups;
        self.k_groups = k_groups;
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.d_model == 0 || self.block_size == 0 {
            return Err(SwrError::Domain("model dim and block size must be positive".into()));
        }
        if self.heads * self.head_dim != self.d_model {
            return Err(SwrError::Shape(format!(
                "D = {} is not h * d = {} * {}",
                self.d_model, self.heads, self.head_dim
            )));
        }
        for (name, g) in [("q", self.q_groups), ("k", self.k_groups)] {
            if g == 0 || self.heads % g != 0 {
                return Err(SwrError::Shape(format!("{name} groups {g} do not divide {} heads", self.heads)));
            }
        }
        Ok(self)
    }

    fn q_slot(&self, head: usize) -> usize {
        head / (self.heads / self.q_groups)
    }

    fn k_slot(&self, head: usize) -> usize {
        head / (self.heads / self.k_groups)
    }
}

/// Row-major parameter tensors. Q and K have one `d x D` slice per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub config: LayerConfig,
    /// h x D
    pub w: Vec<f64>,
    /// q_groups x d x D
    pub q: Vec<f64>,
    /// k_groups x d x D
    pub k: Vec<f64>,
    /// h x d x D
    pub v: Vec<f64>,
    /// D x h x d
    pub o: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(cfg: LayerConfig) -> Self {
        let (dm, h, d) = (cfg.d_model, cfg.heads, cfg.head_dim);
        Self {
            config: cfg,
            w: vec![0.0; h * dm],
            q: vec![0.0; cfg.q_groups * d * dm],
            k: vec![0.0; cfg.k_groups * d * dm],
            v: vec![0.0; h * d * dm],
            o: vec![0.0; dm * h * d],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = self.config.validated()?;
        let expected = Self::zeros(cfg);
        for (name, got, want) in [
            ("W", self.w.len(), expected.w.len()),
            ("Q", self.q.len(), expected.q.len()),
            ("K", self.k.len(), expected.k.len()),
            ("V", self.v.len(), expected.v.len()),
            ("O", self.o.len(), expected.o.len()),
        ] {
            if got != want {
                return Err(SwrError::Shape(format!("{name} has {got} entries, expected {want}")));
            }
        }
        Ok(())
    }
}

/// Entries uniform on `(-1/sqrt(D), 1/sqrt(D))`, drawn in the order W, Q, K, V, O.
pub fn init_params(cfg: LayerConfig, rng: &mut SeededRng) -> Result<LayerParams> {
    let cfg = cfg.validated()?;
    let s = init_scale(cfg.d_model);
    let mut p = LayerParams::zeros(cfg);
    for t in [&mut p.w, &mut p.q, &mut p.k, &mut p.v, &mut p.o] {
        for x in t.iter_mut() {
            *x = rng.uniform(-s, s)?;
        }
    }
    Ok(p)
}

pub fn init_scale(d_model: usize) -> f64 {
    1.0 / (d_model as f64).sqrt()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Featurized sequence: `a` is n x h, the rest n x h x d.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub a: Vec<f64>,
    pub q: Vec<f64>,
    pub k: Vec<f64>,
    pub v: Vec<f64>,
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn check_input(u: &[f64], cfg: &LayerConfig) -> Result<usize> {
    if u.is_empty() || u.len() % cfg.d_model != 0 {
        return Err(SwrError::Shape(format!(
            "input of {} values is not n x {}",
            u.len(),
            cfg.d_model
        )));
    }
    Ok(u.len() / cfg.d_model)
}

/// Projections of an n x D input.
pub fn featurize(u: &[f64], params: &LayerParams) -> Result<Features> {
    params.validate()?;
    let cfg = params.config;
    let n = check_input(u, &cfg)?;
    let (dm, h, d) = (cfg.d_model, cfg.heads, cfg.head_dim);
    let mut f = Features {
        a: vec![0.0; n * h],
        q: vec![0.0; n * h * d],
        k: vec![0.0; n * h * d],
        v: vec![0.0; n * h * d],
    };
    let slice = |slot: usize, mu: usize| (slot * d + mu) * dm..(slot * d + mu + 1) * dm;
    for i in 0..n {
        let ui = &u[i * dm..(i + 1) * dm];
        for eta in 0..h {
            f.a[i * h + eta] = sigmoid(dot(&params.w[eta * dm..(eta + 1) * dm], ui));
            for mu in 0..d {
                let idx = (i * h + eta) * d + mu;
                f.q[idx] = dot(&params.q[slice(cfg.q_slot(eta), mu)], ui);
                f.k[idx] = sigmoid(dot(&params.k[slice(cfg.k_slot(eta), mu)], ui));
                f.v[idx] = dot(&params.v[slice(eta, mu)], ui);
            }
        }
    }
    Ok(f)
}

/// Head outputs `q * x + v` (n x h x d) before the output projection.
pub fn mix_heads(features: &Features, cfg: &LayerConfig, window: WindowSpec) -> Result<Vec<f64>> {
    let (h, d) = (cfg.heads, cfg.head_dim);
    let n = features.a.len() / h;
    let mut out = vec![0.0; n * h * d];
    for eta in 0..h {
        let a = CoefficientSequence::new((0..n).map(|i| features.a[i * h + eta]).collect())?;
        let mut gated = Vec::with_capacity(n * d);
        for i in 0..n {
            let base = (i * h + eta) * d;
            gated.extend((0..d).map(|mu| features.k[base + mu] * features.v[base + mu]));
        }
        let x = window_solve(&a, &InputSequence::from_flat(gated, d)?, window)?;
        for i in 0..n {
            let base = (i * h + eta) * d;
            for (mu, &xv) in x.row(i).iter().enumerate() {
                out[base + mu] = features.q[base + mu] * xv + features.v[base + mu];
            }
        }
    }
    Ok(out)
}

/// `y = O (q * x + v)` for an n x D input; returns n x D.
pub fn layer_forward(u: &[f64], params: &LayerParams, window: WindowSpec) -> Result<Vec<f64>> {
    let features = featurize(u, params)?;
    let cfg = params.config;
    let heads = mix_heads(&features, &cfg, window)?;
    Ok(project_out(&heads, params))
}

/// Contraction with O over (head, channel).
pub fn project_out(heads: &[f64], params: &LayerParams) -> Vec<f64> {
    let cfg = params.config;
    let hd = cfg.heads * cfg.head_dim;
    let n = heads.len() / hd;
    let mut y = vec![0.0; n * cfg.d_model];
    for i in 0..n {
        let yi = &heads[i * hd..(i + 1) * hd];
        for alpha in 0..cfg.d_model {
            y[i * cfg.d_model + alpha] = dot(&params.o[alpha * hd..(alpha + 1) * hd], yi);
        }
    }
    y
}
