//! One-hidden-layer feed-forward network with sigmoid units.
//!
//! Weights live in two flat row-major `f32` arrays. Row `j` of `w_ih` holds
//! the `input_dim` incoming weights of hidden neuron `j` followed by its bias,
//! so `w_ih.len() == hidden_dim * (input_dim + 1)`; `w_ho` is laid out the
//! same way for the output neuron. Training is online gradient descent on
//! `E = 0.5 * (target - output)^2` with no momentum.

mod checkpoint;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::CHECKPOINT_VERSION;

use crate::backend::{
    run_layer_backward, run_layer_backward_update, run_layer_deltas, run_layer_forward,
    run_layer_update, Backend, Downstream, LayerJob,
};
use crate::dataset::Label;
use crate::{Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 0.1;
pub const DEFAULT_INIT_RANGE: f64 = 0.5;

/// Logistic sigmoid `1 / (1 + e^-x)`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub learning_rate: f64,
    /// Always 0; stored so checkpoints state the training regime explicitly.
    pub momentum: f64,
    pub seed: u64,
    pub init_range: f64,
}

impl NetworkConfig {
    /// Defaults: `hidden_dim = input_dim`, learning rate 0.1, init range 0.5.
    pub fn new(input_dim: usize) -> NetworkConfig {
        NetworkConfig {
            input_dim,
            hidden_dim: input_dim,
            output_dim: 1,
            learning_rate: DEFAULT_LEARNING_RATE,
            momentum: 0.0,
            seed: 0,
            init_range: DEFAULT_INIT_RANGE,
        }
    }

    pub fn with_hidden_dim(mut self, hidden_dim: usize) -> Self {
        self.hidden_dim = hidden_dim;
        self
    }

    pub fn with_learning_rate(mut self, learning_rate: f64) -> Self {
        self.learning_rate = learning_rate;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_init_range(mut self, init_range: f64) -> Self {
        self.init_range = init_range;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Argument("input_dim must be at least 1".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Argument("hidden_dim must be at least 1".into()));
        }
        if self.output_dim != 1 {
            return Err(Error::Argument(format!(
                "output_dim must be 1, got {}",
                self.output_dim
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Argument(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.momentum != 0.0 {
            return Err(Error::Argument(format!(
                "momentum is not supported (must be 0), got {}",
                self.momentum
            )));
        }
        if !(self.init_range.is_finite() && self.init_range >= 0.0) {
            return Err(Error::Argument(format!(
                "init_range must be non-negative, got {}",
                self.init_range
            )));
        }
        Ok(())
    }

    pub fn w_ih_len(&self) -> usize {
        self.hidden_dim * (self.input_dim + 1)
    }

    pub fn w_ho_len(&self) -> usize {
        self.output_dim * (self.hidden_dim + 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Activations {
    pub hidden: Vec<f32>,
    pub output: Vec<f32>,
}

/// Loss gradients with respect to every weight, laid out like the weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w_ih: Vec<f64>,
    pub w_ho: Vec<f64>,
    pub loss: f64,
}

/// Reusable per-instance buffers for [`Network::step`].
#[derive(Clone, Debug)]
pub struct StepBuffers {
    hidden: Vec<f32>,
    output: Vec<f32>,
    delta_hidden: Vec<f64>,
    delta_output: Vec<f64>,
}

impl StepBuffers {
    pub fn new(config: &NetworkConfig) -> StepBuffers {
        StepBuffers {
            hidden: vec![0.0; config.hidden_dim],
            output: vec![0.0; config.output_dim],
            delta_hidden: vec![0.0; config.hidden_dim],
            delta_output: vec![0.0; config.output_dim],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    w_ih: Vec<f32>,
    w_ho: Vec<f32>,
}

impl Network {
    /// Draw every weight uniformly from `[-init_range, init_range]` using a
    /// ChaCha8 stream seeded with `config.seed`: `w_ih` first, then `w_ho`.
    pub fn init(config: NetworkConfig) -> Result<Network> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let r = config.init_range as f32;
        let mut draw = |n: usize| -> Vec<f32> {
            (0..n)
                .map(|_| if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 })
                .collect()
        };
        let w_ih = draw(config.w_ih_len());
        let w_ho = draw(config.w_ho_len());
        Ok(Network { config, w_ih, w_ho })
    }

    pub fn from_weights(config: NetworkConfig, w_ih: Vec<f32>, w_ho: Vec<f32>) -> Result<Network> {
        config.validate()?;
        if w_ih.len() != config.w_ih_len() {
            return Err(Error::shape("w_ih", config.w_ih_len(), w_ih.len()));
        }
        if w_ho.len() != config.w_ho_len() {
            return Err(Error::shape("w_ho", config.w_ho_len(), w_ho.len()));
        }
        if w_ih.iter().chain(&w_ho).any(|w| !w.is_finite()) {
            return Err(Error::Numeric("weights must be finite".into()));
        }
        Ok(Network { config, w_ih, w_ho })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn w_ih(&self) -> &[f32] {
        &self.w_ih
    }

    pub fn w_ho(&self) -> &[f32] {
        &self.w_ho
    }

    pub fn weights_finite(&self) -> bool {
        self.w_ih.iter().chain(&self.w_ho).all(|w| w.is_finite())
    }

    fn check_instance(&self, instance: &[f32]) -> Result<()> {
        if instance.len() != self.config.input_dim {
            return Err(Error::shape("instance", self.config.input_dim, instance.len()));
        }
        Ok(())
    }

    fn forward_into(
        &self,
        backend: &Backend,
        instance: &[f32],
        hidden: &mut [f32],
        output: &mut [f32],
    ) -> Result<()> {
        self.check_instance(instance)?;
        let h = self.config.hidden_dim;
        run_layer_forward(backend, LayerJob::new(&self.w_ih, instance, h)?, hidden)?;
        // Returning from the hidden pass is the barrier: every hidden slot is
        // written before the output layer reads any of them.
        run_layer_forward(backend, LayerJob::new(&self.w_ho, hidden, self.config.output_dim)?, output)
    }

    pub fn forward(&self, instance: &[f32]) -> Result<Activations> {
        self.forward_with(&Backend::sequential(), instance)
    }

    pub fn forward_with(&self, backend: &Backend, instance: &[f32]) -> Result<Activations> {
        let mut act = Activations {
            hidden: vec![0.0; self.config.hidden_dim],
            output: vec![0.0; self.config.output_dim],
        };
        self.forward_into(backend, instance, &mut act.hidden, &mut act.output)?;
        Ok(act)
    }

    /// `Poor` iff the output is at least 0.5.
    pub fn predict(&self, instance: &[f32]) -> Result<Label> {
        Ok(Label::from_output(self.forward(instance)?.output[0]))
    }

    /// Analytic gradient of the squared error for one instance.
    pub fn gradients(&self, instance: &[f32], target: f32) -> Result<Gradients> {
        self.gradients_with(&Backend::sequential(), instance, target)
    }

    pub fn gradients_with(
        &self,
        backend: &Backend,
        instance: &[f32],
        target: f32,
    ) -> Result<Gradients> {
        check_target(target)?;
        let act = self.forward_with(backend, instance)?;
        let out = act.output[0];
        let loss = 0.5 * (f64::from(target) - f64::from(out)).powi(2);
        let targets = [target];
        let mut delta_out = vec![0.0; self.config.output_dim];
        let mut grad_ho = vec![0.0; self.w_ho.len()];
        let out_job = LayerJob::new(&self.w_ho, &act.hidden, self.config.output_dim)?;
        run_layer_backward(
            backend,
            out_job,
            &act.output,
            Downstream::Loss { targets: &targets },
            &mut delta_out,
            &mut grad_ho,
        )?;
        let mut delta_hidden = vec![0.0; self.config.hidden_dim];
        let mut grad_ih = vec![0.0; self.w_ih.len()];
        let hidden_job = LayerJob::new(&self.w_ih, instance, self.config.hidden_dim)?;
        run_layer_backward(
            backend,
            hidden_job,
            &act.hidden,
            Downstream::Layer {
                weights: &self.w_ho,
                deltas: &delta_out,
            },
            &mut delta_hidden,
            &mut grad_ih,
        )?;
        Ok(Gradients {
            w_ih: grad_ih,
            w_ho: grad_ho,
            loss,
        })
    }

    /// One gradient-descent step on a single instance using the sequential
    /// backend. Returns the squared error measured before the update.
    pub fn backprop_update(&mut self, instance: &[f32], target: f32, lr: f64) -> Result<f64> {
        let mut buffers = StepBuffers::new(&self.config);
        self.step(&Backend::sequential(), &mut buffers, instance, target, lr)
    }

    /// One online update: forward, output delta, hidden deltas from the old
    /// output weights (fused with the hidden-row update), then the output-row
    /// update. Returns the pre-update loss `0.5 * (target - output)^2`.
    pub fn step(
        &mut self,
        backend: &Backend,
        buffers: &mut StepBuffers,
        instance: &[f32],
        target: f32,
        lr: f64,
    ) -> Result<f64> {
        check_target(target)?;
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(Error::Argument(format!("learning rate must be >= 0, got {lr}")));
        }
        let StepBuffers {
            hidden,
            output,
            delta_hidden,
            delta_output,
        } = buffers;
        self.forward_into(backend, instance, hidden, output)?;

        let out = output[0];
        let loss = 0.5 * (f64::from(target) - f64::from(out)).powi(2);
        let targets = [target];
        run_layer_deltas(backend, output, Downstream::Loss { targets: &targets }, delta_output)?;
        if !loss.is_finite() || delta_output.iter().any(|d| !d.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite output {out} (loss {loss}) during backpropagation"
            )));
        }

        run_layer_backward_update(
            backend,
            &mut self.w_ih,
            instance,
            hidden,
            Downstream::Layer {
                weights: &self.w_ho,
                deltas: delta_output,
            },
            lr,
            delta_hidden,
        )?;
        run_layer_update(backend, &mut self.w_ho, hidden, delta_output, lr)?;
        Ok(loss)
    }
}

fn check_target(target: f32) -> Result<()> {
    if target == 0.0 || target == 1.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("target must be 0 or 1, got {target}")))
    }
}
