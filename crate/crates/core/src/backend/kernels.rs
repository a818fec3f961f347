use std::marker::PhantomData;

use super::Backend;
use crate::network::sigmoid;
use crate::{Error, Result};

/// Largest `f32` below 1.
const ACTIVATION_MAX: f32 = 1.0 - f32::EPSILON / 2.0;

/// A read-only view of one layer: `n_neurons` weight rows of
/// `n_inputs + 1` values each (bias last) and the layer's input vector.
#[derive(Clone, Copy, Debug)]
pub struct LayerJob<'a> {
    weights: &'a [f32],
    inputs: &'a [f32],
    n_neurons: usize,
}

impl<'a> LayerJob<'a> {
    pub fn new(weights: &'a [f32], inputs: &'a [f32], n_neurons: usize) -> Result<LayerJob<'a>> {
        let expected = n_neurons * (inputs.len() + 1);
        if weights.len() != expected {
            return Err(Error::shape("layer weights", expected, weights.len()));
        }
        Ok(LayerJob {
            weights,
            inputs,
            n_neurons,
        })
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn inputs(&self) -> &'a [f32] {
        self.inputs
    }

    pub fn row(&self, j: usize) -> &'a [f32] {
        let width = self.inputs.len() + 1;
        &self.weights[j * width..(j + 1) * width]
    }
}

/// Where a layer's error signal comes from during the backward pass.
#[derive(Clone, Copy, Debug)]
pub enum Downstream<'a> {
    /// Output layer under squared error: `dE/da_j = a_j - target_j`.
    Loss { targets: &'a [f32] },
    /// Hidden layer: the next layer's weights (row-major, `deltas.len()` rows
    /// of `n + 1`) and that layer's deltas.
    Layer { weights: &'a [f32], deltas: &'a [f64] },
}

impl Downstream<'_> {
    fn check(&self, n: usize) -> Result<()> {
        match *self {
            Downstream::Loss { targets } if targets.len() != n => {
                Err(Error::shape("targets", n, targets.len()))
            }
            Downstream::Layer { weights, deltas } if weights.len() != deltas.len() * (n + 1) => {
                Err(Error::shape(
                    "downstream weights",
                    deltas.len() * (n + 1),
                    weights.len(),
                ))
            }
            _ => Ok(()),
        }
    }
}

/// `sum_i w_i * x_i` accumulated left to right in `f64`, then the bias.
/// `row` holds `inputs.len()` weights followed by the bias.
#[inline]
pub fn preactivation(row: &[f32], inputs: &[f32]) -> f64 {
    let (weights, bias) = row.split_at(inputs.len());
    let mut acc = 0.0f64;
    for (&w, &x) in weights.iter().zip(inputs) {
        acc += f64::from(w) * f64::from(x);
    }
    acc + f64::from(bias[0])
}

/// Sigmoid stored at `f32` width, kept strictly inside (0, 1).
#[inline]
pub fn activate(z: f64) -> f32 {
    (sigmoid(z) as f32).clamp(f32::MIN_POSITIVE, ACTIVATION_MAX)
}

#[inline]
fn neuron_delta(j: usize, activation: f32, n: usize, downstream: &Downstream<'_>) -> f64 {
    let a = f64::from(activation);
    let upstream = match *downstream {
        Downstream::Loss { targets } => a - f64::from(targets[j]),
        Downstream::Layer { weights, deltas } => {
            let stride = n + 1;
            let mut acc = 0.0f64;
            for (k, &d) in deltas.iter().enumerate() {
                acc += f64::from(weights[k * stride + j]) * d;
            }
            acc
        }
    };
    upstream * a * (1.0 - a)
}

#[inline]
fn update_row(row: &mut [f32], inputs: &[f32], delta: f64, lr: f64) {
    let (weights, bias) = row.split_at_mut(inputs.len());
    for (w, &x) in weights.iter_mut().zip(inputs) {
        let grad = delta * f64::from(x);
        *w = (f64::from(*w) - lr * grad) as f32;
    }
    bias[0] = (f64::from(bias[0]) - lr * delta) as f32;
}

/// Mutable slice shared across kernel invocations. Each invocation must touch
/// a distinct index or row.
struct SharedMut<'a, T> {
    ptr: *mut T,
    len: usize,
    _borrow: PhantomData<&'a mut [T]>,
}

// SAFETY: kernels write disjoint elements (one neuron per index), which the
// backends guarantee by running every index exactly once per pass.
unsafe impl<T: Send> Sync for SharedMut<'_, T> {}

impl<'a, T> SharedMut<'a, T> {
    fn new(slice: &'a mut [T]) -> Self {
        SharedMut {
            ptr: slice.as_mut_ptr(),
            len: slice.len(),
            _borrow: PhantomData,
        }
    }

    /// # Safety
    /// No other live reference may overlap `[j * width, (j + 1) * width)`.
    #[allow(clippy::mut_from_ref)]
    unsafe fn chunk(&self, j: usize, width: usize) -> &mut [T] {
        assert!((j + 1) * width <= self.len);
        std::slice::from_raw_parts_mut(self.ptr.add(j * width), width)
    }
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::shape(what, expected, actual))
    }
}

/// `outputs[j] = sigmoid(row_j . inputs + bias_j)` for every neuron.
pub fn run_layer_forward(backend: &Backend, job: LayerJob<'_>, outputs: &mut [f32]) -> Result<()> {
    check_len("layer outputs", job.n_neurons, outputs.len())?;
    let out = SharedMut::new(outputs);
    backend.for_each_neuron(job.n_neurons, &|j| {
        let value = activate(preactivation(job.row(j), job.inputs));
        // SAFETY: slot j belongs to this invocation alone.
        unsafe { out.chunk(j, 1)[0] = value };
    });
    Ok(())
}

/// Deltas `dE/dz_j` for a layer whose activations are known.
pub fn run_layer_deltas(
    backend: &Backend,
    activations: &[f32],
    downstream: Downstream<'_>,
    deltas: &mut [f64],
) -> Result<()> {
    let n = activations.len();
    check_len("layer deltas", n, deltas.len())?;
    downstream.check(n)?;
    let out = SharedMut::new(deltas);
    backend.for_each_neuron(n, &|j| {
        let d = neuron_delta(j, activations[j], n, &downstream);
        // SAFETY: slot j belongs to this invocation alone.
        unsafe { out.chunk(j, 1)[0] = d };
    });
    Ok(())
}

/// Deltas plus the full gradient row of every neuron
/// (`dE/dw_ji = delta_j * x_i`, bias gradient `delta_j`).
pub fn run_layer_backward(
    backend: &Backend,
    job: LayerJob<'_>,
    activations: &[f32],
    downstream: Downstream<'_>,
    deltas: &mut [f64],
    gradients: &mut [f64],
) -> Result<()> {
    let n = job.n_neurons;
    check_len("layer activations", n, activations.len())?;
    check_len("layer deltas", n, deltas.len())?;
    check_len("layer gradients", n * (job.n_inputs() + 1), gradients.len())?;
    downstream.check(n)?;
    let width = job.n_inputs() + 1;
    let delta_out = SharedMut::new(deltas);
    let grad_out = SharedMut::new(gradients);
    backend.for_each_neuron(n, &|j| {
        let d = neuron_delta(j, activations[j], n, &downstream);
        // SAFETY: delta slot j and gradient row j belong to this invocation.
        let (slot, row) = unsafe { (delta_out.chunk(j, 1), grad_out.chunk(j, width)) };
        slot[0] = d;
        let (grads, bias) = row.split_at_mut(job.n_inputs());
        for (g, &x) in grads.iter_mut().zip(job.inputs) {
            *g = d * f64::from(x);
        }
        bias[0] = d;
    });
    Ok(())
}

/// Apply `w_ji -= lr * delta_j * x_i` (and the bias) row by row.
pub fn run_layer_update(
    backend: &Backend,
    weights: &mut [f32],
    inputs: &[f32],
    deltas: &[f64],
    lr: f64,
) -> Result<()> {
    let width = inputs.len() + 1;
    check_len("layer weights", deltas.len() * width, weights.len())?;
    let rows = SharedMut::new(weights);
    backend.for_each_neuron(deltas.len(), &|j| {
        // SAFETY: weight row j belongs to this invocation alone.
        update_row(unsafe { rows.chunk(j, width) }, inputs, deltas[j], lr);
    });
    Ok(())
}

/// Backward pass fused with the weight update: each neuron computes its delta
/// and immediately rewrites its own weight row. `downstream` must not alias
/// `weights`.
pub fn run_layer_backward_update(
    backend: &Backend,
    weights: &mut [f32],
    inputs: &[f32],
    activations: &[f32],
    downstream: Downstream<'_>,
    lr: f64,
    deltas: &mut [f64],
) -> Result<()> {
    let n = activations.len();
    let width = inputs.len() + 1;
    check_len("layer weights", n * width, weights.len())?;
    check_len("layer deltas", n, deltas.len())?;
    downstream.check(n)?;
    let rows = SharedMut::new(weights);
    let delta_out = SharedMut::new(deltas);
    backend.for_each_neuron(n, &|j| {
        let d = neuron_delta(j, activations[j], n, &downstream);
        // SAFETY: delta slot j and weight row j belong to this invocation.
        unsafe {
            delta_out.chunk(j, 1)[0] = d;
            update_row(rows.chunk(j, width), inputs, d, lr);
        }
    });
    Ok(())
}
