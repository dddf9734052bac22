use ndarray::{Array2, Zip};

use super::{GcnParams, Gradients};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// First/second moment estimates for both weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m0: Array2<f64>,
    v0: Array2<f64>,
    m1: Array2<f64>,
    v1: Array2<f64>,
    t: u32,
}

impl AdamState {
    pub fn new(params: &GcnParams) -> Self {
        AdamState {
            m0: Array2::zeros(params.w0.dim()),
            v0: Array2::zeros(params.w0.dim()),
            m1: Array2::zeros(params.w1.dim()),
            v1: Array2::zeros(params.w1.dim()),
            t: 0,
        }
    }

    pub fn steps(&self) -> u32 {
        self.t
    }

    /// One bias-corrected Adam update. Weight decay is added to the gradient
    /// (L2 style) before the moment updates.
    pub fn step(&mut self, params: &mut GcnParams, grads: &Gradients, lr: f64, weight_decay: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t as i32);
        let c2 = 1.0 - BETA2.powi(self.t as i32);
        update(&mut params.w0, &grads.w0, &mut self.m0, &mut self.v0, lr, weight_decay, c1, c2);
        update(&mut params.w1, &grads.w1, &mut self.m1, &mut self.v1, lr, weight_decay, c1, c2);
    }
}

#[allow(clippy::too_many_arguments)]
fn update(
    w: &mut Array2<f64>,
    g: &Array2<f64>,
    m: &mut Array2<f64>,
    v: &mut Array2<f64>,
    lr: f64,
    weight_decay: f64,
    c1: f64,
    c2: f64,
) {
    Zip::from(w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
        let g = g + weight_decay * *w;
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
    });
}
