//! First-order optimizers: plain gradient steps, SGD with momentum, Adam.
//!
//! One `Optimizer` tracks moment buffers for a fixed set of tensors ("slots")
//! so the same code drives both classifier training (one slot per weight
//! tensor) and perturbation training (one slot per perturbation row). Slots
//! keep their own step counters; a slot that is skipped for some minibatches
//! simply advances more slowly, which is what deterministic sparse updates
//! need.

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    /// `x ∓= lr·g`, no state.
    Plain,
    /// Momentum buffer: `m = momentum·m + g`, `x ∓= lr·m`.
    Sgd { momentum: f64 },
    /// Bias-corrected Adam.
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl OptimizerKind {
    pub fn adam_default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            OptimizerKind::Plain => "plain",
            OptimizerKind::Sgd { .. } => "sgd",
            OptimizerKind::Adam { .. } => "adam",
        }
    }
}

#[derive(Debug, Clone)]
struct Slot {
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    slots: Vec<Slot>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, shapes: &[usize]) -> Self {
        let slots = shapes
            .iter()
            .map(|&len| {
                let (m, v) = match kind {
                    OptimizerKind::Plain => (Vec::new(), Vec::new()),
                    OptimizerKind::Sgd { .. } => (vec![0.0; len], Vec::new()),
                    OptimizerKind::Adam { .. } => (vec![0.0; len], vec![0.0; len]),
                };
                Slot { step: 0, m, v }
            })
            .collect();
        Optimizer {
            kind,
            learning_rate,
            slots,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// Applies one update to `tensor` using `grad`. With `ascent` the step
    /// direction is negated, turning the minimizer into a maximizer.
    pub fn step(&mut self, slot: usize, tensor: &mut [f64], grad: &[f64], ascent: bool) {
        assert_eq!(tensor.len(), grad.len(), "gradient shape mismatch");
        let sign = if ascent { 1.0 } else { -1.0 };
        let lr = self.learning_rate;
        let state = &mut self.slots[slot];
        match self.kind {
            OptimizerKind::Plain => {
                for (x, &g) in tensor.iter_mut().zip(grad) {
                    *x += sign * lr * g;
                }
            }
            OptimizerKind::Sgd { momentum } => {
                assert_eq!(state.m.len(), tensor.len(), "slot shape mismatch");
                for ((x, &g), m) in tensor.iter_mut().zip(grad).zip(state.m.iter_mut()) {
                    *m = momentum * *m + g;
                    *x += sign * lr * *m;
                }
            }
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                assert_eq!(state.m.len(), tensor.len(), "slot shape mismatch");
                state.step += 1;
                let bc1 = 1.0 - beta1.powi(state.step as i32);
                let bc2 = 1.0 - beta2.powi(state.step as i32);
                for (i, (x, &g)) in tensor.iter_mut().zip(grad).enumerate() {
                    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
                    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
                    let m_hat = state.m[i] / bc1;
                    let v_hat = state.v[i] / bc2;
                    *x += sign * lr * m_hat / (v_hat.sqrt() + epsilon);
                }
            }
        }
    }
}
