//! The attacked text classifier: embedding lookup with an optional additive
//! perturbation, mean pooling over non-pad positions, a two-layer tanh MLP,
//! and softmax cross-entropy. Gradients are derived by hand for both the
//! parameters and the perturbation.

use crate::error::{Error, Result};
use crate::hash::Fnv1a;
use crate::linalg::Matrix;
use crate::optim::{Optimizer, OptimizerKind};
use crate::perturb::{Perturbation, PerturbationData};
use crate::rng::seeded;
use crate::text::{LabeledExample, PAD_ID};

use rand::seq::SliceRandom;
use rand::Rng;

/// All trainable weights of the classifier. Frozen (passed by shared
/// reference) during every attack phase.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    /// |V| x d token embeddings.
    pub embeddings: Matrix,
    /// d x h first layer.
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// h x c output layer.
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl ClassifierParams {
    pub fn vocab_size(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn embed_dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.b2.len()
    }

    /// All tensors drawn uniformly from [-0.1, 0.1] under `seed`.
    pub fn init(
        vocab_size: usize,
        embed_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
        seed: u64,
    ) -> ClassifierParams {
        let mut rng = seeded(seed);
        let mut draw =
            |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-0.1..=0.1)).collect() };
        ClassifierParams {
            embeddings: Matrix::from_vec(vocab_size, embed_dim, draw(vocab_size * embed_dim))
                .expect("sized draw"),
            w1: Matrix::from_vec(embed_dim, hidden_dim, draw(embed_dim * hidden_dim))
                .expect("sized draw"),
            b1: draw(hidden_dim),
            w2: Matrix::from_vec(hidden_dim, num_classes, draw(hidden_dim * num_classes))
                .expect("sized draw"),
            b2: draw(num_classes),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes() < 2 {
            return Err(Error::InvalidInput(
                "classifier needs at least two classes".into(),
            ));
        }
        if self.w1.rows() != self.embed_dim()
            || self.b1.len() != self.hidden_dim()
            || self.w2.rows() != self.hidden_dim()
            || self.w2.cols() != self.num_classes()
        {
            return Err(Error::InvalidInput("inconsistent classifier shapes".into()));
        }
        let finite = self.embeddings.is_finite()
            && self.w1.is_finite()
            && self.w2.is_finite()
            && self.b1.iter().all(|x| x.is_finite())
            && self.b2.iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidInput("non-finite classifier weights".into()));
        }
        Ok(())
    }

    /// Fingerprint over every tensor byte; used to verify the params were
    /// left untouched by attack phases.
    pub fn checksum(&self) -> u64 {
        let mut h = Fnv1a::new();
        for tensor in [
            self.embeddings.data(),
            self.w1.data(),
            &self.b1,
            self.w2.data(),
            &self.b2,
        ] {
            h.write_u64(tensor.len() as u64);
            for &x in tensor {
                h.write_f64(x);
            }
        }
        h.finish()
    }
}

/// Cached intermediate values of one forward pass, enough to backpropagate.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Token ids actually pooled (PAD positions dropped), in sequence order.
    pub pooled_tokens: Vec<usize>,
    /// Perturbed embedding per pooled position.
    pub perturbed: Vec<Vec<f64>>,
    pub pooled: Vec<f64>,
    pub preact: Vec<f64>,
    pub hidden: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln()
}

/// Runs the classifier on one example. When `delta` is present, the single
/// vector (or the token's own row, for the per-token kind) is added to every
/// real token embedding; PAD positions receive no perturbation and no
/// pooling weight.
pub fn forward(
    params: &ClassifierParams,
    example: &LabeledExample,
    delta: Option<&Perturbation>,
) -> Result<ForwardTrace> {
    let d = params.embed_dim();
    if let Some(delta) = delta {
        delta.validate_against(params)?;
    }
    let mut pooled_tokens = Vec::new();
    let mut perturbed = Vec::new();
    for &token in &example.tokens {
        if token >= params.vocab_size() {
            return Err(Error::InvalidInput(format!(
                "token id {token} out of range for vocabulary of {}",
                params.vocab_size()
            )));
        }
        if token == PAD_ID {
            continue;
        }
        let mut e = params.embeddings.row(token).to_vec();
        if let Some(delta) = delta {
            for (x, &dx) in e.iter_mut().zip(delta.delta_for(token)) {
                *x += dx;
            }
        }
        pooled_tokens.push(token);
        perturbed.push(e);
    }
    if pooled_tokens.is_empty() {
        return Err(Error::InvalidInput(
            "example contains no non-pad tokens".into(),
        ));
    }

    let n = perturbed.len() as f64;
    let mut pooled = vec![0.0; d];
    for e in &perturbed {
        for (p, &x) in pooled.iter_mut().zip(e) {
            *p += x;
        }
    }
    for p in &mut pooled {
        *p /= n;
    }

    let h = params.hidden_dim();
    let c = params.num_classes();
    let mut preact = params.b1.clone();
    for (i, &x) in pooled.iter().enumerate() {
        let row = params.w1.row(i);
        for (j, a) in preact.iter_mut().enumerate().take(h) {
            *a += x * row[j];
        }
    }
    let hidden: Vec<f64> = preact.iter().map(|a| a.tanh()).collect();
    let mut logits = params.b2.clone();
    for (j, &hj) in hidden.iter().enumerate() {
        let row = params.w2.row(j);
        for (k, l) in logits.iter_mut().enumerate().take(c) {
            *l += hj * row[k];
        }
    }
    let probs = softmax(&logits);
    Ok(ForwardTrace {
        pooled_tokens,
        perturbed,
        pooled,
        preact,
        hidden,
        logits,
        probs,
    })
}

/// Argmax class, ties broken by the lowest class id.
pub fn predict(
    params: &ClassifierParams,
    example: &LabeledExample,
    delta: Option<&Perturbation>,
) -> Result<usize> {
    let trace = forward(params, example, delta)?;
    let mut best = 0;
    for (k, &p) in trace.probs.iter().enumerate() {
        if p > trace.probs[best] {
            best = k;
        }
    }
    Ok(best)
}

/// −log of the label's softmax probability, computed through log-sum-exp so
/// saturated logits stay finite.
pub fn cross_entropy(trace: &ForwardTrace, label: usize) -> Result<f64> {
    if label >= trace.logits.len() {
        return Err(Error::InvalidInput(format!(
            "label {label} out of range for {} classes",
            trace.logits.len()
        )));
    }
    Ok(log_sum_exp(&trace.logits) - trace.logits[label])
}

/// Gradients of the loss with respect to the pooled vector, the hidden
/// pre-activation, and the logits, shared by both backward passes.
struct ChainGrads {
    dlogits: Vec<f64>,
    dpreact: Vec<f64>,
    dpooled: Vec<f64>,
}

fn backprop_chain(params: &ClassifierParams, trace: &ForwardTrace, label: usize) -> ChainGrads {
    let h = params.hidden_dim();
    let c = params.num_classes();
    let mut dlogits = trace.probs.clone();
    dlogits[label] -= 1.0;

    let mut dhidden = vec![0.0; h];
    for (j, dh) in dhidden.iter_mut().enumerate() {
        let row = params.w2.row(j);
        for k in 0..c {
            *dh += row[k] * dlogits[k];
        }
    }
    let dpreact: Vec<f64> = dhidden
        .iter()
        .zip(&trace.hidden)
        .map(|(dh, hj)| dh * (1.0 - hj * hj))
        .collect();

    let d = params.embed_dim();
    let mut dpooled = vec![0.0; d];
    for (i, dp) in dpooled.iter_mut().enumerate() {
        let row = params.w1.row(i);
        for (j, da) in dpreact.iter().enumerate() {
            *dp += row[j] * da;
        }
    }
    ChainGrads {
        dlogits,
        dpreact,
        dpooled,
    }
}

/// Exact gradient of the mean batch cross-entropy with respect to the
/// perturbation, shaped like `delta`. For the single kind the per-position
/// contributions sum through the shared addend; for the per-token kind they
/// accumulate only into rows of tokens occurring in the batch.
pub fn grad_delta(
    params: &ClassifierParams,
    batch: &[LabeledExample],
    delta: &Perturbation,
) -> Result<PerturbationData> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let d = params.embed_dim();
    let mut grad = match delta.data {
        PerturbationData::Single(_) => PerturbationData::Single(vec![0.0; d]),
        PerturbationData::PerToken(_) => {
            PerturbationData::PerToken(Matrix::zeros(params.vocab_size(), d))
        }
    };
    let scale = 1.0 / batch.len() as f64;
    for example in batch {
        let trace = forward(params, example, Some(delta))?;
        let chain = backprop_chain(params, &trace, example.label);
        let n = trace.pooled_tokens.len() as f64;
        match &mut grad {
            PerturbationData::Single(g) => {
                // Each of the n real positions contributes dpooled/n, so the
                // shared addend receives dpooled exactly.
                for (gi, dp) in g.iter_mut().zip(&chain.dpooled) {
                    *gi += scale * dp;
                }
            }
            PerturbationData::PerToken(g) => {
                for &token in &trace.pooled_tokens {
                    let row = g.row_mut(token);
                    for (gi, dp) in row.iter_mut().zip(&chain.dpooled) {
                        *gi += scale * dp / n;
                    }
                }
            }
        }
    }
    Ok(grad)
}

/// Gradients for every tensor of `ClassifierParams`.
#[derive(Debug, Clone)]
pub struct ParamGradients {
    pub embeddings: Matrix,
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

/// Exact gradients of the mean batch cross-entropy with respect to all
/// classifier parameters (no perturbation involved).
pub fn grad_params(params: &ClassifierParams, batch: &[LabeledExample]) -> Result<ParamGradients> {
    grad_params_with_loss(params, batch).map(|(g, _)| g)
}

fn grad_params_with_loss(
    params: &ClassifierParams,
    batch: &[LabeledExample],
) -> Result<(ParamGradients, f64)> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let d = params.embed_dim();
    let h = params.hidden_dim();
    let c = params.num_classes();
    let mut grads = ParamGradients {
        embeddings: Matrix::zeros(params.vocab_size(), d),
        w1: Matrix::zeros(d, h),
        b1: vec![0.0; h],
        w2: Matrix::zeros(h, c),
        b2: vec![0.0; c],
    };
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for example in batch {
        let trace = forward(params, example, None)?;
        loss += scale * cross_entropy(&trace, example.label)?;
        let chain = backprop_chain(params, &trace, example.label);

        for (k, &dl) in chain.dlogits.iter().enumerate() {
            grads.b2[k] += scale * dl;
        }
        for (j, &hj) in trace.hidden.iter().enumerate() {
            let row = grads.w2.row_mut(j);
            for (k, &dl) in chain.dlogits.iter().enumerate() {
                row[k] += scale * hj * dl;
            }
        }
        for (j, &da) in chain.dpreact.iter().enumerate() {
            grads.b1[j] += scale * da;
        }
        for (i, &pi) in trace.pooled.iter().enumerate() {
            let row = grads.w1.row_mut(i);
            for (j, &da) in chain.dpreact.iter().enumerate() {
                row[j] += scale * pi * da;
            }
        }
        let n = trace.pooled_tokens.len() as f64;
        for &token in &trace.pooled_tokens {
            let row = grads.embeddings.row_mut(token);
            for (gi, dp) in row.iter_mut().zip(&chain.dpooled) {
                *gi += scale * dp / n;
            }
        }
    }
    Ok((grads, loss))
}

/// Configuration for training the classifier itself.
#[derive(Debug, Clone)]
pub struct ClassifierTrainConfig {
    pub vocab_size: usize,
    pub num_classes: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    /// Epochs tolerated without an eval-accuracy improvement before stopping.
    pub early_stop_patience: usize,
    pub seed: u64,
}

fn eval_accuracy(
    params: &ClassifierParams,
    examples: &[LabeledExample],
    delta: Option<&Perturbation>,
) -> Result<f64> {
    let mut correct = 0usize;
    for ex in examples {
        if predict(params, ex, delta)? == ex.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / examples.len() as f64)
}

const SHUFFLE_SALT: u64 = 0x7368_7566_666c_6573;

/// Minibatch training with early stopping on eval accuracy; returns the
/// best-on-eval parameters. Deterministic given the config.
pub fn train_classifier(
    train: &[LabeledExample],
    eval: &[LabeledExample],
    config: &ClassifierTrainConfig,
) -> Result<ClassifierParams> {
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidInput("batch size must be at least 1".into()));
    }
    let mut params = ClassifierParams::init(
        config.vocab_size,
        config.embed_dim,
        config.hidden_dim,
        config.num_classes,
        config.seed,
    );
    // init() draws from seeded(seed); give the epoch shuffles their own
    // stream so both are pure functions of the seed.
    let mut rng = seeded(crate::rng::mix_seed(config.seed, SHUFFLE_SALT));
    let shapes = [
        params.embeddings.data().len(),
        params.w1.data().len(),
        params.b1.len(),
        params.w2.data().len(),
        params.b2.len(),
    ];
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, &shapes);

    let mut best_params = params.clone();
    let mut best_acc = f64::NEG_INFINITY;
    let mut epochs_since_improve = 0usize;
    let mut order: Vec<LabeledExample> = train.to_vec();

    for _epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let (grads, loss) = grad_params_with_loss(&params, batch)?;
            if !loss.is_finite() {
                return Err(Error::TrainingFailure(format!(
                    "non-finite training loss {loss}"
                )));
            }
            opt.step(
                0,
                params.embeddings.data_mut(),
                grads.embeddings.data(),
                false,
            );
            opt.step(1, params.w1.data_mut(), grads.w1.data(), false);
            opt.step(2, &mut params.b1, &grads.b1, false);
            opt.step(3, params.w2.data_mut(), grads.w2.data(), false);
            opt.step(4, &mut params.b2, &grads.b2, false);
        }
        if eval.is_empty() {
            best_params = params.clone();
            continue;
        }
        let acc = eval_accuracy(&params, eval, None)?;
        if acc > best_acc {
            best_acc = acc;
            best_params = params.clone();
            epochs_since_improve = 0;
        } else {
            epochs_since_improve += 1;
            if epochs_since_improve > config.early_stop_patience {
                break;
            }
        }
    }
    Ok(best_params)
}
