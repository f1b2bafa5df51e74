use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tape;
use crate::opt::{Adam, AdamConfig};

use super::embed::{FeatureNorm, Stream};
use super::model::DhpModel;
use super::sdae::{sdae_pretrain, PretrainConfig};
use super::DhpError;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Lasso weight on the LSTM input matrices.
    pub lambda1: f64,
    /// Group (l21) weight on neuron blocks of the input matrices.
    pub lambda2: f64,
    /// Number of contiguous neuron blocks per matrix.
    pub blocks: usize,
    pub pretrain: PretrainConfig,
    pub finetune_lr: f64,
    pub max_epochs: usize,
    /// Early-stopping patience on the validation NLL.
    pub patience: usize,
    /// Isotropic Gaussian noise added to SDAE inputs during fine-tuning.
    pub noise_std: f64,
    /// Monte Carlo draws per inter-event interval.
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda1: 1e-4,
            lambda2: 1e-4,
            blocks: 4,
            pretrain: PretrainConfig::default(),
            finetune_lr: 0.10,
            max_epochs: 50,
            patience: 5,
            noise_std: 0.50,
            mc_samples: 3,
            seed: 0,
        }
    }
}

/// Row-wise l21 norm: sum over rows of the row's Euclidean norm.
pub fn l21_rows(matrix: &[f64], rows: usize, cols: usize) -> f64 {
    (0..rows)
        .map(|r| {
            matrix[r * cols..(r + 1) * cols]
                .iter()
                .map(|w| w * w)
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

/// Regularizer value and gradient over the LSTM input weight matrices:
/// lambda1 * l1 + lambda2 * sum over neuron blocks of the transposed block's
/// l21 norm (columns of the block grouped per input feature).
pub fn regularizer(model: &DhpModel, lambda1: f64, lambda2: f64, blocks: usize) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut grad = vec![0.0; model.params.len()];
    if lambda1 == 0.0 && lambda2 == 0.0 {
        return (value, grad);
    }
    for (seg, rows, cols) in model.input_weight_segments() {
        let offset = model.params.offset(seg);
        let w = model.params.slice(seg);
        if lambda1 > 0.0 {
            for (i, &x) in w.iter().enumerate() {
                value += lambda1 * x.abs();
                grad[offset + i] += lambda1 * x.signum() * f64::from(x != 0.0);
            }
        }
        if lambda2 > 0.0 {
            let n_blocks = blocks.clamp(1, rows);
            let base = rows / n_blocks;
            let extra = rows % n_blocks;
            let mut row_start = 0;
            for b in 0..n_blocks {
                let size = base + usize::from(b < extra);
                if size == 0 {
                    continue;
                }
                for c in 0..cols {
                    let norm: f64 = (row_start..row_start + size)
                        .map(|r| w[r * cols + c] * w[r * cols + c])
                        .sum::<f64>()
                        .sqrt();
                    value += lambda2 * norm;
                    if norm > 0.0 {
                        for r in row_start..row_start + size {
                            grad[offset + r * cols + c] += lambda2 * w[r * cols + c] / norm;
                        }
                    }
                }
                row_start += size;
            }
        }
    }
    (value, grad)
}

/// Full training objective over a batch of streams: summed Monte Carlo NLL
/// plus the group regularizer. Deterministic under `seed`.
pub fn loss_value(
    model: &DhpModel,
    streams: &[Stream],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<f64, DhpError> {
    let mut total = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tape = Tape::new();
    for stream in streams {
        tape.reset();
        let (nll, _) = model.nll_graph(&mut tape, stream, cfg.mc_samples, &mut rng, 0.0)?;
        total += tape.scalar(nll);
    }
    let (reg, _) = regularizer(model, cfg.lambda1, cfg.lambda2, cfg.blocks);
    Ok(total + reg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Per-event training NLL (noise-free evaluation).
    pub train_nll: f64,
    pub val_nll: f64,
}

#[derive(Debug, Clone)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub diverged: bool,
    pub pretrain_losses: Vec<Vec<f64>>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_nll,val_nll\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{}\n", e.epoch, e.train_nll, e.val_nll));
        }
        out
    }
}

fn mean_nll(model: &DhpModel, streams: &[Stream], mc: usize, seed: u64) -> Result<f64, DhpError> {
    let mut total = 0.0;
    let mut events = 0usize;
    for (i, s) in streams.iter().enumerate() {
        total += model.nll(s, mc, seed.wrapping_add(i as u64))?;
        events += s.events.len();
    }
    Ok(total / events.max(1) as f64)
}

/// SDAE pretraining followed by Adam fine-tuning on the regularized NLL,
/// with early stopping on the validation NLL. The model is left at the best
/// validation epoch. Deterministic for fixed (config, data, seed) on one
/// thread.
pub fn train(
    model: &mut DhpModel,
    train_streams: &[Stream],
    val_streams: &[Stream],
    cfg: &TrainConfig,
) -> Result<TrainHistory, DhpError> {
    if train_streams.is_empty() || train_streams.iter().all(|s| s.events.is_empty()) {
        return Err(DhpError::NoData);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let eval_seed = cfg.seed.wrapping_add(0x9E37_79B9_7F4A_7C15);

    model.feature_norm = FeatureNorm::estimate(train_streams);
    model.tau0 = model.feature_norm.median_gap;

    // greedy layer-wise pretraining on the embedded training events
    let mut pretrain_losses = Vec::new();
    if !model.sdae.is_empty() && cfg.pretrain.epochs > 0 {
        let k = model.config.event_types;
        let mut inputs = Vec::new();
        for stream in train_streams {
            let mut last = 0.0;
            for ev in &stream.events {
                inputs.push(model.feature_norm.embed(ev.kind, k, ev.t - last, ev.spread, ev.imbalance));
                last = ev.t;
            }
        }
        let layers = model.sdae.clone();
        pretrain_losses = sdae_pretrain(&mut model.params, &layers, &inputs, &cfg.pretrain, &mut rng)?;
    }

    // fine-tuning: one Adam step per stream, full-gradient through time
    let mut adam = Adam::new(model.params.len(), AdamConfig::with_lr(cfg.finetune_lr));
    let mut history = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_params = model.params.values.clone();
    let mut stopped_early = false;
    let mut diverged = false;
    let mut tape = Tape::new();

    'epochs: for epoch in 1..=cfg.max_epochs {
        for stream in train_streams {
            if stream.events.is_empty() {
                continue;
            }
            let snapshot = model.params.values.clone();
            tape.reset();
            let (nll, leaves) =
                model.nll_graph(&mut tape, stream, cfg.mc_samples, &mut rng, cfg.noise_std)?;
            let value = tape.scalar(nll);
            if !value.is_finite() {
                model.params.values = snapshot;
                diverged = true;
                log::warn!("training diverged at epoch {epoch}; restoring last finite parameters");
                break 'epochs;
            }
            let grads = tape.backward(nll);
            let mut flat = vec![0.0; model.params.len()];
            model.accumulate_grads(&grads, &leaves, &mut flat);
            let (_, reg_grad) = regularizer(model, cfg.lambda1, cfg.lambda2, cfg.blocks);
            for (f, r) in flat.iter_mut().zip(&reg_grad) {
                *f += r;
            }
            adam.step(&mut model.params.values, &flat);
        }

        let train_nll = mean_nll(model, train_streams, cfg.mc_samples, eval_seed)?;
        let val_nll = if val_streams.is_empty() {
            train_nll
        } else {
            mean_nll(model, val_streams, cfg.mc_samples, eval_seed)?
        };
        history.push(EpochStats {
            epoch,
            train_nll,
            val_nll,
        });
        if !train_nll.is_finite() || !val_nll.is_finite() {
            diverged = true;
            break;
        }
        if val_nll < best_val {
            best_val = val_nll;
            best_epoch = epoch;
            best_params = model.params.values.clone();
        } else if epoch - best_epoch >= cfg.patience {
            stopped_early = true;
            break;
        }
    }

    model.params.values = best_params;
    Ok(TrainHistory {
        epochs: history,
        best_epoch,
        stopped_early,
        diverged,
        pretrain_losses,
    })
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub n_checked: usize,
    pub max_rel_err: f64,
    /// Worst offenders: (segment, within-segment index, analytic, fd, rel).
    pub worst: Vec<(String, usize, f64, f64, f64)>,
}

/// Denominator floor for the relative error: below this magnitude central
/// differences are dominated by floating-point cancellation and agreement is
/// judged in absolute terms instead.
pub const GRAD_CHECK_FLOOR: f64 = 1e-5;

/// Compare the analytic gradient of the full training loss against central
/// finite differences for every parameter.
pub fn grad_check(
    model: &DhpModel,
    stream: &Stream,
    cfg: &TrainConfig,
    fd_step: f64,
) -> Result<GradCheckReport, DhpError> {
    let seed = cfg.seed.wrapping_add(17);
    let mut tape = Tape::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (nll, leaves) = model.nll_graph(&mut tape, stream, cfg.mc_samples, &mut rng, 0.0)?;
    let grads = tape.backward(nll);
    let mut analytic = vec![0.0; model.params.len()];
    model.accumulate_grads(&grads, &leaves, &mut analytic);
    let (_, reg_grad) = regularizer(model, cfg.lambda1, cfg.lambda2, cfg.blocks);
    for (a, r) in analytic.iter_mut().zip(&reg_grad) {
        *a += r;
    }

    let mut probe = model.clone();
    let eval = |m: &DhpModel| -> Result<f64, DhpError> {
        let nll = m.nll(stream, cfg.mc_samples, seed)?;
        let (reg, _) = regularizer(m, cfg.lambda1, cfg.lambda2, cfg.blocks);
        Ok(nll + reg)
    };

    let mut max_rel: f64 = 0.0;
    let mut worst: Vec<(String, usize, f64, f64, f64)> = Vec::new();
    let mut n_checked = 0;
    for i in 0..model.params.len() {
        let x0 = model.params.values[i];
        probe.params.values[i] = x0 + fd_step;
        let up = eval(&probe)?;
        probe.params.values[i] = x0 - fd_step;
        let dn = eval(&probe)?;
        probe.params.values[i] = x0;
        let fd = (up - dn) / (2.0 * fd_step);
        let a = analytic[i];
        n_checked += 1;
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(GRAD_CHECK_FLOOR);
        if rel > max_rel {
            max_rel = rel;
            let (name, idx) = model.params.locate(i);
            worst.push((name.to_string(), idx, a, fd, rel));
            if worst.len() > 8 {
                worst.remove(0);
            }
        }
    }
    worst.reverse();
    Ok(GradCheckReport {
        n_checked,
        max_rel_err: max_rel,
        worst,
    })
}
