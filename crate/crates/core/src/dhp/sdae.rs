use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::opt::{Adam, AdamConfig};

use super::params::{ParamStore, SegId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdaeActivation {
    Linear,
    Sigmoid,
    Tanh,
}

/// One denoising autoencoder layer: affine encoder with optional
/// nonlinearity, affine decoder, masking corruption.
#[derive(Debug, Clone, PartialEq)]
pub struct SdaeLayer {
    pub input_dim: usize,
    pub hidden: usize,
    pub activation: SdaeActivation,
    pub enc_w: SegId,
    pub enc_b: SegId,
    pub dec_w: SegId,
    pub dec_b: SegId,
}

impl SdaeLayer {
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        activation: SdaeActivation,
        init_std: f64,
        rng: &mut R,
    ) -> Self {
        SdaeLayer {
            input_dim,
            hidden,
            activation,
            enc_w: store.register_normal(&format!("{prefix}.enc_w"), hidden * input_dim, init_std, rng),
            enc_b: store.register_zeros(&format!("{prefix}.enc_b"), hidden),
            dec_w: store.register_normal(&format!("{prefix}.dec_w"), input_dim * hidden, init_std, rng),
            dec_b: store.register_zeros(&format!("{prefix}.dec_b"), input_dim),
        }
    }

    pub fn encode_graph(&self, tape: &mut Tape, leaves: &[Var], x: Var) -> Var {
        let a = tape.matvec(leaves[self.enc_w.index()], x, self.hidden);
        let pre = tape.add(a, leaves[self.enc_b.index()]);
        match self.activation {
            SdaeActivation::Linear => pre,
            SdaeActivation::Sigmoid => tape.sigmoid(pre),
            SdaeActivation::Tanh => tape.tanh(pre),
        }
    }

    pub fn decode_graph(&self, tape: &mut Tape, leaves: &[Var], code: Var) -> Var {
        let a = tape.matvec(leaves[self.dec_w.index()], code, self.input_dim);
        tape.add(a, leaves[self.dec_b.index()])
    }

    pub fn encode_values(&self, store: &ParamStore, x: &[f64]) -> Vec<f64> {
        let w = store.slice(self.enc_w);
        let b = store.slice(self.enc_b);
        let mut out = vec![0.0; self.hidden];
        for r in 0..self.hidden {
            let mut acc = b[r];
            for (wv, xv) in w[r * self.input_dim..(r + 1) * self.input_dim].iter().zip(x) {
                acc += wv * xv;
            }
            out[r] = match self.activation {
                SdaeActivation::Linear => acc,
                SdaeActivation::Sigmoid => 1.0 / (1.0 + (-acc).exp()),
                SdaeActivation::Tanh => acc.tanh(),
            };
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct PretrainConfig {
    pub lr: f64,
    pub epochs: usize,
    /// Masking probability applied to inputs during pretraining.
    pub corruption: f64,
    pub batch_size: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            lr: 0.05,
            epochs: 100,
            corruption: 0.3,
            batch_size: 64,
        }
    }
}

/// Greedy layer-wise pretraining: each layer is trained to reconstruct its
/// (clean) input from a masked copy under squared error; afterwards the
/// clean codes feed the next layer. Returns per-layer epoch loss histories.
pub fn sdae_pretrain<R: Rng>(
    store: &mut ParamStore,
    layers: &[SdaeLayer],
    inputs: &[Vec<f64>],
    config: &PretrainConfig,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>, super::DhpError> {
    if inputs.is_empty() {
        return Err(super::DhpError::NoData);
    }
    let mut histories = Vec::with_capacity(layers.len());
    let mut data: Vec<Vec<f64>> = inputs.to_vec();

    for layer in layers {
        if data[0].len() != layer.input_dim {
            return Err(super::DhpError::WidthMismatch {
                expected: layer.input_dim,
                got: data[0].len(),
            });
        }
        let mut history = Vec::with_capacity(config.epochs);
        let seg_ids = [layer.enc_w, layer.enc_b, layer.dec_w, layer.dec_b];
        let dim: usize = seg_ids.iter().map(|&id| store.seg_len(id)).sum();
        let mut adam = Adam::new(dim, AdamConfig::with_lr(config.lr));
        let mut tape = Tape::new();

        for _epoch in 0..config.epochs {
            let mut epoch_loss = 0.0;
            let mut seen = 0usize;
            for batch in data.chunks(config.batch_size) {
                tape.reset();
                let leaves: Vec<Var> = store
                    .segment_ids()
                    .map(|id| tape.leaf(store.slice(id).to_vec()))
                    .collect();
                let mut terms = Vec::with_capacity(batch.len());
                for x in batch {
                    let corrupted: Vec<f64> = x
                        .iter()
                        .map(|&v| {
                            if config.corruption > 0.0 && rng.random::<f64>() < config.corruption {
                                0.0
                            } else {
                                v
                            }
                        })
                        .collect();
                    let xc = tape.leaf(corrupted);
                    let clean = tape.leaf(x.clone());
                    let code = layer.encode_graph(&mut tape, &leaves, xc);
                    let recon = layer.decode_graph(&mut tape, &leaves, code);
                    let diff = tape.sub(clean, recon);
                    terms.push(tape.dot(diff, diff));
                }
                let total = tape.add_many(&terms);
                let loss = tape.scale(total, 1.0 / batch.len() as f64);
                epoch_loss += tape.scalar(total);
                seen += batch.len();

                let grads = tape.backward(loss);
                let mut flat = Vec::with_capacity(dim);
                for &id in &seg_ids {
                    flat.extend_from_slice(grads.of(leaves[id.index()]));
                }
                let mut params = Vec::with_capacity(dim);
                for &id in &seg_ids {
                    params.extend_from_slice(store.slice(id));
                }
                adam.step(&mut params, &flat);
                let mut offset = 0;
                for &id in &seg_ids {
                    let len = store.seg_len(id);
                    store.slice_mut(id).copy_from_slice(&params[offset..offset + len]);
                    offset += len;
                }
            }
            history.push(epoch_loss / seen as f64);
        }
        histories.push(history);
        // clean codes for the next layer
        data = data.iter().map(|x| layer.encode_values(store, x)).collect();
    }
    Ok(histories)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_inputs(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn linear_square_layer_reaches_zero_reconstruction_loss() {
        // corruption 0, linear activation, square weights: identity is
        // attainable, so the loss must vanish on the training data
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let layer = SdaeLayer::register(&mut store, "dae0", 4, 4, SdaeActivation::Linear, 0.1, &mut rng);
        let inputs = toy_inputs(128, 4, 3);
        let config = PretrainConfig {
            lr: 0.05,
            epochs: 300,
            corruption: 0.0,
            batch_size: 32,
        };
        let hist = sdae_pretrain(&mut store, &[layer], &inputs, &config, &mut rng).unwrap();
        let last = *hist[0].last().unwrap();
        assert!(last < 1e-3, "final loss {last}");
    }

    #[test]
    fn corrupted_constant_inputs_beat_zero_predictor() {
        // constant inputs under masking: reconstructing the constant beats
        // predicting zeros, whose loss is exactly |x|^2
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layer = SdaeLayer::register(&mut store, "dae0", 3, 5, SdaeActivation::Sigmoid, 0.1, &mut rng);
        let constant = vec![0.8, -0.6, 0.4];
        let inputs: Vec<Vec<f64>> = (0..256).map(|_| constant.clone()).collect();
        let zero_loss: f64 = constant.iter().map(|v| v * v).sum();
        let config = PretrainConfig {
            lr: 0.05,
            epochs: 60,
            corruption: 0.3,
            batch_size: 64,
        };
        let hist = sdae_pretrain(&mut store, &[layer], &inputs, &config, &mut rng).unwrap();
        let last = *hist[0].last().unwrap();
        assert!(last < zero_loss, "loss {last} vs zero predictor {zero_loss}");
    }

    #[test]
    fn loss_is_non_increasing_up_to_noise() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let layer = SdaeLayer::register(&mut store, "dae0", 6, 4, SdaeActivation::Tanh, 0.1, &mut rng);
        let inputs = toy_inputs(200, 6, 11);
        let config = PretrainConfig {
            lr: 0.02,
            epochs: 40,
            corruption: 0.1,
            batch_size: 50,
        };
        let hist = sdae_pretrain(&mut store, &[layer], &inputs, &config, &mut rng).unwrap();
        let h = &hist[0];
        // compare first and last thirds to tolerate per-epoch corruption noise
        let first: f64 = h[..5].iter().sum::<f64>() / 5.0;
        let last: f64 = h[h.len() - 5..].iter().sum::<f64>() / 5.0;
        assert!(last <= first, "first {first} last {last}");
    }

    #[test]
    fn width_mismatch_rejected() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let layer = SdaeLayer::register(&mut store, "dae0", 4, 4, SdaeActivation::Linear, 0.1, &mut rng);
        let inputs = toy_inputs(8, 3, 1);
        assert!(matches!(
            sdae_pretrain(&mut store, &[layer], &inputs, &PretrainConfig::default(), &mut rng),
            Err(super::super::DhpError::WidthMismatch { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn deterministic_under_seed() {
        let run = || {
            let mut store = ParamStore::new();
            let mut rng = ChaCha8Rng::seed_from_u64(13);
            let layer =
                SdaeLayer::register(&mut store, "dae0", 4, 3, SdaeActivation::Sigmoid, 0.1, &mut rng);
            let inputs = toy_inputs(64, 4, 2);
            let config = PretrainConfig {
                epochs: 5,
                ..PretrainConfig::default()
            };
            let hist = sdae_pretrain(&mut store, &[layer], &inputs, &config, &mut rng).unwrap();
            (store.values, hist)
        };
        let (p1, h1) = run();
        let (p2, h2) = run();
        assert_eq!(p1, p2);
        assert_eq!(h1, h2);
    }

    #[test]
    fn three_layer_stack_trains_without_divergence() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let layers = vec![
            SdaeLayer::register(&mut store, "dae0", 9, 16, SdaeActivation::Sigmoid, 0.1, &mut rng),
            SdaeLayer::register(&mut store, "dae1", 16, 16, SdaeActivation::Sigmoid, 0.1, &mut rng),
            SdaeLayer::register(&mut store, "dae2", 16, 16, SdaeActivation::Sigmoid, 0.1, &mut rng),
        ];
        let inputs = toy_inputs(500, 9, 19);
        let config = PretrainConfig {
            epochs: 10,
            ..PretrainConfig::default()
        };
        let hist = sdae_pretrain(&mut store, &layers, &inputs, &config, &mut rng).unwrap();
        assert_eq!(hist.len(), 3);
        for h in &hist {
            assert!(h.iter().all(|l| l.is_finite()));
        }
        assert!(store.values.iter().all(|v| v.is_finite()));
    }
}
