use std::io::{Read, Write};

use super::ctlstm::DecayMode;
use super::embed::FeatureNorm;
use super::model::{DhpConfig, DhpModel};
use super::sdae::SdaeActivation;
use super::DhpError;

/// Versioned binary container: magic, little-endian dimension header, then
/// the raw 64-bit parameter payload.
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DHP1";

fn err(msg: impl Into<String>) -> DhpError {
    DhpError::Checkpoint(msg.into())
}

pub fn save_model<W: Write>(model: &DhpModel, out: &mut W) -> Result<(), DhpError> {
    let io = |e: std::io::Error| err(e.to_string());
    out.write_all(CHECKPOINT_MAGIC).map_err(io)?;
    let cfg = &model.config;
    let mut header: Vec<u8> = Vec::new();
    header.extend((cfg.event_types as u32).to_le_bytes());
    header.push(match cfg.decay_mode {
        DecayMode::PowerLaw => 0,
        DecayMode::Exponential => 1,
    });
    header.push(u8::from(cfg.tie_target_gates));
    header.push(match cfg.sdae_activation {
        SdaeActivation::Linear => 0,
        SdaeActivation::Sigmoid => 1,
        SdaeActivation::Tanh => 2,
    });
    header.push(0);
    header.extend((cfg.sdae_widths.len() as u32).to_le_bytes());
    for &w in &cfg.sdae_widths {
        header.extend((w as u32).to_le_bytes());
    }
    header.extend((cfg.lstm_layers as u32).to_le_bytes());
    header.extend((cfg.hidden as u32).to_le_bytes());
    header.extend(cfg.decay_scale.to_le_bytes());
    header.extend(cfg.init_std.to_le_bytes());
    header.extend(model.tau0.to_le_bytes());
    let n = &model.feature_norm;
    for v in [
        n.logdt_mean,
        n.logdt_std,
        n.spread_mean,
        n.spread_std,
        n.imbalance_mean,
        n.imbalance_std,
        n.median_gap,
    ] {
        header.extend(v.to_le_bytes());
    }
    header.extend((model.params.len() as u64).to_le_bytes());
    out.write_all(&header).map_err(io)?;
    for v in &model.params.values {
        out.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    Ok(())
}

pub fn load_model<R: Read>(input: &mut R) -> Result<DhpModel, DhpError> {
    let io = |e: std::io::Error| err(e.to_string());
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(io)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(err("bad magic bytes"));
    }
    let mut u32buf = [0u8; 4];
    let mut u64buf = [0u8; 8];
    let mut f64buf = [0u8; 8];
    let mut read_u32 = |input: &mut R| -> Result<u32, DhpError> {
        input.read_exact(&mut u32buf).map_err(|e| err(e.to_string()))?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let event_types = read_u32(input)? as usize;
    let mut bytes = [0u8; 4];
    input.read_exact(&mut bytes).map_err(io)?;
    let decay_mode = match bytes[0] {
        0 => DecayMode::PowerLaw,
        1 => DecayMode::Exponential,
        other => return Err(err(format!("unknown decay mode {other}"))),
    };
    let tie_target_gates = bytes[1] != 0;
    let sdae_activation = match bytes[2] {
        0 => SdaeActivation::Linear,
        1 => SdaeActivation::Sigmoid,
        2 => SdaeActivation::Tanh,
        other => return Err(err(format!("unknown activation {other}"))),
    };
    let n_sdae = read_u32(input)? as usize;
    if n_sdae > 64 {
        return Err(err("implausible autoencoder depth"));
    }
    let mut sdae_widths = Vec::with_capacity(n_sdae);
    for _ in 0..n_sdae {
        sdae_widths.push(read_u32(input)? as usize);
    }
    let lstm_layers = read_u32(input)? as usize;
    let hidden = read_u32(input)? as usize;
    let mut read_f64 = |input: &mut R| -> Result<f64, DhpError> {
        input.read_exact(&mut f64buf).map_err(|e| err(e.to_string()))?;
        Ok(f64::from_le_bytes(f64buf))
    };
    let decay_scale = read_f64(input)?;
    let init_std = read_f64(input)?;
    let tau0 = read_f64(input)?;
    let feature_norm = FeatureNorm {
        logdt_mean: read_f64(input)?,
        logdt_std: read_f64(input)?,
        spread_mean: read_f64(input)?,
        spread_std: read_f64(input)?,
        imbalance_mean: read_f64(input)?,
        imbalance_std: read_f64(input)?,
        median_gap: read_f64(input)?,
    };
    input.read_exact(&mut u64buf).map_err(io)?;
    let n_params = u64::from_le_bytes(u64buf) as usize;

    let config = DhpConfig {
        event_types,
        sdae_widths,
        sdae_activation,
        lstm_layers,
        hidden,
        decay_mode,
        tie_target_gates,
        decay_scale,
        init_std,
    };
    let mut model = DhpModel::new(config, 0);
    if model.params.len() != n_params {
        return Err(err(format!(
            "parameter count mismatch: header {n_params}, layout {}",
            model.params.len()
        )));
    }
    for v in model.params.values.iter_mut() {
        input.read_exact(&mut f64buf).map_err(io)?;
        *v = f64::from_le_bytes(f64buf);
    }
    model.tau0 = tau0;
    model.feature_norm = feature_norm;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dhp::model::DhpConfig;

    #[test]
    fn round_trip_preserves_model() {
        let mut model = DhpModel::new(DhpConfig::desk(6, 8, 2), 11);
        model.tau0 = 0.37;
        model.feature_norm.logdt_mean = -1.5;
        let mut buf = Vec::new();
        save_model(&model, &mut buf).unwrap();
        assert_eq!(&buf[..4], CHECKPOINT_MAGIC);
        let back = load_model(&mut buf.as_slice()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn bad_magic_rejected() {
        let buf = b"NOPE0000".to_vec();
        assert!(load_model(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn truncated_payload_rejected() {
        let model = DhpModel::new(DhpConfig::desk(4, 4, 1), 2);
        let mut buf = Vec::new();
        save_model(&model, &mut buf).unwrap();
        buf.truncate(buf.len() - 9);
        assert!(load_model(&mut buf.as_slice()).is_err());
    }
}
