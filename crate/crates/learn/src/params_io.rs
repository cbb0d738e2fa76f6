//! Parameter blobs: `"TGMP"`, u32 version, u32-prefixed JSON header (architecture and
//! tensor shapes), little-endian f32 values in declaration order, trailing CRC-32.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{ModelConfig, Network, Params};
use crate::tensor::Tensor;
use crate::{LearnError, Real};

pub const MAGIC: &[u8; 4] = b"TGMP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    model: ModelConfig,
    shapes: Vec<Vec<usize>>,
}

pub fn to_bytes(net: &Network, params: &[Tensor]) -> Result<Vec<u8>, LearnError> {
    net.check_params(params)?;
    let header = Header {
        model: net.config().clone(),
        shapes: net.param_shapes().to_vec(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| LearnError::BadParams(e.to_string()))?;
    let mut out = Vec::with_capacity(16 + json.len() + 4 * net.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for v in params.iter().flat_map(|t| t.data()) {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Rebuilds the network from the stored architecture and returns it with its parameters.
pub fn from_bytes(bytes: &[u8]) -> Result<(Network, Params), LearnError> {
    let bad = |m: &str| LearnError::BadParams(m.to_string());
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(bad("missing TGMP magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().unwrap()) {
        return Err(bad("checksum mismatch"));
    }
    let hlen = u32::from_le_bytes(body[8..12].try_into().unwrap()) as usize;
    let json = body.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(json).map_err(|e| bad(&e.to_string()))?;
    let net = Network::new(&header.model)?;
    if header.shapes != net.param_shapes() {
        return Err(bad("stored shapes do not match the architecture"));
    }
    let mut values = body[12 + hlen..].chunks_exact(4);
    if values.len() != net.param_count() || !values.remainder().is_empty() {
        return Err(bad("parameter count mismatch"));
    }
    let params = net
        .param_shapes()
        .iter()
        .map(|shape| {
            let n = shape.iter().product();
            let data = values
                .by_ref()
                .take(n)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as Real)
                .collect();
            Tensor::from_vec(shape, data)
        })
        .collect::<Result<Params, _>>()?;
    Ok((net, params))
}

pub fn save(path: &Path, net: &Network, params: &[Tensor]) -> Result<(), LearnError> {
    let bytes = to_bytes(net, params)?;
    std::fs::write(path, bytes).map_err(|e| LearnError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn load(path: &Path) -> Result<(Network, Params), LearnError> {
    let bytes = std::fs::read(path).map_err(|e| LearnError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    from_bytes(&bytes)
}
