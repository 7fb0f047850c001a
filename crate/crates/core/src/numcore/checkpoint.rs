//! Parameter checkpoints: one text header line, then the flat vector as
//! little-endian `f64`.
//!
//! ```text
//! hybridrl-params v1 layers=4,64,64,1 activation=relu\n
//! <param_count × 8 bytes>
//! ```

use std::io::Write;
use std::path::Path;

use super::mlp::{param_count, Activation, ApproximatorParams};
use crate::error::{Error, Result};

const MAGIC: &str = "hybridrl-params";
const VERSION: &str = "v1";

pub fn encode(params: &ApproximatorParams) -> Vec<u8> {
    let sizes: Vec<String> = params.layer_sizes().iter().map(|n| n.to_string()).collect();
    let header = format!(
        "{MAGIC} {VERSION} layers={} activation={}\n",
        sizes.join(","),
        params.activation().tag()
    );
    let mut out = Vec::with_capacity(header.len() + params.len() * 8);
    out.extend_from_slice(header.as_bytes());
    for v in params.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> std::result::Result<ApproximatorParams, String> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or("missing header line")?;
    let header = std::str::from_utf8(&bytes[..newline]).map_err(|_| "header is not utf-8")?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [magic, version, layers, activation] = fields[..] else {
        return Err(format!("unexpected header `{header}`"));
    };
    if magic != MAGIC || version != VERSION {
        return Err(format!("unsupported header `{header}`"));
    }
    let layer_sizes = layers
        .strip_prefix("layers=")
        .ok_or("missing layers field")?
        .split(',')
        .map(|s| {
            s.parse::<usize>()
                .map_err(|e| format!("bad layer size `{s}`: {e}"))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let activation = activation
        .strip_prefix("activation=")
        .and_then(Activation::from_tag)
        .ok_or("bad activation field")?;
    let body = &bytes[newline + 1..];
    let expected = param_count(&layer_sizes) * 8;
    if body.len() != expected {
        return Err(format!(
            "expected {expected} bytes of parameters, found {}",
            body.len()
        ));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    ApproximatorParams::new(layer_sizes, activation, values).map_err(|e| e.to_string())
}

pub fn save(params: &ApproximatorParams, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&encode(params)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ApproximatorParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|reason| Error::Checkpoint {
        path: path.to_owned(),
        reason,
    })
}
