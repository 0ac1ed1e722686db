//! Model checkpoints.
//!
//! A text header of `key=value` lines, one `tensor <name> <rows> <cols>`
//! line per tensor, the line `end`, then every tensor's values in manifest
//! order as little-endian f64.
//!
//! ```text
//! WICECKPT 1
//! architecture=wgcn
//! ...
//! tensor gcn.0.weight 151 256
//! end
//! <binary>
//! ```

use std::io::{BufRead, Write};
use std::path::Path;

use super::model::{Architecture, ModelConfig, ModelParams, NamedTensor, Readout, WeightMode};
use super::optim::{Optimizer, OptimizerKind};
use crate::error::{Result, WiceError};
use crate::linalg::Matrix;

pub const CHECKPOINT_MAGIC: &str = "WICECKPT 1";

const MOMENT_PREFIX: &str = "opt.m/";
const VARIANCE_PREFIX: &str = "opt.v/";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub provider_id: String,
    /// Hash of the training configuration that produced the weights.
    pub config_hash: String,
    pub epoch: usize,
    pub optimizer: Option<Optimizer>,
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl Checkpoint {
    pub fn write(&self, out: &mut impl Write) -> std::io::Result<()> {
        let c = &self.params.config;
        writeln!(out, "{CHECKPOINT_MAGIC}")?;
        writeln!(out, "architecture={}", c.architecture)?;
        writeln!(out, "layer_dims={}", join(&c.layer_dims()))?;
        writeln!(out, "dim={}", c.embed_dim)?;
        writeln!(out, "hidden={}", join(&c.hidden))?;
        writeln!(out, "heads={}", c.heads)?;
        writeln!(out, "depth={}", c.depth)?;
        writeln!(out, "width={}", c.width)?;
        writeln!(out, "weight_mode={}", serde_json::to_string(&c.weight_mode).unwrap().trim_matches('"'))?;
        writeln!(out, "readout={}", serde_json::to_string(&c.readout).unwrap().trim_matches('"'))?;
        writeln!(out, "seed={}", c.seed)?;
        writeln!(out, "provider={}", self.provider_id)?;
        writeln!(out, "config_hash={}", self.config_hash)?;
        writeln!(out, "epoch={}", self.epoch)?;
        let mut tensors: Vec<(String, &Matrix)> =
            self.params.tensors.iter().map(|t| (t.name.clone(), &t.value)).collect();
        if let Some(opt) = &self.optimizer {
            writeln!(out, "optimizer={}", if opt.kind == OptimizerKind::Adam { "adam" } else { "sgd" })?;
            writeln!(out, "lr={}", opt.lr)?;
            writeln!(out, "step={}", opt.step)?;
            for (t, m) in self.params.tensors.iter().zip(&opt.m) {
                tensors.push((format!("{MOMENT_PREFIX}{}", t.name), m));
            }
            for (t, v) in self.params.tensors.iter().zip(&opt.v) {
                tensors.push((format!("{VARIANCE_PREFIX}{}", t.name), v));
            }
        }
        for (name, m) in &tensors {
            writeln!(out, "tensor {name} {} {}", m.rows(), m.cols())?;
        }
        writeln!(out, "end")?;
        for (_, m) in &tensors {
            for x in m.as_slice() {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut reader: impl BufRead, origin: &str) -> Result<Self> {
        let err = |line: usize, msg: String| WiceError::parse(origin, line, msg);
        let mut header = Vec::new();
        let mut manifest: Vec<(String, usize, usize)> = Vec::new();
        let mut lineno = 0;
        loop {
            let mut line = String::new();
            lineno += 1;
            let n = reader.read_line(&mut line).map_err(|e| err(lineno, e.to_string()))?;
            if n == 0 {
                return Err(err(lineno, "unexpected end of header".into()));
            }
            let line = line.trim_end_matches('\n');
            if lineno == 1 {
                if line != CHECKPOINT_MAGIC {
                    return Err(err(1, format!("expected {CHECKPOINT_MAGIC:?}")));
                }
                continue;
            }
            if line == "end" {
                break;
            }
            if let Some(rest) = line.strip_prefix("tensor ") {
                let parts: Vec<&str> = rest.split(' ').collect();
                let parsed = match parts.as_slice() {
                    [name, r, c] => r.parse().ok().zip(c.parse().ok()).map(|(r, c)| (name.to_string(), r, c)),
                    _ => None,
                };
                manifest.push(parsed.ok_or_else(|| err(lineno, "bad tensor line".into()))?);
            } else {
                let (k, v) = line.split_once('=').ok_or_else(|| err(lineno, "expected key=value".into()))?;
                header.push((k.to_string(), v.to_string(), lineno));
            }
        }
        let field = |key: &str| -> Result<(&str, usize)> {
            header
                .iter()
                .find(|(k, _, _)| k == key)
                .map(|(_, v, l)| (v.as_str(), *l))
                .ok_or_else(|| WiceError::parse(origin, lineno, format!("missing header field {key}")))
        };
        fn num<T: std::str::FromStr>(origin: &str, (v, l): (&str, usize)) -> Result<T> {
            v.parse().map_err(|_| WiceError::parse(origin, l, format!("bad value {v:?}")))
        }
        let list = |(v, l): (&str, usize)| -> Result<Vec<usize>> {
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',').map(|x| num(origin, (x, l))).collect()
        };
        let quoted = |(v, l): (&str, usize)| (format!("\"{v}\""), l);

        let arch_field = field("architecture")?;
        let architecture: Architecture = arch_field.0.parse().map_err(|e: WiceError| err(arch_field.1, e.to_string()))?;
        let weight_mode: WeightMode = {
            let (v, l) = quoted(field("weight_mode")?);
            serde_json::from_str(&v).map_err(|e| err(l, e.to_string()))?
        };
        let readout: Readout = {
            let (v, l) = quoted(field("readout")?);
            serde_json::from_str(&v).map_err(|e| err(l, e.to_string()))?
        };
        let config = ModelConfig {
            architecture,
            embed_dim: num(origin, field("dim")?)?,
            hidden: list(field("hidden")?)?,
            heads: num(origin, field("heads")?)?,
            depth: num(origin, field("depth")?)?,
            width: num(origin, field("width")?)?,
            weight_mode,
            readout,
            seed: num(origin, field("seed")?)?,
        };
        config.validate()?;
        let dims = field("layer_dims")?;
        if list(dims)? != config.layer_dims() {
            return Err(err(dims.1, "layer_dims do not match the architecture".into()));
        }

        let mut values = Vec::with_capacity(manifest.len());
        let mut buf = [0u8; 8];
        for (name, rows, cols) in &manifest {
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                reader
                    .read_exact(&mut buf)
                    .map_err(|e| WiceError::Checkpoint(format!("{origin}: tensor {name}: {e}")))?;
                data.push(f64::from_le_bytes(buf));
            }
            values.push((name.clone(), Matrix::from_vec(*rows, *cols, data)));
        }
        if reader.read(&mut buf).map_err(|e| WiceError::io(origin, e))? != 0 {
            return Err(WiceError::Checkpoint(format!("{origin}: trailing bytes after tensors")));
        }

        let expected = ModelParams::init(config.clone())?;
        let take = |name: &str, like: &Matrix| -> Result<Matrix> {
            let (_, m) = values
                .iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| WiceError::Checkpoint(format!("{origin}: missing tensor {name}")))?;
            if m.shape() != like.shape() {
                return Err(WiceError::Checkpoint(format!(
                    "{origin}: tensor {name} has shape {:?}, expected {:?}",
                    m.shape(),
                    like.shape()
                )));
            }
            Ok(m.clone())
        };
        let mut tensors = Vec::with_capacity(expected.tensors.len());
        for t in &expected.tensors {
            tensors.push(NamedTensor { name: t.name.clone(), value: take(&t.name, &t.value)? });
        }
        let params = ModelParams { config, tensors };
        if !params.is_finite() {
            return Err(WiceError::Checkpoint(format!("{origin}: non-finite weights")));
        }

        let optimizer = match header.iter().find(|(k, _, _)| k == "optimizer") {
            None => None,
            Some((_, kind, l)) => {
                let kind: OptimizerKind = kind.parse().map_err(|e: WiceError| err(*l, e.to_string()))?;
                let mut opt = Optimizer::new(kind, num(origin, field("lr")?)?, &params);
                opt.step = num(origin, field("step")?)?;
                if kind == OptimizerKind::Adam {
                    for (i, t) in params.tensors.iter().enumerate() {
                        opt.m[i] = take(&format!("{MOMENT_PREFIX}{}", t.name), &t.value)?;
                        opt.v[i] = take(&format!("{VARIANCE_PREFIX}{}", t.name), &t.value)?;
                    }
                }
                Some(opt)
            }
        };

        Ok(Checkpoint {
            params,
            provider_id: field("provider")?.0.to_string(),
            config_hash: field("config_hash")?.0.to_string(),
            epoch: num(origin, field("epoch")?)?,
            optimizer,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| WiceError::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file), &path.display().to_string())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ckpt(arch: Architecture, with_opt: bool) -> Checkpoint {
        let params = ModelParams::init(ModelConfig::new(arch, 8, 11)).unwrap();
        let optimizer = with_opt.then(|| {
            let mut o = Optimizer::new(OptimizerKind::Adam, 0.001, &params);
            o.step = 7;
            o.m[0].as_mut_slice()[0] = 0.25;
            o.v[1].as_mut_slice()[0] = 1.0 / 3.0;
            o
        });
        Checkpoint { params, provider_id: "hashed-d8-s0".into(), config_hash: "abc".into(), epoch: 3, optimizer }
    }

    #[test]
    fn round_trip_is_exact() {
        for arch in Architecture::ALL {
            for with_opt in [false, true] {
                let c = ckpt(arch, with_opt);
                let bytes = c.to_bytes();
                let back = Checkpoint::read_from(bytes.as_slice(), "mem").unwrap();
                assert_eq!(back, c);
                assert_eq!(back.to_bytes(), bytes);
            }
        }
    }

    #[test]
    fn header_is_readable() {
        let bytes = ckpt(Architecture::Wgcn, false).to_bytes();
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.starts_with("WICECKPT 1\narchitecture=wgcn\nlayer_dims=31,256,64,1\ndim=8\n"));
        assert!(text.contains("tensor gcn.0.weight 31 256\n"));
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let bytes = ckpt(Architecture::Gcn, false).to_bytes();
        assert!(Checkpoint::read_from(&bytes[..bytes.len() - 3], "mem").is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::read_from(extra.as_slice(), "mem").is_err());
        assert!(Checkpoint::read_from(&b"NOPE\n"[..], "mem").is_err());
        let mut changed = bytes.clone();
        let pos = bytes.windows(7).position(|w| w == b"heads=4").unwrap();
        changed[pos + 6] = b'5';
        // Gcn ignores heads, so only the layer layout matters.
        assert!(Checkpoint::read_from(changed.as_slice(), "mem").is_ok());
        let mut changed = bytes;
        let pos = changed.windows(6).position(|w| w == b"dim=8\n").unwrap();
        changed[pos + 4] = b'9';
        assert!(Checkpoint::read_from(changed.as_slice(), "mem").is_err());
    }
}
