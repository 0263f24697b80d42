//! Binary model format: magic `MGBT`, little-endian u16 version, model
//! fields, the hyperparameter snapshot as length-prefixed JSON, the trees,
//! and a trailing CRC-32 of everything before it.

use super::features::Standardizer;
use super::model::GBTModel;
use super::tree::{Node, Tree};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MGBT";
pub const FORMAT_VERSION: u16 = 1;

pub fn serialize(model: &GBTModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&model.base_score.to_le_bytes());
    out.extend_from_slice(&model.learning_rate.to_le_bytes());
    put_u32(&mut out, model.n_features);
    let hp = serde_json::to_vec(&model.hyperparams).expect("hyperparams serialize");
    put_u32(&mut out, hp.len());
    out.extend_from_slice(&hp);
    match &model.standardizer {
        Some(s) => {
            out.push(1);
            for (m, sc) in s.means.iter().zip(&s.scales) {
                out.extend_from_slice(&m.to_le_bytes());
                out.extend_from_slice(&sc.to_le_bytes());
            }
        }
        None => out.push(0),
    }
    put_u32(&mut out, model.trees.len());
    for tree in &model.trees {
        put_u32(&mut out, tree.nodes.len());
        for node in &tree.nodes {
            match *node {
                Node::Leaf { weight } => {
                    out.push(0);
                    out.extend_from_slice(&weight.to_le_bytes());
                }
                Node::Split {
                    feature,
                    threshold,
                    default_left,
                    left,
                    right,
                } => {
                    out.push(1);
                    put_u32(&mut out, feature);
                    out.extend_from_slice(&threshold.to_le_bytes());
                    out.push(u8::from(default_left));
                    put_u32(&mut out, left);
                    put_u32(&mut out, right);
                }
            }
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("count fits in u32").to_le_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format("truncated model stream".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn deserialize(bytes: &[u8]) -> Result<GBTModel> {
    let fmt = |m: &str| Error::Format(m.to_string());
    if bytes.len() < MAGIC.len() + 2 + 4 || &bytes[..4] != MAGIC {
        return Err(fmt("not a model stream (bad magic)"));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let mut r = Reader { buf: body, pos: 4 };
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    if crc32fast::hash(body) != u32::from_le_bytes(trailer.try_into().unwrap()) {
        return Err(fmt("checksum mismatch"));
    }
    let base_score = r.f64()?;
    let learning_rate = r.f64()?;
    let n_features = r.u32()?;
    let hp_len = r.u32()?;
    let hyperparams = serde_json::from_slice(r.take(hp_len)?)
        .map_err(|e| Error::Format(format!("bad hyperparameter block: {e}")))?;
    let standardizer = match r.u8()? {
        0 => None,
        1 => {
            let mut s = Standardizer {
                means: Vec::with_capacity(n_features),
                scales: Vec::with_capacity(n_features),
            };
            for _ in 0..n_features {
                s.means.push(r.f64()?);
                s.scales.push(r.f64()?);
            }
            Some(s)
        }
        t => return Err(Error::Format(format!("bad standardizer tag {t}"))),
    };
    let n_trees = r.u32()?;
    let mut trees = Vec::with_capacity(n_trees.min(body.len()));
    for t in 0..n_trees {
        let n_nodes = r.u32()?;
        if n_nodes == 0 {
            return Err(Error::Format(format!("tree {t} has no nodes")));
        }
        let mut nodes = Vec::with_capacity(n_nodes.min(body.len()));
        for k in 0..n_nodes {
            let node = match r.u8()? {
                0 => Node::Leaf { weight: r.f64()? },
                1 => {
                    let feature = r.u32()?;
                    let threshold = r.f64()?;
                    let default_left = match r.u8()? {
                        0 => false,
                        1 => true,
                        b => return Err(Error::Format(format!("bad default direction {b}"))),
                    };
                    let (left, right) = (r.u32()?, r.u32()?);
                    if feature >= n_features {
                        return Err(Error::Format(format!(
                            "tree {t} node {k} uses feature {feature} of {n_features}"
                        )));
                    }
                    // children after their parent keeps every tree acyclic
                    if left <= k || right <= k || left >= n_nodes || right >= n_nodes || left == right {
                        return Err(Error::Format(format!("tree {t} node {k} has bad children")));
                    }
                    Node::Split {
                        feature,
                        threshold,
                        default_left,
                        left,
                        right,
                    }
                }
                tag => return Err(Error::Format(format!("bad node tag {tag}"))),
            };
            nodes.push(node);
        }
        trees.push(Tree { nodes });
    }
    if r.pos != body.len() {
        return Err(fmt("trailing bytes after model"));
    }
    Ok(GBTModel {
        base_score,
        learning_rate,
        n_features,
        trees,
        hyperparams,
        standardizer,
    })
}
