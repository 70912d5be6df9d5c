//! Versioned JSON checkpoints. Floats are written in shortest round-trip form,
//! so a load reproduces every parameter bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, IdmModel, InputLayout, LayerShape, Mlp, Normalizer};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "idmk-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format: String,
    version: u32,
    layout: InputLayout,
    arch: Architecture,
    norm: Normalizer,
    shapes: Vec<LayerShape>,
    params: Vec<f64>,
}

pub fn save_checkpoint(model: &IdmModel, path: &Path) -> Result<()> {
    model.check()?;
    let ck = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        layout: model.layout,
        arch: model.arch,
        norm: model.norm.clone(),
        shapes: model.net.shapes.clone(),
        params: model.net.params.clone(),
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, &ck)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<IdmModel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let ck: Checkpoint = serde_json::from_reader(BufReader::new(file))?;
    if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
        return Err(Error::InvalidInput(format!(
            "{}: unsupported checkpoint {} v{}",
            path.display(),
            ck.format,
            ck.version
        )));
    }
    let model = IdmModel {
        layout: ck.layout,
        arch: ck.arch,
        norm: ck.norm,
        net: Mlp {
            shapes: ck.shapes,
            params: ck.params,
        },
    };
    model.check()?;
    Ok(model)
}
