//! Checkpoint directory: `manifest.txt` plus one weight and one bias
//! tensor file per layer (f64).

use std::fs;
use std::path::Path;

use super::{NetworkParams, NetworkSpec};
use crate::data::{load_tensor, save_tensor, Tensor};
use crate::error::{Error, Result};

pub fn save_checkpoint(params: &NetworkParams, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let spec = &params.spec;
    let mut manifest = format!(
        "input_channels={}\nnum_classes={}\nstage_channels={}\n",
        spec.input_channels,
        spec.num_classes,
        spec.stage_channels.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
    );
    for (i, layer) in params.layers.iter().enumerate() {
        let wf = format!("layer{i:02}.weight.segt");
        let bf = format!("layer{i:02}.bias.segt");
        save_tensor(
            &Tensor::F64 {
                shape: vec![layer.out_c, layer.in_c, layer.k, layer.k],
                data: layer.weight.clone(),
            },
            dir.join(&wf),
        )?;
        save_tensor(
            &Tensor::F64 {
                shape: vec![layer.out_c],
                data: layer.bias.clone(),
            },
            dir.join(&bf),
        )?;
        manifest.push_str(&format!("layer={wf},{bf}\n"));
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<NetworkParams> {
    let dir = dir.as_ref();
    let path = dir.join("manifest.txt");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let (mut input_channels, mut num_classes, mut stages) = (None, None, None);
    let mut files = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let bad = |m: String| Error::Config { line: n + 1, message: m };
        let Some((k, v)) = line.split_once('=') else {
            continue;
        };
        match k {
            "input_channels" => input_channels = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "num_classes" => num_classes = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "stage_channels" => {
                stages = Some(
                    v.split(',')
                        .map(|c| c.trim().parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| bad(e.to_string()))?,
                )
            }
            "layer" => {
                let (w, b) = v.split_once(',').ok_or_else(|| bad("layer needs weight,bias".into()))?;
                files.push((w.to_string(), b.to_string()));
            }
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
    }
    let missing = |k: &str| Error::Dataset(format!("{}: missing {k}", path.display()));
    let spec = NetworkSpec::new(
        input_channels.ok_or_else(|| missing("input_channels"))?,
        num_classes.ok_or_else(|| missing("num_classes"))?,
        stages.ok_or_else(|| missing("stage_channels"))?,
    )?;
    let mut params = NetworkParams::zeros(&spec);
    if files.len() != params.layers.len() {
        return Err(Error::shape(format!(
            "checkpoint lists {} layers, network needs {}",
            files.len(),
            params.layers.len()
        )));
    }
    for (layer, (wf, bf)) in params.layers.iter_mut().zip(files) {
        let expect_w = vec![layer.out_c, layer.in_c, layer.k, layer.k];
        match load_tensor(dir.join(&wf))? {
            Tensor::F64 { shape, data } if shape == expect_w => layer.weight = data,
            other => return Err(Error::shape(format!("{wf}: unexpected tensor {:?}", other.shape()))),
        }
        match load_tensor(dir.join(&bf))? {
            Tensor::F64 { shape, data } if shape == [layer.out_c] => layer.bias = data,
            other => return Err(Error::shape(format!("{bf}: unexpected tensor {:?}", other.shape()))),
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_network;

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let params = init_network(&NetworkSpec::default(), 4).unwrap();
        save_checkpoint(&params, dir.path()).unwrap();
        assert_eq!(load_checkpoint(dir.path()).unwrap(), params);
    }

    #[test]
    fn corrupted_layer_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let params = init_network(&NetworkSpec::default(), 4).unwrap();
        save_checkpoint(&params, dir.path()).unwrap();
        save_tensor(
            &Tensor::F64 {
                shape: vec![3],
                data: vec![0.0; 3],
            },
            dir.path().join("layer00.bias.segt"),
        )
        .unwrap();
        assert!(load_checkpoint(dir.path()).is_err());
    }
}
