//! Versioned binary model container.
//!
//! Layout: magic `PVNM`, format version (u32 LE), header length (u64 LE),
//! JSON header, then every parameter tensor in declaration order as a rank
//! (u32 LE), the dimensions (u64 LE each), and row-major IEEE-754
//! little-endian f64 data. Serialization is canonical, so a round trip is
//! byte-exact.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Normalizer;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::{Model, ModelSpec};

pub const MAGIC: &[u8; 4] = b"PVNM";
pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to reuse a trained model: the architecture, the
/// indicator it predicts, the fitted normalization statistics, and the
/// split provenance so evaluation can rebuild the exact train/test
/// partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerHeader {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub indicator: String,
    pub normalization: Normalizer,
    pub split_seed: u64,
    pub test_fraction: f64,
}

/// A loaded container: the rebuilt model plus its header.
pub struct LoadedModel<S: Scalar> {
    pub model: Model<S>,
    pub header: ContainerHeader,
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<container stream>", e)
}

/// Serialize a model and its metadata.
pub fn write_container<S: Scalar, W: Write>(
    w: &mut W,
    model: &Model<S>,
    header: &ContainerHeader,
) -> Result<()> {
    let header_json =
        serde_json::to_vec(header).map_err(|e| Error::Format(format!("header encode: {e}")))?;
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&header.format_version.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(header_json.len() as u64).to_le_bytes())
        .map_err(io_err)?;
    w.write_all(&header_json).map_err(io_err)?;

    let mut result = Ok(());
    model.visit_params(&mut |_, p| {
        if result.is_err() {
            return;
        }
        result = (|| {
            let shape = p.value.shape();
            w.write_all(&(shape.len() as u32).to_le_bytes()).map_err(io_err)?;
            for &d in shape {
                w.write_all(&(d as u64).to_le_bytes()).map_err(io_err)?;
            }
            for &v in p.value.data() {
                let v = v.to_f64().expect("finite parameter");
                w.write_all(&v.to_le_bytes()).map_err(io_err)?;
            }
            Ok(())
        })();
    });
    result
}

/// Deserialize a container, rebuilding the model from its spec and loading
/// the stored parameters over it.
pub fn read_container<S: Scalar, R: Read>(r: &mut R) -> Result<LoadedModel<S>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {magic:?}; not a model container"
        )));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(io_err)?;
    let version = u32::from_le_bytes(u32buf);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported container version {version} (supported: {FORMAT_VERSION})"
        )));
    }
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf).map_err(io_err)?;
    let header_len = u64::from_le_bytes(u64buf) as usize;
    let mut header_json = vec![0u8; header_len];
    r.read_exact(&mut header_json).map_err(io_err)?;
    let header: ContainerHeader = serde_json::from_slice(&header_json)
        .map_err(|e| Error::Format(format!("header decode: {e}")))?;
    header.normalization.validate()?;

    // Parameter shapes come from the spec; the stored dims must agree.
    let mut model = Model::<S>::new(header.spec.clone(), &mut Rng::from_seed(0))?;
    let mut loaded: Vec<Tensor<f64>> = Vec::new();
    let mut io_result = Ok(());
    model.visit_params(&mut |name, p| {
        if io_result.is_err() {
            return;
        }
        io_result = (|| {
            r.read_exact(&mut u32buf).map_err(io_err)?;
            let rank = u32::from_le_bytes(u32buf) as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                r.read_exact(&mut u64buf).map_err(io_err)?;
                shape.push(u64::from_le_bytes(u64buf) as usize);
            }
            if shape != p.value.shape() {
                return Err(Error::Format(format!(
                    "parameter {name}: stored shape {shape:?} != spec shape {:?}",
                    p.value.shape()
                )));
            }
            let mut data = vec![0.0f64; p.value.len()];
            for v in data.iter_mut() {
                r.read_exact(&mut u64buf).map_err(io_err)?;
                *v = f64::from_le_bytes(u64buf);
            }
            loaded.push(Tensor::new(shape, data)?);
            Ok(())
        })();
    });
    io_result?;
    let mut idx = 0;
    model.visit_params_mut(&mut |_, p| {
        p.value = Tensor::cast_from(&loaded[idx]);
        idx += 1;
    });
    Ok(LoadedModel { model, header })
}

pub fn save_to_file<S: Scalar>(
    path: &Path,
    model: &Model<S>,
    header: &ContainerHeader,
) -> Result<()> {
    let mut bytes = Vec::new();
    write_container(&mut bytes, model, header)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_from_file<S: Scalar>(path: &Path) -> Result<LoadedModel<S>> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    read_container(&mut bytes.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Normalizer;
    use crate::model::{build_lstm, Head};

    fn header(spec: ModelSpec) -> ContainerHeader {
        ContainerHeader {
            format_version: FORMAT_VERSION,
            spec,
            indicator: "TX_IRI_AVERAGE_SCORE".to_string(),
            normalization: Normalizer::from_reference_ranges(400.0),
            split_seed: 99,
            test_fraction: 0.2,
        }
    }

    #[test]
    fn round_trip_is_byte_exact() {
        let mut rng = Rng::from_seed(5);
        let model = build_lstm::<f64>(Head::Regression1, &mut rng).unwrap();
        let header = header(model.spec().clone());

        let mut bytes = Vec::new();
        write_container(&mut bytes, &model, &header).unwrap();
        let loaded = read_container::<f64, _>(&mut bytes.as_slice()).unwrap();
        assert_eq!(loaded.header, header);

        let mut bytes2 = Vec::new();
        write_container(&mut bytes2, &loaded.model, &loaded.header).unwrap();
        assert_eq!(bytes, bytes2, "serialize-deserialize-serialize must be identity");
    }

    #[test]
    fn loaded_parameters_match_bitwise() {
        let mut rng = Rng::from_seed(6);
        let model = build_lstm::<f64>(Head::Classification4, &mut rng).unwrap();
        let mut bytes = Vec::new();
        write_container(&mut bytes, &model, &header(model.spec().clone())).unwrap();
        let loaded = read_container::<f64, _>(&mut bytes.as_slice()).unwrap();
        let mut originals = Vec::new();
        model.visit_params(&mut |_, p| originals.push(p.value.clone()));
        let mut idx = 0;
        loaded.model.visit_params(&mut |_, p| {
            assert_eq!(p.value.data(), originals[idx].data());
            idx += 1;
        });
    }

    #[test]
    fn version_mismatch_is_an_explicit_format_error() {
        let mut rng = Rng::from_seed(7);
        let model = build_lstm::<f64>(Head::Regression1, &mut rng).unwrap();
        let mut bytes = Vec::new();
        write_container(&mut bytes, &model, &header(model.spec().clone())).unwrap();
        bytes[4] = 99; // bump the version field
        let Err(err) = read_container::<f64, _>(&mut bytes.as_slice()) else {
            panic!("expected a format error");
        };
        assert!(matches!(err, Error::Format(_)), "{err}");
        assert!(err.to_string().contains("version 99"));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let bytes = b"NOPE....".to_vec();
        let Err(err) = read_container::<f64, _>(&mut bytes.as_slice()) else {
            panic!("expected a format error");
        };
        assert!(matches!(err, Error::Format(_)));
    }
}
