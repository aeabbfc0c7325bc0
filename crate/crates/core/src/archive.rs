//! Binary model archive.
//!
//! ```text
//! magic            6 bytes   "CSIAUG"
//! format_version   u32
//! config_len       u64, then config_len bytes of UTF-8 run config (TOML)
//! section_count    u32
//! per section:     name (u32 length + UTF-8), array_count u32
//!   per array:     name (u32 length + UTF-8), ndim u32, ndim × u64 dims,
//!                  prod(dims) × f64 values
//! checksum         32 bytes, SHA-256 of everything above
//! ```
//!
//! All integers and floats are little-endian. Floats are stored bit-exact.

use std::path::Path;

use ndarray::{Array1, Array2};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiment::FrontEnd;
use crate::features::FeatureConfig;
use crate::gan::{GanPair, Standardizer};
use crate::nn::layers::{Dense, LstmParams, Mlp, Parameters};
use crate::nn::ClassifierParams;
use crate::preprocess::{PcaModel, Projector};

pub const MAGIC: &[u8; 6] = b"CSIAUG";
pub const FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedArray {
    pub fn matrix(name: impl Into<String>, m: &Array2<f64>) -> Self {
        Self { name: name.into(), shape: vec![m.nrows(), m.ncols()], data: m.iter().copied().collect() }
    }

    pub fn vector(name: impl Into<String>, v: &Array1<f64>) -> Self {
        Self { name: name.into(), shape: vec![v.len()], data: v.to_vec() }
    }

    pub fn scalar(name: impl Into<String>, v: f64) -> Self {
        Self { name: name.into(), shape: vec![1], data: vec![v] }
    }

    fn to_matrix(&self) -> Result<Array2<f64>> {
        match self.shape[..] {
            [r, c] => Ok(Array2::from_shape_vec((r, c), self.data.clone()).expect("validated on read")),
            _ => Err(Error::Archive(format!("array `{}` is not a matrix", self.name))),
        }
    }

    fn to_vector(&self) -> Result<Array1<f64>> {
        match self.shape[..] {
            [_] => Ok(Array1::from(self.data.clone())),
            _ => Err(Error::Archive(format!("array `{}` is not a vector", self.name))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub arrays: Vec<NamedArray>,
}

impl Section {
    pub fn get(&self, name: &str) -> Result<&NamedArray> {
        self.arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::Archive(format!("section `{}` has no array `{name}`", self.name)))
    }

    fn scalar(&self, name: &str) -> Result<f64> {
        let a = self.get(name)?;
        a.data.first().copied().ok_or_else(|| Error::Archive(format!("array `{name}` is empty")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelArchive {
    pub format_version: u32,
    pub config: String,
    pub sections: Vec<Section>,
}

impl ModelArchive {
    pub fn new(config: String) -> Self {
        Self { format_version: FORMAT_VERSION, config, sections: Vec::new() }
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Section> {
        self.section(name).ok_or_else(|| Error::Archive(format!("archive has no `{name}` section")))
    }

    /// Insert or replace a section by name.
    pub fn put(&mut self, section: Section) {
        match self.sections.iter_mut().find(|s| s.name == section.name) {
            Some(slot) => *slot = section,
            None => self.sections.push(section),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.format_version.to_le_bytes());
        out.extend_from_slice(&(self.config.len() as u64).to_le_bytes());
        out.extend_from_slice(self.config.as_bytes());
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        for s in &self.sections {
            put_str(&mut out, &s.name);
            out.extend_from_slice(&(s.arrays.len() as u32).to_le_bytes());
            for a in &s.arrays {
                put_str(&mut out, &a.name);
                out.extend_from_slice(&(a.shape.len() as u32).to_le_bytes());
                for &d in &a.shape {
                    out.extend_from_slice(&(d as u64).to_le_bytes());
                }
                for v in &a.data {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 4 + CHECKSUM_LEN || &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::Archive("not a CSIAUG archive".into()));
        }
        let version = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes"));
        let (body, checksum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        if Sha256::digest(body).as_slice() != checksum {
            if version != FORMAT_VERSION {
                return Err(Error::Version { found: version, supported: FORMAT_VERSION });
            }
            return Err(Error::Checksum);
        }
        if version != FORMAT_VERSION {
            return Err(Error::Version { found: version, supported: FORMAT_VERSION });
        }
        let mut r = Reader { buf: body, pos: 10 };
        let config_len = r.u64()? as usize;
        let config = String::from_utf8(r.take(config_len)?.to_vec())
            .map_err(|_| Error::Archive("config is not UTF-8".into()))?;
        let n_sections = r.u32()?;
        let mut sections = Vec::new();
        for _ in 0..n_sections {
            let name = r.string()?;
            let n_arrays = r.u32()?;
            let mut arrays = Vec::new();
            for _ in 0..n_arrays {
                let aname = r.string()?;
                let ndim = r.u32()? as usize;
                let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
                let count = shape
                    .iter()
                    .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                    .ok_or_else(|| Error::Archive(format!("array `{aname}` is too large")))?;
                let raw = r.take(count.checked_mul(8).ok_or_else(|| Error::Archive("overflow".into()))?)?;
                let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
                arrays.push(NamedArray { name: aname, shape, data });
            }
            sections.push(Section { name, arrays });
        }
        if r.pos != body.len() {
            return Err(Error::Archive(format!("{} trailing bytes", body.len() - r.pos)));
        }
        Ok(Self { format_version: version, config, sections })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Archive("unexpected end of archive".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Archive("name is not UTF-8".into()))
    }
}

/// Write via a sibling temp file and rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn params_section(name: &str, model: &impl Parameters) -> Section {
    Section {
        name: name.into(),
        arrays: model.tensors().into_iter().map(|(n, t)| NamedArray::matrix(n, t)).collect(),
    }
}

fn fill_params(model: &mut impl Parameters, section: &Section) -> Result<()> {
    let names: Vec<String> = model.tensors().into_iter().map(|(n, _)| n).collect();
    for (name, slot) in names.iter().zip(model.tensors_mut()) {
        let m = section.get(name)?.to_matrix()?;
        if m.dim() != slot.dim() {
            return Err(Error::Archive(format!("`{name}` has shape {:?}, expected {:?}", m.dim(), slot.dim())));
        }
        *slot = m;
    }
    Ok(())
}

pub fn classifier_section(params: &ClassifierParams) -> Section {
    params_section("classifier", params)
}

pub fn classifier_from_section(section: &Section) -> Result<ClassifierParams> {
    let w = section.get("lstm.w_i")?;
    let (hidden, input) = match w.shape[..] {
        [h, i] => (h, i),
        _ => return Err(Error::Archive("lstm.w_i is not a matrix".into())),
    };
    let mut rng = crate::rng::seeded(0);
    let mut params = ClassifierParams {
        lstm: LstmParams::new(input, hidden, &mut rng),
        out: Dense::new(hidden, crate::data_model::NUM_CLASSES, &mut rng),
    };
    fill_params(&mut params, section)?;
    Ok(params)
}

pub fn projector_section(p: &Projector) -> Section {
    let mut arrays = vec![NamedArray::scalar("block_width", p.block_width as f64)];
    for (i, m) in p.blocks.iter().enumerate() {
        arrays.push(NamedArray::vector(format!("{i}.mean"), &m.mean));
        arrays.push(NamedArray::matrix(format!("{i}.components"), &m.components));
        arrays.push(NamedArray::vector(format!("{i}.explained_variance"), &m.explained_variance));
    }
    Section { name: "pca".into(), arrays }
}

pub fn projector_from_section(section: &Section) -> Result<Projector> {
    let block_width = section.scalar("block_width")? as usize;
    let mut blocks = Vec::new();
    while section.arrays.iter().any(|a| a.name == format!("{}.mean", blocks.len())) {
        let i = blocks.len();
        let model = PcaModel {
            mean: section.get(&format!("{i}.mean"))?.to_vector()?,
            components: section.get(&format!("{i}.components"))?.to_matrix()?,
            explained_variance: section.get(&format!("{i}.explained_variance"))?.to_vector()?,
        };
        if model.mean.len() != block_width || model.components.ncols() != block_width {
            return Err(Error::Archive(format!("PCA block {i} does not match block width {block_width}")));
        }
        blocks.push(model);
    }
    if blocks.is_empty() {
        return Err(Error::Archive("PCA section holds no blocks".into()));
    }
    Ok(Projector { block_width, blocks })
}

pub fn front_end_sections(front: &FrontEnd) -> Vec<Section> {
    let mut out = vec![projector_section(&front.projector)];
    if let Some(s) = &front.scaler {
        out.push(Section {
            name: "feature_scaler".into(),
            arrays: vec![NamedArray::vector("mean", &s.mean), NamedArray::vector("std", &s.std)],
        });
    }
    out
}

/// Rebuild the fitted front end; feature extraction settings come from the
/// run config embedded alongside.
pub fn front_end_from_archive(archive: &ModelArchive, features: FeatureConfig) -> Result<FrontEnd> {
    let projector = projector_from_section(archive.require("pca")?)?;
    let scaler = match archive.section("feature_scaler") {
        Some(s) => Some(Standardizer { mean: s.get("mean")?.to_vector()?, std: s.get("std")?.to_vector()? }),
        None => None,
    };
    Ok(FrontEnd { projector, features, scaler })
}

pub fn gan_section_name(class_id: usize) -> String {
    format!("gan_{class_id}")
}

pub fn gan_section(pair: &GanPair) -> Section {
    let mut arrays = vec![
        NamedArray::scalar("class_id", pair.class_id as f64),
        NamedArray::scalar("latent_dim", pair.latent_dim as f64),
        NamedArray::scalar("leaky_slope", pair.generator.slope),
        NamedArray::vector("scaler.mean", &pair.scaler.mean),
        NamedArray::vector("scaler.std", &pair.scaler.std),
    ];
    for (prefix, net) in [("g", &pair.generator), ("d", &pair.discriminator)] {
        arrays.extend(net.tensors().into_iter().map(|(n, t)| NamedArray::matrix(format!("{prefix}.{n}"), t)));
    }
    Section { name: gan_section_name(pair.class_id), arrays }
}

fn mlp_from_section(section: &Section, prefix: &str, slope: f64) -> Result<Mlp> {
    let mut layers = Vec::new();
    loop {
        let i = layers.len();
        let Ok(w) = section.get(&format!("{prefix}.{i}.w")) else { break };
        let b = section.get(&format!("{prefix}.{i}.b"))?;
        let layer = Dense { w: w.to_matrix()?, b: b.to_matrix()? };
        if layer.b.dim() != (1, layer.w.nrows()) {
            return Err(Error::Archive(format!("{prefix}.{i}: bias does not match weights")));
        }
        layers.push(layer);
    }
    if layers.is_empty() || layers.windows(2).any(|w| w[0].output_dim() != w[1].input_dim()) {
        return Err(Error::Archive(format!("network `{prefix}` has inconsistent layers")));
    }
    Ok(Mlp { layers, slope })
}

pub fn gan_from_section(section: &Section) -> Result<GanPair> {
    let slope = section.scalar("leaky_slope")?;
    let pair = GanPair {
        class_id: section.scalar("class_id")? as usize,
        latent_dim: section.scalar("latent_dim")? as usize,
        generator: mlp_from_section(section, "g", slope)?,
        discriminator: mlp_from_section(section, "d", slope)?,
        scaler: Standardizer {
            mean: section.get("scaler.mean")?.to_vector()?,
            std: section.get("scaler.std")?.to_vector()?,
        },
    };
    if pair.generator.input_dim() != pair.latent_dim
        || pair.scaler.mean.len() != pair.feature_dim()
        || pair.discriminator.input_dim() != pair.feature_dim()
    {
        return Err(Error::Archive(format!("{} has inconsistent shapes", section.name)));
    }
    Ok(pair)
}

/// Every GAN stored in the archive, by ascending class id.
pub fn gans(archive: &ModelArchive) -> Result<Vec<GanPair>> {
    let mut out: Vec<GanPair> = archive
        .sections
        .iter()
        .filter(|s| s.name.strip_prefix("gan_").is_some_and(|id| id.parse::<usize>().is_ok()))
        .map(gan_from_section)
        .collect::<Result<_>>()?;
    out.sort_by_key(|p| p.class_id);
    Ok(out)
}
