//! Dataset directory: one raster per sample role plus a tab-separated
//! manifest with columns `id role path min max split`.

use std::path::Path;

use super::{read_raster, write_atomic, write_raster};
use crate::error::{Error, Result};
use crate::wald::{DatasetSplit, Normalization, SamplePair, SplitRole};

pub const MANIFEST_NAME: &str = "manifest.tsv";
const HEADER: [&str; 6] = ["id", "role", "path", "min", "max", "split"];

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    pub role: String,
    pub path: String,
    pub min: f64,
    pub max: f64,
    pub split: SplitRole,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<SamplePair>,
    pub split: DatasetSplit,
    /// Manifest bytes as stored, for provenance hashing.
    pub manifest: Vec<u8>,
}

impl Dataset {
    pub fn subset(&self, role: SplitRole) -> Vec<SamplePair> {
        let ids = self.split.ids(role);
        ids.iter()
            .filter_map(|id| self.samples.iter().find(|s| &s.id == id).cloned())
            .collect()
    }

    pub fn get(&self, id: &str) -> Option<&SamplePair> {
        self.samples.iter().find(|s| s.id == id)
    }
}

pub fn manifest_text(entries: &[ManifestEntry]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(Vec::new());
    w.write_record(HEADER)?;
    for e in entries {
        w.write_record([
            e.id.as_str(),
            &e.role,
            &e.path,
            &format!("{:?}", e.min),
            &format!("{:?}", e.max),
            e.split.name(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn parse_manifest(bytes: &[u8]) -> Result<Vec<ManifestEntry>> {
    let mut r = csv::ReaderBuilder::new().delimiter(b'\t').from_reader(bytes);
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::parse(
            "dataset manifest",
            format!("unexpected header {header:?}"),
        ));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::parse("dataset manifest", format!("row {}: bad {what}", line + 2));
        let num = |i: usize, what: &str| rec.get(i).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| bad(what));
        out.push(ManifestEntry {
            id: rec.get(0).ok_or_else(|| bad("id"))?.to_string(),
            role: rec.get(1).ok_or_else(|| bad("role"))?.to_string(),
            path: rec.get(2).ok_or_else(|| bad("path"))?.to_string(),
            min: num(3, "min")?,
            max: num(4, "max")?,
            split: rec.get(5).and_then(SplitRole::from_name).ok_or_else(|| bad("split"))?,
        });
    }
    Ok(out)
}

/// Writes every sample's rasters and the manifest; returns the manifest bytes.
pub fn write_dataset(dir: &Path, samples: &[SamplePair], split: &DatasetSplit) -> Result<Vec<u8>> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(samples.len() * 3);
    for s in samples {
        let role = split
            .role_of(&s.id)
            .ok_or_else(|| Error::invalid(format!("sample {} is not in the split", s.id)))?;
        for (name, raster, norm) in [
            ("pan", &s.pan, s.pan_norm),
            ("lrms", &s.lrms, s.ms_norm),
            ("gt", &s.gt, s.ms_norm),
        ] {
            let file = format!("{}_{name}.msr", s.id);
            write_raster(raster, dir.join(&file))?;
            entries.push(ManifestEntry {
                id: s.id.clone(),
                role: name.to_string(),
                path: file,
                min: norm.min,
                max: norm.max,
                split: role,
            });
        }
    }
    let bytes = manifest_text(&entries)?;
    write_atomic(&dir.join(MANIFEST_NAME), &bytes)?;
    Ok(bytes)
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = crate::io::read_file(&dir.join(MANIFEST_NAME))?;
    let entries = parse_manifest(&manifest)?;
    let mut ids: Vec<&str> = Vec::new();
    for e in &entries {
        if !ids.contains(&e.id.as_str()) {
            ids.push(&e.id);
        }
    }
    let mut samples = Vec::with_capacity(ids.len());
    let mut split = DatasetSplit {
        seed: 0,
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for id in ids {
        let find = |role: &str| {
            entries
                .iter()
                .find(|e| e.id == id && e.role == role)
                .ok_or_else(|| Error::parse("dataset manifest", format!("sample {id} has no {role} entry")))
        };
        let (pan, lrms, gt) = (find("pan")?, find("lrms")?, find("gt")?);
        match gt.split {
            SplitRole::Train => split.train.push(id.to_string()),
            SplitRole::Val => split.val.push(id.to_string()),
            SplitRole::Test => split.test.push(id.to_string()),
        }
        samples.push(SamplePair {
            id: id.to_string(),
            pan: read_raster(dir.join(&pan.path))?,
            lrms: read_raster(dir.join(&lrms.path))?,
            gt: read_raster(dir.join(&gt.path))?,
            ms_norm: Normalization {
                min: gt.min,
                max: gt.max,
            },
            pan_norm: Normalization {
                min: pan.min,
                max: pan.max,
            },
        });
    }
    Ok(Dataset {
        samples,
        split,
        manifest,
    })
}
