use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{LabeledImageSet, ManifestEntry};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::series::TimeSeries;

pub const MANIFEST_FILE: &str = "manifest.jsonl";

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::from(e).context(format!("opening `{}`", path.display())))
}

/// One JSON object per line.
pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for entry in entries {
        serde_json::to_writer(&mut out, entry)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let reader = BufReader::new(open(path.as_ref())?);
    let mut entries = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line)
            .map_err(|e| Error::Manifest(format!("{}:{}: {e}", path.as_ref().display(), n + 1)))?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Writes every image into `dir` under its manifest name, plus
/// `manifest.jsonl`. Returns the manifest path. Image paths must be unique.
pub fn save_set(set: &LabeledImageSet, dir: impl AsRef<Path>, png: bool) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let mut seen = HashSet::new();
    if let Some(dup) = set.manifest.iter().find(|e| !seen.insert(e.image_path.as_str())) {
        return Err(Error::Manifest(format!("duplicate image path `{}`", dup.image_path)));
    }
    fs::create_dir_all(dir)?;
    for (image, entry) in set.images.iter().zip(&set.manifest) {
        let path = dir.join(&entry.image_path);
        image.save_pgm(&path)?;
        if png {
            image.save_png(path.with_extension("png"))?;
        }
    }
    let manifest = dir.join(MANIFEST_FILE);
    write_manifest(&manifest, &set.manifest)?;
    Ok(manifest)
}

/// Loads a manifest and the PGM files it names, relative to its directory.
pub fn load_set(manifest_path: impl AsRef<Path>) -> Result<LabeledImageSet> {
    let manifest_path = manifest_path.as_ref();
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let manifest = read_manifest(manifest_path)?;
    let images = manifest
        .iter()
        .map(|e| {
            GrayImage::load_pgm(base.join(&e.image_path), e.label.clone())
                .map_err(|err| err.context(format!("loading `{}`", e.image_path)))
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledImageSet::new(images, manifest)
}

pub fn save_corpus(path: impl AsRef<Path>, corpus: &[TimeSeries]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, corpus)?;
    out.flush()?;
    Ok(())
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<TimeSeries>> {
    let corpus: Vec<TimeSeries> = serde_json::from_reader(BufReader::new(open(path.as_ref())?))
        .map_err(|e| Error::InvalidSeries(format!("malformed corpus file: {e}")))?;
    for series in &corpus {
        series.validate()?;
    }
    Ok(corpus)
}
