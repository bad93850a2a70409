use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{Dataset, DatasetError, Modality, SampleRecord, Split};
use crate::prompt::{ImageRef, Scenario};
use crate::Label;

/// Class directories of the stripped-wire layout; the first is the normal class.
pub const WIRE_CLASSES: [&str; 3] = ["good", "pulled_strands", "cut_strands"];

const NORMAL_DIR: &str = "good";

pub fn media_type_for(path: &Path) -> Option<&'static str> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    Some(match ext.as_str() {
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "bmp" => "image/bmp",
        "gif" => "image/gif",
        "webp" => "image/webp",
        _ => return None,
    })
}

/// Image files directly inside `dir`, sorted by file name.
fn list_images(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| DatasetError::io(dir, e))? {
        let path = entry.map_err(|e| DatasetError::io(dir, e))?.path();
        if path.is_file() && media_type_for(&path).is_some() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn subdirs(dir: &Path) -> Result<Vec<String>, DatasetError> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| DatasetError::io(dir, e))? {
        let entry = entry.map_err(|e| DatasetError::io(dir, e))?;
        if entry.path().is_dir() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    Ok(names)
}

fn require_dir(dir: &Path) -> Result<(), DatasetError> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(DatasetError::Layout(format!("missing directory {}", dir.display())))
    }
}

fn image_record(root: &Path, path: &Path, label: Label, defect_class: Option<&str>, split: Split) -> SampleRecord {
    let id = path.strip_prefix(root).unwrap_or(path).to_string_lossy().replace('\\', "/");
    SampleRecord {
        id,
        modality: Modality::Image(ImageRef::new(path, media_type_for(path).expect("filtered by extension"))),
        label,
        defect_class: defect_class.map(str::to_string),
        split,
    }
}

/// SHA-256 over `<id>\t<size>\n` lines in sample order.
fn file_list_checksum(samples: &[SampleRecord]) -> Result<String, DatasetError> {
    let mut h = Sha256::new();
    for s in samples {
        if let Modality::Image(img) = &s.modality {
            let len = fs::metadata(&img.path).map_err(|e| DatasetError::io(&img.path, e))?.len();
            h.update(format!("{}\t{len}\n", s.id));
        }
    }
    Ok(hex::encode(h.finalize()))
}

/// `root/<category>/{train/good, test/<class>}`. The whole training pool
/// is loaded as the reference split; only its first image is used in prompts.
pub fn load_mvtec_layout(root: &Path, category: &str) -> Result<Dataset, DatasetError> {
    let base = root.join(category);
    let train = base.join("train").join(NORMAL_DIR);
    let test = base.join("test");
    require_dir(&train)?;
    require_dir(&test)?;

    let mut samples: Vec<SampleRecord> = list_images(&train)?
        .iter()
        .map(|p| image_record(&base, p, Label::Normal, None, Split::Reference))
        .collect();
    if samples.is_empty() {
        return Err(DatasetError::EmptyPool);
    }

    let before = samples.len();
    for class in subdirs(&test)? {
        let (label, defect) = if class == NORMAL_DIR {
            (Label::Normal, None)
        } else {
            (Label::Anomalous, Some(class.as_str()))
        };
        for p in list_images(&test.join(&class))? {
            samples.push(image_record(&base, &p, label, defect, Split::Test));
        }
    }
    if samples.len() == before {
        return Err(DatasetError::Layout(format!("no test images under {}", test.display())));
    }

    let checksum = file_list_checksum(&samples)?;
    let first = samples[0].id.clone();
    Ok(Dataset::assemble(Scenario::Cable, base, samples, BTreeMap::new(), checksum, vec![first]))
}

/// `root/{good, pulled_strands, cut_strands}`; the first file of each class
/// is that class's reference and never a test query.
pub fn load_stripped_wire(root: &Path) -> Result<Dataset, DatasetError> {
    let mut samples = Vec::new();
    let mut references = Vec::new();
    for class in WIRE_CLASSES {
        let dir = root.join(class);
        require_dir(&dir)?;
        let files = list_images(&dir)?;
        if files.is_empty() {
            return Err(DatasetError::Layout(format!("no images in {}", dir.display())));
        }
        let (label, defect) = if class == NORMAL_DIR {
            (Label::Normal, None)
        } else {
            (Label::Anomalous, Some(class))
        };
        for (i, p) in files.iter().enumerate() {
            let split = if i == 0 { Split::Reference } else { Split::Test };
            let rec = image_record(root, p, label, defect, split);
            if i == 0 {
                references.push(rec.id.clone());
            }
            samples.push(rec);
        }
    }
    let checksum = file_list_checksum(&samples)?;
    Ok(Dataset::assemble(
        Scenario::StrippedWire,
        root.to_path_buf(),
        samples,
        BTreeMap::new(),
        checksum,
        references,
    ))
}
