use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::format::{parse_template, render_template};
use super::template::PromptTemplate;
use super::{PromptError, SectionKind};

/// Replaces whole section bodies and bumps the version.
///
/// Only Context and Expertise may be touched unless `allow_override` is set.
/// Sections absent from `proposal` are carried over byte-for-byte.
pub fn merge_refinement(
    current: &PromptTemplate,
    proposal: &BTreeMap<SectionKind, String>,
    allow_override: bool,
) -> Result<PromptTemplate, PromptError> {
    if !allow_override {
        if let Some(kind) = proposal.keys().find(|k| k.is_mandatory()) {
            return Err(PromptError::OverrideRequired(*kind));
        }
    }
    let mut next = current.clone();
    for (kind, body) in proposal {
        next.sections.insert(*kind, body.clone());
    }
    next.validate()?;
    next.version = current.version + 1;
    next.provenance = String::new();
    Ok(next)
}

/// Append-only history of template versions, optionally mirrored to a
/// directory with one `vNNNN.tmpl` file per version.
#[derive(Debug, Clone)]
pub struct TemplateStore {
    versions: Vec<PromptTemplate>,
    dir: Option<PathBuf>,
}

impl TemplateStore {
    pub fn in_memory(initial: PromptTemplate) -> Result<Self, PromptError> {
        initial.validate()?;
        Ok(Self {
            versions: vec![initial],
            dir: None,
        })
    }

    /// Opens `dir`, loading every stored version. If the directory holds no
    /// versions, `initial` becomes the first one and is written out.
    pub fn open(dir: impl Into<PathBuf>, initial: PromptTemplate) -> Result<Self, PromptError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err)?;
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(io_err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "tmpl"))
            .collect();
        files.sort();
        let mut versions = Vec::with_capacity(files.len());
        for f in files {
            let text = fs::read_to_string(&f).map_err(io_err)?;
            versions.push(parse_template(&text)?);
        }
        versions.sort_by_key(|t| t.version);
        if versions.windows(2).any(|w| w[0].version >= w[1].version) {
            return Err(PromptError::Io(format!("duplicate versions in {}", dir.display())));
        }
        let mut store = Self {
            versions,
            dir: Some(dir),
        };
        if store.versions.is_empty() {
            initial.validate()?;
            store.persist(&initial)?;
            store.versions.push(initial);
        }
        Ok(store)
    }

    pub fn current(&self) -> &PromptTemplate {
        self.versions.last().expect("store is never empty")
    }

    pub fn get(&self, version: u64) -> Result<&PromptTemplate, PromptError> {
        self.versions
            .iter()
            .find(|t| t.version == version)
            .ok_or(PromptError::UnknownVersion(version))
    }

    pub fn history(&self) -> &[PromptTemplate] {
        &self.versions
    }

    /// Merges a refinement into the current version and records `provenance`.
    pub fn merge(
        &mut self,
        proposal: &BTreeMap<SectionKind, String>,
        allow_override: bool,
        provenance: &str,
    ) -> Result<&PromptTemplate, PromptError> {
        let mut next = merge_refinement(self.current(), proposal, allow_override)?;
        next.provenance = provenance.to_string();
        self.push(next)
    }

    /// Stores an edited template as the next version (explicit editor save).
    pub fn replace(&mut self, template: PromptTemplate, provenance: &str) -> Result<&PromptTemplate, PromptError> {
        template.validate()?;
        let mut next = template;
        next.version = self.current().version + 1;
        next.provenance = provenance.to_string();
        self.push(next)
    }

    fn push(&mut self, next: PromptTemplate) -> Result<&PromptTemplate, PromptError> {
        debug_assert!(next.version > self.current().version);
        self.persist(&next)?;
        self.versions.push(next);
        Ok(self.current())
    }

    fn persist(&self, t: &PromptTemplate) -> Result<(), PromptError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        write_atomic(&dir.join(format!("v{:04}.tmpl", t.version)), &render_template(t))
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<(), PromptError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(text.as_bytes()).map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

fn io_err(e: std::io::Error) -> PromptError {
    PromptError::Io(e.to_string())
}
