use std::path::Path;

use globset::{Glob, GlobSet, GlobSetBuilder};
use rayon::prelude::*;
use walkdir::WalkDir;

use super::{normalize_path, parse_file, FileModel, ParseDiagnostic};
use crate::error::{Error, Result};

/// A parsed file together with the text it was parsed from.
#[derive(Debug, Clone)]
pub struct SourceFile {
    pub model: FileModel,
    pub source: String,
}

#[derive(Debug, Clone, Default)]
pub struct ScanOutcome {
    /// Sorted by repo-relative path.
    pub files: Vec<SourceFile>,
    pub diagnostics: Vec<ParseDiagnostic>,
}

impl ScanOutcome {
    pub fn models(&self) -> Vec<FileModel> {
        self.files.iter().map(|f| f.model.clone()).collect()
    }
}

fn build_excludes(patterns: &[String]) -> Result<GlobSet> {
    let mut builder = GlobSetBuilder::new();
    for pattern in patterns {
        let glob = Glob::new(pattern).map_err(|e| Error::Pattern {
            pattern: pattern.clone(),
            message: e.to_string(),
        })?;
        builder.add(glob);
    }
    builder.build().map_err(|e| Error::Pattern {
        pattern: patterns.join(","),
        message: e.to_string(),
    })
}

fn is_skipped_dir(name: &str) -> bool {
    (name.starts_with('.') && name.len() > 1) || name == "__pycache__"
}

/// Finds every `.py` file under `root` (hidden directories and `__pycache__`
/// skipped), drops paths matching `excludes`, and parses the rest in parallel.
pub fn scan_repository(root: &Path, excludes: &[String]) -> Result<ScanOutcome> {
    if !root.is_dir() {
        return Err(Error::MissingRoot(root.to_path_buf()));
    }
    let excludes = build_excludes(excludes)?;

    let mut paths = Vec::new();
    let walker = WalkDir::new(root).follow_links(false).into_iter();
    for entry in walker.filter_entry(|e| e.depth() == 0 || !is_skipped_dir(&e.file_name().to_string_lossy())) {
        let entry = entry.map_err(|e| {
            let path = e.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf());
            Error::io(path, e.into())
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) != Some("py") {
            continue;
        }
        let relative = path.strip_prefix(root).unwrap_or(path);
        let relative = normalize_path(&relative.to_string_lossy());
        if excludes.is_match(&relative) {
            continue;
        }
        paths.push((relative, path.to_path_buf()));
    }
    paths.sort();

    let parsed: Vec<Result<std::result::Result<SourceFile, ParseDiagnostic>>> = paths
        .par_iter()
        .map(|(relative, absolute)| {
            let bytes = std::fs::read(absolute).map_err(|e| Error::io(absolute, e))?;
            let Ok(source) = String::from_utf8(bytes) else {
                return Ok(Err(ParseDiagnostic {
                    path: relative.clone(),
                    message: "file is not valid UTF-8".into(),
                }));
            };
            Ok(parse_file(relative, &source).map(|model| SourceFile { model, source }))
        })
        .collect();

    let mut outcome = ScanOutcome::default();
    for item in parsed {
        match item? {
            Ok(file) => outcome.files.push(file),
            Err(diag) => outcome.diagnostics.push(diag),
        }
    }
    Ok(outcome)
}
