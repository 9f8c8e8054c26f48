//! Dataset manifests: one CSV row per sample with id, image path, caption
//! text, and sentiment label.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Label names in class-id order.
pub const LABEL_NAMES: [&str; 3] = ["negative", "neutral", "positive"];

pub fn parse_label(s: &str) -> Option<usize> {
    LABEL_NAMES.iter().position(|&name| name == s)
}

/// Column names to read a manifest with. Distributions that ship their own
/// schema are handled by remapping here instead of rewriting their files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub id: String,
    pub image_path: String,
    pub text: String,
    pub label: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            id: "id".into(),
            image_path: "image_path".into(),
            text: "text".into(),
            label: "label".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub id: String,
    /// As written in the file, relative to the manifest's directory.
    pub image_path: PathBuf,
    pub text: String,
    /// Class id, already mapped from the label name.
    pub label: usize,
}

/// Rows in file order; sample index i is manifest row i throughout the
/// pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    dir: PathBuf,
    rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn rows(&self) -> &[ManifestRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Absolute location of row i's image.
    pub fn image_file(&self, i: usize) -> PathBuf {
        self.dir.join(&self.rows[i].image_path)
    }

    pub fn labels(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.label).collect()
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    load_manifest_with(path, &ColumnMap::default())
}

/// Image paths are resolved against the manifest's directory and must
/// exist; images themselves are read later, in the preprocessing stage.
pub fn load_manifest_with(path: &Path, columns: &ColumnMap) -> Result<Manifest> {
    let dir = path.parent().unwrap_or_else(|| Path::new("")).to_path_buf();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?
        .clone();
    let field = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::format(format!(
                "{}: header {:?} has no column {name:?}",
                path.display(),
                headers.iter().collect::<Vec<_>>().join(",")
            ))
        })
    };
    let id_col = field(&columns.id)?;
    let image_col = field(&columns.image_path)?;
    let text_col = field(&columns.text)?;
    let label_col = field(&columns.label)?;

    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            line: row,
            message: e.to_string(),
        })?;
        let get = |col: usize| -> Result<&str> {
            record.get(col).ok_or_else(|| {
                Error::format(format!(
                    "row {row} has {} fields; expected {}",
                    record.len(),
                    headers.len()
                ))
            })
        };
        let id = get(id_col)?.to_string();
        let image_path = PathBuf::from(get(image_col)?);
        let text = get(text_col)?.to_string();
        let label_name = get(label_col)?;
        let label = parse_label(label_name).ok_or_else(|| Error::Parse {
            line: row,
            message: format!(
                "unknown label {label_name:?}; expected negative, neutral, or positive"
            ),
        })?;
        if !seen.insert(id.clone()) {
            return Err(Error::integrity(format!("duplicate id {id:?} at row {row}")));
        }
        let image_file = dir.join(&image_path);
        if !image_file.is_file() {
            return Err(Error::integrity(format!(
                "row {row}: image file {} does not exist",
                image_file.display()
            )));
        }
        rows.push(ManifestRow { id, image_path, text, label });
    }
    if rows.is_empty() {
        return Err(Error::integrity(format!(
            "{}: manifest has no data rows",
            path.display()
        )));
    }
    Ok(Manifest { dir, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_manifest(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("manifest.csv");
        fs::write(&path, body).unwrap();
        path
    }

    fn touch_images(dir: &Path, names: &[&str]) {
        fs::create_dir_all(dir.join("img")).unwrap();
        for name in names {
            fs::write(dir.join("img").join(name), b"x").unwrap();
        }
    }

    #[test]
    fn well_formed_file_loads_in_order() {
        let tmp = tempfile::tempdir().unwrap();
        touch_images(tmp.path(), &["a.ppm", "b.ppm", "c.ppm"]);
        let path = write_manifest(
            tmp.path(),
            "id,image_path,text,label\n\
             m1,img/a.ppm,so grim today,negative\n\
             m2,img/b.ppm,\"plain, plain day\",neutral\n\
             m3,img/c.ppm,glad and bright,positive\n",
        );
        let m = load_manifest(&path).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.rows()[0].id, "m1");
        assert_eq!(m.rows()[1].text, "plain, plain day");
        assert_eq!(m.labels(), vec![0, 1, 2]);
        assert!(m.image_file(2).ends_with("img/c.ppm"));
    }

    #[test]
    fn unknown_label_names_its_row() {
        let tmp = tempfile::tempdir().unwrap();
        touch_images(tmp.path(), &["a.ppm", "b.ppm"]);
        let path = write_manifest(
            tmp.path(),
            "id,image_path,text,label\n\
             m1,img/a.ppm,fine,positive\n\
             m2,img/b.ppm,meh,meh\n",
        );
        match load_manifest(&path).unwrap_err() {
            Error::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("meh"), "{message}");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn duplicate_ids_are_an_integrity_error() {
        let tmp = tempfile::tempdir().unwrap();
        touch_images(tmp.path(), &["a.ppm", "b.ppm"]);
        let path = write_manifest(
            tmp.path(),
            "id,image_path,text,label\n\
             m1,img/a.ppm,one,positive\n\
             m1,img/b.ppm,two,negative\n",
        );
        let err = load_manifest(&path).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)), "{err}");
        assert!(err.to_string().contains("m1"));
    }

    #[test]
    fn missing_image_lists_its_path() {
        let tmp = tempfile::tempdir().unwrap();
        touch_images(tmp.path(), &["a.ppm"]);
        let path = write_manifest(
            tmp.path(),
            "id,image_path,text,label\n\
             m1,img/a.ppm,one,positive\n\
             m2,img/gone.ppm,two,negative\n",
        );
        let err = load_manifest(&path).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)), "{err}");
        assert!(err.to_string().contains("gone.ppm"), "{err}");
    }

    #[test]
    fn column_mapping_reads_foreign_schemas() {
        let tmp = tempfile::tempdir().unwrap();
        touch_images(tmp.path(), &["a.ppm"]);
        let path = write_manifest(
            tmp.path(),
            "image_name,ocr_text,overall_sentiment,key\n\
             img/a.ppm,hello there,neutral,row7\n",
        );
        let columns = ColumnMap {
            id: "key".into(),
            image_path: "image_name".into(),
            text: "ocr_text".into(),
            label: "overall_sentiment".into(),
        };
        let m = load_manifest_with(&path, &columns).unwrap();
        assert_eq!(m.rows()[0].id, "row7");
        assert_eq!(m.rows()[0].label, 1);
        assert!(load_manifest(&path).is_err());
    }

    #[test]
    fn empty_manifest_is_an_integrity_error() {
        let tmp = tempfile::tempdir().unwrap();
        let path = write_manifest(tmp.path(), "id,image_path,text,label\n");
        assert!(matches!(
            load_manifest(&path).unwrap_err(),
            Error::Integrity(_)
        ));
    }
}
