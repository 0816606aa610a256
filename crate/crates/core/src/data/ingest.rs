use super::{DatasetManifest, ImageRecord};
use crate::error::{Error, Result};
use regex::Regex;
use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

/// Rows skipped during ingestion, plus the manifest built from the rest.
#[derive(Clone, Debug)]
pub struct IngestReport {
    pub manifest: DatasetManifest,
    pub warnings: Vec<String>,
}

/// Trims, case-folds and collapses internal whitespace.
pub fn clean_artist(raw: &str) -> String {
    raw.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// First 3 or 4 digit run that is not part of a longer number.
pub fn parse_year(raw: &str) -> Option<i32> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"\d+").expect("static regex"));
    re.find_iter(raw)
        .map(|m| m.as_str())
        .find(|s| (3..=4).contains(&s.len()))
        .and_then(|s| s.parse().ok())
}

#[derive(serde::Deserialize)]
struct MetadataRow {
    id: String,
    path: String,
    artist: String,
    #[serde(default)]
    date: String,
}

/// Builds a manifest from a metadata CSV (`id,path,artist,date`) whose paths
/// are relative to `image_dir`. Bad rows are skipped with a warning.
pub fn ingest(image_dir: &Path, metadata_file: &Path) -> Result<IngestReport> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::Headers)
        .from_path(metadata_file)?;
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for (i, row) in reader.deserialize::<MetadataRow>().enumerate() {
        let line = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                warnings.push(format!("line {line}: unreadable row: {e}"));
                continue;
            }
        };
        let id = row.id.trim().to_string();
        if id.is_empty() {
            warnings.push(format!("line {line}: empty id"));
            continue;
        }
        if seen.contains(&id) {
            warnings.push(format!("line {line}: duplicate id {id} rejected"));
            continue;
        }
        let rel = PathBuf::from(row.path.trim());
        let full = if rel.is_absolute() {
            rel.clone()
        } else {
            image_dir.join(&rel)
        };
        if !full.is_file() {
            warnings.push(format!("line {line}: missing file {}", full.display()));
            continue;
        }
        let artist = clean_artist(&row.artist);
        if artist.is_empty() {
            warnings.push(format!("line {line}: empty artist for {id}"));
            continue;
        }
        seen.insert(id.clone());
        records.push(ImageRecord {
            id,
            path: rel,
            artist,
            period: parse_year(&row.date),
        });
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    if records.is_empty() {
        return Err(Error::Data(format!("no valid rows in {}", metadata_file.display())));
    }
    Ok(IngestReport {
        manifest: DatasetManifest::new(image_dir, records)?,
        warnings,
    })
}

/// Writes a manifest back out in the metadata CSV layout `ingest` reads.
pub fn export_metadata_csv(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "path", "artist", "date"])?;
    for r in &manifest.records {
        let date = r.period.map(|y| y.to_string()).unwrap_or_default();
        w.write_record([
            r.id.as_str(),
            &r.path.to_string_lossy(),
            r.artist.as_str(),
            date.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn artist_normalisation() {
        assert_eq!(clean_artist(" Vincent  van GOGH "), clean_artist("vincent van gogh"));
        assert_eq!(clean_artist("\tRembrandt\nvan Rijn"), "rembrandt van rijn");
        assert_eq!(clean_artist("   "), "");
    }

    #[test]
    fn ingest_skips_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["a.png", "b.png"] {
            fs::write(dir.path().join(name), b"x").unwrap();
        }
        let meta = dir.path().join("meta.csv");
        fs::write(
            &meta,
            "id,path,artist,date\n\
             a,a.png, Vincent  van GOGH ,c. 1888\n\
             a,b.png,someone,1900\n\
             b,b.png,Frida Kahlo,undated\n\
             c,c.png,Nobody,1700\n\
             d,a.png,   ,1700\n",
        )
        .unwrap();
        let rep = ingest(dir.path(), &meta).unwrap();
        assert_eq!(rep.manifest.len(), 2);
        assert_eq!(rep.warnings.len(), 3);
        let a = rep.manifest.get("a").unwrap();
        assert_eq!(a.artist, "vincent van gogh");
        assert_eq!(a.period, Some(1888));
        assert_eq!(a.path, PathBuf::from("a.png"));
        assert_eq!(rep.manifest.get("b").unwrap().period, None);
    }

    #[test]
    fn ingest_with_no_valid_rows_fails() {
        let dir = tempfile::tempdir().unwrap();
        let meta = dir.path().join("meta.csv");
        fs::write(&meta, "id,path,artist,date\nx,missing.png,a,1900\n").unwrap();
        assert!(matches!(ingest(dir.path(), &meta), Err(Error::Data(_))));
    }
}
