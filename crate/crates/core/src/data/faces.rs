use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::labels::Expression;
use crate::au::{au_index, AuVector, AU_COUNT, AU_NAMES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceRecord {
    pub image_path: String,
    pub model_id: String,
    pub expression: Expression,
    pub au: AuVector,
}

impl FaceRecord {
    /// File stem of the image, used as the face identifier.
    pub fn face_id(&self) -> &str {
        Path::new(&self.image_path)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or(&self.image_path)
    }
}

/// Which gaze directions and camera angles to keep from the face index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceFilter {
    /// `None` keeps every gaze.
    pub gazes: Option<Vec<String>>,
    pub camera_angles: Option<Vec<String>>,
}

impl Default for FaceFilter {
    fn default() -> Self {
        Self::frontal()
    }
}

impl FaceFilter {
    /// Frontal camera and frontal gaze only.
    pub fn frontal() -> Self {
        FaceFilter {
            gazes: Some(vec!["frontal".into()]),
            camera_angles: Some(vec!["090".into(), "90".into(), "frontal".into()]),
        }
    }

    pub fn all() -> Self {
        FaceFilter {
            gazes: None,
            camera_angles: None,
        }
    }

    fn keeps(&self, gaze: &str, camera: &str) -> bool {
        let ok = |allowed: &Option<Vec<String>>, v: &str| {
            allowed
                .as_ref()
                .is_none_or(|a| a.iter().any(|x| x.eq_ignore_ascii_case(v.trim())))
        };
        ok(&self.gazes, gaze) && ok(&self.camera_angles, camera)
    }
}

#[derive(Deserialize)]
struct IndexRow {
    image_path: String,
    model_id: String,
    expression: String,
    gaze: String,
    camera_angle: String,
}

/// Loads the face index joined with AU intensities, keeping frontal images.
pub fn load_face_corpus(index_path: &Path, au_csv_path: &Path) -> Result<Vec<FaceRecord>> {
    load_face_corpus_with(index_path, au_csv_path, &FaceFilter::frontal())
}

/// Loads the face index joined with AU intensities.
///
/// An AU row matches an index row when its `face_id` equals the index's
/// `image_path` or that path's file stem. Intensities are rescaled from
/// `[0, 5]` to `[0, 1]`. Records come back in index order.
pub fn load_face_corpus_with(index_path: &Path, au_csv_path: &Path, filter: &FaceFilter) -> Result<Vec<FaceRecord>> {
    let aus = read_au_csv(au_csv_path)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(index_path)?;
    let mut records = Vec::new();
    for row in reader.deserialize::<IndexRow>() {
        let row = row?;
        if !filter.keeps(&row.gaze, &row.camera_angle) {
            continue;
        }
        let stem = Path::new(&row.image_path)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        let raw = aus
            .get(&row.image_path)
            .or_else(|| aus.get(stem))
            .ok_or_else(|| Error::Join(format!("no AU row for image {:?}", row.image_path)))?;
        let au = AuVector::from_intensities(raw)
            .map_err(|e| Error::Data(format!("{}: {e}", row.image_path)))?;
        records.push(FaceRecord {
            expression: row.expression.parse()?,
            image_path: row.image_path,
            model_id: row.model_id,
            au,
        });
    }
    Ok(records)
}

/// `face_id -> raw intensities` in [`AU_NAMES`] order.
fn read_au_csv(path: &Path) -> Result<HashMap<String, Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let id_col = headers
        .iter()
        .position(|h| h == "face_id")
        .ok_or_else(|| Error::Data(format!("{}: missing face_id column", path.display())))?;
    let mut cols = [usize::MAX; AU_COUNT];
    for (c, h) in headers.iter().enumerate() {
        if h.ends_with("_r") {
            if let Some(i) = au_index(h) {
                cols[i] = c;
            }
        }
    }
    if let Some(missing) = cols.iter().position(|&c| c == usize::MAX) {
        return Err(Error::Data(format!(
            "{}: missing intensity column {}_r",
            path.display(),
            AU_NAMES[missing]
        )));
    }
    let mut out = HashMap::new();
    for (line, row) in reader.records().enumerate() {
        let row = row?;
        let values = cols
            .iter()
            .map(|&c| {
                let field = row.get(c).unwrap_or("");
                field.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: line + 2,
                    message: format!("bad intensity {field:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        out.insert(row.get(id_col).unwrap_or_default().to_string(), values);
    }
    Ok(out)
}

/// Writes the face index and AU CSV for `records` (intensities on the
/// `[0, 5]` scale, all frontal).
pub fn write_face_corpus(index_path: &Path, au_csv_path: &Path, records: &[FaceRecord]) -> Result<()> {
    let mut index = csv::Writer::from_path(index_path)?;
    index.write_record(["image_path", "model_id", "expression", "gaze", "camera_angle"])?;
    let mut au = csv::Writer::from_path(au_csv_path)?;
    let mut header = vec!["face_id".to_string()];
    header.extend(AU_NAMES.iter().map(|n| format!("{n}_r")));
    au.write_record(&header)?;
    for r in records {
        index.write_record([r.image_path.as_str(), &r.model_id, r.expression.as_str(), "frontal", "090"])?;
        let mut row = vec![r.face_id().to_string()];
        row.extend(r.au.values().iter().map(|v| format!("{:.4}", v * crate::au::AU_INTENSITY_MAX)));
        au.write_record(&row)?;
    }
    index.flush().map_err(|e| Error::Io { path: index_path.into(), source: e })?;
    au.flush().map_err(|e| Error::Io { path: au_csv_path.into(), source: e })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const AU_HEADER: &str = "frame, face_id, confidence, AU01_r, AU02_r, AU04_r, AU05_r, AU06_r, AU07_r, AU09_r, AU10_r, AU12_r, AU14_r, AU15_r, AU17_r, AU20_r, AU23_r, AU25_r, AU26_r, AU45_r";

    fn au_row(id: &str, au12: &str) -> String {
        let mut vals = vec!["0"; 17];
        vals[8] = au12;
        format!("1, {id}, 0.98, {}", vals.join(", "))
    }

    fn fixture(dir: &Path, index_rows: &[&str], au_rows: &[String]) -> (std::path::PathBuf, std::path::PathBuf) {
        let index = dir.join("index.csv");
        let au = dir.join("au.csv");
        let mut body = String::from("image_path,model_id,expression,gaze,camera_angle\n");
        for r in index_rows {
            body.push_str(r);
            body.push('\n');
        }
        std::fs::write(&index, body).unwrap();
        let mut body = format!("{AU_HEADER}\n");
        for r in au_rows {
            body.push_str(r);
            body.push('\n');
        }
        std::fs::write(&au, body).unwrap();
        (index, au)
    }

    #[test]
    fn join_rescale_and_filter() {
        let dir = tempfile::tempdir().unwrap();
        let (index, au) = fixture(
            dir.path(),
            &[
                "m1_happy.png,m1,happy,frontal,090",
                "m1_happy_left.png,m1,happy,left,090",
                "m2_sad.png,m2,sad,frontal,045",
            ],
            &[au_row("m1_happy", "5.0"), au_row("m1_happy_left", "2.5"), au_row("m2_sad", "0")],
        );
        let frontal = load_face_corpus(&index, &au).unwrap();
        assert_eq!(frontal.len(), 1);
        assert_eq!(frontal[0].au.get("AU12"), Some(1.0));
        assert_eq!(frontal[0].expression, Expression::Happy);

        let all = load_face_corpus_with(&index, &au, &FaceFilter::all()).unwrap();
        assert_eq!(all.len(), 3);
        assert_eq!(all[1].au.get("AU12"), Some(0.5));
        assert!(all.iter().all(|r| r.au.len() == AU_COUNT));
    }

    #[test]
    fn missing_au_row_is_join_error() {
        let dir = tempfile::tempdir().unwrap();
        let (index, au) = fixture(dir.path(), &["a.png,m1,happy,frontal,090"], &[au_row("b", "1")]);
        assert!(matches!(load_face_corpus(&index, &au), Err(Error::Join(_))));
    }

    #[test]
    fn nan_intensity_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let (index, au) = fixture(dir.path(), &["a.png,m1,happy,frontal,090"], &[au_row("a", "NaN")]);
        assert!(matches!(load_face_corpus(&index, &au), Err(Error::Data(_))));
    }

    #[test]
    fn shuffled_index_sorts_to_same_records() {
        let dir = tempfile::tempdir().unwrap();
        let rows = ["c.png,m3,sad,frontal,090", "a.png,m1,happy,frontal,090", "b.png,m2,angry,frontal,090"];
        let aus = vec![au_row("a", "1"), au_row("b", "2"), au_row("c", "3")];
        let (index, au) = fixture(dir.path(), &rows, &aus);
        let mut first = load_face_corpus(&index, &au).unwrap();
        let reversed: Vec<&str> = rows.iter().rev().copied().collect();
        let (index, au) = fixture(dir.path(), &reversed, &aus);
        let mut second = load_face_corpus(&index, &au).unwrap();
        first.sort_by(|a, b| a.image_path.cmp(&b.image_path));
        second.sort_by(|a, b| a.image_path.cmp(&b.image_path));
        assert_eq!(first, second);
    }
}
