use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::au::{au_index, AuVector, AU_COUNT};
use crate::bridge::AuBridge;
use crate::data::{write_face_corpus, EmotionLabel, Expression, FaceRecord};
use crate::error::{IoContext, Result};
use crate::face::FaceImage;

/// Colours and proportions that stay fixed across one identity's
/// expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct Identity {
    pub model_id: String,
    pub skin: [f64; 3],
    pub hair: [f64; 3],
    pub background: [f64; 3],
    pub face_width: f64,
    pub face_height: f64,
    pub eye_spacing: f64,
}

impl Identity {
    pub fn sample(index: usize, rng: &mut impl Rng) -> Self {
        let mut jitter = |base: f64, spread: f64| base + rng.random_range(-spread..=spread);
        let skin = [jitter(0.55, 0.25), jitter(0.25, 0.2), jitter(0.0, 0.2)];
        let hair = [jitter(-0.55, 0.35), jitter(-0.65, 0.3), jitter(-0.75, 0.2)];
        let background = [jitter(-0.2, 0.5), jitter(0.0, 0.5), jitter(0.3, 0.5)];
        Identity {
            model_id: format!("id{index:02}"),
            skin,
            hair,
            background,
            face_width: jitter(0.31, 0.03),
            face_height: jitter(0.38, 0.03),
            eye_spacing: jitter(0.14, 0.015),
        }
    }
}

/// Prototype activations for a posed expression.
pub fn expression_au(expression: Expression) -> AuVector {
    let bridge = AuBridge::default();
    let emotion = match expression {
        Expression::Sad => EmotionLabel::Sadness,
        Expression::Neutral => EmotionLabel::Neutral,
        Expression::Angry => EmotionLabel::Anger,
        Expression::Disgusted => EmotionLabel::Disgust,
        Expression::Surprised => EmotionLabel::Surprise,
        Expression::Fearful => EmotionLabel::Fear,
        Expression::Happy => EmotionLabel::Happiness,
        Expression::Contemptuous => {
            let mut v = vec![0.0; AU_COUNT];
            v[au_index("AU14").expect("known unit")] = 1.0;
            return AuVector::new(v).expect("valid");
        }
    };
    bridge.map_emotion_to_au(emotion)
}

fn smooth(d: f64) -> f64 {
    // coverage of a pixel at signed distance d (in pixels) from an edge
    (0.5 - d).clamp(0.0, 1.0)
}

fn ellipse_sd(x: f64, y: f64, cx: f64, cy: f64, rx: f64, ry: f64) -> f64 {
    let (dx, dy) = ((x - cx) / rx, (y - cy) / ry);
    ((dx * dx + dy * dy).sqrt() - 1.0) * rx.min(ry)
}

fn segment_sd(x: f64, y: f64, a: (f64, f64), b: (f64, f64), radius: f64) -> f64 {
    let (px, py) = (x - a.0, y - a.1);
    let (bx, by) = (b.0 - a.0, b.1 - a.1);
    let t = ((px * bx + py * by) / (bx * bx + by * by)).clamp(0.0, 1.0);
    ((px - bx * t).powi(2) + (py - by * t).powi(2)).sqrt() - radius
}

/// Draws `identity` with the given activations at `size x size`.
///
/// Brow height follows AU01/AU02 (raise) and AU04 (lower), mouth
/// curvature AU12 against AU15, mouth opening AU25/AU26, eye opening
/// AU05 against AU07/AU45, with smaller cues for the remaining units.
pub fn render_face(identity: &Identity, au: &AuVector, size: usize) -> FaceImage {
    let a = |name: &str| au.get(name).unwrap_or(0.0);
    let s = size as f64;
    let u = s / 64.0;
    let (cx, cy) = (s / 2.0, s * 0.53);
    let (fw, fh) = (identity.face_width * s, identity.face_height * s);
    let eye_y = cy - 0.1 * s;
    let eye_dx = identity.eye_spacing * s;
    let eye_rx = 3.6 * u;
    let eye_ry = (2.2 + 1.4 * a("AU05") - 0.9 * a("AU07") - 0.6 * a("AU06")) * (1.0 - 0.85 * a("AU45")) * u;
    let inner_lift = (3.5 * a("AU01") - 3.0 * a("AU04")) * u;
    let outer_lift = (3.5 * a("AU02") - 1.0 * a("AU04")) * u;
    let brow_y = eye_y - 5.0 * u;
    let mouth_y = cy + 0.2 * s - 1.5 * a("AU10") * u;
    let mouth_w = (7.0 + 2.0 * a("AU12") + 2.0 * a("AU20") - 1.5 * a("AU23")) * u;
    let curve = (4.0 * a("AU12") - 3.5 * a("AU15")) * u;
    let open = (1.5 * a("AU25") + 4.0 * a("AU26")) * u;
    let lip = (1.3 - 0.6 * a("AU23")) * u;
    let smirk = 2.5 * a("AU14") * u;
    let dark = [-0.85, -0.8, -0.75];
    let lip_color = [identity.skin[0] - 0.2, identity.skin[1] - 0.45, identity.skin[2] - 0.3];

    let mut data = vec![0.0; 3 * size * size];
    for py in 0..size {
        for px in 0..size {
            let (x, y) = (px as f64 + 0.5, py as f64 + 0.5);
            let mut c = identity.background;
            let mut paint = |col: [f64; 3], cov: f64| {
                for k in 0..3 {
                    c[k] += (col[k] - c[k]) * cov;
                }
            };
            paint(identity.hair, smooth(ellipse_sd(x, y, cx, cy - 0.08 * s, fw * 1.12, fh * 1.02)));
            paint(identity.skin, smooth(ellipse_sd(x, y, cx, cy, fw, fh)));
            let cheek = [identity.skin[0] + 0.25, identity.skin[1] - 0.1, identity.skin[2]];
            for side in [-1.0, 1.0] {
                let cov = smooth(ellipse_sd(x, y, cx + side * eye_dx * 1.1, eye_y + 8.0 * u, 4.0 * u, 2.5 * u));
                paint(cheek, cov * 0.8 * a("AU06"));
            }
            for side in [-1.0, 1.0] {
                let ex = cx + side * eye_dx;
                paint([0.95, 0.95, 0.95], smooth(ellipse_sd(x, y, ex, eye_y, eye_rx, eye_ry.max(0.3 * u))));
                let pupil = (1.5 * u).min(eye_ry.max(0.3 * u));
                paint(dark, smooth(ellipse_sd(x, y, ex, eye_y, pupil, pupil)));
                let inner = (cx + side * (eye_dx - 4.5 * u), brow_y - inner_lift);
                let outer = (cx + side * (eye_dx + 4.5 * u), brow_y - outer_lift);
                paint(identity.hair, smooth(segment_sd(x, y, inner, outer, 1.1 * u)));
            }
            paint(
                [identity.skin[0] - 0.3, identity.skin[1] - 0.3, identity.skin[2] - 0.3],
                smooth(segment_sd(x, y, (cx, eye_y + 3.0 * u), (cx, cy + 0.07 * s), 0.6 * u)),
            );
            if a("AU09") > 0.0 {
                for k in 0..2 {
                    let wy = eye_y + (2.5 + 1.6 * k as f64) * u;
                    let cov = smooth(segment_sd(x, y, (cx - 2.5 * u, wy), (cx + 2.5 * u, wy), 0.4 * u));
                    paint(dark, cov * a("AU09"));
                }
            }
            if a("AU17") > 0.0 {
                let cov = smooth(segment_sd(x, y, (cx - 3.0 * u, mouth_y + 6.0 * u), (cx + 3.0 * u, mouth_y + 6.0 * u), 0.5 * u));
                paint(dark, cov * 0.6 * a("AU17"));
            }
            // mouth: a parabola whose corners rise with curvature; the gap
            // between the lips widens with the opening
            let t = ((x - cx) / mouth_w).clamp(-1.0, 1.0);
            let corner = t * t;
            let upper = mouth_y - curve * corner - if t > 0.0 { smirk * corner } else { 0.0 };
            let lower = upper + open * (1.0 - corner);
            let beyond = ((x - cx).abs() - mouth_w).max(0.0);
            let inside = if y >= upper && y <= lower { 0.0 } else { (y - upper).abs().min((y - lower).abs()) };
            paint(lip_color, smooth((inside * inside + beyond * beyond).sqrt() - lip));
            if open > 0.0 && beyond == 0.0 {
                paint(dark, smooth((upper + 0.5 * lip - y).max(y - lower + 0.5 * lip)));
            }
            for k in 0..3 {
                data[k * size * size + py * size + px] = c[k].clamp(-1.0, 1.0);
            }
        }
    }
    FaceImage::new(size, data).expect("rendered values are clamped")
}

/// `count` identities drawn from a seeded generator.
pub fn identities(count: usize, seed: u64) -> Vec<Identity> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|i| Identity::sample(i, &mut rng)).collect()
}

/// A rendered face and its record.
#[derive(Debug, Clone)]
pub struct SyntheticFace {
    pub record: FaceRecord,
    pub image: FaceImage,
}

/// Every identity in every listed expression.
pub fn synthetic_faces(ids: &[Identity], expressions: &[Expression], size: usize) -> Vec<SyntheticFace> {
    ids.iter()
        .flat_map(|id| {
            expressions.iter().map(move |&e| {
                let au = expression_au(e);
                SyntheticFace {
                    image: render_face(id, &au, size),
                    record: FaceRecord {
                        image_path: format!("{}_{}.png", id.model_id, e),
                        model_id: id.model_id.clone(),
                        expression: e,
                        au,
                    },
                }
            })
        })
        .collect()
}

/// The sixteen-image overfitting set: four identities, each neutral,
/// happy, surprised and angry.
pub fn overfit_faces(size: usize) -> Vec<SyntheticFace> {
    let ids = identities(4, 16);
    synthetic_faces(
        &ids,
        &[Expression::Neutral, Expression::Happy, Expression::Surprised, Expression::Angry],
        size,
    )
}

/// Ten identities in all eight expressions.
pub fn full_faces(size: usize) -> Vec<SyntheticFace> {
    synthetic_faces(&identities(10, 7), &Expression::ALL, size)
}

/// Writes the PNGs, `index.csv` and `au.csv` under `dir`.
pub fn write_faces(dir: &Path, faces: &[SyntheticFace]) -> Result<()> {
    std::fs::create_dir_all(dir).at(dir)?;
    for f in faces {
        f.image.save_png(&dir.join(&f.record.image_path))?;
    }
    let records: Vec<FaceRecord> = faces.iter().map(|f| f.record.clone()).collect();
    write_face_corpus(&dir.join("index.csv"), &dir.join("au.csv"), &records)
}
