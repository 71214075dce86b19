use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LabeledClip, ScenarioName, ScenarioSpec, TaskType};
use crate::audio::{load_wav, resample, AudioClip};
use crate::error::{Error, Result};

/// A corpus entry left out of the collection, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedItem {
    pub reference: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestResult {
    pub clips: Vec<LabeledClip>,
    pub skipped: Vec<SkippedItem>,
}

impl IngestResult {
    pub fn skip_count(&self) -> usize {
        self.skipped.len()
    }
}

/// A labeled audio file found by an adapter, not yet loaded.
struct Candidate {
    path: PathBuf,
    id: String,
    source: String,
    labels: BTreeMap<String, String>,
}

fn layout(path: &Path, msg: impl Into<String>) -> Error {
    Error::Layout {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn skip(skipped: &mut Vec<SkippedItem>, reference: impl Into<String>, reason: impl Into<String>) {
    skipped.push(SkippedItem {
        reference: reference.into(),
        reason: reason.into(),
    });
}

/// Reads a corpus in its published layout, normalizes every clip to mono
/// 16-bit at the scenario rate and fixed duration, and keeps at most
/// `cap_per_class` clips per class (per label combination for multilabel
/// scenarios), chosen by a seeded shuffle.
///
/// Layouts:
/// - MGI (FMA): `fma_metadata/tracks.csv` (or `tracks.csv`) with its
///   three header rows; audio converted to WAV at `fma_small/NNN/NNNNNN.wav`.
///   Tracks are cut into back-to-back windows sharing the track's label.
/// - UDI (Common Voice): `validated.tsv` with `path`, `client_id`, `age`,
///   `gender` and `accent` or `accents` columns; audio at `clips/<stem>.wav`.
/// - SEI (RAVDESS): `Actor_NN/*.wav`, emotion from the third filename field;
///   neutral recordings are skipped.
/// - SPF (speech commands): `<word>/<speaker>_nohash_<n>.wav`.
pub fn ingest(
    root: &Path,
    spec: &ScenarioSpec,
    cap_per_class: usize,
    seed: u64,
) -> Result<IngestResult> {
    spec.validate()?;
    if !root.is_dir() {
        return Err(layout(root, "corpus root is not a directory"));
    }
    let mut skipped = Vec::new();
    let mut candidates = match spec.name {
        ScenarioName::Mgi => fma(root, spec, &mut skipped)?,
        ScenarioName::Udi => common_voice(root, spec, &mut skipped)?,
        ScenarioName::Sei => ravdess(root, spec, &mut skipped)?,
        ScenarioName::Spf => speech_commands(root, spec, &mut skipped)?,
    };
    candidates.sort_by(|a, b| a.path.cmp(&b.path));
    candidates.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut taken: BTreeMap<String, usize> = BTreeMap::new();
    let mut clips = Vec::new();
    for cand in candidates {
        let key = match spec.task_type {
            TaskType::Multiclass => cand.labels.values().next().cloned().unwrap_or_default(),
            TaskType::Multilabel => cand
                .labels
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(";"),
        };
        let have = *taken.get(&key).unwrap_or(&0);
        if have >= cap_per_class {
            continue;
        }
        let audio = match load_normalized(&cand.path, spec.sample_rate) {
            Ok(a) => a,
            Err(e) => {
                warn!("skipping {}: {e}", cand.path.display());
                skip(&mut skipped, cand.path.display().to_string(), e.to_string());
                continue;
            }
        };
        let windows = if spec.name == ScenarioName::Mgi {
            windows(&audio, spec.clip_len())?
        } else {
            vec![audio.fit_length(spec.clip_len())?]
        };
        let multi = windows.len() > 1;
        let room = cap_per_class - have;
        for (j, w) in windows.into_iter().take(room).enumerate() {
            let id = if multi {
                format!("{}-w{j:02}", cand.id)
            } else {
                cand.id.clone()
            };
            clips.push(LabeledClip {
                id,
                source: cand.source.clone(),
                clip: w,
                labels: cand.labels.clone(),
            });
            *taken.entry(key.clone()).or_insert(0) += 1;
        }
    }
    clips.sort_by(|a, b| a.id.cmp(&b.id));
    info!(
        "{}: {} clips, {} skipped",
        spec.name,
        clips.len(),
        skipped.len()
    );
    Ok(IngestResult { clips, skipped })
}

fn load_normalized(path: &Path, rate: u32) -> Result<AudioClip> {
    let clip = load_wav(path)?;
    if clip.sample_rate() == rate {
        Ok(clip)
    } else {
        resample(&clip, rate)
    }
}

/// Back-to-back windows of `len` samples; a short track yields one padded
/// window.
fn windows(clip: &AudioClip, len: usize) -> Result<Vec<AudioClip>> {
    if clip.len() < len {
        return Ok(vec![clip.fit_length(len)?]);
    }
    clip.samples()
        .chunks_exact(len)
        .map(|w| AudioClip::new(w.to_vec(), clip.sample_rate()))
        .collect()
}

fn fma(root: &Path, spec: &ScenarioSpec, skipped: &mut Vec<SkippedItem>) -> Result<Vec<Candidate>> {
    let meta = [
        root.join("fma_metadata").join("tracks.csv"),
        root.join("tracks.csv"),
    ]
    .into_iter()
    .find(|p| p.is_file())
    .ok_or_else(|| layout(root, "missing fma_metadata/tracks.csv"))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(&meta)
        .map_err(|e| layout(&meta, e.to_string()))?;
    let mut rows = reader.records();
    let mut header = Vec::new();
    for _ in 0..3 {
        match rows.next() {
            Some(Ok(r)) => header.push(r),
            _ => return Err(layout(&meta, "expected three header rows")),
        }
    }
    let column = |top: &str, sub: &str| {
        (0..header[0].len())
            .find(|&i| header[0].get(i) == Some(top) && header[1].get(i) == Some(sub))
    };
    let genre_col =
        column("track", "genre_top").ok_or_else(|| layout(&meta, "no track/genre_top column"))?;
    let subset_col = column("set", "subset");
    let task = &spec.tasks[0];
    let audio_dir = root.join("fma_small");
    let mut out = Vec::new();
    for (line, row) in rows.enumerate() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                skip(
                    skipped,
                    format!("tracks.csv row {}", line + 4),
                    e.to_string(),
                );
                continue;
            }
        };
        let id_field = row.get(0).unwrap_or("").trim();
        let Ok(track) = id_field.parse::<u64>() else {
            skip(
                skipped,
                format!("tracks.csv row {}", line + 4),
                format!("bad track id {id_field:?}"),
            );
            continue;
        };
        if let Some(c) = subset_col {
            if row.get(c).map(str::trim) != Some("small") {
                continue;
            }
        }
        let genre = row.get(genre_col).unwrap_or("").trim();
        if task.class_index(genre).is_none() {
            skip(
                skipped,
                format!("track {track}"),
                format!("unknown genre {genre:?}"),
            );
            continue;
        }
        let path = audio_dir
            .join(format!("{:03}", track / 1000))
            .join(format!("{track:06}.wav"));
        if !path.is_file() {
            skip(skipped, format!("track {track}"), "audio file missing");
            continue;
        }
        out.push(Candidate {
            path,
            id: format!("fma-{track:06}"),
            source: format!("track{track}"),
            labels: [(task.name.clone(), genre.to_string())].into(),
        });
    }
    Ok(out)
}

fn normalize_gender(v: &str) -> String {
    match v {
        "male_masculine" => "male".into(),
        "female_feminine" => "female".into(),
        other => other.to_string(),
    }
}

fn common_voice(
    root: &Path,
    spec: &ScenarioSpec,
    skipped: &mut Vec<SkippedItem>,
) -> Result<Vec<Candidate>> {
    let meta = root.join("validated.tsv");
    if !meta.is_file() {
        return Err(layout(root, "missing validated.tsv"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .flexible(true)
        .from_path(&meta)
        .map_err(|e| layout(&meta, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| layout(&meta, e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let path_col = col("path").ok_or_else(|| layout(&meta, "no path column"))?;
    let client_col = col("client_id");
    let mut task_cols = Vec::new();
    for t in &spec.tasks {
        let c = col(&t.name)
            .or_else(|| {
                if t.name == "accent" {
                    col("accents")
                } else {
                    None
                }
            })
            .ok_or_else(|| layout(&meta, format!("no {} column", t.name)))?;
        task_cols.push(c);
    }
    let clips_dir = root.join("clips");
    let mut out = Vec::new();
    'rows: for (line, row) in reader.records().enumerate() {
        let reference = format!("validated.tsv row {}", line + 2);
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                skip(skipped, reference, e.to_string());
                continue;
            }
        };
        let mut labels = BTreeMap::new();
        for (t, &c) in spec.tasks.iter().zip(&task_cols) {
            let mut v = row.get(c).unwrap_or("").trim().to_ascii_lowercase();
            if t.name == "gender" {
                v = normalize_gender(&v);
            }
            if t.class_index(&v).is_none() {
                skip(skipped, reference, format!("unmappable {} {v:?}", t.name));
                continue 'rows;
            }
            labels.insert(t.name.clone(), v);
        }
        let file = row.get(path_col).unwrap_or("");
        let stem = Path::new(file)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("");
        let path = clips_dir.join(format!("{stem}.wav"));
        if stem.is_empty() || !path.is_file() {
            skip(
                skipped,
                reference,
                format!("audio file missing for {file:?}"),
            );
            continue;
        }
        let source = client_col
            .and_then(|c| row.get(c))
            .unwrap_or(stem)
            .to_string();
        out.push(Candidate {
            path,
            id: format!("cv-{stem}"),
            source,
            labels,
        });
    }
    Ok(out)
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    Ok(files)
}

fn subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

const RAVDESS_EMOTIONS: [&str; 8] = [
    "neutral",
    "calm",
    "happy",
    "sad",
    "angry",
    "fearful",
    "disgust",
    "surprised",
];

fn ravdess(
    root: &Path,
    spec: &ScenarioSpec,
    skipped: &mut Vec<SkippedItem>,
) -> Result<Vec<Candidate>> {
    // actors may sit directly under the root or one level down
    let mut actors: Vec<PathBuf> = Vec::new();
    for d in subdirs(root)? {
        if d.file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with("Actor_"))
        {
            actors.push(d);
        } else {
            actors.extend(subdirs(&d)?.into_iter().filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("Actor_"))
            }));
        }
    }
    if actors.is_empty() {
        return Err(layout(root, "no Actor_NN directories"));
    }
    let task = &spec.tasks[0];
    let mut out = Vec::new();
    for actor in actors {
        for path in wav_files(&actor)? {
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("")
                .to_string();
            let fields: Vec<&str> = name.split('-').collect();
            let code = if fields.len() == 7
                && fields
                    .iter()
                    .all(|f| f.len() == 2 && f.bytes().all(|b| b.is_ascii_digit()))
            {
                fields[2].parse::<usize>().ok()
            } else {
                None
            };
            let Some(emotion) = code
                .and_then(|c| c.checked_sub(1))
                .and_then(|i| RAVDESS_EMOTIONS.get(i))
            else {
                skip(
                    skipped,
                    path.display().to_string(),
                    "filename is not a RAVDESS code",
                );
                continue;
            };
            if task.class_index(emotion).is_none() {
                skip(
                    skipped,
                    path.display().to_string(),
                    format!("emotion {emotion} not in scenario"),
                );
                continue;
            }
            out.push(Candidate {
                id: format!("ravdess-{name}"),
                source: format!("actor{}", fields[6]),
                labels: [(task.name.clone(), emotion.to_string())].into(),
                path,
            });
        }
    }
    Ok(out)
}

fn speech_commands(
    root: &Path,
    spec: &ScenarioSpec,
    skipped: &mut Vec<SkippedItem>,
) -> Result<Vec<Candidate>> {
    let task = &spec.tasks[0];
    let mut out = Vec::new();
    let mut found_any = false;
    for dir in subdirs(root)? {
        let word = dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("")
            .to_string();
        if word.starts_with('_') {
            continue;
        }
        let files = wav_files(&dir)?;
        if task.class_index(&word).is_none() {
            for f in files {
                skip(
                    skipped,
                    f.display().to_string(),
                    format!("word {word:?} not in scenario"),
                );
            }
            continue;
        }
        found_any = true;
        for path in files {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("")
                .to_string();
            let speaker = stem.split("_nohash_").next().unwrap_or(&stem).to_string();
            out.push(Candidate {
                id: format!("sc-{word}-{stem}"),
                source: speaker,
                labels: [(task.name.clone(), word.clone())].into(),
                path,
            });
        }
    }
    if !found_any {
        return Err(layout(
            root,
            "no word directories matching the scenario classes",
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_cover_track_without_overlap() {
        let clip = AudioClip::new((0..10).collect(), 16000).unwrap();
        let w = windows(&clip, 4).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[1].samples(), &[4, 5, 6, 7]);
        let short = windows(&AudioClip::new(vec![1, 2], 16000).unwrap(), 4).unwrap();
        assert_eq!(short[0].samples(), &[1, 2, 0, 0]);
    }
}
