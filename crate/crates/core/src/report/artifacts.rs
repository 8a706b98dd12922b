use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::curves::{CurvePoint, LearningCurve};
use super::svg::{ramp, Frame, Svg, BUCKET_COLORS, PALETTE};
use crate::acquisition::StrategyKind;
use crate::cartography::{Bucket, BucketCounts, DatasetMap};
use crate::error::{Error, Result};
use crate::harness::AcquisitionProfile;

pub const CURVES_CSV_HEADER: &str = "strategy,removal_fraction,replicates,labeled_size,mean,std";
pub const PROFILES_CSV_HEADER: &str = "strategy,removal_fraction,replicate,round,easy,medium,hard,impossible";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub filename: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn plot_count(&self) -> usize {
        self.entries.iter().filter(|e| e.filename.ends_with(".svg")).count()
    }

    pub fn get(&self, filename: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.filename == filename)
    }
}

fn csv_error(line: usize, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn write_rows(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header.split(',')).expect("in-memory csv write");
    for row in rows {
        w.write_record(&row).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}

fn read_rows(text: &str, header: &str) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let got = r.headers().map_err(|e| csv_error(1, e))?.iter().collect::<Vec<_>>().join(",");
    if got != header {
        return Err(csv_error(1, format!("expected header `{header}`, found `{got}`")));
    }
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let line = k + 2;
        rows.push((line, rec.map_err(|e| csv_error(line, e))?));
    }
    Ok(rows)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, col: usize, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(col).ok_or_else(|| csv_error(line, format!("missing column {col}")))?;
    raw.parse().map_err(|e| csv_error(line, format!("column {col} `{raw}`: {e}")))
}

pub fn curves_csv_string(curves: &[LearningCurve]) -> String {
    let rows = curves.iter().flat_map(|c| {
        c.points.iter().map(move |p| {
            vec![
                c.strategy.to_string(),
                c.removal_fraction.to_string(),
                c.replicates.to_string(),
                p.labeled_size.to_string(),
                p.mean.to_string(),
                p.std.to_string(),
            ]
        })
    });
    write_rows(CURVES_CSV_HEADER, rows)
}

/// Inverse of [`curves_csv_string`]: consecutive rows with the same strategy
/// and fraction form one curve.
pub fn parse_curves_csv(text: &str) -> Result<Vec<LearningCurve>> {
    let mut curves: Vec<LearningCurve> = Vec::new();
    for (line, rec) in read_rows(text, CURVES_CSV_HEADER)? {
        let strategy: StrategyKind = field(&rec, 0, line)?;
        let removal_fraction: f64 = field(&rec, 1, line)?;
        let replicates: usize = field(&rec, 2, line)?;
        let point = CurvePoint {
            labeled_size: field(&rec, 3, line)?,
            mean: field(&rec, 4, line)?,
            std: field(&rec, 5, line)?,
        };
        match curves.last_mut() {
            Some(c) if c.strategy == strategy && c.removal_fraction.to_bits() == removal_fraction.to_bits() => {
                c.points.push(point)
            }
            _ => curves.push(LearningCurve {
                strategy,
                removal_fraction,
                replicates,
                points: vec![point],
            }),
        }
    }
    Ok(curves)
}

fn counts_row(p: &AcquisitionProfile, round: String, c: &BucketCounts) -> Vec<String> {
    let mut row = vec![
        p.strategy.to_string(),
        p.removal_fraction.to_string(),
        p.replicate_seed.to_string(),
        round,
    ];
    row.extend(c.as_array().iter().map(|n| n.to_string()));
    row
}

/// One `pool` row with the baseline counts, then one row per round.
pub fn profiles_csv_string(profiles: &[AcquisitionProfile]) -> String {
    let rows = profiles.iter().flat_map(|p| {
        std::iter::once(counts_row(p, "pool".into(), &p.baseline_counts))
            .chain(p.rounds.iter().enumerate().map(move |(k, c)| counts_row(p, (k + 1).to_string(), c)))
    });
    write_rows(PROFILES_CSV_HEADER, rows)
}

pub fn parse_profiles_csv(text: &str) -> Result<Vec<AcquisitionProfile>> {
    let mut profiles: Vec<AcquisitionProfile> = Vec::new();
    for (line, rec) in read_rows(text, PROFILES_CSV_HEADER)? {
        let mut counts = BucketCounts::default();
        for (k, b) in Bucket::ALL.iter().enumerate() {
            let n: usize = field(&rec, 4 + k, line)?;
            for _ in 0..n {
                counts.add(*b);
            }
        }
        let round: String = field(&rec, 3, line)?;
        if round == "pool" {
            profiles.push(AcquisitionProfile {
                strategy: field(&rec, 0, line)?,
                removal_fraction: field(&rec, 1, line)?,
                replicate_seed: field(&rec, 2, line)?,
                baseline: counts.proportions(),
                baseline_counts: counts,
                rounds: Vec::new(),
            });
            continue;
        }
        let p = profiles
            .last_mut()
            .ok_or_else(|| csv_error(line, "round row before any pool row"))?;
        let expected = p.rounds.len() + 1;
        if round.parse::<usize>().ok() != Some(expected) {
            return Err(csv_error(line, format!("expected round {expected}, found `{round}`")));
        }
        p.rounds.push(counts);
    }
    Ok(profiles)
}

fn fraction_tag(f: f64) -> String {
    format!("f{f:.2}")
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Mean curves with a shaded one-std band, one series per strategy.
pub fn learning_curves_svg(curves: &[&LearningCurve]) -> String {
    let mut svg = Svg::new(720.0, 420.0);
    let frame = {
        let xs = curves.iter().flat_map(|c| c.points.iter().map(|p| p.labeled_size as f64));
        let (x_lo, x_hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        let ys = curves.iter().flat_map(|c| c.points.iter().flat_map(|p| [p.mean - p.std, p.mean + p.std]));
        let (y_lo, y_hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| (lo.min(y), hi.max(y)));
        let (x_lo, x_hi) = if x_lo.is_finite() { (x_lo, x_hi) } else { (0.0, 1.0) };
        let (y_lo, y_hi) = if y_lo.is_finite() {
            ((y_lo * 20.0).floor() / 20.0, (y_hi * 20.0).ceil() / 20.0)
        } else {
            (0.0, 1.0)
        };
        Frame {
            left: 60.0,
            top: 30.0,
            width: 480.0,
            height: 330.0,
            x_range: (x_lo, x_hi),
            y_range: (y_lo.max(0.0), y_hi.min(1.0).max(y_lo.max(0.0) + 0.05)),
        }
    };
    if let Some(c) = curves.first() {
        svg.text(300.0, 16.0, "middle", &format!("learning curves, removal fraction {:.2}", c.removal_fraction));
    }
    for (k, c) in curves.iter().enumerate() {
        let color = PALETTE[StrategyKind::ALL.iter().position(|s| *s == c.strategy).unwrap_or(k) % PALETTE.len()];
        let upper: Vec<(f64, f64)> = c
            .points
            .iter()
            .map(|p| (frame.x(p.labeled_size as f64), frame.y(p.mean + p.std)))
            .collect();
        let mut band = upper;
        band.extend(
            c.points
                .iter()
                .rev()
                .map(|p| (frame.x(p.labeled_size as f64), frame.y(p.mean - p.std))),
        );
        svg.polygon(&band, color);
        let mean: Vec<(f64, f64)> = c
            .points
            .iter()
            .map(|p| (frame.x(p.labeled_size as f64), frame.y(p.mean)))
            .collect();
        svg.polyline(&mean, color);
        let ly = 40.0 + 18.0 * k as f64;
        svg.line(560.0, ly, 580.0, ly, color);
        svg.text(586.0, ly + 4.0, "start", c.strategy.name());
    }
    frame.draw_axes(&mut svg, "labeled examples", "validation accuracy");
    svg.finish()
}

/// Dataset-map scatter: variability on x, confidence on y, colored by
/// correctness.
pub fn map_svg(map: &DatasetMap) -> String {
    let mut svg = Svg::new(520.0, 480.0);
    let frame = Frame {
        left: 60.0,
        top: 30.0,
        width: 400.0,
        height: 380.0,
        x_range: (0.0, 0.5),
        y_range: (0.0, 1.0),
    };
    svg.text(260.0, 16.0, "middle", "dataset map");
    for threshold in [0.25, 0.5, 0.75] {
        let y = frame.y(threshold);
        svg.line(frame.x(0.0), y, frame.x(0.5), y, "#cccccc");
    }
    for e in map.entries() {
        svg.circle(frame.x(e.sigma), frame.y(e.mu), 2.0, &ramp(e.correctness));
    }
    frame.draw_axes(&mut svg, "variability", "confidence");
    svg.finish()
}

/// Height in pixels of one acquired example in [`bucket_bars_svg`].
pub fn bucket_bar_scale(profile: &AcquisitionProfile) -> f64 {
    let max = profile.rounds.iter().map(BucketCounts::total).max().unwrap_or(0);
    if max == 0 {
        0.0
    } else {
        300.0 / max as f64
    }
}

/// Stacked bucket counts per acquisition round. Each column is a
/// `<g id="round-k">` whose rect heights sum to the batch size times
/// [`bucket_bar_scale`].
pub fn bucket_bars_svg(profile: &AcquisitionProfile) -> String {
    let n = profile.rounds.len();
    let bar = 24.0;
    let gap = 8.0;
    let width = 120.0 + n as f64 * (bar + gap) + 140.0;
    let mut svg = Svg::new(width.max(400.0), 400.0);
    let scale = bucket_bar_scale(profile);
    let base = 340.0;
    svg.text(
        20.0,
        16.0,
        "start",
        &format!(
            "{} acquisitions by bucket, removal fraction {:.2}, replicate {}",
            profile.strategy, profile.removal_fraction, profile.replicate_seed
        ),
    );
    svg.line(60.0, base, 60.0 + n as f64 * (bar + gap) + gap, base, "black");
    for (k, counts) in profile.rounds.iter().enumerate() {
        let x = 60.0 + gap + k as f64 * (bar + gap);
        svg.raw(&format!("<g id=\"round-{}\">", k + 1));
        let mut top = base;
        for (b, &count) in counts.as_array().iter().enumerate() {
            if count == 0 {
                continue;
            }
            let h = count as f64 * scale;
            top -= h;
            svg.rect(x, top, bar, h, BUCKET_COLORS[b]);
        }
        svg.raw("</g>");
        svg.text(x + bar / 2.0, base + 16.0, "middle", &(k + 1).to_string());
    }
    let lx = 60.0 + n as f64 * (bar + gap) + 30.0;
    for (b, bucket) in Bucket::ALL.iter().enumerate() {
        let y = 40.0 + 18.0 * b as f64;
        svg.rect(lx, y - 9.0, 10.0, 10.0, BUCKET_COLORS[b]);
        svg.text(lx + 16.0, y, "start", bucket.as_str());
    }
    svg.text(60.0, base + 34.0, "start", "acquisition round");
    svg.finish()
}

/// Writes every artifact into `out_dir` and a `manifest.json` listing each
/// file with its SHA-256. Entries are sorted by filename.
///
/// `curves.csv` and `profiles.csv` are always written, even when empty.
pub fn emit_artifacts(
    curves: &[LearningCurve],
    maps: &[(&str, &DatasetMap)],
    profiles: &[AcquisitionProfile],
    out_dir: impl AsRef<Path>,
) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut files: BTreeMap<String, String> = BTreeMap::new();

    files.insert("curves.csv".into(), curves_csv_string(curves));
    let mut by_fraction: BTreeMap<String, Vec<&LearningCurve>> = BTreeMap::new();
    for c in curves {
        by_fraction.entry(fraction_tag(c.removal_fraction)).or_default().push(c);
    }
    for (tag, group) in &by_fraction {
        files.insert(format!("curves_{tag}.svg"), learning_curves_svg(group));
    }

    for (name, map) in maps {
        let name = sanitize(name);
        files.insert(format!("map_{name}.csv"), map.to_csv_string());
        files.insert(format!("map_{name}.svg"), map_svg(map));
    }

    files.insert("profiles.csv".into(), profiles_csv_string(profiles));
    for p in profiles {
        let name = format!(
            "profile_{}_{}_r{}.svg",
            p.strategy,
            fraction_tag(p.removal_fraction),
            p.replicate_seed
        );
        files.insert(name, bucket_bars_svg(p));
    }

    let mut manifest = Manifest::default();
    for (filename, content) in &files {
        let path = out_dir.join(filename);
        fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        manifest.entries.push(ManifestEntry {
            filename: filename.clone(),
            sha256: hex::encode(Sha256::digest(content.as_bytes())),
        });
    }
    let path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
