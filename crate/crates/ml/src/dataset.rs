// SPDX-License-Identifier: Apache-2.0

//! Track files: one track per line, whitespace separated. A full line holds
//! 2184 charge values (t-major, then x, then y) followed by y0 and pT. A
//! profile line holds the 14 features followed by pT. Lines starting with
//! `#` are comments. Gzip input is detected by its magic number.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::track::{extract_features, synth_track, Class, FeatureVector, Track, CHARGE_LEN, N_FEATURES, PT_CUT};
use crate::MlError;

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: FeatureVector,
    pub pt: f64,
}

impl Sample {
    pub fn of(track: &Track) -> Self {
        Sample { features: extract_features(track), pt: track.pt }
    }

    /// False for pileup (pT below the cut).
    pub fn is_signal(&self) -> bool {
        !(self.pt < PT_CUT)
    }
}

/// `n` synthetic tracks, each class drawn with probability one half.
pub fn synth_tracks(n: usize, seed: u64) -> impl Iterator<Item = Track> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(move |_| {
        let class = if rng.gen_bool(0.5) { Class::Signal } else { Class::Background };
        synth_track(class, rng.gen())
    })
}

pub fn synth_dataset(n: usize, seed: u64) -> Vec<Sample> {
    synth_tracks(n, seed).map(|t| Sample::of(&t)).collect()
}

/// Seeded shuffle, then the first `round(fraction * N)` samples train.
pub fn split_dataset<T: Clone>(items: &[T], fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>), MlError> {
    if items.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    assert!(fraction > 0.0 && fraction < 1.0, "split fraction must lie in (0, 1)");
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (fraction * items.len() as f64).round() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect();
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

fn open(path: &Path) -> Result<Box<dyn BufRead>, MlError> {
    let mut file = BufReader::new(File::open(path)?);
    let gz = file.fill_buf()?.starts_with(&[0x1F, 0x8B]);
    Ok(if gz { Box::new(BufReader::new(GzDecoder::new(file))) } else { Box::new(file) })
}

fn parse_line(line: &str, n: usize) -> Result<Option<Sample>, MlError> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let vals: Vec<f64> = line
        .split_whitespace()
        .map(|s| s.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| MlError::Parse { line: n, msg: e.to_string() })?;
    match vals.len() {
        l if l == CHARGE_LEN + 2 => {
            let charge = vals[..CHARGE_LEN].iter().map(|&v| v as f32).collect();
            let t = Track::new(charge, vals[CHARGE_LEN], vals[CHARGE_LEN + 1])
                .map_err(|e| MlError::Parse { line: n, msg: e.to_string() })?;
            Ok(Some(Sample::of(&t)))
        }
        l if l == N_FEATURES + 1 => {
            let mut features = [0.0; N_FEATURES];
            features.copy_from_slice(&vals[..N_FEATURES]);
            Ok(Some(Sample { features, pt: vals[N_FEATURES] }))
        }
        l => Err(MlError::Parse {
            line: n,
            msg: format!("{l} columns; expected {} (track) or {} (profile)", CHARGE_LEN + 2, N_FEATURES + 1),
        }),
    }
}

pub fn read_samples_from(reader: impl BufRead) -> Result<Vec<Sample>, MlError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        if let Some(s) = parse_line(&line?, i + 1)? {
            out.push(s);
        }
    }
    Ok(out)
}

/// Reads a track or profile file, gzip or plain.
pub fn read_samples(path: impl AsRef<Path>) -> Result<Vec<Sample>, MlError> {
    read_samples_from(open(path.as_ref())?)
}

fn write_track(w: &mut impl Write, t: &Track) -> std::io::Result<()> {
    for q in &t.charge {
        write!(w, "{q} ")?;
    }
    writeln!(w, "{} {}", t.y0, t.pt)
}

/// Writes full track lines; a `.gz` extension selects gzip.
pub fn write_tracks(path: impl AsRef<Path>, tracks: impl IntoIterator<Item = Track>) -> Result<usize, MlError> {
    let path = path.as_ref();
    let file = BufWriter::new(File::create(path)?);
    let mut n = 0;
    if path.extension().is_some_and(|e| e == "gz") {
        let mut w = GzEncoder::new(file, Compression::default());
        for t in tracks {
            write_track(&mut w, &t)?;
            n += 1;
        }
        w.finish()?.flush()?;
    } else {
        let mut w = file;
        for t in tracks {
            write_track(&mut w, &t)?;
            n += 1;
        }
        w.flush()?;
    }
    Ok(n)
}
