// SPDX-License-Identifier: Apache-2.0

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::MlError;

pub const T_SLICES: usize = 8;
pub const X_PIXELS: usize = 21;
pub const Y_PIXELS: usize = 13;
pub const CHARGE_LEN: usize = T_SLICES * X_PIXELS * Y_PIXELS;
/// Thirteen y-profile sums followed by y0.
pub const N_FEATURES: usize = Y_PIXELS + 1;
/// Tracks below this transverse momentum (GeV) are pileup.
pub const PT_CUT: f64 = 2.0;

pub type FeatureVector = [f64; N_FEATURES];

/// Charge deposited in one pixel sensor, indexed `[t][x][y]` in a flat
/// t-major array.
#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    pub charge: Vec<f32>,
    pub y0: f64,
    pub pt: f64,
}

impl Track {
    pub fn new(charge: Vec<f32>, y0: f64, pt: f64) -> Result<Self, MlError> {
        if charge.len() != CHARGE_LEN {
            return Err(MlError::InvalidTrack(format!("{} charge values, expected {CHARGE_LEN}", charge.len())));
        }
        if let Some(q) = charge.iter().find(|q| !(**q >= 0.0)) {
            return Err(MlError::InvalidTrack(format!("charge {q} is negative or NaN")));
        }
        Ok(Track { charge, y0, pt })
    }

    pub fn index(t: usize, x: usize, y: usize) -> usize {
        (t * X_PIXELS + x) * Y_PIXELS + y
    }

    pub fn at(&self, t: usize, x: usize, y: usize) -> f32 {
        self.charge[Track::index(t, x, y)]
    }

    pub fn total_charge(&self) -> f64 {
        self.charge.iter().map(|&q| q as f64).sum()
    }

    /// Hard-scatter track; pileup lies below the pT cut.
    pub fn is_signal(&self) -> bool {
        !(self.pt < PT_CUT)
    }
}

pub fn extract_features(track: &Track) -> FeatureVector {
    let mut f = [0.0; N_FEATURES];
    for (i, &q) in track.charge.iter().enumerate() {
        f[i % Y_PIXELS] += q as f64;
    }
    f[Y_PIXELS] = track.y0;
    f
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Class {
    /// pT above the cut.
    Signal,
    /// pT below the cut.
    Background,
}

/// Column the synthetic tracks cross.
const SYNTH_X: usize = X_PIXELS / 2;

/// Segment length in pixels for a given pT.
pub fn synth_length(pt: f64) -> usize {
    (1.0 + 8.0 / pt).round() as usize
}

/// Synthetic stand-in for the smart-pixel data. The track covers
/// `round(1 + 8/pT)` rows centred `y0` pixels from the middle row; each
/// covered pixel gets unit charge per time slice with 5% Gaussian noise.
pub fn synth_track(class: Class, seed: u64) -> Track {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pt = match class {
        Class::Signal => rng.gen_range(PT_CUT..10.0),
        Class::Background => rng.gen_range(0.2..PT_CUT),
    };
    let y0: f64 = rng.gen_range(-6.0..6.0);
    let len = synth_length(pt) as f64;
    let centre = (Y_PIXELS / 2) as f64 + y0;
    let lo = (centre - len / 2.0).round().max(0.0) as usize;
    let hi = ((centre + len / 2.0).round() as i64).clamp(0, Y_PIXELS as i64) as usize;
    let noise = Normal::new(1.0, 0.05).unwrap();
    let mut charge = vec![0f32; CHARGE_LEN];
    for t in 0..T_SLICES {
        for y in lo..hi.max(lo + 1).min(Y_PIXELS) {
            charge[Track::index(t, SYNTH_X, y)] = f64::max(noise.sample(&mut rng), 0.0) as f32;
        }
    }
    Track { charge, y0, pt }
}
