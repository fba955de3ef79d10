//! Linear value model: least squares from public features to return-to-go.
//!
//! # File format
//!
//! Little-endian:
//!
//! ```text
//! magic            8 bytes "HLBSVAL1"
//! encoder_version  u64
//! num_colors, num_ranks, hand_size, max_hint_tokens, max_lives   u8 each
//! rank_counts      u8 x num_ranks
//! feature_len      u32
//! ridge            f64   (0 when the plain normal equations were solved)
//! train_rmse       f64
//! heldout_rmse     f64
//! samples          u64
//! weights          f64 x feature_len
//! ```

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::ReplayBuffer;
use crate::engine::{GameState, Variant};
use crate::error::{Error, Result};
use crate::observe::{potential_score, encode_public, encoder_version, Layout, PublicState};
use crate::rng::Rng;

const MAGIC: &[u8; 8] = b"HLBSVAL1";

/// Ridge added to the (1/n-scaled) normal equations when they are singular.
/// One-hot blocks always sum to the bias feature, so in practice this is the
/// path taken.
pub const RIDGE_LAMBDA: f64 = 1e-4;

/// Estimate of the remaining return from a state.
pub trait ValueFunction: Send + Sync {
    fn value(&self, state: &GameState, rng: &mut Rng) -> f64;
}

/// Always zero: rollouts are truncated without a bootstrap.
pub struct ZeroValue;

impl ValueFunction for ZeroValue {
    fn value(&self, _state: &GameState, _rng: &mut Rng) -> f64 {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueModel {
    variant: Variant,
    encoder_version: u64,
    weights: Vec<f64>,
    pub ridge: f64,
    pub train_rmse: f64,
    pub heldout_rmse: f64,
    pub samples: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueConfig {
    pub ridge: f64,
}

impl Default for ValueConfig {
    fn default() -> Self {
        ValueConfig { ridge: RIDGE_LAMBDA }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueReport {
    pub train_rmse: f64,
    pub heldout_rmse: f64,
    pub ridge_used: f64,
    pub train_samples: usize,
    pub heldout_samples: usize,
}

impl ValueModel {
    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Raw linear prediction of the return-to-go.
    pub fn predict(&self, public: &PublicState) -> f64 {
        encode_public(public).0.iter().zip(&self.weights).map(|(x, w)| x * w).sum()
    }

    /// Prediction clipped to what is still achievable: at most the potential
    /// score minus the current score, at least losing everything.
    pub fn predict_clipped(&self, public: &PublicState) -> f64 {
        let score = public.score() as f64;
        let hi = potential_score(public) as f64 - score;
        self.predict(public).clamp(-score, hi.max(-score))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let v = &self.variant;
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&self.encoder_version.to_le_bytes());
        b.extend_from_slice(&[
            v.num_colors() as u8,
            v.num_ranks() as u8,
            v.hand_size() as u8,
            v.max_hint_tokens(),
            v.max_lives(),
        ]);
        b.extend_from_slice(v.rank_counts());
        b.extend_from_slice(&(self.weights.len() as u32).to_le_bytes());
        for x in [self.ridge, self.train_rmse, self.heldout_rmse] {
            b.extend_from_slice(&x.to_le_bytes());
        }
        b.extend_from_slice(&self.samples.to_le_bytes());
        for w in &self.weights {
            b.extend_from_slice(&w.to_le_bytes());
        }
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ValueModel> {
        let mut r = bytes;
        let mut fixed = |n: usize| -> Result<Vec<u8>> {
            let mut v = vec![0u8; n];
            r.read_exact(&mut v).map_err(|_| Error::parse("truncated value model file"))?;
            Ok(v)
        };
        if fixed(8)? != MAGIC {
            return Err(Error::parse("not a value model file"));
        }
        let u64_of = |b: Vec<u8>| u64::from_le_bytes(b.try_into().unwrap());
        let version = u64_of(fixed(8)?);
        let head = fixed(5)?;
        let counts = fixed(head[1] as usize)?;
        let variant = Variant::new(head[0], head[1], &counts, head[2], head[3], head[4], 2)?;
        let len = u32::from_le_bytes(fixed(4)?.try_into().unwrap()) as usize;
        let ridge = f64::from_bits(u64_of(fixed(8)?));
        let train_rmse = f64::from_bits(u64_of(fixed(8)?));
        let heldout_rmse = f64::from_bits(u64_of(fixed(8)?));
        let samples = u64_of(fixed(8)?);
        let weights: Vec<f64> = fixed(8 * len)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let expected = encoder_version(&variant);
        if version != expected {
            return Err(Error::EncoderMismatch { expected, found: version });
        }
        if len != Layout::public(variant).len() {
            return Err(Error::parse("value model length does not match its variant"));
        }
        Ok(ValueModel { variant, encoder_version: version, weights, ridge, train_rmse, heldout_rmse, samples })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ValueModel> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

impl ValueFunction for ValueModel {
    fn value(&self, state: &GameState, _rng: &mut Rng) -> f64 {
        self.predict_clipped(&PublicState::from_state(state))
    }
}

/// Calls `f(features, return_to_go, heldout)` for every state of the buffer.
fn for_each_row(buffer: &ReplayBuffer, mut f: impl FnMut(&[f64], f64, bool)) -> Result<()> {
    for r in buffer.iter() {
        for (t, s) in r.states()?.iter().enumerate() {
            let x = encode_public(&PublicState::from_state(s)).0;
            f(&x, r.returns[t] as f64, r.seed % 2 == 1);
        }
    }
    Ok(())
}

/// Least-squares fit of return-to-go on public features for every state
/// (terminal states included) of the even-seed games; odd seeds are held out.
///
/// Solved through the normal equations by Cholesky. If they are singular or
/// badly conditioned, `config.ridge` is added to the diagonal.
pub fn train_value(buffer: &ReplayBuffer, config: &ValueConfig) -> Result<(ValueModel, ValueReport)> {
    let variant = *buffer.variant();
    let d = Layout::public(variant).len();
    let mut xtx = DMatrix::<f64>::zeros(d, d);
    let mut xty = DVector::<f64>::zeros(d);
    let mut n_train = 0usize;
    let mut n_held = 0usize;
    let mut nz: Vec<(usize, f64)> = Vec::new();
    for_each_row(buffer, |x, y, held| {
        if held {
            n_held += 1;
            return;
        }
        n_train += 1;
        nz.clear();
        nz.extend(x.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| (i, v)));
        for &(i, a) in &nz {
            xty[i] += a * y;
            for &(j, b) in &nz {
                xtx[(i, j)] += a * b;
            }
        }
    })?;
    if n_train == 0 {
        return Err(Error::EmptyData("no even-seed games to fit the value model".into()));
    }
    let n = n_train as f64;
    xtx /= n;
    xty /= n;
    let mut ridge = 0.0;
    let plain = xtx.clone().cholesky().and_then(|c| {
        let l = c.l();
        let diag: Vec<f64> = (0..d).map(|i| l[(i, i)]).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        (min > 1e-6 * max).then(|| c.solve(&xty))
    });
    let w = match plain {
        Some(w) => w,
        None => {
            ridge = config.ridge;
            let mut a = xtx;
            for i in 0..d {
                a[(i, i)] += ridge;
            }
            a.cholesky()
                .ok_or_else(|| Error::parse("ridge-regularized normal equations are not positive definite"))?
                .solve(&xty)
        }
    };
    let (mut se_train, mut se_held) = (0.0, 0.0);
    for_each_row(buffer, |x, y, held| {
        let p: f64 = x.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
        if held {
            se_held += (p - y).powi(2);
        } else {
            se_train += (p - y).powi(2);
        }
    })?;
    let rmse = |se: f64, k: usize| if k == 0 { 0.0 } else { (se / k as f64).sqrt() };
    let report = ValueReport {
        train_rmse: rmse(se_train, n_train),
        heldout_rmse: rmse(se_held, n_held),
        ridge_used: ridge,
        train_samples: n_train,
        heldout_samples: n_held,
    };
    let model = ValueModel {
        variant,
        encoder_version: encoder_version(&variant),
        weights: w.iter().copied().collect(),
        ridge,
        train_rmse: report.train_rmse,
        heldout_rmse: report.heldout_rmse,
        samples: n_train as u64,
    };
    Ok((model, report))
}
