use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::kalman::{self, KalmanState, KfParams, Measurement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackState {
    New,
    Tracked,
    Lost,
    Removed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
    /// Unit-norm appearance vector, if one was extracted.
    pub embedding: Option<Vec<f32>>,
}

impl Detection {
    pub fn new(bbox: BBox, score: f64) -> Self {
        Detection { bbox, score, embedding: None }
    }

    pub fn with_embedding(mut self, emb: Vec<f32>) -> Self {
        self.embedding = Some(emb);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.bbox.validate()?;
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::InvalidParameter(format!("detection score {} outside [0,1]", self.score)));
        }
        if let Some(e) = &self.embedding {
            let n = norm(e);
            if (n - 1.0).abs() > crate::association::UNIT_NORM_TOL {
                return Err(Error::Embedding(format!("detection embedding has norm {n}")));
            }
        }
        Ok(())
    }
}

pub(crate) fn norm(v: &[f32]) -> f64 {
    v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt()
}

/// Scales `v` to unit length. `None` for a zero or non-finite vector.
pub fn normalize(v: &[f32]) -> Option<Vec<f32>> {
    let n = norm(v);
    if !(n.is_finite() && n > 0.0) {
        return None;
    }
    Some(v.iter().map(|x| (*x as f64 / n) as f32).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    /// Public identity, assigned when the track is first activated.
    pub id: Option<u64>,
    pub state: TrackState,
    pub kf: KalmanState,
    /// Smoothed unit-norm appearance.
    pub emb: Option<Vec<f32>>,
    pub score: f64,
    pub start_frame: u32,
    pub last_update_frame: u32,
    pub is_activated: bool,
}

impl Track {
    pub(crate) fn spawn(det: &Detection, frame: u32, kf: &KfParams) -> Result<Track> {
        let z = Measurement::from_bbox(&det.bbox)?;
        Ok(Track {
            id: None,
            state: TrackState::New,
            kf: kalman::initiate(&z, kf)?,
            emb: det.embedding.clone(),
            score: det.score,
            start_frame: frame,
            last_update_frame: frame,
            is_activated: false,
        })
    }

    /// Box at the current state mean; `None` if the size collapsed.
    pub fn bbox(&self) -> Option<BBox> {
        self.kf.bbox().ok()
    }

    pub(crate) fn apply_detection(&mut self, det: &Detection, frame: u32, kf: &KfParams) -> Result<()> {
        let z = Measurement::from_bbox(&det.bbox)?;
        self.kf = kalman::update(&self.kf, &z, kf)?;
        self.score = det.score;
        self.last_update_frame = frame;
        self.state = TrackState::Tracked;
        Ok(())
    }
}

/// Exponential moving average of the appearance state, re-normalized.
/// The first observation is taken as is; an average that cancels to zero
/// leaves the previous state untouched.
pub fn update_appearance(prev: Option<&[f32]>, obs: &[f32], alpha: f64) -> Vec<f32> {
    let Some(prev) = prev else {
        return obs.to_vec();
    };
    let mixed: Vec<f32> = prev
        .iter()
        .zip(obs)
        .map(|(e, f)| (alpha * *e as f64 + (1.0 - alpha) * *f as f64) as f32)
        .collect();
    normalize(&mixed).unwrap_or_else(|| prev.to_vec())
}
