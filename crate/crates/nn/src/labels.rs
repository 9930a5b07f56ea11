//! Angle ↔ unit-interval encoding for the three heads.

use aoa_core::augment::FOV_DEG;
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// `(class_two_sources, z1, z2)` targets for one record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelTriple {
    pub class_two_sources: u8,
    pub z1: f64,
    pub z2: f64,
}

impl LabelTriple {
    pub fn as_array(&self) -> [f64; 3] {
        [self.class_two_sources as f64, self.z1, self.z2]
    }
}

pub fn encode_angle(theta_deg: f64) -> Result<f64> {
    if !(-FOV_DEG..=FOV_DEG).contains(&theta_deg) {
        return Err(NnError::Domain(format!("angle {theta_deg}° outside ±{FOV_DEG}°")));
    }
    Ok((theta_deg + FOV_DEG) / (2.0 * FOV_DEG))
}

pub fn decode_angle(z: f64) -> f64 {
    z * 2.0 * FOV_DEG - FOV_DEG
}

/// Single sources repeat θ1 in both regression slots; pairs are sorted.
pub fn encode_label(theta1: f64, theta2: Option<f64>) -> Result<LabelTriple> {
    let z1 = encode_angle(theta1)?;
    match theta2 {
        None => Ok(LabelTriple {
            class_two_sources: 0,
            z1,
            z2: z1,
        }),
        Some(t2) => {
            let z2 = encode_angle(t2)?;
            Ok(LabelTriple {
                class_two_sources: 1,
                z1: z1.min(z2),
                z2: z1.max(z2),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    pub num_sources: u8,
    pub angles_deg: Vec<f64>,
    /// Both regression heads decoded, ascending, regardless of the class.
    pub raw_angles_deg: [f64; 2],
}

pub fn decode_prediction(p: f64, z1: f64, z2: f64, threshold: f64) -> Decoded {
    let clamp = |z: f64| z.clamp(0.0, 1.0);
    let (a, b) = (decode_angle(clamp(z1)), decode_angle(clamp(z2)));
    let raw = [a.min(b), a.max(b)];
    if p >= threshold {
        Decoded {
            num_sources: 2,
            angles_deg: raw.to_vec(),
            raw_angles_deg: raw,
        }
    } else {
        Decoded {
            num_sources: 1,
            angles_deg: vec![decode_angle((clamp(z1) + clamp(z2)) / 2.0)],
            raw_angles_deg: raw,
        }
    }
}
