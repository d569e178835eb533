//! Render conditions: named palette/noise/brightness combinations standing in
//! for weather. Training and testing conditions are disjoint by name.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub sky: [f32; 3],
    pub road: [f32; 3],
    pub marking: [f32; 3],
    pub shoulder: [f32; 3],
    pub offroad: [f32; 3],
    pub obstacle: [f32; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderCondition {
    pub name: String,
    pub palette: Palette,
    /// Additive uniform noise amplitude, in [0, 0.2].
    pub noise_sigma: f64,
    /// Global brightness scale, in [0.5, 1.5].
    pub brightness: f64,
}

impl RenderCondition {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.2).contains(&self.noise_sigma) {
            return Err(Error::InvalidConfig(format!(
                "noise_sigma {} outside [0, 0.2]",
                self.noise_sigma
            )));
        }
        if !(0.5..=1.5).contains(&self.brightness) {
            return Err(Error::InvalidConfig(format!(
                "brightness {} outside [0.5, 1.5]",
                self.brightness
            )));
        }
        Ok(())
    }
}

fn cond(
    name: &str,
    sky: [f32; 3],
    road: [f32; 3],
    offroad: [f32; 3],
    noise_sigma: f64,
    brightness: f64,
) -> RenderCondition {
    RenderCondition {
        name: name.to_string(),
        palette: Palette {
            sky,
            road,
            marking: [0.92, 0.92, 0.88],
            shoulder: [0.55, 0.52, 0.45],
            offroad,
            obstacle: [0.75, 0.25, 0.2],
        },
        noise_sigma,
        brightness,
    }
}

/// The four training conditions.
pub fn train_conditions() -> Vec<RenderCondition> {
    vec![
        cond("day-clear", [0.55, 0.75, 0.95], [0.32, 0.32, 0.34], [0.3, 0.55, 0.25], 0.0, 1.15),
        cond("day-overcast", [0.65, 0.68, 0.7], [0.38, 0.38, 0.4], [0.32, 0.48, 0.28], 0.05, 0.95),
        cond("dusk", [0.5, 0.4, 0.55], [0.28, 0.26, 0.3], [0.25, 0.35, 0.22], 0.03, 0.75),
        cond("day-rain", [0.5, 0.55, 0.6], [0.22, 0.24, 0.28], [0.24, 0.4, 0.22], 0.12, 0.85),
    ]
}

/// The two held-out testing conditions.
pub fn test_conditions() -> Vec<RenderCondition> {
    vec![
        cond("sunset-wet", [0.8, 0.5, 0.35], [0.26, 0.23, 0.26], [0.35, 0.38, 0.2], 0.08, 0.7),
        cond("fog", [0.75, 0.77, 0.78], [0.45, 0.46, 0.48], [0.42, 0.5, 0.4], 0.15, 1.25),
    ]
}

pub fn condition_by_name(name: &str) -> Result<RenderCondition> {
    train_conditions()
        .into_iter()
        .chain(test_conditions())
        .find(|c| c.name == name)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown render condition {name:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_are_disjoint_and_sized() {
        let train = train_conditions();
        let test = test_conditions();
        assert_eq!(train.len(), 4);
        assert_eq!(test.len(), 2);
        for t in &train {
            assert!(test.iter().all(|e| e.name != t.name));
            t.validate().unwrap();
        }
        for t in &test {
            t.validate().unwrap();
        }
    }
}
