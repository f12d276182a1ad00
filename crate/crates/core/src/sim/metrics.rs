use super::TrajectoryRecord;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedStats {
    pub mean: f64,
    pub max: f64,
    pub steps: usize,
}

impl SpeedStats {
    fn from_speeds(speeds: impl Iterator<Item = f64>) -> Option<Self> {
        let (mut sum, mut max, mut n) = (0.0, f64::NEG_INFINITY, 0usize);
        for s in speeds {
            sum += s;
            max = max.max(s);
            n += 1;
        }
        (n > 0).then(|| SpeedStats {
            mean: sum / n as f64,
            max,
            steps: n,
        })
    }
}

/// Speed statistics restricted to soft-region and intersection steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionalStats {
    pub soft_region: Option<SpeedStats>,
    pub intersection: Option<SpeedStats>,
}

pub fn regional_speed_stats(record: &TrajectoryRecord) -> RegionalStats {
    RegionalStats {
        soft_region: SpeedStats::from_speeds(
            record.steps.iter().filter(|s| s.in_soft_region()).map(|s| s.speed()),
        ),
        intersection: SpeedStats::from_speeds(
            record.steps.iter().filter(|s| s.intersection).map(|s| s.speed()),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RegionLabel;
    use crate::sim::StepRecord;
    use crate::vector;

    fn record(speeds: &[f64], region: RegionLabel, intersection: bool) -> TrajectoryRecord {
        let steps = speeds
            .iter()
            .enumerate()
            .map(|(i, &s)| StepRecord {
                t: i as f64,
                position: vector(&[0.0, 0.0]),
                velocity: vector(&[0.0, s]),
                gammas: vec![1.5],
                gammas_soft: vec![0.8],
                regions: vec![region],
                intersection,
            })
            .collect::<Vec<_>>();
        TrajectoryRecord {
            step_count: steps.len() - 1,
            steps,
            converged: true,
            navigation_time: None,
            min_gamma: 1.5,
            failure: None,
        }
    }

    #[test]
    fn never_soft_is_absent() {
        let stats = regional_speed_stats(&record(&[1.0, 2.0], RegionLabel::Exterior, false));
        assert_eq!(stats.soft_region, None);
        assert_eq!(stats.intersection, None);
    }

    #[test]
    fn constant_speed() {
        let stats = regional_speed_stats(&record(&[0.7; 5], RegionLabel::SoftRegion, true));
        let s = stats.soft_region.unwrap();
        assert_eq!((s.mean, s.max), (0.7, 0.7));
        assert_eq!(stats.intersection.unwrap().steps, 5);
    }

    #[test]
    fn three_steps() {
        let stats = regional_speed_stats(&record(&[1.0, 2.0, 3.0], RegionLabel::SoftRegion, false));
        let s = stats.soft_region.unwrap();
        assert_eq!((s.mean, s.max, s.steps), (2.0, 3.0, 3));
    }
}
