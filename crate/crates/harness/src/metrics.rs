//! Rollout metrics: convergence summaries, the arc-length path-difference
//! metric and the variant comparison tables.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSpace {
    Config,
    EndEffector,
}

/// Weighted arc-length difference of path P against path Q:
/// L = (Σ‖ṗ_t‖Δt)⁻¹ Σ c(p_t, Q)‖ṗ_t‖Δt with c the discrete minimum
/// distance to Q's samples. A rest path falls back to max_t c(p_t, Q).
pub fn path_difference(
    p_positions: &[DVector<f64>],
    p_speeds: &[f64],
    q_positions: &[DVector<f64>],
    dt: f64,
) -> f64 {
    assert!(!p_positions.is_empty() && !q_positions.is_empty());
    assert_eq!(p_positions.len(), p_speeds.len());
    let cost = |point: &DVector<f64>| {
        q_positions
            .iter()
            .map(|q| (point - q).norm())
            .fold(f64::INFINITY, f64::min)
    };
    let total: f64 = p_speeds.iter().map(|s| s * dt).sum();
    if total <= 0.0 {
        return p_positions.iter().map(|p| cost(p)).fold(0.0, f64::max);
    }
    let weighted: f64 = p_positions
        .iter()
        .zip(p_speeds)
        .map(|(p, s)| cost(p) * s * dt)
        .sum();
    weighted / total
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RolloutMetrics {
    pub label: String,
    pub variant: String,
    pub style: String,
    pub speed: Option<f64>,
    pub obstacle_metric: Option<String>,
    pub state_index: usize,
    pub converged: bool,
    pub termination: String,
    pub final_goal_distance: f64,
    pub min_barrier_distance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
    pub steps: usize,
}

/// Both directions of the (asymmetric) path metric for one pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathPair {
    pub a: String,
    pub b: String,
    pub space: MetricSpace,
    pub l_ab: f64,
    pub l_ba: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StyleSummary {
    pub style: String,
    pub rollouts: usize,
    pub converged: usize,
    pub barrier_violations: usize,
    pub mean_final_goal_distance: f64,
    pub max_final_goal_distance: f64,
    /// Mean of both directions over all cross-speed pairs of this style.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_cross_speed_path_difference: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub rollouts: Vec<RolloutMetrics>,
    pub cross_speed_pairs: Vec<PathPair>,
    pub styles: Vec<StyleSummary>,
}

impl MetricsReport {
    pub fn style(&self, name: &str) -> Option<&StyleSummary> {
        self.styles.iter().find(|s| s.style == name)
    }

    pub fn failures(&self) -> usize {
        self.rollouts
            .iter()
            .filter(|r| r.termination.starts_with("barrier") || r.termination.starts_with("diverg"))
            .count()
    }
}

/// Builds per-style summaries and cross-speed pair means from the rollout
/// table.
pub fn summarize(
    scenario: &str,
    rollouts: Vec<RolloutMetrics>,
    cross_speed_pairs: Vec<PathPair>,
) -> MetricsReport {
    let mut styles: Vec<String> = rollouts.iter().map(|r| r.style.clone()).collect();
    styles.sort();
    styles.dedup();
    let summaries = styles
        .iter()
        .map(|style| {
            let of_style: Vec<&RolloutMetrics> =
                rollouts.iter().filter(|r| &r.style == style).collect();
            let pair_values: Vec<f64> = cross_speed_pairs
                .iter()
                .filter(|p| p.a.starts_with(style.as_str()))
                .flat_map(|p| [p.l_ab, p.l_ba])
                .collect();
            let finals: Vec<f64> = of_style
                .iter()
                .map(|r| r.final_goal_distance)
                .filter(|d| d.is_finite())
                .collect();
            StyleSummary {
                style: style.clone(),
                rollouts: of_style.len(),
                converged: of_style.iter().filter(|r| r.converged).count(),
                barrier_violations: of_style
                    .iter()
                    .filter(|r| r.termination.starts_with("barrier"))
                    .count(),
                mean_final_goal_distance: mean(&finals),
                max_final_goal_distance: finals.iter().copied().fold(0.0, f64::max),
                mean_cross_speed_path_difference: (!pair_values.is_empty())
                    .then(|| mean(&pair_values)),
            }
        })
        .collect();
    MetricsReport {
        scenario: scenario.to_string(),
        rollouts,
        cross_speed_pairs,
        styles: summaries,
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn line(y: f64, n: usize, speed: f64) -> (Vec<DVector<f64>>, Vec<f64>) {
        let positions = (0..n)
            .map(|i| DVector::from_row_slice(&[i as f64 / (n - 1) as f64, y]))
            .collect();
        (positions, vec![speed; n])
    }

    #[test]
    fn identical_paths_zero() {
        let (p, s) = line(0.0, 50, 1.0);
        assert_eq!(path_difference(&p, &s, &p, 0.01), 0.0);
    }

    #[test]
    fn parallel_lines_offset_d() {
        let (p, sp) = line(0.0, 200, 1.0);
        let (q, _) = line(0.75, 200, 1.0);
        let l = path_difference(&p, &sp, &q, 0.01);
        assert_relative_eq!(l, 0.75, epsilon = 1e-6);
    }

    #[test]
    fn rest_path_degenerates_to_max_cost() {
        let p = vec![DVector::from_row_slice(&[0.0, 0.0]); 10];
        let speeds = vec![0.0; 10];
        let q = vec![DVector::from_row_slice(&[3.0, 4.0])];
        assert_relative_eq!(path_difference(&p, &speeds, &q, 0.01), 5.0);
    }

    #[test]
    fn translation_invariance_when_both_shift() {
        let (p, sp) = line(0.0, 60, 1.3);
        let (q, _) = line(0.4, 60, 1.3);
        let l0 = path_difference(&p, &sp, &q, 0.01);
        let shift = DVector::from_row_slice(&[5.0, -2.0]);
        let ps: Vec<_> = p.iter().map(|v| v + &shift).collect();
        let qs: Vec<_> = q.iter().map(|v| v + &shift).collect();
        let l1 = path_difference(&ps, &sp, &qs, 0.01);
        assert_relative_eq!(l0, l1, epsilon = 1e-12);
    }
}
