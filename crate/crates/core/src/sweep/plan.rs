use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::exposure::{CameraSettings, ExposureBin, ExposureError, LuxAnchors, SweepGrid};
use crate::rational::format_decimal;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanStep {
    pub index: usize,
    pub settings: CameraSettings,
    pub exposure: ExposureBin,
}

/// Every grid combination for one scene under one illuminance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CapturePlan {
    pub scene_id: String,
    pub lux: f64,
    pub steps: Vec<PlanStep>,
}

impl CapturePlan {
    pub fn filename(&self, step: &PlanStep) -> String {
        format!("{}_{}_{}.jpg", self.scene_id, format_decimal(self.lux), step.index)
    }
}

/// One plan per lux level. Steps follow grid order, which puts the slowest
/// shutter speeds at the end of each sweep.
pub fn plan_sweep(
    grid: &SweepGrid,
    scene_id: &str,
    lux_levels: &[f64],
    anchors: &LuxAnchors,
) -> Result<Vec<CapturePlan>, ExposureError> {
    lux_levels
        .iter()
        .map(|&lux| {
            let steps = grid
                .combos
                .iter()
                .enumerate()
                .map(|(index, settings)| {
                    Ok(PlanStep {
                        index,
                        settings: *settings,
                        exposure: ExposureBin::of(settings, lux, anchors)?,
                    })
                })
                .collect::<Result<Vec<_>, ExposureError>>()?;
            Ok(CapturePlan {
                scene_id: scene_id.to_string(),
                lux,
                steps,
            })
        })
        .collect()
}

/// Shell script driving gphoto2 through a plan, one capture per line.
pub fn emit_tether_script(plans: &[CapturePlan]) -> String {
    let mut out = String::from("#!/bin/sh\n");
    for plan in plans {
        let _ = writeln!(
            out,
            "# scene {} at {} lux: {} captures",
            plan.scene_id,
            format_decimal(plan.lux),
            plan.steps.len()
        );
        for step in &plan.steps {
            let s = &step.settings;
            let _ = writeln!(
                out,
                "gphoto2 --set-config shutterspeed={} --set-config iso={} --set-config aperture={} --capture-image-and-download --filename {}",
                s.exposure_time.camera_label(),
                s.iso,
                s.f_number.camera_label(),
                plan.filename(step)
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::exposure::{compute_ev, ev_offset, quantize_ev};

    #[test]
    fn snap_plans() {
        let plans = plan_sweep(&SweepGrid::snap(), "cups", &[1000.0, 10.0], &LuxAnchors::default())
            .unwrap();
        assert_eq!(plans.len(), 2);
        assert!(plans.iter().all(|p| p.steps.len() == 630));
        for plan in &plans {
            for step in &plan.steps {
                let bin = quantize_ev(compute_ev(&step.settings));
                assert_eq!(step.exposure.ev_bin, bin);
                assert_eq!(
                    step.exposure.ev_offset,
                    ev_offset(bin, plan.lux, &LuxAnchors::default()).unwrap()
                );
            }
            let last = plan.steps.last().unwrap();
            assert_eq!(last.settings.exposure_time.value(), 30.0);
        }
    }

    #[test]
    fn unknown_lux_fails() {
        let err = plan_sweep(&SweepGrid::snap(), "s", &[42.0], &LuxAnchors::default());
        assert_eq!(err.unwrap_err(), ExposureError::UnknownLux(42.0));
    }

    #[test]
    fn script_lines() {
        let grid = SweepGrid::build(
            vec!["1/125".parse().unwrap()],
            vec![200],
            vec!["5.6".parse().unwrap()],
        )
        .unwrap();
        let plans = plan_sweep(&grid, "desk", &[1000.0], &LuxAnchors::default()).unwrap();
        assert_eq!(plans[0].steps.len(), 1);
        let script = emit_tether_script(&plans);
        let lines: Vec<_> = script.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(lines.len(), 1);
        assert!(lines[0].contains("shutterspeed=1/125"));
        assert!(lines[0].contains("iso=200"));
        assert!(lines[0].contains("aperture=5.6"));
        assert!(lines[0].ends_with("--filename desk_1000_0.jpg"));

        let plans = plan_sweep(&SweepGrid::snap(), "desk", &[1000.0, 10.0], &LuxAnchors::default())
            .unwrap();
        let script = emit_tether_script(&plans);
        let names: Vec<_> = script
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| l.rsplit(' ').next().unwrap())
            .collect();
        assert_eq!(names.len(), 1260);
        assert_eq!(names.iter().collect::<HashSet<_>>().len(), 1260);
        assert!(script.contains("shutterspeed=0.5 "));
    }
}
