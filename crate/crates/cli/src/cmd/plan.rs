use std::path::PathBuf;

use capbias_core::rational::format_decimal;
use capbias_core::sweep::{emit_tether_script, plan_sweep};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{load_grid, parse_anchor, write_file};
use crate::config::{config_error, Common, Outcome};
use crate::Run;

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Grid definition (shutter, iso, fnumber, lux_anchors); built-in grid if omitted.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Illuminance levels to plan for (repeatable).
    #[arg(long)]
    pub lux: Vec<f64>,
    /// Extra anchor as LUX=EV (repeatable).
    #[arg(long)]
    pub anchor: Vec<String>,
    #[arg(long)]
    pub scene: Option<String>,
    /// Also write a gphoto2 tether script.
    #[arg(long)]
    pub emit_script: bool,
}

impl Run for PlanArgs {
    fn common(&self) -> &Common {
        &self.common
    }

    fn common_mut(&mut self) -> &mut Common {
        &mut self.common
    }

    fn fill_defaults(&mut self) {
        self.scene.get_or_insert_with(|| "scene000".into());
    }

    fn run(&self) -> anyhow::Result<Outcome> {
        if self.lux.is_empty() {
            return Err(config_error("lux: at least one level required"));
        }
        let file = load_grid(self.grid.as_deref())?;
        let grid = file.grid().map_err(|e| config_error(format!("grid: {e}")))?;
        let mut anchors = file.anchors().map_err(|e| config_error(format!("anchors: {e}")))?;
        for a in &self.anchor {
            let (l, e) = parse_anchor(a)?;
            anchors.insert(l, e);
        }
        let scene = self.scene.as_deref().unwrap_or("scene000");
        let plans = plan_sweep(&grid, scene, &self.lux, &anchors).map_err(|e| config_error(format!("lux: {e}")))?;
        let out = self.common.out();
        let mut outcome = Outcome::default();
        for plan in &plans {
            let mut text = serde_json::to_string_pretty(plan)?;
            text.push('\n');
            let name = format!("plan_{}_{}.json", plan.scene_id, format_decimal(plan.lux));
            write_file(out.join(name), text.as_bytes(), &mut outcome.outputs)?;
        }
        if self.emit_script {
            write_file(out.join("tether.sh"), emit_tether_script(&plans).as_bytes(), &mut outcome.outputs)?;
        }
        let steps: usize = plans.iter().map(|p| p.steps.len()).sum();
        outcome.summary.insert("combos".into(), json!(grid.len()));
        outcome.summary.insert("steps".into(), json!(steps));
        println!("{} plan(s), {steps} steps", plans.len());
        Ok(outcome)
    }
}
