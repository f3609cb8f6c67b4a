use std::path::PathBuf;

use capbias_core::exposure::{ev_offset, CameraSettings};
use capbias_core::{compute_ev, quantize_ev};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{load_grid, parse_anchor};
use crate::config::{config_error, Common, Outcome};
use crate::Run;

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EvArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Exposure time, e.g. 1/125 or 0.5.
    #[arg(long)]
    pub shutter: Option<String>,
    /// Aperture f-number, e.g. 8 or 5.6.
    #[arg(long)]
    pub fnumber: Option<String>,
    #[arg(long)]
    pub iso: Option<u32>,
    /// Scene illuminance; adds the EV offset to the output.
    #[arg(long)]
    pub lux: Option<f64>,
    /// Grid file whose lux anchors to use.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Extra anchor as LUX=EV (repeatable).
    #[arg(long)]
    pub anchor: Vec<String>,
}

impl Run for EvArgs {
    fn common(&self) -> &Common {
        &self.common
    }

    fn common_mut(&mut self) -> &mut Common {
        &mut self.common
    }

    fn fill_defaults(&mut self) {}

    fn run(&self) -> anyhow::Result<Outcome> {
        let shutter = self.shutter.as_deref().ok_or_else(|| config_error("shutter: required"))?;
        let fnumber = self.fnumber.as_deref().ok_or_else(|| config_error("fnumber: required"))?;
        let iso = self.iso.ok_or_else(|| config_error("iso: required"))?;
        let settings =
            CameraSettings::parse(shutter, fnumber, iso).map_err(|e| config_error(format!("settings: {e}")))?;
        let ev = compute_ev(&settings);
        let bin = quantize_ev(ev);
        println!("EV {ev:.2}");
        println!("bin {bin}");
        let mut outcome = Outcome::default();
        outcome.summary.insert("ev".into(), json!(ev));
        outcome.summary.insert("ev_bin".into(), json!(bin));
        if let Some(lux) = self.lux {
            let mut anchors = load_grid(self.grid.as_deref())?
                .anchors()
                .map_err(|e| config_error(format!("anchors: {e}")))?;
            for a in &self.anchor {
                let (l, e) = parse_anchor(a)?;
                anchors.insert(l, e);
            }
            let offset = ev_offset(bin, lux, &anchors).map_err(|e| config_error(format!("lux: {e}")))?;
            println!("offset {offset:+}");
            outcome.summary.insert("ev_offset".into(), json!(offset));
        }
        Ok(outcome)
    }
}
