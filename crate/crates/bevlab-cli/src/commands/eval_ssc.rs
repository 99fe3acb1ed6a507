//! `bevlab eval-ssc` — score predicted grids against references.

use std::path::PathBuf;

use bevlab::eval::{iou, mae, Region};
use bevlab::grid::{LabelGrid, PartitionGrid, ScalarGrid};
use bevlab::io::{bevg, read_bevg};
use bevlab::BevError;
use clap::Args as ClapArgs;
use serde_json::{json, Map, Value};

use crate::util;

#[derive(ClapArgs)]
pub struct Args {
    /// Predicted BEV label grid.
    #[arg(long)]
    pred: PathBuf,
    /// Reference BEV label grid.
    #[arg(long)]
    gt: PathBuf,
    /// Observation-partition grid (e.g. from `bev-gt --out-part`).
    #[arg(long)]
    partition: PathBuf,
    /// Predicted elevation grid (enables the MAE column).
    #[arg(long, requires = "gt_elev")]
    pred_elev: Option<PathBuf>,
    /// Reference elevation grid.
    #[arg(long, requires = "pred_elev")]
    gt_elev: Option<PathBuf>,
    /// Output JSON report.
    #[arg(long)]
    report: PathBuf,
}

fn load_labels(path: &PathBuf) -> anyhow::Result<LabelGrid> {
    Ok(bevg::to_label_grid(&read_bevg(path)?)?)
}

fn load_scalar(path: &PathBuf) -> anyhow::Result<ScalarGrid> {
    Ok(bevg::to_scalar_grid(&read_bevg(path)?)?)
}

fn load_partition(path: &PathBuf) -> anyhow::Result<PartitionGrid> {
    Ok(bevg::to_partition_grid(&read_bevg(path)?)?)
}

const REGIONS: [(Region, &str); 3] = [
    (Region::Unoccluded, "unoccluded"),
    (Region::Occluded, "occluded"),
    (Region::Both, "both"),
];

pub fn run(args: Args) -> anyhow::Result<()> {
    let pred = load_labels(&args.pred)?;
    let gt = load_labels(&args.gt)?;
    let partition = load_partition(&args.partition)?;
    let elevations = match (&args.pred_elev, &args.gt_elev) {
        (Some(p), Some(g)) => Some((load_scalar(p)?, load_scalar(g)?)),
        _ => None,
    };

    let mut regions = Map::new();
    for (region, name) in REGIONS {
        let entry = match iou(&pred, &gt, region, &partition) {
            Ok(report) => {
                let mut per_class = Map::new();
                for (class, value) in report.classes.iter().zip(&report.iou) {
                    per_class.insert(class.to_string(), json!(value));
                }
                let mut entry = Map::new();
                entry.insert("cells".into(), json!(report.confusion.total()));
                entry.insert("iou".into(), Value::Object(per_class));
                entry.insert("miou".into(), json!(report.miou));
                if let Some((pe, ge)) = &elevations {
                    let value = match mae(pe, ge, region, &partition) {
                        Ok(v) => json!(v),
                        Err(BevError::EmptyRegion) => Value::Null,
                        Err(e) => return Err(e.into()),
                    };
                    entry.insert("mae".into(), value);
                }
                println!(
                    "{name}: mIoU {:.4} over {} classes ({} cells)",
                    report.miou,
                    report.classes.len(),
                    report.confusion.total()
                );
                Value::Object(entry)
            }
            Err(BevError::EmptyRegion) => {
                log::warn!("region '{name}' selects no cells; reported as null");
                println!("{name}: no cells");
                Value::Null
            }
            Err(e) => return Err(e.into()),
        };
        regions.insert(name.to_string(), entry);
    }

    util::write_json(&args.report, &json!({ "regions": regions }))?;
    Ok(())
}
