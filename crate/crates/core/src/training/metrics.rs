use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub const STEP_HEADER: &str = "step,l_sup,l_rec,l_adv_d,l_adv_g,total_g";
pub const EPOCH_HEADER: &str = "epoch,val_l1,val_iou";

/// Losses of one optimizer step. Disabled terms are zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub l_sup: f32,
    pub l_rec: f32,
    pub l_adv_d: f32,
    pub l_adv_g: f32,
    pub total_g: f32,
}

impl StepRecord {
    /// Shortest round-trip formatting, so equal losses give equal lines.
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.step, self.l_sup, self.l_rec, self.l_adv_d, self.l_adv_g, self.total_g
        )
    }

    pub fn is_finite(&self) -> bool {
        [self.l_sup, self.l_rec, self.l_adv_d, self.l_adv_g, self.total_g]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: u64,
    pub val_l1: f32,
    pub val_iou: f32,
}

impl EpochRecord {
    pub fn csv_line(&self) -> String {
        format!("{},{},{}", self.epoch, self.val_l1, self.val_iou)
    }
}

/// Append-only training log.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsLog {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

impl MetricsLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn steps_csv(&self) -> String {
        csv(STEP_HEADER, self.steps.iter().map(StepRecord::csv_line))
    }

    pub fn epochs_csv(&self) -> String {
        csv(EPOCH_HEADER, self.epochs.iter().map(EpochRecord::csv_line))
    }
}

fn csv(header: &str, lines: impl Iterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for l in lines {
        s.push_str(&l);
        s.push('\n');
    }
    s
}

/// Append `lines` to a CSV file, writing `header` first if the file is new.
pub fn append_csv(path: &Path, header: &str, lines: &[String]) -> Result<()> {
    let fresh = !path.exists();
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut buf = String::new();
    if fresh {
        buf.push_str(header);
        buf.push('\n');
    }
    for l in lines {
        buf.push_str(l);
        buf.push('\n');
    }
    f.write_all(buf.as_bytes())?;
    Ok(())
}
