use std::io::Write;

use serde::Serialize;

use super::{KineticsError, PathRecord};
use crate::equilibria::RateTag;
use crate::media::LawDescriptor;

/// Sidecar metadata for a profile CSV.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub scale: usize,
    pub sites: usize,
    pub rho: f64,
    pub initial_profile: String,
    pub law: LawDescriptor,
    pub rate: RateTag,
    pub horizon: f64,
    pub replicas: usize,
    pub bins: usize,
}

/// Long-format rows `replica,time,grid_index,density`.
pub fn write_profiles_csv<'a, W, I>(out: W, records: I) -> Result<(), KineticsError>
where
    W: Write,
    I: IntoIterator<Item = (usize, &'a PathRecord)>,
{
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["replica", "time", "grid_index", "density"])?;
    for (replica, rec) in records {
        for (t, profile) in rec.snapshot_times.iter().zip(&rec.density_profiles) {
            for (j, u) in profile.iter().enumerate() {
                w.serialize((replica, t, j, u))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_metadata_json<W: Write>(out: W, meta: &RunMetadata) -> Result<(), KineticsError> {
    serde_json::to_writer_pretty(out, meta)?;
    Ok(())
}
