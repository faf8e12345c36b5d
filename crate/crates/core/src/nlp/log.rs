use std::io::Write;

use super::solver::IterRecord;

/// Iteration log as CSV: `iter,cost,kkt_residual,step_norm,mu,alpha`.
pub fn write_iteration_log<W: Write>(records: &[IterRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
