//! Trajectory table writer.
//!
//! Column order is fixed; floats carry 17 significant digits so every value
//! round-trips exactly. `phase` is 0 = rolling, 1 = flight, 2 = landed.

use std::io::{self, Write};

use crate::sim::TrajectoryRecord;
use crate::Scalar;

pub const COLUMNS: [&str; 18] = [
    "t", "phase", "phi", "theta", "x", "y", "dphi", "dtheta", "dx", "dy", "tau", "lambda1",
    "lambda2", "x_com", "y_com", "e_kin", "e_pot", "slip_flag",
];

pub fn write_trajectory<T: Scalar, W: Write>(out: W, record: &TrajectoryRecord<T>) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "{}", COLUMNS.join(","))?;
    for r in &record.rows {
        let s = &r.state;
        write!(out, "{:.16e},{}", s.t.to_f64_lossy(), s.phase.code())?;
        for v in [
            s.phi, s.theta, s.x, s.y, s.dphi, s.dtheta, s.dx, s.dy, r.tau, r.forces.lambda1,
            r.forces.lambda2, r.x_com, r.y_com, r.e_kin, r.e_pot,
        ] {
            write!(out, ",{:.16e}", v.to_f64_lossy())?;
        }
        writeln!(out, ",{}", u8::from(r.slip))?;
    }
    out.flush()
}
