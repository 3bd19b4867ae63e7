//! CSV exports. Floats are written with 17 significant digits.

use std::io::Write;

use super::PicardTrace;
use crate::error::Result;
use crate::numeric::{mean, norm};
use crate::types::SolutionField;

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per (time, path): `time,path,y_0..,z_0_0..`.
pub fn write_field_csv<W: Write>(field: &SolutionField, mut w: W) -> Result<()> {
    let dims = field.dims();
    let mut header = vec!["time".to_string(), "path".to_string()];
    header.extend((0..dims.k).map(|j| format!("y_{j}")));
    for j in 0..dims.k {
        header.extend((0..dims.d).map(|c| format!("z_{j}_{c}")));
    }
    writeln!(w, "{}", header.join(","))?;
    for i in 0..=field.steps() {
        let t = num(field.grid().time(i));
        for p in 0..field.path_count() {
            let mut row = vec![t.clone(), p.to_string()];
            row.extend(field.y(i, p).iter().map(|v| num(*v)));
            row.extend(field.z(i, p).iter().map(|v| num(*v)));
            writeln!(w, "{}", row.join(","))?;
        }
    }
    Ok(())
}

/// One row per time: `time,mean_abs_y,std_abs_y,mean_z_norm`.
pub fn write_summary_csv<W: Write>(field: &SolutionField, mut w: W) -> Result<()> {
    writeln!(w, "time,mean_abs_y,std_abs_y,mean_z_norm")?;
    let m = field.path_count();
    for i in 0..=field.steps() {
        let ys: Vec<f64> = (0..m).map(|p| norm(field.y(i, p))).collect();
        let zs: Vec<f64> = (0..m).map(|p| norm(field.z(i, p))).collect();
        let my = mean(&ys);
        let dev: Vec<f64> = ys.iter().map(|v| (v - my) * (v - my)).collect();
        let sd = if m > 1 {
            (crate::numeric::pairwise_sum(&dev) / (m - 1) as f64).sqrt()
        } else {
            0.0
        };
        writeln!(
            w,
            "{},{},{},{}",
            num(field.grid().time(i)),
            num(my),
            num(sd),
            num(mean(&zs))
        )?;
    }
    Ok(())
}

/// One row per Picard iteration. The `seconds` column is present only when
/// the trace recorded timings.
pub fn write_trace_csv<W: Write>(trace: &PicardTrace, mut w: W) -> Result<()> {
    let timed = trace.entries.iter().any(|e| e.seconds.is_some());
    let mut header = "iteration,subinterval,sup_mean_abs_dy,e_sup_dy_half,m_half_dz".to_string();
    if timed {
        header.push_str(",seconds");
    }
    writeln!(w, "{header}")?;
    for e in &trace.entries {
        write!(
            w,
            "{},{},{},{},{}",
            e.iteration,
            e.subinterval,
            num(e.sup_mean_abs_dy),
            num(e.e_sup_dy_half),
            num(e.m_half_dz)
        )?;
        if timed {
            write!(w, ",{}", num(e.seconds.unwrap_or(0.0)))?;
        }
        writeln!(w)?;
    }
    Ok(())
}
