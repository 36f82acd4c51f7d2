//! Trajectory CSV serialization: one row per step, floats at 17 significant
//! digits so repeated runs are byte-identical.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::DVector;

use fabrics::runtime::Trajectory;
use fabrics::speed_control::RegulatorTrace;

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the pinned column layout: t, q, qd, qdd, optional ee_x/ee_y,
/// energies, regulator internals and the obstacle margin.
pub fn write_trajectory(
    path: &Path,
    traj: &Trajectory,
    ee_path: Option<&[[f64; 2]]>,
) -> Result<()> {
    let n = traj
        .positions
        .first()
        .map(|q| q.len())
        .unwrap_or(0);
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((0..n).map(|i| format!("q{i}")));
    header.extend((0..n).map(|i| format!("qd{i}")));
    header.extend((0..n).map(|i| format!("qdd{i}")));
    if ee_path.is_some() {
        header.push("ee_x".into());
        header.push("ee_y".into());
    }
    for name in [
        "L_e",
        "L_ex",
        "H_total",
        "s_beta",
        "eta",
        "beta_reg",
        "alpha_reg",
        "alpha_boost",
        "min_obstacle_dist",
    ] {
        header.push(name.into());
    }
    writeln!(out, "{}", header.join(","))?;

    for i in 0..traj.len() {
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        row.push(fmt(traj.times[i]));
        row.extend(traj.positions[i].iter().map(|v| fmt(*v)));
        row.extend(traj.velocities[i].iter().map(|v| fmt(*v)));
        row.extend(traj.accelerations[i].iter().map(|v| fmt(*v)));
        if let Some(ee) = ee_path {
            row.push(fmt(ee[i][0]));
            row.push(fmt(ee[i][1]));
        }
        let reg = &traj.regulator[i];
        row.push(fmt(traj.fabric_energy[i]));
        row.push(fmt(traj.exec_energy[i]));
        row.push(fmt(traj.total_energy[i]));
        row.push(fmt(reg.s_beta));
        row.push(fmt(reg.eta));
        row.push(fmt(reg.beta_reg));
        row.push(fmt(reg.alpha_reg));
        row.push(fmt(reg.alpha_boost));
        row.push(fmt(traj.min_obstacle_distance[i]));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// A trajectory re-read from CSV; regulator internals and energies are
/// restored, termination is not recorded in the format.
pub fn read_trajectory(path: &Path) -> Result<(Trajectory, Option<Vec<[f64; 2]>>)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("CSV missing header row")?;
    let columns: Vec<&str> = header.split(',').collect();
    let n = columns.iter().filter(|c| c.starts_with('q') && !c.starts_with("qd")).count();
    let has_ee = columns.contains(&"ee_x");
    let expected = 1 + 3 * n + if has_ee { 2 } else { 0 } + 9;
    if columns.len() != expected {
        bail!(
            "unexpected CSV layout in {}: {} columns for {} dof",
            path.display(),
            columns.len(),
            n
        );
    }

    let mut traj = Trajectory {
        dt: 0.0,
        times: Vec::new(),
        positions: Vec::new(),
        velocities: Vec::new(),
        accelerations: Vec::new(),
        fabric_energy: Vec::new(),
        exec_energy: Vec::new(),
        total_energy: Vec::new(),
        goal_distance: Vec::new(),
        min_obstacle_distance: Vec::new(),
        regulator: Vec::new(),
        termination: fabrics::runtime::Termination::DurationReached,
    };
    let mut ee = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let values: Vec<f64> = line
            .split(',')
            .map(|v| v.parse::<f64>().map_err(|e| anyhow::anyhow!("{e}: {v}")))
            .collect::<Result<_>>()?;
        if values.len() != expected {
            bail!("row width {} != header width {expected}", values.len());
        }
        let mut at = 0;
        let mut take = |count: usize| {
            let slice = &values[at..at + count];
            at += count;
            slice.to_vec()
        };
        traj.times.push(take(1)[0]);
        traj.positions.push(DVector::from_vec(take(n)));
        traj.velocities.push(DVector::from_vec(take(n)));
        traj.accelerations.push(DVector::from_vec(take(n)));
        if has_ee {
            let e = take(2);
            ee.push([e[0], e[1]]);
        }
        let scalars = take(9);
        traj.fabric_energy.push(scalars[0]);
        traj.exec_energy.push(scalars[1]);
        traj.total_energy.push(scalars[2]);
        traj.regulator.push(RegulatorTrace {
            s_beta: scalars[3],
            eta: scalars[4],
            beta_reg: scalars[5],
            alpha_reg: scalars[6],
            alpha_boost: scalars[7],
            ..Default::default()
        });
        traj.min_obstacle_distance.push(scalars[8]);
        traj.goal_distance.push(f64::NAN);
    }
    if traj.times.len() >= 2 {
        traj.dt = traj.times[1] - traj.times[0];
    }
    Ok((traj, has_ee.then_some(ee)))
}

/// Two-column plot data (x y per line).
pub fn write_xy(path: &Path, rows: impl Iterator<Item = (f64, f64)>) -> Result<()> {
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    for (x, y) in rows {
        writeln!(out, "{} {}", fmt(x), fmt(y))?;
    }
    Ok(())
}
