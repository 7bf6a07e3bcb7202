//! Heat flow with constant forcing, `u_t = Δu + A`, by Gaussian convolution.

use crate::error::{Error, Result};
use crate::microsim::Field;
use crate::potential::PotentialStats;

/// Largest kernel mass allowed outside the padded domain.
pub const KERNEL_TAIL: f64 = 1e-8;

/// Padding cells that leave about 1e-15 of the kernel (and a negligible
/// part of its second moment) outside.
pub fn auto_padding(t: f64, dx: f64) -> usize {
    (8.0 * (2.0 * t).sqrt() / dx).ceil() as usize + 1
}

fn weights(t: f64, dx: f64, pad: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..=2 * pad)
        .map(|k| {
            let y = (k as f64 - pad as f64) * dx;
            (-y * y / (4.0 * t)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// `line` continued linearly by `pad` nodes on both sides.
fn extend(line: &[f64], pad: usize) -> Vec<f64> {
    let n = line.len();
    let (dl, dr) = (line[0] - line[1], line[n - 1] - line[n - 2]);
    let mut out = Vec::with_capacity(n + 2 * pad);
    out.extend((0..pad).map(|k| line[0] + (pad - k) as f64 * dl));
    out.extend_from_slice(line);
    out.extend((1..=pad).map(|k| line[n - 1] + k as f64 * dr));
    out
}

fn convolve(ext: &[f64], w: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| w.iter().zip(&ext[i..]).map(|(a, b)| a * b).sum())
        .collect()
}

/// Solves `u_t = Δu + A` from the sampled `u0` to time `t`.
///
/// Beyond the grid the data are continued linearly over `padding` nodes
/// (enough for a 1e-8 kernel tail when `None`). `DomainTooSmall` when the
/// kernel mass outside the padding exceeds [`KERNEL_TAIL`].
pub fn alpha0_special(u0: &Field, stats: &PotentialStats, t: f64, padding: Option<usize>) -> Result<Field> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidConfig(format!("t must be >= 0, got {t}")));
    }
    let shift = t * stats.arith_mean;
    if t == 0.0 {
        return Ok(Field {
            time: u0.time,
            ..u0.clone()
        });
    }
    let pad = padding.unwrap_or_else(|| auto_padding(t, u0.dx));
    let mass = libm::erfc(pad as f64 * u0.dx / (2.0 * t.sqrt()));
    if mass > KERNEL_TAIL {
        return Err(Error::DomainTooSmall { mass });
    }
    let [nx, ny] = u0.shape;
    if (nx + 2 * pad) * (ny + if u0.dim == 2 { 2 * pad } else { 0 }) > 50_000_000 {
        return Err(Error::InvalidConfig(format!("padding of {pad} nodes is too large for this grid")));
    }
    let w = weights(t, u0.dx, pad);
    let values = if u0.dim == 1 {
        convolve(&extend(&u0.values, pad), &w, nx)
    } else {
        // Rows first (on padded rows), then columns.
        let cols: Vec<Vec<f64>> = (0..nx)
            .map(|i| extend(&(0..ny).map(|j| u0.at(i, j)).collect::<Vec<_>>(), pad))
            .collect();
        let nyp = ny + 2 * pad;
        let mut rows_done = vec![vec![0.0; nx]; nyp];
        for (jp, out) in rows_done.iter_mut().enumerate() {
            let row: Vec<f64> = cols.iter().map(|c| c[jp]).collect();
            *out = convolve(&extend(&row, pad), &w, nx);
        }
        let mut v = vec![0.0; nx * ny];
        for i in 0..nx {
            let col: Vec<f64> = rows_done.iter().map(|r| r[i]).collect();
            for (j, val) in convolve(&col, &w, ny).into_iter().enumerate() {
                v[j * nx + i] = val;
            }
        }
        v
    };
    Ok(Field {
        values: values.into_iter().map(|v| v + shift).collect(),
        time: u0.time + t,
        ..u0.clone()
    })
}
