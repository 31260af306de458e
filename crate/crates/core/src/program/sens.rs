use rayon::prelude::*;

use crate::dynamics::ControlInput;
use crate::error::{Error, Result};
use crate::program::MissionSpec;
use crate::scalar::Dual;
use crate::uncertainty::{propagate_arrays, GaussianBelief};

/// Tracked belief quantities: mean `x, y, z, theta`, then the position
/// covariance entries `c00, c01, c02, c11, c12, c22`.
pub const SENS_QUANTITIES: usize = 10;

pub(crate) const COV_INDEX: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// Exact derivatives of the tracked quantities of every belief with respect
/// to every control scalar.
#[derive(Debug, Clone)]
pub struct Sensitivities {
    horizon: usize,
    data: Vec<f64>,
}

impl Sensitivities {
    fn offset(&self, k: usize, q: usize) -> usize {
        (k * SENS_QUANTITIES + q) * 3 * self.horizon
    }

    /// `d quantity_q(belief k) / d u`, one entry per control scalar.
    pub fn d(&self, k: usize, q: usize) -> &[f64] {
        let o = self.offset(k, q);
        &self.data[o..o + 3 * self.horizon]
    }

    /// `grad_u += sum_k adj[k] . d(belief k) / du`.
    pub fn pull_back(&self, adj: &[[f64; SENS_QUANTITIES]], grad_u: &mut [f64]) {
        for (k, a) in adj.iter().enumerate().skip(1) {
            for (q, &w) in a.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                // belief k depends on controls 0..k only
                let row = &self.d(k, q)[..3 * k];
                for (g, d) in grad_u.iter_mut().zip(row) {
                    *g += w * d;
                }
            }
        }
    }
}

fn tracked<const K: usize>(m: &[Dual<K>; 5], c: &[[Dual<K>; 5]; 5]) -> [Dual<K>; SENS_QUANTITIES] {
    let mut out = [Dual::constant(0.0); SENS_QUANTITIES];
    out[..4].copy_from_slice(&m[..4]);
    for (i, &(r, s)) in COV_INDEX.iter().enumerate() {
        out[4 + i] = c[r][s];
    }
    out
}

/// One forward dual sweep per control step `s`, seeded on `u_s` and carried
/// to the end of the horizon.
pub fn sensitivities(
    spec: &MissionSpec,
    beliefs: &[GaussianBelief],
    controls: &[ControlInput],
) -> Result<Sensitivities> {
    let t_max = spec.horizon;
    if controls.len() != t_max || beliefs.len() != t_max + 1 {
        return Err(Error::LengthMismatch {
            what: "sensitivity inputs",
            expected: t_max,
            got: controls.len(),
        });
    }
    let sweeps: Vec<Vec<[[f64; 3]; SENS_QUANTITIES]>> = (0..t_max)
        .into_par_iter()
        .map(|s| -> Result<_> {
            let (m0, c0) = beliefs[s].to_arrays();
            let mut m = m0.map(Dual::<3>::constant);
            let mut c = c0.map(|row| row.map(Dual::<3>::constant));
            let mut out = Vec::with_capacity(t_max - s);
            for (k, u) in controls.iter().enumerate().skip(s) {
                let ua = u.to_array();
                let ud: [Dual<3>; 3] = if k == s {
                    std::array::from_fn(|i| Dual::variable(ua[i], i))
                } else {
                    ua.map(Dual::constant)
                };
                (m, c) = propagate_arrays(&m, &c, &spec.disturbance, &ud, spec.dt, &spec.ut)?;
                out.push(tracked(&m, &c).map(|d| d.eps));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut sens = Sensitivities {
        horizon: t_max,
        data: vec![0.0; (t_max + 1) * SENS_QUANTITIES * 3 * t_max],
    };
    for (s, sweep) in sweeps.iter().enumerate() {
        for (i, q_eps) in sweep.iter().enumerate() {
            let k = s + 1 + i;
            for (q, eps) in q_eps.iter().enumerate() {
                let o = sens.offset(k, q) + 3 * s;
                sens.data[o..o + 3].copy_from_slice(eps);
            }
        }
    }
    Ok(sens)
}
