//! Unscented transform over the augmented `(state, disturbance)` vector and
//! the Gaussian quantile margins used to tighten half-space constraints.
//!
//! The core routines work on plain arrays and are generic over [`Real`], so
//! the planner can push dual numbers through exactly the same arithmetic.

use nalgebra::{Matrix3, Matrix5, SMatrix, SVector, Vector3, Vector5};

use crate::dynamics::{raw_step, ControlInput, DisturbanceModel, STATE_DIM};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::special::erf_inv;
use crate::Vec3;

pub const NOISE_DIM: usize = 3;
pub const AUG_DIM: usize = STATE_DIM + NOISE_DIM;

const JITTER_START: f64 = 1e-12;
const JITTER_RETRIES: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtConfig {
    pub alpha: f64,
    /// Secondary scaling parameter.
    pub rho: f64,
    pub beta: f64,
    /// Augmented dimension the weights are evaluated for.
    pub d: usize,
}

impl Default for UtConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            rho: 2.5,
            beta: 2.0,
            d: AUG_DIM,
        }
    }
}

impl UtConfig {
    pub fn lambda(&self) -> f64 {
        self.lambda_for(self.d)
    }

    fn lambda_for(&self, d: usize) -> f64 {
        self.alpha * self.alpha * (d as f64 + self.rho) - d as f64
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.alpha, self.rho, self.beta].iter().all(|v| v.is_finite())
            && self.d as f64 + self.lambda() > 0.0;
        if !ok {
            return Err(Error::InvalidMission(format!(
                "unscented parameters give d + lambda <= 0 ({self:?})"
            )));
        }
        Ok(())
    }

    /// `(mean_weights, cov_weights)` for a `d`-dimensional input.
    pub fn weights(&self, d: usize) -> (Vec<f64>, Vec<f64>) {
        let lam = self.lambda_for(d);
        let n = d as f64 + lam;
        let wi = 1.0 / (2.0 * n);
        let mut wm = vec![wi; 2 * d + 1];
        let mut wc = wm.clone();
        wm[0] = lam / n;
        wc[0] = lam / n + 1.0 - self.alpha * self.alpha + self.beta;
        (wm, wc)
    }

    fn scale(&self, d: usize) -> f64 {
        (d as f64 + self.lambda_for(d)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSet<const D: usize = AUG_DIM> {
    pub points: Vec<SVector<f64, D>>,
    pub mean_weights: Vec<f64>,
    pub cov_weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBelief {
    pub mean: Vector5<f64>,
    pub covariance: Matrix5<f64>,
}

impl GaussianBelief {
    pub fn new(mean: Vector5<f64>, covariance: Matrix5<f64>) -> Self {
        Self { mean, covariance }
    }

    pub fn position_mean(&self) -> Vec3 {
        self.mean.fixed_rows::<3>(0).into_owned()
    }

    pub fn position_covariance(&self) -> Matrix3<f64> {
        self.covariance.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.iter().chain(self.covariance.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("belief"));
        }
        let p = &self.covariance;
        if (p - p.transpose()).amax() > 1e-10 {
            return Err(Error::InvalidMission("belief covariance is not symmetric".into()));
        }
        if p.symmetric_eigenvalues().min() < -1e-9 {
            return Err(Error::NotPsd);
        }
        Ok(())
    }

    pub fn propagate(
        &self,
        dist: &DisturbanceModel,
        u: &ControlInput,
        dt: f64,
        cfg: &UtConfig,
    ) -> Result<GaussianBelief> {
        propagate(self, dist, u, dt, cfg)
    }

    pub(crate) fn to_arrays(self) -> ([f64; 5], [[f64; 5]; 5]) {
        let mut m = [0.0; 5];
        let mut c = [[0.0; 5]; 5];
        for i in 0..5 {
            m[i] = self.mean[i];
            for j in 0..5 {
                c[i][j] = self.covariance[(i, j)];
            }
        }
        (m, c)
    }

    pub(crate) fn from_arrays(m: &[f64; 5], c: &[[f64; 5]; 5]) -> Self {
        Self {
            mean: Vector5::from(*m),
            covariance: Matrix5::from_fn(|i, j| c[i][j]),
        }
    }
}

/// Lower Cholesky factor with the diagonal jitter schedule. Pivots that are
/// zero up to rounding produce a zero column (exactly degenerate directions).
pub fn cholesky<S: Real, const D: usize>(a: &[[S; D]; D]) -> Result<[[S; D]; D]> {
    let scale = (0..D).map(|i| a[i][i].re().abs()).fold(0.0, f64::max);
    let mut jitter = 0.0;
    for attempt in 0..=JITTER_RETRIES {
        if let Some(l) = try_cholesky(a, jitter, scale) {
            return Ok(l);
        }
        jitter = if attempt == 0 { JITTER_START } else { jitter * 10.0 };
    }
    Err(Error::NotPsd)
}

fn try_cholesky<S: Real, const D: usize>(a: &[[S; D]; D], jitter: f64, scale: f64) -> Option<[[S; D]; D]> {
    let tol = 1e-14 * scale;
    let mut l = [[S::cst(0.0); D]; D];
    for j in 0..D {
        let mut d = a[j][j] + S::cst(jitter);
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        let dr = d.re();
        if !dr.is_finite() || dr < -tol {
            return None;
        }
        if dr <= tol {
            // degenerate direction: the remaining column must vanish too
            for i in j + 1..D {
                let mut s = a[i][j];
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if s.re().abs() > 1e-7 * scale.max(1e-300).sqrt() {
                    return None;
                }
            }
            continue;
        }
        let ljj = d.sqrt();
        l[j][j] = ljj;
        for i in j + 1..D {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / ljj;
        }
    }
    Some(l)
}

/// `2D + 1` sigma points: the mean, then `mean +/- sqrt(D + lambda) L[:, i]`.
pub fn sigma_arrays<S: Real, const D: usize>(
    mean: &[S; D],
    cov: &[[S; D]; D],
    cfg: &UtConfig,
) -> Result<Vec<[S; D]>> {
    let l = cholesky(cov)?;
    let c = cfg.scale(D);
    let mut pts = vec![*mean; 2 * D + 1];
    for i in 0..D {
        for r in 0..D {
            let off = l[r][i] * c;
            pts[1 + i][r] += off;
            pts[1 + D + i][r] -= off;
        }
    }
    Ok(pts)
}

/// Weighted mean and (symmetrized) covariance of transformed points.
pub fn moments<S: Real, const E: usize>(pts: &[[S; E]], wm: &[f64], wc: &[f64]) -> ([S; E], [[S; E]; E]) {
    let mut mean = [S::cst(0.0); E];
    for (p, &w) in pts.iter().zip(wm) {
        for r in 0..E {
            mean[r] += p[r] * w;
        }
    }
    let mut cov = [[S::cst(0.0); E]; E];
    for (p, &w) in pts.iter().zip(wc) {
        let mut d = *p;
        for r in 0..E {
            d[r] -= mean[r];
        }
        for r in 0..E {
            for c in 0..=r {
                cov[r][c] += d[r] * d[c] * w;
            }
        }
    }
    for r in 0..E {
        for c in 0..r {
            cov[c][r] = cov[r][c];
        }
    }
    (mean, cov)
}

/// Unscented transform of `N(mean, cov)` through `f`.
pub fn unscented<S: Real, const D: usize, const E: usize>(
    mean: &[S; D],
    cov: &[[S; D]; D],
    cfg: &UtConfig,
    f: impl Fn(&[S; D]) -> [S; E],
) -> Result<([S; E], [[S; E]; E])> {
    let pts = sigma_arrays(mean, cov, cfg)?;
    let (wm, wc) = cfg.weights(D);
    let out: Vec<[S; E]> = pts.iter().map(f).collect();
    Ok(moments(&out, &wm, &wc))
}

/// Augmented mean `[x; nu]` and block-diagonal covariance `blkdiag(P, Q)`.
pub fn augment(belief: &GaussianBelief, dist: &DisturbanceModel) -> (SVector<f64, AUG_DIM>, SMatrix<f64, AUG_DIM, AUG_DIM>) {
    let mut mean = SVector::<f64, AUG_DIM>::zeros();
    mean.fixed_rows_mut::<STATE_DIM>(0).copy_from(&belief.mean);
    mean.fixed_rows_mut::<NOISE_DIM>(STATE_DIM).copy_from(&dist.mean);
    let mut cov = SMatrix::<f64, AUG_DIM, AUG_DIM>::zeros();
    cov.fixed_view_mut::<STATE_DIM, STATE_DIM>(0, 0).copy_from(&belief.covariance);
    cov.fixed_view_mut::<NOISE_DIM, NOISE_DIM>(STATE_DIM, STATE_DIM)
        .copy_from(&dist.covariance);
    (mean, cov)
}

pub fn sigma_points<const D: usize>(
    mean: &SVector<f64, D>,
    cov: &SMatrix<f64, D, D>,
    cfg: &UtConfig,
) -> Result<SigmaSet<D>> {
    let m: [f64; D] = (*mean).into();
    let c: [[f64; D]; D] = std::array::from_fn(|i| std::array::from_fn(|j| cov[(i, j)]));
    let pts = sigma_arrays(&m, &c, cfg)?;
    let (mean_weights, cov_weights) = cfg.weights(D);
    Ok(SigmaSet {
        points: pts.into_iter().map(SVector::from).collect(),
        mean_weights,
        cov_weights,
    })
}

/// One belief step on raw arrays. The augmented state is rebuilt from the
/// current belief and the disturbance model every call.
pub fn propagate_arrays<S: Real>(
    mean: &[S; 5],
    cov: &[[S; 5]; 5],
    dist: &DisturbanceModel,
    u: &[S; 3],
    dt: f64,
    cfg: &UtConfig,
) -> Result<([S; 5], [[S; 5]; 5])> {
    let mut am = [S::cst(0.0); AUG_DIM];
    let mut ac = [[S::cst(0.0); AUG_DIM]; AUG_DIM];
    for i in 0..STATE_DIM {
        am[i] = mean[i];
        for j in 0..STATE_DIM {
            ac[i][j] = cov[i][j];
        }
    }
    for i in 0..NOISE_DIM {
        am[STATE_DIM + i] = S::cst(dist.mean[i]);
        for j in 0..NOISE_DIM {
            ac[STATE_DIM + i][STATE_DIM + j] = S::cst(dist.covariance[(i, j)]);
        }
    }
    unscented(&am, &ac, cfg, |p| {
        let s = [p[0], p[1], p[2], p[3], p[4]];
        raw_step(&s, u, &[p[5], p[6], p[7]], dt)
    })
}

pub fn propagate(
    belief: &GaussianBelief,
    dist: &DisturbanceModel,
    u: &ControlInput,
    dt: f64,
    cfg: &UtConfig,
) -> Result<GaussianBelief> {
    let (m, c) = belief.to_arrays();
    let (m, c) = propagate_arrays(&m, &c, dist, &u.to_array(), dt, cfg)?;
    Ok(GaussianBelief::from_arrays(&m, &c))
}

/// `erf^-1(1 - 2 delta)`, the per-unit-deviation factor of the margin.
pub fn margin_factor(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidProbability(delta));
    }
    Ok(erf_inv(1.0 - 2.0 * delta))
}

/// `zeta = sqrt(2 a^T P a) erf^-1(1 - 2 delta)`.
pub fn chance_margin(a: &Vec3, p_pos: &Matrix3<f64>, delta: f64) -> Result<f64> {
    let k = margin_factor(delta)?;
    let var = a.dot(&(p_pos * a)).max(0.0);
    Ok((2.0 * var).sqrt() * k)
}

/// Convenience for the default noise layout.
pub fn zero_mean_noise(var: Vector3<f64>) -> DisturbanceModel {
    DisturbanceModel {
        mean: Vector3::zeros(),
        covariance: Matrix3::from_diagonal(&var),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{step, AgentState};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, SMatrix};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    const DT: f64 = 0.1;

    fn paper_belief() -> GaussianBelief {
        GaussianBelief::new(Vector5::new(10.0, 10.0, 10.0, 0.0, 0.0), Matrix5::identity() * 1e-4)
    }

    #[test]
    fn augment_is_block_diagonal() {
        let dist = DisturbanceModel::diagonal(1e-3, 1e-3, 1e-3);
        let (m, c) = augment(&paper_belief(), &dist);
        let diag: Vec<f64> = c.diagonal().iter().copied().collect();
        assert_eq!(diag, [1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 1e-3, 1e-3, 1e-3]);
        assert_eq!(c.fixed_view::<5, 3>(0, 5).amax(), 0.0);
        assert_eq!(c.fixed_view::<3, 5>(5, 0).amax(), 0.0);
        assert_eq!(m.fixed_rows::<3>(5).amax(), 0.0);
        let zero = GaussianBelief::new(Vector5::zeros(), Matrix5::zeros());
        assert_eq!(augment(&zero, &dist).0, SVector::<f64, 8>::zeros());
    }

    #[test]
    fn paper_weights() {
        let cfg = UtConfig::default();
        assert_eq!(cfg.lambda(), 2.5);
        let (wm, wc) = cfg.weights(8);
        assert_eq!(wm.len(), 17);
        assert_relative_eq!(wm[0], 2.5 / 10.5, epsilon = 1e-15);
        assert_relative_eq!(wm[0], 0.238095, epsilon = 1e-6);
        assert_relative_eq!(wc[0], 2.238095, epsilon = 1e-6);
        for i in 1..17 {
            assert_relative_eq!(wm[i], 1.0 / 21.0, epsilon = 1e-15);
            assert_eq!(wm[i], wc[i]);
        }
        assert!((wm.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_sigma_points() {
        let mean = SVector::<f64, 8>::from_fn(|i, _| i as f64);
        let s = sigma_points(&mean, &SMatrix::<f64, 8, 8>::identity(), &UtConfig::default()).unwrap();
        assert_eq!(s.points.len(), 17);
        assert_eq!(s.points[0], mean);
        for i in 0..8 {
            let mut e = SVector::<f64, 8>::zeros();
            e[i] = 10.5f64.sqrt();
            assert_relative_eq!(s.points[1 + i], mean + e, epsilon = 1e-14);
            assert_relative_eq!(s.points[9 + i], mean - e, epsilon = 1e-14);
        }
        assert_relative_eq!(10.5f64.sqrt(), 3.2404, epsilon = 1e-4);
    }

    #[test]
    fn non_psd_is_rejected() {
        let mut c = SMatrix::<f64, 8, 8>::identity();
        c[(3, 3)] = -1.0;
        let r = sigma_points(&SVector::zeros(), &c, &UtConfig::default());
        assert!(matches!(r, Err(Error::NotPsd)));
        assert_eq!(Error::NotPsd.to_string(), "covariance not PSD");
    }

    #[test]
    fn rank_deficient_covariance_is_accepted() {
        let v = SVector::<f64, 8>::from_fn(|i, _| 1.0 + i as f64);
        let c = v * v.transpose();
        let s = sigma_points(&SVector::zeros(), &c, &UtConfig::default()).unwrap();
        let (wc, pts) = (&s.cov_weights, &s.points);
        let mut back = SMatrix::<f64, 8, 8>::zeros();
        for (p, w) in pts.iter().zip(wc) {
            back += p * p.transpose() * *w;
        }
        assert_relative_eq!(back, c, epsilon = 1e-9);
    }

    #[test]
    fn zero_control_keeps_mean_position() {
        let dist = DisturbanceModel::diagonal(1e-8, 1e-8, 1e-8);
        let b = GaussianBelief::new(paper_belief().mean, Matrix5::identity() * 1e-8);
        let next = propagate(&b, &dist, &ControlInput::default(), DT, &UtConfig::default()).unwrap();
        assert_relative_eq!(next.position_mean(), b.position_mean(), epsilon = 1e-6);
    }

    #[test]
    fn degenerate_belief_is_deterministic() {
        let b = GaussianBelief::new(paper_belief().mean, Matrix5::zeros());
        let next = propagate(
            &b,
            &DisturbanceModel::zero(),
            &ControlInput::new(0.0, 1.0, 0.0),
            DT,
            &UtConfig::default(),
        )
        .unwrap();
        assert_relative_eq!(next.mean[3], DT, epsilon = 1e-15);
        assert!(next.covariance.amax() < 1e-20);
    }

    #[test]
    fn angle_channels_match_linear_gaussian_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = DMatrix::<f64>::from_fn(5, 5, |_, _| rng.random_range(-0.05..0.05));
            let p = Matrix5::from_iterator((&a * a.transpose()).iter().copied()) + Matrix5::identity() * 1e-4;
            let mean = Vector5::new(1.0, 2.0, 3.0, rng.random_range(-1.0..1.0), rng.random_range(-2.0..2.0));
            let q = Vector3::new(1e-3, rng.random_range(0.0..1e-2), rng.random_range(0.0..1e-2));
            let dist = DisturbanceModel {
                mean: Vector3::new(0.0, 0.1, -0.2),
                covariance: Matrix3::from_diagonal(&q),
            };
            let u = ControlInput::new(5.0, 0.4, -0.3);
            let next = propagate(&GaussianBelief::new(mean, p), &dist, &u, DT, &UtConfig::default()).unwrap();
            // (theta, phi) += dt (u + nu), nu independent of the state
            let want_mean = [mean[3] + DT * (0.4 + 0.1), mean[4] + DT * (-0.3 - 0.2)];
            let want_cov = [
                [p[(3, 3)] + DT * DT * q[1], p[(3, 4)]],
                [p[(4, 3)], p[(4, 4)] + DT * DT * q[2]],
            ];
            for i in 0..2 {
                assert!((next.mean[3 + i] - want_mean[i]).abs() < 1e-10);
                for j in 0..2 {
                    assert!((next.covariance[(3 + i, 3 + j)] - want_cov[i][j]).abs() < 1e-10);
                }
            }
        }
    }

    fn random_spd<const D: usize>(rng: &mut ChaCha8Rng) -> SMatrix<f64, D, D> {
        let a = SMatrix::<f64, D, D>::from_fn(|_, _| rng.random_range(-1.0..1.0));
        a * a.transpose() + SMatrix::<f64, D, D>::identity() * 0.1
    }

    #[test]
    fn affine_maps_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = UtConfig::default();
        for _ in 0..100 {
            let p = random_spd::<8>(&mut rng);
            let m = SVector::<f64, 8>::from_fn(|_, _| rng.random_range(-5.0..5.0));
            let a = SMatrix::<f64, 5, 8>::from_fn(|_, _| rng.random_range(-2.0..2.0));
            let b = SVector::<f64, 5>::from_fn(|_, _| rng.random_range(-5.0..5.0));
            let ma: [f64; 8] = m.into();
            let pa: [[f64; 8]; 8] = std::array::from_fn(|i| std::array::from_fn(|j| p[(i, j)]));
            let (ym, yc) = unscented(&ma, &pa, &cfg, |x| {
                let y = a * SVector::<f64, 8>::from(*x) + b;
                y.into()
            })
            .unwrap();
            let want_m = a * m + b;
            let want_c = a * p * a.transpose();
            for i in 0..5 {
                assert!((ym[i] - want_m[i]).abs() < 1e-10);
                for j in 0..5 {
                    assert!((yc[i][j] - want_c[(i, j)]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn monte_carlo_consistency() {
        let cfg = UtConfig::default();
        let dist = DisturbanceModel::diagonal(1e-3, 1e-3, 1e-3);
        let b = GaussianBelief::new(Vector5::new(10.0, 10.0, 10.0, 0.4, 0.7), Matrix5::identity() * 1e-4);
        let u = ControlInput::new(10.0, 0.5, 0.3);
        let ut = propagate(&b, &dist, &u, DT, &cfg).unwrap();

        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
        let samples: Vec<Vector5<f64>> = (0..n)
            .map(|_| {
                let x0 = b.mean + Vector5::from_fn(|_, _| 1e-2 * z());
                let w = Vector3::from_fn(|_, _| 1e-3f64.sqrt() * z());
                // raw step: the UT works in the unwrapped chart
                let s = raw_step(&x0.into(), &u.to_array(), &w.into(), DT);
                Vector5::from(s)
            })
            .collect();
        let mc_mean = samples.iter().sum::<Vector5<f64>>() / n as f64;
        let mut mc_cov = Matrix5::zeros();
        for s in &samples {
            let d = s - mc_mean;
            mc_cov += d * d.transpose();
        }
        mc_cov /= (n - 1) as f64;
        for i in 0..5 {
            let se = (mc_cov[(i, i)] / n as f64).sqrt();
            assert!((ut.mean[i] - mc_mean[i]).abs() < 3.0 * se, "mean {i}");
            for j in 0..5 {
                let scale = (mc_cov[(i, i)] * mc_cov[(j, j)]).sqrt();
                // relative on the entry, with off-diagonals judged against their natural scale
                let tol = 0.1 * mc_cov[(i, j)].abs().max(0.1 * scale);
                assert!((ut.covariance[(i, j)] - mc_cov[(i, j)]).abs() < tol, "cov {i},{j}");
            }
        }
        // the wrapped public step agrees with the raw chart away from the angle limits
        let s = step(&AgentState::from_vector(&b.mean), &u, &Vector3::zeros(), DT);
        assert_relative_eq!(s.to_vector(), Vector5::from(raw_step(&b.mean.into(), &u.to_array(), &[0.0; 3], DT)));
    }

    #[test]
    fn margin_examples() {
        let p = Matrix3::identity();
        let a = Vec3::new(0.0, 0.0, 1.0);
        assert_eq!(chance_margin(&a, &(p * 7.0), 0.5).unwrap(), 0.0);
        assert!((chance_margin(&a, &p, 0.4).unwrap() - 0.25335).abs() < 1e-5);
        assert!((chance_margin(&a, &p, 0.3).unwrap() - 0.52440).abs() < 1e-5);
        assert!(chance_margin(&a, &p, 0.7).unwrap() < 0.0);
        for bad in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(chance_margin(&a, &p, bad), Err(Error::InvalidProbability(_))));
        }
    }

    /// Standard normal CDF by composite Simpson quadrature of the density.
    fn normal_cdf_quadrature(z: f64) -> f64 {
        let n = 20_000;
        let h = z / n as f64;
        let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = pdf(0.0) + pdf(z);
        for i in 1..n {
            s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        0.5 + s * h / 3.0
    }

    #[test]
    fn margin_quantiles() {
        for delta in [0.01, 0.1, 0.3, 0.4, 0.5] {
            for sigma in [0.3, 1.0, 2.5] {
                let p = Matrix3::identity() * (sigma * sigma);
                let mu = chance_margin(&Vec3::x(), &p, delta).unwrap();
                let prob = normal_cdf_quadrature(-mu / sigma);
                assert!((prob - delta).abs() < 1e-10, "delta={delta} got {prob}");
            }
        }
    }

    proptest! {
        #[test]
        fn sigma_points_are_symmetric(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_spd::<8>(&mut rng);
            let m = SVector::<f64, 8>::from_fn(|_, _| rng.random_range(-5.0..5.0));
            let s = sigma_points(&m, &p, &UtConfig::default()).unwrap();
            let mut acc = SVector::<f64, 8>::zeros();
            for (x, w) in s.points.iter().zip(&s.mean_weights) {
                acc += (x - m) * *w;
            }
            prop_assert!(acc.amax() < 1e-10);
            prop_assert!((s.mean_weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..8 {
                prop_assert!(((s.points[1 + i] + s.points[9 + i]) / 2.0 - m).amax() < 1e-12);
            }
        }

        #[test]
        fn margin_is_monotone_and_scales(d1 in 0.001..0.999f64, d2 in 0.001..0.999f64, k in 0.1..10.0f64) {
            prop_assume!((d1 - d2).abs() > 1e-6);
            let p = Matrix3::new(2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 0.5);
            let a = Vec3::new(0.2, -0.5, 0.8).normalize();
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(chance_margin(&a, &p, lo).unwrap() > chance_margin(&a, &p, hi).unwrap());
            let z1 = chance_margin(&a, &p, lo).unwrap();
            let zk = chance_margin(&a, &(p * (k * k)), lo).unwrap();
            prop_assert!((zk - k * z1).abs() < 1e-12 * (1.0 + zk.abs()));
        }
    }
}
