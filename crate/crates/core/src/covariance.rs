//! Covariance of the latent log-intensities, estimated from raw event times
//! through kernel estimates of the second-order intensities.
//!
//! For a log-Gaussian Cox process `E[λ(s)λ(t)] = E[λ(s)] E[λ(t)] exp K(s, t)`,
//! so `K` is the log of the ratio between the within-subject and the
//! between-subject product densities. Both are estimated by kernel sums over
//! pairs of events, each kernel divided by its in-window mass.

use nalgebra::DMatrix;
use crate::error::{P3lsError, Result};
use crate::numerics::{edge_mass, epanechnikov, sym_eigen, Curve, Grid, GridMatrix};
use crate::pointprocess::PointPattern;

/// Estimates below this value are treated as empty when taking logs.
pub const LOG_RATIO_FLOOR: f64 = 1e-12;

/// Kernel estimates of `E[λ_i(s)λ_i(t)]` and `E[λ_i(s)]E[λ_j(t)]` on grid pairs.
#[derive(Debug, Clone)]
pub struct SecondOrderEstimate {
    pub grid: Grid,
    pub same_subject: GridMatrix,
    pub cross_subject: GridMatrix,
    /// `ρ̂(t) = n⁻¹ Σ_i Σ_x κ_h(t − x)/a(t)`, the mean intensity.
    pub first_order: Curve,
    pub h: f64,
}

/// Grid-sampled `K̂(s, t)` with its spectrum.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub grid: Grid,
    pub khat: GridMatrix,
    /// Matrix eigenvalues of `K̂`, descending; negative values are retained.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors rescaled to unit L² norm under midpoint quadrature.
    pub eigenfunctions: Vec<Curve>,
    pub h: f64,
    /// Number of cells set to zero because an estimate was not positive.
    pub floored_cells: usize,
    /// Mean intensity estimate, when the covariance came from point patterns.
    pub first_order: Option<Curve>,
}

impl CovarianceEstimate {
    /// Builds the estimate around an already computed covariance matrix.
    pub fn from_matrix(grid: Grid, khat: DMatrix<f64>, h: f64) -> Result<Self> {
        let sym = (&khat + khat.transpose()) * 0.5;
        let eig = sym_eigen(&sym)?;
        let scale = 1.0 / grid.step().sqrt();
        let eigenfunctions = (0..grid.len())
            .map(|l| {
                let v: Vec<f64> = eig.eigenvectors.column(l).iter().map(|x| x * scale).collect();
                Curve::new(grid, v)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid,
            khat: GridMatrix::new(grid, sym)?,
            eigenvalues: eig.eigenvalues,
            eigenfunctions,
            h,
            floored_cells: 0,
            first_order: None,
        })
    }

    /// `K̂⁺ = Σ max(θ_ℓ, 0) v_ℓ v_ℓᵀ`, the positive semi-definite part.
    pub fn positive_part(&self) -> GridMatrix {
        let n = self.grid.len();
        let step = self.grid.step();
        let mut out = DMatrix::zeros(n, n);
        for (theta, phi) in self.eigenvalues.iter().zip(&self.eigenfunctions) {
            if *theta <= 0.0 {
                continue;
            }
            // v_ℓ = φ_ℓ √Δ
            let v = phi.as_dvector() * step.sqrt();
            out += &v * v.transpose() * *theta;
        }
        GridMatrix::new(self.grid, out).expect("finite positive part")
    }

    /// `μ̂(t) = log ρ̂(t) − K̂(t, t)/2`: for a log-Gaussian intensity
    /// `E λ(t) = exp(μ(t) + K(t, t)/2)`. `None` without a usable first-order
    /// estimate.
    pub fn mean_log_intensity(&self) -> Option<Curve> {
        let rho = self.first_order.as_ref()?;
        if rho.values().iter().any(|&v| !(v > 0.0)) {
            return None;
        }
        let k = self.khat.entries();
        let values = rho
            .values()
            .iter()
            .enumerate()
            .map(|(a, v)| v.ln() - 0.5 * k[(a, a)])
            .collect();
        Curve::new(self.grid, values).ok()
    }

    /// Eigenvalues of the integral operator `f ↦ ∫ f(s) K̂(s, ·) ds`.
    pub fn operator_eigenvalues(&self) -> Vec<f64> {
        let step = self.grid.step();
        self.eigenvalues.iter().map(|t| t * step).collect()
    }
}

fn validate(patterns: &[PointPattern], grid: &Grid, h: f64) -> Result<()> {
    if patterns.len() < 2 {
        return Err(P3lsError::TooFewSubjects {
            needed: 2,
            got: patterns.len(),
        });
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(P3lsError::InvalidBandwidth(h));
    }
    let window = grid.window();
    let tol = 1e-9 * window.length();
    for p in patterns {
        let w = p.window();
        if (w.start - window.start).abs() > tol || (w.end - window.end).abs() > tol {
            return Err(P3lsError::WindowMismatch(format!(
                "subject {} observed on [{}, {}], grid spans [{}, {}]",
                p.subject_id(),
                w.start,
                w.end,
                window.start,
                window.end
            )));
        }
    }
    Ok(())
}

/// Subject order used for every accumulation, independent of input order.
fn canonical_order(patterns: &[PointPattern]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..patterns.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&patterns[a], &patterns[b]);
        pa.subject_id()
            .cmp(pb.subject_id())
            .then_with(|| pa.len().cmp(&pb.len()))
            .then_with(|| {
                pa.events()
                    .iter()
                    .zip(pb.events())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });
    order
}

fn inverse_edge_mass(grid: &Grid, h: f64) -> Vec<f64> {
    let window = grid.window();
    grid.points().into_iter().map(|s| 1.0 / edge_mass(s, h, window)).collect()
}

/// Kernel estimates of the within- and between-subject product densities.
///
/// Each subject contributes a smoothed weight vector
/// `w_i(s) = Σ_x κ_h(s - x)/a(s)`; the within-subject sum is
/// `w_i(s)w_i(t)` minus the `x = y` diagonal and the between-subject sum is
/// `W(s)W(t) - Σ_i w_i(s)w_i(t)` with `W = Σ_i w_i`.
pub fn estimate_second_order(patterns: &[PointPattern], grid: Grid, h: f64) -> Result<SecondOrderEstimate> {
    validate(patterns, &grid, h)?;
    let t = grid.len();
    let n = patterns.len() as f64;
    let inv_a = inverse_edge_mass(&grid, h);
    let points = grid.points();

    let mut outer = vec![0.0; t * t];
    let mut diagonal = vec![0.0; t * t];
    let mut total = vec![0.0; t];
    let mut w = vec![0.0; t];
    let mut local = Vec::with_capacity(t);

    for i in canonical_order(patterns) {
        w.iter_mut().for_each(|v| *v = 0.0);
        for &x in patterns[i].events() {
            let range = grid.index_range_near(x, h);
            local.clear();
            for k in range.clone() {
                let c = epanechnikov(points[k] - x, h) * inv_a[k];
                w[k] += c;
                local.push(c);
            }
            for (ia, a) in range.clone().enumerate() {
                let row = &mut diagonal[a * t..(a + 1) * t];
                let ca = local[ia];
                for (ib, b) in range.clone().enumerate() {
                    row[b] += ca * local[ib];
                }
            }
        }
        for a in 0..t {
            let wa = w[a];
            if wa == 0.0 {
                continue;
            }
            let row = &mut outer[a * t..(a + 1) * t];
            for b in 0..t {
                row[b] += wa * w[b];
            }
        }
        for (acc, v) in total.iter_mut().zip(&w) {
            *acc += v;
        }
    }

    let same = DMatrix::from_fn(t, t, |a, b| (outer[a * t + b] - diagonal[a * t + b]) / n);
    let cross = DMatrix::from_fn(t, t, |a, b| (total[a] * total[b] - outer[a * t + b]) / (n * (n - 1.0)));
    Ok(SecondOrderEstimate {
        grid,
        same_subject: GridMatrix::new(grid, same)?,
        cross_subject: GridMatrix::new(grid, cross)?,
        first_order: Curve::new(grid, total.iter().map(|v| v / n).collect())?,
        h,
    })
}

/// Direct evaluation of the defining double sums; quadratic in the number
/// of events per grid pair, kept as a reference for the fast path.
pub fn estimate_second_order_brute_force(
    patterns: &[PointPattern],
    grid: Grid,
    h: f64,
) -> Result<SecondOrderEstimate> {
    validate(patterns, &grid, h)?;
    let t = grid.len();
    let n = patterns.len();
    let window = grid.window();
    let points = grid.points();
    let f = |s: f64, tt: f64, x: f64, y: f64| {
        epanechnikov(s - x, h) * epanechnikov(tt - y, h) / (edge_mass(s, h, window) * edge_mass(tt, h, window))
    };
    let mut same = DMatrix::zeros(t, t);
    let mut cross = DMatrix::zeros(t, t);
    for a in 0..t {
        for b in 0..t {
            let (s, tt) = (points[a], points[b]);
            let mut acc_same = 0.0;
            let mut acc_cross = 0.0;
            for i in 0..n {
                let ei = patterns[i].events();
                for (xi, &x) in ei.iter().enumerate() {
                    for (yi, &y) in ei.iter().enumerate() {
                        if xi != yi {
                            acc_same += f(s, tt, x, y);
                        }
                    }
                }
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    for &x in ei {
                        for &y in patterns[j].events() {
                            acc_cross += f(s, tt, x, y);
                        }
                    }
                }
            }
            same[(a, b)] = acc_same / n as f64;
            cross[(a, b)] = acc_cross / (n * (n - 1)) as f64;
        }
    }
    let first: Vec<f64> = points
        .iter()
        .map(|&s| {
            let sum: f64 = patterns
                .iter()
                .flat_map(|p| p.events())
                .map(|&x| epanechnikov(s - x, h) / edge_mass(s, h, window))
                .sum();
            sum / n as f64
        })
        .collect();
    Ok(SecondOrderEstimate {
        grid,
        same_subject: GridMatrix::new(grid, same)?,
        cross_subject: GridMatrix::new(grid, cross)?,
        first_order: Curve::new(grid, first)?,
        h,
    })
}

/// Log-ratio covariance estimate with its eigendecomposition.
pub fn estimate_covariance(patterns: &[PointPattern], grid: Grid, h: f64) -> Result<CovarianceEstimate> {
    let second = estimate_second_order(patterns, grid, h)?;
    covariance_from_second_order(&second)
}

pub fn covariance_from_second_order(second: &SecondOrderEstimate) -> Result<CovarianceEstimate> {
    let grid = second.grid;
    let t = grid.len();
    let same = second.same_subject.entries();
    let cross = second.cross_subject.entries();
    let mut floored = 0usize;
    let khat = DMatrix::from_fn(t, t, |a, b| {
        let (num, den) = (same[(a, b)], cross[(a, b)]);
        if num <= LOG_RATIO_FLOOR || den <= LOG_RATIO_FLOOR {
            floored += 1;
            0.0
        } else {
            (num / den).ln()
        }
    });
    if floored == t * t {
        return Err(P3lsError::AllCellsFloored);
    }
    if floored > 0 {
        log::warn!("{floored} of {} covariance cells had a non-positive estimate and were set to zero", t * t);
    }
    let mut cov = CovarianceEstimate::from_matrix(grid, khat, second.h)?;
    cov.floored_cells = floored;
    cov.first_order = Some(second.first_order.clone());
    Ok(cov)
}

/// Smallest `q` whose leading positive eigenvalues reach `threshold` of the
/// positive spectrum.
pub fn select_q(cov: &CovarianceEstimate, threshold: f64) -> Result<usize> {
    select_q_from_spectrum(&cov.eigenvalues, threshold)
}

pub fn select_q_from_spectrum(eigenvalues: &[f64], threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(P3lsError::InvalidConfig(format!(
            "variance threshold must lie in (0, 1], got {threshold}"
        )));
    }
    let total: f64 = eigenvalues.iter().map(|v| v.max(0.0)).sum();
    if !(total > 0.0) {
        return Err(P3lsError::NoPositiveEigenvalues);
    }
    let mut sorted: Vec<f64> = eigenvalues.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        acc += v.max(0.0);
        if acc / total >= threshold * (1.0 - 1e-12) {
            return Ok(k + 1);
        }
    }
    Ok(sorted.iter().filter(|v| **v > 0.0).count().max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{inner_l2, Window};
    use crate::pointprocess::{simulate_inhomogeneous_poisson, GaussianProcess};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn window() -> Window {
        Window::new(0.0, 24.0).unwrap()
    }

    fn random_patterns(n: usize, seed: u64, max_events: usize, w: Window) -> Vec<PointPattern> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let m = rng.random_range(0..=max_events);
                let ev = (0..m).map(|_| rng.random_range(w.start..w.end)).collect();
                PointPattern::new(format!("s{i}"), ev, w).unwrap()
            })
            .collect()
    }

    #[test]
    fn two_singletons_hand_count() {
        let w = Window::new(0.0, 4.0).unwrap();
        let grid = Grid::uniform(0.0, 4.0, 4).unwrap();
        let h = 2.0;
        let p = vec![
            PointPattern::new("1", vec![1.0], w).unwrap(),
            PointPattern::new("2", vec![2.0], w).unwrap(),
        ];
        let est = estimate_second_order(&p, grid, h).unwrap();
        assert!(est.same_subject.entries().iter().all(|&v| v == 0.0));
        let pts = grid.points();
        for a in 0..4 {
            for b in 0..4 {
                let (s, t) = (pts[a], pts[b]);
                let k = |u: f64| epanechnikov(u, h);
                let expected = 0.5 * (k(s - 1.0) * k(t - 2.0) + k(s - 2.0) * k(t - 1.0))
                    / (edge_mass(s, h, w) * edge_mass(t, h, w));
                let got = est.cross_subject.entries()[(a, b)];
                assert!((got - expected).abs() < 1e-14, "({a},{b}) {got} vs {expected}");
            }
        }
    }

    #[test]
    fn fast_path_matches_brute_force() {
        let w = Window::new(0.0, 10.0).unwrap();
        let grid = Grid::uniform(0.0, 10.0, 12).unwrap();
        let mut patterns = random_patterns(5, 3, 12, w);
        // duplicated times are distinct points
        patterns[0] = PointPattern::new("dup", vec![2.0, 2.0, 7.5], w).unwrap();
        for &h in &[0.7, 1.5, 4.0] {
            let fast = estimate_second_order(&patterns, grid, h).unwrap();
            let slow = estimate_second_order_brute_force(&patterns, grid, h).unwrap();
            let d1 = (fast.same_subject.entries() - slow.same_subject.entries()).amax();
            let d2 = (fast.cross_subject.entries() - slow.cross_subject.entries()).amax();
            let scale = slow.cross_subject.entries().amax().max(1.0);
            assert!(d1 < 1e-12 * scale && d2 < 1e-12 * scale, "h={h}: {d1} {d2}");
            let d3 = fast.first_order.sub(&slow.first_order).unwrap();
            assert!(d3.values().iter().all(|v| v.abs() < 1e-12), "h={h}");
        }
    }

    #[test]
    fn estimates_are_exactly_symmetric() {
        let grid = Grid::uniform(0.0, 24.0, 30).unwrap();
        let patterns = random_patterns(6, 8, 80, window());
        let est = estimate_second_order(&patterns, grid, 2.0).unwrap();
        let s = est.same_subject.entries();
        let c = est.cross_subject.entries();
        assert_eq!(s, &s.transpose());
        assert_eq!(c, &c.transpose());
        let cov = estimate_covariance(&patterns, grid, 2.0).unwrap();
        assert_eq!(cov.khat.entries(), &cov.khat.entries().transpose());
    }

    #[test]
    fn permutation_invariance_is_exact() {
        let grid = Grid::uniform(0.0, 24.0, 25).unwrap();
        let patterns = random_patterns(7, 10, 60, window());
        let mut shuffled = patterns.clone();
        shuffled.reverse();
        shuffled.swap(1, 4);
        let a = estimate_second_order(&patterns, grid, 2.0).unwrap();
        let b = estimate_second_order(&shuffled, grid, 2.0).unwrap();
        assert_eq!(a.same_subject, b.same_subject);
        assert_eq!(a.cross_subject, b.cross_subject);
        let ka = estimate_covariance(&patterns, grid, 2.0).unwrap();
        let kb = estimate_covariance(&shuffled, grid, 2.0).unwrap();
        assert_eq!(ka.khat, kb.khat);
    }

    #[test]
    fn homogeneous_cross_moment_near_rate_squared() {
        let grid = Grid::uniform(0.0, 24.0, 48).unwrap();
        let x = Curve::constant(grid, 5f64.ln());
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let patterns: Vec<_> = (0..50)
            .map(|i| simulate_inhomogeneous_poisson(format!("{i}"), &x, &mut rng).unwrap())
            .collect();
        let est = estimate_second_order(&patterns, grid, 2.0).unwrap();
        let avg = est.cross_subject.entries().mean();
        assert!((avg - 25.0).abs() < 0.15 * 25.0, "{avg}");
    }

    #[test]
    fn time_rescaling_leaves_khat_invariant() {
        let grid = Grid::uniform(0.0, 24.0, 40).unwrap();
        let patterns = random_patterns(8, 21, 150, window());
        let minutes = estimate_covariance(&patterns, grid, 2.0).unwrap();
        let seconds_patterns: Vec<_> = patterns.iter().map(|p| p.rescaled(60.0, 0.0).unwrap()).collect();
        let seconds_grid = Grid::uniform(0.0, 24.0 * 60.0, 40).unwrap();
        let seconds = estimate_covariance(&seconds_patterns, seconds_grid, 120.0).unwrap();
        let diff = (minutes.khat.entries() - seconds.khat.entries()).amax();
        assert!(diff <= 1e-6, "{diff}");
    }

    #[test]
    fn deterministic_intensity_gives_small_covariance() {
        let grid = Grid::uniform(0.0, 24.0, 48).unwrap();
        let x = Curve::from_fn(grid, |t| 3.0 + 0.5 * (t / 5.0).sin());
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let patterns: Vec<_> = (0..200)
            .map(|i| simulate_inhomogeneous_poisson(format!("{i}"), &x, &mut rng).unwrap())
            .collect();
        let cov = estimate_covariance(&patterns, grid, 2.0).unwrap();
        let rms = (cov.khat.entries().map(|v| v * v).mean()).sqrt();
        assert!(rms < 0.1, "rms {rms}");
    }

    fn grid_mean_abs_khat(n: usize, seed: u64) -> f64 {
        let grid = Grid::uniform(0.0, 24.0, 24).unwrap();
        let x = Curve::constant(grid, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let patterns: Vec<_> = (0..n)
            .map(|i| simulate_inhomogeneous_poisson(format!("{i}"), &x, &mut rng).unwrap())
            .collect();
        let cov = estimate_covariance(&patterns, grid, 2.0).unwrap();
        cov.khat.entries().abs().mean()
    }

    #[test]
    fn covariance_noise_shrinks_with_subjects() {
        let median = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
        };
        let small = median((0..10).map(|s| grid_mean_abs_khat(50, 100 + s)).collect());
        let large = median((0..10).map(|s| grid_mean_abs_khat(200, 200 + s)).collect());
        assert!(large < small, "{large} vs {small}");
    }

    fn known_covariance_rms(n: usize, seed: u64) -> f64 {
        let grid = Grid::uniform(0.0, 24.0, 48).unwrap();
        let pts = grid.points();
        let truth = DMatrix::from_fn(48, 48, |i, j| 0.5 * (-(pts[i] - pts[j]).abs() / 4.0).exp());
        let gp = GaussianProcess::new(Curve::constant(grid, 3.5), &GridMatrix::new(grid, truth.clone()).unwrap())
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let patterns: Vec<_> = (0..n)
            .map(|i| {
                let x = gp.sample(&mut rng);
                simulate_inhomogeneous_poisson(format!("{i}"), &x, &mut rng).unwrap()
            })
            .collect();
        let cov = estimate_covariance(&patterns, grid, 2.0).unwrap();
        (cov.khat.entries() - truth).map(|v| v * v).mean().sqrt()
    }

    #[test]
    fn known_covariance_error_decreases_with_n() {
        let seeds = 10;
        let wins = (0..seeds)
            .filter(|&s| known_covariance_rms(200, 500 + s) < known_covariance_rms(50, 900 + s))
            .count();
        assert!(wins as f64 >= 0.8 * seeds as f64, "{wins}/{seeds}");
    }

    #[test]
    fn eigenfunctions_are_l2_orthonormal() {
        let grid = Grid::uniform(0.0, 24.0, 30).unwrap();
        let patterns = random_patterns(10, 4, 100, window());
        let cov = estimate_covariance(&patterns, grid, 3.0).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let ip = inner_l2(&cov.eigenfunctions[i], &cov.eigenfunctions[j]).unwrap();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((ip - target).abs() < 1e-8);
            }
        }
        for w in cov.eigenvalues.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn positive_part_drops_negative_spectrum() {
        let grid = Grid::uniform(0.0, 1.0, 3).unwrap();
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0, 0.5]);
        let cov = CovarianceEstimate::from_matrix(grid, m, 1.0).unwrap();
        assert!(cov.eigenvalues.iter().any(|&v| v < 0.0));
        let plus = cov.positive_part();
        let eig = sym_eigen(plus.entries()).unwrap();
        assert!(eig.eigenvalues.iter().all(|&v| v > -1e-12));
        assert!((eig.eigenvalues[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn error_paths() {
        let grid = Grid::uniform(0.0, 24.0, 10).unwrap();
        let one = random_patterns(1, 1, 10, window());
        assert!(matches!(
            estimate_covariance(&one, grid, 2.0),
            Err(P3lsError::TooFewSubjects { .. })
        ));
        let two = random_patterns(2, 1, 10, window());
        assert!(matches!(
            estimate_covariance(&two, grid, 0.0),
            Err(P3lsError::InvalidBandwidth(_))
        ));
        let empty = vec![
            PointPattern::new("a", vec![], window()).unwrap(),
            PointPattern::new("b", vec![], window()).unwrap(),
        ];
        assert!(matches!(
            estimate_covariance(&empty, grid, 2.0),
            Err(P3lsError::AllCellsFloored)
        ));
    }

    #[test]
    fn select_q_examples() {
        assert_eq!(select_q_from_spectrum(&[4.0, 3.0, 2.0, 1.0], 0.9).unwrap(), 3);
        assert_eq!(select_q_from_spectrum(&[1.0, 0.0, 0.0], 0.3).unwrap(), 1);
        assert_eq!(select_q_from_spectrum(&[1.0, 0.0, 0.0], 1.0).unwrap(), 1);
        assert_eq!(select_q_from_spectrum(&[5.0, 4.0, -2.0], 0.5).unwrap(), 1);
        assert_eq!(select_q_from_spectrum(&[5.0, 4.0, -2.0], 1.0).unwrap(), 2);
        assert!(matches!(
            select_q_from_spectrum(&[-1.0, -2.0], 0.9),
            Err(P3lsError::NoPositiveEigenvalues)
        ));
        assert!(select_q_from_spectrum(&[1.0], 0.0).is_err());
    }
}
