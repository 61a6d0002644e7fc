//! Horizontal Brownian motion on `H^n` with its Levy-area vertical part.
//!
//! Over a substep of length `h` the scheme draws `2n` independent Gaussians
//! `zeta ~ N(0, 2h)` and updates
//!
//! ```text
//! x_i += zeta_{x_i}
//! y_i += zeta_{y_i}
//! u   += 2 sum_i (yhat_i zeta_{x_i} - xhat_i zeta_{y_i})
//! ```
//!
//! with `(xhat, yhat)` the midpoint values. For this system the midpoint
//! (Stratonovich) and left-point (Ito) area updates coincide identically:
//! the cross terms cancel, so each substep is exactly a right group
//! multiplication by `(zeta, 0)`. The variance `2h` (not `h`) makes the
//! generator `sum_i (X_i^2 + Y_i^2)` with no factor 1/2; the moment oracles
//! `E|z(t)|^2 = 4nt` and `Var u(t) = 16 n t^2` pin this convention.
//!
//! Every path owns an RNG stream derived as a pure function of
//! `(master_seed, stream_id)`; batching and thread count never touch the
//! stream map, so ensembles are bitwise reproducible.

use crate::error::{Error, Result};
use crate::exec::{self, Merge, DEFAULT_BATCH};
use crate::group::{self, GroupPoint};
use crate::stats::Moments;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Provenance record for one RNG stream: `(master_seed, stream_id)`.
///
/// Distinct stream ids yield statistically independent ChaCha streams, and
/// the map `(master_seed, stream_id) -> stream` is a pure function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RngStreamSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStreamSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        RngStreamSpec {
            master_seed,
            stream_id,
        }
    }

    /// Instantiates the stream.
    pub fn stream(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// The stream shifted by `offset` (used for per-path streams).
    pub fn offset(&self, offset: u64) -> Self {
        RngStreamSpec {
            master_seed: self.master_seed,
            stream_id: self.stream_id + offset,
        }
    }
}

/// A time grid `0 = t_0 < t_1 < ... <= T`, with a substep count per
/// interval controlling the simulation resolution between stored points.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid {
    times: Vec<f64>,
    substeps_per_interval: usize,
}

impl PathGrid {
    pub fn new(times: Vec<f64>, substeps_per_interval: usize) -> Result<Self> {
        if times.is_empty() || times[0] != 0.0 {
            return Err(Error::invalid(
                "times",
                times.first().copied().unwrap_or(f64::NAN),
                "grid must start at 0",
            ));
        }
        if !times.windows(2).all(|w| w[0] < w[1]) || !times.iter().all(|t| t.is_finite()) {
            return Err(Error::invalid(
                "times",
                f64::NAN,
                "grid times must be finite and strictly increasing",
            ));
        }
        if substeps_per_interval == 0 {
            return Err(Error::invalid(
                "substeps_per_interval",
                0.0,
                "must be positive",
            ));
        }
        Ok(PathGrid {
            times,
            substeps_per_interval,
        })
    }

    /// Uniform grid with `intervals` steps on `[0, t_end]`.
    pub fn uniform(t_end: f64, intervals: usize, substeps_per_interval: usize) -> Result<Self> {
        if !(t_end > 0.0) {
            return Err(Error::invalid("t_end", t_end, "must be positive"));
        }
        let times = (0..=intervals)
            .map(|j| t_end * j as f64 / intervals as f64)
            .collect();
        PathGrid::new(times, substeps_per_interval)
    }

    /// The complete dyadic grid `k / 2^depth` on `[0, 1]`.
    pub fn dyadic(depth: u32, substeps_per_interval: usize) -> Result<Self> {
        let m = 1usize << depth;
        let times = (0..=m).map(|k| k as f64 / m as f64).collect();
        PathGrid::new(times, substeps_per_interval)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn substeps_per_interval(&self) -> usize {
        self.substeps_per_interval
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Closed under `s -> t_end - s` (required by time reversal).
    pub fn is_symmetric(&self) -> bool {
        let t_end = self.t_end();
        let m = self.times.len();
        self.times
            .iter()
            .zip(self.times.iter().rev())
            .take(m / 2 + 1)
            .all(|(a, b)| (a + b - t_end).abs() <= 1e-12 * t_end.max(1.0))
    }

    /// Exactly the dyadic grid of the given depth.
    pub fn is_dyadic(&self, depth: u32) -> bool {
        let m = 1usize << depth;
        self.times.len() == m + 1
            && self
                .times
                .iter()
                .enumerate()
                .all(|(k, &t)| t == k as f64 / m as f64)
    }
}

/// A discretized group-valued path on a grid, with RNG provenance.
#[derive(Debug, Clone)]
pub struct SamplePath {
    pub grid: PathGrid,
    pub points: Vec<GroupPoint>,
    pub seed: RngStreamSpec,
}

impl SamplePath {
    pub fn n(&self) -> usize {
        self.points[0].n()
    }

    pub fn endpoint(&self) -> &GroupPoint {
        self.points.last().unwrap()
    }
}

/// One substep of the midpoint scheme, advancing `(z, u)` in place.
#[inline]
fn substep(z: &mut [f64], u: &mut f64, sd: f64, rng: &mut ChaCha8Rng) {
    let mut du = 0.0;
    for i in (0..z.len()).step_by(2) {
        let zx: f64 = StandardNormal.sample(rng);
        let zy: f64 = StandardNormal.sample(rng);
        let (zx, zy) = (sd * zx, sd * zy);
        let xm = z[i] + 0.5 * zx;
        let ym = z[i + 1] + 0.5 * zy;
        du += ym * zx - xm * zy;
        z[i] += zx;
        z[i + 1] += zy;
    }
    *u += 2.0 * du;
}

/// Runs one path over the grid, invoking `visit(grid_index, z, u)` at every
/// grid time (including index 0 at the identity). Allocates nothing beyond
/// the state buffer.
pub fn simulate_visit<F>(n: usize, grid: &PathGrid, rng: RngStreamSpec, mut visit: F) -> Result<()>
where
    F: FnMut(usize, &[f64], f64),
{
    simulate_fine_visit(n, grid, rng, |gi, _, z, u| {
        if let Some(i) = gi {
            visit(i, z, u);
        }
    })
}

/// Substep-resolution walk: `visit(grid_index, time, z, u)` fires after
/// every substep (and once at time 0), with `grid_index = Some(i)` when the
/// state sits on grid time `i`. This is what the Feynman-Kac weight
/// integrals hook into.
pub fn simulate_fine_visit<F>(
    n: usize,
    grid: &PathGrid,
    rng: RngStreamSpec,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(Option<usize>, f64, &[f64], f64),
{
    let mut stream = rng.stream();
    let mut z = vec![0.0f64; 2 * n];
    let mut u = 0.0f64;
    visit(Some(0), 0.0, &z, u);
    let s = grid.substeps_per_interval();
    for w in 0..grid.times().len() - 1 {
        let t0 = grid.times()[w];
        let h = (grid.times()[w + 1] - grid.times()[w]) / s as f64;
        let sd = (2.0 * h).sqrt();
        for k in 1..=s {
            substep(&mut z, &mut u, sd, &mut stream);
            let (gi, time) = if k == s {
                (Some(w + 1), grid.times()[w + 1])
            } else {
                (None, t0 + k as f64 * h)
            };
            visit(gi, time, &z, u);
        }
    }
    Ok(())
}

/// Simulates one Wiener path on the grid; `points[0]` is the identity.
pub fn sample_path(n: usize, grid: &PathGrid, rng: RngStreamSpec) -> Result<SamplePath> {
    if n == 0 {
        return Err(Error::invalid("n", 0.0, "n must be positive"));
    }
    let mut points = Vec::with_capacity(grid.times().len());
    simulate_visit(n, grid, rng, |_, z, u| {
        points.push(GroupPoint::new(z.to_vec(), u).expect("finite path state"));
    })?;
    Ok(SamplePath {
        grid: grid.clone(),
        points,
        seed: rng,
    })
}

/// Left group increment `x(t_i)^{-1} x(t_j)` for `i <= j`.
pub fn increment(path: &SamplePath, i: usize, j: usize) -> Result<GroupPoint> {
    let len = path.points.len();
    if i > j || j >= len {
        return Err(Error::IndexOutOfRange {
            index: j.max(i),
            len,
        });
    }
    group::multiply(&group::inverse(&path.points[i]), &path.points[j])
}

/// Time reversal `(Tx)(s) = x(t)^{-1} x(t - s)` on a symmetric grid.
///
/// Distribution-preserving; an involution up to floating-point rounding
/// (exact on exactly-representable paths).
pub fn time_reverse(path: &SamplePath) -> Result<SamplePath> {
    if !path.grid.is_symmetric() {
        return Err(Error::AsymmetricGrid);
    }
    let inv_end = group::inverse(path.endpoint());
    let points: Vec<GroupPoint> = path
        .points
        .iter()
        .rev()
        .map(|p| group::multiply(&inv_end, p).expect("same n"))
        .collect();
    Ok(SamplePath {
        grid: path.grid.clone(),
        points,
        seed: path.seed,
    })
}

/// Pointwise left translation `(T_g x)(t) = g x(t)`; increments unchanged.
pub fn translate_path(g: &GroupPoint, path: &SamplePath) -> Result<SamplePath> {
    let points = path
        .points
        .iter()
        .map(|p| group::multiply(g, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(SamplePath {
        grid: path.grid.clone(),
        points,
        seed: path.seed,
    })
}

/// Flat storage for an ensemble of path endpoints.
pub struct EndpointSet {
    n: usize,
    z: Vec<f64>,
    u: Vec<f64>,
}

impl EndpointSet {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn z_slice(&self, i: usize) -> &[f64] {
        &self.z[2 * self.n * i..2 * self.n * (i + 1)]
    }

    pub fn u(&self, i: usize) -> f64 {
        self.u[i]
    }

    pub fn point(&self, i: usize) -> GroupPoint {
        GroupPoint::new(self.z_slice(i).to_vec(), self.u(i)).unwrap()
    }
}

/// Simulates `n_paths` endpoints of the process at time `t` with the given
/// substep count. Path `i` uses stream `rng.offset(i)`.
pub fn endpoint_ensemble(
    n: usize,
    t: f64,
    substeps: usize,
    n_paths: usize,
    rng: RngStreamSpec,
) -> Result<EndpointSet> {
    if !(t > 0.0) {
        return Err(Error::invalid("t", t, "must be positive"));
    }
    if substeps == 0 || n == 0 {
        return Err(Error::invalid("substeps", 0.0, "must be positive"));
    }
    let h = t / substeps as f64;
    let sd = (2.0 * h).sqrt();
    let width = 2 * n;
    let n_batches = n_paths.div_ceil(DEFAULT_BATCH);
    let batches: Vec<(Vec<f64>, Vec<f64>)> = exec::map_collect(n_batches, |b| {
        let lo = b * DEFAULT_BATCH;
        let hi = (lo + DEFAULT_BATCH).min(n_paths);
        let mut zs = Vec::with_capacity((hi - lo) * width);
        let mut us = Vec::with_capacity(hi - lo);
        let mut z = vec![0.0f64; width];
        for i in lo..hi {
            let mut stream = rng.offset(i as u64).stream();
            z.iter_mut().for_each(|c| *c = 0.0);
            let mut u = 0.0;
            for _ in 0..substeps {
                substep(&mut z, &mut u, sd, &mut stream);
            }
            zs.extend_from_slice(&z);
            us.push(u);
        }
        (zs, us)
    });
    let mut z = Vec::with_capacity(n_paths * width);
    let mut u = Vec::with_capacity(n_paths);
    for (zs, us) in batches {
        z.extend_from_slice(&zs);
        u.extend_from_slice(&us);
    }
    Ok(EndpointSet { n, z, u })
}

/// Endpoint moment summary at a single time.
#[derive(Debug, Clone, Default)]
pub struct EndpointStats {
    /// Per-coordinate sample moments of `z`.
    pub coords: Vec<Moments>,
    /// `|z|^2` moments (mean estimates `E|z(t)|^2 = 4nt`).
    pub z_sq: Moments,
    /// `u` moments.
    pub u: Moments,
    /// `u^2` moments (mean minus `mean(u)^2` estimates `Var u(t) = 16nt^2`).
    pub u_sq: Moments,
    /// `cos(lambda u)` moments per requested lambda.
    pub cos_lu: Vec<Moments>,
    pub lambdas: Vec<f64>,
}

impl EndpointStats {
    fn new(n: usize, lambdas: &[f64]) -> Self {
        EndpointStats {
            coords: vec![Moments::default(); 2 * n],
            z_sq: Moments::default(),
            u: Moments::default(),
            u_sq: Moments::default(),
            cos_lu: vec![Moments::default(); lambdas.len()],
            lambdas: lambdas.to_vec(),
        }
    }

    fn push(&mut self, z: &[f64], u: f64) {
        let mut zq = 0.0;
        for (k, &c) in z.iter().enumerate() {
            self.coords[k].push(c);
            zq += c * c;
        }
        self.z_sq.push(zq);
        self.u.push(u);
        self.u_sq.push(u * u);
        for (k, &l) in self.lambdas.iter().enumerate() {
            self.cos_lu[k].push((l * u).cos());
        }
    }

    /// Sample variance of `u` (centered), with the standard error of the
    /// `u^2` mean as its uncertainty (the centering term is second order).
    pub fn var_u(&self) -> (f64, f64) {
        let m = self.u.mean();
        (self.u_sq.mean() - m * m, self.u_sq.stderr())
    }
}

impl Merge for EndpointStats {
    fn merge(&mut self, other: Self) {
        if self.coords.is_empty() {
            *self = other;
            return;
        }
        for (a, b) in self.coords.iter_mut().zip(other.coords) {
            a.merge(b);
        }
        self.z_sq.merge(other.z_sq);
        self.u.merge(other.u);
        self.u_sq.merge(other.u_sq);
        for (a, b) in self.cos_lu.iter_mut().zip(other.cos_lu) {
            a.merge(b);
        }
    }
}

/// Endpoint statistics at time `t` for an ensemble.
pub fn endpoint_statistics(
    n: usize,
    t: f64,
    substeps: usize,
    n_paths: usize,
    rng: RngStreamSpec,
    lambdas: &[f64],
) -> Result<EndpointStats> {
    if substeps == 0 || n == 0 || !(t > 0.0) {
        return Err(Error::invalid("params", 0.0, "invalid simulation sizes"));
    }
    let h = t / substeps as f64;
    let sd = (2.0 * h).sqrt();
    let init = EndpointStats::new(n, lambdas);
    Ok(exec::batched_fold(
        n_paths,
        DEFAULT_BATCH,
        init,
        |i, acc: &mut EndpointStats| {
            let mut stream = rng.offset(i as u64).stream();
            let mut z = vec![0.0f64; 2 * n];
            let mut u = 0.0;
            for _ in 0..substeps {
                substep(&mut z, &mut u, sd, &mut stream);
            }
            acc.push(&z, u);
        },
    ))
}

/// Coupled two-resolution endpoint statistics: each path is simulated at
/// `2 * substeps_coarse` substeps, and the coarse path is reconstructed
/// from the *same* Gaussian increments by pairwise summation. The returned
/// pair is `(coarse, fine)`; their difference isolates the weak
/// discretization error from Monte Carlo noise.
pub fn endpoint_statistics_coupled(
    n: usize,
    t: f64,
    substeps_coarse: usize,
    n_paths: usize,
    rng: RngStreamSpec,
    lambdas: &[f64],
) -> Result<(EndpointStats, EndpointStats)> {
    if substeps_coarse == 0 || n == 0 || !(t > 0.0) {
        return Err(Error::invalid("params", 0.0, "invalid simulation sizes"));
    }
    let fine_steps = 2 * substeps_coarse;
    let h = t / fine_steps as f64;
    let sd = (2.0 * h).sqrt();
    let width = 2 * n;

    #[derive(Clone, Default)]
    struct Pair(EndpointStats, EndpointStats);
    impl Merge for Pair {
        fn merge(&mut self, other: Self) {
            self.0.merge(other.0);
            self.1.merge(other.1);
        }
    }

    let init = Pair(
        EndpointStats::new(n, lambdas),
        EndpointStats::new(n, lambdas),
    );
    let out = exec::batched_fold(n_paths, DEFAULT_BATCH, init, |i, acc: &mut Pair| {
        let mut stream = rng.offset(i as u64).stream();
        let mut zf = vec![0.0f64; width];
        let mut uf = 0.0;
        let mut zc = vec![0.0f64; width];
        let mut uc = 0.0;
        let mut pending = vec![0.0f64; width];
        for step in 0..fine_steps {
            // Fine substep, recording the raw increments.
            let mut du = 0.0;
            for k in (0..width).step_by(2) {
                let gx: f64 = StandardNormal.sample(&mut stream);
                let gy: f64 = StandardNormal.sample(&mut stream);
                let (zx, zy) = (sd * gx, sd * gy);
                let xm = zf[k] + 0.5 * zx;
                let ym = zf[k + 1] + 0.5 * zy;
                du += ym * zx - xm * zy;
                zf[k] += zx;
                zf[k + 1] += zy;
                pending[k] += zx;
                pending[k + 1] += zy;
            }
            uf += 2.0 * du;
            if step % 2 == 1 {
                // Coarse substep with the summed increment.
                let mut duc = 0.0;
                for k in (0..width).step_by(2) {
                    let (zx, zy) = (pending[k], pending[k + 1]);
                    let xm = zc[k] + 0.5 * zx;
                    let ym = zc[k + 1] + 0.5 * zy;
                    duc += ym * zx - xm * zy;
                    zc[k] += zx;
                    zc[k + 1] += zy;
                }
                uc += 2.0 * duc;
                pending.iter_mut().for_each(|c| *c = 0.0);
            }
        }
        acc.0.push(&zc, uc);
        acc.1.push(&zf, uf);
    });
    Ok((out.0, out.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{marginal_char_u, KernelConfig};
    use crate::stats::ulps_between;

    const SEED: u64 = 0xC0FFEE;

    #[test]
    fn grid_validation() {
        assert!(PathGrid::new(vec![0.0, 0.5, 1.0], 4).is_ok());
        assert!(PathGrid::new(vec![0.1, 0.5], 4).is_err());
        assert!(PathGrid::new(vec![0.0, 0.5, 0.5], 4).is_err());
        assert!(PathGrid::new(vec![0.0, 0.5], 0).is_err());
        assert!(PathGrid::new(vec![], 1).is_err());
    }

    #[test]
    fn dyadic_grid_is_exact() {
        let g = PathGrid::dyadic(3, 2).unwrap();
        assert!(g.is_dyadic(3));
        assert!(!g.is_dyadic(2));
        assert!(g.is_symmetric());
        assert_eq!(g.times()[3], 0.375);
    }

    #[test]
    fn path_starts_at_identity_and_is_deterministic() {
        let grid = PathGrid::uniform(1.0, 16, 8).unwrap();
        let spec = RngStreamSpec::new(SEED, 3);
        let p1 = sample_path(1, &grid, spec).unwrap();
        assert!(p1.points[0].is_identity());
        let p2 = sample_path(1, &grid, spec).unwrap();
        assert_eq!(p1.points, p2.points); // bitwise
        // Executed under different thread pools: still identical.
        let p3 = exec::with_thread_count(3, || sample_path(1, &grid, spec).unwrap());
        assert_eq!(p1.points, p3.points);
        // A different stream differs.
        let q = sample_path(1, &grid, RngStreamSpec::new(SEED, 4)).unwrap();
        assert_ne!(p1.points, q.points);
    }

    #[test]
    fn increments_compose() {
        let grid = PathGrid::uniform(1.0, 8, 4).unwrap();
        let p = sample_path(2, &grid, RngStreamSpec::new(SEED, 0)).unwrap();
        let e = increment(&p, 3, 3).unwrap();
        assert!(e.is_identity());
        assert_eq!(increment(&p, 0, 5).unwrap(), p.points[5]);
        // multiply(x(t_i), inc(i,j)) == x(t_j) up to rounding.
        let inc = increment(&p, 2, 6).unwrap();
        let recomposed = group::multiply(&p.points[2], &inc).unwrap();
        for (a, b) in recomposed.z().iter().zip(p.points[6].z()) {
            assert!(ulps_between(*a, *b) <= 8 || (a - b).abs() < 1e-14);
        }
        assert!(
            ulps_between(recomposed.u(), p.points[6].u()) <= 64
                || (recomposed.u() - p.points[6].u()).abs() < 1e-12
        );
        assert!(increment(&p, 5, 2).is_err());
        assert!(increment(&p, 0, 99).is_err());
    }

    #[test]
    fn moments_match_oracles() {
        // E|z|^2 = 4nt, Var u = 16 n t^2, E cos(l u) = sech^n(4 l t).
        let stats = endpoint_statistics(1, 1.0, 200, 20_000, RngStreamSpec::new(SEED, 0), &[0.25])
            .unwrap();
        let m = stats.z_sq.mean();
        assert!(
            (m - 4.0).abs() <= 3.0 * stats.z_sq.stderr(),
            "E|z|^2 = {m} +- {}",
            stats.z_sq.stderr()
        );
        for c in &stats.coords {
            assert!(c.mean().abs() <= 4.0 * c.stderr(), "coord mean {}", c.mean());
        }
        let (var_u, se) = stats.var_u();
        assert!((var_u - 16.0).abs() <= 3.0 * se + 16.0 / 200.0, "Var u = {var_u} +- {se}");
        let cfg = KernelConfig::new(1);
        let expect = marginal_char_u(&cfg, 1.0, 0.25).unwrap();
        let got = stats.cos_lu[0].mean();
        assert!(
            (got - expect).abs() <= 3.0 * stats.cos_lu[0].stderr() + 2e-3,
            "E cos = {got} vs {expect}"
        );
    }

    #[test]
    fn coupled_refinement_shift_is_small() {
        let (coarse, fine) =
            endpoint_statistics_coupled(1, 1.0, 100, 20_000, RngStreamSpec::new(SEED, 0), &[0.25])
                .unwrap();
        // z statistics agree to rounding (identical increments, summed).
        assert!((coarse.z_sq.mean() - fine.z_sq.mean()).abs() < 1e-12);
        // The u discretization shift is ~ Var * 1/(2s), far below one stderr.
        let (vc, _) = coarse.var_u();
        let (vf, se) = fine.var_u();
        assert!((vc - vf).abs() < se, "shift {} vs stderr {se}", (vc - vf).abs());
        assert!(
            (coarse.cos_lu[0].mean() - fine.cos_lu[0].mean()).abs()
                < fine.cos_lu[0].stderr().max(1e-4)
        );
    }

    #[test]
    fn time_reverse_basics() {
        let grid = PathGrid::uniform(1.0, 10, 4).unwrap();
        let p = sample_path(1, &grid, RngStreamSpec::new(SEED, 9)).unwrap();
        let rev = time_reverse(&p).unwrap();
        assert!(rev.points[0].is_identity(), "reversal starts at identity");
        assert_eq!(rev.grid, p.grid);
        // Involution up to rounding on random paths.
        let back = time_reverse(&rev).unwrap();
        for (a, b) in back.points.iter().zip(&p.points) {
            for (x, y) in a.z().iter().zip(b.z()) {
                assert!((x - y).abs() <= 1e-13 * (1.0 + y.abs()));
            }
            assert!((a.u() - b.u()).abs() <= 1e-12 * (1.0 + b.u().abs()));
        }
    }

    #[test]
    fn time_reverse_exact_involution_on_representable_path() {
        // Dyadic coordinates make every group operation exact, so the
        // involution must hold bitwise.
        let grid = PathGrid::new(vec![0.0, 0.25, 0.5, 0.75, 1.0], 1).unwrap();
        let pts = [
            (0.0, 0.0, 0.0),
            (1.0, 0.5, 2.0),
            (-0.5, 1.25, -3.5),
            (2.0, -1.0, 0.75),
            (0.5, 0.5, 1.5),
        ];
        let points: Vec<GroupPoint> = pts
            .iter()
            .map(|&(x, y, u)| GroupPoint::h1(x, y, u))
            .collect();
        let p = SamplePath {
            grid,
            points,
            seed: RngStreamSpec::new(0, 0),
        };
        let back = time_reverse(&time_reverse(&p).unwrap()).unwrap();
        assert_eq!(back.points, p.points);
    }

    #[test]
    fn time_reverse_rejects_asymmetric_grid() {
        let grid = PathGrid::new(vec![0.0, 0.1, 1.0], 1).unwrap();
        let p = sample_path(1, &grid, RngStreamSpec::new(SEED, 0)).unwrap();
        assert!(matches!(time_reverse(&p), Err(Error::AsymmetricGrid)));
    }

    #[test]
    fn translate_path_basics() {
        let grid = PathGrid::uniform(1.0, 6, 4).unwrap();
        let p = sample_path(1, &grid, RngStreamSpec::new(SEED, 5)).unwrap();
        let e = GroupPoint::identity(1);
        let same = translate_path(&e, &p).unwrap();
        assert_eq!(same.points, p.points);
        let g = GroupPoint::h1(1.0, -0.5, 2.0);
        let tp = translate_path(&g, &p).unwrap();
        assert_eq!(tp.points[0], g);
        // Increments invariant (g cancels); rounding-level comparison.
        for (i, j) in [(0usize, 3usize), (2, 5), (1, 6)] {
            let a = increment(&p, i, j).unwrap();
            let b = increment(&tp, i, j).unwrap();
            for (x, y) in a.z().iter().zip(b.z()) {
                assert!((x - y).abs() <= 1e-13 * (1.0 + y.abs()));
            }
            assert!((a.u() - b.u()).abs() <= 1e-12 * (1.0 + b.u().abs()));
        }
        // Exact increment invariance on representable coordinates.
        let dy_grid = PathGrid::new(vec![0.0, 0.5, 1.0], 1).unwrap();
        let q = SamplePath {
            grid: dy_grid,
            points: vec![
                GroupPoint::identity(1),
                GroupPoint::h1(1.0, 2.0, 0.5),
                GroupPoint::h1(-0.5, 1.0, 4.0),
            ],
            seed: RngStreamSpec::new(0, 0),
        };
        let tq = translate_path(&GroupPoint::h1(2.0, -1.0, 1.0), &q).unwrap();
        for (i, j) in [(0usize, 1usize), (1, 2), (0, 2)] {
            assert_eq!(
                increment(&q, i, j).unwrap(),
                increment(&tq, i, j).unwrap()
            );
        }
        // Dimension mismatch rejected.
        assert!(translate_path(&GroupPoint::identity(2), &p).is_err());
    }

    #[test]
    fn endpoint_ensemble_matches_single_paths() {
        let ends = endpoint_ensemble(1, 0.5, 32, 10, RngStreamSpec::new(SEED, 100)).unwrap();
        assert_eq!(ends.len(), 10);
        for i in [0usize, 3, 9] {
            let grid = PathGrid::uniform(0.5, 1, 32).unwrap();
            let p = sample_path(1, &grid, RngStreamSpec::new(SEED, 100 + i as u64)).unwrap();
            assert_eq!(p.endpoint(), &ends.point(i));
        }
    }

    #[test]
    fn reversal_preserves_endpoint_law() {
        // Endpoint of Tx is x(t)^{-1}; |z| and u histograms must agree with
        // the original within Monte Carlo error (kernel is even).
        let grid = PathGrid::uniform(1.0, 8, 16).unwrap();
        let n_paths = 4000;
        let mut fwd_u = Vec::new();
        let mut rev_u = Vec::new();
        let mut fwd_zq = Vec::new();
        let mut rev_zq = Vec::new();
        for i in 0..n_paths {
            let p = sample_path(1, &grid, RngStreamSpec::new(SEED, 2000 + i)).unwrap();
            let r = time_reverse(&p).unwrap();
            fwd_u.push(p.endpoint().u());
            rev_u.push(r.endpoint().u());
            fwd_zq.push(p.endpoint().z_norm_sq());
            rev_zq.push(r.endpoint().z_norm_sq());
        }
        // Same-path endpoints are exact inverses: |z|^2 identical, u negated.
        for k in 0..n_paths as usize {
            assert!((fwd_zq[k] - rev_zq[k]).abs() < 1e-12 * (1.0 + fwd_zq[k]));
            assert_eq!(fwd_u[k], -rev_u[k]);
        }
        // Two-sample mean comparison for u (symmetric law: both near 0).
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let sd = |v: &[f64]| {
            let m = mean(v);
            (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        };
        let diff = mean(&fwd_u) - mean(&rev_u);
        let se = (sd(&fwd_u).powi(2) / n_paths as f64 + sd(&rev_u).powi(2) / n_paths as f64).sqrt();
        assert!(diff.abs() <= 3.0 * se, "u-mean diff {diff} vs se {se}");
    }
}
