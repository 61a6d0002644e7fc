//! Monte Carlo Feynman-Kac solver for the heat equation with potential.
//!
//! The solution of `(d_t + L) u = -V u`, `u(0, .) = f` is represented as
//!
//! ```text
//! u(t, xi) = E[ f(xi x(t)) exp(-int_0^t V(xi x(s)) ds) ]
//! ```
//!
//! over Wiener paths `x` started at the identity. Alongside the solver this
//! module carries the quadrature reference for `V = 0` (heat semigroup
//! applied to `f`), weighted endpoint density estimation (the delta initial
//! data of the kernel-with-potential), and executable forms of the Markov
//! factorization, the Duhamel integral equation, and the symmetry
//! `p(t, xi, eta) = p(t, eta, xi)`.
//!
//! All estimators take explicit RNG streams and substep counts; FK weights
//! are bounded by `exp(-t * lower_bound(V))`, which every constructor
//! certifies.

use crate::error::{Error, Result};
use crate::exec::{self, Merge, DEFAULT_BATCH};
use crate::group::{self, GroupPoint};
use crate::kernel::{self, KernelConfig, KernelTable};
use crate::measure::BoxRegion;
use crate::quad;
use crate::sampler::{self, PathGrid, RngStreamSpec};
use crate::stats::Moments;

/// A potential `V` with a certified global lower bound.
#[derive(Debug, Clone)]
pub enum Potential {
    /// `V(xi) = c`.
    Constant(f64),
    /// `V(xi) = alpha |z|^2 + beta` with `alpha >= 0`.
    QuadraticRadial { alpha: f64, beta: f64 },
    /// Values on a rectilinear grid, multilinear interpolation, clamped
    /// outside the grid (n = 1).
    Tabulated(TabulatedPotential),
}

impl Potential {
    pub fn quadratic_radial(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !beta.is_finite() {
            return Err(Error::UnboundedPotential(format!(
                "quadratic_radial needs alpha >= 0 (got {alpha})"
            )));
        }
        Ok(Potential::QuadraticRadial { alpha, beta })
    }

    /// Certified global lower bound of `V`.
    pub fn lower_bound(&self) -> f64 {
        match self {
            Potential::Constant(c) => *c,
            Potential::QuadraticRadial { beta, .. } => *beta,
            Potential::Tabulated(tab) => tab.min_value,
        }
    }

    /// Evaluates `V` at interleaved coordinates.
    pub fn eval(&self, z: &[f64], u: f64) -> f64 {
        match self {
            Potential::Constant(c) => *c,
            Potential::QuadraticRadial { alpha, beta } => {
                let zq: f64 = z.iter().map(|c| c * c).sum();
                alpha * zq + beta
            }
            Potential::Tabulated(tab) => tab.eval(z, u),
        }
    }

    pub fn eval_point(&self, p: &GroupPoint) -> f64 {
        self.eval(p.z(), p.u())
    }
}

/// Uniform rectilinear table over `(x, y, u)` for `n = 1`, with clamping
/// out-of-range policy.
#[derive(Debug, Clone)]
pub struct TabulatedPotential {
    pub origin: [f64; 3],
    pub step: [f64; 3],
    pub shape: [usize; 3],
    pub values: Vec<f64>,
    min_value: f64,
}

impl TabulatedPotential {
    pub fn new(origin: [f64; 3], step: [f64; 3], shape: [usize; 3], values: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&s| s < 2) || step.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::invalid(
                "table",
                0.0,
                "each axis needs >= 2 nodes and positive step",
            ));
        }
        if values.len() != shape[0] * shape[1] * shape[2]
            || values.iter().any(|v| !v.is_finite())
        {
            return Err(Error::invalid(
                "table",
                values.len() as f64,
                "values must be finite and match the grid shape",
            ));
        }
        let min_value = values.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(TabulatedPotential {
            origin,
            step,
            shape,
            values,
            min_value,
        })
    }

    fn axis(&self, k: usize, x: f64) -> (usize, f64) {
        let s = (x - self.origin[k]) / self.step[k];
        // Clamp: outside the grid the nearest face value applies.
        let s = s.clamp(0.0, (self.shape[k] - 1) as f64);
        let i = (s.floor() as usize).min(self.shape[k] - 2);
        (i, s - i as f64)
    }

    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(i * self.shape[1] + j) * self.shape[2] + k]
    }

    pub fn eval(&self, z: &[f64], u: f64) -> f64 {
        let (i, fx) = self.axis(0, z[0]);
        let (j, fy) = self.axis(1, z[1]);
        let (k, fu) = self.axis(2, u);
        let mut acc = 0.0;
        for (di, wx) in [(0, 1.0 - fx), (1, fx)] {
            for (dj, wy) in [(0, 1.0 - fy), (1, fy)] {
                for (dk, wu) in [(0, 1.0 - fu), (1, fu)] {
                    acc += wx * wy * wu * self.at(i + di, j + dj, k + dk);
                }
            }
        }
        acc
    }
}

/// Initial data `f`, bounded with a certified sup bound.
#[derive(Debug, Clone)]
pub enum InitialData {
    Constant(f64),
    /// `A exp(-|coords - center|^2 / (2 width^2))` in the flat coordinates.
    GaussianBump {
        center: GroupPoint,
        width: f64,
        amplitude: f64,
    },
    IndicatorBox(BoxRegion),
}

impl InitialData {
    pub fn gaussian_bump(center: GroupPoint, width: f64, amplitude: f64) -> Result<Self> {
        if !(width > 0.0) || !amplitude.is_finite() {
            return Err(Error::invalid("width", width, "must be positive"));
        }
        Ok(InitialData::GaussianBump {
            center,
            width,
            amplitude,
        })
    }

    pub fn sup_bound(&self) -> f64 {
        match self {
            InitialData::Constant(c) => c.abs(),
            InitialData::GaussianBump { amplitude, .. } => amplitude.abs(),
            InitialData::IndicatorBox(_) => 1.0,
        }
    }

    /// Whether quadrature references support this kind (smooth kinds only).
    pub fn is_smooth(&self) -> bool {
        !matches!(self, InitialData::IndicatorBox(_))
    }

    pub fn eval(&self, z: &[f64], u: f64) -> f64 {
        match self {
            InitialData::Constant(c) => *c,
            InitialData::GaussianBump {
                center,
                width,
                amplitude,
            } => {
                let mut d2 = (u - center.u()) * (u - center.u());
                for (a, b) in z.iter().zip(center.z()) {
                    d2 += (a - b) * (a - b);
                }
                amplitude * (-d2 / (2.0 * width * width)).exp()
            }
            InitialData::IndicatorBox(b) => {
                let n2 = b.coords.len() - 1;
                let in_z = b.coords[..n2].iter().zip(z).all(|(iv, &c)| iv.contains(c));
                if in_z && b.coords[n2].contains(u) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn eval_point(&self, p: &GroupPoint) -> f64 {
        self.eval(p.z(), p.u())
    }
}

/// A Monte Carlo value with its provenance.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct FKEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub seed: RngStreamSpec,
}

/// A bounded functional of the path restricted to `[0, s]`.
#[derive(Debug, Clone)]
pub enum PathFunctional {
    One,
    /// The FK weight `exp(-int_0^s V(x))`.
    FkWeight(Potential),
    /// Indicator of box constraints at times within `[0, s]`.
    CylinderIndicator { times: Vec<f64>, boxes: Vec<BoxRegion> },
}

/// Trapezoid accumulator for `int V(x(s)) ds` along a simulated path.
#[derive(Debug, Clone, Copy, Default)]
struct WeightIntegral {
    total: f64,
    prev_time: f64,
    prev_value: f64,
    started: bool,
}

impl WeightIntegral {
    fn push(&mut self, time: f64, value: f64) {
        if self.started {
            self.total += 0.5 * (time - self.prev_time) * (self.prev_value + value);
        }
        self.prev_time = time;
        self.prev_value = value;
        self.started = true;
    }
}

/// Trapezoid-rule time integral `int_0^T V(base . x(s)) ds` over the path's
/// stored grid times. The result is bounded below by `T * lower_bound(V)`
/// up to rounding.
pub fn weight_integral(path: &sampler::SamplePath, v: &Potential, base: &GroupPoint) -> Result<f64> {
    if base.n() != path.n() {
        return Err(Error::DimensionMismatch {
            expected: path.n(),
            got: base.n(),
        });
    }
    let mut acc = WeightIntegral::default();
    for (t, p) in path.grid.times().iter().zip(&path.points) {
        let shifted = group::multiply(base, p)?;
        acc.push(*t, v.eval_point(&shifted));
    }
    Ok(acc.total)
}

/// Evaluates `V(base . x)` from raw path coordinates without allocating.
#[inline]
fn potential_at_translated(v: &Potential, base: &GroupPoint, z: &[f64], u: f64) -> f64 {
    match v {
        // Fast paths that only need |z|^2 or nothing.
        Potential::Constant(c) => *c,
        Potential::QuadraticRadial { alpha, beta } => {
            let mut zq = 0.0;
            for (b, x) in base.z().iter().zip(z) {
                let s = b + x;
                zq += s * s;
            }
            alpha * zq + beta
        }
        Potential::Tabulated(tab) => {
            let zs = [base.z()[0] + z[0], base.z()[1] + z[1]];
            let us = base.u() + u + 2.0 * group::im_z_conj(base.z(), z);
            tab.eval(&zs, us)
        }
    }
}

#[derive(Clone, Default)]
struct MomentsAcc(Moments);
impl Merge for MomentsAcc {
    fn merge(&mut self, other: Self) {
        self.0.merge(other.0);
    }
}

/// Monte Carlo Feynman-Kac solution `u(t, xi)`.
///
/// Each path contributes `f(xi x(t)) exp(-int_0^t V(xi x(s)) ds)` with the
/// weight integral accumulated by the trapezoid rule at substep resolution.
pub fn fk_solve(
    t: f64,
    xi: &GroupPoint,
    f: &InitialData,
    v: &Potential,
    n_paths: usize,
    substeps: usize,
    rng: RngStreamSpec,
) -> Result<FKEstimate> {
    if !(t > 0.0) {
        return Err(Error::invalid("t", t, "must be positive"));
    }
    let n = xi.n();
    let grid = PathGrid::uniform(t, 1, substeps)?;
    let weight_cap = (-t * v.lower_bound()).exp() * 1.0000001;
    let acc = exec::batched_fold(n_paths, DEFAULT_BATCH, MomentsAcc::default(), |i, acc| {
        let mut wi = WeightIntegral::default();
        let mut terminal = 0.0;
        sampler::simulate_fine_visit(n, &grid, rng.offset(i as u64), |gi, time, z, u| {
            wi.push(time, potential_at_translated(v, xi, z, u));
            if gi == Some(1) {
                let zs: Vec<f64> = xi.z().iter().zip(z).map(|(a, b)| a + b).collect();
                let us = xi.u() + u + 2.0 * group::im_z_conj(xi.z(), z);
                terminal = f.eval(&zs, us);
            }
        })
        .expect("grid validated");
        let w = (-wi.total).exp();
        debug_assert!(w <= weight_cap, "FK weight above the certified cap");
        acc.0.push(terminal * w);
    });
    Ok(FKEstimate {
        value: acc.0.mean(),
        stderr: acc.0.stderr(),
        n_paths,
        seed: rng,
    })
}

/// Deterministic quadrature reference for the potential-free case:
/// `u(t, xi) = int f(xi zeta) p_t(zeta) dzeta` (n = 1, smooth `f` only).
pub fn heat_reference(t: f64, xi: &GroupPoint, f: &InitialData, cfg: &KernelConfig) -> Result<f64> {
    if cfg.n != 1 || xi.n() != 1 {
        return Err(Error::SizeLimit("heat_reference supports n = 1".into()));
    }
    if !f.is_smooth() {
        return Err(Error::invalid(
            "f",
            0.0,
            "quadrature reference requires a smooth initial-data kind",
        ));
    }
    let (rz, ru) = kernel::truncation_box(t);
    let table = KernelTable::build_auto(cfg, t, rz * 1.02, ru * 1.02)?;
    let integral = |panels_scale: usize| {
        let pz = 4 * panels_scale;
        let pu = 5 * panels_scale;
        quad::composite_gl(-rz, rz, pz, 16, |x| {
            quad::composite_gl(-rz, rz, pz, 16, |y| {
                quad::composite_gl(-ru, ru, pu, 16, |w| {
                    // eta = xi * zeta in flat coordinates.
                    let zs = [xi.z()[0] + x, xi.z()[1] + y];
                    let us = xi.u() + w + 2.0 * (xi.z()[1] * x - xi.z()[0] * y);
                    f.eval(&zs, us) * table.eval(x * x + y * y, w)
                })
            })
        })
    };
    let fine = integral(2);
    let coarse = integral(1);
    let est = (fine - coarse).abs() + 2e-6 * f.sup_bound();
    if est > 1e-3 * f.sup_bound().max(fine.abs()) {
        return Err(Error::QuadratureNonConvergent {
            est_error: est,
            target: 1e-3 * f.sup_bound(),
        });
    }
    Ok(fine)
}

/// Endpoints of an ensemble with FK weights `exp(-int_0^t V(base x(s)))`.
///
/// Endpoints are the *untranslated* `x(t)`; the translation only enters
/// the potential, matching the weighted-delta estimands of the
/// kernel-with-potential (`base = eta` gives `p(t, eta, .)`).
pub struct WeightedEnsemble {
    pub n: usize,
    pub t: f64,
    z: Vec<f64>,
    u: Vec<f64>,
    pub weights: Vec<f64>,
    pub seed: RngStreamSpec,
}

impl WeightedEnsemble {
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
}

/// Simulates a weighted ensemble (see [`WeightedEnsemble`]).
pub fn fk_ensemble(
    n: usize,
    t: f64,
    v: &Potential,
    base: &GroupPoint,
    n_paths: usize,
    substeps: usize,
    rng: RngStreamSpec,
) -> Result<WeightedEnsemble> {
    if !(t > 0.0) {
        return Err(Error::invalid("t", t, "must be positive"));
    }
    let grid = PathGrid::uniform(t, 1, substeps)?;
    let width = 2 * n;
    let n_batches = n_paths.div_ceil(DEFAULT_BATCH);
    let parts: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = exec::map_collect(n_batches, |b| {
        let lo = b * DEFAULT_BATCH;
        let hi = (lo + DEFAULT_BATCH).min(n_paths);
        let mut zs = Vec::with_capacity((hi - lo) * width);
        let mut us = Vec::with_capacity(hi - lo);
        let mut ws = Vec::with_capacity(hi - lo);
        for i in lo..hi {
            let mut wi = WeightIntegral::default();
            sampler::simulate_fine_visit(n, &grid, rng.offset(i as u64), |gi, time, z, u| {
                wi.push(time, potential_at_translated(v, base, z, u));
                if gi == Some(1) {
                    zs.extend_from_slice(z);
                    us.push(u);
                }
            })
            .expect("grid validated");
            ws.push((-wi.total).exp());
        }
        (zs, us, ws)
    });
    let mut z = Vec::with_capacity(n_paths * width);
    let mut u = Vec::with_capacity(n_paths);
    let mut weights = Vec::with_capacity(n_paths);
    for (zs, us, ws) in parts {
        z.extend_from_slice(&zs);
        u.extend_from_slice(&us);
        weights.extend_from_slice(&ws);
    }
    Ok(WeightedEnsemble {
        n,
        t,
        z,
        u,
        weights,
        seed: rng,
    })
}

/// Weighted box-kernel density estimate at a set of target points.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    pub targets: Vec<GroupPoint>,
    pub values: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// Bins with no hits (reported, not silently zeroed).
    pub empty_bins: Vec<usize>,
    pub half_width: f64,
    pub n_paths: usize,
    /// Mean total FK weight (total estimated mass of the weighted law).
    pub mean_weight: f64,
}

/// Estimates the weighted endpoint density at each target: the mean of
/// `w_i 1{|x(t) - target|_inf <= h}` divided by the bin volume `(2h)^{2n+1}`.
/// For `V = 0` this estimates the heat kernel `p_t` itself.
pub fn fk_kernel_density(
    ens: &WeightedEnsemble,
    targets: &[GroupPoint],
    half_width: f64,
) -> Result<DensityEstimate> {
    if !(half_width > 0.0) {
        return Err(Error::invalid("half_width", half_width, "must be positive"));
    }
    let dim = 2 * ens.n + 1;
    let volume = (2.0 * half_width).powi(dim as i32);
    let mut values = Vec::with_capacity(targets.len());
    let mut stderrs = Vec::with_capacity(targets.len());
    let mut empty = Vec::new();
    let mut weight_total = Moments::default();
    for (k, target) in targets.iter().enumerate() {
        if target.n() != ens.n {
            return Err(Error::DimensionMismatch {
                expected: ens.n,
                got: target.n(),
            });
        }
        let mut m = Moments::default();
        let mut hits = 0u64;
        for i in 0..ens.len() {
            let zi = ens.z_slice(i);
            let mut inside = (ens.u(i) - target.u()).abs() <= half_width;
            if inside {
                for (a, b) in zi.iter().zip(target.z()) {
                    if (a - b).abs() > half_width {
                        inside = false;
                        break;
                    }
                }
            }
            let y = if inside {
                hits += 1;
                ens.weights[i] / volume
            } else {
                0.0
            };
            m.push(y);
            if k == 0 {
                weight_total.push(ens.weights[i]);
            }
        }
        if hits == 0 {
            empty.push(k);
        }
        values.push(m.mean());
        stderrs.push(m.stderr());
    }
    Ok(DensityEstimate {
        targets: targets.to_vec(),
        values,
        stderrs,
        empty_bins: empty,
        half_width,
        n_paths: ens.len(),
        mean_weight: weight_total.mean(),
    })
}

/// Two-sided outcome of the Markov factorization check.
#[derive(Debug, Clone)]
pub struct MarkovCheck {
    /// Density estimate of `E[G delta_{t, xi}]` (bandwidth-limited).
    pub lhs: f64,
    pub lhs_stderr: f64,
    /// Smoothing form `E[G p_{t-s}(x(s)^{-1} xi)]` (no bandwidth).
    pub rhs: f64,
    pub rhs_stderr: f64,
    pub residual_rel: f64,
}

/// Checks `E[G delta_{t,xi}] = int E[delta_{t-s, eta^{-1}xi}] E[G delta_{s,eta}] d eta`
/// for a functional `G` of the path up to time `s`: the right side
/// collapses to the smoothing form `E[G(x) p_{t-s}(x(s)^{-1} xi)]`, which
/// is estimated on the same paths without binning.
pub fn markov_check(
    cfg: &KernelConfig,
    s: f64,
    t: f64,
    xi: &GroupPoint,
    g: &PathFunctional,
    n_paths: usize,
    substeps: usize,
    half_width: f64,
    rng: RngStreamSpec,
) -> Result<MarkovCheck> {
    if !(s > 0.0 && s < t) {
        return Err(Error::invalid("s", s, "requires 0 < s < t"));
    }
    let n = xi.n();
    if cfg.n != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: cfg.n,
        });
    }
    // Grid through the functional's times, s, and t.
    let mut marks: Vec<f64> = vec![s, t];
    if let PathFunctional::CylinderIndicator { times, .. } = g {
        if times.iter().any(|&tm| !(tm > 0.0 && tm <= s)) {
            return Err(Error::invalid(
                "G",
                0.0,
                "cylinder functional times must lie in (0, s]",
            ));
        }
        marks.extend_from_slice(times);
    }
    marks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    marks.dedup();
    let mut times = vec![0.0];
    times.extend_from_slice(&marks);
    let per_interval = (substeps / times.len().max(1)).max(8);
    let grid = PathGrid::new(times.clone(), per_interval)?;
    let s_index = times.iter().position(|&x| x == s).unwrap();
    let t_index = times.len() - 1;

    let unit_table = KernelTable::build_auto(cfg, 1.0, 14.0, 40.0)?;
    let tau = t - s;
    let dim = 2 * n + 1;
    let volume = (2.0 * half_width).powi(dim as i32);

    #[derive(Clone, Default)]
    struct Acc {
        lhs: Moments,
        rhs: Moments,
    }
    impl Merge for Acc {
        fn merge(&mut self, other: Self) {
            self.lhs.merge(other.lhs);
            self.rhs.merge(other.rhs);
        }
    }

    let boxes_check = |boxes: &[BoxRegion], times_g: &[f64], tm: f64, z: &[f64], u: f64| -> bool {
        for (bt, b) in times_g.iter().zip(boxes) {
            if *bt == tm {
                let in_z = b.coords[..2 * n].iter().zip(z).all(|(iv, &c)| iv.contains(c));
                if !(in_z && b.coords[2 * n].contains(u)) {
                    return false;
                }
            }
        }
        true
    };

    let acc = exec::batched_fold(n_paths, DEFAULT_BATCH, Acc::default(), |i, acc| {
        let mut wi = WeightIntegral::default();
        let mut g_val = 1.0f64;
        let mut rhs_val = 0.0;
        let mut end_inside = false;
        sampler::simulate_fine_visit(n, &grid, rng.offset(i as u64), |gi, time, z, u| {
            // G only sees the path up to s.
            if time <= s {
                match g {
                    PathFunctional::One => {}
                    PathFunctional::FkWeight(v) => {
                        wi.push(time, v.eval(z, u));
                    }
                    PathFunctional::CylinderIndicator { times, boxes } => {
                        if gi.is_some() && g_val > 0.0 {
                            if !boxes_check(boxes, times, time, z, u) {
                                g_val = 0.0;
                            }
                        }
                    }
                }
            }
            if gi == Some(s_index) {
                if matches!(g, PathFunctional::FkWeight(_)) {
                    g_val = (-wi.total).exp();
                }
                let (z_sq, du) = group::left_increment_parts(z, u, xi.z(), xi.u());
                rhs_val = g_val * unit_table.eval_at_time(tau, z_sq, du);
            }
            if gi == Some(t_index) {
                let mut inside = (u - xi.u()).abs() <= half_width;
                if inside {
                    for (a, b) in z.iter().zip(xi.z()) {
                        if (a - b).abs() > half_width {
                            inside = false;
                            break;
                        }
                    }
                }
                end_inside = inside;
            }
        })
        .expect("grid validated");
        // rhs_val used g_val evaluated at s; for the indicator kind g_val
        // was final before s as well.
        acc.rhs.push(rhs_val);
        acc.lhs.push(if end_inside { g_val / volume } else { 0.0 });
    });

    let lhs = acc.lhs.mean();
    let rhs = acc.rhs.mean();
    Ok(MarkovCheck {
        lhs,
        lhs_stderr: acc.lhs.stderr(),
        rhs,
        rhs_stderr: acc.rhs.stderr(),
        residual_rel: (lhs - rhs).abs() / rhs.abs().max(1e-300),
    })
}

/// Outcome of the Duhamel integral-equation check.
#[derive(Debug, Clone)]
pub struct DuhamelCheck {
    /// Density estimate of `u(t, xi)` (bandwidth-limited).
    pub lhs: f64,
    pub lhs_stderr: f64,
    /// `p_t(xi) - int_0^t E[V(xconj) W p_{t-tau}(x(tau)^{-1} xi)] d tau`.
    pub rhs: f64,
    pub rhs_stderr: f64,
    pub residual_rel: f64,
    pub half_width: f64,
}

/// Checks the Duhamel form
/// `u(t, xi) = p_t(xi) - int_0^t int V(eta) u(tau, eta) p_{t-tau}(eta^{-1} xi) d eta d tau`.
///
/// The inner eta-integral is the expectation
/// `E[V(x(tau)) e^{-int_0^tau V} p_{t-tau}(x(tau)^{-1} xi)]`, so the right
/// side needs no density estimation; each path contributes its trapezoid
/// over the step grid, truncated just short of `tau = t` (where the kernel
/// factor concentrates) with the last value carried over the remainder.
pub fn duhamel_residual(
    cfg: &KernelConfig,
    t: f64,
    xi: &GroupPoint,
    v: &Potential,
    n_paths: usize,
    substeps: usize,
    half_width: f64,
    rng: RngStreamSpec,
) -> Result<DuhamelCheck> {
    if cfg.n != 1 || xi.n() != 1 {
        return Err(Error::SizeLimit("duhamel_residual supports n = 1".into()));
    }
    let grid = PathGrid::uniform(t, 1, substeps)?;
    let unit_table = KernelTable::build_auto(cfg, 1.0, 14.0, 40.0)?;
    let h = t / substeps as f64;
    // Stop the tau-trapezoid at 98% of t; the integrand stays bounded but
    // its Monte Carlo variance blows up as tau -> t.
    let k_max = ((0.98 * substeps as f64).floor() as usize).max(1);
    let volume = (2.0 * half_width).powi(3);

    #[derive(Clone, Default)]
    struct Acc {
        lhs: Moments,
        corr: Moments,
    }
    impl Merge for Acc {
        fn merge(&mut self, other: Self) {
            self.lhs.merge(other.lhs);
            self.corr.merge(other.corr);
        }
    }

    let acc = exec::batched_fold(n_paths, DEFAULT_BATCH, Acc::default(), |i, acc| {
        let mut wi = WeightIntegral::default();
        let mut integral = 0.0;
        let mut prev_g = 0.0;
        let mut step = 0usize;
        let mut end_inside = false;
        sampler::simulate_fine_visit(1, &grid, rng.offset(i as u64), |gi, time, z, u| {
            let v_here = v.eval(z, u);
            wi.push(time, v_here);
            step += 1;
            if step <= k_max {
                let w = (-wi.total).exp();
                let (z_sq, du) = group::left_increment_parts(z, u, xi.z(), xi.u());
                let g = v_here * w * unit_table.eval_at_time(t - time, z_sq, du);
                // Trapezoid in tau with g(0) = V(o) p_t(xi)-weighted... the
                // tau = 0 term uses the deterministic start point.
                if step == 1 {
                    let g0 = v.eval(&[0.0, 0.0], 0.0)
                        * unit_table.eval_at_time(t, xi.z_norm_sq(), xi.u());
                    integral += 0.5 * h * (g0 + g);
                } else {
                    integral += 0.5 * h * (prev_g + g);
                }
                prev_g = g;
                if step == k_max {
                    // Carry the last value across the truncated remainder.
                    integral += (t - time) * g;
                }
            }
            if gi == Some(1) {
                let mut inside = (u - xi.u()).abs() <= half_width;
                if inside {
                    for (a, b) in z.iter().zip(xi.z()) {
                        if (a - b).abs() > half_width {
                            inside = false;
                            break;
                        }
                    }
                }
                end_inside = inside;
            }
        })
        .expect("grid validated");
        let w_end = (-wi.total).exp();
        acc.lhs.push(if end_inside { w_end / volume } else { 0.0 });
        acc.corr.push(integral);
    });

    let p_t = kernel::kernel_eval(cfg, t, xi)?;
    let rhs = p_t - acc.corr.mean();
    let lhs = acc.lhs.mean();
    Ok(DuhamelCheck {
        lhs,
        lhs_stderr: acc.lhs.stderr(),
        rhs,
        rhs_stderr: acc.corr.stderr(),
        residual_rel: (lhs - rhs).abs() / rhs.abs().max(1e-300),
        half_width,
    })
}

/// Two density estimates and their discrepancy z-score.
#[derive(Debug, Clone)]
pub struct SymmetryCheck {
    pub p_xi_eta: f64,
    pub stderr_xi_eta: f64,
    pub p_eta_xi: f64,
    pub stderr_eta_xi: f64,
    pub z_score: f64,
}

/// Estimates `p(t, xi, eta)` and `p(t, eta, xi)` via weighted endpoint
/// densities with translated potentials, on independent streams, and
/// returns the discrepancy z-score. The symmetry lemma asserts the two
/// estimands are equal.
pub fn symmetry_check(
    t: f64,
    xi: &GroupPoint,
    eta: &GroupPoint,
    v: &Potential,
    n_paths: usize,
    substeps: usize,
    half_width: f64,
    rng: RngStreamSpec,
) -> Result<SymmetryCheck> {
    let n = xi.n();
    if eta.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: eta.n(),
        });
    }
    // p(t, xi, eta): weight along xi-translated paths, density at xi^{-1} eta.
    let target1 = group::multiply(&group::inverse(xi), eta)?;
    let ens1 = fk_ensemble(n, t, v, xi, n_paths, substeps, rng)?;
    let d1 = fk_kernel_density(&ens1, &[target1], half_width)?;
    // p(t, eta, xi): mirrored, independent streams.
    let target2 = group::multiply(&group::inverse(eta), xi)?;
    let ens2 = fk_ensemble(n, t, v, eta, n_paths, substeps, rng.offset(n_paths as u64))?;
    let d2 = fk_kernel_density(&ens2, &[target2], half_width)?;
    let (a, sa) = (d1.values[0], d1.stderrs[0]);
    let (b, sb) = (d2.values[0], d2.stderrs[0]);
    Ok(SymmetryCheck {
        p_xi_eta: a,
        stderr_xi_eta: sa,
        p_eta_xi: b,
        stderr_eta_xi: sb,
        z_score: (a - b) / (sa * sa + sb * sb).sqrt().max(1e-300),
    })
}
