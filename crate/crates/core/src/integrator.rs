//! Method-of-lines integration of the flow from `k = cutoff` towards `k = 0`.
//!
//! The spatial fields are advanced in the RG time `tau = ln(cutoff / k)` with
//! an embedded Dormand-Prince 5(4) pair. Trial steps that leave the domain of
//! the flow equations (a failed positivity condition, a non-finite value or
//! a non-positive `Z`) are rejected and retried with half the step.
//!
//! The field-independent part of the potential flow is integrated in closed
//! form and kept out of the stepped state: it only shifts `V` by a constant,
//! but it grows like `cutoff / (2 sqrt(pi))` per unit `tau` and would
//! otherwise swamp the error control on `V''`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow_rhs::{Kernel, SchemeSpec};
use crate::model::{ModelParams, SpatialGrid};
use crate::observables::gap_from_flow;
use crate::stencil::{derivative_into, Field};

/// Running action truncation at scale `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub k: f64,
    /// Running potential with the accumulated vacuum energy removed.
    pub v: Field,
    pub z: Field,
    /// Field-independent shift separating `v` from the full potential.
    pub vacuum_energy: f64,
}

impl FlowState {
    /// Full running potential `V(k, x)`.
    pub fn potential(&self) -> Field {
        let mut out = self.v.clone();
        out.values_mut().iter_mut().for_each(|v| *v += self.vacuum_energy);
        out
    }

    /// `V''(k, x)` from the same stencil the flow uses.
    pub fn curvature(&self) -> Field {
        crate::stencil::derivative(&self.v, 2).expect("grid validated on construction")
    }

    pub fn v2_origin(&self) -> f64 {
        self.curvature().at_center()
    }

    pub fn z_origin(&self) -> f64 {
        self.z.at_center()
    }

    pub fn grid(&self) -> &SpatialGrid {
        self.v.grid()
    }
}

/// Step-size control and stopping rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteppingConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub k_min: f64,
    pub max_steps: usize,
    /// Relative change of `V''(k,0) / Z(k,0)` per unit `ln k` below which
    /// the flow counts as frozen.
    pub plateau_tol: f64,
    /// The run aborts once the half-width of the `Z` peak is narrower than
    /// this many grid spacings.
    pub min_peak_width: f64,
}

impl Default for SteppingConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-7,
            abs_tol: 1e-9,
            k_min: 1e-3,
            max_steps: 1_000_000,
            plateau_tol: 1e-6,
            min_peak_width: 6.0,
        }
    }
}

impl SteppingConfig {
    pub fn validate(&self, cutoff: f64) -> Result<()> {
        let positive = [self.rel_tol, self.abs_tol, self.k_min, self.plateau_tol];
        if positive.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidConfig("tolerances and k_min must be positive".into()));
        }
        if self.k_min >= cutoff {
            return Err(Error::InvalidConfig(format!(
                "k_min = {} must lie below the cutoff {cutoff}",
                self.k_min
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be positive".into()));
        }
        if !(self.min_peak_width >= 0.0) {
            return Err(Error::InvalidConfig("min_peak_width must be non-negative".into()));
        }
        Ok(())
    }
}

/// How a flow run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    PlateauReached,
    KMinReached,
    PositivityAbort,
    ResolutionAbort,
    StepLimit,
}

impl Termination {
    pub fn is_success(&self) -> bool {
        matches!(self, Termination::PlateauReached | Termination::KMinReached)
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Termination::PlateauReached => "PlateauReached",
            Termination::KMinReached => "KMinReached",
            Termination::PositivityAbort => "PositivityAbort",
            Termination::ResolutionAbort => "ResolutionAbort",
            Termination::StepLimit => "StepLimit",
        }
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub guard_rejections: usize,
    pub rhs_evaluations: usize,
    pub smallest_step: f64,
    /// Largest `|k dZ/dk|` over nodes and accepted steps.
    pub peak_dz: f64,
    /// Largest mirror mismatch of `v` or `z` relative to `1 + max|v|`.
    pub max_asymmetry: f64,
    /// Half-width of the `Z` peak at the end of the run, if one formed.
    pub z_peak_half_width: Option<f64>,
    pub message: Option<String>,
}

/// `(k, V''(k,0), Z(k,0))` recorded along the flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryPoint {
    pub k: f64,
    pub v2_origin: f64,
    pub z_origin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub scheme: SchemeSpec,
    pub final_state: FlowState,
    pub v2_origin: f64,
    pub z_origin: f64,
    /// Energy gap; present only for a completed flow with a convex origin.
    pub delta_e: Option<f64>,
    pub termination: Termination,
    /// One state per requested snapshot scale, in request order.
    pub snapshots: Vec<FlowState>,
    /// Thinned history of the origin values, roughly every 0.01 in `ln k`,
    /// always including both states around a sign change of `V''(k,0)`.
    pub history: Vec<HistoryPoint>,
    pub diagnostics: Diagnostics,
}

/// Bare action at `k = cutoff`: `V` from the double well, `Z = 1`.
pub fn initialize(params: &ModelParams, grid: &SpatialGrid) -> FlowState {
    FlowState {
        k: params.cutoff,
        v: Field::from_fn(*grid, |x| params.bare_potential(x)),
        z: Field::constant(*grid, 1.0),
        vacuum_energy: 0.0,
    }
}

/// Closed-form integral of the vacuum term from `cutoff` down to `k`.
fn vacuum_energy(scheme: SchemeSpec, params: &ModelParams, k: f64) -> f64 {
    // vacuum_term(k) = c k^d, and dE/dtau = -c k^d.
    let d = params.dimension;
    let c = scheme.vacuum_term(1.0, d);
    -c * (params.cutoff.powf(d) - k.powf(d)) / d
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const MAX_STEP: f64 = 0.25;
const HISTORY_SPACING: f64 = 0.01;
/// Minimum height of `Z - 1` before the peak-width monitor engages.
const PEAK_MIN_HEIGHT: f64 = 0.05;

/// Evaluates `d(state)/d tau` for one scheme on one grid.
struct FlowRhs {
    scheme: SchemeSpec,
    params: ModelParams,
    n: usize,
    h: f64,
    v2: Vec<f64>,
    v3: Vec<f64>,
    z1: Vec<f64>,
    z2: Vec<f64>,
}

impl FlowRhs {
    fn new(scheme: SchemeSpec, params: ModelParams, grid: &SpatialGrid) -> Self {
        let n = grid.n_points();
        let buf = |used: bool| if used { vec![0.0; n] } else { Vec::new() };
        Self {
            scheme,
            params,
            n,
            h: grid.spacing(),
            v2: vec![0.0; n],
            v3: buf(scheme.runs_z()),
            z1: buf(scheme.runs_z()),
            z2: buf(scheme.runs_z()),
        }
    }

    fn k_at(&self, tau: f64) -> f64 {
        self.params.cutoff * (-tau).exp()
    }

    /// `y` holds `v` and, for schemes that run it, `z`. Returns the largest
    /// `|k dZ/dk|` over nodes.
    fn eval(&mut self, tau: f64, y: &[f64], out: &mut [f64]) -> Result<f64> {
        let n = self.n;
        let k = self.k_at(tau);
        let d = self.params.dimension;
        let kernel = Kernel::new(self.scheme, k, d)?;
        let (v, z) = y.split_at(n);
        derivative_into(v, self.h, 2, &mut self.v2)?;
        let (dv_out, dz_out) = out.split_at_mut(n);
        if self.scheme.runs_z() {
            derivative_into(v, self.h, 3, &mut self.v3)?;
            derivative_into(z, self.h, 1, &mut self.z1)?;
            derivative_into(z, self.h, 2, &mut self.z2)?;
        }
        let peak_dz = kernel.eval_nodes(&self.v2, &self.v3, z, &self.z1, &self.z2, dv_out, dz_out)?;
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::PositivityViolation(format!("non-finite flow at k = {k:e}")));
        }
        Ok(peak_dz)
    }
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn state_from(
    y: &[f64],
    grid: &SpatialGrid,
    runs_z: bool,
    k: f64,
    vacuum: f64,
) -> FlowState {
    let n = grid.n_points();
    let v = Field::new(y[..n].to_vec(), *grid).expect("finite accepted state");
    let z = if runs_z {
        Field::new(y[n..].to_vec(), *grid).expect("finite accepted state")
    } else {
        Field::constant(*grid, 1.0)
    };
    FlowState {
        k,
        v,
        z,
        vacuum_energy: vacuum,
    }
}

/// Half-width of the `Z` peak: half the length of the run of nodes around
/// the maximum where `Z` exceeds `1 + (max Z - 1) / 2`.
pub fn z_peak_half_width(z: &[f64], h: f64) -> Option<f64> {
    let (imax, zmax) = z
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    if !(zmax - 1.0 > PEAK_MIN_HEIGHT) {
        return None;
    }
    let level = 1.0 + 0.5 * (zmax - 1.0);
    let lo = (0..imax).rev().take_while(|&i| z[i] > level).count();
    let hi = (imax + 1..z.len()).take_while(|&i| z[i] > level).count();
    Some(0.5 * (lo + hi + 1) as f64 * h)
}

fn center_curvature(v: &[f64], h: f64) -> f64 {
    let c = v.len() / 2;
    let w = &v[c - 2..c + 3];
    (-w[0] + 16.0 * w[1] - 30.0 * w[2] + 16.0 * w[3] - w[4]) / (12.0 * h * h)
}

fn asymmetry(y: &[f64], n: usize) -> f64 {
    let field = |f: &[f64]| (0..n / 2).map(|i| (f[i] - f[n - 1 - i]).abs()).fold(0.0, f64::max);
    let v = &y[..n];
    let scale = 1.0 + v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut a = field(v);
    if y.len() > n {
        a = a.max(field(&y[n..]));
    }
    a / scale
}

/// Integrates `scheme` from the bare action at `k = cutoff` down to
/// `cfg.k_min`, stopping early once `V''(k,0)/Z(k,0)` has frozen.
///
/// `snapshot_ks` must be sorted in descending order; each entry is matched
/// with the accepted state closest to it in `ln k`.
pub fn integrate(
    params: &ModelParams,
    scheme: SchemeSpec,
    grid: &SpatialGrid,
    cfg: &SteppingConfig,
    snapshot_ks: &[f64],
) -> Result<FlowResult> {
    params.validate()?;
    scheme.validate()?;
    cfg.validate(params.cutoff)?;
    if grid.n_points() < 7 {
        return Err(Error::InvalidGrid("the flow needs at least 7 nodes".into()));
    }
    if snapshot_ks.iter().any(|k| !(*k > 0.0 && *k <= params.cutoff)) {
        return Err(Error::InvalidConfig(
            "snapshot scales must lie in (0, cutoff]".into(),
        ));
    }
    if snapshot_ks.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidConfig("snapshot scales must be sorted descending".into()));
    }

    let n = grid.n_points();
    let h = grid.spacing();
    let runs_z = scheme.runs_z();
    let dim = if runs_z { 2 * n } else { n };
    let tau_end = (params.cutoff / cfg.k_min).ln();
    let min_step = 1e-12 * tau_end;
    let k_of = |tau: f64| params.cutoff * (-tau).exp();

    let init = initialize(params, grid);
    let mut y = init.v.values().to_vec();
    if runs_z {
        y.extend_from_slice(init.z.values());
    }

    let mut rhs = FlowRhs::new(scheme, *params, grid);
    let mut stages = vec![vec![0.0; dim]; 7];
    let mut y_trial = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut err_vec = vec![0.0; dim];
    let mut curvature = vec![0.0; n];
    let mut diag = Diagnostics {
        smallest_step: f64::INFINITY,
        ..Diagnostics::default()
    };

    let snapshot_taus: Vec<f64> = snapshot_ks.iter().map(|k| (params.cutoff / k).ln()).collect();
    let mut snapshots: Vec<Option<FlowState>> = vec![None; snapshot_ks.len()];
    let mut next_snapshot = 0;
    while next_snapshot < snapshot_taus.len() && snapshot_taus[next_snapshot] <= 0.0 {
        snapshots[next_snapshot] = Some(init.clone());
        next_snapshot += 1;
    }

    let mut tau = 0.0;
    let ratio = |y: &[f64]| {
        let z0 = if runs_z { y[n + n / 2] } else { 1.0 };
        (center_curvature(&y[..n], h), z0)
    };
    let (v2_0, z_0) = ratio(&y);
    let mut history = vec![HistoryPoint {
        k: params.cutoff,
        v2_origin: v2_0,
        z_origin: z_0,
    }];

    let first = rhs.eval(tau, &y, &mut stages[0]);
    diag.rhs_evaluations += 1;
    if let Err(e) = first {
        return Err(Error::PositivityViolation(format!("bare action: {e}")));
    }
    curvature.copy_from_slice(&rhs.v2);

    let mut step = 1e-3_f64.min(tau_end);
    let mut last_rejected = false;
    let termination = loop {
        if tau >= tau_end * (1.0 - 1e-14) {
            break Termination::KMinReached;
        }
        if diag.accepted_steps >= cfg.max_steps {
            break Termination::StepLimit;
        }
        if step < min_step {
            diag.message = Some(format!(
                "step fell below {min_step:e} at k = {:e}",
                k_of(tau)
            ));
            break Termination::PositivityAbort;
        }
        step = step.min(tau_end - tau);

        // Stages 2..7; stage 1 is carried over from the last accepted step.
        let mut guard: Option<Error> = None;
        let mut stage_peak = 0.0_f64;
        for s in 1..7 {
            y_trial.copy_from_slice(&y);
            for (j, a) in A[s][..s].iter().enumerate() {
                if *a != 0.0 {
                    axpy(step * a, &stages[j], &mut y_trial);
                }
            }
            let tail = &mut stages[s..];
            match rhs.eval(tau + C[s] * step, &y_trial, &mut tail[0]) {
                Ok(p) => stage_peak = stage_peak.max(p),
                Err(e) => {
                    guard = Some(e);
                    break;
                }
            }
            diag.rhs_evaluations += 1;
            if s == 6 {
                y_new.copy_from_slice(&y_trial);
            }
        }
        if guard.is_none() && runs_z && y_new[n..].iter().any(|z| !(*z > 0.0)) {
            guard = Some(Error::PositivityViolation("Z <= 0".into()));
        }
        if let Some(e) = guard {
            diag.guard_rejections += 1;
            diag.message = Some(e.to_string());
            step *= 0.5;
            last_rejected = true;
            continue;
        }

        // Error estimate; V is measured in units of its curvature.
        err_vec.fill(0.0);
        for (j, c) in E.iter().enumerate() {
            if *c != 0.0 {
                axpy(step * c, &stages[j], &mut err_vec);
            }
        }
        let mut err = 0.0_f64;
        for i in 0..n {
            let scale = h * h * (cfg.abs_tol + cfg.rel_tol * curvature[i].abs());
            err = err.max(err_vec[i].abs() / scale);
        }
        for i in n..dim {
            let scale = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
            err = err.max(err_vec[i].abs() / scale);
        }
        if !err.is_finite() {
            diag.rejected_steps += 1;
            step *= 0.5;
            last_rejected = true;
            continue;
        }
        if err > 1.0 {
            diag.rejected_steps += 1;
            step *= (0.9 * err.powf(-0.2)).max(0.2);
            last_rejected = true;
            continue;
        }

        // Accept.
        let tau_new = tau + step;
        while next_snapshot < snapshot_taus.len() && snapshot_taus[next_snapshot] <= tau_new {
            let target = snapshot_taus[next_snapshot];
            let (src, t) = if (target - tau).abs() < (tau_new - target).abs() {
                (&y, tau)
            } else {
                (&y_new, tau_new)
            };
            let k = k_of(t);
            snapshots[next_snapshot] = Some(state_from(
                src,
                grid,
                runs_z,
                k,
                vacuum_energy(scheme, params, k),
            ));
            next_snapshot += 1;
        }

        let (r_old_v2, r_old_z) = ratio(&y);
        std::mem::swap(&mut y, &mut y_new);
        stages.swap(0, 6);
        curvature.copy_from_slice(&rhs.v2);
        let accepted = step;
        tau = tau_new;
        diag.accepted_steps += 1;
        diag.smallest_step = diag.smallest_step.min(accepted);
        diag.peak_dz = diag.peak_dz.max(stage_peak);

        let (v2_origin, z_origin) = ratio(&y);
        let k = k_of(tau);
        let last = *history.last().expect("history starts non-empty");
        let crossed = (v2_origin > 0.0) != (last.v2_origin > 0.0);
        if crossed && last.k > k_of(tau - accepted) * (1.0 + 1e-12) {
            history.push(HistoryPoint {
                k: k_of(tau - accepted),
                v2_origin: r_old_v2,
                z_origin: r_old_z,
            });
        }
        if crossed || (last.k / k).ln() >= HISTORY_SPACING {
            history.push(HistoryPoint {
                k,
                v2_origin,
                z_origin,
            });
        }

        if diag.accepted_steps % 64 == 0 {
            diag.max_asymmetry = diag.max_asymmetry.max(asymmetry(&y, n));
        }

        if runs_z && cfg.min_peak_width > 0.0 {
            if let Some(width) = z_peak_half_width(&y[n..], h) {
                if width < cfg.min_peak_width * h {
                    diag.z_peak_half_width = Some(width);
                    diag.message = Some(format!(
                        "Z peak half-width {width:.4} below {} grid spacings at k = {k:e}",
                        cfg.min_peak_width
                    ));
                    break Termination::ResolutionAbort;
                }
            }
        }

        // Plateau: relative change of V''/Z per unit ln k, once the scale
        // has dropped below the renormalized mass.
        let r_new = v2_origin / z_origin;
        let r_old = r_old_v2 / r_old_z;
        if v2_origin > 0.0 && k * k < r_new {
            let rate = (r_new - r_old).abs() / (r_new.abs() * accepted);
            if rate < cfg.plateau_tol {
                break Termination::PlateauReached;
            }
        }

        let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        step = if last_rejected { accepted * grow.min(1.0) } else { accepted * grow };
        step = step.min(MAX_STEP);
        last_rejected = false;
    };

    let k = k_of(tau);
    let final_state = state_from(&y, grid, runs_z, k, vacuum_energy(scheme, params, k));
    for s in snapshots.iter_mut().filter(|s| s.is_none()) {
        *s = Some(final_state.clone());
    }
    diag.max_asymmetry = diag.max_asymmetry.max(asymmetry(&y, n));
    if runs_z && diag.z_peak_half_width.is_none() {
        diag.z_peak_half_width = z_peak_half_width(final_state.z.values(), h);
    }
    if diag.smallest_step.is_infinite() {
        diag.smallest_step = 0.0;
    }

    let v2_origin = final_state.v2_origin();
    let z_origin = final_state.z_origin();
    let delta_e = if termination.is_success() {
        gap_from_flow(v2_origin, z_origin).ok()
    } else {
        None
    };

    Ok(FlowResult {
        scheme,
        final_state,
        v2_origin,
        z_origin,
        delta_e,
        termination,
        snapshots: snapshots.into_iter().map(|s| s.expect("filled above")).collect(),
        history,
        diagnostics: diag,
    })
}

/// One point of a regulator-index sweep; `m = None` is the `m -> infinity`
/// flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub m: Option<u32>,
    pub v2_origin: f64,
    pub z_origin: f64,
    pub termination: Termination,
}

impl SweepPoint {
    pub fn inverse_m(&self) -> f64 {
        self.m.map_or(0.0, |m| 1.0 / f64::from(m))
    }
}

/// Runs the finite-`m` flow for each entry of `m_list` and the `m -> infinity`
/// flow, which is returned last. Runs proceed in parallel.
pub fn sweep_m(
    params: &ModelParams,
    m_list: &[u32],
    grid: &SpatialGrid,
    cfg: &SteppingConfig,
) -> Result<Vec<SweepPoint>> {
    if let Some(bad) = m_list.iter().find(|m| **m == 0) {
        return Err(Error::SweepRun {
            m: Some(*bad),
            reason: "m must be at least 1".into(),
        });
    }
    let schemes: Vec<SchemeSpec> = m_list
        .iter()
        .map(|&m| SchemeSpec::ProperTimeFiniteM(m))
        .chain(std::iter::once(SchemeSpec::ProperTimeNLO))
        .collect();
    schemes
        .par_iter()
        .map(|&scheme| {
            let run = integrate(params, scheme, grid, cfg, &[]).map_err(|e| Error::SweepRun {
                m: scheme.m(),
                reason: e.to_string(),
            })?;
            if !run.termination.is_success() {
                return Err(Error::SweepRun {
                    m: scheme.m(),
                    reason: format!(
                        "{}{}",
                        run.termination,
                        run.diagnostics
                            .message
                            .as_deref()
                            .map(|m| format!(": {m}"))
                            .unwrap_or_default()
                    ),
                });
            }
            Ok(SweepPoint {
                m: scheme.m(),
                v2_origin: run.v2_origin,
                z_origin: run.z_origin,
                termination: run.termination,
            })
        })
        .collect()
}
