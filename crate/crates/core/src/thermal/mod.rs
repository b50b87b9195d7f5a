//! Lumped RC thermal network, one node per chiplet, in discrete
//! state-space form `T[k+1] = A·T[k] + B·P[k]` (with `T` measured relative
//! to ambient internally).

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::arch::Acg;
use crate::error::{read_to_string, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discretization {
    /// Zero-order-hold solution of the continuous network; stable for any dt.
    Exact,
    /// `A = I − dt·C⁻¹G`; only stable for small dt.
    ForwardEuler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalConfig {
    pub ambient_k: f64,
    /// Heat capacity per die area, J/(K·mm²).
    pub cap_per_mm2: f64,
    /// Vertical conductance to ambient per die area, W/(K·mm²).
    pub g_ambient_per_mm2: f64,
    /// Lateral conductance numerator, W·mm/K; a pair at distance d gets `g_lateral / d`.
    pub g_lateral: f64,
    pub lateral_radius_mm: f64,
    pub dt_s: f64,
    #[serde(default = "exact")]
    pub discretization: Discretization,
}

fn exact() -> Discretization {
    Discretization::Exact
}

impl Default for ThermalConfig {
    fn default() -> Self {
        ThermalConfig {
            ambient_k: 298.0,
            cap_per_mm2: 0.075,
            g_ambient_per_mm2: 0.025,
            g_lateral: 0.05,
            lateral_radius_mm: 4.0,
            dt_s: 0.1,
            discretization: Discretization::Exact,
        }
    }
}

impl ThermalConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cap_per_mm2", self.cap_per_mm2),
            ("g_ambient_per_mm2", self.g_ambient_per_mm2),
            ("dt_s", self.dt_s),
            ("ambient_k", self.ambient_k),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Thermal(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.g_lateral.is_finite() && self.g_lateral >= 0.0) || !(self.lateral_radius_mm >= 0.0) {
            return Err(Error::Thermal("g_lateral and lateral_radius_mm must be non-negative".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let cfg: ThermalConfig = toml::from_str(text).map_err(|e| Error::parse(origin, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_to_string(path)?, path)
    }
}

/// Heat capacities and the conductance matrix `G` of the continuous network
/// `C·dθ/dt = −G·θ + P`.
#[derive(Debug, Clone)]
pub struct RcNetwork {
    pub capacitance: Vec<f64>,
    pub conductance: DMatrix<f64>,
}

impl RcNetwork {
    pub fn from_acg(acg: &Acg, cfg: &ThermalConfig) -> Result<Self> {
        cfg.validate()?;
        let n = acg.len();
        let mut g = DMatrix::zeros(n, n);
        let mut capacitance = Vec::with_capacity(n);
        for c in acg.chiplets() {
            capacitance.push(cfg.cap_per_mm2 * c.area);
            g[(c.id, c.id)] += cfg.g_ambient_per_mm2 * c.area;
        }
        for a in acg.chiplets() {
            for b in acg.chiplets().iter().filter(|b| b.id > a.id) {
                let d = ((a.position.0 - b.position.0).powi(2) + (a.position.1 - b.position.1).powi(2)).sqrt();
                if d > 0.0 && d <= cfg.lateral_radius_mm && cfg.g_lateral > 0.0 {
                    let gij = cfg.g_lateral / d;
                    g[(a.id, a.id)] += gij;
                    g[(b.id, b.id)] += gij;
                    g[(a.id, b.id)] -= gij;
                    g[(b.id, a.id)] -= gij;
                }
            }
        }
        Ok(RcNetwork { capacitance, conductance: g })
    }
}

#[derive(Debug, Clone)]
pub struct ThermalModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    g: DMatrix<f64>,
    ambient: f64,
    dt: f64,
    spectral_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalState {
    pub temps: Vec<f64>,
}

impl ThermalState {
    pub fn ambient(n: usize, ambient: f64) -> Self {
        ThermalState { temps: vec![ambient; n] }
    }
}

pub fn build_thermal_model(acg: &Acg, cfg: &ThermalConfig) -> Result<ThermalModel> {
    let net = RcNetwork::from_acg(acg, cfg)?;
    ThermalModel::from_network(&net, cfg.ambient_k, cfg.dt_s, cfg.discretization)
}

impl ThermalModel {
    pub fn from_network(net: &RcNetwork, ambient: f64, dt: f64, disc: Discretization) -> Result<Self> {
        let n = net.capacitance.len();
        if net.capacitance.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::Thermal("node capacitances must be positive".into()));
        }
        let g = &net.conductance;
        let inv_sqrt_c = DVector::from_iterator(n, net.capacitance.iter().map(|c| 1.0 / c.sqrt()));
        let sqrt_c = DVector::from_iterator(n, net.capacitance.iter().map(|c| c.sqrt()));
        // symmetric similarity transform of C⁻¹G
        let m = DMatrix::from_fn(n, n, |i, j| inv_sqrt_c[i] * g[(i, j)] * inv_sqrt_c[j]);
        let eig = SymmetricEigen::new(m);
        let lambdas = &eig.eigenvalues;
        if lambdas.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Thermal("conductance network is not positive definite (node without path to ambient)".into()));
        }
        let q = &eig.eigenvectors;
        let (a, b, radius) = match disc {
            Discretization::Exact => {
                let decay = DVector::from_iterator(n, lambdas.iter().map(|l| (-l * dt).exp()));
                let gain = DVector::from_iterator(n, lambdas.iter().map(|l| -(-l * dt).exp_m1() / l));
                let core_a = q * DMatrix::from_diagonal(&decay) * q.transpose();
                let core_b = q * DMatrix::from_diagonal(&gain) * q.transpose();
                let a = DMatrix::from_fn(n, n, |i, j| inv_sqrt_c[i] * core_a[(i, j)] * sqrt_c[j]);
                let b = DMatrix::from_fn(n, n, |i, j| inv_sqrt_c[i] * core_b[(i, j)] * inv_sqrt_c[j]);
                (a, b, decay.max())
            }
            Discretization::ForwardEuler => {
                let a = DMatrix::from_fn(n, n, |i, j| {
                    let id = if i == j { 1.0 } else { 0.0 };
                    id - dt * g[(i, j)] / net.capacitance[i]
                });
                let b = DMatrix::from_diagonal(&DVector::from_iterator(n, net.capacitance.iter().map(|c| dt / c)));
                let radius = lambdas.iter().map(|l| (1.0 - dt * l).abs()).fold(0.0, f64::max);
                (a, b, radius)
            }
        };
        if !(radius < 1.0) {
            return Err(Error::Thermal(format!(
                "discretization with dt = {dt} s is unstable (spectral radius {radius:.4} >= 1)"
            )));
        }
        Ok(ThermalModel { a, b, g: g.clone(), ambient, dt, spectral_radius: radius })
    }

    pub fn len(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn ambient(&self) -> f64 {
        self.ambient
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    pub fn state_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn input_matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Temperatures reached under constant `power` as t → ∞.
    pub fn steady_state(&self, power: &[f64]) -> Result<Vec<f64>> {
        self.check_len(power.len())?;
        let p = DVector::from_column_slice(power);
        let theta = self
            .g
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Thermal("conductance matrix is singular".into()))?
            .solve(&p);
        Ok(theta.iter().map(|t| t + self.ambient).collect())
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(Error::Thermal(format!("expected {} entries, got {got}", self.len())));
        }
        Ok(())
    }

    /// Upper bound on how far a node can rise above `t_max[i]` within one
    /// interval, when it starts exactly at `t_max[i]`, every other node sits
    /// at the hottest finite threshold, and every node draws `peak_power`.
    pub fn overshoot_bound(&self, t_max: &[f64], peak_power: &[f64]) -> Result<Vec<f64>> {
        self.check_len(t_max.len())?;
        self.check_len(peak_power.len())?;
        let hottest = t_max.iter().copied().filter(|t| t.is_finite()).fold(self.ambient, f64::max);
        let bp = &self.b * DVector::from_column_slice(peak_power);
        let bound = (0..self.len())
            .map(|i| {
                if !t_max[i].is_finite() {
                    return 0.0;
                }
                let start_i = t_max[i] - self.ambient;
                let rest = hottest - self.ambient;
                let next: f64 =
                    (0..self.len()).map(|j| self.a[(i, j)] * if j == i { start_i } else { rest }).sum::<f64>() + bp[i];
                (next - start_i).max(0.0)
            })
            .collect();
        Ok(bound)
    }
}

/// One control-interval update under per-node power `power` (W).
pub fn thermal_step(model: &ThermalModel, state: &ThermalState, power: &[f64]) -> Result<ThermalState> {
    model.check_len(state.temps.len())?;
    model.check_len(power.len())?;
    if power.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::Thermal("power entries must be finite and non-negative".into()));
    }
    let theta = DVector::from_iterator(state.temps.len(), state.temps.iter().map(|t| t - model.ambient));
    let next = &model.a * theta + &model.b * DVector::from_column_slice(power);
    Ok(ThermalState { temps: next.iter().map(|t| t + model.ambient).collect() })
}

/// Copies temperatures into the ACG and applies the threshold rule
/// `throttled ⇔ T ≥ t_max`. Returns the throttled chiplet ids.
pub fn throttle_update(acg: &mut Acg, state: &ThermalState) -> Vec<usize> {
    let mut throttled = Vec::new();
    for (id, &t) in state.temps.iter().enumerate() {
        acg.set_temperature(id, t);
        let hot = !acg.chiplet(id).is_io() && t >= acg.chiplet(id).t_max;
        acg.set_throttled(id, hot);
        if hot {
            throttled.push(id);
        }
    }
    throttled
}
