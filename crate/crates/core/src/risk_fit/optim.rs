//! Derivative-free and first-order minimizers used for risk minimization.

use serde::{Deserialize, Serialize};

use crate::models::ParamBox;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NelderMeadConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Initial simplex edge as a fraction of the box width.
    pub initial_step: f64,
    /// Stop once the spread of simplex values falls below this.
    pub f_tol: f64,
    /// Evaluation budget per free parameter.
    pub max_evals_per_param: usize,
    /// Give up (unconverged) after this many evaluations per free parameter
    /// without an improvement larger than `stall_tol`.
    pub stall_evals_per_param: usize,
    pub stall_tol: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        NelderMeadConfig {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            initial_step: 0.1,
            f_tol: 1e-9,
            max_evals_per_param: 2000,
            stall_evals_per_param: 50,
            stall_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Best value after each iteration.
    pub trace: Vec<f64>,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Nelder-Mead simplex search from `x0` with per-coordinate initial edges
/// `steps`. With `bounds`, every trial point is clamped into the box.
/// Coordinates with a zero step are held fixed.
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    bounds: Option<&ParamBox>,
    cfg: &NelderMeadConfig,
) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let mut base = x0.to_vec();
    if let Some(b) = bounds {
        b.project(&mut base);
    }
    let free: Vec<usize> = (0..base.len()).filter(|&i| steps[i] > 0.0).collect();
    let k = free.len();
    let mut evaluations = 0usize;
    let mut eval = |z: &[f64], evaluations: &mut usize| -> (Vec<f64>, f64) {
        let mut full = base.clone();
        for (slot, &i) in free.iter().enumerate() {
            full[i] = z[slot];
        }
        if let Some(b) = bounds {
            b.project(&mut full);
        }
        let z: Vec<f64> = free.iter().map(|&i| full[i]).collect();
        *evaluations += 1;
        (z, sanitize(f(&full)))
    };
    let expand = |z: &[f64]| {
        let mut full = base.clone();
        for (slot, &i) in free.iter().enumerate() {
            full[i] = z[slot];
        }
        full
    };

    let start: Vec<f64> = free.iter().map(|&i| base[i]).collect();
    let (start, f0) = eval(&start, &mut evaluations);
    if k == 0 {
        return Minimum {
            x: expand(&start),
            value: f0,
            evaluations,
            converged: true,
            trace: vec![f0],
        };
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(start.clone(), f0)];
    for (slot, &i) in free.iter().enumerate() {
        let mut z = start.clone();
        z[slot] += steps[i];
        let (mut z, mut fz) = eval(&z, &mut evaluations);
        if z == start {
            let mut w = start.clone();
            w[slot] -= steps[i];
            (z, fz) = eval(&w, &mut evaluations);
        }
        simplex.push((z, fz));
    }

    let max_evals = cfg.max_evals_per_param * k;
    let stall_window = cfg.stall_evals_per_param * k;
    let mut best = simplex.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let mut last_improvement = evaluations;
    let mut trace = vec![best];
    let mut converged = false;

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[k].1 - simplex[0].1;
        if spread < cfg.f_tol || (simplex[k].1.is_infinite() && simplex[0].1.is_infinite()) {
            converged = spread < cfg.f_tol;
            break;
        }
        if evaluations >= max_evals || evaluations - last_improvement >= stall_window {
            break;
        }

        let mut centroid = vec![0.0; k];
        for (z, _) in &simplex[..k] {
            for (c, v) in centroid.iter_mut().zip(z) {
                *c += v / k as f64;
            }
        }
        let towards = |t: f64, from: &[f64]| -> Vec<f64> {
            centroid.iter().zip(from).map(|(c, w)| c + t * (c - w)).collect()
        };
        let worst = simplex[k].0.clone();
        let f_worst = simplex[k].1;
        let f_second = simplex[k - 1].1;

        let (xr, fr) = eval(&towards(cfg.reflection, &worst), &mut evaluations);
        if fr < simplex[0].1 {
            let (xe, fe) = eval(&towards(cfg.reflection * cfg.expansion, &worst), &mut evaluations);
            simplex[k] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < f_second {
            simplex[k] = (xr, fr);
        } else {
            let (xc, fc) = if fr < f_worst {
                eval(&towards(cfg.reflection * cfg.contraction, &worst), &mut evaluations)
            } else {
                eval(&towards(-cfg.contraction, &worst), &mut evaluations)
            };
            if fc < fr.min(f_worst) {
                simplex[k] = (xc, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    let z: Vec<f64> = anchor
                        .iter()
                        .zip(&s.0)
                        .map(|(a, v)| a + cfg.shrink * (v - a))
                        .collect();
                    *s = eval(&z, &mut evaluations);
                }
            }
        }

        let current = simplex.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        if current < best - cfg.stall_tol {
            last_improvement = evaluations;
        }
        best = best.min(current);
        trace.push(best);
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Minimum {
        x: expand(&simplex[0].0),
        value: simplex[0].1,
        evaluations,
        converged,
        trace,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradientConfig {
    pub batch_size: usize,
    pub step: f64,
    pub epochs: usize,
    /// Epochs without improvement that count as a plateau.
    pub patience: usize,
    /// Stop early once halving has pushed the step below this.
    pub min_step: f64,
}

impl Default for GradientConfig {
    fn default() -> Self {
        GradientConfig {
            batch_size: 32,
            step: 1e-2,
            epochs: 200,
            patience: 5,
            min_step: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    NelderMead,
    GradientDescent,
}

/// Optimizer settings for risk minimization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// `None` picks Nelder-Mead for EMOS and gradient descent for DRN.
    pub method: Option<Method>,
    pub starts: usize,
    pub nelder_mead: NelderMeadConfig,
    pub gradient: GradientConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            method: None,
            starts: 5,
            nelder_mead: NelderMeadConfig::default(),
            gradient: GradientConfig::default(),
        }
    }
}
