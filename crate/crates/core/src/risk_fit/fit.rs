use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::optim::{nelder_mead, GradientConfig, Method, Minimum, OptimizerConfig};
use crate::distributions::{crps_gaussian, GaussianLS};
use crate::error::{input, Error, Result};
use crate::models::{
    drn_grad, drn_predict, scale_link, softplus_inv, Activation, DrnParams, EmosParams, FittedModel,
    ParamBox,
};
use crate::pipeline::Dataset;
use crate::rng;

/// Default half-width of the parameter box around the moment initializer.
pub const DEFAULT_BOX_HALF_WIDTH: f64 = 50.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelParams {
    Emos(EmosParams),
    Drn(DrnParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ModelParams,
    pub param_box: ParamBox,
    /// Training risk at the returned parameters.
    pub risk: f64,
    /// Training risk at the moment-based starting point.
    pub initial_risk: f64,
    /// Best risk so far after each iteration of the winning start.
    pub trace: Vec<f64>,
    pub evaluations: usize,
    pub converged: bool,
    pub seed: u64,
}

impl FitResult {
    pub fn model(&self) -> FittedModel {
        match &self.params {
            ModelParams::Emos(p) => FittedModel::Emos(p.clone()),
            ModelParams::Drn(p) => FittedModel::Drn(p.clone()),
        }
    }

    pub fn theta(&self) -> Vec<f64> {
        match &self.params {
            ModelParams::Emos(p) => p.to_vec(),
            ModelParams::Drn(p) => p.to_vec(),
        }
    }
}

const START_STREAM: u64 = 0xF17;

fn response_moments(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Scale intercept that reproduces variance `var` (floored so the link stays finite).
fn scale_intercept(var: f64) -> f64 {
    softplus_inv(var.max(1e-12))
}

fn gaussian_score(m: f64, sigma: f64, y: f64) -> f64 {
    GaussianLS::new(m, sigma).map_or(f64::INFINITY, |g| crps_gaussian(&g, y))
}

fn emos_risk(theta: &[f64], data: &Dataset) -> f64 {
    let d = data.d();
    let (a, b) = (theta[0], &theta[1..=d]);
    let (a2, b2) = (theta[d + 1], &theta[d + 2..]);
    let total: f64 = data
        .rows()
        .zip(data.y())
        .map(|(x, y)| {
            let m = a + b.iter().zip(x).map(|(u, v)| u * v).sum::<f64>();
            let u = a2 + b2.iter().zip(x).map(|(u, v)| u * v).sum::<f64>();
            gaussian_score(m, scale_link(u).0, *y)
        })
        .sum();
    total / data.n() as f64
}

fn resolve_box(given: Option<&ParamBox>, center: &[f64]) -> Result<ParamBox> {
    match given {
        Some(b) if b.dim() != center.len() => Err(Error::Config(format!(
            "parameter box has {} coordinates, model has {}",
            b.dim(),
            center.len()
        ))),
        Some(b) => Ok(b.clone()),
        None => ParamBox::around(center, DEFAULT_BOX_HALF_WIDTH),
    }
}

fn nm_steps(b: &ParamBox, fraction: f64) -> Vec<f64> {
    b.widths().iter().map(|w| fraction * w).collect()
}

/// Minimum-CRPS fit of an EMOS model within `param_box` (default: half-width
/// 50 around the moment-matched initializer).
pub fn fit_emos(
    train: &Dataset,
    param_box: Option<&ParamBox>,
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<FitResult> {
    let d = train.d();
    let k = 2 * (1 + d);
    if train.n() < k {
        return input(format!("{} training points for {k} parameters", train.n()));
    }
    let (mean, var) = response_moments(train.y());
    let mut init = EmosParams::zeros(d);
    init.alpha = mean;
    init.alpha_scale = scale_intercept(var);
    let init = init.to_vec();
    let bx = resolve_box(param_box, &init)?;

    let mut starts = vec![init.clone()];
    let mut r = rng::stream(seed, &[START_STREAM]);
    starts.extend((1..opt.starts.max(1)).map(|_| bx.sample(&mut r)));

    let risk = |t: &[f64]| emos_risk(t, train);
    let mut proj_init = init;
    bx.project(&mut proj_init);
    let initial_risk = risk(&proj_init);
    let method = opt.method.unwrap_or(Method::NelderMead);
    let steps = nm_steps(&bx, opt.nelder_mead.initial_step);
    let runs: Vec<Minimum> = starts
        .iter()
        .map(|s| match method {
            Method::NelderMead => nelder_mead(risk, s, &steps, Some(&bx), &opt.nelder_mead),
            Method::GradientDescent => {
                let grad = |t: &[f64], x: &[f64], y: f64| {
                    let p = EmosParams::from_vec(t, d)?;
                    crate::models::emos_grad(&p, x, y).map(|g| g.0)
                };
                gradient_descent(train, s, &bx, &opt.gradient, risk, grad, &mut r)
            }
        })
        .collect();
    let evaluations = runs.iter().map(|m| m.evaluations).sum();
    let best = pick_best(runs);
    Ok(FitResult {
        params: ModelParams::Emos(EmosParams::from_vec(&best.x, d)?),
        param_box: bx,
        risk: best.value,
        initial_risk,
        trace: best.trace,
        evaluations,
        converged: best.converged,
        seed,
    })
}

fn pick_best(runs: Vec<Minimum>) -> Minimum {
    runs.into_iter()
        .reduce(|a, b| if b.value < a.value { b } else { a })
        .expect("at least one start")
}

/// Projected mini-batch gradient descent; the step halves whenever the full
/// training risk has not improved for `patience` epochs.
fn gradient_descent<R, G>(
    train: &Dataset,
    start: &[f64],
    bx: &ParamBox,
    cfg: &GradientConfig,
    risk: R,
    grad: G,
    r: &mut rng::StreamRng,
) -> Minimum
where
    R: Fn(&[f64]) -> f64,
    G: Fn(&[f64], &[f64], f64) -> Result<Vec<f64>>,
{
    let mut theta = start.to_vec();
    bx.project(&mut theta);
    let mut best = risk(&theta);
    let mut best_theta = theta.clone();
    let mut trace = vec![best];
    let mut step = cfg.step;
    let mut evaluations = 1;
    let mut order: Vec<usize> = (0..train.n()).collect();
    let batch = cfg.batch_size.max(1);
    let mut acc = vec![0.0; theta.len()];
    let mut idle = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(r);
        for chunk in order.chunks(batch) {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for &i in chunk {
                if let Ok(g) = grad(&theta, train.row(i), train.y()[i]) {
                    for (a, gi) in acc.iter_mut().zip(g) {
                        *a += gi;
                    }
                }
            }
            let scale = step / chunk.len() as f64;
            for (t, a) in theta.iter_mut().zip(&acc) {
                *t -= scale * a;
            }
            bx.project(&mut theta);
        }
        let current = risk(&theta);
        evaluations += 1;
        if current < best {
            best = current;
            best_theta.clone_from(&theta);
            idle = 0;
        } else {
            idle += 1;
            if idle >= cfg.patience.max(1) {
                step *= 0.5;
                idle = 0;
            }
        }
        trace.push(best);
        if step < cfg.min_step {
            break;
        }
    }
    Minimum {
        x: best_theta,
        value: best,
        evaluations,
        converged: best.is_finite(),
        trace,
    }
}

fn drn_risk(theta: &[f64], data: &Dataset, hidden: usize, activation: Activation) -> f64 {
    let Ok(p) = DrnParams::from_vec(theta, data.d(), hidden, activation) else {
        return f64::INFINITY;
    };
    let total: f64 = data
        .rows()
        .zip(data.y())
        .map(|(x, y)| drn_predict(&p, x).map_or(f64::INFINITY, |g| crps_gaussian(&g, *y)))
        .sum();
    total / data.n() as f64
}

/// Hidden widths up to this size also get a Nelder-Mead polish after
/// gradient descent.
pub const DRN_SIMPLEX_MAX_HIDDEN: usize = 2;

/// Minimum-CRPS fit of a one-hidden-layer DRN.
pub fn fit_drn(
    train: &Dataset,
    hidden: usize,
    activation: Activation,
    param_box: Option<&ParamBox>,
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<FitResult> {
    let d = train.d();
    let k = DrnParams::count(d, hidden);
    if train.n() < k {
        return input(format!("{} training points for {k} parameters", train.n()));
    }
    let (mean, var) = response_moments(train.y());
    let alpha_scale = scale_intercept(var);
    // Output layer starts at the moment fit; hidden weights are random.
    let draw = |r: &mut rng::StreamRng| {
        let mut p = DrnParams::zeros(d, hidden, activation);
        p.alpha = mean;
        p.alpha_scale = alpha_scale;
        let out = 0.5 / (hidden.max(1) as f64).sqrt();
        for v in p.beta.iter_mut().chain(p.beta_scale.iter_mut()) {
            *v = r.random_range(-out..=out);
        }
        for v in p.gamma.iter_mut().chain(p.delta.iter_mut()) {
            *v = r.random_range(-2.0..=2.0);
        }
        p.to_vec()
    };
    let mut r = rng::stream(seed, &[START_STREAM]);
    let starts: Vec<Vec<f64>> = (0..opt.starts.max(1)).map(|_| draw(&mut r)).collect();
    let bx = resolve_box(param_box, &starts[0])?;

    let risk = |t: &[f64]| drn_risk(t, train, hidden, activation);
    let grad = |t: &[f64], x: &[f64], y: f64| {
        let p = DrnParams::from_vec(t, d, hidden, activation)?;
        drn_grad(&p, x, y).map(|g| g.0)
    };
    let mut first = starts[0].clone();
    bx.project(&mut first);
    let initial_risk = risk(&first);
    let method = opt.method.unwrap_or(Method::GradientDescent);
    let steps = nm_steps(&bx, opt.nelder_mead.initial_step);
    let mut evaluations = 0;
    let mut runs = Vec::with_capacity(starts.len());
    for s in &starts {
        let run = match method {
            Method::NelderMead => nelder_mead(risk, s, &steps, Some(&bx), &opt.nelder_mead),
            Method::GradientDescent => {
                let gd = gradient_descent(train, s, &bx, &opt.gradient, risk, grad, &mut r);
                if hidden <= DRN_SIMPLEX_MAX_HIDDEN {
                    evaluations += gd.evaluations;
                    let nm = nelder_mead(risk, &gd.x, &steps, Some(&bx), &opt.nelder_mead);
                    if nm.value < gd.value {
                        let mut trace = gd.trace;
                        trace.extend(nm.trace.iter().map(|v| v.min(gd.value)));
                        Minimum { trace, ..nm }
                    } else {
                        Minimum { evaluations: nm.evaluations, ..gd }
                    }
                } else {
                    gd
                }
            }
        };
        evaluations += run.evaluations;
        runs.push(run);
    }
    let best = pick_best(runs);
    Ok(FitResult {
        params: ModelParams::Drn(DrnParams::from_vec(&best.x, d, hidden, activation)?),
        param_box: bx,
        risk: best.value,
        initial_risk,
        trace: best.trace,
        evaluations,
        converged: best.converged,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::emos_predict;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    fn linear_data(n: usize, seed: u64) -> Dataset {
        let mut r = rng::stream(seed, &[]);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random::<f64>()]).collect();
        let y = rows
            .iter()
            .map(|x| { let e: f64 = StandardNormal.sample(&mut r); 2.0 + 3.0 * x[0] + e })
            .collect();
        Dataset::new(rows, y).unwrap()
    }

    #[test]
    fn recovers_homoscedastic_line() {
        let data = linear_data(2000, 9);
        let fit = fit_emos(&data, None, &OptimizerConfig::default(), 1).unwrap();
        let ModelParams::Emos(p) = &fit.params else { unreachable!() };
        assert!((p.alpha - 2.0).abs() < 0.15, "{p:?}");
        assert!((p.beta[0] - 3.0).abs() < 0.15, "{p:?}");
        for x in [0.0, 0.5, 1.0] {
            let s = emos_predict(p, &[x]).unwrap().sigma();
            assert!((s - 1.0).abs() < 0.15, "{s}");
        }
        assert!(fit.risk <= fit.initial_risk);
        assert!(fit.param_box.contains(&fit.theta()));
        assert!(fit.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn constant_response_is_fit_exactly() {
        let data = Dataset::new((0..20).map(|i| vec![i as f64 / 20.0]).collect(), vec![4.0; 20]).unwrap();
        let fit = fit_emos(&data, None, &OptimizerConfig::default(), 2).unwrap();
        assert!(fit.risk < 1e-5, "{}", fit.risk);
        let m = emos_predict(&match fit.params {
            ModelParams::Emos(p) => p,
            _ => unreachable!(),
        }, &[0.3])
        .unwrap()
        .m();
        assert!((m - 4.0).abs() < 1e-4);
    }

    #[test]
    fn point_box_returns_the_point() {
        let data = linear_data(50, 3);
        let theta = [1.0, 2.0, 0.5, -0.5];
        let bx = ParamBox::point(&theta).unwrap();
        let fit = fit_emos(&data, Some(&bx), &OptimizerConfig::default(), 0).unwrap();
        assert_eq!(fit.theta(), theta.to_vec());
        assert!((fit.risk - emos_risk(&theta, &data)).abs() < 1e-15);
    }

    #[test]
    fn too_few_points() {
        let data = linear_data(3, 1);
        assert!(fit_emos(&data, None, &OptimizerConfig::default(), 0).is_err());
    }

    #[test]
    fn zero_hidden_width_matches_emos() {
        let data = linear_data(300, 4).without_covariates();
        let opt = OptimizerConfig::default();
        let e = fit_emos(&data, None, &opt, 5).unwrap();
        let n = fit_drn(&data, 0, Activation::Tanh, None, &opt, 5).unwrap();
        let (te, tn) = (e.theta(), n.theta());
        assert!((te[0] - tn[0]).abs() < 1e-3 && (te[1] - tn[1]).abs() < 1e-3, "{te:?} {tn:?}");
        assert!((e.risk - n.risk).abs() < 1e-6);
    }
}
