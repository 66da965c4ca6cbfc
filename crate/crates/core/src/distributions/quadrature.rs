//! Adaptive Simpson integration over piecewise-smooth integrands.
//!
//! Integrands here are functionals of cdfs: smooth between atoms, possibly
//! discontinuous at atoms and at the observation. Callers pass the sorted
//! breakpoints; each piece is integrated separately. When no continuous
//! component is involved the integrand is constant on every piece and the
//! integral is evaluated exactly at piece midpoints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Absolute tolerance for the whole integral.
    pub abs_tol: f64,
    /// Gaussian tails are clipped this many standard deviations away from the location.
    pub tail_sigmas: f64,
    /// Maximum bisection depth of the adaptive recursion.
    pub max_depth: u32,
    /// Equal panels each smooth piece is cut into before adapting.
    pub initial_panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tol: 1e-9,
            tail_sigmas: 10.0,
            max_depth: 40,
            initial_panels: 16,
        }
    }
}

/// Integrates `f` over `[breaks[0], breaks[last]]`, splitting at every break.
///
/// `breaks` must be sorted. If `smooth` is false, `f` is assumed constant on
/// each open piece.
pub fn integrate_pieces<F>(breaks: &[f64], smooth: bool, cfg: &QuadratureConfig, f: F) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if breaks.len() < 2 {
        return Ok(0.0);
    }
    let total = breaks[breaks.len() - 1] - breaks[0];
    if total <= 0.0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    let mut converged = true;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        if !smooth {
            sum += f(0.5 * (a + b)) * (b - a);
            continue;
        }
        // Left limit at the right end of the piece: the integrand may jump there.
        let inner = |x: f64| if x >= b { f(b.next_down()) } else { f(x) };
        let panels = cfg.initial_panels.max(1);
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + h * p as f64;
            let hi = if p + 1 == panels { b } else { lo + h };
            let tol = cfg.abs_tol * (hi - lo) / total;
            let (v, ok) = adaptive_simpson(&inner, lo, hi, tol, cfg.max_depth);
            sum += v;
            converged &= ok;
        }
    }
    if converged {
        Ok(sum)
    } else {
        Err(Error::Numerical {
            message: format!(
                "adaptive Simpson hit depth {} before reaching tolerance {}",
                cfg.max_depth, cfg.abs_tol
            ),
            estimate: sum,
        })
    }
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> (f64, bool) {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> (f64, bool) {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // Below this the Simpson difference is dominated by rounding in f.
    let noise = 16.0 * f64::EPSILON * (b - a) * fa.abs().max(fm.abs()).max(fb.abs()).max(flm.abs()).max(frm.abs());
    if delta.abs() <= 15.0 * tol.max(noise) {
        return (left + right + delta / 15.0, true);
    }
    if depth == 0 || m <= a || m >= b {
        return (left + right + delta / 15.0, false);
    }
    let (l, okl) = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
    let (r, okr) = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    (l + r, okl && okr)
}
