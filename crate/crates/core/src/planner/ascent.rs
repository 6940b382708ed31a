//! Projected gradient ascent on a box with Armijo backtracking.

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 30;
const STALL_WINDOW: usize = 10;
const STALL_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct AscentStats {
    pub value: f64,
    pub iterations: usize,
}

/// Maximizes `f` over `[-bound, bound]^n` starting from `x` (projected first).
/// `f(x, grad)` returns the value and writes the gradient.
pub(crate) fn maximize(
    x: &mut Vec<f64>,
    bound: f64,
    max_iters: usize,
    mut f: impl FnMut(&[f64], &mut [f64]) -> f64,
) -> AscentStats {
    for v in x.iter_mut() {
        *v = v.clamp(-bound, bound);
    }
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut value = f(x, &mut g);
    if n == 0 {
        return AscentStats { value, iterations: 0 };
    }
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut step = 1.0;
    let mut history = Vec::with_capacity(max_iters + 1);
    history.push(value);
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let mut slope = 0.0;
            let mut moved = 0.0f64;
            for i in 0..n {
                trial[i] = (x[i] + step * g[i]).clamp(-bound, bound);
                let d = trial[i] - x[i];
                slope += g[i] * d;
                moved = moved.max(d.abs());
            }
            if moved < 1e-12 {
                // projected gradient vanished
                return AscentStats { value, iterations };
            }
            let v = f(&trial, &mut g_trial);
            if v >= value + ARMIJO_C * slope {
                std::mem::swap(x, &mut trial);
                std::mem::swap(&mut g, &mut g_trial);
                value = v;
                step = (step * 2.0).min(1e4);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        history.push(value);
        if history.len() > STALL_WINDOW && value - history[history.len() - 1 - STALL_WINDOW] < STALL_TOL {
            break;
        }
    }
    AscentStats { value, iterations }
}
