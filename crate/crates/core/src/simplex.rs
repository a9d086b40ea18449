// SPDX-License-Identifier: MIT OR Apache-2.0

//! Derivative-free Nelder–Mead minimization.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimplexStatus {
    Converged,
    MaxEvaluations,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub status: SimplexStatus,
}

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    /// Stop when `f_worst - f_best <= rel_tol * max(|f_best|, 1)`.
    pub rel_tol: f64,
    pub max_evals: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_evals: 500,
        }
    }
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` from `start` with initial edge lengths `steps`. Non-finite
/// values are treated as `+∞`. After the first convergence the search
/// restarts once from the best vertex; a restart that cannot improve
/// confirms the minimum.
pub fn minimize<F>(mut f: F, start: &[f64], steps: &[f64], opts: SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(start.len(), steps.len());
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut best = start.to_vec();
    let mut best_value = eval(&best, &mut evals);
    let mut restarts = 0;
    loop {
        let before = best_value;
        let (x, value, status) = run(&mut eval, &mut evals, &best, best_value, steps, opts);
        best = x;
        best_value = value;
        if status == SimplexStatus::MaxEvaluations {
            return SimplexResult {
                x: best,
                value: best_value,
                evaluations: evals,
                status,
            };
        }
        let improved = before - best_value > opts.rel_tol * best_value.abs().max(1.0);
        restarts += 1;
        if !improved || restarts > 3 {
            return SimplexResult {
                x: best,
                value: best_value,
                evaluations: evals,
                status: SimplexStatus::Converged,
            };
        }
    }
}

fn run<E>(
    eval: &mut E,
    evals: &mut usize,
    start: &[f64],
    start_value: f64,
    steps: &[f64],
    opts: SimplexOptions,
) -> (Vec<f64>, f64, SimplexStatus)
where
    E: FnMut(&[f64], &mut usize) -> f64,
{
    let dim = start.len();
    let mut vertices: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    vertices.push((start.to_vec(), start_value));
    for i in 0..dim {
        let mut x = start.to_vec();
        x[i] += steps[i];
        let v = eval(&x, evals);
        vertices.push((x, v));
    }

    loop {
        vertices.sort_by(|a, b| a.1.total_cmp(&b.1));
        let f_best = vertices[0].1;
        let f_worst = vertices[dim].1;
        if f_worst - f_best <= opts.rel_tol * f_best.abs().max(1.0) {
            return (vertices[0].0.clone(), f_best, SimplexStatus::Converged);
        }
        if *evals >= opts.max_evals {
            return (vertices[0].0.clone(), f_best, SimplexStatus::MaxEvaluations);
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|d| vertices[..dim].iter().map(|(x, _)| x[d]).sum::<f64>() / dim as f64)
            .collect();
        let towards = |coef: f64, worst: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(worst)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let worst = vertices[dim].0.clone();
        let reflected = towards(REFLECT, &worst);
        let f_reflected = eval(&reflected, evals);

        if f_reflected < f_best {
            let expanded = towards(EXPAND, &worst);
            let f_expanded = eval(&expanded, evals);
            vertices[dim] = if f_expanded < f_reflected {
                (expanded, f_expanded)
            } else {
                (reflected, f_reflected)
            };
            continue;
        }
        if f_reflected < vertices[dim - 1].1 {
            vertices[dim] = (reflected, f_reflected);
            continue;
        }

        let (contracted, f_contracted) = if f_reflected < f_worst {
            let x = towards(CONTRACT, &worst);
            let v = eval(&x, evals);
            (x, v)
        } else {
            let x = towards(-CONTRACT, &worst);
            let v = eval(&x, evals);
            (x, v)
        };
        if f_contracted < f_worst.min(f_reflected) {
            vertices[dim] = (contracted, f_contracted);
            continue;
        }

        let anchor = vertices[0].0.clone();
        for vertex in vertices.iter_mut().skip(1) {
            let x: Vec<f64> = anchor
                .iter()
                .zip(&vertex.0)
                .map(|(a, v)| a + SHRINK * (v - a))
                .collect();
            let v = eval(&x, evals);
            *vertex = (x, v);
        }
    }
}
