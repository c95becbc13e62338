//! Shared test oracles, independent of the library implementation paths
//! they check: a fine-step ODE integrator for the magnetization dynamics,
//! dense DFT matrices for the sampling operator, and a brute-force
//! cone-distance scan for the projection.

#![allow(dead_code)]

use num_complex::Complex64;

use blip_mri::bloch::{BlochDictionary, ExcitationSequence, TissueParams};
use blip_mri::types::GridDims;

const TWO_PI: f64 = std::f64::consts::TAU;

/// Classical RK4 integration of the magnetization ODE
/// `mx' = -mx/T2 - w*my, my' = w*mx - my/T2, mz' = (1 - mz)/T1`
/// with `w = 2*pi*df` (converted to per-millisecond), over `duration_ms`
/// using steps no longer than `max_step_ms`.
fn rk4_evolve(m: [f64; 3], theta: &TissueParams, duration_ms: f64, max_step_ms: f64) -> [f64; 3] {
    if duration_ms == 0.0 {
        return m;
    }
    let steps = (duration_ms / max_step_ms).ceil() as usize;
    let h = duration_ms / steps as f64;
    let w = TWO_PI * theta.df * 1e-3;
    let f = |m: [f64; 3]| -> [f64; 3] {
        [
            -m[0] / theta.t2 - w * m[1],
            w * m[0] - m[1] / theta.t2,
            (1.0 - m[2]) / theta.t1,
        ]
    };
    let mut m = m;
    for _ in 0..steps {
        let k1 = f(m);
        let k2 = f([
            m[0] + 0.5 * h * k1[0],
            m[1] + 0.5 * h * k1[1],
            m[2] + 0.5 * h * k1[2],
        ]);
        let k3 = f([
            m[0] + 0.5 * h * k2[0],
            m[1] + 0.5 * h * k2[1],
            m[2] + 0.5 * h * k2[2],
        ]);
        let k4 = f([m[0] + h * k3[0], m[1] + h * k3[1], m[2] + h * k3[2]]);
        for i in 0..3 {
            m[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    m
}

/// Rotation by `alpha` about the x-axis applied to a 3-vector.
fn rotate_x(m: [f64; 3], alpha: f64) -> [f64; 3] {
    let (s, c) = alpha.sin_cos();
    [m[0], m[1] * c - m[2] * s, m[1] * s + m[2] * c]
}

/// Fine-step ODE reference for the readout sequence: ideal inversion, pulse
/// rotation about x, echo read at TE = TR/2, free evolution over each
/// repetition interval.
pub fn ode_response(
    theta: &TissueParams,
    excitation: &ExcitationSequence,
    max_step_ms: f64,
) -> Vec<Complex64> {
    let mut m = [0.0, 0.0, -1.0];
    let mut out = Vec::with_capacity(excitation.len());
    for t in 0..excitation.len() {
        let tr = excitation.rep_times[t];
        let te = 0.5 * tr;
        m = rotate_x(m, excitation.flip_angles[t]);
        let at_echo = rk4_evolve(m, theta, te, max_step_ms);
        out.push(Complex64::new(at_echo[0], at_echo[1]));
        m = rk4_evolve(at_echo, theta, tr - te, max_step_ms);
    }
    out
}

/// Unitary DFT matrix of size `n`, `W[k][x] = exp(-2*pi*i*k*x/n)/sqrt(n)`.
pub fn dft_matrix(n: usize) -> Vec<Vec<Complex64>> {
    (0..n)
        .map(|k| {
            (0..n)
                .map(|x| {
                    Complex64::from_polar(
                        1.0 / (n as f64).sqrt(),
                        -TWO_PI * (k as f64) * (x as f64) / n as f64,
                    )
                })
                .collect()
        })
        .collect()
}

/// Dense matrix of the per-frame observation map for a 1-D grid: rows of
/// the unitary DFT selected by `k = shift + j*p`.
pub fn dense_observation_1d(n: usize, p: usize, shift: usize) -> Vec<Vec<Complex64>> {
    let w = dft_matrix(n);
    (0..n / p).map(|j| w[shift + j * p].clone()).collect()
}

/// Dense matrix of the per-frame observation map for a 2-D grid with the
/// row axis decimated: kept k-space rows `kr = shift + j*p`, all columns of
/// each, enumerated row-major. Input index is `r*cols + c`.
pub fn dense_observation_2d_rows(
    rows: usize,
    cols: usize,
    p: usize,
    shift: usize,
) -> Vec<Vec<Complex64>> {
    let scale = 1.0 / ((rows * cols) as f64).sqrt();
    let mut out = Vec::with_capacity(rows / p * cols);
    for j in 0..rows / p {
        let kr = shift + j * p;
        for kc in 0..cols {
            let mut row = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for c in 0..cols {
                    let phase = -TWO_PI
                        * ((kr * r) as f64 / rows as f64 + (kc * c) as f64 / cols as f64);
                    row.push(Complex64::from_polar(scale, phase));
                }
            }
            out.push(row);
        }
    }
    out
}

pub fn mat_vec(m: &[Vec<Complex64>], v: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Adjoint (conjugate transpose) application of a dense matrix.
pub fn mat_vec_adjoint(m: &[Vec<Complex64>], v: &[Complex64]) -> Vec<Complex64> {
    let cols = m[0].len();
    let mut out = vec![Complex64::ZERO; cols];
    for (row, &vi) in m.iter().zip(v) {
        for (o, a) in out.iter_mut().zip(row) {
            *o += a.conj() * vi;
        }
    }
    out
}

/// Brute-force projection onto the dictionary cone by explicit distance
/// minimization: for every atom, the best nonnegative scale and the
/// resulting squared distance; the winner is the smallest distance with
/// ties to the lowest index.
pub fn brute_force_cone_projection(x: &[Complex64], dict: &BlochDictionary) -> (usize, f64) {
    let mut best_k = 0usize;
    let mut best_dist = f64::INFINITY;
    let mut best_rho = 0.0f64;
    let x_nsq: f64 = x.iter().map(|z| z.norm_sqr()).sum();
    for k in 0..dict.num_atoms() {
        let atom = dict.atom(k);
        let re: f64 = atom
            .iter()
            .zip(x)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum();
        let nsq: f64 = atom.iter().map(|z| z.norm_sqr()).sum();
        let rho = (re / nsq).max(0.0);
        let dist = x_nsq - 2.0 * rho * re + rho * rho * nsq;
        if dist < best_dist {
            best_dist = dist;
            best_k = k;
            best_rho = rho;
        }
    }
    (best_k, best_rho)
}

/// Deterministic pseudo-random complex image data.
pub fn random_image_data(n: usize, l: usize, seed: u64) -> Vec<Complex64> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    (0..n * l)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect()
}

pub fn grid_1d(n: usize) -> GridDims {
    GridDims::OneD(n)
}
