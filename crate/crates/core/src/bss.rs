//! Blind source separation and blind noise-power estimation.
//!
//! The receive covariance of an N_t-stream mixture observed on N_r > N_t
//! antennas splits into a signal subspace (N_t large eigenvalues) and a noise
//! floor (N_r - N_t eigenvalues near sigma_w^2). `estimate_noise_and_streams`
//! reads both the stream count and the noise power off that spectrum.
//!
//! `scma_separate` then extracts the streams with a batch simplified constant
//! modulus algorithm: the frame is whitened onto the signal subspace (the
//! same eigendecomposition used for initialization), and each branch runs a
//! gradient descent on the constant-modulus cost with Gram-Schmidt deflation
//! against previously extracted branches and unit-norm renormalization after
//! every sweep. In whitened coordinates orthogonal combiners have
//! uncorrelated outputs, which is what makes the deflation select distinct
//! sources. Outputs carry the usual blind indeterminacies: per-branch complex
//! scale and permutation.

use crate::channel::{FrameRole, MimoFrame};
use crate::error::{DmiError, Result};
use crate::linalg::{hermitian_eigen, CMat, HermitianEigen};
use crate::C64;
use rand::Rng;
use rand_distr::StandardNormal;

/// Blind estimate of the noise power and transmit-stream count.
#[derive(Debug, Clone)]
pub struct NoiseEstimate {
    pub sigma_w2_hat: f64,
    pub n_t_hat: usize,
    /// Covariance eigenvalues, sorted descending.
    pub eigenvalues: Vec<f64>,
}

/// Sample covariance (1/N) sum y(n) y(n)^H.
fn sample_covariance(y: &MimoFrame) -> CMat {
    let n_r = y.n_antennas();
    let n = y.len() as f64;
    let mut r = CMat::zeros(n_r, n_r);
    for i in 0..n_r {
        for k in i..n_r {
            let acc: C64 = y
                .row(i)
                .iter()
                .zip(y.row(k))
                .map(|(a, b)| a * b.conj())
                .sum();
            let v = acc / n;
            r[(i, k)] = v;
            r[(k, i)] = v.conj();
        }
    }
    r
}

/// Estimates the number of transmitters from the largest relative gap in the
/// sorted eigenvalue spectrum and the noise power as the mean of the
/// remaining (noise-floor) eigenvalues.
pub fn estimate_noise_and_streams(y: &MimoFrame) -> Result<NoiseEstimate> {
    let n_r = y.n_antennas();
    if n_r < 2 {
        return Err(DmiError::InvalidArgument(
            "noise-subspace estimation needs at least two receive antennas".into(),
        ));
    }
    if y.len() < n_r {
        return Err(DmiError::InsufficientSamples {
            needed: n_r,
            got: y.len(),
        });
    }
    let eig = hermitian_eigen(&sample_covariance(y));
    let eigenvalues: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0)).collect();

    // Largest ratio lambda_{k-1}/lambda_k over k in [1, N_r-1]; the floor
    // keeps noiseless (rank-deficient) spectra well defined.
    let floor = eigenvalues[0].max(f64::MIN_POSITIVE) * 1e-12;
    let mut n_t_hat = 1;
    let mut best_gap = f64::NEG_INFINITY;
    for k in 1..n_r {
        let gap = (eigenvalues[k - 1] + floor) / (eigenvalues[k] + floor);
        if gap > best_gap {
            best_gap = gap;
            n_t_hat = k;
        }
    }
    let tail = &eigenvalues[n_t_hat..];
    let sigma_w2_hat = (tail.iter().sum::<f64>() / tail.len() as f64).max(0.0);
    Ok(NoiseEstimate {
        sigma_w2_hat,
        n_t_hat,
        eigenvalues,
    })
}

/// The blind separator G (N_r x N_t) and the noise power seen by each output
/// branch: sigma_w2_hat * ||g_j||^2.
#[derive(Debug, Clone)]
pub struct SeparatorMatrix {
    pub g: CMat,
    pub per_branch_noise_variance: Vec<f64>,
}

/// Noise power at each separator output: sigma_w2_hat * diag(G^T G^*),
/// i.e. the squared column norms scaled by the channel noise power.
pub fn filtered_noise_power(g: &CMat, sigma_w2_hat: f64) -> Vec<f64> {
    (0..g.cols())
        .map(|j| sigma_w2_hat * g.col_norm_sqr(j))
        .collect()
}

/// Hyperparameters of the constant-modulus descent.
#[derive(Debug, Clone, Copy)]
pub struct ScmaConfig {
    pub step_size: f64,
    pub max_sweeps: usize,
    /// Stop when the cost changes less than this between sweeps.
    pub cost_tol: f64,
    /// Random re-initializations to attempt per branch on non-convergence.
    pub restarts: usize,
}

impl Default for ScmaConfig {
    fn default() -> Self {
        ScmaConfig {
            step_size: 0.1,
            max_sweeps: 200,
            cost_tol: 1e-6,
            restarts: 2,
        }
    }
}

/// Blind separation with default hyperparameters.
pub fn scma_separate(
    y: &MimoFrame,
    n_t: usize,
    sigma_w2_hat: f64,
    rng: &mut impl Rng,
) -> Result<(MimoFrame, SeparatorMatrix)> {
    scma_separate_with(y, n_t, sigma_w2_hat, &ScmaConfig::default(), rng)
}

pub fn scma_separate_with(
    y: &MimoFrame,
    n_t: usize,
    sigma_w2_hat: f64,
    cfg: &ScmaConfig,
    rng: &mut impl Rng,
) -> Result<(MimoFrame, SeparatorMatrix)> {
    let n_r = y.n_antennas();
    if n_t == 0 {
        return Err(DmiError::InvalidArgument("n_t must be >= 1".into()));
    }
    if n_t >= n_r {
        return Err(DmiError::InvalidArgument(format!(
            "separator needs n_t < n_r, got {n_t} >= {n_r}"
        )));
    }
    let n = y.len();
    if n < n_r {
        return Err(DmiError::InsufficientSamples {
            needed: n_r,
            got: n,
        });
    }

    let eig = hermitian_eigen(&sample_covariance(y));
    let whitener = whitening_matrix(&eig, n_r, n_t);

    // Whitened frame z = W^T y; its sample covariance is the identity, so
    // every unit-norm combiner output has unit sample power.
    let z: Vec<Vec<C64>> = (0..n_t)
        .map(|i| {
            let mut row = vec![C64::new(0.0, 0.0); n];
            for r in 0..n_r {
                let w = whitener[(r, i)];
                for (acc, &s) in row.iter_mut().zip(y.row(r)) {
                    *acc += w * s;
                }
            }
            row
        })
        .collect();

    let mut combiners: Vec<Vec<C64>> = Vec::with_capacity(n_t);
    for branch in 0..n_t {
        let mut attempt = 0usize;
        let q = loop {
            let mut q = if attempt == 0 {
                // Dominant-eigenvector initialization: e_branch in whitened
                // coordinates, plus a small seeded tilt. Constant-modulus
                // sources through identity-like channels make the covariance
                // spectrum exactly degenerate, which parks the bare
                // eigenvector init on the balanced-mixture ridge where the
                // cost gradient vanishes; the tilt breaks that symmetry.
                let mut q = vec![C64::new(0.0, 0.0); n_t];
                q[branch] = C64::new(1.0, 0.0);
                for v in q.iter_mut() {
                    *v += 0.05
                        * C64::new(
                            rng.sample::<f64, _>(StandardNormal),
                            rng.sample::<f64, _>(StandardNormal),
                        );
                }
                q
            } else {
                (0..n_t)
                    .map(|_| {
                        C64::new(
                            rng.sample::<f64, _>(StandardNormal),
                            rng.sample::<f64, _>(StandardNormal),
                        )
                    })
                    .collect()
            };
            match cm_descent(&mut q, &z, &combiners, cfg) {
                Ok(()) => break q,
                Err(err) => {
                    if attempt >= cfg.restarts {
                        return Err(err);
                    }
                    attempt += 1;
                }
            }
        };
        combiners.push(q);
    }

    let mut recovered_rows: Vec<Vec<C64>> = combiners
        .iter()
        .map(|q| {
            (0..n)
                .map(|idx| (0..n_t).map(|i| q[i] * z[i][idx]).sum())
                .collect()
        })
        .collect();
    refine_improper_pairs(&mut combiners, &mut recovered_rows);

    // Map combiners back to antenna space: g_j = W q_j.
    let g = CMat::from_fn(n_r, n_t, |r, j| {
        (0..n_t).map(|i| whitener[(r, i)] * combiners[j][i]).sum()
    });
    let recovered = MimoFrame::new(FrameRole::Recovered, recovered_rows)?;
    let per_branch_noise_variance = filtered_noise_power(&g, sigma_w2_hat);
    Ok((
        recovered,
        SeparatorMatrix {
            g,
            per_branch_noise_variance,
        },
    ))
}

/// Signal-subspace whitener W (N_r x N_t): z = W^T y has identity sample
/// covariance. Columns are conj(u_i)/sqrt(lambda_i).
fn whitening_matrix(eig: &HermitianEigen, n_r: usize, n_t: usize) -> CMat {
    let floor = eig.values[0].max(f64::MIN_POSITIVE) * 1e-12;
    CMat::from_fn(n_r, n_t, |r, i| {
        let scale = 1.0 / eig.values[i].max(floor).sqrt();
        eig.vectors[(r, i)].conj() * scale
    })
}

/// Resolves the residual ambiguity the constant-modulus cost leaves for
/// real-valued alphabets. Two independent real sources combined in quadrature
/// have the same per-branch distribution as one complex source (two 4-ASK
/// streams make a perfect 16-QAM), and that combination actually minimizes
/// the modulus cost, so a converged separator can output such pairs. Real
/// sources are improper (E{s^2} != 0), which the pseudo-covariance of a
/// branch pair exposes: a con-eigendecomposition of the pair's 2x2
/// pseudo-covariance (the strong uncorrelating transform) undoes the
/// quadrature mixing, and a fourth-order rotation resolves the remaining
/// real mixing angle. Pairs of proper (circular) sources have a vanishing
/// pseudo-covariance and are left untouched.
fn refine_improper_pairs(combiners: &mut [Vec<C64>], outputs: &mut [Vec<C64>]) {
    let n_t = outputs.len();
    let n = outputs[0].len() as f64;
    for i in 0..n_t {
        for j in (i + 1)..n_t {
            let power = |row: &[C64]| row.iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
            let pseudo =
                |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<C64>() / n;
            let pi = power(&outputs[i]).max(f64::MIN_POSITIVE);
            let pj = power(&outputs[j]).max(f64::MIN_POSITIVE);
            let rho_ii = pseudo(&outputs[i], &outputs[i]) / pi;
            let rho_jj = pseudo(&outputs[j], &outputs[j]) / pj;
            let rho_ij = pseudo(&outputs[i], &outputs[j]) / (pi * pj).sqrt();

            // Con-eigenvectors of P solve P conj(u) = lambda u, equivalent to
            // the real symmetric eigenproblem [[Re P, Im P], [Im P, -Re P]].
            let mut s = CMat::zeros(4, 4);
            let p = [[rho_ii, rho_ij], [rho_ij, rho_jj]];
            for a in 0..2 {
                for b in 0..2 {
                    s[(a, b)] = C64::new(p[a][b].re, 0.0);
                    s[(a, b + 2)] = C64::new(p[a][b].im, 0.0);
                    s[(a + 2, b)] = C64::new(p[a][b].im, 0.0);
                    s[(a + 2, b + 2)] = C64::new(-p[a][b].re, 0.0);
                }
            }
            let eig = hermitian_eigen(&s);
            // Both con-eigenvalues must be solidly above the proper-source
            // floor, otherwise the pair carries no real-alphabet structure.
            if eig.values[1] < 0.35 {
                continue;
            }
            let u_col = |k: usize| {
                [
                    C64::new(eig.vectors[(0, k)].re, eig.vectors[(2, k)].re),
                    C64::new(eig.vectors[(1, k)].re, eig.vectors[(3, k)].re),
                ]
            };
            let u1 = u_col(0);
            let u2 = u_col(1);

            // Apply U^H to the branch pair (outputs and combiners alike).
            let apply_pair = |ci: C64, cj: C64, di: C64, dj: C64, a: &mut [C64], b: &mut [C64]| {
                for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                    let (vx, vy) = (*x, *y);
                    *x = ci * vx + cj * vy;
                    *y = di * vx + dj * vy;
                }
            };
            let (left, right) = outputs.split_at_mut(j);
            apply_pair(
                u1[0].conj(),
                u1[1].conj(),
                u2[0].conj(),
                u2[1].conj(),
                &mut left[i],
                &mut right[0],
            );
            let (cleft, cright) = combiners.split_at_mut(j);
            apply_pair(
                u1[0].conj(),
                u1[1].conj(),
                u2[0].conj(),
                u2[1].conj(),
                &mut cleft[i],
                &mut cright[0],
            );

            // Remaining real rotation from the fourth-order contrast
            // f(theta) = E{w1^4} + E{w2^4} of the rotated real parts, which
            // is a pure cos/sin(4 theta) polynomial sampled at three angles.
            let quartic = |t: f64| {
                let (c, s) = (t.cos(), t.sin());
                let mut acc = 0.0;
                for (x, y) in outputs[i].iter().zip(&outputs[j]) {
                    let a = c * x.re - s * y.re;
                    let b = s * x.re + c * y.re;
                    acc += a.powi(4) + b.powi(4);
                }
                acc / n
            };
            let f0 = quartic(0.0);
            let f1 = quartic(std::f64::consts::FRAC_PI_8);
            let f2 = quartic(std::f64::consts::FRAC_PI_4);
            let a0 = 0.5 * (f0 + f2);
            let bc = 0.5 * (f0 - f2);
            let bs = f1 - a0;
            let theta = (std::f64::consts::PI + bs.atan2(bc)) / 4.0;
            let (c, s) = (theta.cos(), theta.sin());
            let rot = |a: &mut [C64], b: &mut [C64]| {
                for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                    let (vx, vy) = (*x, *y);
                    *x = c * vx - s * vy;
                    *y = s * vx + c * vy;
                }
            };
            let (left, right) = outputs.split_at_mut(j);
            rot(&mut left[i], &mut right[0]);
            let (cleft, cright) = combiners.split_at_mut(j);
            rot(&mut cleft[i], &mut cright[0]);
        }
    }
}

fn deflate(q: &mut [C64], previous: &[Vec<C64>]) {
    for p in previous {
        let proj: C64 = p.iter().zip(q.iter()).map(|(a, b)| a.conj() * b).sum();
        for (qi, pi) in q.iter_mut().zip(p) {
            *qi -= proj * pi;
        }
    }
}

fn norm_of(q: &[C64]) -> f64 {
    q.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Deflates against the extracted branches and renormalizes. If deflation
/// annihilated the vector, restart it from the basis direction with the
/// largest residual outside the extracted subspace (one always exists while
/// fewer than n_t branches are extracted).
fn reorthonormalize(q: &mut [C64], previous: &[Vec<C64>]) {
    deflate(q, previous);
    let mut norm = norm_of(q);
    if norm < 1e-9 {
        for k in 0..q.len() {
            for (i, v) in q.iter_mut().enumerate() {
                *v = if i == k {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
            }
            deflate(q, previous);
            norm = norm_of(q);
            if norm > 1e-3 {
                break;
            }
        }
    }
    for v in q.iter_mut() {
        *v /= norm;
    }
}

/// Batch gradient descent on J(q) = mean (|q^T z|^2 - 1)^2 with deflation and
/// renormalization after every sweep.
fn cm_descent(
    q: &mut [C64],
    z: &[Vec<C64>],
    previous: &[Vec<C64>],
    cfg: &ScmaConfig,
) -> Result<()> {
    let n_t = z.len();
    let n = z[0].len();
    reorthonormalize(q, previous);

    let mut prev_cost = f64::INFINITY;
    let mut cost = f64::INFINITY;
    for _ in 0..cfg.max_sweeps {
        let mut grad = vec![C64::new(0.0, 0.0); n_t];
        let mut acc_cost = 0.0;
        #[allow(clippy::needless_range_loop)] // idx strides all n_t rows of z
        for idx in 0..n {
            let out: C64 = (0..n_t).map(|i| q[i] * z[i][idx]).sum();
            let err = out.norm_sqr() - 1.0;
            acc_cost += err * err;
            let w = err * out;
            for i in 0..n_t {
                grad[i] += w * z[i][idx].conj();
            }
        }
        cost = acc_cost / n as f64;
        if (prev_cost - cost).abs() < cfg.cost_tol {
            return Ok(());
        }
        prev_cost = cost;

        let scale = cfg.step_size / n as f64;
        for i in 0..n_t {
            q[i] -= scale * grad[i];
        }
        reorthonormalize(q, previous);
    }
    Err(DmiError::ConvergenceFailure {
        sweeps: cfg.max_sweeps,
        cost,
    })
}
