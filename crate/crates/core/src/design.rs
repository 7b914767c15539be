//! Controller gain design and the derived parameter chain.
//!
//! The gain is `K = BᵀP` for a symmetric positive definite `P` satisfying
//! `AᵀP + PA − α·PBBᵀP < −κI` with `α` the algebraic connectivity of the
//! gauged Laplacian. `P` is either supplied and checked ([`verify_lmi`]) or
//! synthesized from the associated Riccati equation ([`solve_are`]).

use alloc::vec::Vec;

use crate::graph::algebraic_connectivity;
use crate::linalg::{lyapunov_solve, operator_norm, sym_eigen, DenseMatrix, Lu};
use crate::{Error, Result};

/// Relative residual target of the Newton–Kleinman iteration.
pub const ARE_TOL: f64 = 1e-12;
/// Margin the synthesized `P` must keep: `κ ≥ q·(1 − KAPPA_SLACK)`.
pub const KAPPA_SLACK: f64 = 0.05;
const MAX_NEWTON_ITERATIONS: usize = 100;
/// Gains `K₀ = θ·Bᵀ` tried before the shifted-Lyapunov construction.
const GAIN_GRID: [f64; 7] = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0];

/// Designed gain together with every constant the analysis needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerDesign {
    pub p: DenseMatrix,
    /// `K = BᵀP`
    pub k: DenseMatrix,
    /// Decay margin: `λ_max(AᵀP + PA − αPBBᵀP) = −κ`.
    pub kappa: f64,
    /// Algebraic connectivity of the gauged Laplacian.
    pub alpha: f64,
    /// Young weight.
    pub c: f64,
    /// `‖L_D‖`
    pub laplacian_norm: f64,
    /// `m = ‖L_D ⊗ PBBᵀP‖ = ‖L_D‖·‖PBBᵀP‖`
    pub coupling_norm: f64,
    /// `β = κ − c·m²`
    pub beta: f64,
    /// The two terms of the budget `min{1/(2‖L_D‖²), βc/(2‖L_D‖²(βc+1))}`.
    pub budget_terms: [f64; 2],
    pub beta_max_bound: f64,
    /// Per-agent trigger weights.
    pub beta_i: Vec<f64>,
    pub beta_max: f64,
    /// Set when some `β_i` exceeds the budget and the user forced it.
    pub beta_forced: bool,
    /// Decay constant of the integrated Lyapunov inequality; `None` when
    /// the weights are outside the budget.
    pub c1: Option<f64>,
    /// Offset of the integrated Lyapunov inequality; `None` when the weights
    /// are outside the budget.
    pub c2: Option<f64>,
    /// `λ = 2‖A‖ + ‖BK‖²`
    pub lambda_rate: f64,
    /// `ln(1 + λβ_i)/λ`
    pub miet_bound_i: Vec<f64>,
}

impl ControllerDesign {
    pub fn agent_count(&self) -> usize {
        self.beta_i.len()
    }

    /// True when every weight is strictly inside the budget, i.e. when the
    /// integrated Lyapunov inequality applies.
    pub fn within_budget(&self) -> bool {
        self.beta_max < self.beta_max_bound
    }

    pub fn miet_bound(&self) -> f64 {
        self.miet_bound_i.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Re-checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::NumericFailure(alloc::format!("controller design: {msg}")));
        if self.p.relative_asymmetry() > crate::linalg::SYM_TOL {
            return fail("P is not symmetric");
        }
        let min_eig = sym_eigen(&self.p)?.min();
        if min_eig <= 0.0 {
            return Err(Error::InvalidP { min_eigenvalue: min_eig });
        }
        if !(self.kappa > 0.0 && self.beta > 0.0 && self.c > 0.0 && self.lambda_rate >= 0.0) {
            return fail("kappa, beta and c must be positive");
        }
        if !(self.budget_terms[1] < self.budget_terms[0]) {
            return fail("second budget term is not the binding one");
        }
        if !self.beta_forced && self.beta_i.iter().any(|&b| b > self.beta_max_bound) {
            return fail("weight above budget without override");
        }
        if let (Some(c1), Some(c2)) = (self.c1, self.c2) {
            if !(c1 > 0.0 && c2 >= 0.0) {
                return fail("c1 must be positive and c2 nonnegative");
            }
        }
        if self.miet_bound_i.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return fail("inter-event bounds must be positive");
        }
        Ok(())
    }
}

fn check_design_shapes(a: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::InvalidArgument(alloc::format!(
            "A must be square, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if b.rows() != a.rows() {
        return Err(Error::InvalidArgument(alloc::format!(
            "B must have {} rows, got {}",
            a.rows(),
            b.rows()
        )));
    }
    Ok(())
}

/// `AᵀP + PA − α·PBBᵀP`
fn lmi_matrix(a: &DenseMatrix, b: &DenseMatrix, alpha: f64, p: &DenseMatrix) -> DenseMatrix {
    let pb = p * b;
    let pbbp = &pb * &pb.transpose();
    &(&(&a.transpose() * p) + &(p * a)) - &pbbp.scale(alpha)
}

/// Returns `κ = −λ_max(AᵀP + PA − α·PBBᵀP)` when that is positive.
pub fn verify_lmi(a: &DenseMatrix, b: &DenseMatrix, alpha: f64, p: &DenseMatrix) -> Result<f64> {
    check_design_shapes(a, b)?;
    if p.rows() != a.rows() || !p.is_square() {
        return Err(Error::InvalidArgument(alloc::format!(
            "P must be {n}x{n}, got {}x{}",
            p.rows(),
            p.cols(),
            n = a.rows()
        )));
    }
    let p_eig = match sym_eigen(p) {
        Ok(e) => e,
        Err(Error::NotSymmetric { .. }) => return Err(Error::InvalidP { min_eigenvalue: f64::NAN }),
        Err(e) => return Err(e),
    };
    if p_eig.min() <= 0.0 {
        return Err(Error::InvalidP { min_eigenvalue: p_eig.min() });
    }
    let p = p.symmetrize();
    let lambda_max = sym_eigen(&lmi_matrix(a, b, alpha, &p).symmetrize())?.max();
    if lambda_max < 0.0 {
        Ok(-lambda_max)
    } else {
        Err(Error::LmiViolated { lambda_max })
    }
}

/// Hurwitz test: negative definite symmetric part, or else a positive
/// definite solution of `FᵀX + XF + I = 0`.
pub fn is_hurwitz(f: &DenseMatrix) -> bool {
    if let Ok(e) = sym_eigen(&f.symmetrize()) {
        if e.max() < 0.0 {
            return true;
        }
    }
    match lyapunov_solve(f, &DenseMatrix::identity(f.rows())) {
        Ok(x) => sym_eigen(&x).map(|e| e.min() > 0.0).unwrap_or(false),
        Err(_) => false,
    }
}

fn closed_loop(a: &DenseMatrix, b: &DenseMatrix, alpha: f64, k: &DenseMatrix) -> DenseMatrix {
    a - &(b * k).scale(alpha)
}

/// Finds `K₀` with `A − α·B·K₀` Hurwitz.
///
/// Tries `K₀ = 0`, then `θ·Bᵀ` over a coarse grid, then the shifted
/// Lyapunov construction: with `μ = ‖A‖ + 1` and `Z` solving
/// `(A+μI)Z + Z(A+μI)ᵀ = 2BBᵀ`, `K₀ = BᵀZ⁻¹/α` places the closed-loop
/// spectrum left of `−μ` whenever `(A, B)` is controllable.
pub fn stabilizing_gain(a: &DenseMatrix, b: &DenseMatrix, alpha: f64) -> Result<DenseMatrix> {
    check_design_shapes(a, b)?;
    let (n, m) = (a.rows(), b.cols());
    let zero = DenseMatrix::zeros(m, n);
    if is_hurwitz(a) {
        return Ok(zero);
    }
    let bt = b.transpose();
    for &theta in &GAIN_GRID {
        let k0 = bt.scale(theta);
        if is_hurwitz(&closed_loop(a, b, alpha, &k0)) {
            return Ok(k0);
        }
    }
    let mu = operator_norm(a)? + 1.0;
    let shifted = a + &DenseMatrix::identity(n).scale(mu);
    let bbt = b * &bt;
    let z = lyapunov_solve(&shifted.transpose().scale(-1.0), &bbt.scale(2.0))
        .map_err(|_| Error::NotStabilizable)?;
    if sym_eigen(&z).map(|e| e.min() <= 0.0).unwrap_or(true) {
        return Err(Error::NotStabilizable);
    }
    let z_inv = Lu::factor(&z).map_err(|_| Error::NotStabilizable)?.solve_matrix(&DenseMatrix::identity(n));
    let k0 = (&bt * &z_inv).scale(1.0 / alpha);
    if is_hurwitz(&closed_loop(a, b, alpha, &k0)) {
        Ok(k0)
    } else {
        Err(Error::NotStabilizable)
    }
}

/// Newton–Kleinman iteration for `AᵀP + PA − α·PBBᵀP + qI = 0`.
///
/// Each step solves `A_kᵀX + XA_k + qI + α·K_kᵀK_k = 0` with
/// `A_k = A − α·B·K_k` and sets `K_{k+1} = BᵀX`.
pub fn solve_are(
    a: &DenseMatrix,
    b: &DenseMatrix,
    alpha: f64,
    q: f64,
    initial_gain: Option<&DenseMatrix>,
) -> Result<DenseMatrix> {
    check_design_shapes(a, b)?;
    if !(alpha > 0.0 && q > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "alpha and q must be positive, got {alpha} and {q}"
        )));
    }
    let n = a.rows();
    let mut k = match initial_gain {
        Some(k0) => {
            if k0.rows() != b.cols() || k0.cols() != n {
                return Err(Error::InvalidArgument(alloc::format!(
                    "K0 must be {}x{n}, got {}x{}",
                    b.cols(),
                    k0.rows(),
                    k0.cols()
                )));
            }
            if !is_hurwitz(&closed_loop(a, b, alpha, k0)) {
                return Err(Error::NotStabilizable);
            }
            k0.clone()
        }
        None => stabilizing_gain(a, b, alpha)?,
    };
    let q_mat = DenseMatrix::identity(n).scale(q);
    let bt = b.transpose();

    let mut best = f64::INFINITY;
    let mut stalled = 0;
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let ak = closed_loop(a, b, alpha, &k);
        let rhs = &q_mat + &(&k.transpose() * &k).scale(alpha);
        let p = lyapunov_solve(&ak, &rhs)
            .map_err(|e| Error::NumericFailure(alloc::format!("Newton–Kleinman step: {e}")))?;
        k = &bt * &p;

        let residual = (&lmi_matrix(a, b, alpha, &p) + &q_mat).frobenius_norm();
        let pn = p.frobenius_norm();
        let scale = 1.0 + q + 2.0 * a.frobenius_norm() * pn + alpha * (&bt * b).frobenius_norm() * pn * pn;
        if residual <= ARE_TOL * scale {
            let kappa = verify_lmi(a, b, alpha, &p)?;
            if kappa < q * (1.0 - KAPPA_SLACK) {
                return Err(Error::NumericFailure(alloc::format!(
                    "synthesized P has margin {kappa:e} < {:e}",
                    q * (1.0 - KAPPA_SLACK)
                )));
            }
            return Ok(p);
        }
        if residual < 0.5 * best {
            best = residual;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 5 {
                break;
            }
        }
    }
    Err(Error::NoConvergence { method: "Newton–Kleinman", iterations: MAX_NEWTON_ITERATIONS })
}

/// Inputs of [`parameter_chain`].
#[derive(Debug, Clone, Copy)]
pub struct DesignInputs<'a> {
    pub a: &'a DenseMatrix,
    pub b: &'a DenseMatrix,
    pub p: &'a DenseMatrix,
    /// `L_D = DLD`
    pub gauged_laplacian: &'a DenseMatrix,
    /// Young weight; defaults to `κ/(2m²)`.
    pub c: Option<f64>,
    /// One weight per agent.
    pub beta_i: &'a [f64],
    pub force_beta: bool,
}

/// Computes `κ`, `c`, `β`, the weight budget, `c₁`, `c₂`, `λ` and the
/// per-agent inter-event lower bounds.
pub fn parameter_chain(inputs: DesignInputs<'_>) -> Result<ControllerDesign> {
    let DesignInputs { a, b, p, gauged_laplacian, c, beta_i, force_beta } = inputs;
    let agents = gauged_laplacian.rows();
    if beta_i.len() != agents {
        return Err(Error::InvalidArgument(alloc::format!(
            "{} trigger weights for {agents} agents",
            beta_i.len()
        )));
    }
    if let Some(agent) = beta_i.iter().position(|&b| !(b > 0.0 && b.is_finite())) {
        return Err(Error::InvalidInput(alloc::format!(
            "beta for agent {agent} must be positive, got {}",
            beta_i[agent]
        )));
    }
    let alpha = algebraic_connectivity(gauged_laplacian)?;
    let kappa = verify_lmi(a, b, alpha, p)?;
    let p = p.symmetrize();
    let k = &b.transpose() * &p;
    let pb = &p * b;
    let pbbp = &pb * &pb.transpose();

    let laplacian_norm = operator_norm(gauged_laplacian)?;
    let coupling_norm = laplacian_norm * operator_norm(&pbbp)?;
    let m2 = coupling_norm * coupling_norm;
    let c = match c {
        Some(c) => c,
        None if m2 > 0.0 => kappa / (2.0 * m2),
        // no coupling: any weight works, keep the scale of κ
        None => 1.0,
    };
    if !(c > 0.0) || c * m2 >= kappa {
        return Err(Error::InvalidC { c, kappa, coupling_norm });
    }
    let beta = kappa - c * m2;

    let l2 = laplacian_norm * laplacian_norm;
    let bc = beta * c;
    let budget_terms = [1.0 / (2.0 * l2), bc / (2.0 * l2 * (bc + 1.0))];
    if !(budget_terms[1] < budget_terms[0]) {
        return Err(Error::NumericFailure(alloc::format!(
            "weight budget terms out of order: {budget_terms:?}"
        )));
    }
    let beta_max_bound = budget_terms[1];

    let beta_max = beta_i.iter().copied().fold(0.0, f64::max);
    if !force_beta {
        if let Some(agent) = beta_i.iter().position(|&b| b > beta_max_bound) {
            return Err(Error::BetaTooLarge { agent, beta: beta_i[agent], bound: beta_max_bound });
        }
    }
    let beta_forced = beta_max > beta_max_bound;
    let (c1, c2) = if beta_max < beta_max_bound {
        let x = 2.0 * beta_max * l2;
        (Some(beta - x / (c * (1.0 - x))), Some(agents as f64 * beta_max / (c * (1.0 - x))))
    } else {
        (None, None)
    };

    let bk_norm = operator_norm(&(b * &k))?;
    let lambda_rate = 2.0 * operator_norm(a)? + bk_norm * bk_norm;
    let miet_bound_i = beta_i.iter().map(|&b| miet_lower_bound(lambda_rate, b)).collect();

    let design = ControllerDesign {
        p,
        k,
        kappa,
        alpha,
        c,
        laplacian_norm,
        coupling_norm,
        beta,
        budget_terms,
        beta_max_bound,
        beta_i: beta_i.to_vec(),
        beta_max,
        beta_forced,
        c1,
        c2,
        lambda_rate,
        miet_bound_i,
    };
    design.validate()?;
    Ok(design)
}

/// Smallest `Δ` with `∫₀^Δ e^{λs} ds ≥ β`, i.e. `ln(1 + λβ)/λ` (and `β`
/// in the limit `λ → 0`).
pub fn miet_lower_bound(lambda_rate: f64, beta: f64) -> f64 {
    if lambda_rate * beta < 1e-300 || lambda_rate == 0.0 {
        beta
    } else {
        libm::log1p(lambda_rate * beta) / lambda_rate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DenseMatrix {
        DenseMatrix::from_rows(&[[v]]).unwrap()
    }

    #[test]
    fn stable_system_without_input() {
        let a = DenseMatrix::identity(2).scale(-1.0);
        let b = DenseMatrix::zeros(2, 1);
        let kappa = verify_lmi(&a, &b, 0.7, &DenseMatrix::identity(2)).unwrap();
        assert!((kappa - 2.0).abs() < 1e-14);
    }

    #[test]
    fn unstable_system_without_input_violates() {
        let a = DenseMatrix::identity(2);
        let b = DenseMatrix::zeros(2, 1);
        match verify_lmi(&a, &b, 1.0, &DenseMatrix::identity(2)) {
            Err(Error::LmiViolated { lambda_max }) => assert!((lambda_max - 2.0).abs() < 1e-14),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn indefinite_p_is_rejected() {
        let a = DenseMatrix::identity(2).scale(-1.0);
        let b = DenseMatrix::zeros(2, 1);
        let p = DenseMatrix::from_diag(&[1.0, -1.0]);
        assert!(matches!(verify_lmi(&a, &b, 1.0, &p), Err(Error::InvalidP { .. })));
    }

    #[test]
    fn scalar_riccati_roots() {
        // −p² + 1 = 0
        let p = solve_are(&scalar(0.0), &scalar(1.0), 1.0, 1.0, None).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-10);
        // −p² + 2p + 3 = 0
        let p = solve_are(&scalar(1.0), &scalar(1.0), 1.0, 3.0, None).unwrap();
        assert!((p[(0, 0)] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn destabilizing_initial_gain_is_rejected() {
        let k0 = scalar(0.5);
        assert_eq!(
            solve_are(&scalar(1.0), &scalar(1.0), 1.0, 1.0, Some(&k0)),
            Err(Error::NotStabilizable)
        );
    }

    #[test]
    fn uncontrollable_unstable_mode() {
        let a = DenseMatrix::from_diag(&[1.0, -1.0]);
        let b = DenseMatrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert_eq!(stabilizing_gain(&a, &b, 1.0), Err(Error::NotStabilizable));
    }

    #[test]
    fn double_integrator_needs_the_shifted_construction() {
        // θ·Bᵀ leaves a zero eigenvalue for every θ
        let a = DenseMatrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let k0 = stabilizing_gain(&a, &b, 0.5).unwrap();
        assert!(is_hurwitz(&closed_loop(&a, &b, 0.5, &k0)));
        let p = solve_are(&a, &b, 0.5, 1.0, None).unwrap();
        assert!(verify_lmi(&a, &b, 0.5, &p).unwrap() >= 0.95);
    }

    #[test]
    fn plug_in_chain_arithmetic() {
        // L_D = [[0.5,−0.5],[−0.5,0.5]]: ‖L_D‖ = 1, α = 1.
        // A = 0, B = 1, P = 2: κ = αp² = 4, m = ‖L_D‖·p² = 4.
        let l = DenseMatrix::from_rows(&[[0.5, -0.5], [-0.5, 0.5]]).unwrap();
        let p = scalar(2.0);
        let design = parameter_chain(DesignInputs {
            a: &scalar(0.0),
            b: &scalar(1.0),
            p: &p,
            gauged_laplacian: &l,
            c: None,
            beta_i: &[1e-3, 2e-3],
            force_beta: false,
        })
        .unwrap();
        assert!((design.kappa - 4.0).abs() < 1e-12);
        assert!((design.coupling_norm - 4.0).abs() < 1e-12);
        assert!((design.c - 4.0 / 32.0).abs() < 1e-15);
        assert!((design.beta - 2.0).abs() < 1e-12);
        // βc = 0.25, ‖L_D‖ = 1
        assert!((design.beta_max_bound - 0.25 / (2.0 * 1.25)).abs() < 1e-14);
        let x = 2.0 * 2e-3;
        assert!((design.c1.unwrap() - (2.0 - x / (0.125 * (1.0 - x)))).abs() < 1e-12);
        assert!((design.c2.unwrap() - 2.0 * 2e-3 / (0.125 * (1.0 - x))).abs() < 1e-12);
        // λ = 2·0 + ‖B·K‖² = 4
        assert!((design.lambda_rate - 4.0).abs() < 1e-12);
        assert!((design.miet_bound_i[0] - libm::log(1.004) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn unit_coupling_chain() {
        // A = −1.5, B = 1, P = 1: κ = 3 + 1 = 4 and m = 1.
        let l = DenseMatrix::from_rows(&[[0.5, -0.5], [-0.5, 0.5]]).unwrap();
        let design = parameter_chain(DesignInputs {
            a: &scalar(-1.5),
            b: &scalar(1.0),
            p: &scalar(1.0),
            gauged_laplacian: &l,
            c: None,
            beta_i: &[0.1, 0.1],
            force_beta: false,
        })
        .unwrap();
        assert!((design.kappa - 4.0).abs() < 1e-12);
        assert!((design.coupling_norm - 1.0).abs() < 1e-12);
        assert!((design.c - 2.0).abs() < 1e-12);
        assert!((design.beta - 2.0).abs() < 1e-12);
        assert!((design.beta_max_bound - 0.4).abs() < 1e-12);
        assert!(design.budget_terms[1] < design.budget_terms[0]);
    }

    #[test]
    fn oversized_beta_needs_force() {
        let l = DenseMatrix::from_rows(&[[0.5, -0.5], [-0.5, 0.5]]).unwrap();
        let mut inputs = DesignInputs {
            a: &scalar(0.0),
            b: &scalar(1.0),
            p: &scalar(2.0),
            gauged_laplacian: &l,
            c: None,
            beta_i: &[1e6, 1e-3],
            force_beta: false,
        };
        assert!(matches!(parameter_chain(inputs), Err(Error::BetaTooLarge { agent: 0, .. })));
        inputs.force_beta = true;
        let d = parameter_chain(inputs).unwrap();
        assert!(d.beta_forced);
        assert_eq!(d.c1, None);
    }

    #[test]
    fn c_too_large_is_rejected() {
        let l = DenseMatrix::from_rows(&[[0.5, -0.5], [-0.5, 0.5]]).unwrap();
        let res = parameter_chain(DesignInputs {
            a: &scalar(0.0),
            b: &scalar(1.0),
            p: &scalar(2.0),
            gauged_laplacian: &l,
            c: Some(0.25),
            beta_i: &[1e-3, 1e-3],
            force_beta: false,
        });
        assert!(matches!(res, Err(Error::InvalidC { .. })));
    }

    #[test]
    fn miet_bound_closed_form() {
        assert!((miet_lower_bound(1.0, core::f64::consts::E - 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(miet_lower_bound(0.0, 0.3), 0.3);
    }
}
