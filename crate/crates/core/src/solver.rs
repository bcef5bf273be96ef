//! Augmented-Lagrangian solver for
//!
//! ```text
//! min_{W,N}  ‖XW − (Y − N)‖²_F + α‖N‖₁ − β‖XW‖_* + λ‖W‖²_F
//! s.t.       N ∈ {0,1}^{n×l},  N ≤ Y
//! ```
//!
//! The score matrix is split off as `C = XW` and the augmented Lagrangian is
//! minimized block by block: W (ridge-type closed form), N (one exact
//! proximal step with Lipschitz constant 2), C (singular value shift), then
//! the multiplier Λ and penalty μ.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::data::{self, Dataset, MatrixKind};
use crate::error::{PmlError, Result};
use crate::numerics::{self, shrink, sym_eig, DenseMatrix, EigResult};
use crate::scalar::Scalar;

/// Which combination of the sparsity and rank terms is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Sparse noise plus nuclear-norm maximization (the full method).
    HighRank,
    /// Sparse noise plus nuclear-norm minimization.
    LowRank,
    /// Sparse noise only.
    NoRank,
    /// Nuclear-norm maximization only; N is never updated.
    NoSparsity,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::HighRank,
        Variant::NoRank,
        Variant::NoSparsity,
        Variant::LowRank,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::HighRank => "high-rank",
            Variant::LowRank => "low-rank",
            Variant::NoRank => "no-rank",
            Variant::NoSparsity => "no-sparsity",
        }
    }

    /// Sign of the nuclear-norm term in the objective.
    fn rank_sign(self) -> i8 {
        match self {
            Variant::HighRank | Variant::NoSparsity => -1,
            Variant::LowRank => 1,
            Variant::NoRank => 0,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = PmlError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| {
                PmlError::Config(format!(
                    "unknown variant {s:?} (expected high-rank, low-rank, no-rank or no-sparsity)"
                ))
            })
    }
}

/// Scale of the singular value shift in the C-update.
///
/// `Paper` shifts by `2β/(2+μ)`; `Derived` by `β/(2+μ)`, which is what the
/// stationarity condition of `(1 + μ/2)‖C − G‖² ∓ β‖C‖_*` gives. The two differ
/// only by a reparameterization of β.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CShift {
    #[default]
    Paper,
    Derived,
}

impl CShift {
    pub fn as_str(self) -> &'static str {
        match self {
            CShift::Paper => "paper",
            CShift::Derived => "derived",
        }
    }

    fn numerator<T: Scalar>(self) -> T {
        match self {
            CShift::Paper => T::lit(2.0),
            CShift::Derived => T::one(),
        }
    }
}

impl fmt::Display for CShift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CShift {
    type Err = PmlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(CShift::Paper),
            "derived" => Ok(CShift::Derived),
            _ => Err(PmlError::Config(format!(
                "unknown c-shift convention {s:?} (expected paper or derived)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchirnParams<T> {
    /// Weight of the ℓ1 penalty on the noise matrix.
    pub alpha: T,
    /// Weight of the nuclear-norm term.
    pub beta: T,
    /// Ridge weight on W.
    pub lambda: T,
    pub mu0: T,
    pub mu_max: T,
    pub rho: T,
    pub max_iter: usize,
    /// Stop once the relative primal residual drops to this value; 0 disables.
    pub tol: T,
    pub variant: Variant,
    /// Scores strictly above this are predicted positive.
    pub threshold: T,
    pub c_shift: CShift,
}

impl<T: Scalar> Default for SchirnParams<T> {
    fn default() -> Self {
        SchirnParams {
            alpha: T::one(),
            beta: T::lit(0.05),
            lambda: T::lit(10.0),
            mu0: T::lit(1e-4),
            mu_max: T::lit(10.0),
            rho: T::lit(1.1),
            max_iter: 100,
            tol: T::zero(),
            variant: Variant::HighRank,
            threshold: T::lit(0.5),
            c_shift: CShift::Paper,
        }
    }
}

impl<T: Scalar> SchirnParams<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(PmlError::Config(msg));
        let finite = [
            self.alpha,
            self.beta,
            self.lambda,
            self.mu0,
            self.mu_max,
            self.rho,
            self.tol,
            self.threshold,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return bad("parameters must be finite".into());
        }
        if self.alpha <= T::zero() {
            return bad(format!("alpha must be > 0, got {}", self.alpha));
        }
        if self.beta < T::zero() {
            return bad(format!("beta must be >= 0, got {}", self.beta));
        }
        if self.lambda <= T::zero() {
            return bad(format!("lambda must be > 0, got {}", self.lambda));
        }
        if self.mu0 <= T::zero() || self.mu_max < self.mu0 {
            return bad(format!(
                "need 0 < mu0 <= mu_max, got mu0 = {}, mu_max = {}",
                self.mu0, self.mu_max
            ));
        }
        if self.rho <= T::one() {
            return bad(format!("rho must be > 1, got {}", self.rho));
        }
        if self.tol < T::zero() {
            return bad(format!("tol must be >= 0, got {}", self.tol));
        }
        if self.threshold <= T::zero() || self.threshold >= T::one() {
            return bad(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            ));
        }
        Ok(())
    }

    /// Shift applied to singular values in the C-update at penalty `mu`.
    pub fn c_shift_amount(&self, mu: T) -> T {
        self.c_shift.numerator::<T>() * self.beta / (T::lit(2.0) + mu)
    }

    /// Ordered `key=value` pairs, as written to model sidecars.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("alpha", self.alpha.to_string()),
            ("beta", self.beta.to_string()),
            ("lambda", self.lambda.to_string()),
            ("mu0", self.mu0.to_string()),
            ("mu-max", self.mu_max.to_string()),
            ("rho", self.rho.to_string()),
            ("max-iter", self.max_iter.to_string()),
            ("tol", self.tol.to_string()),
            ("variant", self.variant.to_string()),
            ("threshold", self.threshold.to_string()),
            ("c-shift", self.c_shift.to_string()),
        ]
    }

    /// Override fields from `key=value` pairs; unknown keys are ignored.
    pub fn apply_pairs<'a>(
        &mut self,
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<()> {
        fn num<T: Scalar>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| PmlError::Config(format!("{key}: not a number: {v:?}")))
        }
        for (k, v) in pairs {
            match k {
                "alpha" => self.alpha = num(k, v)?,
                "beta" => self.beta = num(k, v)?,
                "lambda" => self.lambda = num(k, v)?,
                "mu0" => self.mu0 = num(k, v)?,
                "mu-max" => self.mu_max = num(k, v)?,
                "rho" => self.rho = num(k, v)?,
                "tol" => self.tol = num(k, v)?,
                "threshold" => self.threshold = num(k, v)?,
                "max-iter" => {
                    self.max_iter = v
                        .trim()
                        .parse()
                        .map_err(|_| PmlError::Config(format!("max-iter: not a count: {v:?}")))?
                }
                "variant" => self.variant = v.trim().parse()?,
                "c-shift" => self.c_shift = v.trim().parse()?,
                _ => {}
            }
        }
        Ok(())
    }
}

/// The evolving quantities of the solver.
#[derive(Debug, Clone)]
pub struct SolverState<T> {
    pub w: DenseMatrix<T>,
    /// Estimated noise labels, binary and ≤ Y.
    pub noise: DenseMatrix<T>,
    /// Auxiliary copy of the score matrix XW.
    pub c: DenseMatrix<T>,
    /// Lagrange multiplier for `XW = C`.
    pub multiplier: DenseMatrix<T>,
    pub mu: T,
    pub iter: usize,
}

impl<T: Scalar> SolverState<T> {
    /// `W = 0`, `N = 0`, `C = Λ = 1`, `μ = μ₀`.
    pub fn initial(d: usize, n: usize, l: usize, mu0: T) -> Self {
        SolverState {
            w: DenseMatrix::zeros(d, l),
            noise: DenseMatrix::zeros(n, l),
            c: DenseMatrix::ones(n, l),
            multiplier: DenseMatrix::ones(n, l),
            mu: mu0,
            iter: 0,
        }
    }
}

/// Per-iteration traces recorded by [`fit`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FitReport {
    /// Un-augmented objective after each iteration.
    pub objective_trace: Vec<f64>,
    /// `‖XW − C‖_F / max(1, ‖C‖_F)` after each iteration.
    pub primal_residual_trace: Vec<f64>,
    /// Penalty μ in effect for each iteration.
    pub mu_trace: Vec<f64>,
    pub iterations_run: usize,
    pub final_rank_xw: usize,
}

/// Eigendecomposition of XᵀX, reused by every W-update.
#[derive(Debug, Clone)]
pub struct GramFactor<T> {
    eig: EigResult<T>,
}

impl<T: Scalar> GramFactor<T> {
    pub fn new(x: &DenseMatrix<T>) -> Result<Self> {
        Ok(GramFactor {
            eig: sym_eig(&x.gram())?,
        })
    }

    /// `(μ XᵀX + 2λ I)⁻¹ rhs = Q (μD + 2λ)⁻¹ Qᵀ rhs`.
    pub fn solve(&self, mu: T, ridge: T, rhs: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        let q = &self.eig.q;
        let mut proj = q.t_matmul(rhs)?;
        let two_ridge = T::lit(2.0) * ridge;
        for (i, &ev) in self.eig.eigenvalues.iter().enumerate() {
            // Gram eigenvalues can come out a hair below zero.
            let denom = mu * ev.max(T::zero()) + two_ridge;
            if denom <= T::zero() {
                return Err(PmlError::numerical("update_w", "system matrix is singular"));
            }
            proj.row_mut(i).iter_mut().for_each(|v| *v /= denom);
        }
        q.matmul(&proj)
    }
}

/// `W = (μ XᵀX + 2λ I)⁻¹ (μ XᵀC − XᵀΛ)`.
pub fn update_w<T: Scalar>(
    gram: &GramFactor<T>,
    x: &DenseMatrix<T>,
    c: &DenseMatrix<T>,
    multiplier: &DenseMatrix<T>,
    mu: T,
    lambda: T,
) -> Result<DenseMatrix<T>> {
    let rhs = c.zip_map(multiplier, |cv, m| mu * cv - m)?;
    let rhs = x.t_matmul(&rhs)?;
    gram.solve(mu, lambda, &rhs)
}

/// `N_ij = 1` iff `Y_ij = 1` and `(Y − C)_ij > α/2`.
///
/// Shrinking by `α/L_f` with `L_f = 2`, thresholding the sign to {0, 1} and
/// clipping at Y collapse to this elementwise rule.
pub fn update_n<T: Scalar>(
    y: &DenseMatrix<T>,
    c: &DenseMatrix<T>,
    alpha: T,
) -> Result<DenseMatrix<T>> {
    let eps = alpha / T::lit(2.0);
    y.zip_map(c, |yv, cv| {
        let shrunk = shrink(yv - cv, eps);
        let sign = if shrunk > T::zero() {
            T::one()
        } else {
            T::zero()
        };
        sign.min(yv)
    })
}

/// `G = (2Y − 2N + Λ + μXW) / (2 + μ)`, the point the C-update is centered on.
pub fn c_center<T: Scalar>(
    y: &DenseMatrix<T>,
    noise: &DenseMatrix<T>,
    multiplier: &DenseMatrix<T>,
    xw: &DenseMatrix<T>,
    mu: T,
) -> Result<DenseMatrix<T>> {
    y.check_same_shape(noise, "c_center")?;
    y.check_same_shape(multiplier, "c_center")?;
    y.check_same_shape(xw, "c_center")?;
    let two = T::lit(2.0);
    let denom = two + mu;
    let (ys, ns, ms, xs) = (
        y.as_slice(),
        noise.as_slice(),
        multiplier.as_slice(),
        xw.as_slice(),
    );
    let data = (0..ys.len())
        .map(|i| (two * (ys[i] - ns[i]) + ms[i] + mu * xs[i]) / denom)
        .collect();
    DenseMatrix::from_vec(y.rows(), y.cols(), data)
}

/// Singular-value shift of `G`: `σ + s` for the high-rank variants,
/// `max(0, σ − s)` for the low-rank one, identity otherwise.
pub fn shift_singular_values<T: Scalar>(
    g: &DenseMatrix<T>,
    shift: T,
    variant: Variant,
) -> Result<DenseMatrix<T>> {
    if variant == Variant::NoRank || shift == T::zero() {
        return Ok(g.clone());
    }
    let svd = numerics::svd(g)?;
    let shifted: Vec<T> = svd
        .singular_values
        .iter()
        .map(|&s| match variant {
            Variant::HighRank | Variant::NoSparsity => (s + shift).max(T::zero()),
            Variant::LowRank => (s - shift).max(T::zero()),
            Variant::NoRank => unreachable!(),
        })
        .collect();
    Ok(svd.reconstruct_with(&shifted))
}

/// `Λ ← Λ + μ(XW − C)` with the pre-update μ, then `μ ← min(μ_max, ρμ)`.
pub fn update_lagrange<T: Scalar>(
    multiplier: &DenseMatrix<T>,
    xw: &DenseMatrix<T>,
    c: &DenseMatrix<T>,
    mu: T,
    rho: T,
    mu_max: T,
) -> Result<(DenseMatrix<T>, T)> {
    let mut next = multiplier.clone();
    next.axpy(mu, &xw.sub(c)?)?;
    Ok((next, mu_max.min(rho * mu)))
}

/// The un-augmented objective
/// `‖XW − (Y − N)‖² + α‖N‖₁ ± β‖XW‖_* + λ‖W‖²` with the variant's sign.
pub fn objective<T: Scalar>(
    xw: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    noise: &DenseMatrix<T>,
    w: &DenseMatrix<T>,
    params: &SchirnParams<T>,
) -> Result<T> {
    let clean = y.sub(noise)?;
    let fit = xw.sub(&clean)?.frobenius_norm();
    let wn = w.frobenius_norm();
    let sign = params.variant.rank_sign();
    let rank_term = if sign == 0 || params.beta == T::zero() {
        T::zero()
    } else {
        T::lit(sign as f64) * params.beta * numerics::nuclear_norm(xw)?
    };
    Ok(fit * fit + params.alpha * noise.l1_norm() + rank_term + params.lambda * wn * wn)
}

/// One configured problem instance: features, candidate labels and the cached
/// Gram factorization.
pub struct Schirn<'a, T> {
    x: &'a DenseMatrix<T>,
    y: &'a DenseMatrix<T>,
    params: SchirnParams<T>,
    gram: GramFactor<T>,
}

impl<'a, T: Scalar> Schirn<'a, T> {
    pub fn new(
        x: &'a DenseMatrix<T>,
        y: &'a DenseMatrix<T>,
        params: SchirnParams<T>,
    ) -> Result<Self> {
        params.validate()?;
        if x.rows() != y.rows() {
            return Err(PmlError::dim(
                "fit",
                format!("{} feature rows vs {} label rows", x.rows(), y.rows()),
            ));
        }
        if !y.is_binary() {
            return Err(PmlError::contract("fit", "candidate labels must be binary"));
        }
        x.ensure_finite("fit")?;
        Ok(Schirn {
            x,
            y,
            params,
            gram: GramFactor::new(x)?,
        })
    }

    pub fn initial_state(&self) -> SolverState<T> {
        SolverState::initial(self.x.cols(), self.x.rows(), self.y.cols(), self.params.mu0)
    }

    /// One pass of W → N → C → Λ → μ. Returns `XW` for the new W.
    pub fn step(&self, state: &mut SolverState<T>) -> Result<DenseMatrix<T>> {
        let p = &self.params;
        state.w = update_w(
            &self.gram,
            self.x,
            &state.c,
            &state.multiplier,
            state.mu,
            p.lambda,
        )?;
        let xw = self.x.matmul(&state.w)?;
        if p.variant != Variant::NoSparsity {
            state.noise = update_n(self.y, &state.c, p.alpha)?;
        }
        let g = c_center(self.y, &state.noise, &state.multiplier, &xw, state.mu)?;
        state.c = shift_singular_values(&g, p.c_shift_amount(state.mu), p.variant)?;
        let (multiplier, mu) =
            update_lagrange(&state.multiplier, &xw, &state.c, state.mu, p.rho, p.mu_max)?;
        state.multiplier = multiplier;
        state.mu = mu;
        state.iter += 1;
        Ok(xw)
    }

    /// Run to `max_iter` (or to the residual tolerance when enabled).
    pub fn run(&self) -> Result<(SolverState<T>, FitReport)> {
        let p = &self.params;
        let mut state = self.initial_state();
        let mut report = FitReport::default();
        for _ in 0..p.max_iter {
            let mu_used = state.mu;
            let xw = self.step(&mut state)?;
            let obj = objective(&xw, self.y, &state.noise, &state.w, p)?;
            let residual =
                xw.sub(&state.c)?.frobenius_norm() / state.c.frobenius_norm().max(T::one());
            if !obj.is_finite() || !residual.is_finite() {
                return Err(PmlError::numerical(
                    "fit",
                    format!("non-finite iterate at iteration {}", state.iter),
                ));
            }
            report.objective_trace.push(obj.as_f64());
            report.primal_residual_trace.push(residual.as_f64());
            report.mu_trace.push(mu_used.as_f64());
            if p.tol > T::zero() && residual <= p.tol {
                break;
            }
        }
        report.iterations_run = state.iter;
        report.final_rank_xw = numerics::numerical_rank(&self.x.matmul(&state.w)?)?;
        Ok((state, report))
    }
}

/// A fitted weight matrix with the settings and traces that produced it.
#[derive(Debug, Clone)]
pub struct Model<T> {
    pub w: DenseMatrix<T>,
    pub params: SchirnParams<T>,
    pub report: FitReport,
    /// Final solver state on the training data; absent for models loaded from disk.
    pub training: Option<SolverState<T>>,
}

pub fn fit<T: Scalar>(ds: &Dataset<T>, params: &SchirnParams<T>) -> Result<Model<T>> {
    ds.validate()?;
    let problem = Schirn::new(&ds.features, &ds.candidates, *params)?;
    let (state, report) = problem.run()?;
    Ok(Model {
        w: state.w.clone(),
        params: *params,
        report,
        training: Some(state),
    })
}

impl<T: Scalar> Model<T> {
    pub fn predict_scores(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        if x.cols() != self.w.rows() {
            return Err(PmlError::dim(
                "predict",
                format!("model expects {} features, got {}", self.w.rows(), x.cols()),
            ));
        }
        x.matmul(&self.w)
    }

    /// Binary predictions: 1 iff score > threshold (ties go to 0).
    pub fn predict_labels(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        Ok(binarize(&self.predict_scores(x)?, self.params.threshold))
    }

    /// Writes `W.txt` (matrix text format) and `model.meta` (`key=value`).
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| PmlError::io(dir, e))?;
        data::save_matrix(&dir.join(MODEL_WEIGHTS), &self.w)?;
        let mut meta = String::new();
        for (k, v) in self.params.to_pairs() {
            meta.push_str(&format!("{k}={v}\n"));
        }
        meta.push_str(&format!("iterations-run={}\n", self.report.iterations_run));
        let path = dir.join(MODEL_META);
        fs::write(&path, meta).map_err(|e| PmlError::io(path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let w = data::load_matrix(&dir.join(MODEL_WEIGHTS), MatrixKind::Features)?;
        let path = dir.join(MODEL_META);
        let text = fs::read_to_string(&path).map_err(|e| PmlError::io(&path, e))?;
        let pairs = parse_key_values(&text, &path.display().to_string())?;
        let mut params = SchirnParams::default();
        params.apply_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        params.validate()?;
        let iterations_run = pairs
            .get("iterations-run")
            .map(|v| {
                v.parse()
                    .map_err(|_| PmlError::Config(format!("bad iterations-run {v:?}")))
            })
            .transpose()?
            .unwrap_or(0);
        Ok(Model {
            w,
            params,
            report: FitReport {
                iterations_run,
                ..FitReport::default()
            },
            training: None,
        })
    }
}

pub const MODEL_WEIGHTS: &str = "W.txt";
pub const MODEL_META: &str = "model.meta";

pub fn binarize<T: Scalar>(scores: &DenseMatrix<T>, threshold: T) -> DenseMatrix<T> {
    scores.map(|s| if s > threshold { T::one() } else { T::zero() })
}

/// Parse `key=value` lines. Blank lines and lines starting with `#` are
/// skipped; keys and values are trimmed; a repeated key keeps the last value.
pub fn parse_key_values(text: &str, origin: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(PmlError::Format {
                path: origin.to_string(),
                line: i + 1,
                msg: format!("expected key=value, got {line:?}"),
            });
        };
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}
