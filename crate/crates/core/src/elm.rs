//! Linear readout of an extreme learning machine.
//!
//! Features are z-scored on the training split, a constant bias column is
//! appended, and one-hot targets are fitted by ridge regression
//! `W = (Zᵀ Z + λ I)⁻¹ Zᵀ T`. When there are more features than samples the
//! equivalent dual form `W = Zᵀ (Z Zᵀ + λ I)⁻¹ T` is solved instead; both go
//! through a Cholesky factorization.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::{Cholesky, Diag, FactorizeInto, Solve, SolveTriangular, UPLO};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{QelmError, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// Labelled feature matrix: `p` samples by `q` features.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: Array2<f64>,
    y: Vec<usize>,
    n_classes: usize,
}

impl Dataset {
    /// Number of classes is `max(y) + 1`; every class must occur.
    pub fn new(x: Array2<f64>, y: Vec<usize>) -> Result<Self> {
        let n_classes = y.iter().max().map_or(0, |&c| c + 1);
        Self::with_classes(x, y, n_classes)
    }

    pub fn with_classes(x: Array2<f64>, y: Vec<usize>, n_classes: usize) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(QelmError::Dimension(format!(
                "{} feature rows but {} labels",
                x.nrows(),
                y.len()
            )));
        }
        if n_classes == 0 || y.is_empty() {
            return Err(QelmError::Data("dataset is empty".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(QelmError::Data("features contain NaN or infinite values".into()));
        }
        let mut present = vec![0usize; n_classes];
        for &label in &y {
            *present.get_mut(label).ok_or_else(|| {
                QelmError::Data(format!("label {label} outside 0..{n_classes}"))
            })? += 1;
        }
        if let Some(c) = present.iter().position(|&n| n == 0) {
            return Err(QelmError::Data(format!("class {c} has no samples")));
        }
        Ok(Self { x, y, n_classes })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn labels(&self) -> &[usize] {
        &self.y
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_samples(&self) -> usize {
        self.y.len()
    }

    fn rows(&self, idx: &[usize]) -> (Array2<f64>, Vec<usize>) {
        (self.x.select(Axis(0), idx), idx.iter().map(|&i| self.y[i]).collect())
    }
}

/// Column-wise z-scoring (population standard deviation).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    means: Array1<f64>,
    stds: Array1<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let p = x.nrows() as f64;
        let means = x.sum_axis(Axis(0)) / p;
        let mut stds = Array1::zeros(x.ncols());
        for (j, col) in x.columns().into_iter().enumerate() {
            let mu = means[j];
            let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / p;
            let sd = var.sqrt();
            // constant columns (up to rounding) are left unscaled
            stds[j] = if sd == 0.0 || sd <= 1e-12 * mu.abs() { 1.0 } else { sd };
        }
        Self { means, stds }
    }

    pub fn means(&self) -> &Array1<f64> {
        &self.means
    }

    pub fn stds(&self) -> &Array1<f64> {
        &self.stds
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        (&x - &self.means) / &self.stds
    }

    /// Standardized features with a trailing column of ones.
    pub fn design_matrix(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let (p, q) = x.dim();
        let mut z = Array2::ones((p, q + 1));
        let mut body = z.slice_mut(s![.., ..q]);
        body.assign(&x);
        body -= &self.means;
        body /= &self.stds;
        z
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    /// `(q + 1) x c`; the last row multiplies the bias column.
    weights: Array2<f64>,
    standardizer: Standardizer,
    lambda: f64,
}

impl ReadoutModel {
    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn feature_means(&self) -> &Array1<f64> {
        self.standardizer.means()
    }

    pub fn feature_stds(&self) -> &Array1<f64> {
        self.standardizer.stds()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n_features(&self) -> usize {
        self.weights.nrows() - 1
    }

    pub fn n_classes(&self) -> usize {
        self.weights.ncols()
    }

    /// Raw class scores `[standardize(X), 1] · W`.
    pub fn scores(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features() {
            return Err(QelmError::Dimension(format!(
                "model expects {} features, got {}",
                self.n_features(),
                x.ncols()
            )));
        }
        Ok(self.standardizer.design_matrix(x).dot(&self.weights))
    }

    /// Replaces the weights; used to build reference models in tests and tools.
    pub fn with_weights(mut self, weights: Array2<f64>) -> Result<Self> {
        if weights.dim() != self.weights.dim() {
            return Err(QelmError::Dimension("weight shape mismatch".into()));
        }
        self.weights = weights;
        Ok(self)
    }
}

/// One-hot `p x c` target matrix.
pub fn one_hot(y: &[usize], n_classes: usize) -> Array2<f64> {
    let mut t = Array2::zeros((y.len(), n_classes));
    for (i, &c) in y.iter().enumerate() {
        t[[i, c]] = 1.0;
    }
    t
}

/// A training split with its λ-independent parts precomputed, so a whole
/// regularization grid costs one Gram matrix and one factorization per λ.
pub struct RidgeProblem {
    standardizer: Standardizer,
    z: Array2<f64>,
    targets: Array2<f64>,
    gram: Array2<f64>,
    /// `Zᵀ T` in the primal form, `T` in the dual form.
    rhs: Array2<f64>,
    dual: bool,
}

impl RidgeProblem {
    pub fn new(x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(QelmError::Dimension(format!(
                "{} feature rows but {} labels",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() == 0 {
            return Err(QelmError::Data("empty training set".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(QelmError::Data("features contain NaN or infinite values".into()));
        }
        if let Some(&c) = y.iter().find(|&&c| c >= n_classes) {
            return Err(QelmError::Data(format!("label {c} outside 0..{n_classes}")));
        }
        let standardizer = Standardizer::fit(x);
        let z = standardizer.design_matrix(x);
        let targets = one_hot(y, n_classes);
        let dual = z.ncols() > z.nrows();
        let (gram, rhs) = if dual {
            (gram(&z, false), targets.clone())
        } else {
            (gram(&z, true), z.t().dot(&targets))
        };
        Ok(Self { standardizer, z, targets, gram, rhs, dual })
    }

    pub fn design_matrix(&self) -> &Array2<f64> {
        &self.z
    }

    pub fn targets(&self) -> &Array2<f64> {
        &self.targets
    }

    pub fn solve(&self, lambda: f64) -> Result<ReadoutModel> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(QelmError::Model(format!("ridge penalty must be positive, got {lambda}")));
        }
        let mut a = self.gram.clone();
        a.diag_mut().mapv_inplace(|v| v + lambda);
        let sol = spd_solve(a, &self.rhs)?;
        let weights = if self.dual { self.z.t().dot(&sol) } else { sol };
        Ok(ReadoutModel { weights, standardizer: self.standardizer.clone(), lambda })
    }
}

/// `Z Zᵀ` (or `Zᵀ Z` when `transpose`) through a symmetric rank-k update,
/// which does half the work of a general product.
fn gram(z: &Array2<f64>, transpose: bool) -> Array2<f64> {
    use cblas_sys::{cblas_dsyrk, CBLAS_LAYOUT, CBLAS_TRANSPOSE, CBLAS_UPLO};
    let z = z.as_standard_layout();
    let (rows, cols) = z.dim();
    let (n, k, trans) = if transpose {
        (cols, rows, CBLAS_TRANSPOSE::CblasTrans)
    } else {
        (rows, cols, CBLAS_TRANSPOSE::CblasNoTrans)
    };
    let as_int = |v: usize| i32::try_from(v).expect("matrix dimension exceeds BLAS integer range");
    let mut g = Array2::<f64>::zeros((n, n));
    // SAFETY: `z` is a contiguous row-major rows x cols buffer with leading
    // dimension `cols`; `g` is a contiguous n x n buffer. dsyrk reads only
    // the described region of `z` and writes only the lower triangle of `g`.
    unsafe {
        cblas_dsyrk(
            CBLAS_LAYOUT::CblasRowMajor,
            CBLAS_UPLO::CblasLower,
            trans,
            as_int(n),
            as_int(k),
            1.0,
            z.as_ptr(),
            as_int(cols.max(1)),
            0.0,
            g.as_mut_ptr(),
            as_int(n.max(1)),
        );
    }
    for i in 0..n {
        for j in 0..i {
            g[[j, i]] = g[[i, j]];
        }
    }
    g
}

/// Solves `A X = B` for symmetric positive definite `A`; falls back to LU
/// when the Cholesky factorization breaks down numerically.
fn spd_solve(a: Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    match a.cholesky(UPLO::Lower) {
        Ok(l) => {
            let y = l.solve_triangular(UPLO::Lower, Diag::NonUnit, b)?;
            let lt = l.t().to_owned();
            Ok(lt.solve_triangular(UPLO::Upper, Diag::NonUnit, &y)?)
        }
        Err(_) => {
            log::debug!("cholesky failed, falling back to LU");
            let lu = a.factorize_into()?;
            let mut out = Array2::zeros(b.raw_dim());
            for (j, col) in b.columns().into_iter().enumerate() {
                out.column_mut(j).assign(&lu.solve(&col.to_owned())?);
            }
            Ok(out)
        }
    }
}

pub fn train_ridge(x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize, lambda: f64) -> Result<ReadoutModel> {
    RidgeProblem::new(x, y, n_classes)?.solve(lambda)
}

/// Argmax class per row; ties go to the lowest class index.
pub fn predict(model: &ReadoutModel, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    let scores = model.scores(x)?;
    Ok(scores
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect())
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    assert_eq!(predicted.len(), truth.len());
    if truth.is_empty() {
        return 0.0;
    }
    predicted.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

/// Cross-validation protocol parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub k: usize,
    pub lambda_grid: Vec<f64>,
    pub n_permutations: usize,
    pub seed: u64,
}

impl CrossValidation {
    pub const DEFAULT_K: usize = 5;
    pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [1e-6, 1e-4, 1e-2, 1.0, 1e2];

    pub fn new(seed: u64) -> Self {
        Self {
            k: Self::DEFAULT_K,
            lambda_grid: Self::DEFAULT_LAMBDA_GRID.to_vec(),
            n_permutations: 1,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy_mean: f64,
    /// Population standard deviation of `per_fold`.
    pub accuracy_std: f64,
    /// Test accuracies, permutation-major then fold.
    pub per_fold: Vec<f64>,
    /// λ selected on the confirmation fold, aligned with `per_fold`.
    pub fold_lambdas: Vec<f64>,
    /// Most frequently selected λ (smallest on ties).
    pub chosen_lambda: f64,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Stratified assignment of samples to `k` folds. Each class is shuffled and
/// dealt round-robin, continuing where the previous class stopped so fold
/// sizes differ by at most one. Indices inside a fold are sorted.
pub fn stratified_folds(y: &[usize], n_classes: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = rng_from_seed(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        members.shuffle(&mut rng);
        for i in members {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    folds
}

/// `k`-fold evaluation with a confirmation fold for λ selection.
///
/// For each permutation and each test fold `f`, fold `(f + 1) mod k` is the
/// confirmation set and the remaining `k - 2` folds are the training set.
/// Every λ in the grid is fitted on training and scored on confirmation
/// (ties go to the smaller λ); the winner is refitted on training plus
/// confirmation and scored on the test fold.
pub fn cross_validate(data: &Dataset, cv: &CrossValidation) -> Result<EvalReport> {
    if cv.k < 3 {
        return Err(QelmError::Model(format!("cross-validation needs k >= 3, got {}", cv.k)));
    }
    if cv.lambda_grid.is_empty() {
        return Err(QelmError::Model("lambda grid is empty".into()));
    }
    if cv.n_permutations == 0 {
        return Err(QelmError::Model("at least one permutation is required".into()));
    }
    if data.n_samples() < cv.k {
        return Err(QelmError::Stratification(format!(
            "{} samples cannot fill {} folds",
            data.n_samples(),
            cv.k
        )));
    }
    let mut grid = cv.lambda_grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let c = data.n_classes();

    let mut per_fold = Vec::with_capacity(cv.n_permutations * cv.k);
    let mut fold_lambdas = Vec::with_capacity(per_fold.capacity());
    for perm in 0..cv.n_permutations {
        let folds = stratified_folds(data.labels(), c, cv.k, derive_seed(cv.seed, &[perm as u64]));
        for test in 0..cv.k {
            let conf = (test + 1) % cv.k;
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(f, _)| *f != test && *f != conf)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect();
            let (x_train, y_train) = data.rows(&train);
            check_all_classes(&y_train, c, perm, test)?;

            let lambda = if grid.len() == 1 {
                grid[0]
            } else {
                let (x_conf, y_conf) = data.rows(&folds[conf]);
                let problem = RidgeProblem::new(x_train.view(), &y_train, c)?;
                let mut best = (f64::NEG_INFINITY, grid[0]);
                for &lambda in &grid {
                    let model = problem.solve(lambda)?;
                    let acc = accuracy(&predict(&model, x_conf.view())?, &y_conf);
                    if acc > best.0 {
                        best = (acc, lambda);
                    }
                }
                best.1
            };

            let mut refit: Vec<usize> = train.iter().chain(&folds[conf]).copied().collect();
            refit.sort_unstable();
            let (x_refit, y_refit) = data.rows(&refit);
            let model = train_ridge(x_refit.view(), &y_refit, c, lambda)?;
            let (x_test, y_test) = data.rows(&folds[test]);
            per_fold.push(accuracy(&predict(&model, x_test.view())?, &y_test));
            fold_lambdas.push(lambda);
        }
    }
    let (accuracy_mean, accuracy_std) = mean_std(&per_fold);
    Ok(EvalReport {
        accuracy_mean,
        accuracy_std,
        chosen_lambda: most_frequent(&fold_lambdas),
        per_fold,
        fold_lambdas,
    })
}

fn check_all_classes(y: &[usize], n_classes: usize, perm: usize, fold: usize) -> Result<()> {
    let mut seen = vec![false; n_classes];
    y.iter().for_each(|&c| seen[c] = true);
    match seen.iter().position(|s| !s) {
        Some(c) => Err(QelmError::Stratification(format!(
            "class {c} is absent from the training split (permutation {perm}, test fold {fold})"
        ))),
        None => Ok(()),
    }
}

fn most_frequent(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = (0usize, f64::NAN);
    let mut i = 0;
    while i < sorted.len() {
        let run = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        if run > best.0 {
            best = (run, sorted[i]);
        }
        i += run;
    }
    best.1
}
