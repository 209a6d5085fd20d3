//! Target discretization, capture belief and Gaussian-process coverage
//! estimation.
//!
//! Ray terminals `X_s` with binary target labels `Y_s` are interpolated onto
//! the target coordinates `X` with the posterior mean of a GP using an RBF
//! kernel:
//!
//! ```text
//! k(a, b) = sigma_f^2 exp(-|a - b|^2 / (2 sigma_l^2))
//! mu*(X)  = k(X, X_s) [k(X_s, X_s) + sigma_n^2 I]^-1 Y_s
//! ```

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, PLANAR_HALF_THICKNESS};
use crate::raycast::{RaycastHit, Struck};
use crate::{Error, Result, Vec3};

/// One face of a box target, named by its outward axis direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Face {
    #[serde(rename = "x-")]
    XNeg,
    #[serde(rename = "x+")]
    XPos,
    #[serde(rename = "y-")]
    YNeg,
    #[serde(rename = "y+")]
    YPos,
    #[serde(rename = "z-")]
    ZNeg,
    #[serde(rename = "z+")]
    ZPos,
}

impl Face {
    pub const PLANAR: [Face; 4] = [Face::XNeg, Face::XPos, Face::YNeg, Face::YPos];
    pub const SPATIAL: [Face; 6] = [
        Face::XNeg,
        Face::XPos,
        Face::YNeg,
        Face::YPos,
        Face::ZNeg,
        Face::ZPos,
    ];

    pub fn axis(self) -> usize {
        match self {
            Face::XNeg | Face::XPos => 0,
            Face::YNeg | Face::YPos => 1,
            Face::ZNeg | Face::ZPos => 2,
        }
    }

    pub fn is_positive(self) -> bool {
        matches!(self, Face::XPos | Face::YPos | Face::ZPos)
    }

    pub fn outward(self) -> Vec3 {
        let mut n = Vec3::zeros();
        n[self.axis()] = if self.is_positive() { 1.0 } else { -1.0 };
        n
    }
}

/// Discretized target surface.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetModel {
    coords: Vec<Vec3>,
    face_of: Vec<Face>,
    faces: Vec<Face>,
    spacing: f64,
    body: Aabb,
    dims: usize,
}

fn samples(lo: f64, hi: f64, spacing: f64) -> Vec<f64> {
    let n = ((hi - lo) / spacing - 1e-9).ceil().max(1.0) as usize;
    (0..=n)
        .map(|k| lo + (hi - lo) * k as f64 / n as f64)
        .collect()
}

impl TargetModel {
    /// Samples the chosen faces of the box `center +- size / 2` every
    /// `spacing` metres (edges included, shared edges kept once).
    pub fn from_box(
        dims: usize,
        center: Vec3,
        size: Vec3,
        faces: &[Face],
        spacing: f64,
    ) -> Result<Self> {
        if dims != 2 && dims != 3 {
            return Err(Error::invalid(format!(
                "dimension count {dims} is not 2 or 3"
            )));
        }
        if !(spacing > 0.0) {
            return Err(Error::invalid("target spacing must be positive"));
        }
        if (0..dims).any(|i| !(size[i] > 0.0)) {
            return Err(Error::invalid("target size must be positive"));
        }
        if faces.is_empty() {
            return Err(Error::invalid("target needs at least one face"));
        }
        if dims == 2 && faces.iter().any(|f| f.axis() == 2) {
            return Err(Error::invalid("planar targets have no z faces"));
        }
        let mut half = size / 2.0;
        let mut center = center;
        if dims == 2 {
            half.z = PLANAR_HALF_THICKNESS;
            center.z = 0.0;
        }
        let body = Aabb::from_center_half(center, half);

        let mut coords: Vec<Vec3> = Vec::new();
        let mut face_of = Vec::new();
        let mut unique_faces = Vec::new();
        for &face in faces {
            if unique_faces.contains(&face) {
                continue;
            }
            unique_faces.push(face);
            let a = face.axis();
            let fixed = if face.is_positive() {
                body.max[a]
            } else {
                body.min[a]
            };
            let free: Vec<usize> = (0..dims).filter(|&i| i != a).collect();
            let grids: Vec<Vec<f64>> = free
                .iter()
                .map(|&i| samples(body.min[i], body.max[i], spacing))
                .collect();
            let mut push = |p: Vec3| {
                if !coords.iter().any(|q| (q - p).norm() < 1e-9) {
                    coords.push(p);
                    face_of.push(face);
                }
            };
            if dims == 2 {
                for &u in &grids[0] {
                    let mut p = Vec3::zeros();
                    p[a] = fixed;
                    p[free[0]] = u;
                    push(p);
                }
            } else {
                for &v in &grids[1] {
                    for &u in &grids[0] {
                        let mut p = Vec3::zeros();
                        p[a] = fixed;
                        p[free[0]] = u;
                        p[free[1]] = v;
                        push(p);
                    }
                }
            }
        }
        Ok(Self {
            coords,
            face_of,
            faces: unique_faces,
            spacing,
            body,
            dims,
        })
    }

    pub fn coords(&self) -> &[Vec3] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Sphere radius used when casting against target coordinates.
    pub fn sphere_radius(&self) -> f64 {
        0.75 * self.spacing
    }

    pub fn body(&self) -> Aabb {
        self.body
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face_of(&self, j: usize) -> Face {
        self.face_of[j]
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Centroid weighted by `1 - mu_j`; `None` when nothing is left to capture.
    pub fn interest_centroid(&self, mu: &[f64]) -> Option<Vec3> {
        let mut sum = Vec3::zeros();
        let mut w_total = 0.0;
        for (x, m) in self.coords.iter().zip(mu) {
            let w = (1.0 - m).max(0.0);
            sum += x * w;
            w_total += w;
        }
        (w_total > 1e-12).then(|| sum / w_total)
    }

    /// Distance from `p` to the nearest target coordinate.
    pub fn nearest_distance(&self, p: &Vec3) -> f64 {
        self.coords
            .iter()
            .map(|x| (x - p).norm_squared())
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    /// Whether some target coordinate lies within `r` of `p`.
    pub fn within(&self, p: &Vec3, r: f64) -> bool {
        let r2 = r * r;
        self.coords.iter().any(|x| (x - p).norm_squared() <= r2)
    }
}

/// Kernel hyperparameters plus the sample cap for the cubic solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpModel {
    pub sigma_f: f64,
    pub sigma_l: f64,
    pub sigma_n: f64,
    /// Samples beyond this count are subsampled uniformly before solving.
    pub sample_cap: usize,
}

impl GpModel {
    pub fn new(sigma_f: f64, sigma_l: f64, sigma_n: f64) -> Self {
        Self {
            sigma_f,
            sigma_l,
            sigma_n,
            sample_cap: 1500,
        }
    }

    /// Defaults for a target discretized at `spacing` metres.
    pub fn for_spacing(spacing: f64) -> Self {
        Self::new(1.0, 3.0 * spacing, 0.1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_f > 0.0 && self.sigma_l > 0.0 && self.sigma_n >= 0.0) {
            return Err(Error::invalid("GP scales must be positive"));
        }
        if self.sample_cap == 0 {
            return Err(Error::invalid("GP sample cap must be at least 1"));
        }
        Ok(())
    }

    #[inline]
    pub fn kernel(&self, a: &Vec3, b: &Vec3) -> f64 {
        self.sigma_f
            * self.sigma_f
            * (-(a - b).norm_squared() / (2.0 * self.sigma_l * self.sigma_l)).exp()
    }

    /// Distance beyond which samples are ignored as having no influence on
    /// target coordinates (kernel below `e^-8` of its peak).
    pub fn influence_radius(&self) -> f64 {
        4.0 * self.sigma_l
    }
}

type AxisLevels = ([Vec<f64>; 3], Vec<[usize; 3]>);

/// Distinct values of each axis over `a`, and each point's index into them.
/// `None` when the points share too few values for this to pay off.
fn axis_levels(a: &[Vec3]) -> Option<AxisLevels> {
    let levels = [0, 1, 2].map(|k| {
        let mut v: Vec<f64> = a.iter().map(|p| p[k]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    });
    if levels.iter().map(Vec::len).sum::<usize>() >= a.len() {
        return None;
    }
    let index = a
        .iter()
        .map(|p| [0, 1, 2].map(|k| levels[k].binary_search_by(|v| v.total_cmp(&p[k])).unwrap()))
        .collect();
    Some((levels, index))
}

pub fn rbf_kernel(a: &[Vec3], b: &[Vec3], gp: &GpModel) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| gp.kernel(&a[i], &b[j]))
}

/// `K(a, b) * w` without forming the kernel matrix. When `a` lies on a
/// lattice the kernel is evaluated as a product of per-axis factors.
pub fn kernel_times(a: &[Vec3], b: &[Vec3], w: &DVector<f64>, gp: &GpModel) -> DVector<f64> {
    assert_eq!(b.len(), w.len(), "one weight per kernel column");
    let mut out = DVector::zeros(a.len());
    let Some((levels, index)) = axis_levels(a) else {
        for (q, wj) in b.iter().zip(w.iter()) {
            for (o, p) in out.iter_mut().zip(a) {
                *o += gp.kernel(p, q) * wj;
            }
        }
        return out;
    };
    let c = -1.0 / (2.0 * gp.sigma_l * gp.sigma_l);
    let amp = gp.sigma_f * gp.sigma_f;
    let mut f: [Vec<f64>; 3] = [0, 1, 2].map(|ax| vec![0.0; levels[ax].len()]);
    for (q, wj) in b.iter().zip(w.iter()) {
        for ax in 0..3 {
            for (t, v) in f[ax].iter_mut().zip(&levels[ax]) {
                *t = (c * (v - q[ax]) * (v - q[ax])).exp();
            }
        }
        let s = amp * wj;
        for (o, ix) in out.iter_mut().zip(&index) {
            *o += s * f[0][ix[0]] * f[1][ix[1]] * f[2][ix[2]];
        }
    }
    out
}

fn condition_estimate(k: &DMatrix<f64>) -> f64 {
    let sym = DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| {
        if i >= j {
            k[(i, j)]
        } else {
            k[(j, i)]
        }
    });
    let eig = SymmetricEigen::new(sym).eigenvalues;
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

const BLOCK: usize = 32;

/// Lower Cholesky factor of a symmetric positive-definite matrix of which
/// only the lower triangle is read. Right-looking by blocks, so the bulk of
/// the work is matrix products.
fn blocked_cholesky(mut a: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut k = 0;
    while k < n {
        let b = BLOCK.min(n - k);
        let l11 = Cholesky::new(a.view((k, k), (b, b)).clone_owned())?.unpack();
        a.view_mut((k, k), (b, b)).copy_from(&l11);
        let rest = n - k - b;
        if rest > 0 {
            let mut inv = DMatrix::identity(b, b);
            if !l11.solve_lower_triangular_mut(&mut inv) {
                return None;
            }
            let mut l21 = DMatrix::zeros(rest, b);
            l21.gemm(1.0, &a.view((k + b, k), (rest, b)), &inv.transpose(), 0.0);
            a.view_mut((k + b, k), (rest, b)).copy_from(&l21);
            a.view_mut((k + b, k + b), (rest, rest))
                .gemm(-1.0, &l21, &l21.transpose(), 1.0);
        }
        k += b;
    }
    a.fill_upper_triangle(0.0, 1);
    Some(a)
}

/// Cholesky factor `L` of `K(xs, xs) + sigma_n^2 I`.
struct Factor {
    l: DMatrix<f64>,
}

impl Factor {
    fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let z = self
            .l
            .solve_lower_triangular(y)
            .expect("non-singular factor");
        self.l
            .tr_solve_lower_triangular(&z)
            .expect("non-singular factor")
    }

    fn half_log_det(&self) -> f64 {
        self.l.diagonal().iter().map(|d| d.ln()).sum()
    }
}

fn factor(xs: &[Vec3], gp: &GpModel) -> Result<Factor> {
    let n = xs.len();
    let noise = gp.sigma_n * gp.sigma_n;
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = gp.sigma_f * gp.sigma_f + noise;
        for i in j + 1..n {
            k[(i, j)] = gp.kernel(&xs[i], &xs[j]);
        }
    }
    match blocked_cholesky(k.clone()) {
        Some(l) if l.diagonal().iter().all(|d| *d > 0.0 && d.is_finite()) => Ok(Factor { l }),
        _ => Err(Error::Numerical {
            what: format!("GP system with {n} samples"),
            condition: condition_estimate(&k),
        }),
    }
}

/// Posterior mean at `x` given samples, clamped to [0, 1]. No samples gives
/// the zero vector.
pub fn posterior_mean(x: &[Vec3], xs: &[Vec3], ys: &[f64], gp: &GpModel) -> Result<DVector<f64>> {
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!(
            "{} sample coordinates but {} labels",
            xs.len(),
            ys.len()
        )));
    }
    if xs.is_empty() {
        return Ok(DVector::zeros(x.len()));
    }
    let chol = factor(xs, gp)?;
    let alpha = chol.solve(&DVector::from_column_slice(ys));
    let mut mu = kernel_times(x, xs, &alpha, gp);
    mu.apply(|v| *v = v.clamp(0.0, 1.0));
    Ok(mu)
}

/// Posterior mean with a non-zero prior mean: `prior_x` at the query points
/// and `prior_s` at the samples. Clamped to [0, 1].
pub fn posterior_mean_with_prior(
    x: &[Vec3],
    prior_x: &[f64],
    xs: &[Vec3],
    ys: &[f64],
    prior_s: &[f64],
    gp: &GpModel,
) -> Result<DVector<f64>> {
    if x.len() != prior_x.len() || xs.len() != ys.len() || xs.len() != prior_s.len() {
        return Err(Error::invalid("prior and sample lengths do not match"));
    }
    let mut mu = DVector::from_column_slice(prior_x);
    if !xs.is_empty() {
        let chol = factor(xs, gp)?;
        let resid = DVector::from_iterator(ys.len(), ys.iter().zip(prior_s).map(|(y, p)| y - p));
        let alpha = chol.solve(&resid);
        mu += kernel_times(x, xs, &alpha, gp);
    }
    mu.apply(|v| *v = v.clamp(0.0, 1.0));
    Ok(mu)
}

/// Uniform stride subsample of `0..n` down to at most `cap` indices.
fn stride_indices(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    (0..cap).map(|i| i * n / cap).collect()
}

/// Per-coordinate capture belief and the accumulated capture samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageField {
    mu: Vec<f64>,
    samples: Vec<Vec3>,
    labels: Vec<f64>,
}

impl CoverageField {
    pub fn new(m: usize) -> Self {
        Self {
            mu: vec![0.0; m],
            samples: Vec::new(),
            labels: Vec::new(),
        }
    }

    /// Field with a given prior belief, values clamped to [0, 1].
    pub fn with_prior(mu: Vec<f64>) -> Self {
        Self {
            mu: mu.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            samples: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn mean(&self) -> f64 {
        if self.mu.is_empty() {
            return 0.0;
        }
        self.mu.iter().sum::<f64>() / self.mu.len() as f64
    }

    pub fn samples(&self) -> (&[Vec3], &[f64]) {
        (&self.samples, &self.labels)
    }

    /// Comma-separated `x,y,z,mu` table with a header line.
    pub fn to_csv(&self, target: &TargetModel) -> String {
        let mut out = String::from("x,y,z,mu\n");
        for (x, m) in target.coords().iter().zip(&self.mu) {
            out.push_str(&format!("{},{},{},{}\n", x.x, x.y, x.z, m));
        }
        out
    }
}

/// Samples that can influence the target: every target hit, and other
/// terminals within the GP influence radius of some target coordinate.
fn relevant_samples<'h>(
    hits: &'h [RaycastHit],
    gp: &GpModel,
    target: &'h TargetModel,
) -> impl Iterator<Item = &'h RaycastHit> + use<'h> {
    let reach = target.sphere_radius() + gp.influence_radius();
    let body = target.body();
    hits.iter().filter(move |h| {
        h.is_target()
            || (body.distance_to(&h.terminal) <= reach && target.within(&h.terminal, reach))
    })
}

/// Expected coverage gain `sum_j max(0, mu*_j - mu_j)` for one candidate's
/// bundle. The candidate's samples are fused against the current belief used
/// as the prior mean, so already captured coordinates contribute nothing new.
pub fn expected_gain(
    field: &CoverageField,
    hits: &[RaycastHit],
    gp: &GpModel,
    target: &TargetModel,
) -> Result<f64> {
    let mu = field.mu();
    if mu.len() != target.len() {
        return Err(Error::invalid("coverage field does not match the target"));
    }
    let prior_at = |h: &RaycastHit| match h.struck {
        Struck::Target(j) => mu[j],
        _ => 0.0,
    };
    let relevant: Vec<&RaycastHit> = relevant_samples(hits, gp, target).collect();
    let resid: Vec<f64> = relevant.iter().map(|h| h.label() - prior_at(h)).collect();
    let seeds: Vec<Vec3> = relevant
        .iter()
        .zip(&resid)
        .filter(|(_, r)| r.abs() >= 1e-12)
        .map(|(h, _)| h.terminal)
        .collect();
    if seeds.is_empty() {
        return Ok(0.0);
    }
    // Zero-residual samples out of reach of every non-zero one, and
    // coordinates out of reach of every sample, are left out of the solve.
    let r2 = gp.influence_radius().powi(2);
    let near = |p: &Vec3, set: &[Vec3]| set.iter().any(|q| (p - q).norm_squared() <= r2);
    let coupled: Vec<usize> = (0..relevant.len())
        .filter(|&i| resid[i].abs() >= 1e-12 || near(&relevant[i].terminal, &seeds))
        .collect();
    let keep: Vec<usize> = stride_indices(coupled.len(), gp.sample_cap)
        .into_iter()
        .map(|k| coupled[k])
        .collect();
    let xs: Vec<Vec3> = keep.iter().map(|&i| relevant[i].terminal).collect();
    let ys: Vec<f64> = keep.iter().map(|&i| relevant[i].label()).collect();
    let ps: Vec<f64> = keep.iter().map(|&i| prior_at(relevant[i])).collect();
    let rows: Vec<usize> = (0..target.len())
        .filter(|&j| near(&target.coords()[j], &xs))
        .collect();
    let x: Vec<Vec3> = rows.iter().map(|&j| target.coords()[j]).collect();
    let px: Vec<f64> = rows.iter().map(|&j| mu[j]).collect();
    let post = posterior_mean_with_prior(&x, &px, &xs, &ys, &ps, gp)?;
    Ok(post.iter().zip(&px).map(|(p, m)| (p - m).max(0.0)).sum())
}

/// Adds a photo's samples to the accumulated labels and raises the belief to
/// the posterior over all accumulated samples (never lowering it).
pub fn commit_capture(
    field: &mut CoverageField,
    hits: &[RaycastHit],
    gp: &GpModel,
    target: &TargetModel,
) -> Result<()> {
    if field.mu.len() != target.len() {
        return Err(Error::invalid("coverage field does not match the target"));
    }
    for h in relevant_samples(hits, gp, target) {
        field.samples.push(h.terminal);
        field.labels.push(h.label());
    }
    let keep = stride_indices(field.samples.len(), gp.sample_cap);
    let xs: Vec<Vec3> = keep.iter().map(|&i| field.samples[i]).collect();
    let ys: Vec<f64> = keep.iter().map(|&i| field.labels[i]).collect();
    let post = posterior_mean(target.coords(), &xs, &ys, gp)?;
    for (m, p) in field.mu.iter_mut().zip(post.iter()) {
        *m = m.max(*p).clamp(0.0, 1.0);
    }
    Ok(())
}

/// Gaussian negative log marginal likelihood of `ys` under `gp`.
pub fn negative_log_likelihood(xs: &[Vec3], ys: &[f64], gp: &GpModel) -> Result<f64> {
    let chol = factor(xs, gp)?;
    let y = DVector::from_column_slice(ys);
    let alpha = chol.solve(&y);
    let log_det = chol.half_log_det();
    Ok(0.5 * y.dot(&alpha) + log_det + 0.5 * xs.len() as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// Picks the `(sigma_f, sigma_l)` pair from `grid` with the lowest negative
/// log-likelihood. Candidates whose kernel matrix is singular are skipped.
pub fn tune_hyperparameters(
    xs: &[Vec3],
    ys: &[f64],
    grid: &[(f64, f64)],
    base: &GpModel,
) -> Result<GpModel> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return Err(Error::invalid("tuning needs at least two labelled samples"));
    }
    if grid.is_empty() {
        return Err(Error::invalid("empty hyperparameter grid"));
    }
    let keep = stride_indices(xs.len(), base.sample_cap);
    let xs: Vec<Vec3> = keep.iter().map(|&i| xs[i]).collect();
    let ys: Vec<f64> = keep.iter().map(|&i| ys[i]).collect();
    let mut best: Option<(f64, GpModel)> = None;
    for &(sigma_f, sigma_l) in grid {
        let candidate = GpModel {
            sigma_f,
            sigma_l,
            ..*base
        };
        if candidate.validate().is_err() {
            warn!("skipping invalid GP candidate sigma_f={sigma_f} sigma_l={sigma_l}");
            continue;
        }
        match negative_log_likelihood(&xs, &ys, &candidate) {
            Ok(nll) if nll.is_finite() => {
                if best.as_ref().is_none_or(|(b, _)| nll < *b) {
                    best = Some((nll, candidate));
                }
            }
            Ok(_) | Err(_) => {
                warn!("skipping singular GP candidate sigma_f={sigma_f} sigma_l={sigma_l}")
            }
        }
    }
    best.map(|(_, gp)| gp).ok_or_else(|| Error::Numerical {
        what: "every hyperparameter candidate was singular".into(),
        condition: f64::INFINITY,
    })
}
