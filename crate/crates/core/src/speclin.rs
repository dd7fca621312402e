//! Spectral decomposition of a band-major matrix `Y` (`L × N`): the thin
//! SVD basis `U`, projection onto eigenimages `E = Uᵀ·Y`, rank-`R`
//! reconstruction, and the cumulative-energy channel cutoff used to pick
//! training channels.

use rand::Rng;

use crate::cube::HsiCube;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::linalg::{dot, gemm, jacobi_eigen_symmetric, Matrix};

/// Jacobi stops once the largest off-diagonal entry is below this fraction
/// of the Gram matrix trace.
const JACOBI_REL_TOL: f64 = 1e-12;

/// Singular values below this fraction of `σ₁` are treated as zero rank.
const ZERO_RANK_REL: f64 = 1e-12;

/// Below this fraction of `σ₁`, `sqrt(λ)` from the Gram matrix has lost
/// too many digits and the value is recomputed as `‖Yᵀu‖`.
const REFINE_REL: f64 = 1e-2;

/// Left singular vectors and singular values of `Y`.
///
/// Columns of `basis` are orthonormal, `singular_values` are descending,
/// and in each column the entry of largest magnitude (lowest row on ties)
/// is nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    basis: Matrix,
    singular_values: Vec<f64>,
}

impl SpectralDecomposition {
    /// Assembles a decomposition from parts, checking the invariants.
    pub fn from_parts(basis: Matrix, singular_values: Vec<f64>) -> Result<Self> {
        let l = basis.rows();
        if basis.cols() != l || singular_values.len() != l {
            return Err(Error::DimensionMismatch(format!(
                "basis {}x{} with {} singular values",
                basis.rows(),
                basis.cols(),
                singular_values.len()
            )));
        }
        let gram = basis.t_matmul(&basis)?;
        if gram.sub(&Matrix::identity(l)).max_abs() > 1e-9 {
            return Err(Error::InvalidArgument("basis is not orthonormal".into()));
        }
        if singular_values.windows(2).any(|w| w[0] < w[1])
            || singular_values.iter().any(|s| *s < 0.0)
        {
            return Err(Error::InvalidArgument(
                "singular values must be nonnegative and descending".into(),
            ));
        }
        Ok(SpectralDecomposition {
            basis,
            singular_values,
        })
    }

    /// Number of bands `L`.
    pub fn bands(&self) -> usize {
        self.basis.rows()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Column `i` of `U`.
    pub fn basis_vector(&self, i: usize) -> Vec<f64> {
        self.basis.column(i)
    }

    /// `U_{:,1:R}` as an `L × R` matrix.
    pub fn leading(&self, rank: usize) -> Result<Matrix> {
        check_rank(rank, self.bands())?;
        Ok(self.basis.leading_columns(rank))
    }
}

/// Eigenimages `E = (U_{:,1:R})ᵀ·Y`, one spatial image per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenimageStack {
    height: usize,
    width: usize,
    coeffs: Matrix,
}

impl EigenimageStack {
    pub fn new(coeffs: Matrix, height: usize, width: usize) -> Result<Self> {
        if coeffs.cols() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "{} columns for {height}x{width} eigenimages",
                coeffs.cols()
            )));
        }
        Ok(EigenimageStack {
            height,
            width,
            coeffs,
        })
    }

    pub fn from_channels(channels: &[Image]) -> Result<Self> {
        let first = channels.first().ok_or(Error::Empty("no eigenimages"))?;
        let (h, w) = first.dims();
        let mut data = Vec::with_capacity(channels.len() * h * w);
        for c in channels {
            if c.dims() != (h, w) {
                return Err(Error::DimensionMismatch(
                    "eigenimages differ in size".into(),
                ));
            }
            data.extend_from_slice(c.as_slice());
        }
        EigenimageStack::new(Matrix::from_vec(channels.len(), h * w, data)?, h, w)
    }

    pub fn channels(&self) -> usize {
        self.coeffs.rows()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// The `R × N` coefficient matrix.
    pub fn coeffs(&self) -> &Matrix {
        &self.coeffs
    }

    pub fn channel_slice(&self, i: usize) -> &[f64] {
        self.coeffs.row(i)
    }

    pub fn channel(&self, i: usize) -> Image {
        Image::new(self.height, self.width, self.coeffs.row(i).to_vec())
            .expect("eigenimage geometry is consistent")
    }

    pub fn iter_channels(&self) -> impl Iterator<Item = Image> + '_ {
        (0..self.channels()).map(|i| self.channel(i))
    }
}

fn check_rank(rank: usize, bands: usize) -> Result<()> {
    if rank == 0 || rank > bands {
        return Err(Error::RankOutOfRange { rank, bands });
    }
    Ok(())
}

/// Thin SVD of `Y` restricted to `U` and `σ`.
///
/// Works through the `L × L` Gram matrix `Y·Yᵀ`, which is cheap when the
/// band count is small relative to the pixel count. `L > N` is allowed:
/// the surplus singular values are zero and their basis columns complete
/// `U` to an orthonormal basis.
pub fn spectral_svd(y: &Matrix) -> Result<SpectralDecomposition> {
    let l = y.rows();
    if l == 0 || y.cols() == 0 {
        return Err(Error::Empty("spectral_svd needs a nonempty matrix"));
    }
    if y.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("spectral_svd input"));
    }

    let (eig, vecs) = jacobi_eigen_symmetric(&y.gram(), JACOBI_REL_TOL)?;
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| eig[b].total_cmp(&eig[a]));

    let mut basis = Matrix::zeros(l, l);
    let mut sigma = Vec::with_capacity(l);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..l {
            basis[(r, dst)] = vecs[(r, src)];
        }
        sigma.push(eig[src].max(0.0).sqrt());
    }

    let s1 = sigma[0];
    if s1 > 0.0 {
        refine_small_singular_values(y, &mut basis, &mut sigma, s1);
        let zeroed: Vec<usize> = (0..l).filter(|&j| sigma[j] < ZERO_RANK_REL * s1).collect();
        for &j in &zeroed {
            sigma[j] = 0.0;
        }
        complete_columns(&mut basis, &zeroed);
    }
    apply_sign_convention(&mut basis);

    Ok(SpectralDecomposition {
        basis,
        singular_values: sigma,
    })
}

/// Recomputes the tail of `σ` directly from the data and restores the
/// descending order of that tail.
fn refine_small_singular_values(y: &Matrix, basis: &mut Matrix, sigma: &mut [f64], s1: f64) {
    let l = basis.rows();
    let Some(start) = sigma.iter().position(|&s| s < REFINE_REL * s1) else {
        return;
    };
    // ‖Yᵀu_j‖ for the whole tail in one product
    let k = l - start;
    let n = y.cols();
    let mut ut = vec![0.0; k * l];
    for j in 0..k {
        for r in 0..l {
            ut[j * l + r] = basis[(r, start + j)];
        }
    }
    let mut proj = vec![0.0; k * n];
    gemm(k, l, n, &ut, false, y.as_slice(), false, &mut proj, 0.0);
    for j in 0..k {
        let row = &proj[j * n..(j + 1) * n];
        sigma[start + j] = dot(row, row).sqrt();
    }

    let mut tail: Vec<usize> = (start..l).collect();
    tail.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    if tail.iter().enumerate().any(|(k, &t)| t != start + k) {
        let old_basis = basis.clone();
        let old_sigma = sigma.to_vec();
        for (k, &src) in tail.iter().enumerate() {
            let dst = start + k;
            sigma[dst] = old_sigma[src];
            for r in 0..l {
                basis[(r, dst)] = old_basis[(r, src)];
            }
        }
    }
}

/// Replaces each listed column `j` with a unit vector orthogonal to columns
/// `0..j`, starting from the current column and falling back to the
/// standard basis. Works on the transpose so columns are contiguous.
fn complete_columns(basis: &mut Matrix, cols: &[usize]) {
    if cols.is_empty() {
        return;
    }
    let l = basis.rows();
    let mut bt = basis.transpose();
    let mut x = vec![0.0; l];
    for &j in cols {
        let (done, rest) = bt.as_mut_slice().split_at_mut(j * l);
        let target = &mut rest[..l];
        let mut placed = false;
        for cand in 0..=l {
            if cand == 0 {
                x.copy_from_slice(target);
            } else {
                x.iter_mut().for_each(|v| *v = 0.0);
                x[cand - 1] = 1.0;
            }
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for col in done.chunks_exact(l) {
                    let c = dot(col, &x);
                    x.iter_mut().zip(col).for_each(|(xi, ci)| *xi -= c * ci);
                }
            }
            let norm = dot(&x, &x).sqrt();
            if norm > 1e-6 {
                target.iter_mut().zip(&x).for_each(|(t, v)| *t = v / norm);
                placed = true;
                break;
            }
        }
        assert!(placed, "the standard basis spans the complement");
    }
    *basis = bt.transpose();
}

/// Flips each column so its largest-magnitude entry (lowest row on ties)
/// is nonnegative.
fn apply_sign_convention(basis: &mut Matrix) {
    let l = basis.rows();
    for j in 0..basis.cols() {
        let mut best = 0;
        for r in 1..l {
            if basis[(r, j)].abs() > basis[(best, j)].abs() {
                best = r;
            }
        }
        if basis[(best, j)] < 0.0 {
            for r in 0..l {
                basis[(r, j)] = -basis[(r, j)];
            }
        }
    }
}

/// `(U_{:,1:R})ᵀ·Y` as an `R × N` matrix.
pub fn project_matrix(y: &Matrix, dec: &SpectralDecomposition, rank: usize) -> Result<Matrix> {
    let l = dec.bands();
    check_rank(rank, l)?;
    if y.rows() != l {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} bands, basis has {l}",
            y.rows()
        )));
    }
    let u = dec.basis.leading_columns(rank);
    let n = y.cols();
    let mut out = Matrix::zeros(rank, n);
    gemm(
        rank,
        l,
        n,
        u.as_slice(),
        true,
        y.as_slice(),
        false,
        out.as_mut_slice(),
        0.0,
    );
    Ok(out)
}

/// Projects a cube onto the leading `rank` basis vectors.
pub fn project(
    cube: &HsiCube,
    dec: &SpectralDecomposition,
    rank: usize,
) -> Result<EigenimageStack> {
    let coeffs = project_matrix(cube.matrix(), dec, rank)?;
    EigenimageStack::new(coeffs, cube.height(), cube.width())
}

/// `U_{:,1:R}·E` where `R` is the number of eigenimage channels.
pub fn reconstruct_matrix(e: &Matrix, dec: &SpectralDecomposition) -> Result<Matrix> {
    let l = dec.bands();
    let rank = e.rows();
    if rank > l {
        return Err(Error::DimensionMismatch(format!(
            "{rank} eigenimage channels exceed {l} bands"
        )));
    }
    let n = e.cols();
    let mut out = Matrix::zeros(l, n);
    if rank == 0 {
        return Ok(out);
    }
    let u = dec.basis.leading_columns(rank);
    gemm(
        l,
        rank,
        n,
        u.as_slice(),
        false,
        e.as_slice(),
        false,
        out.as_mut_slice(),
        0.0,
    );
    Ok(out)
}

/// Maps eigenimages back to band space.
pub fn reconstruct(e: &EigenimageStack, dec: &SpectralDecomposition) -> Result<Matrix> {
    reconstruct_matrix(e.coeffs(), dec)
}

/// Like [`reconstruct`], keeping the spatial geometry.
pub fn reconstruct_cube(e: &EigenimageStack, dec: &SpectralDecomposition) -> Result<HsiCube> {
    HsiCube::from_matrix(reconstruct(e, dec)?, e.height(), e.width())
}

/// Cumulative-energy cutoff: the largest `p` with
/// `cumsum(σ/Σσ)_p ≤ τ`, floored at 1.
pub fn channel_cutoff(sigma: &[f64], tau: f64) -> Result<usize> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidArgument(format!("tau {tau} not in (0, 1]")));
    }
    if sigma.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::InvalidArgument(
            "singular values must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = sigma.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("all singular values are zero".into()));
    }
    // q_j = (σ₁ + … + σ_j) / Σσ; the final prefix equals the total exactly,
    // so q_L is exactly 1.
    let mut prefix = 0.0;
    let mut p = 0;
    for (j, s) in sigma.iter().enumerate() {
        prefix += s;
        if prefix / total <= tau {
            p = j + 1;
        }
    }
    Ok(p.max(1))
}

/// Draws a training channel uniformly from the first `p` eigenimages.
/// Returns a zero-based index, i.e. channel `c = index + 1`.
pub fn sample_channel<R: Rng + ?Sized>(p: usize, rng: &mut R) -> usize {
    assert!(p >= 1, "cutoff must be at least 1");
    rng.random_range(0..p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
        a.sub(b).frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn rank_one_two_by_two() {
        // Y·Yᵀ = [[5,10],[10,20]] has eigenvalues 25 and 0.
        let y = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        let dec = spectral_svd(&y).unwrap();
        let s = dec.singular_values();
        assert!((s[0] - 5.0).abs() < 1e-12);
        assert_eq!(s[1], 0.0);
        let u1 = dec.basis_vector(0);
        let r5 = 5f64.sqrt();
        assert!((u1[0] - 1.0 / r5).abs() < 1e-12);
        assert!((u1[1] - 2.0 / r5).abs() < 1e-12);
    }

    #[test]
    fn identity_gives_signed_permutation() {
        let dec = spectral_svd(&Matrix::identity(3)).unwrap();
        assert_eq!(dec.singular_values(), &[1.0, 1.0, 1.0]);
        let u = dec.basis();
        for j in 0..3 {
            let col = u.column(j);
            let ones = col.iter().filter(|v| (**v - 1.0).abs() < 1e-15).count();
            let zeros = col.iter().filter(|v| v.abs() < 1e-15).count();
            assert_eq!((ones, zeros), (1, 2), "column {j}: {col:?}");
        }
    }

    #[test]
    fn sign_convention_holds() {
        let y = random_matrix(6, 40, 7);
        let dec = spectral_svd(&y).unwrap();
        for j in 0..6 {
            let col = dec.basis_vector(j);
            let mut best = 0;
            for r in 1..6 {
                if col[r].abs() > col[best].abs() {
                    best = r;
                }
            }
            assert!(col[best] >= 0.0);
        }
    }

    #[test]
    fn more_bands_than_pixels_pads_with_zeros() {
        let y = random_matrix(5, 2, 3);
        let dec = spectral_svd(&y).unwrap();
        let s = dec.singular_values();
        assert!(s[1] > 0.0);
        assert_eq!(&s[2..], &[0.0, 0.0, 0.0]);
        let gram = dec.basis().t_matmul(dec.basis()).unwrap();
        assert!(gram.sub(&Matrix::identity(5)).max_abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_has_identity_basis() {
        let dec = spectral_svd(&Matrix::zeros(3, 4)).unwrap();
        assert_eq!(dec.singular_values(), &[0.0; 3]);
        assert_eq!(dec.basis(), &Matrix::identity(3));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(spectral_svd(&Matrix::zeros(0, 3)).is_err());
        let y = Matrix::from_rows(&[[1.0, f64::INFINITY]]).unwrap();
        assert!(matches!(spectral_svd(&y), Err(Error::NonFiniteInput(_))));
    }

    #[test]
    fn project_rank_one_factor() {
        // Y = u·eᵀ with unit u; the sole eigenimage is ±e
        let u = [0.6, 0.8];
        let e = [1.0, -2.0, 3.0, 0.5];
        let rows: Vec<Vec<f64>> = u
            .iter()
            .map(|ui| e.iter().map(|ej| ui * ej).collect())
            .collect();
        let cube = HsiCube::from_matrix(Matrix::from_rows(&rows).unwrap(), 2, 2).unwrap();
        let dec = spectral_svd(cube.matrix()).unwrap();
        let stack = project(&cube, &dec, 1).unwrap();
        let got = stack.channel_slice(0);
        // u has all-positive entries so the sign convention keeps +u
        for (g, w) in got.iter().zip(e) {
            assert!((g - w).abs() < 1e-12, "{got:?}");
        }
    }

    #[test]
    fn project_hand_example() {
        let y = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        let dec = spectral_svd(&y).unwrap();
        let e = project_matrix(&y, &dec, 1).unwrap();
        let r5 = 5f64.sqrt();
        assert!((e[(0, 0)] - r5).abs() < 1e-12);
        assert!((e[(0, 1)] - 2.0 * r5).abs() < 1e-12);
        // rank-1 input is reproduced exactly by R = 1
        let back = reconstruct_matrix(&e, &dec).unwrap();
        assert!(rel_err(&back, &y) < 1e-12);
    }

    #[test]
    fn full_rank_round_trip() {
        let y = random_matrix(5, 30, 11);
        let dec = spectral_svd(&y).unwrap();
        let e = project_matrix(&y, &dec, 5).unwrap();
        assert!(rel_err(&reconstruct_matrix(&e, &dec).unwrap(), &y) < 1e-9);
    }

    #[test]
    fn exact_low_rank_reconstruction() {
        let a = random_matrix(7, 3, 1);
        let b = random_matrix(3, 50, 2);
        let y = a.matmul(&b).unwrap();
        let dec = spectral_svd(&y).unwrap();
        let e = project_matrix(&y, &dec, 3).unwrap();
        assert!(rel_err(&reconstruct_matrix(&e, &dec).unwrap(), &y) < 1e-8);
    }

    #[test]
    fn zero_eigenimages_reconstruct_to_zero() {
        let y = random_matrix(4, 9, 5);
        let dec = spectral_svd(&y).unwrap();
        let e = EigenimageStack::new(Matrix::zeros(2, 9), 3, 3).unwrap();
        let back = reconstruct(&e, &dec).unwrap();
        assert_eq!(back, Matrix::zeros(4, 9));
    }

    #[test]
    fn rank_bounds_are_checked() {
        let y = random_matrix(3, 4, 1);
        let dec = spectral_svd(&y).unwrap();
        assert!(matches!(
            project_matrix(&y, &dec, 0),
            Err(Error::RankOutOfRange { .. })
        ));
        assert!(matches!(
            project_matrix(&y, &dec, 4),
            Err(Error::RankOutOfRange { .. })
        ));
        let too_many = EigenimageStack::new(Matrix::zeros(4, 4), 2, 2).unwrap();
        assert!(reconstruct(&too_many, &dec).is_err());
    }

    #[test]
    fn cutoff_worked_examples() {
        assert_eq!(channel_cutoff(&[3.0, 1.0], 0.97).unwrap(), 1);
        assert_eq!(channel_cutoff(&[1.0, 1.0, 1.0, 1.0], 1.0).unwrap(), 4);
        assert_eq!(channel_cutoff(&[5.0], 0.5).unwrap(), 1);
    }

    #[test]
    fn cutoff_errors() {
        assert!(channel_cutoff(&[0.0, 0.0], 0.9).is_err());
        assert!(channel_cutoff(&[1.0], 0.0).is_err());
        assert!(channel_cutoff(&[1.0], 1.5).is_err());
    }

    #[test]
    fn sampling_degenerate_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..100).all(|_| sample_channel(1, &mut rng) == 0));
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| sample_channel(7, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
    }

    #[test]
    fn sampling_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            counts[sample_channel(4, &mut rng)] += 1;
        }
        for c in counts {
            let f = c as f64 / 40_000.0;
            assert!((0.24..=0.26).contains(&f), "{counts:?}");
        }
    }
}
