//! Adjacency spectral embeddings.
//!
//! For a rank-`d` truncated SVD `A ≈ Û Ŝ V̂ᵀ`, the left (or symmetric) embedding is
//! `Û Ŝ^{1/2}` and the right co-embedding is `V̂ Ŝ^{1/2}`. Positions are identified only up to
//! an orthogonal transformation; downstream estimators only use rotation-invariant quantities.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{truncated_svd, TruncatedSvd, Varimax};
use crate::network::{AdjacencyMatrix, NetworkKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Row (sending) co-embedding `Û Ŝ^{1/2}`.
    Left,
    /// Column (receiving) co-embedding `V̂ Ŝ^{1/2}`.
    Right,
    Symmetric,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Symmetric => "symmetric",
        })
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            "symmetric" => Ok(Side::Symmetric),
            other => Err(Error::Input(format!("unknown side '{other}' (left|right|symmetric)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rotation {
    None,
    /// Varimax rotation `R`; positions were right-multiplied by it.
    Varimax(Array2<f64>),
}

#[derive(Debug, Clone)]
pub struct Embedding {
    positions: Array2<f64>,
    side: Side,
    singular_values: Array1<f64>,
    rotation: Rotation,
}

impl Embedding {
    fn from_factor(vectors: &Array2<f64>, singular_values: &Array1<f64>, side: Side) -> Self {
        let root = singular_values.mapv(f64::sqrt);
        Embedding {
            positions: vectors * &root,
            side,
            singular_values: singular_values.clone(),
            rotation: Rotation::None,
        }
    }

    pub fn d(&self) -> usize {
        self.positions.ncols()
    }

    pub fn n(&self) -> usize {
        self.positions.nrows()
    }

    pub fn positions(&self) -> &Array2<f64> {
        &self.positions
    }

    pub fn into_positions(self) -> Array2<f64> {
        self.positions
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn singular_values(&self) -> &Array1<f64> {
        &self.singular_values
    }

    pub fn rotation(&self) -> &Rotation {
        &self.rotation
    }

    pub fn is_rotated(&self) -> bool {
        !matches!(self.rotation, Rotation::None)
    }

    /// `positions · positionsᵀ`, invariant to orthogonal rotation of the positions.
    pub fn gram(&self) -> Array2<f64> {
        self.positions.dot(&self.positions.t())
    }

    /// Singular vectors `positions · Ŝ^{-1/2}`; columns with zero singular value stay zero.
    pub fn unscaled(&self) -> Array2<f64> {
        let inv_root = self
            .singular_values
            .mapv(|s| if s > 0.0 { 1.0 / s.sqrt() } else { 0.0 });
        &self.positions * &inv_root
    }

    /// The leading `d` dimensions. Valid because truncated SVDs are nested.
    pub fn truncate(&self, d: usize) -> Result<Embedding> {
        if d == 0 || d > self.d() {
            return Err(Error::Dimension(format!(
                "cannot truncate a {}-dimensional embedding to {d}",
                self.d()
            )));
        }
        if self.is_rotated() && d != self.d() {
            return Err(Error::State("a rotated embedding cannot be truncated".into()));
        }
        Ok(Embedding {
            positions: self.positions.slice(s![.., ..d]).to_owned(),
            side: self.side,
            singular_values: self.singular_values.slice(s![..d]).to_owned(),
            rotation: self.rotation.clone(),
        })
    }

    /// Right-multiplies the positions by an externally computed varimax rotation, e.g. the
    /// rotation of the paired co-embedding, so that `Xhat·Lhatᵀ` is preserved.
    pub fn rotate_by(&self, rotation: &Array2<f64>) -> Result<Embedding> {
        if self.is_rotated() {
            return Err(Error::State("embedding is already rotated".into()));
        }
        if rotation.dim() != (self.d(), self.d()) {
            return Err(Error::Dimension(format!(
                "rotation is {:?}, embedding has d = {}",
                rotation.dim(),
                self.d()
            )));
        }
        Ok(Embedding {
            positions: self.positions.dot(rotation),
            side: self.side,
            singular_values: self.singular_values.clone(),
            rotation: Rotation::Varimax(rotation.clone()),
        })
    }
}

/// Adjacency spectral embedding of an undirected network.
pub fn ase(a: &AdjacencyMatrix, d: usize) -> Result<Embedding> {
    if a.kind() != NetworkKind::Undirected {
        return Err(Error::Asymmetric);
    }
    check_rank(a, d)?;
    let svd = truncated_svd(a.view(), d)?;
    Ok(Embedding::from_factor(&svd.u, &svd.s, Side::Symmetric))
}

/// Left and right co-embeddings `(Û Ŝ^{1/2}, V̂ Ŝ^{1/2})` of any adjacency matrix.
pub fn coembed(a: &AdjacencyMatrix, d: usize) -> Result<(Embedding, Embedding)> {
    check_rank(a, d)?;
    let svd = truncated_svd(a.view(), d)?;
    Ok((
        Embedding::from_factor(&svd.u, &svd.s, Side::Left),
        Embedding::from_factor(&svd.v, &svd.s, Side::Right),
    ))
}

/// Embedding for the requested side: [`ase`] for `Symmetric`, otherwise one half of
/// [`coembed`].
pub fn embed(a: &AdjacencyMatrix, d: usize, side: Side) -> Result<Embedding> {
    match side {
        Side::Symmetric => ase(a, d),
        Side::Left => Ok(coembed(a, d)?.0),
        Side::Right => Ok(coembed(a, d)?.1),
    }
}

/// Default side for node-level regression on this kind of network.
pub fn default_side(kind: NetworkKind) -> Side {
    match kind {
        NetworkKind::Undirected => Side::Symmetric,
        NetworkKind::Directed => Side::Right,
        // rows are the units
        NetworkKind::Bipartite => Side::Left,
    }
}

fn check_rank(a: &AdjacencyMatrix, d: usize) -> Result<()> {
    let max = a.nrows().min(a.ncols());
    if d == 0 || d > max {
        return Err(Error::Dimension(format!("embedding dimension {d} outside 1..={max}")));
    }
    Ok(())
}

/// Varimax-rotates an embedding: `R` is computed from the unscaled singular vectors and the
/// scaled positions are right-multiplied by it.
///
/// A paired co-embedding must be rotated by the same `R` (see [`Embedding::rotate_by`] and
/// [`varimax_rotate_pair`]) to keep `Xhat·Lhatᵀ` unchanged.
pub fn varimax_rotate(e: &Embedding) -> Result<Embedding> {
    varimax_rotate_with(e, &Varimax::default())
}

pub fn varimax_rotate_with(e: &Embedding, opts: &Varimax) -> Result<Embedding> {
    if e.is_rotated() {
        return Err(Error::State("embedding is already rotated".into()));
    }
    let r = opts.rotation(e.unscaled().view())?;
    e.rotate_by(&r)
}

/// Rotates both co-embeddings by the varimax rotation of the right singular vectors.
pub fn varimax_rotate_pair(left: &Embedding, right: &Embedding) -> Result<(Embedding, Embedding)> {
    let rotated_right = varimax_rotate(right)?;
    let r = match rotated_right.rotation() {
        Rotation::Varimax(r) => r.clone(),
        Rotation::None => unreachable!("varimax_rotate always records its rotation"),
    };
    Ok((left.rotate_by(&r)?, rotated_right))
}

/// Rank-`d_max` decomposition of one adjacency matrix. Embeddings of any `d ≤ d_max` are
/// read off it without refactoring, since truncated SVDs are nested.
#[derive(Debug, Clone)]
pub struct Spectrum {
    svd: TruncatedSvd,
    kind: NetworkKind,
}

impl Spectrum {
    pub fn compute(a: &AdjacencyMatrix, d_max: usize) -> Result<Self> {
        check_rank(a, d_max)?;
        Ok(Spectrum {
            svd: truncated_svd(a.view(), d_max)?,
            kind: a.kind(),
        })
    }

    pub fn d_max(&self) -> usize {
        self.svd.rank()
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    pub fn singular_values(&self) -> &Array1<f64> {
        &self.svd.s
    }

    /// Embedding of dimension `d` on `side`. With `varimax`, the rotation comes from the
    /// embedding's own singular vectors, except on the left side of a two-sided
    /// decomposition, where it comes from the right singular vectors as in
    /// [`varimax_rotate_pair`].
    pub fn embedding(&self, d: usize, side: Side, varimax: bool) -> Result<Embedding> {
        if d == 0 || d > self.d_max() {
            return Err(Error::Dimension(format!(
                "embedding dimension {d} outside 1..={}",
                self.d_max()
            )));
        }
        if side == Side::Symmetric && self.kind != NetworkKind::Undirected {
            return Err(Error::Asymmetric);
        }
        let svd = self.svd.truncate(d);
        let vectors = if side == Side::Right { &svd.v } else { &svd.u };
        let e = Embedding::from_factor(vectors, &svd.s, side);
        if !varimax || d == 1 {
            return Ok(e);
        }
        match side {
            Side::Left => {
                let right = Embedding::from_factor(&svd.v, &svd.s, Side::Right);
                Ok(varimax_rotate_pair(&e, &right)?.0)
            }
            Side::Right | Side::Symmetric => varimax_rotate(&e),
        }
    }
}

/// One-shot [`Spectrum::embedding`].
pub fn embed_with(a: &AdjacencyMatrix, d: usize, side: Side, varimax: bool) -> Result<Embedding> {
    Spectrum::compute(a, d)?.embedding(d, side, varimax)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, gaussian_matrix, max_abs_diff, varimax_criterion};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_rank_one() {
        let x = array![[2.0], [0.0], [0.0]];
        let a = AdjacencyMatrix::new(x.dot(&x.t())).unwrap();
        let e = ase(&a, 1).unwrap();
        assert_abs_diff_eq!(e.positions().clone(), x, epsilon = 1e-12);
        assert_eq!(e.side(), Side::Symmetric);
    }

    #[test]
    fn zero_matrix_embeds_at_origin() {
        let a = AdjacencyMatrix::new(Array2::zeros((4, 4))).unwrap();
        let e = ase(&a, 1).unwrap();
        assert!(e.positions().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ase_rejects_directed() {
        let a = AdjacencyMatrix::new(array![[0.0, 1.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(ase(&a, 1), Err(Error::Asymmetric)));
    }

    #[test]
    fn ase_rank_out_of_range() {
        let a = AdjacencyMatrix::new(Array2::eye(3)).unwrap();
        assert!(matches!(ase(&a, 4), Err(Error::Dimension(_))));
        assert!(matches!(ase(&a, 0), Err(Error::Dimension(_))));
    }

    #[test]
    fn coembed_outer_product() {
        let u = array![[1.0], [2.0], [2.0]];
        let v = array![[3.0], [4.0]];
        let a = AdjacencyMatrix::new(u.dot(&v.t())).unwrap();
        let (x, l) = coembed(&a, 1).unwrap();
        // each is proportional to its factor; the product of scales is |u||v| = 3·5
        let sx = frobenius(x.positions().view());
        let sl = frobenius(l.positions().view());
        assert_abs_diff_eq!(sx * sl, 15.0, epsilon = 1e-10);
        assert_abs_diff_eq!(
            x.positions().dot(&l.positions().t()),
            a.matrix().clone(),
            epsilon = 1e-10
        );
        let cos = x.positions().column(0).dot(&u.column(0)) / (sx * 3.0);
        assert_abs_diff_eq!(cos.abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn coembed_symmetric_sides_agree_up_to_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = gaussian_matrix(10, 2, &mut rng);
        let a = AdjacencyMatrix::new(x.dot(&x.t())).unwrap();
        let (l, r) = coembed(&a, 2).unwrap();
        for j in 0..2 {
            let a = l.positions().column(j).to_owned();
            let b = r.positions().column(j).to_owned();
            let same = max_abs_diff(
                a.view().insert_axis(ndarray::Axis(1)),
                b.view().insert_axis(ndarray::Axis(1)),
            );
            let flipped = max_abs_diff(
                a.view().insert_axis(ndarray::Axis(1)),
                (-&b).view().insert_axis(ndarray::Axis(1)),
            );
            assert!(same.min(flipped) < 1e-10);
        }
    }

    #[test]
    fn exact_low_rank_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = gaussian_matrix(12, 3, &mut rng);
        let r = gaussian_matrix(9, 3, &mut rng);
        let a = AdjacencyMatrix::new(l.dot(&r.t())).unwrap();
        let (x, y) = coembed(&a, 3).unwrap();
        let err = frobenius((a.matrix() - &x.positions().dot(&y.positions().t())).view());
        assert!(err <= 1e-6 * frobenius(a.view()));
    }

    #[test]
    fn varimax_rotation_keeps_gram_and_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let l = gaussian_matrix(30, 3, &mut rng);
        let r = gaussian_matrix(15, 3, &mut rng);
        let a = AdjacencyMatrix::new(l.dot(&r.t())).unwrap();
        let (x, y) = coembed(&a, 3).unwrap();
        let (xr, yr) = varimax_rotate_pair(&x, &y).unwrap();
        assert!(max_abs_diff(xr.gram().view(), x.gram().view()) < 1e-8);
        assert!(max_abs_diff(xr.positions().dot(&yr.positions().t()).view(), a.view()) < 1e-8);
        let before = varimax_criterion(y.unscaled().view());
        let after = varimax_criterion(yr.unscaled().view());
        assert!(after >= before - 1e-12);
    }

    #[test]
    fn varimax_one_dimensional_is_unchanged() {
        let x = array![[1.0], [2.0]];
        let a = AdjacencyMatrix::new(x.dot(&x.t())).unwrap();
        let e = ase(&a, 1).unwrap();
        let r = varimax_rotate(&e).unwrap();
        assert_eq!(r.positions(), e.positions());
    }

    #[test]
    fn varimax_twice_is_state_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = gaussian_matrix(8, 2, &mut rng);
        let a = AdjacencyMatrix::new(x.dot(&x.t())).unwrap();
        let e = varimax_rotate(&ase(&a, 2).unwrap()).unwrap();
        assert!(matches!(varimax_rotate(&e), Err(Error::State(_))));
    }

    #[test]
    fn nesting_of_singular_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b = gaussian_matrix(20, 20, &mut rng);
        let a = AdjacencyMatrix::new(&b + &b.t()).unwrap();
        let e3 = ase(&a, 3).unwrap();
        let e4 = ase(&a, 4).unwrap();
        for j in 0..3 {
            assert!((e3.singular_values()[j] - e4.singular_values()[j]).abs() <= 1e-8 * e4.singular_values()[0]);
        }
        let t = e4.truncate(3).unwrap();
        assert!(max_abs_diff(t.gram().view(), e3.gram().view()) < 1e-8);
    }

    #[test]
    fn side_parsing() {
        assert_eq!("right".parse::<Side>().unwrap(), Side::Right);
        assert!("up".parse::<Side>().is_err());
    }
    #[test]
    fn spectrum_truncation_matches_direct_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let g = gaussian_matrix(30, 30, &mut rng);
        let a = AdjacencyMatrix::new(&g + &g.t()).unwrap();
        let spec = Spectrum::compute(&a, 6).unwrap();
        for d in 1..=6 {
            let direct = ase(&a, d).unwrap();
            let read = spec.embedding(d, Side::Symmetric, false).unwrap();
            assert!(max_abs_diff(direct.gram().view(), read.gram().view()) < 1e-8);
        }
        assert!(spec.embedding(7, Side::Symmetric, false).is_err());
    }

    #[test]
    fn spectrum_varimax_left_uses_right_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let a = AdjacencyMatrix::bipartite(gaussian_matrix(25, 12, &mut rng)).unwrap();
        let spec = Spectrum::compute(&a, 3).unwrap();
        let left = spec.embedding(3, Side::Left, true).unwrap();
        let right = spec.embedding(3, Side::Right, true).unwrap();
        let plain_l = spec.embedding(3, Side::Left, false).unwrap();
        let plain_r = spec.embedding(3, Side::Right, false).unwrap();
        let before = plain_l.positions().dot(&plain_r.positions().t());
        let after = left.positions().dot(&right.positions().t());
        assert!(max_abs_diff(before.view(), after.view()) < 1e-10);
        assert!(matches!(
            spec.embedding(2, Side::Symmetric, false),
            Err(Error::Asymmetric)
        ));
    }
}
