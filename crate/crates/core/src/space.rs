//! Parameter spaces, points, dual elements and their norms.
//!
//! Three concrete spaces are supported: Euclidean vectors, ℓ₂-products of
//! Euclidean blocks, and symmetric matrices. Symmetric matrices are stored
//! as packed upper triangles (row-major) with off-diagonal entries scaled by
//! √2, so the plain coordinate dot product of two packed matrices equals the
//! trace pairing `tr(A B)`. Every space therefore shares one pairing code
//! path; only the norms differ.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Shape of a parameter space.
///
/// A 1×1 symmetric matrix space compares equal to `Euclidean(1)`.
#[derive(Debug, Clone, Eq, Serialize, Deserialize)]
pub enum SpaceDescriptor {
    Euclidean(usize),
    Product(Vec<usize>),
    SymMatrix(usize),
}

impl PartialEq for SpaceDescriptor {
    fn eq(&self, other: &Self) -> bool {
        use SpaceDescriptor::*;
        match (self, other) {
            (Euclidean(a), Euclidean(b)) | (SymMatrix(a), SymMatrix(b)) => a == b,
            (Product(a), Product(b)) => a == b,
            (Euclidean(1), SymMatrix(1)) | (SymMatrix(1), Euclidean(1)) => true,
            _ => false,
        }
    }
}

impl SpaceDescriptor {
    pub fn euclidean(dim: usize) -> Result<Self> {
        let s = SpaceDescriptor::Euclidean(dim);
        s.check()?;
        Ok(s)
    }

    pub fn product(block_dims: Vec<usize>) -> Result<Self> {
        let s = SpaceDescriptor::Product(block_dims);
        s.check()?;
        Ok(s)
    }

    pub fn sym_matrix(side: usize) -> Result<Self> {
        let s = SpaceDescriptor::SymMatrix(side);
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        match self {
            SpaceDescriptor::Euclidean(d) | SpaceDescriptor::SymMatrix(d) if *d == 0 => {
                Err(Error::Contract("space dimension must be at least 1".into()))
            }
            SpaceDescriptor::Product(blocks) if blocks.is_empty() || blocks.contains(&0) => Err(
                Error::Contract("product space needs at least one block, each of dim ≥ 1".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Number of stored coordinates.
    pub fn coord_count(&self) -> usize {
        match self {
            SpaceDescriptor::Euclidean(d) => *d,
            SpaceDescriptor::Product(blocks) => blocks.iter().sum(),
            SpaceDescriptor::SymMatrix(side) => side * (side + 1) / 2,
        }
    }

    /// Side length for matrix spaces.
    pub fn side(&self) -> Option<usize> {
        match self {
            SpaceDescriptor::SymMatrix(side) => Some(*side),
            _ => None,
        }
    }
}

fn check_coords(space: &SpaceDescriptor, coords: &[f64]) -> Result<()> {
    if coords.len() != space.coord_count() {
        return Err(Error::Contract(format!(
            "expected {} coordinates for {:?}, got {}",
            space.coord_count(),
            space,
            coords.len()
        )));
    }
    if coords.iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain("non-finite coordinate".into()));
    }
    Ok(())
}

/// An element of a parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    space: SpaceDescriptor,
    coords: Vec<f64>,
}

/// An element of the dual space, paired with points by the coordinate inner product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualElement {
    space: SpaceDescriptor,
    coords: Vec<f64>,
}

macro_rules! shared_impl {
    ($ty:ident) => {
        impl $ty {
            pub fn new(space: SpaceDescriptor, coords: Vec<f64>) -> Result<Self> {
                space.check()?;
                check_coords(&space, &coords)?;
                Ok($ty { space, coords })
            }

            pub fn zeros(space: &SpaceDescriptor) -> Self {
                $ty {
                    coords: vec![0.0; space.coord_count()],
                    space: space.clone(),
                }
            }

            /// Euclidean vector shortcut.
            pub fn vector(coords: Vec<f64>) -> Result<Self> {
                Self::new(SpaceDescriptor::Euclidean(coords.len()), coords)
            }

            /// Packs a full row-major symmetric matrix.
            pub fn from_matrix(side: usize, full: &[f64]) -> Result<Self> {
                Self::new(SpaceDescriptor::SymMatrix(side), pack(side, full)?)
            }

            /// Symmetric matrix with the given diagonal.
            pub fn diag(values: &[f64]) -> Result<Self> {
                let side = values.len();
                let mut full = vec![0.0; side * side];
                for (i, v) in values.iter().enumerate() {
                    full[i * side + i] = *v;
                }
                Self::from_matrix(side, &full)
            }

            pub fn space(&self) -> &SpaceDescriptor {
                &self.space
            }

            pub fn coords(&self) -> &[f64] {
                &self.coords
            }

            pub fn into_coords(self) -> Vec<f64> {
                self.coords
            }

            /// Full row-major matrix for matrix-space elements.
            pub fn to_matrix(&self) -> Option<Vec<f64>> {
                self.space.side().map(|side| unpack(side, &self.coords))
            }

            /// Coordinate (Hilbert) norm: ℓ₂ for vectors, Frobenius for matrices.
            pub fn coord_norm(&self) -> f64 {
                self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
            }

            pub fn scaled(&self, factor: f64) -> Self {
                $ty {
                    space: self.space.clone(),
                    coords: self.coords.iter().map(|c| c * factor).collect(),
                }
            }

            pub fn add(&self, other: &Self) -> Result<Self> {
                same_space(&self.space, &other.space)?;
                Ok($ty {
                    space: self.space.clone(),
                    coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect(),
                })
            }

            pub fn sub(&self, other: &Self) -> Result<Self> {
                same_space(&self.space, &other.space)?;
                Ok($ty {
                    space: self.space.clone(),
                    coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a - b).collect(),
                })
            }

            /// `self + factor · dir` without re-validating finiteness.
            #[allow(dead_code)]
            pub(crate) fn axpy(&self, factor: f64, dir: &Self) -> Self {
                $ty {
                    space: self.space.clone(),
                    coords: self.coords.iter().zip(&dir.coords).map(|(a, b)| a + factor * b).collect(),
                }
            }

            pub(crate) fn from_raw(space: SpaceDescriptor, coords: Vec<f64>) -> Self {
                debug_assert_eq!(space.coord_count(), coords.len());
                $ty { space, coords }
            }
        }
    };
}

shared_impl!(Point);
shared_impl!(DualElement);

impl Point {
    /// Reinterprets the coordinates as a dual element of the same space.
    pub fn to_dual(&self) -> DualElement {
        DualElement::from_raw(self.space.clone(), self.coords.clone())
    }
}

impl DualElement {
    pub fn to_point(&self) -> Point {
        Point::from_raw(self.space.clone(), self.coords.clone())
    }
}

pub(crate) fn same_space(a: &SpaceDescriptor, b: &SpaceDescriptor) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::Contract(format!("space mismatch: {a:?} vs {b:?}")))
    }
}

fn pack(side: usize, full: &[f64]) -> Result<Vec<f64>> {
    if full.len() != side * side {
        return Err(Error::Contract(format!(
            "matrix buffer of length {} does not match side {side}",
            full.len()
        )));
    }
    let mut out = Vec::with_capacity(side * (side + 1) / 2);
    for i in 0..side {
        for j in i..side {
            let a = full[i * side + j];
            let b = full[j * side + i];
            if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::Domain(format!("matrix not symmetric at ({i},{j})")));
            }
            let v = 0.5 * (a + b);
            out.push(if i == j { v } else { SQRT_2 * v });
        }
    }
    Ok(out)
}

fn unpack(side: usize, packed: &[f64]) -> Vec<f64> {
    let mut full = vec![0.0; side * side];
    let mut idx = 0;
    for i in 0..side {
        for j in i..side {
            let v = if i == j { packed[idx] } else { packed[idx] / SQRT_2 };
            full[i * side + j] = v;
            full[j * side + i] = v;
            idx += 1;
        }
    }
    full
}

fn block_l2(space: &SpaceDescriptor, coords: &[f64]) -> f64 {
    match space {
        SpaceDescriptor::Product(blocks) => {
            let mut start = 0;
            let mut total = 0.0_f64;
            for &len in blocks {
                let block = coords[start..start + len].iter().fold(0.0_f64, |acc, c| acc.hypot(*c));
                total = total.hypot(block);
                start += len;
            }
            total
        }
        _ => coords.iter().map(|c| c * c).sum::<f64>().sqrt(),
    }
}

fn finite(coords: &[f64]) -> Result<()> {
    if coords.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain("non-finite coordinate".into()))
    }
}

/// Primal norm: ℓ₂ for vectors and products, operator norm for matrices.
pub fn norm(p: &Point) -> Result<f64> {
    finite(p.coords())?;
    Ok(match p.space() {
        SpaceDescriptor::SymMatrix(side) => {
            let ev = linalg::symmetric_eigenvalues(&unpack(*side, p.coords()), *side);
            ev.iter().fold(0.0_f64, |acc, e| acc.max(e.abs()))
        }
        space => block_l2(space, p.coords()),
    })
}

/// Dual norm: ℓ₂ for vectors and products, nuclear norm for matrices.
pub fn dual_norm(u: &DualElement) -> Result<f64> {
    finite(u.coords())?;
    Ok(match u.space() {
        SpaceDescriptor::SymMatrix(side) => {
            let ev = linalg::symmetric_eigenvalues(&unpack(*side, u.coords()), *side);
            ev.iter().map(|e| e.abs()).sum()
        }
        space => block_l2(space, u.coords()),
    })
}

/// The value `⟨p, u⟩` of the linear functional `u` at `p`.
pub fn pairing(p: &Point, u: &DualElement) -> Result<f64> {
    same_space(p.space(), u.space())?;
    Ok(dot(p.coords(), u.coords()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
