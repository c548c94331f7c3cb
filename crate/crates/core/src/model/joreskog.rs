use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One estimable cell of a [`JoreskogStructure`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cell {
    B(usize, usize),
    Lambda(usize, usize),
    /// Lower-triangle cell (i >= j); its mirror moves with it.
    Phi(usize, usize),
    Psi(usize),
    Theta(usize),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Cell::B(i, j) => write!(f, "B[{i},{j}]"),
            Cell::Lambda(i, j) => write!(f, "Lambda[{i},{j}]"),
            Cell::Phi(i, j) => write!(f, "Phi[{i},{j}]"),
            Cell::Psi(i) => write!(f, "Psi[{i}]"),
            Cell::Theta(i) => write!(f, "Theta[{i}]"),
        }
    }
}

/// Parameter matrices of Σ = B(ΛΦΛ' + Ψ²)B' + Θ² with free/fixed masks.
///
/// Ψ and Θ are diagonal and stored as their diagonals (standard-deviation
/// scale; the structure squares them). Φ is symmetric and only its lower
/// triangle is addressed by the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct JoreskogStructure {
    pub b: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    pub phi: DMatrix<f64>,
    pub psi: DVector<f64>,
    pub theta: DVector<f64>,
    pub b_free: DMatrix<bool>,
    pub lambda_free: DMatrix<bool>,
    pub phi_free: DMatrix<bool>,
    pub psi_free: Vec<bool>,
    pub theta_free: Vec<bool>,
}

impl JoreskogStructure {
    /// All-fixed structure with conforming zero masks.
    pub fn fixed(
        b: DMatrix<f64>,
        lambda: DMatrix<f64>,
        phi: DMatrix<f64>,
        psi: DVector<f64>,
        theta: DVector<f64>,
    ) -> Result<Self> {
        let s = Self {
            b_free: DMatrix::from_element(b.nrows(), b.ncols(), false),
            lambda_free: DMatrix::from_element(lambda.nrows(), lambda.ncols(), false),
            phi_free: DMatrix::from_element(phi.nrows(), phi.ncols(), false),
            psi_free: vec![false; psi.len()],
            theta_free: vec![false; theta.len()],
            b,
            lambda,
            phi,
            psi,
            theta,
        };
        s.check_dims()?;
        Ok(s)
    }

    /// Number of observed variables (rows of Σ).
    pub fn n_observed(&self) -> usize {
        self.b.nrows()
    }

    pub fn check_dims(&self) -> Result<()> {
        let (p, m) = self.b.shape();
        let (lr, lc) = self.lambda.shape();
        let mismatch = |what: &str| Err(Error::DimensionMismatch(what.to_string()));
        if lr != m {
            return mismatch(&format!("Lambda has {lr} rows, B has {m} columns"));
        }
        if self.phi.shape() != (lc, lc) {
            return mismatch(&format!("Phi is {:?}, expected {lc}x{lc}", self.phi.shape()));
        }
        if self.psi.len() != m {
            return mismatch(&format!("Psi has {} entries, expected {m}", self.psi.len()));
        }
        if self.theta.len() != p {
            return mismatch(&format!("Theta has {} entries, expected {p}", self.theta.len()));
        }
        if self.b_free.shape() != self.b.shape()
            || self.lambda_free.shape() != self.lambda.shape()
            || self.phi_free.shape() != self.phi.shape()
            || self.psi_free.len() != m
            || self.theta_free.len() != p
        {
            return mismatch("free mask does not conform to its matrix");
        }
        Ok(())
    }

    /// Free cells in packing order: B, Λ (column-major), Φ lower triangle
    /// (column-major), Ψ, Θ.
    pub fn free_cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for j in 0..self.b.ncols() {
            for i in 0..self.b.nrows() {
                if self.b_free[(i, j)] {
                    cells.push(Cell::B(i, j));
                }
            }
        }
        for j in 0..self.lambda.ncols() {
            for i in 0..self.lambda.nrows() {
                if self.lambda_free[(i, j)] {
                    cells.push(Cell::Lambda(i, j));
                }
            }
        }
        for j in 0..self.phi.ncols() {
            for i in j..self.phi.nrows() {
                if self.phi_free[(i, j)] || self.phi_free[(j, i)] {
                    cells.push(Cell::Phi(i, j));
                }
            }
        }
        cells.extend((0..self.psi.len()).filter(|&i| self.psi_free[i]).map(Cell::Psi));
        cells.extend((0..self.theta.len()).filter(|&i| self.theta_free[i]).map(Cell::Theta));
        cells
    }

    pub fn free_count(&self) -> usize {
        self.free_cells().len()
    }

    pub fn get(&self, cell: Cell) -> f64 {
        match cell {
            Cell::B(i, j) => self.b[(i, j)],
            Cell::Lambda(i, j) => self.lambda[(i, j)],
            Cell::Phi(i, j) => self.phi[(i, j)],
            Cell::Psi(i) => self.psi[i],
            Cell::Theta(i) => self.theta[i],
        }
    }

    pub fn set(&mut self, cell: Cell, v: f64) {
        match cell {
            Cell::B(i, j) => self.b[(i, j)] = v,
            Cell::Lambda(i, j) => self.lambda[(i, j)] = v,
            Cell::Phi(i, j) => {
                self.phi[(i, j)] = v;
                self.phi[(j, i)] = v;
            }
            Cell::Psi(i) => self.psi[i] = v,
            Cell::Theta(i) => self.theta[i] = v,
        }
    }

    pub fn pack(&self) -> DVector<f64> {
        DVector::from_iterator(self.free_count(), self.free_cells().into_iter().map(|c| self.get(c)))
    }

    /// Copy of `self` with the free cells overwritten from `params`.
    pub fn unpack(&self, params: &DVector<f64>) -> Result<Self> {
        let cells = self.free_cells();
        if params.len() != cells.len() {
            return Err(Error::DimensionMismatch(format!(
                "parameter vector has length {}, structure has {} free cells",
                params.len(),
                cells.len()
            )));
        }
        let mut out = self.clone();
        for (c, v) in cells.into_iter().zip(params.iter()) {
            out.set(c, *v);
        }
        Ok(out)
    }

    pub fn labels(&self) -> Vec<String> {
        self.free_cells().iter().map(|c| c.to_string()).collect()
    }
}
