//! Linear auto-regressive trajectory model.
//!
//! The process is `z_1 = w_1`, `z_k = A z_{k-1} + w_k` with i.i.d. standard
//! normal noise vectors `w_k`. Stacked over `n` steps the trajectory is
//! jointly Gaussian with covariance `Σ_A = L_A L_Aᵀ`, where `L_A` is the unit
//! block-lower-triangular matrix carrying `A^{i-j}` at block `(i, j)`. Its
//! inverse is block-bidiagonal (`I` on the diagonal, `-A` just below), so
//! whitening a trajectory and evaluating the exact joint log-density cost
//! `O(n·d²)` time and `O(d²)` extra space instead of anything dense in `n·d`.
//! Because `L_A` is unit triangular, `det Σ_A = 1` for every `A`, which the
//! log-density exploits: there is no determinant term at all.
//!
//! [`dense_covariance`] materializes `Σ_A` explicitly. It exists for oracle
//! and test purposes only and refuses sizes above [`DENSE_SIZE_CAP`]; nothing
//! on the sampling path ever touches an `(nd)²` array.
//!
//! The process has no drift: means are zero everywhere, and the noise
//! covariance is fixed to the identity.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, DVectorView, DVectorViewMut};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed::SeedSpec;

/// Largest `n·d` for which dense `(nd)²` computations are allowed.
pub const DENSE_SIZE_CAP: usize = 2000;

/// A square real dynamics matrix, validated finite on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix {
    entries: DMatrix<f64>,
}

impl SystemMatrix {
    /// Wrap a square matrix with finite entries.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.nrows() != entries.ncols() {
            return Err(Error::InvalidArgument(format!(
                "dynamics matrix must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if !entries.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument(
                "dynamics matrix contains a non-finite entry".into(),
            ));
        }
        Ok(SystemMatrix { entries })
    }

    /// 1x1 system.
    pub fn scalar(value: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(1, 1, value))
    }

    /// Row-major construction from a flat slice.
    pub fn from_row_slice(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::InvalidArgument(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn zeros(dim: usize) -> Self {
        SystemMatrix {
            entries: DMatrix::zeros(dim.max(1), dim.max(1)),
        }
    }

    pub fn identity(dim: usize) -> Self {
        SystemMatrix {
            entries: DMatrix::identity(dim.max(1), dim.max(1)),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Largest absolute entrywise difference; infinite when dimensions differ.
    pub fn max_abs_diff(&self, other: &SystemMatrix) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        (&self.entries - &other.entries)
            .iter()
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

/// Text form: rows separated by `;`, entries by `,` — e.g. `0.9,0.1;0,0.8`.
impl FromStr for SystemMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let rows: Vec<&str> = s.split(';').collect();
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in &rows {
            let cells: Vec<&str> = row.split(',').collect();
            if cells.len() != dim {
                return Err(Error::Parse(format!(
                    "matrix '{s}' is not square: {dim} rows but a row with {} entries",
                    cells.len()
                )));
            }
            for cell in cells {
                let v: f64 = cell.trim().parse().map_err(|_| {
                    Error::Parse(format!("matrix entry '{}' is not a number", cell.trim()))
                })?;
                entries.push(v);
            }
        }
        SystemMatrix::from_row_slice(dim, &entries)
    }
}

impl fmt::Display for SystemMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.dim();
        for i in 0..d {
            if i > 0 {
                write!(f, ";")?;
            }
            for j in 0..d {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", self.entries[(i, j)])?;
            }
        }
        Ok(())
    }
}

/// An ordered sequence of states `z_1..z_n` in `ℝᵈ`, stored step-major.
///
/// Also reused for whitened innovation sequences `w_1..w_n`. All entries are
/// finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    data: Vec<f64>,
}

impl Trajectory {
    /// Build from step-major data (`data.len() = n·d`, `n ≥ 1`).
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("state dimension must be ≥ 1".into()));
        }
        if data.is_empty() || data.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "trajectory data length {} is not a positive multiple of dim {dim}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "trajectory state {} contains a non-finite value",
                bad / dim + 1
            )));
        }
        Ok(Trajectory { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        self.data.len() / self.dim
    }

    /// State at 0-based step `k` as a view.
    pub fn state(&self, k: usize) -> DVectorView<'_, f64> {
        DVectorView::from_slice(&self.data[k * self.dim..(k + 1) * self.dim], self.dim)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// The stacked `nd`-vector `(z_1ᵀ, …, z_nᵀ)ᵀ`.
    pub fn stacked(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.data)
    }

    /// CSV form: header `k,z_1,…,z_d`, one row per step, LF endings,
    /// 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "k")?;
        for j in 1..=self.dim {
            write!(out, ",z_{j}")?;
        }
        writeln!(out)?;
        for k in 0..self.horizon() {
            write!(out, "{}", k + 1)?;
            for j in 0..self.dim {
                write!(out, ",{}", crate::report::format_value(self.data[k * self.dim + j]))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Parse the CSV form produced by [`Trajectory::write_csv`].
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty trajectory file".into()))??;
        let cols: Vec<&str> = header.trim_end().split(',').collect();
        if cols.first() != Some(&"k") || cols.len() < 2 {
            return Err(Error::Parse(format!(
                "bad trajectory header '{header}', expected 'k,z_1,…'"
            )));
        }
        let dim = cols.len() - 1;
        let mut data = Vec::new();
        let mut expect_k = 1usize;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim_end().split(',').collect();
            if fields.len() != dim + 1 {
                return Err(Error::Parse(format!(
                    "trajectory row '{line}' has {} fields, expected {}",
                    fields.len(),
                    dim + 1
                )));
            }
            let k: usize = fields[0]
                .parse()
                .map_err(|_| Error::Parse(format!("bad step index '{}'", fields[0])))?;
            if k != expect_k {
                return Err(Error::Parse(format!(
                    "trajectory rows out of order: expected step {expect_k}, got {k}"
                )));
            }
            expect_k += 1;
            for f in &fields[1..] {
                let v: f64 = f
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad state value '{f}'")))?;
                data.push(v);
            }
        }
        Trajectory::new(dim, data)
    }
}

fn check_dims(context: &'static str, a: &SystemMatrix, traj: &Trajectory) -> Result<()> {
    if a.dim() != traj.dim() {
        return Err(Error::DimensionMismatch {
            context,
            expected: a.dim(),
            got: traj.dim(),
        });
    }
    Ok(())
}

/// Draw `horizon` i.i.d. standard-normal `dim`-vectors as a trajectory.
///
/// Draw order is fixed (step-major, component order) so the result is a
/// deterministic function of the seed.
pub fn draw_noise(dim: usize, horizon: usize, seed: SeedSpec) -> Result<Trajectory> {
    if dim == 0 {
        return Err(Error::InvalidArgument("state dimension must be ≥ 1".into()));
    }
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be ≥ 1".into()));
    }
    let mut rng = seed.rng();
    let data: Vec<f64> = (0..dim * horizon)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    Ok(Trajectory { dim, data })
}

/// Simulate `z_1 = w_1`, `z_k = A z_{k-1} + w_k` for `k = 2..n`.
///
/// Deterministic in `(A, horizon, seed)`: two calls produce bit-identical
/// trajectories.
pub fn simulate(a: &SystemMatrix, horizon: usize, seed: SeedSpec) -> Result<Trajectory> {
    let noise = draw_noise(a.dim(), horizon, seed)?;
    color(&noise, a)
}

/// Apply `L_A` by the forward recursion: `z_1 = w_1`, `z_k = A z_{k-1} + w_k`.
///
/// Exact inverse of [`whiten`].
pub fn color(noise: &Trajectory, a: &SystemMatrix) -> Result<Trajectory> {
    check_dims("color", a, noise)?;
    let d = noise.dim();
    let n = noise.horizon();
    let mut data = noise.data().to_vec();
    for k in 1..n {
        let (prev, cur) = data.split_at_mut(k * d);
        let prev = DVectorView::from_slice(&prev[(k - 1) * d..], d);
        let mut cur = DVectorViewMut::from_slice(&mut cur[..d], d);
        // cur already holds w_k; accumulate A·z_{k-1}.
        cur.gemv(1.0, a.entries(), &prev, 1.0);
        if !cur.iter().all(|x| x.is_finite()) {
            return Err(Error::Overflow {
                context: "color recursion",
                step: k + 1,
            });
        }
    }
    Ok(Trajectory { dim: d, data })
}

/// Apply `L_A⁻¹`: `w_1 = z_1`, `w_k = z_k − A z_{k-1}` for `k ≥ 2`.
pub fn whiten(traj: &Trajectory, a: &SystemMatrix) -> Result<Trajectory> {
    check_dims("whiten", a, traj)?;
    let d = traj.dim();
    let n = traj.horizon();
    let mut data = traj.data().to_vec();
    // Walk backwards so each step still sees the original z_{k-1}.
    for k in (1..n).rev() {
        let (prev, cur) = data.split_at_mut(k * d);
        let prev = DVectorView::from_slice(&prev[(k - 1) * d..], d);
        let mut cur = DVectorViewMut::from_slice(&mut cur[..d], d);
        cur.gemv(-1.0, a.entries(), &prev, 1.0);
        if !cur.iter().all(|x| x.is_finite()) {
            return Err(Error::Overflow {
                context: "whitening",
                step: k + 1,
            });
        }
    }
    Ok(Trajectory { dim: d, data })
}

/// Exact log-density of the stacked trajectory under `N(0, Σ_A)`:
/// `−(n·d/2)·log 2π − ½‖L_A⁻¹ z‖²` (no determinant term, `det Σ_A = 1`).
///
/// Returns `-∞` when the squared whitening norm overflows; a NaN whitening
/// step is reported as an overflow error instead.
pub fn log_density(traj: &Trajectory, a: &SystemMatrix) -> Result<f64> {
    check_dims("log-density", a, traj)?;
    let d = traj.dim();
    let n = traj.horizon();
    let mut sumsq = traj.state(0).norm_squared();
    let mut w = DVector::<f64>::zeros(d);
    for k in 1..n {
        w.copy_from(&traj.state(k));
        w.gemv(-1.0, a.entries(), &traj.state(k - 1), 1.0);
        let wsq = w.norm_squared();
        if wsq.is_nan() {
            return Err(Error::Overflow {
                context: "log-density whitening",
                step: k + 1,
            });
        }
        sumsq += wsq;
    }
    let nd = (n * d) as f64;
    Ok(-0.5 * (nd * std::f64::consts::TAU.ln() + sumsq))
}

/// Explicitly assemble `Σ_A = L_A L_Aᵀ` for `horizon` steps.
///
/// Oracle/testing use only: `O((nd)²)` memory, refused above
/// [`DENSE_SIZE_CAP`].
pub fn dense_covariance(a: &SystemMatrix, horizon: usize) -> Result<DMatrix<f64>> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be ≥ 1".into()));
    }
    let d = a.dim();
    let nd = horizon * d;
    if nd > DENSE_SIZE_CAP {
        return Err(Error::SizeCap {
            nd,
            cap: DENSE_SIZE_CAP,
        });
    }
    // Powers A^0..A^{n-1} by repeated multiplication.
    let mut powers = Vec::with_capacity(horizon);
    powers.push(DMatrix::<f64>::identity(d, d));
    for k in 1..horizon {
        let next = a.entries() * &powers[k - 1];
        if !next.iter().all(|x| x.is_finite()) {
            return Err(Error::Overflow {
                context: "matrix power",
                step: k + 1,
            });
        }
        powers.push(next);
    }
    let mut l = DMatrix::<f64>::zeros(nd, nd);
    for i in 0..horizon {
        for j in 0..=i {
            l.view_mut((i * d, j * d), (d, d)).copy_from(&powers[i - j]);
        }
    }
    Ok(&l * l.transpose())
}
