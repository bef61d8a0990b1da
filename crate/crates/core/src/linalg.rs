//! Dense kernels shared by every other module: norms, a small row-major
//! matrix, the symmetric spectral norm, exact summation and the dataset type.

use std::fmt;
use std::io::Read;
use std::ops::{Index, IndexMut};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default accuracy of [`spectral_norm_symmetric`].
pub const DEFAULT_TOL: f64 = 1e-10;

/// Entrywise tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// An exponent `p` in `[1, +inf]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct NormOrder(f64);

impl NormOrder {
    pub const ONE: NormOrder = NormOrder(1.0);
    pub const TWO: NormOrder = NormOrder(2.0);
    pub const INF: NormOrder = NormOrder(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::invalid(format!("norm order must satisfy p >= 1, got {p}")));
        }
        Ok(NormOrder(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_inf(self) -> bool {
        self.0.is_infinite()
    }

    /// The Hölder conjugate `p*` with `1/p + 1/p* = 1`.
    pub fn dual(self) -> NormOrder {
        if self.0 == 1.0 {
            NormOrder::INF
        } else if self.is_inf() {
            NormOrder::ONE
        } else {
            NormOrder(self.0 / (self.0 - 1.0))
        }
    }

    /// `1/p`, which is 0 for `p = inf`.
    pub fn recip(self) -> f64 {
        if self.is_inf() {
            0.0
        } else {
            1.0 / self.0
        }
    }

    /// The factor `d^{1-2/p}` for `p > 2` and 1 otherwise. It converts the
    /// `p = 2` value of a degree-two quantity into an upper bound for `p`.
    pub fn quadratic_factor(self, d: usize) -> f64 {
        if self.0 > 2.0 {
            (d as f64).powf(1.0 - 2.0 * self.recip())
        } else {
            1.0
        }
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_inf() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for NormOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if t == "inf" || t == "infinity" {
            return Ok(NormOrder::INF);
        }
        let p: f64 = t.parse().map_err(|_| Error::invalid(format!("cannot parse norm order {s:?}")))?;
        NormOrder::new(p)
    }
}

impl Serialize for NormOrder {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_inf() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for NormOrder {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Num(p) => NormOrder::new(p),
            Raw::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// `(sum |v_i|^p)^(1/p)`, or `max |v_i|` for `p = inf`.
pub fn p_norm(v: &[f64], p: NormOrder) -> f64 {
    let p = p.value();
    if p == 1.0 {
        return v.iter().map(|x| x.abs()).sum();
    }
    let big = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if p.is_infinite() || big == 0.0 {
        return big;
    }
    if p == 2.0 {
        let s: f64 = v.iter().map(|x| (x / big) * (x / big)).sum();
        return big * s.sqrt();
    }
    let s: f64 = v.iter().map(|x| (x.abs() / big).powf(p)).sum();
    big * s.powf(1.0 / p)
}

/// Group norm: the `outer` norm of the vector of row-wise `inner` norms.
/// With `outer = inf` this is `||X||_{q,inf}`, the largest row norm.
pub fn group_norm(m: &Matrix, inner: NormOrder, outer: NormOrder) -> f64 {
    let rows: Vec<f64> = (0..m.rows()).map(|i| p_norm(m.row(i), inner)).collect();
    p_norm(&rows, outer)
}

/// Sign with `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Componentwise [`sign`].
pub fn sign_vector(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| sign(x)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!("matrix data has {} entries, expected {rows}x{cols}", data.len())));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Matrix::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Matrix::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("rows have different lengths"));
        }
        Ok(Matrix { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn frobenius(&self) -> f64 {
        p_norm(&self.data, NormOrder::TWO)
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    /// `self += s * x x^T`.
    pub fn add_outer(&mut self, s: f64, x: &[f64]) {
        for i in 0..self.rows {
            for j in 0..self.cols {
                self.data[i * self.cols + j] += s * x[i] * x[j];
            }
        }
    }

    /// Checks squareness and symmetry within [`SYMMETRY_TOL`].
    pub fn check_symmetric(&self) -> Result<()> {
        if self.rows != self.cols {
            return Err(Error::invalid(format!("matrix is {}x{}, not square", self.rows, self.cols)));
        }
        if let Some(bad) = self.data.iter().find(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("matrix has non-finite entry {bad}")));
        }
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                let gap = (self[(i, j)] - self[(j, i)]).abs();
                if gap > SYMMETRY_TOL {
                    return Err(Error::NotSymmetric { i, j, gap });
                }
            }
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Iteration cap of the spectral-norm power iteration for dimension `d`.
pub fn max_power_iterations(d: usize) -> usize {
    let d = d as f64;
    (10.0 * d * (d + 2.0).ln() + 200.0).ceil() as usize
}

/// Largest absolute eigenvalue of a symmetric matrix, accurate to `tol`
/// relative.
///
/// Power iteration runs on `B = M^2`, whose top eigenvalue is `||M||^2`
/// whatever the sign of the extreme eigenvalue of `M`. Each step also squares
/// the normalized operator, so after `k` steps the iterate is
/// `B^(2^k - 1) v0`; this keeps near-degenerate spectra (eigenvalues
/// `lambda` and `-lambda(1 - tiny)`, common in sign-pattern sums) well inside
/// the iteration cap. The first run starts from `(1,...,1)/sqrt(d)`; a second
/// run starts from a coordinate vector orthogonalized against the first
/// result, which catches a start vector orthogonal to the top eigenspace. The
/// larger of the two estimates is returned; both are `||M v||` for unit `v`
/// and therefore never exceed the true norm beyond rounding.
pub fn spectral_norm_symmetric(m: &Matrix, tol: f64) -> Result<f64> {
    m.check_symmetric()?;
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let d = m.rows();
    if d == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    if m.as_slice().iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let mut b = m.matmul(m);
    // M^2 is symmetric in exact arithmetic; enforce it bitwise.
    for i in 0..d {
        for j in i + 1..d {
            let s = 0.5 * (b[(i, j)] + b[(j, i)]);
            b[(i, j)] = s;
            b[(j, i)] = s;
        }
    }
    let cap = max_power_iterations(d);
    let start = vec![1.0 / (d as f64).sqrt(); d];
    let (first, v) = squared_power_run(m, &b, start, tol, cap)?;

    // Deterministic orthogonal restart.
    let j = (0..d).min_by(|&a, &c| v[a].abs().total_cmp(&v[c].abs())).unwrap_or(0);
    let mut restart: Vec<f64> = v.iter().map(|&vi| -v[j] * vi).collect();
    restart[j] += 1.0;
    let rn = p_norm(&restart, NormOrder::TWO);
    if rn <= 1e-8 {
        return Ok(first);
    }
    restart.iter_mut().for_each(|x| *x /= rn);
    let (second, _) = squared_power_run(m, &b, restart, tol, cap)?;
    Ok(first.max(second))
}

fn squared_power_run(m: &Matrix, b: &Matrix, mut v: Vec<f64>, tol: f64, cap: usize) -> Result<(f64, Vec<f64>)> {
    let mut p = b.clone();
    let mut prev: Option<f64> = None;
    for _ in 0..cap {
        let f = p.frobenius();
        if f == 0.0 || !f.is_finite() {
            break;
        }
        p.scale(1.0 / f);
        let next = p.matvec(&v);
        let nn = p_norm(&next, NormOrder::TWO);
        if nn == 0.0 {
            // v lies in the null space of B: nothing more to learn from it.
            return Ok((0.0, v));
        }
        v = next.into_iter().map(|x| x / nn).collect();
        let rho = p_norm(&m.matvec(&v), NormOrder::TWO);
        if !rho.is_finite() {
            return Err(Error::NonFinite("spectral norm iteration".into()));
        }
        // The estimate alone can stall long before the vector settles when
        // the top two eigenvalues of B nearly coincide, so the eigen-residual
        // of B must be small too.
        let rho2 = rho * rho;
        let bv = b.matvec(&v);
        let residual = bv.iter().zip(&v).map(|(x, y)| (x - rho2 * y).powi(2)).sum::<f64>().sqrt();
        if let Some(r) = prev {
            let scale = rho.max(f64::MIN_POSITIVE);
            if (rho - r).abs() <= tol * scale && residual <= tol * scale * scale {
                return Ok((rho, v));
            }
        }
        prev = Some(rho);
        p = p.matmul(&p);
    }
    match prev {
        // The operator underflowed to zero after converging: the last
        // estimate is as good as it gets.
        Some(r) if p.frobenius() == 0.0 => Ok((r, v)),
        _ => Err(Error::NoConvergence(cap)),
    }
}

/// Largest (signed) eigenvalue of a symmetric matrix, via the spectral norm
/// of the shifted matrix `M + ||M|| I`, which is positive semidefinite.
pub fn lambda_max_symmetric(m: &Matrix, tol: f64) -> Result<f64> {
    let s = spectral_norm_symmetric(m, tol)?;
    if s == 0.0 {
        return Ok(0.0);
    }
    let mut shifted = m.clone();
    for i in 0..m.rows() {
        shifted[(i, i)] += s;
    }
    Ok(spectral_norm_symmetric(&shifted, tol)? - s)
}

/// Order-independent floating-point accumulator.
///
/// Keeps the running sum as a list of non-overlapping partials (Shewchuk's
/// algorithm) and rounds once at the end, so the result is the correctly
/// rounded sum of the inputs regardless of their order or of how partial
/// accumulators are merged. Parallel reductions use it to stay deterministic.
#[derive(Clone, Debug, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn merge(mut self, other: ExactSum) -> ExactSum {
        for p in other.partials {
            self.add(p);
        }
        self
    }

    pub fn value(&self) -> f64 {
        let mut n = self.partials.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = self.partials[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = self.partials[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // Round half-even across the remaining partials.
        if n > 0 && ((lo < 0.0 && self.partials[n - 1] < 0.0) || (lo > 0.0 && self.partials[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ExactSum::new();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

/// Correctly rounded sum.
pub fn exact_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<ExactSum>().value()
}

/// An `n x d` sample matrix with optional `+-1` labels.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    x: Matrix,
    labels: Option<Vec<f64>>,
}

/// Column name that marks the label column in dataset CSV files.
pub const LABEL_COLUMN: &str = "label";

impl DesignMatrix {
    pub fn new(x: Matrix, labels: Option<Vec<f64>>) -> Result<Self> {
        if x.rows() == 0 || x.cols() == 0 {
            return Err(Error::invalid(format!("design matrix needs n >= 1 and d >= 1, got {}x{}", x.rows(), x.cols())));
        }
        if let Some(pos) = x.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite entry at row {}, column {}", pos / x.cols(), pos % x.cols())));
        }
        if let Some(y) = &labels {
            if y.len() != x.rows() {
                return Err(Error::invalid(format!("{} labels for {} rows", y.len(), x.rows())));
            }
            if let Some(i) = y.iter().position(|&v| v != 1.0 && v != -1.0) {
                return Err(Error::invalid(format!("label {} at row {i} is not -1 or +1", y[i])));
            }
        }
        Ok(DesignMatrix { x, labels })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Option<Vec<f64>>) -> Result<Self> {
        DesignMatrix::new(Matrix::from_rows(rows)?, labels)
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n()).map(move |i| self.x.row(i))
    }

    pub fn features(&self) -> &Matrix {
        &self.x
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    /// Labels, or a validation error naming the missing column.
    pub fn require_labels(&self) -> Result<&[f64]> {
        self.labels()
            .ok_or_else(|| Error::invalid(format!("dataset has no `{LABEL_COLUMN}` column but this operation needs labels")))
    }

    /// Row `q`-norms.
    pub fn row_norms(&self, q: NormOrder) -> Vec<f64> {
        self.rows().map(|r| p_norm(r, q)).collect()
    }

    /// Empirical second-moment matrix `(1/n) sum x_i x_i^T`.
    pub fn second_moment(&self) -> Matrix {
        let d = self.d();
        let mut c = Matrix::zeros(d, d);
        for r in self.rows() {
            c.add_outer(1.0, r);
        }
        c.scale(1.0 / self.n() as f64);
        c
    }

    /// Selects rows by index, keeping labels.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| self.row(i).to_vec()).collect();
        let labels = self.labels.as_ref().map(|y| idx.iter().map(|&i| y[i]).collect());
        DesignMatrix::from_rows(&rows, labels)
    }

    /// Parses the dataset CSV format: header row, feature columns, optional
    /// trailing `label` column.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.is_empty() {
            return Err(Error::invalid("csv header row is empty"));
        }
        let has_labels = headers.iter().next_back() == Some(LABEL_COLUMN);
        let d = headers.len() - usize::from(has_labels);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                let s = rec.get(k).unwrap_or("");
                s.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("row {}: cannot parse {s:?} in column {:?}", line + 1, &headers[k])))
            };
            let row = (0..d).map(parse).collect::<Result<Vec<f64>>>()?;
            if has_labels {
                labels.push(parse(d)?);
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::invalid("csv has no data rows"));
        }
        DesignMatrix::from_rows(&rows, has_labels.then_some(labels))
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path.as_ref())
            .map_err(|e| Error::invalid(format!("cannot open dataset {}: {e}", path.as_ref().display())))?;
        DesignMatrix::from_csv_reader(f)
    }

    /// Writes the dataset CSV format with columns `x1..xd[,label]`.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = (1..=self.d()).map(|j| format!("x{j}")).collect();
        if self.labels.is_some() {
            header.push(LABEL_COLUMN.to_string());
        }
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| format!("{v:?}")).collect();
            if let Some(y) = &self.labels {
                rec.push(format!("{}", y[i] as i64));
            }
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
    }
}
