//! Synthetic systems `A(s) = S + sU + s²T` with known resonances.
//!
//! `S` and `T` are finite-element stiffness and mass matrices of the
//! Dirichlet Laplacian on a line or a `1 × √2` rectangle, so the generalized
//! eigenvalues of `(S, T)` are known in closed form and the frequency band
//! can be placed around a chosen number of resonances.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::SymmetricEigen;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, ComplexMatrix, SparseMatrix, C64};
use crate::system::{
    AffineSystem, Coefficient, GridSet, GridSpec, MatrixTerm, ParameterDomain, ParameterGrid, RhsTerm,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ResonantCavity,
    DampedCavity,
    ThreeParamDielectric,
    RandomDense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Line,
    Plane,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassKind {
    /// Diagonal `h·I` per direction.
    Lumped,
    /// `h/6 · tridiag(1, 4, 1)` per direction.
    Consistent,
}

fn default_ports() -> usize {
    1
}
fn default_resonances() -> usize {
    3
}
fn default_geometry() -> Geometry {
    Geometry::Plane
}
fn default_mass() -> MassKind {
    MassKind::Consistent
}
fn default_eta() -> f64 {
    1.0
}
fn default_d_ref() -> f64 {
    2.0
}
fn default_training() -> usize {
    101
}
fn default_test() -> usize {
    100
}

/// Declarative benchmark description; every field but `family` and `n` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub family: Family,
    pub n: usize,
    #[serde(default = "default_ports")]
    pub ports: usize,
    /// Explicit frequency band in Hz; placed around `resonances` modes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<[f64; 2]>,
    #[serde(default = "default_resonances")]
    pub resonances: usize,
    /// Index of the lowest mode inside an auto-placed band.
    #[serde(default)]
    pub first_mode: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_geometry")]
    pub geometry: Geometry,
    #[serde(default = "default_mass")]
    pub mass: MassKind,
    /// Mesh width; the unit line or the `1 × √2` rectangle when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    /// Boundary damping strength (damped and three-parameter families).
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_d_ref")]
    pub d_ref: f64,
    /// Intervals of `d_1`, `d_2`; `[0.75, 1.25]·d_ref` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_ranges: Option<[[f64; 2]; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default = "default_training")]
    pub training_points: usize,
    #[serde(default = "default_test")]
    pub test_points: usize,
}

impl BenchmarkSpec {
    pub fn new(family: Family, n: usize) -> Self {
        Self {
            family,
            n,
            ports: default_ports(),
            band: None,
            resonances: default_resonances(),
            first_mode: 0,
            seed: 0,
            geometry: default_geometry(),
            mass: default_mass(),
            spacing: None,
            eta: default_eta(),
            d_ref: default_d_ref(),
            d_ranges: None,
            scale: None,
            training_points: default_training(),
            test_points: default_test(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.n < 4 {
            return bad(format!("n = {} but benchmarks need n >= 4", self.n));
        }
        if self.ports == 0 {
            return bad("ports must be >= 1".into());
        }
        if let Some([lo, hi]) = self.band {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return bad(format!("band [{lo}, {hi}] must satisfy 0 < f_lo < f_hi"));
            }
        } else if self.resonances == 0 {
            return bad("an auto-placed band needs resonances >= 1".into());
        }
        if let Some(h) = self.spacing {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("spacing must be positive, got {h}"));
            }
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be nonnegative, got {}", self.eta));
        }
        if !(self.d_ref > 0.0 && self.d_ref.is_finite()) {
            return bad(format!("d_ref must be positive, got {}", self.d_ref));
        }
        if let Some(ranges) = self.d_ranges {
            if ranges.iter().any(|&[a, b]| !(a > 0.0 && a <= b && b.is_finite())) {
                return bad(format!("d_ranges {ranges:?} must be positive intervals"));
            }
        }
        if self.training_points == 0 || self.test_points == 0 {
            return bad("grid sizes must be >= 1".into());
        }
        Ok(())
    }

    fn d_ranges(&self) -> [[f64; 2]; 2] {
        self.d_ranges.unwrap_or([[0.75 * self.d_ref, 1.25 * self.d_ref]; 2])
    }

    fn mesh(&self) -> Mesh {
        match self.geometry {
            Geometry::Line => Mesh {
                nx: self.n,
                ny: 1,
                hx: self.spacing.unwrap_or(1.0 / (self.n as f64 + 1.0)),
                hy: 1.0,
            },
            Geometry::Plane => {
                let nx = (1..=self.n).take_while(|k| k * k <= self.n).filter(|k| self.n.is_multiple_of(*k)).last().unwrap();
                let ny = self.n / nx;
                Mesh {
                    nx,
                    ny,
                    hx: self.spacing.unwrap_or(1.0 / (nx as f64 + 1.0)),
                    hy: self.spacing.unwrap_or(SQRT_2 / (ny as f64 + 1.0)),
                }
            }
        }
    }
}

/// Tensor-product grid of interior nodes; node `(i, j)` has index `i + nx·j`.
#[derive(Debug, Clone, Copy)]
struct Mesh {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

impl Mesh {
    fn is_plane(&self) -> bool {
        self.ny > 1 || self.hy != 1.0
    }
}

/// Generalized eigenvalues of the 1D pencil `(K, M)` on `m` interior nodes.
fn eigenvalues_1d(m: usize, h: f64, mass: MassKind) -> Vec<f64> {
    (1..=m)
        .map(|k| {
            let c = (k as f64 * PI / (m as f64 + 1.0)).cos();
            match mass {
                MassKind::Lumped => (2.0 - 2.0 * c) / (h * h),
                MassKind::Consistent => 6.0 * (2.0 - 2.0 * c) / (h * h * (4.0 + 2.0 * c)),
            }
        })
        .collect()
}

/// 1D stiffness `tridiag(−1, 2, −1)/h` and mass as `(diagonal, off-diagonal)` pairs.
fn stencils_1d(h: f64, mass: MassKind) -> ([f64; 2], [f64; 2]) {
    let k = [2.0 / h, -1.0 / h];
    let m = match mass {
        MassKind::Lumped => [h, 0.0],
        MassKind::Consistent => [4.0 * h / 6.0, h / 6.0],
    };
    (k, m)
}

fn tridiag_entries(m: usize, st: [f64; 2]) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::with_capacity(3 * m);
    for i in 0..m {
        if i > 0 && st[1] != 0.0 {
            out.push((i, i - 1, st[1]));
        }
        out.push((i, i, st[0]));
        if i + 1 < m && st[1] != 0.0 {
            out.push((i, i + 1, st[1]));
        }
    }
    out
}

/// `(S, T)` for the mesh: `S = Kx⊗My + Mx⊗Ky`, `T = Mx⊗My` (line: `S = K`, `T = M`).
fn stiffness_and_mass(mesh: Mesh, mass: MassKind) -> (SparseMatrix, SparseMatrix) {
    let n = mesh.nx * mesh.ny;
    let (kx, mx) = stencils_1d(mesh.hx, mass);
    let ex_k = tridiag_entries(mesh.nx, kx);
    let ex_m = tridiag_entries(mesh.nx, mx);
    let re = |v: f64| C64::new(v, 0.0);
    if !mesh.is_plane() {
        let s = SparseMatrix::from_triplets(n, n, ex_k.iter().map(|&(i, j, v)| (i, j, re(v)))).unwrap();
        let t = SparseMatrix::from_triplets(n, n, ex_m.iter().map(|&(i, j, v)| (i, j, re(v)))).unwrap();
        return (s, t);
    }
    let (ky, my) = stencils_1d(mesh.hy, mass);
    let ey_k = tridiag_entries(mesh.ny, ky);
    let ey_m = tridiag_entries(mesh.ny, my);
    let nx = mesh.nx;
    let kron = |ax: &[(usize, usize, f64)], by: &[(usize, usize, f64)]| -> Vec<(usize, usize, C64)> {
        by.iter()
            .flat_map(|&(j, jj, b)| ax.iter().map(move |&(i, ii, a)| (i + nx * j, ii + nx * jj, re(a * b))))
            .collect()
    };
    let mut s_trip = kron(&ex_k, &ey_m);
    s_trip.extend(kron(&ex_m, &ey_k));
    let s = SparseMatrix::from_triplets(n, n, s_trip).unwrap();
    let t = SparseMatrix::from_triplets(n, n, kron(&ex_m, &ey_m)).unwrap();
    (s, t)
}

/// All generalized eigenvalues of `(S, T)` for the mesh, ascending.
fn mesh_eigenvalues(mesh: Mesh, mass: MassKind) -> Vec<f64> {
    let lx = eigenvalues_1d(mesh.nx, mesh.hx, mass);
    let mut out: Vec<f64> = if mesh.is_plane() {
        let ly = eigenvalues_1d(mesh.ny, mesh.hy, mass);
        ly.iter().flat_map(|&b| lx.iter().map(move |&a| a + b)).collect()
    } else {
        lx
    };
    out.sort_by(f64::total_cmp);
    out
}

fn to_hz(lambda: f64) -> f64 {
    lambda.max(0.0).sqrt() / (2.0 * PI)
}

/// Deterministic dense SPD matrix for the random family.
fn random_dense_stiffness(n: usize, rng: &mut ChaCha8Rng) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| C64::new(StandardNormal.sample(rng), 0.0));
    let mut s = g.ad_mul(&g) / C64::new(n as f64, 0.0);
    for i in 0..n {
        s[(i, i)] += C64::new(1.0, 0.0);
    }
    // exact symmetry
    for i in 0..n {
        for j in 0..i {
            let v = s[(i, j)];
            s[(j, i)] = v;
        }
    }
    s
}

/// All resonance frequencies of the undamped pencil, ascending (Hz).
fn all_resonances(spec: &BenchmarkSpec) -> Vec<f64> {
    match spec.family {
        Family::RandomDense => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let s = random_dense_stiffness(spec.n, &mut rng);
            let re = s.map(|v| v.re);
            let mut ev: Vec<f64> = SymmetricEigen::new(re).eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            ev.into_iter().map(to_hz).collect()
        }
        _ => mesh_eigenvalues(spec.mesh(), spec.mass).into_iter().map(to_hz).collect(),
    }
}

fn place_band(spec: &BenchmarkSpec, freqs: &[f64]) -> Result<[f64; 2]> {
    if let Some(b) = spec.band {
        return Ok(b);
    }
    let (k0, k1) = (spec.first_mode, spec.first_mode + spec.resonances - 1);
    if k1 >= freqs.len() {
        return Err(Error::InvalidSpec(format!(
            "cannot place {} resonances from mode {}: only {} modes exist",
            spec.resonances,
            k0,
            freqs.len()
        )));
    }
    let below = if k0 > 0 { freqs[k0] - freqs[k0 - 1] } else { freqs.get(k0 + 1).map_or(freqs[k0], |f| f - freqs[k0]) };
    let above = if k1 + 1 < freqs.len() { freqs[k1 + 1] - freqs[k1] } else { below };
    let lo = freqs[k0] - 0.5 * below;
    let hi = freqs[k1] + 0.5 * above;
    let lo = if lo > 0.0 { lo } else { 0.5 * freqs[k0] };
    if !(lo < hi) {
        return Err(Error::InvalidSpec("degenerate spectrum, pass an explicit band".into()));
    }
    Ok([lo, hi])
}

/// Resonance frequencies (Hz) of the undamped pencil `(S, T)` inside the band,
/// evaluated at `d = d_ref` for the three-parameter family.
pub fn reference_resonances(spec: &BenchmarkSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let freqs = all_resonances(spec);
    let [lo, hi] = place_band(spec, &freqs)?;
    Ok(freqs.into_iter().filter(|&f| f >= lo && f <= hi).collect())
}

/// The frequency band the generated system uses.
pub fn band(spec: &BenchmarkSpec) -> Result<[f64; 2]> {
    spec.validate()?;
    place_band(spec, &all_resonances(spec))
}

/// `p` sparse random columns with `max(1, n/100)` standard-normal entries each.
fn port_matrix(n: usize, p: usize, rng: &mut ChaCha8Rng) -> CMat {
    let per = (n / 100).max(1);
    let mut q = CMat::zeros(n, p);
    for j in 0..p {
        for i in sample(rng, n, per).into_iter() {
            q[(i, j)] = C64::new(StandardNormal.sample(rng), 0.0);
        }
    }
    q
}

/// Boundary-layer damping `U_ii = η·Σ_j T_ij` on nodes adjacent to the boundary.
fn boundary_damping(mesh: Mesh, t: &SparseMatrix, eta: f64) -> SparseMatrix {
    let n = t.nrows();
    let plane = mesh.is_plane();
    let on_boundary = |k: usize| {
        let (i, j) = (k % mesh.nx, k / mesh.nx);
        i == 0 || i + 1 == mesh.nx || (plane && (j == 0 || j + 1 == mesh.ny))
    };
    let mut row_sum = vec![0.0; n];
    for (i, _, v) in t.triplets() {
        row_sum[i] += v.re;
    }
    let diag = (0..n).filter(|&k| on_boundary(k) && eta > 0.0).map(|k| (k, k, C64::new(eta * row_sum[k], 0.0)));
    SparseMatrix::from_triplets(n, n, diag).unwrap()
}

/// Node regions for the dielectric split: region 1 is the first third in
/// `x`, region 2 the last third.
fn region(mesh: Mesh, k: usize) -> u8 {
    let i = k % mesh.nx;
    let third = (mesh.nx as f64 / 3.0).ceil() as usize;
    if mesh.nx < 3 {
        // too narrow in x: split by node index instead
        let n = mesh.nx * mesh.ny;
        return if 3 * k < n { 1 } else if 3 * k >= 2 * n { 2 } else { 0 };
    }
    if i < third {
        1
    } else if i + third >= mesh.nx {
        2
    } else {
        0
    }
}

fn split_mass(mesh: Mesh, t: &SparseMatrix) -> [SparseMatrix; 3] {
    let n = t.nrows();
    let mut parts: [Vec<(usize, usize, C64)>; 3] = Default::default();
    for (i, j, v) in t.triplets() {
        let (ri, rj) = (region(mesh, i), region(mesh, j));
        let slot = if ri == rj && ri > 0 { ri as usize } else { 0 };
        parts[slot].push((i, j, v));
    }
    parts.map(|p| SparseMatrix::from_triplets(n, n, p).unwrap())
}

/// Builds the system; same spec and seed give bit-identical matrices.
pub fn generate(spec: &BenchmarkSpec) -> Result<AffineSystem> {
    spec.validate()?;
    let freqs = all_resonances(spec);
    let [lo, hi] = place_band(spec, &freqs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut domain = ParameterDomain::band(lo, hi);
    let mut extra_counts = Vec::new();

    let matrix_terms = match spec.family {
        Family::RandomDense => {
            let s = random_dense_stiffness(spec.n, &mut rng);
            let mut terms = vec![
                MatrixTerm::new("S", Coefficient::ONE, ComplexMatrix::Dense(s)),
                MatrixTerm::new("T", Coefficient::s_power(2), ComplexMatrix::Sparse(SparseMatrix::identity(spec.n))),
            ];
            if spec.eta > 0.0 {
                let g = CMat::from_fn(spec.n, spec.n, |_, _| C64::new(rng.random_range(-1.0..1.0), 0.0));
                let u = (&g + g.transpose()) * C64::new(0.5 * spec.eta / spec.n as f64, 0.0);
                terms.insert(1, MatrixTerm::new("U", Coefficient::s_power(1), ComplexMatrix::Dense(u)));
            }
            terms
        }
        family => {
            let mesh = spec.mesh();
            let (s, t) = stiffness_and_mass(mesh, spec.mass);
            let s_term = MatrixTerm::new("S", Coefficient::ONE, ComplexMatrix::Sparse(s));
            match family {
                Family::ResonantCavity => {
                    vec![s_term, MatrixTerm::new("T", Coefficient::s_power(2), ComplexMatrix::Sparse(t))]
                }
                Family::DampedCavity => {
                    let u = boundary_damping(mesh, &t, spec.eta);
                    vec![
                        s_term,
                        MatrixTerm::new("U", Coefficient::s_power(1), ComplexMatrix::Sparse(u)),
                        MatrixTerm::new("T", Coefficient::s_power(2), ComplexMatrix::Sparse(t)),
                    ]
                }
                _ => {
                    let u = boundary_damping(mesh, &t, spec.eta);
                    let [t0, t1, t2] = split_mass(mesh, &t);
                    domain.extra = spec.d_ranges().to_vec();
                    extra_counts = vec![2, 2];
                    vec![
                        s_term,
                        MatrixTerm::new("U", Coefficient::s_power(1), ComplexMatrix::Sparse(u)),
                        MatrixTerm::new("T0", Coefficient::s_power(2), ComplexMatrix::Sparse(t0)),
                        MatrixTerm::new("T1", Coefficient::s_power(2).with_ratio(0, spec.d_ref), ComplexMatrix::Sparse(t1)),
                        MatrixTerm::new("T2", Coefficient::s_power(2).with_ratio(1, spec.d_ref), ComplexMatrix::Sparse(t2)),
                    ]
                }
            }
        }
    };
    let q = port_matrix(spec.n, spec.ports, &mut rng);
    let rhs = vec![RhsTerm::new("Q", Coefficient::s_power(1), q)];
    let grids = GridSet {
        training: Some(GridSpec::Uniform {
            count: spec.training_points,
            extra: extra_counts.clone(),
        }),
        test: Some(GridSpec::Midpoints {
            count: spec.test_points,
            extra: extra_counts,
        }),
    };
    Ok(AffineSystem::new(matrix_terms, rhs, domain, spec.scale)?.with_grids(grids))
}

/// Manifest metadata recording the benchmark parameters and the in-band resonances.
pub fn metadata(spec: &BenchmarkSpec) -> Result<serde_json::Value> {
    Ok(serde_json::json!({
        "benchmark": spec,
        "resonances_hz": reference_resonances(spec)?,
    }))
}

/// Uniform frequency grid of `count` points over the system band (extra
/// parameters at their interval midpoints).
pub fn fine_grid(sys: &AffineSystem, count: usize) -> Result<ParameterGrid> {
    ParameterGrid::uniform(sys.domain(), count, &[])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::ParameterPoint;

    fn line(n: usize, mass: MassKind) -> BenchmarkSpec {
        BenchmarkSpec {
            geometry: Geometry::Line,
            mass,
            ..BenchmarkSpec::new(Family::ResonantCavity, n)
        }
    }

    /// Generalized eigenvalues of a symmetric pencil through a Cholesky
    /// reduction `L⁻¹ S L⁻ᵀ`.
    fn pencil_oracle(s: &CMat, t: &CMat) -> Vec<f64> {
        let sr = s.map(|v| v.re);
        let tr = t.map(|v| v.re);
        let l = tr.cholesky().expect("mass must be SPD").l();
        let linv = l.clone().try_inverse().unwrap();
        let c = &linv * sr * linv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    #[test]
    fn unit_spacing_line_has_closed_form_resonances() {
        let spec = BenchmarkSpec {
            spacing: Some(1.0),
            band: Some([0.01, 1.0]),
            ..line(4, MassKind::Lumped)
        };
        let sys = generate(&spec).unwrap();
        let t = sys.matrix_terms()[1].matrix.to_dense();
        assert_eq!(t, CMat::identity(4, 4));
        let got = reference_resonances(&spec).unwrap();
        assert_eq!(got.len(), 4);
        for (k, f) in got.iter().enumerate() {
            let lambda = 2.0 - 2.0 * ((k + 1) as f64 * PI / 5.0).cos();
            assert!((f - lambda.sqrt() / (2.0 * PI)).abs() <= 1e-12);
        }
    }

    #[test]
    fn resonances_match_dense_pencil_oracle() {
        for (geometry, mass) in [(Geometry::Plane, MassKind::Consistent), (Geometry::Line, MassKind::Lumped)] {
            let spec = BenchmarkSpec {
                geometry,
                mass,
                band: Some([1e-3, 1e6]),
                ..BenchmarkSpec::new(Family::ResonantCavity, 200)
            };
            let sys = generate(&spec).unwrap();
            let s = sys.matrix_terms()[0].matrix.to_dense();
            let t = sys.matrix_terms()[1].matrix.to_dense();
            let oracle: Vec<f64> = pencil_oracle(&s, &t).into_iter().map(to_hz).collect();
            let got = reference_resonances(&spec).unwrap();
            assert_eq!(got.len(), oracle.len());
            for (a, b) in got.iter().zip(&oracle) {
                assert!((a - b).abs() <= 1e-8 * b, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn empty_band_has_no_resonances() {
        let spec = BenchmarkSpec {
            band: Some([1e-6, 2e-6]),
            ..BenchmarkSpec::new(Family::ResonantCavity, 16)
        };
        assert!(reference_resonances(&spec).unwrap().is_empty());
    }

    #[test]
    fn auto_band_contains_requested_resonances() {
        for r in [1, 3, 5] {
            let spec = BenchmarkSpec {
                resonances: r,
                ..BenchmarkSpec::new(Family::DampedCavity, 400)
            };
            assert_eq!(reference_resonances(&spec).unwrap().len(), r);
        }
    }

    #[test]
    fn matrices_are_symmetric_and_mass_is_spd() {
        for family in [Family::ResonantCavity, Family::DampedCavity, Family::ThreeParamDielectric] {
            let sys = generate(&BenchmarkSpec::new(family, 60)).unwrap();
            for term in sys.matrix_terms() {
                let ComplexMatrix::Sparse(m) = &term.matrix else { panic!("sparse expected") };
                assert!(m.is_symmetric(0.0), "{}", term.name);
            }
            let t: CMat = sys
                .matrix_terms()
                .iter()
                .filter(|t| t.coefficient.s_power == 2)
                .map(|t| t.matrix.to_dense())
                .fold(CMat::zeros(60, 60), |a, b| a + b);
            assert!(t.map(|v| v.re).cholesky().is_some());
        }
    }

    #[test]
    fn three_param_reduces_to_unsplit_mass_at_reference() {
        let spec = BenchmarkSpec::new(Family::ThreeParamDielectric, 90);
        let split = generate(&spec).unwrap();
        assert_eq!(split.matrix_terms().len(), 5);
        let names: Vec<&str> = split.matrix_terms().iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, ["S", "U", "T0", "T1", "T2"]);
        let joined = generate(&BenchmarkSpec {
            family: Family::DampedCavity,
            ..spec.clone()
        })
        .unwrap();
        let mu = ParameterPoint::with_extra(split.domain().band[0] * 1.1, vec![spec.d_ref, spec.d_ref]);
        let a = split.assemble(&mu).to_dense();
        let b = joined.assemble(&ParameterPoint::new(mu.frequency)).to_dense();
        assert_eq!(a, b);
    }

    #[test]
    fn regeneration_is_bit_identical_and_seed_sensitive() {
        let spec = BenchmarkSpec {
            ports: 2,
            seed: 7,
            ..BenchmarkSpec::new(Family::DampedCavity, 120)
        };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = generate(&BenchmarkSpec { seed: 8, ..spec.clone() }).unwrap();
        assert_ne!(other.rhs_terms()[0].matrix, generate(&spec).unwrap().rhs_terms()[0].matrix);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let base = BenchmarkSpec::new(Family::ResonantCavity, 50);
        for bad in [
            BenchmarkSpec { n: 3, ..base.clone() },
            BenchmarkSpec { ports: 0, ..base.clone() },
            BenchmarkSpec { band: Some([2.0, 1.0]), ..base.clone() },
            BenchmarkSpec { band: Some([1.0, 1.0]), ..base.clone() },
            BenchmarkSpec { resonances: 60, ..base.clone() },
        ] {
            assert!(matches!(generate(&bad), Err(Error::InvalidSpec(_))), "{bad:?}");
        }
    }

    #[test]
    fn damped_cavity_stays_nonsingular_across_the_band() {
        let spec = BenchmarkSpec::new(Family::DampedCavity, 200);
        let sys = generate(&spec).unwrap();
        let grid = ParameterGrid::uniform(sys.domain(), 101, &[]).unwrap();
        let res = reference_resonances(&spec).unwrap();
        let mut probes: Vec<ParameterPoint> = grid.points().to_vec();
        probes.extend(res.iter().map(|&f| ParameterPoint::new(f)));
        for mu in probes {
            let sv = sys.assemble(&mu).to_dense().singular_values();
            assert!(sv.min() > 0.0 && sv.min() > 1e-12 * sv.max());
        }
    }

    #[test]
    fn random_dense_family() {
        let spec = BenchmarkSpec {
            ports: 2,
            ..BenchmarkSpec::new(Family::RandomDense, 30)
        };
        let sys = generate(&spec).unwrap();
        assert_eq!(sys.ports(), 2);
        let res = reference_resonances(&spec).unwrap();
        assert_eq!(res.len(), 3);
        let s = sys.matrix_terms()[0].matrix.to_dense();
        let oracle: Vec<f64> = pencil_oracle(&s, &CMat::identity(30, 30)).into_iter().map(to_hz).collect();
        assert!(res.iter().all(|f| oracle.iter().any(|g| (f - g).abs() <= 1e-10 * g)));
    }
}
