//! Integrated density of states by disorder-averaged eigenvalue counting.
//!
//! Every realization is a fresh disorder draw whose seed is derived from
//! `(seed_base, r)`; counts are exact inertia counts of `H_ω - E`. The
//! estimate is the mean count divided by the number of cells in the box,
//! `(2L+1)^d`, for every boundary condition.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::eigen::InertiaCounter;
use crate::error::{Error, Result};
use crate::model::{
    assemble_alloy_potential, constant_config, derive_seed, sample_disorder, unravel, BoxSpec, Boundary,
    DisorderConfig, DisorderLaw, UnitCellPotential, MAX_DIM,
};
use crate::operator::{discretize, SparseSymmetric};
use crate::parallel::Execution;
use crate::single_site::{ground_energy, DEGENERACY_TOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbortedRealization {
    pub index: usize,
    pub message: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdsCurve {
    pub box_spec: BoxSpec,
    pub law: DisorderLaw,
    pub energies: Vec<f64>,
    /// Realization × energy. Rows of aborted realizations are empty.
    pub counts: Vec<Vec<u64>>,
    pub estimate: Vec<f64>,
    pub stderr: Vec<f64>,
    pub seed_base: u64,
    pub aborted: Vec<AbortedRealization>,
}

impl IdsCurve {
    /// Number of realizations that contributed to the estimate.
    pub fn used(&self) -> usize {
        self.counts.iter().filter(|row| !row.is_empty()).count()
    }

    /// A curve with any aborted realization must not be published as is.
    pub fn publishable(&self) -> bool {
        self.aborted.is_empty()
    }

    /// Per-realization normalized counts for realization `r`.
    pub fn normalized_row(&self, r: usize) -> Vec<f64> {
        let vol = self.box_spec.volume();
        self.counts[r].iter().map(|&c| c as f64 / vol).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let bx = &self.box_spec;
        let l = bx.half_width().map_or_else(String::new, |l| l.to_string());
        writeln!(out, "E,estimate,stderr,R,L,n,d,boundary")?;
        for i in 0..self.energies.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.energies[i],
                self.estimate[i],
                self.stderr[i],
                self.used(),
                l,
                bx.n,
                bx.dim,
                bx.boundary
            )?;
        }
        Ok(())
    }
}

/// Energies and estimates read back from an IDS CSV file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CurveData {
    pub energies: Vec<f64>,
    pub estimate: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Spatial dimension, when the file records it.
    pub dim: Option<usize>,
}

impl CurveData {
    pub fn from_curve(curve: &IdsCurve) -> Self {
        CurveData {
            energies: curve.energies.clone(),
            estimate: curve.estimate.clone(),
            stderr: curve.stderr.clone(),
            dim: Some(curve.box_spec.dim),
        }
    }

    /// Parses the `E,estimate,stderr,...` layout written by
    /// [`IdsCurve::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::invalid("empty curve file"))??;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let find = |name: &str| cols.iter().position(|c| *c == name);
        let ce = find("E").ok_or_else(|| Error::invalid("curve file lacks an `E` column"))?;
        let cn = find("estimate").ok_or_else(|| Error::invalid("curve file lacks an `estimate` column"))?;
        let cs = find("stderr");
        let cd = find("d");
        let mut data = CurveData::default();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let num = |c: usize| -> Result<f64> {
                fields
                    .get(c)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::invalid(format!("curve file line {}: bad number in column {c}", lineno + 2)))
            };
            data.energies.push(num(ce)?);
            data.estimate.push(num(cn)?);
            data.stderr.push(cs.map(num).transpose()?.unwrap_or(0.0));
            if let Some(c) = cd {
                data.dim = fields.get(c).and_then(|s| s.parse().ok());
            }
        }
        Ok(data)
    }
}

fn check_energies(energies: &[f64]) -> Result<()> {
    if energies.is_empty() {
        return Err(Error::invalid("energy grid is empty"));
    }
    if energies.iter().any(|e| !e.is_finite()) || energies.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("energy grid must be finite and strictly ascending"));
    }
    Ok(())
}

/// Counts `#{eigenvalues <= E}` of `build(r)` for every realization and
/// energy, then reduces in realization order.
fn count_realizations<F>(
    box_spec: &BoxSpec,
    law: &DisorderLaw,
    energies: &[f64],
    realizations: usize,
    seed: u64,
    exec: Execution,
    build: F,
) -> Result<IdsCurve>
where
    F: Fn(usize) -> Result<SparseSymmetric> + Sync + Send,
{
    check_energies(energies)?;
    if realizations == 0 {
        return Err(Error::invalid("at least one realization is required"));
    }
    // all realizations share the sparsity pattern of the free operator
    let pattern = discretize(box_spec, &vec![0.0; box_spec.order()])?;
    let counter = InertiaCounter::new(&pattern);
    let rows = exec.map(realizations, |r| -> Result<Vec<u64>> {
        let a = build(r)?;
        energies
            .iter()
            .map(|&e| counter.count_below(&a, e).map(|c| c as u64))
            .collect()
    });
    Ok(reduce(box_spec, law, energies, seed, rows))
}

fn reduce(box_spec: &BoxSpec, law: &DisorderLaw, energies: &[f64], seed: u64, rows: Vec<Result<Vec<u64>>>) -> IdsCurve {
    let vol = box_spec.volume();
    let mut counts = Vec::with_capacity(rows.len());
    let mut aborted = Vec::new();
    for (index, row) in rows.into_iter().enumerate() {
        match row {
            Ok(c) => counts.push(c),
            Err(e) => {
                aborted.push(AbortedRealization {
                    index,
                    message: e.to_string(),
                });
                counts.push(Vec::new());
            }
        }
    }
    let used: Vec<&Vec<u64>> = counts.iter().filter(|r| !r.is_empty()).collect();
    let m = used.len() as f64;
    let mut estimate = vec![f64::NAN; energies.len()];
    let mut stderr = vec![f64::NAN; energies.len()];
    if !used.is_empty() {
        for j in 0..energies.len() {
            let mean = used.iter().map(|row| row[j] as f64).sum::<f64>() / m;
            let var = if used.len() > 1 {
                used.iter().map(|row| (row[j] as f64 - mean).powi(2)).sum::<f64>() / (m - 1.0)
            } else {
                0.0
            };
            estimate[j] = mean / vol;
            stderr[j] = (var / m).sqrt() / vol;
        }
    }
    IdsCurve {
        box_spec: *box_spec,
        law: *law,
        energies: energies.to_vec(),
        counts,
        estimate,
        stderr,
        seed_base: seed,
        aborted,
    }
}

/// `H_ω` on the box for one configuration.
pub fn alloy_operator(v: &UnitCellPotential, config: &DisorderConfig) -> Result<SparseSymmetric> {
    discretize(&config.box_spec, &assemble_alloy_potential(config, v)?)
}

/// Disorder configuration of realization `r` of a run seeded with `seed`.
pub fn realization_config(law: &DisorderLaw, box_spec: &BoxSpec, seed: u64, r: usize) -> DisorderConfig {
    sample_disorder(law, box_spec, derive_seed(seed, r as u64))
}

/// Normalized eigenvalue counting function averaged over `realizations`
/// disorder draws.
pub fn estimate_ids(
    v: &UnitCellPotential,
    law: &DisorderLaw,
    box_spec: &BoxSpec,
    energies: &[f64],
    realizations: usize,
    seed: u64,
    exec: Execution,
) -> Result<IdsCurve> {
    if box_spec.boundary == Boundary::Periodic {
        return Err(Error::invalid("IDS estimates use Neumann or Dirichlet boxes"));
    }
    count_realizations(box_spec, law, energies, realizations, seed, exec, |r| {
        alloy_operator(v, &realization_config(law, box_spec, seed, r))
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BracketViolation {
    pub realization: usize,
    pub energy: f64,
    pub dirichlet: u64,
    pub neumann: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Bracket {
    /// Dirichlet curve, a lower bound for `N(E)`.
    pub lower: IdsCurve,
    /// Neumann curve, an upper bound.
    pub upper: IdsCurve,
    pub violations: Vec<BracketViolation>,
}

impl Bracket {
    pub fn ordered(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Dirichlet and Neumann curves on the same disorder draws.
pub fn bracket_ids(
    v: &UnitCellPotential,
    law: &DisorderLaw,
    box_spec: &BoxSpec,
    energies: &[f64],
    realizations: usize,
    seed: u64,
    exec: Execution,
) -> Result<Bracket> {
    let dir = box_spec.with_boundary(Boundary::Dirichlet);
    let neu = box_spec.with_boundary(Boundary::Neumann);
    let lower = estimate_ids(v, law, &dir, energies, realizations, seed, exec)?;
    let upper = estimate_ids(v, law, &neu, energies, realizations, seed, exec)?;
    let mut violations = Vec::new();
    for r in 0..realizations {
        let (lo, up) = (&lower.counts[r], &upper.counts[r]);
        if lo.is_empty() || up.is_empty() {
            continue;
        }
        for j in 0..energies.len() {
            if lo[j] > up[j] {
                violations.push(BracketViolation {
                    realization: r,
                    energy: energies[j],
                    dirichlet: lo[j],
                    neumann: up[j],
                });
            }
        }
    }
    Ok(Bracket {
        lower,
        upper,
        violations,
    })
}

/// The problem written so that the lower edge is `a`: when `E₋(b) < E₋(a)`
/// the pair `(ω, V)` is replaced by `(-ω, -V)`, which leaves `ω V` and hence
/// `H_ω` unchanged.
#[derive(Clone, Debug)]
pub struct Oriented {
    pub v: UnitCellPotential,
    pub a: f64,
    pub b: f64,
    /// `E₋(a)` of the oriented problem.
    pub e_a: f64,
    pub e_b: f64,
    pub reflected: bool,
}

impl Oriented {
    pub fn new(v: &UnitCellPotential, a: f64, b: f64) -> Result<Self> {
        let e_a = ground_energy(v, a)?.energy;
        let e_b = ground_energy(v, b)?.energy;
        let scale = e_a.abs().max(e_b.abs()).max(1.0);
        if (e_a - e_b).abs() <= DEGENERACY_TOL * scale {
            return Err(Error::Degenerate { e_a, e_b });
        }
        Ok(if e_a < e_b {
            Oriented {
                v: v.clone(),
                a,
                b,
                e_a,
                e_b,
                reflected: false,
            }
        } else {
            Oriented {
                v: v.negated(),
                a: -b,
                b: -a,
                e_a: e_b,
                e_b: e_a,
                reflected: true,
            }
        })
    }

    /// Coupling of the oriented problem for a physical coupling `omega`.
    pub fn coupling(&self, omega: f64) -> f64 {
        if self.reflected {
            -omega
        } else {
            omega
        }
    }

    /// `H_{a + β(b-a)} - E₋(a)` on the unit cell has this ground energy.
    fn margin(&self, beta: f64) -> Result<f64> {
        Ok(ground_energy(&self.v, self.a + beta * (self.b - self.a))?.energy - self.e_a)
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ComparisonConstant {
    /// `C` in `(H_a - E₋(a)) + (t - a) <= C (H_t - E₋(a))`.
    pub c: f64,
    /// Coupling multiplier of the certificate, `β > 1`.
    pub beta: f64,
    /// `inf σ(H_{a+β(b-a)}) - E₋(a) > 0`.
    pub delta: f64,
    pub reflected: bool,
}

const BETA_CAP: f64 = 64.0;

/// Constant of the comparison inequality between `H_t` and the monotone
/// model, with its certificate `(β, δ)`.
///
/// Along `t = a + s(b - a)` write `H_0 = H_a - E₋(a)` and `V_1 = (b-a)V`.
/// For any `β > 1` with `δ = inf σ(H_0 + β V_1) > 0`, convexity gives
/// `H_0 + s V_1 >= min(1 - 1/β, δ/β) (H_0 + s)` on `s ∈ [0, 1]`; the
/// returned `C` also absorbs the factor `max(1, b - a)` from `s` to `t - a`.
pub fn comparison_constant(v: &UnitCellPotential, a: f64, b: f64) -> Result<ComparisonConstant> {
    if !(a < b) {
        return Err(Error::invalid("comparison needs a nondegenerate coupling interval a < b"));
    }
    let o = Oriented::new(v, a, b)?;
    // δ(β) is concave with δ(1) > 0: bracket its first zero beyond 1
    let mut hi = 2.0;
    let mut hi_margin = o.margin(hi)?;
    while hi_margin > 0.0 && hi < BETA_CAP {
        hi *= 2.0;
        hi_margin = o.margin(hi)?;
    }
    let upper = if hi_margin > 0.0 {
        hi
    } else {
        let (mut lo, mut up) = (1.0, hi);
        for _ in 0..60 {
            let mid = 0.5 * (lo + up);
            if o.margin(mid)? > 0.0 {
                lo = mid;
            } else {
                up = mid;
            }
        }
        lo
    };
    let inv = |beta: f64, delta: f64| (1.0 - 1.0 / beta).min(delta / beta);
    // coarse scan, then golden-section refinement of the unimodal objective
    let samples = 32;
    let mut best = (f64::NEG_INFINITY, 1.0, 0.0);
    for i in 1..=samples {
        let beta = 1.0 + (upper - 1.0) * i as f64 / samples as f64;
        let delta = o.margin(beta)?;
        let val = inv(beta, delta);
        if val > best.0 {
            best = (val, beta, delta);
        }
    }
    let step = (upper - 1.0) / samples as f64;
    let (mut lo, mut up) = ((best.1 - step).max(1.0), (best.1 + step).min(upper));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..40 {
        let x1 = up - g * (up - lo);
        let x2 = lo + g * (up - lo);
        let (d1, d2) = (o.margin(x1)?, o.margin(x2)?);
        let (f1, f2) = (inv(x1, d1), inv(x2, d2));
        if f1 > best.0 {
            best = (f1, x1, d1);
        }
        if f2 > best.0 {
            best = (f2, x2, d2);
        }
        if f1 < f2 {
            lo = x1;
        } else {
            up = x2;
        }
    }
    let (val, beta, delta) = best;
    if !(val > 0.0) || !(delta > 0.0) {
        return Err(Error::Degenerate { e_a: o.e_a, e_b: o.e_b });
    }
    Ok(ComparisonConstant {
        c: (o.b - o.a).max(1.0) / val,
        beta,
        delta,
        reflected: o.reflected,
    })
}

/// `min σ(C(H_t - E₋(a)) - (H_a - E₋(a)) - (t - a))` on the unit cell for
/// a physical coupling `t`, in the oriented frame.
pub fn comparison_margin(v: &UnitCellPotential, a: f64, b: f64, c: f64, t: f64) -> Result<f64> {
    let o = Oriented::new(v, a, b)?;
    let t = o.coupling(t);
    let bx = o.v.unit_box(Boundary::Neumann);
    let free = discretize(&bx, &vec![0.0; bx.order()])?;
    // C(-Δ + tV) - (-Δ + aV) = (C-1)(-Δ) + (Ct - a)V
    let pot: Vec<f64> = o.v.values().iter().map(|&x| (c * t - o.a) * x).collect();
    let shift = -c * o.e_a + o.e_a - (t - o.a);
    let m = free.affine(c - 1.0, 0.0).plus_diagonal(&pot)?.shifted(shift);
    let r = crate::eigen::lowest_eigenpairs(&m, 1, 1e-12, 200_000)?;
    Ok(r.eigenvalues[0])
}

/// The monotone comparison operator
/// `H^m_ω = H_ā - E₋(a) + Σ_γ (ω_γ - a) 1_{cell γ}` in the oriented frame.
pub fn comparison_operator(o: &Oriented, config: &DisorderConfig) -> Result<SparseSymmetric> {
    let bx = &config.box_spec;
    let background = assemble_alloy_potential(&constant_config(bx, o.a), &o.v)?;
    let side = bx.points_per_side();
    let mut pot = background;
    for (idx, p) in pot.iter_mut().enumerate() {
        let multi = unravel(idx, side, bx.dim);
        let mut cell = [0usize; MAX_DIM];
        for axis in 0..bx.dim {
            cell[axis] = multi[axis] / bx.n;
        }
        let site = crate::model::ravel(&cell[..bx.dim], bx.cells);
        *p += o.coupling(config.values[site]) - o.a - o.e_a;
    }
    discretize(bx, &pot)
}

/// IDS of the monotone comparison operator `H^m` on the same draws an
/// [`estimate_ids`] run with this seed would use.
pub fn comparison_ids(
    v: &UnitCellPotential,
    law: &DisorderLaw,
    box_spec: &BoxSpec,
    energies: &[f64],
    realizations: usize,
    seed: u64,
    exec: Execution,
) -> Result<IdsCurve> {
    let o = Oriented::new(v, law.a, law.b)?;
    count_realizations(box_spec, law, energies, realizations, seed, exec, |r| {
        comparison_operator(&o, &realization_config(law, box_spec, seed, r))
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonViolation {
    pub realization: usize,
    pub energy: f64,
    pub count: u64,
    pub comparison_count: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonCheck {
    pub constant: ComparisonConstant,
    /// `E₋(a)` of the oriented problem.
    pub e_a: f64,
    pub curve: IdsCurve,
    /// `N_m` evaluated at `C (E - E₋(a))`.
    pub comparison: IdsCurve,
    pub violations: Vec<ComparisonViolation>,
}

impl ComparisonCheck {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Per matched realization, checks `N(E) <= N_m(C (E - E₋(a)))` on the grid.
pub fn comparison_check(
    v: &UnitCellPotential,
    law: &DisorderLaw,
    box_spec: &BoxSpec,
    energies: &[f64],
    realizations: usize,
    seed: u64,
    exec: Execution,
) -> Result<ComparisonCheck> {
    let constant = comparison_constant(v, law.a, law.b)?;
    let o = Oriented::new(v, law.a, law.b)?;
    let curve = estimate_ids(v, law, box_spec, energies, realizations, seed, exec)?;
    let scaled: Vec<f64> = energies.iter().map(|e| constant.c * (e - o.e_a)).collect();
    let comparison = comparison_ids(v, law, box_spec, &scaled, realizations, seed, exec)?;
    let mut violations = Vec::new();
    for r in 0..realizations {
        let (n, nm) = (&curve.counts[r], &comparison.counts[r]);
        if n.is_empty() || nm.is_empty() {
            continue;
        }
        for j in 0..energies.len() {
            if n[j] > nm[j] {
                violations.push(ComparisonViolation {
                    realization: r,
                    energy: energies[j],
                    count: n[j],
                    comparison_count: nm[j],
                });
            }
        }
    }
    Ok(ComparisonCheck {
        constant,
        e_a: o.e_a,
        curve,
        comparison,
        violations,
    })
}

/// Energies `lo, ..., hi` equally spaced.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// `edge + offset` with offsets geometric from `lo` to `hi` (both > 0).
pub fn geometric_grid(edge: f64, lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![edge + lo];
    }
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| edge + (l0 + (l1 - l0) * i as f64 / (points - 1) as f64).exp())
        .collect()
}
