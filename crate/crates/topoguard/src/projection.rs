//! Euclidean projection onto the budgeted box
//! `S = { s : 1ᵀs <= eps, s ∈ [0, 1]ⁿ }`.
//!
//! The projection splits into two cases. If clipping `a` into the unit box
//! already satisfies the budget, that clip is the answer and the budget
//! multiplier is zero. Otherwise the budget is tight and the solution is
//! `s = clip(a - mu 1)` for the unique `mu > 0` with `1ᵀ s = eps`; the
//! shifted clip mass `g(mu) = 1ᵀ clip(a - mu 1)` is continuous and
//! non-increasing in `mu`, so `mu` is found by bisection on the bracket
//! `[min(a) - 1, max(a)]`, over which `g` falls from `n` to `0`.
//!
//! [`project_oracle`] solves the same problem exactly by sorting the `2n`
//! breakpoints of the piecewise-linear `g` and solving the linear segment
//! that crosses the budget. It is quadratic-ish in bookkeeping and capped
//! at small sizes, existing purely as an independent cross-check for the
//! bisection path.

use ndarray::Array1;

use crate::error::{Error, Result};

/// Default bisection tolerance on the budget residual and bracket width.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Hard cap on bisection iterations before reporting non-convergence.
pub const MAX_BISECTION_ITERS: usize = 200;

/// Largest problem size accepted by [`project_oracle`].
pub const ORACLE_MAX_LEN: usize = 64;

/// Which constraint set determined the projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActiveCase {
    /// Clipping into the unit box already met the budget; `mu = 0`.
    Interior,
    /// The budget is tight and a positive multiplier was bisected.
    BudgetTight,
}

/// Outcome of a projection.
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    /// The projected point, entry-wise in `[0, 1]` with `1ᵀs <= eps` up to
    /// the bisection tolerance.
    pub s: Array1<f64>,
    /// Budget multiplier: zero in the interior case, positive when tight.
    pub mu: f64,
    /// Bisection iterations spent (zero in the interior case).
    pub iterations: usize,
    /// Which case applied.
    pub case: ActiveCase,
}

fn clip_unit(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

fn clip_mass(a: &Array1<f64>, mu: f64) -> f64 {
    a.iter().map(|&v| clip_unit(v - mu)).sum()
}

fn validate_input(a: &Array1<f64>, eps: f64) -> Result<()> {
    if let Some((k, &v)) = a.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Numeric(format!("projection input entry {k} = {v}")));
    }
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::Config(format!("projection budget {eps} must be >= 0")));
    }
    Ok(())
}

/// Projects `a` onto `{ s : 1ᵀs <= eps, s ∈ [0, 1]ⁿ }` by bisecting the
/// budget multiplier.
///
/// `tolerance` bounds both the budget residual `|1ᵀs - eps|` accepted at the
/// bisected `mu` and the final bracket width; it must be positive. When the
/// bracket collapses first, the feasible (upper) endpoint is taken so the
/// returned point never exceeds the budget. Fails with a numerical error if
/// the iteration cap is hit, which for any representable bracket it is not.
pub fn project(a: &Array1<f64>, eps: f64, tolerance: f64) -> Result<ProjectionResult> {
    validate_input(a, eps)?;
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Error::Config(format!(
            "projection tolerance {tolerance} must be positive"
        )));
    }
    if a.is_empty() {
        return Ok(ProjectionResult {
            s: a.clone(),
            mu: 0.0,
            iterations: 0,
            case: ActiveCase::Interior,
        });
    }

    let clipped = a.mapv(clip_unit);
    if clipped.sum() <= eps {
        return Ok(ProjectionResult {
            s: clipped,
            mu: 0.0,
            iterations: 0,
            case: ActiveCase::Interior,
        });
    }

    let min = a.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // g(lo) = n - eps > 0 because the budget is tight; g(hi) = -eps <= 0.
    let mut lo = min - 1.0;
    let mut hi = max;
    for iteration in 1..=MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        let residual = clip_mass(a, mid) - eps;
        if residual.abs() <= tolerance {
            return Ok(ProjectionResult {
                s: a.mapv(|v| clip_unit(v - mid)),
                mu: mid,
                iterations: iteration,
                case: ActiveCase::BudgetTight,
            });
        }
        if residual > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tolerance {
            // Take the feasible endpoint: clip mass at `hi` is below the
            // budget, so the returned point never overspends.
            return Ok(ProjectionResult {
                s: a.mapv(|v| clip_unit(v - hi)),
                mu: hi,
                iterations: iteration,
                case: ActiveCase::BudgetTight,
            });
        }
    }
    Err(Error::Numeric(format!(
        "budget bisection did not converge in {MAX_BISECTION_ITERS} iterations"
    )))
}

/// Exact reference projection via breakpoint enumeration; sizes are capped
/// at [`ORACLE_MAX_LEN`].
///
/// The clip mass `g(mu) = 1ᵀ clip(a - mu 1)` is piecewise linear with
/// breakpoints at `a_i` and `a_i - 1`. After sorting those, the segment
/// where `g` crosses `eps` is identified and the crossing solved in closed
/// form, so the result carries no iterative tolerance.
pub fn project_oracle(a: &Array1<f64>, eps: f64) -> Result<Array1<f64>> {
    validate_input(a, eps)?;
    if a.len() > ORACLE_MAX_LEN {
        return Err(Error::Config(format!(
            "reference projection supports at most {ORACLE_MAX_LEN} entries, got {}",
            a.len()
        )));
    }

    let clipped = a.mapv(clip_unit);
    if clipped.sum() <= eps {
        return Ok(clipped);
    }

    let mut breakpoints: Vec<f64> = a.iter().flat_map(|&v| [v, v - 1.0]).collect();
    breakpoints.sort_by(|x, y| x.partial_cmp(y).unwrap());
    breakpoints.dedup();

    // g is non-increasing; find the first breakpoint where it dips to or
    // below the budget. The crossing lies in the segment ending there.
    let crossing = breakpoints
        .iter()
        .position(|&b| clip_mass(a, b) <= eps)
        .expect("clip mass reaches zero at the largest breakpoint");
    let upper = breakpoints[crossing];
    if clip_mass(a, upper) == eps {
        return Ok(a.mapv(|v| clip_unit(v - upper)));
    }
    // crossing > 0: at the smallest breakpoint, mu = min(a) - 1, every
    // entry clips to 1 and g = n > eps in the tight case.
    let lower = breakpoints[crossing - 1];

    // Within (lower, upper) the active set is fixed; probe the midpoint.
    let probe = 0.5 * (lower + upper);
    let mut saturated = 0.0; // entries clipped to 1
    let mut active_sum = 0.0; // entries strictly inside (0, 1)
    let mut active_count = 0.0;
    for &v in a.iter() {
        let shifted = v - probe;
        if shifted >= 1.0 {
            saturated += 1.0;
        } else if shifted > 0.0 {
            active_sum += v;
            active_count += 1.0;
        }
    }
    let mu = if active_count == 0.0 {
        // g is flat on this segment; it can only equal eps here, which the
        // breakpoint scan above already handled, so the crossing must sit
        // exactly at the segment boundary.
        upper
    } else {
        (saturated + active_sum - eps) / active_count
    };
    Ok(a.mapv(|v| clip_unit(v - mu)))
}
