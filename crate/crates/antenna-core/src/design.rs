//! Design-space exploration over the middle-layer thickness t and emitter
//! height h: efficiency maps, a deterministic local optimizer and
//! fabrication-tolerance analysis.

use rayon::prelude::*;

use crate::emission::{stack_collection_efficiency, ObjectiveGeometry};
use crate::quad::QuadConfig;
use crate::stack::{HalfSpace, Layer, LayerStack};
use crate::{convert, Error, Real, Result};

/// Stack family with t and h left free.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaTemplate<T> {
    pub substrate_index: T,
    pub middle_index: T,
    pub superstrate_index: T,
    pub wavelength: T,
    /// Optional thin emitter film splitting the middle layer at the emitter
    /// plane. Its index is an assumption, not a measured value.
    pub film: Option<Film<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Film<T> {
    pub thickness: T,
    pub index: T,
}

impl<T: Real> AntennaTemplate<T> {
    pub fn new(substrate_index: T, middle_index: T, superstrate_index: T, wavelength: T) -> Self {
        AntennaTemplate {
            substrate_index,
            middle_index,
            superstrate_index,
            wavelength,
            film: None,
        }
    }

    pub fn with_film(mut self, thickness: T, index: T) -> Self {
        self.film = Some(Film { thickness, index });
        self
    }

    /// Instantiate the stack at a design point; errors if the emitter does
    /// not fit inside the middle layer there.
    pub fn stack(&self, t: T, h: T) -> Result<LayerStack<T>> {
        let infeasible = |msg: String| Err(Error::InfeasibleDomain(msg));
        if !(h > T::zero() && h < t) {
            return infeasible(format!("emitter height {h} not inside middle layer {t}"));
        }
        let stack = match self.film {
            None => LayerStack::new(
                HalfSpace::new(self.substrate_index),
                vec![Layer::new(t, self.middle_index)],
                HalfSpace::new(self.superstrate_index),
                0,
                h,
                self.wavelength,
            ),
            Some(film) => {
                let half = film.thickness * convert(0.5);
                let below = h - half;
                let above = t - h - half;
                if !(below > T::zero() && above > T::zero()) {
                    return infeasible(format!(
                        "film of {} nm at h = {h} does not fit inside t = {t}",
                        film.thickness
                    ));
                }
                LayerStack::new(
                    HalfSpace::new(self.substrate_index),
                    vec![
                        Layer::new(below, self.middle_index),
                        Layer::new(film.thickness, film.index),
                        Layer::new(above, self.middle_index),
                    ],
                    HalfSpace::new(self.superstrate_index),
                    1,
                    half,
                    self.wavelength,
                )
            }
        };
        stack.validate()?;
        Ok(stack)
    }

    fn eta(&self, t: T, h: T, objective: &ObjectiveGeometry<T>, cfg: &QuadConfig<T>) -> Result<T> {
        let stack = self.stack(t, h)?;
        stack_collection_efficiency(&stack, objective, cfg)
    }
}

/// One cell of an efficiency map.
#[derive(Debug, Clone, PartialEq)]
pub enum MapCell<T> {
    Valid(T),
    /// h ≥ t (or the film does not fit): excluded, not zero-filled.
    Infeasible,
    /// Numerical failure, recorded without aborting the sweep.
    Failed(String),
}

impl<T: Copy> MapCell<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            MapCell::Valid(v) => Some(*v),
            _ => None,
        }
    }
}

/// η sampled on a (t, h) tensor grid for a fixed objective.
#[derive(Debug, Clone)]
pub struct EfficiencyMap<T> {
    pub t_grid: Vec<T>,
    pub h_grid: Vec<T>,
    /// Row-major over t (outer) then h (inner).
    pub cells: Vec<MapCell<T>>,
    pub objective: ObjectiveGeometry<T>,
    pub template: AntennaTemplate<T>,
}

impl<T: Real> EfficiencyMap<T> {
    pub fn cell(&self, ti: usize, hi: usize) -> &MapCell<T> {
        &self.cells[ti * self.h_grid.len() + hi]
    }

    pub fn min_max_valid(&self) -> Option<(T, T)> {
        let mut it = self.cells.iter().filter_map(MapCell::value);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }
}

/// Result of the local optimization.
#[derive(Debug, Clone, Copy)]
pub struct DesignOptimum<T> {
    pub t_star: T,
    pub h_star: T,
    pub eta_star: T,
    /// Number of η evaluations spent.
    pub evaluations: usize,
}

/// Extremes of η over a fabrication-tolerance box.
#[derive(Debug, Clone, Copy)]
pub struct BoxSensitivity<T> {
    pub eta_min: T,
    pub eta_max: T,
    pub eta_center: T,
}

fn linspace<T: Real>(range: (T, T), steps: usize) -> Vec<T> {
    let n = steps.max(2);
    let width = range.1 - range.0;
    (0..n)
        .map(|i| range.0 + width * convert(i as f64) / convert((n - 1) as f64))
        .collect()
}

/// Evaluate η on the tensor grid; cells are independent and the sweep is
/// parallel, with results identical to serial evaluation.
pub fn efficiency_map<T: Real>(
    template: &AntennaTemplate<T>,
    t_range: (T, T),
    h_range: (T, T),
    steps: (usize, usize),
    objective: &ObjectiveGeometry<T>,
) -> Result<EfficiencyMap<T>> {
    objective.validate()?;
    for (name, r) in [("t", t_range), ("h", h_range)] {
        if !(r.0 > T::zero() && r.1 >= r.0) {
            return Err(Error::InfeasibleDomain(format!(
                "{name} range [{}, {}] must be positive and ordered",
                r.0, r.1
            )));
        }
    }
    assert!(steps.0 >= 2 && steps.1 >= 2, "need at least 2 steps per axis");
    let t_grid = linspace(t_range, steps.0);
    let h_grid = linspace(h_range, steps.1);
    let cfg = QuadConfig::default();
    let indices: Vec<(usize, usize)> = (0..t_grid.len())
        .flat_map(|ti| (0..h_grid.len()).map(move |hi| (ti, hi)))
        .collect();
    let cells: Vec<MapCell<T>> = indices
        .par_iter()
        .map(|&(ti, hi)| match template.eta(t_grid[ti], h_grid[hi], objective, &cfg) {
            Ok(v) => MapCell::Valid(v),
            Err(Error::InfeasibleDomain(_)) | Err(Error::InvalidStack(_)) => MapCell::Infeasible,
            Err(e) => MapCell::Failed(e.to_string()),
        })
        .collect();
    Ok(EfficiencyMap {
        t_grid,
        h_grid,
        cells,
        objective: *objective,
        template: template.clone(),
    })
}

/// Coarse grid scan followed by a deterministic Nelder–Mead contraction;
/// stops when the simplex diameter drops below `tolerance` (nm).
pub fn optimize<T: Real>(
    template: &AntennaTemplate<T>,
    t_bounds: (T, T),
    h_bounds: (T, T),
    objective: &ObjectiveGeometry<T>,
    tolerance: T,
) -> Result<DesignOptimum<T>> {
    objective.validate()?;
    assert!(tolerance > T::zero(), "tolerance must be positive");
    if !(t_bounds.1 >= t_bounds.0 && h_bounds.1 >= h_bounds.0) {
        return Err(Error::InfeasibleDomain("bounds must be ordered".into()));
    }
    let cfg = QuadConfig::default();
    let mut evaluations = 0usize;
    let cost = |t: T, h: T, evals: &mut usize| -> T {
        if t < t_bounds.0 || t > t_bounds.1 || h < h_bounds.0 || h > h_bounds.1 {
            return T::infinity();
        }
        match template.eta(t, h, objective, &cfg) {
            Ok(v) => {
                *evals += 1;
                -v
            }
            Err(_) => T::infinity(),
        }
    };

    // coarse scan
    let scan = 21usize;
    let t_grid = linspace(t_bounds, scan);
    let h_grid = linspace(h_bounds, scan);
    let mut best: Option<(T, [T; 2])> = None;
    for &t in &t_grid {
        for &h in &h_grid {
            let c = cost(t, h, &mut evaluations);
            if c.is_finite() && best.map_or(true, |(bc, _)| c < bc) {
                best = Some((c, [t, h]));
            }
        }
    }
    let (mut best_cost, start) = best.ok_or_else(|| {
        Error::InfeasibleDomain("no feasible (t, h) point inside the bounds".into())
    })?;

    // degenerate (point) bounds
    let dt = (t_bounds.1 - t_bounds.0) / convert((scan - 1) as f64);
    let dh = (h_bounds.1 - h_bounds.0) / convert((scan - 1) as f64);
    if dt <= T::zero() && dh <= T::zero() {
        return Ok(DesignOptimum {
            t_star: start[0],
            h_star: start[1],
            eta_star: -best_cost,
            evaluations,
        });
    }

    // Nelder–Mead on (t, h), standard coefficients
    let step_t = if dt > T::zero() { dt } else { tolerance };
    let step_h = if dh > T::zero() { dh } else { tolerance };
    let inside = |v: T, b: (T, T), step: T| if v + step <= b.1 { v + step } else { v - step };
    let mut simplex = [
        start,
        [inside(start[0], t_bounds, step_t), start[1]],
        [start[0], inside(start[1], h_bounds, step_h)],
    ];
    let mut costs = [
        best_cost,
        cost(simplex[1][0], simplex[1][1], &mut evaluations),
        cost(simplex[2][0], simplex[2][1], &mut evaluations),
    ];

    let half = convert::<T>(0.5);
    let two = convert::<T>(2.0);
    for _ in 0..400 {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| costs[i].partial_cmp(&costs[j]).unwrap_or(std::cmp::Ordering::Equal));
        let (lo, mid, hi) = (order[0], order[1], order[2]);
        let diameter = (0..2)
            .map(|d| {
                let a = simplex[lo][d] - simplex[mid][d];
                let b = simplex[lo][d] - simplex[hi][d];
                let c = simplex[mid][d] - simplex[hi][d];
                a.abs().max(b.abs()).max(c.abs())
            })
            .fold(T::zero(), |acc, v| acc.max(v));
        if diameter < tolerance {
            break;
        }
        let centroid = [
            (simplex[lo][0] + simplex[mid][0]) * half,
            (simplex[lo][1] + simplex[mid][1]) * half,
        ];
        let reflect = [
            centroid[0] + (centroid[0] - simplex[hi][0]),
            centroid[1] + (centroid[1] - simplex[hi][1]),
        ];
        let c_reflect = cost(reflect[0], reflect[1], &mut evaluations);
        if c_reflect < costs[lo] {
            let expand = [
                centroid[0] + two * (reflect[0] - centroid[0]),
                centroid[1] + two * (reflect[1] - centroid[1]),
            ];
            let c_expand = cost(expand[0], expand[1], &mut evaluations);
            if c_expand < c_reflect {
                simplex[hi] = expand;
                costs[hi] = c_expand;
            } else {
                simplex[hi] = reflect;
                costs[hi] = c_reflect;
            }
        } else if c_reflect < costs[mid] {
            simplex[hi] = reflect;
            costs[hi] = c_reflect;
        } else {
            let contract = [
                centroid[0] + half * (simplex[hi][0] - centroid[0]),
                centroid[1] + half * (simplex[hi][1] - centroid[1]),
            ];
            let c_contract = cost(contract[0], contract[1], &mut evaluations);
            if c_contract < costs[hi] {
                simplex[hi] = contract;
                costs[hi] = c_contract;
            } else {
                // shrink toward the best vertex
                for k in [mid, hi] {
                    simplex[k] = [
                        simplex[lo][0] + half * (simplex[k][0] - simplex[lo][0]),
                        simplex[lo][1] + half * (simplex[k][1] - simplex[lo][1]),
                    ];
                    costs[k] = cost(simplex[k][0], simplex[k][1], &mut evaluations);
                }
            }
        }
        for i in 0..3 {
            if costs[i] < best_cost {
                best_cost = costs[i];
            }
        }
    }

    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| costs[i].partial_cmp(&costs[j]).unwrap_or(std::cmp::Ordering::Equal));
    let lo = order[0];
    Ok(DesignOptimum {
        t_star: simplex[lo][0],
        h_star: simplex[lo][1],
        eta_star: -costs[lo],
        evaluations,
    })
}

/// η at the center, corners and edge midpoints of a fabrication box.
pub fn sensitivity_box<T: Real>(
    template: &AntennaTemplate<T>,
    t0: T,
    h0: T,
    delta_t: T,
    delta_h: T,
    objective: &ObjectiveGeometry<T>,
) -> Result<BoxSensitivity<T>> {
    objective.validate()?;
    assert!(delta_t >= T::zero() && delta_h >= T::zero(), "deltas must be >= 0");
    let cfg = QuadConfig::default();
    let center = template.eta(t0, h0, objective, &cfg)?;
    let mut lo = center;
    let mut hi = center;
    for (st, sh) in [
        (-1, -1),
        (-1, 0),
        (-1, 1),
        (0, -1),
        (0, 1),
        (1, -1),
        (1, 0),
        (1, 1),
    ] {
        let t = t0 + delta_t * convert(st as f64);
        let h = h0 + delta_h * convert(sh as f64);
        let eta = template.eta(t, h, objective, &cfg)?;
        lo = lo.min(eta);
        hi = hi.max(eta);
    }
    Ok(BoxSensitivity {
        eta_min: lo,
        eta_max: hi,
        eta_center: center,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn nominal_template() -> AntennaTemplate<f64> {
        AntennaTemplate::new(1.78, 1.50, 1.0, 580.0)
    }

    fn objective() -> ObjectiveGeometry<f64> {
        ObjectiveGeometry::new(1.65, 1.78)
    }

    #[test]
    fn map_cell_at_nominal_point() {
        let map = efficiency_map(
            &nominal_template(),
            (340.0, 360.0),
            (190.0, 210.0),
            (3, 3),
            &objective(),
        )
        .unwrap();
        // center cell is exactly (350, 200)
        match map.cell(1, 1) {
            MapCell::Valid(eta) => assert_relative_eq!(*eta, 0.9491, epsilon = 1e-3),
            other => panic!("unexpected cell {other:?}"),
        }
    }

    #[test]
    fn degenerate_grid_is_all_invalid() {
        let map = efficiency_map(
            &nominal_template(),
            (100.0, 110.0),
            (200.0, 300.0),
            (2, 2),
            &objective(),
        )
        .unwrap();
        assert!(map.cells.iter().all(|c| matches!(c, MapCell::Infeasible)));
    }

    #[test]
    fn map_agrees_with_standalone_evaluation() {
        let template = nominal_template();
        let map = efficiency_map(&template, (300.0, 400.0), (150.0, 250.0), (3, 3), &objective())
            .unwrap();
        let standalone = template
            .eta(map.t_grid[2], map.h_grid[0], &objective(), &QuadConfig::default())
            .unwrap();
        assert_eq!(map.cell(2, 0).value().unwrap(), standalone);
    }

    #[test]
    fn tolerance_box_map_bounds() {
        // nominal fabrication window: ±20 nm around (350, 200)
        let map = efficiency_map(
            &nominal_template(),
            (330.0, 370.0),
            (180.0, 220.0),
            (5, 5),
            &objective(),
        )
        .unwrap();
        let (lo, hi) = map.min_max_valid().unwrap();
        assert!(lo >= 0.93, "min eta {lo}");
        assert!(hi - lo <= 0.03, "spread {}", hi - lo);
    }

    #[test]
    fn optimize_collapsed_bounds_returns_point() {
        let opt = optimize(
            &nominal_template(),
            (350.0, 350.0),
            (200.0, 200.0),
            &objective(),
            1.0,
        )
        .unwrap();
        assert_eq!(opt.t_star, 350.0);
        assert_eq!(opt.h_star, 200.0);
        assert_relative_eq!(opt.eta_star, 0.9491, epsilon = 1e-3);
    }

    #[test]
    fn optimize_infeasible_domain_errors() {
        let err = optimize(
            &nominal_template(),
            (100.0, 150.0),
            (200.0, 400.0),
            &objective(),
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InfeasibleDomain(_)));
    }

    #[test]
    fn optimize_dominates_reference_grid_and_na_monotonicity() {
        let template = nominal_template();
        let obj = objective();
        let opt = optimize(&template, (200.0, 700.0), (50.0, 650.0), &obj, 0.5).unwrap();
        // brute-force reference grid oracle
        let reference =
            efficiency_map(&template, (200.0, 700.0), (50.0, 650.0), (26, 26), &obj).unwrap();
        let (_, grid_best) = reference.min_max_valid().unwrap();
        assert!(
            opt.eta_star >= grid_best - 1e-9,
            "optimizer {} vs grid {}",
            opt.eta_star,
            grid_best
        );
        assert!(opt.evaluations > 0);
        // eta at the optimum equals a fresh standalone evaluation
        let check = template
            .eta(opt.t_star, opt.h_star, &obj, &QuadConfig::default())
            .unwrap();
        assert_relative_eq!(opt.eta_star, check, epsilon = 1e-6);

        let narrow = ObjectiveGeometry::new(1.0, 1.78);
        let opt_narrow = optimize(&template, (200.0, 700.0), (50.0, 650.0), &narrow, 2.0).unwrap();
        assert!(opt_narrow.eta_star < opt.eta_star);
    }

    #[test]
    fn optimizer_is_deterministic() {
        let a = optimize(&nominal_template(), (250.0, 450.0), (100.0, 300.0), &objective(), 1.0)
            .unwrap();
        let b = optimize(&nominal_template(), (250.0, 450.0), (100.0, 300.0), &objective(), 1.0)
            .unwrap();
        assert_eq!(a.t_star.to_bits(), b.t_star.to_bits());
        assert_eq!(a.h_star.to_bits(), b.h_star.to_bits());
        assert_eq!(a.eta_star.to_bits(), b.eta_star.to_bits());
        assert_eq!(a.evaluations, b.evaluations);
    }

    #[test]
    fn sensitivity_box_nominal_window() {
        let s = sensitivity_box(&nominal_template(), 350.0, 200.0, 20.0, 20.0, &objective()).unwrap();
        assert!(s.eta_max - s.eta_min <= 0.03);
        assert!(s.eta_min <= s.eta_center && s.eta_center <= s.eta_max);
    }

    #[test]
    fn sensitivity_box_zero_deltas() {
        let s = sensitivity_box(&nominal_template(), 350.0, 200.0, 0.0, 0.0, &objective()).unwrap();
        assert_eq!(s.eta_min, s.eta_max);
        assert_eq!(s.eta_min, s.eta_center);
    }

    #[test]
    fn sensitivity_box_smooth_at_600() {
        let s = sensitivity_box(&nominal_template(), 600.0, 200.0, 20.0, 20.0, &objective()).unwrap();
        assert!(s.eta_max - s.eta_min < 0.05);
    }

    #[test]
    fn sensitivity_box_crossing_feasibility_errors() {
        let err =
            sensitivity_box(&nominal_template(), 210.0, 200.0, 20.0, 20.0, &objective()).unwrap_err();
        assert!(matches!(err, Error::InfeasibleDomain(_)));
    }

    #[test]
    fn film_geometry_preserves_totals() {
        let template = nominal_template().with_film(20.0, 1.7);
        let stack = template.stack(350.0, 200.0).unwrap();
        assert_eq!(stack.layers.len(), 3);
        let total: f64 = stack.layers.iter().map(|l| l.thickness).sum();
        assert_relative_eq!(total, 350.0, epsilon = 1e-12);
        assert_eq!(stack.emitter_layer, 1);
        assert_relative_eq!(stack.emitter_height, 10.0, epsilon = 1e-12);
    }
}
