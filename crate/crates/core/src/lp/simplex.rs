//! Two-phase bounded-variable tableau simplex with Bland's rule.

use num_traits::{One, Zero};

use super::{tracing, LinearProgram, LpOutcome, RowKind, Sense};
use crate::arith::Rational;
use crate::error::{Error, Result};

/// How a user variable is expressed through internal variables `z ≥ 0`.
#[derive(Debug, Clone)]
enum VarMap {
    /// `x = shift + z`
    Up(usize, Rational),
    /// `x = shift − z`
    Down(usize, Rational),
    /// `x = z⁺ − z⁻`
    Split(usize, usize),
}

struct Tableau {
    /// `B⁻¹A` with the artificial block last.
    t: Vec<Vec<Rational>>,
    /// Current values of the basic variables.
    xb: Vec<Rational>,
    basis: Vec<usize>,
    /// Upper bounds of internal variables (lower bounds are all zero).
    ub: Vec<Option<Rational>>,
    at_upper: Vec<bool>,
    ncols: usize,
    art_start: usize,
}

enum Step {
    Optimal,
    Unbounded { entering: usize },
    Moved,
}

impl Tableau {
    fn is_basic(&self) -> Vec<Option<usize>> {
        let mut pos = vec![None; self.ncols];
        for (r, &b) in self.basis.iter().enumerate() {
            pos[b] = Some(r);
        }
        pos
    }

    fn reduced_costs(&self, cost: &[Rational]) -> Vec<Rational> {
        let mut d = cost.to_vec();
        for (r, &b) in self.basis.iter().enumerate() {
            if cost[b].is_zero() {
                continue;
            }
            for (j, v) in self.t[r].iter().enumerate() {
                if !v.is_zero() {
                    d[j] -= &cost[b] * v;
                }
            }
        }
        d
    }

    fn value(&self, j: usize, pos: &[Option<usize>]) -> Rational {
        match pos[j] {
            Some(r) => self.xb[r].clone(),
            None if self.at_upper[j] => self.ub[j].clone().expect("at upper without bound"),
            None => Rational::zero(),
        }
    }

    /// One Bland step for `min costᵀz`.
    fn step(&mut self, cost: &[Rational], d: &mut Vec<Rational>) -> Step {
        let pos = self.is_basic();
        let entering = (0..self.ncols).find(|&j| {
            if pos[j].is_some() || self.ub[j].as_ref().is_some_and(Zero::is_zero) {
                return false;
            }
            if self.at_upper[j] {
                d[j].is_positive()
            } else {
                d[j].is_negative()
            }
        });
        let Some(j) = entering else { return Step::Optimal };
        let dir_up = !self.at_upper[j];

        // Ratio test. `None` as leaving row means a bound flip of j.
        let mut best: Option<(Rational, Option<usize>)> = self.ub[j].clone().map(|u| (u, None));
        for r in 0..self.basis.len() {
            let a = &self.t[r][j];
            if a.is_zero() {
                continue;
            }
            // Basic r moves by −alpha·t.
            let alpha_pos = a.is_positive() == dir_up;
            let limit = if alpha_pos {
                &self.xb[r] / a.abs()
            } else {
                match &self.ub[self.basis[r]] {
                    Some(u) => (u - &self.xb[r]) / a.abs(),
                    None => continue,
                }
            };
            let better = match &best {
                None => true,
                Some((t, who)) => {
                    limit < *t
                        || (limit == *t
                            && match who {
                                None => false,
                                Some(rr) => self.basis[r] < self.basis[*rr],
                            })
                }
            };
            if better {
                best = Some((limit, Some(r)));
            }
        }
        let Some((t, leaving)) = best else { return Step::Unbounded { entering: j } };

        if tracing() {
            eprintln!(
                "simplex: enter z{j} ({}), step {t}, {}",
                if dir_up { "up" } else { "down" },
                match leaving {
                    Some(r) => format!("leave z{}", self.basis[r]),
                    None => "bound flip".into(),
                }
            );
        }

        let signed_t = if dir_up { t.clone() } else { -&t };
        if !t.is_zero() {
            for r in 0..self.basis.len() {
                if !self.t[r][j].is_zero() {
                    let delta = &self.t[r][j] * &signed_t;
                    self.xb[r] -= delta;
                }
            }
        }
        match leaving {
            None => {
                self.at_upper[j] = dir_up;
            }
            Some(r) => {
                let entering_value = if dir_up { signed_t } else { self.ub[j].clone().unwrap() + signed_t };
                let old = self.basis[r];
                // Leaving variable sits at the bound it hit.
                let a_pos = self.t[r][j].is_positive() == dir_up;
                self.at_upper[old] = !a_pos;
                self.at_upper[j] = false;
                self.pivot(r, j);
                self.basis[r] = j;
                self.xb[r] = entering_value;
                // Keep the objective row consistent.
                let dj = d[j].clone();
                if !dj.is_zero() {
                    for (c, v) in self.t[r].iter().enumerate() {
                        if !v.is_zero() {
                            d[c] -= &dj * v;
                        }
                    }
                }
                debug_assert!({
                    let fresh = self.reduced_costs(cost);
                    fresh == *d
                });
            }
        }
        Step::Moved
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let inv = self.t[r][j].recip();
        let nz: Vec<usize> = (0..self.ncols).filter(|&c| !self.t[r][c].is_zero()).collect();
        for &c in &nz {
            self.t[r][c] *= &inv;
        }
        let (before, rest) = self.t.split_at_mut(r);
        let (prow, after) = rest.split_first_mut().unwrap();
        for row in before.iter_mut().chain(after.iter_mut()) {
            if row[j].is_zero() {
                continue;
            }
            let f = row[j].clone();
            for &c in &nz {
                let delta = &f * &prow[c];
                row[c] -= delta;
            }
        }
    }

    fn run(&mut self, cost: &[Rational]) -> Option<usize> {
        let mut d = self.reduced_costs(cost);
        loop {
            match self.step(cost, &mut d) {
                Step::Optimal => return None,
                Step::Unbounded { entering } => return Some(entering),
                Step::Moved => {}
            }
        }
    }

    /// `cost_Bᵀ B⁻¹`, read off the artificial block.
    fn row_duals(&self, cost: &[Rational]) -> Vec<Rational> {
        let m = self.basis.len();
        let mut w = vec![Rational::zero(); m];
        for (r, &b) in self.basis.iter().enumerate() {
            if cost[b].is_zero() {
                continue;
            }
            for (i, wi) in w.iter_mut().enumerate() {
                let v = &self.t[r][self.art_start + i];
                if !v.is_zero() {
                    *wi += &cost[b] * v;
                }
            }
        }
        w
    }
}

fn check_shape(lp: &LinearProgram) -> Result<()> {
    let n = lp.num_vars();
    if lp.lower.len() != n || lp.upper.len() != n {
        return Err(Error::Internal("bound vectors do not match the objective length".into()));
    }
    for (i, row) in lp.rows.iter().enumerate() {
        if let Some((j, _)) = row.coeffs.iter().find(|(j, _)| *j >= n) {
            return Err(Error::Internal(format!("row {i} references variable {j} of {n}")));
        }
    }
    for j in 0..n {
        if let (Some(l), Some(u)) = (&lp.lower[j], &lp.upper[j]) {
            if l > u {
                return Err(Error::Internal(format!("variable {j} has empty bounds [{l}, {u}]")));
            }
        }
    }
    Ok(())
}

/// Solves `lp` exactly. Pivoting follows Bland's rule throughout, so the
/// result is deterministic.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome> {
    check_shape(lp)?;
    let n = lp.num_vars();
    let m = lp.rows.len();

    // Internal variables for user columns.
    let mut maps = Vec::with_capacity(n);
    let mut ub: Vec<Option<Rational>> = Vec::new();
    for j in 0..n {
        match (&lp.lower[j], &lp.upper[j]) {
            (Some(l), u) => {
                maps.push(VarMap::Up(ub.len(), l.clone()));
                ub.push(u.as_ref().map(|u| u - l));
            }
            (None, Some(u)) => {
                maps.push(VarMap::Down(ub.len(), u.clone()));
                ub.push(None);
            }
            (None, None) => {
                maps.push(VarMap::Split(ub.len(), ub.len() + 1));
                ub.push(None);
                ub.push(None);
            }
        }
    }
    let nz = ub.len();
    let slack_rows: Vec<usize> = (0..m).filter(|&i| lp.rows[i].kind != RowKind::Eq).collect();
    let art_start = nz + slack_rows.len();
    let ncols = art_start + m;
    ub.extend(std::iter::repeat(None).take(slack_rows.len() + m));

    let mut t = vec![vec![Rational::zero(); ncols]; m];
    let mut rhs = Vec::with_capacity(m);
    let mut flip = Vec::with_capacity(m);
    let mut slack_of_row = vec![None; m];
    for (k, &i) in slack_rows.iter().enumerate() {
        slack_of_row[i] = Some(nz + k);
    }
    for (i, row) in lp.rows.iter().enumerate() {
        let mut b = row.rhs.clone();
        for (j, a) in &row.coeffs {
            match &maps[*j] {
                VarMap::Up(z, s) => {
                    t[i][*z] += a;
                    b -= a * s;
                }
                VarMap::Down(z, s) => {
                    t[i][*z] -= a;
                    b -= a * s;
                }
                VarMap::Split(p, q) => {
                    t[i][*p] += a;
                    t[i][*q] -= a;
                }
            }
        }
        if let Some(s) = slack_of_row[i] {
            t[i][s] = if row.kind == RowKind::Le { Rational::one() } else { -Rational::one() };
        }
        let f = if b.is_negative() { -Rational::one() } else { Rational::one() };
        if b.is_negative() {
            for v in t[i].iter_mut() {
                if !v.is_zero() {
                    *v = -&*v;
                }
            }
            b = -b;
        }
        t[i][art_start + i] = Rational::one();
        rhs.push(b);
        flip.push(f);
    }

    let mut tab = Tableau {
        t,
        xb: rhs,
        basis: (art_start..ncols).collect(),
        ub,
        at_upper: vec![false; ncols],
        ncols,
        art_start,
    };

    // Phase 1.
    let mut cost1 = vec![Rational::zero(); ncols];
    for c in cost1.iter_mut().skip(art_start) {
        *c = Rational::one();
    }
    if tab.run(&cost1).is_some() {
        return Err(Error::Internal("phase 1 reported an unbounded ray".into()));
    }
    let infeas: Rational = tab
        .basis
        .iter()
        .zip(&tab.xb)
        .filter(|(b, _)| **b >= art_start)
        .map(|(_, v)| v)
        .sum();
    if infeas.is_positive() {
        let w = tab.row_duals(&cost1);
        // Undo the row flips; y = −ŵ.
        let certificate = w.iter().zip(&flip).map(|(wi, f)| -(wi * f)).collect();
        return Ok(LpOutcome::Infeasible { certificate });
    }

    // Phase 2 with artificials pinned at zero.
    for a in art_start..ncols {
        tab.ub[a] = Some(Rational::zero());
        tab.at_upper[a] = false;
    }
    let mut cost2 = vec![Rational::zero(); ncols];
    let sign = match lp.sense {
        Sense::Minimize => Rational::one(),
        Sense::Maximize => -Rational::one(),
    };
    for (j, c) in lp.objective.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        match &maps[j] {
            VarMap::Up(z, _) => cost2[*z] += c * &sign,
            VarMap::Down(z, _) => cost2[*z] -= c * &sign,
            VarMap::Split(p, q) => {
                cost2[*p] += c * &sign;
                cost2[*q] -= c * &sign;
            }
        }
    }
    let unbounded = tab.run(&cost2);

    let pos = tab.is_basic();
    let zval: Vec<Rational> = (0..nz).map(|j| tab.value(j, &pos)).collect();
    let user = |z: &[Rational], with_shift: bool| -> Vec<Rational> {
        maps.iter()
            .map(|mp| match mp {
                VarMap::Up(k, s) => {
                    if with_shift {
                        s + &z[*k]
                    } else {
                        z[*k].clone()
                    }
                }
                VarMap::Down(k, s) => {
                    if with_shift {
                        s - &z[*k]
                    } else {
                        -&z[*k]
                    }
                }
                VarMap::Split(p, q) => &z[*p] - &z[*q],
            })
            .collect()
    };
    let primal = user(&zval, true);

    if let Some(j) = unbounded {
        let mut dz = vec![Rational::zero(); ncols];
        dz[j] = Rational::one();
        for (r, &b) in tab.basis.iter().enumerate() {
            if !tab.t[r][j].is_zero() {
                dz[b] = -&tab.t[r][j];
            }
        }
        let ray = user(&dz[..nz], false);
        return Ok(LpOutcome::Unbounded { point: primal, ray });
    }

    let w = tab.row_duals(&cost2);
    let dual = w.iter().zip(&flip).map(|(wi, f)| wi * f * &sign).collect();
    let objective = lp.objective_value(&primal);
    Ok(LpOutcome::Optimal { primal, dual, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;
    use crate::lp::{LinearProgram, RowKind, Sense};
    use proptest::prelude::*;

    fn r(v: i64) -> Rational {
        rat(v, 1)
    }

    /// Checks every certificate the solver can return.
    pub(crate) fn certify(lp: &LinearProgram, out: &LpOutcome) -> std::result::Result<(), String> {
        let feasible = |x: &[Rational]| -> std::result::Result<(), String> {
            for j in 0..lp.num_vars() {
                if lp.lower[j].as_ref().is_some_and(|l| x[j] < *l) || lp.upper[j].as_ref().is_some_and(|u| x[j] > *u) {
                    return Err(format!("bound violated on x{j}"));
                }
            }
            for (i, row) in lp.rows.iter().enumerate() {
                let a = lp.row_activity(i, x);
                let ok = match row.kind {
                    RowKind::Le => a <= row.rhs,
                    RowKind::Ge => a >= row.rhs,
                    RowKind::Eq => a == row.rhs,
                };
                if !ok {
                    return Err(format!("row {i} violated"));
                }
            }
            Ok(())
        };
        match out {
            LpOutcome::Optimal { primal, dual, objective } => {
                feasible(primal)?;
                let max = lp.sense == Sense::Maximize;
                let mut dual_obj = Rational::zero();
                for (i, row) in lp.rows.iter().enumerate() {
                    let y = &dual[i];
                    let sign_ok = match (row.kind, max) {
                        (RowKind::Le, false) | (RowKind::Ge, true) => !y.is_positive(),
                        (RowKind::Ge, false) | (RowKind::Le, true) => !y.is_negative(),
                        (RowKind::Eq, _) => true,
                    };
                    if !sign_ok {
                        return Err(format!("dual sign on row {i}"));
                    }
                    if !y.is_zero() && lp.row_activity(i, primal) != row.rhs {
                        return Err(format!("slackness on row {i}"));
                    }
                    dual_obj += y * &row.rhs;
                }
                let aty = lp.transpose_times(dual);
                for j in 0..lp.num_vars() {
                    let mut d = &lp.objective[j] - &aty[j];
                    if max {
                        d = -d;
                    }
                    // d is now a minimisation reduced cost.
                    let bound = if d.is_positive() {
                        &lp.lower[j]
                    } else if d.is_negative() {
                        &lp.upper[j]
                    } else {
                        continue;
                    };
                    let Some(b) = bound else { return Err(format!("reduced cost on unbounded side of x{j}")) };
                    if primal[j] != *b {
                        return Err(format!("bound slackness on x{j}"));
                    }
                    dual_obj += (if max { -d } else { d }) * b;
                }
                if dual_obj != *objective || lp.objective_value(primal) != *objective {
                    return Err("duality gap".into());
                }
                Ok(())
            }
            LpOutcome::Infeasible { certificate } => {
                let mut yb = Rational::zero();
                for (row, y) in lp.rows.iter().zip(certificate) {
                    let ok = match row.kind {
                        RowKind::Le => !y.is_negative(),
                        RowKind::Ge => !y.is_positive(),
                        RowKind::Eq => true,
                    };
                    if !ok {
                        return Err("certificate sign".into());
                    }
                    yb += y * &row.rhs;
                }
                let aty = lp.transpose_times(certificate);
                let mut min = Rational::zero();
                for j in 0..lp.num_vars() {
                    let bound = if aty[j].is_positive() {
                        &lp.lower[j]
                    } else if aty[j].is_negative() {
                        &lp.upper[j]
                    } else {
                        continue;
                    };
                    let Some(b) = bound else { return Err("certificate unbounded over the box".into()) };
                    min += &aty[j] * b;
                }
                if min > yb {
                    Ok(())
                } else {
                    Err("certificate does not separate".into())
                }
            }
            LpOutcome::Unbounded { point, ray } => {
                feasible(point)?;
                for j in 0..lp.num_vars() {
                    if (ray[j].is_negative() && lp.lower[j].is_some()) || (ray[j].is_positive() && lp.upper[j].is_some()) {
                        return Err(format!("ray leaves the box on x{j}"));
                    }
                }
                for (i, row) in lp.rows.iter().enumerate() {
                    let a = lp.row_activity(i, ray);
                    let ok = match row.kind {
                        RowKind::Le => !a.is_positive(),
                        RowKind::Ge => !a.is_negative(),
                        RowKind::Eq => a.is_zero(),
                    };
                    if !ok {
                        return Err(format!("ray leaves row {i}"));
                    }
                }
                let slope = lp.objective_value(ray);
                let improving = match lp.sense {
                    Sense::Minimize => slope.is_negative(),
                    Sense::Maximize => slope.is_positive(),
                };
                if improving {
                    Ok(())
                } else {
                    Err("ray does not improve".into())
                }
            }
        }
    }

    #[test]
    fn single_bounded_max() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![r(1)]);
        lp.add_row(vec![(0, r(1))], RowKind::Le, r(2));
        let out = solve_lp(&lp).unwrap();
        assert_eq!(out, LpOutcome::Optimal { primal: vec![r(2)], dual: vec![r(1)], objective: r(2) });
        certify(&lp, &out).unwrap();
    }

    #[test]
    fn single_unbounded_max() {
        let lp = LinearProgram::new(Sense::Maximize, vec![r(1)]);
        let out = solve_lp(&lp).unwrap();
        match &out {
            LpOutcome::Unbounded { ray, .. } => assert_eq!(ray, &vec![r(1)]),
            other => panic!("{other:?}"),
        }
        certify(&lp, &out).unwrap();
    }

    #[test]
    fn two_variable_hand_solve() {
        let mut lp = LinearProgram::new(Sense::Minimize, vec![r(0), r(1)]);
        lp.add_row(vec![(0, r(1)), (1, r(1))], RowKind::Eq, r(1));
        lp.set_bounds(0, Some(r(0)), Some(rat(1, 2)));
        let out = solve_lp(&lp).unwrap();
        match &out {
            LpOutcome::Optimal { primal, objective, .. } => {
                assert_eq!(primal, &vec![rat(1, 2), rat(1, 2)]);
                assert_eq!(objective, &rat(1, 2));
            }
            other => panic!("{other:?}"),
        }
        certify(&lp, &out).unwrap();
    }

    #[test]
    fn infeasible_rows_give_certificate() {
        // x + y ≤ 1, x + y ≥ 2
        let mut lp = LinearProgram::new(Sense::Minimize, vec![r(0), r(0)]);
        lp.add_row(vec![(0, r(1)), (1, r(1))], RowKind::Le, r(1));
        lp.add_row(vec![(0, r(1)), (1, r(1))], RowKind::Ge, r(2));
        let out = solve_lp(&lp).unwrap();
        assert!(matches!(out, LpOutcome::Infeasible { .. }));
        certify(&lp, &out).unwrap();
    }

    #[test]
    fn free_and_upper_only_variables() {
        // min x − y, x free, y ≤ 3, x ≥ y − 1 written as x − y ≥ −1
        let mut lp = LinearProgram::new(Sense::Minimize, vec![r(1), r(-1)]);
        lp.set_bounds(0, None, None);
        lp.set_bounds(1, None, Some(r(3)));
        lp.add_row(vec![(0, r(1)), (1, r(-1))], RowKind::Ge, r(-1));
        let out = solve_lp(&lp).unwrap();
        match &out {
            LpOutcome::Optimal { objective, .. } => assert_eq!(objective, &r(-1)),
            other => panic!("{other:?}"),
        }
        certify(&lp, &out).unwrap();
    }

    #[test]
    fn malformed_bounds_are_rejected() {
        let mut lp = LinearProgram::new(Sense::Minimize, vec![r(1)]);
        lp.set_bounds(0, Some(r(2)), Some(r(1)));
        assert!(solve_lp(&lp).is_err());
    }

    fn bound() -> impl Strategy<Value = Option<i64>> {
        prop_oneof![Just(None), (-3i64..4).prop_map(Some)]
    }

    fn random_lp() -> impl Strategy<Value = LinearProgram> {
        (1usize..5, 0usize..5).prop_flat_map(|(n, m)| {
            (
                any::<bool>(),
                proptest::collection::vec(-3i64..4, n),
                proptest::collection::vec((proptest::collection::vec(-3i64..4, n), 0u8..3, -4i64..5), m),
                proptest::collection::vec((bound(), 0i64..4), n),
            )
                .prop_map(move |(max, c, rows, bounds)| {
                    let sense = if max { Sense::Maximize } else { Sense::Minimize };
                    let mut lp = LinearProgram::new(sense, c.into_iter().map(r).collect());
                    for (coeffs, kind, b) in rows {
                        let kind = [RowKind::Le, RowKind::Eq, RowKind::Ge][kind as usize];
                        let coeffs = coeffs.into_iter().enumerate().filter(|(_, v)| *v != 0).map(|(j, v)| (j, r(v))).collect();
                        lp.add_row(coeffs, kind, r(b));
                    }
                    for (j, (lo, width)) in bounds.into_iter().enumerate() {
                        let hi = if width == 0 { None } else { lo.map(|l| l + width) };
                        lp.set_bounds(j, lo.map(r), hi.map(r));
                    }
                    lp
                })
        })
    }

    proptest! {
        #[test]
        fn every_outcome_certifies(lp in random_lp()) {
            let out = solve_lp(&lp).unwrap();
            prop_assert_eq!(certify(&lp, &out), Ok(()));
            // Same input, same answer.
            prop_assert_eq!(solve_lp(&lp).unwrap(), out);
        }
    }
}
