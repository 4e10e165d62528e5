//! Shared test oracles, independent of the library's solve path:
//! central-finite-difference Jacobians, a dense normal-equations LM solver
//! with the same schedule as the library solver, and random consistent
//! graph generation.

use farm_slam::geometry::{wrap_angle, Point2, Pose2, RangeBearing};
use farm_slam::graph::{Factor, FactorGraph, FactorId, SolverConfig, Value, VariableId};
use farm_slam::sonar::predict_range_bearing;
use nalgebra::{DMatrix, DVector, Matrix2, Matrix3};
use std::collections::BTreeMap;

/// Deterministic xorshift-based uniform in [0, 1); keeps the oracles free of
/// external RNG dependencies.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1))
    }
    pub fn next_f64(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.next_f64().max(1e-12);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Whitener W = L⁻¹ with cov = L Lᵀ, computed independently of the library.
fn whitener(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let chol = cov.clone().cholesky().expect("SPD noise");
    let n = cov.nrows();
    chol.l()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .expect("triangular solve")
}

fn factor_noise(factor: &Factor) -> DMatrix<f64> {
    fn from3(m: &Matrix3<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(3, 3, m.as_slice())
    }
    fn from2(m: &Matrix2<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 2, m.as_slice())
    }
    match factor {
        Factor::PosePrior { cov, .. } | Factor::Odometry { cov, .. } => from3(cov),
        Factor::BuoyPrior { cov, .. } | Factor::RopePrior { cov, .. } => from2(cov),
        Factor::BuoyObs { meas, .. } | Factor::RopeObs { meas, .. } => from2(&meas.cov),
    }
}

fn perturbed(values: &BTreeMap<VariableId, Value>, id: VariableId, coord: usize, eps: f64) -> BTreeMap<VariableId, Value> {
    let mut out = values.clone();
    let v = out.get_mut(&id).expect("variable present");
    match v {
        Value::Pose(p) => match coord {
            0 => p.x += eps,
            1 => p.y += eps,
            _ => p.theta = wrap_angle(p.theta + eps),
        },
        Value::Point(p) => match coord {
            0 => p.x += eps,
            _ => p.y += eps,
        },
    }
    out
}

/// Central finite differences of the whitened residual of one factor with
/// respect to each connected variable's local coordinates.
pub fn finite_difference_jacobians(
    graph: &FactorGraph,
    fid: FactorId,
    step: f64,
) -> Vec<DMatrix<f64>> {
    let factor = graph.factor(fid).expect("factor exists").clone();
    let base = graph.values_snapshot();
    let w = whitener(&factor_noise(&factor));
    let dim = factor.dim();

    let mut out = Vec::new();
    for var in factor.connected() {
        let vdim = var.kind.dim();
        let mut jac = DMatrix::zeros(dim, vdim);
        for c in 0..vdim {
            let mut g = graph.clone();
            g.set_values(&perturbed(&base, var, c, step));
            let plus = &w * g.residual(fid).expect("residual");
            g.set_values(&perturbed(&base, var, c, -step));
            let minus = &w * g.residual(fid).expect("residual");
            for r in 0..dim {
                // residual components that are angles must be differenced on
                // the circle
                let d = wrap_angle(plus[r] - minus[r]);
                jac[(r, c)] = d / (2.0 * step);
            }
        }
        out.push(jac);
    }
    out
}

/// Dense normal-equations Levenberg-Marquardt with the same schedule as the
/// library solver (damping, accept rule, stopping), but dense assembly, a
/// plain variable ordering and nalgebra's dense Cholesky.
pub fn solve_dense_lm(graph: &mut FactorGraph, config: &SolverConfig) -> (BTreeMap<VariableId, Value>, f64, bool) {
    const CHI2_ABS_FLOOR: f64 = 1e-20;
    const DAMPING_FLOOR: f64 = 1e-12;

    // plain sorted ordering, unrelated to the library's elimination order
    let ids: Vec<VariableId> = graph.values_snapshot().keys().copied().collect();
    let mut offsets = BTreeMap::new();
    let mut total = 0usize;
    for id in &ids {
        offsets.insert(*id, total);
        total += id.kind.dim();
    }

    let assemble = |graph: &FactorGraph| -> (DMatrix<f64>, DVector<f64>) {
        let mut h = DMatrix::zeros(total, total);
        let mut g = DVector::zeros(total);
        for i in 0..graph.factor_count() {
            let lin = graph.linearize(FactorId(i)).expect("linearize");
            for (a, va) in lin.vars.iter().enumerate() {
                let ja = &lin.jacobians[a];
                let oa = offsets[va];
                let grad = ja.transpose() * &lin.residual;
                for r in 0..ja.ncols() {
                    g[oa + r] -= grad[r];
                }
                for (b, vb) in lin.vars.iter().enumerate() {
                    let jb = &lin.jacobians[b];
                    let ob = offsets[vb];
                    let block = ja.transpose() * jb;
                    for r in 0..block.nrows() {
                        for c in 0..block.ncols() {
                            h[(oa + r, ob + c)] += block[(r, c)];
                        }
                    }
                }
            }
        }
        (h, g)
    };

    let apply = |graph: &mut FactorGraph, delta: &DVector<f64>| {
        let mut vals = graph.values_snapshot();
        for (id, off) in &offsets {
            let v = vals.get_mut(id).unwrap();
            match v {
                Value::Pose(p) => {
                    p.x += delta[*off];
                    p.y += delta[*off + 1];
                    p.theta = wrap_angle(p.theta + delta[*off + 2]);
                }
                Value::Point(p) => {
                    p.x += delta[*off];
                    p.y += delta[*off + 1];
                }
            }
        }
        graph.set_values(&vals);
    };

    let mut chi2 = graph.chi2().expect("chi2");
    let mut lambda = config.lambda_init;
    let mut converged = chi2 <= CHI2_ABS_FLOOR;
    let mut iterations = 0;

    while !converged && iterations < config.max_iterations {
        let (h, g) = assemble(graph);
        let mut accepted = false;
        while lambda <= config.lambda_max {
            let mut hd = h.clone();
            for k in 0..total {
                let d = h[(k, k)];
                hd[(k, k)] = d + lambda * d.max(DAMPING_FLOOR);
            }
            let delta = match hd.cholesky() {
                Some(ch) => ch.solve(&g),
                None => {
                    lambda *= config.lambda_up;
                    continue;
                }
            };
            let before = graph.values_snapshot();
            apply(graph, &delta);
            let new_chi2 = graph.chi2().expect("chi2");
            if new_chi2 <= chi2 {
                let improvement = chi2 - new_chi2;
                lambda = (lambda / config.lambda_down).max(config.lambda_min);
                iterations += 1;
                if new_chi2 <= CHI2_ABS_FLOOR
                    || (improvement <= config.rel_tolerance * chi2
                        && delta.amax() <= config.step_tolerance)
                {
                    converged = true;
                }
                chi2 = new_chi2;
                accepted = true;
                break;
            }
            graph.set_values(&before);
            lambda *= config.lambda_up;
        }
        if !accepted {
            break;
        }
    }
    (graph.values_snapshot(), chi2, converged)
}

/// Random consistent pose/landmark graph: an anchored odometry chain with
/// buoy and per-detection rope landmarks, measurements generated from ground
/// truth plus small noise, initial values perturbed from truth.
///
/// The injected measurement noise is kept tiny on purpose: the optimum then
/// has a small chi², where an accepted-step comparison can still resolve
/// improvements near machine precision. With large residuals the f64 noise
/// floor of the chi² sum caps how precisely any chi²-comparison LM can
/// localize the minimizer, and solver-equivalence bounds in the 1e-8 range
/// would be meaningless.
pub fn random_graph(seed: u64, max_variables: usize) -> FactorGraph {
    let mut rng = TestRng::new(seed);
    let n_poses = 4 + (rng.next_f64() * 8.0) as usize;
    let n_buoys = 1 + (rng.next_f64() * 3.0) as usize;
    let n_ropes = (rng.next_f64() * 5.0) as usize;
    let (n_poses, n_buoys, n_ropes) = clamp_counts(n_poses, n_buoys, n_ropes, max_variables);

    // ground truth
    let mut poses = vec![Pose2::new(0.0, 0.0, rng.range(-0.3, 0.3))];
    for _ in 1..n_poses {
        let prev = *poses.last().unwrap();
        let step = Pose2::new(rng.range(0.5, 2.0), rng.range(-0.3, 0.3), rng.range(-0.4, 0.4));
        poses.push(prev.compose(&step));
    }
    let buoys: Vec<Point2> = (0..n_buoys)
        .map(|_| Point2::new(rng.range(-5.0, 15.0), rng.range(-8.0, 8.0)))
        .collect();

    let obs_cov = Matrix2::new(0.04, 0.0, 0.0, 0.0025);
    let odom_cov = Matrix3::from_diagonal(&nalgebra::Vector3::new(2e-3, 2e-3, 1e-3));

    let mut graph = FactorGraph::new();
    let pose_ids: Vec<VariableId> = poses
        .iter()
        .map(|p| {
            graph.add_pose_variable(Pose2::new(
                p.x + rng.range(-0.3, 0.3),
                p.y + rng.range(-0.3, 0.3),
                p.theta + rng.range(-0.1, 0.1),
            ))
        })
        .collect();
    let buoy_ids: Vec<VariableId> = buoys
        .iter()
        .map(|b| graph.add_buoy_variable(Point2::new(b.x + rng.range(-0.4, 0.4), b.y + rng.range(-0.4, 0.4))))
        .collect();

    graph
        .add_factor(Factor::PosePrior {
            pose: pose_ids[0],
            mean: poses[0],
            cov: Matrix3::from_diagonal(&nalgebra::Vector3::new(0.01, 0.01, 0.001)),
        })
        .unwrap();
    for i in 1..n_poses {
        let delta = poses[i - 1].between(&poses[i]);
        let meas = Pose2::new(
            delta.x + 1e-4 * rng.normal(),
            delta.y + 1e-4 * rng.normal(),
            delta.theta + 3e-5 * rng.normal(),
        );
        graph
            .add_factor(Factor::Odometry {
                from: pose_ids[i - 1],
                to: pose_ids[i],
                delta: meas,
                cov: odom_cov,
            })
            .unwrap();
    }
    for (k, b) in buoys.iter().enumerate() {
        graph
            .add_factor(Factor::BuoyPrior {
                buoy: buoy_ids[k],
                mean: *b,
                cov: Matrix2::identity() * 0.25,
            })
            .unwrap();
        for (i, p) in poses.iter().enumerate() {
            if rng.next_f64() < 0.6 {
                if let Ok((r, brg)) = predict_range_bearing(p, b) {
                    let meas = RangeBearing::new(
                        (r + 5e-4 * rng.normal()).max(0.05),
                        brg + 2e-4 * rng.normal(),
                        obs_cov,
                    );
                    graph
                        .add_factor(Factor::BuoyObs {
                            pose: pose_ids[i],
                            buoy: buoy_ids[k],
                            meas,
                        })
                        .unwrap();
                }
            }
        }
    }
    // per-detection rope landmarks with anisotropic priors
    for _ in 0..n_ropes {
        let pi = (rng.next_f64() * n_poses as f64) as usize;
        let p = poses[pi.min(n_poses - 1)];
        let target = Point2::new(p.x + rng.range(-4.0, 4.0), p.y + rng.range(1.0, 4.0));
        if let Ok((r, brg)) = predict_range_bearing(&p, &target) {
            let meas = RangeBearing::new(r, brg, obs_cov);
            let var = graph.add_rope_variable(Point2::new(target.x + 0.1, target.y - 0.1));
            let (s, c) = rng.range(0.0, std::f64::consts::PI).sin_cos();
            let rot = Matrix2::new(c, -s, s, c);
            let cov = rot * Matrix2::new(16.0, 0.0, 0.0, 0.01) * rot.transpose();
            graph
                .add_factor(Factor::RopePrior {
                    rope: var,
                    mean: Point2::new(target.x + rng.range(-0.2, 0.2), target.y + rng.range(-0.005, 0.005)),
                    cov,
                })
                .unwrap();
            graph
                .add_factor(Factor::RopeObs {
                    pose: pose_ids[pi.min(n_poses - 1)],
                    rope: var,
                    meas,
                })
                .unwrap();
        }
    }
    graph
}

fn clamp_counts(p: usize, b: usize, r: usize, max: usize) -> (usize, usize, usize) {
    let mut p = p;
    let mut b = b;
    let mut r = r;
    while p + b + r > max {
        if r > 0 {
            r -= 1;
        } else if b > 1 {
            b -= 1;
        } else {
            p -= 1;
        }
    }
    (p, b, r)
}

/// Largest per-variable difference between two value maps (positions and
/// wrapped headings).
pub fn max_value_difference(a: &BTreeMap<VariableId, Value>, b: &BTreeMap<VariableId, Value>) -> f64 {
    let mut max = 0.0f64;
    for (id, va) in a {
        let vb = b[id];
        let d = match (va, vb) {
            (Value::Pose(x), Value::Pose(y)) => {
                (x.x - y.x).abs().max((x.y - y.y).abs()).max(wrap_angle(x.theta - y.theta).abs())
            }
            (Value::Point(x), Value::Point(y)) => (x.x - y.x).abs().max((x.y - y.y).abs()),
            _ => f64::INFINITY,
        };
        max = max.max(d);
    }
    max
}

/// Build a one-factor graph around the given factor for Jacobian checks.
pub fn single_factor_graph(seed: u64, kind_index: usize) -> (FactorGraph, FactorId) {
    let mut rng = TestRng::new(seed ^ 0xfac70a);
    let mut graph = FactorGraph::new();

    let pose = Pose2::new(rng.range(-10.0, 10.0), rng.range(-10.0, 10.0), rng.range(-3.0, 3.0));
    let pose2 = pose.compose(&Pose2::new(rng.range(0.3, 2.0), rng.range(-0.5, 0.5), rng.range(-0.5, 0.5)));
    let lm = Point2::new(pose.x + rng.range(-8.0, 8.0), pose.y + rng.range(0.5, 8.0));

    let p0 = graph.add_pose_variable(pose);
    let cov3 = Matrix3::from_diagonal(&nalgebra::Vector3::new(
        rng.range(0.01, 1.0),
        rng.range(0.01, 1.0),
        rng.range(0.001, 0.1),
    ));
    let cov2 = Matrix2::new(rng.range(0.01, 0.5), 0.0, 0.0, rng.range(0.001, 0.05));

    let factor = match kind_index {
        0 => Factor::PosePrior {
            pose: p0,
            mean: Pose2::new(pose.x + 0.2, pose.y - 0.3, pose.theta + 0.1),
            cov: cov3,
        },
        1 => {
            let p1 = graph.add_pose_variable(pose2);
            let delta = pose.between(&pose2);
            Factor::Odometry {
                from: p0,
                to: p1,
                delta: Pose2::new(delta.x + 0.05, delta.y - 0.04, delta.theta + 0.02),
                cov: cov3,
            }
        }
        2 => {
            let b = graph.add_buoy_variable(lm);
            Factor::BuoyPrior {
                buoy: b,
                mean: Point2::new(lm.x + 0.3, lm.y - 0.2),
                cov: cov2,
            }
        }
        3 => {
            let r = graph.add_rope_variable(lm);
            Factor::RopePrior {
                rope: r,
                mean: Point2::new(lm.x - 1.5, lm.y + 0.05),
                cov: cov2,
            }
        }
        4 => {
            let b = graph.add_buoy_variable(lm);
            let (r, brg) = predict_range_bearing(&pose, &lm).unwrap();
            Factor::BuoyObs {
                pose: p0,
                buoy: b,
                meas: RangeBearing::new(r + 0.05, brg - 0.03, cov2),
            }
        }
        _ => {
            let rv = graph.add_rope_variable(lm);
            let (r, brg) = predict_range_bearing(&pose, &lm).unwrap();
            Factor::RopeObs {
                pose: p0,
                rope: rv,
                meas: RangeBearing::new(r - 0.04, brg + 0.02, cov2),
            }
        }
    };
    let fid = graph.add_factor(factor).unwrap();
    (graph, fid)
}
