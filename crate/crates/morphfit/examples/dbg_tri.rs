use morphfit::fitting::{mark_integral, relabel, select_fit_nodes, FitMode, WeightState};
use morphfit::geometry::{builtin_shape, eval_levelset};
use morphfit::mesh::{make_cartesian_tri, TriSplit};
use morphfit::solver::{newton_fit, SolverConfig};
use morphfit::tmop::{MetricId, TargetSpec};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let nx: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(10);
    let split = if args.get(2).map(|s| s == "four").unwrap_or(false) { TriSplit::Four } else { TriSplit::Two };
    let mut mesh = make_cartesian_tri([nx, nx, 1], 2, split).unwrap();
    let ls = builtin_shape("circle").unwrap();
    let eta = mark_integral(&mesh, &ls).unwrap();
    let (labels, _req) = relabel(&mesh, &eta);
    mesh.set_material(Some(labels)).unwrap();
    let fit_set = select_fit_nodes(&mesh, &FitMode::Interface).unwrap();
    let fixed = mesh.boundary_node_set().without(&fit_set);
    let mut w = WeightState::adaptive(1.0);
    let cfg = SolverConfig { max_iter: 100, ..SolverConfig::default() };
    let metric = MetricId::from_number(2, 0.5).unwrap();
    let target = TargetSpec::identity();
    let report = newton_fit(&mut mesh, &target, metric, &ls, &fit_set, &fixed, &mut w, &cfg).unwrap();
    println!("termination {:?} iters {}", report.termination, report.iterations());
    for r in &report.rows {
        println!(
            "it {:3} f_mu {:.4e} fit {:.3e} gnorm {:.3e} mindet {:.4e} alpha {:.3e} w {:.1e} mr {}",
            r.iter,
            r.f_mu,
            r.fit_error.unwrap_or(f64::NAN),
            r.grad_norm,
            r.min_det,
            r.alpha,
            r.weight,
            r.minres_iters
        );
    }
    let nq = mesh.ref_elem().quadrature().points.len();
    let mut det_elem = (f64::INFINITY, 0usize);
    for e in 0..mesh.num_elems() {
        for q in 0..nq {
            let d = mesh.jacobian_at_q(e, q).det();
            if d < det_elem.0 {
                det_elem = (d, e);
            }
        }
    }
    let e = det_elem.1;
    let mat = mesh.material().unwrap();
    let verts: Vec<_> = mesh.elem_nodes(e).iter().take(3).map(|&i| mesh.node(i)).collect();
    println!("floor elem {e} det {:.3e} mat {} verts {:?}", det_elem.0, mat[e], verts);
    let mut worst: Vec<(f64, usize)> = fit_set
        .iter()
        .map(|i| (eval_levelset(&ls, mesh.node(i)).unwrap().sigma.abs(), i))
        .collect();
    worst.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    for (s, i) in worst.iter().take(8) {
        let p = mesh.node(*i);
        println!("node {i} sigma {s:.3e} at ({:.4}, {:.4})", p[0], p[1]);
    }
}
// appended: trajectory + floor-element report via a second pass
