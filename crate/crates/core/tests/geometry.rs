mod common;

use common::*;
use nalgebra::DMatrix;
use tucker_completion::manifold::{
    euclid_project_tangent, gaussian_ambient, group_act, group_act_tangent, horizontal_defect, metric,
    project_horizontal, project_tangent, rand_tangent, retract, tangent_defect, transport, vertical_vector,
};
use tucker_completion::random::{gaussian_matrix, rng};
use tucker_completion::smallmat::{orthonormality_error, polar_factor};
use tucker_completion::{GroupElement, QuotientGeometry, SkewTriple, TuckerPoint, TuckerTangent};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn tangent_rel(a: &TuckerTangent<f64>, b: &TuckerTangent<f64>) -> f64 {
    a.sub(b).euclid_norm() / b.euclid_norm().max(f64::MIN_POSITIVE)
}

fn rand_group(ranks: [usize; 3], seed: u64) -> GroupElement<f64> {
    let mut r = rng(seed);
    GroupElement::new(ranks.map(|k| polar_factor(&gaussian_matrix(&mut r, k, k)).unwrap())).unwrap()
}

fn rand_skew(ranks: [usize; 3], seed: u64) -> SkewTriple<f64> {
    let mut r = rng(seed);
    SkewTriple(ranks.map(|k| {
        let m: DMatrix<f64> = gaussian_matrix(&mut r, k, k);
        &m - m.transpose()
    }))
}

fn instance(seed: u64) -> TuckerPoint<f64> {
    let (dims, ranks) = rand_shape(seed, 7, 3);
    point(dims, ranks, seed)
}

#[test]
fn tangent_projection_is_idempotent_and_metric_orthogonal() {
    for seed in 0..15 {
        let x = instance(seed);
        let y = gaussian_ambient(&x, seed + 1);
        let p = project_tangent(&x, &y).unwrap();
        assert!(tangent_defect(&x, &p) < 1e-12, "seed {seed}");
        assert!(tangent_rel(&project_tangent(&x, &p).unwrap(), &p) < 1e-12);
        let xi = rand_tangent(&x, seed + 2).unwrap();
        let g = metric(&x, &y.sub(&p), &xi).unwrap();
        assert!(g.abs() < 1e-11 * metric(&x, &y, &y).unwrap().sqrt() * metric(&x, &xi, &xi).unwrap().sqrt());
    }
}

#[test]
fn horizontal_projection_properties() {
    for seed in 0..15 {
        let x = instance(seed);
        let eta = project_tangent(&x, &gaussian_ambient(&x, seed + 3)).unwrap();
        let h = project_horizontal(&x, &eta).unwrap();
        assert!(horizontal_defect(&x, &h).unwrap() < 1e-10, "seed {seed}");
        assert!(tangent_defect(&x, &h) < 1e-10, "seed {seed} {:e} {:?} {:?}", tangent_defect(&x, &h), x.dims(), x.ranks());
        assert!(tangent_rel(&project_horizontal(&x, &h).unwrap(), &h) < 1e-10);

        let v = vertical_vector(&x, &rand_skew(x.ranks(), seed)).unwrap();
        assert!(project_horizontal(&x, &v).unwrap().euclid_norm() <= 1e-10 * v.euclid_norm());
        assert!(metric(&x, &h, &v).unwrap().abs() <= 1e-10 * metric(&x, &h, &h).unwrap().sqrt() * metric(&x, &v, &v).unwrap().sqrt());
        assert!(metric(&x, &eta.sub(&h), &h).unwrap().abs() <= 1e-10 * metric(&x, &eta, &eta).unwrap());
    }
}

#[test]
fn horizontal_split_solves_kronecker_form_equations() {
    let geom = QuotientGeometry::default();
    for seed in 0..10 {
        let x = instance(seed);
        let eta = project_tangent(&x, &gaussian_ambient(&x, seed + 4)).unwrap();
        let (h, omega) = geom.horizontal_split(&x, &eta).unwrap();
        let rhs = coupled_rhs(&x, &eta.factors, &eta.core);
        let lhs = coupled_lhs_kron(x.core(), &omega);
        assert!(lhs.axpy(-1.0, &rhs).norm() <= 1e-9 * rhs.norm().max(1e-300), "seed {seed}");
        let back = h.axpy(1.0, &vertical_vector(&x, &omega).unwrap());
        assert!(tangent_rel(&back, &eta) < 1e-12);
    }
}

#[test]
fn metric_is_symmetric_and_positive() {
    for seed in 0..15 {
        let x = instance(seed);
        let a = rand_tangent(&x, seed).unwrap();
        let b = rand_tangent(&x, seed + 100).unwrap();
        assert!(rel(metric(&x, &a, &b).unwrap(), metric(&x, &b, &a).unwrap()) < 1e-12);
        assert!(metric(&x, &a, &a).unwrap() > 0.0);
    }
    let x = instance(0);
    assert_eq!(metric(&x, &TuckerTangent::zeros_at(&x), &TuckerTangent::zeros_at(&x)).unwrap(), 0.0);
}

#[test]
fn group_action_invariances() {
    for seed in 0..15 {
        let x = instance(seed);
        let o = rand_group(x.ranks(), seed + 7);
        let y = group_act(&x, &o).unwrap();
        assert!(rel_err_t(&dense_tucker(&y), &dense_tucker(&x)) < 1e-12);

        let a = rand_tangent(&x, seed).unwrap();
        let b = rand_tangent(&x, seed + 1).unwrap();
        let (ao, bo) = (group_act_tangent(&a, &o).unwrap(), group_act_tangent(&b, &o).unwrap());
        assert!(rel(metric(&y, &ao, &bo).unwrap(), metric(&x, &a, &b).unwrap()) < 1e-10);

        let eta = project_tangent(&x, &gaussian_ambient(&x, seed + 9)).unwrap();
        let moved = project_horizontal(&y, &group_act_tangent(&eta, &o).unwrap()).unwrap();
        let expected = group_act_tangent(&project_horizontal(&x, &eta).unwrap(), &o).unwrap();
        assert!(tangent_rel(&moved, &expected) < 1e-9, "seed {seed}");
    }
}

#[test]
fn retraction_is_first_order_rigid() {
    for seed in 0..10 {
        let x = instance(seed);
        let xi = rand_tangent(&x, seed).unwrap();
        assert!(tangent_rel(&TuckerTangent::new(retract(&x, &TuckerTangent::zeros_at(&x)).unwrap().factors().clone(), retract(&x, &TuckerTangent::zeros_at(&x)).unwrap().core().clone()), &TuckerTangent::new(x.factors().clone(), x.core().clone())) < 1e-12);
        let err = |t: f64| {
            let y = retract(&x, &xi.scale(t)).unwrap();
            assert!(orthonormality_error(y.factor(1)) < 1e-12);
            let diff = TuckerTangent::new(
                std::array::from_fn(|d| (y.factor(d + 1) - x.factor(d + 1)) / t),
                y.core().axpy(-1.0, x.core()).scale(1.0 / t),
            );
            (diff.sub(&xi).euclid_norm(), diff.euclid_norm() / xi.euclid_norm())
        };
        let (e4, _) = err(1e-4);
        let (e5, ratio) = err(1e-5);
        assert!((ratio - 1.0).abs() < 0.1, "seed {seed}");
        assert!(e5 < e4 * 0.2 || e4 < 1e-9, "seed {seed}: {e4:e} {e5:e}");
    }
}

#[test]
fn moving_along_vertical_keeps_the_tensor() {
    let x = instance(3);
    let v = vertical_vector(&x, &rand_skew(x.ranks(), 4)).unwrap();
    let t = 1e-6;
    let y = retract(&x, &v.scale(t)).unwrap();
    let change = rel_err_t(&dense_tucker(&y), &dense_tucker(&x));
    assert!(change < 1e-9, "{change:e}");
}

#[test]
fn transport_lands_in_horizontal_space() {
    for seed in 0..10 {
        let x = instance(seed);
        let eta = rand_tangent(&x, seed).unwrap().scale(0.3);
        let xi = rand_tangent(&x, seed + 1).unwrap();
        let y = retract(&x, &eta).unwrap();
        let moved = transport(&x, &eta, &xi).unwrap();
        assert!(tangent_defect(&y, &moved) < 1e-11);
        assert!(horizontal_defect(&y, &moved).unwrap() < 1e-9);
    }
}

#[test]
fn euclidean_projection_is_tangent() {
    let x = instance(2);
    let p = euclid_project_tangent(&x, &gaussian_ambient(&x, 1)).unwrap();
    assert!(tangent_defect(&x, &p) < 1e-12);
    assert!(tangent_rel(&euclid_project_tangent(&x, &p).unwrap(), &p) < 1e-12);
}

#[test]
fn single_precision_geometry_works() {
    let x: TuckerPoint<f32> = tucker_completion::manifold::rand_point([6, 5, 4], [2, 2, 2], 3).unwrap();
    let xi = rand_tangent(&x, 1).unwrap();
    assert!(horizontal_defect(&x, &xi).unwrap() < 1e-4);
    assert!(metric(&x, &xi, &xi).unwrap() > 0.0);
}
